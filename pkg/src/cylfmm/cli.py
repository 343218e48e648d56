"""Benchmark harness: random ring-source problems, FMM vs direct errors and phase timings.

Random problems come from numpy's PCG64 seeded through SeedSequence with
one spawn key per stream:

    (0,)                 source positions, (n_sources, 2)
    (1,)                 field positions, (n_field, 2)
    (2 + n,)             real part of the mode-n amplitudes
    (2 + n_modes + n,)   imaginary part (only with --complex-amplitudes)

Each stream draws 53-bit integers k and maps them to (k + 0.5) / 2**53,
so every value lies strictly inside (0, 1).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConfigurationError, CylFMMError, DomainError
from .fmm import MAX_DEPTH, MAX_ORDER, MIN_DEPTH, MIN_ORDER, PHASES, TRUNCATIONS, evaluate
from .oracle import direct_evaluate, modal_errors

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "config", "timings", "throughput"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "config": {"type": "object"},
        "errors": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["mode", "eps"],
                "properties": {"mode": {"type": "integer", "minimum": 0}, "eps": {"type": ["number", "null"]}},
            },
        },
        "timings": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["phase", "seconds"],
                "properties": {"phase": {"type": "string"}, "seconds": {"type": "number", "minimum": 0}},
            },
        },
        "throughput": {"type": "number", "minimum": 0},
    },
}


@dataclass
class RunConfig:
    n_sources: int = 1024
    n_field: int = 1024
    depth: int = 4
    order: int = 10
    n_modes: int = 18
    seed: int = 1
    compare_direct: bool = False
    output_path: str | None = None
    output_format: str = "csv"
    repeat: int = 3
    truncation: str = "product"
    complex_amplitudes: bool = False
    source_file: str | None = None
    field_file: str | None = None

    def validate(self):
        if self.n_modes < 1:
            raise ConfigurationError("n_modes must be at least 1")
        if not MIN_DEPTH <= self.depth <= MAX_DEPTH:
            raise ConfigurationError(f"depth must lie in [{MIN_DEPTH}, {MAX_DEPTH}]")
        if not MIN_ORDER <= self.order <= MAX_ORDER:
            raise ConfigurationError(f"order must lie in [{MIN_ORDER}, {MAX_ORDER}]")
        if self.source_file is None and self.n_sources < 1:
            raise ConfigurationError("n_sources must be at least 1")
        if self.field_file is None and self.n_field < 1:
            raise ConfigurationError("n_field must be at least 1")
        if self.repeat < 1:
            raise ConfigurationError("repeat must be at least 1")
        if self.output_format not in ("csv", "json"):
            raise ConfigurationError("output format must be csv or json")
        if self.truncation not in TRUNCATIONS:
            raise ConfigurationError(f"truncation must be one of {TRUNCATIONS}")
        return self


@dataclass
class RunReport:
    config: RunConfig
    timings: dict
    throughput: float
    errors: np.ndarray | None = None
    potentials: np.ndarray | None = field(default=None, repr=False)


def _open_uniform(rng, shape):
    k = rng.integers(0, 1 << 53, size=shape, dtype=np.int64)
    return (k + 0.5) * 2.0 ** -53


def _stream(seed, key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(key,))))


def generate_problem(config):
    """Sources, amplitudes and field points in the unit square, reproducible from the seed."""
    seed, nm = int(config.seed), int(config.n_modes)
    src = _open_uniform(_stream(seed, 0), (config.n_sources, 2))
    fld = _open_uniform(_stream(seed, 1), (config.n_field, 2))
    amps = np.empty((config.n_sources, nm), dtype=complex)
    for n in range(nm):
        amps[:, n] = _open_uniform(_stream(seed, 2 + n), config.n_sources)
        if config.complex_amplitudes:
            amps[:, n] += 1j * _open_uniform(_stream(seed, 2 + nm + n), config.n_sources)
    return src, amps, fld


def read_points(path, n_modes=None, with_amplitudes=True):
    """Load (r, z[, re0, im0, re1, im1, ...]) rows; '#' lines and a header row are skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise DomainError(f"{path}: non-numeric row {rec!r}") from None
                continue  # header
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise DomainError(f"{path}: expected at least the columns r, z")
    pts = data[:, :2]
    if not with_amplitudes:
        return pts, None
    extra = data[:, 2:]
    if extra.shape[1] == 0 or extra.shape[1] % 2:
        raise DomainError(f"{path}: amplitude columns must come in (re, im) pairs")
    amps = extra[:, 0::2] + 1j * extra[:, 1::2]
    if n_modes is not None:
        if n_modes > amps.shape[1]:
            raise ConfigurationError(f"{path} carries {amps.shape[1]} modes, {n_modes} requested")
        amps = amps[:, :n_modes]
    return pts, amps


def _problem(config):
    src, amps, fld = generate_problem(config) if config.source_file is None or config.field_file is None \
        else (None, None, None)
    if config.source_file is not None:
        src, amps = read_points(config.source_file, config.n_modes)
    if config.field_file is not None:
        fld, _ = read_points(config.field_file, with_amplitudes=False)
    return src, amps, fld


def run(config):
    """Run the FMM ``repeat`` times (median phase timings) and optionally the direct oracle."""
    config.validate()
    src, amps, fld = _problem(config)
    samples = {k: [] for k in PHASES}
    phi = None
    for _ in range(config.repeat):
        phi, t = evaluate(src, amps, fld, config.order, config.depth, truncation=config.truncation,
                          return_timings=True)
        for k in PHASES:
            samples[k].append(t[k])
    timings = {k: statistics.median(v) for k, v in samples.items()}
    total = sum(timings.values())
    errors = None
    if config.compare_direct:
        t0 = time.perf_counter()
        ref = direct_evaluate(src, amps, fld)
        timings["direct"] = time.perf_counter() - t0
        errors = modal_errors(phi, ref)
    throughput = len(fld) / total if total > 0 else 0.0
    return RunReport(config, timings, throughput, errors, phi)


def _fmt(v):
    return "%.17g" % v


def report_dict(report):
    out = {"schema_version": SCHEMA_VERSION, "config": asdict(report.config),
           "timings": [{"phase": k, "seconds": float(v)} for k, v in report.timings.items()],
           "throughput": float(report.throughput)}
    if report.errors is not None:
        out["errors"] = [{"mode": n, "eps": float(e) if np.isfinite(e) else None}
                         for n, e in enumerate(report.errors)]
    return out


def format_report(report, fmt="csv"):
    if fmt == "json":
        return json.dumps(report_dict(report), indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# schema_version", SCHEMA_VERSION])
    for k, v in asdict(report.config).items():
        w.writerow([f"# {k}", v])
    w.writerow(["# throughput", _fmt(report.throughput)])
    if report.errors is not None:
        w.writerow(["mode", "eps"])
        for n, e in enumerate(report.errors):
            w.writerow([n, _fmt(e)])
        w.writerow([])
    w.writerow(["phase", "seconds"])
    for k, v in report.timings.items():
        w.writerow([k, _fmt(v)])
    return buf.getvalue()


def parse_csv_report(text):
    """Read the mode/eps and phase/seconds tables back from ``format_report`` output."""
    errors, timings, table = {}, {}, None
    for rec in csv.reader(io.StringIO(text)):
        if not rec or rec[0].startswith("#"):
            continue
        if rec == ["mode", "eps"]:
            table = errors
        elif rec == ["phase", "seconds"]:
            table = timings
        elif table is errors:
            errors[int(rec[0])] = float(rec[1])
        else:
            timings[rec[0]] = float(rec[1])
    return errors, timings


def emit(report, fmt="csv", path=None):
    text = format_report(report, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return text


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="cylfmm", description="Benchmark the cylindrical FMM on random modal ring sources.")
    p.add_argument("--sources", type=int, default=1024, help="number of ring sources")
    p.add_argument("--field", type=int, default=1024, help="number of field points")
    p.add_argument("--depth", type=int, default=4, help="tree depth (2..12)")
    p.add_argument("--order", type=int, default=10, help="expansion order (1..24)")
    p.add_argument("--modes", type=int, default=18, help="Fourier modes n = 0..modes-1")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--compare-direct", action="store_true", help="also run direct summation and report errors")
    p.add_argument("--output", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--repeat", type=int, default=3, help="FMM repetitions; phase times are medians")
    p.add_argument("--truncation", choices=TRUNCATIONS, default="product")
    p.add_argument("--complex-amplitudes", action="store_true")
    p.add_argument("--source-file", default=None, help="CSV of r, z, re0, im0, re1, im1, ...")
    p.add_argument("--field-file", default=None, help="CSV of r, z")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    config = RunConfig(n_sources=args.sources, n_field=args.field, depth=args.depth, order=args.order,
                       n_modes=args.modes, seed=args.seed, compare_direct=args.compare_direct,
                       output_path=args.output, output_format=args.format, repeat=args.repeat,
                       truncation=args.truncation, complex_amplitudes=args.complex_amplitudes,
                       source_file=args.source_file, field_file=args.field_file)
    try:
        report = run(config)
    except ConfigurationError as exc:
        print(f"cylfmm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cylfmm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CylFMMError, ArithmeticError, ValueError) as exc:
        print(f"cylfmm: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        emit(report, config.output_format, config.output_path)
    except OSError as exc:
        print(f"cylfmm: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if report.errors is not None and not np.all(np.isfinite(report.errors)):
        print("cylfmm: non-finite error measure", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
