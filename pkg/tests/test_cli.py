import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from cylfmm.cli import (EXIT_CONFIG, EXIT_IO, EXIT_OK, PHASES, REPORT_SCHEMA, RunConfig, format_report,
                        generate_problem, main, parse_csv_report, read_points, report_dict, run)
from cylfmm.exceptions import ConfigurationError, DomainError


def small(**kw):
    base = dict(n_sources=200, n_field=150, depth=3, order=6, n_modes=4, repeat=1)
    base.update(kw)
    return RunConfig(**base)


def test_generation_is_reproducible():
    a = generate_problem(small(seed=7))
    b = generate_problem(small(seed=7))
    c = generate_problem(small(seed=8))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a[0], c[0])


def test_streams_are_independent_of_sizes():
    # more modes or more field points must not change earlier streams
    a = generate_problem(small(n_modes=2))
    b = generate_problem(small(n_modes=5, n_field=300))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1][:, :2])
    np.testing.assert_array_equal(a[2], b[2][:150])


def test_values_lie_in_open_unit_interval():
    src, amps, fld = generate_problem(small(n_sources=5000, complex_amplitudes=True))
    for v in (src, fld, amps.real, amps.imag):
        assert v.min() > 0.0 and v.max() < 1.0
    assert np.all(generate_problem(small())[1].imag == 0.0)


def test_axial_positions_are_uniform():
    src, _, _ = generate_problem(small(n_sources=2 ** 16, n_modes=1))
    counts, _ = np.histogram(src[:, 1], bins=16, range=(0.0, 1.0))
    expected = 2 ** 16 / 16
    sigma = np.sqrt(expected * (1 - 1 / 16))
    assert np.all(np.abs(counts - expected) <= 3 * sigma)


def test_run_reports_errors_and_timings():
    rep = run(small(compare_direct=True))
    assert rep.errors.shape == (4,)
    assert np.all(rep.errors < 1e-4)
    assert set(PHASES) <= set(rep.timings) and "direct" in rep.timings
    assert rep.throughput > 0
    assert rep.potentials.shape == (150, 4)


def test_csv_report_round_trip():
    rep = run(small(compare_direct=True))
    errors, timings = parse_csv_report(format_report(rep, "csv"))
    assert errors == {n: float(e) for n, e in enumerate(rep.errors)}
    assert timings == {k: float(v) for k, v in rep.timings.items()}


def test_json_report_matches_schema():
    rep = run(small(compare_direct=True))
    doc = json.loads(format_report(rep, "json"))
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert [e["mode"] for e in doc["errors"]] == [0, 1, 2, 3]
    assert doc["config"]["order"] == 6


def test_no_errors_section_without_comparison():
    rep = run(small())
    assert rep.errors is None
    assert "errors" not in report_dict(rep)
    assert "mode,eps" not in format_report(rep, "csv")
    jsonschema.validate(report_dict(rep), REPORT_SCHEMA)


def test_config_validation():
    for bad in (dict(depth=1), dict(order=0), dict(n_modes=0), dict(repeat=0), dict(n_sources=0),
                dict(output_format="xml"), dict(truncation="cubic")):
        with pytest.raises(ConfigurationError):
            small(**bad).validate()


def test_main_exit_codes(tmp_path, capsys):
    out = tmp_path / "r.json"
    args = ["--sources", "100", "--field", "100", "--depth", "2", "--order", "4", "--modes", "2", "--repeat", "1"]
    assert main(args + ["--format", "json", "--output", str(out), "--compare-direct"]) == EXIT_OK
    jsonschema.validate(json.loads(out.read_text()), REPORT_SCHEMA)
    assert main(args + ["--depth", "1"]) == EXIT_CONFIG
    assert main(args + ["--output", str(tmp_path / "missing" / "r.csv")]) == EXIT_IO
    assert main(args + ["--source-file", str(tmp_path / "nothing.csv")]) == EXIT_IO
    with pytest.raises(SystemExit) as info:
        main(["--format", "yaml"])
    assert info.value.code == EXIT_CONFIG
    capsys.readouterr()


def test_main_writes_csv_to_stdout(capsys):
    assert main(["--sources", "64", "--field", "64", "--depth", "2", "--order", "3", "--modes", "1",
                 "--repeat", "1"]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("# schema_version,1")
    assert set(parse_csv_report(text)[1]) == set(PHASES)


def test_file_inputs(tmp_path):
    rng = np.random.default_rng(2)
    src = rng.random((50, 2)) + [0.1, 0.0]
    amps = rng.random((50, 2)) + 1j * rng.random((50, 2))
    fld = rng.random((40, 2))
    sf, ff = tmp_path / "src.csv", tmp_path / "fld.csv"
    cols = np.column_stack([src, amps[:, 0].real, amps[:, 0].imag, amps[:, 1].real, amps[:, 1].imag])
    np.savetxt(sf, cols, delimiter=",", header="r,z,re0,im0,re1,im1", comments="")
    np.savetxt(ff, fld, delimiter=",", header="# field points")
    pts, a = read_points(sf)
    np.testing.assert_allclose(pts, src, rtol=1e-15)
    np.testing.assert_allclose(a, amps, rtol=1e-15)
    assert read_points(sf, n_modes=1)[1].shape == (50, 1)
    rep = run(small(source_file=str(sf), field_file=str(ff), n_modes=2, compare_direct=True))
    assert rep.potentials.shape == (40, 2)
    assert np.all(rep.errors < 1e-4)
    with pytest.raises(ConfigurationError):
        read_points(sf, n_modes=3)


def test_malformed_files(tmp_path):
    odd = tmp_path / "odd.csv"
    odd.write_text("0.5,0.5,1.0\n")
    with pytest.raises(DomainError):
        read_points(odd)
    bad = tmp_path / "bad.csv"
    bad.write_text("0.5,0.5,1.0,0.0\nfoo,bar,1,0\n")
    with pytest.raises(DomainError):
        read_points(bad)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cylfmm", "--sources", "32", "--field", "32", "--depth", "2",
                           "--order", "2", "--modes", "1", "--repeat", "1", "--format", "json"],
                          capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    jsonschema.validate(json.loads(proc.stdout), REPORT_SCHEMA)
