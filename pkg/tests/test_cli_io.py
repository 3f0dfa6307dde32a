import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slelab.cli_io import (ExperimentConfig, FormatError, ParseError, UnknownKey, config_hash, main,
                           parse_config, read_trace, run_command, serialize, write_trace)
from slelab.constants import WeightVector
from slelab.driving import constant_driving
from slelab.loewner import TracePath, compute_trace


# --- configuration -------------------------------------------------------------

def test_parse_with_defaults():
    c = parse_config("command=lpp\nkappa=6\nrho_left=-1\nrho_right=-1\nn=2000\nseed=7")
    assert c.command == "lpp" and c.kappa == 6.0 and c.n == 2000 and c.seed == 7
    assert c.rho_left == (-1.0,) and c.rho_right == (-1.0,)
    assert c.dt == 1e-4 and c.resolution == 512 and c.significance == 0.01


def test_parse_error_line_number():
    with pytest.raises(ParseError) as info:
        parse_config("kappa=abc")
    assert info.value.line == 1


def test_unknown_key_line_number():
    with pytest.raises(UnknownKey) as info:
        parse_config("# header\ncommand=lpp\n\ncolour=red\n")
    assert info.value.line == 4


def test_comments_sequences_and_alias():
    c = parse_config("rho_left = -1, 0.5  # two weights\nout=results\n")
    assert c.rho_left == (-1.0, 0.5)
    assert c.out_dir == "results"


@pytest.mark.parametrize("text", ["n=0", "dt=-1", "dt=0", "kappa=nan", "command=fly", "chart=torus",
                                  "missing_equals"])
def test_invalid_values(text):
    with pytest.raises(ParseError):
        parse_config(text)


@settings(max_examples=60, deadline=None)
@given(kappa=st.floats(0.1, 10.0), n=st.integers(1, 10 ** 6), seed=st.integers(0, 2 ** 40),
       dt=st.floats(1e-6, 1e-1),
       rho=st.lists(st.floats(-1.9, 5.0), max_size=3),
       command=st.sampled_from(["simulate", "lpp", "reversal", "hitting"]))
def test_serialize_round_trip(kappa, n, seed, dt, rho, command):
    c = ExperimentConfig(command=command, kappa=kappa, n=n, seed=seed, dt=dt, rho_left=tuple(rho))
    back = parse_config(serialize(c))
    assert back == c
    assert config_hash(back) == config_hash(c)


def test_hash_depends_on_content():
    assert config_hash(ExperimentConfig(seed=1)) != config_hash(ExperimentConfig(seed=2))


# --- trace files -------------------------------------------------------------------

@pytest.fixture
def trace():
    tr = compute_trace(constant_driving(0.3, 0.05, 1e-3))
    return TracePath(tr.points, np.arange(len(tr.points)) * tr.dt, tr.dt, 6.0, WeightVector(),
                     2 ** 63 + 12345)


def test_trace_round_trip(tmp_path, trace):
    f = tmp_path / "t.slet"
    write_trace(f, trace)
    back = read_trace(f)
    assert np.array_equal(back.points, trace.points)
    assert np.array_equal(back.times, trace.times)
    assert back.dt == trace.dt and back.kappa == trace.kappa and back.seed == trace.seed


def test_trace_layout(tmp_path, trace):
    f = tmp_path / "t.slet"
    write_trace(f, trace)
    raw = f.read_bytes()
    magic, version, kappa, dt, count = struct.unpack_from("<4sIddQ", raw)
    assert (magic, version, kappa, dt, count) == (b"SLET", 1, 6.0, trace.dt, len(trace.points))
    assert struct.unpack_from("<dd", raw, 32) == (trace.points[0].real, trace.points[0].imag)
    assert struct.unpack_from("<Q", raw, len(raw) - 8)[0] == trace.seed


def test_empty_trace_file(tmp_path):
    empty = TracePath(np.zeros(0, dtype=complex), np.zeros(0), 0.01, 6.0, WeightVector(), 3)
    f = tmp_path / "e.slet"
    write_trace(f, empty)
    assert f.stat().st_size == struct.calcsize("<4sIddQ") + 8
    back = read_trace(f)
    assert len(back) == 0 and back.seed == 3


def test_bad_magic(tmp_path, trace):
    f = tmp_path / "t.slet"
    write_trace(f, trace)
    raw = bytearray(f.read_bytes())
    raw[:4] = b"SLEX"
    f.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_trace(f)


def test_truncated_file(tmp_path, trace):
    f = tmp_path / "t.slet"
    write_trace(f, trace)
    raw = f.read_bytes()
    for cut in (10, len(raw) - 3):
        f.write_bytes(raw[:cut])
        with pytest.raises(FormatError):
            read_trace(f)


def test_bad_version(tmp_path, trace):
    f = tmp_path / "t.slet"
    write_trace(f, trace)
    raw = bytearray(f.read_bytes())
    raw[4:8] = struct.pack("<I", 9)
    f.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_trace(f)


# --- commands ----------------------------------------------------------------------

def _run(tmp_path, name, **kw):
    out = tmp_path / name
    status = run_command(ExperimentConfig(out_dir=str(out), **kw))
    return status, out


def test_selftest_exits_zero(tmp_path):
    status, out = _run(tmp_path, "self", command="selftest")
    assert status == 0
    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0].startswith("seed,config_hash,")
    assert len(rows) > 1 and all(r.endswith(",pass") for r in rows[1:])


def test_artifacts_and_manifest(tmp_path):
    status, out = _run(tmp_path, "sim", command="simulate", dt=1e-3, horizon=0.5, seed=11)
    assert status == 0
    for name in ("report.csv", "plot.svg", "manifest.txt", "trace.slet"):
        assert (out / name).exists()
    manifest = (out / "manifest.txt").read_text()
    c = ExperimentConfig(out_dir=str(out), command="simulate", dt=1e-3, horizon=0.5, seed=11)
    assert f"config_hash={config_hash(c)}" in manifest
    assert "seed=11" in manifest and "code_version=" in manifest and "exit_status=0" in manifest
    svg = (out / "plot.svg").read_text()
    assert "viewBox" in svg and config_hash(c) in svg
    csv = (out / "report.csv").read_bytes()
    assert b"\r\n" not in csv
    assert read_trace(out / "trace.slet").seed == 11


def test_report_is_byte_identical(tmp_path):
    kw = dict(command="simulate", dt=1e-3, horizon=0.3, seed=5)
    _, a = _run(tmp_path, "a", **kw)
    _, b = _run(tmp_path, "b", **kw)
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()


def test_hash_ignores_output_folder():
    assert config_hash(ExperimentConfig(out_dir="x")) == config_hash(ExperimentConfig(out_dir="y"))


def test_error_exit(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    status = run_command(ExperimentConfig(command="selftest", out_dir=str(blocker / "sub")))
    assert status == 1


def test_main_flags_override_config(tmp_path):
    cfg = tmp_path / "c.txt"
    out = tmp_path / "o"
    cfg.write_text(f"command=simulate\nseed=3\ndt=0.01\nhorizon=0.2\nout={out}\n")
    assert main(["--config", str(cfg), "--seed", "4"]) == 0
    assert "seed=4" in (out / "manifest.txt").read_text()


def test_main_reports_bad_config(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("kappa=abc\n")
    assert main(["--config", str(cfg)]) == 1


@pytest.mark.slow
def test_reversal_rejects_asymmetric_weights(tmp_path):
    status, out = _run(tmp_path, "rev", command="reversal", kappa=6.0, rho_left=(-1.5,),
                       rho_right=(0.0,), n=400, seed=1)
    assert status == 2
    assert "reject" in (out / "report.csv").read_text()
