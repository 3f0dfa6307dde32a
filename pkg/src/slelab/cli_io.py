"""Command-line front end: key=value configs, the SLET trace format, and the
report.csv / plot.svg / manifest.txt artifacts of a run."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import struct
import sys
import time
from dataclasses import dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .conformal import KINDS, VERTICAL_STRIP, DomainChart, chart_trace
from .constants import WeightVector, derive_constants
from .driving import derive_seed, sample_driving
from .geometry import EmptyHull, fill_hull, outer_boundaries
from .experiments import (CONSISTENT, LPP_GRID, LPP_SETTINGS, OBSERVABLES, REJECTED,
                          TestReport, duality_test, estimate_lpp, hitting_stats,
                          reflection_test, reversal_test, vertical_strip_axis)
from .loewner import TracePath, compute_trace, forward_map

COMMANDS = ("simulate", "lpp", "reversal", "duality", "reflection", "hitting", "selftest")
MAGIC = b"SLET"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIddQ")
_SEED = struct.Struct("<Q")


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class UnknownKey(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class FormatError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    command: str = "simulate"
    kappa: float = 6.0
    rho_left: tuple[float, ...] = ()
    rho_right: tuple[float, ...] = ()
    n: int = 100
    dt: float = 1e-4
    seed: int = 0
    chart: str = "half_plane"
    resolution: int = 512
    out_dir: str = "out"
    significance: float = 0.01
    # extensions beyond the core keys
    observable: str = "auto"
    horizon: float = 1.0
    interval: tuple[float, ...] = (1.0, 2.0)
    delta: float = 0.01

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ParseError(f"unknown command {self.command!r}")
        if self.chart not in KINDS:
            raise ParseError(f"unknown chart {self.chart!r}")
        if self.observable != "auto" and self.observable not in OBSERVABLES:
            raise ParseError(f"unknown observable {self.observable!r}")
        nums = [self.kappa, self.dt, self.significance, self.horizon, self.delta,
                *self.rho_left, *self.rho_right, *self.interval]
        if not all(math.isfinite(x) for x in nums):
            raise ParseError("numeric fields must be finite")
        if self.n < 1:
            raise ParseError("n must be >= 1")
        if self.dt <= 0:
            raise ParseError("dt must be positive")
        if self.resolution < 2:
            raise ParseError("resolution must be >= 2")
        if len(self.interval) != 2:
            raise ParseError("interval takes two values")

    def weights(self) -> WeightVector:
        return WeightVector(tuple(self.rho_left), tuple(self.rho_right))


_KEY_ALIASES = {"out": "out_dir"}
_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str, line: Optional[int]):
    kind = _TYPES[key]
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind.startswith("tuple"):
            raw = raw.strip()
            return tuple(float(x) for x in raw.split(",")) if raw else ()
        return raw.strip()
    except ValueError:
        raise ParseError(f"malformed value for {key}: {raw!r}", line) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse the line-oriented ``key=value`` format; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        key = _KEY_ALIASES.get(key, key)
        if key not in _TYPES:
            raise UnknownKey(f"unknown key {key!r}", lineno)
        values[key] = _convert(key, raw, lineno)
    try:
        return ExperimentConfig(**values)
    except ParseError as exc:
        raise ParseError(str(exc)) from None


def _format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize(config: ExperimentConfig) -> str:
    return "".join(f"{f.name}={_format_value(getattr(config, f.name))}\n" for f in fields(config))


def config_hash(config: ExperimentConfig) -> str:
    """Hash of everything that affects results (the output folder does not)."""
    return hashlib.sha256(serialize(replace(config, out_dir="")).encode()).hexdigest()[:16]


# --- trace files ------------------------------------------------------------

def write_trace(path, trace: TracePath) -> None:
    pts = np.ascontiguousarray(trace.points, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, float(trace.kappa), float(trace.dt), len(pts)))
        fh.write(pts.view("<f8").tobytes())
        fh.write(_SEED.pack(int(trace.seed) & ((1 << 64) - 1)))


def read_trace(path) -> TracePath:
    """Read a SLET file.  Time stamps are rebuilt as ``k * dt``; force-point
    weights are not part of the format."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, kappa, dt, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError("bad magic")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    body = 16 * count
    if len(data) != _HEADER.size + body + _SEED.size:
        raise FormatError("truncated or oversized file")
    pts = np.frombuffer(data, dtype="<f8", count=2 * count, offset=_HEADER.size)
    pts = pts.astype(np.float64).view(np.complex128).copy()
    (seed,) = _SEED.unpack_from(data, _HEADER.size + body)
    return TracePath(pts, np.arange(count) * dt, dt, kappa, WeightVector(), seed)


# --- artifacts --------------------------------------------------------------

def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _svg(polylines: Sequence[np.ndarray], dots: Sequence[tuple[complex, float]], note: str) -> str:
    """Polylines (complex arrays) and value-shaded dots in a fixed 400x400 viewBox."""
    parts = [np.asarray(p, dtype=complex) for p in polylines if len(p)]
    parts.append(np.array([z for z, _ in dots], dtype=complex))
    pts = np.concatenate(parts)
    pts = pts[np.isfinite(pts)]
    if pts.size == 0:
        pts = np.zeros(1, dtype=complex)
    x0, x1 = pts.real.min(), pts.real.max()
    y0, y1 = pts.imag.min(), pts.imag.max()
    span = max(x1 - x0, y1 - y0, 1e-12) * 1.1
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)

    def xy(z):
        return 200.0 + 380.0 * (z.real - cx) / span, 200.0 - 380.0 * (z.imag - cy) / span

    out = ['<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 400 400" width="400" height="400">',
           f"<desc>{note}</desc>", '<rect width="400" height="400" fill="white"/>']
    for p in polylines:
        p = p[np.isfinite(p)]
        if len(p) < 2:
            continue
        coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in (xy(z) for z in p))
        out.append(f'<polyline fill="none" stroke="black" stroke-width="0.6" points="{coords}"/>')
    for z, val in dots:
        a, b = xy(z)
        g = int(round(255 * (1.0 - min(max(val, 0.0), 1.0))))
        out.append(f'<circle cx="{a:.3f}" cy="{b:.3f}" r="6" fill="rgb({g},{g},{g})" stroke="red"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


@dataclass
class RunResult:
    status: int
    header: list[str]
    rows: list[list]
    polylines: list[np.ndarray] = field(default_factory=list)
    dots: list[tuple[complex, float]] = field(default_factory=list)
    message: str = ""
    trace: Optional[TracePath] = None


def _sample_trace(config: ExperimentConfig, weights: WeightVector, kappa: float,
                  horizon: float = 1.0, max_steps: int = 4000) -> TracePath:
    dt = max(config.dt, horizon / max_steps)
    d = sample_driving(kappa, weights, horizon, dt, derive_seed(config.seed, 0))
    return compute_trace(d)


def _first(seq: Sequence[float]) -> float:
    return float(seq[0]) if seq else 0.0


def _test_rows(rep: TestReport) -> list[list]:
    return [[rep.label, float(rep.statistic), float(rep.p_value), rep.n_a, rep.n_b, rep.dropped,
             rep.decision]]


_TEST_HEADER = ["test", "statistic", "p_value", "n_a", "n_b", "dropped", "decision"]


def _run_simulate(c: ExperimentConfig) -> RunResult:
    d = sample_driving(c.kappa, c.weights(), c.horizon, c.dt, c.seed)
    tr = compute_trace(d)
    chart = DomainChart(c.chart)
    shown = chart_trace(tr, chart) if c.chart != "half_plane" else tr
    rows = [[k, float(t), float(z.real), float(z.imag)]
            for k, (t, z) in enumerate(zip(shown.times, shown.points))]
    lines = [shown.points]
    if c.chart == "half_plane" and len(tr) > 1:
        try:
            left, right = outer_boundaries(fill_hull(tr, resolution=max(c.resolution, 64)))
            lines += [left, right]
        except EmptyHull:
            pass
    return RunResult(0, ["index", "time", "re", "im"], rows, lines, trace=tr)


def _run_lpp(c: ExperimentConfig) -> RunResult:
    chart = DomainChart(c.chart)
    pts = vertical_strip_axis([-0.5, 0.0, 0.5]) if c.chart == VERTICAL_STRIP else LPP_GRID
    if c.chart == "half_plane":
        pts = LPP_GRID + 1j
    field_ = estimate_lpp(c.kappa, c.weights(), chart, pts, c.n, c.dt, c.seed,
                          t_ref=LPP_SETTINGS.t_ref, horizon=LPP_SETTINGS.horizon)
    rows = [[float(z.real), float(z.imag), float(p), float(s), int(dr)]
            for z, p, s, dr in zip(field_.points, field_.estimates, field_.stderr, field_.dropped)]
    dots = [(complex(z), float(p)) for z, p in zip(field_.points, field_.estimates)]
    return RunResult(0, ["re", "im", "estimate", "stderr", "dropped"], rows, [], dots)


def _resolve_observable(c: ExperimentConfig) -> str:
    if c.observable != "auto":
        return c.observable
    return "apex_offset" if any(c.rho_left) or any(c.rho_right) else "crosscut_first_hit"


def _test_result(rep: TestReport, c: ExperimentConfig, kappa: float, weights: WeightVector) -> RunResult:
    status = 2 if rep.decision == REJECTED else 0
    return RunResult(status, _TEST_HEADER, _test_rows(rep), [_sample_trace(c, weights, kappa).points])


def _run_reversal(c: ExperimentConfig) -> RunResult:
    obs = _resolve_observable(c)
    rep = reversal_test(c.kappa, _first(c.rho_left), _first(c.rho_right), obs, c.n, c.dt, c.seed,
                        c.significance)
    return _test_result(rep, c, c.kappa, c.weights())


def _run_reflection(c: ExperimentConfig) -> RunResult:
    rep = reflection_test(c.kappa, _first(c.rho_left), _first(c.rho_right), c.n, c.dt, c.seed,
                          c.significance)
    return _test_result(rep, c, c.kappa, c.weights())


def _run_duality(c: ExperimentConfig) -> RunResult:
    rep = duality_test(c.kappa, _first(c.rho_left), _first(c.rho_right), c.n, c.dt, c.seed,
                       c.significance)
    return _test_result(rep, c, c.kappa, c.weights())


def _run_hitting(c: ExperimentConfig) -> RunResult:
    a, b = c.interval
    rho = c.rho_right[0] if c.rho_right else _first(c.rho_left)
    est = hitting_stats(c.kappa, rho, (a, b), c.n, c.delta, c.dt, c.seed)
    rows = [[float(est.interval[0]), float(est.interval[1]), float(est.delta), est.hits, est.n,
             float(est.fraction)]]
    weights = WeightVector((), (rho,)) if min(a, b) >= 0 else WeightVector((rho,), ())
    tr = _sample_trace(c, weights, c.kappa)
    seg = np.array([complex(a, 0), complex(b, 0)])
    return RunResult(0, ["a", "b", "delta", "hits", "n", "fraction"], rows, [tr.points, seg])


def selftest_rows() -> list[list]:
    """Deterministic closed-form checks; each row is (name, value, expected, error, ok)."""
    from .driving import constant_driving

    rows = []
    d = constant_driving(0.0, 1.0, 1e-4)
    tip = compute_trace(d).points[-1]
    rows.append(["slit_tip", abs(tip), 2.0, abs(tip - 2j), abs(tip - 2j) < 1e-3])
    g = forward_map(d, 1j, 1.0)
    err = abs(g - math.sqrt(3.0)) if g is not None else math.inf
    rows.append(["slit_forward_i", float(abs(g)) if g is not None else math.nan, math.sqrt(3.0),
                 err, err < 1e-6])
    worst = 0.0
    for kappa in np.linspace(0.05, 3.95, 200):
        k = derive_constants(float(kappa))
        two_pi_chi = 2 * math.pi * k.chi
        for other in (4 * (k.lam - k.lam_prime), (4 - k.kappa) * k.lam,
                      (k.kappa_prime - 4) * k.lam_prime):
            worst = max(worst, abs(two_pi_chi - other) / abs(two_pi_chi))
    rows.append(["angle_identities", worst, 0.0, worst, worst < 1e-12])
    return rows


def _run_selftest(c: ExperimentConfig) -> RunResult:
    rows = selftest_rows()
    ok = all(r[-1] for r in rows)
    rows = [[name, float(v), float(e), float(err), "pass" if good else "fail"]
            for name, v, e, err, good in rows]
    slit = np.linspace(0, 2, 50) * 1j
    return RunResult(0 if ok else 1, ["check", "value", "expected", "error", "result"], rows, [slit],
                     message="" if ok else "selftest failed")


_RUNNERS = {"simulate": _run_simulate, "lpp": _run_lpp, "reversal": _run_reversal,
            "reflection": _run_reflection, "duality": _run_duality, "hitting": _run_hitting,
            "selftest": _run_selftest}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run_command(config: ExperimentConfig, stream=None) -> int:
    """Run ``config`` and write report.csv, plot.svg and manifest.txt.

    Returns 0 on success or a consistent test, 2 on statistical rejection and
    1 on error.  The CSV is a pure function of the config.
    """
    stream = stream or sys.stderr
    started = time.perf_counter()
    try:
        result = _RUNNERS[config.command](config)
    except Exception as exc:  # noqa: BLE001 - any failure is reported as exit 1
        print(f"error: {exc}", file=stream)
        return 1
    h = config_hash(config)
    header = ["seed", "config_hash"] + result.header
    rows = [[config.seed, h] + r for r in result.rows]
    note = f"command={config.command} seed={config.seed} config_hash={h}"
    manifest = (serialize(config) + f"code_version={_version()}\nseed={config.seed}\n"
                f"config_hash={h}\nexit_status={result.status}\n")
    try:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(_csv_text(header, rows), newline="\n")
        (out / "plot.svg").write_text(_svg(result.polylines, result.dots, note), newline="\n")
        (out / "manifest.txt").write_text(manifest, newline="\n")
        if result.trace is not None:
            write_trace(out / "trace.slet", result.trace)
    except OSError as exc:
        print(f"error: {exc}", file=stream)
        return 1
    if result.message:
        print(result.message, file=stream)
    print(f"{config.command}: exit {result.status} in {time.perf_counter() - started:.1f}s "
          f"-> {config.out_dir}", file=stream)
    return result.status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slelab", description="SLE simulation experiments")
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--kappa", type=float)
    p.add_argument("--rho-left", dest="rho_left")
    p.add_argument("--rho-right", dest="rho_right")
    p.add_argument("--n", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--chart", choices=KINDS)
    p.add_argument("--resolution", type=int)
    p.add_argument("--significance", type=float)
    p.add_argument("--observable", choices=("auto",) + OBSERVABLES)
    p.add_argument("--out", dest="out_dir")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base = parse_config(Path(args.config).read_text()) if args.config else ExperimentConfig()
    updates = {}
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        updates[f.name] = _convert(f.name, v, None) if isinstance(v, str) else v
    return replace(base, **updates)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run_command(config)


if __name__ == "__main__":
    sys.exit(main())
