"""Command-line front end: ``run``, ``validate`` and ``stability``.

Exit codes: 0 success, 1 invalid scenario, 2 simulation failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .architecture import BufferClass, validate
from .esn import SimulationError
from .hfit import build_tensors
from .ingest import ScenarioError, read_scenario
from .scenarios import NAMES as BUNDLED, bundled_path
from .simulator import NoTransportEdges, Trajectory, concentrations, edge_time_constants, simulate, stability_max_dt

EXIT_OK, EXIT_INVALID, EXIT_SIMULATION, EXIT_IO = 0, 1, 2, 3


@dataclass(frozen=True)
class RunRequest:
    scenario: str
    out: str
    dt: float | None = None
    horizon: int | None = None
    stride: int | None = None
    compare_ode: bool = False
    emit_plots: bool = False
    emit_tensors: bool = False
    backend: str | None = None


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def resolve_scenario(path: str) -> Path:
    """The path itself, or a bundled scenario of the same file name when the path does not exist."""
    p = Path(path)
    if p.exists():
        return p
    stem = p.name[:-4] if p.name.endswith(".xml") else p.name
    if stem in BUNDLED:
        return bundled_path(stem)
    return p


def _load(path: str):
    """Returns (document, exit code); exit code is None on success."""
    p = resolve_scenario(path)
    try:
        return read_scenario(p), None
    except OSError as exc:
        _err(f"cannot read scenario {str(p)!r}: {exc.strerror or exc}")
        return None, EXIT_IO
    except ScenarioError as exc:
        _err(f"{p}: {exc}")
        return None, EXIT_INVALID


# -- formatting ----------------------------------------------------------------

def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def trajectory_csv(traj: Trajectory) -> str:
    """CSV text: ``time_s``, ``V_/m_/c_`` per buffer in place order, then ``U_`` per capability."""
    buffers = traj.buffers()
    conc = concentrations(traj)
    head = ["time_s"]
    for b in buffers:
        head += [f"V_{b}", f"m_{b}", f"c_{b}"]
    head += [f"U_{c}" for c in traj.capabilities]
    cols = [traj.times]
    V, m = traj.water(), traj.nitrogen()
    for i, b in enumerate(buffers):
        cols += [V[:, i], m[:, i], conc[b]]
    cols += list(traj.firings.T)
    lines = [",".join(head)]
    for r in range(len(traj.times)):
        lines.append(",".join(_fmt(c[r]) for c in cols))
    return "\n".join(lines) + "\n"


def comparison_csv(metrics) -> str:
    lines = ["buffer,linf,rmse"]
    for b, v in metrics.per_buffer.items():
        lines.append(f"{b},{_fmt(v['linf'])},{_fmt(v['rmse'])}")
    lines.append(f"all,{_fmt(metrics.linf)},{_fmt(metrics.rmse)}")
    return "\n".join(lines) + "\n"


def triplet_csv(matrix) -> str:
    return matrix.to_csv()


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def concentration_svg(title: str, times: np.ndarray, series: dict[str, np.ndarray]) -> str:
    """A bare line chart: axes with min/max labels, one polyline per series, legend on the right."""
    W, H, L, R, T, B = 720, 360, 70, 140, 30, 40
    pw, ph = W - L - R, H - T - B
    days = times / 86400.0
    finite = [v[np.isfinite(v)] for v in series.values()]
    finite = [f for f in finite if f.size]
    lo = min((float(f.min()) for f in finite), default=0.0)
    hi = max((float(f.max()) for f in finite), default=1.0)
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    t0, t1 = float(days[0]), float(days[-1]) if len(days) > 1 else float(days[0]) + 1.0
    if t1 <= t0:
        t1 = t0 + 1.0

    def xy(t, v):
        return L + (t - t0) / (t1 - t0) * pw, T + (1 - (v - lo) / (hi - lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{L}" y="18" font-size="13">{title}</text>',
        f'<line x1="{L}" y1="{T + ph}" x2="{L + pw}" y2="{T + ph}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{T + ph}" stroke="black"/>',
        f'<text x="{L - 4}" y="{T + ph}" text-anchor="end">{lo:.3g}</text>',
        f'<text x="{L - 4}" y="{T + 8}" text-anchor="end">{hi:.3g}</text>',
        f'<text x="{L}" y="{T + ph + 15}" text-anchor="middle">{t0:g}</text>',
        f'<text x="{L + pw}" y="{T + ph + 15}" text-anchor="middle">{t1:.4g}</text>',
        f'<text x="{L + pw / 2}" y="{H - 6}" text-anchor="middle">time (days)</text>',
        f'<text x="14" y="{T + ph / 2}" transform="rotate(-90 14 {T + ph / 2})" text-anchor="middle">'
        'concentration (kg/m^3)</text>',
    ]
    for i, (name, v) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join("%.2f,%.2f" % xy(t, c) for t, c in zip(days, v) if math.isfinite(c))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = T + 14 * i + 6
        out.append(f'<line x1="{L + pw + 10}" y1="{ly}" x2="{L + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{L + pw + 34}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- commands ------------------------------------------------------------------

def reference_dt(dt: float, bound: float) -> float:
    """Largest ``dt / n`` with ``n >= 4`` that also respects a quarter of the stability bound."""
    n = max(4, math.ceil(4 * dt / bound)) if math.isfinite(bound) else 4
    return dt / n


def _write_outputs(req: RunRequest, doc, traj: Trajectory, stage: Path) -> None:
    (stage / "trajectory.csv").write_text(trajectory_csv(traj), encoding="utf-8")
    if req.compare_ode:
        from .reference import compare_trajectories, rk4_integrate

        try:
            bound = stability_max_dt(doc.architecture, doc.config.constants)
        except NoTransportEdges:
            bound = math.inf
        ref = rk4_integrate(doc, reference_dt(doc.config.dt, bound))
        (stage / "reference.csv").write_text(trajectory_csv(ref), encoding="utf-8")
        (stage / "comparison.csv").write_text(comparison_csv(compare_trajectories(traj, ref)), encoding="utf-8")
    if req.emit_plots:
        conc = concentrations(traj)
        arch = doc.architecture
        for cls in (BufferClass.LAKE, BufferClass.LAND, BufferClass.POINT):
            series = {b.id: conc[b.id] for b in arch.buffers if b.buffer_class is cls}
            if series:
                svg = concentration_svg(f"{doc.name or 'scenario'}: {cls.value} concentrations", traj.times, series)
                (stage / f"concentration_{cls.value}.svg").write_text(svg, encoding="utf-8")
    if req.emit_tensors:
        T = build_tensors(doc.architecture)
        for name, mat in (("Mplus", T.Mplus), ("Mminus", T.Mminus), ("M", T.M)):
            (stage / f"{name}.csv").write_text(triplet_csv(mat), encoding="utf-8")


def _publish(stage: Path, target: Path) -> None:
    """Swap a fully written staging directory into place."""
    old = None
    if target.exists():
        old = target.with_name(f".{target.name}.old-{os.getpid()}")
        os.replace(target, old)
    os.replace(stage, target)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def cmd_run(req: RunRequest) -> int:
    doc, code = _load(req.scenario)
    if doc is None:
        return code
    report = validate(doc.architecture)
    if not report.valid:
        sys.stderr.write(report.render())
        return EXIT_INVALID
    try:
        cfg = doc.config
        if req.dt is not None:
            cfg = replace(cfg, dt=req.dt)
        if req.horizon is not None:
            cfg = replace(cfg, horizon=req.horizon)
        if req.stride is not None:
            cfg = replace(cfg, stride=req.stride)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INVALID
    doc = replace(doc, config=cfg)

    try:
        traj = simulate(doc, backend=req.backend)
    except SimulationError as exc:
        _err(f"{req.scenario}: step {exc.step}: {exc}")
        return EXIT_SIMULATION
    for w in traj.warnings:
        print(f"warning: {w}", file=sys.stderr)

    target = Path(req.out)
    stage = None
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        stage = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
        _write_outputs(req, doc, traj, stage)
        _publish(stage, target)
        stage = None
    except OSError as exc:
        _err(f"cannot write {exc.filename or target}: {exc.strerror or exc}")
        return EXIT_IO
    except SimulationError as exc:
        _err(f"{req.scenario}: reference step {exc.step}: {exc}")
        return EXIT_SIMULATION
    finally:
        if stage is not None:
            shutil.rmtree(stage, ignore_errors=True)
    return EXIT_OK


def cmd_validate(path: str) -> int:
    doc, code = _load(path)
    if doc is None:
        return code
    report = validate(doc.architecture)
    sys.stdout.write(report.render())
    return EXIT_OK if report.valid else EXIT_INVALID


def cmd_stability(path: str) -> int:
    doc, code = _load(path)
    if doc is None:
        return code
    taus = edge_time_constants(doc.architecture, doc.config.constants)
    if not taus:
        _err(f"{path}: no water-transport edges, stability bound undefined")
        return EXIT_INVALID
    for cap_id, tau in taus:
        print(f"{cap_id}\ttau_s={tau!r}")
    print(f"stability_max_dt_s={stability_max_dt(doc.architecture, doc.config.constants)!r}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def _positive(cast):
    def parse(text):
        v = cast(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hfgt-hydro", description="Watershed water and nitrogen simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one or more scenarios")
    run.add_argument("scenarios", nargs="+", help="scenario XML paths or bundled names (example1..example3)")
    run.add_argument("-o", "--out", default="out", help="output directory (default: out)")
    run.add_argument("--dt", type=_positive(float), help="override time step, s")
    run.add_argument("--horizon", type=_positive(int), help="override number of steps")
    run.add_argument("--stride", type=_positive(int), help="record every N-th step")
    run.add_argument("--compare-ode", action="store_true", help="also integrate the RK4 reference and compare")
    run.add_argument("--emit-plots", action="store_true", help="write SVG concentration charts")
    run.add_argument("--emit-tensors", action="store_true", help="write M+, M- and M as triplet CSVs")
    run.add_argument("--backend", choices=("compiled", "python"), help="time-loop implementation")
    run.add_argument("-j", "--jobs", type=_positive(int), default=1, help="scenarios to run concurrently")

    for name, text in (("validate", "check a scenario and print its validation report"),
                       ("stability", "print per-edge time constants and the Euler step bound")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario")
    return ap


def _requests(args) -> list[RunRequest]:
    many = len(args.scenarios) > 1
    reqs = []
    for s in args.scenarios:
        name = Path(s).name
        out = Path(args.out) / (name[:-4] if name.endswith(".xml") else name) if many else Path(args.out)
        reqs.append(RunRequest(s, str(out), args.dt, args.horizon, args.stride, args.compare_ode, args.emit_plots,
                               args.emit_tensors, args.backend))
    return reqs


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        return cmd_validate(args.scenario)
    if args.command == "stability":
        return cmd_stability(args.scenario)

    reqs = _requests(args)
    outs = [r.out for r in reqs]
    if len(set(outs)) != len(outs):
        _err("two scenarios would write to the same output directory")
        return EXIT_INVALID
    if args.jobs > 1 and len(reqs) > 1:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(reqs))) as pool:
            codes = list(pool.map(cmd_run, reqs))
    else:
        codes = [cmd_run(r) for r in reqs]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
