"""Command-line interface: ``gstkit {design,simulate,fit,report,rb,germsearch}``."""
from __future__ import annotations

import argparse
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import io
from .design import (
    build_catalog,
    candidate_germs,
    default_fiducials,
    default_germs,
    default_schedule,
    select_germs,
)
from .errors import GSTError, InputError, NumericalError
from .estimation import FitConfig, run_pipeline
from .gateset import ideal_gateset
from .gauge import optimize_gauge
from .metrics import diamond_distance, metric_report, process_infidelity
from .rb import DEFAULT_RB_LENGTHS, RBDesign, fit_table, rb_run
from .simulate import CompositeModel, NoiseSpec, apply_noise, simulate_composite, simulate_dataset
from .violation import build_grid, grid_table, violation_summary

log = logging.getLogger("gstkit")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-L", dest="max_L", type=int, default=256)
    p.add_argument("--shots", type=int, default=50)
    p.add_argument("--out", required=out_required)
    p.add_argument("--threads", type=int, default=1, help="accepted for interface stability; results never depend on it")


def _out_file(out: str, default_name: str) -> Path:
    p = Path(out)
    if out.endswith(("/", "\\")) or p.is_dir():
        return p / default_name
    return p


def _load_catalog(path, max_L):
    if path:
        seqs, design = io.read_catalog_file(path)
        return seqs, design
    fid, germs, sch = default_fiducials(), default_germs(), default_schedule(max_L)
    return build_catalog(fid, germs, sch).sequences, (germs, sch, fid)


def _target(path):
    return io.read_gateset(path) if path else ideal_gateset()


# -- subcommands ------------------------------------------------------------------


def cmd_design(a) -> int:
    out = Path(a.out)
    fid = default_fiducials()
    germs = io.read_sequence_list(a.germs) if a.germs else list(default_germs())
    sch = default_schedule(a.max_L)
    cat = build_catalog(fid, germs, sch)
    io.write_catalog(out / "catalog.txt", cat, germs, sch, fid)
    io.write_sequence_list(out / "germs.json", germs)
    io.write_sequence_list(out / "fiducials_prep.json", fid.prep)
    io.write_sequence_list(out / "fiducials_meas.json", fid.meas)
    io.write_gateset(out / "target.json", ideal_gateset())
    io.write_manifest(out, "design", {"germs": a.germs}, {"max_L": a.max_L, "schedule": list(sch)}, a.seed)
    print(f"design: {len(cat)} sequences, schedule {list(sch)} -> {out}")
    return EXIT_OK


def cmd_simulate(a) -> int:
    gs = _target(a.gateset)
    if a.depolarizing or a.overrotation:
        gs = apply_noise(gs, NoiseSpec(depolarizing=a.depolarizing, overrotation=a.overrotation))
    seqs, _ = _load_catalog(a.catalog, a.max_L)
    if a.composite_theta is not None:
        ds = simulate_composite(CompositeModel(gs, a.composite_theta), seqs, a.shots, a.seed)
    else:
        ds = simulate_dataset(gs, seqs, a.shots, a.seed)
    path = _out_file(a.out, "dataset.txt")
    io.write_dataset(path, ds)
    config = {"shots": a.shots, "depolarizing": a.depolarizing, "overrotation": a.overrotation, "composite_theta": a.composite_theta}
    io.write_manifest(path.parent, "simulate", {"gateset": a.gateset, "catalog": a.catalog}, config, a.seed)
    print(f"simulate: {len(ds)} records -> {path}")
    return EXIT_OK


def _fit_config(a, design) -> tuple[FitConfig, object]:
    if design is None:
        return FitConfig(max_length=a.max_L), None
    germs, sch, fid = design
    sch = tuple(L for L in sch if L <= a.max_L)
    return FitConfig(max_length=max(sch), schedule=sch), (fid, germs)


def cmd_fit(a) -> int:
    target = _target(a.target)
    cat_seqs, design = (None, None)
    if a.catalog:
        cat_seqs, design = io.read_catalog_file(a.catalog)
    ds = io.read_dataset(a.dataset, cat_seqs)
    cfg, fg = _fit_config(a, design)
    fid, germs = fg if fg else (None, None)
    bundle = run_pipeline(ds, target, fid, germs, cfg)
    out = io.write_bundle(a.out, bundle)
    config = {"max_L": cfg.max_length, "schedule": list(cfg.schedule)}
    io.write_manifest(out, "fit", {"dataset": a.dataset, "target": a.target, "catalog": a.catalog}, config, a.seed)
    if bundle.failed:
        raise NumericalError(f"estimation: {bundle.failed}")
    mle = [s for s in bundle.stages if s.name == "mle"][0]
    print(f"fit: 2 delta log L = {mle.objective:.6g} on {mle.n_sequences} sequences -> {out}")
    return EXIT_OK


def cmd_report(a) -> int:
    from . import plots
    from .uncertainty import confidence_interval, logl_hessian

    b = io.read_bundle(a.bundle)
    if b["final"] is None:
        raise InputError(f"report: {a.bundle} holds no final estimate")
    target = _target(a.target)
    gs = b["final"]
    out = Path(a.out)
    cat_seqs = io.read_catalog(a.catalog) if a.catalog else build_catalog(default_fiducials(), default_germs(), default_schedule(a.max_L)).sequences
    ds = io.read_dataset(a.dataset, cat_seqs)
    ds = ds.subset([s for s in ds.sequences if s.provenance is not None and s.provenance.length <= a.max_L])

    intervals, err_rows = {}, []
    if a.errorbars == "hessian":
        ph = logl_hessian(gs, ds)
        for k in target.labels:
            intervals[k] = {}
            for name, fn in (("diamond_distance", diamond_distance), ("process_infidelity", process_infidelity)):
                iv = confidence_interval(lambda g, k=k, fn=fn: fn(g.gates[k], target.gates[k]), ph)
                intervals[k][name] = iv.radius
                err_rows.append((f"{name}[{k}]", iv.estimate, iv.radius, "hessian"))
    rep = metric_report(gs, target, intervals)
    rows = []
    for k, m in rep.gates.items():
        v = m.verdicts()
        rows.append(
            (k, m.process_infidelity, m.intervals.get("process_infidelity", np.nan), m.avg_gate_infidelity,
             m.diamond_distance, m.intervals.get("diamond_distance", np.nan), v[6.7e-4], v[1.94e-4])
        )
    io.write_csv(out / "report.csv", ("gate", "process_infidelity", "process_infidelity_95", "avg_gate_infidelity",
                                       "diamond_distance", "diamond_distance_95", "verdict_6.7e-4", "verdict_1.94e-4"), rows)
    io.write_csv(out / "errorbars.csv", ("quantity", "estimate", "delta", "method"), err_rows)

    summ = violation_summary(gs, ds)
    grid = summ["grid"]
    io.write_csv(out / "violation_grid.csv", ("germ", "L", "sum", "count", "flag"),
                 [(g, L, tot, cnt, int(fl)) for g, L, tot, cnt, fl in grid_table(grid)])
    io.write_csv(out / "violation_summary.csv", ("two_delta_logl", "k", "n_params", "n_sigma"),
                 [(summ["two_delta_logl"], summ["k"], summ["n_params"], summ["n_sigma"])])
    plots.violation_grid_svg(grid, out / "violation_grid.svg")

    pts = {k: [] for k in target.labels}
    for L, g in b["iterations"].items():
        g = optimize_gauge(g, target).gateset
        for k in target.labels:
            pts[k].append((L, diamond_distance(g.gates[k], target.gates[k])))
    if b["iterations"]:
        plots.diamond_vs_run_svg(pts, out / "diamond_vs_L.svg")

    if a.rb:
        _rb_outputs(gs, a, out)
    io.write_manifest(out, "report", {"dataset": a.dataset, "target": a.target, "catalog": a.catalog}, {"max_L": a.max_L, "errorbars": a.errorbars, "rb": a.rb}, a.seed)
    print(f"report: N_sigma = {summ['n_sigma']:.3g}, {grid.n_flagged} flagged cells -> {out}")
    return EXIT_OK


def _rb_outputs(model, a, out: Path):
    from . import plots

    design = RBDesign(DEFAULT_RB_LENGTHS, a.sequences, a.seed)
    tab = rb_run(model, design, a.shots, a.seed)
    io.write_csv(out / "rb_data.csv", ("length_cliffords", "length_gates", "sequence_seed", "shots", "survivals"),
                 [(int(c), int(g), a.seed, int(n), float(s)) for c, g, n, s in zip(tab.length_cliffords, tab.length_gates, tab.shots, tab.survival)])
    asym = None if a.free_asymptote else 0.5
    fits = {ax: fit_table(tab, ax, seed=a.seed, asymptote=asym) for ax in ("gates", "cliffords")}
    data = {ax: {"A": f.a, "B": f.b, "f": f.f, "rate": f.rate, "interval_95": list(f.interval)} for ax, f in fits.items()}
    (out / "rb_fit.json").write_text(io.dumps(data) + "\n")
    plots.rb_decay_svg(tab.length_gates, tab.survival, fits["gates"], out / "rb_decay.svg")
    return fits


def cmd_rb(a) -> int:
    gs = _target(a.gateset)
    model = CompositeModel(gs, a.composite_theta) if a.composite_theta is not None else gs
    out = Path(a.out)
    fits = _rb_outputs(model, a, out)
    io.write_manifest(out, "rb", {"gateset": a.gateset}, {"shots": a.shots, "sequences": a.sequences, "composite_theta": a.composite_theta}, a.seed)
    f = fits["gates"]
    print(f"rb: per-gate rate {f.rate:.4g} [{f.interval[0]:.4g}, {f.interval[1]:.4g}] -> {out}")
    return EXIT_OK


def cmd_germsearch(a) -> int:
    gs = _target(a.gateset)
    cands = io.read_sequence_list(a.candidates) if a.candidates else candidate_germs(gs.labels, a.max_germ_length)
    res = select_germs(cands, gs, a.seed)
    path = _out_file(a.out, "germs.json")
    io.write_sequence_list(path, res.germs)
    io.write_manifest(path.parent, "germsearch", {"gateset": a.gateset, "candidates": a.candidates}, {"max_germ_length": a.max_germ_length}, a.seed)
    print(f"germsearch: {len(res.germs)} germs, score {res.score:.6g} -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gstkit", description="Long-sequence gate set tomography for one qubit.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="write the default sequence catalog")
    _common(p)
    p.add_argument("--germs", help="JSON list of germ strings")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="simulate a dataset")
    _common(p)
    p.add_argument("--gateset")
    p.add_argument("--catalog")
    p.add_argument("--depolarizing", type=float, default=0.0)
    p.add_argument("--overrotation", type=float, default=0.0)
    p.add_argument("--composite-theta", type=float)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run LGST, iterative chi^2 and MLE")
    _common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--target")
    p.add_argument("--catalog")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="metrics, error bars, violation grid and plots")
    _common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--target")
    p.add_argument("--catalog")
    p.add_argument("--errorbars", choices=("hessian", "none"), default="hessian")
    p.add_argument("--rb", action="store_true", help="also simulate RB on the estimate")
    p.add_argument("--sequences", type=int, default=30)
    p.add_argument("--free-asymptote", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rb", help="simulate and fit randomized benchmarking")
    _common(p)
    p.add_argument("--gateset")
    p.add_argument("--composite-theta", type=float)
    p.add_argument("--sequences", type=int, default=30)
    p.add_argument("--free-asymptote", action="store_true")
    p.set_defaults(func=cmd_rb)

    p = sub.add_parser("germsearch", help="greedy germ selection")
    _common(p)
    p.add_argument("--gateset")
    p.add_argument("--candidates")
    p.add_argument("--max-germ-length", type=int, default=6)
    p.set_defaults(func=cmd_germsearch)
    return ap


def _failing_module(exc: BaseException) -> str:
    mods = [Path(f.filename).stem for f in traceback.extract_tb(exc.__traceback__) if "gstkit" in f.filename]
    return mods[-1] if mods else "cli"


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except InputError as exc:
        print(f"error [{_failing_module(exc)}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, GSTError, np.linalg.LinAlgError) as exc:
        print(f"error [{_failing_module(exc)}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return EXIT_INPUT


def run_command(argv) -> int:
    return main(list(argv))
