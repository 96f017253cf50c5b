"""Command-line front end.

Exit codes: 0 every checker passed, 1 some checker failed, 2 usage or configuration error.
Reports are written under ``<out>/<command>/``; ``metadata.json`` holds the run
timestamp and argv, so every other file is byte-identical across reruns.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, io
from .config import ConfigError, ExperimentConfig, load_config, with_overrides
from .families import family_by_name, mean_zero_inputs, random_region
from .grid import Grid
from .operators import psi_transform, square_function
from .verify import (COUNTEREXAMPLES, CheckReport, check_cone_energy, check_doubling_family, check_g_star_domination,
                     check_kernel, check_weak_type_accounting,
                     check_lemma_o, check_mean_zero_tail, check_ntv_split, check_ok_uk_containment,
                     check_remark_j, check_series_family, check_weak_type, check_whitney, run_counterexample,
                     weak_ratios)
from .whitney import WhitneyError, whitney_decompose

log = logging.getLogger("lpsquare")


class UsageError(ValueError):
    pass


def _family(cfg: ExperimentConfig):
    fam = family_by_name(cfg.family.name, cfg.grid.dim, cfg.seed)
    if cfg.family.members is not None:
        names = set(cfg.family.members)
        unknown = names - {f.name for f in fam}
        if unknown:
            raise ConfigError(f"unknown family member(s) {sorted(unknown)}")
        fam = [f for f in fam if f.name in names]
    if not fam:
        raise ConfigError("family is empty")
    return fam


# -- commands: each returns (reports, extra files) -------------------------------------------


def run_kernel_check(cfg: ExperimentConfig, out: Path):
    rep = check_kernel(cfg.build_kernel(), cfg.kernel.radii, cfg.kernel.sample_count, cfg.slack.kernel_convergence)
    return [rep], {}


def run_whitney(cfg: ExperimentConfig, out: Path, region_file: str | None):
    grid = cfg.build_grid()
    if region_file is not None:
        region = io.read_region_csv(region_file, grid)
    elif cfg.region is not None:
        region = io.region_from_intervals(grid, cfg.region)
    else:
        raise UsageError("whitney needs --region FILE or a 'region' entry in the config")
    cover = whitney_decompose(region)
    rep = check_whitney(cover)
    return [rep], {"cover.csv": lambda p: io.write_cover_csv(p, cover.cubes, grid.dim)}


def run_weak_type(cfg: ExperimentConfig, out: Path):
    grid, k = cfg.build_grid(), cfg.build_kernel()
    fam = _family(cfg)
    rhos = cfg.rho.ladder()
    lpo = cfg.ladder.levels_per_octave
    rep = check_weak_type("S1", fam, rhos, k, grid, levels_per_octave=lpo, stability=cfg.slack.weak_stability)
    L = cfg.build_ladder(grid)
    fields = [(fn.name, fn.sample(grid)) for fn in fam]
    rows = [[name, rho, w] for name, f in fields
            for rho, w in zip(rhos, weak_ratios(square_function(psi_transform(k, f, L), 1.0), f, rhos))]
    acc_rep = check_weak_type_accounting(fields, rhos[::4], k, L)
    files = {"ratio_vs_rho.csv": lambda p: io.write_rows_csv(p, ["input", "rho", "ratio"], rows)}
    return [rep, acc_rep], files


def run_lemmas(cfg: ExperimentConfig, out: Path):
    n = cfg.grid.dim
    lm = cfg.lemmas
    k = cfg.build_kernel()
    reps = []
    delta = k.delta if lm.series_delta is None else lm.series_delta
    reps.append(check_series_family(n, delta, lm.series_K, tol=cfg.slack.series))
    for d in lm.j_deltas:
        for dist in lm.j_dists:
            reps.append(check_remark_j(float(d), float(dist)))
    rng = np.random.default_rng(cfg.seed)
    if n == 1:
        rg = Grid(1, (cfg.grid.lo,), (cfg.grid.hi,), lm.region_cells)
    else:
        rg = Grid(2, (cfg.grid.lo,) * 2, (cfg.grid.hi,) * 2, min(lm.region_cells, 64))
    L = cfg.build_ladder(rg)
    for _ in range(lm.random_regions):
        region = random_region(rg, rng, 8 if n == 1 else 6)
        for a in (1.0, 2.0):
            reps.append(check_lemma_o(region, a, L))
    half = (lm.cone_box or (128.0 if n == 1 else 32.0)) / 2
    cg = Grid(n, (-half,) * n, (half,) * n, lm.cone_cells if n == 1 else min(lm.cone_cells, 128))
    CL = cfg.build_ladder(cg)
    for fn in family_by_name("bumps", n, cfg.seed)[:3]:
        f = fn.sample(cg)
        P = psi_transform(k, f, CL)
        top = float(square_function(P, 1.0).values.max())
        for q in lm.cone_thresholds:
            for a in cfg.operators.alphas:
                reps.append(check_cone_energy(f, q * top, float(a), k, CL, cfg.slack.cone_energy, field=P))
    if n == 1:
        tg = Grid(1, (cfg.grid.lo,), (cfg.grid.hi,), lm.tail_cells)
        inputs = mean_zero_inputs(1, lm.tail_inputs, cfg.seed)
    else:
        # the bumps must span several cells; 2-D tails converge like 1/box, see README
        tg = Grid(2, (-4.0, -4.0), (4.0, 4.0), min(lm.tail_cells, 256))
        inputs = mean_zero_inputs(2, min(lm.tail_inputs, 2), cfg.seed, side_range=(0.25, 0.25))
    reps.append(check_mean_zero_tail(inputs, tg, k, cfg.ladder.levels_per_octave, cfg.slack.tail_refine,
                                     cfg.slack.tail_box))
    dg = Grid(n, (0.0,) * n, (1.0,) * n, 4096 if n == 1 else 256)
    reps.append(check_doubling_family(dg, lm.doubling_families, seed=cfg.seed))
    grid = cfg.build_grid()
    fields = [3.0 * fn.sample(grid) for fn in family_by_name("standard", n, cfg.seed)]
    reps.append(check_ntv_split(fields, [0.5, 1.0, 2.0], cfg.slack.ntv_mean))
    return reps, {}


def run_gstar(cfg: ExperimentConfig, out: Path):
    lam = cfg.operators.lam
    if not lam > 2:
        raise ConfigError(f"g* weak type is stated for lambda > 2, got {lam}")
    grid, k = cfg.build_grid(), cfg.build_kernel()
    fam = _family(cfg)
    lpo = cfg.ladder.levels_per_octave
    reps = [
        check_weak_type("g_star", fam, cfg.rho.ladder(), k, grid, lam=lam, levels_per_octave=lpo,
                        stability=cfg.slack.weak_stability),
        check_g_star_domination(fam, grid, k, lam=lam, K=cfg.operators.K, levels_per_octave=lpo,
                                spread_tol=cfg.slack.gstar_spread),
    ]
    L = cfg.build_ladder(grid)
    for fn in fam[:4]:
        f = fn.sample(grid)
        S1 = square_function(psi_transform(k, f, L), 1.0).values
        for q in (0.25, 0.5, 0.75):
            reps.append(check_ok_uk_containment(f, float(np.quantile(S1, q)), 4, k, L))
    return reps, {}


COMMANDS = {
    "kernel-check": run_kernel_check,
    "whitney": run_whitney,
    "weak-type": run_weak_type,
    "lemmas": run_lemmas,
    "gstar": run_gstar,
}


def _dispatch(command: str, cfg: ExperimentConfig, out: Path, args):
    if cfg.counterexample is not None:
        return [run_counterexample(cfg.counterexample)], {}
    if command == "whitney":
        return run_whitney(cfg, out, args.region)
    return COMMANDS[command](cfg, out)


def _suite(reports) -> list[dict]:
    return [{k: r.to_dict()[k] for k in ("checker", "inputs_digest", "lhs", "rhs", "ratio", "slack", "pass")}
            for r in reports]


def _write(out: Path, reports, files) -> None:
    out.mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}
    for r in reports:
        i = counts.get(r.checker, 0)
        counts[r.checker] = i + 1
        io.write_json(out / f"{r.checker}_{i:03d}.json", r.to_dict())
    io.write_json(out / "suite.json", _suite(reports))
    io.write_rows_csv(out / "suite.csv", ["checker", "inputs_digest", "lhs", "rhs", "ratio", "pass"],
                      ([r.checker, r.inputs_digest, r.lhs, r.rhs, r.ratio, int(r.passed)] for r in reports))
    for name, writer in files.items():
        writer(out / name)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpsquare", description="Square-function inequality harness.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--out", help="output directory (default from config)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid-cells", type=int)
        sp.add_argument("--refine", action="store_true", help="rerun at 2x resolution and report deltas")
        sp.add_argument("--counterexample", choices=sorted(COUNTEREXAMPLES),
                        help="run a shipped failure fixture instead of the suite")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name == "whitney":
            sp.add_argument("--region", help="CSV with rows x[,y],value; value > 0 marks the region")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    started = time.time()
    try:
        cfg = with_overrides(load_config(args.config), args.seed, args.grid_cells, args.out)
        if args.counterexample:
            cfg = replace(cfg, counterexample=args.counterexample)
        if cfg.counterexample is not None and cfg.counterexample not in COUNTEREXAMPLES:
            raise ConfigError(f"unknown counterexample {cfg.counterexample!r}")
        cfg.validate()
        out = Path(cfg.output_dir) / args.command
        reports, files = _dispatch(args.command, cfg, out, args)
        refine = None
        if args.refine and cfg.counterexample is None:
            fine_cfg = replace(cfg, grid=replace(cfg.grid, cells=2 * cfg.grid.cells))
            fine, _ = _dispatch(args.command, fine_cfg, out, args)
            refine = [{"checker": a.checker, "lhs": a.lhs, "lhs_refined": b.lhs,
                       "ratio": a.ratio, "ratio_refined": b.ratio,
                       "ratio_delta": b.ratio - a.ratio, "pass_refined": b.passed}
                      for a, b in zip(reports, fine)]
            reports = reports + [r for r in fine if not r.passed]
    except (ConfigError, UsageError, io.ParseError, WhitneyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write(out, reports, files)
    if refine is not None:
        io.write_json(out / "refine.json", refine)
    io.write_json(out / "metadata.json", {
        "timestamp": datetime.now(timezone.utc).isoformat(), "argv": list(sys.argv if argv is None else argv),
        "version": __version__, "seconds": round(time.time() - started, 3), "config": cfg.to_dict()})
    failed = [r for r in reports if not r.passed]
    for r in reports:
        log.info("%-24s %s ratio=%.4g", r.checker, "pass" if r.passed else "FAIL", r.ratio)
    if failed:
        names = sorted({r.checker for r in failed})
        print(f"FAIL: {len(failed)} of {len(reports)} checks failed ({', '.join(names)})", file=sys.stderr)
        return 1
    print(f"ok: {len(reports)} checks passed -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
