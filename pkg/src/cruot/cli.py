"""Command-line front end.

Exit codes: 0 success, 1 bad input or configuration, 2 the solver hit an
iteration cap (artifacts are still written).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .bcd import solve_cruot, stripped_objective
from .core_types import CruotError, LinearCostMap, PointCloud, SolveResult
from .data_io import (
    RunConfig,
    fmt,
    load_dataset,
    load_run_config,
    write_dataset,
    write_report,
    write_solve_artifacts,
)
from .entropic_map import align, fit_map
from .evaluation import label_transfer_accuracy, subsample
from .toy import make_toy

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2

log = logging.getLogger("cruot")


@dataclass
class Inputs:
    source: PointCloud
    target: PointCloud
    full_target: PointCloud
    a: object
    b: object


def _with_seed(scheme, seed):
    return scheme if scheme is None or seed is None else replace(scheme, seed=seed)


def _load(cfg: RunConfig, seed: Optional[int] = None) -> Inputs:
    std = cfg.solve.standardize
    source, a = load_dataset(cfg.source_path, cfg.label_column, standardize=std)
    target, b = load_dataset(cfg.target_path, cfg.label_column, standardize=std)
    full_target = target
    if cfg.source_subsample is not None:
        source, a, _ = subsample(source, a, _with_seed(cfg.source_subsample, seed))
    if cfg.target_subsample is not None:
        target, b, _ = subsample(target, b, _with_seed(cfg.target_subsample, seed))
    return Inputs(source, target, full_target, a, b)


def _evaluate(cfg: RunConfig, data: Inputs, init_map: Optional[LinearCostMap] = None):
    """Solve, fit the map, align and score. Returns (result, report, aligned, map_converged)."""
    result = solve_cruot(data.source, data.a, data.target, data.b, cfg.solve, init_map=init_map)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit_map(
            result,
            data.source,
            data.target,
            cfg.inner_epsilon,
            tol=cfg.solve.sinkhorn_tol,
            max_iters=cfg.solve.max_sinkhorn_iters,
            outer_epsilon=cfg.solve.epsilon,
        )
    aligned = align(model, data.source)
    knn_target = data.full_target if cfg.knn_target == "full" else data.target
    report = label_transfer_accuracy(aligned, knn_target, k=cfg.knn_k, plan=result.plan)
    return result, report, aligned, model.converged


def _out_dir(cfg: RunConfig, out: Optional[str]) -> Path:
    return Path(out) if out is not None else cfg.output_dir


def cmd_solve(config_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    cfg = load_run_config(config_path)
    data = _load(cfg, seed)
    result = solve_cruot(data.source, data.a, data.target, data.b, cfg.solve)
    write_solve_artifacts(result, _out_dir(cfg, out), cfg.echo())
    if not result.converged:
        print(f"warning: not converged after {result.outer_iters_used} outer iterations", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _map_eval(cfg: RunConfig, data: Inputs, out_dir: Path, init_map=None):
    result, report, aligned, map_ok = _evaluate(cfg, data, init_map)
    write_report(report, result, out_dir, aligned=aligned, config_echo=cfg.echo())
    return result, report, result.converged and map_ok


def cmd_map_eval(config_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    cfg = load_run_config(config_path)
    data = _load(cfg, seed)
    _, report, ok = _map_eval(cfg, data, _out_dir(cfg, out))
    print(f"lta\t{fmt(report.lta)}")
    if not ok:
        print("warning: a solver stage hit its iteration cap", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _grid_label(x) -> str:
    return "inf" if isinstance(x, str) or math.isinf(x) else fmt(x)


def parse_grid(text: str, allow_inf: bool) -> List:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.lower() in ("inf", "+inf"):
            if not allow_inf:
                raise ValueError("'inf' is not allowed in this grid")
            vals.append("inf")
            continue
        v = float(tok)
        if not v > 0:
            raise ValueError(f"grid values must be positive, got {tok}")
        vals.append(v)
    if not vals:
        raise ValueError("empty grid")
    return vals


def cmd_sweep(
    config_path,
    lambdas: Optional[Sequence] = None,
    epsilons: Optional[Sequence[float]] = None,
    out: Optional[str] = None,
    seed: Optional[int] = None,
) -> int:
    """One map-eval run per grid point, each in its own directory, plus ``summary.tsv``.

    Epsilon grids are solved largest first and warm-start the cost map from
    the previous point; the summary then also carries the entropy-stripped
    objective.
    """
    if (lambdas is None) == (epsilons is None):
        raise ValueError("give exactly one of a lambda grid or an epsilon grid")
    cfg = load_run_config(config_path)
    data = _load(cfg, seed)
    root = _out_dir(cfg, out)
    root.mkdir(parents=True, exist_ok=True)
    rows, all_ok = [], True
    if lambdas is not None:
        header = ["lambda", "lta", "transported_mass", "final_objective", "converged"]
        for lam in lambdas:
            sub = cfg.with_lambda(lam)
            result, report, ok = _map_eval(sub, data, root / f"lambda_{_grid_label(lam)}")
            all_ok &= ok
            rows.append([_grid_label(lam), fmt(report.lta), fmt(report.transported_mass),
                         fmt(result.objective_trace[-1]), fmt(ok)])
    else:
        header = ["epsilon", "lta", "transported_mass", "stripped_objective", "converged"]
        init = None
        for eps in sorted(epsilons, reverse=True):
            sub = replace(cfg, solve=replace(cfg.solve, epsilon=eps))
            result, report, ok = _map_eval(sub, data, root / f"epsilon_{fmt(eps)}", init_map=init)
            init = result.cost_map
            all_ok &= ok
            s = cfg.solve
            val = stripped_objective(result.plan, result.cost_map, data.source, data.target,
                                     data.a, data.b, s.entropy1, s.entropy2, eps)
            rows.append([fmt(eps), fmt(report.lta), fmt(report.transported_mass), fmt(val), fmt(ok)])
    with (root / "summary.tsv").open("w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")
    return EXIT_OK if all_ok else EXIT_NOT_CONVERGED


def cmd_subsample(config_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    """Write the subsampled source and target tables as ``source.csv`` and ``target.csv``."""
    cfg = load_run_config(config_path)
    if cfg.source_subsample is None and cfg.target_subsample is None:
        raise ValueError("config has no 'subsample' section")
    data = _load(cfg, seed)
    root = _out_dir(cfg, out)
    label = cfg.label_column or "label"
    write_dataset(root / "source.csv", data.source, label)
    write_dataset(root / "target.csv", data.target, label)
    return EXIT_OK


def cmd_toy(seed: int, n_source: int, n_target: int, out_dir) -> int:
    """Write ``source.csv`` (3-D) and ``target.csv`` (2-D) with a ``label`` column."""
    source, target = make_toy(seed, n_source, n_target)
    root = Path(out_dir)
    write_dataset(root / "source.csv", source)
    write_dataset(root / "target.csv", target)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cruot", description="Cost-regularized unbalanced OT alignment.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--seed", type=int, help="override the subsampling seed")

    common(sub.add_parser("solve", help="run the alternating solver and write M, trace and a summary"))
    common(sub.add_parser("map-eval", help="solve, fit the entropic map and report label transfer accuracy"))
    sw = sub.add_parser("sweep", help="map-eval over a lambda or epsilon grid")
    common(sw)
    grid = sw.add_mutually_exclusive_group(required=True)
    grid.add_argument("--lambda-grid", help="comma-separated values, 'inf' allowed")
    grid.add_argument("--epsilon-grid", help="comma-separated positive values")
    common(sub.add_parser("subsample", help="write label-dependent subsamples of both tables"))
    toy = sub.add_parser("toy", help="generate the synthetic 3-D to 2-D mixture")
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--n-source", type=int, default=500)
    toy.add_argument("--n-target", type=int, default=500)
    toy.add_argument("--out", required=True)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s")
    try:
        if args.command == "solve":
            return cmd_solve(args.config, args.out, args.seed)
        if args.command == "map-eval":
            return cmd_map_eval(args.config, args.out, args.seed)
        if args.command == "sweep":
            if args.lambda_grid is not None:
                return cmd_sweep(args.config, lambdas=parse_grid(args.lambda_grid, True), out=args.out, seed=args.seed)
            return cmd_sweep(args.config, epsilons=parse_grid(args.epsilon_grid, False), out=args.out, seed=args.seed)
        if args.command == "subsample":
            return cmd_subsample(args.config, args.out, args.seed)
        if args.command == "toy":
            return cmd_toy(args.seed, args.n_source, args.n_target, args.out)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CruotError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
