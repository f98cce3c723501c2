"""CSV ingestion, run configuration and result files.

Output formats (all UTF-8, tab separated, numbers with 12 significant
digits):

``report.txt``
    One ``key<TAB>value`` pair per line. Keys: ``lta``, ``k``,
    ``n_source_eval``, ``transported_mass``, ``final_objective``,
    ``outer_iters``, ``converged``, then one ``per_label_accuracy.<label>``
    line per source label, then ``config.<name>`` lines echoing the run
    configuration.
``aligned.tsv``
    Header ``dim_0 ... dim_{q-1} label``; one row per aligned source point.
``trace.tsv``
    Header ``iteration J``; one row per outer iteration, counting from 1.
``cost_map.tsv``
    The ``q x p`` matrix ``M``, no header.
``solve_summary.txt``
    ``key<TAB>value`` lines describing the plan and the run.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .core_types import (
    DiscreteMeasure,
    EmptyDataset,
    EntropySpec,
    NonNumericFeature,
    ParseError,
    PointCloud,
    SolveConfig,
    SolveResult,
)
from .evaluation import EvalReport, SubsampleScheme

PathLike = Union[str, os.PathLike]


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def standardize_columns(points: np.ndarray) -> np.ndarray:
    """Z-score each column; constant columns are only centered."""
    mean = points.mean(axis=0)
    std = points.std(axis=0)
    std[std == 0] = 1.0
    return (points - mean) / std


def load_dataset(
    path: PathLike, label_column: Optional[str] = None, standardize: bool = False
) -> Tuple[PointCloud, DiscreteMeasure]:
    """Read a headed CSV into a point cloud with uniform unit-mass weights.

    Every column except ``label_column`` must be numeric. Row order is kept.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if label_column is not None and label_column not in header:
            raise ParseError(f"label column {label_column!r} not in header", line=1, column=label_column)
        label_idx = header.index(label_column) if label_column is not None else None
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        if not feature_idx:
            raise ParseError("no feature columns", line=1)
        rows: List[List[float]] = []
        labels: List[str] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", line=lineno)
            values = []
            for i in feature_idx:
                cell = row[i].strip()
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericFeature(f"non-numeric value {cell!r}", line=lineno, column=header[i]) from None
            rows.append(values)
            if label_idx is not None:
                labels.append(row[label_idx].strip())
    if not rows:
        raise EmptyDataset(f"{path} has a header but no data rows")
    points = np.array(rows, dtype=float)
    if standardize:
        points = standardize_columns(points)
    cloud = PointCloud(points, tuple(labels) if label_idx is not None else None, path.stem)
    return cloud, DiscreteMeasure.uniform(cloud.n)


def write_dataset(path: PathLike, cloud: PointCloud, label_column: str = "label") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [f"x{i}" for i in range(cloud.dim)]
        if cloud.labels is not None:
            header.append(label_column)
        w.writerow(header)
        for i in range(cloud.n):
            row = [fmt(v) for v in cloud.points[i]]
            if cloud.labels is not None:
                row.append(str(cloud.labels[i]))
            w.writerow(row)


def _scheme(d: Optional[Dict[str, Any]]) -> Optional[SubsampleScheme]:
    if d is None:
        return None
    return SubsampleScheme(
        per_label_rates=dict(d.get("per_label_rates", {})),
        default_rate=float(d.get("default_rate", 1.0)),
        seed=int(d.get("seed", 0)),
    )


@dataclass
class RunConfig:
    source_path: Path
    target_path: Path
    label_column: Optional[str] = None
    solve: SolveConfig = field(default_factory=SolveConfig)
    lam: Union[float, str] = "inf"
    inner_epsilon: float = 5e-3
    knn_k: int = 5
    source_subsample: Optional[SubsampleScheme] = None
    target_subsample: Optional[SubsampleScheme] = None
    # "subsampled" trains k-NN on the target used for alignment, "full" on the whole table
    knn_target: str = "subsampled"
    output_dir: Path = Path("out")

    @property
    def entropy(self) -> EntropySpec:
        return EntropySpec.from_lambda(self.lam)

    def with_lambda(self, lam) -> "RunConfig":
        from dataclasses import replace

        spec = EntropySpec.from_lambda(lam)
        return replace(self, lam=lam, solve=replace(self.solve, entropy1=spec, entropy2=spec))

    def echo(self) -> Dict[str, str]:
        s = self.solve
        return {
            "source_path": str(self.source_path),
            "target_path": str(self.target_path),
            "label_column": str(self.label_column),
            "lambda": str(self.entropy),
            "epsilon": fmt(s.epsilon),
            "inner_epsilon": fmt(self.inner_epsilon),
            "radius": fmt(s.radius),
            "knn_k": str(self.knn_k),
            "max_outer_iters": str(s.max_outer_iters),
            "max_sinkhorn_iters": str(s.max_sinkhorn_iters),
            "sinkhorn_tol": fmt(s.sinkhorn_tol),
            "outer_tol": fmt(s.outer_tol),
            "m_init": s.m_init if isinstance(s.m_init, str) else f"seeded:{s.m_init[1]}",
            "standardize": fmt(s.standardize),
            "knn_target": self.knn_target,
        }


_SOLVE_KEYS = (
    "epsilon",
    "radius",
    "max_outer_iters",
    "max_sinkhorn_iters",
    "sinkhorn_tol",
    "outer_tol",
    "m_init",
    "standardize",
    "warm_start",
    "newton_after",
)


def parse_run_config(raw: Dict[str, Any], base_dir: PathLike = ".") -> RunConfig:
    """Build a :class:`RunConfig` from a decoded JSON object.

    Relative paths are resolved against ``base_dir``. ``"lambda"`` is a
    positive number or ``"inf"``. ``"subsample"`` is either one scheme used
    for both sides or ``{"source": {...}, "target": {...}}``. Unlike
    :class:`SolveConfig`, ``solve.standardize`` defaults to true here.
    """
    base = Path(base_dir)
    unknown = set(raw) - {
        "source_path",
        "target_path",
        "label_column",
        "solve",
        "lambda",
        "inner_epsilon",
        "knn_k",
        "subsample",
        "knn_target",
        "output_dir",
    }
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("source_path", "target_path"):
        if key not in raw:
            raise ValueError(f"config is missing {key!r}")
    solve_raw = dict(raw.get("solve", {}))
    bad = set(solve_raw) - set(_SOLVE_KEYS)
    if bad:
        raise ValueError(f"unknown solve keys: {sorted(bad)}")
    # run configs describe real datasets, so features are standardized unless disabled
    solve_raw.setdefault("standardize", True)
    if isinstance(solve_raw.get("m_init"), list):
        solve_raw["m_init"] = tuple(solve_raw["m_init"])
    lam = raw.get("lambda", "inf")
    spec = EntropySpec.from_lambda(lam)
    solve = SolveConfig(entropy1=spec, entropy2=spec, **solve_raw)

    sub = raw.get("subsample")
    if sub is not None and ("source" in sub or "target" in sub):
        src_s, tgt_s = _scheme(sub.get("source")), _scheme(sub.get("target"))
    else:
        src_s = tgt_s = _scheme(sub)

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    knn_target = raw.get("knn_target", "subsampled")
    if knn_target not in ("subsampled", "full"):
        raise ValueError("knn_target must be 'subsampled' or 'full'")
    return RunConfig(
        source_path=resolve(raw["source_path"]),
        target_path=resolve(raw["target_path"]),
        label_column=raw.get("label_column"),
        solve=solve,
        lam=lam,
        inner_epsilon=float(raw.get("inner_epsilon", solve.epsilon)),
        knn_k=int(raw.get("knn_k", 5)),
        source_subsample=src_s,
        target_subsample=tgt_s,
        knn_target=knn_target,
        output_dir=resolve(raw.get("output_dir", "out")),
    )


def load_run_config(path: PathLike) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    with path.open(encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from None
    return parse_run_config(raw, path.parent)


def _write_kv(path: Path, items) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for key, value in items:
            fh.write(f"{key}\t{fmt(value)}\n")


def write_trace(path: PathLike, trace) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("iteration\tJ\n")
        for k, J in enumerate(trace, start=1):
            fh.write(f"{k}\t{fmt(J)}\n")


def write_matrix(path: PathLike, M: np.ndarray) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in np.atleast_2d(M):
            fh.write("\t".join(fmt(v) for v in row) + "\n")


def write_aligned(path: PathLike, aligned: PointCloud) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("\t".join([f"dim_{i}" for i in range(aligned.dim)] + ["label"]) + "\n")
        for i in range(aligned.n):
            label = "" if aligned.labels is None else str(aligned.labels[i])
            fh.write("\t".join([fmt(v) for v in aligned.points[i]] + [label]) + "\n")


def write_solve_artifacts(result: SolveResult, out_dir: PathLike, config_echo: Optional[Dict[str, str]] = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    P = result.plan.entries
    items = [
        ("n_source", P.shape[0]),
        ("n_target", P.shape[1]),
        ("transported_mass", float(P.sum())),
        ("final_objective", result.objective_trace[-1] if result.objective_trace else math.nan),
        ("outer_iters", result.outer_iters_used),
        ("converged", result.converged),
        ("row_residual", result.marginal_residuals[0]),
        ("col_residual", result.marginal_residuals[1]),
        ("cost_map_norm", result.cost_map.frobenius_norm),
    ]
    items += [(f"config.{k}", v) for k, v in (config_echo or {}).items()]
    _write_kv(out / "solve_summary.txt", items)
    write_matrix(out / "cost_map.tsv", result.cost_map.matrix)
    write_trace(out / "trace.tsv", result.objective_trace)


def write_report(
    report: EvalReport,
    result: Optional[SolveResult],
    path: PathLike,
    aligned: Optional[PointCloud] = None,
    config_echo: Optional[Dict[str, str]] = None,
) -> None:
    """Write ``report.txt`` and, when available, ``aligned.tsv`` and ``trace.tsv`` into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    items: List[Tuple[str, Any]] = [("lta", report.lta)]
    if result is not None:
        items += [
            ("k", report.k),
            ("n_source_eval", report.n_source_eval),
            ("transported_mass", report.transported_mass),
            ("final_objective", result.objective_trace[-1] if result.objective_trace else math.nan),
            ("outer_iters", result.outer_iters_used),
            ("converged", result.converged),
        ]
    items += [(f"per_label_accuracy.{lab}", acc) for lab, acc in report.per_label_accuracy.items()]
    items += [(f"config.{k}", v) for k, v in (config_echo or {}).items()]
    _write_kv(out / "report.txt", items)
    if aligned is not None:
        write_aligned(out / "aligned.tsv", aligned)
    if result is not None:
        write_trace(out / "trace.tsv", result.objective_trace)


def read_kv(path: PathLike) -> Dict[str, str]:
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("\t")
            out[key] = value
    return out


def read_report(path: PathLike) -> Dict[str, Any]:
    """Parse ``report.txt``; numeric values come back as floats."""
    p = Path(path)
    if p.is_dir():
        p = p / "report.txt"
    parsed: Dict[str, Any] = {}
    for key, value in read_kv(p).items():
        if key.startswith("config."):
            parsed[key] = value
            continue
        try:
            parsed[key] = float(value)
        except ValueError:
            parsed[key] = {"true": True, "false": False}.get(value, value)
    return parsed


def read_trace(path: PathLike) -> List[Tuple[int, float]]:
    with Path(path).open(encoding="utf-8") as fh:
        next(fh)
        return [(int(k), float(J)) for k, J in (line.rstrip("\n").split("\t") for line in fh if line.strip())]
