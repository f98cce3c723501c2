"""Label-transfer evaluation: subsampling, brute-force k-NN and LTA."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Optional, Sequence

import numpy as np

from .core_types import (
    CouplingMatrix,
    DimensionMismatch,
    DiscreteMeasure,
    EmptyDataset,
    KTooLarge,
    MissingLabels,
    PointCloud,
)

# query rows per distance block; bounds memory at roughly chunk * m * d floats
_KNN_CHUNK = 256


@dataclass(frozen=True)
class SubsampleScheme:
    per_label_rates: Mapping[Hashable, float] = field(default_factory=dict)
    default_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        rates = dict(self.per_label_rates)
        for lab, rate in list(rates.items()) + [("<default>", self.default_rate)]:
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate for {lab!r} is {rate}, expected a value in [0, 1]")
        object.__setattr__(self, "per_label_rates", rates)

    def rate(self, label) -> float:
        return self.per_label_rates.get(label, self.default_rate)


@dataclass(frozen=True)
class EvalReport:
    lta: float
    k: int
    n_source_eval: int
    per_label_accuracy: Dict[Hashable, float] = field(default_factory=dict)
    transported_mass: float = math.nan
    per_label_count: Dict[Hashable, int] = field(default_factory=dict)


def _unique_in_order(labels: Sequence) -> List:
    seen = {}
    for lab in labels:
        seen.setdefault(lab, None)
    return list(seen)


def _sorted_labels(labels) -> List:
    try:
        return sorted(labels)
    except TypeError:
        return sorted(labels, key=lambda lab: (type(lab).__name__, str(lab)))


def _keep_count(rate: float, n: int) -> int:
    # round half up, so that round(0.5 * 3) == 2 regardless of float parity rules
    return int(math.floor(rate * n + 0.5))


def subsample(cloud: PointCloud, measure: Optional[DiscreteMeasure], scheme: SubsampleScheme):
    """Keep ``round(rate * n_label)`` points of every label, chosen by a seeded shuffle.

    Kept points stay in their original order and receive uniform weights
    summing to one. ``measure`` is accepted for symmetry with the loaders and
    only checked for length.

    Returns:
        ``(cloud, measure, kept_indices)``.
    """
    if cloud.labels is None:
        raise MissingLabels("subsampling by cell type needs labels")
    if measure is not None and len(measure) != cloud.n:
        raise DimensionMismatch(f"measure has {len(measure)} atoms, cloud has {cloud.n} points")
    labels = np.array(cloud.labels, dtype=object)
    rng = np.random.default_rng(scheme.seed)
    kept: List[int] = []
    for lab in _unique_in_order(cloud.labels):
        idx = np.flatnonzero(labels == lab)
        count = _keep_count(scheme.rate(lab), idx.size)
        perm = rng.permutation(idx.size)
        kept.extend(idx[perm[:count]].tolist())
    if not kept:
        raise EmptyDataset("subsampling removed every point")
    kept_idx = np.array(sorted(kept), dtype=int)
    return cloud.take(kept_idx), DiscreteMeasure.uniform(kept_idx.size), kept_idx


def pick_labels(labels: Sequence, count: int, seed: int) -> List:
    """Draw ``count`` distinct labels uniformly at random (sorted-label order, seeded)."""
    pool = _sorted_labels(_unique_in_order(labels))
    if count > len(pool):
        raise ValueError(f"cannot pick {count} labels out of {len(pool)}")
    rng = np.random.default_rng(seed)
    return [pool[i] for i in rng.choice(len(pool), size=count, replace=False)]


def knn_predict(train_points, train_labels: Sequence, query_points, k: int) -> List:
    """Majority vote among the ``k`` Euclidean nearest training points.

    Equal distances are ordered by training index. A tied vote goes to the
    label whose nearest member among the ``k`` neighbours is closest, then to
    the smallest label.
    """
    T = np.atleast_2d(np.asarray(train_points, dtype=float))
    Q = np.atleast_2d(np.asarray(query_points, dtype=float))
    m = T.shape[0]
    if len(train_labels) != m:
        raise DimensionMismatch(f"{len(train_labels)} labels for {m} training points")
    if T.shape[1] != Q.shape[1]:
        raise DimensionMismatch(f"train dimension {T.shape[1]} vs query dimension {Q.shape[1]}")
    if k < 1:
        raise ValueError("k must be positive")
    if k > m:
        raise KTooLarge(f"k={k} exceeds the {m} training points")
    train_labels = list(train_labels)
    label_rank = {lab: r for r, lab in enumerate(_sorted_labels(_unique_in_order(train_labels)))}

    preds = []
    for start in range(0, Q.shape[0], _KNN_CHUNK):
        block = Q[start : start + _KNN_CHUNK]
        D = np.sqrt(((block[:, None, :] - T[None, :, :]) ** 2).sum(axis=-1))
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        for row, nbrs in enumerate(order):
            votes = Counter()
            nearest = {}
            for j in nbrs:
                lab = train_labels[j]
                votes[lab] += 1
                nearest.setdefault(lab, D[row, j])
            top = max(votes.values())
            tied = [lab for lab, c in votes.items() if c == top]
            preds.append(min(tied, key=lambda lab: (nearest[lab], label_rank[lab])))
    return preds


def transported_mass(plan) -> float:
    P = plan.entries if isinstance(plan, CouplingMatrix) else np.asarray(plan, dtype=float)
    return float(P.sum())


def label_transfer_accuracy(
    aligned_source: PointCloud,
    target: PointCloud,
    k: int = 5,
    plan: Optional[CouplingMatrix] = None,
) -> EvalReport:
    """Classify aligned source points with k-NN on the labeled target cloud."""
    if aligned_source.labels is None or target.labels is None:
        raise MissingLabels("both clouds need labels to compute label transfer accuracy")
    if aligned_source.dim != target.dim:
        raise DimensionMismatch(
            f"aligned source lives in dimension {aligned_source.dim}, target in {target.dim}"
        )
    preds = knn_predict(target.points, target.labels, aligned_source.points, k)
    truth = aligned_source.labels
    correct = np.array([p == t for p, t in zip(preds, truth)], dtype=float)
    per_label, counts = {}, {}
    for lab in _sorted_labels(_unique_in_order(truth)):
        mask = np.array([t == lab for t in truth])
        counts[lab] = int(mask.sum())
        per_label[lab] = float(correct[mask].mean())
    return EvalReport(
        lta=float(correct.mean()),
        k=k,
        n_source_eval=len(truth),
        per_label_accuracy=per_label,
        transported_mass=transported_mass(plan) if plan is not None else math.nan,
        per_label_count=counts,
    )

