"""Value types shared by the solvers and the evaluation harness."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np


class CruotError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CruotError, ValueError):
    pass


class NonFiniteEntry(CruotError, ValueError):
    pass


class NonPositiveWeight(CruotError, ValueError):
    pass


class NegativeArgument(CruotError, ValueError):
    pass


class NumericalOverflow(CruotError, FloatingPointError):
    pass


class DegenerateMarginal(CruotError, ValueError):
    pass


class MissingLabels(CruotError, ValueError):
    pass


class KTooLarge(CruotError, ValueError):
    pass


class EmptyDataset(CruotError, ValueError):
    pass


class ParseError(CruotError, ValueError):
    def __init__(self, message: str, line: int, column: Optional[str] = None):
        super().__init__(f"line {line}, column {column!r}: {message}")
        self.line = line
        self.column = column


class NonNumericFeature(ParseError):
    pass


class NormBoundViolation(CruotError, ValueError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PointCloud:
    """Points of one modality, an ``(n, d)`` array with optional labels."""

    points: np.ndarray
    labels: Optional[Tuple] = None
    name: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionMismatch(f"point cloud must be a non-empty 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteEntry(f"point cloud {self.name!r} contains NaN or Inf")
        object.__setattr__(self, "points", _frozen(pts))
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != pts.shape[0]:
                raise DimensionMismatch(f"{len(labels)} labels for {pts.shape[0]} points")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def take(self, indices: Sequence[int]) -> "PointCloud":
        idx = np.asarray(indices, dtype=int)
        labels = None if self.labels is None else tuple(self.labels[i] for i in idx)
        return PointCloud(self.points[idx], labels, self.name)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Strictly positive weights over the atoms of a point cloud."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size < 1:
            raise DimensionMismatch("measure needs at least one atom")
        if not np.all(np.isfinite(w)):
            raise NonFiniteEntry("measure weights contain NaN or Inf")
        if np.any(w <= 0):
            raise NonPositiveWeight("measure weights must be strictly positive")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def uniform(cls, n: int, total_mass: float = 1.0) -> "DiscreteMeasure":
        return cls(np.full(n, total_mass / n))

    @classmethod
    def from_weights(cls, weights, cloud: Optional[PointCloud] = None):
        """Build a measure, dropping zero-weight atoms (and the matching points).

        Returns ``(cloud, measure)`` when ``cloud`` is given, else the measure.
        """
        w = np.asarray(weights, dtype=float).ravel()
        keep = w != 0
        if not keep.all():
            warnings.warn(f"dropping {int((~keep).sum())} zero-weight atoms", stacklevel=2)
        measure = cls(w[keep])
        if cloud is None:
            return measure
        if cloud.n != w.size:
            raise DimensionMismatch(f"measure has {w.size} atoms, cloud has {cloud.n} points")
        return cloud.take(np.flatnonzero(keep)), measure

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class EntropySpec:
    """Marginal penalty: ``balanced`` hard constraint, or ``lam`` times KL."""

    kind: str = "balanced"
    lam: Optional[float] = None

    def __post_init__(self):
        if self.kind == "balanced":
            if self.lam is not None:
                raise ValueError("balanced entropy takes no lambda")
        elif self.kind == "scaled_kl":
            if self.lam is None or not (self.lam > 0) or not np.isfinite(self.lam):
                raise ValueError(f"scaled_kl needs a finite positive lambda, got {self.lam}")
            object.__setattr__(self, "lam", float(self.lam))
        else:
            raise ValueError(f"unknown entropy kind {self.kind!r}")

    @classmethod
    def balanced(cls) -> "EntropySpec":
        return cls("balanced")

    @classmethod
    def scaled_kl(cls, lam: float) -> "EntropySpec":
        return cls("scaled_kl", lam)

    @classmethod
    def from_lambda(cls, lam: Union[float, str]) -> "EntropySpec":
        """``"inf"`` (or ``math.inf``) selects the balanced constraint."""
        if isinstance(lam, str):
            if lam.strip().lower() in ("inf", "+inf", "infinity"):
                return cls.balanced()
            lam = float(lam)
        if np.isinf(lam) and lam > 0:
            return cls.balanced()
        return cls.scaled_kl(lam)

    @property
    def is_balanced(self) -> bool:
        return self.kind == "balanced"

    def damping(self, epsilon: float) -> float:
        """Exponent applied to the softmin in the dual block update."""
        if self.is_balanced:
            return 1.0
        return self.lam / (self.lam + epsilon)

    def __str__(self):
        return "inf" if self.is_balanced else repr(self.lam)


@dataclass(frozen=True)
class CouplingMatrix:
    """Dense nonnegative transport plan."""

    entries: np.ndarray

    def __post_init__(self):
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2:
            raise DimensionMismatch(f"plan must be 2-D, got shape {P.shape}")
        if not np.all(np.isfinite(P)):
            raise NonFiniteEntry("plan contains NaN or Inf")
        if np.any(P < 0):
            raise ValueError("plan entries must be nonnegative")
        object.__setattr__(self, "entries", _frozen(P))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    @property
    def row_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def col_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    @property
    def total_mass(self) -> float:
        return float(self.entries.sum())


# slack for the Frobenius-norm bound
NORM_SLACK = 1e-12


@dataclass(frozen=True)
class LinearCostMap:
    """A ``(q, p)`` matrix ``M`` with ``||M||_F <= radius``.

    Induces the cost ``c(x, y) = -<M x, y>``.
    """

    matrix: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        if M.ndim != 2:
            raise DimensionMismatch(f"cost map must be 2-D, got shape {M.shape}")
        if not np.all(np.isfinite(M)):
            raise NonFiniteEntry("cost map contains NaN or Inf")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        norm = np.linalg.norm(M)
        if norm > self.radius + NORM_SLACK:
            raise NormBoundViolation(f"||M||_F = {norm!r} exceeds radius {self.radius!r}")
        object.__setattr__(self, "matrix", _frozen(M))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def cost_matrix(self, source: np.ndarray, target: np.ndarray) -> np.ndarray:
        """``C[i, j] = -<M x_i, y_j>``."""
        return -(source @ self.matrix.T) @ target.T

    def push(self, source: np.ndarray) -> np.ndarray:
        return source @ self.matrix.T


@dataclass(frozen=True)
class SolveConfig:
    epsilon: float = 5e-3
    entropy1: EntropySpec = field(default_factory=EntropySpec.balanced)
    entropy2: EntropySpec = field(default_factory=EntropySpec.balanced)
    radius: float = 1.0
    max_outer_iters: int = 200
    max_sinkhorn_iters: int = 10000
    sinkhorn_tol: float = 1e-9
    outer_tol: float = 1e-7
    # "product", "zero" or ("seeded", seed)
    m_init: Union[str, Tuple[str, int]] = "product"
    standardize: bool = False
    warm_start: bool = True
    # Sinkhorn sweeps before Newton refinement; None disables it
    newton_after: Optional[int] = 200

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive; the iterative solver does not support epsilon = 0")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.max_outer_iters < 1 or self.max_sinkhorn_iters < 1:
            raise ValueError("iteration caps must be positive")
        if not (self.sinkhorn_tol > 0 and self.outer_tol > 0):
            raise ValueError("tolerances must be positive")
        init = self.m_init
        if isinstance(init, (list, tuple)):
            if len(init) != 2 or init[0] != "seeded":
                raise ValueError(f"bad m_init {init!r}")
            object.__setattr__(self, "m_init", ("seeded", int(init[1])))
        elif init not in ("product", "zero"):
            raise ValueError(f"bad m_init {init!r}")

    @classmethod
    def with_lambda(cls, lam, **kwargs) -> "SolveConfig":
        spec = EntropySpec.from_lambda(lam)
        return cls(entropy1=spec, entropy2=spec, **kwargs)


@dataclass(frozen=True)
class SolveResult:
    cost_map: LinearCostMap
    plan: CouplingMatrix
    objective_trace: Tuple[float, ...]
    converged: bool
    outer_iters_used: int
    marginal_residuals: Tuple[float, float]
    sinkhorn_iters: Tuple[int, ...] = ()


def validate(cloud: PointCloud, measure: DiscreteMeasure) -> None:
    """Check that ``measure`` is a valid weighting of ``cloud``.

    Construction already enforces per-object invariants; this re-checks them
    together with the length agreement.
    """
    if len(measure) != cloud.n:
        raise DimensionMismatch(f"measure has {len(measure)} atoms, cloud has {cloud.n} points")
    if not np.all(np.isfinite(cloud.points)):
        raise NonFiniteEntry("point cloud contains NaN or Inf")
    if np.any(measure.weights <= 0):
        raise NonPositiveWeight("measure weights must be strictly positive")
