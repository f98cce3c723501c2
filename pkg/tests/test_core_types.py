import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cruot.core_types import (
    CouplingMatrix,
    DimensionMismatch,
    DiscreteMeasure,
    EntropySpec,
    LinearCostMap,
    NonFiniteEntry,
    NonPositiveWeight,
    NormBoundViolation,
    PointCloud,
    SolveConfig,
    validate,
)


def test_validate_accepts_valid_input():
    cloud = PointCloud(np.arange(6.0).reshape(3, 2))
    validate(cloud, DiscreteMeasure([0.2, 0.3, 0.5]))


def test_validate_length_mismatch():
    cloud = PointCloud(np.zeros((3, 2)))
    with pytest.raises(DimensionMismatch):
        validate(cloud, DiscreteMeasure([0.5, 0.5]))


def test_nan_cloud_rejected():
    with pytest.raises(NonFiniteEntry):
        PointCloud(np.array([[0.0, np.nan], [1.0, 2.0]]))


def test_nonpositive_weight_rejected():
    with pytest.raises(NonPositiveWeight):
        DiscreteMeasure([0.5, 0.0])
    with pytest.raises(NonPositiveWeight):
        DiscreteMeasure([0.5, -1.0])


def test_zero_weights_dropped_with_warning():
    with pytest.warns(UserWarning):
        m = DiscreteMeasure.from_weights([0.5, 0.0, 0.5])
    assert len(m) == 2


def test_label_count_must_match():
    with pytest.raises(DimensionMismatch):
        PointCloud(np.zeros((3, 2)), labels=("a", "b"))


def test_arrays_are_read_only():
    cloud = PointCloud(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        cloud.points[0, 0] = 1.0
    P = CouplingMatrix(np.ones((2, 2)))
    with pytest.raises(ValueError):
        P.entries[0, 0] = 3.0


def test_uniform_measure():
    m = DiscreteMeasure.uniform(4)
    assert np.allclose(m.weights, 0.25)
    assert m.total_mass == pytest.approx(1.0)


def test_entropy_spec_from_lambda():
    assert EntropySpec.from_lambda("inf").is_balanced
    assert EntropySpec.from_lambda(math.inf).is_balanced
    spec = EntropySpec.from_lambda(1.3)
    assert not spec.is_balanced and spec.lam == 1.3
    assert spec.damping(0.1) == pytest.approx(1.3 / 1.4)
    assert EntropySpec.balanced().damping(0.1) == 1.0
    with pytest.raises(ValueError):
        EntropySpec.from_lambda(-1.0)


def test_cost_map_norm_bound():
    LinearCostMap(np.array([[0.6, 0.8]]), 1.0)
    LinearCostMap(np.array([[0.6, 0.8]]) * (1 + 5e-13), 1.0)
    with pytest.raises(NormBoundViolation):
        LinearCostMap(np.array([[0.6, 0.81]]), 1.0)


def test_cost_matrix_is_negative_inner_product(rng):
    M = rng.standard_normal((2, 3))
    M /= np.linalg.norm(M)
    X, Y = rng.standard_normal((4, 3)), rng.standard_normal((5, 2))
    C = LinearCostMap(M, 1.0).cost_matrix(X, Y)
    direct = np.array([[-(M @ x) @ y for y in Y] for x in X])
    assert np.allclose(C, direct, atol=1e-14)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SolveConfig(m_init="bogus")
    assert SolveConfig(m_init=["seeded", 3]).m_init == ("seeded", 3)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_marginals_sum_to_total_mass(n, m, seed):
    P = CouplingMatrix(np.random.default_rng(seed).random((n, m)))
    total = P.total_mass
    assert abs(P.row_marginal.sum() - total) <= 1e-12 * max(1.0, total)
    assert abs(P.col_marginal.sum() - total) <= 1e-12 * max(1.0, total)


def test_negative_plan_rejected():
    with pytest.raises(ValueError):
        CouplingMatrix(np.array([[0.1, -0.1]]))
