import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cruot.core_types import (
    DimensionMismatch,
    DiscreteMeasure,
    EmptyDataset,
    KTooLarge,
    MissingLabels,
    PointCloud,
)
from cruot.evaluation import (
    SubsampleScheme,
    knn_predict,
    label_transfer_accuracy,
    pick_labels,
    subsample,
    transported_mass,
)


def _cloud(labels, seed=0, dim=2):
    r = np.random.default_rng(seed)
    return PointCloud(r.standard_normal((len(labels), dim)), tuple(labels))


def test_subsample_identity_at_full_rate():
    c = _cloud(["a", "b", "a", "c"])
    out, meas, idx = subsample(c, DiscreteMeasure.uniform(4), SubsampleScheme())
    assert idx.tolist() == [0, 1, 2, 3]
    assert np.array_equal(out.points, c.points) and out.labels == c.labels
    assert np.allclose(meas.weights, 0.25)


def test_subsample_exact_counts():
    c = _cloud(["x"] * 10 + ["y"] * 7 + ["z"] * 4 + ["w"] * 9)
    scheme = SubsampleScheme({"x": 0.3, "y": 0.5, "z": 0.75, "w": 0.75}, seed=7)
    out, meas, _ = subsample(c, None, scheme)
    counts = {lab: out.labels.count(lab) for lab in "xyzw"}
    # half-way values round up
    assert counts == {"x": 3, "y": 4, "z": 3, "w": 7}
    assert meas.total_mass == pytest.approx(1.0)


def test_subsample_reproducible_and_seed_sensitive():
    c = _cloud(["a"] * 50 + ["b"] * 50)
    s = SubsampleScheme({"a": 0.3}, seed=1)
    i1 = subsample(c, None, s)[2]
    i2 = subsample(c, None, s)[2]
    i3 = subsample(c, None, SubsampleScheme({"a": 0.3}, seed=2))[2]
    assert np.array_equal(i1, i2)
    assert not np.array_equal(i1, i3)
    assert np.all(np.diff(i1) > 0)


def test_subsample_errors():
    with pytest.raises(MissingLabels):
        subsample(PointCloud(np.zeros((3, 2))), None, SubsampleScheme())
    with pytest.raises(EmptyDataset):
        subsample(_cloud(["a", "a"]), None, SubsampleScheme(default_rate=0.0))
    with pytest.raises(ValueError):
        SubsampleScheme({"a": 1.5})
    with pytest.raises(DimensionMismatch):
        subsample(_cloud(["a", "a"]), DiscreteMeasure.uniform(3), SubsampleScheme())


def test_pick_labels():
    labs = ["d", "a", "c", "b", "a"]
    picked = pick_labels(labs, 2, seed=3)
    assert len(set(picked)) == 2 and set(picked) <= set(labs)
    assert pick_labels(labs, 2, seed=3) == picked
    with pytest.raises(ValueError):
        pick_labels(labs, 5, seed=0)


def test_knn_exact_match():
    T = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
    assert knn_predict(T, ["a", "b", "c"], T[[2]], 1) == ["c"]


def test_knn_clusters():
    r = np.random.default_rng(0)
    A = r.normal(0, 0.1, (5, 2))
    B = r.normal(10, 0.1, (5, 2))
    pred = knn_predict(np.vstack([A, B]), ["A"] * 5 + ["B"] * 5, [[0.05, 0.0]], 3)
    assert pred == ["A"]


def test_knn_vote_tie_goes_to_closer_group():
    # 1-D points; query at 0. Distances: a:1.0,1.5  b:1.2,1.3  c:4.0
    T = np.array([[1.0], [1.5], [-1.2], [1.3], [4.0]])
    labels = ["a", "a", "b", "b", "c"]
    assert knn_predict(T, labels, [[0.0]], 4) == ["a"]
    labels2 = ["a", "b", "b", "a", "c"]  # a:1.0,1.3  b:1.5,1.2 -> a nearest
    assert knn_predict(T, labels2, [[0.0]], 4) == ["a"]


def test_knn_distance_tie_uses_lower_index():
    T = np.array([[1.0], [-1.0]])
    assert knn_predict(T, ["left_is_second", "x"], [[0.0]], 1) == ["left_is_second"]


def test_knn_label_order_breaks_remaining_ties():
    T = np.array([[1.0], [-1.0]])
    assert knn_predict(T, ["z", "b"], [[0.0]], 2) == ["b"]


def test_knn_errors():
    with pytest.raises(KTooLarge):
        knn_predict(np.zeros((2, 1)), ["a", "b"], np.zeros((1, 1)), 3)
    with pytest.raises(DimensionMismatch):
        knn_predict(np.zeros((2, 1)), ["a", "b"], np.zeros((1, 2)), 1)


@given(st.integers(0, 2**32 - 1))
def test_knn_rigid_motion_invariance(seed):
    r = np.random.default_rng(seed)
    T, Qp = r.standard_normal((30, 3)), r.standard_normal((10, 3))
    labels = [f"l{i}" for i in r.integers(0, 4, 30)]
    R, _ = np.linalg.qr(r.standard_normal((3, 3)))
    shift = r.standard_normal(3)
    before = knn_predict(T, labels, Qp, 5)
    after = knn_predict(T @ R.T + shift, labels, Qp @ R.T + shift, 5)
    assert before == after


def test_lta_perfect_and_per_label():
    c = _cloud(["a", "b", "a", "c", "c", "c"])
    rep = label_transfer_accuracy(c, c, k=1)
    assert rep.lta == 1.0 and rep.n_source_eval == 6
    assert rep.per_label_accuracy == {"a": 1.0, "b": 1.0, "c": 1.0}
    assert math.isnan(rep.transported_mass)


@given(st.integers(0, 2**32 - 1))
def test_lta_weighted_average_of_per_label(seed):
    r = np.random.default_rng(seed)
    src = PointCloud(r.standard_normal((40, 2)), tuple(f"k{i}" for i in r.integers(0, 3, 40)))
    tgt = PointCloud(r.standard_normal((30, 2)), tuple(f"k{i}" for i in r.integers(0, 3, 30)))
    rep = label_transfer_accuracy(src, tgt, k=3)
    avg = sum(rep.per_label_accuracy[l] * rep.per_label_count[l] for l in rep.per_label_accuracy) / 40
    assert 0.0 <= rep.lta <= 1.0
    assert avg == pytest.approx(rep.lta, abs=1e-12)


def test_lta_random_labels_near_chance():
    r = np.random.default_rng(99)
    L, n = 4, 2000
    tgt = PointCloud(r.standard_normal((n, 2)), tuple(r.integers(0, L, n).tolist()))
    src = PointCloud(r.standard_normal((n, 2)), tuple(r.integers(0, L, n).tolist()))
    lta = label_transfer_accuracy(src, tgt, k=5).lta
    sigma = math.sqrt((1 / L) * (1 - 1 / L) / n)
    assert abs(lta - 1 / L) < 3 * sigma


def test_lta_errors():
    c = _cloud(["a", "b"])
    with pytest.raises(MissingLabels):
        label_transfer_accuracy(PointCloud(c.points), c)
    with pytest.raises(DimensionMismatch):
        label_transfer_accuracy(_cloud(["a", "b"], dim=3), c, k=1)


def test_transported_mass():
    assert transported_mass(np.full((2, 2), 0.25)) == 1.0
    assert transported_mass(np.zeros((3, 2))) == 0.0
