import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from faceqa.core import (
    DataError,
    Dataset,
    EmbeddingRecord,
    batch_triplet_loss,
    euclidean_distance,
    load_jsonl,
    save_jsonl,
    triplet_loss,
    triplet_loss_grad,
)
from conftest import brute_distance, central_diff, rel_err


def test_distance_identity():
    v = np.array([0.3, -1.2, 4.0])
    assert euclidean_distance(v, v) == 0.0


def test_distance_orthonormal_axes():
    e1, e2 = np.eye(5)[0], np.eye(5)[1]
    assert euclidean_distance(e1, e2) == pytest.approx(math.sqrt(2), abs=1e-15)


def test_distance_matches_loop(rng):
    a, b = rng.standard_normal(8), rng.standard_normal(8)
    assert abs(euclidean_distance(a, b) - brute_distance(a, b)) <= 1e-12


def test_distance_dim_mismatch():
    with pytest.raises(DataError):
        euclidean_distance(np.zeros(3), np.zeros(4))


def test_distance_metric_axioms_sampled():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        x, y, z = rng.standard_normal((3, 6)) * rng.uniform(0.1, 10)
        dxy, dyx = euclidean_distance(x, y), euclidean_distance(y, x)
        assert dxy == dyx
        assert dxy >= 0
        assert euclidean_distance(x, z) <= dxy + euclidean_distance(y, z) + 1e-12


def test_triplet_hinge_floor():
    rng = np.random.default_rng(1)
    a, n = rng.standard_normal((2, 4))
    assert triplet_loss(a, a, n, 0.0) == 0.0


def test_triplet_anchor_on_negative():
    a = np.zeros(3)
    p = np.array([1.0, 0, 0])
    assert triplet_loss(a, p, a.copy(), 0.0) == 1.0


def test_triplet_matches_term_by_term(rng):
    a, p, n = rng.standard_normal((3, 8))
    dp = math.fsum((x - y) ** 2 for x, y in zip(a, p))
    dn = math.fsum((x - y) ** 2 for x, y in zip(a, n))
    expected = max(0.0, dp - dn + 0.2)
    assert abs(triplet_loss(a, p, n, 0.2) - expected) <= 1e-12


def test_triplet_rejects_negative_margin():
    with pytest.raises(DataError):
        triplet_loss(np.zeros(2), np.zeros(2), np.zeros(2), -0.1)


def test_triplet_dim_mismatch():
    with pytest.raises(DataError):
        triplet_loss(np.zeros(2), np.zeros(3), np.zeros(2))
    with pytest.raises(DataError):
        triplet_loss_grad(np.zeros(2), np.zeros(2), np.zeros(3))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_triplet_zero_iff_closer_positive(seed):
    r = np.random.default_rng(seed)
    a, p, n = r.standard_normal((3, 5))
    loss = triplet_loss(a, p, n)
    assert loss >= 0
    closer = np.sum((a - p) ** 2) <= np.sum((a - n) ** 2)
    assert (loss == 0.0) == closer


def test_triplet_grad_inactive_is_zero():
    a = np.zeros(3)
    p = np.array([0.1, 0, 0])
    n = np.array([5.0, 0, 0])
    for g in triplet_loss_grad(a, p, n, 0.0):
        assert np.array_equal(g, np.zeros(3))


def test_triplet_grad_at_kink_reports_active_branch():
    v = np.array([0.5, -0.5])
    ga, gp, gn = triplet_loss_grad(v, v, v, margin=0.3)
    # a = p = n: active-branch gradients 2(n-p), 2(p-a), 2(a-n) all vanish
    assert all(np.array_equal(g, np.zeros(2)) for g in (ga, gp, gn))
    a, p, n = np.zeros(2), np.array([1.0, 0]), np.array([0.0, 1.0])
    ga, gp, gn = triplet_loss_grad(a, p, n, 0.0)  # expression exactly 0
    assert np.allclose(ga, 2 * (n - p)) and np.allclose(gp, 2 * (p - a))
    assert np.allclose(gn, 2 * (a - n))


def _active_triplet(r, dim=8, margin=0.2):
    while True:
        a, p, n = r.standard_normal((3, dim))
        expr = np.sum((a - p) ** 2) - np.sum((a - n) ** 2) + margin
        if expr > 1e-2:
            return a, p, n


def test_triplet_grad_finite_differences(rng):
    margin = 0.2
    a, p, n = _active_triplet(rng, margin=margin)
    ga, gp, gn = triplet_loss_grad(a, p, n, margin)
    assert np.all(rel_err(ga, central_diff(lambda x: triplet_loss(x, p, n, margin), a)) <= 1e-4)
    assert np.all(rel_err(gp, central_diff(lambda x: triplet_loss(a, x, n, margin), p)) <= 1e-4)
    assert np.all(rel_err(gn, central_diff(lambda x: triplet_loss(a, p, x, margin), n)) <= 1e-4)


def test_batch_triplet_is_sum(rng):
    a, p, n = rng.standard_normal((3, 10, 4))
    expected = sum(triplet_loss(a[i], p[i], n[i], 0.1) for i in range(10))
    assert batch_triplet_loss(a, p, n, 0.1) == pytest.approx(expected, abs=1e-12)


def test_record_rejects_nonfinite():
    with pytest.raises(DataError):
        EmbeddingRecord("s", "i", [1.0, float("nan")])


def test_record_vector_is_readonly():
    r = EmbeddingRecord("s", "i", [1.0, 2.0])
    with pytest.raises(ValueError):
        r.vector[0] = 3.0


def test_dataset_invariants():
    a = EmbeddingRecord("s", "1", [0.0, 1.0])
    with pytest.raises(DataError, match="duplicate"):
        Dataset([a, EmbeddingRecord("s", "1", [2.0, 3.0])])
    with pytest.raises(DataError, match="dimension"):
        Dataset([a, EmbeddingRecord("s", "2", [2.0, 3.0, 4.0])])
    ds = Dataset([a, EmbeddingRecord("t", "1", [1.0, 1.0]), EmbeddingRecord("s", "2", [0, 0])])
    assert list(ds.by_subject()) == ["s", "t"]
    assert [r.image_id for r in ds.by_subject()["s"]] == ["1", "2"]
    assert ds.matrix().shape == (3, 2)


def test_jsonl_roundtrip(tmp_path, rng):
    vecs = rng.standard_normal((4, 3))
    ds = Dataset.from_arrays(["a", "a", "b", "c"], ["1", "2", "1", "1"], vecs)
    path = tmp_path / "e.jsonl"
    save_jsonl(ds, path)
    back = load_jsonl(path)
    assert [r.key for r in back] == [r.key for r in ds]
    assert np.array_equal(back.matrix(), vecs)


@pytest.mark.parametrize("lines, match", [
    (['{"subject": "a", "image": "1", "vec": [1, 2]}',
      '{"subject": "b", "image": "1", "vec": [1, 2, 3]}'], ":2: dimension"),
    (['{"subject": "a", "image": "1", "vec": [1, 2]}',
      '{"subject": "a", "image": "1", "vec": [3, 4]}'], ":2: duplicate"),
    (['{"subject": "a", "vec": [1, 2]}'], ":1: malformed"),
    (['not json'], ":1: malformed"),
])
def test_jsonl_errors_carry_line_numbers(tmp_path, lines, match):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=match):
        load_jsonl(path)
