import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn, unit_rows
from ibcdof.alignment import (
    _combos,
    _min_iam_users,
    _solver_args,
    cap_containment_probability,
    iam,
    iam_batch,
    iam_cdf_lower_bound,
    iam_oracle,
    min_iam_cdf_lower_bound,
    min_iam_expectation_bound,
    min_iam_over_users,
    rate_loss_bound,
)
from ibcdof.channel import RngStream
from ibcdof.errors import DimensionError, DomainError


def max_corr(g, c):
    return float(np.max(np.abs(g.conj() @ c) ** 2))


def test_closed_forms():
    assert cap_containment_probability(0.0, 3, 2) == 0.0
    assert cap_containment_probability(1.0, 3, 5) == 1.0
    assert cap_containment_probability(0.5, 2, 1) == 0.5
    assert iam_cdf_lower_bound(1.0, 4, 3) == 1.0
    assert iam_cdf_lower_bound(0.5, 4, 3) == 0.75
    assert iam_cdf_lower_bound(0.2, 5, 3) == pytest.approx(0.1296, abs=1e-15)
    assert min_iam_expectation_bound(1, 4, 3) == 1.0
    assert min_iam_expectation_bound(100, 4, 3) == pytest.approx(0.01, rel=1e-15)
    assert min_iam_expectation_bound(64, 5, 3) == pytest.approx(0.125, rel=1e-15)
    assert min_iam_cdf_lower_bound(0.5, 1, 4, 3) == pytest.approx(0.75)
    assert rate_loss_bound(10.0, 100, 4, 3) == pytest.approx(np.log2(1 + 3 * 10 * 3 * 0.01))


def test_closed_form_errors():
    for bad in (-0.1, 1.1):
        with pytest.raises(DomainError):
            cap_containment_probability(bad, 3, 2)
        with pytest.raises(DomainError):
            iam_cdf_lower_bound(bad, 4, 3)
    with pytest.raises(DomainError):
        iam_cdf_lower_bound(0.5, 3, 3)
    with pytest.raises(DomainError):
        min_iam_expectation_bound(10, 3, 3)


def test_rank_one_interference():
    g = unit_rows(crandn(np.random.default_rng(0), 3))
    res = iam([g] * 4)
    assert res.lambda_star <= 1e-9
    assert abs(np.vdot(res.c_star, g)) ** 2 <= 1e-9
    assert iam_oracle(np.array([g] * 4), 10**4, RngStream(1)) <= 1e-6


def test_standard_basis():
    for n in (2, 3, 4):
        res = iam(np.eye(n))
        assert res.lambda_star == pytest.approx(1.0 / n, abs=1e-9)
        assert np.allclose(np.abs(res.c_star) ** 2, 1.0 / n, atol=1e-6)
        assert res.certified_gap <= 1e-9
        assert abs(iam_oracle(np.eye(n), 10**4, RngStream(2)) - 1.0 / n) <= 1e-3


def test_fewer_interferers_than_dimension():
    rng = np.random.default_rng(1)
    g = unit_rows(crandn(rng, 2, 3))
    res = iam(g)
    assert res.lambda_star == 0.0
    assert np.max(np.abs(g.conj() @ res.c_star)) <= 1e-9


def test_degenerate_subspace():
    rng = np.random.default_rng(2)
    for _ in range(50):
        basis = crandn(rng, 2, 3)
        g = unit_rows(crandn(rng, 5, 2) @ basis)
        assert iam(g).lambda_star <= 1e-9


def test_input_validation():
    with pytest.raises(DomainError):
        iam(np.array([[1.0, 0.0], [1.0, 1.0]]))
    with pytest.raises(DimensionError):
        iam([np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0])])
    with pytest.raises(DimensionError):
        iam(np.array([[1.0]]))


def test_random_instances_feasible_and_beat_oracle():
    rng = np.random.default_rng(3)
    for m in (3, 4, 5):
        for i in range(10):
            g = unit_rows(crandn(rng, m, 3))
            res = iam(g)
            assert abs(np.linalg.norm(res.c_star) - 1) <= 1e-12
            assert abs(max_corr(g, res.c_star) - res.lambda_star) <= 1e-9
            assert 0.0 <= res.lambda_star <= 1.0
            assert res.certified_gap >= 0.0
            orc = iam_oracle(g, 10**4, RngStream(i, m))
            assert res.lambda_star <= orc + 1e-6
            assert orc <= res.lambda_star + res.certified_gap + 2e-3


def test_oracle_nested_sampling():
    g = unit_rows(crandn(np.random.default_rng(4), 4, 3))
    a = iam_oracle(g, 10**4, RngStream(9))
    b = iam_oracle(g, 10**5, RngStream(9))
    assert a >= b - 1e-6


def test_monotone_in_interferers():
    rng = np.random.default_rng(5)
    for _ in range(30):
        g = unit_rows(crandn(rng, 5, 3))
        prev = iam(g[:1])
        for m in range(2, 6):
            cur = iam(g[:m])
            assert cur.lambda_star >= prev.lambda_star - prev.certified_gap - 1e-12
            prev = cur


def test_batch_matches_single():
    g = unit_rows(crandn(np.random.default_rng(6), 2, 3, 4, 3))
    lam, c, its, gaps = iam_batch(g)
    assert lam.shape == (2, 3) and c.shape == (2, 3, 3)
    r = iam(g[1, 2])
    assert r.lambda_star == lam[1, 2] and np.array_equal(r.c_star, c[1, 2])


def test_pruned_min_equals_brute_force():
    rng = np.random.default_rng(7)
    for m, n in ((3, 3), (4, 3), (2, 2)):
        for _ in range(5):
            g = unit_rows(crandn(rng, 200, m, n))
            lam, _, _, _ = iam_batch(g)
            idx, val, c = min_iam_over_users(g)
            assert idx == int(np.argmin(lam)) and val == lam.min()
            assert abs(max_corr(g[idx], c) - val) <= 1e-9
    g = unit_rows(crandn(rng, 3, 3, 3))
    g = np.concatenate([g, g])  # exact duplicates: lowest index wins
    lam, _, _, _ = iam_batch(g)
    idx, _, _ = min_iam_over_users(g)
    assert idx == int(np.argmin(lam[:3]))


def test_deterministic():
    g = unit_rows(crandn(np.random.default_rng(8), 4, 3))
    a, b = iam(g), iam(g.copy())
    assert a.lambda_star == b.lambda_star and np.array_equal(a.c_star, b.c_star)


def test_lemma3_small_scale():
    g = unit_rows(crandn(np.random.default_rng(9), 4000, 3, 3))
    lam, _, _, _ = iam_batch(g)
    for x in (0.1, 0.3, 0.5, 0.7):
        assert np.mean(lam <= x) >= iam_cdf_lower_bound(x, 4, 3) - 0.03


def test_lemma4_small_scale():
    rng = np.random.default_rng(10)
    mins = [_min_iam_users(unit_rows(crandn(rng, 100, 3, 3)), _combos(3, 3), *_solver_args())[1] for _ in range(200)]
    mean, se = np.mean(mins), np.std(mins, ddof=1) / np.sqrt(len(mins))
    assert mean + 2 * se < min_iam_expectation_bound(100, 4, 3)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.integers(2, 4))
def test_feasibility_property(seed, m, n):
    g = unit_rows(crandn(np.random.default_rng(seed), m, n))
    res = iam(g)
    assert 0.0 <= res.lambda_star <= 1.0
    assert abs(max_corr(g, res.c_star) - res.lambda_star) <= 1e-9
    assert abs(np.linalg.norm(res.c_star) - 1.0) <= 1e-12
    # weak duality: the reported value never beats the lower bound
    assert res.certified_gap >= 0.0


@given(st.floats(0, 1), st.integers(2, 6), st.integers(1, 8))
def test_cap_probability_range(lam, n_r, m):
    p = cap_containment_probability(lam, n_r, m)
    assert 0.0 <= p <= 1.0
    assert p <= cap_containment_probability(min(1.0, lam + 0.1), n_r, m)
