import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import crandn
from ibcdof.channel import RngStream, draw_group_arrays, UserChannelSet, interference_covariance, sample_user_group
from ibcdof.errors import DomainError
from ibcdof.numerics import as_hermitian, hermitian_eig, quadratic_form, solve_identity_plus
from ibcdof.selection import (
    Scheme,
    min_inr_vector,
    mmse_irc_vector,
    mrc_vector,
    postprocessed_sinr,
    rate_terms,
    select,
    select_batch,
)

ALL = ["max-snr", "min-inr", "max-sinr", "min-iam", "two-stage:2:5", "random"]


def random_units(rng, count, n):
    w = crandn(rng, count, n)
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def test_scheme_parsing():
    assert Scheme.parse("two-stage:10:100") == Scheme("two-stage", 10, 100)
    assert str(Scheme.parse("MAX-SINR")) == "max-sinr"
    for bad in ("foo", "two-stage:1", "two-stage:a:b", "max-snr:3", "two-stage:0:5"):
        with pytest.raises(DomainError):
            Scheme.parse(bad)


def test_mrc():
    u = UserChannelSet([2, 0], np.zeros((1, 2)), 1.0)
    assert np.allclose(mrc_vector(u), [1, 0])
    rng = np.random.default_rng(0)
    h = crandn(rng, 3)
    v = mrc_vector(UserChannelSet(h, crandn(rng, 1, 3), 1.0))
    assert abs(abs(np.vdot(v, h)) ** 2 - np.linalg.norm(h) ** 2) <= 1e-12
    w = random_units(rng, 100, 3)
    assert np.all(np.abs(w.conj() @ h) ** 2 <= np.linalg.norm(h) ** 2 + 1e-12)
    with pytest.raises(DomainError):
        mrc_vector(UserChannelSet([0, 0], np.zeros((1, 2)), 1.0))


def test_min_inr_vector():
    assert np.allclose(np.abs(min_inr_vector(np.diag([5.0, 1.0]))), [0, 1])
    rng = np.random.default_rng(1)
    g = crandn(rng, 3)
    r = 10 * np.outer(g, g.conj())
    assert quadratic_form(min_inr_vector(r), r) <= 1e-9
    h = crandn(rng, 4, 3)
    r = as_hermitian(5 * h.T @ h.conj())
    v = min_inr_vector(r)
    assert abs(quadratic_form(v, r) - hermitian_eig(r).eigenvalues[-1]) <= 1e-9
    w = random_units(rng, 10**4, 3)
    sampled = np.einsum("bi,ij,bj->b", w.conj(), r, w).real.min()
    assert quadratic_form(v, r) <= sampled + 1e-6


def test_mmse_irc():
    rng = np.random.default_rng(2)
    h = crandn(rng, 3)
    u = UserChannelSet(h, np.zeros((1, 3)), 4.0)
    assert np.allclose(mmse_irc_vector(u), h / np.linalg.norm(h))
    assert postprocessed_sinr(mmse_irc_vector(u), u) == pytest.approx(4.0 * np.linalg.norm(h) ** 2, rel=1e-12)
    # diagonal interference: two orthogonal interferers with powers r1, r2
    a, b, r1, r2, p = 0.3 + 0.4j, -1.2j, 2.0, 7.0, 3.0
    u = UserChannelSet([a, b], np.array([[np.sqrt(r1 / p), 0], [0, np.sqrt(r2 / p)]]), p)
    expect = p * (abs(a) ** 2 / (1 + r1) + abs(b) ** 2 / (1 + r2))
    assert postprocessed_sinr(mmse_irc_vector(u), u) == pytest.approx(expect, rel=1e-12)


def test_sinr_and_rate_basics():
    rng = np.random.default_rng(3)
    h = crandn(rng, 3)
    u0 = UserChannelSet(h, np.zeros((0, 3)), 2.0)
    assert postprocessed_sinr(mrc_vector(u0), u0) == pytest.approx(2.0 * np.linalg.norm(h) ** 2)
    rate, gain, loss = rate_terms(mrc_vector(u0), u0)
    assert loss == 0.0 and rate == pytest.approx(np.log2(1 + 2.0 * np.linalg.norm(h) ** 2), abs=1e-12)
    perp = np.array([-np.conj(h[1]), np.conj(h[0]), 0]) / np.linalg.norm(h[:2])
    assert postprocessed_sinr(perp, u0) <= 1e-20
    g = crandn(rng, 2, 3)
    u = UserChannelSet(h, g, 5.0)
    v = min_inr_vector(interference_covariance(u))
    assert rate_terms(v, u)[2] <= 1e-9
    with pytest.raises(DomainError):
        rate_terms(np.array([1.0, 1.0, 0.0]), u)
    with pytest.raises(DomainError):
        postprocessed_sinr(np.array([1.0, 1.0, 0.0]), u)


def test_rate_identities_random():
    rng = np.random.default_rng(4)
    for _ in range(500):
        p = 10 ** rng.uniform(0, 4)
        u = UserChannelSet(crandn(rng, 3), crandn(rng, 3, 3), p)
        v = random_units(rng, 1, 3)[0]
        rate, gain, loss = rate_terms(v, u)
        sinr = postprocessed_sinr(v, u)
        assert abs(rate - (gain - loss)) <= 1e-9
        assert abs(rate - np.log2(1 + sinr)) <= 1e-9


def test_mmse_sinr_optimal_and_closed_form():
    rng = np.random.default_rng(5)
    for _ in range(50):
        u = UserChannelSet(crandn(rng, 3), crandn(rng, 3, 3), 100.0)
        v = mmse_irc_vector(u)
        best = postprocessed_sinr(v, u)
        closed = u.power * np.vdot(u.desired, solve_identity_plus(interference_covariance(u), u.desired)).real
        assert abs(best - closed) <= 1e-9 * max(1, closed)
        w = random_units(rng, 10**4, 3)
        r = interference_covariance(u)
        sig = u.power * np.abs(w.conj() @ u.desired) ** 2
        den = 1 + np.einsum("bi,ij,bj->b", w.conj(), r, w).real
        assert np.all(sig / den <= best + 1e-9)


def test_single_user_group():
    g = sample_user_group(1, 4, 3, 10.0, RngStream(1))
    for s in ["max-snr", "min-inr", "max-sinr", "min-iam", "random", "two-stage:1:1"]:
        assert select(s, g, RngStream(2)).user_index == 0


def test_constructed_max_snr():
    rng = np.random.default_rng(6)
    g = [UserChannelSet(crandn(rng, 3) * (10.0 if i == 3 else 1.0), crandn(rng, 3, 3), 10.0) for i in range(6)]
    assert select("max-snr", g, RngStream(0)).user_index == 3


def test_ties_lowest_index():
    rng = np.random.default_rng(7)
    u = UserChannelSet(crandn(rng, 3), crandn(rng, 3, 3), 10.0)
    for s in ["max-snr", "min-inr", "max-sinr", "min-iam", "two-stage:2:2"]:
        assert select(s, [u] * 4, RngStream(0)).user_index == 0


def test_group_errors():
    g = sample_user_group(6, 4, 3, 10.0, RngStream(1))
    with pytest.raises(DomainError):
        select("two-stage:4:2", g, RngStream(0))
    with pytest.raises(DomainError):
        select("max-snr", [], RngStream(0))


def test_selection_rules_match_definitions():
    rng = RngStream(3)
    for trial in range(20):
        g = sample_user_group(12, 4, 3, 50.0, RngStream(trial, 5))
        grams = [as_hermitian(interference_covariance(u) / u.power) for u in g]
        lam = [hermitian_eig(m).eigenvalues[-1] for m in grams]
        norms = [np.linalg.norm(u.desired) ** 2 for u in g]
        crit = [np.vdot(u.desired, solve_identity_plus(interference_covariance(u), u.desired)).real for u in g]
        assert select("max-snr", g, rng).user_index == int(np.argmax(norms))
        assert select("min-inr", g, rng).user_index == int(np.argmin(lam))
        assert select("max-sinr", g, rng).user_index == int(np.argmax(crit))
        winners = [3 * b + int(np.argmax(norms[3 * b : 3 * b + 3])) for b in range(4)]
        assert select("two-stage:3:4", g, rng).user_index == winners[int(np.argmin([lam[w] for w in winners]))]


def test_max_sinr_dominates_per_realization():
    for trial in range(100):
        g = sample_user_group(10, 4, 3, 10 ** (trial % 5), RngStream(trial))
        outs = {s: select(s, g, RngStream(trial, 1)) for s in ALL}
        for s, o in outs.items():
            assert outs["max-sinr"].rate >= o.rate - 1e-9, s
            assert abs(np.linalg.norm(o.postprocess) ** 2 - 1) <= 1e-12
            assert abs(o.rate - (o.rate_gain - o.rate_loss)) <= 1e-9
            assert abs(o.rate - np.log2(1 + o.sinr)) <= 1e-9
        assert outs["min-inr"].inr <= outs["random"].inr * (1 + 1e-9) + 1e-12


def test_criterion_equals_achieved_sinr():
    g = sample_user_group(8, 4, 3, 100.0, RngStream(4))
    o = select("max-sinr", g, RngStream(0))
    u = g[o.user_index]
    crit = u.power * np.vdot(u.desired, solve_identity_plus(interference_covariance(u), u.desired)).real
    assert abs(crit - o.sinr) <= 1e-9 * crit


@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_power_scale_invariance(seed, alpha):
    rng = np.random.default_rng(seed)
    d = crandn(rng, 1, 8, 3)
    i = crandn(rng, 1, 8, 3, 3)
    for s in ["max-snr", "min-inr", "min-iam", "two-stage:2:4"]:
        sch = Scheme.parse(s)
        a = select_batch(sch, d, i, 10.0).user_index[0]
        b = select_batch(sch, d, i, 10.0 * alpha).user_index[0]
        assert a == b


def test_monotone_multiuser_gain():
    trials = 10**4
    means, ses = [], []
    for n in (1, 2, 4, 8, 16, 32, 64, 128, 256):
        d, i = zip(*(draw_group_arrays(n, 4, 3, 21, t) for t in range(trials)))
        out = select_batch(Scheme.parse("max-sinr"), np.stack(d), np.stack(i), 100.0)
        means.append(out.rate.mean())
        ses.append(out.rate.std(ddof=1) / np.sqrt(trials))
    for k in range(1, len(means)):
        assert means[k] >= means[k - 1] - 2 * np.hypot(ses[k], ses[k - 1])
