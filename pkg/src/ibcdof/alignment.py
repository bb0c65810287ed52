"""Interference alignment measure and its distributional bounds.

The measure of unit interfering directions g_1..g_m in C^n is

    q(g) = min_{||c|| = 1} max_k |c^H g_k|^2,

the smallest cap ``{x : |c^H x|^2 <= lam}`` that holds every interferer.  The
problem is nonconvex in ``c``.  The solver here

1. seeds from the direction orthogonal to every (n-1)-subset of interferers and
   from the least-energy direction of ``sum_k g_k g_k^H``;
2. runs a damped Riemannian Newton method on the log-sum-exp smoothing of the
   max, shrinking the smoothing width geometrically;
3. certifies the result with the weak-duality bound
   ``lambda_min(sum_k w_k g_k g_k^H) <= q`` for simplex weights ``w`` (the final
   softmax weights of each run), stopping early once the gap is closed.
"""

import itertools
from dataclasses import dataclass

import numba as nb
import numpy as np

from .errors import DimensionError, DomainError
from .numerics import _eigh_into
from .channel import complex_normal

UNIT_TOL = 1e-9

NEWTON_ITERS = 200
NEWTON_STAGES = 6
EPS_START = 1e-2
EPS_END = 1e-9
GAP_ABS = 1e-12
GAP_REL = 1e-8


@dataclass(frozen=True)
class AlignmentResult:
    lambda_star: float
    c_star: np.ndarray
    iterations: int
    certified_gap: float


def cap_containment_probability(lam, n_r, m):
    """Probability that m isotropic unit vectors in C^n_r all satisfy |c^H g|^2 <= lam."""
    _check_unit_interval(lam)
    if n_r < 2 or m < 1:
        raise DomainError("need n_r >= 2 and m >= 1")
    return (1.0 - (1.0 - lam) ** (n_r - 1)) ** m


def iam_cdf_lower_bound(lam, K, n_r):
    """Lower bound on Pr[q <= lam] for K-1 isotropic interferers, valid when K > n_r."""
    _check_unit_interval(lam)
    if not K > n_r >= 2:
        raise DomainError(f"the bound needs K > n_r >= 2 (got K={K}, n_r={n_r})")
    return (1.0 - (1.0 - lam) ** (n_r - 1)) ** (K - n_r)


def min_iam_cdf_lower_bound(lam, N, K, n_r):
    """Lower bound on Pr[min over N users of q <= lam]."""
    return 1.0 - (1.0 - iam_cdf_lower_bound(lam, K, n_r)) ** N


def min_iam_expectation_bound(N, K, n_r):
    """Upper bound N^(-1/(K-n_r)) on E[min over N users of q]."""
    if not K > n_r:
        raise DomainError(f"the bound needs K > n_r (got K={K}, n_r={n_r})")
    if N < 1:
        raise DomainError("N must be at least 1")
    return float(N) ** (-1.0 / (K - n_r))


def rate_loss_bound(power, N, K, n_r):
    """Closed-form bound on E[min_n,v log2(1 + P sum_k |v^H h_k|^2)]."""
    return float(np.log2(1.0 + n_r * power * (K - 1) * min_iam_expectation_bound(N, K, n_r)))


def _check_unit_interval(lam):
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")


# --- compiled solver -------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _smooth(u1, u2, z, tau, s1, s2, a, p):
    m, d = u1.shape
    amax = -1.0
    for k in range(m):
        x = 0.0
        y = 0.0
        for i in range(d):
            x += u1[k, i] * z[i]
            y += u2[k, i] * z[i]
        s1[k] = x
        s2[k] = y
        a[k] = x * x + y * y
        if a[k] > amax:
            amax = a[k]
    se = 0.0
    for k in range(m):
        p[k] = np.exp((a[k] - amax) / tau)
        se += p[k]
    for k in range(m):
        p[k] /= se
    return amax + tau * np.log(se), amax


@nb.njit(cache=True, nogil=True)
def _chol_solve(h, b, l, x, shift):
    d = h.shape[0]
    for j in range(d):
        s = h[j, j] + shift
        for k in range(j):
            s -= l[j, k] * l[j, k]
        if not s > 0.0:
            return False
        l[j, j] = np.sqrt(s)
        for i in range(j + 1, d):
            t = h[i, j]
            for k in range(j):
                t -= l[i, k] * l[j, k]
            l[i, j] = t / l[j, j]
    for i in range(d):
        t = b[i]
        for k in range(i):
            t -= l[i, k] * x[k]
        x[i] = t / l[i, i]
    for i in range(d - 1, -1, -1):
        t = x[i]
        for k in range(i + 1, d):
            t -= l[k, i] * x[k]
        x[i] = t / l[i, i]
    return True


@nb.njit(cache=True, nogil=True)
def _newton(u1, u2, z0, iters, stages, eps_hi, eps_lo, p_out):
    """Annealed smoothed-max descent on the sphere from ``z0`` (real coordinates).

    Returns (best max value, best point, iterations used); ``p_out`` receives the
    softmax weights at the best point under the last smoothing width.
    """
    m, d = u1.shape
    n = d // 2
    z = z0.copy()
    s1 = np.empty(m)
    s2 = np.empty(m)
    a = np.empty(m)
    p = np.empty(m)
    ga = np.empty((m, d))
    g = np.empty(d)
    h = np.empty((d, d))
    hp = np.empty((d, d))
    tmp = np.empty((d, d))
    proj = np.empty((d, d))
    l = np.empty((d, d))
    jz = np.empty(d)
    zc = np.empty(d)
    step = np.empty(d)
    rg = np.empty(d)
    x = np.empty(d)
    _, best = _smooth(u1, u2, z, 1.0, s1, s2, a, p)
    bestz = z.copy()
    used = 0
    tau = 1.0
    for st in range(stages):
        if best < 1e-300 or used >= iters:
            break
        eps = eps_hi * (eps_lo / eps_hi) ** (st / max(stages - 1, 1))
        tau = eps * best
        while used < iters:
            used += 1
            f, amax = _smooth(u1, u2, z, tau, s1, s2, a, p)
            for i in range(d):
                g[i] = 0.0
            for k in range(m):
                for i in range(d):
                    ga[k, i] = 2.0 * (s1[k] * u1[k, i] + s2[k] * u2[k, i])
                    g[i] += p[k] * ga[k, i]
            hmax = 0.0
            for i in range(d):
                for j in range(i + 1):
                    hq = 0.0
                    cv = 0.0
                    for k in range(m):
                        hq += p[k] * (u1[k, i] * u1[k, j] + u2[k, i] * u2[k, j])
                        cv += p[k] * ga[k, i] * ga[k, j]
                    h[i, j] = 2.0 * hq + (cv - g[i] * g[j]) / tau
                    h[j, i] = h[i, j]
                    if abs(h[i, j]) > hmax:
                        hmax = abs(h[i, j])
            # tangent space: orthogonal to z and to the phase direction i*z
            for i in range(n):
                jz[i] = -z[n + i]
                jz[n + i] = z[i]
            zg = 0.0
            for i in range(d):
                zg += z[i] * g[i]
            for i in range(d):
                for j in range(d):
                    proj[i, j] = (1.0 if i == j else 0.0) - z[i] * z[j] - jz[i] * jz[j]
            for i in range(d):
                for j in range(d):
                    t = 0.0
                    for k in range(d):
                        t += h[i, k] * proj[k, j]
                    tmp[i, j] = t
            for i in range(d):
                for j in range(d):
                    t = 0.0
                    for k in range(d):
                        t += proj[i, k] * tmp[k, j]
                    hp[i, j] = t - zg * proj[i, j] + z[i] * z[j] + jz[i] * jz[j]
            for i in range(d):
                t = 0.0
                for k in range(d):
                    t += proj[i, k] * g[k]
                rg[i] = t
            ok = _chol_solve(hp, rg, l, x, 0.0)
            shift = 1e-10 * (hmax + 1.0)
            while not ok:
                shift *= 10.0
                ok = _chol_solve(hp, rg, l, x, shift)
            slope = 0.0
            for i in range(d):
                t = 0.0
                for k in range(d):
                    t += proj[i, k] * x[k]
                step[i] = -t
                slope += rg[i] * step[i]
            if -slope <= 1e-10 * tau:
                break
            alpha = 1.0
            accepted = False
            am = amax
            for _ls in range(40):
                nrm = 0.0
                for i in range(d):
                    zc[i] = z[i] + alpha * step[i]
                    nrm += zc[i] * zc[i]
                nrm = np.sqrt(nrm)
                for i in range(d):
                    zc[i] /= nrm
                fc, am = _smooth(u1, u2, zc, tau, s1, s2, a, p)
                if fc <= f + 1e-4 * alpha * slope:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break
            for i in range(d):
                z[i] = zc[i]
            if am < best:
                best = am
                for i in range(d):
                    bestz[i] = z[i]
    _smooth(u1, u2, bestz, max(tau, 1e-300), s1, s2, a, p_out)
    return best, bestz, used


@nb.njit(cache=True, nogil=True)
def _weighted_min_eig(g, w, gram, a, v, ev, vecs):
    m, n = g.shape
    for i in range(n):
        for j in range(i + 1):
            s = 0.0 + 0.0j
            for k in range(m):
                s += w[k] * g[k, i] * g[k, j].conjugate()
            gram[i, j] = s
            gram[j, i] = s.conjugate()
        gram[i, i] = gram[i, i].real
    _eigh_into(gram, ev, vecs, a, v)
    return ev[n - 1]


@nb.njit(cache=True, nogil=True)
def _max_corr(g, c):
    m, n = g.shape
    best = 0.0
    for k in range(m):
        s = 0.0 + 0.0j
        for i in range(n):
            s += g[k, i].conjugate() * c[i]
        val = s.real * s.real + s.imag * s.imag
        if val > best:
            best = val
    return best


@nb.njit(cache=True, nogil=True)
def _phase_fix(c):
    n = c.size
    for i in range(n):
        if abs(c[i]) > 1e-10:
            ph = c[i].conjugate() / abs(c[i])
            for j in range(n):
                c[j] = c[j] * ph
            c[i] = abs(c[i]) + 0.0j
            return


@nb.njit(cache=True, nogil=True)
def _kkt_weights(g, c, val, w):
    """Multipliers of the constraints active at ``c`` from the stationarity system.

    Solves ``sum_k w_k g_k (g_k^H c) = mu c`` with ``sum_k w_k = 1`` in least
    squares over the near-active set, then clips to the simplex.
    """
    m, n = g.shape
    act = np.empty(m, dtype=np.int64)
    na = 0
    for k in range(m):
        s = 0.0 + 0.0j
        for i in range(n):
            s += g[k, i].conjugate() * c[i]
        if s.real * s.real + s.imag * s.imag >= val * (1.0 - 1e-6):
            act[na] = k
            na += 1
    mat = np.zeros((2 * n + 1, na + 1))
    rhs = np.zeros(2 * n + 1)
    for j in range(na):
        k = act[j]
        s = 0.0 + 0.0j
        for i in range(n):
            s += g[k, i].conjugate() * c[i]
        for i in range(n):
            col = g[k, i] * s
            mat[i, j] = col.real
            mat[n + i, j] = col.imag
        mat[2 * n, j] = 1.0
    for i in range(n):
        mat[i, na] = -c[i].real
        mat[n + i, na] = -c[i].imag
    rhs[2 * n] = 1.0
    sol = np.linalg.lstsq(mat, rhs)[0]
    for k in range(m):
        w[k] = 0.0
    tot = 0.0
    for j in range(na):
        if sol[j] > 0.0:
            w[act[j]] = sol[j]
            tot += sol[j]
    if not tot > 0.0:
        return False
    for k in range(m):
        w[k] /= tot
    return True


@nb.njit(cache=True, nogil=True)
def _candidates(g, combos, cands, vals):
    m, n = g.shape
    ncomb = combos.shape[0]
    gram = np.empty((n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    v = np.empty((n, n), dtype=np.complex128)
    ev = np.empty(n)
    vecs = np.empty((n, n), dtype=np.complex128)
    w = np.zeros(m)
    for ci in range(ncomb + 1):
        if ci < ncomb:
            for k in range(m):
                w[k] = 0.0
            for r in range(combos.shape[1]):
                w[combos[ci, r]] = 1.0
        else:
            for k in range(m):
                w[k] = 1.0
        _weighted_min_eig(g, w, gram, a, v, ev, vecs)
        for i in range(n):
            cands[ci, i] = vecs[i, n - 1]
        vals[ci] = _max_corr(g, cands[ci])
    # uniform weights give a valid dual bound
    return ev[n - 1] / m


@nb.njit(cache=True, nogil=True)
def _iam_one(g, combos, iters, stages, eps_hi, eps_lo, gap_abs, gap_rel, c_out):
    """Solve one instance; returns (lambda, iterations, certified gap)."""
    m, n = g.shape
    d = 2 * n
    gram = np.empty((n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    v = np.empty((n, n), dtype=np.complex128)
    ev = np.empty(n)
    vecs = np.empty((n, n), dtype=np.complex128)
    if m < n:
        w = np.ones(m)
        _weighted_min_eig(g, w, gram, a, v, ev, vecs)
        for i in range(n):
            c_out[i] = vecs[i, n - 1]
        _phase_fix(c_out)
        return 0.0, 0, _max_corr(g, c_out)

    ncand = combos.shape[0] + 1
    cands = np.empty((ncand, n), dtype=np.complex128)
    vals = np.empty(ncand)
    lower = _candidates(g, combos, cands, vals)
    order = np.argsort(vals, kind="mergesort")
    best = vals[order[0]]
    for i in range(n):
        c_out[i] = cands[order[0], i]

    u1 = np.empty((m, d))
    u2 = np.empty((m, d))
    for k in range(m):
        for i in range(n):
            u1[k, i] = g[k, i].real
            u1[k, n + i] = g[k, i].imag
            u2[k, i] = -g[k, i].imag
            u2[k, n + i] = g[k, i].real
    z0 = np.empty(d)
    p = np.empty(m)
    used = 0
    for r in range(ncand):
        if best - lower <= gap_abs + gap_rel * best:
            break
        cs = cands[order[r]]
        # a fixed tiny tilt moves starts off symmetric stationary points
        nrm = 0.0
        for i in range(n):
            z0[i] = cs[i].real + 1e-4 * np.sin(1.0 + 0.7 * i)
            z0[n + i] = cs[i].imag + 1e-4 * np.cos(2.0 + 1.3 * i)
        for i in range(d):
            nrm += z0[i] * z0[i]
        nrm = np.sqrt(nrm)
        for i in range(d):
            z0[i] /= nrm
        val, zb, its = _newton(u1, u2, z0, iters, stages, eps_hi, eps_lo, p)
        used += its
        lb = _weighted_min_eig(g, p, gram, a, v, ev, vecs)
        if lb > lower:
            lower = lb
        cand = np.empty(n, dtype=np.complex128)
        for i in range(n):
            cand[i] = zb[i] + 1j * zb[n + i]
        val = _max_corr(g, cand)
        if _kkt_weights(g, cand, val, p):
            lb = _weighted_min_eig(g, p, gram, a, v, ev, vecs)
            if lb > lower:
                lower = lb
        if val < best:
            best = val
            for i in range(n):
                c_out[i] = cand[i]
    _phase_fix(c_out)
    best = _max_corr(g, c_out)
    gap = best - lower
    if gap < 0.0:
        gap = 0.0
    return best, used, gap


@nb.njit(cache=True, nogil=True)
def _iam_batch(gs, combos, iters, stages, eps_hi, eps_lo, gap_abs, gap_rel):
    b, m, n = gs.shape
    lam = np.empty(b)
    cs = np.empty((b, n), dtype=np.complex128)
    its = np.empty(b, dtype=np.int64)
    gaps = np.empty(b)
    for t in range(b):
        lam[t], its[t], gaps[t] = _iam_one(
            gs[t], combos, iters, stages, eps_hi, eps_lo, gap_abs, gap_rel, cs[t]
        )
    return lam, cs, its, gaps


@nb.njit(cache=True, nogil=True)
def _min_iam_users(gs, combos, iters, stages, eps_hi, eps_lo, gap_abs, gap_rel):
    """argmin over users of the solver value, ties to the lowest index.

    Users whose dual lower bound already exceeds the running best cannot win
    and are skipped; the result equals solving every user.
    """
    nu, m, n = gs.shape
    upper = np.empty(nu)
    lower = np.empty(nu)
    gram = np.empty((n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    v = np.empty((n, n), dtype=np.complex128)
    ev = np.empty(n)
    vecs = np.empty((n, n), dtype=np.complex128)
    w = np.ones(m)
    c = np.empty(n, dtype=np.complex128)
    for j in range(nu):
        lam_min = _weighted_min_eig(gs[j], w, gram, a, v, ev, vecs)
        for i in range(n):
            c[i] = vecs[i, n - 1]
        lower[j] = 0.0 if m < n else lam_min / m
        upper[j] = _max_corr(gs[j], c)
    order = np.argsort(upper, kind="mergesort")
    best = np.inf
    best_idx = -1
    best_c = np.zeros(n, dtype=np.complex128)
    solved = 0
    for r in range(nu):
        j = order[r]
        if lower[j] > best:
            continue
        val, _, _ = _iam_one(gs[j], combos, iters, stages, eps_hi, eps_lo, gap_abs, gap_rel, c)
        solved += 1
        if val < best or (val == best and j < best_idx):
            best = val
            best_idx = j
            best_c[:] = c
    return best_idx, best, best_c, solved


def _combos(m, n):
    r = n - 1
    if m < n or r == 0:
        return np.zeros((0, max(r, 1)), dtype=np.int64)
    return np.array(list(itertools.combinations(range(m), r)), dtype=np.int64)


def _solver_args():
    return NEWTON_ITERS, NEWTON_STAGES, EPS_START, EPS_END, GAP_ABS, GAP_REL


def _validate_directions(g):
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim < 2:
        raise DimensionError(f"expected (..., count, dim) interferers, got shape {g.shape}")
    if g.shape[-1] < 2:
        raise DimensionError("the alignment measure needs dimension >= 2")
    if g.shape[-2] < 1:
        raise DimensionError("need at least one interferer")
    dev = np.abs(np.sum(np.abs(g) ** 2, axis=-1) - 1.0)
    if dev.size and float(dev.max()) > UNIT_TOL:
        raise DomainError(f"interferers must be unit norm (max deviation {dev.max():.3e})")
    return np.ascontiguousarray(g)


def normalize_rows(h):
    """Scale each channel vector along the last axis to unit norm."""
    h = np.asarray(h, dtype=np.complex128)
    return h / np.sqrt(np.sum(h.real ** 2 + h.imag ** 2, axis=-1, keepdims=True))


def iam(interferers):
    """Interference alignment measure of one set of unit interfering directions."""
    if isinstance(interferers, (list, tuple)):
        dims = {np.asarray(x).size for x in interferers}
        if len(dims) > 1:
            raise DimensionError(f"interferers have inconsistent dimensions {sorted(dims)}")
    g = _validate_directions(np.array([np.asarray(x) for x in interferers]) if isinstance(interferers, (list, tuple)) else interferers)
    if g.ndim != 2:
        raise DimensionError("iam() takes a single set; use iam_batch for stacks")
    lam, cs, its, gaps = _iam_batch(g[None], _combos(*g.shape), *_solver_args())
    return AlignmentResult(float(lam[0]), cs[0], int(its[0]), float(gaps[0]))


def iam_batch(interferers):
    """Vectorized ``iam`` over stacks ``(..., m, n)``; returns (lam, c, iterations, gaps)."""
    g = _validate_directions(interferers)
    lead = g.shape[:-2]
    m, n = g.shape[-2:]
    lam, cs, its, gaps = _iam_batch(g.reshape((-1, m, n)), _combos(m, n), *_solver_args())
    return lam.reshape(lead), cs.reshape(lead + (n,)), its.reshape(lead), gaps.reshape(lead)


def min_iam_over_users(interferers):
    """Smallest measure over a user group ``(N, m, n)``: (user index, value, direction)."""
    g = _validate_directions(interferers)
    if g.ndim != 3:
        raise DimensionError("expected (users, count, dim)")
    idx, val, c, _ = _min_iam_users(g, _combos(*g.shape[1:]), *_solver_args())
    return int(idx), float(val), c


def iam_oracle(interferers, samples, rng, steps=50, chunk=10_000):
    """Random-restart upper bound on the measure.

    Draws ``samples`` uniform unit directions, refines each with ``steps``
    projected subgradient steps on the plain max objective, and returns the
    smallest max correlation seen.  Directions are drawn in chunks from one
    stream, so more samples only ever extend the same search.
    """
    g = _validate_directions(interferers)
    if g.ndim != 2:
        raise DimensionError("iam_oracle() takes a single set")
    if samples < 1:
        raise DomainError("samples must be positive")
    gen = rng.generator()
    n = g.shape[1]
    gh = g.conj()
    best = np.inf
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        c = complex_normal(gen, (size, n))
        c /= np.linalg.norm(c, axis=1, keepdims=True)
        for t in range(steps + 1):
            proj = c @ gh.T
            vals = proj.real ** 2 + proj.imag ** 2
            k = np.argmax(vals, axis=1)
            best = min(best, float(vals[np.arange(size), k].min()))
            if t == steps:
                break
            grad = g[k] * proj[np.arange(size), k][:, None]
            c = c - (0.5 * 0.85**t) * grad
            c /= np.linalg.norm(c, axis=1, keepdims=True)
        done += size
    return best
