"""Receive filters, user-selection schemes and per-realization rates.

Per-user selection criteria are evaluated without the transmit power where the
scheme allows it (gains and Gram matrices of the raw channels), so scaling P
never changes a MaxSnr, MinInr or MinIam decision, not even by rounding.
Ties always go to the lowest user index.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from .alignment import _combos, _min_iam_users, _solver_args, _weighted_min_eig
from .channel import RngStream, UserChannelSet, interference_covariance
from .errors import DimensionError, DomainError
from .numerics import _chol_solve_identity_plus, _eigh_into, as_cvec, hermitian_eig, solve_identity_plus

UNIT_TOL = 1e-9

MAX_SNR, MIN_INR, MAX_SINR, MIN_IAM, TWO_STAGE, RANDOM = range(6)
_NAMES = {
    "max-snr": MAX_SNR,
    "min-inr": MIN_INR,
    "max-sinr": MAX_SINR,
    "min-iam": MIN_IAM,
    "random": RANDOM,
}


@dataclass(frozen=True)
class Scheme:
    """A selection scheme; ``two-stage`` carries its subgroup size n1 and count n2."""

    kind: str
    n1: int = 0
    n2: int = 0

    def __post_init__(self):
        if self.kind == "two-stage":
            if self.n1 < 1 or self.n2 < 1:
                raise DomainError("two-stage needs positive n1 and n2")
        elif self.kind not in _NAMES:
            raise DomainError(f"unknown scheme {self.kind!r}")

    @classmethod
    def parse(cls, text):
        """Parse ``max-snr|min-inr|max-sinr|min-iam|random|two-stage:n1:n2``."""
        parts = text.strip().lower().split(":")
        if parts[0] == "two-stage":
            if len(parts) != 3:
                raise DomainError("two-stage scheme syntax is two-stage:n1:n2")
            try:
                return cls("two-stage", int(parts[1]), int(parts[2]))
            except ValueError:
                raise DomainError(f"bad two-stage sizes in {text!r}") from None
        if len(parts) != 1:
            raise DomainError(f"unknown scheme {text!r}")
        return cls(parts[0])

    @property
    def code(self):
        return TWO_STAGE if self.kind == "two-stage" else _NAMES[self.kind]

    def check_group(self, n_users):
        if n_users < 1:
            raise DomainError("empty user group")
        if self.kind == "two-stage" and self.n1 * self.n2 != n_users:
            raise DomainError(f"two-stage {self.n1}x{self.n2} does not factor a group of {n_users}")

    def __str__(self):
        return f"two-stage:{self.n1}:{self.n2}" if self.kind == "two-stage" else self.kind


@dataclass(frozen=True)
class SelectionOutcome:
    user_index: int
    postprocess: np.ndarray
    sinr: float
    snr: float
    inr: float
    rate: float
    rate_gain: float
    rate_loss: float


class BatchOutcome(NamedTuple):
    """Selection results for a stack of trials; every field has leading length T."""

    user_index: np.ndarray
    postprocess: np.ndarray
    snr: np.ndarray
    inr: np.ndarray
    sinr: np.ndarray
    rate: np.ndarray
    rate_gain: np.ndarray
    rate_loss: np.ndarray


# --- single-user filters and rates ----------------------------------------


def _require_unit(v):
    v = as_cvec(v)
    dev = abs(float(np.vdot(v, v).real) - 1.0)
    if dev > UNIT_TOL:
        raise DomainError(f"filter must be unit norm (deviation {dev:.3e})")
    return v


def mrc_vector(u):
    h = u.desired
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise DomainError("desired channel is zero")
    return h / nrm


def min_inr_vector(r):
    """Unit eigenvector of the smallest eigenvalue of ``r``."""
    return hermitian_eig(r).min_pair[1]


def mmse_irc_vector(u):
    """Unit filter along ``(I + R)^-1 h``; maximizes the post-combining SINR."""
    if not np.any(u.desired):
        raise DomainError("desired channel is zero")
    x = solve_identity_plus(interference_covariance(u), u.desired)
    return x / np.linalg.norm(x)


def postprocessed_sinr(v, u):
    v = _require_unit(v)
    if v.size != u.n_r:
        raise DimensionError("filter and channel dimensions differ")
    sig = u.power * abs(np.vdot(v, u.desired)) ** 2
    inr = u.power * float(np.sum(np.abs(u.interferers.conj() @ v) ** 2))
    return sig / (1.0 + inr)


def rate_terms(v, u):
    """``(rate, rate_gain, rate_loss)`` in bits per channel use.

    gain is log2 of one plus the total received power along ``v``, loss the
    same for the interference alone; rate is their difference.
    """
    v = _require_unit(v)
    if v.size != u.n_r:
        raise DimensionError("filter and channel dimensions differ")
    snr = u.power * abs(np.vdot(v, u.desired)) ** 2
    inr = u.power * float(np.sum(np.abs(u.interferers.conj() @ v) ** 2))
    gain = np.log1p(snr + inr) / np.log(2.0)
    loss = np.log1p(inr) / np.log(2.0)
    return float(np.log1p(snr / (1.0 + inr)) / np.log(2.0)), float(gain), float(loss)


# --- compiled batch selection ----------------------------------------------


@nb.njit(cache=True, nogil=True)
def _sq_norm(h):
    s = 0.0
    for i in range(h.size):
        s += h[i].real * h[i].real + h[i].imag * h[i].imag
    return s


@nb.njit(cache=True, nogil=True)
def _gram_into(h, scale, out):
    m, n = h.shape
    for i in range(n):
        for j in range(i + 1):
            s = 0.0 + 0.0j
            for k in range(m):
                s += h[k, i] * h[k, j].conjugate()
            out[i, j] = scale * s
            out[j, i] = scale * s.conjugate()
        out[i, i] = out[i, i].real


@nb.njit(cache=True, nogil=True)
def _select_one(desired, interf, power, code, n1, rand_idx, combos, solver, v_out, stats):
    nu, n = desired.shape
    m = interf.shape[1]
    gram = np.empty((n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    v = np.empty((n, n), dtype=np.complex128)
    ev = np.empty(n)
    vecs = np.empty((n, n), dtype=np.complex128)
    ones = np.ones(m)
    idx = 0
    if code == MAX_SNR:
        best = -1.0
        for u in range(nu):
            s = _sq_norm(desired[u])
            if s > best:
                best = s
                idx = u
    elif code == MIN_INR:
        best = np.inf
        for u in range(nu):
            lam = _weighted_min_eig(interf[u], ones, gram, a, v, ev, vecs)
            if lam < best:
                best = lam
                idx = u
    elif code == MAX_SINR:
        best = -1.0
        x = np.empty(n, dtype=np.complex128)
        l = np.zeros((n, n), dtype=np.complex128)
        for u in range(nu):
            _gram_into(interf[u], power, gram)
            _chol_solve_identity_plus(gram, desired[u], x, l)
            s = 0.0
            for i in range(n):
                s += (desired[u, i].conjugate() * x[i]).real
            if s > best:
                best = s
                idx = u
    elif code == MIN_IAM:
        gs = np.empty((nu, m, n), dtype=np.complex128)
        for u in range(nu):
            for k in range(m):
                nrm = np.sqrt(_sq_norm(interf[u, k]))
                for i in range(n):
                    gs[u, k, i] = interf[u, k, i] / nrm
        idx, _, _, _ = _min_iam_users(
            gs, combos, int(solver[0]), int(solver[1]), solver[2], solver[3], solver[4], solver[5]
        )
    elif code == TWO_STAGE:
        best = np.inf
        for b in range(nu // n1):
            win = b * n1
            top = -1.0
            for u in range(b * n1, (b + 1) * n1):
                s = _sq_norm(desired[u])
                if s > top:
                    top = s
                    win = u
            lam = _weighted_min_eig(interf[win], ones, gram, a, v, ev, vecs)
            if lam < best:
                best = lam
                idx = win
    else:
        idx = rand_idx

    h = desired[idx]
    if code == MAX_SNR:
        nrm = np.sqrt(_sq_norm(h))
        for i in range(n):
            v_out[i] = h[i] / nrm
    elif code == MAX_SINR:
        l = np.zeros((n, n), dtype=np.complex128)
        _gram_into(interf[idx], power, gram)
        _chol_solve_identity_plus(gram, h, v_out, l)
        nrm = np.sqrt(_sq_norm(v_out))
        for i in range(n):
            v_out[i] /= nrm
    else:
        _gram_into(interf[idx], power, gram)
        _eigh_into(gram, ev, vecs, a, v)
        for i in range(n):
            v_out[i] = vecs[i, n - 1]
    _rate_stats(v_out, h, interf[idx], power, stats)
    return idx


@nb.njit(cache=True, nogil=True)
def _rate_stats(vf, h, interf, power, stats):
    """stats <- (snr, inr, sinr, rate, gain, loss) for filter ``vf``."""
    m, n = interf.shape
    s = 0.0 + 0.0j
    for i in range(n):
        s += vf[i].conjugate() * h[i]
    snr = power * (s.real * s.real + s.imag * s.imag)
    acc = 0.0
    for k in range(m):
        t = 0.0 + 0.0j
        for i in range(n):
            t += vf[i].conjugate() * interf[k, i]
        acc += t.real * t.real + t.imag * t.imag
    inr = power * acc
    ln2 = np.log(2.0)
    stats[0] = snr
    stats[1] = inr
    stats[2] = snr / (1.0 + inr)
    stats[3] = np.log1p(stats[2]) / ln2
    stats[4] = np.log1p(snr + inr) / ln2
    stats[5] = np.log1p(inr) / ln2


@nb.njit(cache=True, nogil=True)
def _select_batch(desired, interf, power, code, n1, rand_idx, combos, solver):
    t_count, nu, n = desired.shape
    idx = np.empty(t_count, dtype=np.int64)
    vs = np.empty((t_count, n), dtype=np.complex128)
    stats = np.empty((t_count, 6))
    for t in range(t_count):
        idx[t] = _select_one(
            desired[t], interf[t], power, code, n1, rand_idx[t], combos, solver, vs[t], stats[t]
        )
    return idx, vs, stats


def select_batch(scheme, desired, interferers, power, rand_idx=None):
    """Run ``scheme`` on a stack of groups.

    ``desired`` is ``(T, N, n_r)`` and ``interferers`` ``(T, N, M, n_r)``;
    ``rand_idx`` supplies the per-trial draw for the random scheme.
    """
    desired = np.ascontiguousarray(desired, dtype=np.complex128)
    interferers = np.ascontiguousarray(interferers, dtype=np.complex128)
    if desired.ndim != 3 or interferers.ndim != 4:
        raise DimensionError("expected desired (T, N, n_r) and interferers (T, N, M, n_r)")
    t_count, nu, n = desired.shape
    if interferers.shape[:2] != (t_count, nu) or interferers.shape[3] != n:
        raise DimensionError(f"shapes {desired.shape} and {interferers.shape} disagree")
    if not power > 0:
        raise DomainError("power must be positive")
    scheme.check_group(nu)
    if rand_idx is None:
        if scheme.code == RANDOM:
            raise DomainError("the random scheme needs per-trial indices")
        rand_idx = np.zeros(t_count, dtype=np.int64)
    rand_idx = np.ascontiguousarray(rand_idx, dtype=np.int64)
    m = interferers.shape[2]
    if scheme.code == MIN_IAM:
        if n < 2 or m < 1:
            raise DimensionError("min-iam needs n_r >= 2 and at least one interferer")
        combos = _combos(m, n)
    else:
        combos = np.zeros((0, 1), dtype=np.int64)
    solver = np.array(_solver_args(), dtype=np.float64)
    idx, vs, st = _select_batch(
        desired, interferers, float(power), scheme.code, max(scheme.n1, 1), rand_idx, combos, solver
    )
    return BatchOutcome(idx, vs, st[:, 0], st[:, 1], st[:, 2], st[:, 3], st[:, 4], st[:, 5])


def random_indices(rng, n_users, count):
    """``count`` uniform user indices from a stream derived from ``rng``.

    The derived stream keeps the draw independent of any channels sampled
    from ``rng`` itself.
    """
    gen = RngStream.for_purpose(rng.seed, "random-baseline", rng.stream_id).generator()
    return gen.integers(n_users, size=count)


def select(scheme, group, rng):
    """Pick one user of ``group`` (a sequence of UserChannelSet) under ``scheme``."""
    group = list(group)
    if isinstance(scheme, str):
        scheme = Scheme.parse(scheme)
    scheme.check_group(len(group))
    powers = {u.power for u in group}
    if len(powers) != 1:
        raise DomainError("all users of a group share the transmit power")
    desired = np.stack([u.desired for u in group])[None]
    interferers = np.stack([u.interferers for u in group])[None]
    rand = random_indices(rng, len(group), 1) if scheme.code == RANDOM else None
    out = select_batch(scheme, desired, interferers, powers.pop(), rand)
    return SelectionOutcome(
        int(out.user_index[0]),
        out.postprocess[0],
        float(out.sinr[0]),
        float(out.snr[0]),
        float(out.inr[0]),
        float(out.rate[0]),
        float(out.rate_gain[0]),
        float(out.rate_loss[0]),
    )


def group_from_arrays(desired, interferers, power):
    """UserChannelSets from ``(N, n_r)`` and ``(N, M, n_r)`` arrays."""
    return [UserChannelSet(desired[i], interferers[i], power) for i in range(desired.shape[0])]
