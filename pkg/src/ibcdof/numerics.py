"""Small complex linear algebra: Hermitian eigensolver, (I + M) solves, quadratic forms.

Everything here targets tiny matrices (dimension <= 16) evaluated in very large
batches, so the kernels are written as plain loops compiled with numba.  The
eigensolver is a cyclic Jacobi method; eigenvalues come back sorted descending
and every eigenvector has its first nonzero entry real and positive, which makes
downstream argmin/argmax selections reproducible bit for bit.
"""

from typing import NamedTuple

import numba as nb
import numpy as np

from .errors import DimensionError, DomainError

HERMITIAN_TOL = 1e-12
RESULT_TOL = 1e-9
MAX_DIM = 16

_JACOBI_SWEEPS = 60
_PHASE_THRESHOLD = 1e-10


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending; eigenvectors are the matching columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def vector(self, i):
        return self.eigenvectors[:, i]

    @property
    def min_pair(self):
        return self.eigenvalues[-1], self.eigenvectors[:, -1]


def as_cvec(v):
    """Return `v` as a 1-D complex128 array."""
    arr = np.asarray(v, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"expected a nonempty 1-D vector, got shape {arr.shape}")
    return arr


def norm_squared(v):
    v = as_cvec(v)
    return float(np.real(np.vdot(v, v)))


def as_hermitian(m, tol=HERMITIAN_TOL):
    """Validate and symmetrize a square matrix.

    The deviation ``max |m - m^H|`` must not exceed ``tol * max(1, ||m||_F)``.
    The returned matrix is ``(m + m^H) / 2`` with an exactly real diagonal.
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    scale = max(1.0, float(np.linalg.norm(arr)))
    dev = float(np.max(np.abs(arr - arr.conj().T)))
    if dev > tol * scale:
        raise DomainError(f"matrix is not Hermitian (deviation {dev:.3e})")
    herm = 0.5 * (arr + arr.conj().T)
    herm[np.diag_indices_from(herm)] = herm.diagonal().real
    return herm


@nb.njit(cache=True, nogil=True)
def _jacobi_inplace(a, v):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            v[i, j] = 1.0 if i == j else 0.0
    frob = 0.0
    for i in range(n):
        for j in range(n):
            frob += a[i, j].real ** 2 + a[i, j].imag ** 2
    if frob == 0.0:
        return 0
    for sweep in range(_JACOBI_SWEEPS):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q].real ** 2 + a[p, q].imag ** 2
        if off <= 1e-32 * frob:
            return sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                e = apq / mag
                ec = e.conjugate()
                tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # A <- A G, V <- V G with G = [[c, s], [-s conj(e), c conj(e)]]
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * ec * akq
                    a[k, q] = s * akp + c * ec * akq
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * ec * vkq
                    v[k, q] = s * vkp + c * ec * vkq
                # A <- G^H A
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * e * aqk
                    a[q, k] = s * apk + c * e * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    return _JACOBI_SWEEPS


@nb.njit(cache=True, nogil=True)
def _sort_and_fix_phase(a, v, w, vecs):
    n = a.shape[0]
    order = np.arange(n)
    diag = np.empty(n)
    for i in range(n):
        diag[i] = a[i, i].real
    # stable insertion sort, descending
    for i in range(1, n):
        j = i
        while j > 0 and diag[order[j - 1]] < diag[order[j]]:
            tmp = order[j - 1]
            order[j - 1] = order[j]
            order[j] = tmp
            j -= 1
    for jj in range(n):
        src = order[jj]
        w[jj] = diag[src]
        lead = -1
        for i in range(n):
            if abs(v[i, src]) > _PHASE_THRESHOLD:
                lead = i
                break
        ph = 1.0 + 0.0j
        if lead >= 0:
            ph = v[lead, src].conjugate() / abs(v[lead, src])
        for i in range(n):
            vecs[i, jj] = v[i, src] * ph
        if lead >= 0:
            vecs[lead, jj] = abs(v[lead, src])


@nb.njit(cache=True, nogil=True)
def _eigh_into(m, w, vecs, a, v):
    n = m.shape[0]
    for i in range(n):
        for j in range(n):
            a[i, j] = m[i, j]
    _jacobi_inplace(a, v)
    _sort_and_fix_phase(a, v, w, vecs)


@nb.njit(cache=True, nogil=True)
def _eigh_batch(ms):
    b, n = ms.shape[0], ms.shape[1]
    w = np.empty((b, n))
    vecs = np.empty((b, n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    v = np.empty((n, n), dtype=np.complex128)
    for i in range(b):
        _eigh_into(ms[i], w[i], vecs[i], a, v)
    return w, vecs


@nb.njit(cache=True, nogil=True)
def _gram_min_eig_batch(vs):
    """Smallest eigenpair of sum_k v_k v_k^H for each stack of row vectors."""
    b, m, n = vs.shape
    lam = np.empty(b)
    vmin = np.empty((b, n), dtype=np.complex128)
    g = np.empty((n, n), dtype=np.complex128)
    a = np.empty((n, n), dtype=np.complex128)
    v = np.empty((n, n), dtype=np.complex128)
    w = np.empty(n)
    vecs = np.empty((n, n), dtype=np.complex128)
    for t in range(b):
        for i in range(n):
            for j in range(i + 1):
                s = 0.0 + 0.0j
                for k in range(m):
                    s += vs[t, k, i] * vs[t, k, j].conjugate()
                g[i, j] = s
                g[j, i] = s.conjugate()
            g[i, i] = g[i, i].real
        _eigh_into(g, w, vecs, a, v)
        lam[t] = w[n - 1]
        for i in range(n):
            vmin[t, i] = vecs[i, n - 1]
    return lam, vmin


@nb.njit(cache=True, nogil=True)
def _chol_solve_identity_plus(m, b, x, l):
    n = m.shape[0]
    for j in range(n):
        s = 1.0 + m[j, j].real
        for k in range(j):
            s -= l[j, k].real ** 2 + l[j, k].imag ** 2
        d = np.sqrt(s)
        l[j, j] = d
        for i in range(j + 1, n):
            t = m[i, j]
            for k in range(j):
                t -= l[i, k] * l[j, k].conjugate()
            l[i, j] = t / d
    for i in range(n):
        t = b[i]
        for k in range(i):
            t -= l[i, k] * x[k]
        x[i] = t / l[i, i].real
    for i in range(n - 1, -1, -1):
        t = x[i]
        for k in range(i + 1, n):
            t -= l[k, i].conjugate() * x[k]
        x[i] = t / l[i, i].real


@nb.njit(cache=True, nogil=True)
def _solve_identity_plus_batch(ms, bs):
    nb_, n = bs.shape
    xs = np.empty((nb_, n), dtype=np.complex128)
    l = np.zeros((n, n), dtype=np.complex128)
    for i in range(nb_):
        _chol_solve_identity_plus(ms[i], bs[i], xs[i], l)
    return xs


def hermitian_eig(m):
    """Full eigendecomposition of a small Hermitian matrix.

    >>> d = hermitian_eig(np.diag([1.0, 3.0]))
    >>> d.eigenvalues.tolist()
    [3.0, 1.0]
    """
    herm = as_hermitian(m)
    if herm.shape[0] > MAX_DIM:
        raise DimensionError(f"dimension {herm.shape[0]} exceeds {MAX_DIM}")
    w, vecs = _eigh_batch(herm[None])
    return EigenDecomposition(w[0], vecs[0])


def eigh_batch(ms):
    """Eigendecomposition of a stack ``(..., n, n)`` of Hermitian matrices.

    Inputs are trusted to be Hermitian; only the lower triangle matters in
    practice since the rotations keep the matrix Hermitian.
    """
    ms = np.asarray(ms, dtype=np.complex128)
    lead = ms.shape[:-2]
    n = ms.shape[-1]
    w, vecs = _eigh_batch(np.ascontiguousarray(ms.reshape((-1, n, n))))
    return w.reshape(lead + (n,)), vecs.reshape(lead + (n, n))


def gram_min_eig(vectors):
    """Smallest eigenpair of ``sum_k v_k v_k^H`` for stacks ``(..., m, n)``.

    Returns ``(lam_min, v_min)`` with shapes ``(...,)`` and ``(..., n)``.
    """
    vs = np.asarray(vectors, dtype=np.complex128)
    lead = vs.shape[:-2]
    m, n = vs.shape[-2:]
    lam, vmin = _gram_min_eig_batch(np.ascontiguousarray(vs.reshape((-1, m, n))))
    return lam.reshape(lead), vmin.reshape(lead + (n,))


def solve_identity_plus(m, b):
    """Solve ``(I + M) x = b`` for positive semidefinite Hermitian ``M``."""
    herm = as_hermitian(m)
    b = as_cvec(b)
    if herm.shape[0] != b.size:
        raise DimensionError(f"matrix is {herm.shape}, vector has {b.size} entries")
    return _solve_identity_plus_batch(herm[None], b[None])[0]


def solve_identity_plus_batch(ms, bs):
    ms = np.asarray(ms, dtype=np.complex128)
    bs = np.asarray(bs, dtype=np.complex128)
    if ms.shape[:-1] != bs.shape:
        raise DimensionError(f"matrix stack {ms.shape} does not match vectors {bs.shape}")
    n = bs.shape[-1]
    xs = _solve_identity_plus_batch(
        np.ascontiguousarray(ms.reshape((-1, n, n))), np.ascontiguousarray(bs.reshape((-1, n)))
    )
    return xs.reshape(bs.shape)


def quadratic_form(v, m):
    """Real value of ``v^H M v``; the discarded imaginary part must be negligible."""
    v = as_cvec(v)
    herm = np.asarray(m, dtype=np.complex128)
    if herm.shape != (v.size, v.size):
        raise DimensionError(f"matrix {herm.shape} does not match vector of size {v.size}")
    val = np.vdot(v, herm @ v)
    bound = RESULT_TOL * max(1.0, float(np.linalg.norm(herm))) * max(1.0, norm_squared(v))
    if abs(val.imag) > bound:
        raise DomainError(f"quadratic form has imaginary part {val.imag:.3e}")
    return float(val.real)
