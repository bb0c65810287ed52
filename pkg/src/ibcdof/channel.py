"""Channel sampling under a keyed, counter-based randomness contract.

Every draw comes from a Philox generator whose 128-bit key packs the run seed
and a 64-bit stream id.  Stream ids are derived from a purpose tag plus integer
indices (trial number, transmitter, ...), so trial ``t`` of any experiment sees
the same numbers no matter how trials are split across workers.

Complex Gaussian entries have variance 1/2 per real component, i.e. unit
variance per complex entry.
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError
from .numerics import as_cvec

_MASK64 = (1 << 64) - 1


def stream_id(purpose, *indices):
    """Stable 64-bit id for a purpose tag and a tuple of nonnegative integers."""
    h = hashlib.blake2b(purpose.encode(), digest_size=8)
    for i in indices:
        i = int(i)
        if not 0 <= i <= _MASK64:
            raise DomainError(f"stream index {i} is not a 64-bit unsigned integer")
        h.update(struct.pack("<Q", i))
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise DomainError("seed and stream_id must be 64-bit unsigned integers")

    @classmethod
    def for_purpose(cls, seed, purpose, *indices):
        return cls(seed & _MASK64, stream_id(purpose, *indices))

    def generator(self):
        """A fresh generator positioned at the start of this stream."""
        key = (self.stream_id << 64) | self.seed
        return np.random.Generator(np.random.Philox(key=key))


def complex_normal(gen, shape):
    """i.i.d. CN(0, 1) draws; filled in C order so prefixes are stable."""
    shape = tuple(shape)
    raw = gen.standard_normal(shape + (2,))
    return raw.view(np.complex128).reshape(shape) * np.sqrt(0.5)


def sample_channel_vector(n_r, rng):
    if n_r < 1:
        raise DomainError("n_r must be at least 1")
    return complex_normal(rng.generator(), (n_r,))


@dataclass(frozen=True)
class UserChannelSet:
    """One user's desired channel, its interfering channels and the per-transmitter power."""

    desired: np.ndarray
    interferers: np.ndarray = field(repr=False)
    power: float = 1.0

    def __post_init__(self):
        desired = as_cvec(self.desired)
        interferers = np.asarray(self.interferers, dtype=np.complex128)
        if interferers.ndim == 1:
            interferers = interferers[None, :]
        if interferers.size == 0:
            interferers = np.zeros((0, desired.size), dtype=np.complex128)
        if interferers.ndim != 2 or interferers.shape[1] != desired.size:
            raise DimensionError(
                f"interferers must be (count, {desired.size}), got {interferers.shape}"
            )
        if not self.power > 0:
            raise DomainError("power must be positive")
        object.__setattr__(self, "desired", desired)
        object.__setattr__(self, "interferers", interferers)
        object.__setattr__(self, "power", float(self.power))

    @property
    def n_r(self):
        return self.desired.size

    @property
    def n_interferers(self):
        return self.interferers.shape[0]


def _tail(n_r, n_t):
    return (n_r,) if n_t == 1 else (n_r, n_t)


def draw_desired(n_users, n_r, seed, trial, n_t=1):
    gen = RngStream.for_purpose(seed, "desired", trial).generator()
    return complex_normal(gen, (n_users,) + _tail(n_r, n_t))


def draw_interference(n_users, n_transmitters, n_r, seed, trial, n_t=1):
    gen = RngStream.for_purpose(seed, "interference", trial).generator()
    return complex_normal(gen, (n_users, n_transmitters - 1) + _tail(n_r, n_t))


def draw_group_arrays(n_users, n_transmitters, n_r, seed, trial, n_t=1):
    """Raw channel arrays for one trial.

    Returns ``(desired, interferers)`` shaped ``(N, n_r)`` and ``(N, K-1, n_r)``
    for ``n_t == 1``, or ``(N, n_r, n_t)`` and ``(N, K-1, n_r, n_t)`` otherwise.
    Desired and interfering channels use separate streams, so the desired
    channels do not depend on K and the first users do not depend on N.
    """
    return (
        draw_desired(n_users, n_r, seed, trial, n_t),
        draw_interference(n_users, n_transmitters, n_r, seed, trial, n_t),
    )


def sample_user_group(n_users, n_transmitters, n_r, power, rng):
    """``n_users`` independent user channel sets drawn from one stream."""
    if n_transmitters < 2 or n_users < 1 or n_r < 1:
        raise DomainError("need K >= 2, N >= 1, n_r >= 1")
    gen = rng.generator()
    desired = complex_normal(gen, (n_users, n_r))
    interferers = complex_normal(gen, (n_users, n_transmitters - 1, n_r))
    return [UserChannelSet(desired[n], interferers[n], power) for n in range(n_users)]


def interference_covariance(u):
    """``P * sum_k h_k h_k^H`` over the interferers of one user."""
    h = u.interferers
    r = u.power * (h.T @ h.conj())
    r = 0.5 * (r + r.conj().T)
    r[np.diag_indices_from(r)] = r.diagonal().real
    return r


def haar_unitary(gen, n, count=None):
    """Haar unitaries via QR of a Gaussian matrix with the R diagonal made real-positive."""
    shape = (n, n) if count is None else (count, n, n)
    z = complex_normal(gen, shape)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def sample_haar_beams(n_t, rng):
    """``n_t`` orthonormal random beams, returned as the columns of an ``n_t x n_t`` array."""
    if n_t < 1:
        raise DomainError("n_t must be at least 1")
    return haar_unitary(rng.generator(), n_t)
