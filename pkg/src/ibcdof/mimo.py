"""Multi-antenna transmitters with random orthonormal beams.

Each transmitter sends ``n_t`` Haar-random orthonormal beams at power P/n_t per
beam.  Seen from a user, beam ``i`` of transmitter 1 is a single-antenna
transmitter with channel ``H_1 u_i``; every other beam (own or foreign) is an
interferer, giving ``K n_t - 1`` interfering channels.  One user is selected
per beam, all beams on the same channel draw; a user may hold several beams and
decodes each stream treating the others as noise.

With ``n_t == 1`` the beams are skipped entirely so results coincide bit for
bit with the single-antenna path.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import RngStream, UserChannelSet, complex_normal, haar_unitary
from .errors import DimensionError, DomainError
from .selection import RANDOM, Scheme, SelectionOutcome, random_indices, select_batch


@dataclass(frozen=True)
class MimoConfig:
    K: int
    n_t: int
    n_r: int
    N: int
    power: float

    def __post_init__(self):
        if self.K < 1 or self.n_t < 1 or self.n_r < 1 or self.N < 1:
            raise DomainError("K, n_t, n_r and N must be positive")
        if not self.power > 0:
            raise DomainError("power must be positive")
        if self.n_r >= self.K * self.n_t:
            warnings.warn(
                f"n_r={self.n_r} >= K*n_t={self.K * self.n_t}: interference can be nulled outright",
                stacklevel=2,
            )

    @property
    def beam_power(self):
        return self.power / self.n_t

    @property
    def n_interferers(self):
        return self.K * self.n_t - 1


@dataclass(frozen=True)
class BeamUserAssignment:
    """One (user index, outcome) pair per beam of the serving transmitter."""

    beams: tuple

    @property
    def rate(self):
        return float(sum(o.rate for _, o in self.beams))

    @property
    def rate_gain(self):
        return float(sum(o.rate_gain for _, o in self.beams))

    @property
    def rate_loss(self):
        return float(sum(o.rate_loss for _, o in self.beams))


def effective_channels(channels, beams, beam, power):
    """Effective single-antenna view of beam ``beam`` of transmitter 1 for one user.

    ``channels`` is ``(K, n_r, n_t)`` (transmitter 1 first), ``beams`` is
    ``(K, n_t, n_t)`` with beams as columns, ``power`` the per-transmitter power.
    Interferers are the other own beams in index order, then every beam of
    transmitters 2..K.
    """
    channels = np.asarray(channels, dtype=np.complex128)
    beams = np.asarray(beams, dtype=np.complex128)
    if channels.ndim != 3:
        raise DimensionError(f"channels must be (K, n_r, n_t), got {channels.shape}")
    k, n_r, n_t = channels.shape
    if beams.shape != (k, n_t, n_t):
        raise DimensionError(f"beams must be ({k}, {n_t}, {n_t}), got {beams.shape}")
    if not 0 <= beam < n_t:
        raise DomainError(f"beam index {beam} out of range")
    eff = channels @ beams  # (K, n_r, n_t): column j of k is H_k u_j
    desired = eff[0, :, beam]
    own = [eff[0, :, j] for j in range(n_t) if j != beam]
    foreign = [eff[kk, :, j] for kk in range(1, k) for j in range(n_t)]
    interferers = np.array(own + foreign, dtype=np.complex128).reshape(-1, n_r)
    return UserChannelSet(desired, interferers, power / n_t)


def effective_arrays(desired, interferers, beams, beam):
    """Batched ``effective_channels``.

    ``desired`` is ``(..., N, n_r, n_t)``, ``interferers`` ``(..., N, K-1, n_r, n_t)``
    and ``beams`` ``(..., K, n_t, n_t)``.  Returns ``(..., N, n_r)`` and
    ``(..., N, K n_t - 1, n_r)`` in the same interferer order as the scalar version.
    """
    n_t = desired.shape[-1]
    own_b = beams[..., 0, :, :][..., None, :, :]
    eff_own = desired @ own_b  # (..., N, n_r, n_t)
    foreign_b = beams[..., 1:, :, :][..., None, :, :, :]
    eff_for = interferers @ foreign_b  # (..., N, K-1, n_r, n_t)
    des = eff_own[..., beam]
    others = [j for j in range(n_t) if j != beam]
    own_int = np.moveaxis(eff_own[..., others], -1, -2)  # (..., N, n_t-1, n_r)
    for_int = np.moveaxis(eff_for, -1, -2)  # (..., N, K-1, n_t, n_r)
    for_int = for_int.reshape(for_int.shape[:-3] + (for_int.shape[-3] * for_int.shape[-2], for_int.shape[-1]))
    return np.ascontiguousarray(des), np.ascontiguousarray(np.concatenate([own_int, for_int], axis=-2))


def select_beams_batch(scheme, desired, interferers, beams, power, rand_idx=None):
    """Per-beam selection for a stack of trials.

    Returns a list of n_t ``BatchOutcome`` values.  For ``n_t == 1`` the inputs
    are the plain ``(T, N, n_r)`` / ``(T, N, K-1, n_r)`` arrays, ``beams`` is
    ignored and the call is exactly ``select_batch``.
    """
    if desired.ndim == 3:
        ri = None if rand_idx is None else rand_idx[:, 0]
        return [select_batch(scheme, desired, interferers, power, ri)]
    n_t = desired.shape[-1]
    outs = []
    for i in range(n_t):
        des, intf = effective_arrays(desired, interferers, beams, i)
        ri = None if rand_idx is None else rand_idx[:, i]
        outs.append(select_batch(scheme, des, intf, power / n_t, ri))
    return outs


def sample_mimo_group(cfg, rng):
    """Channels for one group from ``rng``: ``(N, n_r, n_t)`` and ``(N, K-1, n_r, n_t)``.

    With ``n_t == 1`` the trailing axis is dropped; the draws then match
    ``sample_user_group`` on the same stream.
    """
    gen = rng.generator()
    tail = (cfg.n_r,) if cfg.n_t == 1 else (cfg.n_r, cfg.n_t)
    desired = complex_normal(gen, (cfg.N,) + tail)
    interferers = complex_normal(gen, (cfg.N, cfg.K - 1) + tail)
    return desired, interferers


def mimo_select_and_rate(cfg, scheme, rng):
    """Select one user per beam of transmitter 1 and report the per-beam outcomes."""
    if isinstance(scheme, str):
        scheme = Scheme.parse(scheme)
    desired, interferers = sample_mimo_group(cfg, rng)
    beams = None
    if cfg.n_t > 1:
        gen = RngStream.for_purpose(rng.seed, "beams", rng.stream_id).generator()
        beams = haar_unitary(gen, cfg.n_t, count=cfg.K)[None]
    rand = None
    if scheme.code == RANDOM:
        rand = random_indices(rng, cfg.N, cfg.n_t)[None]
    outs = select_beams_batch(scheme, desired[None], interferers[None], beams, cfg.power, rand)
    entries = []
    for o in outs:
        outcome = SelectionOutcome(
            int(o.user_index[0]),
            o.postprocess[0],
            float(o.sinr[0]),
            float(o.snr[0]),
            float(o.inr[0]),
            float(o.rate[0]),
            float(o.rate_gain[0]),
            float(o.rate_loss[0]),
        )
        entries.append((outcome.user_index, outcome))
    return BeamUserAssignment(tuple(entries))
