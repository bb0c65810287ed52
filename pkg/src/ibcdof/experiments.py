"""Monte Carlo sweeps: user-scaling schedules, rate curves, slopes, baselines, bound checks.

Trial ``t`` of a run always sees the channels of streams keyed by ``(seed, t)``,
whatever the SNR point, group size or worker count.  Larger groups extend
smaller ones (the first users are shared), and every SNR point reuses the same
draws, which keeps curves smooth and makes the output independent of
``threads``: per-trial results are gathered in trial order before averaging.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .alignment import (
    _combos,
    _min_iam_users,
    _solver_args,
    iam_cdf_lower_bound,
    min_iam_expectation_bound,
    rate_loss_bound,
)
from .channel import RngStream, draw_desired, draw_interference, haar_unitary
from .errors import CapExceededError, DomainError
from .mimo import select_beams_batch
from .numerics import gram_min_eig
from .selection import RANDOM, Scheme

DEFAULT_CAP = 1_000_000
DEFAULT_SNR_DB = tuple(float(x) for x in range(0, 41, 5))
BASELINES = ("tdma1", "tdma2")

# complex entries per block of trials; bounds memory, never affects results
_BLOCK_ENTRIES = 1 << 20


def db_to_power(snr_db):
    return 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class ScalingSchedule:
    """Group size as a function of power: fixed, a*P^b, or a*exp(P^b)*P^c."""

    kind: str
    params: tuple
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        arity = {"fixed": 1, "powerlaw": 2, "exppower": 3}
        if self.kind not in arity:
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        if len(self.params) != arity[self.kind]:
            raise DomainError(f"{self.kind} takes {arity[self.kind]} parameters")
        if self.kind == "fixed" and (self.params[0] < 1 or self.params[0] != int(self.params[0])):
            raise DomainError("fixed schedules need a positive integer group size")
        if self.kind != "fixed" and not self.params[0] > 0:
            raise DomainError("the schedule prefactor must be positive")
        if self.cap < 1:
            raise DomainError("cap must be positive")

    @classmethod
    def parse(cls, text, cap=DEFAULT_CAP):
        """``fixed:N``, ``powerlaw:a:b`` or ``exppower:a:b:c``."""
        kind, *rest = text.strip().lower().split(":")
        try:
            params = tuple(float(x) for x in rest)
        except ValueError:
            raise DomainError(f"bad schedule parameters in {text!r}") from None
        if kind == "fixed" and len(params) == 1:
            params = (int(params[0]),) if params[0] == int(params[0]) else params
        return cls(kind, params, cap)

    @classmethod
    def fixed(cls, n, cap=DEFAULT_CAP):
        return cls("fixed", (int(n),), cap)

    @classmethod
    def powerlaw(cls, a, b, cap=DEFAULT_CAP):
        return cls("powerlaw", (float(a), float(b)), cap)

    @classmethod
    def exppower(cls, a, b, c, cap=DEFAULT_CAP):
        return cls("exppower", (float(a), float(b), float(c)), cap)

    def raw(self, power):
        if self.kind == "fixed":
            return float(self.params[0])
        if self.kind == "powerlaw":
            a, b = self.params
            return a * power**b
        a, b, c = self.params
        try:
            return a * math.exp(power**b) * power**c
        except OverflowError:
            return math.inf

    def __str__(self):
        return ":".join([self.kind] + [_fmt_param(p) for p in self.params])


def _fmt_param(p):
    return str(int(p)) if float(p) == int(p) else repr(float(p))


def users_at(schedule, power):
    """Group size at linear power ``power``: nearest integer, at least 1, at most the cap."""
    if not power > 0:
        raise DomainError("power must be positive")
    x = schedule.raw(power)
    if not x <= schedule.cap:
        snr_db = 10.0 * math.log10(power)
        raise CapExceededError(
            f"schedule {schedule} needs {x:.4g} users at {snr_db:g} dB, above the cap {schedule.cap}",
            snr_db=snr_db,
            users=x,
        )
    return max(1, int(math.floor(x + 0.5)))


@dataclass(frozen=True)
class ExperimentConfig:
    K: int
    n_r: int
    n_t: int = 1
    scheme: str = "max-sinr"
    schedule: str = "fixed:10"
    snr_db: tuple = DEFAULT_SNR_DB
    trials: int = 2000
    seed: int = 0
    cap: int = DEFAULT_CAP
    threads: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.K < 1 or self.n_r < 1 or self.n_t < 1:
            raise DomainError("K, n_r and n_t must be positive")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if self.threads < 1:
            raise DomainError("threads must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "snr_db", tuple(float(x) for x in self.snr_db))
        if not self.snr_db:
            raise DomainError("empty SNR grid")
        if self.is_baseline:
            if self.n_t != 1:
                raise DomainError("TDMA baselines are single-antenna only")
            if self.scheme == "tdma2" and self.n_r > self.K:
                raise DomainError("tdma2 needs n_r <= K")
        else:
            if self.K < 2 and self.n_t < 2:
                raise DomainError("need K >= 2 (or several beams) for a selection scheme")
            object.__setattr__(self, "scheme", str(Scheme.parse(self.scheme)))
        object.__setattr__(self, "schedule", str(ScalingSchedule.parse(self.schedule, self.cap)))

    @property
    def is_baseline(self):
        return self.scheme in BASELINES

    @property
    def scheme_obj(self):
        return None if self.is_baseline else Scheme.parse(self.scheme)

    @property
    def schedule_obj(self):
        return ScalingSchedule.parse(self.schedule, self.cap)

    def resolved(self):
        """Every result-determining field, in declaration order (threads excluded)."""
        d = asdict(self)
        d.pop("threads")
        return d


@dataclass(frozen=True)
class RateCurve:
    snr_db: np.ndarray
    users: np.ndarray
    rate_mean: np.ndarray
    rate_stderr: np.ndarray
    rate_gain_mean: np.ndarray
    rate_loss_mean: np.ndarray
    trials: int
    scheme: str
    config: ExperimentConfig

    @property
    def power(self):
        return db_to_power(self.snr_db)


def _mean_stderr(x):
    x = np.asarray(x, dtype=np.float64)
    se = float(np.std(x, ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(np.mean(x)), se


def _blocks(trials, per_trial_entries):
    size = max(1, min(trials, _BLOCK_ENTRIES // max(per_trial_entries, 1)))
    return [(t, min(t + size, trials)) for t in range(0, trials, size)]


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _scheme_block(cfg, scheme, power, n_users, span):
    t0, t1 = span
    ts = range(t0, t1)
    desired = np.stack([draw_desired(n_users, cfg.n_r, cfg.seed, t, cfg.n_t) for t in ts])
    interf = np.stack([draw_interference(n_users, cfg.K, cfg.n_r, cfg.seed, t, cfg.n_t) for t in ts])
    beams = None
    if cfg.n_t > 1:
        beams = np.stack(
            [
                haar_unitary(RngStream.for_purpose(cfg.seed, "beams", t).generator(), cfg.n_t, count=cfg.K)
                for t in ts
            ]
        )
    rand = None
    if scheme.code == RANDOM:
        rand = np.stack(
            [
                RngStream.for_purpose(cfg.seed, "random-baseline", t).generator().integers(n_users, size=cfg.n_t)
                for t in ts
            ]
        )
    outs = select_beams_batch(scheme, desired, interf, beams, power, rand)
    rate = outs[0].rate.copy()
    gain = outs[0].rate_gain.copy()
    loss = outs[0].rate_loss.copy()
    for o in outs[1:]:
        rate += o.rate
        gain += o.rate_gain
        loss += o.rate_loss
    return rate, gain, loss


def _tdma_gains(kind, K, n_r, n_users, seed, span):
    """Per-trial best post-combining channel gain under a TDMA baseline."""
    t0, t1 = span
    out = np.empty(t1 - t0)
    for i, t in enumerate(range(t0, t1)):
        h = draw_desired(n_users, n_r, seed, t)
        if kind == "tdma2" and n_r > 1:
            g = draw_interference(n_users, K, n_r, seed, t)[:, : n_r - 1, :]
            q, _ = np.linalg.qr(np.swapaxes(g, -1, -2))  # (N, n_r, n_r-1) orthonormal span
            h = h - np.einsum("nij,nj->ni", q, np.einsum("nji,nj->ni", q.conj(), h))
        out[i] = np.max(np.sum(h.real**2 + h.imag**2, axis=-1))
    return out


def _tdma_prefactor(kind, K, n_r):
    return (1.0 if kind == "tdma1" else float(n_r)) / K


def _tdma_check(kind, K, n_r):
    if kind not in BASELINES:
        raise DomainError(f"unknown baseline {kind!r}")
    if K < 1 or n_r < 1:
        raise DomainError("K and n_r must be positive")
    if kind == "tdma2" and n_r > K:
        raise DomainError("tdma2 needs n_r <= K")


def _tdma_rates(kind, K, n_r, n_users, power, trials, seed, threads=1):
    _tdma_check(kind, K, n_r)
    spans = _blocks(trials, n_users * K * n_r)
    gains = np.concatenate(_map(lambda s: _tdma_gains(kind, K, n_r, n_users, seed, s), spans, threads))
    return _tdma_prefactor(kind, K, n_r) * np.log2(1.0 + power * gains)


def tdma1_rate(K, n_r, N, power, trials, seed, threads=1):
    """One transmitter at a time, best user by channel norm, MRC: (1/K) E[max_n log2(1 + P|h|^2)]."""
    return float(np.mean(_tdma_rates("tdma1", K, n_r, N, power, trials, seed, threads)))


def tdma2_rate(K, n_r, N, power, trials, seed, threads=1):
    """n_r transmitters at a time; each user nulls the n_r - 1 active interferers.

    The filter is the normalized projection of the desired channel onto the
    orthogonal complement of the interferers, the user with the largest
    projected gain is served, and the result is scaled by n_r/K.
    """
    return float(np.mean(_tdma_rates("tdma2", K, n_r, N, power, trials, seed, threads)))


def run_rate_curve(cfg):
    """Sweep ``cfg.snr_db``; returns the mean rate per transmitter at each point."""
    sched = cfg.schedule_obj
    powers = [db_to_power(x) for x in cfg.snr_db]
    users = [users_at(sched, p) for p in powers]
    scheme = cfg.scheme_obj
    if scheme is not None:
        for n in users:
            scheme.check_group(n)
    means, ses, gains, losses = [], [], [], []
    for p, n in zip(powers, users):
        if scheme is None:
            rate = _tdma_rates(cfg.scheme, cfg.K, cfg.n_r, n, p, cfg.trials, cfg.seed, cfg.threads)
            gain, loss = rate, np.zeros_like(rate)
        else:
            spans = _blocks(cfg.trials, n * cfg.K * cfg.n_r * cfg.n_t * cfg.n_t)
            parts = _map(lambda s: _scheme_block(cfg, scheme, p, n, s), spans, cfg.threads)
            rate = np.concatenate([x[0] for x in parts])
            gain = np.concatenate([x[1] for x in parts])
            loss = np.concatenate([x[2] for x in parts])
        m, se = _mean_stderr(rate)
        means.append(m)
        ses.append(se)
        gains.append(float(np.mean(gain)))
        losses.append(float(np.mean(loss)))
    return RateCurve(
        np.array(cfg.snr_db),
        np.array(users, dtype=np.int64),
        np.array(means),
        np.array(ses),
        np.array(gains),
        np.array(losses),
        cfg.trials,
        cfg.scheme,
        cfg,
    )


def fit_slope(snr_db, values, window):
    """Least-squares slope of ``values`` against log2(P) over the last ``window`` points."""
    snr_db = np.asarray(snr_db, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if window < 2:
        raise DomainError("the slope window needs at least 2 points")
    if window > snr_db.size:
        raise DomainError(f"window {window} exceeds the {snr_db.size} curve points")
    x = snr_db[-window:] * (math.log2(10.0) / 10.0)
    y = values[-window:]
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def dof_slope(curve, window=3):
    return fit_slope(curve.snr_db, curve.rate_mean, window)


# --- scaling-law calculators ------------------------------------------------


def loss_term_exponent(d2, K, n_r):
    """Exponent e in N ~ P^e that brings the loss-term slope down to ``d2``."""
    if not 0.0 <= d2 <= 1.0:
        raise DomainError("d2 must lie in [0, 1]")
    return (1.0 - d2) * (K - n_r)


def gain_term_schedule(d1, a=1.0, cap=DEFAULT_CAP):
    """Schedule N ~ exp(P^(d1 - 1)) lifting the gain-term slope to ``d1 >= 1``."""
    if d1 < 1.0:
        raise DomainError("d1 must be at least 1")
    return ScalingSchedule.exppower(a, d1 - 1.0, 0.0, cap)


def total_streams(n_t_per_transmitter):
    """T: the number of beams summed over all transmitters."""
    vals = [int(x) for x in n_t_per_transmitter]
    if not vals or min(vals) < 1:
        raise DomainError("need at least one transmitter with n_t >= 1")
    return sum(vals)


def target_dof_schedule(d, T, n_r, n_t=1, a=1.0, cap=DEFAULT_CAP):
    """Cheapest known strategy and user scaling for per-transmitter DoF ``d``.

    ``T`` is the total number of streams in the network (K for single-antenna
    transmitters, the sum of all n_t otherwise) and ``n_t`` the serving
    transmitter's beam count.  Returns ``((d1, d2), schedule)``: up to ``n_t``
    all user diversity goes to the loss term, beyond it the loss is removed and
    the gain term is pushed up.
    """
    if d < 0:
        raise DomainError("target DoF must be nonnegative")
    if not T > n_r:
        raise DomainError(f"need T > n_r (got T={T}, n_r={n_r})")
    if d <= n_t:
        return (float(n_t), float(n_t - d)), ScalingSchedule.powerlaw(a, (d / n_t) * (T - n_r), cap)
    return (float(d), 0.0), ScalingSchedule.exppower(a, d / n_t - 1.0, float(T - n_r), cap)


# --- bound validation -------------------------------------------------------

DEFAULT_LAMBDAS = (0.1, 0.3, 0.5, 0.7, 1.0)
DEFAULT_BOUND_SNR_DB = (10.0, 20.0, 30.0)
CDF_SLACK = 0.01


@dataclass(frozen=True)
class BoundRow:
    N: int
    lam: float
    empirical_cdf: float
    bound_cdf: float
    empirical_min_mean: float
    bound_mean: float
    passed: bool


@dataclass(frozen=True)
class LossRow:
    N: int
    snr_db: float
    empirical_loss: float
    stderr: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class BoundsReport:
    rows: tuple
    loss_rows: tuple
    min_mean_stderr: dict

    @property
    def all_pass(self):
        return all(r.passed for r in self.rows) and all(r.passed for r in self.loss_rows)


def _bounds_block(K, n_r, n_users, seed, combos, span):
    t0, t1 = span
    mins = np.empty(t1 - t0)
    lam_min = np.empty(t1 - t0)
    for i, t in enumerate(range(t0, t1)):
        h = draw_interference(n_users, K, n_r, seed, t)
        g = h / np.sqrt(np.sum(h.real**2 + h.imag**2, axis=-1, keepdims=True))
        mins[i] = _min_iam_users(np.ascontiguousarray(g), combos, *_solver_args())[1]
        lam_min[i] = float(np.min(gram_min_eig(h)[0]))
    return mins, lam_min


def validate_bounds(K, n_r, N_list, trials, seed, lambdas=DEFAULT_LAMBDAS, snr_db=DEFAULT_BOUND_SNR_DB, threads=1):
    """Empirical checks of the alignment-measure bounds.

    For each group size N, ``trials`` groups are drawn and the smallest
    measure over the group is recorded.  Rows compare its empirical CDF with
    the lower bound ``1 - (1 - F(lam))^N`` (F the single-user bound) and its
    mean with ``N^(-1/(K - n_r))``.  A row passes when the CDF is above the
    bound minus 0.01 plus two standard errors and the mean plus two standard
    errors is below the bound.  Loss rows compare the min-INR loss term
    ``E[log2(1 + P min_n lambda_min(R_n / P))]`` with its closed-form bound.
    """
    if not K > n_r:
        raise DomainError(f"bound validation needs K > n_r (got K={K}, n_r={n_r})")
    if trials < 2:
        raise DomainError("need at least 2 trials")
    combos = _combos(K - 1, n_r)
    rows, loss_rows, ses = [], [], {}
    for n_users in N_list:
        if n_users < 1:
            raise DomainError("group sizes must be positive")
        spans = _blocks(trials, n_users * K * n_r)
        parts = _map(lambda s: _bounds_block(K, n_r, n_users, seed, combos, s), spans, threads)
        mins = np.concatenate([p[0] for p in parts])
        lam_min = np.concatenate([p[1] for p in parts])
        mean, se = _mean_stderr(mins)
        ses[n_users] = se
        bound_mean = min_iam_expectation_bound(n_users, K, n_r)
        mean_ok = mean + 2.0 * se < bound_mean
        for lam in lambdas:
            emp = float(np.mean(mins <= lam))
            single = iam_cdf_lower_bound(lam, K, n_r)
            bound = 1.0 - (1.0 - single) ** n_users
            cdf_se = math.sqrt(max(bound * (1.0 - bound), 0.0) / trials)
            cdf_ok = emp >= bound - CDF_SLACK - 2.0 * cdf_se
            rows.append(BoundRow(n_users, float(lam), emp, bound, mean, bound_mean, bool(cdf_ok and mean_ok)))
        for x in snr_db:
            p = db_to_power(x)
            loss = np.log2(1.0 + p * lam_min)
            m, s = _mean_stderr(loss)
            b = rate_loss_bound(p, n_users, K, n_r)
            loss_rows.append(LossRow(n_users, float(x), m, s, b, bool(m - 2.0 * s <= b)))
    return BoundsReport(tuple(rows), tuple(loss_rows), ses)
