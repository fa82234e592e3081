"""Statistics and decision rules computed from an observed point-process path.

Notation: ``y(t) = rate * t - X_t`` is the lag of the count behind its trend,
``theta = u / (gamma * T)`` with ``gamma = rate * psi'(0)``, and the
log-likelihood ratio against the Poisson null is::

    l(u) = sum_i log psi(theta * y(t_i-)) - rate * int_0^T (psi(theta * y(t)) - 1) dt

At an event time the pre-jump count is used.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np
from numpy.polynomial.legendre import leggauss

from . import rng
from .exceptions import DomainError, InvalidArgumentError, StoppingTimeoutError
from .parallel import map_ranges
from .psi import PsiSpec
from .simulate import PointProcessPath, _sample_events, sc_exp_events, sc_thinning_events
from .thresholds import PUBLISHED_B, PUBLISHED_C, a_epsilon, check_epsilon, z_upper

GRID_POINTS = 512
MLE_TOL = 1e-6
QUAD_ORDER = 8
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def default_alt_upper(rate: float, horizon: float) -> float:
    """K_T = sqrt(rate * T) / ln T; unbounded when ln T <= 0."""
    if horizon <= 1.0:
        return math.inf
    return math.sqrt(rate * horizon) / math.log(horizon)


@dataclass(frozen=True)
class TestConfig:
    """Setting of the finite-horizon testing problem.

    ``b_threshold`` and ``c_threshold`` default to the published tables when
    ``epsilon`` is one of the tabulated levels.  ``alt_upper`` defaults to
    K_T; pass another value only to study the effect of the restriction.
    """

    __test__ = False  # not a pytest class

    rate: float
    horizon: float
    psi: PsiSpec
    epsilon: float = 0.05
    alt_upper: float | None = None
    b_threshold: float | None = None
    c_threshold: float | None = None

    def __post_init__(self):
        if not (self.rate > 0 and self.horizon > 0):
            raise InvalidArgumentError("rate and horizon must be positive")
        check_epsilon(self.epsilon)
        if self.alt_upper is None:
            object.__setattr__(self, "alt_upper", default_alt_upper(self.rate, self.horizon))
        elif not self.alt_upper > 0:
            raise InvalidArgumentError("alt_upper must be positive")

    @property
    def gamma(self) -> float:
        return self.psi.gamma(self.rate)

    def theta(self, u: float) -> float:
        return u / (self.gamma * self.horizon)

    @property
    def a(self) -> float:
        return a_epsilon(self.epsilon)

    @property
    def b(self) -> float:
        if self.b_threshold is not None:
            return float(self.b_threshold)
        return _published(PUBLISHED_B, self.epsilon, "b")

    @property
    def c(self) -> float:
        if self.c_threshold is not None:
            return float(self.c_threshold)
        return _published(PUBLISHED_C, self.epsilon, "c")


def _published(table, epsilon, kind):
    for key, val in table.items():
        if math.isclose(key, epsilon, rel_tol=1e-12):
            return val
    raise InvalidArgumentError(
        f"no published {kind}_eps for epsilon={epsilon}; calibrate it (selfcorrect calibrate) and pass it explicitly")


@dataclass(frozen=True)
class PathStats:
    delta: float
    j: float
    count: int


@dataclass(frozen=True)
class TestVerdict:
    __test__ = False

    reject: bool
    statistic_value: float
    threshold: float


@dataclass(frozen=True)
class MleResult:
    u: float
    loglik: float
    at_boundary: bool


@dataclass(frozen=True)
class SequentialResult:
    verdict: TestVerdict
    tau: float
    statistic: float
    count: int


def _check_path(path: PointProcessPath, config: TestConfig):
    if not (math.isclose(path.rate, config.rate, rel_tol=1e-12)
            and math.isclose(path.horizon, config.horizon, rel_tol=1e-12)):
        raise InvalidArgumentError("path rate/horizon do not match the configuration")


# ---------------------------------------------------------------------------
# kernels on (events, n)


@nb.njit(cache=True, nogil=True)
def _delta_closed(n, rate, horizon):
    st = rate * horizon
    return (n - (n - st) ** 2) / (2.0 * st)


@nb.njit(cache=True, nogil=True)
def _j_exact(events, n, rate, horizon):
    # on [a, b) with X = i the integral of (rate t - i)^2 is ((rate b - i)^3 - (rate a - i)^3) / (3 rate)
    acc = 0.0
    a = 0.0
    for i in range(n + 1):
        b = events[i] if i < n else horizon
        ya = rate * a - i
        yb = rate * b - i
        acc += yb * yb * yb - ya * ya * ya
        a = b
    return acc / (3.0 * rate) / (rate * horizon * horizon)


@nb.njit(cache=True, nogil=True)
def _g(x):
    """expm1(x) - x without cancellation near zero."""
    if abs(x) < 1e-2:
        return 0.5 * x * x * (1.0 + x / 3.0 * (1.0 + x / 4.0 * (1.0 + x / 5.0 * (1.0 + x / 6.0 * (1.0 + x / 7.0)))))
    return np.expm1(x) - x


@nb.njit(cache=True, nogil=True)
def _loglik_exp_direct(events, n, rate, horizon, theta):
    if theta == 0.0:
        return 0.0
    jumps = 0.0
    comp = 0.0
    a = 0.0
    for i in range(n + 1):
        b = events[i] if i < n else horizon
        ya = rate * a - i
        yb = rate * b - i
        comp += _g(theta * yb) - _g(theta * ya)
        if i < n:
            jumps += yb
        a = b
    return theta * jumps - comp / theta


@nb.njit(cache=True, nogil=True)
def _exp_moments(events, n, rate, horizon, kmax):
    """Sum of pre-jump lags and m_k = rate * int y^k dt for k = 1..kmax."""
    m = np.zeros(kmax + 1)
    jumps = 0.0
    ymax = 0.0
    a = 0.0
    for i in range(n + 1):
        b = events[i] if i < n else horizon
        ya = rate * a - i
        yb = rate * b - i
        ymax = max(ymax, abs(ya), abs(yb))
        pa = ya
        pb = yb
        for k in range(1, kmax + 1):
            pa *= ya
            pb *= yb
            m[k] += (pb - pa) / (k + 1)
        if i < n:
            jumps += yb
        a = b
    return jumps, m, ymax


@nb.njit(cache=True, nogil=True)
def _series_terms(r, scale):
    # smallest k with scale * r^(k+1) / (k+1)! * e^r below 1e-12, or -1
    term = scale * np.exp(r)
    for k in range(1, 80):
        term *= r / k
        if term < 1e-12:
            return k
    return -1


@nb.njit(cache=True, nogil=True)
def _loglik_series(theta, jumps, m, kmax):
    acc = 0.0
    p = 1.0
    for k in range(1, kmax + 1):
        p *= theta / k
        acc += p * m[k]
    return theta * jumps - acc


@nb.njit(nogil=True)
def _loglik_quad(events, n, rate, horizon, theta, psi_fn, nodes, weights):
    """Returns (value, ok); ok is False if psi <= 0 at a needed point."""
    if theta == 0.0:
        return 0.0, True
    jumps = 0.0
    comp = 0.0
    a = 0.0
    for i in range(n + 1):
        b = events[i] if i < n else horizon
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        part = 0.0
        for q in range(nodes.shape[0]):
            v = psi_fn(theta * (rate * (mid + half * nodes[q]) - i))
            if not v > 0.0:
                return np.nan, False
            part += weights[q] * (v - 1.0)
        comp += half * part
        if i < n:
            v = psi_fn(theta * (rate * b - i))
            if not v > 0.0:
                return np.nan, False
            jumps += np.log(v)
        a = b
    return jumps - rate * comp, True


@nb.njit(cache=True, nogil=True)
def _eval_exp(u, scale, mode, jumps, m, kmax, events, n, rate, horizon):
    theta = u / scale
    if mode == 0:
        return _loglik_series(theta, jumps, m, kmax)
    return _loglik_exp_direct(events, n, rate, horizon, theta)


@nb.njit(cache=True, nogil=True)
def _mle_exp(events, n, rate, horizon, scale, upper, grid_points, tol):
    """Grid then golden-section maximisation of l(u) on [0, upper], psi = exp.

    ``scale = gamma * T``.  The log-likelihood is evaluated through its power
    series in theta when that series converges fast over the whole range;
    otherwise the closed form is used point by point.
    """
    jumps, m, ymax = _exp_moments(events, n, rate, horizon, 2)
    r = upper / scale * ymax
    kmax = -1
    if r <= 2.0:
        kmax = _series_terms(r, rate * horizon + ymax)
    mode = 1
    if kmax > 0:
        mode = 0
        jumps, m, ymax = _exp_moments(events, n, rate, horizon, kmax)
    step = upper / (grid_points - 1)
    best_k = 0
    best = 0.0  # l(0) = 0
    for k in range(1, grid_points):
        v = _eval_exp(k * step, scale, mode, jumps, m, kmax, events, n, rate, horizon)
        if v > best:
            best = v
            best_k = k
    lo = max(0.0, (best_k - 1) * step)
    hi = min(upper, (best_k + 1) * step)
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = _eval_exp(x1, scale, mode, jumps, m, kmax, events, n, rate, horizon)
    f2 = _eval_exp(x2, scale, mode, jumps, m, kmax, events, n, rate, horizon)
    while hi - lo > tol:
        if f1 >= f2:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = _eval_exp(x1, scale, mode, jumps, m, kmax, events, n, rate, horizon)
        else:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = _eval_exp(x2, scale, mode, jumps, m, kmax, events, n, rate, horizon)
    xg = 0.5 * (lo + hi)
    fg = _eval_exp(xg, scale, mode, jumps, m, kmax, events, n, rate, horizon)
    grid_u = best_k * step
    if fg > best:
        return xg, fg
    return grid_u, best


@nb.njit(nogil=True)
def _mle_quad(events, n, rate, horizon, scale, upper, grid_points, tol, psi_fn, nodes, weights):
    """Same search as ``_mle_exp`` with quadrature likelihoods; ok flag last."""
    step = upper / (grid_points - 1)
    best_k = 0
    best = 0.0
    for k in range(1, grid_points):
        v, ok = _loglik_quad(events, n, rate, horizon, k * step / scale, psi_fn, nodes, weights)
        if not ok:
            return np.nan, np.nan, False
        if v > best:
            best = v
            best_k = k
    lo = max(0.0, (best_k - 1) * step)
    hi = min(upper, (best_k + 1) * step)
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, ok1 = _loglik_quad(events, n, rate, horizon, x1 / scale, psi_fn, nodes, weights)
    f2, ok2 = _loglik_quad(events, n, rate, horizon, x2 / scale, psi_fn, nodes, weights)
    if not (ok1 and ok2):
        return np.nan, np.nan, False
    while hi - lo > tol:
        if f1 >= f2:
            hi = x2
            x2 = x1
            f2 = f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1, ok1 = _loglik_quad(events, n, rate, horizon, x1 / scale, psi_fn, nodes, weights)
        else:
            lo = x1
            x1 = x2
            f1 = f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2, ok1 = _loglik_quad(events, n, rate, horizon, x2 / scale, psi_fn, nodes, weights)
        if not ok1:
            return np.nan, np.nan, False
    xg = 0.5 * (lo + hi)
    fg, ok = _loglik_quad(events, n, rate, horizon, xg / scale, psi_fn, nodes, weights)
    if not ok:
        return np.nan, np.nan, False
    if fg > best:
        return xg, fg, True
    return best_k * step, best, True


@nb.njit(cache=True, nogil=True)
def _stopping(events, n, rate, horizon, d2):
    """First time the information rate * int (rate t - X_t)^2 dt reaches d2.

    Returns (tau, X_tau); tau < 0 if not reached by ``horizon``.
    """
    info = 0.0
    a = 0.0
    for i in range(n + 1):
        b = events[i] if i < n else horizon
        ya = rate * a - i
        yb = rate * b - i
        # rate * int_a^b (rate t - i)^2 dt = (yb^3 - ya^3) / 3
        inc = (yb * yb * yb - ya * ya * ya) / 3.0
        if info + inc >= d2:
            tau = (i + np.cbrt(ya * ya * ya + 3.0 * (d2 - info))) / rate
            tau = min(max(tau, a), b)
            return tau, i
        info += inc
        a = b
    return -1.0, n


# ---------------------------------------------------------------------------
# single-path operations


def path_stats(path: PointProcessPath, config: TestConfig) -> PathStats:
    _check_path(path, config)
    return PathStats(delta_T(path, config), j_T(path, config), path.count)


def delta_T(path: PointProcessPath, config: TestConfig) -> float:
    """Score statistic (X_T - (X_T - rate T)^2) / (2 rate T)."""
    _check_path(path, config)
    return float(_delta_closed(path.count, config.rate, config.horizon))


def delta_T_event_sum(path: PointProcessPath) -> float:
    """The score statistic as (1 / (rate T)) int (rate t - X_{t-}) [dX_t - rate dt]."""
    s, T, ev = path.rate, path.horizon, path.events
    pre = np.arange(ev.size)
    jumps = float(np.sum(s * ev - pre))
    # int_0^T (s t - X_t) dt = s T^2 / 2 - sum_i (T - t_i)
    drift = s * T * T / 2.0 - float(np.sum(T - ev))
    return (jumps - s * drift) / (s * T)


def j_T(path: PointProcessPath, config: TestConfig) -> float:
    """(1 / (rate T^2)) int_0^T (rate t - X_t)^2 dt, integrated exactly."""
    _check_path(path, config)
    return float(_j_exact(path.events, path.count, config.rate, config.horizon))


def _quad_rule(order):
    nodes, weights = leggauss(order)
    return nodes, weights


def log_likelihood(u: float, path: PointProcessPath, config: TestConfig, *,
                   quad_order: int | None = None) -> float:
    """l(u) at theta = u / (gamma T).

    Closed form per inter-event interval for psi = exp; otherwise (or when
    ``quad_order`` is given) Gauss-Legendre quadrature of that order.
    """
    _check_path(path, config)
    if not u >= 0:
        raise InvalidArgumentError("u must be >= 0")
    if u == 0:
        return 0.0
    theta = config.theta(u)
    if config.psi.exact_integrable and quad_order is None:
        return float(_loglik_exp_direct(path.events, path.count, config.rate, config.horizon, theta))
    nodes, weights = _quad_rule(quad_order or QUAD_ORDER)
    val, ok = _loglik_quad(path.events, path.count, config.rate, config.horizon, theta,
                           config.psi.value, nodes, weights)
    if not ok:
        raise DomainError(f"psi is not positive along the path at u={u}")
    return float(val)


def surrogate_loglik(u, delta: float, j: float):
    """Quadratic approximation u * Delta - u^2 J / 2."""
    return u * delta - 0.5 * np.square(u) * j


def surrogate_argmax(delta: float, j: float, upper: float = math.inf) -> float:
    """Maximiser of the quadratic approximation over [0, upper]."""
    if delta <= 0:
        return 0.0
    if j <= 0:
        return upper
    return min(delta / j, upper)


def mle_fit(path: PointProcessPath, config: TestConfig) -> MleResult:
    """Maximum of l(u) over the closure of [0, alt_upper)."""
    _check_path(path, config)
    upper = config.alt_upper
    if not math.isfinite(upper):
        raise InvalidArgumentError("the alternative set must be bounded to search for the MLE")
    scale = config.gamma * config.horizon
    if config.psi.exact_integrable:
        u, val = _mle_exp(path.events, path.count, config.rate, config.horizon, scale, upper,
                          GRID_POINTS, MLE_TOL)
    else:
        nodes, weights = _quad_rule(QUAD_ORDER)
        u, val, ok = _mle_quad(path.events, path.count, config.rate, config.horizon, scale, upper,
                               GRID_POINTS, MLE_TOL, config.psi.value, nodes, weights)
        if not ok:
            raise DomainError("psi is not positive along the path")
    return MleResult(float(u), float(val), bool(u == 0.0 or u == upper))


def mle_u(path: PointProcessPath, config: TestConfig) -> float:
    return mle_fit(path, config).u


def score_test(path: PointProcessPath, config: TestConfig) -> TestVerdict:
    stat = delta_T(path, config)
    thr = config.a
    return TestVerdict(stat > thr, stat, thr)


def lr_test(path: PointProcessPath, config: TestConfig) -> TestVerdict:
    """Reject when sup over the alternative set of l(u) exceeds b_eps^2."""
    stat = mle_fit(path, config).loglik
    thr = config.b ** 2
    return TestVerdict(stat > thr, stat, thr)


def wald_test(path: PointProcessPath, config: TestConfig) -> TestVerdict:
    """Reject when the reparametrised MLE gamma T theta_hat reaches c_eps."""
    stat = mle_u(path, config)
    thr = config.c
    return TestVerdict(stat >= thr, stat, thr)


def sequential_statistic(events: np.ndarray, rate: float, d_bound: float,
                         horizon: float) -> tuple[float, float, int] | None:
    """(tau_D, Delta_tau, X_tau) for an event list observed on [0, horizon], or None."""
    events = np.asarray(events, dtype=np.float64)
    tau, x = _stopping(events, events.size, rate, horizon, d_bound * d_bound)
    if tau < 0:
        return None
    pi = x - rate * tau
    return float(tau), (x - pi * pi) / (2.0 * d_bound), int(x)


def sequential_score_test(psi: PsiSpec, theta: float, rate: float, d_bound: float, epsilon: float,
                          stream: rng.RngStream, *, cap: float | None = None) -> SequentialResult:
    """Observe until the information reaches D^2, reject when Delta_tau > z_eps.

    The path is simulated on a horizon that doubles until the stopping time
    falls inside it; the samplers extend paths consistently, so the stopped
    path does not depend on the initial horizon.
    """
    if not d_bound > 0:
        raise InvalidArgumentError("d_bound must be positive")
    if not theta >= 0:
        raise InvalidArgumentError("theta must be >= 0")
    if not rate > 0:
        raise InvalidArgumentError("rate must be positive")
    thr = z_upper(check_epsilon(epsilon))
    # tau_D grows like D for large D but like D^(2/3) as D -> 0, so the cap never drops below 10^3 / rate
    cap = 1e3 * max(d_bound ** 2, 1.0) / rate if cap is None else float(cap)
    horizon = min(cap, 2.0 * math.sqrt(2.0) * d_bound / rate + 1.0 / rate)
    while True:
        events = _sample_events(psi, stream.state(rng.DOMAIN_SEQUENTIAL), float(theta), float(rate), horizon)
        found = sequential_statistic(events, rate, d_bound, horizon)
        if found is not None:
            tau, stat, x = found
            return SequentialResult(TestVerdict(stat > thr, stat, thr), tau, stat, x)
        if horizon >= cap:
            raise StoppingTimeoutError(f"information did not reach D^2 = {d_bound ** 2} before t = {cap}")
        horizon = min(cap, 2.0 * horizon)


# ---------------------------------------------------------------------------
# batches


@nb.njit(cache=True, nogil=True)
def _finite_exp_range(seed, lo, hi, theta, rate, horizon, scale, upper, with_mle):
    m = hi - lo
    counts = np.empty(m, dtype=np.int64)
    delta = np.empty(m)
    jt = np.empty(m)
    uhat = np.full(m, np.nan)
    lmax = np.full(m, np.nan)
    buf = np.empty(int(2 * rate * horizon) + 64)
    for j in range(m):
        st = rng.stream_state(seed, np.uint64(lo + j), np.uint64(rng.DOMAIN_POINT_PROCESS))
        buf, n = sc_exp_events(st, theta, rate, horizon, buf)
        counts[j] = n
        delta[j] = _delta_closed(n, rate, horizon)
        jt[j] = _j_exact(buf, n, rate, horizon)
        if with_mle:
            uhat[j], lmax[j] = _mle_exp(buf, n, rate, horizon, scale, upper, GRID_POINTS, MLE_TOL)
    return counts, delta, jt, uhat, lmax


@nb.njit(nogil=True)
def _finite_quad_range(seed, lo, hi, psi_fn, bound_fn, theta, rate, horizon, scale, upper, with_mle,
                       nodes, weights):
    m = hi - lo
    counts = np.empty(m, dtype=np.int64)
    delta = np.empty(m)
    jt = np.empty(m)
    uhat = np.full(m, np.nan)
    lmax = np.full(m, np.nan)
    buf = np.empty(int(2 * rate * horizon) + 64)
    for j in range(m):
        st = rng.stream_state(seed, np.uint64(lo + j), np.uint64(rng.DOMAIN_POINT_PROCESS))
        buf, n = sc_thinning_events(st, psi_fn, bound_fn, theta, rate, horizon, buf)
        counts[j] = n
        if n < 0:
            continue
        delta[j] = _delta_closed(n, rate, horizon)
        jt[j] = _j_exact(buf, n, rate, horizon)
        if with_mle:
            uhat[j], lmax[j], _ = _mle_quad(buf, n, rate, horizon, scale, upper, GRID_POINTS, MLE_TOL,
                                            psi_fn, nodes, weights)
    return counts, delta, jt, uhat, lmax


@dataclass
class FiniteBatch:
    """Per-path statistics of a batch of simulated paths."""

    counts: np.ndarray
    delta: np.ndarray
    j: np.ndarray
    mle_u: np.ndarray
    l_at_mle: np.ndarray

    def verdicts(self, config: TestConfig) -> dict[str, np.ndarray]:
        out = {"score": self.delta > config.a}
        if not np.all(np.isnan(self.mle_u)):
            out["lr"] = self.l_at_mle > config.b ** 2
            out["wald"] = self.mle_u >= config.c
        return out


def finite_batch(config: TestConfig, u: float, master_seed: int, count: int, *, with_mle: bool = True,
                 start: int = 0, workers: int = 1) -> FiniteBatch:
    """Simulate ``count`` paths at local alternative u and compute their statistics.

    Trajectory j uses stream (master_seed, start + j); the same streams are
    reused for every u (common random numbers).
    """
    if not u >= 0:
        raise InvalidArgumentError("u must be >= 0")
    from .simulate import _check_sc
    _check_sc(config.psi, 0.0, config.rate, config.horizon)
    if with_mle and not math.isfinite(config.alt_upper):
        raise InvalidArgumentError("the alternative set must be bounded to search for the MLE")
    seed = np.uint64(master_seed)
    theta = config.theta(u)
    scale = config.gamma * config.horizon
    upper = float(config.alt_upper) if math.isfinite(config.alt_upper) else 1.0
    common = (float(theta), float(config.rate), float(config.horizon), float(scale), upper, bool(with_mle))
    if config.psi.exact_integrable:
        def fn(lo, hi):
            return _finite_exp_range(seed, start + lo, start + hi, *common)
    else:
        nodes, weights = _quad_rule(QUAD_ORDER)
        psi = config.psi

        def fn(lo, hi):
            return _finite_quad_range(seed, start + lo, start + hi, psi.value, psi.local_bound,
                                      *common, nodes, weights)
    counts, delta, jt, uhat, lmax = map_ranges(fn, count, workers, chunk=4096)
    if np.any(counts < 0):
        from .exceptions import BoundViolationError
        raise BoundViolationError(f"psi exceeded its local bound (psi={config.psi.name})")
    if with_mle and np.any(np.isnan(uhat)):
        raise DomainError("psi is not positive along a simulated path")
    return FiniteBatch(counts, delta, jt, uhat, lmax)


def write_stats_csv(batch: FiniteBatch, config: TestConfig, target: str | Path, *, start: int = 0) -> None:
    verdicts = batch.verdicts(config)
    cols = ["path_id", "count", "delta", "j", "mle_u", "l_at_mle", "score_reject", "lr_reject", "wald_reject"]
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for k in range(batch.counts.size):
            w.writerow([
                start + k, int(batch.counts[k]), repr(float(batch.delta[k])), repr(float(batch.j[k])),
                repr(float(batch.mle_u[k])), repr(float(batch.l_at_mle[k])),
                int(verdicts["score"][k]),
                int(verdicts["lr"][k]) if "lr" in verdicts else "",
                int(verdicts["wald"][k]) if "wald" in verdicts else "",
            ])
