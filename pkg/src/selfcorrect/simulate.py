"""Exact sample paths: Poisson, self-correcting, Wiener and Ornstein-Uhlenbeck.

Single-path functions return small dataclasses; the ``*_batch`` functions run
compiled kernels over a range of trajectory indices and return only the
summaries the Monte Carlo studies need, without storing paths.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np

from . import rng
from .exceptions import BoundViolationError, InvalidArgumentError
from .parallel import map_ranges
from .psi import PsiSpec


@dataclass(frozen=True)
class PointProcessPath:
    rate: float
    horizon: float
    events: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=np.float64)
        object.__setattr__(self, "events", ev)
        if not (self.rate > 0 and self.horizon > 0):
            raise InvalidArgumentError("rate and horizon must be positive")
        if ev.ndim != 1:
            raise InvalidArgumentError("events must be one-dimensional")
        if ev.size:
            if ev[0] <= 0 or ev[-1] > self.horizon:
                raise InvalidArgumentError("events must lie in (0, horizon]")
            if np.any(np.diff(ev) <= 0):
                raise InvalidArgumentError("events must be strictly increasing")

    @property
    def count(self) -> int:
        return int(self.events.size)

    def counting(self, t) -> np.ndarray:
        """X_t, right-continuous."""
        return np.searchsorted(self.events, t, side="right")

    def centered(self, t) -> np.ndarray:
        """pi_t = X_t - rate * t."""
        return self.counting(t) - self.rate * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class WienerPath:
    n_steps: int
    values: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_steps + 1)


@dataclass(frozen=True)
class OuPath:
    drift: float
    n_steps: int
    values: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_steps + 1)


# ---------------------------------------------------------------------------
# kernels


@nb.njit(cache=True, nogil=True)
def _ou_coefficients(u, h):
    if u == 0.0:
        return 1.0, np.sqrt(h)
    return np.exp(-u * h), np.sqrt(-np.expm1(-2.0 * u * h) / (2.0 * u))


@nb.njit(cache=True, nogil=True)
def _ou_fill(st, u, n_steps, scale, out):
    # u = 0 gives the Wiener random walk with N(0, h) increments
    a, sd = _ou_coefficients(u, 1.0 / n_steps)
    sd *= scale
    y = 0.0
    out[0] = 0.0
    k = 1
    while k <= n_steps:
        z0, z1 = rng.next_normal_pair(st)
        y = a * y + sd * z0
        out[k] = y
        if k + 1 <= n_steps:
            y = a * y + sd * z1
            out[k + 1] = y
        k += 2


@nb.njit(cache=True, nogil=True)
def _ou_summary(st, u, n_steps):
    """Endpoint and trapezoidal integral of the square, path not stored."""
    h = 1.0 / n_steps
    a, sd = _ou_coefficients(u, h)
    y = 0.0
    acc = 0.0
    k = 1
    while k <= n_steps:
        z0, z1 = rng.next_normal_pair(st)
        y = a * y + sd * z0
        acc += y * y
        if k + 1 <= n_steps:
            y = a * y + sd * z1
            acc += y * y
        k += 2
    # trapezoid: interior points weight 1, the endpoint 1/2, Y(0) = 0
    return y, h * (acc - 0.5 * y * y)


@nb.njit(cache=True, nogil=True)
def _ou_summary_range(seed, lo, hi, u, n_steps, domain):
    m = hi - lo
    end = np.empty(m)
    energy = np.empty(m)
    for j in range(m):
        st = rng.stream_state(seed, np.uint64(lo + j), domain)
        end[j], energy[j] = _ou_summary(st, u, n_steps)
    return end, energy


@nb.njit(cache=True, nogil=True)
def _grow(buf):
    new = np.empty(2 * buf.shape[0] + 16)
    new[: buf.shape[0]] = buf
    return new


@nb.njit(cache=True, nogil=True)
def sc_exp_events(st, theta, rate, horizon, buf):
    """Self-correcting path with psi = exp by inverting the compensator.

    Between events the count is fixed at ``i`` and the intensity is
    ``rate * exp(x0 + theta * rate * s)``; the next inter-event time solves
    ``exp(x0) * expm1(theta * rate * dt) / theta = E`` with E ~ Exp(1).
    With ``theta = 0`` this is the Poisson recursion, draw for draw.
    Returns ``(buf, n)``; ``buf`` may have been reallocated.
    """
    t = 0.0
    i = 0
    # q = exp(-x0) at the current event, updated multiplicatively and
    # recomputed every 64 events to stop rounding drift
    q = 1.0
    growth = np.exp(theta)
    while True:
        e = rng.next_exponential(st)
        if theta == 0.0:
            dt = e / rate
        else:
            if i & 63 == 0:
                q = np.exp(-theta * (rate * t - i))
            step = theta * e * q
            dt = np.log1p(step) / (theta * rate)
            q = q * growth / (1.0 + step)
        t += dt
        if t > horizon:
            return buf, i
        if i == buf.shape[0]:
            buf = _grow(buf)
        buf[i] = t
        i += 1


@nb.njit(nogil=True)
def sc_thinning_events(st, psi_fn, bound_fn, theta, rate, horizon, buf):
    """Ogata thinning over adaptive windows.

    The window length starts at two expected inter-event times and is halved
    until the bound over the window is at most four times the current
    intensity.  Windows do not depend on ``horizon``, so a longer horizon
    extends the same path.  Returns ``(buf, n)`` with ``n = -1`` if psi exceeded its
    bound at a proposed point.
    """
    t = 0.0
    i = 0
    while t < horizon:
        x_now = theta * (rate * t - i)
        lam = rate * psi_fn(x_now)
        delta = 2.0 / lam if lam > 0.0 else 1.0 / rate
        bound = rate * bound_fn(x_now, theta * (rate * (t + delta) - i))
        while bound > 4.0 * lam and delta > 1e-12:
            delta *= 0.5
            bound = rate * bound_fn(x_now, theta * (rate * (t + delta) - i))
        if bound <= 0.0:
            t += delta
            continue
        w = rng.next_exponential(st) / bound
        if w > delta:
            t += delta
            continue
        t += w
        if t > horizon:
            break
        lam_t = rate * psi_fn(theta * (rate * t - i))
        if lam_t > bound * (1.0 + 1e-12):
            return buf, -1
        if rng.next_double(st) * bound < lam_t:
            if i == buf.shape[0]:
                buf = _grow(buf)
            buf[i] = t
            i += 1
    return buf, i


@nb.njit(cache=True, nogil=True)
def _sc_exp_counts_range(seed, lo, hi, theta, rate, horizon):
    m = hi - lo
    counts = np.empty(m, dtype=np.int64)
    buf = np.empty(int(2 * rate * horizon) + 64)
    for j in range(m):
        st = rng.stream_state(seed, np.uint64(lo + j), np.uint64(rng.DOMAIN_POINT_PROCESS))
        buf, n = sc_exp_events(st, theta, rate, horizon, buf)
        counts[j] = n
    return (counts,)


@nb.njit(nogil=True)
def _sc_thinning_counts_range(seed, lo, hi, psi_fn, bound_fn, theta, rate, horizon):
    m = hi - lo
    counts = np.empty(m, dtype=np.int64)
    buf = np.empty(int(2 * rate * horizon) + 64)
    for j in range(m):
        st = rng.stream_state(seed, np.uint64(lo + j), np.uint64(rng.DOMAIN_POINT_PROCESS))
        buf, n = sc_thinning_events(st, psi_fn, bound_fn, theta, rate, horizon, buf)
        counts[j] = n
    return (counts,)


# ---------------------------------------------------------------------------
# single paths


def _check_steps(n_steps):
    if int(n_steps) != n_steps or n_steps < 2:
        raise InvalidArgumentError("n_steps must be an integer >= 2")


def simulate_wiener(n_steps: int, stream: rng.RngStream, *, noise_scale: float = 1.0) -> WienerPath:
    """Gaussian random walk on the grid k / n_steps.

    ``noise_scale`` multiplies every increment; 0 gives the degenerate
    all-zero path used in tests.
    """
    _check_steps(n_steps)
    out = np.empty(n_steps + 1)
    _ou_fill(stream.state(rng.DOMAIN_WIENER), 0.0, n_steps, float(noise_scale), out)
    return WienerPath(int(n_steps), out)


def simulate_ou(u: float, n_steps: int, stream: rng.RngStream) -> OuPath:
    """dY = -u Y ds + dW on [0, 1], Y(0) = 0, by the exact Gaussian transition."""
    if not u >= 0:
        raise InvalidArgumentError("OU drift u must be >= 0")
    _check_steps(n_steps)
    out = np.empty(n_steps + 1)
    _ou_fill(stream.state(rng.DOMAIN_OU), float(u), n_steps, 1.0, out)
    return OuPath(float(u), int(n_steps), out)


def simulate_poisson(rate: float, horizon: float, stream: rng.RngStream) -> PointProcessPath:
    if not (rate > 0 and horizon > 0):
        raise InvalidArgumentError("rate and horizon must be positive")
    buf = np.empty(int(2 * rate * horizon) + 64)
    buf, n = sc_exp_events(stream.state(rng.DOMAIN_POINT_PROCESS), 0.0, float(rate), float(horizon), buf)
    return PointProcessPath(float(rate), float(horizon), buf[:n].copy())


def _sample_events(psi: PsiSpec, st, theta, rate, horizon):
    buf = np.empty(int(2 * rate * horizon) + 64)
    if psi.exact_integrable:
        buf, n = sc_exp_events(st, theta, rate, horizon, buf)
    else:
        buf, n = sc_thinning_events(st, psi.value, psi.local_bound, theta, rate, horizon, buf)
        if n < 0:
            raise BoundViolationError(f"psi exceeded its local bound (psi={psi.name}, theta={theta})")
    return buf[:n].copy()


def _check_sc(psi, theta, rate, horizon):
    if not theta >= 0:
        raise InvalidArgumentError("theta must be >= 0")
    if not (rate > 0 and horizon > 0):
        raise InvalidArgumentError("rate and horizon must be positive")
    if psi.exact_integrable and psi.name != "exp":
        raise InvalidArgumentError("closed-form sampling is only available for psi = exp")


def simulate_self_correcting(psi: PsiSpec, theta: float, rate: float, horizon: float,
                             stream: rng.RngStream) -> PointProcessPath:
    """Point process with intensity rate * psi(theta * (rate * t - X_t))."""
    _check_sc(psi, theta, rate, horizon)
    events = _sample_events(psi, stream.state(rng.DOMAIN_POINT_PROCESS), float(theta), float(rate), float(horizon))
    return PointProcessPath(float(rate), float(horizon), events)


# ---------------------------------------------------------------------------
# batches


def wiener_summary_batch(master_seed: int, count: int, n_steps: int, *, start: int = 0,
                         workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """W(1) and the trapezoidal integral of W^2 for trajectories start..start+count-1."""
    _check_steps(n_steps)
    seed = np.uint64(master_seed)
    dom = np.uint64(rng.DOMAIN_WIENER)
    return map_ranges(lambda lo, hi: _ou_summary_range(seed, start + lo, start + hi, 0.0, n_steps, dom),
                      count, workers)


def ou_summary_batch(u: float, master_seed: int, count: int, n_steps: int, *, start: int = 0,
                     workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Y(1) and the trapezoidal integral of Y^2 for OU paths at drift u."""
    if not u >= 0:
        raise InvalidArgumentError("OU drift u must be >= 0")
    _check_steps(n_steps)
    seed = np.uint64(master_seed)
    dom = np.uint64(rng.DOMAIN_OU)
    return map_ranges(lambda lo, hi: _ou_summary_range(seed, start + lo, start + hi, float(u), n_steps, dom),
                      count, workers)


def counts_batch(psi: PsiSpec, theta: float, rate: float, horizon: float, master_seed: int,
                 count: int, *, start: int = 0, workers: int = 1) -> np.ndarray:
    """X_T for many self-correcting paths (theta = 0 is the Poisson case)."""
    _check_sc(psi, theta, rate, horizon)
    seed = np.uint64(master_seed)
    args = (float(theta), float(rate), float(horizon))
    if psi.exact_integrable:
        def fn(lo, hi):
            return _sc_exp_counts_range(seed, start + lo, start + hi, *args)
    else:
        def fn(lo, hi):
            return _sc_thinning_counts_range(seed, start + lo, start + hi, psi.value, psi.local_bound, *args)
    (counts,) = map_ranges(fn, count, workers)
    if np.any(counts < 0):
        raise BoundViolationError(f"psi exceeded its local bound (psi={psi.name}, theta={theta})")
    return counts


# ---------------------------------------------------------------------------
# dumps


def write_events_csv(path: PointProcessPath, target: str | Path) -> None:
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "time"])
        for i, t in enumerate(path.events, start=1):
            w.writerow([i, repr(float(t))])


def write_continuous_csv(path: WienerPath | OuPath, target: str | Path) -> None:
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "value"])
        for s, v in zip(path.grid, path.values):
            w.writerow([repr(float(s)), repr(float(v))])
