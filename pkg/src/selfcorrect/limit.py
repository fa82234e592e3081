"""Limit experiment: Wiener functionals, thresholds and limiting powers.

Under the null the limit log-likelihood ratio is ``u * Delta - u^2 J / 2``
with ``Delta = (1 - W(1)^2) / 2`` and ``J = int_0^1 W(s)^2 ds``.  Powers under
the alternative u are obtained by weighting null trajectories with
``Z(u) = exp(u Delta - u^2 J / 2)``, or directly from Ornstein-Uhlenbeck
paths with drift u as a cross-check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import norm

from .exceptions import DegeneratePathError, InvalidArgumentError, SchemaError
from .simulate import WienerPath, ou_summary_batch, wiener_summary_batch
from .thresholds import a_epsilon, check_epsilon, h_of_u, limit_power_score  # noqa: F401 - re-exported

TESTS = ("score", "lr", "wald")
DEFAULT_STEPS = 10_000
MIN_CALIBRATION_PATHS = 10_000


@dataclass(frozen=True)
class StatSummary:
    delta: float
    j: float

    @property
    def lambda_(self) -> float:
        if self.j <= 0:
            raise DegeneratePathError("J(W) = 0: the likelihood-ratio statistic is undefined")
        return self.delta / math.sqrt(2.0 * self.j)

    @property
    def gamma(self) -> float:
        if self.j <= 0:
            raise DegeneratePathError("J(W) = 0: the Wald statistic is undefined")
        return self.delta / self.j


def trapezoid_energy(values: np.ndarray) -> float:
    """Trapezoidal integral over [0, 1] of the squared path values."""
    sq = np.square(np.asarray(values, dtype=float))
    h = 1.0 / (sq.size - 1)
    return float(h * (sq[1:-1].sum() + 0.5 * (sq[0] + sq[-1])))


def wiener_functionals(w: WienerPath) -> StatSummary:
    """Delta from the endpoint (no discretised stochastic integral), J by the trapezoid rule."""
    end = float(w.values[-1])
    j = trapezoid_energy(w.values)
    if j <= 0:
        raise DegeneratePathError("all-zero path: J(W) = 0")
    return StatSummary((1.0 - end * end) / 2.0, j)


def z_of_u(u, summary: StatSummary):
    """Limit likelihood ratio exp(u Delta - u^2 J / 2); underflows to 0."""
    if np.any(np.asarray(u) < 0):
        raise InvalidArgumentError("u must be >= 0")
    with np.errstate(under="ignore"):
        return np.exp(u * summary.delta - 0.5 * np.square(u) * summary.j)


@dataclass
class WienerEnsemble:
    """Delta(W) and J(W) of M null trajectories, all from one master seed."""

    delta: np.ndarray
    j: np.ndarray
    n_steps: int
    seed: int
    resampled: int = 0

    @property
    def size(self) -> int:
        return int(self.delta.size)

    @property
    def lam(self) -> np.ndarray:
        return self.delta / np.sqrt(2.0 * self.j)

    @property
    def gam(self) -> np.ndarray:
        return self.delta / self.j

    def log_z(self, u: float) -> np.ndarray:
        return u * self.delta - 0.5 * u * u * self.j

    def statistic(self, kind: str) -> np.ndarray:
        if kind in ("lambda", "lr", "b"):
            return self.lam
        if kind in ("gamma", "wald", "c"):
            return self.gam
        if kind in ("delta", "score", "a"):
            return self.delta
        if kind in ("e", "j"):
            return self.j
        raise InvalidArgumentError(f"unknown statistic {kind!r}")

    def save(self, target: str | Path) -> None:
        np.savez(target, delta=self.delta, j=self.j, n_steps=self.n_steps, seed=self.seed,
                 resampled=self.resampled)

    @classmethod
    def load(cls, source: str | Path) -> "WienerEnsemble":
        with np.load(source) as z:
            return cls(z["delta"], z["j"], int(z["n_steps"]), int(z["seed"]), int(z["resampled"]))


def simulate_ensemble(M: int, n_steps: int = DEFAULT_STEPS, seed: int = 0, *, workers: int = 1) -> WienerEnsemble:
    """Null trajectories 0..M-1; a path with J = 0 is replaced by the next unused stream."""
    if M < 1:
        raise InvalidArgumentError("M must be positive")
    end, j = wiener_summary_batch(seed, M, n_steps, workers=workers)
    resampled = 0
    bad = np.flatnonzero(j <= 0)
    next_stream = M
    while bad.size:
        e2, j2 = wiener_summary_batch(seed, bad.size, n_steps, start=next_stream)
        next_stream += bad.size
        resampled += bad.size
        end[bad], j[bad] = e2, j2
        bad = bad[j2 <= 0]
    return WienerEnsemble((1.0 - end * end) / 2.0, j, n_steps, seed, resampled)


# ---------------------------------------------------------------------------
# thresholds


def _rank(p: float, M: int) -> int:
    """1-based ascending rank of the empirical p-quantile."""
    return min(M, max(1, math.ceil(p * M - 1e-9)))


@dataclass(frozen=True)
class QuantileEstimate:
    value: float
    ci_low: float
    ci_high: float


def order_statistic(sample: np.ndarray, p: float, *, level: float = 0.95) -> QuantileEstimate:
    """Empirical p-quantile with a distribution-free order-statistic CI."""
    x = np.asarray(sample)
    M = x.size
    k = _rank(p, M)
    half = norm.isf((1 - level) / 2) * math.sqrt(M * p * (1 - p))
    lo_k = max(1, int(math.floor(k - half)))
    hi_k = min(M, int(math.ceil(k + half)))
    ranks = sorted({k - 1, lo_k - 1, hi_k - 1})
    part = np.partition(x, ranks)
    return QuantileEstimate(float(part[k - 1]), float(part[lo_k - 1]), float(part[hi_k - 1]))


_KIND_PROB = {
    "lambda": lambda eps: 1.0 - eps,
    "gamma": lambda eps: 1.0 - eps,
    "e": lambda eps: eps,
}


def calibrate_from(ensemble: WienerEnsemble, kind: str, epsilon: float) -> QuantileEstimate:
    """b (kind 'lambda'), c ('gamma') or e ('e') from an existing ensemble."""
    if kind not in _KIND_PROB:
        raise InvalidArgumentError(f"kind must be one of {sorted(_KIND_PROB)}")
    check_epsilon(epsilon)
    return order_statistic(ensemble.statistic(kind), _KIND_PROB[kind](epsilon))


def calibrate_threshold(kind: str, epsilon: float, M: int, n_steps: int = DEFAULT_STEPS, seed: int = 0,
                        *, workers: int = 1) -> float:
    """Simulate M Wiener paths and return the empirical threshold of the given kind."""
    if M < MIN_CALIBRATION_PATHS:
        raise InvalidArgumentError(f"calibration needs M >= {MIN_CALIBRATION_PATHS}")
    ens = simulate_ensemble(M, n_steps, seed, workers=workers)
    return calibrate_from(ens, kind, epsilon).value


@dataclass
class ThresholdTable:
    kind: str
    entries: dict = field(default_factory=dict)
    ci: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def rows(self):
        for key in sorted(self.entries, key=lambda k: k if isinstance(k, tuple) else (k,)):
            eps, u = key if isinstance(key, tuple) else (key, None)
            lo, hi = self.ci.get(key, (math.nan, math.nan))
            yield self.kind, eps, u, self.entries[key], lo, hi


def threshold_tables(ensemble: WienerEnsemble, epsilons: Iterable[float],
                     d_grid: Iterable[float] = ()) -> dict[str, ThresholdTable]:
    """a (closed form), b, c, e and optionally d(u) tables from one ensemble."""
    meta = {"M": ensemble.size, "n_steps": ensemble.n_steps, "seed": ensemble.seed}
    tables = {k: ThresholdTable(k, meta=dict(meta)) for k in ("a", "b", "c", "e")}
    tables["a"].meta = {"M": 0, "n_steps": 0, "seed": 0}
    d_grid = list(d_grid)
    if d_grid:
        tables["d"] = ThresholdTable("d", meta=dict(meta))
    for eps in epsilons:
        eps = check_epsilon(eps)
        tables["a"].entries[eps] = a_epsilon(eps)
        for kind, name in (("lambda", "b"), ("gamma", "c"), ("e", "e")):
            est = calibrate_from(ensemble, kind, eps)
            tables[name].entries[eps] = est.value
            tables[name].ci[eps] = (est.ci_low, est.ci_high)
        for u in d_grid:
            if u > 0:
                est = order_statistic(ensemble.log_z(u), 1.0 - eps)
                tables["d"].entries[(eps, float(u))] = est.value
                tables["d"].ci[(eps, float(u))] = (est.ci_low, est.ci_high)
    return tables


THRESHOLD_COLUMNS = ["kind", "epsilon", "u_or_blank", "threshold", "M", "n_steps", "seed", "ci_low", "ci_high"]


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_thresholds_csv(tables: Mapping[str, ThresholdTable], target: str | Path) -> None:
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(THRESHOLD_COLUMNS)
        for name in ("a", "b", "c", "e", "d"):
            if name not in tables:
                continue
            t = tables[name]
            for kind, eps, u, val, lo, hi in t.rows():
                w.writerow([kind, _fmt(eps), _fmt(u), _fmt(val), t.meta["M"], t.meta["n_steps"], t.meta["seed"],
                            "" if math.isnan(lo) else _fmt(lo), "" if math.isnan(hi) else _fmt(hi)])


def read_thresholds_csv(source: str | Path) -> dict[str, ThresholdTable]:
    tables: dict[str, ThresholdTable] = {}
    with open(source, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in THRESHOLD_COLUMNS[:7] if c not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"threshold CSV lacks column {missing[0]!r}")
        for row in reader:
            kind = row["kind"]
            t = tables.setdefault(kind, ThresholdTable(kind, meta={
                "M": int(row["M"]), "n_steps": int(row["n_steps"]), "seed": int(row["seed"])}))
            eps = float(row["epsilon"])
            key = (eps, float(row["u_or_blank"])) if row["u_or_blank"] else eps
            t.entries[key] = float(row["threshold"])
            if row.get("ci_low"):
                t.ci[key] = (float(row["ci_low"]), float(row["ci_high"]))
    return tables


# ---------------------------------------------------------------------------
# powers


def _indicator(ensemble_like, test: str, epsilon: float, thresholds: Mapping[str, float]) -> np.ndarray:
    if test == "score":
        return ensemble_like.delta > a_epsilon(epsilon)
    if test == "lr":
        return ensemble_like.lam > thresholds["b"]
    if test == "wald":
        return ensemble_like.gam > thresholds["c"]
    raise InvalidArgumentError(f"unknown test {test!r}")


def _weighted_mean(summand: np.ndarray) -> tuple[float, float]:
    M = summand.size
    return float(summand.mean()), float(summand.std(ddof=1) / math.sqrt(M))


def control_variate_mean(summand: np.ndarray, z: np.ndarray) -> tuple[float, float]:
    """Mean of ``summand`` adjusted by the zero-mean control ``Z - 1``.

    The coefficient is the least-squares slope of the summand on Z, so the
    plain mean (slope 0) and the complement ``1 - mean(Z 1{accept})`` (slope 1)
    are special cases.  This matters at large u, where Z is heavy tailed.
    """
    M = summand.size
    control = z - 1.0
    centred = control - control.mean()
    var = float(np.dot(centred, centred))
    beta = 0.0
    if var > 0 and math.isfinite(var):
        beta = float(np.dot(summand - summand.mean(), centred) / var)
    adjusted = summand - beta * control
    return float(adjusted.mean()), float(adjusted.std(ddof=1) / math.sqrt(M))


def effective_sample_size(weights: np.ndarray) -> float:
    s2 = float(np.sum(np.square(weights)))
    return float(np.sum(weights)) ** 2 / s2 if s2 > 0 else 0.0


def limit_power_reweighted(test: str, u: float, epsilon: float, thresholds: Mapping[str, float],
                           ensemble: WienerEnsemble) -> tuple[float, float]:
    """(1/M) sum_j Z_j(u) 1{statistic_j > threshold}, control-variate adjusted, and its stderr."""
    if not u >= 0:
        raise InvalidArgumentError("u must be >= 0")
    ind = _indicator(ensemble, test, epsilon, thresholds)
    with np.errstate(under="ignore"):
        z = np.exp(ensemble.log_z(u))
    return control_variate_mean(z * ind, z)


def np_envelope(u: float, epsilon: float, ensemble: WienerEnsemble) -> tuple[float, float, float]:
    """Neyman-Pearson power at u: (power, stderr, d_eps(u)).

    d_eps(u) is the empirical (1 - eps)-quantile of ln Z_j(u) over the same
    trajectories.  At u = 0 the statistic is constant and the power is eps.
    """
    check_epsilon(epsilon)
    if not u >= 0:
        raise InvalidArgumentError("u must be >= 0")
    if u == 0:
        return float(epsilon), 0.0, 0.0
    logz = ensemble.log_z(u)
    d = order_statistic(logz, 1.0 - epsilon).value
    with np.errstate(under="ignore"):
        z = np.exp(logz)
    power, se = control_variate_mean(z * (logz > d), z)
    return power, se, d


@dataclass(frozen=True)
class OuSummary:
    delta: np.ndarray
    j: np.ndarray

    @property
    def lam(self) -> np.ndarray:
        return self.delta / np.sqrt(2.0 * self.j)

    @property
    def gam(self) -> np.ndarray:
        return self.delta / self.j


def ou_statistics(u: float, M: int, n_steps: int, seed: int, *, workers: int = 1) -> OuSummary:
    end, j = ou_summary_batch(u, seed, M, n_steps, workers=workers)
    return OuSummary((1.0 - end * end) / 2.0, j)


def ou_cross_check(test: str, u: float, epsilon: float, thresholds: Mapping[str, float], M: int,
                   seed: int, n_steps: int = DEFAULT_STEPS, *, workers: int = 1) -> tuple[float, float]:
    """Direct power estimate from M OU paths with drift u (no reweighting)."""
    hits = _indicator(ou_statistics(u, M, n_steps, seed, workers=workers), test, epsilon, thresholds)
    p = float(hits.mean())
    return p, math.sqrt(max(p * (1 - p), 0.0) / M)


@dataclass
class PowerCurve:
    test: str
    epsilon: float
    points: list = field(default_factory=list)  # (u, power, stderr)
    M: int = 0

    @property
    def u(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def power(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def stderr(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


def limit_power_curves(ensemble: WienerEnsemble, epsilon: float, u_grid: Iterable[float],
                       thresholds: Mapping[str, float] | None = None) -> dict[str, PowerCurve]:
    """Score (closed form), LR, Wald (reweighted) and NP curves on one ensemble.

    Thresholds default to the ensemble's own b and c, so every curve starts
    at exactly eps empirically.
    """
    check_epsilon(epsilon)
    if thresholds is None:
        thresholds = {"b": calibrate_from(ensemble, "lambda", epsilon).value,
                      "c": calibrate_from(ensemble, "gamma", epsilon).value}
    M = ensemble.size
    curves = {name: PowerCurve(name, epsilon, M=M) for name in ("score", "lr", "wald", "np")}
    curves["score"].M = 0  # closed form
    for u in u_grid:
        u = float(u)
        curves["score"].points.append((u, limit_power_score(u, epsilon), 0.0))
        for test in ("lr", "wald"):
            curves[test].points.append((u, *limit_power_reweighted(test, u, epsilon, thresholds, ensemble)))
        power, se, _ = np_envelope(u, epsilon, ensemble)
        curves["np"].points.append((u, power, se))
    return curves


def paired_gap(ensemble: WienerEnsemble, u: float, epsilon: float, thresholds: Mapping[str, float],
               upper: str, lower: str) -> tuple[float, float]:
    """Power difference upper - lower on common trajectories with its standard error.

    Tests are 'lr', 'wald', 'np' (reweighted) or 'score' (closed form, no noise).
    """
    with np.errstate(under="ignore"):
        z = np.exp(ensemble.log_z(u))

    def summand(test):
        if test == "score":
            return None
        if test == "np":
            if u == 0:
                return None
            logz = ensemble.log_z(u)
            return z * (logz > order_statistic(logz, 1.0 - epsilon).value)
        return z * _indicator(ensemble, test, epsilon, thresholds)

    def exact(test):
        return limit_power_score(u, epsilon) if test == "score" else float(epsilon)

    s_hi, s_lo = summand(upper), summand(lower)
    if s_hi is None and s_lo is None:
        return exact(upper) - exact(lower), 0.0
    if s_hi is None:
        m, se = control_variate_mean(s_lo, z)
        return exact(upper) - m, se
    if s_lo is None:
        m, se = control_variate_mean(s_hi, z)
        return m - exact(lower), se
    return control_variate_mean(s_hi - s_lo, z)


POWER_COLUMNS = ["test", "epsilon", "u", "power", "stderr", "M"]


def write_power_csv(curves: Iterable[PowerCurve], target: str | Path) -> None:
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POWER_COLUMNS)
        for c in curves:
            for u, p, se in c.points:
                w.writerow([c.test, repr(float(c.epsilon)), repr(float(u)), repr(float(p)), repr(float(se)), c.M])


def read_power_csv(source: str | Path) -> list[PowerCurve]:
    curves: dict[tuple, PowerCurve] = {}
    with open(source, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        for col in POWER_COLUMNS:
            if col not in names:
                raise SchemaError(f"power CSV lacks column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (row["test"], float(row["epsilon"]))
                c = curves.setdefault(key, PowerCurve(key[0], key[1], M=int(row["M"])))
                c.points.append((float(row["u"]), float(row["power"]), float(row["stderr"])))
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"line {lineno}: bad value ({exc})") from exc
    return list(curves.values())
