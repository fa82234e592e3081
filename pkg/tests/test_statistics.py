import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats
from scipy.special import ndtr

from selfcorrect.exceptions import DomainError, InvalidArgumentError, StoppingTimeoutError
from selfcorrect.limit import simulate_ensemble
from selfcorrect.psi import monotone_psi
from selfcorrect.rng import RngStream
from selfcorrect.simulate import PointProcessPath, simulate_poisson, simulate_self_correcting
from selfcorrect.statistics import (
    TestConfig, default_alt_upper, delta_T, delta_T_event_sum, finite_batch, j_T, log_likelihood, lr_test,
    mle_fit, mle_u, score_test, sequential_score_test, sequential_statistic, surrogate_argmax,
    surrogate_loglik, wald_test, write_stats_csv,
)


def cfg(psi, rate=1.0, horizon=1000.0, **kw):
    return TestConfig(rate, horizon, psi, **kw)


def even_path(n, horizon, rate=1.0):
    return PointProcessPath(rate, horizon, np.linspace(horizon / n, horizon, n))


def riemann_j(path, n=400_000):
    t = (np.arange(n) + 0.5) * path.horizon / n
    y = path.rate * t - path.counting(t)
    return np.sum(y * y) * path.horizon / n / (path.rate * path.horizon**2)


# --- configuration ----------------------------------------------------------

def test_alt_upper_default(psi_exp):
    c = cfg(psi_exp)
    assert c.alt_upper == pytest.approx(math.sqrt(1000) / math.log(1000))
    assert round(c.alt_upper, 2) == 4.58
    assert default_alt_upper(1.0, 1.0) == math.inf
    assert c.theta(2.0) == pytest.approx(2.0 / 1000)


def test_config_validation(psi_exp):
    with pytest.raises(InvalidArgumentError):
        cfg(psi_exp, epsilon=1.0)
    with pytest.raises(InvalidArgumentError):
        cfg(psi_exp, horizon=0.0)
    with pytest.raises(InvalidArgumentError):
        cfg(psi_exp, epsilon=0.07).b


def test_mismatched_path_rejected(psi_exp):
    with pytest.raises(InvalidArgumentError):
        delta_T(even_path(3, 3.0, rate=2.0), cfg(psi_exp, horizon=3.0))
    with pytest.raises(InvalidArgumentError):
        j_T(even_path(3, 3.0), cfg(psi_exp, horizon=4.0))


# --- score statistic and information ----------------------------------------

def test_delta_examples(psi_exp):
    assert delta_T(even_path(10, 10.0), cfg(psi_exp, horizon=10.0)) == 0.5
    p = PointProcessPath(1.0, 3.0, [1.0, 2.0])
    assert delta_T(p, cfg(psi_exp, horizon=3.0)) == pytest.approx(1 / 6, abs=1e-15)
    assert delta_T_event_sum(p) == pytest.approx(1 / 6, abs=1e-15)
    assert delta_T(PointProcessPath(1.0, 4.0, []), cfg(psi_exp, horizon=4.0)) == -2.0


@pytest.mark.parametrize("theta, rate, horizon", [(0.0, 1.0, 1000.0), (0.02, 2.5, 400.0), (0.0, 0.3, 50.0)])
def test_delta_dual_representation(psi_exp, theta, rate, horizon):
    c = cfg(psi_exp, rate=rate, horizon=horizon)
    for k in range(200):
        p = simulate_self_correcting(psi_exp, theta, rate, horizon, RngStream(3, k))
        closed, summed = delta_T(p, c), delta_T_event_sum(p)
        assert abs(closed - summed) <= 1e-9 * max(1.0, abs(closed))


def test_j_examples(psi_exp):
    assert j_T(PointProcessPath(1.0, 1.0, []), cfg(psi_exp, horizon=1.0)) == pytest.approx(1 / 3, abs=1e-15)
    p = PointProcessPath(1.0, 2.0, [1.0])
    assert j_T(p, cfg(psi_exp, horizon=2.0)) == pytest.approx(1 / 6, abs=1e-15)
    assert riemann_j(p) == pytest.approx(1 / 6, abs=1e-8)


def test_j_matches_riemann_oracle(psi_exp):
    for k in range(5):
        p = simulate_poisson(1.3, 60.0, RngStream(5, k))
        val = j_T(p, cfg(psi_exp, rate=1.3, horizon=60.0))
        assert val >= 0
        assert val == pytest.approx(riemann_j(p), rel=1e-4)  # oracle is O(h) at each jump


# --- log-likelihood ---------------------------------------------------------

def test_loglik_zero_at_null(psi_exp, psi_exp_thinned):
    for k in range(50):
        p = simulate_poisson(1.0, 300.0, RngStream(6, k))
        assert log_likelihood(0.0, p, cfg(psi_exp, horizon=300.0)) == 0.0
        assert log_likelihood(0.0, p, cfg(psi_exp_thinned, horizon=300.0)) == 0.0


def test_loglik_no_event_path(psi_exp, psi_exp_thinned):
    p = PointProcessPath(1.0, 1.0, [])
    expected = -(math.e - 2.0)
    assert log_likelihood(1.0, p, cfg(psi_exp, horizon=1.0)) == pytest.approx(expected, rel=1e-12)
    assert log_likelihood(1.0, p, cfg(psi_exp_thinned, horizon=1.0)) == pytest.approx(expected, rel=1e-12)


def test_loglik_closed_form_vs_quadrature(psi_exp):
    c = cfg(psi_exp)
    for k in range(10):
        p = simulate_poisson(1.0, 1000.0, RngStream(7, k))
        exact = log_likelihood(3.0, p, c)
        oracle = log_likelihood(3.0, p, c, quad_order=32)
        assert abs(exact - oracle) <= 1e-8 * max(1.0, abs(oracle))


def test_loglik_domain_error():
    linear = monotone_psi(lambda x: 1.0 + x, 1.0)
    p = PointProcessPath(1.0, 10.0, np.linspace(0.1, 5.0, 50))
    with pytest.raises(DomainError):
        log_likelihood(40.0, p, cfg(linear, horizon=10.0))
    with pytest.raises(InvalidArgumentError):
        log_likelihood(-1.0, p, cfg(linear, horizon=10.0))


def surrogate_errors(psi, horizon, us, n, seed):
    c = cfg(psi, horizon=horizon)
    errs = np.empty((n, len(us)))
    for k in range(n):
        p = simulate_poisson(1.0, horizon, RngStream(seed, k))
        d, j = delta_T(p, c), j_T(p, c)
        for i, u in enumerate(us):
            errs[k, i] = abs(log_likelihood(u, p, c) - surrogate_loglik(u, d, j))
    return errs


@pytest.fixture(scope="module")
def surrogate_errors_1000(psi_exp):
    return surrogate_errors(psi_exp, 1000.0, [1.0, 3.0, 5.0], 10_000, 8)


def test_quadratic_surrogate_agreement_small_u(surrogate_errors_1000):
    assert np.percentile(surrogate_errors_1000[:, 0], 95) < 0.05


@pytest.mark.xfail(strict=True, reason="the remainder is (u^3 / 6) T^(-1/2) int W^3 + ..., about 1.6 at the 95th "
                                       "percentile for u = 5, T = 1000; see the decisions ledger")
def test_quadratic_surrogate_agreement_up_to_5(surrogate_errors_1000):
    assert np.all(np.percentile(surrogate_errors_1000, 95, axis=0) < 0.05)


def test_surrogate_remainder_shrinks_like_inverse_sqrt_t(psi_exp):
    small = np.median(surrogate_errors(psi_exp, 1000.0, [3.0], 2000, 30), axis=0)
    large = np.median(surrogate_errors(psi_exp, 16_000.0, [3.0], 2000, 31), axis=0)
    assert 3.0 < small[0] / large[0] < 5.3


# --- maximum likelihood -----------------------------------------------------

def test_surrogate_argmax():
    assert surrogate_argmax(-0.3, 0.2) == 0.0
    assert surrogate_argmax(0.4, 0.1) == 4.0
    assert surrogate_argmax(0.4, 0.1, upper=3.0) == 3.0
    u = np.linspace(0, 10, 100_001)
    assert u[np.argmax(surrogate_loglik(u, 0.4, 0.1))] == pytest.approx(4.0)


@pytest.mark.parametrize("thinned", [False, True])
def test_mle_matches_dense_grid(psi_exp, psi_exp_thinned, thinned):
    psi = psi_exp_thinned if thinned else psi_exp
    c = cfg(psi, alt_upper=20.0)
    checked = 0
    for k in range(40):
        p = simulate_self_correcting(psi_exp, 0.004, 1.0, 1000.0, RngStream(9, k))
        fit = mle_fit(p, c)
        if not 0 < fit.u < 20.0:
            continue
        grid = np.linspace(0, 20.0, 100_001 if not thinned else 20_001)
        vals = np.array([log_likelihood(u, p, c) for u in grid])
        assert abs(fit.u - grid[np.argmax(vals)]) < 1e-4 + grid[1]
        assert fit.loglik >= vals.max() - 1e-9
        checked += 1
        if checked == (3 if not thinned else 1):
            break
    assert checked


def test_mle_sup_never_negative(psi_exp):
    c = cfg(psi_exp)
    for k in range(200):
        p = simulate_poisson(1.0, 1000.0, RngStream(10, k))
        fit = mle_fit(p, c)
        assert fit.loglik >= 0.0
        assert 0.0 <= fit.u <= c.alt_upper
        assert fit.at_boundary == (fit.u in (0.0, c.alt_upper))


def test_mle_same_path_both_likelihood_routes(psi_exp, psi_exp_thinned):
    p = simulate_self_correcting(psi_exp, 0.005, 1.0, 1000.0, RngStream(11, 2))
    a = mle_fit(p, cfg(psi_exp, alt_upper=20.0))
    b = mle_fit(p, cfg(psi_exp_thinned, alt_upper=20.0))
    assert a.u == pytest.approx(b.u, abs=1e-4)
    assert a.loglik == pytest.approx(b.loglik, abs=1e-6)


def test_mle_needs_bounded_set(psi_exp):
    with pytest.raises(InvalidArgumentError):
        mle_u(PointProcessPath(1.0, 1.0, []), cfg(psi_exp, horizon=1.0))


# --- tests ------------------------------------------------------------------

def test_score_test_verdicts(psi_exp):
    reject = score_test(PointProcessPath(1.0, 0.5, [0.25]), cfg(psi_exp, horizon=0.5))
    assert reject.statistic_value == pytest.approx(0.75) and reject.reject
    assert reject.threshold == pytest.approx(0.498, abs=5e-4)
    marginal = score_test(even_path(10_002, 10_000.0), cfg(psi_exp, horizon=10_000.0, epsilon=0.01))
    assert marginal.statistic_value == pytest.approx(0.4999, abs=1e-12)
    assert marginal.threshold == pytest.approx(0.49992, abs=5e-6)
    assert not marginal.reject


def test_score_threshold_zero_case(psi_exp):
    # z_{(1 - eps) / 2} = 1 needs eps = 2 Phi(1) - 1 under the upper-quantile convention
    eps = 2 * ndtr(1.0) - 1
    c = cfg(psi_exp, horizon=10.0, epsilon=eps)
    assert c.a == pytest.approx(0.0, abs=1e-12)
    assert score_test(even_path(10, 10.0), c).reject
    assert not score_test(even_path(4, 10.0), c).reject


def test_lr_and_wald_thresholds(psi_exp):
    c = cfg(psi_exp)
    tracking = PointProcessPath(1.0, 1000.0, np.linspace(1, 1000, 1000) - 0.5)
    v = lr_test(tracking, c)
    assert v.threshold == pytest.approx(1.373**2) and round(v.threshold, 3) == 1.885
    w = wald_test(tracking, c)
    assert w.threshold == 8.042
    # Delta = 1/2 with almost no information: l(u) ~ u / 2 up to the end of the set
    assert v.reject and v.statistic_value == pytest.approx(c.alt_upper / 2, rel=0.01)
    assert not w.reject


def test_lr_accepts_negative_score_path(psi_exp):
    p = PointProcessPath(1.0, 1000.0, np.linspace(1, 600, 600))
    c = cfg(psi_exp)
    assert delta_T(p, c) < 0
    fit = mle_fit(p, c)
    assert fit.u == 0.0 and fit.loglik == 0.0
    assert not lr_test(p, c).reject
    assert not wald_test(p, c).reject


def test_wald_inclusive_threshold(psi_exp):
    # the threshold equals the upper end of the set: only boundary maxima reject
    c = cfg(psi_exp, alt_upper=8.042)
    p = simulate_self_correcting(psi_exp, 0.05, 1.0, 1000.0, RngStream(12, 0))
    assert mle_u(p, c) == 8.042
    assert wald_test(p, c).reject


def test_score_size_at_t1000(psi_exp):
    c = cfg(psi_exp)
    rej = finite_batch(c, 0.0, 13, 100_000, with_mle=False).verdicts(c)["score"]
    assert abs(rej.mean() - 0.05) < 3 * math.sqrt(0.05 * 0.95 / rej.size)


@pytest.fixture(scope="module")
def null_batch_1000(psi_exp):
    c = cfg(psi_exp)
    return c, finite_batch(c, 0.0, 13, 100_000)


@pytest.mark.xfail(strict=True, reason="with U_T = [0, K_T), K_T = 4.58 < c_0.05 = 8.042, the Wald test cannot "
                                       "reject and the LR statistic is capped; see the decisions ledger")
@pytest.mark.parametrize("test", ["lr", "wald"])
def test_restricted_size_at_t1000(null_batch_1000, test):
    c, batch = null_batch_1000
    rej = batch.verdicts(c)[test]
    assert abs(rej.mean() - 0.05) < 3 * math.sqrt(0.05 * 0.95 / rej.size)


@pytest.fixture(scope="module")
def null_batch_wide(psi_exp):
    c = cfg(psi_exp, alt_upper=20.0)
    return c, finite_batch(c, 0.0, 13, 100_000)


@pytest.mark.parametrize("test", ["score", "lr", "wald"])
def test_size_at_t1000_with_wide_alternative_set(null_batch_wide, test):
    c, batch = null_batch_wide
    rej = batch.verdicts(c)[test]
    assert abs(rej.mean() - 0.05) < 3 * math.sqrt(0.05 * 0.95 / rej.size)


def test_restricted_wald_never_rejects(null_batch_1000):
    c, batch = null_batch_1000
    assert batch.mle_u.max() <= c.alt_upper < c.c
    assert not batch.verdicts(c)["wald"].any()


def test_finite_batch_common_random_numbers(psi_exp):
    c = cfg(psi_exp, horizon=200.0)
    a = finite_batch(c, 0.0, 14, 500, with_mle=False)
    b = finite_batch(c, 0.0, 14, 300, with_mle=False, start=200)
    assert np.array_equal(a.counts[200:], b.counts)
    one = finite_batch(c, 3.0, 14, 5000, workers=1)
    three = finite_batch(c, 3.0, 14, 5000, workers=3)
    for f in ("counts", "delta", "j", "mle_u", "l_at_mle"):
        assert getattr(one, f).tobytes() == getattr(three, f).tobytes()


def test_stats_csv(psi_exp, tmp_path):
    c = cfg(psi_exp, horizon=100.0)
    batch = finite_batch(c, 1.0, 15, 20)
    write_stats_csv(batch, c, tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "path_id,count,delta,j,mle_u,l_at_mle,score_reject,lr_reject,wald_reject"
    assert len(rows) == 21


# --- limit law of the finite-horizon statistics -----------------------------

@pytest.fixture(scope="module")
def poisson_vs_wiener(psi_exp):
    c = cfg(psi_exp)
    batch = finite_batch(c, 0.0, 16, 100_000, with_mle=False)
    ens = simulate_ensemble(100_000, 2000, 17)
    return batch, ens


def test_information_matches_wiener_energy(poisson_vs_wiener):
    batch, ens = poisson_vs_wiener
    assert stats.ks_2samp(batch.j, ens.j).statistic < 0.01


@pytest.mark.xfail(strict=True, reason="Delta_T lives on a lattice: P(Delta_T >= 1/2) = P(X_T in {T, T+1}) "
                                       "~ 0.025 at T = 1000 while Delta(W) <= 1/2; see the decisions ledger")
def test_score_matches_wiener_law(poisson_vs_wiener):
    batch, ens = poisson_vs_wiener
    assert stats.ks_2samp(batch.delta, ens.delta).statistic < 0.01


def test_score_lattice_atom_bound(poisson_vs_wiener):
    batch, _ = poisson_vs_wiener
    atom = np.mean(batch.delta >= 0.5)
    expected = stats.poisson.pmf(1000, 1000) + stats.poisson.pmf(1001, 1000)
    assert abs(atom - expected) < 4 * math.sqrt(expected / batch.delta.size)


def test_endpoint_matches_wiener_law(poisson_vs_wiener):
    batch, _ = poisson_vs_wiener
    w1 = (batch.counts - 1000.0 + np.random.default_rng(0).uniform(-0.5, 0.5, batch.counts.size)) / math.sqrt(1000)
    assert stats.kstest(w1, "norm").statistic < 0.01


# --- sequential design ------------------------------------------------------

def test_sequential_statistic_by_hand():
    # rate 1, events at 1 and 2: information int_0^t (s - X_s)^2 ds reaches D^2 = 1/3 at t = 1
    tau, stat, x = sequential_statistic(np.array([1.0, 2.0]), 1.0, math.sqrt(1 / 3), 10.0)
    assert tau == pytest.approx(1.0) and x in (0, 1)
    assert sequential_statistic(np.array([1.0]), 1.0, 100.0, 5.0) is None


def test_sequential_size(psi_exp):
    r = [sequential_score_test(psi_exp, 0.0, 1.0, 50.0, 0.05, RngStream(18, i)) for i in range(10_000)]
    size = np.mean([x.verdict.reject for x in r])
    assert abs(size - 0.05) < 0.01
    assert r[0].verdict.threshold == pytest.approx(1.645, abs=5e-4)


def test_sequential_small_bound(psi_exp):
    r = [sequential_score_test(psi_exp, 0.0, 1.0, 1e-4, 0.05, RngStream(19, i)) for i in range(200)]
    assert max(x.tau for x in r) < 0.1
    assert max(abs(x.statistic) for x in r) < 0.05
    assert not any(x.verdict.reject for x in r)


def test_sequential_timeout_and_validation(psi_exp):
    with pytest.raises(StoppingTimeoutError):
        sequential_score_test(psi_exp, 0.0, 1.0, 50.0, 0.05, RngStream(0, 0), cap=5.0)
    with pytest.raises(InvalidArgumentError):
        sequential_score_test(psi_exp, 0.0, 1.0, 0.0, 0.05, RngStream(0, 0))
