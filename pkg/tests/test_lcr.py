import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import expit, gammaln

from pglcr.distributions import RandomStream
from pglcr.errors import ConfigError, DegenerateWeightsError, DimensionError
from pglcr.lcr import (
    LcrChainConfig,
    beta_conditional,
    competitor_offsets,
    initial_lcr_state,
    item_selection_move,
    lcr_log_posterior,
    predictor_log_marginal,
    predictor_selection_move,
    run_lcr_chain,
    update_allocations_lcr,
    update_beta_block,
    update_eta_and_omega,
    update_theta_full,
)
from pglcr.model import CategoricalDataset, CovariateMatrix, LcrState, PriorConfig, collapsed_log_posterior
from oracles import gauss_expectation_1d, gauss_expectation_2d


# ------------------------------------------------------------------ offsets


def test_offsets_two_classes_are_zero():
    lin = np.column_stack([np.linspace(-3, 3, 7), np.zeros(7)])
    assert np.allclose(competitor_offsets(lin), 0.0)


def test_offsets_three_classes_zero_coefficients():
    assert np.allclose(competitor_offsets(np.zeros((4, 3))), np.log(2))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_offsets_match_naive_sum(g, seed):
    rng = np.random.default_rng(seed)
    lin = rng.normal(scale=5, size=(9, g))
    lin[:, -1] = 0
    naive = np.array([[np.log(sum(np.exp(lin[i, h]) for h in range(g) if h != k)) for k in range(g - 1)]
                      for i in range(9)])
    assert np.allclose(competitor_offsets(lin), naive, atol=1e-10)


# ------------------------------------------------------- beta conditional


def test_beta_conditional_scalar_intercept():
    n = 12
    q, b = beta_conditional(np.ones((n, 1)), np.full(n, 0.25), np.full(n, 0.5), np.zeros(n),
                            np.zeros(1), np.full(1, 100.0))
    assert q[0, 0] == pytest.approx(n / 4 + 0.01)
    assert b[0] == pytest.approx(n / 2)
    assert b[0] / q[0, 0] == pytest.approx((n / 2) / (n / 4 + 0.01))


def test_beta_conditional_flat_prior_is_weighted_least_squares():
    rng = np.random.default_rng(0)
    x = np.column_stack([np.ones(30), rng.normal(size=30)])
    omega = rng.uniform(0.1, 1, size=30)
    kappa = rng.choice([-0.5, 0.5], size=30)
    c = rng.normal(size=30)
    q, b = beta_conditional(x, omega, kappa, c, np.zeros(2), np.full(2, 1e12))
    gls = np.linalg.lstsq(np.sqrt(omega)[:, None] * x, np.sqrt(omega) * (kappa / omega + c), rcond=None)[0]
    assert np.allclose(np.linalg.solve(q, b), gls, atol=1e-8)


def test_beta_conditional_without_data_is_prior():
    q, b = beta_conditional(np.zeros((0, 2)), np.zeros(0), np.zeros(0), np.zeros(0),
                            np.array([1.0, -2.0]), np.array([4.0, 9.0]))
    assert np.allclose(np.linalg.solve(q, b), [1.0, -2.0])
    assert np.allclose(np.linalg.inv(q), np.diag([4.0, 9.0]))


def test_beta_conditional_restricts_to_active_columns():
    x = np.column_stack([np.ones(5), np.arange(5.0), np.arange(5.0) ** 2])
    q, b = beta_conditional(x, np.ones(5), np.ones(5) / 2, np.zeros(5), np.zeros(3), np.ones(3),
                            np.array([True, False, True]))
    q2, b2 = beta_conditional(x[:, [0, 2]], np.ones(5), np.ones(5) / 2, np.zeros(5), np.zeros(2), np.ones(2))
    assert np.allclose(q, q2) and np.allclose(b, b2)


# ------------------------------------------------------ predictor marginal


def test_predictor_marginal_ratio_against_quadrature():
    rng = np.random.default_rng(1)
    n, sd = 6, 2.0
    x = np.column_stack([np.ones(n), rng.normal(size=n)])
    omega = rng.uniform(0.1, 0.6, size=(n, 1))
    labels = np.array([0, 1, 0, 0, 1, 1])
    kappa = (labels == 0) - 0.5
    m0, v0 = np.zeros((2, 2)), np.full((2, 2), sd**2)
    lin = np.zeros((n, 2))

    def aug(psi):
        return np.exp(np.sum(kappa * psi - 0.5 * omega[:, 0] * psi**2, axis=-1))

    with_slope = gauss_expectation_2d(lambda b0, b1: aug(b0[..., None] + b1[..., None] * x[:, 1]), sd)
    intercept_only = gauss_expectation_1d(lambda b0: aug(b0[:, None] + 0 * x[:, 1]), sd)
    f1 = predictor_log_marginal(x, omega, labels, lin, m0, v0, np.array([True, True]))
    f0 = predictor_log_marginal(x, omega, labels, lin, m0, v0, np.array([True, False]))
    assert np.exp(f1 - f0) == pytest.approx(with_slope / intercept_only, rel=1e-6)
    # the absolute value is the log integral itself when offsets vanish
    assert f1 == pytest.approx(np.log(with_slope), abs=1e-6)


def test_predictor_move_with_same_configuration_has_unit_ratio():
    rng = np.random.default_rng(2)
    x = np.column_stack([np.ones(8), rng.normal(size=(8, 2))])
    omega = rng.uniform(0.1, 1, size=(8, 2))
    labels = rng.integers(0, 3, size=8)
    beta = np.column_stack([rng.normal(size=(3, 2)), np.zeros(3)])
    m0, v0 = PriorConfig().coef_prior(3, 3)
    active = np.array([True, True, False])
    a = predictor_log_marginal(x, omega, labels, x @ beta, m0, v0, active)
    b = predictor_log_marginal(x, omega, labels, x @ beta, m0, v0, active.copy())
    assert a - b == 0.0


def test_predictor_move_zeroes_dropped_row():
    rng = np.random.default_rng(3)
    cov = CovariateMatrix.from_covariates(rng.normal(size=(10, 1)))
    data = CategoricalDataset(rng.integers(1, 3, size=(10, 1)), np.array([2]))
    # with a vanishing inclusion prior every drop is accepted
    priors = PriorConfig(predictor_inclusion_prior=1e-12)
    state = initial_lcr_state(data, cov, 2, RandomStream(0))
    state.coefficients[1, 0] = 3.0
    predictor_selection_move(state, cov, priors, RandomStream(1))
    assert not state.predictor_inclusion[0]
    assert state.coefficients[1, 0] == 0.0


# ------------------------------------------------------------ allocations


def test_collapsed_allocation_hand_example():
    data = CategoricalDataset(np.array([[1], [1]]), np.array([2]))
    cov = CovariateMatrix.intercept_only(2)
    state = LcrState(labels=np.array([0, 1]), n_classes=2, coefficients=np.zeros((1, 2)),
                     item_inclusion=np.array([True]))
    update_allocations_lcr(state, data, cov, PriorConfig(), RandomStream(0))
    # observation 1 sees class 0 empty (1/2) and class 1 holding one "1" (2/3)
    assert np.allclose(state.class_probs[0], [3 / 7, 4 / 7])


def test_full_allocation_hand_example():
    data = CategoricalDataset(np.array([[1, 2]]), np.array([2, 2]))
    cov = CovariateMatrix.from_covariates(np.array([[1.0]]))
    beta = np.array([[0.2, 0.0], [0.5, 0.0]])
    theta = np.array([[[0.9, 0.1], [0.4, 0.6]], [[0.3, 0.7], [0.5, 0.5]]])
    state = LcrState(labels=np.array([0]), n_classes=2, coefficients=beta, theta=theta,
                     item_inclusion=np.array([True, True]))
    update_allocations_lcr(state, data, cov, PriorConfig(), RandomStream(0), collapsed=False)
    p0 = expit(0.7)
    w = np.array([p0 * 0.9 * 0.6, (1 - p0) * 0.3 * 0.5])
    assert np.allclose(state.class_probs[0], w / w.sum())
    state.item_inclusion[:] = [True, False]
    update_allocations_lcr(state, data, cov, PriorConfig(), RandomStream(0), collapsed=False)
    w = np.array([p0 * 0.9, (1 - p0) * 0.3])
    assert np.allclose(state.class_probs[0], w / w.sum())


def test_full_allocation_zero_weights_raise():
    data = CategoricalDataset(np.array([[1]]), np.array([2]))
    state = LcrState(labels=np.array([0]), n_classes=2, coefficients=np.zeros((1, 2)),
                     theta=np.array([[[0.0, 1.0]], [[0.0, 1.0]]]), item_inclusion=np.array([True]))
    with pytest.raises(DegenerateWeightsError):
        update_allocations_lcr(state, data, CovariateMatrix.intercept_only(1), PriorConfig(), RandomStream(0),
                               collapsed=False)


def test_theta_full_conditional_mean():
    data = CategoricalDataset(np.ones((10, 1), dtype=int), np.array([2]))
    state = LcrState(labels=np.zeros(10, dtype=int), n_classes=2)
    stream = RandomStream(5)
    draws = np.array([update_theta_full(state, data, PriorConfig(), stream)[0, 0] for _ in range(20_000)])
    # Dirichlet(11, 1): mean 11/12, var = 11 / (144 * 13)
    se = np.sqrt(11 / (144 * 13) / 20_000)
    assert abs(draws[:, 0].mean() - 11 / 12) < 4 * se
    empty = np.array([update_theta_full(state, data, PriorConfig(), stream)[1, 0, 0] for _ in range(20_000)])
    assert abs(empty.mean() - 0.5) < 4 * np.sqrt(1 / 12 / 20_000)


def test_item_selection_move_uses_collapsed_ratio():
    # single class: the move is accepted at the prior odds
    rng = np.random.default_rng(4)
    data = CategoricalDataset(rng.integers(1, 3, size=(20, 1)), np.array([2]))
    cov = CovariateMatrix.intercept_only(20)
    priors = PriorConfig(item_inclusion_prior=0.2)
    state = LcrState(labels=np.zeros(20, dtype=int), n_classes=1, item_inclusion=np.array([True]))
    stream = RandomStream(6)
    flips = 0
    n = 20_000
    for _ in range(n):
        state.item_inclusion[0] = True
        item_selection_move(state, data, cov, priors, stream)
        flips += not state.item_inclusion[0]
    assert flips / n == pytest.approx(1.0, abs=1e-12)  # ratio 0.8/0.2 > 1 always accepts a drop
    flips = 0
    for _ in range(n):
        state.item_inclusion[0] = False
        item_selection_move(state, data, cov, priors, stream)
        flips += bool(state.item_inclusion[0])
    assert abs(flips / n - 0.25) < 4 * np.sqrt(0.25 * 0.75 / n)


# ---------------------------------------------------------------- driver


def small_problem(seed=0, n=30, p=2, g=3):
    rng = np.random.default_rng(seed)
    data = CategoricalDataset(rng.integers(1, 4, size=(n, 4)), np.array([3, 3, 3, 3]))
    cov = CovariateMatrix.from_covariates(rng.normal(size=(n, p)))
    return data, cov


@pytest.mark.parametrize("mode", ["full", "item_sel", "pred_sel", "both"])
def test_chain_matches_manual_replay(mode):
    data, cov = small_problem()
    cfg = LcrChainConfig(n_classes=3, n_iter=4, burn_in=0, thin=1, seed=21, mode=mode)
    trace = run_lcr_chain(data, cov, cfg)

    priors = cfg.priors
    stream = RandomStream(21)
    state = initial_lcr_state(data, cov, 3, stream)
    if mode == "full":
        update_theta_full(state, data, priors, stream)
    for it in range(4):
        update_eta_and_omega(state, cov, stream)
        if mode in ("pred_sel", "both"):
            predictor_selection_move(state, cov, priors, stream)
        update_beta_block(state, cov, priors, stream)
        update_allocations_lcr(state, data, cov, priors, stream, collapsed=mode != "full")
        if mode == "full":
            update_theta_full(state, data, priors, stream)
        if mode in ("item_sel", "both"):
            item_selection_move(state, data, cov, priors, stream)
        assert np.array_equal(trace.labels[it], state.labels)
        assert np.allclose(trace.beta[it], state.coefficients, atol=0, rtol=0)
        assert np.array_equal(trace.item_inclusion[it], state.item_inclusion)
        assert trace.log_posterior[it] == pytest.approx(lcr_log_posterior(state, data, cov, priors, mode), abs=1e-9)


def test_baseline_column_stays_zero_and_trace_shapes():
    data, cov = small_problem(1)
    cfg = LcrChainConfig(n_classes=3, n_iter=300, burn_in=100, thin=5, seed=2, mode="both")
    trace = run_lcr_chain(data, cov, cfg)
    assert len(trace) == 40
    assert trace.beta.shape == (40, 3, 3)
    assert np.all(trace.beta[:, :, -1] == 0)
    dropped = ~trace.predictor_inclusion
    assert np.all(trace.beta[:, 1:, :][dropped] == 0)
    assert trace.theta is None


def test_collapsed_log_posterior_stored_for_collapsed_modes():
    data, cov = small_problem(2)
    cfg = LcrChainConfig(n_classes=2, n_iter=200, burn_in=100, thin=50, seed=3, mode="item_sel")
    trace = run_lcr_chain(data, cov, cfg)
    for t in range(len(trace)):
        lp = collapsed_log_posterior(data, cov, trace.labels[t], trace.beta[t], trace.item_inclusion[t], cfg.priors)
        assert trace.log_posterior[t] == pytest.approx(lp, abs=1e-9)


def test_lcr_chain_determinism():
    data, cov = small_problem(3)
    cfg = LcrChainConfig(n_classes=2, n_iter=200, burn_in=0, thin=1, seed=8, mode="both")
    a, b = run_lcr_chain(data, cov, cfg), run_lcr_chain(data, cov, cfg)
    assert np.array_equal(a.labels, b.labels) and np.array_equal(a.beta, b.beta)


def test_lcr_config_errors():
    data, cov = small_problem()
    with pytest.raises(ConfigError):
        run_lcr_chain(data, cov, LcrChainConfig(n_classes=1, n_iter=10, burn_in=0))
    with pytest.raises(ConfigError):
        run_lcr_chain(data, cov, LcrChainConfig(n_classes=2, n_iter=10, burn_in=0, mode="fast"))
    with pytest.raises(ConfigError):
        run_lcr_chain(data, cov, LcrChainConfig(n_classes=2, n_iter=10, burn_in=0, coef_variance_overrides={1: 0}))
    with pytest.raises(DimensionError):
        run_lcr_chain(data, cov.subset(np.arange(5)), LcrChainConfig(n_classes=2, n_iter=10, burn_in=0))


# ------------------------------------------------------- getting it right


def lcr_exact(data, x, sd, item_prior, pred_prior, mode):
    """Posterior over (Z, nu, gamma) for G=2, P=1 with theta and beta integrated out."""
    n = data.n_obs
    nus = list(itertools.product([False, True], repeat=data.n_items)) if mode in ("item_sel", "both") \
        else [(True,) * data.n_items]
    gammas = [False, True] if mode in ("pred_sel", "both") else [True]

    def dm(counts):
        return gammaln(2) - gammaln(counts.sum() + 2) + np.sum(gammaln(counts + 1))

    out = []
    for z in itertools.product([0, 1], repeat=n):
        z = np.array(z)

        def lik(eta):
            p = expit(eta)
            return np.prod(np.where(z == 0, p, 1 - p), axis=-1)

        mix = {True: gauss_expectation_2d(lambda b0, b1: lik(b0[..., None] + b1[..., None] * x), sd),
               False: gauss_expectation_1d(lambda b0: lik(b0[:, None] + 0 * x), sd)}
        for nu in nus:
            lt = 0.0
            for j in range(data.n_items):
                col = data.codes[:, j]
                if nu[j]:
                    lt += sum(dm(np.bincount(col[z == g], minlength=2).astype(float)) for g in range(2))
                else:
                    lt += dm(np.bincount(col, minlength=2).astype(float))
                if len(nus) > 1:
                    lt += np.log(item_prior if nu[j] else 1 - item_prior)
            for gam in gammas:
                lg = np.log(pred_prior if gam else 1 - pred_prior) if len(gammas) > 1 else 0.0
                out.append((tuple(z), nu, gam, np.exp(lt + lg) * mix[gam]))
    w = np.array([o[3] for o in out])
    return out, w / w.sum()


@pytest.mark.parametrize("mode", ["full", "both"])
def test_lcr_chain_matches_exact_posterior(mode):
    y = np.array([[1, 2], [2, 2], [1, 1], [2, 1], [1, 1]])
    x = np.array([-1.0, 0.5, 1.2, -0.3, 0.8])
    data = CategoricalDataset(y, np.array([2, 2]))
    cov = CovariateMatrix.from_covariates(x[:, None])
    sd = 1.5
    priors = PriorConfig(coef_variance=sd**2, item_inclusion_prior=0.4, predictor_inclusion_prior=0.5)
    states, probs = lcr_exact(data, x, sd, 0.4, 0.5, mode)
    pairs = list(itertools.combinations(range(5), 2))
    co_exact = sum(p * np.array([s[0][a] == s[0][b] for a, b in pairs]) for s, p in zip(states, probs))
    first_exact = sum(p * (s[0][0] == 0) for s, p in zip(states, probs))

    cfg = LcrChainConfig(n_classes=2, n_iter=81_000, burn_in=1_000, thin=4, seed=17, mode=mode, priors=priors)
    trace = run_lcr_chain(data, cov, cfg)
    co_mc = np.array([np.mean(trace.labels[:, a] == trace.labels[:, b]) for a, b in pairs])
    assert np.max(np.abs(co_mc - co_exact)) < 0.02
    assert np.mean(trace.labels[:, 0] == 0) == pytest.approx(first_exact, abs=0.02)
    if mode == "both":
        nu_exact = sum(p * np.array(s[1]) for s, p in zip(states, probs))
        gamma_exact = sum(p * s[2] for s, p in zip(states, probs))
        assert np.allclose(trace.item_inclusion.mean(axis=0), nu_exact, atol=0.02)
        assert trace.predictor_inclusion[:, 0].mean() == pytest.approx(gamma_exact, abs=0.02)
