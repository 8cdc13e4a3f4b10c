"""Polya-Gamma augmented Gibbs sampler for latent class regression.

Four configurations are supported:

``full``      labels, coefficients and item probabilities are all sampled;
``item_sel``  item probabilities are integrated out and items move between
              the clustering and non-clustering sets;
``pred_sel``  item probabilities integrated out, predictor inclusion sampled;
``both``      item and predictor selection together.

Each iteration runs, in this order: PG variables for every non-baseline
class; the predictor-selection proposal (selection modes); the coefficient
block, class by class with PG variables refreshed for classes after the
first; the labels; item probabilities (``full`` only); the item-selection
proposal (``item_sel``/``both``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ._kernels import categorical_rows, collapsed_sweep, offset_excluding, row_log_softmax
from .distributions import RandomStream, draw_gaussian_from_precision, polya_gamma
from .errors import ConfigError, DegenerateWeightsError, DimensionError
from .lca import ChainSettings, _item_move
from .model import (
    CategoricalDataset,
    CovariateMatrix,
    LcrState,
    PriorConfig,
    _log_coef_prior,
    collapsed_log_posterior,
    complete_data_loglik,
    compute_counts,
)
from .trace import MODES, ChainTrace, TraceRecorder

log = logging.getLogger(__name__)

__all__ = [
    "LcrChainConfig",
    "competitor_offsets",
    "beta_conditional",
    "predictor_log_marginal",
    "initial_lcr_state",
    "update_eta_and_omega",
    "update_beta_block",
    "update_allocations_lcr",
    "update_theta_full",
    "item_selection_move",
    "predictor_selection_move",
    "lcr_log_posterior",
    "run_lcr_chain",
]


@dataclass
class LcrChainConfig(ChainSettings):
    """LCR chain settings.

    ``coef_variance_overrides`` maps a coefficient row (0 = intercept,
    ``l`` = predictor ``l``) to a prior variance used for every class.  It is
    the hook for regularising coefficients under separation and is never
    applied automatically.
    """

    mode: str = "full"
    coef_variance_overrides: dict = field(default_factory=dict)

    def validate(self):
        super().validate()
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for row, var in self.coef_variance_overrides.items():
            if not (np.isfinite(var) and var > 0):
                raise ConfigError(f"override variance for coefficient {row} must be positive")
            if int(row) < 0:
                raise ConfigError("override rows must be non-negative")

    @property
    def item_selection(self) -> bool:
        return self.mode in ("item_sel", "both")

    @property
    def predictor_selection(self) -> bool:
        return self.mode in ("pred_sel", "both")

    @property
    def collapsed(self) -> bool:
        return self.mode != "full"


# --------------------------------------------------------------------------
# coefficient block
# --------------------------------------------------------------------------


def competitor_offsets(lin: np.ndarray) -> np.ndarray:
    """``c_ig = log sum_{h != g} exp(lin_ih)`` for the non-baseline classes.

    ``lin`` is the ``N x G`` linear predictor; the result is ``N x (G-1)``.
    """
    lin = np.ascontiguousarray(lin, dtype=float)
    return np.column_stack([offset_excluding(lin, k) for k in range(lin.shape[1] - 1)])


def _offset(lin, k):
    return offset_excluding(np.ascontiguousarray(lin, dtype=float), k)


def _active_rows(n_coef, predictor_inclusion):
    active = np.ones(n_coef, dtype=bool)
    if predictor_inclusion is not None and len(predictor_inclusion):
        active[1:] = predictor_inclusion
    return np.flatnonzero(active)


def beta_conditional(design, omega_g, kappa_g, offset_g, m0_g, v0_g, active=None):
    """Precision and linear term of ``beta_g | omega, beta_{-g}, Z``.

    ``V_g^{-1} = X' Omega_g X + V_0^{-1}`` and
    ``b = X'(kappa_g + Omega_g c_g) + V_0^{-1} m_0`` restricted to the
    ``active`` design columns; the mean is ``V_g b``.
    """
    x = design if active is None else design[:, active]
    m0 = m0_g if active is None else m0_g[active]
    v0 = v0_g if active is None else v0_g[active]
    precision = x.T @ (omega_g[:, None] * x) + np.diag(1.0 / v0)
    linear = x.T @ (kappa_g + omega_g * offset_g) + m0 / v0
    return precision, linear


def predictor_log_marginal(design, omega, labels, lin, m0, v0, active) -> float:
    """Log of the coefficient-integrated augmented likelihood, up to a constant.

    Sum over non-baseline classes of
    ``1/2 log|V_g| - 1/2 log|V_0g| + 1/2 m_g' V_g^{-1} m_g - 1/2 m_0g' V_0g^{-1} m_0g``
    computed on the ``active`` columns.  Differences of this quantity between
    two predictor configurations give the log acceptance ratio of a
    predictor-selection move under a symmetric proposal.
    """
    total = 0.0
    for k in range(omega.shape[1]):
        kappa = (labels == k) - 0.5
        q, b = beta_conditional(design, omega[:, k], kappa, _offset(lin, k), m0[:, k], v0[:, k], active)
        chol = np.linalg.cholesky(q)
        w = np.linalg.solve(chol, b)
        m0a, v0a = m0[active, k], v0[active, k]
        total += -np.log(np.diag(chol)).sum() - 0.5 * np.log(v0a).sum()
        total += 0.5 * w @ w - 0.5 * np.sum(m0a**2 / v0a)
    return float(total)


def update_eta_and_omega(state: LcrState, covariates: CovariateMatrix, stream: RandomStream) -> LcrState:
    """Draw ``omega_ig ~ PG(1, x_i'beta_g - c_ig)`` for every non-baseline class."""
    lin = covariates.design @ state.coefficients
    eta = lin[:, :-1] - competitor_offsets(lin)
    state.pg_vars = polya_gamma(stream, eta)
    return state


def update_beta_block(state: LcrState, covariates: CovariateMatrix, priors: PriorConfig,
                      stream: RandomStream, coef_variance_overrides=None, refresh_omega: bool = True) -> LcrState:
    """Gibbs update of the non-baseline coefficient columns, one class at a time.

    Offsets are recomputed after each class so every draw conditions on the
    latest ``beta_{-g}``.  With ``refresh_omega`` the PG variables of class
    ``g > 0`` are redrawn from the updated coefficients just before
    ``beta_g`` is drawn, which keeps each (omega_g, beta_g) pair a valid
    two-block Gibbs update when there are more than two classes.
    """
    x = covariates.design
    beta = state.coefficients
    g_count = state.n_classes
    m0, v0 = priors.coef_prior(x.shape[1], g_count, coef_variance_overrides)
    active = _active_rows(x.shape[1], state.predictor_inclusion)
    inactive = np.setdiff1d(np.arange(x.shape[1]), active)
    beta[inactive, :] = 0.0
    for k in range(g_count - 1):
        lin = x @ beta
        offset = _offset(lin, k)
        if k > 0 and refresh_omega:
            state.pg_vars[:, k] = polya_gamma(stream, lin[:, k] - offset)
        kappa = (state.labels == k) - 0.5
        q, b = beta_conditional(x, state.pg_vars[:, k], kappa, offset, m0[:, k], v0[:, k], active)
        beta[active, k] = draw_gaussian_from_precision(stream, q, b, class_index=k)
    beta[:, -1] = 0.0
    return state


def predictor_selection_move(state: LcrState, covariates: CovariateMatrix, priors: PriorConfig,
                             stream: RandomStream, coef_variance_overrides=None) -> LcrState:
    """Metropolis toggle of one uniformly chosen predictor's inclusion.

    The coefficients are integrated out of the acceptance ratio; on
    acceptance a dropped predictor's coefficients are zeroed and the
    coefficient block that follows draws them from the new configuration.
    A singular precision rejects the move with a warning.
    """
    p = covariates.n_predictors
    if p == 0:
        return state
    x = covariates.design
    l = int(stream.generator.integers(p))
    proposal = state.predictor_inclusion.copy()
    proposal[l] = not proposal[l]
    m0, v0 = priors.coef_prior(x.shape[1], state.n_classes, coef_variance_overrides)
    lin = x @ state.coefficients
    try:
        cur = predictor_log_marginal(x, state.pg_vars, state.labels, lin, m0, v0,
                                     _active_rows(x.shape[1], state.predictor_inclusion))
        new = predictor_log_marginal(x, state.pg_vars, state.labels, lin, m0, v0,
                                     _active_rows(x.shape[1], proposal))
    except np.linalg.LinAlgError:
        log.warning("singular precision in predictor move for predictor %d; move rejected", l + 1)
        return state
    prior = priors.predictor_prior(p)[l]
    log_prior_odds = np.log(prior) - np.log1p(-prior)
    log_ratio = new - cur + (log_prior_odds if proposal[l] else -log_prior_odds)
    if np.log(stream.generator.random()) < log_ratio:
        state.predictor_inclusion = proposal
        if not proposal[l]:
            state.coefficients[l + 1, :] = 0.0
    return state


# --------------------------------------------------------------------------
# labels, item probabilities, item selection
# --------------------------------------------------------------------------


def _log_pi(covariates, beta):
    return row_log_softmax(covariates.design @ beta)


def update_allocations_lcr(state: LcrState, data: CategoricalDataset, covariates: CovariateMatrix,
                           priors: PriorConfig, stream: RandomStream, collapsed: bool = True,
                           counts=None) -> LcrState:
    """Resample every label from its full conditional.

    ``collapsed=True`` integrates the item probabilities out and sweeps the
    observations in order with count updates; otherwise the weights are
    ``pi_ig * prod_j theta_{g j y_ij}`` from ``state.theta`` and the draws are
    independent.  The normalised weights are left in ``state.class_probs``.
    """
    g = state.n_classes
    logpi = _log_pi(covariates, state.coefficients)
    if state.class_probs is None or state.class_probs.shape != (data.n_obs, g):
        state.class_probs = np.empty((data.n_obs, g))
    if collapsed:
        alpha = priors.item_alpha(data.levels)
        if counts is None:
            counts = compute_counts(data, state.labels, g)
        collapsed_sweep(
            data.codes, alpha, alpha.sum(axis=1), state.item_inclusion, logpi, np.zeros(g), False,
            state.labels, counts.class_counts, counts.item_class_counts, state.class_probs, stream.generator,
        )
        return state
    with np.errstate(divide="ignore"):
        log_theta = np.log(state.theta)
    logw = logpi.copy()
    cols = np.arange(data.n_items)
    for j in cols[state.item_inclusion]:
        logw += log_theta[:, j, data.codes[:, j]].T
    if not np.all(np.isfinite(logw.max(axis=1))):
        raise DegenerateWeightsError("an observation has zero probability under every class")
    categorical_rows(logw, state.labels, state.class_probs, stream.generator)
    return state


def update_theta_full(state: LcrState, data: CategoricalDataset, priors: PriorConfig,
                      stream: RandomStream, counts=None) -> np.ndarray:
    """Draw ``theta_gj ~ Dirichlet(alpha_j + S_gj)`` for every class and item."""
    if counts is None:
        counts = compute_counts(data, state.labels, state.n_classes)
    alpha = priors.item_alpha(data.levels)
    conc = alpha[None] + counts.item_class_counts
    live = alpha[None] > 0
    gam = np.where(live, stream.generator.standard_gamma(np.where(live, conc, 1.0)), 0.0)
    total = gam.sum(axis=2, keepdims=True)
    if np.any(total <= 0):
        # all gammas underflowed for some row: fall back to the row's mean
        fallback = conc / np.where(live, conc, 0).sum(axis=2, keepdims=True)
        gam = np.where(total > 0, gam, np.where(live, fallback, 0.0))
        total = gam.sum(axis=2, keepdims=True)
    theta = gam / total
    theta /= theta.sum(axis=2, keepdims=True)
    state.theta = theta
    return theta


def item_selection_move(state: LcrState, data: CategoricalDataset, covariates: CovariateMatrix,
                        priors: PriorConfig, stream: RandomStream, counts=None) -> LcrState:
    """Propose moving one uniformly chosen item across the clustering boundary.

    The mixing term does not depend on item inclusion, so the ratio of the
    collapsed posteriors reduces to the chosen item's factors.
    """
    if counts is None:
        counts = compute_counts(data, state.labels, state.n_classes)
    _item_move(state, counts, priors.item_alpha(data.levels), priors.item_prior(data.n_items), stream)
    return state


# --------------------------------------------------------------------------
# chain driver
# --------------------------------------------------------------------------


def _dirichlet_logpdf(theta, alpha):
    live = alpha > 0
    safe_a = np.where(live, alpha, 1.0)
    with np.errstate(divide="ignore"):
        logt = np.where(live, np.log(np.where(live, theta, 1.0)), 0.0)
    norm = gammaln(alpha.sum(axis=-1)) - np.where(live, gammaln(safe_a), 0.0).sum(axis=-1)
    return float(np.sum(norm + np.sum(np.where(live, (safe_a - 1) * logt, 0.0), axis=-1)))


def lcr_log_posterior(state: LcrState, data: CategoricalDataset, covariates: CovariateMatrix,
                      priors: PriorConfig, mode: str, coef_variance_overrides=None) -> float:
    """Log posterior value stored with each kept iteration.

    Collapsed modes use the theta-integrated joint; ``full`` uses the
    complete-data likelihood plus the Dirichlet and Gaussian prior terms.
    """
    pred = state.predictor_inclusion if mode in ("pred_sel", "both") else None
    if mode != "full":
        return collapsed_log_posterior(data, covariates, state.labels, state.coefficients, state.item_inclusion,
                                       priors, predictor_inclusion=pred, n_classes=state.n_classes,
                                       coef_variance_overrides=coef_variance_overrides)
    alpha = priors.item_alpha(data.levels)
    value = complete_data_loglik(data, covariates, state, state.theta)
    value += _dirichlet_logpdf(state.theta, alpha[None])
    value += _log_coef_prior(state.coefficients, priors, state.n_classes, None, coef_variance_overrides)
    return float(value)


def initial_lcr_state(data: CategoricalDataset, covariates: CovariateMatrix, n_classes: int,
                      stream: RandomStream) -> LcrState:
    """Uniform random labels, zero coefficients, everything included."""
    n, p1 = covariates.design.shape
    labels = stream.generator.integers(n_classes, size=n).astype(np.int64)
    return LcrState(
        labels=labels,
        n_classes=n_classes,
        coefficients=np.zeros((p1, n_classes)),
        pg_vars=np.full((n, max(n_classes - 1, 0)), 0.25),
        item_inclusion=np.ones(data.n_items, dtype=bool),
        predictor_inclusion=np.ones(p1 - 1, dtype=bool),
        class_probs=np.full((n, n_classes), 1.0 / n_classes),
    )


def run_lcr_chain(data: CategoricalDataset, covariates: CovariateMatrix, config: LcrChainConfig,
                  state: LcrState | None = None) -> ChainTrace:
    """Run one LCR chain in ``config.mode`` and return its thinned trace.

    Each kept iteration stores labels, coefficients, item and predictor
    inclusion, the label probabilities and the log posterior; ``full`` mode
    also stores item probabilities.
    """
    config.validate()
    if covariates.n_obs != data.n_obs:
        raise DimensionError(f"covariates have {covariates.n_obs} rows, responses have {data.n_obs}")
    g = int(config.n_classes)
    if g < 2:
        raise ConfigError("latent class regression needs at least 2 classes")
    priors = config.priors
    overrides = config.coef_variance_overrides
    priors.item_alpha(data.levels)
    priors.coef_prior(covariates.design.shape[1], g, overrides)
    stream = RandomStream(config.seed)
    if state is None:
        state = initial_lcr_state(data, covariates, g, stream)
    if config.mode == "full" and state.theta is None:
        update_theta_full(state, data, priors, stream)

    recorder = TraceRecorder("lcr", config.mode, config.n_keep, data.n_obs, g, data.levels,
                             covariates.n_predictors, with_beta=True, with_theta=config.mode == "full")
    counts = compute_counts(data, state.labels, g)
    for it in range(1, config.n_iter + 1):
        update_eta_and_omega(state, covariates, stream)
        if config.predictor_selection:
            predictor_selection_move(state, covariates, priors, stream, overrides)
        update_beta_block(state, covariates, priors, stream, overrides)
        update_allocations_lcr(state, data, covariates, priors, stream, collapsed=config.collapsed, counts=counts)
        if not config.collapsed:
            counts = compute_counts(data, state.labels, g)
            update_theta_full(state, data, priors, stream, counts)
        if config.item_selection:
            item_selection_move(state, data, covariates, priors, stream, counts)
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            recorder.record(it, state, lcr_log_posterior(state, data, covariates, priors, config.mode, overrides))
    return recorder.finish()
