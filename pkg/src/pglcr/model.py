"""Data containers, priors, sufficient statistics and likelihood evaluations.

Conventions used throughout the package:

* Item responses are stored as given, coded ``1 .. K_j``; :attr:`CategoricalDataset.codes`
  offers the 0-based view the samplers work with.
* Class labels are 0-based integers ``0 .. G-1``; class ``G-1`` is the
  baseline whose coefficient column is fixed at zero.
* Coefficients form a ``(P+1, G)`` matrix; row 0 is the intercept.
* Ragged per-item category arrays are padded to ``K_max`` columns.  Padding
  carries zero concentration / zero counts and never enters a likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConfigError, DimensionError, IngestionError

__all__ = [
    "CategoricalDataset",
    "CovariateMatrix",
    "PriorConfig",
    "LcrState",
    "SufficientCounts",
    "compute_counts",
    "mixing_probabilities",
    "linear_predictor",
    "complete_data_loglik",
    "collapsed_log_posterior",
    "dirichlet_multinomial_logml",
]


@dataclass(frozen=True)
class CategoricalDataset:
    """``N x M`` matrix of categorical codes with declared level counts ``K_j``."""

    responses: np.ndarray
    levels: np.ndarray
    item_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.responses)
        k = np.asarray(self.levels)
        if y.ndim != 2:
            raise DimensionError("responses must be an N x M matrix")
        if k.shape != (y.shape[1],):
            raise DimensionError(f"levels has shape {k.shape}, expected ({y.shape[1]},)")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.isfinite(y)) or np.any(y != np.round(y)):
                raise IngestionError("responses must be integer codes (missing rows are not allowed)")
        y = y.astype(np.int64)
        k = k.astype(np.int64)
        if np.any(k < 2):
            raise IngestionError("every item needs at least 2 categories")
        bad = (y < 1) | (y > k[None, :])
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise IngestionError(
                f"code {y[row, col]} outside 1..{k[col]}", row=int(row), column=int(col)
            )
        if self.item_names is not None and len(self.item_names) != y.shape[1]:
            raise DimensionError("item_names length does not match the number of items")
        y.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "levels", k)
        object.__setattr__(self, "_codes", np.ascontiguousarray(y - 1))

    @property
    def codes(self) -> np.ndarray:
        """0-based codes, ``responses - 1``."""
        return self._codes

    @property
    def n_obs(self) -> int:
        return self.responses.shape[0]

    @property
    def n_items(self) -> int:
        return self.responses.shape[1]

    @property
    def max_levels(self) -> int:
        return int(self.levels.max()) if self.levels.size else 0

    def subset(self, rows) -> "CategoricalDataset":
        return CategoricalDataset(self.responses[rows], self.levels, self.item_names)


@dataclass(frozen=True)
class CovariateMatrix:
    """Design matrix ``N x (P+1)`` whose first column is the intercept."""

    design: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.array(self.design, dtype=float)
        if x.ndim != 2 or x.shape[1] < 1:
            raise DimensionError("design must be an N x (P+1) matrix")
        if x.shape[0] and not np.all(x[:, 0] == 1.0):
            raise DimensionError("first design column must be identically 1 (intercept)")
        if not np.all(np.isfinite(x)):
            raise IngestionError("covariates must be finite")
        if self.names is not None and len(self.names) != x.shape[1] - 1:
            raise DimensionError("names must label the P non-intercept columns")
        x.setflags(write=False)
        object.__setattr__(self, "design", x)

    @classmethod
    def from_covariates(cls, covariates, names=None) -> "CovariateMatrix":
        """Prepend the intercept column to a raw ``N x P`` covariate array."""
        raw = np.asarray(covariates, dtype=float)
        if raw.ndim == 1:
            raw = raw[:, None]
        design = np.column_stack([np.ones(raw.shape[0]), raw])
        return cls(design, tuple(names) if names is not None else None)

    @classmethod
    def intercept_only(cls, n_obs: int) -> "CovariateMatrix":
        return cls(np.ones((n_obs, 1)))

    @property
    def n_obs(self) -> int:
        return self.design.shape[0]

    @property
    def n_predictors(self) -> int:
        return self.design.shape[1] - 1

    def subset(self, rows) -> "CovariateMatrix":
        return CovariateMatrix(self.design[rows], self.names)


def _positive(value, what):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ConfigError(f"{what} must be positive")
    return arr


def _probability(value, what):
    arr = np.asarray(value, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise ConfigError(f"{what} must lie strictly between 0 and 1")
    return arr


@dataclass
class PriorConfig:
    """Hyperparameters.  Scalars broadcast; arrays are checked on resolution.

    Attributes
    ----------
    item_concentration
        Dirichlet concentration for item probabilities.  A scalar, or one
        vector of length ``K_j`` per item.
    class_concentration
        Dirichlet concentration on class weights (LCA only), scalar or ``(G,)``.
    coef_mean, coef_variance
        Independent Gaussian prior on each non-baseline coefficient column.
        Scalar, ``(P+1,)`` (shared by classes) or ``(P+1, G-1)``.
    coef_variance_overrides
        ``{coefficient_row: variance}`` applied to every class, for example a
        tighter ``5**2`` on coefficients suffering from separation.
    item_inclusion_prior, predictor_inclusion_prior
        Bernoulli prior probabilities of item / predictor inclusion.
    """

    item_concentration: float | Sequence = 1.0
    class_concentration: float | Sequence = 1.0
    coef_mean: float | Sequence = 0.0
    coef_variance: float | Sequence = 100.0
    coef_variance_overrides: Mapping[int, float] = field(default_factory=dict)
    item_inclusion_prior: float | Sequence = 0.5
    predictor_inclusion_prior: float | Sequence = 0.5

    def __post_init__(self):
        if np.isscalar(self.item_concentration):
            _positive(self.item_concentration, "item_concentration")
        _positive(self.class_concentration, "class_concentration")
        _positive(self.coef_variance, "coef_variance")
        if not np.all(np.isfinite(np.asarray(self.coef_mean, dtype=float))):
            raise ConfigError("coef_mean must be finite")
        for row, var in dict(self.coef_variance_overrides).items():
            if int(row) < 0:
                raise ConfigError("coefficient override rows must be non-negative")
            _positive(var, f"override variance for coefficient {row}")
        _probability(self.item_inclusion_prior, "item_inclusion_prior")
        _probability(self.predictor_inclusion_prior, "predictor_inclusion_prior")

    def item_alpha(self, levels) -> np.ndarray:
        """Padded ``(M, K_max)`` concentration array (zeros in the padding)."""
        levels = np.asarray(levels, dtype=np.int64)
        kmax = int(levels.max())
        out = np.zeros((levels.size, kmax))
        if np.isscalar(self.item_concentration):
            for j, k in enumerate(levels):
                out[j, :k] = float(self.item_concentration)
            return out
        rows = list(self.item_concentration)
        if len(rows) != levels.size:
            raise ConfigError("item_concentration needs one vector per item")
        for j, (k, row) in enumerate(zip(levels, rows)):
            row = _positive(row, "item_concentration")
            if row.shape != (k,):
                raise ConfigError(f"item {j}: concentration length {row.shape} != ({k},)")
            out[j, :k] = row
        return out

    def class_alpha(self, n_classes: int) -> np.ndarray:
        lam = np.broadcast_to(np.asarray(self.class_concentration, dtype=float), (n_classes,))
        return np.array(lam)

    def coef_prior(self, n_coef: int, n_classes: int, overrides=None) -> tuple[np.ndarray, np.ndarray]:
        """Prior mean and variance, each ``(P+1, G-1)``."""
        shape = (n_coef, max(n_classes - 1, 0))

        def expand(value):
            arr = np.asarray(value, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            try:
                return np.array(np.broadcast_to(arr, shape))
            except ValueError:
                raise ConfigError(f"coefficient prior of shape {arr.shape} does not fit {shape}") from None

        mean = expand(self.coef_mean)
        var = expand(self.coef_variance)
        merged = dict(self.coef_variance_overrides)
        merged.update(overrides or {})
        for row, v in merged.items():
            if int(row) >= n_coef:
                raise ConfigError(f"override row {row} out of range for {n_coef} coefficients")
            var[int(row), :] = float(v)
        return mean, var

    def item_prior(self, n_items: int) -> np.ndarray:
        return np.array(np.broadcast_to(np.asarray(self.item_inclusion_prior, dtype=float), (n_items,)))

    def predictor_prior(self, n_predictors: int) -> np.ndarray:
        return np.array(
            np.broadcast_to(np.asarray(self.predictor_inclusion_prior, dtype=float), (n_predictors,))
        )


@dataclass
class LcrState:
    """One MCMC state.  ``coefficients``/``pg_vars`` are ``None`` for LCA chains.

    ``item_inclusion[j]`` is True when item ``j`` belongs to the clustering set;
    ``predictor_inclusion[l]`` governs design column ``l + 1`` (the intercept is
    always in).  ``theta`` is only instantiated by full-model LCR chains and
    ``class_probs`` holds the most recent allocation weights.
    """

    labels: np.ndarray
    n_classes: int
    coefficients: np.ndarray | None = None
    pg_vars: np.ndarray | None = None
    item_inclusion: np.ndarray | None = None
    predictor_inclusion: np.ndarray | None = None
    theta: np.ndarray | None = None
    class_probs: np.ndarray | None = None

    @property
    def allocations(self) -> np.ndarray:
        """One-hot ``N x G`` view of ``labels``."""
        z = np.zeros((self.labels.size, self.n_classes))
        z[np.arange(self.labels.size), self.labels] = 1.0
        return z

    def copy(self) -> "LcrState":
        def cp(a):
            return None if a is None else np.array(a, copy=True)

        return LcrState(
            cp(self.labels),
            self.n_classes,
            cp(self.coefficients),
            cp(self.pg_vars),
            cp(self.item_inclusion),
            cp(self.predictor_inclusion),
            cp(self.theta),
            cp(self.class_probs),
        )


@dataclass
class SufficientCounts:
    class_counts: np.ndarray  # (G,)
    item_class_counts: np.ndarray  # (G, M, K_max)
    pooled_item_counts: np.ndarray  # (M, K_max)


def _as_labels(allocations, n_obs, n_classes=None):
    z = np.asarray(allocations)
    if z.ndim == 2:
        if z.shape[0] != n_obs:
            raise DimensionError(f"allocations have {z.shape[0]} rows, data has {n_obs}")
        if not np.all((z == 0) | (z == 1)) or not np.all(z.sum(axis=1) == 1):
            raise DimensionError("allocation rows must be one-hot")
        return np.argmax(z, axis=1), z.shape[1]
    if z.shape != (n_obs,):
        raise DimensionError(f"labels have shape {z.shape}, expected ({n_obs},)")
    z = z.astype(np.int64)
    if n_classes is None:
        n_classes = int(z.max()) + 1 if z.size else 1
    if z.size and (z.min() < 0 or z.max() >= n_classes):
        raise DimensionError("labels out of range")
    return z, n_classes


def compute_counts(data: CategoricalDataset, allocations, n_classes: int | None = None) -> SufficientCounts:
    """Class sizes ``s_g``, class-by-category counts ``s_gjk`` and pooled ``s_jk``.

    ``allocations`` may be a one-hot ``N x G`` matrix or a vector of 0-based labels
    (then pass ``n_classes`` unless it equals ``max(label) + 1``).
    """
    labels, g = _as_labels(allocations, data.n_obs, n_classes)
    m, kmax = data.n_items, data.max_levels
    codes = data.codes
    flat = (labels[:, None] * m + np.arange(m)[None, :]) * kmax + codes
    sgjk = np.bincount(flat.ravel(), minlength=g * m * kmax).reshape(g, m, kmax).astype(np.int64)
    sg = np.bincount(labels, minlength=g).astype(np.int64)
    return SufficientCounts(sg, sgjk, sgjk.sum(axis=0))


def linear_predictor(design, coefficients, predictor_inclusion=None) -> np.ndarray:
    """``X beta`` with excluded predictor rows treated as zero."""
    beta = np.asarray(coefficients, dtype=float)
    if predictor_inclusion is not None:
        keep = np.concatenate([[True], np.asarray(predictor_inclusion, dtype=bool)])
        beta = beta * keep[:, None]
    return np.asarray(design, dtype=float) @ beta


def mixing_probabilities(design_row, coefficients, predictor_inclusion=None) -> np.ndarray:
    """Softmax class probabilities for one design row (or each row of a matrix)."""
    lin = linear_predictor(design_row, coefficients, predictor_inclusion)
    lin = lin - lin.max(axis=-1, keepdims=True)
    e = np.exp(lin)
    return e / e.sum(axis=-1, keepdims=True)


def _log_mixing(design, coefficients, predictor_inclusion=None):
    lin = linear_predictor(design, coefficients, predictor_inclusion)
    return lin - logsumexp(lin, axis=-1, keepdims=True)


def dirichlet_multinomial_logml(counts, alpha) -> np.ndarray:
    """Log marginal likelihood of category counts under a Dirichlet prior.

    ``counts`` and ``alpha`` broadcast along leading axes; the last axis is the
    category axis.  Padded categories (``alpha == 0``) are ignored.
    """
    counts = np.asarray(counts, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    alpha, counts = np.broadcast_arrays(alpha, counts)
    live = alpha > 0
    a_tot = alpha.sum(axis=-1)
    n_tot = np.where(live, counts, 0.0).sum(axis=-1)
    safe_a = np.where(live, alpha, 1.0)
    term = np.where(live, gammaln(counts + safe_a) - gammaln(safe_a), 0.0).sum(axis=-1)
    return gammaln(a_tot) - gammaln(n_tot + a_tot) + term


def _log_bernoulli(indicators, prior):
    ind = np.asarray(indicators, dtype=bool)
    return float(np.sum(np.where(ind, np.log(prior), np.log1p(-prior))))


def _log_coef_prior(coefficients, priors, n_classes, predictor_inclusion=None, overrides=None):
    beta = np.asarray(coefficients, dtype=float)
    m0, v0 = priors.coef_prior(beta.shape[0], n_classes, overrides)
    active = np.ones(beta.shape[0], dtype=bool)
    if predictor_inclusion is not None:
        active[1:] = np.asarray(predictor_inclusion, dtype=bool)
    b = beta[active, : n_classes - 1]
    m, v = m0[active], v0[active]
    return float(np.sum(-0.5 * np.log(2 * np.pi * v) - 0.5 * (b - m) ** 2 / v))


def complete_data_loglik(
    data: CategoricalDataset,
    covariates: CovariateMatrix,
    state: LcrState,
    theta,
    rho=None,
) -> float:
    """Complete-data log likelihood ``log p(Y, Z | X, beta, theta[, rho], nu)``.

    Clustering items use the class-specific ``theta`` (``G x M x K_max``);
    when ``rho`` (``M x K_max``) is supplied the non-clustering items add their
    single-class term.  A zero probability on an observed response yields
    ``-inf``.
    """
    labels, g = _as_labels(state.labels, data.n_obs, state.n_classes)
    theta = np.asarray(theta, dtype=float)
    if theta.shape[:2] != (g, data.n_items):
        raise DimensionError(f"theta has shape {theta.shape}")
    beta = state.coefficients if state.coefficients is not None else np.zeros((covariates.design.shape[1], g))
    logpi = _log_mixing(covariates.design, beta, state.predictor_inclusion)
    nu = np.ones(data.n_items, bool) if state.item_inclusion is None else np.asarray(state.item_inclusion, bool)
    rows = np.arange(data.n_obs)
    codes = data.codes
    with np.errstate(divide="ignore"):
        total = logpi[rows, labels].sum()
        for j in np.flatnonzero(nu):
            total += np.log(theta[labels, j, codes[:, j]]).sum()
        if rho is not None:
            rho = np.asarray(rho, dtype=float)
            for j in np.flatnonzero(~nu):
                total += np.log(rho[j, codes[:, j]]).sum()
    return float(total)


def collapsed_log_posterior(
    data: CategoricalDataset,
    covariates: CovariateMatrix | None,
    allocations,
    coefficients,
    item_inclusion,
    priors: PriorConfig,
    predictor_inclusion=None,
    n_classes: int | None = None,
    coef_variance_overrides=None,
) -> float:
    """Log joint density with item probabilities integrated out.

    Evaluates ``log p(Y, Z, nu, beta | X)`` including every normalising
    constant, so summing ``exp`` of it over allocations and inclusion states
    gives the marginal ``p(Y, beta | X)``.  The clustering-item factor uses the
    Dirichlet-multinomial denominator ``Gamma(s_g + K_j alpha)``.

    With ``covariates=None`` the LCA form is used: the class weights are
    integrated under ``Dirichlet(class_concentration)`` and ``coefficients``
    is ignored.  ``predictor_inclusion`` restricts the coefficient prior to
    the active rows and adds ``log p(gamma)``.
    """
    if covariates is not None and n_classes is None and coefficients is not None:
        n_classes = np.asarray(coefficients).shape[1]
    labels, g = _as_labels(allocations, data.n_obs, n_classes)
    counts = compute_counts(data, labels, g)
    alpha = priors.item_alpha(data.levels)
    nu = np.asarray(item_inclusion, dtype=bool)
    if nu.shape != (data.n_items,):
        raise DimensionError("item_inclusion must have one entry per item")

    clustered = dirichlet_multinomial_logml(counts.item_class_counts, alpha[None])  # (G, M)
    pooled = dirichlet_multinomial_logml(counts.pooled_item_counts, alpha)  # (M,)
    total = clustered[:, nu].sum() + pooled[~nu].sum()
    total += _log_bernoulli(nu, priors.item_prior(data.n_items))

    if covariates is None:
        lam = priors.class_alpha(g)
        total += dirichlet_multinomial_logml(counts.class_counts, lam)
        return float(total)

    beta = np.asarray(coefficients, dtype=float)
    logpi = _log_mixing(covariates.design, beta, predictor_inclusion)
    total += logpi[np.arange(data.n_obs), labels].sum()
    total += _log_coef_prior(beta, priors, g, predictor_inclusion, coef_variance_overrides)
    if predictor_inclusion is not None:
        total += _log_bernoulli(predictor_inclusion, priors.predictor_prior(covariates.n_predictors))
    return float(total)
