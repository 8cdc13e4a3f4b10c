"""Posterior summaries computed from (relabelled) traces."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, InsufficientSamplesError, InvalidParameterError
from ..model import CategoricalDataset, PriorConfig
from ..trace import ChainTrace

__all__ = [
    "ThetaEstimate",
    "posthoc_theta",
    "posterior_inclusion_probabilities",
    "hdi",
    "adjusted_rand_index",
    "CoefficientSummary",
    "coefficient_summary",
    "class_proportions",
]

MIN_HDI_SAMPLES = 20


@dataclass(frozen=True)
class ThetaEstimate:
    """Item probability estimates, ``(G, M, K_max)`` arrays zero-padded past ``K_j``."""

    mean: np.ndarray
    sd: np.ndarray
    levels: np.ndarray


def _item_counts(labels, codes_j, g, k):
    t, n = labels.shape
    flat = (np.arange(t)[:, None] * g + labels) * k + codes_j[None, :]
    return np.bincount(flat.ravel(), minlength=t * g * k).reshape(t, g, k)


def posthoc_theta(trace: ChainTrace, data: CategoricalDataset, priors: PriorConfig | None = None) -> ThetaEstimate:
    """Per-class item probabilities from the labels of each kept iteration.

    At iteration ``t`` the Dirichlet posterior of ``theta_gj`` has mean
    ``(s_gjk + alpha_jk) / (s_g + A_j)`` and variance ``mean (1 - mean) / (s_g + A_j + 1)``
    with ``A_j = sum_k alpha_jk``.  The estimate averages the means; the sd
    adds the average variance to the variance of the means.
    """
    priors = priors or PriorConfig()
    if trace.n_obs != data.n_obs:
        raise DimensionError("trace and data have different numbers of observations")
    g, m, kmax = trace.n_classes, data.n_items, data.max_levels
    alpha = priors.item_alpha(data.levels)
    labels = np.asarray(trace.labels, dtype=np.int64)
    mean = np.zeros((g, m, kmax))
    sd = np.zeros((g, m, kmax))
    codes = data.codes
    for j in range(m):
        k = int(data.levels[j])
        a = alpha[j, :k]
        s = _item_counts(labels, codes[:, j], g, k).astype(float)
        denom = s.sum(axis=2, keepdims=True) + a.sum()
        mu = (s + a) / denom
        var = mu * (1 - mu) / (denom + 1)
        mean[:, j, :k] = mu.mean(axis=0)
        sd[:, j, :k] = np.sqrt(var.mean(axis=0) + mu.var(axis=0))
    return ThetaEstimate(mean, sd, np.asarray(data.levels))


def posterior_inclusion_probabilities(trace: ChainTrace) -> tuple[np.ndarray, np.ndarray]:
    """Fraction of kept iterations including each item and each predictor."""
    if len(trace) == 0:
        raise InsufficientSamplesError("empty trace")
    return trace.item_inclusion.mean(axis=0), trace.predictor_inclusion.mean(axis=0)


def hdi(samples, mass: float = 0.95) -> tuple[float, float]:
    """Shortest interval holding ``ceil(mass * n)`` of the sorted samples.

    Among equally short intervals the leftmost is returned.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < MIN_HDI_SAMPLES:
        raise InsufficientSamplesError(f"HDI needs at least {MIN_HDI_SAMPLES} samples, got {n}")
    if not 0 < mass <= 1:
        raise InvalidParameterError("mass must lie in (0, 1]")
    k = min(n, math.ceil(mass * n - 1e-9))
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def _comb2(x):
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * (x - 1) / 2))


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Adjusted Rand index from the pair-counting contingency table."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("labelings must be 1-d and of equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table)
    sum_a = _comb2(table.sum(axis=1))
    sum_b = _comb2(table.sum(axis=0))
    total = _comb2([a.size])
    expected = sum_a * sum_b / total if total else 0.0
    top = 0.5 * (sum_a + sum_b)
    if top == expected:
        return 1.0
    return float((index - expected) / (top - expected))


@dataclass(frozen=True)
class CoefficientSummary:
    """One coefficient's posterior summary; ``row`` 0 is the intercept, ``cls`` is 0-based."""

    row: int
    cls: int
    mean: float
    sd: float
    hdi_lower: float
    hdi_upper: float


def coefficient_summary(trace: ChainTrace, mass: float = 0.95) -> list[CoefficientSummary]:
    """Mean, sd and HDI of every non-baseline coefficient."""
    if trace.beta is None:
        raise InvalidParameterError("trace has no coefficients")
    beta = trace.beta
    out = []
    for g in range(trace.n_classes - 1):
        for r in range(beta.shape[1]):
            draws = beta[:, r, g]
            lo, hi = hdi(draws, mass)
            out.append(CoefficientSummary(r, g, float(draws.mean()), float(draws.std(ddof=1)), lo, hi))
    return out


def class_proportions(trace: ChainTrace) -> tuple[np.ndarray, np.ndarray]:
    """Mean and sd over iterations of the share of observations in each class."""
    g = trace.n_classes
    shares = np.stack([(trace.labels == k).mean(axis=1) for k in range(g)], axis=1)
    return shares.mean(axis=0), shares.std(axis=0, ddof=1) if len(trace) > 1 else np.zeros(g)
