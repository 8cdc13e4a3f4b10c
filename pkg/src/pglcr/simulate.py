"""Synthetic LCR data: a generic generator and two fixed benchmark designs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import RandomStream
from .errors import ConfigError
from .model import CategoricalDataset, CovariateMatrix

__all__ = ["GenerativeSpec", "generate", "sim1_spec", "sim2_spec", "SPECS"]


@dataclass(frozen=True)
class GenerativeSpec:
    """Ground truth for one synthetic design.

    ``theta_true[g][j]`` is the category distribution of item ``j`` in class
    ``g``; ``beta_true`` is ``(P+1) x G`` with a zero last column.  When
    ``covariates`` is ``None`` every predictor is drawn from an independent
    standard Gaussian; otherwise the given ``N x P`` matrix is used as is.
    """

    theta_true: tuple
    beta_true: np.ndarray
    n_obs: int = 500
    covariates: np.ndarray | None = None
    name: str = "custom"

    @property
    def n_classes(self) -> int:
        return len(self.theta_true)

    @property
    def levels(self) -> np.ndarray:
        return np.array([len(row) for row in self.theta_true[0]], dtype=np.int64)

    def validate(self):
        g = self.n_classes
        if g < 1:
            raise ConfigError("at least one class is required")
        levels = self.levels
        for c, rows in enumerate(self.theta_true):
            if len(rows) != len(levels):
                raise ConfigError(f"class {c + 1} has {len(rows)} items, expected {len(levels)}")
            for j, row in enumerate(rows):
                row = np.asarray(row, dtype=float)
                if row.size != levels[j] or row.size < 2:
                    raise ConfigError(f"class {c + 1}, item {j + 1}: inconsistent number of categories")
                if np.any(row < 0) or abs(row.sum() - 1) > 1e-9:
                    raise ConfigError(f"class {c + 1}, item {j + 1}: probabilities must lie on the simplex")
        beta = np.asarray(self.beta_true, dtype=float)
        if beta.ndim != 2 or beta.shape[1] != g:
            raise ConfigError(f"beta_true must have {g} columns")
        if np.any(beta[:, -1] != 0):
            raise ConfigError("the baseline (last) coefficient column must be zero")
        if self.n_obs < 1:
            raise ConfigError("n_obs must be positive")
        if self.covariates is not None:
            cov = np.asarray(self.covariates, dtype=float)
            if cov.shape != (self.n_obs, beta.shape[0] - 1):
                raise ConfigError(f"covariates must be {self.n_obs} x {beta.shape[0] - 1}")

    def with_n(self, n_obs: int) -> "GenerativeSpec":
        return GenerativeSpec(self.theta_true, self.beta_true, n_obs, None, self.name)


def generate(spec: GenerativeSpec, seed: int):
    """Draw ``(data, covariates, labels)``; labels are 0-based.

    Covariates, labels and responses come from separate substreams, so the
    covariates do not depend on ``theta_true``.
    """
    spec.validate()
    stream = RandomStream(seed, stream_id=7)
    beta = np.asarray(spec.beta_true, dtype=float)
    p = beta.shape[0] - 1
    n = spec.n_obs
    if spec.covariates is None:
        raw = stream.substream(0).generator.standard_normal((n, p))
    else:
        raw = np.asarray(spec.covariates, dtype=float)
    covariates = CovariateMatrix.from_covariates(raw, [f"x{l + 1}" for l in range(p)])
    lin = covariates.design @ beta
    lin -= lin.max(axis=1, keepdims=True)
    pi = np.exp(lin)
    pi /= pi.sum(axis=1, keepdims=True)
    u = stream.substream(1).generator.random(n)
    labels = np.minimum((pi.cumsum(axis=1) < u[:, None]).sum(axis=1), spec.n_classes - 1)

    levels = spec.levels
    resp_rng = stream.substream(2).generator
    responses = np.empty((n, len(levels)), dtype=np.int64)
    for j, k in enumerate(levels):
        probs = np.array([spec.theta_true[g][j] for g in range(spec.n_classes)], dtype=float)
        cum = probs.cumsum(axis=1)[labels]
        uj = resp_rng.random(n)
        responses[:, j] = np.minimum((cum < uj[:, None]).sum(axis=1), k - 1) + 1
    data = CategoricalDataset(responses, levels, tuple(f"item{j + 1}" for j in range(len(levels))))
    return data, covariates, labels


def _third():
    return (1 / 3, 1 / 3, 1 / 3)


def sim1_spec(n_obs: int = 500) -> GenerativeSpec:
    """Two classes, eight 3-level items (four informative), six predictors."""
    informative = (
        ((0.15, 0.25, 0.60), (0.70, 0.20, 0.10)),
        ((0.20, 0.35, 0.45), (0.55, 0.30, 0.15)),
        ((0.10, 0.15, 0.75), (0.80, 0.15, 0.05)),
        ((0.25, 0.40, 0.35), (0.45, 0.35, 0.20)),
    )
    shared = ((0.40, 0.50, 0.10), (0.70, 0.10, 0.20), (0.10, 0.50, 0.40), _third())
    theta = tuple(tuple(pair[g] for pair in informative) + shared for g in range(2))
    beta = np.zeros((7, 2))
    beta[:, 0] = (-0.5, 1.2, 1.0, 0.8, 0.4, 0.0, 0.0)
    return GenerativeSpec(theta, beta, n_obs, name="sim1")


def sim2_spec(n_obs: int = 500) -> GenerativeSpec:
    """Three classes, thirteen items with 2 to 5 levels (eight informative), six predictors.

    Intercepts are zero.
    """
    informative = (
        ((0.15, 0.85), (0.60, 0.40), (0.80, 0.20)),
        ((0.25, 0.75), (0.45, 0.55), (0.70, 0.30)),
        ((0.70, 0.30), (0.20, 0.80), (0.65, 0.35)),
        ((0.10, 0.25, 0.65), (0.35, 0.40, 0.25), (0.70, 0.20, 0.10)),
        ((0.20, 0.15, 0.65), (0.25, 0.60, 0.15), (0.65, 0.25, 0.10)),
        ((0.15, 0.20, 0.65), (0.50, 0.35, 0.15), (0.75, 0.15, 0.10)),
        ((0.10, 0.15, 0.25, 0.50), (0.25, 0.35, 0.25, 0.15), (0.60, 0.25, 0.10, 0.05)),
        ((0.15, 0.20, 0.20, 0.45), (0.20, 0.45, 0.25, 0.10), (0.55, 0.20, 0.15, 0.10)),
    )
    shared = (
        (0.40, 0.50, 0.10),
        (0.70, 0.10, 0.20),
        (0.20,) * 5,
        (0.10, 0.15, 0.20, 0.25, 0.30),
        (0.20, 0.30, 0.30, 0.10, 0.10),
    )
    theta = tuple(tuple(item[g] for item in informative) + shared for g in range(3))
    beta = np.zeros((7, 3))
    beta[1:, 0] = (1.0, -1.0, 0.5, -0.4, 0.0, 0.0)
    beta[1:, 1] = (-1.0, 1.0, -0.5, 0.4, 0.0, 0.0)
    return GenerativeSpec(theta, beta, n_obs, name="sim2")


SPECS = {"sim1": sim1_spec, "sim2": sim2_spec}
