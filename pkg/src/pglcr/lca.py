"""Collapsed Gibbs sampler for latent class analysis with item selection.

Item probabilities and class weights are integrated out, leaving the class
labels and the item inclusion indicators.  Each sweep resamples every label
in order ``0 .. N-1`` and then makes one item-selection Metropolis proposal.
The number of classes is fixed per chain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._kernels import collapsed_sweep
from .distributions import RandomStream
from .errors import ConfigError, DimensionError
from .model import (
    CategoricalDataset,
    LcrState,
    PriorConfig,
    collapsed_log_posterior,
    compute_counts,
    dirichlet_multinomial_logml,
)
from .trace import ChainTrace, TraceRecorder

log = logging.getLogger(__name__)

__all__ = ["ChainSettings", "LcaChainConfig", "lca_gibbs_step", "item_move_log_ratio", "run_lca_chain", "initial_lca_state"]


@dataclass
class ChainSettings:
    """Settings shared by every chain.  ``n_iter`` counts all iterations, burn-in included.

    Kept iterations are ``burn_in + thin, burn_in + 2*thin, ...`` so the trace
    holds ``(n_iter - burn_in) // thin`` samples.
    """

    n_classes: int
    n_iter: int = 50_000
    burn_in: int = 1_000
    thin: int = 10
    priors: PriorConfig = field(default_factory=PriorConfig)
    seed: int = 0

    def validate(self):
        if int(self.n_classes) < 1:
            raise ConfigError("n_classes must be at least 1")
        if int(self.thin) < 1:
            raise ConfigError("thin must be at least 1")
        if int(self.burn_in) < 0:
            raise ConfigError("burn_in must be non-negative")
        if int(self.n_iter) <= int(self.burn_in):
            raise ConfigError(f"n_iter ({self.n_iter}) must exceed burn_in ({self.burn_in})")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")

    @property
    def n_keep(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


@dataclass
class LcaChainConfig(ChainSettings):
    item_selection: bool = True


def item_move_log_ratio(counts, alpha, j, item_prior) -> float:
    """Log Metropolis ratio for moving item ``j`` into the clustering set.

    Only item ``j``'s factors differ between the two inclusion states, so the
    ratio is the difference of its class-wise and pooled Dirichlet-multinomial
    terms plus the prior log-odds.  Moving out uses the negated value.
    """
    clustered = dirichlet_multinomial_logml(counts.item_class_counts[:, j, :], alpha[j][None]).sum()
    pooled = dirichlet_multinomial_logml(counts.pooled_item_counts[j], alpha[j])
    p = item_prior[j]
    return float(clustered - pooled + np.log(p) - np.log1p(-p))


def _item_move(state, counts, alpha, item_prior, stream):
    m = state.item_inclusion.size
    j = int(stream.generator.integers(m))
    log_a = item_move_log_ratio(counts, alpha, j, item_prior)
    toward = log_a if not state.item_inclusion[j] else -log_a
    if np.log(stream.generator.random()) < toward:
        state.item_inclusion[j] = not state.item_inclusion[j]
        return True
    return False


def initial_lca_state(data: CategoricalDataset, n_classes: int, stream: RandomStream) -> LcrState:
    """Uniformly random labels with every item in the clustering set."""
    labels = stream.generator.integers(n_classes, size=data.n_obs).astype(np.int64)
    return LcrState(
        labels=labels,
        n_classes=n_classes,
        item_inclusion=np.ones(data.n_items, dtype=bool),
        predictor_inclusion=np.zeros(0, dtype=bool),
        class_probs=np.full((data.n_obs, n_classes), 1.0 / n_classes),
    )


def lca_gibbs_step(state: LcrState, data: CategoricalDataset, priors: PriorConfig,
                   stream: RandomStream, item_selection: bool = True) -> LcrState:
    """One systematic-scan sweep plus one item-selection proposal (in place)."""
    if state.labels.shape != (data.n_obs,):
        raise DimensionError("state does not match data")
    g = state.n_classes
    alpha = priors.item_alpha(data.levels)
    lam = priors.class_alpha(g)
    counts = compute_counts(data, state.labels, g)
    if state.class_probs is None or state.class_probs.shape != (data.n_obs, g):
        state.class_probs = np.empty((data.n_obs, g))
    collapsed_sweep(
        data.codes, alpha, alpha.sum(axis=1), state.item_inclusion, np.zeros((1, 1)), lam, True,
        state.labels, counts.class_counts, counts.item_class_counts, state.class_probs, stream.generator,
    )
    if item_selection:
        _item_move(state, counts, alpha, priors.item_prior(data.n_items), stream)
    return state


def run_lca_chain(data: CategoricalDataset, config: LcaChainConfig, state: LcrState | None = None) -> ChainTrace:
    """Run one chain and return the thinned trace.

    Stored per kept iteration: labels, item inclusion, the collapsed log
    posterior and the label probabilities each observation was drawn from.
    """
    config.validate()
    g = int(config.n_classes)
    priors = config.priors
    alpha = priors.item_alpha(data.levels)  # validates shapes before sampling
    lam = priors.class_alpha(g)
    item_prior = priors.item_prior(data.n_items)
    stream = RandomStream(config.seed)
    if state is None:
        state = initial_lca_state(data, g, stream)
    recorder = TraceRecorder("lca", "item_sel" if config.item_selection else "full", config.n_keep,
                             data.n_obs, g, data.levels, 0, with_beta=False, with_theta=False)

    counts = compute_counts(data, state.labels, g)
    alpha_sum = alpha.sum(axis=1)
    dummy = np.zeros((1, 1))
    accepted = 0
    for it in range(1, config.n_iter + 1):
        collapsed_sweep(
            data.codes, alpha, alpha_sum, state.item_inclusion, dummy, lam, True,
            state.labels, counts.class_counts, counts.item_class_counts, state.class_probs, stream.generator,
        )
        if config.item_selection:
            accepted += _item_move(state, counts, alpha, item_prior, stream)
        if it > config.burn_in and (it - config.burn_in) % config.thin == 0:
            lp = collapsed_log_posterior(data, None, state.labels, None, state.item_inclusion, priors, n_classes=g)
            recorder.record(it, state, lp)
    if config.item_selection:
        log.debug("item move acceptance rate %.3f", accepted / config.n_iter)
    return recorder.finish()
