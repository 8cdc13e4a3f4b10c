"""Label-switching correction and baseline re-referencing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import DimensionError, InvalidParameterError
from ..trace import ChainTrace

log = logging.getLogger(__name__)

__all__ = [
    "RelabelledTrace",
    "rereference_beta",
    "apply_permutations",
    "stephens_assign",
    "stephens_relabel",
    "align_to_reference",
]

_TINY = 1e-300


@dataclass(frozen=True)
class RelabelledTrace:
    """A trace with class indices made consistent across iterations.

    ``permutations[t, g]`` is the original class that became class ``g`` at
    kept sample ``t``.  ``apply_permutations(original, permutations)``
    reproduces ``trace``.
    """

    permutations: np.ndarray
    trace: ChainTrace
    converged: bool = True
    n_sweeps: int = 0


def rereference_beta(beta: np.ndarray) -> np.ndarray:
    """Subtract the last class's coefficients from every class.

    Works on a single ``(P+1) x G`` matrix or a stack ``(T, P+1, G)``.
    """
    beta = np.asarray(beta, dtype=float)
    return beta - beta[..., -1:]


def _inverse(perms):
    inv = np.empty_like(perms)
    rows = np.arange(perms.shape[0])[:, None]
    inv[rows, perms] = np.arange(perms.shape[1])[None, :]
    return inv


def apply_permutations(trace: ChainTrace, permutations) -> ChainTrace:
    """Permute every class-indexed component of ``trace``; re-reference ``beta``."""
    perms = np.asarray(permutations, dtype=np.int64)
    t, g = len(trace), trace.n_classes
    if perms.shape != (t, g):
        raise DimensionError(f"permutations must be {t} x {g}")
    if not np.all(np.sort(perms, axis=1) == np.arange(g)):
        raise InvalidParameterError("every row of permutations must be a permutation of 0..G-1")
    inv = _inverse(perms)
    labels = np.take_along_axis(inv, trace.labels, axis=1)
    probs = beta = theta = None
    if trace.class_probs is not None:
        probs = np.take_along_axis(trace.class_probs, perms[:, None, :], axis=2)
    if trace.beta is not None:
        beta = rereference_beta(np.take_along_axis(trace.beta, perms[:, None, :], axis=2))
    if trace.theta is not None:
        theta = np.take_along_axis(trace.theta, perms[:, :, None, None], axis=1)
    return replace(trace, labels=labels, class_probs=probs, beta=beta, theta=theta)


def stephens_assign(probs: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Permutation minimising the KL divergence of permuted ``probs`` from ``reference``.

    Both are ``N x G``.  Returns ``perm`` with ``perm[g]`` = column of
    ``probs`` placed at position ``g``.
    """
    log_q = np.log(np.maximum(reference, _TINY))
    cost = -(probs.T @ log_q)  # cost[h, g]: original h placed at g
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(probs.shape[1], dtype=np.int64)
    perm[cols] = rows
    return perm


def stephens_relabel(trace: ChainTrace, max_sweeps: int = 100) -> RelabelledTrace:
    """Iterative KL relabelling of a trace that stores classification probabilities.

    The first reference matrix is the average of the unpermuted
    probabilities.  Each sweep re-assigns every iteration against the
    current reference and recomputes the reference, stopping when no
    permutation changes.  Without convergence after ``max_sweeps`` a warning
    is logged and the last permutations are used.
    """
    if trace.class_probs is None:
        raise InvalidParameterError("relabelling needs per-iteration classification probabilities")
    p = trace.class_probs
    t, n, g = p.shape
    perms = np.tile(np.arange(g), (t, 1))
    if g == 1 or t == 0:
        return RelabelledTrace(perms, apply_permutations(trace, perms), True, 0)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        reference = np.take_along_axis(p, perms[:, None, :], axis=2).mean(axis=0)
        log_q = np.log(np.maximum(reference, _TINY))
        costs = -np.einsum("tnh,ng->thg", p, log_q)
        new = np.empty_like(perms)
        for s in range(t):
            rows, cols = linear_sum_assignment(costs[s])
            new[s, cols] = rows
        if np.array_equal(new, perms):
            converged = True
            break
        perms = new
    if not converged:
        log.warning("relabelling did not converge after %d sweeps; using the last permutations", max_sweeps)
    return RelabelledTrace(perms, apply_permutations(trace, perms), converged, sweeps)


def align_to_reference(trace: ChainTrace, reference_labels) -> tuple[ChainTrace, np.ndarray]:
    """Apply one global class permutation that best matches ``reference_labels``.

    Matching maximises the summed posterior-mean probability of each
    observation's reference class (or the label agreement when the trace
    has no probabilities).  Returns the permuted trace and the permutation.
    """
    ref = np.asarray(reference_labels, dtype=np.int64)
    g = trace.n_classes
    if ref.shape != (trace.n_obs,):
        raise DimensionError("reference labels must have one entry per observation")
    if ref.min() < 0 or ref.max() >= g:
        raise InvalidParameterError("reference labels must lie in 0..G-1")
    onehot = np.eye(g)[ref]
    if trace.class_probs is not None:
        mean_p = trace.class_probs.mean(axis=0)
    else:
        mean_p = np.stack([(trace.labels == k).mean(axis=0) for k in range(g)], axis=1)
    score = mean_p.T @ onehot  # score[h, g]: original h placed at reference class g
    rows, cols = linear_sum_assignment(-score)
    perm = np.empty(g, dtype=np.int64)
    perm[cols] = rows
    return apply_permutations(trace, np.tile(perm, (len(trace), 1))), perm
