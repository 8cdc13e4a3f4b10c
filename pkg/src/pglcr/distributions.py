"""Seeded random streams and the variate generators used by the samplers.

Polya-Gamma PG(1, c) variates are drawn with the exact alternating-series
accept/reject scheme (Devroye's method as adapted by Polson, Scott and
Windle).  For |c| > 13 the sampler switches to a 200-term truncation of the
infinite sum-of-exponentials representation whose discarded tail is replaced
by its expectation, so the first moment stays exact.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateWeightsError, InvalidParameterError, NumericalSingularityError

__all__ = [
    "RandomStream",
    "draw_polya_gamma",
    "polya_gamma",
    "draw_dirichlet",
    "draw_categorical",
    "draw_gaussian_from_precision",
]

_PG_TRUNC = 0.64
_PG_SERIES_SWITCH = 13.0
_PG_N_TERMS = 200


class RandomStream:
    """A reproducible random source addressed by ``(seed, stream_id)``.

    Two streams built from the same pair replay the same draws for the same
    call sequence.  Different ``stream_id`` values (and the sub-streams made
    by :meth:`substream`) come from independent branches of numpy's
    ``SeedSequence`` tree.

    The underlying :class:`numpy.random.Generator` is exposed as
    :attr:`generator` so compiled kernels can consume it directly.  A stream
    has a single owner; never share one between threads.
    """

    def __init__(self, seed: int = 0, stream_id: int = 0, _keys: tuple = ()):
        if seed < 0 or stream_id < 0:
            raise InvalidParameterError("seed and stream_id must be non-negative")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._keys = (self.stream_id,) + tuple(int(k) for k in _keys)
        seq = np.random.SeedSequence(self.seed, spawn_key=self._keys)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, *keys: int) -> "RandomStream":
        """Deterministic child stream, e.g. ``stream.substream(iteration, obs, cls)``."""
        return RandomStream(self.seed, self.stream_id, self._keys[1:] + tuple(keys))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, keys={self._keys[1:]})"


# --------------------------------------------------------------------------
# Polya-Gamma
# --------------------------------------------------------------------------


@numba.njit(cache=True)
def _pg_coef(n, x):
    # n-th term of the alternating series for the J*(1, z) density
    k = (n + 0.5) * math.pi
    if x > _PG_TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x <= 0.0:
        return 0.0
    expnt = -1.5 * (math.log(0.5 * math.pi) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
    return math.exp(expnt)


@numba.njit(cache=True)
def _log_norm_cdf(x):
    return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))


@numba.njit(cache=True)
def _pg_mass_texpon(z):
    t = _PG_TRUNC
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / math.pi * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@numba.njit(cache=True)
def _pg_rtigauss(rng, z):
    # inverse Gaussian with mean 1/z truncated to (0, TRUNC)
    t = _PG_TRUNC
    x = t + 1.0
    if 1.0 / t > z:
        alpha = 0.0
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = 1.0 + e1 * t
            x = t / (x * x)
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        while x > t:
            y = rng.standard_normal()
            y *= y
            half_mu = 0.5 * mu
            mu_y = mu * y
            x = mu + half_mu * mu_y - half_mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


@numba.njit(cache=True)
def _pg1_devroye(rng, c):
    z = 0.5 * abs(c)
    fz = 0.125 * math.pi * math.pi + 0.5 * z * z
    p_expon = _pg_mass_texpon(z)
    while True:
        if rng.random() < p_expon:
            x = _PG_TRUNC + rng.standard_exponential() / fz
        else:
            x = _pg_rtigauss(rng, z)
        s = _pg_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _pg_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _pg_coef(n, x)
                if y > s:
                    break


@numba.njit(cache=True)
def _pg1_series(rng, c):
    a2 = (c / (2.0 * math.pi)) ** 2
    total = 0.0
    partial_mean = 0.0
    for k in range(1, _PG_N_TERMS + 1):
        d = (k - 0.5) ** 2 + a2
        total += rng.standard_exponential() / d
        partial_mean += 1.0 / d
    a = math.sqrt(a2)
    # sum_{k>=1} 1 / ((k - 1/2)^2 + a^2) = pi tanh(pi a) / (2a)
    full_mean = math.pi * math.tanh(math.pi * a) / (2.0 * a)
    return (total + (full_mean - partial_mean)) / (2.0 * math.pi * math.pi)


@numba.njit(cache=True)
def _pg1(rng, c):
    if abs(c) > _PG_SERIES_SWITCH:
        return _pg1_series(rng, c)
    return _pg1_devroye(rng, c)


@numba.njit(cache=True)
def _pg_fill(rng, b, c, out):
    flat_c = c.ravel()
    flat_out = out.ravel()
    for i in range(flat_c.size):
        v = 0.0
        for _ in range(b):
            v += _pg1(rng, flat_c[i])
        flat_out[i] = v


def draw_polya_gamma(stream: RandomStream, b: int, c: float) -> float:
    """Draw one PG(b, c) variate for integer ``b >= 1``.

    ``E[PG(b, c)] = b / (2c) * tanh(c / 2)`` (``b / 4`` at ``c = 0``).
    """
    return float(polya_gamma(stream, np.asarray([c], dtype=float), b=b)[0])


def polya_gamma(stream: RandomStream, c, b: int = 1) -> np.ndarray:
    """Elementwise PG(b, c) draws for an array of tilts ``c``."""
    if isinstance(b, (bool, np.bool_)) or int(b) != b or b < 1:
        raise InvalidParameterError(f"PG shape b must be a positive integer, got {b!r}")
    c = np.ascontiguousarray(c, dtype=np.float64)
    if not np.all(np.isfinite(c)):
        raise InvalidParameterError("PG tilt must be finite")
    out = np.empty_like(c)
    _pg_fill(stream.generator, int(b), c, out)
    return out


# --------------------------------------------------------------------------
# Dirichlet / categorical / Gaussian
# --------------------------------------------------------------------------


def draw_dirichlet(stream: RandomStream, concentration) -> np.ndarray:
    """Dirichlet draw, renormalised so the result sums to one."""
    alpha = np.asarray(concentration, dtype=float)
    if alpha.ndim != 1 or alpha.size == 0:
        raise InvalidParameterError("concentration must be a non-empty vector")
    if not np.all(alpha > 0) or not np.all(np.isfinite(alpha)):
        raise InvalidParameterError("Dirichlet concentrations must be positive and finite")
    g = stream.generator.standard_gamma(alpha)
    total = g.sum()
    if total <= 0.0:
        # every gamma underflowed (tiny concentrations): redo in log space
        logg = np.log(stream.generator.standard_gamma(alpha + 1.0)) + np.log(stream.generator.random(alpha.size)) / alpha
        g = np.exp(logg - logg.max())
        total = g.sum()
    x = g / total
    return x / x.sum()


@numba.njit(cache=True)
def _categorical(u, w):
    # ties go to the lower index: first k with u < cumsum[k]
    acc = 0.0
    last = -1
    for k in range(w.size):
        if w[k] > 0.0:
            acc += w[k]
            last = k
            if u < acc:
                return k
    return last


def draw_categorical(stream: RandomStream, weights) -> int:
    """Draw an index in ``0 .. len(weights) - 1`` with probability ``w_k / sum(w)``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DegenerateWeightsError("weights must be a non-empty vector")
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise DegenerateWeightsError("weights must be non-negative and not NaN")
    total = w.sum()
    if not total > 0 or not np.isfinite(total):
        raise DegenerateWeightsError("weights must have a positive finite sum")
    return int(_categorical(stream.generator.random() * total, w))


def draw_gaussian_from_precision(
    stream: RandomStream, precision, linear_term, class_index: int | None = None
) -> np.ndarray:
    """Draw from N(Q^{-1} b, Q^{-1}) given precision ``Q`` and linear term ``b``.

    Raises
    ------
    NumericalSingularityError
        If ``Q`` is not numerically positive definite.  ``class_index`` is
        carried on the exception so callers can say which block failed.
    """
    q = np.asarray(precision, dtype=float)
    b = np.asarray(linear_term, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or b.shape != (q.shape[0],):
        raise InvalidParameterError("precision must be square and match linear_term")
    try:
        chol = np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        raise NumericalSingularityError(
            "posterior precision is not positive definite; "
            "consider a smaller prior variance for the affected coefficients",
            class_index=class_index,
        ) from None
    # Q = L L'; mean = L'^{-1} L^{-1} b; noise = L'^{-1} z
    w = solve_triangular(chol, b, lower=True)
    z = stream.generator.standard_normal(q.shape[0])
    return solve_triangular(chol.T, w + z, lower=False)
