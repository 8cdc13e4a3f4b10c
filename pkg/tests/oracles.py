"""Reference computations shared by the unit and acceptance tests.

Each oracle is written independently of the package code it checks:
quadrature instead of closed forms, entropies instead of contingency
identities, enumeration instead of search.
"""

import itertools

import numpy as np
from scipy import integrate
from scipy.special import expit

GH_X, GH_W = np.polynomial.hermite.hermgauss(80)


def beta_integral(a, b, alpha=1.0):
    """E[t^a (1-t)^b] under Beta(alpha, alpha), by adaptive quadrature."""
    f = lambda t: t ** (a + alpha - 1) * (1 - t) ** (b + alpha - 1)
    val, _ = integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13, limit=200)
    norm, _ = integrate.quad(lambda t: t ** (alpha - 1) * (1 - t) ** (alpha - 1), 0, 1, epsabs=0, epsrel=1e-13)
    return val / norm


def gauss_expectation_1d(f, sd):
    """E[f(b)] for b ~ N(0, sd^2) by Gauss-Hermite."""
    return float(np.sum(GH_W / np.sqrt(np.pi) * f(np.sqrt(2) * sd * GH_X)))


def gauss_expectation_2d(f, sd):
    """E[f(b0, b1)] for independent N(0, sd^2) coefficients by Gauss-Hermite."""
    b = np.sqrt(2) * sd * GH_X
    w = GH_W / np.sqrt(np.pi)
    b0, b1 = np.meshgrid(b, b, indexing="ij")
    return float(np.sum(np.outer(w, w) * f(b0, b1)))


def grid_expectation_2d(f, sd, half_width=8.0, points=1601):
    """E[f(b0, b1)] for independent N(0, sd^2) coefficients on a dense trapezoid grid.

    Suited to wide priors where the integrand varies on a scale much finer than ``sd``.
    """
    b = np.linspace(-half_width * sd, half_width * sd, points)
    w = np.full(points, b[1] - b[0])
    w[[0, -1]] /= 2
    w = w * np.exp(-0.5 * (b / sd) ** 2) / (sd * np.sqrt(2 * np.pi))
    b0, b1 = np.meshgrid(b, b, indexing="ij")
    return float(np.einsum("i,j,ij->", w, w, f(b0, b1)))


def vi_oracle(a, b):
    """Variation of information in bits from entropies and mutual information."""
    a, b = np.asarray(a), np.asarray(b)
    n = len(a)
    h = lambda p: -np.sum(p * np.log2(p))
    pa = np.array([np.mean(a == x) for x in np.unique(a)])
    pb = np.array([np.mean(b == y) for y in np.unique(b)])
    mi = 0.0
    for x in np.unique(a):
        for y in np.unique(b):
            pxy = np.sum((a == x) & (b == y)) / n
            if pxy > 0:
                mi += pxy * np.log2(pxy / (np.mean(a == x) * np.mean(b == y)))
    return h(pa) + h(pb) - 2 * mi


def set_partitions(n):
    """Every partition of range(n) as restricted-growth label vectors."""
    out = []

    def grow(prefix, k):
        if len(prefix) == n:
            out.append(np.array(prefix))
            return
        for c in range(k + 1):
            grow(prefix + [c], k + 1 if c == k else k)

    grow([0], 1)
    return out


def lca_exact_coclustering(y, g=2, lam=1.0, alpha=1.0):
    """P(z_a == z_b | Y) for every pair, all items clustered, by enumeration with quadrature.

    Binary items only; class weights and item probabilities are integrated
    out as Beta integrals (G = 2).
    """
    assert g == 2
    n, m = y.shape
    pairs = list(itertools.combinations(range(n), 2))
    total, co = 0.0, np.zeros(len(pairs))
    for z in itertools.product([0, 1], repeat=n):
        z = np.array(z)
        w = beta_integral(np.sum(z == 0), np.sum(z == 1), lam)
        for j in range(m):
            for c in range(2):
                col = y[z == c, j]
                w *= beta_integral(np.sum(col == 1), np.sum(col == 2), alpha)
        total += w
        co += w * np.array([z[a] == z[b] for a, b in pairs])
    return pairs, co / total


def lcr_exact_coclustering(y, x, sd, integrator=grid_expectation_2d, alpha=1.0):
    """P(z_a == z_b | Y, X) for G = 2, P = 1, all items clustered, no selection.

    Item probabilities are integrated by Beta quadrature and the two
    coefficients of class 1 by a 2-D numerical integral against their prior.
    """
    n, m = y.shape
    pairs = list(itertools.combinations(range(n), 2))
    total, co = 0.0, np.zeros(len(pairs))
    for z in itertools.product([0, 1], repeat=n):
        z = np.array(z)

        def lik(b0, b1):
            p = expit(b0[..., None] + b1[..., None] * x)
            return np.prod(np.where(z == 0, p, 1 - p), axis=-1)

        w = integrator(lik, sd)
        for j in range(m):
            for c in range(2):
                col = y[z == c, j]
                w *= beta_integral(np.sum(col == 1), np.sum(col == 2), alpha)
        total += w
        co += w * np.array([z[a] == z[b] for a, b in pairs])
    return pairs, co / total
