"""Predictor PIPs with labels fixed at the truth: sampler vs a Laplace-approximated exact posterior (first design, G=2)."""

import itertools

import numpy as np
from scipy import optimize
from scipy.special import expit
from pglcr.distributions import RandomStream
from pglcr.lcr import initial_lcr_state, predictor_selection_move, update_beta_block, update_eta_and_omega
from pglcr.model import PriorConfig
from pglcr.simulate import generate, sim1_spec

data, cov, truth = generate(sim1_spec(500), 0)
y = (truth == 0).astype(float)           # class 1 vs baseline
X = cov.design

def log_marginal(cols):
    x = X[:, cols]
    def negpost(b):
        eta = x @ b
        return -(np.sum(y * eta - np.logaddexp(0, eta)) - 0.5 * b @ b / 100)
    res = optimize.minimize(negpost, np.zeros(len(cols)), method="BFGS", options={"gtol": 1e-10})
    b = res.x
    p = expit(x @ b)
    h = x.T @ (x * (p * (1 - p))[:, None]) + np.eye(len(cols)) / 100
    _, logdet = np.linalg.slogdet(h)
    return -res.fun - 0.5 * len(cols) * np.log(2 * np.pi * 100) + 0.5 * len(cols) * np.log(2 * np.pi) - 0.5 * logdet

# Laplace log marginals for all 64 predictor subsets
lm = {}
for g in itertools.product([0, 1], repeat=6):
    cols = [0] + [l + 1 for l in range(6) if g[l]]
    lm[g] = log_marginal(cols)
w = np.array(list(lm.values())); w = np.exp(w - w.max()); w /= w.sum()
pip = sum(wi * np.array(g) for wi, g in zip(w, lm))
print("Laplace PIPs given true labels:", np.round(pip, 3))

state = initial_lcr_state(data, cov, 2, RandomStream(5))
state.labels = truth.copy()
stream = RandomStream(6)
pri = PriorConfig()
keep = []
for it in range(40000):
    update_eta_and_omega(state, cov, stream)
    predictor_selection_move(state, cov, pri, stream)
    update_beta_block(state, cov, pri, stream)
    if it >= 1000:
        keep.append(state.predictor_inclusion.copy())
print("sampler PIPs given true labels:", np.round(np.mean(keep, axis=0), 3))
