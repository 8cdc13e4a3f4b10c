"""Predictor PIPs with labels fixed at the truth: sampler vs a Laplace-approximated exact posterior (second design, G=3)."""

import itertools
import numpy as np
from scipy import optimize
from scipy.special import logsumexp
from pglcr.distributions import RandomStream
from pglcr.lcr import initial_lcr_state, predictor_selection_move, update_beta_block, update_eta_and_omega
from pglcr.model import PriorConfig
from pglcr.simulate import generate, sim2_spec

data, cov, truth = generate(sim2_spec(500), 0)
X = cov.design
Y = np.eye(3)[truth]

def log_marginal(cols):
    x = X[:, cols]; d = len(cols)
    def negpost(b):
        B = np.column_stack([b.reshape(d, 2), np.zeros(d)])
        eta = x @ B
        return -(np.sum(Y * eta) - logsumexp(eta, axis=1).sum() - 0.5 * b @ b / 100)
    res = optimize.minimize(negpost, np.zeros(2 * d), method="BFGS", options={"gtol": 1e-9})
    b = res.x
    B = np.column_stack([b.reshape(d, 2), np.zeros(d)])
    eta = x @ B; P = np.exp(eta - logsumexp(eta, axis=1, keepdims=True))[:, :2]
    H = np.zeros((2 * d, 2 * d))
    for i in range(len(x)):
        W = np.diag(P[i]) - np.outer(P[i], P[i])
        H += np.kron(np.outer(x[i], x[i]), W)
    H += np.eye(2 * d) / 100
    _, logdet = np.linalg.slogdet(H)
    k = 2 * d
    return -res.fun - 0.5 * k * np.log(100) - 0.5 * logdet

lm = {}
for g in itertools.product([0, 1], repeat=6):
    lm[g] = log_marginal([0] + [l + 1 for l in range(6) if g[l]])
w = np.array(list(lm.values())); w = np.exp(w - w.max()); w /= w.sum()
print("Laplace PIPs given true labels:", np.round(sum(wi * np.array(g) for wi, g in zip(w, lm)), 3))

state = initial_lcr_state(data, cov, 3, RandomStream(5))
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
