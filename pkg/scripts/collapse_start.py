"""Full-mode chains on the second design started from two-class and one-class allocations."""

import numpy as np
from pglcr.distributions import RandomStream
from pglcr.lcr import LcrChainConfig, initial_lcr_state, run_lcr_chain
from pglcr.simulate import generate, sim2_spec

data, cov, truth = generate(sim2_spec(500), 0)
for start in ("merged-truth", "one-class"):
    state = initial_lcr_state(data, cov, 3, RandomStream(9))
    state.labels = np.where(truth == 1, 0, truth) if start == "merged-truth" else np.zeros(500, dtype=np.int64)
    tr = run_lcr_chain(data, cov, LcrChainConfig(n_classes=3, mode="full", seed=1), state=state)
    occ = np.array([np.unique(r).size for r in tr.labels])
    first3 = int(np.argmax(occ == 3)) if np.any(occ == 3) else None
    print(start, "share <=2 occupied:", np.mean(occ <= 2), "first kept draw with 3 classes:", first3,
          "beta mean", np.round(tr.beta.mean(axis=0)[0], 2))
