"""Continuous control through a factorized categorical policy (11 bins per axis).

Run: python demos/04_discretized_pointmass.py
"""

import numpy as np

from symrl.distributions import Discretizer
from symrl.envs import NoiseChannel
from symrl.trainer import Trainer, TrainerConfig

# %% the point mass takes 2-d forces in [-1, 1]; each axis becomes 11 evenly spaced choices
disc = Discretizer(-np.ones(2), np.ones(2), 11)
print("bin 0, 5, 10 ->", disc.decode(np.array([[0, 0], [5, 5], [10, 10]])))

# %% discretized SPPO under gaussian reward noise
cfg = TrainerConfig.ppo(alpha=0.5, beta=1.0, total_updates=40, eval_every=10)
trainer = Trainer("pointmass", cfg, NoiseChannel("gaussian", sigma=0.05))
for m in trainer.train():
    if m.eval_return_mean is not None:
        print(f"update {m.update:3d}  eval return {m.eval_return_mean:8.2f} +/- {m.eval_return_se:.2f}")
