"""Check hand-written backprop against finite differences, network and loss together.

Run: python demos/05_gradient_check.py
"""

import numpy as np

from symrl.trainer import Trainer, TrainerConfig

trainer = Trainer("gridworld", TrainerConfig.ppo(alpha=0.5, beta=10.0, n_envs=2, n_steps=16))
batch = trainer.collect_rollout()
adv, ret = trainer.advantages(batch)
args = (
    batch.observations.reshape(32, -1),
    batch.action_indices.reshape(32, -1),
    batch.old_probs.reshape(32, -1),
    adv,
    ret,
)
_, grad, _ = trainer.minibatch_loss(trainer.theta, *args)

# %% probe a handful of coordinates with central differences
rng = np.random.default_rng(0)
for i in rng.choice(trainer.theta.size, 8, replace=False):
    h = 1e-5
    up, down = trainer.theta.copy(), trainer.theta.copy()
    up[i] += h
    down[i] -= h
    fd = (trainer.minibatch_loss(up, *args)[0] - trainer.minibatch_loss(down, *args)[0]) / (2 * h)
    print(f"param {i:5d}  analytic {grad[i]: .6e}  numeric {fd: .6e}")
