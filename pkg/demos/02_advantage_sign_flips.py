"""Why PPO needs help: minibatch advantage normalization flips advantage signs.

Run: python demos/02_advantage_sign_flips.py
"""

import numpy as np

from symrl.advantages import normalize_advantages, predicted_flips
from symrl.trainer import Trainer, TrainerConfig

# %% a skewed batch: mostly small positive advantages, one large one
raw = np.array([0.1, 0.2, 0.3, 0.4, 5.0])
normalized, rate = normalize_advantages(raw)
print("raw        ", raw)
print("normalized ", np.round(normalized, 3))
print("flip rate  ", rate)
# everything strictly between 0 and the batch mean changes sign
print("predicted  ", predicted_flips(raw))

# %% the same thing happens during real training
trainer = Trainer("cartpole", TrainerConfig.ppo(total_updates=10, eval_every=0))
for m in trainer.train():
    print(f"update {m.update:2d}  flip rate {m.adv_sign_flip_rate:.3f}  clipped {m.clipped_fraction:.3f}")
