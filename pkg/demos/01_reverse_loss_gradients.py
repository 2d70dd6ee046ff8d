"""Walk through the forward and reverse policy losses on one three-action state.

Run: python demos/01_reverse_loss_gradients.py
"""

import numpy as np

from symrl.distributions import ActionDistribution
from symrl.losses import (
    LossSample,
    SymmetricLossConfig,
    a2c_loss,
    forward_logit_gradient,
    ra2c_loss,
    reverse_logit_gradient,
    symmetric_loss,
)

# %% a state with three actions; the agent took action 0 and it paid off
dist = ActionDistribution.from_probs([0.5, 0.3, 0.2])
good = LossSample(dist, action_index=0, advantage=2.0)
print("A2C loss         ", a2c_loss(good))           # -2 log 0.5
print("reverse A2C loss ", ra2c_loss(good, Z=-1.0))  # (0.3 + 0.2) * 2

# %% the reverse term stands in -1 for log 0, so it only sees the mass left on other actions
cfg = SymmetricLossConfig(alpha=1.0, beta=1.0, Z=-1.0, algorithm="A2C")
print("symmetric total  ", symmetric_loss(good, cfg).total)

# %% both gradients push the logits the same way; the reverse one is an accelerator
fwd = forward_logit_gradient(good, cfg)
rev = reverse_logit_gradient(good, cfg)
print("forward gradient ", np.round(fwd, 4))
print("reverse gradient ", np.round(rev, 4))
print("signs agree      ", bool(np.all(np.sign(fwd) == np.sign(rev))))

# %% with a negative advantage the direction flips for both terms
bad = LossSample(dist, action_index=0, advantage=-2.0)
print("negative A, fwd  ", np.round(forward_logit_gradient(bad, cfg), 4))
print("negative A, rev  ", np.round(reverse_logit_gradient(bad, cfg), 4))

# %% the accelerator is strongest when the taken action is a coin flip
for p in (0.1, 0.3, 0.5, 0.7, 0.9):
    s = LossSample(ActionDistribution.from_probs([p, 1 - p]), 0, 1.0)
    print(f"pi={p:.1f}  |reverse grad| = {abs(reverse_logit_gradient(s, cfg)[0]):.3f}")
