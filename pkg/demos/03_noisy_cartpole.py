"""PPO against SPPO on cart-pole with rewards sent through a binary symmetric channel.

A few seeds only, so expect the numbers to be noisy. The full comparison
lives in tests/test_acceptance.py.

Run: python demos/03_noisy_cartpole.py [output_dir]
"""

import sys
from pathlib import Path

from symrl.experiment import ExperimentConfig, compare, run_experiment

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/demo03")

base = {
    "env": "cartpole",
    "noise": {"kind": "bsc", "p": 0.1},
    "seeds": [0, 1, 2],
    "trainer": {"total_updates": 60, "eval_every": 20},
}

# %% plain PPO baseline (alpha=1, beta=0)
ppo = ExperimentConfig.from_dict(
    {**base, "name": "ppo", "trainer": {**base["trainer"], "loss": {"alpha": 1.0, "beta": 0.0}}}, output_dir=out / "ppo"
)
# %% symmetric PPO with the reverse term switched on
sppo = ExperimentConfig.from_dict(
    {**base, "name": "sppo", "trainer": {**base["trainer"], "loss": {"alpha": 0.5, "beta": 1.0}}}, output_dir=out / "sppo"
)

a = run_experiment(ppo)
b = run_experiment(sppo)
report = compare(a, b)
for row in report["paired"]:
    print(f"seed {row['seed']}: ppo {row['a']:7.1f}  sppo {row['b']:7.1f}  diff {row['diff']:+7.1f}")
print(f"mean difference {report['mean_difference']:+.1f} +/- {report['difference_se']:.1f}, verdict: {report['verdict']}")
