"""
Cascades, randomized depth and attack cost
==========================================

Stacking K purifier passes costs the defender K forward passes, while an
adaptive attacker has to push gradients through all of them at every step.
This script times both sides for an untrained purifier (the cost does not
depend on the weights) and prints the memory ratio K + N_c / N_d.
"""

import numpy as np

from discolab import AttackConfig, ClassifierModel, DefenseConfig, DiscoConfig, DiscoModel, cost_ratio, timing_eval
from discolab.data import gen_synthetic
from discolab.defense import randomized_defend

clf = ClassifierModel(seed=0)
purifier = DiscoModel(DiscoConfig(blocks=2, channels=32, mlp_hidden=(128, 128), residual=True), seed=0)
data = gen_synthetic(16, seed=2)

attack = AttackConfig("bpda", "inf", eps=8 / 255, alpha=2 / 255, steps=5)
report = timing_eval(clf, purifier, [1, 2, 3], data.images[:8], data.labels[:8], attack)
for k, a, d in zip(report.k_values, report.attack_s, report.defense_s):
    print(f"K={k}  attack {1e3 * a:7.1f} ms  defense {1e3 * d:6.1f} ms  ratio K+Nc/Nd {cost_ratio(report.n_c, report.n_d, k):.2f}")

# Randomizing K per image leaves the attacker guessing the depth.
rng = np.random.default_rng(0)
cfg = DefenseConfig(k_def=None, k_range=(1, 3))
print("drawn depths", [randomized_defend(purifier, cfg, img[None], rng)[1] for img in data.images[:8]])

# With a full-size classifier the ratio is dominated by N_c / N_d.
print("36.5M classifier, 1.6M purifier, K=5:", cost_ratio(36_500_000, 1_600_000, 5))
