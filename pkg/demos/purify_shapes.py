"""
Purifying adversarial shape images
==================================

Train a small classifier on procedural shapes, attack it with PGD, train a
local implicit purifier on (adversarial, clean) pairs, and measure how much
accuracy the purifier wins back. Sizes are cut down so the script finishes
in a few minutes; tests/desk.py runs the full-size version.
"""

import numpy as np

from discolab import (
    AttackConfig,
    ClassifierModel,
    Defense,
    DefenseConfig,
    DiscoConfig,
    DiscoModel,
    TrainHParams,
    eval_sa_ra,
    make_pairs,
    train_classifier,
    train_disco,
)
from discolab.data import gen_synthetic

# Eight shape classes; colours are random so only geometry identifies a class.
train = gen_synthetic(400, noise_std=0.005, seed=0)
test = gen_synthetic(96, noise_std=0.005, seed=1)

clf = ClassifierModel(seed=0)
train_classifier(clf, train, epochs=12)

# Oblivious setting: the attacker sees only the classifier.
pgd = AttackConfig("pgd", "inf", eps=8 / 255, alpha=2 / 255, steps=10)
bare = eval_sa_ra(clf, test, pgd, run_id="none")
print(f"no defense   SA {bare.sa:.3f}  RA {bare.ra:.3f}")

# Pairs attack the classifier's own predictions, then the purifier learns to
# map adversarial crops back to clean ones under an L1 loss.
pairs = make_pairs(clf, pgd, train)
purifier = DiscoModel(DiscoConfig(blocks=2, channels=32, mlp_hidden=(128, 128), residual=True), seed=0)
losses = train_disco(purifier, pairs, TrainHParams(steps=600))
print(f"purifier L1 {np.mean(losses[:50]):.4f} -> {np.mean(losses[-50:]):.4f}")

defended = eval_sa_ra(clf, test, pgd, Defense(purifier, DefenseConfig(k_def=1)), run_id="disco")
print(f"with purifier SA {defended.sa:.3f}  RA {defended.ra:.3f}")

# The output grid is free: the same model renders at twice the resolution.
big = Defense(purifier, DefenseConfig(k_def=1, out_size=(64, 64)))(test.images[:2])
print("upsampled output", big.shape)
