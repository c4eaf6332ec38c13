"""Rank augmentation pairs on synthetic graphs by I(vi;y) + I(vj;y) - I(vi;vj)."""

from infogcl.augment import AugmentationSpec
from infogcl.infomeasure import select_augmentations
from infogcl.synthetic import generate_synthetic_graphs, two_factor_process

dataset = generate_synthetic_graphs(two_factor_process(nuisance_bits=6), 1000, seed=3)
candidates = [AugmentationSpec(), AugmentationSpec("attr_mask", 0.5), AugmentationSpec("attr_mask", 0.2),
              AugmentationSpec("node_drop", 0.2), AugmentationSpec("edge_perturb", 0.2)]
report = select_augmentations(dataset, candidates, seed=0)
for i in report.ranking:
    c = report.candidates[i]
    print(f"{c.score:8.4f}  {c.desc}")
print("best:", report.best.desc)
