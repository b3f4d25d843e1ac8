"""Pilot for the clean-label control: pruning must hurt, not help."""

import sys
import time

import numpy as np

from emonet.config import GenerateSection, ModelSection
from emonet.harness import ablation_sweep
from emonet.pipeline import build_synthetic, factory_from_section

separation = float(sys.argv[1]) if len(sys.argv) > 1 else 1.2
n_per_class = int(sys.argv[2]) if len(sys.argv) > 2 else 400
n_seeds = int(sys.argv[3]) if len(sys.argv) > 3 else 2

t0 = time.time()
gen = GenerateSection(
    n_classes=3, n_per_class=n_per_class, separation=separation,
    jitter_std=1.0, clean_control=True,
)
ds = build_synthetic(gen, seed=20250802)
X = ds.flat_features(np.float32)

theta1 = factory_from_section(ModelSection(hidden_sizes=[16], epochs=200), 6144, 3)
theta2 = factory_from_section(ModelSection(hidden_sizes=[32], epochs=30), 6144, 3)

result = ablation_sweep(
    X, ds.noisy_labels, 3, theta1, theta2,
    ratios=[0.0, 0.3, 0.4], n_seeds=n_seeds,
    cl_opts={"k_folds": 5}, test_fraction=0.25, seed=515151,
)

print(f"control: separation={separation} n/class={n_per_class} seeds={n_seeds} "
      f"flags={result.cleaning.flags.sum()} n_test={len(result.test_idx)}")
base = result.points[0].mean_cl
for p in result.points:
    print(f"r={p.ratio:.1f}  cl={p.mean_cl:.4f}±{p.sd_cl:.4f}  "
          f"rand={p.mean_random:.4f}±{p.sd_random:.4f}  "
          f"cl-base={p.mean_cl-base:+.4f}  cl-rand={p.mean_cl-p.mean_random:+.4f}")
print(f"total {time.time()-t0:.0f}s")
