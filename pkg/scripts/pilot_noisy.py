"""Pilot for the noisy-data ablation: calibrates separability and records
margins before freezing the acceptance configuration."""

import sys
import time

import numpy as np

from emonet.config import GenerateSection, ModelSection, NoiseSection
from emonet.harness import ablation_sweep
from emonet.pipeline import build_synthetic, factory_from_section

separation = float(sys.argv[1]) if len(sys.argv) > 1 else 0.8
n_seeds = int(sys.argv[2]) if len(sys.argv) > 2 else 5

t0 = time.time()
gen = GenerateSection(
    n_classes=3, n_per_class=1000, separation=separation, jitter_std=1.0,
    noise=NoiseSection(kind="symmetric", rate=0.3, exact_count=True),
)
ds = build_synthetic(gen, seed=20250801)
X = ds.flat_features(np.float32)

theta1 = factory_from_section(ModelSection(hidden_sizes=[16], epochs=200), 6144, 3)
theta2 = factory_from_section(ModelSection(hidden_sizes=[32], epochs=30), 6144, 3)

result = ablation_sweep(
    X, ds.noisy_labels, 3, theta1, theta2,
    ratios=[0.0, 0.1, 0.2, 0.3], n_seeds=n_seeds,
    cl_opts={"k_folds": 5}, test_fraction=0.3, seed=424242,
)

true_flips = ds.noisy_labels != ds.true_labels
flags = result.cleaning.flags
prec = (flags & true_flips).sum() / max(1, flags.sum())
rec = (flags & true_flips).sum() / true_flips.sum()
test_err = np.mean(
    ds.noisy_labels[result.test_idx] != ds.true_labels[result.test_idx]
)
print(f"separation={separation} seeds={n_seeds}")
print(f"flags={flags.sum()} precision={prec:.3f} recall={rec:.3f} "
      f"test_label_err={test_err:.3f} n_test={len(result.test_idx)}")
base = result.points[0].mean_cl
for p in result.points:
    print(f"r={p.ratio:.1f}  cl={p.mean_cl:.4f}±{p.sd_cl:.4f}  "
          f"rand={p.mean_random:.4f}±{p.sd_random:.4f}  "
          f"cl-base={p.mean_cl-base:+.4f}  cl-rand={p.mean_cl-p.mean_random:+.4f}")
print(f"total {time.time()-t0:.0f}s")
