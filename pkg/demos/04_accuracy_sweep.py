"""
Accuracy against polynomial degree
==================================

A small synthetic sweep: higher degree needs more matching minutiae, so
both genuine and false acceptance fall. Use ``biorti sweep`` for the
full-size run.
"""

# %%
import sys

import numpy as np

from biorti.biotemplate import NoiseModel
from biorti.experiments import bench_fv, sweep_accuracy, synth_dataset, write_csv
from biorti.vault import VaultParams

# %%
# Heavier noise than the default so the trend is visible on a tiny dataset.
noise = NoiseModel(sigma_xy=5.0, sigma_theta=6.0, drop_rate=0.25)
data = synth_dataset(6, 4, noise, np.random.default_rng(3))
rows = sweep_accuracy(data, range(5, 13), VaultParams(), seed=3, impostor_trials=200)
write_csv(rows, sys.stdout)

# %%
# Per-operation timings on this machine.
print(bench_fv(VaultParams(), trials=50).format())
