"""
Calibration metrics and Platt scaling
=====================================
"""

# %%
import numpy as np
from scipy.special import expit

from spkg.evaluation import calibration_metrics, platt_fit

rng = np.random.default_rng(1)
z = rng.normal(scale=2.0, size=50_000)
labels = np.where(rng.random(z.size) < expit(z), 1, -1)
scores = 3.0 * z - 2.0  # overconfident and shifted

# %%
before = calibration_metrics(scores, labels)
params = platt_fit(scores, labels)
after = calibration_metrics(params.a * scores + params.b, labels)
print(f"fitted a={params.a:.4f} b={params.b:.4f} (ideal 1/3, 2/3)")
print(f"NLL   {before.nll:.4f} -> {after.nll:.4f}")
print(f"Brier {before.brier:.4f} -> {after.brier:.4f}")
print(f"AUC   {before.auc:.4f} -> {after.auc:.4f}  (unchanged under a > 0)")

# %% [markdown]
# Histogram of predicted probabilities in ten equal bins, before and after.

# %%
for name, rep in (("before", before), ("after", after)):
    print(f"{name:7s}", " ".join(f"{c:6d}" for c in rep.histogram))
