"""
Scores, the tanh cap and the all-triples sum
============================================

Run with ``python notebooks/01_scores_and_sums.py`` or open as a percent-format notebook.
"""

# %%
import numpy as np

from spkg.models import EmbeddingModel, ModelConfig, score_constrained, score_raw
from spkg.objectives import brute_force_score_sum, factorized_score_sum

rng = np.random.default_rng(0)
model = EmbeddingModel(ModelConfig(kind="simple", dim=8, cap=5.0), 10, 3)
for name in model.table_names:
    model.params[name] = rng.uniform(-2, 2, size=model.params[name].shape)

# %% [markdown]
# Raw bilinear scores are unbounded; the capped score stays inside (-5, 5).

# %%
h, r, t = rng.integers(10, size=200), rng.integers(3, size=200), rng.integers(10, size=200)
print("raw range:      ", score_raw(model, h, r, t).min(), score_raw(model, h, r, t).max())
print("capped range:   ", score_constrained(model, h, r, t).min(), score_constrained(model, h, r, t).max())

# %% [markdown]
# The sum over every (h, r, t) in E x R x E factorizes into per-dimension sums.
# Enumerating all 300 triples and the closed form agree to rounding error.

# %%
es, rs = np.arange(10), np.arange(3)
print("brute force:", brute_force_score_sum(model, es, rs))
print("factorized: ", factorized_score_sum(model, es, rs))
print("vector reads:", model.counters.vector_reads, "triple scores:", model.counters.triple_scores)
