"""
Epoch time: negative sampling against the regularizer
=====================================================

A reduced-size version of the benchmark; ``spkg bench`` runs the full one.
"""

# %%
from spkg.bench import benchmark
from spkg.models import ModelConfig
from spkg.synthetic import random_kg

ds = random_kg(2_000, 20_000, n_relations=10, seed=0)
rows = benchmark(ds, ModelConfig(kind="distmult", dim=50), neg_ratios=(1, 10), batch_size=100)

# %%
for r in rows:
    print(f"n={r.neg_ratio:2d}  neg {r.neg_epoch_ms:7.1f} ms ({r.neg_sampling_pct:4.1f}% sampling)  "
          f"sp {r.sp_epoch_ms:7.1f} ms  reduction {r.reduction_pct:5.1f}%  "
          f"scores {r.neg_scores} vs {r.sp_scores}")
