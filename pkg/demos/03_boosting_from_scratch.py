"""
Gradient-boosted trees on the driver dataset
============================================

Build the 500-minute synthetic dataset, tune by random search on the
training split, then evaluate on the held-out 30 %. The last cell drops
the four rule-derived features to see how much the raw statistics alone
carry.
"""

import numpy as np

from drive_profiler import gbdt
from drive_profiler.metrics import evaluate
from drive_profiler.pipeline import (apply_normalizer, concat_tables, fit_normalizer,
                                     process_trip, stratified_split)
from drive_profiler.sim import balanced_configs, generate_dataset, total_minutes
from drive_profiler.tune import TrainingPartition, random_search

trips = generate_dataset(balanced_configs(125, 4.0, seed=0))
table = concat_tables([process_trip(t)[1] for t in trips])
print(f"{total_minutes(trips):.0f} minutes -> {len(table)} windows, "
      f"labels {np.bincount(table.labels).tolist()}")

tr, te = stratified_split(table.labels, 0.3, seed=0)
norm = fit_normalizer(table.X[tr])
X_train, X_test = apply_normalizer(norm, table.X[tr]), apply_normalizer(norm, table.X[te])

# %%
best, trials = random_search(TrainingPartition(X_train, table.labels[tr]), n_trials=10, seed=0)
print("best:", best.hyperparameters, f"validation macro F1 {best.f1:.3f}")

model = gbdt.fit(X_train, table.labels[tr], best.hyperparameters)
print(evaluate(table.labels[te], gbdt.predict(model, X_test)).render_table())
print("training loss, every 10th round:", np.round(model.train_loss[::10], 4))

# %%
stats_only = slice(0, 40)
model = gbdt.fit(X_train[:, stats_only], table.labels[tr],
                 gbdt.Hyperparameters(learning_rate=0.1, max_depth=4, n_estimators=50))
r = evaluate(table.labels[te], gbdt.predict(model, X_test[:, stats_only]))
print(f"statistics only: macro F1 {r.macro_f1:.3f}")
