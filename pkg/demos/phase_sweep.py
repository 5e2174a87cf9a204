"""Empirical Type-I/II errors of the two mean-model detectors.

Runs the sweep in ``phase.toml`` (next to this script), prints the table and
writes ``phase.csv`` and ``phase.svg`` beside it.
"""
import os

from sparsedet import ExperimentConfig, emit_phase_csv, emit_phase_plot, run_experiment
from sparsedet.detectors import threshold_level

here = os.path.dirname(os.path.abspath(__file__))
cfg = ExperimentConfig.load(os.path.join(here, "phase.toml"))
print(f"p={cfg.p} k={cfg.k} replicates={cfg.replicates}")
print(f"thresholding guarantee kicks in at lambda > 2 k tau = {2 * cfg.k * threshold_level(cfg.p, 0.1):.1f}")

table = run_experiment(cfg, threads=4)
print(f"{'test':>10} {'lambda':>7} {'type I':>7} {'type II':>8}")
for row in table.rows:
    print(f"{row.test:>10} {row.lam:7.1f} {row.type1_hat:7.3f} {row.type2_hat:8.3f}")

emit_phase_csv(table, cfg.csv_path)
emit_phase_plot(table, cfg.plot_path)
print("wrote", cfg.csv_path, "and", cfg.plot_path)
