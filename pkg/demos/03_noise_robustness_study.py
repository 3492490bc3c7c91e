"""A desk-scale replication study driven by a configuration file.

Runs a reduced version of the full Monte Carlo grid (small regions, few
replications) from an inline INI config, prints the per-cell summary
against the exact limits, writes the two CSV outputs and, when
matplotlib is installed, one boxplot per scenario.

The full-size study (20^2 and 40^2 regions, 100 replications, T = 1000)
is the same machinery: `regioncorr experiment --out results` or
`run_experiment(default_config())`; expect ~10 minutes for that one.

Run:  python3 demos/03_noise_robustness_study.py
"""

from pathlib import Path

from regioncorr import parse_config, run_experiment, write_outputs

CONFIG = """\
[layout]
regions = j jp k kp
shape_j = 8 8
sigma_j = 1.0
shape_jp = 12 12
sigma_jp = 2.0
shape_k = 8 8
sigma_k = 1.0
shape_kp = 8 8
sigma_kp = 1.0
targets = j jp
donors = k kp
inter_r = 0.6
gap = 2

[intra]
smooth = 300 0.9
rough = 60 0.6

[scenarios]
smooth-none = smooth off off
smooth-local = smooth 0 off
smooth-global = smooth off 0
rough-none = rough off off

[methods]
ca =
ac =
lca = nu=1
r = delta=1
lr = nu=1 delta=1
d =
rd = delta=1
"""

cfg = parse_config(CONFIG, reps=30, T=500, master_seed=2024)
print(f"grid: {len(cfg.scenarios)} scenarios x {len(cfg.methods)} methods "
      f"x {cfg.reps} reps, T={cfg.T}")

summaries = run_experiment(cfg)

print(f"\n{'scenario':<14} {'method':<5} {'mean':>8} {'sd':>7} "
      f"{'limit':>8} {'bias':>8}")
for s in summaries:
    print(f"{s.scenario.id:<14} {s.method:<5} {s.mean:8.4f} {s.sd:7.4f} "
          f"{s.limit:8.4f} {s.bias_vs_limit:+8.4f}")

out = Path("demo_study_out")
try:
    paths = write_outputs(summaries, out, plots=True)
except RuntimeError:  # matplotlib missing: CSVs only
    paths = write_outputs(summaries, out, plots=False)
print("\nwrote:")
for p in paths:
    print(f"  {p}")
