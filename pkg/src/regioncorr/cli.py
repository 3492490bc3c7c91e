"""Command-line interface.

Four subcommands drive the library end to end::

    regioncorr simulate    write one simulated dataset file
    regioncorr estimate    run one estimator on a dataset file
    regioncorr limits      print the theoretical limits for a config
    regioncorr experiment  run the full Monte Carlo grid, write CSVs

Every subcommand accepts ``--config <path>`` (an INI file as documented
in :mod:`regioncorr.config`); without it the built-in reference study
configuration is used.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config, parse_config, reference_config_text
from .estimators import EstimatorConfig, canonical_method, estimate
from .harness import DEFAULT_MASTER_SEED, run_experiment, write_outputs
from .limits import limit_of
from .model import load_dataset, save_dataset, simulate


def _load(args, **run_kwargs):
    if getattr(args, "config", None):
        return load_config(args.config, **run_kwargs)
    return parse_config(reference_config_text(), **run_kwargs)


def _cmd_simulate(args) -> int:
    cfg = _load(args)
    by_id = {s.id: s for s in cfg.scenarios}
    if args.scenario and args.scenario not in by_id:
        print(f"error: unknown scenario {args.scenario!r}; "
              f"choose from {sorted(by_id)}", file=sys.stderr)
        return 2
    scenario = by_id[args.scenario] if args.scenario else cfg.scenarios[0]
    params = cfg.scenario_params(scenario)
    ds = simulate(params, args.T, args.seed)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: scenario {scenario.id}, "
          f"{ds.n_voxels} voxels x T={ds.T}, seed={ds.seed}")
    return 0


def _cmd_estimate(args) -> int:
    ds = load_dataset(args.data)
    params = ds.params
    method = canonical_method(args.method)
    donors = {}
    if method in ("D", "LD", "RD", "LRD"):
        if args.donor_k and args.donor_kp:
            donors = {"donor_k": args.donor_k, "donor_kp": args.donor_kp}
        else:
            spare = [r.id for r in params.regions if r.id not in params.targets]
            if len(spare) < 2:
                print("error: dataset has no two donor regions; pass "
                      "--donor-k/--donor-kp", file=sys.stderr)
                return 2
            donors = {"donor_k": spare[0], "donor_kp": spare[1]}
    cfg = EstimatorConfig(method=method, target_j=params.targets[0],
                          target_jp=params.targets[1], **donors,
                          nu=args.nu, delta=args.delta, B=args.B,
                          sampler_seed=args.seed)
    res = estimate(ds, cfg)
    lim = limit_of(params, cfg)
    print(f"method={method} estimate={res.value:.6f} limit={lim:.6f} "
          f"draws_used={res.draws_used} discarded={res.discarded}")
    return 0


def _cmd_limits(args) -> int:
    cfg = _load(args)
    print(f"{'scenario':<20} {'method':<6} {'limit':>10}")
    for scenario in cfg.scenarios:
        params = cfg.scenario_params(scenario)
        for m in cfg.methods:
            print(f"{scenario.id:<20} {m.method:<6} "
                  f"{limit_of(params, m):>10.6f}")
    return 0


def _cmd_experiment(args) -> int:
    reps = 500 if args.full else args.reps
    cfg = _load(args, reps=reps, T=args.T, master_seed=args.seed,
                n_jobs=args.jobs)
    summaries = run_experiment(cfg)
    paths = write_outputs(summaries, args.out, plots=args.plots)
    n_err = sum(len(s.errors) for s in summaries)
    print(f"ran {len(cfg.scenarios)} scenarios x {len(cfg.methods)} methods "
          f"x {cfg.reps} reps (T={cfg.T}, seed={cfg.master_seed})")
    if n_err:
        print(f"warning: {n_err} (scenario, method, rep) cells errored; "
              f"see summaries")
    for p in paths:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regioncorr",
        description="Inter-region correlation estimators, their exact "
                    "limits, and the Monte Carlo study grid.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write one simulated dataset file")
    p_sim.add_argument("--config", help="experiment config file (INI)")
    p_sim.add_argument("--scenario", help="scenario id (default: first)")
    p_sim.add_argument("--T", type=int, default=1000, help="samples per voxel")
    p_sim.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    p_sim.add_argument("--out", required=True, help="output dataset path")
    p_sim.set_defaults(func=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="run one estimator on a dataset")
    p_est.add_argument("data", help="dataset file written by 'simulate'")
    p_est.add_argument("--method", required=True,
                       help="CA AC ACt LCA R LR D LD RD or LRD")
    p_est.add_argument("--nu", type=int, default=1)
    p_est.add_argument("--delta", type=int, default=None)
    p_est.add_argument("--B", type=int, default=100)
    p_est.add_argument("--seed", type=int, default=0, help="sampler seed")
    p_est.add_argument("--donor-k", help="donor region id (D family)")
    p_est.add_argument("--donor-kp", help="second donor region id (D family)")
    p_est.set_defaults(func=_cmd_estimate)

    p_lim = sub.add_parser("limits", help="print theoretical limits")
    p_lim.add_argument("--config", help="experiment config file (INI)")
    p_lim.set_defaults(func=_cmd_limits)

    p_exp = sub.add_parser("experiment", help="run the Monte Carlo grid")
    p_exp.add_argument("--config", help="experiment config file (INI)")
    p_exp.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    p_exp.add_argument("--reps", type=int, default=100)
    p_exp.add_argument("--T", type=int, default=1000)
    p_exp.add_argument("--out", default="out", help="output directory")
    p_exp.add_argument("--full", action="store_true",
                       help="run 500 replications (overrides --reps)")
    p_exp.add_argument("--jobs", type=int, default=1, help="worker threads")
    p_exp.add_argument("--plots", action="store_true",
                       help="also write per-scenario boxplot SVGs")
    p_exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
