"""
Privacy-Budget Planner CLI
==========================

Subcommands:

    python run_planner.py run configs/default.conf
    python run_planner.py sweep "configs/*.conf"
    python run_planner.py bench-bandit configs/bench.conf
    python run_planner.py validate configs/default.conf

Exit code 0 on success. Failures print one line to stderr,
``ERROR <ErrorClass>: message``, and exit 2 for planner errors, 1 otherwise.
"""

import argparse
import glob
import os
import sys

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from config import configure_logging
from app.errors import ConfigError, PlannerError
from app.run_config import load_run_config, load_run_configs


def display_banner(title: str):
    print("=" * 70)
    print(f"  {title}")
    print("=" * 70)
    print()


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_run(args) -> int:
    from scripts.experiment_runner import run_experiment

    config = load_run_config(args.config)
    display_banner("🔐 PRIVACY-BUDGET PLANNER - RUN")
    print(f"📋 Policy: {config.policy}   Mechanism: {config.mechanism}   "
          f"ε_total: {config.eps_total:g}   T: {config.horizon}   Seed: {config.seed}")
    print()

    result = run_experiment(config)

    summary = result.summary
    print(f"   ✅ Rounds executed: {summary['rounds_executed']}")
    print(f"   📉 Final RMSE: {summary['final_rmse']:.5f}   Final F1: {summary['final_f1']:.4f}")
    print(f"   💰 Total ε spent: {summary['total_eps_spent']:.4g}")
    print()
    print("📁 Files written:")
    for path in result.paths.values():
        print(f"   • {path}")
    return 0


def cmd_sweep(args) -> int:
    from scripts.sweep_runner import sweep

    paths = sorted(glob.glob(args.pattern))
    if not paths:
        raise ConfigError(f"no config files match '{args.pattern}'")
    configs = [config for path in paths for config in load_run_configs(path)]

    display_banner("🔁 PRIVACY-BUDGET PLANNER - SWEEP")
    print(f"📋 {len(configs)} configurations from {len(paths)} file(s)")
    print()

    result = sweep(configs, seeds=args.seeds, n_jobs=args.jobs, output_dir=args.output)

    failed = int(result.aggregate['n_failed'].sum())
    print(f"   ✅ Grid cells: {len(result.aggregate)}   Runs: {len(result.runs)}   Failed: {failed}")
    if not result.improvement.empty:
        mean_gain = result.improvement['improvement_pct'].mean()
        print(f"   📈 Mean RMSE improvement over baselines: {mean_gain:.2f}%")
    print()
    return 0


def cmd_bench(args) -> int:
    from scripts.bandit_bench import run_bench

    config = load_run_config(args.config)
    display_banner("🎰 PRIVACY-BUDGET PLANNER - BANDIT BENCH")
    print(f"📋 T: {config.horizon}   Actions: {config.num_actions}   Seeds: {config.seeds}")
    print()

    report = run_bench(config)

    per_seed = report.per_seed
    wins = int((per_seed['cumulative_reward'] > per_seed['random_cumulative_reward']).sum())
    shrinking = int((per_seed['second_half_regret'] < per_seed['first_half_regret']).sum())
    print(f"   🏆 Beats uniform-random: {wins}/{len(per_seed)} seeds")
    print(f"   📉 Regret shrinks in the second half: {shrinking}/{len(per_seed)} seeds")
    print()
    return 0


def cmd_validate(args) -> int:
    configs = load_run_configs(args.config)
    print(f"✅ {args.config}: {len(configs)} valid configuration(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='run_planner',
                                     description='Privacy-budget planner for federated recommenders')
    parser.add_argument('--log-level', default=None, help='override LOG_LEVEL')
    subcommands = parser.add_subparsers(dest='command', required=True)

    run = subcommands.add_parser('run', help='run one configuration')
    run.add_argument('config')
    run.set_defaults(handler=cmd_run)

    sweep = subcommands.add_parser('sweep', help='run every configuration matching a glob over several seeds')
    sweep.add_argument('pattern')
    sweep.add_argument('--seeds', type=int, default=None)
    sweep.add_argument('--jobs', type=int, default=None)
    sweep.add_argument('--output', default=None)
    sweep.set_defaults(handler=cmd_sweep)

    bench = subcommands.add_parser('bench-bandit', help='allocator regret on the synthetic bandit')
    bench.add_argument('config')
    bench.set_defaults(handler=cmd_bench)

    validate = subcommands.add_parser('validate', help='parse and validate a configuration file')
    validate.add_argument('config')
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except PlannerError as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("ERROR KeyboardInterrupt: interrupted by user", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
