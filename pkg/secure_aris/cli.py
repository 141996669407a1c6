"""
Command Line Interface
Subcommands for scenario generation, single-placement solves, deployment learning and
the experiment harness
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from .channel import build_channels
from .config import *
from .deploy_rl import grid_search_deploy, train
from .errors import ScenarioError, SecureArisError
from .experiments import (failure_fraction, load_spec, run_experiment, scheme_ablation,
                          summarize, write_table)
from .inner_opt import TransmitStrategy, bcd_solve
from .persistence import channels_from_dict, channels_to_dict, load_json, save_json, to_complex
from .scenario import Placement, default_scenario, desk_scenario, load_scenario, save_scenario
from .secrecy_eval import SearchBudget, worst_case_rate

console = Console()


def _scenario(args):
    if args.scenario:
        return load_scenario(args.scenario)
    return desk_scenario(args.seed) if args.scale == "desk" else default_scenario(args.seed)


def _placement(args) -> Placement:
    return Placement.parse(args.placement)


def cmd_gen_scenario(args) -> int:
    scenario = desk_scenario(args.seed) if args.scale == "desk" else default_scenario(args.seed)
    if args.n_eves is not None:
        scenario = default_scenario(args.seed, n_eves=args.n_eves)
        if args.scale == "desk":
            scenario = scenario.replace(n_fixed=DESK_N_FIXED, n_aris=DESK_N_ARIS,
                                        n_jam_antennas=DESK_N_JAM_ANTENNAS)
    if args.los_model:
        scenario = scenario.replace(los_model=args.los_model)
    save_scenario(scenario, args.out)
    return 0


def cmd_dump_channels(args) -> int:
    scenario = _scenario(args)
    channels = build_channels(scenario, _placement(args), args.seed, args.delta)
    save_json(args.out, channels_to_dict(channels), kind="channels")
    return 0


def cmd_solve_inner(args) -> int:
    scenario = _scenario(args)
    channels = build_channels(scenario, _placement(args), args.seed)
    solution = bcd_solve(channels, max_outer=args.max_outer, jamming=not args.no_jamming,
                         seed=args.seed, dump_path=args.dump_conic)
    payload = solution.to_dict()
    payload["placement"] = list(_placement(args).xy)
    payload["channel_seed"] = args.seed
    payload["channels"] = channels_to_dict(channels)
    save_json(args.out, payload, kind="inner_solution")

    table = Table(title="🛰️ Inner Solution")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Robust rate (b/s/Hz)", f"{solution.robust_rate:.4f}")
    table.add_row("Nominal rate (b/s/Hz)", f"{solution.nominal_rate:.4f}")
    table.add_row("Outer iterations", str(solution.iterations))
    table.add_row("Flags", str(len(solution.flags)))
    console.print(table)
    return 0


def _solution_channels(args, saved):
    """Channels the saved solution was solved on; --placement may only confirm them"""
    placement = Placement(tuple(float(v) for v in saved["placement"]))
    if args.placement is not None and not np.allclose(_placement(args).array, placement.array):
        raise ScenarioError(f"--placement {args.placement} does not match the solution, "
                            f"which was solved at {placement.xy}")
    if "channels" in saved:
        return channels_from_dict(saved["channels"])
    return build_channels(_scenario(args), placement, saved.get("channel_seed", args.seed))


def cmd_eval_worst_case(args) -> int:
    saved = load_json(args.solution)
    channels = _solution_channels(args, saved)
    strategy = TransmitStrategy(theta_A=to_complex(saved["theta_A"]),
                                theta_R=to_complex(saved["theta_R"]), Z=to_complex(saved["Z"]))
    budget = SearchBudget(samples=args.samples, steps=args.steps, seed=args.seed)
    report = worst_case_rate(strategy, channels, budget)
    save_json(args.out, report.to_dict(), kind="worst_case")
    console.print(f"[green]✅ Nominal {report.nominal_rate:.4f} b/s/Hz, worst case "
                  f"{report.worst_case_rate:.4f} b/s/Hz ({report.label})[/green]")
    return 0


def cmd_train_deploy(args) -> int:
    scenario = _scenario(args)
    _, metrics = train(scenario, args.episodes, args.epochs, seed=args.seed, out_dir=args.out)
    tail = metrics.final_rates[-20:]
    if tail:
        console.print(f"[green]✅ Mean final rate over the last {len(tail)} episodes: "
                      f"{sum(tail) / len(tail):.4f} b/s/Hz[/green]")
    return 0


def cmd_grid_search(args) -> int:
    scenario = _scenario(args)
    placement, rate, table = grid_search_deploy(scenario, args.step, args.seed,
                                                workers=args.workers)
    write_table(table, Path(args.out) / "grid.csv")
    save_json(Path(args.out) / "grid_best.json",
              {"placement": list(placement.xy), "robust_rate": rate}, kind="grid_search")
    return 0


def cmd_run_experiment(args) -> int:
    spec = load_spec(args.spec)
    if args.seeds is not None:
        spec.seeds = list(range(args.seeds))
    if spec.experiment == "ablation":
        results = scheme_ablation(spec, args.out, args.workers)
        summary = summarize(results)
        table = Table(title="📊 Scheme comparison (mean b/s/Hz)")
        for column in ("scheme", "nominal_rate", "robust_rate", "worst_case_rate"):
            table.add_column(column, style="cyan" if column == "scheme" else "green")
        for _, row in summary.iterrows():
            table.add_row(row["scheme"], f"{row['nominal_rate']:.4f}",
                          f"{row['robust_rate']:.4f}", f"{row['worst_case_rate']:.4f}")
        console.print(table)
    else:
        results = run_experiment(spec, args.out, args.workers)
    fraction = failure_fraction(results)
    if fraction > EXPERIMENT_FAILURE_LIMIT:
        console.print(f"[red]❌ {fraction:.1%} of runs failed (limit "
                      f"{EXPERIMENT_FAILURE_LIMIT:.0%})[/red]")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secure-aris",
                                     description="Robust aerial-RIS secrecy simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--workers", type=int, default=EXPERIMENT_WORKERS)
    common.add_argument("--scenario", help="scenario file written by gen-scenario")
    common.add_argument("--scale", choices=("desk", "full"), default="desk",
                        help="built-in scenario used when --scenario is not given")
    at = argparse.ArgumentParser(add_help=False)
    at.add_argument("--placement", default="161,89", help="aerial platform position 'X,Y'")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scenario", parents=[common])
    p.add_argument("--out", required=True)
    p.add_argument("--n-eves", type=int)
    p.add_argument("--los-model", choices=("ula", "random"))
    p.set_defaults(func=cmd_gen_scenario)

    p = sub.add_parser("dump-channels", parents=[common, at])
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=float, help="override the uncertainty coefficient")
    p.set_defaults(func=cmd_dump_channels)

    p = sub.add_parser("solve-inner", parents=[common, at])
    p.add_argument("--out", required=True)
    p.add_argument("--max-outer", type=int)
    p.add_argument("--no-jamming", action="store_true")
    p.add_argument("--dump-conic", help="write the first conic subproblem to this file")
    p.set_defaults(func=cmd_solve_inner)

    p = sub.add_parser("eval-worst-case", parents=[common])
    p.add_argument("--placement", help="optional check against the placement stored in the solution")
    p.add_argument("--solution", required=True, help="JSON written by solve-inner")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=WORST_CASE_SAMPLES)
    p.add_argument("--steps", type=int, default=WORST_CASE_STEPS)
    p.set_defaults(func=cmd_eval_worst_case)

    p = sub.add_parser("train-deploy", parents=[common])
    p.add_argument("--episodes", type=int, default=RL_EPISODES)
    p.add_argument("--epochs", type=int, default=RL_EPOCHS_PER_EPISODE)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_deploy)

    p = sub.add_parser("grid-search", parents=[common])
    p.add_argument("--step", type=float, required=True, help="grid spacing in meters")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("run-experiment", parents=[common])
    p.add_argument("--spec", required=True)
    p.add_argument("--out", default=RESULTS_DIR)
    p.add_argument("--seeds", type=int, help="override the number of seeds")
    p.set_defaults(func=cmd_run_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SecureArisError as e:
        console.print(f"[red]❌ Error: {e}[/red]")
        return 2


if __name__ == "__main__":
    sys.exit(main())
