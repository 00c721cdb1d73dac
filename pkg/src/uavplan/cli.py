"""Command-line front end.

Subcommands: ``train``, ``validate``, ``sweep``, ``oracle``, ``coverage``.
Exit status: 0 success, 1 usage/parse error, 2 depleted, 3 loop,
4 no-fly violation.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .energy import CELL_SIZE_M, SPEED_MPS, BatteryModel, PolicyError, simulate_policy
from .experiments import SuccessMode, SweepConfig, convergence_report, run_sweep, sparkline
from .grid import Action, CellKind, GridMap, MapParseError, RewardTable, load_map, render_map
from .oracle import refuel_shortest_path
from .qlearning import Hyperparams, Policy, QTable, TrainingError, TrainingLog, ValueMap, extract_policy, train
from .radio import (RadioParams, coverage_grid, db_to_linear, feasibility_map, parse_stations,
                    reference_gain, thermal_noise_w)

POLICY_FORMAT = "uavplan-policy/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def scenario_map_text() -> str:
    return resources.files("uavplan").joinpath("data/scenario.map").read_text(encoding="utf-8")


def _cell(text: str):
    try:
        r, c = (int(v) for v in text.replace(" ", "").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'row,col', got {text!r}") from None
    return (r, c)


def _counts(text: str) -> tuple[int, ...]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'A..B' or 'A,B,...', got {text!r}") from None


def _seed(args) -> int:
    if args.seed is None:
        args.seed = random.SystemRandom().randrange(2**31)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _load_grid(args) -> tuple[GridMap, str]:
    if args.map is None:
        text = scenario_map_text()
        source = "bundled:scenario.map"
    else:
        try:
            text = Path(args.map).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read map: {exc}") from None
        source = args.map
    return load_map(text), source


def _battery(args) -> BatteryModel:
    return BatteryModel(args.capacity, args.step_cost, args.reserve)


def _hyper(args) -> Hyperparams:
    return Hyperparams(gamma=args.gamma, alpha0=args.alpha, eps_numerator=args.eps_num,
                       epochs=args.epochs, convergence_threshold=args.threshold,
                       t_increment=args.t_increment)


def _comment_block(config: dict) -> list[str]:
    return ["config " + json.dumps(config, sort_keys=True)]


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def render_policy(grid: GridMap, policy: Policy) -> str:
    """Action letter per cell; ``[R]`` station, ``#R#`` no-fly, ``<R>`` start, `` * `` goal."""
    header = "    " + "".join(f"{c:^3d}" for c in range(grid.cols))
    lines = [header]
    for r in range(grid.rows):
        out = []
        for c in range(grid.cols):
            cell = (r, c)
            kind = grid.kind(cell)
            if kind is CellKind.DESTINATION:
                out.append(" * ")
                continue
            letter = policy[cell].letter if cell in policy else "?"
            if kind is CellKind.START:
                out.append(f"<{letter}>")
            elif kind is CellKind.POWER_STATION:
                out.append(f"[{letter}]")
            elif kind is CellKind.NOFLY:
                out.append(f"#{letter}#")
            else:
                out.append(f" {letter} ")
        lines.append(f"{r:3d} " + "".join(out))
    lines.append("legend: <S> start  [P] power station  #X# no-fly  * destination")
    return "\n".join(lines) + "\n"


def policy_document(grid: GridMap, table: QTable, policy: Policy, values: ValueMap,
                    log: TrainingLog, config: dict) -> dict:
    actions, vals = [], []
    for r in range(grid.rows):
        actions.append("".join(policy[(r, c)].letter if (r, c) in policy else "*"
                               for c in range(grid.cols)))
        vals.append([values[(r, c)] if (r, c) in policy else None for c in range(grid.cols)])
    return {
        "format": POLICY_FORMAT,
        "config": config,
        "rows": grid.rows,
        "cols": grid.cols,
        "start": list(grid.start),
        "destination": list(grid.destination),
        "seed": config["seed"],
        "episodes_run": log.episodes_run,
        "total_updates": log.total_updates,
        "actions": actions,
        "values": vals,
        "q": {f"{r},{c}": {a.letter: v for a, v in qs.items()} for (r, c), qs in table.q.items()},
    }


def read_policy(path) -> tuple[Policy, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != POLICY_FORMAT:
        raise UsageError(f"{path}: not a {POLICY_FORMAT} document")
    action_of = {}
    for r, row in enumerate(doc["actions"]):
        for c, letter in enumerate(row):
            if letter != "*":
                action_of[(r, c)] = Action.from_letter(letter)
    return Policy(action_of), doc


def cmd_train(args) -> int:
    grid, source = _load_grid(args)
    seed = _seed(args)
    hyper = _hyper(args)
    rewards = RewardTable()
    table, log = train(grid, rewards, hyper, seed=seed)
    policy, values = extract_policy(table)
    config = {"command": "train", "map": source, "map_text": render_map(grid), "seed": seed,
              "hyperparams": hyper.as_dict(), "rewards": rewards.as_dict()}
    out = Path(args.out)
    doc = policy_document(grid, table, policy, values, log, config)
    _write(out / "policy.json", json.dumps(doc, indent=1) + "\n")

    comments = _comment_block(config)
    deltas = [f"# {c}" for c in comments] + ["episode,delta"]
    deltas += [f"{i},{d!r}" for i, d in enumerate(log.deltas, start=1)]
    _write(out / "deltas.csv", "\n".join(deltas) + "\n")
    window = min(args.window, len(log.deltas))
    report = convergence_report(log, window, args.threshold if args.threshold > 0 else 1e-3)
    _write(out / "convergence.csv", report.to_csv(comments))

    picture = render_policy(grid, policy)
    _write(out / "policy.txt", "".join(f"# {c}\n" for c in comments) + picture)
    print(picture, end="")
    print(f"episodes: {log.episodes_run}  updates: {log.total_updates}  "
          f"converged_at: {report.converged_at}")
    trace = simulate_policy(grid, policy, BatteryModel())
    print(f"from start: {trace.summary()}")
    return 0


def cmd_validate(args) -> int:
    grid, source = _load_grid(args)
    policy, doc = read_policy(args.policy)
    if (doc["rows"], doc["cols"]) != grid.shape:
        raise UsageError(f"policy is {doc['rows']}x{doc['cols']} but map is "
                         f"{grid.rows}x{grid.cols}")
    battery = _battery(args)
    start = args.start if args.start is not None else grid.start
    trace = simulate_policy(grid, policy, battery, start, args.cell_size, args.speed)
    config = {"command": "validate", "map": source, "policy_seed": doc.get("seed"),
              "start": list(start), "battery": battery.as_dict(),
              "cell_size": args.cell_size, "speed": args.speed}
    print(trace.summary())
    if args.out:
        text = "".join(f"# {c}\n" for c in _comment_block(config)) + trace.to_csv()
        text += f"# summary {trace.summary()}\n"
        _write(Path(args.out), text)
    return trace.outcome.exit_status


def cmd_sweep(args) -> int:
    seed = _seed(args)
    config = SweepConfig(
        grid_dims=(args.rows, args.cols), extra_ps_counts=args.counts,
        trials_per_count=args.trials, nofly_count=args.nofly, seed=seed,
        success_mode=SuccessMode(args.mode), start=args.start, destination=args.dest,
        battery=_battery(args), use_learner=args.learner,
        learner_hyper=_hyper(args))
    result = run_sweep(config, jobs=args.jobs)
    meta = config.as_dict()
    if args.learner:
        meta["learner_hyper"] = config.learner_hyper.as_dict()
    csv = result.to_csv(_comment_block(meta))
    if args.out:
        _write(Path(args.out), csv)
    print(csv, end="")
    probs = [e.probability for e in result.entries]
    print(f"probability vs extra PS ({result.entries[0].extra_ps}..{result.entries[-1].extra_ps}):")
    print("|" + sparkline(probs) + "|")
    return 0


def cmd_oracle(args) -> int:
    grid, source = _load_grid(args)
    battery = _battery(args)
    start = args.start if args.start is not None else grid.start
    result = refuel_shortest_path(grid, battery, start)
    if result is None:
        text = "infeasible\n"
    else:
        text = f"length {result.length}\npath " + " ".join(f"{r},{c}" for r, c in result.path) + "\n"
    print(text, end="")
    if args.out:
        config = {"command": "oracle", "map": source, "start": list(start),
                  "battery": battery.as_dict()}
        _write(Path(args.out), "".join(f"# {c}\n" for c in _comment_block(config)) + text)
    return 0


def cmd_coverage(args) -> int:
    if args.snr_min is not None and args.snr_min_db is not None:
        raise UsageError("give --snr-min or --snr-min-db, not both")
    snr_min = args.snr_min if args.snr_min is not None else db_to_linear(
        args.snr_min_db if args.snr_min_db is not None else 10.0)
    gain = args.gain_ref if args.gain_ref is not None else reference_gain(args.cf)
    noise = args.noise if args.noise is not None else thermal_noise_w(20e6)
    try:
        text = Path(args.stations).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read stations: {exc}") from None
    stations = parse_stations(text, args.gbs_alt, args.abs_alt)
    params = RadioParams(args.tx_power, gain, noise, snr_min, args.uav_alt, args.gbs_alt, args.cf)
    fmap = feasibility_map((args.rows, args.cols), args.cell_size, stations, params)
    if fmap.no_stations:
        print("warning: no base stations given; every cell is infeasible", file=sys.stderr)
    grid = coverage_grid(fmap, args.start, args.dest, args.ps)
    config = {"command": "coverage", "stations": args.stations, "tx_power": args.tx_power,
              "gain_ref": gain, "noise": noise, "snr_min": snr_min, "uav_alt": args.uav_alt,
              "gbs_alt": args.gbs_alt, "abs_alt": args.abs_alt, "cf": args.cf,
              "cell_size": args.cell_size, "rows": args.rows, "cols": args.cols,
              "start": list(args.start), "dest": list(args.dest),
              "ps": [list(p) for p in args.ps]}
    text = "".join(f"# {c}\n" for c in _comment_block(config)) + render_map(grid)
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text, end="")
    print(f"feasible cells: {fmap.count}/{args.rows * args.cols}", file=sys.stderr)
    return 0


def _add_battery(p):
    g = p.add_argument_group("battery")
    g.add_argument("--capacity", type=float, default=1.0)
    g.add_argument("--step-cost", type=float, default=0.1)
    g.add_argument("--reserve", type=float, default=0.0)


def _add_training(p):
    g = p.add_argument_group("training")
    d = Hyperparams()
    g.add_argument("--epochs", type=int, default=d.epochs)
    g.add_argument("--gamma", type=float, default=d.gamma)
    g.add_argument("--alpha", type=float, default=d.alpha0)
    g.add_argument("--eps-num", type=float, default=d.eps_numerator)
    g.add_argument("--t-increment", type=float, default=d.t_increment,
                   help="advance of the exploration clock t per episode")
    g.add_argument("--threshold", type=float, default=d.convergence_threshold,
                   help="early-stop delta threshold; 0 disables early stopping")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uavplan", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="learn a policy with Q-learning")
    p.add_argument("--map", help="map file (default: bundled 20x20 scenario)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--window", type=int, default=100, help="convergence window")
    _add_training(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("validate", help="fly a policy and check the battery")
    p.add_argument("--map")
    p.add_argument("--policy", required=True)
    p.add_argument("--start", type=_cell)
    p.add_argument("--seed", type=int, help="unused; accepted for uniformity")
    p.add_argument("--out", help="trace CSV path")
    p.add_argument("--cell-size", type=float, default=CELL_SIZE_M)
    p.add_argument("--speed", type=float, default=SPEED_MPS, help="m/s")
    _add_battery(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="success probability vs random station count")
    p.add_argument("--counts", type=_counts, default=tuple(range(51)))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--mode", choices=[m.value for m in SuccessMode], default="start")
    p.add_argument("--learner", action="store_true",
                   help="judge trials by a trained policy instead of the exact oracle")
    p.add_argument("--nofly", type=int, default=0, help="random no-fly cells per trial")
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--cols", type=int, default=20)
    p.add_argument("--start", type=_cell, default=(1, 1))
    p.add_argument("--dest", type=_cell, default=(14, 14))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="CSV path")
    _add_battery(p)
    _add_training(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="exact minimum-move mission with recharging")
    p.add_argument("--map")
    p.add_argument("--start", type=_cell)
    p.add_argument("--seed", type=int, help="unused; accepted for uniformity")
    p.add_argument("--out")
    _add_battery(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("coverage", help="map file from base-station coverage")
    p.add_argument("--stations", required=True)
    p.add_argument("--tx-power", type=float, default=0.1, help="W")
    p.add_argument("--gain-ref", type=float, help="linear gain at 1 m (default from path loss)")
    p.add_argument("--noise", type=float, help="W (default: thermal noise over 20 MHz)")
    p.add_argument("--snr-min", type=float, help="linear")
    p.add_argument("--snr-min-db", type=float, help="dB (default 10)")
    p.add_argument("--uav-alt", type=float, default=120.0)
    p.add_argument("--gbs-alt", type=float, default=25.0)
    p.add_argument("--abs-alt", type=float, default=100.0)
    p.add_argument("--cf", type=float, default=2e9)
    p.add_argument("--cell-size", type=float, default=800.0)
    p.add_argument("--rows", type=int, default=20)
    p.add_argument("--cols", type=int, default=20)
    p.add_argument("--start", type=_cell, default=(1, 1))
    p.add_argument("--dest", type=_cell, default=(14, 14))
    p.add_argument("--ps", type=_cell, action="append", default=[], help="station cell, repeatable")
    p.add_argument("--seed", type=int, help="unused; accepted for uniformity")
    p.add_argument("--out", help="map file path (default stdout)")
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MapParseError, TrainingError, PolicyError, ValueError) as exc:
        print(f"uavplan {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
