"""Command-line entry point.

Exit codes: 0 success, 1 feeder parse error, 2 power flow diverged,
3 invalid flags (including oversized sweeps), 4 an inequality or policy
ordering was violated.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .analysis import (
    CASE_CLASSES,
    CaseId,
    Mode,
    TooLarge,
    brute_force_best,
    certify_case,
    random_case,
)
from .control import Policy, apply_heuristic, apply_no_action, apply_policy
from .feeder import RadialFeeder, classify_node
from .feederfile import FeederParseError, dump_feeder, load_feeder
from .powerflow import Diverged, SolvedState, SolverConfig, solve
from .report import ANGLE_NOTE, Report

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_DIVERGED = 2
EXIT_FLAGS = 3
EXIT_VIOLATION = 4

POLICIES = {"none": Policy.no_action, "heuristic": Policy.heuristic}
MODES = {"closed": [Mode.CLOSED_FORM], "exact": [Mode.EXACT], "both": [Mode.CLOSED_FORM, Mode.EXACT]}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radialflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def feeder_command(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("feeder", help="feeder file (YAML)")
        p.add_argument("--tolerance", type=_positive_float, default=SolverConfig.tolerance)
        p.add_argument("--output", help="write a JSON report here and a PNG figure beside it")
        p.add_argument("--echo", help="write the validated feeder back out to this path")
        return p

    p = feeder_command("solve", "solve one feeder under a policy")
    p.add_argument("--policy", choices=sorted(POLICIES), default="heuristic")

    feeder_command("compare", "compare no-action and heuristic losses")

    p = feeder_command("sweep", "brute-force setpoint grid search")
    p.add_argument("--grid", type=int, default=11, help="grid points per controllable bus")

    p = sub.add_parser("verify", help="randomized loss-ordering certification")
    p.add_argument("--cases", default="all", help="comma-separated case ids or 'all'")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=sorted(MODES), default="both")
    p.add_argument("--tolerance", type=_positive_float, default=SolverConfig.tolerance)
    p.add_argument("--output", help="write a JSON report here and a PNG figure beside it")
    return parser


def _finish(report: Report, args, out: TextIO, figure=None) -> None:
    report.write(out)
    if args.output:
        report.save_json(args.output)
        if figure is not None:
            figure(args.output)


def _echo(feeder: RadialFeeder, args) -> None:
    if getattr(args, "echo", None):
        Path(args.echo).write_text(dump_feeder(feeder))


def _state_lines(report: Report, feeder: RadialFeeder, state: SolvedState, profile) -> None:
    for bus in feeder.buses:
        report.add(
            "bus",
            id=bus.id,
            v_mag=float(state.v_mag[bus.id]),
            angle_rad=float(state.angle[bus.id]),
            q_gen=float(profile.get(bus.id, 0.0)),
            node_class=classify_node(bus).value,
        )
    for k in feeder.order:
        bus = feeder.buses[k]
        if bus.is_slack:
            continue
        i = complex(state.branch_currents[k])
        report.add("branch", parent=bus.parent, to=k, i_re=i.real, i_im=i.imag, i_mag=abs(i))


def cmd_solve(args, out: TextIO) -> int:
    feeder = load_feeder(args.feeder)
    _echo(feeder, args)
    config = SolverConfig(tolerance=args.tolerance)
    profile = apply_policy(feeder, POLICIES[args.policy]())
    state = solve(feeder, profile, config)

    report = Report("solve")
    report.comment(f"radialflow solve feeder={Path(args.feeder).name} policy={args.policy}")
    report.comment(ANGLE_NOTE)
    _state_lines(report, feeder, state, profile)
    report.add(
        "summary",
        policy=args.policy,
        total_loss=state.total_loss,
        iterations=state.iterations,
        residual=state.residual,
    )

    def figure(output):
        from .plotting import figure_path, plot_voltage_profiles

        plot_voltage_profiles(
            {args.policy: state.v_mag.tolist()}, figure_path(output), title="voltage profile"
        )

    _finish(report, args, out, figure)
    return EXIT_OK


def cmd_compare(args, out: TextIO) -> int:
    feeder = load_feeder(args.feeder)
    _echo(feeder, args)
    config = SolverConfig(tolerance=args.tolerance)
    profiles = {"none": apply_no_action(feeder), "heuristic": apply_heuristic(feeder)}
    states = {name: solve(feeder, prof, config) for name, prof in profiles.items()}
    loss_none = states["none"].total_loss
    loss_heur = states["heuristic"].total_loss
    reduction = 100.0 * (loss_none - loss_heur) / loss_none if loss_none > 0 else 0.0

    report = Report("compare")
    report.comment(f"radialflow compare feeder={Path(args.feeder).name}")
    report.comment(ANGLE_NOTE)
    if not feeder.controllable:
        report.comment("note: no controllable buses")
    for bus_id in feeder.controllable:
        report.add(
            "setpoint",
            bus=bus_id,
            node_class=classify_node(feeder.buses[bus_id]).value,
            none=profiles["none"][bus_id],
            heuristic=profiles["heuristic"][bus_id],
        )
    violated = loss_heur > loss_none
    report.add(
        "summary",
        loss_none=loss_none,
        loss_heuristic=loss_heur,
        reduction_pct=reduction,
        controllable=len(feeder.controllable),
        violation=violated,
    )
    if violated:
        msg = f"VIOLATION: heuristic loss {loss_heur!r} exceeds no-action loss {loss_none!r}"
        report.comment(msg)
        print(msg, file=sys.stderr)

    def figure(output):
        from .plotting import figure_path, plot_voltage_profiles

        plot_voltage_profiles(
            {name: st.v_mag.tolist() for name, st in states.items()},
            figure_path(output),
            title=f"loss reduction {reduction:.2f}%",
        )

    _finish(report, args, out, figure)
    return EXIT_VIOLATION if violated else EXIT_OK


def cmd_sweep(args, out: TextIO) -> int:
    feeder = load_feeder(args.feeder)
    _echo(feeder, args)
    if args.grid < 2:
        raise UsageError(f"--grid must be at least 2, got {args.grid}")
    config = SolverConfig(tolerance=args.tolerance)
    best = brute_force_best(feeder, args.grid, config)
    heur = apply_heuristic(feeder)
    base = apply_no_action(feeder)
    loss_heur = solve(feeder, heur, config).total_loss
    loss_none = solve(feeder, base, config).total_loss
    gap = loss_heur - best.loss

    report = Report("sweep")
    report.comment(f"radialflow sweep feeder={Path(args.feeder).name} grid={args.grid}")
    for bus_id in feeder.controllable:
        report.add(
            "setpoint",
            bus=bus_id,
            node_class=classify_node(feeder.buses[bus_id]).value,
            best=best.profile[bus_id],
            heuristic=heur[bus_id],
            q_max=feeder.buses[bus_id].q_max,
        )
    report.add(
        "summary",
        grid=args.grid,
        evaluated=best.evaluated,
        diverged=best.diverged,
        best_loss=best.loss,
        heuristic_loss=loss_heur,
        no_action_loss=loss_none,
        gap=gap,
        gap_pct=100.0 * gap / loss_heur if loss_heur > 0 else 0.0,
    )

    def figure(output):
        from .plotting import figure_path, plot_sweep

        ids = list(feeder.controllable)
        plot_sweep(
            ids,
            {"best": [best.profile[i] for i in ids], "heuristic": [heur[i] for i in ids]},
            [feeder.buses[i].q_max for i in ids],
            figure_path(output),
            title=f"grid={args.grid} gap={gap:.3e} pu",
        )

    _finish(report, args, out, figure)
    return EXIT_OK


def _parse_cases(text: str) -> list[CaseId]:
    if text.strip().lower() == "all":
        return list(CASE_CLASSES)
    try:
        cases = [CaseId.parse(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not cases:
        raise UsageError("--cases is empty")
    return list(dict.fromkeys(cases))


def cmd_verify(args, out: TextIO) -> int:
    cases = _parse_cases(args.cases)
    if args.trials < 1:
        raise UsageError(f"--trials must be at least 1, got {args.trials}")
    config = SolverConfig(tolerance=args.tolerance)
    modes = MODES[args.mode]

    report = Report("verify")
    report.comment(
        "radialflow verify cases={} trials={} seed={} mode={} tolerance={!r}".format(
            ",".join(c.value for c in cases), args.trials, args.seed, args.mode, args.tolerance
        )
    )
    report.comment("each trial: case = random_case(seed, classes); claim loss_left < loss_right")
    passed = total = diverged = 0
    for case_id in cases:
        classes = CASE_CLASSES[case_id]
        for mode in modes:
            n_pass = 0
            margins = []
            for i in range(args.trials):
                seed = args.seed + i
                case = random_case(seed, classes)
                total += 1
                try:
                    v = certify_case(case, case_id, mode, config)
                except Diverged as exc:
                    diverged += 1
                    report.add("diverged", case=case_id.value, seed=seed, mode=mode.value,
                               iterations=exc.iterations)
                    continue
                n_pass += v.holds
                margins.append(v.margin)
                report.add(
                    "trial",
                    case=case_id.value,
                    seed=seed,
                    mode=mode.value,
                    m_class=classes[0].value,
                    m1_class=classes[1].value,
                    loss_baseline=float(v.losses["baseline"]),
                    loss_heuristic=float(v.losses["heuristic"]),
                    loss_saturated=float(v.losses["saturated"]),
                    left=float(v.loss_left),
                    right=float(v.loss_right),
                    margin=float(v.margin),
                    verdict="pass" if v.holds else "FAIL",
                    iterations=v.iterations,
                )
            passed += n_pass
            report.add(
                "case_summary",
                case=case_id.value,
                mode=mode.value,
                passed=n_pass,
                total=args.trials,
                min_margin=float(min(margins)) if margins else float("nan"),
            )
    report.add("summary", passed=passed, total=total, diverged=diverged)

    def figure(output):
        from .plotting import figure_path, plot_margins

        plot_margins(report.records, figure_path(output))

    _finish(report, args, out, figure)
    if diverged:
        return EXIT_DIVERGED
    return EXIT_OK if passed == total else EXIT_VIOLATION


COMMANDS = {"solve": cmd_solve, "compare": cmd_compare, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv: Sequence[str] | None = None, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except FeederParseError as exc:
        print(f"radialflow: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except Diverged as exc:
        print(f"radialflow: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except TooLarge as exc:
        print(f"radialflow: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except UsageError as exc:
        print(f"radialflow: error: {exc}", file=sys.stderr)
        return EXIT_FLAGS


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
