import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from app.core.aaa import build_process, clinical_policy_55, params_horizon
from app.core.analyzer import Analyzer, policy_grid, qaly_map, render_ascii
from app.core.config import settings
from app.core.errors import AaaMdpError, InvalidParametersError
from app.core.logging import logger
from app.core.mdp import evaluate_policy, validate_process
from app.core.storage import Storage, load_policy_grid
from app.models.enums import BIN_LABELS, ParameterFamily, TerminalMode
from app.models.grid import Provenance
from app.models.manifest import RunManifest
from app.models.parameters import PerturbationSpec
from app.services.param_io import file_digest, load_parameters


def _width(text: str):
    family, sep, fraction = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected FAMILY=FRACTION, got {text!r}")
    try:
        return ParameterFamily(family.strip()), float(fraction)
    except ValueError:
        families = ", ".join(f.value for f in ParameterFamily)
        raise argparse.ArgumentTypeError(f"bad width {text!r}; families: {families}") from None


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _label_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aaa-mdp",
        description="QALY-optimal AAA surgery policies by finite-horizon dynamic programming.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", type=Path, default=settings.DEFAULT_PARAMS_PATH, help="parameter file (JSON)")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--terminal", choices=[m.value for m in TerminalMode], default=settings.TERMINAL_REWARD,
                        help="terminal reward at the maximal age: c(N) or zero")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="optimal policy and value map")

    evaluate = sub.add_parser("evaluate", parents=[common], help="value map of a given policy")
    evaluate.add_argument(
        "--policy",
        default="p55",
        help="opt, p55 or a policy CSV path; a CSV writes policy_external.* and value_external.*",
    )

    sub.add_parser("compare", parents=[common], help="QALY gain of the optimal policy over the 55 mm policy")

    sensitivity = sub.add_parser("sensitivity", parents=[common], help="perturbation ratio grid")
    sensitivity.add_argument("--replicates", type=int, default=settings.DEFAULT_REPLICATES)
    sensitivity.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    sensitivity.add_argument("--width", type=_width, action="append", default=None,
                             metavar="FAMILY=FRACTION", help="relative half-width per family (repeatable)")
    sensitivity.add_argument("--workers", type=int, default=settings.SENSITIVITY_WORKERS)

    bias = sub.add_parser("bias", parents=[common], help="policy grids under scaled rupture risks")
    bias.add_argument("--factors", type=_float_list, default=_float_list(settings.DEFAULT_BIAS_FACTORS))
    bias.add_argument("--bins", type=_label_list, default=_label_list(settings.DEFAULT_BIAS_BINS))

    sub.add_parser("validate", parents=[common], help="check a parameter file and the process built from it")
    return parser


def _manifest(args, params, **extra) -> RunManifest:
    return RunManifest(
        command=args.command,
        tool_version=settings.VERSION,
        parameter_path=str(args.params),
        parameter_digest=file_digest(args.params),
        start_age=params.start_age,
        max_age=params.max_age,
        terminal=args.terminal,
        **extra,
    )


def _provenance(args) -> Provenance:
    return Provenance(parameter_digest=file_digest(args.params), terminal=args.terminal)


def cmd_solve(args) -> int:
    params = load_parameters(args.params)
    analyzer = Analyzer(terminal=args.terminal)
    policy, values = analyzer.solve(params)

    storage = Storage(args.out)
    grid = policy_grid(policy, _provenance(args))
    storage.save_grid(grid, "policy_opt")
    storage.save_grid(qaly_map(values, _provenance(args)), "value_opt")
    storage.save_manifest(_manifest(args, params))
    print(render_ascii(grid))
    return 0


def cmd_evaluate(args) -> int:
    params = load_parameters(args.params)
    horizon = params_horizon(params)
    analyzer = Analyzer(terminal=args.terminal)

    if args.policy == "opt":
        policy, values = analyzer.solve(params)
        tag = "opt"
    else:
        if args.policy == "p55":
            policy, tag = clinical_policy_55(horizon), "p55"
        else:
            policy, tag = load_policy_grid(args.policy, horizon), "external"
        values = evaluate_policy(build_process(params, args.terminal), policy)

    storage = Storage(args.out)
    grid = policy_grid(policy, _provenance(args))
    storage.save_grid(grid, f"policy_{tag}")
    storage.save_grid(qaly_map(values, _provenance(args)), f"value_{tag}")
    storage.save_manifest(_manifest(args, params, policy=args.policy))
    print(render_ascii(grid))
    return 0


def cmd_compare(args) -> int:
    params = load_parameters(args.params)
    gain, summary = Analyzer(terminal=args.terminal).compare(params, digest=file_digest(args.params))

    storage = Storage(args.out)
    storage.save_grid(gain, "gain")
    storage.save_summary(summary)
    storage.save_manifest(_manifest(args, params))
    print(summary.line())
    return 0


def _widths(args) -> Dict[ParameterFamily, float]:
    if not args.width:
        return {ParameterFamily.RUPTURE_PROB: settings.DEFAULT_RUPTURE_WIDTH}
    return dict(args.width)


def cmd_sensitivity(args) -> int:
    params = load_parameters(args.params)
    spec = PerturbationSpec(widths=_widths(args), replicates=args.replicates, seed=args.seed)
    analyzer = Analyzer(terminal=args.terminal, workers=args.workers)
    ratio = analyzer.sensitivity_ratio(params, spec, digest=file_digest(args.params))

    storage = Storage(args.out)
    storage.save_grid(ratio, "ratio")
    storage.save_manifest(_manifest(
        args,
        params,
        seed=spec.seed,
        replicates=spec.replicates,
        widths={family.value: width for family, width in sorted(spec.widths.items(), key=lambda kv: kv[0].value)},
    ))
    print(render_ascii(ratio))
    return 0


def cmd_bias(args) -> int:
    params = load_parameters(args.params)
    unknown = [label for label in args.bins if label not in BIN_LABELS]
    if unknown:
        logger.error(f"Unknown bins: {', '.join(unknown)} (known: {', '.join(BIN_LABELS)})")
        return 1
    grids = Analyzer(terminal=args.terminal).bias_experiment(params, args.factors, args.bins, digest=file_digest(args.params))

    storage = Storage(args.out)
    for factor, grid in grids:
        storage.save_grid(grid, f"bias_{factor:g}")
        print(f"factor {factor:g}")
        print(render_ascii(grid))
    storage.save_manifest(_manifest(args, params, factors=list(args.factors), bins=list(args.bins)))
    return 0


def cmd_validate(args) -> int:
    try:
        params = load_parameters(args.params)
    except InvalidParametersError as e:
        print(e.report.summary())
        return 1
    report = validate_process(build_process(params, args.terminal))
    print(report.summary())
    return 0 if report.ok else 1


COMMANDS = {
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "sensitivity": cmd_sensitivity,
    "bias": cmd_bias,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (AaaMdpError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(str(e), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
