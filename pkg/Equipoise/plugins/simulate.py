import argparse
import time

import pandas as pd

from config import Config
from Equipoise.core.decorators import CommandWrapper
from Equipoise.core.logger import LOGS
from Equipoise.helpers.arguments import read_schemes, write_json
from Equipoise.helpers.formatters import formatter
from Equipoise.helpers.strings import TEXTS
from Equipoise.utils.estimators import EstimatorMode
from Equipoise.utils.simulation import (
    TABLE_SCHEMES,
    DgpSpec,
    Family,
    prevalence_of,
    run_monte_carlo,
    summaries_to_frame,
    true_estimand_table,
)

# flags that only mean something for some families
_ONLY_FOR = {
    "overlap": (Family.DGP1, Family.DGP2),
    "prevalence": (Family.DGP2,),
    "effect": (Family.DGP1, Family.DGP2),
    "scenario": (Family.ILLUSTRATIVE,),
}


def spec_from_args(args: argparse.Namespace) -> DgpSpec:
    family = Family(args.dgp)
    for flag, families in _ONLY_FOR.items():
        if getattr(args, flag) is not None and family not in families:
            args.parser.error(f"--{flag} does not apply to --dgp {family.value}")
    return DgpSpec(
        family=family,
        overlap=args.overlap or "good",
        prevalence=args.prevalence or "medium",
        scenario=args.scenario or "A",
        effect=args.effect or "homogeneous",
        n=args.n,
        seed=args.seed,
    )


def write_frame(frame: pd.DataFrame, path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g")
    LOGS.info(TEXTS.WROTE.format(path))


def run_simulate(args: argparse.Namespace) -> pd.DataFrame:
    spec = spec_from_args(args)
    schemes = read_schemes(args.schemes)
    started = time.time()

    if args.truth_only:
        frame = true_estimand_table(spec, schemes, args.superpop)
        print(TEXTS.TRUTH.format(spec.family.value, args.superpop or Config.SUPERPOP_N, formatter.table(frame)))
    else:
        summaries = run_monte_carlo(
            spec,
            schemes,
            estimator_mode=args.mode,
            misspec=args.misspec,
            n_reps=args.reps,
            base_seed=args.seed,
            variance=args.variance,
            threads=args.threads,
            superpop_n=args.superpop,
        )
        frame = summaries_to_frame(summaries)
        print(formatter.table(frame))

    if args.output:
        write_frame(frame, args.output)
    if not args.truth_only:
        LOGS.info(
            TEXTS.SIMULATED.format(
                args.reps,
                spec.family.value,
                formatter.get_readable_time(int(time.time() - started)),
                args.output or "stdout",
            )
        )
    if args.manifest:
        context = {
            "command": "simulate",
            "dgp": spec.as_dict(),
            "seed": spec.seed,
            "schemes": [s.label for s in schemes],
            "truth_only": bool(args.truth_only),
            "superpop": int(args.superpop or Config.SUPERPOP_N),
            "output": args.output,
        }
        if not args.truth_only:
            context.update(
                reps=args.reps,
                mode=args.mode,
                misspec=args.misspec,
                variance=args.variance,
                prevalence_observed=prevalence_of(spec, min(args.reps, 100)),
            )
        write_json(formatter.manifest(**context), args.manifest)
    return frame


@CommandWrapper
def cmd_simulate(args: argparse.Namespace):
    run_simulate(args)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="Monte-Carlo study or true estimands of a design")
    parser.add_argument("--dgp", choices=[f.value for f in Family], required=True)
    parser.add_argument("--overlap", choices=["good", "moderate", "poor"], default=None)
    parser.add_argument("--prevalence", choices=["medium", "low"], default=None)
    parser.add_argument("--scenario", choices=["A", "B", "C"], default=None)
    parser.add_argument("--effect", choices=["homo", "hetero", "homogeneous", "heterogeneous"], default=None)
    parser.add_argument("--n", type=int, default=2000, help="units per replicate")
    parser.add_argument("--reps", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--schemes", default=",".join(TABLE_SCHEMES))
    parser.add_argument("--mode", choices=[m.value for m in EstimatorMode], default="hajek")
    parser.add_argument("--misspec", choices=["none", "ps", "outcome", "both"], default="none")
    parser.add_argument("--variance", choices=["sandwich", "none"], default="sandwich")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--truth-only", action="store_true", help="print the true estimands and stop")
    parser.add_argument("--superpop", type=int, default=None, help=f"superpopulation size (default {Config.SUPERPOP_N})")
    parser.add_argument("--output", default=None, help="summary CSV")
    parser.add_argument("--manifest", default=None, help="JSON sidecar describing the run")
    parser.set_defaults(func=cmd_simulate, parser=parser)
