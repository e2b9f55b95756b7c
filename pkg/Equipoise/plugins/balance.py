import argparse
from typing import Tuple

from Equipoise.core.decorators import CommandWrapper
from Equipoise.core.logger import LOGS
from Equipoise.helpers.arguments import add_data_args, config_from_args
from Equipoise.helpers.formatters import formatter
from Equipoise.helpers.strings import TEXTS
from Equipoise.utils.diagnostics import BalanceTable, OverlapSummary, overlap_summary, weighted_smd
from Equipoise.utils.pipeline import AnalysisConfig, prepare
from Equipoise.utils.weights import compute_weightset


def run_balance(
    config: AnalysisConfig, overlap_output: str = None, ds=None
) -> Tuple[BalanceTable, OverlapSummary]:
    analysis = prepare(config, ds, outcome=False)
    ds, fp = analysis.dataset, analysis.propensity
    scheme = config.schemes[0]
    table = weighted_smd(ds, compute_weightset(ds, fp, scheme), analysis.ps_spec)
    overlap = overlap_summary(fp, ds)

    print(TEXTS.BALANCE.format(scheme.label, formatter.table(table.rows)))
    print(
        TEXTS.OVERLAP.format(
            formatter.table(overlap.to_frame().iloc[:, :7]),
            formatter.sig(overlap.prevalence),
            formatter.sig(overlap.variance_ratio),
            overlap.equipoise_lean,
        )
    )
    if config.output:
        table.to_csv(config.output)
        LOGS.info(TEXTS.WROTE.format(config.output))
    if overlap_output:
        overlap.to_frame().to_csv(overlap_output, index=False, float_format="%.17g")
        LOGS.info(TEXTS.WROTE.format(overlap_output))
    return table, overlap


@CommandWrapper
def cmd_balance(args: argparse.Namespace):
    config = config_from_args(args, args.scheme)
    run_balance(config, args.overlap_output)


def register(subparsers) -> None:
    parser = subparsers.add_parser("balance", help="covariate balance and propensity overlap")
    add_data_args(parser)
    parser.add_argument("--scheme", default="OW", help="weighting scheme to check balance under")
    parser.add_argument("--output", default=None, help="balance CSV")
    parser.add_argument("--overlap-output", default=None, help="overlap summary CSV")
    parser.set_defaults(func=cmd_balance, variance="none")
