import argparse
from typing import List

import pandas as pd

from Equipoise.core.decorators import CommandWrapper
from Equipoise.core.logger import LOGS
from Equipoise.core.models import EstimateReport
from Equipoise.helpers.arguments import add_data_args, add_variance_args, config_from_args, write_json
from Equipoise.helpers.formatters import formatter
from Equipoise.helpers.strings import TEXTS
from Equipoise.utils.diagnostics import overlap_summary, weighted_smd
from Equipoise.utils.estimators import EstimatorMode
from Equipoise.utils.exceptions import ZeroVariance
from Equipoise.utils.pipeline import Analysis, AnalysisConfig, analyze
from Equipoise.utils.weights import compute_weightset

REPORT_COLUMNS = [
    "scheme",
    "estimand_label",
    "estimator",
    "point",
    "se",
    "variance_method",
    "ci_lo",
    "ci_hi",
    "ess_treated",
    "ess_control",
    "variance_inflation",
    "n_used",
    "n_failed_resamples",
]


def reports_to_frame(reports: List[EstimateReport]) -> pd.DataFrame:
    return pd.DataFrame([r.as_row() for r in reports], columns=REPORT_COLUMNS)


def show(report: EstimateReport) -> str:
    return TEXTS.ESTIMATE_ROW.format(
        report.scheme.label,
        report.estimand_label,
        report.estimator,
        formatter.sig(report.point),
        formatter.sig(report.se),
        report.variance_method,
        formatter.interval(report.ci95),
        "",
        formatter.sig(report.ess_treated),
        formatter.sig(report.ess_control),
        formatter.sig(report.variance_inflation),
    )


def build_report(analysis: Analysis, config: AnalysisConfig) -> dict:
    """Estimates plus overlap and balance diagnostics in one bundle."""
    ds, fp = analysis.dataset, analysis.propensity
    estimates = []
    balance = {}
    for report in analysis.reports:
        row = report.as_row()
        row["percentile_ci"] = list(report.percentile_ci) if report.percentile_ci else None
        row["extreme_rows"] = list(report.extreme_rows)
        estimates.append(row)
        try:
            table = weighted_smd(ds, compute_weightset(ds, fp, report.scheme), analysis.ps_spec)
        except ZeroVariance as exc:
            LOGS.warning(f"Balance for {report.scheme.label} skipped: {exc}")
            continue
        balance[report.scheme.label] = table.rows.to_dict(orient="records")

    overlap = overlap_summary(fp, ds)
    return formatter.manifest(
        config=config.as_dict(),
        propensity={
            "terms": analysis.ps_spec.names,
            "coefficients": fp.coefficients.tolist(),
            "iterations": fp.iterations,
            "score_norm": fp.score_norm,
        },
        estimates=estimates,
        diagnostics={
            "overlap": overlap.to_frame().to_dict(orient="records"),
            "equipoise_lean": overlap.equipoise_lean,
            "note": overlap.note,
            "balance": balance,
        },
    )


def run_estimate(config: AnalysisConfig, ds=None) -> Analysis:
    analysis = analyze(config, ds)
    for report in analysis.reports:
        print(show(report))
    if config.output:
        reports_to_frame(analysis.reports).to_csv(config.output, index=False, float_format="%.17g")
        LOGS.info(TEXTS.WROTE.format(config.output))
    if config.report:
        write_json(build_report(analysis, config), config.report)
    return analysis


@CommandWrapper
def cmd_estimate(args: argparse.Namespace):
    run_estimate(config_from_args(args, args.schemes))


def register(subparsers) -> None:
    parser = subparsers.add_parser("estimate", help="weighted treatment effects with standard errors")
    add_data_args(parser)
    parser.add_argument("--outcome-design", default="", help="comma separated outcome terms")
    parser.add_argument("--schemes", default="IPW,OW", help="e.g. IPW,ATT,OW,MW,EW,BW(11),TRIM(0.1)")
    parser.add_argument("--mode", choices=[m.value for m in EstimatorMode], default="hajek")
    add_variance_args(parser)
    parser.add_argument("--output", default=None, help="report CSV")
    parser.add_argument("--report", default=None, help="JSON bundle of estimates and diagnostics")
    parser.set_defaults(func=cmd_estimate)
