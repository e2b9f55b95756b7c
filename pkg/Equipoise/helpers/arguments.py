import argparse
import json
import math
from typing import List

import numpy as np

from config import Config
from Equipoise.core.logger import LOGS
from Equipoise.core.schemes import WeightScheme, parse_scheme
from Equipoise.helpers.strings import TEXTS
from Equipoise.utils.pipeline import VARIANCE_METHODS, AnalysisConfig


def split_list(text: str) -> List[str]:
    return [item.strip() for item in (text or "").split(",") if item.strip()]


def read_schemes(text: str) -> List[WeightScheme]:
    return [parse_scheme(item) for item in split_list(text)]


def add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="CSV with one row per unit")
    parser.add_argument("--treat", default="Z", help="binary treatment column (literal 0/1)")
    parser.add_argument("--outcome", default="Y", help="outcome column")
    parser.add_argument(
        "--ps-design",
        default="",
        help="comma separated propensity terms, e.g. X1,X2,X1^2,X1*X2 (default: all covariates)",
    )


def add_variance_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variance", choices=VARIANCE_METHODS, default="sandwich")
    parser.add_argument("--bootstrap", type=int, default=Config.BOOT_REPLICATES, help="bootstrap resamples")
    parser.add_argument("--bootstrap-seed", type=int, default=0)
    parser.add_argument("--numerical-bread", action="store_true", help="finite-difference Jacobian")
    parser.add_argument("--threads", type=int, default=None, help=f"workers (default {Config.THREADS} = all cores)")


def config_from_args(args: argparse.Namespace, schemes: str) -> AnalysisConfig:
    return AnalysisConfig(
        input=args.input,
        treat=args.treat,
        outcome=args.outcome,
        schemes=read_schemes(schemes),
        ps_design=split_list(args.ps_design),
        outcome_design=split_list(getattr(args, "outcome_design", "")),
        estimator_mode=getattr(args, "mode", "hajek"),
        variance=getattr(args, "variance", "none"),
        bootstrap_b=getattr(args, "bootstrap", Config.BOOT_REPLICATES),
        bootstrap_seed=getattr(args, "bootstrap_seed", 0),
        output=getattr(args, "output", None),
        report=getattr(args, "report", None),
        threads=getattr(args, "threads", None),
        numerical_bread=getattr(args, "numerical_bread", False),
    )


def plain(value):
    """JSON-safe copy: numpy scalars to Python, NaN and inf to null."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(plain(payload), handle, indent=2, sort_keys=True, allow_nan=False)
        handle.write("\n")
    LOGS.info(TEXTS.WROTE.format(path))
