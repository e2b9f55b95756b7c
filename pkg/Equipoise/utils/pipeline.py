"""The fit-weight-estimate pipeline shared by the estimate and balance commands."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from config import Config
from Equipoise.core.dataset import Dataset, read_csv
from Equipoise.core.glm import DesignSpec, build_design, fit_outcome_model, fit_propensity
from Equipoise.core.logger import LOGS
from Equipoise.core.models import EstimateReport, FittedOutcome, FittedPropensity, wald_interval
from Equipoise.core.schemes import WeightScheme
from Equipoise.helpers.strings import TEXTS
from Equipoise.utils.diagnostics import effective_sample_size, extreme_weights, variance_inflation
from Equipoise.utils.estimators import EstimatorMode, point_estimate, uses_affine_form
from Equipoise.utils.exceptions import ConfigError, ParamOutOfRange, UnsupportedScheme
from Equipoise.utils.variance import bootstrap_variance, sandwich_augmented, sandwich_hajek
from Equipoise.utils.weights import compute_weightset

VARIANCE_METHODS = ("sandwich", "bootstrap", "none")


@dataclass
class AnalysisConfig:
    input: str
    treat: str
    outcome: str
    schemes: Sequence[WeightScheme]
    ps_design: Sequence[str] = ()
    outcome_design: Sequence[str] = ()
    estimator_mode: EstimatorMode = EstimatorMode.HAJEK
    variance: str = "sandwich"
    bootstrap_b: int = Config.BOOT_REPLICATES
    bootstrap_seed: int = 0
    output: Optional[str] = None
    report: Optional[str] = None
    threads: Optional[int] = None
    numerical_bread: bool = False

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.estimator_mode = EstimatorMode(self.estimator_mode)
        if not self.schemes:
            raise ConfigError("No weighting schemes requested.")
        if self.variance not in VARIANCE_METHODS:
            raise ConfigError(f"Variance must be one of {VARIANCE_METHODS}, got '{self.variance}'.")
        if self.variance == "bootstrap" and self.bootstrap_b < 2:
            raise ParamOutOfRange(f"Bootstrap needs at least 2 resamples, got {self.bootstrap_b}.")
        if self.variance == "sandwich":
            rough = [s.label for s in self.schemes if not s.is_smooth]
            if rough:
                raise UnsupportedScheme(
                    f"{rough} have no closed-form sandwich variance; rerun with --variance bootstrap."
                )

    def designs(self, ds: Dataset) -> Tuple[DesignSpec, DesignSpec]:
        """Propensity and outcome designs, checked against the dataset's columns."""
        ps = DesignSpec.parse(self.ps_design) if self.ps_design else DesignSpec.all_columns(ds)
        outcome = (
            DesignSpec.parse(self.outcome_design) if self.outcome_design else DesignSpec.all_columns(ds)
        )
        build_design(ds, ps)
        build_design(ds, outcome)
        return ps, outcome

    def as_dict(self) -> dict:
        return {
            "input": str(self.input),
            "treat": self.treat,
            "outcome": self.outcome,
            "schemes": [s.label for s in self.schemes],
            "ps_design": list(self.ps_design),
            "outcome_design": list(self.outcome_design),
            "estimator_mode": self.estimator_mode.value,
            "variance": self.variance,
            "bootstrap_b": self.bootstrap_b,
            "bootstrap_seed": self.bootstrap_seed,
        }


@dataclass(frozen=True)
class SchemePipeline:
    """Refits everything on a dataset and returns one point estimate.

    Picklable so bootstrap resamples can run in worker processes.
    """

    scheme: WeightScheme
    mode: EstimatorMode
    ps_spec: DesignSpec
    outcome_spec: DesignSpec

    def __call__(self, ds: Dataset) -> float:
        fp = fit_propensity(ds, self.ps_spec)
        ws = compute_weightset(ds, fp, self.scheme)
        fit = None if self.mode is EstimatorMode.HAJEK else fit_outcome_model(ds, self.outcome_spec)
        return point_estimate(self.mode, ds, ws, fit)


@dataclass
class Analysis:
    dataset: Dataset
    propensity: FittedPropensity
    outcome_fit: Optional[FittedOutcome]
    ps_spec: DesignSpec
    outcome_spec: DesignSpec
    reports: List[EstimateReport] = field(default_factory=list)


def _estimator_name(mode: EstimatorMode, scheme: WeightScheme) -> str:
    if mode is EstimatorMode.HAJEK:
        return mode.value
    return EstimatorMode.DR.value if uses_affine_form(mode, scheme) else EstimatorMode.AUGMENTED.value


def run_scheme(analysis: Analysis, scheme: WeightScheme, config: AnalysisConfig) -> EstimateReport:
    ds, fp, fit = analysis.dataset, analysis.propensity, analysis.outcome_fit
    mode = config.estimator_mode
    ws = compute_weightset(ds, fp, scheme)
    point = point_estimate(mode, ds, ws, fit)

    extreme = extreme_weights(ws, ds)
    if extreme:
        LOGS.warning(TEXTS.EXTREME_WEIGHTS.format(scheme.label, len(extreme), Config.EXTREME_WEIGHT, extreme[:10]))

    se, n_failed, percentile = float("nan"), 0, None
    if config.variance == "sandwich":
        if mode is EstimatorMode.HAJEK:
            result = sandwich_hajek(ds, fp, scheme, ws, tau_hat=point, numerical=config.numerical_bread)
        else:
            result = sandwich_augmented(
                ds,
                fp,
                fit,
                scheme,
                ws,
                affine=uses_affine_form(mode, scheme),
                numerical=config.numerical_bread,
            )
        se = result.se
    elif config.variance == "bootstrap":
        closure = SchemePipeline(scheme, mode, analysis.ps_spec, analysis.outcome_spec)
        boot = bootstrap_variance(ds, closure, config.bootstrap_b, config.bootstrap_seed, config.threads)
        se, n_failed, percentile = boot.se, boot.n_failed, boot.percentile_ci

    return EstimateReport(
        scheme=scheme,
        estimand_label=scheme.estimand_label,
        estimator=_estimator_name(mode, scheme),
        point=point,
        se=se,
        variance_method=config.variance,
        ci95=wald_interval(point, se, config.variance),
        ess_treated=effective_sample_size(ws, ds, 1),
        ess_control=effective_sample_size(ws, ds, 0),
        variance_inflation=variance_inflation(ws, ds),
        n_used=ds.n_units,
        n_failed_resamples=n_failed,
        percentile_ci=percentile,
        extreme_rows=extreme,
    )


def prepare(config: AnalysisConfig, ds: Optional[Dataset] = None, outcome: bool = True) -> Analysis:
    ds = ds if ds is not None else read_csv(config.input, config.treat, config.outcome)
    ps_spec, outcome_spec = config.designs(ds)
    fp = fit_propensity(ds, ps_spec)
    LOGS.info(f"Propensity model converged in {fp.iterations} iterations (score norm {fp.score_norm:.2e})")
    fit = None
    if outcome and config.estimator_mode is not EstimatorMode.HAJEK:
        fit = fit_outcome_model(ds, outcome_spec)
    return Analysis(ds, fp, fit, ps_spec, outcome_spec)


def analyze(config: AnalysisConfig, ds: Optional[Dataset] = None) -> Analysis:
    analysis = prepare(config, ds)
    analysis.reports = [run_scheme(analysis, scheme, config) for scheme in config.schemes]
    return analysis
