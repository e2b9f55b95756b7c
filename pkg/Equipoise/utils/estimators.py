from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from Equipoise.core.dataset import Dataset
from Equipoise.core.models import FittedOutcome, FittedPropensity, WeightSet
from Equipoise.core.schemes import WeightScheme
from Equipoise.utils.exceptions import (
    AllZeroSelection,
    DimensionMismatch,
    EmptyEffectiveArm,
    InfiniteWeight,
    SchemeNotAffine,
)


class EstimatorMode(str, Enum):
    HAJEK = "hajek"
    # general augmented form for every scheme
    AUGMENTED = "augmented"
    # affine doubly robust form for IPW/ATT/ATC, general augmented form otherwise
    DR = "dr"


@dataclass(frozen=True)
class AugmentedInputs:
    weightset: WeightSet
    outcome_fit: FittedOutcome
    scheme: WeightScheme
    affine_ab: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.affine_ab != self.scheme.affine_ab:
            raise SchemeNotAffine(
                f"{self.scheme.label}: affine coefficients must be {self.scheme.affine_ab}, got {self.affine_ab}."
            )

    @classmethod
    def build(cls, weightset: WeightSet, outcome_fit: FittedOutcome) -> "AugmentedInputs":
        scheme = weightset.scheme
        return cls(weightset, outcome_fit, scheme, scheme.affine_ab)


@dataclass(frozen=True)
class AugmentedParts:
    """Fitted-contrast means (tau1, tau0) and weighted residual means (mu1, mu0)."""

    tau1: float
    tau0: float
    mu1: float
    mu0: float

    @property
    def estimate(self) -> float:
        return (self.tau1 - self.tau0) + (self.mu1 - self.mu0)


def _aligned(ws: WeightSet, ds: Dataset) -> None:
    if ws.g_values.shape[0] != ds.n_units:
        raise DimensionMismatch(f"WeightSet has {ws.g_values.shape[0]} rows for {ds.n_units} units.")
    if not ws.sum_w1 > 0 or not ws.sum_w0 > 0:
        raise EmptyEffectiveArm(f"{ws.scheme.label} leaves an arm without weight.")


def crude_estimate(ds: Dataset) -> float:
    y = ds.outcome
    return float(y[ds.treated].mean() - y[ds.control].mean())


def hajek_estimate(ws: WeightSet, ds: Dataset) -> float:
    _aligned(ws, ds)
    return float(np.dot(ws.norm_w1 - ws.norm_w0, ds.outcome))


def stabilized_ipw_estimate(ds: Dataset, fp: FittedPropensity) -> float:
    """Horvitz-Thompson contrast with weights P(Z=z)/P(Z=z | X), averaged within arm.

    P(Z=1) is the sample prevalence.
    """
    e = np.asarray(fp.scores, dtype=np.float64)
    treated, control = ds.treated, ds.control
    bad = np.flatnonzero((treated & (e <= 0.0)) | (control & (e >= 1.0)))
    if bad.size:
        raise InfiniteWeight("Stabilized weights diverge at a propensity score of 0 or 1.", rows=bad.tolist())
    p1 = ds.n_treated / ds.n_units
    y = ds.outcome
    mean1 = np.sum(p1 * y[treated] / e[treated]) / ds.n_treated
    mean0 = np.sum((1.0 - p1) * y[control] / (1.0 - e[control])) / ds.n_control
    return float(mean1 - mean0)


def regression_estimate(outcome_fit: FittedOutcome, g_values) -> float:
    g = np.asarray(g_values, dtype=np.float64)
    total = g.sum()
    if not total > 0:
        raise AllZeroSelection("Selection function is zero for every unit.")
    return float(np.dot(g, outcome_fit.fitted_m1 - outcome_fit.fitted_m0) / total)


def _residual_means(ws: WeightSet, ds: Dataset, fit: FittedOutcome) -> Tuple[float, float]:
    y = ds.outcome
    mu1 = float(np.dot(ws.norm_w1, np.where(ds.treated, y - fit.fitted_m1, 0.0)))
    mu0 = float(np.dot(ws.norm_w0, np.where(ds.control, y - fit.fitted_m0, 0.0)))
    return mu1, mu0


def augmented_parts(inputs: AugmentedInputs, ds: Dataset, affine: bool = False) -> AugmentedParts:
    ws, fit = inputs.weightset, inputs.outcome_fit
    _aligned(ws, ds)
    if affine:
        if inputs.affine_ab is None:
            raise SchemeNotAffine(f"{inputs.scheme.label} is not of the form a + b e(x).")
        a, b = inputs.affine_ab
        anchor = a + b * ds.treatment
    else:
        anchor = ws.g_values
    total = float(np.sum(anchor))
    if not total > 0:
        raise EmptyEffectiveArm(f"{inputs.scheme.label} selects no units for the regression term.")
    mu1, mu0 = _residual_means(ws, ds, fit)
    return AugmentedParts(
        tau1=float(np.dot(anchor, fit.fitted_m1) / total),
        tau0=float(np.dot(anchor, fit.fitted_m0) / total),
        mu1=mu1,
        mu0=mu0,
    )


def augmented_estimate(inputs: AugmentedInputs, ds: Dataset) -> float:
    return augmented_parts(inputs, ds).estimate


def dr_estimate(inputs: AugmentedInputs, ds: Dataset) -> float:
    if inputs.affine_ab is None:
        raise SchemeNotAffine(f"{inputs.scheme.label} is not of the form a + b e(x).")
    return augmented_parts(inputs, ds, affine=True).estimate


def uses_affine_form(mode: EstimatorMode, scheme: WeightScheme) -> bool:
    return EstimatorMode(mode) is EstimatorMode.DR and scheme.affine_ab is not None


def point_estimate(
    mode: EstimatorMode,
    ds: Dataset,
    ws: WeightSet,
    outcome_fit: Optional[FittedOutcome] = None,
) -> float:
    mode = EstimatorMode(mode)
    if mode is EstimatorMode.HAJEK:
        return hajek_estimate(ws, ds)
    inputs = AugmentedInputs.build(ws, outcome_fit)
    if uses_affine_form(mode, ws.scheme):
        return dr_estimate(inputs, ds)
    return augmented_estimate(inputs, ds)


@dataclass(frozen=True)
class MatchingSplit:
    """Matching-weight contrast assembled from its ATT-form part (e <= 0.5) and
    ATC-form part (e > 0.5), each kept as weighted sums and weight totals."""

    att_sum1: float
    att_mass1: float
    att_sum0: float
    att_mass0: float
    atc_sum1: float
    atc_mass1: float
    atc_sum0: float
    atc_mass0: float

    @property
    def estimate(self) -> float:
        mean1 = (self.att_sum1 + self.atc_sum1) / (self.att_mass1 + self.atc_mass1)
        mean0 = (self.att_sum0 + self.atc_sum0) / (self.att_mass0 + self.atc_mass0)
        return float(mean1 - mean0)


def matching_split_estimate(ds: Dataset, fp: FittedPropensity) -> MatchingSplit:
    """ATT weights below e = 0.5, ATC weights above, pooled per arm.

    This is the unsmoothed matching estimator. It equals the Hajek MW estimate
    only when no score falls inside the smoothing band around 0.5.
    """
    e = np.asarray(fp.scores, dtype=np.float64)
    y = ds.outcome
    kappa = e <= 0.5
    t, c = ds.treated, ds.control
    with np.errstate(divide="ignore", invalid="ignore"):
        att_w0 = e / (1.0 - e)
        atc_w1 = (1.0 - e) / e
    att1, att0 = t & kappa, c & kappa
    atc1, atc0 = t & ~kappa, c & ~kappa
    return MatchingSplit(
        att_sum1=float(y[att1].sum()),
        att_mass1=float(att1.sum()),
        att_sum0=float(np.dot(att_w0[att0], y[att0])),
        att_mass0=float(att_w0[att0].sum()),
        atc_sum1=float(np.dot(atc_w1[atc1], y[atc1])),
        atc_mass1=float(atc_w1[atc1].sum()),
        atc_sum0=float(y[atc0].sum()),
        atc_mass0=float(atc0.sum()),
    )
