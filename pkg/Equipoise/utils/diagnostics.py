from dataclasses import dataclass, fields
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from config import Config
from Equipoise.core.dataset import Dataset
from Equipoise.core.glm import DesignSpec
from Equipoise.core.logger import LOGS
from Equipoise.core.models import FittedPropensity, WeightSet
from Equipoise.utils.exceptions import EmptyEffectiveArm, ZeroVariance

ATT_LIKE = "ATT-like"
ATC_LIKE = "ATC-like"
BALANCED = "balanced"


def _arm_weights(ws: WeightSet, ds: Dataset, z: int) -> np.ndarray:
    if z == 1:
        return ws.norm_w1[ds.treated]
    return ws.norm_w0[ds.control]


def effective_sample_size(ws: WeightSet, ds: Dataset, z: int) -> float:
    w = _arm_weights(ws, ds, z)
    squares = float(np.dot(w, w))
    if not squares > 0:
        raise EmptyEffectiveArm(f"Arm Z={z} carries no weight under {ws.scheme.label}.")
    return float(w.sum() ** 2 / squares)


def variance_inflation(ws: WeightSet, ds: Dataset) -> float:
    """Kish design effect of the weights, pooled over both arms."""
    spread = 1.0 / effective_sample_size(ws, ds, 1) + 1.0 / effective_sample_size(ws, ds, 0)
    return float(spread / (1.0 / ds.n_treated + 1.0 / ds.n_control))


def extreme_weights(ws: WeightSet, ds: Dataset, limit: Optional[float] = None) -> List[int]:
    limit = Config.EXTREME_WEIGHT if limit is None else limit
    own = np.where(ds.treated, ws.raw_w1, ws.raw_w0)
    return np.flatnonzero(own > limit).tolist()


@dataclass
class BalanceTable:
    scheme: str
    rows: pd.DataFrame

    def to_csv(self, path) -> None:
        self.rows.to_csv(path, index=False, float_format="%.17g")


def _covariate_columns(ds: Dataset, spec: Optional[DesignSpec]) -> List[Tuple[str, np.ndarray]]:
    if spec is None:
        return [(name, ds.covariates[:, j]) for j, name in enumerate(ds.covariate_names)]
    return [(term.name, term.evaluate(ds)) for term in spec.column_terms]


def _arm_variance(x: np.ndarray) -> float:
    return float(np.var(x, ddof=1)) if x.size > 1 else 0.0


def weighted_smd(ds: Dataset, ws: WeightSet, spec: Optional[DesignSpec] = None) -> BalanceTable:
    """Standardized mean differences before and after weighting.

    The denominator is the unweighted pooled SD, the same for every scheme.
    ``spec`` switches from the raw covariates to the terms of a design.
    """
    t, c = ds.treated, ds.control
    records = []
    for name, x in _covariate_columns(ds, spec):
        pooled = np.sqrt((_arm_variance(x[t]) + _arm_variance(x[c])) / 2.0)
        if not pooled > 0:
            raise ZeroVariance(f"Covariate '{name}' is constant; its SMD is undefined.")
        raw_gap = x[t].mean() - x[c].mean()
        weighted_gap = np.dot(ws.norm_w1, x) - np.dot(ws.norm_w0, x)
        records.append(
            {
                "name": name,
                "smd_unweighted": float(raw_gap / pooled),
                "smd_weighted": float(weighted_gap / pooled),
            }
        )
    frame = pd.DataFrame.from_records(records, columns=["name", "smd_unweighted", "smd_weighted"])
    return BalanceTable(scheme=ws.scheme.label, rows=frame)


@dataclass(frozen=True)
class ArmSummary:
    min: float
    q1: float
    median: float
    mean: float
    q3: float
    max: float

    @classmethod
    def of(cls, values: np.ndarray) -> "ArmSummary":
        q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
        return cls(
            min=float(values.min()),
            q1=float(q1),
            median=float(median),
            mean=float(values.mean()),
            q3=float(q3),
            max=float(values.max()),
        )


@dataclass(frozen=True)
class OverlapSummary:
    treated: ArmSummary
    control: ArmSummary
    prevalence: float
    variance_ratio: float
    equipoise_lean: str
    note: str = ""

    def to_frame(self) -> pd.DataFrame:
        names = [f.name for f in fields(ArmSummary)]
        frame = pd.DataFrame(
            [
                {"arm": "treated", **{k: getattr(self.treated, k) for k in names}},
                {"arm": "control", **{k: getattr(self.control, k) for k in names}},
            ]
        )
        frame["prevalence"] = self.prevalence
        frame["variance_ratio"] = self.variance_ratio
        frame["equipoise_lean"] = self.equipoise_lean
        return frame


def equipoise_lean(
    prevalence: float,
    variance_ratio: float,
    rubin_lo: float,
    rubin_hi: float,
    prevalence_lo: Optional[float] = None,
    prevalence_hi: Optional[float] = None,
) -> Tuple[str, str]:
    """Which named estimand the equipoise estimates are expected to sit near.

    Prevalence outside its band decides on its own; inside the band the variance
    ratio decides. A variance ratio pointing the other way is kept as a note.
    """
    p_lo = Config.PREVALENCE_LO if prevalence_lo is None else prevalence_lo
    p_hi = Config.PREVALENCE_HI if prevalence_hi is None else prevalence_hi
    by_ratio = ATC_LIKE if variance_ratio > rubin_hi else ATT_LIKE if variance_ratio < rubin_lo else BALANCED
    if prevalence < p_lo:
        by_prevalence = ATT_LIKE
    elif prevalence > p_hi:
        by_prevalence = ATC_LIKE
    else:
        return by_ratio, ""

    note = ""
    if by_ratio not in (BALANCED, by_prevalence):
        note = (
            f"variance ratio {variance_ratio:.3g} points {by_ratio}, "
            f"prevalence {prevalence:.3g} points {by_prevalence}"
        )
    return by_prevalence, note


def overlap_summary(
    fp: FittedPropensity,
    ds: Dataset,
    rubin_lo: Optional[float] = None,
    rubin_hi: Optional[float] = None,
) -> OverlapSummary:
    rubin_lo = Config.RUBIN_LO if rubin_lo is None else rubin_lo
    rubin_hi = Config.RUBIN_HI if rubin_hi is None else rubin_hi
    e = np.asarray(fp.scores, dtype=np.float64)
    e1, e0 = e[ds.treated], e[ds.control]

    prevalence = ds.n_treated / ds.n_units
    var0 = _arm_variance(e0)
    ratio = _arm_variance(e1) / var0 if var0 > 0 else float("inf")
    lean, note = equipoise_lean(prevalence, ratio, rubin_lo, rubin_hi)
    if note:
        LOGS.warning(f"Overlap signals disagree: {note}; reporting {lean}")
    return OverlapSummary(
        treated=ArmSummary.of(e1),
        control=ArmSummary.of(e0),
        prevalence=float(prevalence),
        variance_ratio=float(ratio),
        equipoise_lean=lean,
        note=note,
    )
