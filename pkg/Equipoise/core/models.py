from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Optional, Tuple

import numpy as np

from Equipoise.core.schemes import WeightScheme

if TYPE_CHECKING:
    from Equipoise.core.glm import DesignSpec


@dataclass(frozen=True)
class FittedPropensity:
    coefficients: np.ndarray
    design_spec: Optional["DesignSpec"]
    scores: np.ndarray
    converged: bool
    iterations: int
    score_norm: float
    design: np.ndarray
    loglik: float = float("nan")
    loglik_trace: Tuple[float, ...] = ()


@dataclass(frozen=True)
class FittedOutcome:
    coefficients_treated: np.ndarray
    coefficients_control: np.ndarray
    design_spec: Optional["DesignSpec"]
    fitted_m1: np.ndarray
    fitted_m0: np.ndarray
    design: np.ndarray


@dataclass(frozen=True)
class WeightSet:
    """Per-unit selection values and weights.

    ``raw_w1``/``raw_w0`` are evaluated for every unit; only the entries of the
    unit's own arm enter any estimator. ``norm_w1`` is zero on control rows and
    ``norm_w0`` is zero on treated rows, so each sums to one.
    """

    scheme: WeightScheme
    g_values: np.ndarray
    raw_w1: np.ndarray
    raw_w0: np.ndarray
    norm_w1: np.ndarray
    norm_w0: np.ndarray
    sum_w1: float
    sum_w0: float

    @property
    def arm_weights(self) -> np.ndarray:
        """Normalized weight of each unit within its own arm."""
        return self.norm_w1 + self.norm_w0


@dataclass
class EstimateReport:
    scheme: WeightScheme
    estimand_label: str
    estimator: str
    point: float
    se: float
    variance_method: str
    ci95: Tuple[float, float]
    ess_treated: float
    ess_control: float
    variance_inflation: float
    n_used: int
    n_failed_resamples: int = 0
    percentile_ci: Optional[Tuple[float, float]] = None
    extreme_rows: list = field(default_factory=list)

    def as_row(self) -> dict:
        row = asdict(self)
        row["scheme"] = self.scheme.label
        row["ci_lo"], row["ci_hi"] = self.ci95
        row.pop("ci95")
        row.pop("percentile_ci")
        row.pop("extreme_rows")
        return row


def wald_interval(point: float, se: float, method: str) -> Tuple[float, float]:
    if method == "none" or not np.isfinite(se):
        return (float("nan"), float("nan"))
    return (point - 1.96 * se, point + 1.96 * se)
