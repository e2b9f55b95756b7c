"""Propensity and outcome models.

The propensity model is a logistic regression fitted by Newton-Raphson on the
score (IRLS) with step-halving; outcome models are per-arm least squares.
Both expose the per-unit estimating-function rows consumed by the sandwich
variance.
"""

import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import expit

from config import Config
from Equipoise.core.dataset import Dataset
from Equipoise.core.logger import LOGS
from Equipoise.core.models import FittedOutcome, FittedPropensity
from Equipoise.utils.exceptions import (
    ArmTooSmall,
    DegenerateTreatment,
    DimensionMismatch,
    NonConvergence,
    SingularDesign,
    UnknownColumn,
)


@dataclass(frozen=True)
class Term:
    """A raw column, a product of two columns, or a square (same column twice)."""

    columns: Tuple[str, ...]

    @property
    def name(self) -> str:
        if len(self.columns) == 1:
            return self.columns[0]
        left, right = self.columns
        return f"{left}^2" if left == right else f"{left}*{right}"

    def evaluate(self, ds: Dataset) -> np.ndarray:
        values = ds.column(self.columns[0])
        for other in self.columns[1:]:
            values = values * ds.column(other)
        return values


_PRODUCT = re.compile(r"^\s*(\w+)\s*[*:]\s*(\w+)\s*$")
_SQUARE = re.compile(r"^\s*(\w+)\s*(?:\^|\*\*)\s*2\s*$")


def parse_term(text: str) -> Term:
    square = _SQUARE.match(text)
    if square:
        return Term((square.group(1), square.group(1)))
    product = _PRODUCT.match(text)
    if product:
        return Term((product.group(1), product.group(2)))
    name = text.strip()
    if not re.fullmatch(r"\w+", name):
        raise UnknownColumn(f"Cannot read design term '{text}'.")
    return Term((name,))


@dataclass(frozen=True)
class DesignSpec:
    column_terms: Tuple[Term, ...] = field(default_factory=tuple)
    include_intercept: bool = True

    @classmethod
    def parse(cls, terms: Iterable[str]) -> "DesignSpec":
        return cls(tuple(parse_term(t) for t in terms))

    @classmethod
    def all_columns(cls, ds: Dataset) -> "DesignSpec":
        return cls(tuple(Term((name,)) for name in ds.covariate_names))

    @property
    def names(self) -> List[str]:
        return ["(Intercept)"] + [t.name for t in self.column_terms]

    @property
    def columns(self) -> List[str]:
        seen = []
        for term in self.column_terms:
            for name in term.columns:
                if name not in seen:
                    seen.append(name)
        return seen

    def without(self, column: str) -> "DesignSpec":
        """Drops every term that references ``column``."""
        return DesignSpec(
            tuple(t for t in self.column_terms if column not in t.columns),
            self.include_intercept,
        )


def build_design(ds: Dataset, spec: DesignSpec) -> np.ndarray:
    missing = [c for c in spec.columns if c not in ds.covariate_names]
    if missing:
        raise UnknownColumn(f"Design refers to unknown columns {missing}.")
    columns = [np.ones(ds.n_units)] + [t.evaluate(ds) for t in spec.column_terms]
    return np.column_stack(columns)


def check_full_rank(M: np.ndarray, label: str) -> None:
    n, q = M.shape
    if n < q:
        raise SingularDesign(f"{label}: {n} rows cannot identify {q} coefficients.")
    R = linalg.qr(M, mode="r", pivoting=True)[0]
    pivots = np.abs(np.diag(R))
    if pivots[0] == 0 or pivots.min() / pivots[0] < Config.RANK_TOL:
        raise SingularDesign(f"{label} is rank deficient (relative pivot {pivots.min() / max(pivots[0], 1e-300):.3g}).")


def logistic_loglik(V: np.ndarray, Z: np.ndarray, beta: np.ndarray) -> float:
    eta = V @ beta
    return float(np.sum(Z * eta - np.logaddexp(0.0, eta)))


def logistic_score(V: np.ndarray, Z: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Per-unit rows [Z_i - e(V_i; beta)] V_i."""
    V, Z, beta = np.atleast_2d(V), np.asarray(Z, dtype=np.float64), np.asarray(beta)
    if V.shape[0] != Z.shape[0] or V.shape[1] != beta.shape[0]:
        raise DimensionMismatch(f"V {V.shape}, Z {Z.shape}, beta {beta.shape} do not conform.")
    return (Z - expit(V @ beta))[:, None] * V


def outcome_score(
    W: np.ndarray, Y: np.ndarray, Z: np.ndarray, alpha_z: np.ndarray, z: int
) -> np.ndarray:
    """Per-unit rows 1{Z_i = z} W_i (Y_i - W_i' alpha_z)."""
    W, Y, Z = np.atleast_2d(W), np.asarray(Y, dtype=np.float64), np.asarray(Z)
    alpha_z = np.asarray(alpha_z)
    if not (W.shape[0] == Y.shape[0] == Z.shape[0]) or W.shape[1] != alpha_z.shape[0]:
        raise DimensionMismatch(
            f"W {W.shape}, Y {Y.shape}, Z {Z.shape}, alpha {alpha_z.shape} do not conform."
        )
    arm = (Z == z).astype(np.float64)
    return (arm * (Y - W @ alpha_z))[:, None] * W


def fit_logistic(
    V: np.ndarray,
    Z: np.ndarray,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    spec: Optional[DesignSpec] = None,
) -> FittedPropensity:
    tol = Config.LOGIT_TOL if tol is None else tol
    max_iter = Config.LOGIT_MAX_ITER if max_iter is None else max_iter
    V = np.asarray(V, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] != Z.shape[0]:
        raise DimensionMismatch(f"Design {V.shape} does not match {Z.shape[0]} treatment values.")
    if Z.min() == Z.max():
        raise DegenerateTreatment("Propensity model needs both treated and control units.")
    check_full_rank(V, "Propensity design")

    beta = np.zeros(V.shape[1])
    loglik = logistic_loglik(V, Z, beta)
    trace = [loglik]
    norm = np.inf
    for iteration in range(max_iter + 1):
        eta = V @ beta
        e = expit(eta)
        score = V.T @ (Z - e)
        norm = float(np.max(np.abs(score)))
        if norm <= tol:
            LOGS.debug(f"Propensity model converged in {iteration} iterations (score {norm:.3g})")
            return FittedPropensity(
                coefficients=beta,
                design_spec=spec,
                scores=e,
                converged=True,
                iterations=iteration,
                score_norm=norm,
                design=V,
                loglik=loglik,
                loglik_trace=tuple(trace),
            )
        if np.max(np.abs(eta)) > Config.SEPARATION_BOUND:
            raise NonConvergence(
                f"Quasi-separation: max|V beta| exceeded {Config.SEPARATION_BOUND:g} "
                f"with score norm {norm:.3g}; the MLE does not exist.",
                last_iterate=beta,
                score_norm=norm,
            )
        if iteration == max_iter:
            break

        information = (V * (e * (1.0 - e))[:, None]).T @ V
        try:
            step = linalg.cho_solve(linalg.cho_factor(information), score)
        except linalg.LinAlgError:
            raise NonConvergence(
                "Fisher information lost positive definiteness.", last_iterate=beta, score_norm=norm
            )

        # step-halving keeps the log-likelihood non-decreasing
        slack = 1e-12 * (1.0 + abs(loglik))
        size = 1.0
        for _ in range(40):
            candidate = beta + size * step
            cand_loglik = logistic_loglik(V, Z, candidate)
            if cand_loglik >= loglik - slack:
                break
            size /= 2.0
        else:
            raise NonConvergence(
                "Line search stalled before the score reached tolerance.",
                last_iterate=beta,
                score_norm=norm,
            )
        beta, loglik = candidate, cand_loglik
        trace.append(loglik)

    raise NonConvergence(
        f"Propensity model did not converge in {max_iter} iterations (score {norm:.3g}).",
        last_iterate=beta,
        score_norm=norm,
    )


def fit_outcome(
    W: np.ndarray, Y: np.ndarray, Z: np.ndarray, spec: Optional[DesignSpec] = None
) -> FittedOutcome:
    W = np.asarray(W, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    Z = np.asarray(Z)
    if not (W.shape[0] == Y.shape[0] == Z.shape[0]):
        raise DimensionMismatch(f"W {W.shape}, Y {Y.shape}, Z {Z.shape} do not conform.")

    coefficients = {}
    for z in (1, 0):
        arm = Z == z
        if arm.sum() < W.shape[1]:
            raise ArmTooSmall(
                f"Arm Z={z} has {int(arm.sum())} units for {W.shape[1]} outcome coefficients."
            )
        check_full_rank(W[arm], f"Outcome design (Z={z})")
        coefficients[z] = linalg.lstsq(W[arm], Y[arm])[0]

    return FittedOutcome(
        coefficients_treated=coefficients[1],
        coefficients_control=coefficients[0],
        design_spec=spec,
        fitted_m1=W @ coefficients[1],
        fitted_m0=W @ coefficients[0],
        design=W,
    )


def fit_propensity(ds: Dataset, spec: Optional[DesignSpec] = None) -> FittedPropensity:
    spec = spec or DesignSpec.all_columns(ds)
    return fit_logistic(build_design(ds, spec), ds.treatment, spec=spec)


def fit_outcome_model(ds: Dataset, spec: Optional[DesignSpec] = None) -> FittedOutcome:
    spec = spec or DesignSpec.all_columns(ds)
    return fit_outcome(build_design(ds, spec), ds.outcome, ds.treatment, spec=spec)
