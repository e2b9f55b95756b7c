"""Sandwich (M-estimation) and bootstrap variances.

The sandwich stacks the logistic score with the estimator's own estimating
equations, so the propensity (and outcome) coefficients are treated as
estimated. ``A`` is the averaged negative Jacobian of the stack and ``B`` the
averaged outer product of its rows.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import expit

from config import Config
from Equipoise.core.dataset import Dataset
from Equipoise.core.glm import logistic_score
from Equipoise.core.logger import LOGS
from Equipoise.core.models import FittedOutcome, FittedPropensity, WeightSet
from Equipoise.core.schemes import WeightScheme
from Equipoise.utils.estimators import AugmentedInputs, AugmentedParts, augmented_parts
from Equipoise.utils.exceptions import (
    REPLICATE_FAILURES,
    ConfigError,
    SchemeNotAffine,
    SingularBread,
    TooManyFailedResamples,
)
from Equipoise.utils.weights import (
    arm_weights,
    compute_weightset,
    selection_g,
    selection_slope,
    weight_slopes,
)
from Equipoise.utils.workers import run_indexed, stream


@dataclass(frozen=True)
class EstimatingStack:
    theta: np.ndarray
    psi: Callable[[np.ndarray], np.ndarray]
    contrast_c: np.ndarray
    names: Tuple[str, ...] = ()

    def rows(self, theta: Optional[np.ndarray] = None) -> np.ndarray:
        return self.psi(self.theta if theta is None else theta)


@dataclass(frozen=True)
class SandwichResult:
    A_N: np.ndarray
    B_N: np.ndarray
    Sigma: np.ndarray
    variance: float
    se: float


@dataclass(frozen=True)
class BootstrapResult:
    se: float
    replicates: np.ndarray
    n_failed: int
    failures: dict = field(default_factory=dict)

    @property
    def percentile_ci(self) -> Tuple[float, float]:
        lo, hi = np.quantile(self.replicates, [0.025, 0.975])
        return float(lo), float(hi)


def _own_arm(z: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Zeroes entries outside the arm before they meet a product."""
    return np.where(z, values, 0.0)


def _hajek_psi(theta, V, Z, Y, scheme):
    q = V.shape[1]
    beta, mu1, mu0 = theta[:q], theta[q], theta[q + 1]
    w1, w0 = arm_weights(scheme, expit(V @ beta))
    t, c = Z == 1, Z == 0
    with np.errstate(invalid="ignore", over="ignore"):
        return np.column_stack(
            [
                logistic_score(V, Z, beta),
                _own_arm(t, w1 * (Y - mu1)),
                _own_arm(c, w0 * (Y - mu0)),
            ]
        )


def hajek_stack(ds: Dataset, fp: FittedPropensity, ws: WeightSet) -> EstimatingStack:
    V = fp.design
    q = V.shape[1]
    mu1 = float(np.dot(ws.norm_w1, ds.outcome))
    mu0 = float(np.dot(ws.norm_w0, ds.outcome))
    contrast = np.zeros(q + 2)
    contrast[q:] = (1.0, -1.0)
    return EstimatingStack(
        theta=np.concatenate([fp.coefficients, [mu1, mu0]]),
        psi=partial(_hajek_psi, V=V, Z=ds.treatment, Y=ds.outcome, scheme=ws.scheme),
        contrast_c=contrast,
        names=tuple(f"beta{j}" for j in range(q)) + ("mu1", "mu0"),
    )


def hajek_bread(ds: Dataset, fp: FittedPropensity, ws: WeightSet, stack: EstimatingStack) -> np.ndarray:
    V, Y = fp.design, ds.outcome
    t, c = ds.treated, ds.control
    n, q = V.shape
    e = fp.scores
    mu1, mu0 = stack.theta[q], stack.theta[q + 1]
    s1, s0 = weight_slopes(ws.scheme, e)

    A = np.zeros((q + 2, q + 2))
    A[:q, :q] = (V * (e * (1.0 - e))[:, None]).T @ V / n
    A[q, :q] = -(_own_arm(t, s1 * (Y - mu1)) @ V) / n
    A[q, q] = _own_arm(t, ws.raw_w1).sum() / n
    A[q + 1, :q] = -(_own_arm(c, s0 * (Y - mu0)) @ V) / n
    A[q + 1, q + 1] = _own_arm(c, ws.raw_w0).sum() / n
    return A


def _augmented_psi(theta, V, W, Z, Y, scheme, affine_ab):
    q, r = V.shape[1], W.shape[1]
    beta = theta[:q]
    alpha1 = theta[q : q + r]
    alpha0 = theta[q + r : q + 2 * r]
    tau1, tau0, mu1, mu0 = theta[q + 2 * r :]
    e = expit(V @ beta)
    w1, w0 = arm_weights(scheme, e)
    if affine_ab is None:
        anchor = selection_g(scheme, e)
    else:
        anchor = affine_ab[0] + affine_ab[1] * Z
    m1, m0 = W @ alpha1, W @ alpha0
    t, c = Z == 1, Z == 0
    with np.errstate(invalid="ignore", over="ignore"):
        return np.column_stack(
            [
                logistic_score(V, Z, beta),
                (t * (Y - m1))[:, None] * W,
                (c * (Y - m0))[:, None] * W,
                anchor * (m1 - tau1),
                anchor * (m0 - tau0),
                _own_arm(t, w1 * (Y - m1 - mu1)),
                _own_arm(c, w0 * (Y - m0 - mu0)),
            ]
        )


def augmented_stack(
    ds: Dataset,
    fp: FittedPropensity,
    outcome_fit: FittedOutcome,
    ws: WeightSet,
    parts: AugmentedParts,
    affine: bool = False,
) -> EstimatingStack:
    V, W = fp.design, outcome_fit.design
    q, r = V.shape[1], W.shape[1]
    affine_ab = ws.scheme.affine_ab if affine else None
    if affine and affine_ab is None:
        raise SchemeNotAffine(f"{ws.scheme.label} is not of the form a + b e(x).")
    contrast = np.zeros(q + 2 * r + 4)
    contrast[q + 2 * r :] = (1.0, -1.0, 1.0, -1.0)
    return EstimatingStack(
        theta=np.concatenate(
            [
                fp.coefficients,
                outcome_fit.coefficients_treated,
                outcome_fit.coefficients_control,
                [parts.tau1, parts.tau0, parts.mu1, parts.mu0],
            ]
        ),
        psi=partial(
            _augmented_psi,
            V=V,
            W=W,
            Z=ds.treatment,
            Y=ds.outcome,
            scheme=ws.scheme,
            affine_ab=affine_ab,
        ),
        contrast_c=contrast,
        names=tuple(f"beta{j}" for j in range(q))
        + tuple(f"alpha1_{j}" for j in range(r))
        + tuple(f"alpha0_{j}" for j in range(r))
        + ("tau1", "tau0", "mu1", "mu0"),
    )


def augmented_bread(
    ds: Dataset,
    fp: FittedPropensity,
    outcome_fit: FittedOutcome,
    ws: WeightSet,
    stack: EstimatingStack,
    affine: bool = False,
) -> np.ndarray:
    V, W, Y, Z = fp.design, outcome_fit.design, ds.outcome, ds.treatment
    t, c = ds.treated, ds.control
    n, q = V.shape
    r = W.shape[1]
    e = fp.scores
    tau1, tau0, mu1, mu0 = stack.theta[q + 2 * r :]
    m1, m0 = outcome_fit.fitted_m1, outcome_fit.fitted_m0
    s1, s0 = weight_slopes(ws.scheme, e)
    if affine:
        a, b = ws.scheme.affine_ab
        anchor = a + b * Z
        anchor_slope = np.zeros(n)
    else:
        anchor = ws.g_values
        anchor_slope = selection_slope(ws.scheme, e)

    b1 = slice(0, q)
    a1 = slice(q, q + r)
    a0 = slice(q + r, q + 2 * r)
    i_tau1, i_tau0, i_mu1, i_mu0 = q + 2 * r + np.arange(4)

    A = np.zeros((q + 2 * r + 4,) * 2)
    A[b1, b1] = (V * (e * (1.0 - e))[:, None]).T @ V / n
    A[a1, a1] = (W * t[:, None]).T @ W / n
    A[a0, a0] = (W * c[:, None]).T @ W / n

    A[i_tau1, b1] = -((anchor_slope * (m1 - tau1)) @ V) / n
    A[i_tau1, a1] = -(anchor @ W) / n
    A[i_tau1, i_tau1] = anchor.sum() / n
    A[i_tau0, b1] = -((anchor_slope * (m0 - tau0)) @ V) / n
    A[i_tau0, a0] = -(anchor @ W) / n
    A[i_tau0, i_tau0] = anchor.sum() / n

    own1 = _own_arm(t, ws.raw_w1)
    own0 = _own_arm(c, ws.raw_w0)
    A[i_mu1, b1] = -(_own_arm(t, s1 * (Y - m1 - mu1)) @ V) / n
    A[i_mu1, a1] = (own1 @ W) / n
    A[i_mu1, i_mu1] = own1.sum() / n
    A[i_mu0, b1] = -(_own_arm(c, s0 * (Y - m0 - mu0)) @ V) / n
    A[i_mu0, a0] = (own0 @ W) / n
    A[i_mu0, i_mu0] = own0.sum() / n
    return A


def numerical_bread(stack: EstimatingStack, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of the averaged stack, negated."""
    theta = np.asarray(stack.theta, dtype=np.float64)
    k = theta.shape[0]
    A = np.zeros((k, k))
    for j in range(k):
        h = step * max(1.0, abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        A[:, j] = -(stack.rows(up).mean(axis=0) - stack.rows(down).mean(axis=0)) / (2.0 * h)
    return A


def _equilibrate(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # row then column scales; a zero row or column keeps scale one
    row = np.max(np.abs(A), axis=1)
    row = np.where(row > 0, 1.0 / np.where(row > 0, row, 1.0), 1.0)
    col = np.max(np.abs(row[:, None] * A), axis=0)
    col = np.where(col > 0, 1.0 / np.where(col > 0, col, 1.0), 1.0)
    return row, col


def sandwich(stack: EstimatingStack, A: np.ndarray) -> SandwichResult:
    """Solve ``A^-1 B A^-T`` on the equilibrated bread.

    Blocks whose weights share a tiny constant factor (beta weights with a
    large exponent) scale whole rows of ``A``; the singularity check is made
    after rescaling so only genuine rank loss is reported.
    """
    rows = stack.rows()
    n = rows.shape[0]
    B = rows.T @ rows / n
    r, d = _equilibrate(A)
    scaled = r[:, None] * A * d[None, :]
    condition = np.linalg.cond(scaled)
    if not np.isfinite(condition) or condition > Config.BREAD_COND_LIMIT:
        raise SingularBread(f"Bread matrix is singular (condition number {condition:.3g}).")
    factor = linalg.lu_factor(scaled)
    left = linalg.lu_solve(factor, r[:, None] * B * r[None, :])
    inner = linalg.lu_solve(factor, left.T).T
    Sigma = d[:, None] * inner * d[None, :]
    c = stack.contrast_c
    variance = max(float(c @ Sigma @ c) / n, 0.0)
    return SandwichResult(A_N=A, B_N=B, Sigma=Sigma, variance=variance, se=float(np.sqrt(variance)))


def sandwich_hajek(
    ds: Dataset,
    fp: FittedPropensity,
    scheme: WeightScheme,
    ws: Optional[WeightSet] = None,
    tau_hat: Optional[float] = None,
    numerical: bool = False,
) -> SandwichResult:
    scheme.require_smooth()
    ws = ws or compute_weightset(ds, fp, scheme)
    stack = hajek_stack(ds, fp, ws)
    q = fp.design.shape[1]
    if tau_hat is not None:
        stacked = stack.theta[q] - stack.theta[q + 1]
        if abs(stacked - tau_hat) > 1e-8 * (1.0 + abs(tau_hat)):
            LOGS.warning(f"{scheme.label}: supplied estimate {tau_hat:.6g} differs from the stacked {stacked:.6g}")
    A = numerical_bread(stack) if numerical else hajek_bread(ds, fp, ws, stack)
    return sandwich(stack, A)


def sandwich_augmented(
    ds: Dataset,
    fp: FittedPropensity,
    outcome_fit: FittedOutcome,
    scheme: WeightScheme,
    ws: Optional[WeightSet] = None,
    estimates: Optional[AugmentedParts] = None,
    affine: bool = False,
    numerical: bool = False,
) -> SandwichResult:
    scheme.require_smooth()
    ws = ws or compute_weightset(ds, fp, scheme)
    if estimates is None:
        estimates = augmented_parts(AugmentedInputs.build(ws, outcome_fit), ds, affine=affine)
    stack = augmented_stack(ds, fp, outcome_fit, ws, estimates, affine=affine)
    A = numerical_bread(stack) if numerical else augmented_bread(ds, fp, outcome_fit, ws, stack, affine)
    return sandwich(stack, A)


def _resample(index: int, ds: Dataset, analysis_closure, seed: int):
    rng = stream(seed, index)
    rows = rng.integers(0, ds.n_units, ds.n_units)
    try:
        return float(analysis_closure(ds.take(rows)))
    except REPLICATE_FAILURES as exc:
        return exc.kind


def bootstrap_variance(
    ds: Dataset,
    analysis_closure: Callable[[Dataset], float],
    B: int,
    seed: int,
    threads: Optional[int] = None,
) -> BootstrapResult:
    if B < 2:
        raise ConfigError(f"Bootstrap needs at least 2 resamples, got {B}.")
    outcomes = run_indexed(
        partial(_resample, ds=ds, analysis_closure=analysis_closure, seed=seed), B, threads
    )
    estimates = np.array([x for x in outcomes if not isinstance(x, str)], dtype=np.float64)
    failures = {}
    for x in outcomes:
        if isinstance(x, str):
            failures[x] = failures.get(x, 0) + 1
    n_failed = B - estimates.size

    if n_failed > Config.BOOT_FAIL_RATIO * B or estimates.size < 2:
        raise TooManyFailedResamples(
            f"{n_failed} of {B} bootstrap resamples failed ({failures}); "
            f"the weights are unstable under resampling.",
            failed=n_failed,
            total=B,
        )
    if n_failed:
        LOGS.warning(f"{n_failed} of {B} bootstrap resamples failed and were excluded: {failures}")
    return BootstrapResult(
        se=float(np.std(estimates, ddof=1)),
        replicates=estimates,
        n_failed=n_failed,
        failures=failures,
    )
