"""Seeded data-generating processes, superpopulation truths and the
Monte-Carlo harness.

Every replicate draws from its own counter-based stream keyed by
(seed, replicate index), so results do not depend on how replicates are
scheduled across workers.
"""

from dataclasses import asdict, dataclass, replace
from enum import Enum
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from config import Config
from Equipoise.core.dataset import Dataset, build_dataset
from Equipoise.core.glm import DesignSpec, fit_outcome_model, fit_propensity
from Equipoise.core.logger import LOGS
from Equipoise.core.schemes import WeightScheme, parse_scheme
from Equipoise.utils.estimators import EstimatorMode, point_estimate, uses_affine_form
from Equipoise.utils.exceptions import (
    REPLICATE_FAILURES,
    AllReplicatesFailed,
    AllZeroSelection,
    ConfigError,
)
from Equipoise.utils.variance import sandwich_augmented, sandwich_hajek
from Equipoise.utils.weights import compute_weightset, selection_g
from Equipoise.utils.workers import run_indexed, stream

# stream keys: replicates and the superpopulation never share a stream
_REPLICATE_KEY = 0
_SUPERPOP_KEY = 1


class Family(str, Enum):
    DGP1 = "dgp1"
    DGP2 = "dgp2"
    ILLUSTRATIVE = "illustrative"


DGP1_BETA = {
    "good": (-0.5, 0.3, 0.4, 0.4, 0.4),
    "moderate": (-1.0, 0.6, 0.8, 0.8, 0.8),
    "poor": (-1.5, 0.9, 1.2, 1.2, 1.2),
}
DGP2_GAMMA = {"good": 1.0, "moderate": 2.0, "poor": 3.0}
DGP2_SLOPES = (0.15, 0.3, 0.3, -0.2, -0.25, -0.25)
DGP2_INTERCEPT = {
    "low": {"good": -2.1, "moderate": -2.2, "poor": -2.8},
    "medium": {"good": -0.1, "moderate": 0.0, "poor": 0.2},
}
ILLUSTRATIVE_ALPHA = {
    "A": (-2.8, 0.2, 0.8),
    "B": (-1.6, 0.45, 0.6),
    "C": (0.2, 0.8, 0.2),
}
HOMOGENEOUS_EFFECT = {Family.DGP1: 3.0, Family.DGP2: 0.75}

TABLE_SCHEMES = ("IPW", "ATT", "ATC", "OW", "MW", "EW", "BW(11)", "BW(81)")

_EFFECTS = {"homogeneous": "homogeneous", "homo": "homogeneous", "heterogeneous": "heterogeneous", "hetero": "heterogeneous"}
_MISSPEC = ("none", "ps", "outcome", "both")


@dataclass(frozen=True)
class DgpSpec:
    family: Family
    overlap: str = "good"
    prevalence: str = "medium"
    scenario: str = "A"
    effect: str = "homogeneous"
    n: int = 2000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(str(getattr(self.family, "value", self.family)).lower()))
        effect = _EFFECTS.get(str(self.effect).lower())
        if effect is None:
            raise ConfigError(f"Effect must be homogeneous or heterogeneous, got '{self.effect}'.")
        object.__setattr__(self, "effect", effect)
        object.__setattr__(self, "scenario", str(self.scenario).upper())
        if self.family in (Family.DGP1, Family.DGP2) and self.overlap not in DGP1_BETA:
            raise ConfigError(f"Overlap must be good, moderate or poor, got '{self.overlap}'.")
        if self.family is Family.DGP2 and self.prevalence not in DGP2_INTERCEPT:
            raise ConfigError(f"Prevalence must be medium or low, got '{self.prevalence}'.")
        if self.family is Family.ILLUSTRATIVE and self.scenario not in ILLUSTRATIVE_ALPHA:
            raise ConfigError(f"Scenario must be A, B or C, got '{self.scenario}'.")
        if self.n < 4:
            raise ConfigError(f"Sample size {self.n} is too small.")

    @property
    def constant_effect(self) -> Optional[float]:
        if self.family is Family.ILLUSTRATIVE or self.effect != "homogeneous":
            return None
        return HOMOGENEOUS_EFFECT[self.family]

    def as_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        return out


@dataclass(frozen=True)
class Population:
    """A draw with its true propensity scores and potential-outcome means."""

    covariates: np.ndarray
    names: Tuple[str, ...]
    e: np.ndarray
    z: np.ndarray
    m1: np.ndarray
    m0: np.ndarray
    y1: np.ndarray
    y0: np.ndarray

    @property
    def y(self) -> np.ndarray:
        return np.where(self.z == 1, self.y1, self.y0)

    def to_dataset(self) -> Dataset:
        return build_dataset(self.z, self.y, self.covariates, self.names)


def _effect(spec: DgpSpec, e: np.ndarray) -> np.ndarray:
    if spec.effect == "homogeneous":
        return np.full_like(e, HOMOGENEOUS_EFFECT[spec.family])
    if spec.family is Family.DGP1:
        return -12.0 * e**2 + 12.0 * e + 3.0
    return e**2 + 2.0 * e + 1.0


def _draw_dgp1(spec: DgpSpec, rng: np.random.Generator, n: int) -> Population:
    x4 = rng.binomial(1, 0.5, n).astype(np.float64)
    x3 = rng.binomial(1, 0.4 + 0.2 * x4).astype(np.float64)
    mean1 = x4 - x3 + 0.5 * x3 * x4
    mean2 = -x4 + x3 + x3 * x4
    var = 2.0 - x3
    cov = 0.25 * (1.0 + x3)
    u = rng.standard_normal((n, 2))
    x1 = mean1 + np.sqrt(var) * u[:, 0]
    x2 = mean2 + cov / np.sqrt(var) * u[:, 0] + np.sqrt(var - cov**2 / var) * u[:, 1]
    X = np.column_stack([x1, x2, x3, x4])

    beta = np.asarray(DGP1_BETA[spec.overlap])
    e = expit(beta[0] + X @ beta[1:])
    z = rng.binomial(1, e)
    m0 = 0.5 + x1 + 0.6 * x2 + 2.2 * x3 + 1.2 * x4
    m1 = m0 + _effect(spec, e)
    noise = rng.standard_normal(n)
    return Population(X, ("X1", "X2", "X3", "X4"), e, z, m1, m0, m1 + noise, m0 + noise)


def _draw_dgp2(spec: DgpSpec, rng: np.random.Generator, n: int) -> Population:
    sigma = np.full((6, 6), 0.5) + 0.5 * np.eye(6)
    X = rng.standard_normal((n, 6)) @ np.linalg.cholesky(sigma).T
    X[:, 3:] = (X[:, 3:] > 0).astype(np.float64)

    gamma = DGP2_GAMMA[spec.overlap]
    e = expit(DGP2_INTERCEPT[spec.prevalence][spec.overlap] + X @ (gamma * np.asarray(DGP2_SLOPES)))
    z = rng.binomial(1, e)
    m0 = X @ np.array([-0.5, -0.5, -1.5, 0.8, 0.8, 1.0])
    m1 = m0 + _effect(spec, e)
    noise = 1.5 * rng.standard_normal(n)
    names = tuple(f"X{j}" for j in range(1, 7))
    return Population(X, names, e, z, m1, m0, m1 + noise, m0 + noise)


def _draw_illustrative(spec: DgpSpec, rng: np.random.Generator, n: int) -> Population:
    x1 = 2.0 + 2.0 * rng.standard_normal(n)
    x2 = 1.0 + rng.standard_normal(n)
    alpha = ILLUSTRATIVE_ALPHA[spec.scenario]
    e = expit(alpha[0] + alpha[1] * x1 + alpha[2] * x2)
    z = rng.binomial(1, e)
    m1 = 2.0 + x1 + x2 + 2.0 * x1**2 + 0.5 * x2**2
    m0 = x1 + x2
    y1 = m1 + 2.0 * rng.standard_normal(n)
    y0 = m0 + rng.standard_normal(n)
    return Population(np.column_stack([x1, x2]), ("X1", "X2"), e, z, m1, m0, y1, y0)


_DRAWS = {
    Family.DGP1: _draw_dgp1,
    Family.DGP2: _draw_dgp2,
    Family.ILLUSTRATIVE: _draw_illustrative,
}


def draw_population(spec: DgpSpec, rng: np.random.Generator, n: int) -> Population:
    return _DRAWS[spec.family](spec, rng, n)


def _generate(spec: DgpSpec, replicate_index: int, family: Family) -> Dataset:
    if spec.family is not family:
        raise ConfigError(f"Spec is for {spec.family.value}, not {family.value}.")
    rng = stream(spec.seed, _REPLICATE_KEY, replicate_index)
    return draw_population(spec, rng, spec.n).to_dataset()


def generate_dgp1(spec: DgpSpec, replicate_index: int) -> Dataset:
    return _generate(spec, replicate_index, Family.DGP1)


def generate_dgp2(spec: DgpSpec, replicate_index: int) -> Dataset:
    return _generate(spec, replicate_index, Family.DGP2)


def generate_illustrative(spec: DgpSpec, replicate_index: int) -> Dataset:
    return _generate(spec, replicate_index, Family.ILLUSTRATIVE)


def generate(spec: DgpSpec, replicate_index: int) -> Dataset:
    return _generate(spec, replicate_index, spec.family)


def default_designs(spec: DgpSpec, misspec: str = "none") -> Tuple[DesignSpec, DesignSpec]:
    """Correct propensity and outcome designs, with X1 dropped where misspecified."""
    if misspec not in _MISSPEC:
        raise ConfigError(f"Misspecification must be one of {_MISSPEC}, got '{misspec}'.")
    if spec.family is Family.ILLUSTRATIVE:
        ps = DesignSpec.parse(["X1", "X2"])
        outcome = DesignSpec.parse(["X1", "X2", "X1^2", "X2^2"])
    else:
        names = ["X1", "X2", "X3", "X4"] if spec.family is Family.DGP1 else [f"X{j}" for j in range(1, 7)]
        ps = outcome = DesignSpec.parse(names)
    if misspec in ("ps", "both"):
        ps = ps.without("X1")
    if misspec in ("outcome", "both"):
        outcome = outcome.without("X1")
    return ps, outcome


def _superpopulation(spec: DgpSpec, superpop_n: Optional[int], seed: Optional[int]) -> Population:
    superpop_n = int(superpop_n or Config.SUPERPOP_N)
    seed = spec.seed if seed is None else seed
    return draw_population(spec, stream(seed, _SUPERPOP_KEY, 0), superpop_n)


def _weighted_truth(pop: Population, scheme: WeightScheme) -> float:
    g = selection_g(scheme, pop.e)
    total = g.sum()
    if not total > 0:
        raise AllZeroSelection(f"{scheme.label} selects nobody in the superpopulation.")
    return float(np.dot(g, pop.m1 - pop.m0) / total)


def true_estimand(
    spec: DgpSpec,
    scheme: WeightScheme,
    superpop_n: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    if spec.constant_effect is not None:
        return spec.constant_effect
    return _weighted_truth(_superpopulation(spec, superpop_n, seed), scheme)


def true_estimand_table(
    spec: DgpSpec,
    schemes: Optional[Sequence[WeightScheme]] = None,
    superpop_n: Optional[int] = None,
    seed: Optional[int] = None,
) -> pd.DataFrame:
    schemes = list(schemes or [parse_scheme(s) for s in TABLE_SCHEMES])
    if spec.constant_effect is not None:
        values = [spec.constant_effect] * len(schemes)
    else:
        pop = _superpopulation(spec, superpop_n, seed)
        values = [_weighted_truth(pop, s) for s in schemes]
    return pd.DataFrame(
        {
            "scheme": [s.label for s in schemes],
            "estimand": [s.estimand_label for s in schemes],
            "true_value": values,
        }
    )


def true_asymptotic_variance(
    spec: DgpSpec,
    scheme: WeightScheme,
    superpop_n: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """Variance of the efficient influence function of the weighted effect.

    The potential-outcome term is reduced by the part explained by the true
    outcome means.
    """
    pop = _superpopulation(spec, superpop_n, seed)
    e = pop.e
    g = selection_g(scheme, e)
    mean_g = g.mean()
    if not mean_g > 0:
        raise AllZeroSelection(f"{scheme.label} selects nobody in the superpopulation.")
    tau1 = np.mean(g * pop.m1) / mean_g
    tau0 = np.mean(g * pop.m0) / mean_g
    h = (g / mean_g) ** 2
    live = h > 0
    e, h = e[live], h[live]
    y1, y0, m1, m0 = pop.y1[live], pop.y0[live], pop.m1[live], pop.m0[live]

    spread = (y1 - tau1) ** 2 / e + (y0 - tau0) ** 2 / (1.0 - e)
    explained = (np.sqrt((1.0 - e) / e) * (m1 - tau1) + np.sqrt(e / (1.0 - e)) * (m0 - tau0)) ** 2
    n = pop.e.shape[0]
    return float((np.sum(h * spread) - np.sum(h * explained)) / n)


@dataclass(frozen=True)
class MonteCarloSummary:
    scheme: str
    true_value: float
    mean_estimate: float
    arb: float
    rmse: float
    sd: float
    se_avg: float
    cp: float
    n_reps: int
    n_failed: int


def summarize_replicates(
    scheme: str, true_value: float, estimates: np.ndarray, ses: np.ndarray, n_reps: int
) -> MonteCarloSummary:
    """ARB, RMSE, SD and SE are reported x100; SD uses the population form so
    that RMSE^2 = SD^2 + bias^2."""
    ok = np.isfinite(estimates)
    n_failed = int(n_reps - ok.sum())
    if not ok.any():
        raise AllReplicatesFailed(f"All {n_reps} replicates failed for {scheme}.", failed=n_failed)
    est, se = estimates[ok], ses[ok]
    errors = est - true_value
    bias = errors.mean()
    with_se = np.isfinite(se)
    if with_se.any():
        covered = np.abs(errors[with_se]) <= 1.96 * se[with_se]
        se_avg, cp = 100.0 * se[with_se].mean(), covered.mean()
    else:
        se_avg, cp = float("nan"), float("nan")
    arb = 100.0 * abs(bias) / abs(true_value) if true_value != 0 else float("nan")
    return MonteCarloSummary(
        scheme=scheme,
        true_value=float(true_value),
        mean_estimate=float(est.mean()),
        arb=float(arb),
        rmse=float(100.0 * np.sqrt(np.mean(errors**2))),
        sd=float(100.0 * np.std(est, ddof=0)),
        se_avg=float(se_avg),
        cp=float(cp),
        n_reps=int(n_reps),
        n_failed=n_failed,
    )


def _one_replicate(
    index: int,
    spec: DgpSpec,
    schemes: Tuple[WeightScheme, ...],
    mode: EstimatorMode,
    misspec: str,
    variance: str,
) -> np.ndarray:
    """(estimate, se) per scheme; NaN estimate marks a failed fit."""
    out = np.full((len(schemes), 2), np.nan)
    ps_spec, outcome_spec = default_designs(spec, misspec)
    try:
        ds = generate(spec, index)
        fp = fit_propensity(ds, ps_spec)
        fit = None if mode is EstimatorMode.HAJEK else fit_outcome_model(ds, outcome_spec)
    except REPLICATE_FAILURES:
        return out

    for k, scheme in enumerate(schemes):
        try:
            ws = compute_weightset(ds, fp, scheme)
            out[k, 0] = point_estimate(mode, ds, ws, fit)
            if variance != "sandwich" or not scheme.is_smooth:
                continue
            if mode is EstimatorMode.HAJEK:
                out[k, 1] = sandwich_hajek(ds, fp, scheme, ws).se
            else:
                affine = uses_affine_form(mode, scheme)
                out[k, 1] = sandwich_augmented(ds, fp, fit, scheme, ws, affine=affine).se
        except REPLICATE_FAILURES:
            out[k] = np.nan
    return out


def run_monte_carlo(
    spec: DgpSpec,
    schemes: Sequence[WeightScheme],
    estimator_mode: EstimatorMode = EstimatorMode.HAJEK,
    misspec: str = "none",
    n_reps: int = 1000,
    base_seed: Optional[int] = None,
    variance: str = "sandwich",
    threads: Optional[int] = None,
    superpop_n: Optional[int] = None,
) -> List[MonteCarloSummary]:
    if n_reps < 2:
        raise ConfigError("Monte-Carlo runs need at least 2 replicates.")
    if misspec not in _MISSPEC:
        raise ConfigError(f"Misspecification must be one of {_MISSPEC}, got '{misspec}'.")
    if not schemes:
        raise ConfigError("No weighting schemes requested.")
    spec = replace(spec, seed=spec.seed if base_seed is None else int(base_seed))
    schemes = tuple(schemes)
    mode = EstimatorMode(estimator_mode)

    truths = true_estimand_table(spec, schemes, superpop_n)["true_value"].to_numpy()
    LOGS.info(
        f"Monte-Carlo {spec.family.value} ({spec.overlap}/{spec.prevalence}/{spec.scenario}, "
        f"{spec.effect}) n={spec.n} reps={n_reps} mode={mode.value} misspec={misspec}"
    )
    task = partial(
        _one_replicate, spec=spec, schemes=schemes, mode=mode, misspec=misspec, variance=variance
    )
    results = np.stack(run_indexed(task, n_reps, threads))

    summaries = []
    for k, scheme in enumerate(schemes):
        summary = summarize_replicates(scheme.label, truths[k], results[:, k, 0], results[:, k, 1], n_reps)
        if summary.n_failed:
            LOGS.warning(f"{scheme.label}: {summary.n_failed} of {n_reps} replicates failed and were excluded")
        summaries.append(summary)
    return summaries


def summaries_to_frame(summaries: Sequence[MonteCarloSummary]) -> pd.DataFrame:
    return pd.DataFrame([asdict(s) for s in summaries])


def prevalence_of(spec: DgpSpec, n_reps: int) -> Dict[str, float]:
    """Average treated share over replicates of the design."""
    shares = np.array([generate(spec, i).n_treated / spec.n for i in range(n_reps)])
    return {"mean": float(shares.mean()), "sd": float(shares.std(ddof=1)) if n_reps > 1 else 0.0}
