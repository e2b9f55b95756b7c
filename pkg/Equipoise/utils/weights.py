"""Selection functions g, balancing weights w_z = g e^{-z} (1-e)^{z-1}, and their
derivatives with respect to the propensity coefficients.

All evaluators take a scalar or an array of propensity scores. Derivatives are
returned as slopes in the linear predictor (d/d eta); multiplying by the design
row V_i gives d/d beta since de/d eta = e(1 - e).
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import xlogy

from Equipoise.core.dataset import Dataset
from Equipoise.core.models import FittedPropensity, WeightSet
from Equipoise.core.schemes import SchemeKind, WeightScheme
from Equipoise.utils.exceptions import (
    DimensionMismatch,
    EmptyEffectiveArm,
    InfiniteWeight,
    UnsupportedScheme,
)


@dataclass(frozen=True)
class SmoothedMatchingCoeffs:
    """Cubic replacement of the matching weights on [0.5 - delta, 0.5 + delta].

    ``a1`` (ascending powers of e) is the treated-arm weight inside the band and
    ``a2`` the control-arm weight; both meet the raw branches with matching
    value and slope at the two junctions.
    """

    delta: float
    a1: np.ndarray
    a2: np.ndarray

    @property
    def band(self) -> Tuple[float, float]:
        return 0.5 - self.delta, 0.5 + self.delta

    def inside(self, e: np.ndarray) -> np.ndarray:
        lo, hi = self.band
        return (e >= lo) & (e <= hi)


@lru_cache(maxsize=32)
def smoothed_matching_coeffs(delta: float) -> SmoothedMatchingCoeffs:
    lo, hi = 0.5 - delta, 0.5 + delta
    D = np.array(
        [
            [1.0, lo, lo**2, lo**3],
            [0.0, 1.0, 2 * lo, 3 * lo**2],
            [1.0, hi, hi**2, hi**3],
            [0.0, 1.0, 2 * hi, 3 * hi**2],
        ]
    )
    ratio = (1 - 2 * delta) / (1 + 2 * delta)
    slope = 4 / (1 + 2 * delta) ** 2
    a1 = np.linalg.solve(D, np.array([1.0, 0.0, ratio, -slope]))
    a2 = np.linalg.solve(D, np.array([ratio, slope, 1.0, 0.0]))
    a1.setflags(write=False)
    a2.setflags(write=False)
    return SmoothedMatchingCoeffs(delta, a1, a2)


def _unwrap(template, values):
    return float(values) if np.ndim(template) == 0 else values


def selection_g(scheme: WeightScheme, e):
    p = np.asarray(e, dtype=np.float64)
    kind = scheme.kind

    if kind is SchemeKind.IPW:
        g = np.ones_like(p)
    elif kind is SchemeKind.ATT:
        g = p.copy()
    elif kind is SchemeKind.ATC:
        g = 1.0 - p
    elif kind is SchemeKind.TRIM:
        g = ((p >= scheme.alpha) & (p <= 1.0 - scheme.alpha)).astype(np.float64)
    elif kind is SchemeKind.TRUNC:
        a = scheme.alpha
        g = (
            np.where(p < a, p / a, 0.0)
            + ((p >= a) & (p <= 1.0 - a))
            + np.where(p > 1.0 - a, (1.0 - p) / (1.0 - a), 0.0)
        )
    elif kind is SchemeKind.OW:
        g = p * (1.0 - p)
    elif kind is SchemeKind.MW:
        coeffs = smoothed_matching_coeffs(scheme.delta)
        g = np.where(coeffs.inside(p), p * P.polyval(p, coeffs.a1), np.minimum(p, 1.0 - p))
    elif kind is SchemeKind.EW:
        g = -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))
    elif kind is SchemeKind.BW:
        g = (p * (1.0 - p)) ** (scheme.nu - 1.0)
    else:
        raise UnsupportedScheme(f"No selection function for {scheme.label}.")
    return _unwrap(e, g)


def arm_weights(scheme: WeightScheme, e) -> Tuple[np.ndarray, np.ndarray]:
    """(w1, w0) for every score. Diverging entries come back as inf or nan."""
    p = np.atleast_1d(np.asarray(e, dtype=np.float64))
    q = 1.0 - p
    kind = scheme.kind

    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is SchemeKind.IPW:
            return 1.0 / p, 1.0 / q
        if kind is SchemeKind.ATT:
            return np.ones_like(p), p / q
        if kind is SchemeKind.ATC:
            return q / p, np.ones_like(p)
        if kind is SchemeKind.TRIM:
            keep = selection_g(scheme, p) > 0
            return np.where(keep, 1.0 / p, 0.0), np.where(keep, 1.0 / q, 0.0)
        if kind is SchemeKind.TRUNC:
            a = scheme.alpha
            low, high = p < a, p > 1.0 - a
            w1 = np.where(low, 1.0 / a, np.where(high, 1.0 / (1.0 - a), 1.0 / p))
            w0 = np.where(low, 1.0 / (1.0 - a), np.where(high, 1.0 / a, 1.0 / q))
            return w1, w0
        if kind is SchemeKind.OW:
            return q, p.copy()
        if kind is SchemeKind.MW:
            coeffs = smoothed_matching_coeffs(scheme.delta)
            band = coeffs.inside(p)
            w1 = np.where(band, P.polyval(p, coeffs.a1), np.minimum(1.0, q / p))
            w0 = np.where(band, P.polyval(p, coeffs.a2), np.minimum(1.0, p / q))
            return w1, w0
        if kind is SchemeKind.EW:
            xi = selection_g(scheme, p)
            return xi / p, xi / q
        if kind is SchemeKind.BW:
            nu = scheme.nu
            return p ** (nu - 2.0) * q ** (nu - 1.0), p ** (nu - 1.0) * q ** (nu - 2.0)
    raise UnsupportedScheme(f"No weights for {scheme.label}.")


def weight_wz(scheme: WeightScheme, e, z):
    w1, w0 = arm_weights(scheme, e)
    w = np.where(np.atleast_1d(np.asarray(z)) == 1, w1, w0)
    bad = np.flatnonzero(~np.isfinite(w))
    if bad.size:
        raise InfiniteWeight(
            f"{scheme.label} weight diverges at a propensity score of 0 or 1.", rows=bad.tolist()
        )
    if np.ndim(e) == 0 and np.ndim(z) == 0:
        return float(w[0])
    return w


def compute_weightset(ds: Dataset, fp: FittedPropensity, scheme: WeightScheme) -> WeightSet:
    e = np.asarray(fp.scores, dtype=np.float64)
    if e.shape[0] != ds.n_units:
        raise DimensionMismatch(f"{e.shape[0]} propensity scores for {ds.n_units} units.")
    treated, control = ds.treated, ds.control

    g = selection_g(scheme, e)
    w1, w0 = arm_weights(scheme, e)
    own = np.where(treated, w1, w0)
    bad = np.flatnonzero(~np.isfinite(own))
    if bad.size:
        raise InfiniteWeight(
            f"{scheme.label} weights diverge for {bad.size} units with propensity at 0 or 1; "
            f"rows {bad[:20].tolist()}",
            rows=bad.tolist(),
        )

    sum_w1 = float(w1[treated].sum())
    sum_w0 = float(w0[control].sum())
    if not sum_w1 > 0 or not sum_w0 > 0:
        arm = "treated" if not sum_w1 > 0 else "control"
        raise EmptyEffectiveArm(f"{scheme.label} leaves no weight in the {arm} arm.")

    with np.errstate(invalid="ignore"):
        norm_w1 = np.where(treated, w1 / sum_w1, 0.0)
        norm_w0 = np.where(control, w0 / sum_w0, 0.0)

    for values in (g, w1, w0, norm_w1, norm_w0):
        values.setflags(write=False)
    return WeightSet(
        scheme=scheme,
        g_values=g,
        raw_w1=w1,
        raw_w0=w0,
        norm_w1=norm_w1,
        norm_w0=norm_w0,
        sum_w1=sum_w1,
        sum_w0=sum_w0,
    )


def weight_slopes(scheme: WeightScheme, e) -> Tuple[np.ndarray, np.ndarray]:
    """(dw1/d eta, dw0/d eta) at each score."""
    p = np.atleast_1d(np.asarray(e, dtype=np.float64))
    q = 1.0 - p
    eta2 = p * q
    kind = scheme.kind

    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is SchemeKind.IPW:
            return -q / p, p / q
        if kind is SchemeKind.ATT:
            return np.zeros_like(p), p / q
        if kind is SchemeKind.ATC:
            return -q / p, np.zeros_like(p)
        if kind is SchemeKind.OW:
            return -eta2, eta2.copy()
        if kind is SchemeKind.MW:
            coeffs = smoothed_matching_coeffs(scheme.delta)
            band = coeffs.inside(p)
            s1 = np.where(band, P.polyval(p, P.polyder(coeffs.a1)) * eta2, np.where(p < 0.5, 0.0, -q / p))
            s0 = np.where(band, P.polyval(p, P.polyder(coeffs.a2)) * eta2, np.where(p < 0.5, p / q, 0.0))
            return s1, s0
        if kind is SchemeKind.EW:
            return xlogy(q, q) / p, -xlogy(p, p) / q
        if kind is SchemeKind.BW:
            nu = scheme.nu
            w1, w0 = arm_weights(scheme, p)
            return w1 * ((nu - 2.0) - (2.0 * nu - 3.0) * p), w0 * ((nu - 1.0) - (2.0 * nu - 3.0) * p)
    raise UnsupportedScheme(
        f"{scheme.label} has no smooth gradient; its variance is available by bootstrap only."
    )


def selection_slope(scheme: WeightScheme, e) -> np.ndarray:
    """dg/d eta at each score."""
    p = np.atleast_1d(np.asarray(e, dtype=np.float64))
    q = 1.0 - p
    eta2 = p * q
    kind = scheme.kind

    if kind is SchemeKind.IPW:
        return np.zeros_like(p)
    if kind is SchemeKind.ATT:
        return eta2
    if kind is SchemeKind.ATC:
        return -eta2
    if kind is SchemeKind.OW:
        return (1.0 - 2.0 * p) * eta2
    if kind is SchemeKind.MW:
        coeffs = smoothed_matching_coeffs(scheme.delta)
        eta5 = P.polyval(p, P.polyder(P.polymulx(coeffs.a1)))
        return np.where(coeffs.inside(p), eta5, np.where(p < 0.5, 1.0, -1.0)) * eta2
    if kind is SchemeKind.EW:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(q / p) * eta2
    if kind is SchemeKind.BW:
        return (scheme.nu - 1.0) * (1.0 - 2.0 * p) * selection_g(scheme, p)
    raise UnsupportedScheme(
        f"{scheme.label} has no smooth gradient; its variance is available by bootstrap only."
    )


def _times_rows(slope: np.ndarray, V) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        return slope.reshape(-1)[0] * V if slope.size == 1 else slope[:, None] * V[None, :]
    return slope[:, None] * V


def weight_gradient(scheme: WeightScheme, e, z, V) -> np.ndarray:
    """dw_z/d beta; one row per score when V is a design matrix."""
    s1, s0 = weight_slopes(scheme, e)
    slope = np.where(np.atleast_1d(np.asarray(z)) == 1, s1, s0)
    return _times_rows(slope, V)


def selection_gradient(scheme: WeightScheme, e, V) -> np.ndarray:
    """dg/d beta; one row per score when V is a design matrix."""
    return _times_rows(selection_slope(scheme, e), V)


def trapezoidal_g(e, K: float):
    """min{1, K min(e, 1-e)}; evaluation only, no estimator path."""
    p = np.asarray(e, dtype=np.float64)
    return _unwrap(e, np.minimum(1.0, K * np.minimum(p, 1.0 - p)))


# equipoise functions rescaled to equal one at t = 0.5
def scaled_entropy(t):
    p = np.asarray(t, dtype=np.float64)
    return _unwrap(t, -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / np.log(2.0))


def scaled_matching(t):
    p = np.asarray(t, dtype=np.float64)
    return _unwrap(t, 2.0 * np.minimum(p, 1.0 - p))


def scaled_beta(t, nu: float):
    p = np.asarray(t, dtype=np.float64)
    return _unwrap(t, 2.0 ** (2.0 * nu - 2.0) * (p * (1.0 - p)) ** (nu - 1.0))
