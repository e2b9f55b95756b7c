import numpy as np
import pytest

from conftest import SMOOTH_SCHEMES, fitted_scores
from Equipoise.core.dataset import build_dataset
from Equipoise.core.glm import DesignSpec, fit_propensity
from Equipoise.core.models import WeightSet
from Equipoise.core.schemes import parse_scheme
from Equipoise.utils.diagnostics import (
    ATC_LIKE,
    ATT_LIKE,
    BALANCED,
    effective_sample_size,
    equipoise_lean,
    extreme_weights,
    overlap_summary,
    variance_inflation,
    weighted_smd,
)
from Equipoise.utils.exceptions import EmptyEffectiveArm, ZeroVariance
from Equipoise.utils.weights import compute_weightset


@pytest.fixture
def four_units():
    return build_dataset([1, 1, 0, 0], [1.0, 2.0, 3.0, 4.0], [[2.0], [4.0], [0.0], [2.0]], ["X1"])


def hand_weights(raw_w1, raw_w0, z):
    z = np.asarray(z)
    raw_w1 = np.asarray(raw_w1, dtype=np.float64)
    raw_w0 = np.asarray(raw_w0, dtype=np.float64)
    own1 = np.where(z == 1, raw_w1, 0.0)
    own0 = np.where(z == 0, raw_w0, 0.0)
    return WeightSet(
        scheme=parse_scheme("OW"),
        g_values=np.full(z.shape[0], 0.25),
        raw_w1=raw_w1,
        raw_w0=raw_w0,
        norm_w1=own1 / own1.sum() if own1.sum() > 0 else own1,
        norm_w0=own0 / own0.sum() if own0.sum() > 0 else own0,
        sum_w1=float(own1.sum()),
        sum_w0=float(own0.sum()),
    )


def test_ess_and_inflation_by_hand(four_units):
    ws = hand_weights([1.0, 3.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [1, 1, 0, 0])
    assert effective_sample_size(ws, four_units, 1) == pytest.approx(1.6)
    assert effective_sample_size(ws, four_units, 0) == pytest.approx(2.0)
    assert variance_inflation(ws, four_units) == pytest.approx(1.125)


def test_uniform_weights_do_not_inflate(obs_ds):
    ws = compute_weightset(obs_ds, fitted_scores(np.full(obs_ds.n_units, 0.5)), parse_scheme("OW"))
    assert effective_sample_size(ws, obs_ds, 1) == pytest.approx(obs_ds.n_treated)
    assert variance_inflation(ws, obs_ds) == pytest.approx(1.0)


@pytest.mark.parametrize("name", SMOOTH_SCHEMES + ["TRIM(0.1)"])
def test_ess_bounded_by_arm_size(obs_ds, obs_fp, name):
    ws = compute_weightset(obs_ds, obs_fp, parse_scheme(name))
    assert 0 < effective_sample_size(ws, obs_ds, 1) <= obs_ds.n_treated + 1e-9
    assert 0 < effective_sample_size(ws, obs_ds, 0) <= obs_ds.n_control + 1e-9
    assert variance_inflation(ws, obs_ds) >= 1.0 - 1e-12


def test_empty_arm_has_no_ess(four_units):
    ws = hand_weights([0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [1, 1, 0, 0])
    with pytest.raises(EmptyEffectiveArm):
        effective_sample_size(ws, four_units, 1)


def test_extreme_weight_rows(four_units):
    ws = hand_weights([1.0, 150.0, 500.0, 0.0], [0.0, 0.0, 1.0, 120.0], [1, 1, 0, 0])
    assert extreme_weights(ws, four_units) == [1, 3]
    assert extreme_weights(ws, four_units, limit=130.0) == [1]


def test_smd_by_hand(four_units):
    ws = hand_weights([1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0], [1, 1, 0, 0])
    row = weighted_smd(four_units, ws).rows.iloc[0]
    assert row["name"] == "X1"
    assert row["smd_unweighted"] == pytest.approx(np.sqrt(2.0))
    assert row["smd_weighted"] == pytest.approx(np.sqrt(2.0))


def test_smd_reweighting_closes_the_gap(four_units):
    ws = hand_weights([1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1, 1, 0, 0])
    row = weighted_smd(four_units, ws).rows.iloc[0]
    assert row["smd_weighted"] == pytest.approx(0.0, abs=1e-12)


def test_identical_arms_have_zero_smd():
    ds = build_dataset([1, 1, 1, 0, 0, 0], np.zeros(6), [[1.0], [2.0], [3.0], [1.0], [2.0], [3.0]], ["X1"])
    ws = compute_weightset(ds, fitted_scores(np.full(6, 0.5)), parse_scheme("OW"))
    rows = weighted_smd(ds, ws).rows
    assert rows["smd_unweighted"].iloc[0] == 0.0
    assert rows["smd_weighted"].iloc[0] == pytest.approx(0.0, abs=1e-12)


def test_overlap_weights_balance_the_design_exactly(poor_overlap_ds):
    spec = DesignSpec.parse(["X1", "X2"])
    fp = fit_propensity(poor_overlap_ds, spec)
    ws = compute_weightset(poor_overlap_ds, fp, parse_scheme("OW"))
    table = weighted_smd(poor_overlap_ds, ws, spec)
    assert list(table.rows["name"]) == ["X1", "X2"]
    assert table.rows["smd_weighted"].abs().max() <= 1e-6
    assert table.rows["smd_unweighted"].abs().min() > 0.1
    assert table.scheme == "OW"


def test_constant_covariate_is_rejected():
    ds = build_dataset([1, 0, 1, 0], np.zeros(4), [[1.0], [1.0], [1.0], [1.0]], ["X1"])
    ws = compute_weightset(ds, fitted_scores(np.full(4, 0.5)), parse_scheme("OW"))
    with pytest.raises(ZeroVariance):
        weighted_smd(ds, ws)


@pytest.mark.parametrize(
    "prevalence, ratio, lean, noted",
    [
        (0.5, 1.0, BALANCED, False),
        (0.1, 1.0, ATT_LIKE, False),
        (0.9, 0.4, ATC_LIKE, True),
        (0.5, 3.0, ATC_LIKE, False),
        (0.5, 0.3, ATT_LIKE, False),
        (0.15, 0.3, ATT_LIKE, False),
        (0.2, 1.0, BALANCED, False),
        (0.2, 3.0, ATC_LIKE, False),
        (0.8, 0.3, ATT_LIKE, False),
        (0.8, 1.0, BALANCED, False),
        (0.81, 1.0, ATC_LIKE, False),
    ],
)
def test_equipoise_lean(prevalence, ratio, lean, noted):
    got, note = equipoise_lean(prevalence, ratio, 0.5, 2.0)
    assert got == lean
    assert bool(note) is noted


def test_overlap_summary(obs_ds, obs_fp):
    summary = overlap_summary(obs_fp, obs_ds)
    for arm in (summary.treated, summary.control):
        assert arm.min <= arm.q1 <= arm.median <= arm.q3 <= arm.max
        assert 0.0 < arm.min and arm.max < 1.0
    assert summary.prevalence == pytest.approx(obs_ds.n_treated / obs_ds.n_units)
    e = obs_fp.scores
    expected = np.var(e[obs_ds.treated], ddof=1) / np.var(e[obs_ds.control], ddof=1)
    assert summary.variance_ratio == pytest.approx(expected)
    assert summary.treated.mean > summary.control.mean
    frame = summary.to_frame()
    assert list(frame["arm"]) == ["treated", "control"]
    assert (frame["equipoise_lean"] == summary.equipoise_lean).all()
