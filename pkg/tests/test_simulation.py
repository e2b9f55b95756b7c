import numpy as np
import pytest

from Equipoise.core.schemes import parse_scheme
from Equipoise.utils.exceptions import AllReplicatesFailed, ConfigError
from Equipoise.utils.simulation import (
    TABLE_SCHEMES,
    DgpSpec,
    Family,
    _effect,
    default_designs,
    generate,
    generate_dgp1,
    generate_dgp2,
    generate_illustrative,
    prevalence_of,
    run_monte_carlo,
    summaries_to_frame,
    summarize_replicates,
    true_asymptotic_variance,
    true_estimand,
    true_estimand_table,
)


def test_spec_validation():
    assert DgpSpec("DGP1").family is Family.DGP1
    assert DgpSpec(Family.DGP2, effect="hetero").effect == "heterogeneous"
    assert DgpSpec("illustrative", scenario="b").scenario == "B"
    with pytest.raises(ConfigError):
        DgpSpec("dgp1", overlap="great")
    with pytest.raises(ConfigError):
        DgpSpec("dgp2", prevalence="high")
    with pytest.raises(ConfigError):
        DgpSpec("illustrative", scenario="D")
    with pytest.raises(ConfigError):
        DgpSpec("dgp1", effect="linear")
    with pytest.raises(ConfigError):
        DgpSpec("dgp1", n=3)
    with pytest.raises(ValueError):
        DgpSpec("dgp3")


def test_homogeneous_truth_is_the_constant_effect():
    spec = DgpSpec("dgp1", overlap="poor")
    table = true_estimand_table(spec)
    assert list(table["scheme"]) == [parse_scheme(s).label for s in TABLE_SCHEMES]
    assert (table["true_value"] == 3.0).all()
    assert true_estimand(DgpSpec("dgp2"), parse_scheme("OW")) == 0.75


def test_heterogeneous_effect_curves():
    e = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(_effect(DgpSpec("dgp1", effect="heterogeneous"), e), [3.0, 6.0, 3.0])
    np.testing.assert_allclose(_effect(DgpSpec("dgp2", effect="heterogeneous"), e), [1.0, 2.25, 4.0])


def test_heterogeneous_truths_differ_by_scheme():
    spec = DgpSpec("dgp1", overlap="moderate", effect="heterogeneous", seed=3)
    table = true_estimand_table(spec, superpop_n=50_000).set_index("scheme")["true_value"]
    # the effect peaks at e = 0.5, so equipoise schemes sit above the average effect
    assert table["OW"] > table["IPW"]
    assert table["BW(81)"] > table["OW"]
    assert (table <= 6.0).all() and (table >= 3.0).all()


@pytest.mark.parametrize(
    "spec",
    [
        DgpSpec("dgp1", n=300, seed=4),
        DgpSpec("dgp2", prevalence="low", n=300, seed=4),
        DgpSpec("illustrative", scenario="C", n=300, seed=4),
    ],
)
def test_generation_is_keyed_by_replicate(spec):
    a, b = generate(spec, 7), generate(spec, 7)
    np.testing.assert_array_equal(a.covariates, b.covariates)
    np.testing.assert_array_equal(a.treatment, b.treatment)
    np.testing.assert_array_equal(a.outcome, b.outcome)
    assert not np.array_equal(generate(spec, 8).outcome, a.outcome)
    assert a.n_units == 300


def test_generator_family_is_checked():
    with pytest.raises(ConfigError):
        generate_dgp1(DgpSpec("dgp2"), 0)
    with pytest.raises(ConfigError):
        generate_dgp2(DgpSpec("illustrative"), 0)
    with pytest.raises(ConfigError):
        generate_illustrative(DgpSpec("dgp1"), 0)
    assert generate_dgp2(DgpSpec("dgp2", n=50), 0).covariate_names == ("X1", "X2", "X3", "X4", "X5", "X6")


def test_dgp2_binary_covariates():
    ds = generate(DgpSpec("dgp2", n=500, seed=2), 0)
    assert set(np.unique(ds.covariates[:, 3:])) <= {0.0, 1.0}


def test_low_prevalence_treats_fewer():
    medium = prevalence_of(DgpSpec("dgp2", n=1000), 5)["mean"]
    low = prevalence_of(DgpSpec("dgp2", prevalence="low", n=1000), 5)["mean"]
    assert low < 0.3 < medium


def test_misspecified_designs_drop_the_first_covariate():
    spec = DgpSpec("illustrative")
    ps, outcome = default_designs(spec)
    assert ps.names == ["(Intercept)", "X1", "X2"]
    assert outcome.names == ["(Intercept)", "X1", "X2", "X1^2", "X2^2"]
    ps, outcome = default_designs(spec, "both")
    assert ps.names == ["(Intercept)", "X2"]
    assert outcome.names == ["(Intercept)", "X2", "X2^2"]
    ps, outcome = default_designs(DgpSpec("dgp1"), "ps")
    assert "X1" not in ps.names and "X1" in outcome.names
    with pytest.raises(ConfigError):
        default_designs(spec, "everything")


def test_summary_arithmetic():
    estimates = np.array([2.5, 3.5, 3.0, np.nan, 4.0])
    ses = np.array([0.5, 0.5, 0.1, np.nan, 0.2])
    summary = summarize_replicates("OW", 3.0, estimates, ses, 5)
    assert summary.n_failed == 1
    assert summary.mean_estimate == pytest.approx(3.25)
    assert summary.arb == pytest.approx(100 * 0.25 / 3.0)
    assert (summary.rmse / 100) ** 2 == pytest.approx((summary.sd / 100) ** 2 + 0.25**2)
    assert summary.se_avg == pytest.approx(100 * 0.325)
    assert summary.cp == pytest.approx(0.75)


def test_summary_without_standard_errors():
    summary = summarize_replicates("TRIM(0.1)", 1.0, np.array([1.0, 1.2]), np.full(2, np.nan), 2)
    assert np.isnan(summary.se_avg) and np.isnan(summary.cp)
    assert summary.sd == pytest.approx(10.0)


def test_summary_needs_one_success():
    with pytest.raises(AllReplicatesFailed):
        summarize_replicates("OW", 1.0, np.full(3, np.nan), np.full(3, np.nan), 3)


def test_monte_carlo_does_not_depend_on_workers():
    spec = DgpSpec("dgp1", n=300, seed=17)
    schemes = [parse_scheme(s) for s in ("IPW", "OW", "TRIM(0.1)")]
    serial = summaries_to_frame(run_monte_carlo(spec, schemes, n_reps=6, threads=1))
    parallel = summaries_to_frame(run_monte_carlo(spec, schemes, n_reps=6, threads=2))
    assert serial.equals(parallel)
    assert list(serial["scheme"]) == ["IPW", "OW", "TRIM(0.1)"]
    assert serial.loc[2, "se_avg"] != serial.loc[2, "se_avg"]
    assert (serial.loc[:1, "cp"] >= 0).all()


def test_monte_carlo_seed_override():
    spec = DgpSpec("illustrative", scenario="A", n=300, seed=1)
    schemes = [parse_scheme("OW")]
    options = dict(n_reps=3, variance="none", threads=1, superpop_n=5000)
    a = run_monte_carlo(spec, schemes, "augmented", base_seed=9, **options)
    b = run_monte_carlo(DgpSpec("illustrative", scenario="A", n=300, seed=9), schemes, "augmented", **options)
    assert summaries_to_frame(a).equals(summaries_to_frame(b))


def test_monte_carlo_arguments():
    spec = DgpSpec("dgp1", n=100)
    with pytest.raises(ConfigError):
        run_monte_carlo(spec, [parse_scheme("OW")], n_reps=1)
    with pytest.raises(ConfigError):
        run_monte_carlo(spec, [], n_reps=3)
    with pytest.raises(ConfigError):
        run_monte_carlo(spec, [parse_scheme("OW")], n_reps=3, misspec="x")


@pytest.mark.slow
def test_illustrative_truths():
    spec = DgpSpec("illustrative", scenario="B", seed=2024)
    table = true_estimand_table(spec).set_index("scheme")["true_value"]
    expected = {
        "IPW": 18.99,
        "ATT": 25.35,
        "ATC": 13.12,
        "OW": 17.53,
        "MW(0.002)": 17.02,
        "EW": 17.81,
        "BW(11)": 15.29,
        "BW(81)": 14.73,
    }
    for label, value in expected.items():
        assert table[label] == pytest.approx(value, abs=0.2), label


@pytest.mark.slow
def test_overlap_weights_beat_inverse_probability_weights():
    spec = DgpSpec("illustrative", scenario="B", seed=11)
    ow = true_asymptotic_variance(spec, parse_scheme("OW"), superpop_n=200_000)
    ipw = true_asymptotic_variance(spec, parse_scheme("IPW"), superpop_n=200_000)
    assert 0 < ow < ipw


@pytest.mark.slow
@pytest.mark.parametrize(
    "spec, expected",
    [
        (DgpSpec("dgp1", overlap="good"), 0.514),
        (DgpSpec("dgp2", overlap="good"), 0.4008),
        (DgpSpec("dgp2", overlap="poor", prevalence="low"), 0.1024),
        (DgpSpec("illustrative", scenario="A"), 0.20),
        (DgpSpec("illustrative", scenario="C"), 0.80),
    ],
)
def test_design_prevalence(spec, expected):
    assert prevalence_of(spec, 20)["mean"] == pytest.approx(expected, abs=0.03)


@pytest.mark.slow
def test_overlap_weights_are_efficient_under_constant_effects():
    spec = DgpSpec("dgp1", overlap="poor", seed=8)
    avar = {
        name: true_asymptotic_variance(spec, parse_scheme(name), superpop_n=200_000)
        for name in ("OW", "MW", "EW")
    }
    assert avar["OW"] <= avar["EW"]
    assert avar["OW"] <= avar["MW"]


def monte_carlo(spec, names, n_reps, **options):
    schemes = [parse_scheme(name) for name in names]
    summaries = run_monte_carlo(spec, schemes, n_reps=n_reps, superpop_n=200_000, **options)
    return summaries_to_frame(summaries).set_index("scheme")


@pytest.mark.slow
def test_illustrative_overlap_estimate_and_error():
    table = monte_carlo(DgpSpec("illustrative", scenario="B", n=1000, seed=41), ["OW"], 200)
    assert table.loc["OW", "mean_estimate"] == pytest.approx(17.49, abs=0.3)
    assert table.loc["OW", "se_avg"] / 100 == pytest.approx(0.67, abs=0.1)
    assert table.loc["OW", "n_failed"] == 0


@pytest.mark.slow
@pytest.mark.parametrize("scenario, near, far", [("A", "ATT", "ATC"), ("C", "ATC", "ATT")])
def test_equipoise_estimates_follow_the_prevalence(scenario, near, far):
    spec = DgpSpec("illustrative", scenario=scenario, n=1000, seed=43)
    estimates = monte_carlo(spec, ["OW", "MW", "EW"], 200, variance="none")["mean_estimate"]
    truths = true_estimand_table(spec, [parse_scheme(near), parse_scheme(far)], 200_000)
    truths = truths.set_index("scheme")["true_value"]
    for label, value in estimates.items():
        assert abs(value - truths[near]) < abs(value - truths[far]), label
    if scenario == "C":
        assert estimates["OW"] == pytest.approx(8.47, abs=0.3)
        assert truths["ATC"] == pytest.approx(8.29, abs=0.2)


@pytest.mark.slow
def test_overlap_weights_under_good_overlap():
    spec = DgpSpec("dgp1", overlap="good", n=2000, seed=51)
    table = monte_carlo(spec, ["OW"], 200)
    ow = table.loc["OW"]
    assert ow["arb"] <= 1.0
    assert 4.0 <= ow["rmse"] <= 5.8
    assert 0.90 <= ow["cp"] <= 0.99
    # the closed-form variance and the sandwich describe the same spread
    avar = true_asymptotic_variance(spec, parse_scheme("OW"), superpop_n=200_000)
    assert 100 * np.sqrt(avar / spec.n) == pytest.approx(ow["se_avg"], rel=0.15)


@pytest.mark.slow
def test_inverse_probability_weights_break_down_under_poor_overlap():
    table = monte_carlo(DgpSpec("dgp1", overlap="poor", n=2000, seed=53), ["IPW", "OW"], 300)
    assert table.loc["IPW", "cp"] <= 0.87
    assert table.loc["IPW", "rmse"] >= 5 * table.loc["OW", "rmse"]
    assert table.loc["OW", "cp"] >= 0.90


@pytest.mark.slow
@pytest.mark.parametrize("overlap", ["good", "moderate", "poor"])
def test_large_beta_exponent_costs_precision(overlap):
    spec = DgpSpec("dgp1", overlap=overlap, n=2000, seed=55)
    table = monte_carlo(spec, ["BW(11)", "BW(81)"], 100)
    assert (table["n_failed"] == 0).all()
    assert table.loc["BW(81)", "se_avg"] >= 1.5 * table.loc["BW(11)", "se_avg"]


@pytest.mark.slow
def test_augmentation_under_poor_overlap():
    spec = DgpSpec("dgp1", overlap="poor", effect="heterogeneous", n=2000, seed=57)
    table = monte_carlo(spec, ["IPW", "OW"], 200, estimator_mode="augmented")
    assert 7.0 <= table.loc["OW", "rmse"] <= 9.8
    assert table.loc["IPW", "rmse"] >= 2.5 * table.loc["OW", "rmse"]


@pytest.mark.slow
@pytest.mark.parametrize("overlap", ["moderate", "poor"])
def test_both_models_misspecified_lose_coverage(overlap):
    spec = DgpSpec("dgp1", overlap=overlap, n=2000, seed=59)
    table = monte_carlo(spec, ["IPW", "OW", "MW", "EW"], 100, estimator_mode="augmented", misspec="both")
    assert (table["cp"] <= 0.10).all()


@pytest.mark.slow
def test_low_prevalence_poor_overlap():
    spec = DgpSpec("dgp2", overlap="poor", prevalence="low", n=2000, seed=61)
    table = monte_carlo(spec, ["IPW", "OW"], 200)
    assert table.loc["IPW", "arb"] >= 30
    assert table.loc["IPW", "cp"] <= 0.70
    assert table.loc["OW", "arb"] <= 3
    assert 0.90 <= table.loc["OW", "cp"] <= 0.99


@pytest.mark.slow
def test_doubly_robust_with_a_misspecified_propensity():
    spec = DgpSpec("dgp1", overlap="moderate", n=2000, seed=63)
    table = monte_carlo(spec, ["IPW"], 300, estimator_mode="dr", misspec="ps")
    ipw = table.loc["IPW"]
    bias = ipw["mean_estimate"] - ipw["true_value"]
    mc_error = ipw["sd"] / 100 / np.sqrt(ipw["n_reps"] - ipw["n_failed"])
    assert abs(bias) < 3 * mc_error
    assert 0.90 <= ipw["cp"] <= 0.99
