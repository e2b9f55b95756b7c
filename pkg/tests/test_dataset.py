import numpy as np
import pandas as pd
import pytest

from Equipoise.core.dataset import build_dataset, read_csv, validate_dataset, write_csv
from Equipoise.utils.exceptions import (
    DegenerateTreatment,
    DimensionMismatch,
    MissingColumn,
    NonBinaryTreatment,
    NonFiniteValue,
)


def table(z, y=None, x=None):
    n = len(z)
    return pd.DataFrame(
        {
            "Z": z,
            "Y": y if y is not None else np.arange(n, dtype=float),
            "X1": x if x is not None else np.linspace(0.0, 1.0, n),
        }
    )


def test_four_rows():
    ds = validate_dataset(table([0, 1, 0, 1]), "Z", "Y")
    assert ds.n_units == 4
    assert ds.n_treated == 2 and ds.n_control == 2
    assert ds.covariate_names == ("X1",)


def test_covariates_are_the_remaining_columns():
    raw = table([0, 1, 0, 1])
    raw["X2"] = [5.0, 6.0, 7.0, 8.0]
    ds = validate_dataset(raw, "Z", "Y")
    assert ds.covariate_names == ("X1", "X2")
    np.testing.assert_array_equal(ds.column("X2"), [5.0, 6.0, 7.0, 8.0])


def test_all_treated_is_degenerate():
    with pytest.raises(DegenerateTreatment):
        validate_dataset(table([1, 1, 1]), "Z", "Y")


def test_treatment_coded_two_is_rejected():
    with pytest.raises(NonBinaryTreatment):
        validate_dataset(table([0, 2, 1]), "Z", "Y")


def test_missing_outcome_column():
    with pytest.raises(MissingColumn):
        validate_dataset(table([0, 1]), "Z", "outcome")


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_non_finite_cells(bad):
    with pytest.raises(NonFiniteValue):
        validate_dataset(table([0, 1, 0], y=[1.0, bad, 2.0]), "Z", "Y")


def test_text_cells_are_not_numbers():
    with pytest.raises(NonFiniteValue):
        validate_dataset(table([0, 1, 0], x=["a", "1", "2"]), "Z", "Y")


def test_row_counts_must_agree():
    with pytest.raises(DimensionMismatch):
        build_dataset([0, 1, 0], [1.0, 2.0], [[1.0], [2.0], [3.0]], ["X1"])


def test_arrays_are_read_only(small_ds):
    with pytest.raises(ValueError):
        small_ds.outcome[0] = 10.0


def test_take_resamples_rows(small_ds):
    boot = small_ds.take([1, 1, 0, 2])
    assert boot.n_units == 4
    np.testing.assert_array_equal(boot.treatment, [1, 1, 0, 0])
    np.testing.assert_array_equal(boot.outcome, [3.5, 3.5, 1.0, 2.0])


def test_csv_round_trip_is_bit_exact(tmp_path, make_dataset):
    ds = make_dataset(n=50, seed=2)
    path = tmp_path / "data.csv"
    write_csv(ds, path)
    back = read_csv(path, "Z", "Y")
    assert back.covariate_names == ds.covariate_names
    np.testing.assert_array_equal(back.treatment, ds.treatment)
    np.testing.assert_array_equal(back.outcome, ds.outcome)
    np.testing.assert_array_equal(back.covariates, ds.covariates)


def test_csv_treatment_must_be_literal(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("Z,Y,X1\n0,1.0,0.5\n1.0,2.0,0.1\n1,3.0,0.2\n", encoding="utf-8")
    with pytest.raises(NonBinaryTreatment):
        read_csv(path, "Z", "Y")


def test_csv_empty_cell_is_rejected(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("Z,Y,X1\n0,1.0,\n1,2.0,0.1\n", encoding="utf-8")
    with pytest.raises(NonFiniteValue):
        read_csv(path, "Z", "Y")
