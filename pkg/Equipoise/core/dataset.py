from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import pandas as pd

from Equipoise.core.logger import LOGS
from Equipoise.utils.exceptions import (
    DegenerateTreatment,
    DimensionMismatch,
    MissingColumn,
    NonBinaryTreatment,
    NonFiniteValue,
)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class Dataset:
    """Observed (Z, X, Y) triples with named covariate columns.

    Arrays are read-only, so a Dataset can be handed to parallel workers as is.
    """

    treatment: np.ndarray
    outcome: np.ndarray
    covariates: np.ndarray
    covariate_names: Tuple[str, ...]
    treat_col: str = "Z"
    outcome_col: str = "Y"

    @property
    def n_units(self) -> int:
        return int(self.treatment.shape[0])

    @property
    def treated(self) -> np.ndarray:
        return self.treatment == 1

    @property
    def control(self) -> np.ndarray:
        return self.treatment == 0

    @property
    def n_treated(self) -> int:
        return int(self.treated.sum())

    @property
    def n_control(self) -> int:
        return int(self.control.sum())

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.covariate_names.index(name)
        except ValueError:
            raise MissingColumn(f"Covariate '{name}' is not in the dataset.")
        return self.covariates[:, idx]

    def take(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return build_dataset(
            self.treatment[indices],
            self.outcome[indices],
            self.covariates[indices],
            self.covariate_names,
            self.treat_col,
            self.outcome_col,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.covariates, columns=list(self.covariate_names))
        frame.insert(0, self.outcome_col, self.outcome)
        frame.insert(0, self.treat_col, self.treatment.astype(np.int64))
        return frame


def build_dataset(
    treatment,
    outcome,
    covariates,
    covariate_names: Sequence[str],
    treat_col: str = "Z",
    outcome_col: str = "Y",
) -> Dataset:
    """Checks every Dataset invariant on already numeric arrays."""
    z = np.asarray(treatment, dtype=np.float64).ravel()
    y = np.asarray(outcome, dtype=np.float64).ravel()
    x = np.asarray(covariates, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.size == 0:
        x = x.reshape(z.shape[0], 0)

    if not (z.shape[0] == y.shape[0] == x.shape[0]):
        raise DimensionMismatch(
            f"Row counts differ: treatment {z.shape[0]}, outcome {y.shape[0]}, covariates {x.shape[0]}."
        )
    if len(covariate_names) != x.shape[1]:
        raise MissingColumn(
            f"{x.shape[1]} covariate columns but {len(covariate_names)} names."
        )
    for label, values in ((treat_col, z), (outcome_col, y)):
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteValue(f"Column '{label}' has non-finite values at rows {bad[:10].tolist()}.")
    if x.size and not np.isfinite(x).all():
        rows, cols = np.nonzero(~np.isfinite(x))
        raise NonFiniteValue(
            f"Column '{covariate_names[cols[0]]}' has non-finite values at rows {rows[:10].tolist()}."
        )
    bad = np.flatnonzero((z != 0) & (z != 1))
    if bad.size:
        raise NonBinaryTreatment(
            f"Treatment '{treat_col}' must be coded 0/1; found {z[bad[0]]!r} at row {bad[0]}."
        )
    n_treated = int(z.sum())
    if n_treated == 0 or n_treated == z.shape[0]:
        raise DegenerateTreatment(
            f"Treatment '{treat_col}' has {n_treated} treated of {z.shape[0]} units; both arms are required."
        )

    return Dataset(
        treatment=_frozen(z.astype(np.int8)),
        outcome=_frozen(y),
        covariates=_frozen(x),
        covariate_names=tuple(str(c) for c in covariate_names),
        treat_col=treat_col,
        outcome_col=outcome_col,
    )


def validate_dataset(raw_table: pd.DataFrame, treat_col: str, outcome_col: str) -> Dataset:
    for name in (treat_col, outcome_col):
        if name not in raw_table.columns:
            raise MissingColumn(f"Column '{name}' not found. Available: {list(raw_table.columns)}")

    covariate_names = [c for c in raw_table.columns if c not in (treat_col, outcome_col)]
    numeric = {}
    for name in raw_table.columns:
        try:
            numeric[name] = pd.to_numeric(raw_table[name], errors="raise").to_numpy(dtype=np.float64)
        except (ValueError, TypeError):
            raise NonFiniteValue(f"Column '{name}' has cells that are not real numbers.")

    covariates = (
        np.column_stack([numeric[c] for c in covariate_names])
        if covariate_names
        else np.empty((len(raw_table), 0))
    )
    return build_dataset(
        numeric[treat_col],
        numeric[outcome_col],
        covariates,
        covariate_names,
        treat_col,
        outcome_col,
    )


def read_csv(path, treat_col: str, outcome_col: str) -> Dataset:
    raw = pd.read_csv(
        path,
        dtype={treat_col: str},
        encoding="utf-8",
        keep_default_na=False,
        float_precision="round_trip",
    )
    if treat_col in raw.columns:
        labels = raw[treat_col].str.strip()
        bad = np.flatnonzero(~labels.isin(["0", "1"]).to_numpy())
        if bad.size:
            raise NonBinaryTreatment(
                f"Treatment '{treat_col}' must hold literal 0/1; found {labels.iloc[bad[0]]!r} at row {bad[0]}."
            )
        raw[treat_col] = labels.astype(np.int64)
    ds = validate_dataset(raw, treat_col, outcome_col)
    LOGS.info(
        f"Loaded {ds.n_units} units ({ds.n_treated} treated, {ds.n_control} control) "
        f"with {len(ds.covariate_names)} covariates from {path}"
    )
    return ds


def write_csv(ds: Dataset, path) -> None:
    ds.to_frame().to_csv(path, index=False, float_format="%.17g")
