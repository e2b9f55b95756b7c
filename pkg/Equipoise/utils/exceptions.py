from typing import Sequence

import numpy as np

CONFIG_ERROR = 2
NUMERICAL_ERROR = 3
DATA_ERROR = 4


class EquipoiseException(Exception):
    exit_code = NUMERICAL_ERROR

    def __init__(self, error: str) -> None:
        super().__init__(error)

    @property
    def kind(self) -> str:
        return type(self).__name__


# data errors
class MissingColumn(EquipoiseException):
    exit_code = DATA_ERROR


class NonBinaryTreatment(EquipoiseException):
    exit_code = DATA_ERROR


class NonFiniteValue(EquipoiseException):
    exit_code = DATA_ERROR


class DegenerateTreatment(EquipoiseException):
    exit_code = DATA_ERROR


class UnknownColumn(EquipoiseException):
    exit_code = DATA_ERROR


class ArmTooSmall(EquipoiseException):
    exit_code = DATA_ERROR


class ZeroVariance(EquipoiseException):
    exit_code = DATA_ERROR


class DimensionMismatch(EquipoiseException):
    exit_code = DATA_ERROR


# numerical failures
class NonConvergence(EquipoiseException):
    def __init__(
        self, error: str, last_iterate: np.ndarray = None, score_norm: float = None
    ) -> None:
        super().__init__(error)
        self.last_iterate = last_iterate
        self.score_norm = score_norm


class SingularDesign(EquipoiseException):
    pass


class SingularBread(EquipoiseException):
    pass


class InfiniteWeight(EquipoiseException):
    def __init__(self, error: str, rows: Sequence[int] = ()) -> None:
        super().__init__(error)
        self.rows = list(rows)


class EmptyEffectiveArm(EquipoiseException):
    pass


class AllZeroSelection(EquipoiseException):
    pass


class TooManyFailedResamples(EquipoiseException):
    def __init__(self, error: str, failed: int = 0, total: int = 0) -> None:
        super().__init__(error)
        self.failed = failed
        self.total = total


class AllReplicatesFailed(EquipoiseException):
    def __init__(self, error: str, failed: int = 0) -> None:
        super().__init__(error)
        self.failed = failed


# configuration errors
class ConfigError(EquipoiseException):
    exit_code = CONFIG_ERROR


class ParamOutOfRange(EquipoiseException):
    exit_code = CONFIG_ERROR


class MissingParam(EquipoiseException):
    exit_code = CONFIG_ERROR


class ExtraneousParam(EquipoiseException):
    exit_code = CONFIG_ERROR


class UnsupportedScheme(EquipoiseException):
    exit_code = CONFIG_ERROR


class SchemeNotAffine(EquipoiseException):
    exit_code = CONFIG_ERROR


# failures a resample or replicate may hit without invalidating the whole run
REPLICATE_FAILURES = (
    NonConvergence,
    SingularDesign,
    InfiniteWeight,
    EmptyEffectiveArm,
    DegenerateTreatment,
    ArmTooSmall,
    SingularBread,
)
