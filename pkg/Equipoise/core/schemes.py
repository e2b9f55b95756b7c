import re
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional, Tuple, Union

from config import Config
from Equipoise.utils.exceptions import (
    ExtraneousParam,
    MissingParam,
    ParamOutOfRange,
    UnsupportedScheme,
)


class SchemeKind(str, Enum):
    IPW = "IPW"
    ATT = "ATT"
    ATC = "ATC"
    TRIM = "TRIM"
    TRUNC = "TRUNC"
    OW = "OW"
    MW = "MW"
    EW = "EW"
    BW = "BW"


# parameter each kind requires, if any
_PARAM_OF = {
    SchemeKind.TRIM: "alpha",
    SchemeKind.TRUNC: "alpha",
    SchemeKind.MW: "delta",
    SchemeKind.BW: "nu",
}

_AFFINE = {
    SchemeKind.IPW: (1.0, 0.0),
    SchemeKind.ATT: (0.0, 1.0),
    SchemeKind.ATC: (1.0, -1.0),
}

_ESTIMANDS = {
    SchemeKind.IPW: "ATE",
    SchemeKind.ATT: "ATT",
    SchemeKind.ATC: "ATC",
    SchemeKind.TRIM: "OSATE",
    SchemeKind.TRUNC: "truncated-population WATE",
}

EQUIPOISE = frozenset({SchemeKind.OW, SchemeKind.MW, SchemeKind.EW, SchemeKind.BW})


@dataclass(frozen=True)
class WeightScheme:
    kind: SchemeKind
    alpha: Optional[float] = None
    nu: Optional[float] = None
    delta: Optional[float] = None

    @property
    def label(self) -> str:
        param = _PARAM_OF.get(self.kind)
        if param is None:
            return self.kind.value
        return f"{self.kind.value}({getattr(self, param):g})"

    @property
    def estimand_label(self) -> str:
        return _ESTIMANDS.get(self.kind, "equipoise")

    @property
    def is_equipoise(self) -> bool:
        return self.kind in EQUIPOISE

    @property
    def is_smooth(self) -> bool:
        """Whether g and the weights are differentiable in beta (sandwich available)."""
        return self.kind not in (SchemeKind.TRIM, SchemeKind.TRUNC)

    @property
    def affine_ab(self) -> Optional[Tuple[float, float]]:
        return _AFFINE.get(self.kind)

    def require_smooth(self) -> None:
        if not self.is_smooth:
            raise UnsupportedScheme(
                f"{self.label} has no smooth gradient; use --variance bootstrap instead."
            )

    def __str__(self) -> str:
        return self.label


def validate_scheme(
    kind: Union[str, SchemeKind], params: Optional[Mapping[str, float]] = None
) -> WeightScheme:
    try:
        kind = SchemeKind(str(getattr(kind, "value", kind)).upper())
    except ValueError:
        raise UnsupportedScheme(
            f"Unknown weighting scheme '{kind}'. Choose from {[k.value for k in SchemeKind]}."
        )
    params = dict(params or {})
    required = _PARAM_OF.get(kind)

    extra = [name for name in params if name != required]
    if extra:
        raise ExtraneousParam(f"{kind.value} takes no parameter {extra}.")
    if required is None:
        return WeightScheme(kind)

    if required not in params or params[required] is None:
        if kind is SchemeKind.MW:
            params["delta"] = Config.MW_DELTA
        else:
            raise MissingParam(f"{kind.value} requires parameter '{required}'.")
    value = float(params[required])

    if required in ("alpha", "delta") and not 0 < value < 0.5:
        raise ParamOutOfRange(f"{kind.value}: {required}={value} must lie in (0, 0.5).")
    if required == "nu" and not value >= 2:
        raise ParamOutOfRange(f"{kind.value}: nu={value} must be at least 2.")
    return WeightScheme(kind, **{required: value})


_SCHEME_TEXT = re.compile(r"^\s*([A-Za-z]+)\s*(?:\(\s*([^()]*?)\s*\))?\s*$")


def parse_scheme(text: str) -> WeightScheme:
    """Reads the command-line syntax: ``OW``, ``TRIM(0.1)``, ``BW(11)``, ``MW(0.002)``."""
    match = _SCHEME_TEXT.match(text or "")
    if not match:
        raise UnsupportedScheme(f"Cannot read weighting scheme '{text}'.")
    name, arg = match.group(1).upper(), match.group(2)
    if not arg:
        return validate_scheme(name)
    try:
        value = float(arg)
    except ValueError:
        raise ParamOutOfRange(f"Parameter of '{text}' is not a number.")
    try:
        param = _PARAM_OF[SchemeKind(name)]
    except (KeyError, ValueError):
        if name in SchemeKind.__members__:
            raise ExtraneousParam(f"{name} takes no parameter.")
        raise UnsupportedScheme(f"Unknown weighting scheme '{text}'.")
    return validate_scheme(name, {param: value})
