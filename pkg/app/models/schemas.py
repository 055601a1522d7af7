from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .ce_instance import CeInstance
from .dyadic import DyadicRational, ONE, ZERO, parse_dyadic
from ..core.exceptions import ParseError


def _exact(value: Any) -> DyadicRational:
    """Config values are exact: strings like "3/2^4" or integers; floats are refused"""
    if isinstance(value, DyadicRational):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise ValueError(f"decimal floats are not allowed, write {value!r} as 'p/2^k'")
    if isinstance(value, int):
        return DyadicRational(value)
    try:
        return parse_dyadic(str(value))
    except ParseError as e:
        raise ValueError(e.message)


class GeneratorKind(str, Enum):
    EXPLICIT_LIST = "explicit-list"
    SPECKER = "specker"
    GEOMETRIC = "geometric"


class PrefixMode(str, Enum):
    VLF = "vlf"
    CE = "ce"


class CheckStatus(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


# Config schemas
class MemberSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=0)
    t: int = Field(ge=1)


class GeneratorSpec(BaseModel):
    """[alpha] section"""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    kind: GeneratorKind = GeneratorKind.GEOMETRIC
    values: Optional[List[DyadicRational]] = None
    start: Optional[DyadicRational] = None
    ratio: Optional[DyadicRational] = None
    members: Optional[List[MemberSpec]] = None  # specker only; defaults to the [ce] members

    @field_validator("values", mode="before")
    @classmethod
    def _parse_values(cls, v):
        if v is None:
            return v
        if not isinstance(v, list):
            raise ValueError("values must be a list of dyadic rationals")
        return [_exact(item) for item in v]

    @field_validator("start", "ratio", mode="before")
    @classmethod
    def _parse_scalar(cls, v):
        return None if v is None else _exact(v)

    @model_validator(mode="after")
    def _check_payload(self):
        if self.kind == GeneratorKind.EXPLICIT_LIST:
            if not self.values:
                raise ValueError("explicit-list needs a non-empty 'values' list")
        elif self.kind == GeneratorKind.GEOMETRIC:
            start = self.start if self.start is not None else DyadicRational(1, 2)
            ratio = self.ratio if self.ratio is not None else DyadicRational(1, 1)
            if not (ZERO < start < ONE):
                raise ValueError(f"geometric start {start} must lie in (0, 1)")
            if not (ZERO < ratio < ONE):
                raise ValueError(f"geometric ratio {ratio} must lie in (0, 1)")
            if start.value / (1 - ratio.value) > 1:
                raise ValueError("geometric limit start/(1-ratio) must not exceed 1")
            self.start, self.ratio = start, ratio
        if self.kind != GeneratorKind.EXPLICIT_LIST and self.values is not None:
            raise ValueError(f"'values' is only valid for explicit-list, not {self.kind.value}")
        return self


class CeSection(BaseModel):
    """[ce] section"""

    model_config = ConfigDict(extra="forbid")

    members: List[MemberSpec] = Field(default_factory=lambda: [MemberSpec(n=1, t=2)])
    nonmember: int = Field(default=0, ge=0)
    horizon: int = Field(default=4, ge=1)
    paired: bool = True

    @model_validator(mode="after")
    def _check_instance(self):
        # Builds the domain object so every instance invariant is enforced at load time
        self.to_instance()
        return self

    def to_instance(self) -> CeInstance:
        return CeInstance(
            members=tuple((m.n, m.t) for m in self.members),
            nonmember=self.nonmember,
            horizon=self.horizon,
        )


class ExperimentDefaults(BaseModel):
    """[experiment] section"""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    max_depth: int = Field(default=16, ge=1)
    samples: int = Field(default=10000, ge=1)
    seed: int = 42
    eps: DyadicRational = DyadicRational(1, 24)
    trials: int = Field(default=200, ge=1)
    decode_batch: int = Field(default=100, ge=0)
    batch_prefixes: int = Field(default=10, ge=1)

    @field_validator("eps", mode="before")
    @classmethod
    def _parse_eps(cls, v):
        eps = _exact(v)
        if not (ZERO < eps):
            raise ValueError("eps must be positive")
        return eps


class LabConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: GeneratorSpec = Field(default_factory=GeneratorSpec)
    ce: CeSection = Field(default_factory=CeSection)
    experiment: ExperimentDefaults = Field(default_factory=ExperimentDefaults)


# Output schemas
class ConvergeRow(BaseModel):
    depth: int
    prefix: str
    lower: str
    upper: str
    predicted: str
    lower_decimal: str
    upper_decimal: str
    predicted_decimal: str
    status: str = "ok"


class DecodeRow(BaseModel):
    n: int
    decoded: Optional[bool]
    truth: bool
    queries: int
    status: str = "ok"

    @property
    def matches(self) -> bool:
        return self.decoded is not None and self.decoded == self.truth


class SuiteResult(BaseModel):
    name: str
    status: CheckStatus
    checks: int = 0
    failures: List[str] = []
    error: Optional[str] = None


class SelftestSummary(BaseModel):
    passed: bool
    suites: List[SuiteResult]
    totals: Dict[str, int]


def fraction_text(value: Optional[Fraction]) -> str:
    return "" if value is None else str(Fraction(value))


class DecodeBatchSummary(BaseModel):
    instances: int
    prefixes_per_instance: int
    rows: int
    mismatches: int
    exhausted: int
    failures: List[str] = []

    @property
    def passed(self) -> bool:
        return self.mismatches == 0 and self.exhausted == 0
