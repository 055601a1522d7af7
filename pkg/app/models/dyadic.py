"""
Exact dyadic arithmetic for Cantor-space measures.

Bit strings name cylinders, cylinders name half-open dyadic intervals of
[0, 1), and a Rect is an interval of the first coordinate crossed with a
cylinder of the second. Every value here is immutable and every operation is
pure.
"""

import re
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, total_ordering
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from ..core.config import settings
from ..core.exceptions import ParseError, PartitionError


@total_ordering
@dataclass(frozen=True)
class DyadicRational:
    """numerator / 2^exponent in lowest form"""

    numerator: int
    exponent: int = 0

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError(f"negative exponent {self.exponent}")
        n, e = self.numerator, self.exponent
        if n == 0:
            e = 0
        elif e > 0:
            shift = min(e, (n & -n).bit_length() - 1)
            n, e = n >> shift, e - shift
        object.__setattr__(self, "numerator", n)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def from_fraction(cls, value: Fraction) -> "DyadicRational":
        value = Fraction(value)
        den = value.denominator
        if den & (den - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        return cls(value.numerator, den.bit_length() - 1)

    @classmethod
    def pow2(cls, k: int) -> "DyadicRational":
        """2^(-k)"""
        return cls(1, k)

    @cached_property
    def value(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def scale(self, k: int) -> "DyadicRational":
        """self * 2^(-k)"""
        return DyadicRational(self.numerator, self.exponent + k)

    def _aligned(self, other: "DyadicRational") -> Tuple[int, int, int]:
        e = max(self.exponent, other.exponent)
        return self.numerator << (e - self.exponent), other.numerator << (e - other.exponent), e

    def __add__(self, other: "DyadicRational") -> "DyadicRational":
        a, b, e = self._aligned(other)
        return DyadicRational(a + b, e)

    def __sub__(self, other: "DyadicRational") -> "DyadicRational":
        a, b, e = self._aligned(other)
        return DyadicRational(a - b, e)

    def __mul__(self, other: "DyadicRational") -> "DyadicRational":
        return DyadicRational(self.numerator * other.numerator, self.exponent + other.exponent)

    def __neg__(self) -> "DyadicRational":
        return DyadicRational(-self.numerator, self.exponent)

    def __lt__(self, other: "DyadicRational") -> bool:
        if not isinstance(other, DyadicRational):
            return NotImplemented
        a, b, _ = self._aligned(other)
        return a < b

    def __str__(self) -> str:
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/2^{self.exponent}"


ZERO = DyadicRational(0)
ONE = DyadicRational(1)


@dataclass(frozen=True)
class BitString:
    """Finite binary word; the cylinder [x] is the set of its infinite extensions"""

    bits: str = ""

    def __post_init__(self):
        if self.bits.strip("01"):
            raise ValueError(f"bit string may only contain 0 and 1: {self.bits!r}")

    @classmethod
    def of(cls, bits: Iterable[int]) -> "BitString":
        return cls("".join("1" if b else "0" for b in bits))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls("0" * n)

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return self.bits

    def __iter__(self):
        return (int(b) for b in self.bits)

    def extend(self, tail: Union[str, int, "BitString"]) -> "BitString":
        return BitString(self.bits + str(tail))

    def prefix(self, n: int) -> "BitString":
        return BitString(self.bits[:n])

    def suffix_from(self, n: int) -> "BitString":
        return BitString(self.bits[n:])

    def contains_one(self) -> bool:
        return "1" in self.bits

    def ends_in_one(self) -> bool:
        return self.bits.endswith("1")

    @property
    def value(self) -> DyadicRational:
        """0.x as a dyadic, i.e. the left end of the cylinder's interval"""
        if not self.bits:
            return ZERO
        return DyadicRational(int(self.bits, 2), len(self.bits))


@dataclass(frozen=True)
class DyadicInterval:
    """Half-open [lo, hi) inside [0, 1]; empty intervals cannot be built"""

    lo: DyadicRational
    hi: DyadicRational

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi})")
        if self.lo < ZERO or ONE < self.hi:
            raise ValueError(f"interval [{self.lo}, {self.hi}) leaves [0, 1]")

    @classmethod
    def unit(cls) -> "DyadicInterval":
        return cls(ZERO, ONE)

    @property
    def length(self) -> DyadicRational:
        return self.hi - self.lo

    def contains(self, point: DyadicRational) -> bool:
        return self.lo <= point < self.hi

    def subset_of(self, other: "DyadicInterval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def intersect(self, other: "DyadicInterval") -> Optional["DyadicInterval"]:
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return DyadicInterval(lo, hi) if lo < hi else None

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi})"


@dataclass(frozen=True)
class Rect:
    """interval × [cyl]"""

    interval: DyadicInterval
    cyl: BitString = BitString()

    def __str__(self) -> str:
        return f"{self.interval} x [{self.cyl.bits}]"


def cylinder_to_interval(x: BitString) -> DyadicInterval:
    """[0.x, 0.x + 2^(-|x|))"""
    lo = x.value
    return DyadicInterval(lo, lo + DyadicRational.pow2(len(x)))


def uniform_measure(r: Rect) -> Fraction:
    return r.interval.length.value / (1 << len(r.cyl))


def split_interval(
    i: DyadicInterval, c: DyadicRational
) -> Tuple[Optional[DyadicInterval], Optional[DyadicInterval]]:
    """Cut i at c into [lo, c) and [c, hi); a side that would be empty is None"""
    left = DyadicInterval(i.lo, min(i.hi, c)) if i.lo < c else None
    right = DyadicInterval(max(i.lo, c), i.hi) if c < i.hi else None
    return left, right


def strip_partition(
    i: DyadicInterval, breaks: Sequence[DyadicRational]
) -> List[Tuple[int, DyadicInterval]]:
    """
    Split i into its maximal pieces inside the bands [break_n, break_n+1),
    with break_0 = 0 implied, tagging each piece with its band index n.
    """
    bounds = [ZERO, *breaks]
    for a, b in zip(bounds, bounds[1:]):
        if not a < b:
            raise ValueError(f"breaks must be strictly increasing inside (0, 1]: {a} >= {b}")
    if ONE < bounds[-1]:
        raise ValueError(f"break {bounds[-1]} exceeds 1")
    if bounds[-1] < i.hi:
        raise PartitionError(f"interval {i} extends past the last break {bounds[-1]}")

    pieces = []
    band = bisect_right(bounds, i.lo) - 1
    while band < len(breaks) and bounds[band] < i.hi:
        piece = i.intersect(DyadicInterval(bounds[band], bounds[band + 1]))
        if piece is not None:
            pieces.append((band, piece))
        band += 1
    return pieces


_DYADIC_PATTERN = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*(?:\^\s*(\d+))?)?\s*$")


def parse_dyadic(text: str, line: Optional[int] = None, column: Optional[int] = None) -> DyadicRational:
    """Parse "p/2^k", "p/q" with q a power of two, or an integer"""
    match = _DYADIC_PATTERN.match(str(text))
    if not match:
        raise ParseError(f"malformed rational {text!r}", line, column)
    numerator = int(match.group(1))
    if match.group(2) is None:
        return DyadicRational(numerator)
    base = int(match.group(2))
    if base == 0:
        raise ParseError(f"zero denominator in {text!r}", line, column)
    if base & (base - 1):
        raise ParseError(f"non-dyadic endpoint {text!r}", line, column)
    # base = 2^b, so base^power = 2^(b * power); the power itself is never built
    power = int(match.group(3)) if match.group(3) is not None else 1
    exponent = (base.bit_length() - 1) * power
    if exponent > settings.max_dyadic_exponent:
        raise ParseError(
            f"exponent 2^{exponent} in {text!r} exceeds the limit 2^{settings.max_dyadic_exponent}", line, column
        )
    return DyadicRational(numerator, exponent)


def parse_bits(text: str, line: Optional[int] = None, column: Optional[int] = None) -> BitString:
    """"-" and "" both mean the empty string"""
    text = text.strip()
    if text in ("", "-"):
        return BitString()
    try:
        return BitString(text)
    except ValueError:
        raise ParseError(f"bit string may only contain 0 and 1: {text!r}", line, column)


def parse_rect(text: str, line: Optional[int] = None) -> Rect:
    """Parse "lo hi cyl"; cyl may be omitted or written as -"""
    tokens = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", text)]
    if len(tokens) not in (2, 3):
        raise ParseError(f"expected 'lo hi cyl', got {len(tokens)} fields", line, tokens[0][0] if tokens else 1)

    (lo_col, lo_text), (hi_col, hi_text) = tokens[0], tokens[1]
    lo = parse_dyadic(lo_text, line, lo_col)
    hi = parse_dyadic(hi_text, line, hi_col)
    cyl = parse_bits(tokens[2][1], line, tokens[2][0]) if len(tokens) == 3 else BitString()
    try:
        interval = DyadicInterval(lo, hi)
    except ValueError as e:
        raise ParseError(str(e), line, lo_col)
    return Rect(interval, cyl)


def format_rect(r: Rect) -> str:
    return f"{r.interval.lo} {r.interval.hi} {r.cyl.bits or '-'}"


def format_decimal(value: Fraction, places: int = 12) -> str:
    """Exact value rounded half-even to a fixed number of decimal places"""
    value = Fraction(value)
    scaled = round(value * 10 ** places)
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(places + 1, "0")
    if places == 0:
        return f"{sign}{digits}"
    return f"{sign}{digits[:-places]}.{digits[-places:]}"
