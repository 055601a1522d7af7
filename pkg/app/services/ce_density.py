"""
Measures on N x Cantor space whose conditionals encode a c.e. set.

Index k carries the density 2^-k * g(beta), where g is 1 unless k belongs to
an enumerated member n, in which case g is one of the piecewise-linear
profiles f0/f1 repeated with period 2^-t_n. Below depth t_n a member is
indistinguishable from a non-member, so the measure stays computable, while
the conditional at the limit sees the profile.
"""

import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import List, Optional, Tuple, Union

from ..models.ce_instance import CeInstance
from ..models.dyadic import BitString, DyadicRational, cylinder_to_interval

logger = logging.getLogger(__name__)

Number = Union[DyadicRational, Fraction, int]

LIPSCHITZ = 8  # steepest slope of f0 and f1


def _q(x: Number) -> Fraction:
    return x.value if isinstance(x, DyadicRational) else Fraction(x)


@dataclass(frozen=True)
class PwlDensity:
    """Continuous piecewise-linear function on [0, 1] given by its breakpoints"""

    name: str
    breakpoints: Tuple[Tuple[DyadicRational, Fraction], ...]
    positions: Tuple[Fraction, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = tuple((p, Fraction(v)) for p, v in self.breakpoints)
        object.__setattr__(self, "breakpoints", points)
        positions = tuple(p.value for p, _ in points)
        if positions[0] != 0 or positions[-1] != 1:
            raise ValueError(f"{self.name}: breakpoints must run from 0 to 1")
        if any(a >= b for a, b in zip(positions, positions[1:])):
            raise ValueError(f"{self.name}: breakpoint positions must be strictly increasing")
        if any(v < 0 for _, v in points):
            raise ValueError(f"{self.name}: densities are non-negative")
        object.__setattr__(self, "positions", positions)

    def segments(self):
        for (x0, v0), (x1, v1) in zip(self.breakpoints, self.breakpoints[1:]):
            yield x0.value, v0, x1.value, v1


F0 = PwlDensity("f0", (
    (DyadicRational(0), 2),
    (DyadicRational(1, 2), 0),
    (DyadicRational(1, 1), 0),
    (DyadicRational(3, 2), 2),
    (DyadicRational(1), 2),
))

# f1(r) = f0((r - 1/4) mod 1); continuous across the seam since f0(0) = f0(1)
F1 = PwlDensity("f1", (
    (DyadicRational(0), 2),
    (DyadicRational(1, 2), 2),
    (DyadicRational(1, 1), 0),
    (DyadicRational(3, 2), 0),
    (DyadicRational(1), 2),
))

PROFILES = (F0, F1)


def pwl_eval(f: PwlDensity, r: Number) -> Fraction:
    r = _q(r)
    if not 0 <= r <= 1:
        raise ValueError(f"{f.name} is defined on [0, 1], got {r}")
    i = min(bisect_right(f.positions, r), len(f.positions) - 1)
    (x0, v0), (x1, v1) = f.breakpoints[i - 1], f.breakpoints[i]
    x0, x1 = x0.value, x1.value
    return v0 + (v1 - v0) * (r - x0) / (x1 - x0)


def pwl_integral(f: PwlDensity, lo: Number, hi: Number) -> Fraction:
    """Exact integral of f over [lo, hi) from the antiderivative of each segment"""
    lo, hi = _q(lo), _q(hi)
    if not 0 <= lo < hi <= 1:
        raise ValueError(f"integration bounds must satisfy 0 <= lo < hi <= 1, got [{lo}, {hi})")
    total = Fraction(0)
    for x0, v0, x1, v1 in f.segments():
        a, b = max(lo, x0), min(hi, x1)
        if a >= b:
            continue
        slope = (v1 - v0) / (x1 - x0)
        total += v0 * (b - a) + slope * ((b - x0) ** 2 - (a - x0) ** 2) / 2
    return total


def pwl_trapezoid(f: PwlDensity, lo: Fraction, hi: Fraction) -> Fraction:
    """Same integral, by trapezoids between consecutive breakpoints inside [lo, hi)"""
    cuts = [lo, *(x for x in f.positions if lo < x < hi), hi]
    return sum(((b - a) * (pwl_eval(f, a) + pwl_eval(f, b)) / 2 for a, b in zip(cuts, cuts[1:])), Fraction(0))


def density_integral(f: PwlDensity, t: int, cyl: BitString) -> Fraction:
    """Integral over [cyl] of beta -> f(beta_t+1 beta_t+2 ...), i.e. f repeated with period 2^-t"""
    if len(cyl) <= t:
        # whole periods, each of mean 1
        return Fraction(1, 1 << len(cyl))
    inner = cylinder_to_interval(cyl.suffix_from(t))
    return pwl_integral(f, inner.lo, inner.hi) / (1 << t)


def tail_point(prefix: BitString, t: int, tail_bit: int = 0) -> Fraction:
    """The real 0.beta_t+1 beta_t+2 ... for beta = prefix followed by tail_bit forever"""
    rest = prefix.bits[t:]
    if tail_bit not in (0, 1):
        raise ValueError(f"tail bit must be 0 or 1, got {tail_bit}")
    left = Fraction(int(rest, 2) if rest else 0, 1 << len(rest))
    return left + Fraction(tail_bit, 1 << len(rest))


@dataclass(frozen=True)
class CeMeasure:
    """
    paired=False: index n carries 2^-n * f0(tail after t_n) when n is a member.
    paired=True: index 2n+b carries 2^-(2n+b) * f_b(tail after t_n) when n is a member.

    Raw index weights sum to 2; the normalization factor 1/2 turns raw values
    into probabilities. ce_rect reports raw values, mass() probabilities.
    """

    instance: CeInstance
    paired: bool = True
    audit: bool = False
    normalization: Fraction = Fraction(1, 2)

    def component(self, k: int, revealed_before: Optional[int] = None) -> Tuple[Optional[PwlDensity], Optional[int]]:
        """
        Profile and period exponent of index k, or (None, None) when uniform.
        With revealed_before set, only members enumerated before that stage are visible.
        """
        n, b = divmod(k, 2) if self.paired else (k, 0)
        t = self.instance.time_of(n)
        if t is None:
            return None, None
        if revealed_before is not None and n not in self.instance.enumerated_by(revealed_before):
            return None, None
        return PROFILES[b], t

    @staticmethod
    def weight(k: int) -> Fraction:
        return Fraction(1, 1 << k)

    @property
    def nonmember_index(self) -> int:
        m = self.instance.nonmember
        return 2 * m if self.paired else m

    def affected_indices(self) -> List[int]:
        if self.paired:
            return sorted(k for n in self.instance.times for k in (2 * n, 2 * n + 1))
        return sorted(self.instance.times)

    def ce_rect(self, k: int, cyl: BitString) -> Fraction:
        """Raw P({k} x [cyl])"""
        revealed = len(cyl) if self.audit else None
        profile, t = self.component(k, revealed_before=revealed)
        if profile is None:
            return self.weight(k) / (1 << len(cyl))
        return self.weight(k) * density_integral(profile, t, cyl)

    def mass(self, k: int, cyl: BitString) -> Fraction:
        """Normalized P({k} x [cyl])"""
        return self.normalization * self.ce_rect(k, cyl)

    def raw_marginal(self, cyl: BitString) -> Fraction:
        """
        Sum over all k of ce_rect(k, cyl). Indices outside the finite instance
        are uniform, so their infinite tail has a closed form.
        """
        affected = self.affected_indices()
        uniform_weight = 2 - sum((self.weight(k) for k in affected), Fraction(0))
        total = uniform_weight / (1 << len(cyl))
        for k in affected:
            total += self.ce_rect(k, cyl)
        return total

    def marginal(self, cyl: BitString) -> Fraction:
        """P_M([cyl]) as a probability"""
        return self.normalization * self.raw_marginal(cyl)

    def density_at(self, k: int, prefix: BitString, tail_bit: int = 0) -> Fraction:
        """f(k, beta) for beta = prefix followed by tail_bit forever"""
        profile, t = self.component(k)
        if profile is None:
            return self.weight(k)
        return self.weight(k) * pwl_eval(profile, tail_point(prefix, t, tail_bit))

    def total_density(self, prefix: BitString, tail_bit: int = 0) -> Fraction:
        affected = self.affected_indices()
        total = 2 - sum((self.weight(k) for k in affected), Fraction(0))
        for k in affected:
            total += self.density_at(k, prefix, tail_bit)
        return total

    def exact_conditional(self, k: int, prefix: BitString, tail_bit: int = 0) -> Fraction:
        """Limit conditional P(k | beta) for the eventually constant beta = prefix tail_bit^inf"""
        return self.density_at(k, prefix, tail_bit) / self.total_density(prefix, tail_bit)

    def lipschitz_constant(self, k: int) -> Fraction:
        """Lipschitz constant of beta -> f(k, beta) on the reals"""
        profile, t = self.component(k)
        if profile is None:
            return Fraction(0)
        return self.weight(k) * LIPSCHITZ * (1 << t)

    def _trapezoid_cell(self, k: int, cyl: BitString) -> Fraction:
        profile, t = self.component(k)
        if profile is None:
            return self.weight(k) / (1 << len(cyl))
        if len(cyl) <= t:
            periods = 1 << (t - len(cyl))
            return self.weight(k) * periods * pwl_trapezoid(profile, Fraction(0), Fraction(1)) / (1 << t)
        inner = cylinder_to_interval(cyl.suffix_from(t))
        return self.weight(k) * pwl_trapezoid(profile, inner.lo.value, inner.hi.value) / (1 << t)

    def consistency_check(self, k: int, y: BitString, max_extra_depth: int = 4) -> bool:
        """
        P({k} x [y]) must equal the sum over every refinement of [y] down to
        depth |y| + d, the cells being integrated by an independent trapezoid path.
        """
        target = self.ce_rect(k, y)
        for d in range(1, max_extra_depth + 1):
            cells = (y.extend("".join(bits)) for bits in product("01", repeat=d))
            total = sum((self._trapezoid_cell(k, cell) for cell in cells), Fraction(0))
            if total != target:
                logger.error(f"Consistency broken for k={k}, y={y.bits!r} at extra depth {d}: {total} != {target}")
                return False
        return True

    def differentiation_gap(self, j: int, prefix: BitString) -> Tuple[Fraction, Fraction]:
        """
        |cylinder ratio - pointwise conditional at the left end of [prefix]|
        together with the bound 8 * 2^t_max * 2^-|prefix|.
        """
        cylinder_ratio = self.ce_rect(j, prefix) / self.raw_marginal(prefix)
        pointwise = self.exact_conditional(j, prefix, tail_bit=0)
        bound = Fraction(LIPSCHITZ * (1 << self.instance.max_time), 1 << len(prefix))
        return abs(cylinder_ratio - pointwise), bound


def ce_rect(mu: CeMeasure, k: int, cyl: BitString) -> Fraction:
    return mu.ce_rect(k, cyl)


def consistency_check(mu: CeMeasure, k: int, y: BitString) -> bool:
    return mu.consistency_check(k, y)
