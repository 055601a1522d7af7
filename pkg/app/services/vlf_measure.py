import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ..core.exceptions import ZeroMarginal
from ..models.dyadic import (
    BitString,
    DyadicInterval,
    DyadicRational,
    ONE,
    Rect,
    split_interval,
    strip_partition,
    uniform_measure,
)
from .alpha_generator import AlphaSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConditionalReport:
    prefix: BitString
    interval: DyadicInterval
    ratio: Fraction
    predicted_limit: Fraction
    depth_band: int

    @property
    def identity_applies(self) -> bool:
        """The finite-depth ratio equals the prediction exactly for these prefixes"""
        return len(self.prefix) == 0 or self.prefix.ends_in_one()

    @property
    def matches_prediction(self) -> bool:
        return self.ratio == self.predicted_limit


class VlfMeasure:
    """
    Bivariate measure on [0,1) x Cantor space that agrees with the uniform
    measure to the right of alpha_|y| and, inside each strip
    [alpha_n, alpha_n+1), pushes all mass of [w] (|w| = n) onto the line w0^inf.
    """

    def __init__(self, alphas: AlphaSequence):
        self.alphas = alphas

    def p_eval(self, r: Rect) -> Fraction:
        depth = len(r.cyl)
        left, right = split_interval(r.interval, self.alphas.alpha(depth))

        total = Fraction(0)
        if right is not None:
            total += uniform_measure(Rect(right, r.cyl))
        if left is None:
            return total
        # inside band n only w0^inf carries mass, where w is the first n bits,
        # so bands up to the last 1 of cyl contribute nothing
        first_band = r.cyl.bits.rfind("1") + 1
        _, live = split_interval(left, self.alphas.alpha(first_band))
        if live is not None:
            for band, piece in strip_partition(live, self.alphas.prefix(depth)):
                total += piece.length.value / (1 << band)
        return total

    def marginal(self, y: BitString) -> Fraction:
        """P_M([y]) = P([0,1) x [y])"""
        return self.p_eval(Rect(DyadicInterval.unit(), y))

    def predicted_limit(self, i: DyadicInterval, depth: int) -> Fraction:
        """Mass of i under the uniform measure on [alpha_depth, 1)"""
        cut = self.alphas.alpha(depth)
        _, right = split_interval(i, cut)
        if right is None:
            return Fraction(0)
        return right.length.value / (1 - cut.value)

    def conditional_ratio(self, i: DyadicInterval, prefix: BitString) -> ConditionalReport:
        denominator = self.marginal(prefix)
        if denominator == 0:
            raise ZeroMarginal(f"marginal of [{prefix.bits}] is zero")

        report = ConditionalReport(
            prefix=prefix,
            interval=i,
            ratio=self.p_eval(Rect(i, prefix)) / denominator,
            predicted_limit=self.predicted_limit(i, len(prefix)),
            depth_band=len(prefix),
        )
        if report.identity_applies and not report.matches_prediction:
            logger.error(f"Conditional identity broken at [{prefix.bits}], {i}: {report.ratio} != {report.predicted_limit}")
        return report

    def strip(self, n: int) -> DyadicInterval:
        """[alpha_n, alpha_n+1)"""
        return DyadicInterval(self.alphas.alpha(n), self.alphas.alpha(n + 1))

    def atom_line_mass(self, n: int, w: Optional[BitString] = None) -> Fraction:
        """P_M-mass strip n puts on the atom w0^inf, |w| = n"""
        w = BitString.zeros(n) if w is None else w
        if len(w) != n:
            raise ValueError(f"atom lines of strip {n} are indexed by {n}-bit strings, got {w.bits!r}")
        return self.p_eval(Rect(self.strip(n), w.extend("0")))

    def atom_mass_cumulative(self, N: int) -> Fraction:
        """Total atom mass created by strips 0..N; telescopes to alpha_N+1"""
        total = Fraction(0)
        for n in range(N + 1):
            # the 2^n lines of strip n all carry the same mass
            total += self.atom_line_mass(n) * (1 << n)
        return total

    def cover_mass(self, prefix: BitString, n: int) -> Fraction:
        """
        Predicted conditional mass at this prefix of the cover ]0, alpha_n + 2^-n[,
        which shrinks toward the limit point as n grows.
        """
        hi = min(self.alphas.alpha(n) + DyadicRational.pow2(n), ONE)
        cover = DyadicInterval(DyadicRational(0), hi)
        return self.predicted_limit(cover, len(prefix))


def p_eval(m: VlfMeasure, r: Rect) -> Fraction:
    return m.p_eval(r)


def marginal(m: VlfMeasure, y: BitString) -> Fraction:
    return m.marginal(y)


def conditional_ratio(m: VlfMeasure, i: DyadicInterval, prefix: BitString) -> ConditionalReport:
    return m.conditional_ratio(i, prefix)


def atom_mass_cumulative(m: VlfMeasure, N: int) -> Fraction:
    return m.atom_mass_cumulative(N)
