"""
Certified values of the limit conditional P(k | beta) for the c.e.-density
measure, and the decoder that recovers set membership from them.

Certification only looks at a finite prefix of beta. Each member term is
enclosed with the Lipschitz bound of its profile, non-member terms below the
index cutoff are exact, and the remaining index tail is bounded by 2^(2-J).
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Protocol, Tuple

from ..core.config import settings
from ..core.exceptions import OracleExhausted, PrecisionUnreachable
from ..models.dyadic import BitString, cylinder_to_interval
from .ce_density import LIPSCHITZ, CeMeasure, pwl_eval
from .sampler import MarginalSampler

logger = logging.getLogger(__name__)

# a normalized ratio is 1 for non-members; members show 0 or 2 in one of the two slots
DECODER_GAP = (Fraction(3, 4), Fraction(5, 4))


@dataclass(frozen=True)
class CertifiedValue:
    lower: Fraction
    upper: Fraction
    depth: int = 0
    cutoff: int = 0
    source: str = ""

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    def contains(self, value: Fraction) -> bool:
        return self.lower <= value <= self.upper


class PrefixSource(ABC):
    """Where the bits of beta come from"""

    label = "prefix"
    max_depth: Optional[int] = None  # None: unbounded
    tail_bit: Optional[int] = None  # set when beta is eventually constant

    @abstractmethod
    def prefix(self, depth: int) -> BitString:
        """The first depth bits of beta"""


class ExplicitPrefix(PrefixSource):
    """A fixed bit string, optionally continued by a constant tail"""

    def __init__(self, bits: BitString, tail_bit: Optional[int] = 0):
        self.bits = bits
        self.tail_bit = tail_bit
        self.max_depth = None if tail_bit is not None else len(bits)
        tail = f"{tail_bit}^inf" if tail_bit is not None else ""
        self.label = f"explicit:{bits.bits}{tail}"

    def prefix(self, depth: int) -> BitString:
        if depth <= len(self.bits):
            return self.bits.prefix(depth)
        if self.tail_bit is None:
            raise PrecisionUnreachable(f"prefix {self.bits.bits!r} has only {len(self.bits)} bits, {depth} requested")
        return self.bits.extend(str(self.tail_bit) * (depth - len(self.bits)))


class SampledPrefix(PrefixSource):
    """The marginal sampler's stream, extended lazily up to its maximum depth"""

    def __init__(self, sampler: MarginalSampler):
        self.sampler = sampler
        self.max_depth = sampler.max_depth
        self.label = f"sample:seed={sampler.seed}"

    def prefix(self, depth: int) -> BitString:
        if depth > self.max_depth:
            raise PrecisionUnreachable(f"sampler stream ends at depth {self.max_depth}, {depth} requested")
        return self.sampler.prefix(depth)


def term_bounds(mu: CeMeasure, k: int, prefix: BitString) -> Tuple[Fraction, Fraction]:
    """Enclosure of f(k, beta) over every beta extending prefix"""
    profile, t = mu.component(k)
    w = mu.weight(k)
    if profile is None:
        return w, w
    depth = len(prefix)
    if depth <= t:
        return Fraction(0), 2 * w
    cell = cylinder_to_interval(prefix.suffix_from(t))
    value = pwl_eval(profile, cell.lo)
    spread = LIPSCHITZ * cell.length.value
    return w * max(Fraction(0), value - spread), w * min(Fraction(2), value + spread)


def denominator_floor(mu: CeMeasure) -> Fraction:
    """f_M >= f(m, .) = 2^-m for the designated non-member index m"""
    return mu.weight(mu.nonmember_index)


def truncation_index(mu: CeMeasure, k: int, eps: Fraction) -> int:
    """Smallest cutoff J past k and the non-member whose tail bound 2^(2-J) costs less than eps/4"""
    floor = denominator_floor(mu)
    J = max(k, mu.nonmember_index) + 1
    while Fraction(4, 1 << J) / floor >= eps / 4:
        J += 1
    return J


def certify_at_depth(mu: CeMeasure, k: int, prefix: BitString, cutoff: int, source: str = "") -> CertifiedValue:
    """Bounds on P(k | beta) valid for every beta extending prefix, summing indices below cutoff"""
    if cutoff <= k:
        raise ValueError(f"cutoff {cutoff} must exceed the queried index {k}")
    n_lo, n_hi = term_bounds(mu, k, prefix)

    affected = [i for i in mu.affected_indices() if i < cutoff and i != k]
    # exact weights of the uniform indices below the cutoff, k excluded
    uniform = 2 - Fraction(2, 1 << cutoff) - mu.weight(k) - sum((mu.weight(i) for i in affected), Fraction(0))
    r_lo = r_hi = uniform
    for i in affected:
        lo, hi = term_bounds(mu, i, prefix)
        r_lo += lo
        r_hi += hi
    r_hi += Fraction(4, 1 << cutoff)  # sum over i >= cutoff of 2 * 2^-i

    lower = n_lo / (n_lo + r_hi)
    upper = n_hi / (n_hi + r_lo) if n_hi + r_lo > 0 else Fraction(1)
    return CertifiedValue(lower, upper, depth=len(prefix), cutoff=cutoff, source=source)


def _starting_depth(mu: CeMeasure, cutoff: int, eps: Fraction) -> int:
    spread = sum(
        (mu.weight(i) * 2 * LIPSCHITZ * (1 << mu.component(i)[1]) for i in mu.affected_indices() if i < cutoff),
        Fraction(0),
    )
    target = eps * denominator_floor(mu) / 2
    depth = 0
    while spread / (1 << depth) > target:
        depth += 1
    return depth


def ce_conditional(mu: CeMeasure, k: int, source: PrefixSource, eps: Fraction) -> CertifiedValue:
    """
    Certify P(k | beta) to width eps for every beta the source may continue
    into, deepening the prefix as far as needed.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    cutoff = truncation_index(mu, k, eps)
    depth = _starting_depth(mu, cutoff, eps)
    if source.max_depth is not None:
        depth = min(depth, source.max_depth)

    while True:
        value = certify_at_depth(mu, k, source.prefix(depth), cutoff, source=source.label)
        if value.width <= eps:
            logger.debug(f"Certified P({k}|beta) in [{value.lower}, {value.upper}] at depth {depth}, cutoff {cutoff}")
            return value
        if source.max_depth is not None and depth >= source.max_depth:
            raise PrecisionUnreachable(
                f"{source.label} exhausted at depth {depth} with width {value.width} > {eps}"
            )
        if depth >= settings.max_certification_depth:
            raise PrecisionUnreachable(f"depth limit {depth} reached with width {value.width} > {eps}")
        depth += 1


def certification_trace(
    mu: CeMeasure, k: int, source: PrefixSource, depths: Iterable[int], eps: Fraction
) -> List[CertifiedValue]:
    """Certified values at each requested depth with the cutoff eps fixes"""
    cutoff = truncation_index(mu, k, eps)
    return [certify_at_depth(mu, k, source.prefix(d), cutoff, source=source.label) for d in depths]


@dataclass
class ContinuityEvidence:
    index: int
    common_depth: int
    certified: CertifiedValue
    limits: Tuple[Fraction, Fraction]
    width_bound: Fraction

    @property
    def passed(self) -> bool:
        return (
            all(self.certified.contains(v) for v in self.limits)
            and self.certified.width <= self.width_bound
        )


def continuity_evidence(
    mu: CeMeasure, k: int, beta: BitString, beta_prime: BitString, tail_bit: int = 0
) -> ContinuityEvidence:
    """
    Two sequences that agree to depth d have limit conditionals inside one
    interval of width at most 2^(t_max + 4 - d), certified from the shared prefix.
    """
    d = 0
    while d < min(len(beta), len(beta_prime)) and beta.bits[d] == beta_prime.bits[d]:
        d += 1
    shared = beta.prefix(d)
    cutoff = max([k, mu.nonmember_index, *mu.affected_indices()]) + d + 8
    certified = certify_at_depth(mu, k, shared, cutoff, source=f"shared:{shared.bits}")
    limits = (mu.exact_conditional(k, beta, tail_bit), mu.exact_conditional(k, beta_prime, tail_bit))
    bound = Fraction(1 << (mu.instance.max_time + 4), 1 << d) if d else Fraction(1 << (mu.instance.max_time + 4))
    return ContinuityEvidence(k, d, certified, limits, bound)


class ConditionalOracle(Protocol):
    """What the decoder may see: certified conditional values, nothing else"""

    queries: int

    def query(self, k: int, eps: Fraction) -> CertifiedValue:
        ...


class PrefixOracle:
    def __init__(self, mu: CeMeasure, source: PrefixSource):
        self.mu = mu
        self.source = source
        self.queries = 0
        self._cache: Dict[Tuple[int, Fraction], CertifiedValue] = {}

    def query(self, k: int, eps: Fraction) -> CertifiedValue:
        key = (k, eps)
        if key not in self._cache:
            self.queries += 1
            self._cache[key] = ce_conditional(self.mu, k, self.source, eps)
        return self._cache[key]


@dataclass
class RatioEnclosure:
    slot: int
    lower: Fraction
    upper: Fraction

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    @property
    def excludes_one(self) -> bool:
        lo, hi = DECODER_GAP
        return self.upper <= lo or self.lower >= hi


def _ratio(num: CertifiedValue, den: CertifiedValue, k: int, m: int, slot: int) -> Optional[RatioEnclosure]:
    if den.lower <= 0:
        return None
    scale = Fraction(1 << k, 1 << m)
    return RatioEnclosure(slot, num.lower * scale / den.upper, num.upper * scale / den.lower)


def decode_membership(mu: CeMeasure, n: int, oracle: ConditionalOracle, m0: int) -> bool:
    """
    Decide n in A from certified conditionals alone: n is a member iff one of
    P(2n+b|beta) 2^(2n+b) / (P(2m0|beta) 2^(2m0)) is pinned away from 1.
    """
    if not mu.paired:
        raise ValueError("membership decoding needs the paired measure")
    m = 2 * m0
    for round_no in range(settings.decoder_max_rounds):
        extra = 4 * round_no
        den = oracle.query(m, Fraction(1, 1 << (m + 6 + extra)))
        enclosures = []
        for b in (0, 1):
            k = 2 * n + b
            num = oracle.query(k, Fraction(1, 1 << (k + 6 + extra)))
            enclosure = _ratio(num, den, k, m, b)
            if enclosure is not None:
                enclosures.append(enclosure)

        if any(e.excludes_one for e in enclosures):
            logger.debug(f"n={n}: member after round {round_no}")
            return True
        if len(enclosures) == 2 and all(e.width <= Fraction(1, 2) for e in enclosures):
            logger.debug(f"n={n}: non-member after round {round_no}")
            return False

    raise OracleExhausted(f"could not pin the ratios of n={n} within {settings.decoder_max_rounds} rounds")
