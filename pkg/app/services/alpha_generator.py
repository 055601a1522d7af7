import logging
import threading
from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Iterator, List, Optional, Sequence, Tuple

from ..core.config import settings
from ..core.exceptions import GeneratorExhausted, MonotonicityViolation
from ..models.ce_instance import CeInstance
from ..models.dyadic import DyadicRational, ONE, ZERO
from ..models.schemas import GeneratorKind, GeneratorSpec

logger = logging.getLogger(__name__)


class AlphaGenerator(ABC):
    """Source of the terms alpha_1, alpha_2, ... in order"""

    kind: GeneratorKind

    @abstractmethod
    def terms(self) -> Iterator[DyadicRational]:
        """Fresh iterator over the terms; two calls must yield identical sequences"""

    def available_terms(self) -> Optional[int]:
        """How many terms exist at all, None when the sequence is unbounded"""
        return None

    def limit_upper(self) -> Optional[Fraction]:
        """Declared upper bound on the limit, None when the generator declares none"""
        return None

    @property
    def identifier(self) -> str:
        return self.kind.value


class ExplicitListGenerator(AlphaGenerator):
    kind = GeneratorKind.EXPLICIT_LIST

    def __init__(self, values: Sequence[DyadicRational]):
        self.values = tuple(values)

    def terms(self) -> Iterator[DyadicRational]:
        return iter(self.values)

    def available_terms(self) -> Optional[int]:
        return len(self.values)

    @property
    def identifier(self) -> str:
        return f"{self.kind.value}[{','.join(str(v) for v in self.values)}]"


class GeometricGenerator(AlphaGenerator):
    """alpha_n = start * (1 + ratio + ... + ratio^(n-1))"""

    kind = GeneratorKind.GEOMETRIC

    def __init__(self, start: DyadicRational, ratio: DyadicRational):
        self.start = start
        self.ratio = ratio

    def terms(self) -> Iterator[DyadicRational]:
        total, step = ZERO, self.start
        while True:
            total = total + step
            yield total
            step = step * self.ratio

    def limit_upper(self) -> Optional[Fraction]:
        return self.start.value / (1 - self.ratio.value)

    @property
    def identifier(self) -> str:
        return f"{self.kind.value}(start={self.start},ratio={self.ratio})"


class SpeckerGenerator(AlphaGenerator):
    """
    Partial sums of the weights 2^-(n+2) of the members of a c.e. instance, in
    enumeration order. Each enumerated member raises the sum by its weight.
    """

    kind = GeneratorKind.SPECKER

    def __init__(self, instance: CeInstance):
        self.instance = instance
        self.weights = [DyadicRational.pow2(n + 2) for n, _ in instance.enumeration_order()]

    def terms(self) -> Iterator[DyadicRational]:
        total = ZERO
        for weight in self.weights:
            total = total + weight
            yield total

    def available_terms(self) -> Optional[int]:
        return len(self.weights)

    def limit_upper(self) -> Optional[Fraction]:
        return sum((w.value for w in self.weights), Fraction(0))

    @property
    def identifier(self) -> str:
        members = ",".join(f"{n}@{t}" for n, t in self.instance.enumeration_order())
        return f"{self.kind.value}[{members}]"


class AlphaSequence:
    """
    Lazily extended, strictly increasing sequence of dyadics in (0, 1).

    alpha(0) is the constant 0 so that the first strip [0, alpha_1) is band 0.
    Extension happens under a lock; every reader sees the same terms whatever
    the interleaving, since the generator is deterministic.
    """

    def __init__(self, generator: AlphaGenerator, validate_terms: Optional[int] = None):
        self.generator = generator
        self.generator_id = generator.identifier
        self._cache: List[DyadicRational] = []
        self._terms = generator.terms()
        self._lock = threading.Lock()

        eager = settings.alpha_validate_terms if validate_terms is None else validate_terms
        available = generator.available_terms()
        if available is not None:
            eager = min(eager, available)
        if eager > 0:
            self._extend_to(eager)

    def _extend_to(self, n: int) -> None:
        with self._lock:
            while len(self._cache) < n:
                index = len(self._cache) + 1
                try:
                    term = next(self._terms)
                except StopIteration:
                    raise GeneratorExhausted(
                        f"{self.generator_id} has no term alpha_{index} (only {len(self._cache)} available)"
                    )
                previous = self._cache[-1] if self._cache else ZERO
                if not (previous < term and term < ONE):
                    raise MonotonicityViolation(
                        f"{self.generator_id}: alpha_{index} = {term} must lie in ({previous}, 1)"
                    )
                self._cache.append(term)
                logger.debug(f"Extended {self.generator_id} with alpha_{index} = {term}")

    def alpha(self, n: int) -> DyadicRational:
        if n < 0:
            raise ValueError(f"alpha index must be non-negative, got {n}")
        if n == 0:
            return ZERO
        if len(self._cache) < n:
            self._extend_to(n)
        return self._cache[n - 1]

    def prefix(self, n: int) -> List[DyadicRational]:
        """alpha_1 .. alpha_n"""
        if n > 0:
            self.alpha(n)
        return list(self._cache[:n])

    def available_terms(self) -> Optional[int]:
        return self.generator.available_terms()

    def limit_bounds(self, n: int) -> Tuple[DyadicRational, Optional[Fraction]]:
        return self.alpha(n), self.generator.limit_upper()

    def __repr__(self) -> str:
        return f"AlphaSequence({self.generator_id}, cached={len(self._cache)})"


def alpha(seq: AlphaSequence, n: int) -> DyadicRational:
    if n < 1:
        raise ValueError(f"alpha_n is defined for n >= 1, got {n}")
    return seq.alpha(n)


def alpha_limit_bounds(seq: AlphaSequence, n: int) -> Tuple[DyadicRational, Optional[Fraction]]:
    """(alpha_n, declared bound on the limit or None when unknown)"""
    if n < 1:
        raise ValueError(f"alpha_n is defined for n >= 1, got {n}")
    return seq.limit_bounds(n)


def build_generator(spec: GeneratorSpec, instance: Optional[CeInstance] = None) -> AlphaGenerator:
    if spec.kind == GeneratorKind.EXPLICIT_LIST:
        return ExplicitListGenerator(spec.values or [])
    if spec.kind == GeneratorKind.GEOMETRIC:
        return GeometricGenerator(spec.start, spec.ratio)
    if spec.members is not None:
        instance = CeInstance(
            members=tuple((m.n, m.t) for m in spec.members),
            nonmember=next(i for i in range(len(spec.members) + 1) if i not in {m.n for m in spec.members}),
            horizon=max([m.t for m in spec.members] or [1]),
        )
    if instance is None:
        raise ValueError("specker generator needs a c.e. instance")
    return SpeckerGenerator(instance)


def build_alpha_sequence(
    spec: GeneratorSpec,
    instance: Optional[CeInstance] = None,
    validate_terms: Optional[int] = None,
) -> AlphaSequence:
    """Build and eagerly validate the sequence a GeneratorSpec describes"""
    sequence = AlphaSequence(build_generator(spec, instance), validate_terms=validate_terms)
    logger.debug(f"Built alpha sequence {sequence.generator_id}")
    return sequence
