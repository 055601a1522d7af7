import logging
from fractions import Fraction
from typing import List, Protocol

import numpy as np

from ..core.config import settings
from ..models.dyadic import BitString

logger = logging.getLogger(__name__)

_UNIFORM_BITS = 62


class HasMarginal(Protocol):
    def marginal(self, cyl: BitString) -> Fraction:
        ...


class MarginalSampler:
    """
    Draws a prefix of beta bit by bit from the marginal of a measure, using
    the exact conditional probability P_M([x0]) / P_M([x]) for every bit.
    One sampler is one seed stream and is not meant to be shared across threads.
    """

    def __init__(self, measure: HasMarginal, seed: int, max_depth: int = None):
        self.measure = measure
        self.seed = seed
        self.max_depth = settings.max_sample_depth if max_depth is None else max_depth
        self._rng = np.random.default_rng(seed)
        self._bits: List[str] = []
        self._mass = measure.marginal(BitString())

    def _draw(self) -> None:
        current = BitString("".join(self._bits))
        zero_mass = self.measure.marginal(current.extend("0"))
        p_zero = zero_mass / self._mass
        u = Fraction(int(self._rng.integers(0, 1 << _UNIFORM_BITS, dtype=np.int64)), 1 << _UNIFORM_BITS)
        if u < p_zero:
            self._bits.append("0")
            self._mass = zero_mass
        else:
            self._bits.append("1")
            self._mass = self._mass - zero_mass

    def prefix(self, depth: int) -> BitString:
        if depth > self.max_depth:
            raise ValueError(f"sample depth {depth} exceeds the configured maximum {self.max_depth}")
        while len(self._bits) < depth:
            self._draw()
        return BitString("".join(self._bits[:depth]))


def sample_marginal(mu: HasMarginal, seed: int, depth: int) -> BitString:
    """Reproducible prefix of length depth drawn from the marginal of mu"""
    if depth < 1:
        raise ValueError(f"depth must be positive, got {depth}")
    prefix = MarginalSampler(mu, seed).prefix(depth)
    logger.debug(f"Sampled seed={seed} depth={depth}: {prefix.bits}")
    return prefix
