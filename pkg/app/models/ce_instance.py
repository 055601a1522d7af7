from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class CeInstance:
    """
    Finite stand-in for an enumeration of a c.e. set: each member n is
    enumerated at time t_n, and one index is designated as a known
    non-member.
    """

    members: Tuple[Tuple[int, int], ...] = ()
    nonmember: int = 0
    horizon: int = 1
    times: Dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        members = tuple((int(n), int(t)) for n, t in self.members)
        object.__setattr__(self, "members", members)

        indices = [n for n, _ in members]
        if len(set(indices)) != len(indices):
            raise ValueError(f"member indices must be distinct: {indices}")
        if any(n < 0 for n in indices):
            raise ValueError("member indices must be non-negative")
        if self.nonmember < 0:
            raise ValueError("nonmember index must be non-negative")
        if self.nonmember in indices:
            raise ValueError(f"nonmember {self.nonmember} is listed as a member")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        for n, t in members:
            if t < 1:
                raise ValueError(f"enumeration time of {n} must be positive, got {t}")
            if t > self.horizon:
                raise ValueError(f"enumeration time {t} of {n} exceeds horizon {self.horizon}")

        object.__setattr__(self, "times", dict(members))

    def is_member(self, n: int) -> bool:
        return n in self.times

    def time_of(self, n: int) -> Optional[int]:
        return self.times.get(n)

    def enumerated_by(self, stage: int) -> List[int]:
        """Members the enumeration has produced strictly before the given stage"""
        return sorted(n for n, t in self.members if t < stage)

    @property
    def max_time(self) -> int:
        return max((t for _, t in self.members), default=0)

    def enumeration_order(self) -> List[Tuple[int, int]]:
        """Members sorted by enumeration time, ties broken by index"""
        return sorted(self.members, key=lambda m: (m[1], m[0]))


def random_instance(
    rng: np.random.Generator,
    max_members: int = 16,
    max_time: int = 20,
    horizon: int = 24,
) -> CeInstance:
    """Random finite instance; the designated non-member is the smallest free index"""
    count = int(rng.integers(0, max_members + 1))
    count = min(count, horizon)  # leave room for at least one non-member in 0..horizon
    indices = sorted(int(n) for n in rng.choice(horizon + 1, size=count, replace=False))
    members = tuple((n, int(rng.integers(1, max_time + 1))) for n in indices)
    nonmember = next(n for n in range(horizon + 2) if n not in indices)
    return CeInstance(members=members, nonmember=nonmember, horizon=max(horizon, max_time))
