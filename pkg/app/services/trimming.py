import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Union

from ..core.exceptions import ParseError
from ..models.dyadic import (
    DyadicInterval,
    DyadicRational,
    Rect,
    format_rect,
    parse_dyadic,
    parse_rect,
    uniform_measure,
)
from ..models.schemas import CheckStatus
from .alpha_generator import AlphaSequence
from .vlf_measure import VlfMeasure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TestLevel:
    """One level V_n of a test relative to the bivariate measure, as a multiset of rects"""

    __test__ = False  # not a pytest class

    index: int
    rects: tuple = ()
    budget: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(self.rects))
        if self.budget is None:
            object.__setattr__(self, "budget", Fraction(1, 1 << self.index))


@dataclass(frozen=True)
class TrimmedLevel:
    """Level U_n for the uniform measure: every rect lies right of alpha_|cyl|"""

    index: int
    rects: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(self.rects))


@dataclass
class RectCheck:
    position: int
    original: Rect
    trimmed: Optional[Rect]
    p_original: Fraction
    mu_trimmed: Fraction
    p_trimmed: Fraction

    @property
    def passed(self) -> bool:
        return self.mu_trimmed == self.p_trimmed and self.p_trimmed <= self.p_original


@dataclass
class ProbeCheck:
    probe: DyadicRational
    position: int
    status: CheckStatus
    in_original: bool
    in_trimmed: bool
    note: str = ""


@dataclass
class VerificationReport:
    index: int
    rect_checks: List[RectCheck] = field(default_factory=list)
    probe_checks: List[ProbeCheck] = field(default_factory=list)
    mu_trimmed_total: Fraction = Fraction(0)
    p_original_total: Fraction = Fraction(0)
    budget: Optional[Fraction] = None
    correspondence_errors: List[str] = field(default_factory=list)

    @property
    def aggregate_ok(self) -> bool:
        return self.mu_trimmed_total <= self.p_original_total

    @property
    def budget_ok(self) -> bool:
        """Informational: the enumerated level respects its intended bound"""
        return self.budget is None or self.p_original_total <= self.budget

    @property
    def flagged_probes(self) -> List[ProbeCheck]:
        return [p for p in self.probe_checks if p.status == CheckStatus.SKIPPED]

    @property
    def passed(self) -> bool:
        return (
            not self.correspondence_errors
            and self.aggregate_ok
            and all(c.passed for c in self.rect_checks)
            and all(p.status != CheckStatus.FAIL for p in self.probe_checks)
        )

    def lines(self) -> List[str]:
        """Human-readable report"""
        out = [f"level {self.index}: {len(self.rect_checks)} rects"]
        for c in self.rect_checks:
            trimmed = str(c.trimmed) if c.trimmed is not None else "dropped"
            verdict = "ok" if c.passed else "FAIL"
            out.append(
                f"  #{c.position} {c.original} -> {trimmed}: "
                f"mu(U)={c.mu_trimmed} P(U)={c.p_trimmed} P(V)={c.p_original} {verdict}"
            )
        for error in self.correspondence_errors:
            out.append(f"  correspondence FAIL: {error}")
        verdict = "ok" if self.aggregate_ok else "FAIL"
        out.append(f"  aggregate: sum mu(U)={self.mu_trimmed_total} <= sum P(V)={self.p_original_total} {verdict}")
        if not self.budget_ok:
            out.append(f"  note: sum P(V) exceeds the level budget {self.budget}")
        failed = [p for p in self.probe_checks if p.status == CheckStatus.FAIL]
        for p in failed:
            out.append(f"  probe {p.probe} rect #{p.position}: slice in V={p.in_original} in U={p.in_trimmed} FAIL")
        checked = sum(1 for p in self.probe_checks if p.status == CheckStatus.PASS)
        out.append(f"  probes: {checked} slice checks passed, {len(failed)} failed, {len(self.flagged_probes)} left of breakpoint")
        out.append("ALL CHECKS PASS" if self.passed else "CHECKS FAILED")
        return out


def trim_rect(alphas: AlphaSequence, r: Rect) -> Optional[Rect]:
    """Keep only the part of r right of alpha_|cyl|; nothing when no such part exists"""
    cut = alphas.alpha(len(r.cyl))
    if not cut < r.interval.hi:
        return None
    return Rect(DyadicInterval(max(r.interval.lo, cut), r.interval.hi), r.cyl)


def trim_level(m: VlfMeasure, v: Union[TestLevel, TrimmedLevel]) -> TrimmedLevel:
    trimmed = [t for t in (trim_rect(m.alphas, r) for r in v.rects) if t is not None]
    return TrimmedLevel(index=v.index, rects=tuple(trimmed))


def verify_conditions(
    m: VlfMeasure,
    v: TestLevel,
    u: TrimmedLevel,
    probes: Sequence[DyadicRational],
) -> VerificationReport:
    """
    Check mu(U) = P(U) <= P(V) rect by rect, the aggregate bound, and that
    vertical slices at probes right of the breakpoint are unchanged.
    """
    report = VerificationReport(index=v.index, budget=v.budget)

    expected = [(pos, r, trim_rect(m.alphas, r)) for pos, r in enumerate(v.rects)]
    kept = [t for _, _, t in expected if t is not None]
    if list(u.rects) != kept:
        report.correspondence_errors.append(
            f"U has {len(u.rects)} rects but trimming V yields {len(kept)} in a different form"
        )

    for pos, original, trimmed in expected:
        p_original = m.p_eval(original)
        mu_trimmed = uniform_measure(trimmed) if trimmed is not None else Fraction(0)
        p_trimmed = m.p_eval(trimmed) if trimmed is not None else Fraction(0)
        report.rect_checks.append(RectCheck(pos, original, trimmed, p_original, mu_trimmed, p_trimmed))
        report.p_original_total += p_original

    # summed over U as given, so a U that is not the trimming of V is still bounded honestly
    report.mu_trimmed_total = sum((uniform_measure(r) for r in u.rects), Fraction(0))

    for probe in probes:
        for pos, original, trimmed in expected:
            cut = m.alphas.alpha(len(original.cyl))
            in_original = original.interval.contains(probe)
            in_trimmed = trimmed is not None and trimmed.interval.contains(probe)
            if probe < cut:
                report.probe_checks.append(ProbeCheck(
                    probe, pos, CheckStatus.SKIPPED, in_original, in_trimmed,
                    note=f"ProbeLeftOfBreakpoint: {probe} < alpha_{len(original.cyl)} = {cut}",
                ))
                continue
            status = CheckStatus.PASS if in_original == in_trimmed else CheckStatus.FAIL
            report.probe_checks.append(ProbeCheck(probe, pos, status, in_original, in_trimmed))

    logger.info(
        f"Verified level {v.index}: {len(v.rects)} rects, {len(probes)} probes, "
        f"{'pass' if report.passed else 'FAIL'}"
    )
    return report


def load_level(source: Union[str, Path], index: int = 0) -> TestLevel:
    """
    Read a level file: one rect per line as "lo hi cyl", "#" comments, and an
    optional header line "level <index> [<budget>]".
    """
    text = source.read_text() if isinstance(source, Path) else source
    rects = []
    budget = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        line = body.strip()
        if not line:
            continue
        if line.startswith("level"):
            parts = line.split()
            if len(parts) not in (2, 3) or not parts[1].isdigit():
                raise ParseError("header must read 'level <index> [<budget>]'", line_no, 1)
            index = int(parts[1])
            if len(parts) == 3:
                budget = parse_dyadic(parts[2], line_no, raw.index(parts[2]) + 1).value
            continue
        # columns are counted on the raw line, indentation included
        rects.append(parse_rect(body, line_no))
    return TestLevel(index=index, rects=tuple(rects), budget=budget)


def dump_level(level: Union[TestLevel, TrimmedLevel]) -> str:
    header = f"level {level.index}"
    budget = getattr(level, "budget", None)
    if budget is not None:
        header += f" {budget}"
    return "\n".join([header, *(format_rect(r) for r in level.rects)]) + "\n"
