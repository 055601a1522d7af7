import logging
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from ..core.config import settings
from ..core.exceptions import LabError, PrecisionUnreachable
from ..models.ce_instance import CeInstance
from ..models.dyadic import (
    BitString,
    DyadicInterval,
    DyadicRational,
    ONE,
    Rect,
    ZERO,
    cylinder_to_interval,
    format_decimal,
    parse_dyadic,
    split_interval,
    strip_partition,
    uniform_measure,
)
from ..models.schemas import CheckStatus, LabConfig, SelftestSummary, SuiteResult
from .alpha_generator import AlphaSequence, build_alpha_sequence
from .ce_density import F0, F1, LIPSCHITZ, CeMeasure, density_integral, pwl_eval, pwl_integral
from .certification import (
    ExplicitPrefix,
    PrefixOracle,
    ce_conditional,
    certification_trace,
    continuity_evidence,
    decode_membership,
)
from .lab_runner import LabRunner
from .sampler import MarginalSampler
from .trimming import TestLevel, trim_level, trim_rect, verify_conditions
from .vlf_measure import VlfMeasure

logger = logging.getLogger(__name__)

MAX_REPORTED_FAILURES = 20

DIFFERENTIATION_SAMPLES = 100
DIFFERENTIATION_DEPTH = 16
TRACE_EPS = Fraction(1, 1 << 21)
TRACE_WIDTH = Fraction(1, 1 << 20)


def random_dyadic(rng: np.random.Generator, max_exp: int = 20) -> DyadicRational:
    """Uniform dyadic in [0, 1] on a random grid 2^-e"""
    e = int(rng.integers(0, max_exp + 1))
    return DyadicRational(int(rng.integers(0, (1 << e) + 1)), e)


def random_interval(rng: np.random.Generator, max_exp: int = 20) -> DyadicInterval:
    e = int(rng.integers(1, max_exp + 1))
    a = b = 0
    while a == b:
        a, b = (int(v) for v in rng.integers(0, (1 << e) + 1, size=2))
    return DyadicInterval(DyadicRational(min(a, b), e), DyadicRational(max(a, b), e))


def random_bits(rng: np.random.Generator, max_len: int, min_len: int = 0) -> BitString:
    n = int(rng.integers(min_len, max_len + 1))
    return BitString.of(int(b) for b in rng.integers(0, 2, size=n))


def random_rect(rng: np.random.Generator, max_len: int, max_exp: int = 20) -> Rect:
    return Rect(random_interval(rng, max_exp), random_bits(rng, max_len))


class SuiteRecorder:
    """Counts checks and keeps the first failures of one suite"""

    def __init__(self, name: str):
        self.name = name
        self.checks = 0
        self.failures: List[str] = []

    def check(self, condition: bool, message: str) -> bool:
        self.checks += 1
        if not condition:
            if len(self.failures) < MAX_REPORTED_FAILURES:
                self.failures.append(message)
            logger.debug(f"[{self.name}] check failed: {message}")
        return condition

    def result(self) -> SuiteResult:
        status = CheckStatus.PASS if not self.failures else CheckStatus.FAIL
        return SuiteResult(name=self.name, status=status, checks=self.checks, failures=self.failures)


class SelftestService:
    """Randomized property checks of every module, seeded from the lab config"""

    def __init__(self, config: LabConfig):
        self.config = config
        self.instance: CeInstance = config.ce.to_instance()
        self.trials = config.experiment.trials
        self.seed = config.experiment.seed

    def _rng(self, offset: int) -> np.random.Generator:
        # one independent stream per suite so the result does not depend on scheduling
        return np.random.default_rng([self.seed, offset])

    def _alphas(self) -> AlphaSequence:
        return build_alpha_sequence(self.config.alpha, self.instance)

    @staticmethod
    def _depth_cap(alphas: AlphaSequence, cap: int) -> int:
        """Deepest cylinder whose children still have a breakpoint"""
        available = alphas.available_terms()
        return cap if available is None else max(0, min(cap, available - 1))

    def check_dyadic_core(self) -> SuiteResult:
        rec = SuiteRecorder("dyadic-core")
        rng = self._rng(1)
        for _ in range(self.trials):
            a, b = random_dyadic(rng), random_dyadic(rng)
            rec.check((a + b) - b == a, f"({a} + {b}) - {b} != {a}")
            rec.check((a * b).value == a.value * b.value, f"{a} * {b} is inexact")
            shift = int(rng.integers(0, 8))
            rec.check(
                DyadicRational(a.numerator << shift, a.exponent + shift) == a,
                f"{a} is not canonical under a shift of {shift}",
            )
            rec.check(parse_dyadic(str(a)) == a, f"{a} does not parse back from its text")

            x = random_bits(rng, 16)
            cell = cylinder_to_interval(x)
            left, right = cylinder_to_interval(x.extend("0")), cylinder_to_interval(x.extend("1"))
            rec.check(cell.length == DyadicRational.pow2(len(x)), f"[{x.bits}] has length {cell.length}")
            rec.check(
                left.lo == cell.lo and left.hi == right.lo and right.hi == cell.hi,
                f"children of [{x.bits}] do not tile it",
            )

            i = random_interval(rng)
            c = random_dyadic(rng)
            pieces = [p for p in split_interval(i, c) if p is not None]
            rec.check(sum((p.length.value for p in pieces), Fraction(0)) == i.length.value, f"split of {i} at {c} loses length")

        breaks = [DyadicRational(1, 2), DyadicRational(3, 3), DyadicRational(7, 4), ONE]
        for _ in range(self.trials):
            i = random_interval(rng)
            pieces = strip_partition(i, breaks)
            rec.check(
                sum((p.length.value for _, p in pieces), Fraction(0)) == i.length.value,
                f"strip partition of {i} loses length",
            )
        rec.check(format_decimal(Fraction(1, 3)) == "0.333333333333", "decimal rendering of 1/3")
        return rec.result()

    def check_alpha_gen(self) -> SuiteResult:
        rec = SuiteRecorder("alpha-gen")
        alphas = self._alphas()
        available = alphas.available_terms()
        count = 32 if available is None else min(32, available)
        terms = alphas.prefix(count)
        bounds = [ZERO, *terms]
        for n, (a, b) in enumerate(zip(bounds, bounds[1:]), start=1):
            rec.check(a < b and b < ONE, f"alpha_{n} = {b} is not in ({a}, 1)")

        again = self._alphas().prefix(count)
        rec.check(again == terms, "rebuilding the generator changed its terms")

        if not rec.check(count > 0, "generator produces no terms"):
            return rec.result()
        _, upper = alphas.limit_bounds(count)
        rec.check(upper is None or terms[-1].value <= upper, f"alpha_{count} exceeds the declared limit bound {upper}")
        return rec.result()

    def check_vlf_measure(self) -> SuiteResult:
        rec = SuiteRecorder("vlf-measure")
        rng = self._rng(3)
        alphas = self._alphas()
        m = VlfMeasure(alphas)
        cap = self._depth_cap(alphas, 10)

        rec.check(m.marginal(BitString()) == 1, "total mass is not 1")
        for _ in range(self.trials):
            r = random_rect(rng, cap)
            p = m.p_eval(r)
            rec.check(p >= 0, f"P({r}) < 0")
            split = (r.interval.lo + r.interval.hi).scale(1)
            lo_part = m.p_eval(Rect(DyadicInterval(r.interval.lo, split), r.cyl))
            hi_part = m.p_eval(Rect(DyadicInterval(split, r.interval.hi), r.cyl))
            rec.check(lo_part + hi_part == p, f"interval additivity fails for {r}")
            children = m.p_eval(Rect(r.interval, r.cyl.extend("0"))) + m.p_eval(Rect(r.interval, r.cyl.extend("1")))
            rec.check(children == p, f"cylinder additivity fails for {r}")
            if not r.interval.lo < alphas.alpha(len(r.cyl)):
                rec.check(p == uniform_measure(r), f"{r} lies right of the breakpoint but is not uniform")

        for _ in range(self.trials):
            prefix = random_bits(rng, max(cap, 1), min_len=1)
            if not prefix.ends_in_one():
                prefix = prefix.prefix(len(prefix) - 1).extend("1")
            report = m.conditional_ratio(random_interval(rng), prefix)
            rec.check(report.matches_prediction, f"conditional at [{prefix.bits}] is {report.ratio}, not {report.predicted_limit}")

        for N in range(self._depth_cap(alphas, 16) + 1):
            rec.check(m.atom_mass_cumulative(N) == alphas.alpha(N + 1).value, f"atom masses of strips 0..{N} do not telescope")
        return rec.result()

    def check_test_trimmer(self) -> SuiteResult:
        rec = SuiteRecorder("test-trimmer")
        rng = self._rng(4)
        alphas = self._alphas()
        m = VlfMeasure(alphas)
        cap = self._depth_cap(alphas, 10)
        available = alphas.available_terms()
        probes = alphas.prefix(16 if available is None else min(16, available))

        for trial in range(max(1, self.trials // 10)):
            index = int(rng.integers(0, 6))
            level = TestLevel(index=index, rects=tuple(random_rect(rng, cap) for _ in range(8)))
            trimmed = trim_level(m, level)
            report = verify_conditions(m, level, trimmed, probes)
            rec.check(report.passed, f"level {trial}: {report.lines()[-1]}")
            rec.check(trim_level(m, trimmed) == trimmed, f"level {trial}: trimming is not idempotent")
            for r in level.rects:
                t = trim_rect(alphas, r)
                if t is not None:
                    rec.check(uniform_measure(t) == m.p_eval(t), f"trimmed {r} is not measured uniformly")
                    if not r.interval.lo < alphas.alpha(len(r.cyl)):
                        rec.check(t == r, f"{r} lies right of the breakpoint but was altered")
        return rec.result()

    def check_ce_density(self) -> SuiteResult:
        rec = SuiteRecorder("ce-density")
        rng = self._rng(5)
        mu = self._ce_measure()

        for t in range(1, 21):
            x = random_bits(rng, t, min_len=t)
            for f in (F0, F1):
                rec.check(pwl_integral(f, 0, 1) == 1, f"{f.name} does not have mean 1")
                quarters = sum((density_integral(f, t, x.extend(c)) for c in ("00", "01", "10", "11")), Fraction(0))
                rec.check(quarters == Fraction(1, 1 << t), f"{f.name} over the period [{x.bits}] integrates to {quarters}")

        points = [p for f in (F0, F1) for p, _ in f.breakpoints]
        points += [random_dyadic(rng) for _ in range(self.trials)]
        for r in points:
            rec.check(
                pwl_eval(F0, r) in (0, 2) or pwl_eval(F1, r) in (0, 2),
                f"neither f0 nor f1 is 0 or 2 at {r}",
            )
            s = random_dyadic(rng)
            for f in (F0, F1):
                rec.check(
                    abs(pwl_eval(f, r) - pwl_eval(f, s)) <= LIPSCHITZ * abs(r.value - s.value),
                    f"{f.name} is steeper than {LIPSCHITZ} between {r} and {s}",
                )

        indices = self._ce_indices(mu)
        for _ in range(max(1, self.trials // 10)):
            k = indices[int(rng.integers(0, len(indices)))]
            y = random_bits(rng, mu.instance.max_time + 3)
            rec.check(
                mu.ce_rect(k, y.extend("0")) + mu.ce_rect(k, y.extend("1")) == mu.ce_rect(k, y),
                f"ce_rect({k}, [{y.bits}]) is not additive",
            )
            rec.check(mu.consistency_check(k, y, max_extra_depth=3), f"trapezoid refinement disagrees at k={k}, [{y.bits}]")

            audited = CeMeasure(mu.instance, paired=mu.paired, audit=True)
            rec.check(audited.ce_rect(k, y) == mu.ce_rect(k, y), f"stage-{len(y)} view of k={k}, [{y.bits}] differs")
        return rec.result()

    def _ce_measure(self) -> CeMeasure:
        return CeMeasure(self.instance, paired=self.config.ce.paired)

    def _ce_indices(self, mu: CeMeasure) -> List[int]:
        return sorted({*mu.affected_indices(), mu.nonmember_index, 0, 1})

    def check_continuity(self) -> SuiteResult:
        """Sequences agreeing on a long prefix have close limit conditionals"""
        rec = SuiteRecorder("continuity")
        rng = self._rng(6)
        mu = self._ce_measure()
        indices = self._ce_indices(mu)
        t_max = mu.instance.max_time
        # the width bound assumes index 0 is uniform; otherwise only containment is checked
        bounded = not mu.instance.is_member(0)

        for _ in range(max(1, self.trials // 4)):
            d = t_max + 3 + int(rng.integers(0, 6))
            shared = random_bits(rng, d, min_len=d)
            beta = shared.extend("0").extend(random_bits(rng, 4))
            beta_prime = shared.extend("1").extend(random_bits(rng, 4))
            k = indices[int(rng.integers(0, len(indices)))]
            evidence = continuity_evidence(mu, k, beta, beta_prime)
            rec.check(evidence.common_depth == d, f"[{beta.bits}] and [{beta_prime.bits}] agree to {d}, not {evidence.common_depth}")
            rec.check(
                all(evidence.certified.contains(v) for v in evidence.limits),
                f"P({k}|.) limits {evidence.limits} escape the enclosure from [{shared.bits}]",
            )
            if bounded:
                rec.check(evidence.passed, f"P({k}|.) enclosure from [{shared.bits}] is wider than {evidence.width_bound}")
        return rec.result()

    def check_differentiation(self) -> SuiteResult:
        """Cylinder ratios along sampled beta approach the pointwise conditionals"""
        rec = SuiteRecorder("differentiation")
        rng = self._rng(7)
        mu = self._ce_measure()
        indices = self._ce_indices(mu)

        affected = mu.affected_indices()
        spread = sum((mu.weight(k) for k in affected), Fraction(0))
        heaviest = max((mu.weight(k) for k in affected), default=Fraction(0))
        # the plain bound holds while the affected weights stay light; heavier instances widen it
        slack = max(Fraction(1), (heaviest + spread) / (2 * (2 - spread)))

        for _ in range(DIFFERENTIATION_SAMPLES):
            beta = MarginalSampler(mu, int(rng.integers(0, 2 ** 31))).prefix(DIFFERENTIATION_DEPTH)
            for j in indices:
                gap, bound = mu.differentiation_gap(j, beta)
                rec.check(gap <= bound * slack, f"P({j}|[{beta.bits}]) is {gap} from the pointwise value, bound {bound * slack}")
        return rec.result()

    def check_sampler(self) -> SuiteResult:
        rec = SuiteRecorder("sampler")
        rng = self._rng(8)
        mu = self._ce_measure()
        n = self.config.experiment.samples

        for _ in range(8):
            seed = int(rng.integers(0, 2 ** 31))
            first = MarginalSampler(mu, seed).prefix(8)
            rec.check(MarginalSampler(mu, seed).prefix(8) == first, f"seed {seed} drew two different prefixes")
            rec.check(MarginalSampler(mu, seed).prefix(4) == first.prefix(4), f"seed {seed} is not prefix-stable")

        counts: Dict[str, int] = {}
        for _ in range(n):
            bits = MarginalSampler(mu, int(rng.integers(0, 2 ** 31))).prefix(3).bits
            for d in range(1, 4):
                counts[bits[:d]] = counts.get(bits[:d], 0) + 1
        for d in range(1, 4):
            for x in (format(v, f"0{d}b") for v in range(1 << d)):
                p = float(mu.marginal(BitString(x)))
                sigma = np.sqrt(n * p * (1 - p))
                seen = counts.get(x, 0)
                rec.check(abs(seen - n * p) <= 4 * sigma + 1, f"[{x}] drawn {seen} times out of {n}, expected {n * p:.1f}")

        uniform = CeMeasure(CeInstance(nonmember=0, horizon=1), paired=self.config.ce.paired)
        ones = sum(int(MarginalSampler(uniform, seed).prefix(1).bits) for seed in range(n))
        rec.check(
            abs(ones - n / 2) <= max(0.03 * n, 4 * np.sqrt(n / 4)),
            f"uniform marginal drew a leading 1 {ones} times out of {n}",
        )
        return rec.result()

    def check_certification(self) -> SuiteResult:
        rec = SuiteRecorder("certification")
        rng = self._rng(9)
        mu = self._ce_measure()
        indices = sorted({*mu.affected_indices(), mu.nonmember_index})

        for k in self._ce_indices(mu):
            beta = random_bits(rng, mu.instance.max_time + 4)
            exact = mu.exact_conditional(k, beta, tail_bit=0)
            value = ce_conditional(mu, k, ExplicitPrefix(beta, tail_bit=0), Fraction(1, 1 << 12))
            rec.check(value.contains(exact), f"certified P({k}|{beta.bits}0^inf) misses {exact}")

        for k in indices:
            source = ExplicitPrefix(random_bits(rng, mu.instance.max_time + 4), tail_bit=0)
            exact = mu.exact_conditional(k, source.bits, tail_bit=0)
            try:
                value = ce_conditional(mu, k, source, TRACE_EPS)
            except PrecisionUnreachable as e:
                rec.check(False, f"P({k}|{source.label}) not certified to {TRACE_EPS}: {e}")
                continue
            trace = certification_trace(mu, k, source, range(value.depth + 1), TRACE_EPS)
            for shallow, deep in zip(trace, trace[1:]):
                rec.check(
                    shallow.lower <= deep.lower and deep.upper <= shallow.upper,
                    f"P({k}|{source.label}) enclosure at depth {deep.depth} is not inside depth {shallow.depth}",
                )
            rec.check(all(v.contains(exact) for v in trace), f"a traced enclosure of P({k}|{source.label}) misses {exact}")
            rec.check(
                trace[-1].width < TRACE_WIDTH,
                f"P({k}|{source.label}) trace ends at width {trace[-1].width}, not below {TRACE_WIDTH}",
            )
        return rec.result()

    def check_decoder(self) -> SuiteResult:
        rec = SuiteRecorder("decoder")
        mu = self._ce_measure()

        if mu.paired:
            for tail in ("", "1"):
                oracle = PrefixOracle(mu, ExplicitPrefix(BitString(tail), tail_bit=0))
                for n in range(mu.instance.horizon + 1):
                    decoded = decode_membership(mu, n, oracle, mu.instance.nonmember)
                    rec.check(decoded == mu.instance.is_member(n), f"decoded n={n} as {decoded} along {tail or '0'}0^inf")

        count = max(1, self.config.experiment.decode_batch // 10)
        summary = LabRunner(self.config).decode_batch(count, 1, self.seed)
        rec.check(summary.passed, f"round trip over {count} random instances: {summary.failures[:3]}")
        return rec.result()

    def suites(self) -> Dict[str, Callable[[], SuiteResult]]:
        return {
            "dyadic-core": self.check_dyadic_core,
            "alpha-gen": self.check_alpha_gen,
            "vlf-measure": self.check_vlf_measure,
            "test-trimmer": self.check_test_trimmer,
            "ce-density": self.check_ce_density,
            "continuity": self.check_continuity,
            "differentiation": self.check_differentiation,
            "sampler": self.check_sampler,
            "certification": self.check_certification,
            "decoder": self.check_decoder,
        }

    def _run_suite(self, name: str, suite: Callable[[], SuiteResult]) -> SuiteResult:
        try:
            result = suite()
        except LabError as e:
            logger.error(f"Suite {name} aborted: {type(e).__name__}: {e}")
            return SuiteResult(name=name, status=CheckStatus.FAIL, error=f"{type(e).__name__}: {e}")
        logger.info(f"Suite {name}: {result.status.value} ({result.checks} checks)")
        return result

    def run(self, workers: Optional[int] = None) -> SelftestSummary:
        workers = settings.selftest_workers if workers is None else workers
        suites = self.suites()
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = list(pool.map(lambda item: self._run_suite(*item), suites.items()))

        passed = all(r.status == CheckStatus.PASS for r in results)
        totals = {
            "suites": len(results),
            "passed": sum(1 for r in results if r.status == CheckStatus.PASS),
            "failed": sum(1 for r in results if r.status == CheckStatus.FAIL),
            "checks": sum(r.checks for r in results),
        }
        return SelftestSummary(passed=passed, suites=results, totals=totals)


def run_selftest(config: LabConfig, workers: Optional[int] = None) -> SelftestSummary:
    return SelftestService(config).run(workers)
