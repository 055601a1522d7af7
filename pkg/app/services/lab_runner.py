import csv
import logging
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from ..core.config import settings
from ..core.exceptions import PrecisionUnreachable, ZeroMarginal
from ..models.ce_instance import CeInstance, random_instance
from ..models.dyadic import (
    BitString,
    DyadicInterval,
    DyadicRational,
    format_decimal,
    parse_bits,
    parse_rect,
)
from ..models.schemas import (
    ConvergeRow,
    DecodeBatchSummary,
    DecodeRow,
    LabConfig,
    PrefixMode,
    fraction_text,
)
from .alpha_generator import AlphaSequence, build_alpha_sequence
from .ce_density import CeMeasure
from .certification import (
    ExplicitPrefix,
    PrefixOracle,
    PrefixSource,
    SampledPrefix,
    certification_trace,
    decode_membership,
)
from .sampler import MarginalSampler
from .trimming import VerificationReport, load_level, trim_level, verify_conditions
from .vlf_measure import VlfMeasure

logger = logging.getLogger(__name__)


def _decimal(value: Optional[Fraction]) -> str:
    return "" if value is None else format_decimal(value, settings.decimal_places)


def write_csv(rows: Sequence[BaseModel], stream: IO[str], model: type = ConvergeRow) -> None:
    """Deterministic CSV: fixed column order, '\\n' line endings, header even when empty"""
    writer = csv.DictWriter(stream, fieldnames=list(model.model_fields), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row.model_dump())


class LabRunner:
    """Runs the lab's experiments against one validated configuration"""

    def __init__(self, config: LabConfig):
        self.config = config
        self.instance: CeInstance = config.ce.to_instance()
        self._alphas: Optional[AlphaSequence] = None

    @property
    def alphas(self) -> AlphaSequence:
        if self._alphas is None:
            self._alphas = build_alpha_sequence(self.config.alpha, self.instance)
        return self._alphas

    @property
    def vlf(self) -> VlfMeasure:
        return VlfMeasure(self.alphas)

    @property
    def ce(self) -> CeMeasure:
        return CeMeasure(self.instance, paired=self.config.ce.paired)

    # Evaluation
    def eval_p(self, rect_text: str) -> Fraction:
        return self.vlf.p_eval(parse_rect(rect_text))

    def eval_phat(self, k: int, cyl_text: str) -> Tuple[Fraction, Fraction]:
        """(raw value, probability) of {k} x [cyl]"""
        cyl = parse_bits(cyl_text)
        mu = self.ce
        return mu.ce_rect(k, cyl), mu.mass(k, cyl)

    # Prefix sources
    def prefix_source(
        self,
        mode: PrefixMode,
        bits: str = "",
        tail: Optional[int] = None,
        sample_seed: Optional[int] = None,
    ) -> PrefixSource:
        if sample_seed is not None:
            measure = self.vlf if mode == PrefixMode.VLF else self.ce
            return SampledPrefix(MarginalSampler(measure, sample_seed))
        return ExplicitPrefix(parse_bits(bits), tail_bit=tail)

    # Convergence experiments
    def converge_vlf(self, interval: DyadicInterval, source: PrefixSource, depths: Iterable[int]) -> List[ConvergeRow]:
        rows = []
        vlf = self.vlf
        for depth in depths:
            prefix = source.prefix(depth)
            try:
                report = vlf.conditional_ratio(interval, prefix)
            except ZeroMarginal:
                rows.append(ConvergeRow(
                    depth=depth, prefix=prefix.bits, lower="", upper="", predicted="",
                    lower_decimal="", upper_decimal="", predicted_decimal="", status="zero-marginal",
                ))
                continue
            rows.append(ConvergeRow(
                depth=depth,
                prefix=prefix.bits,
                lower=fraction_text(report.ratio),
                upper=fraction_text(report.ratio),
                predicted=fraction_text(report.predicted_limit),
                lower_decimal=_decimal(report.ratio),
                upper_decimal=_decimal(report.ratio),
                predicted_decimal=_decimal(report.predicted_limit),
            ))
        logger.info(f"vlf convergence: {len(rows)} rows for {interval}")
        return rows

    def converge_ce(self, k: int, source: PrefixSource, depths: Iterable[int], eps: Fraction) -> List[ConvergeRow]:
        depths = list(depths)
        mu = self.ce
        values = certification_trace(mu, k, source, depths, eps)
        limit = None
        if isinstance(source, ExplicitPrefix) and source.tail_bit is not None:
            limit = mu.exact_conditional(k, source.bits, source.tail_bit)
        rows = [
            ConvergeRow(
                depth=v.depth,
                prefix=source.prefix(v.depth).bits,
                lower=fraction_text(v.lower),
                upper=fraction_text(v.upper),
                predicted=fraction_text(limit),
                lower_decimal=_decimal(v.lower),
                upper_decimal=_decimal(v.upper),
                predicted_decimal=_decimal(limit),
            )
            for v in values
        ]
        logger.info(f"ce convergence: {len(rows)} rows for k={k} from {source.label}")
        return rows

    # Trimming
    def default_probes(self, count: int = 16) -> List[DyadicRational]:
        available = self.alphas.available_terms()
        top = count if available is None else min(count, available)
        return [self.alphas.alpha(m) for m in range(1, top + 1)]

    def trim_demo(self, level: Union[str, Path], probes: Optional[Sequence[DyadicRational]] = None) -> VerificationReport:
        test_level = load_level(level)
        vlf = self.vlf
        trimmed = trim_level(vlf, test_level)
        return verify_conditions(vlf, test_level, trimmed, probes if probes is not None else self.default_probes())

    # Decoding
    def decode(self, source: Optional[PrefixSource] = None, mu: Optional[CeMeasure] = None) -> List[DecodeRow]:
        """Decode every index up to the horizon and compare with the instance"""
        mu = mu or CeMeasure(self.instance, paired=True)
        source = source or ExplicitPrefix(BitString(), tail_bit=0)
        oracle = PrefixOracle(mu, source)
        rows = []
        for n in range(mu.instance.horizon + 1):
            before = oracle.queries
            truth = mu.instance.is_member(n)
            try:
                decoded = decode_membership(mu, n, oracle, mu.instance.nonmember)
                rows.append(DecodeRow(n=n, decoded=decoded, truth=truth, queries=oracle.queries - before))
            except PrecisionUnreachable as e:
                logger.error(f"Decoding n={n} failed: {e}")
                rows.append(DecodeRow(
                    n=n, decoded=None, truth=truth, queries=oracle.queries - before,
                    status=f"{type(e).__name__}: {e}",
                ))
        return rows

    def decode_batch(self, count: Optional[int] = None, prefixes: Optional[int] = None, seed: Optional[int] = None) -> DecodeBatchSummary:
        """
        Decode random instances along sampled beta prefixes (continued by zeros)
        and count disagreements with the ground truth.
        """
        experiment = self.config.experiment
        count = experiment.decode_batch if count is None else count
        prefixes = experiment.batch_prefixes if prefixes is None else prefixes
        rng = np.random.default_rng(experiment.seed if seed is None else seed)

        rows = mismatches = exhausted = 0
        failures = []
        for i in range(count):
            instance = random_instance(rng)
            mu = CeMeasure(instance, paired=True)
            for j in range(prefixes):
                sample_seed = int(rng.integers(0, 2 ** 31))
                beta = MarginalSampler(mu, sample_seed).prefix(experiment.max_depth)
                for row in self.decode(ExplicitPrefix(beta, tail_bit=0), mu):
                    rows += 1
                    if row.decoded is None:
                        exhausted += 1
                        failures.append(f"instance {i} prefix {beta.bits}: n={row.n} {row.status}")
                    elif not row.matches:
                        mismatches += 1
                        failures.append(f"instance {i} prefix {beta.bits}: n={row.n} decoded {row.decoded}, truth {row.truth}")

        logger.info(f"Decoded {count} instances x {prefixes} prefixes: {mismatches} mismatches, {exhausted} exhausted")
        return DecodeBatchSummary(
            instances=count, prefixes_per_instance=prefixes, rows=rows,
            mismatches=mismatches, exhausted=exhausted, failures=failures[:20],
        )

    # Sampling
    def sample(self, mode: PrefixMode, seed: int, count: int, depth: int) -> List[BitString]:
        measure = self.vlf if mode == PrefixMode.VLF else self.ce
        return [MarginalSampler(measure, seed + i).prefix(depth) for i in range(count)]
