"""Property suites of the selftest, and that each one notices a broken module."""

import dataclasses
from fractions import Fraction

import pytest

from app.core.config import load_lab_config
from app.models.dyadic import BitString
from app.models.schemas import CheckStatus, DecodeBatchSummary
from app.services import selftest as selftest_module
from app.services.ce_density import CeMeasure
from app.services.certification import CertifiedValue
from app.services.lab_runner import LabRunner
from app.services.selftest import SelftestService, run_selftest


@pytest.fixture
def service(config_file):
    return SelftestService(load_lab_config(config_file))


@pytest.mark.parametrize("name", ["continuity", "differentiation", "sampler", "certification", "decoder"])
def test_suite_passes(service, name):
    result = service.suites()[name]()
    assert result.status == CheckStatus.PASS, result.failures
    assert result.checks > 0


def test_run_reports_every_suite(config_file):
    summary = run_selftest(load_lab_config(config_file), workers=1)
    assert summary.passed
    assert summary.totals["suites"] == 10
    assert summary.totals["failed"] == 0


def test_continuity_suite_notices_escaping_limits(service, monkeypatch):
    real = selftest_module.continuity_evidence

    def shifted(*args, **kwargs):
        evidence = real(*args, **kwargs)
        return dataclasses.replace(evidence, limits=(evidence.limits[0] + 1, evidence.limits[1]))

    monkeypatch.setattr(selftest_module, "continuity_evidence", shifted)
    result = service.check_continuity()
    assert result.status == CheckStatus.FAIL
    assert "escape the enclosure" in result.failures[0]


def test_differentiation_suite_notices_a_gap(service, monkeypatch):
    monkeypatch.setattr(CeMeasure, "differentiation_gap", lambda self, j, prefix: (Fraction(1), Fraction(1, 1024)))
    result = service.check_differentiation()
    assert result.status == CheckStatus.FAIL


class ZerosSampler:
    """Ignores the measure and the seed"""

    def __init__(self, measure, seed, max_depth=None):
        self.measure = measure

    def prefix(self, depth):
        return BitString.zeros(depth)


def test_sampler_suite_notices_a_biased_sampler(service, monkeypatch):
    monkeypatch.setattr(selftest_module, "MarginalSampler", ZerosSampler)
    result = service.check_sampler()
    assert result.status == CheckStatus.FAIL
    assert any("uniform marginal" in f for f in result.failures)


def test_certification_suite_notices_a_wide_trace(service, monkeypatch):
    def loose(mu, k, source, depths, eps):
        return [CertifiedValue(Fraction(0), Fraction(1), depth=d) for d in depths]

    monkeypatch.setattr(selftest_module, "certification_trace", loose)
    result = service.check_certification()
    assert result.status == CheckStatus.FAIL
    assert any("not below" in f for f in result.failures)


def test_decoder_suite_notices_a_mismatch(service, monkeypatch):
    wrong = DecodeBatchSummary(instances=1, prefixes_per_instance=1, rows=1, mismatches=1, exhausted=0)
    monkeypatch.setattr(LabRunner, "decode_batch", lambda self, count=None, prefixes=None, seed=None: wrong)
    result = service.check_decoder()
    assert result.status == CheckStatus.FAIL
