"""Sampling beta from the marginal of a measure."""

from collections import Counter
from fractions import Fraction
from itertools import product
from math import sqrt

import pytest

from app.models.ce_instance import CeInstance
from app.models.dyadic import BitString
from app.services.ce_density import CeMeasure
from app.services.sampler import MarginalSampler, sample_marginal


def test_same_seed_same_prefix(paired_measure):
    assert sample_marginal(paired_measure, 9, 20) == sample_marginal(paired_measure, 9, 20)


def test_prefixes_extend_each_other(three_step_measure):
    sampler = MarginalSampler(three_step_measure, seed=5)
    short = sampler.prefix(2)
    longer = sampler.prefix(3)
    assert longer.prefix(2) == short
    assert MarginalSampler(three_step_measure, seed=5).prefix(3) == longer


def test_depth_limits(paired_measure):
    with pytest.raises(ValueError):
        sample_marginal(paired_measure, 1, 0)
    with pytest.raises(ValueError):
        MarginalSampler(paired_measure, seed=1, max_depth=4).prefix(5)


@pytest.mark.parametrize("measure_name", ["three_step_measure", "paired_measure"])
def test_cylinder_frequencies(measure_name, request):
    measure = request.getfixturevalue(measure_name)
    n = 10_000
    drawn = [sample_marginal(measure, seed, 3).bits for seed in range(n)]
    for depth in (1, 2, 3):
        counts = Counter(bits[:depth] for bits in drawn)
        for bits in ("".join(p) for p in product("01", repeat=depth)):
            p = measure.marginal(BitString(bits))
            expected = n * p
            sigma = sqrt(n * p * (1 - p))
            assert abs(counts[bits] - expected) <= 4 * sigma, bits


def test_paired_marginal_is_uniform_to_depth_two_only(paired_measure):
    assert all(paired_measure.marginal(BitString(x)) == Fraction(1, 4) for x in ("00", "01", "10", "11"))
    assert paired_measure.marginal(BitString("000")) == Fraction(31, 256)
    assert paired_measure.marginal(BitString("001")) == Fraction(33, 256)


def test_empty_instance_samples_uniform_first_bit():
    uniform = CeMeasure(CeInstance(nonmember=0, horizon=1))
    n = 10_000
    mean = sum(int(sample_marginal(uniform, seed, 1).bits) for seed in range(n)) / n
    assert 0.47 <= mean <= 0.53


def test_atoms_attract_samples(three_step_measure):
    # P_M([00]) = 15/32 is the heaviest cylinder of length 2
    assert three_step_measure.marginal(BitString("00")) == Fraction(15, 32)
    counts = Counter(sample_marginal(three_step_measure, seed, 2).bits for seed in range(400))
    assert counts.most_common(1)[0][0] == "00"
