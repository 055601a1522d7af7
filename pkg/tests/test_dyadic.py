"""Exact dyadic arithmetic, intervals, cylinders and the text codec."""

from fractions import Fraction

import pytest

from app.core.exceptions import ParseError, PartitionError
from app.models.dyadic import (
    BitString,
    DyadicInterval,
    DyadicRational,
    ONE,
    Rect,
    ZERO,
    cylinder_to_interval,
    format_decimal,
    format_rect,
    parse_bits,
    parse_dyadic,
    parse_rect,
    split_interval,
    strip_partition,
    uniform_measure,
)


def d(text):
    return parse_dyadic(text)


def test_dyadic_is_canonical():
    assert DyadicRational(4, 3) == DyadicRational(1, 1)
    assert DyadicRational(4, 3).exponent == 1
    assert DyadicRational(0, 9) == ZERO
    assert DyadicRational(3, 2).value == Fraction(3, 4)


def test_dyadic_arithmetic_is_exact():
    a, b = d("3/8"), d("5/2^6")
    assert (a + b).value == Fraction(29, 64)
    assert (a - b).value == Fraction(19, 64)
    assert (a * b).value == Fraction(15, 512)
    assert -a < ZERO < a
    assert DyadicRational.pow2(5).value == Fraction(1, 32)
    assert a.scale(2).value == Fraction(3, 32)


def test_from_fraction_rejects_non_dyadic():
    assert DyadicRational.from_fraction(Fraction(6, 16)) == d("3/8")
    with pytest.raises(ValueError):
        DyadicRational.from_fraction(Fraction(1, 3))


def test_parse_dyadic_forms():
    assert d("1/2^3") == d("1/8") == DyadicRational(1, 3)
    assert d("0/1") == ZERO
    assert d("1") == ONE
    assert parse_dyadic(str(d("13/2^7"))) == d("13/128")


@pytest.mark.parametrize("text", ["1/3", "5/12", "1/6^2"])
def test_parse_dyadic_non_dyadic(text):
    with pytest.raises(ParseError, match="non-dyadic endpoint"):
        parse_dyadic(text)


def test_parse_dyadic_malformed():
    with pytest.raises(ParseError, match="malformed"):
        parse_dyadic("0.5")


@pytest.mark.parametrize("text", ["1/0", "1/0^0", "3/0^5"])
def test_parse_dyadic_zero_denominator(text):
    with pytest.raises(ParseError, match="zero denominator"):
        parse_dyadic(text)


def test_parse_dyadic_power_of_a_power():
    assert d("3/4^2") == DyadicRational(3, 4)
    assert d("1/8^0") == ONE
    assert d("5/1^9") == DyadicRational(5)


def test_parse_dyadic_huge_exponent_is_rejected():
    with pytest.raises(ParseError, match="exceeds the limit"):
        parse_dyadic("1/2^999999999")
    with pytest.raises(ParseError, match="exceeds the limit"):
        parse_dyadic("1/4^40000")


def test_cylinder_intervals():
    assert cylinder_to_interval(BitString()) == DyadicInterval.unit()
    cell = cylinder_to_interval(BitString("101"))
    assert cell.lo == d("5/8") and cell.hi == d("3/4")
    left, right = cylinder_to_interval(BitString("1010")), cylinder_to_interval(BitString("1011"))
    assert left.lo == cell.lo and left.hi == right.lo and right.hi == cell.hi


def test_bitstring_helpers():
    x = BitString("0010")
    assert len(x) == 4
    assert x.prefix(2) == BitString("00")
    assert x.suffix_from(2) == BitString("10")
    assert x.contains_one() and not x.ends_in_one()
    assert not BitString.zeros(5).contains_one()
    assert x.extend("1").ends_in_one()
    assert BitString.of([1, 0, 1]) == BitString("101")
    with pytest.raises(ValueError):
        BitString("012")


def test_interval_rejects_empty_and_out_of_range():
    with pytest.raises(ValueError):
        DyadicInterval(d("1/2"), d("1/2"))
    with pytest.raises(ValueError):
        DyadicInterval(d("1/2"), d("3/2"))


def test_interval_relations():
    i = DyadicInterval(d("1/4"), d("3/4"))
    assert i.contains(d("1/4")) and not i.contains(d("3/4"))
    assert DyadicInterval(d("1/2"), d("3/4")).subset_of(i)
    assert i.intersect(DyadicInterval(d("1/2"), ONE)) == DyadicInterval(d("1/2"), d("3/4"))
    assert i.intersect(DyadicInterval(d("3/4"), ONE)) is None


def test_uniform_measure():
    r = Rect(DyadicInterval(ZERO, d("1/2")), BitString("11"))
    assert uniform_measure(r) == Fraction(1, 8)


def test_split_interval():
    i = DyadicInterval(d("1/8"), d("5/8"))
    left, right = split_interval(i, d("1/2"))
    assert left == DyadicInterval(d("1/8"), d("1/2"))
    assert right == DyadicInterval(d("1/2"), d("5/8"))
    assert split_interval(i, ZERO) == (None, i)
    assert split_interval(i, ONE) == (i, None)


def test_strip_partition_tags_bands():
    breaks = [d("1/4"), d("3/8"), d("7/16")]
    pieces = strip_partition(DyadicInterval(d("1/8"), d("7/16")), breaks)
    assert pieces == [
        (0, DyadicInterval(d("1/8"), d("1/4"))),
        (1, DyadicInterval(d("1/4"), d("3/8"))),
        (2, DyadicInterval(d("3/8"), d("7/16"))),
    ]


def test_strip_partition_errors():
    with pytest.raises(PartitionError):
        strip_partition(DyadicInterval(ZERO, d("1/2")), [d("1/4")])
    with pytest.raises(ValueError):
        strip_partition(DyadicInterval(ZERO, d("1/8")), [d("1/4"), d("1/4")])


def test_strip_partition_preserves_length(rng):
    breaks = [d("1/4"), d("3/8"), d("7/16"), ONE]
    for _ in range(200):
        e = int(rng.integers(1, 12))
        a, b = sorted(int(v) for v in rng.choice((1 << e) + 1, size=2, replace=False))
        i = DyadicInterval(DyadicRational(a, e), DyadicRational(b, e))
        assert sum(p.length.value for _, p in strip_partition(i, breaks)) == i.length.value


def test_parse_rect_and_positions():
    r = parse_rect("0/1 1/4 00")
    assert r.interval == DyadicInterval(ZERO, d("1/4"))
    assert r.cyl == BitString("00")
    assert parse_rect("0 1").cyl == BitString()
    assert parse_rect("0 1 -").cyl == BitString()
    assert parse_rect(format_rect(r)) == r

    with pytest.raises(ParseError) as err:
        parse_rect("1/3 1/2 0", line=4)
    assert err.value.line == 4 and err.value.column == 1
    assert "non-dyadic endpoint" in str(err.value)

    with pytest.raises(ParseError) as err:
        parse_rect("0 1/2 0a")
    assert err.value.column == 7


def test_parse_bits():
    assert parse_bits("-") == BitString()
    assert parse_bits(" 0110 ") == BitString("0110")
    with pytest.raises(ParseError):
        parse_bits("01x")


def test_format_decimal():
    assert format_decimal(Fraction(1, 3)) == "0.333333333333"
    assert format_decimal(Fraction(2, 3)) == "0.666666666667"
    assert format_decimal(Fraction(1)) == "1.000000000000"
    assert format_decimal(Fraction(-1, 8), 2) == "-0.12"
