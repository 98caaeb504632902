import gmpy2
import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from miscost.errors import DomainError
from miscost.numerics import (
    ModelParams,
    NumericContext,
    bits_of_agreement,
    parse_rational,
    required_precision,
)


@pytest.mark.parametrize("x,expected", [(0, 64), (200, 364), (1000, 1564)])
def test_required_precision_examples(x, expected):
    assert required_precision(x) == expected


def test_required_precision_rejects_negative():
    with pytest.raises(DomainError):
        required_precision(-1)


@given(num=st.integers(1, 10**6), den=st.integers(2, 10**6))
def test_params_identities_exact(num, den):
    if num >= den:
        num = num % den
        if num == 0:
            num = 1
    params = ModelParams(mpq(num, den))
    assert params.p + params.q == 1
    assert params.kappa * params.q == 1


@pytest.mark.parametrize("bad", ["0", "1", "3/2", "-1/2", "5/5"])
def test_params_rejects_out_of_range(bad):
    with pytest.raises(DomainError):
        ModelParams.from_string(bad)


@pytest.mark.parametrize("bad", ["0.5", "1e-3", "0.25"])
def test_decimal_input_rejected_with_hint(bad):
    with pytest.raises(DomainError, match="num/den"):
        parse_rational(bad)


def test_parse_rational_roundtrip():
    assert parse_rational("3/7") == mpq(3, 7)
    assert ModelParams.from_string("3/7").label() == "3/7"


def test_context_defaults():
    ctx = NumericContext(precision_bits=256)
    assert ctx.series_epsilon == gmpy2.mpfr(2) ** -128
    with pytest.raises(DomainError):
        NumericContext(precision_bits=32)


def test_doubled_context():
    assert NumericContext(128).doubled().precision_bits == 256


def test_bits_of_agreement():
    with gmpy2.context(precision=200):
        a = gmpy2.mpfr("1.0")
        b = a + gmpy2.mpfr(2) ** -150
    got = bits_of_agreement(a, b)
    assert 145 < got < 155
    assert bits_of_agreement(a, a) == float("inf")
