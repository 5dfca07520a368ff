import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from unlearn.field import (
    BN254_SCALAR_FIELD,
    ConfigError,
    SIGMOID_C0,
    SIGMOID_C1,
    SIGMOID_C3,
    ScaleConfig,
    from_hex,
    fx_add,
    fx_decode,
    fx_encode,
    fx_mul,
    fx_neg,
    fx_sub,
    sigmoid_approx,
    signed_repr,
    to_hex,
)

CFG = ScaleConfig()
P = BN254_SCALAR_FIELD
G = CFG.gamma


def enc(r):
    return fx_encode(r, CFG)


def test_encode_examples():
    assert enc(0.5) == 50000
    assert enc(-0.5) == P - 50000
    assert enc(1.5) == 150000
    assert enc(0) == 0


def test_add_examples():
    assert fx_add(enc(0.5), enc(0.25), CFG) == enc(0.75) == 75000
    assert fx_add(enc(0.5), enc(-0.5), CFG) == 0
    assert fx_add(enc(1.5), enc(2.5), CFG) == enc(4) == 400000


def test_mul_examples():
    assert fx_mul(enc(0.5), enc(0.5), CFG) == enc(0.25) == 25000
    assert fx_mul(enc(2), enc(3), CFG) == enc(6) == 600000


def test_mul_truncates_toward_zero():
    # 1e-5 * 1e-5 = 1e-10, below the representable grid.  The rational
    # oracle confirms truncation: |1*1| // gamma == 0.
    tiny = enc("0.00001")
    assert signed_repr(tiny, CFG) == 1
    assert abs(1 * 1) // G == 0
    assert fx_mul(tiny, tiny, CFG) == 0
    # Negative side truncates toward zero as well (not toward -inf).
    assert fx_mul(enc("-0.00001"), tiny, CFG) == 0


def test_encode_overflow():
    with pytest.raises(OverflowError):
        fx_encode(Fraction(CFG.encode_limit + 5, G), CFG)


def test_mul_overflow():
    big = fx_encode(Fraction(CFG.encode_limit - 1, G), CFG)
    with pytest.raises(OverflowError):
        fx_mul(big, big, CFG)


def test_config_validation():
    with pytest.raises(ConfigError):
        ScaleConfig(gamma=0)
    with pytest.raises(ConfigError):
        ScaleConfig(modulus=2**64)  # not prime
    with pytest.raises(ConfigError):
        ScaleConfig(modulus=101, gamma=10, max_abs=2)  # no headroom


small_scaled = st.integers(min_value=-4 * G, max_value=4 * G)


@given(k=st.integers(min_value=-(10**12), max_value=10**12))
def test_roundtrip_exact(k):
    assert fx_decode(fx_encode(Fraction(k, G), CFG), CFG) == Fraction(k, G)


@given(a=small_scaled, b=small_scaled, c=small_scaled)
def test_ring_laws(a, b, c):
    ea, eb, ec = a % P, b % P, c % P
    assert fx_add(ea, eb, CFG) == fx_add(eb, ea, CFG)
    assert fx_add(fx_add(ea, eb, CFG), ec, CFG) == fx_add(ea, fx_add(eb, ec, CFG), CFG)
    assert fx_mul(ea, eb, CFG) == fx_mul(eb, ea, CFG)
    # Distributivity up to one unit of truncation error per multiply.
    lhs = fx_mul(ea, fx_add(eb, ec, CFG), CFG)
    rhs = fx_add(fx_mul(ea, eb, CFG), fx_mul(ea, ec, CFG), CFG)
    err = abs(fx_decode(fx_sub(lhs, rhs, CFG), CFG))
    assert err <= Fraction(2, G)


def _random_expr(rng, depth, limit):
    """Expression tree evaluated three ways: exact rationals, fixed point,
    and an interval-style error bound (|a|*err_b + |b|*err_a + 1/gamma per
    multiply).  ``muls`` counts multiplications."""
    if depth == 0 or rng.random() < 0.3:
        v = Fraction(rng.randint(-limit * G, limit * G), G)
        return v, enc(v), Fraction(0), 0
    op = rng.choice(("add", "sub", "mul"))
    lv, le, lerr, lm = _random_expr(rng, depth - 1, limit)
    rv, re, rerr, rm = _random_expr(rng, depth - 1, limit)
    if op == "add" and abs(lv + rv) <= limit:
        return lv + rv, fx_add(le, re, CFG), lerr + rerr, lm + rm
    if op == "sub" and abs(lv - rv) <= limit:
        return lv - rv, fx_sub(le, re, CFG), lerr + rerr, lm + rm
    if abs(lv * rv) > limit:
        return lv, le, lerr, lm
    err = abs(lv) * rerr + abs(rv) * lerr + Fraction(1, G)
    return lv * rv, fx_mul(le, re, CFG), err, lm + rm + 1


def test_expression_tree_matches_rational_oracle():
    # Truncation errors amplify by the magnitude of the co-operand, so the
    # general bound is the propagated one; when every intermediate stays in
    # [-1, 1] it collapses to (number of multiplications)/gamma.
    rng = random.Random(7)
    for _ in range(200):
        exact, encoded, bound, muls = _random_expr(rng, 8, limit=4)
        assert abs(fx_decode(encoded, CFG) - exact) <= max(bound, Fraction(1, G))
    for _ in range(200):
        exact, encoded, _, muls = _random_expr(rng, 8, limit=1)
        assert abs(fx_decode(encoded, CFG) - exact) <= Fraction(max(muls, 1), G)


def test_negation():
    assert fx_neg(enc(0.5), CFG) == enc(-0.5)
    assert fx_neg(0, CFG) == 0


# -- sigmoid surrogate ---------------------------------------------------------


def test_sigmoid_at_zero_is_half():
    assert sigmoid_approx(0, CFG) == enc(SIGMOID_C0)
    assert SIGMOID_C0 == Fraction(1, 2)


def test_sigmoid_antisymmetry_exact():
    for v in (0.25, 1.0, 2.5, 4.75):
        z = enc(v)
        total = fx_add(sigmoid_approx(z, CFG), sigmoid_approx(fx_neg(z, CFG), CFG), CFG)
        assert total == fx_add(enc(SIGMOID_C0), enc(SIGMOID_C0), CFG)


def test_sigmoid_near_true_sigmoid_at_two():
    got = fx_decode(sigmoid_approx(enc(2), CFG), CFG)
    assert abs(float(got) - 1 / (1 + math.exp(-2))) < 0.05


def test_sigmoid_within_envelope_on_grid():
    worst = 0.0
    for i in range(1001):
        z = -5 + i / 100
        got = float(fx_decode(sigmoid_approx(enc(round(z * G) / G), CFG), CFG))
        worst = max(worst, abs(got - 1 / (1 + math.exp(-z))))
    assert worst <= 0.05, f"max sigmoid error {worst}"


def test_sigmoid_monotone_on_grid():
    prev = None
    for i in range(601):
        z = Fraction(-3) + Fraction(i, 100)
        val = fx_decode(sigmoid_approx(enc(z), CFG), CFG)
        if prev is not None:
            assert val >= prev, f"decrease at z={float(z)}"
        prev = val


def test_sigmoid_coefficients_near_least_squares_fit():
    np = pytest.importorskip("numpy")
    z = np.linspace(-5.0, 5.0, 1001)
    y = 1.0 / (1.0 + np.exp(-z))
    X = np.stack([np.ones_like(z), z, z**3], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    frozen = [float(SIGMOID_C0), float(SIGMOID_C1), float(SIGMOID_C3)]
    # The frozen fit trades a little L2 for a bounded max error; it stays
    # within a hair of the plain least-squares solution.
    for got, ols in zip(frozen, coef):
        assert abs(got - ols) < 5e-3


# -- canonical hex ---------------------------------------------------------------


@given(v=st.integers(min_value=0, max_value=P - 1))
@settings(max_examples=50)
def test_hex_roundtrip(v):
    s = to_hex(v, CFG)
    assert len(s) == 64 and s == s.lower()
    assert from_hex(s, CFG) == v


def test_hex_rejects_out_of_range():
    with pytest.raises(ValueError):
        from_hex("ff" * 32, CFG)
    with pytest.raises(ValueError):
        from_hex("0b", CFG)
