"""Prime-field arithmetic and the gamma-scaled fixed-point codec.

All field elements are plain Python ints, canonically reduced to [0, p).
A fixed-point value is a field element encoding the signed rational k/gamma
as k mod p (negatives wrap to p - |k|).  Every operation here is pure, so
values can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

# Scalar field of the ALT_BN128 / BN254 pairing curve; R1CS statements and
# the proving backend live over this field.
BN254_SCALAR_FIELD = (
    21888242871839275222246405745257275088548364400416034343698204186575808495617
)

DEFAULT_GAMMA = 10**5

# Cubic surrogate for the sigmoid: c0 + c1*z + c3*z^3, fitted against the
# true sigmoid on a 1001-point uniform grid over [-5, 5].  A plain
# least-squares fit peaks at 0.061 absolute error on that grid, which blows
# the 0.05 accuracy envelope, so the frozen coefficients come from the
# minimax (equioscillating) fit instead; see tests/test_field.py for the
# re-derivation.  Values are exact multiples of 1e-5 so they encode exactly
# at the default gamma.
SIGMOID_C0 = Fraction(50000, 100000)
SIGMOID_C1 = Fraction(19751, 100000)
SIGMOID_C3 = Fraction(-427, 100000)
SIGMOID_FIT_RANGE = (-5, 5)

Rational = Union[int, float, str, Fraction]


class ConfigError(ValueError):
    """Raised when a ScaleConfig violates its own invariants."""


_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def _is_probable_prime(n: int) -> bool:
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _SMALL_PRIMES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class ScaleConfig:
    """Fixed-point scale gamma plus the prime field it embeds into.

    ``max_abs`` bounds the magnitude of any raw (unscaled) value expected
    during a training run; the constructor checks the overflow headroom
    p > 2 * gamma^2 * max_abs^2 so rescaled products never wrap.
    """

    gamma: int = DEFAULT_GAMMA
    modulus: int = BN254_SCALAR_FIELD
    max_abs: int = 2**20

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if not _is_probable_prime(self.modulus):
            raise ConfigError("field modulus must be prime")
        if self.modulus <= 2 * self.gamma**2 * self.max_abs**2:
            raise ConfigError(
                "field modulus leaves no overflow headroom for "
                f"gamma={self.gamma}, max_abs={self.max_abs}"
            )

    @property
    def half(self) -> int:
        return (self.modulus - 1) // 2

    @property
    def encode_limit(self) -> int:
        # |round(gamma * r)| must stay below p / (2*gamma).
        return self.modulus // (2 * self.gamma)

    @property
    def remainder_bits(self) -> int:
        # ceil(log2(gamma)): width of the rescale remainder range check.
        return (self.gamma - 1).bit_length()

    @property
    def byte_length(self) -> int:
        return (self.modulus.bit_length() + 7) // 8


def signed_repr(v: int, cfg: ScaleConfig) -> int:
    """Map a field element to its signed representative in (-p/2, p/2]."""
    v %= cfg.modulus
    return v if v <= cfg.half else v - cfg.modulus


def _as_fraction(r: Rational) -> Fraction:
    if isinstance(r, str):
        return Fraction(r)
    return Fraction(r)


def fx_encode(r: Rational, cfg: ScaleConfig) -> int:
    """Encode a rational as round(gamma * r) mod p."""
    k = round(_as_fraction(r) * cfg.gamma)
    if abs(k) >= cfg.encode_limit:
        raise OverflowError(f"{r} exceeds the fixed-point headroom")
    return k % cfg.modulus


def fx_decode(v: int, cfg: ScaleConfig) -> Fraction:
    return Fraction(signed_repr(v, cfg), cfg.gamma)


def fx_add(a: int, b: int, cfg: ScaleConfig) -> int:
    return (a + b) % cfg.modulus


def fx_sub(a: int, b: int, cfg: ScaleConfig) -> int:
    return (a - b) % cfg.modulus


def fx_neg(a: int, cfg: ScaleConfig) -> int:
    return -a % cfg.modulus


def fx_mul(a: int, b: int, cfg: ScaleConfig) -> int:
    """gamma-rescaled product: trunc(signed(a) * signed(b) / gamma).

    Truncation is toward zero on the signed representative, matching the
    in-circuit quotient/remainder gadget.
    """
    prod = signed_repr(a, cfg) * signed_repr(b, cfg)
    q = abs(prod) // cfg.gamma
    if q >= cfg.encode_limit:
        raise OverflowError("fixed-point product exceeds headroom")
    return (-q if prod < 0 else q) % cfg.modulus


class NativeOps:
    """Arithmetic interface shared with the circuit builder.

    Model training is written once against this interface; replaying it
    over circuit wires instead of ints yields a bit-identical computation.
    """

    def __init__(self, cfg: ScaleConfig):
        self.cfg = cfg

    def const(self, encoded: int) -> int:
        return encoded % self.cfg.modulus

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.cfg.modulus

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.cfg.modulus

    def mul(self, a: int, b: int) -> int:
        return fx_mul(a, b, self.cfg)

    def encode(self, r: Rational) -> int:
        return fx_encode(r, self.cfg)


def sigmoid_poly(ops, z):
    """Evaluate the cubic sigmoid surrogate through an ops interface."""
    c0 = ops.encode(SIGMOID_C0)
    c1 = ops.encode(SIGMOID_C1)
    c3 = ops.encode(SIGMOID_C3)
    z2 = ops.mul(z, z)
    z3 = ops.mul(z2, z)
    return ops.add(ops.add(c0, ops.mul(c1, z)), ops.mul(c3, z3))


def sigmoid_deriv_poly(ops, z):
    """Analytic derivative of the surrogate: c1 + 3*c3*z^2."""
    c1 = ops.encode(SIGMOID_C1)
    d3 = ops.encode(3 * SIGMOID_C3)
    z2 = ops.mul(z, z)
    return ops.add(c1, ops.mul(d3, z2))


def sigmoid_approx(z: int, cfg: ScaleConfig) -> int:
    return sigmoid_poly(NativeOps(cfg), z)


def to_hex(v: int, cfg: ScaleConfig) -> str:
    """Canonical serialization: lowercase big-endian hex, zero-padded."""
    if not 0 <= v < cfg.modulus:
        raise ValueError("field element out of range")
    return v.to_bytes(cfg.byte_length, "big").hex()


def from_hex(s: str, cfg: ScaleConfig) -> int:
    if len(s) != 2 * cfg.byte_length:
        raise ValueError("bad field element length")
    v = int(s, 16)
    if v >= cfg.modulus:
        raise ValueError("field element out of range")
    return v
