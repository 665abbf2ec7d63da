"""Model parameterizations and the pointwise scalar functions built on them.

Canonical coordinates are (q, w) with

    q = exp(-2*lam),   w = exp(-2*u),   t = q**(1/4),   s = w**2 / q**(1/2).

The self-dual couplings satisfy exp(K1) = 1 + sqrt(Q)*x and
exp(K2) = 1 + sqrt(Q)/x with Q = q + 2 + 1/q and
x = sinh(lam - 2u)/sinh(2u).  All hyperbolic forms are derived views; the
rational forms in (q, w**2) are the ones actually computed, and the
hyperbolic route is used as a cross-check.

The physical (ferromagnetic) strip is q < w**2 < 1, i.e. 0 < u < lam/2.
Operations are defined by their formulas outside that strip too, but such
points are flagged non-physical rather than rejected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, PoleError

POLE_RTOL = 1e-10  # relative distance below which named pole errors fire
CROSS_CHECK_RTOL = 1e-12


def _is_mpf(x) -> bool:
    return type(x).__module__.startswith("mpmath")


def _log(x):
    if _is_mpf(x):
        import mpmath

        return mpmath.log(x)
    return math.log(x)


def _sinh(x):
    if _is_mpf(x):
        import mpmath

        return mpmath.sinh(x)
    return math.sinh(x)


def _cosh(x):
    if _is_mpf(x):
        import mpmath

        return mpmath.cosh(x)
    return math.cosh(x)


def _sqrt(x):
    if _is_mpf(x):
        import mpmath

        return mpmath.sqrt(x)
    return math.sqrt(x)


@dataclass(frozen=True)
class SpectralParams:
    """The point (q, w) together with its derived views."""

    q: float
    w: float

    def __post_init__(self):
        if not (0 < self.q < 1):
            raise DomainError(f"q must lie in (0, 1), got {self.q}")
        if not self.w > 0:
            raise DomainError(f"w must be positive, got {self.w}")

    @property
    def w2(self):
        return self.w * self.w

    @property
    def lam(self):
        return -_log(self.q) / 2

    @property
    def u(self):
        return -_log(self.w) / 2

    @property
    def t(self):
        return self.q ** 0.25

    @property
    def s(self):
        return self.w2 / _sqrt(self.q)

    @property
    def Q(self):
        return self.q + 2 + 1 / self.q

    @property
    def physical(self) -> bool:
        return self.q < self.w2 < 1

    @classmethod
    def from_qw(cls, q, w) -> "SpectralParams":
        return cls(q, w)

    @classmethod
    def from_q_s(cls, q, s) -> "SpectralParams":
        """Anisotropy form: w**2 = s * q**(1/2)."""
        if s <= 0:
            raise DomainError(f"s must be positive, got {s}")
        return cls(q, _sqrt(s * _sqrt(q)))

    @classmethod
    def from_lam_u(cls, lam, u) -> "SpectralParams":
        if lam <= 0:
            raise DomainError(f"lam must be positive, got {lam}")
        e = math.exp if not _is_mpf(lam) else __import__("mpmath").exp
        return cls(e(-2 * lam), e(-2 * u))


@dataclass(frozen=True)
class CouplingParams:
    """Couplings of the self-dual point: Q, K1, K2 and the anisotropy x."""

    Q: float
    x: float
    eK1: float
    eK2: float

    @property
    def K1(self):
        if self.eK1 <= 0:
            raise DomainError("K1 undefined: exp(K1) <= 0 outside the physical strip")
        return _log(self.eK1)

    @property
    def K2(self):
        if self.eK2 <= 0:
            raise DomainError("K2 undefined: exp(K2) <= 0 outside the physical strip")
        return _log(self.eK2)


def _check_pole(value, pole_at, name: str):
    denom = abs(pole_at) if pole_at != 0 else 1.0
    if abs(value - pole_at) <= POLE_RTOL * denom:
        raise PoleError(name)


def couplings(sp: SpectralParams, cross_check: bool = True) -> CouplingParams:
    """exp(K1) = (w^2/q)(1-q^2/w^2)/(1-w^2), exp(K2) = (1/w^2)(1-q w^2)/(1-q/w^2).

    Raises PoleError near w^2 = 1 (K1 pole) and w^2 = q (K2 pole).  The
    hyperbolic representations are evaluated as an internal consistency
    check; the tolerance widens with pole proximity, where the hyperbolic
    route loses digits to cancellation in lam - 2u.
    """
    q, w2 = sp.q, sp.w2
    _check_pole(w2, 1, "w2=1")
    _check_pole(w2, q, "w2=q")
    eK1 = (w2 / q) * (1 - q * q / w2) / (1 - w2)
    eK2 = (1 / w2) * (1 - q * w2) / (1 - q / w2)
    if cross_check:
        lam, u = float(sp.lam), float(sp.u)
        margin = min(abs(w2 - q) / q, abs(1 - w2))
        tol = CROSS_CHECK_RTOL + 1e-15 / max(float(margin), 1e-15)
        h1 = math.sinh(2 * lam - 2 * u) / math.sinh(2 * u)
        h2 = math.sinh(lam + 2 * u) / math.sinh(lam - 2 * u)
        if abs(h1 - eK1) > tol * max(1.0, abs(eK1)) or abs(h2 - eK2) > tol * max(
            1.0, abs(eK2)
        ):
            raise ArithmeticError("rational and hyperbolic coupling routes disagree")
    x = (w2 - q) / (_sqrt(q) * (1 - w2))
    return CouplingParams(Q=sp.Q, x=x, eK1=eK1, eK2=eK2)


def dual_couplings(K1, K2, Q, swap_rows: bool = True):
    """Duality map on the couplings.

    With ``swap_rows`` (the row-interchange form) the map is
    exp(K1*) = (exp(K2)+Q-1)/(exp(K2)-1), exp(K2*) = (exp(K1)+Q-1)/(exp(K1)-1);
    the self-dual surface x1 x2 = 1 is then pointwise fixed, (K1, K2) ->
    (K1, K2).  Without it each coupling maps to its own bond-local dual,
    and the self-dual point swaps the couplings, (K1, K2) -> (K2, K1).
    Either form is an involution.
    """
    e = math.exp if not _is_mpf(K1) else __import__("mpmath").exp
    eK1, eK2 = e(K1), e(K2)
    if eK1 <= 1 or eK2 <= 1:
        raise DomainError("dual couplings require exp(K) > 1 on both bonds")
    d1 = _log((eK1 + Q - 1) / (eK1 - 1))
    d2 = _log((eK2 + Q - 1) / (eK2 - 1))
    if swap_rows:
        return d2, d1
    return d1, d2


def xi(sp: SpectralParams):
    """xi = -Q (1-w^2)(w^2-q^2)/(w^2-q)^2, negative throughout the strip.

    Equals exp(K2(u)) exp(K2(lam-u)) + Q - 1; the double pole sits at
    u = lam/2 (w^2 = q).
    """
    q, w2 = sp.q, sp.w2
    _check_pole(w2, q, "u=lam/2")
    return -sp.Q * (1 - w2) * (w2 - q * q) / (w2 - q) ** 2


def delta(sp: SpectralParams, cross_check: bool = True):
    """Delta = exp(K2) + Q - 1 = 2 cosh(lam) sinh(2lam-2u)/sinh(lam-2u)."""
    q, w2 = sp.q, sp.w2
    _check_pole(w2, q, "u=lam/2")
    eK2 = (1 / w2) * (1 - q * w2) / (1 - q / w2)
    val = eK2 + sp.Q - 1
    if cross_check:
        lam, u = sp.lam, sp.u
        hyp = 2 * _cosh(lam) * _sinh(2 * lam - 2 * u) / _sinh(lam - 2 * u)
        if abs(hyp - val) > CROSS_CHECK_RTOL * max(1.0, abs(val)):
            raise ArithmeticError("Delta routes disagree beyond 1e-12")
    return val


def inversion_image(sp: SpectralParams) -> SpectralParams:
    """u -> lam - u, i.e. w -> q/w (and s -> q/s on the s-grid)."""
    return SpectralParams(sp.q, sp.q / sp.w)


def rotation_image(sp: SpectralParams) -> SpectralParams:
    """u -> lam/2 - u, i.e. w -> sqrt(q)/w (and s -> 1/s)."""
    return SpectralParams(sp.q, _sqrt(sp.q) / sp.w)


def solve_q_from_Q(Q):
    """Inverse of Q = q + 2 + 1/q on the branch 0 < q < 1 (requires Q > 4)."""
    if Q <= 4:
        raise DomainError(f"Q must exceed 4, got {Q}")
    b = Q - 2
    return (b - _sqrt(b * b - 4)) / 2


@dataclass(frozen=True)
class RationalPoint:
    """An exact parameter point: t and s rational, q = t^4, w^2 = s t^2.

    Used by the exact-arithmetic lattice routes, where every vertex weight
    is a Fraction.
    """

    t: Fraction
    s: Fraction

    def __post_init__(self):
        if not (0 < self.t < 1):
            raise DomainError("t must lie in (0, 1)")
        if self.s <= 0:
            raise DomainError("s must be positive")

    @property
    def q(self) -> Fraction:
        return self.t**4

    @property
    def w2(self) -> Fraction:
        return self.s * self.t**2

    @property
    def sqrt_q(self) -> Fraction:
        return self.t**2

    @property
    def Q(self) -> Fraction:
        return self.q + 2 + 1 / self.q

    @property
    def sqrt_Q(self) -> Fraction:
        return (1 + self.t**4) / self.t**2

    def to_float(self) -> SpectralParams:
        return SpectralParams(float(self.q), math.sqrt(float(self.w2)))
