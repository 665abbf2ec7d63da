"""Exact truncated series in t = q**(1/4) with Laurent-polynomial coefficients in s.

Grading convention: the expansion variable is t with q = t**4 and
w**2 = s*t**2, so every model quantity that is a power series in q at fixed
anisotropy s becomes a series in integer powers of t whose coefficients are
Laurent polynomials in s over exact rationals.  No floats enter anywhere in
this module.

A ``TruncatedSeries`` knows the largest degree it is exact through
(``order``); arithmetic propagates that bound, including the shift that
multiplication by a series of positive minimal degree buys.
"""

from __future__ import annotations

import json
from fractions import Fraction

from .errors import TruncationError

_INF = 10**9  # stand-in for "exact to all orders" bookkeeping


def _rat(x) -> Fraction | int:
    if isinstance(x, (int, Fraction)):
        return x
    raise TypeError(f"exact coefficient expected, got {type(x).__name__}")


class LaurentPolyS:
    """Laurent polynomial in s: sparse map s-exponent -> exact rational.

    Immutable by convention; no stored zero coefficients.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs=None):
        self.c = {e: v for e, v in (coeffs or {}).items() if v != 0}

    @classmethod
    def const(cls, v) -> "LaurentPolyS":
        return cls({0: _rat(v)})

    @classmethod
    def monomial(cls, v, sdeg: int) -> "LaurentPolyS":
        return cls({sdeg: _rat(v)})

    def is_zero(self) -> bool:
        return not self.c

    def is_monomial(self) -> bool:
        return len(self.c) == 1

    def is_const(self) -> bool:
        return not self.c or set(self.c) == {0}

    @property
    def smin(self) -> int:
        return min(self.c)

    @property
    def smax(self) -> int:
        return max(self.c)

    def __eq__(self, other) -> bool:
        if isinstance(other, LaurentPolyS):
            return self.c == other.c
        if isinstance(other, (int, Fraction)):
            return self.c == ({0: other} if other != 0 else {})
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.c.items()))

    def __neg__(self) -> "LaurentPolyS":
        return LaurentPolyS({e: -v for e, v in self.c.items()})

    def __add__(self, other) -> "LaurentPolyS":
        if isinstance(other, (int, Fraction)):
            other = LaurentPolyS.const(other)
        out = dict(self.c)
        for e, v in other.c.items():
            nv = out.get(e, 0) + v
            if nv:
                out[e] = nv
            else:
                out.pop(e, None)
        return LaurentPolyS(out)

    def __sub__(self, other) -> "LaurentPolyS":
        if isinstance(other, (int, Fraction)):
            other = LaurentPolyS.const(other)
        return self + (-other)

    def __mul__(self, other) -> "LaurentPolyS":
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return LaurentPolyS()
            return LaurentPolyS({e: v * other for e, v in self.c.items()})
        out: dict[int, Fraction | int] = {}
        for e1, v1 in self.c.items():
            for e2, v2 in other.c.items():
                e = e1 + e2
                nv = out.get(e, 0) + v1 * v2
                if nv:
                    out[e] = nv
                else:
                    out.pop(e, None)
        return LaurentPolyS(out)

    __rmul__ = __mul__

    def scale(self, v) -> "LaurentPolyS":
        return self * v

    def subst_s_inv(self) -> "LaurentPolyS":
        """The involution s -> 1/s (negates all exponents)."""
        return LaurentPolyS({-e: v for e, v in self.c.items()})

    def eval(self, s):
        """Evaluation at s (exact for int/Fraction s, numeric otherwise)."""
        if isinstance(s, int):
            s = Fraction(s)
        total = 0
        for e, v in self.c.items():
            total += v * s**e
        return total

    def __repr__(self):
        if not self.c:
            return "0"
        parts = []
        for e in sorted(self.c):
            v = self.c[e]
            if e == 0:
                parts.append(f"{v}")
            else:
                parts.append(f"{v}*s^{e}")
        return " + ".join(parts)


class TruncatedSeries:
    """Series in t with LaurentPolyS coefficients, exact through ``order``.

    ``coeffs`` maps t-degree (possibly negative) to a nonzero LaurentPolyS.
    Terms of degree > order are unknown, not zero.
    """

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs=None):
        self.order = order
        cc = {}
        for d, p in (coeffs or {}).items():
            if d > order:
                continue
            if not isinstance(p, LaurentPolyS):
                p = LaurentPolyS.const(p)
            if not p.is_zero():
                cc[d] = p
        self.coeffs = cc

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, order: int) -> "TruncatedSeries":
        return cls(order)

    @classmethod
    def one(cls, order: int) -> "TruncatedSeries":
        return cls(order, {0: LaurentPolyS.const(1)})

    @classmethod
    def term(cls, coeff, tdeg: int = 0, sdeg: int = 0, *, order: int) -> "TruncatedSeries":
        return cls(order, {tdeg: LaurentPolyS.monomial(coeff, sdeg)})

    @classmethod
    def from_terms(cls, terms, *, order: int) -> "TruncatedSeries":
        """terms: iterable of (coeff, tdeg, sdeg)."""
        out = cls.zero(order)
        cc = out.coeffs
        for coeff, td, sd in terms:
            if td > order or coeff == 0:
                continue
            p = cc.get(td)
            mono = LaurentPolyS.monomial(coeff, sd)
            cc[td] = mono if p is None else p + mono
            if cc[td].is_zero():
                del cc[td]
        return out

    # -- structure ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def min_deg(self):
        """Lowest stored degree, or None for the zero series."""
        return min(self.coeffs) if self.coeffs else None

    def coeff(self, tdeg: int) -> LaurentPolyS:
        if tdeg > self.order:
            raise TruncationError(f"degree {tdeg} beyond truncation order {self.order}")
        return self.coeffs.get(tdeg, LaurentPolyS())

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise TruncationError("cannot extend a truncated series")
        return TruncatedSeries(order, {d: p for d, p in self.coeffs.items() if d <= order})

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = TruncatedSeries(self.order, {0: LaurentPolyS.const(other)})
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        t = min(self.order, other.order)
        a = {d: p for d, p in self.coeffs.items() if d <= t}
        b = {d: p for d, p in other.coeffs.items() if d <= t}
        return a == b

    def __hash__(self):
        return hash((self.order, frozenset((d, p) for d, p in self.coeffs.items())))

    # -- ring operations ----------------------------------------------------

    def _effective_min(self) -> int:
        return min(self.coeffs) if self.coeffs else _INF

    def __neg__(self) -> "TruncatedSeries":
        return TruncatedSeries(self.order, {d: -p for d, p in self.coeffs.items()})

    def _coerce(self, other):
        if isinstance(other, (int, Fraction)):
            return TruncatedSeries(self.order, {0: LaurentPolyS.const(other)})
        return other

    def __add__(self, other) -> "TruncatedSeries":
        other = self._coerce(other)
        order = min(self.order, other.order)
        out = {d: p for d, p in self.coeffs.items() if d <= order}
        for d, p in other.coeffs.items():
            if d > order:
                continue
            np_ = out.get(d)
            s = p if np_ is None else np_ + p
            if s.is_zero():
                out.pop(d, None)
            else:
                out[d] = s
        return TruncatedSeries(order, out)

    __radd__ = __add__

    def __sub__(self, other) -> "TruncatedSeries":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "TruncatedSeries":
        return self._coerce(other) - self

    def __mul__(self, other) -> "TruncatedSeries":
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return TruncatedSeries(self.order)
            return TruncatedSeries(self.order, {d: p * other for d, p in self.coeffs.items()})
        order = min(self.order + other._effective_min(), other.order + self._effective_min())
        order = min(order, _INF)
        out: dict[int, LaurentPolyS] = {}
        for d1, p1 in self.coeffs.items():
            for d2, p2 in other.coeffs.items():
                d = d1 + d2
                if d > order:
                    continue
                prod = p1 * p2
                cur = out.get(d)
                s = prod if cur is None else cur + prod
                if s.is_zero():
                    out.pop(d, None)
                else:
                    out[d] = s
        return TruncatedSeries(order, out)

    __rmul__ = __mul__

    def shift(self, tdeg: int, sdeg: int = 0, coeff=1) -> "TruncatedSeries":
        """Multiply by the monomial coeff * s**sdeg * t**tdeg."""
        return TruncatedSeries(
            self.order + tdeg,
            {d + tdeg: p * LaurentPolyS.monomial(coeff, sdeg) for d, p in self.coeffs.items()},
        )

    def reciprocal(self) -> "TruncatedSeries":
        """Multiplicative inverse; leading coefficient must be a monomial in s."""
        if self.is_zero():
            raise TruncationError("zero series has no reciprocal")
        d0 = self.min_deg
        lead = self.coeffs[d0]
        if not lead.is_monomial():
            raise TruncationError(
                "leading coefficient is not a monomial in s; reciprocal leaves the ring"
            )
        (e0, c0), = lead.c.items()
        # self = c0 s^e0 t^d0 (1 + u) with u of positive minimal degree
        g = self.shift(-d0, -e0, Fraction(1, 1) / c0)
        rel_order = g.order
        u = g - 1
        inv = TruncatedSeries.one(rel_order)
        pw = TruncatedSeries.one(rel_order)
        umin = u._effective_min()
        if umin <= 0:
            raise TruncationError("reciprocal: normalized series must start at degree 0")
        k = 1
        while k * umin <= rel_order:
            pw = pw * u
            inv = inv + (pw if k % 2 == 0 else -pw)
            k += 1
        return inv.shift(-d0, -e0, Fraction(1, 1) / c0)

    def __truediv__(self, other) -> "TruncatedSeries":
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        return self * other.reciprocal()

    def pow(self, n: int) -> "TruncatedSeries":
        if n == 0:
            return TruncatedSeries.one(self.order)
        base = self if n > 0 else self.reciprocal()
        n = abs(n)
        out = None
        while n:
            if n & 1:
                out = base if out is None else out * base
            n >>= 1
            if n:
                base = base * base
        return out

    __pow__ = pow

    def log(self) -> "TruncatedSeries":
        """log of a series with constant term exactly 1."""
        if self.coeff(0) != LaurentPolyS.const(1) or (self.min_deg is not None and self.min_deg < 0):
            raise TruncationError("log requires constant term 1 and no negative degrees")
        u = self - 1
        out = TruncatedSeries.zero(self.order)
        pw = TruncatedSeries.one(self.order)
        umin = u._effective_min()
        if umin == _INF:
            return out
        k = 1
        while k * umin <= self.order:
            pw = pw * u
            term = pw * Fraction((-1) ** (k + 1), k)
            out = out + term
            k += 1
        return out

    def exp(self) -> "TruncatedSeries":
        """exp of a series with strictly positive minimal degree."""
        if not self.is_zero() and self.min_deg <= 0:
            raise TruncationError("exp requires strictly positive minimal degree")
        out = TruncatedSeries.one(self.order)
        pw = TruncatedSeries.one(self.order)
        umin = self._effective_min()
        if umin == _INF:
            return out
        fact = 1
        k = 1
        while k * umin <= self.order:
            pw = pw * self
            fact *= k
            out = out + pw * Fraction(1, fact)
            k += 1
        return out

    # -- substitutions and evaluation ---------------------------------------

    def subst_s_inv(self) -> "TruncatedSeries":
        """s -> 1/s on every coefficient (the lattice-rotation image)."""
        return TruncatedSeries(self.order, {d: p.subst_s_inv() for d, p in self.coeffs.items()})

    def eval_s(self, s) -> "TruncatedSeries":
        """Substitute an exact value for s, keeping the t-grading."""
        out = {}
        for d, p in self.coeffs.items():
            v = p.eval(s)
            if v != 0:
                out[d] = LaurentPolyS.const(v)
        return TruncatedSeries(self.order, out)

    def eval(self, t, s):
        """Full evaluation (exact for int/Fraction arguments, numeric else)."""
        if isinstance(t, int):
            t = Fraction(t)
        total = 0
        for d, p in self.coeffs.items():
            total += p.eval(s) * t**d
        return total

    def s_free(self) -> bool:
        return all(p.is_const() for p in self.coeffs.values())

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        terms = []
        for d in sorted(self.coeffs):
            p = self.coeffs[d]
            sterms = []
            for e in sorted(p.c):
                v = Fraction(p.c[e])
                sterms.append({"sdeg": e, "num": str(v.numerator), "den": str(v.denominator)})
            terms.append({"tdeg": d, "s_terms": sterms})
        return {"var": "q^(1/4)", "order": self.order, "terms": terms}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, d: dict) -> "TruncatedSeries":
        if d.get("var") != "q^(1/4)":
            raise ValueError("unknown series variable tag")
        coeffs = {}
        for term in d["terms"]:
            p = {}
            for st in term["s_terms"]:
                v = Fraction(int(st["num"]), int(st["den"]))
                p[st["sdeg"]] = int(v) if v.denominator == 1 else v
            coeffs[term["tdeg"]] = LaurentPolyS(p)
        return cls(d["order"], coeffs)

    @classmethod
    def from_json(cls, s: str) -> "TruncatedSeries":
        return cls.from_json_dict(json.loads(s))

    def __repr__(self):
        if self.is_zero():
            return f"O(t^{self.order + 1})"
        parts = [f"({self.coeffs[d]})*t^{d}" for d in sorted(self.coeffs)]
        return " + ".join(parts) + f" + O(t^{self.order + 1})"


DEFAULT_ORDER = 36  # t^36 = q^9


def log1p_series(a: TruncatedSeries) -> TruncatedSeries:
    """log(1 + a) for a series ``a`` of strictly positive minimal degree."""
    if not a.is_zero() and a.min_deg <= 0:
        raise TruncationError("log1p requires strictly positive minimal degree")
    return (TruncatedSeries.one(a.order) + a).log()


def exp_series(a: TruncatedSeries) -> TruncatedSeries:
    """exp(a) for a series ``a`` of strictly positive minimal degree."""
    return a.exp()


def expand_product(factors, order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Expand a finite-by-truncation infinite product.

    Each factor is (coeff, sdeg, t0deg, tstep, expo) and contributes

        prod_{k>=0} (1 - coeff * s**sdeg * t**(t0deg + tstep*k)) ** expo

    Only the finitely many k with t0deg + tstep*k <= order matter.  A factor
    whose k=0 monomial has t-degree <= 0, or with tstep <= 0, cannot truncate
    and is rejected.
    """
    out = TruncatedSeries.one(order)
    for coeff, sdeg, t0, tstep, expo in factors:
        if t0 <= 0 or tstep <= 0:
            raise TruncationError("non-truncating product factor (t-degree <= 0)")
        k = 0
        while t0 + tstep * k <= order:
            base = TruncatedSeries.one(order) - TruncatedSeries.term(
                coeff, t0 + tstep * k, sdeg, order=order
            )
            out = out * base.pow(expo)
            k += 1
    return out


def lambert_sum(numer, denom_tstep: int, denom_sign: int, order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Exact expansion of sums of the recurring Lambert type.

        sum_{n>=1} ( sum_j c_j * s**(sstep_j*n) * t**(tstep_j*n) )
                   / ( n * (1 + denom_sign * t**(denom_tstep*n)) )

    ``numer`` is a list of (c_j, tstep_j, sstep_j); every tstep_j must be
    positive so the n-sum truncates.  In q/w notation a numerator monomial
    q**(a n) w**(2 b n) has tstep = 4a + 2b and sstep = b.
    """
    if denom_sign not in (1, -1):
        raise ValueError("denom_sign must be +1 or -1")
    if denom_tstep <= 0:
        raise TruncationError("denominator power must carry positive t-degree")
    terms = []
    for c, tstep, sstep in numer:
        if c == 0:
            continue
        if tstep <= 0:
            raise TruncationError("numerator term with nonpositive t-degree; sum does not truncate")
        terms.append((c, tstep, sstep))
    out = TruncatedSeries.zero(order)
    if not terms:
        return out
    acc: list[tuple] = []
    n = 1
    while any(tstep * n <= order for _, tstep, _ in terms):
        for c, tstep, sstep in terms:
            base = tstep * n
            if base > order:
                continue
            m = 0
            while base + denom_tstep * n * m <= order:
                coeff = Fraction(c, n) * (-denom_sign) ** m
                acc.append((coeff, base + denom_tstep * n * m, sstep * n))
                m += 1
        n += 1
    return TruncatedSeries.from_terms(acc, order=order)


def geometric_inverse(coeff, tdeg: int, sdeg: int, order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """1 / (1 - coeff * s**sdeg * t**tdeg) expanded directly (tdeg > 0)."""
    if tdeg <= 0:
        raise TruncationError("geometric inverse needs positive t-degree")
    terms = []
    k = 0
    c = 1
    while tdeg * k <= order:
        terms.append((c, tdeg * k, sdeg * k))
        k += 1
        c = c * coeff
    return TruncatedSeries.from_terms(terms, order=order)


def log_geometric_inverse(coeff, tdeg: int, sdeg: int, order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """log(1 / (1 - coeff * s**sdeg * t**tdeg)) = sum_k (coeff*s^sdeg*t^tdeg)^k / k."""
    if tdeg <= 0:
        raise TruncationError("needs positive t-degree")
    terms = []
    k = 1
    c = coeff
    while tdeg * k <= order:
        terms.append((Fraction(1, k) * c if not isinstance(c, int) else Fraction(c, k), tdeg * k, sdeg * k))
        k += 1
        c = c * coeff
    return TruncatedSeries.from_terms(terms, order=order)
