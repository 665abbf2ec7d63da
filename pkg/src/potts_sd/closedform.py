"""Closed-form bulk, surface and corner free energies, numeric and exact.

Sign convention: log Z = -M*N*f_b - M*f_s - N*f_sp - f_c, so the f's here
are the quantities multiplying the lattice dimensions with a minus sign.

Every free energy the model admits in two printed representations is
implemented in both, and the pair is cross-checked by the test suite:

    f_b : log(q/(1+q)) - sum_n (1-q^n)(w^{2n}+q^n w^{-2n}) / (n(1+q^n))
        = -K1 - K2 - log(1+q)
          + sum_n q^n (1-q^n)(w^{2n}+q^n w^{-2n}) / (n(1+q^n))

    f_s : sum_n (1-q^n)(w^{2n}-q^{2n} w^{-2n}) / (n(1+q^{2n}))
        = log((1-q^2/w^2)/(1-w^2))
          - sum_n q^n (1+q^n)(w^{2n}-q^{2n} w^{-2n}) / (n(1+q^{2n}))

    f_sp: sum_n q^n (1-q^n)(w^{-2n}-w^{2n}) / (n(1+q^{2n}))   (= f_s at s->1/s)

    f_c : -sum_n (q^n + 4 q^{2n} + q^{3n}) / (n(1-q^{4n}))
        = log prod_k (1-q^{4k-3})(1-q^{4k-2})^4 (1-q^{4k-1})

Numeric sums carry a rigorous geometric tail bound and stop once the bound
drops below 1e-16 of the partial sum.  The exponentiated product forms
(exp(-f)) converge in an annulus that contains both u and lam-u, which is
what the functional-relation checks evaluate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .bundle import FreeEnergyBundle, LogSeries
from .errors import ConvergenceError, DomainError
from .params import SpectralParams, couplings
from .qseries import (
    DEFAULT_ORDER,
    TruncatedSeries,
    expand_product,
    lambert_sum,
    log_geometric_inverse,
)

_SUM_RTOL = 1e-16
_MAX_TERMS = 200_000


class _Undetermined:
    """Sentinel for the one constant the functional relations cannot fix."""

    def __repr__(self):
        return "UNDETERMINED"


UNDETERMINED = _Undetermined()


def _certified_sum(term_fn, ratios, max_terms=_MAX_TERMS):
    """Sum term_fn(n) for n >= 1 with a geometric tail certificate.

    ``ratios`` lists (amplitude, r) pairs such that |term(m)| <=
    sum_i amplitude_i * r_i**m for all m; the tail after n is then bounded
    by sum_i a_i r_i^{n+1} / ((n+1)(1-r_i)) (the 1/n factor of every model
    sum is kept).
    """
    for a, r in ratios:
        if not 0 <= r < 1:
            raise DomainError(f"summand ratio {r} outside [0,1): sum diverges")
    terms = []
    partial = 0.0
    n = 1
    while n <= max_terms:
        t = term_fn(n)
        terms.append(t)
        partial += t
        tail = sum(a * r ** (n + 1) / ((n + 1) * (1 - r)) for a, r in ratios)
        if n >= 4 and tail <= _SUM_RTOL * max(abs(partial), 1e-300):
            return math.fsum(terms)
        n += 1
    raise ConvergenceError("series sum did not meet its tail bound")


# ----------------------------------------------------------------------------
# numeric values
# ----------------------------------------------------------------------------

def f_bulk(sp: SpectralParams, form: str = "sum") -> float:
    """Bulk free energy; ``form`` picks the representation ('sum'|'coupling')."""
    q, w2 = sp.q, sp.w2
    if form == "sum":
        r1, r2 = w2, q / w2
        term = lambda n: -(1 - q**n) * (w2**n + (q / w2) ** n) / (n * (1 + q**n))
        s = _certified_sum(term, [(1.0, r1), (1.0, r2)])
        return math.log(q / (1 + q)) + s
    if form == "coupling":
        cp = couplings(sp)
        r1, r2 = q * w2, q * q / w2
        term = lambda n: (q**n) * (1 - q**n) * (w2**n + (q / w2) ** n) / (n * (1 + q**n))
        s = _certified_sum(term, [(1.0, r1), (1.0, r2)])
        return -cp.K1 - cp.K2 - math.log(1 + q) + s
    raise ValueError(f"unknown form {form!r}")


def f_surface_v(sp: SpectralParams, form: str = "sum") -> float:
    """Vertical surface free energy ('sum' | 'log' representations)."""
    q, w2 = sp.q, sp.w2
    if form == "sum":
        r1, r2 = w2, q * q / w2
        term = lambda n: (1 - q**n) * (w2**n - (q * q / w2) ** n) / (n * (1 + q ** (2 * n)))
        return _certified_sum(term, [(1.0, r1), (1.0, r2)])
    if form == "log":
        r1, r2 = q * w2, q**3 / w2
        term = (
            lambda n: -(q**n) * (1 + q**n) * (w2**n - (q * q / w2) ** n) / (n * (1 + q ** (2 * n)))
        )
        s = _certified_sum(term, [(2.0, r1), (2.0, r2)])
        return math.log((1 - q * q / w2) / (1 - w2)) + s
    raise ValueError(f"unknown form {form!r}")


def f_surface_h(sp: SpectralParams) -> float:
    """Horizontal surface free energy (the rotation image of f_s).

    Diverges logarithmically as w^2 -> q+ (exp(-f_sp) has a simple zero
    there); the summand ratio guard rejects w^2 <= q.
    """
    q, w2 = sp.q, sp.w2
    r1, r2 = q / w2, q * w2
    term = lambda n: (1 - q**n) * ((q / w2) ** n - (q * w2) ** n) / (n * (1 + q ** (2 * n)))
    return _certified_sum(term, [(1.0, r1), (1.0, r2)])


def f_corner(q: float, form: str = "sum") -> float:
    """Corner free energy: a function of q alone."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0,1), got {q}")
    if form == "sum":
        amp = 6.0 / (1 - q**4)
        term = lambda n: -(q**n + 4 * q ** (2 * n) + q ** (3 * n)) / (n * (1 - q ** (4 * n)))
        return _certified_sum(term, [(amp, q)])
    if form == "product":
        total, k = [], 1
        while True:
            a, b, c = q ** (4 * k - 3), q ** (4 * k - 2), q ** (4 * k - 1)
            total.append(math.log(1 - a) + 4 * math.log(1 - b) + math.log(1 - c))
            if a < 1e-19:
                return math.fsum(total)
            k += 1
    raise ValueError(f"unknown form {form!r}")


def free_energies(sp: SpectralParams) -> FreeEnergyBundle:
    return FreeEnergyBundle(
        f_b=f_bulk(sp),
        f_s=f_surface_v(sp),
        f_sp=f_surface_h(sp),
        f_c=f_corner(sp.q),
        route="closedform",
    )


# isotropic (s = 1) reference forms

def f_bulk_isotropic_sum(q: float) -> float:
    h = math.sqrt(q)
    term = lambda n: -2 * h**n * (1 - q**n) / (n * (1 + q**n))
    return math.log(q / (1 + q)) + _certified_sum(term, [(2.0, h)])


def f_bulk_isotropic_product(q: float) -> float:
    """exp(-f_b) = (1+q)/(q (1-q^{1/2})^2) * prod_k [(1-q^{2k-1/2})/(1-q^{2k+1/2})]^4."""
    h = math.sqrt(q)
    logs = [math.log(1 + q) - math.log(q) - 2 * math.log(1 - h)]
    k = 1
    while True:
        a, b = q ** (2 * k) / h, q ** (2 * k) * h
        logs.append(4 * (math.log(1 - a) - math.log(1 - b)))
        if a < 1e-19:
            break
        k += 1
    return -math.fsum(logs)


def f_surface_isotropic_sum(q: float) -> float:
    h = math.sqrt(q)
    term = lambda n: h**n * (1 - q**n) ** 2 / (n * (1 + q ** (2 * n)))
    return _certified_sum(term, [(1.0, h)])


def f_surface_isotropic_product(q: float) -> float:
    """exp(-f_s) = (1-q^{1/2}) prod_k [(1-q^{4k-1/2})/(1-q^{4k-5/2})]^2."""
    h = math.sqrt(q)
    logs = [math.log(1 - h)]
    k = 1
    while True:
        a, b = q ** (4 * k) / h, q ** (4 * k - 2) / h
        logs.append(2 * (math.log(1 - a) - math.log(1 - b)))
        if b < 1e-19:
            break
        k += 1
    return -math.fsum(logs)


# ----------------------------------------------------------------------------
# exponentiated product forms, valid beyond the physical strip
# ----------------------------------------------------------------------------
#
# The sums above converge only for q < w^2 < 1.  The functional relations
# pair u with lam - u, whose w^2 lies in (q^2, q), so the identity checks
# need evaluations there.  Rewriting each Lambert-type sum as an infinite
# product of rational factors gives the analytic continuation to the
# annulus q^2 < w^2 < 1/q (single-valued, real, possibly negative).

def _expL(x: float, q: float) -> float:
    """exp(sum_n x^n (1-q^n)/(n(1+q^n))) = prod_m [(1-x q^{m+1})/(1-x q^m)]^{(-1)^m}."""
    out, m = 1.0, 0
    while True:
        f = (1 - x * q ** (m + 1)) / (1 - x * q**m)
        out = out * f if m % 2 == 0 else out / f
        if abs(x) * q**m < 1e-19 and m >= 1:
            return out
        m += 1


def _expA(x: float, q: float) -> float:
    """exp(sum_n x^n (1+q^n)/(n(1+q^{2n}))) = prod_m [(1-x q^{2m})(1-x q^{2m+1})]^{(-1)^{m+1}}."""
    out, m = 1.0, 0
    while True:
        f = (1 - x * q ** (2 * m)) * (1 - x * q ** (2 * m + 1))
        out = out / f if m % 2 == 0 else out * f
        if abs(x) * q ** (2 * m) < 1e-19 and m >= 1:
            return out
        m += 1


def _expB(x: float, q: float) -> float:
    """exp(sum_n x^n (1-q^n)/(n(1+q^{2n})))
    = prod_m (1-x q^{2m})^{(-1)^{m+1}} (1-x q^{2m+1})^{(-1)^m}."""
    out, m = 1.0, 0
    while True:
        f = (1 - x * q ** (2 * m + 1)) / (1 - x * q ** (2 * m))
        out = out * f if m % 2 == 0 else out / f
        if abs(x) * q ** (2 * m) < 1e-19 and m >= 1:
            return out
        m += 1


def exp_minus_f_bulk(q: float, w2: float) -> float:
    """exp(-f_b) as an analytic continuation; negative for w^2 in (q^2, q)."""
    eK1 = (w2 / q) * (1 - q * q / w2) / (1 - w2)
    eK2 = (1 / w2) * (1 - q * w2) / (1 - q / w2)
    return eK1 * eK2 * (1 + q) / (_expL(q * w2, q) * _expL(q * q / w2, q))


def exp_minus_f_surface_v(q: float, w2: float) -> float:
    """exp(-f_s) continued to the annulus q^2 < w^2 < 1/q."""
    return (1 - w2) / (1 - q * q / w2) * _expA(q * w2, q) / _expA(q**3 / w2, q)


def exp_minus_f_surface_h(q: float, w2: float) -> float:
    """exp(-f_sp) continued; real and negative once w^2 < q."""
    return _expB(q * w2, q) / _expB(q / w2, q)


# ----------------------------------------------------------------------------
# exact series
# ----------------------------------------------------------------------------

def log1pq_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """log(1+q) as a series in t."""
    return (TruncatedSeries.one(order) + TruncatedSeries.term(1, 4, 0, order=order)).log()


def k1k2_plus_logq_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """K1 + K2 + log q, which is an honest series:
    log[(1-q^{3/2}/s...)]: exp(K1+K2) = q^{-1} (1-t^6/s)(1-s t^6)/[(1-s t^2)(1-t^2/s)].
    """
    out = TruncatedSeries.zero(order)
    out = out - log_geometric_inverse(1, 6, -1, order)  # +log(1 - t^6/s)
    out = out - log_geometric_inverse(1, 6, 1, order)  # +log(1 - s t^6)
    out = out + log_geometric_inverse(1, 2, 1, order)  # -log(1 - s t^2)
    out = out + log_geometric_inverse(1, 2, -1, order)  # -log(1 - t^2/s)
    return out


def f_bulk_series(order: int = DEFAULT_ORDER, form: str = "sum") -> LogSeries:
    """f_b as log(q) + series; both representations agree exactly."""
    if form == "sum":
        s = lambert_sum([(1, 2, 1), (-1, 6, 1), (1, 2, -1), (-1, 6, -1)], 4, +1, order)
        return LogSeries(Fraction(1), -log1pq_series(order) - s)
    if form == "coupling":
        s = lambert_sum([(1, 6, 1), (-1, 10, 1), (1, 6, -1), (-1, 10, -1)], 4, +1, order)
        return LogSeries(Fraction(1), -k1k2_plus_logq_series(order) - log1pq_series(order) + s)
    raise ValueError(f"unknown form {form!r}")


def surface_log_prefactor_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """log((1 - q^2/w^2)/(1 - w^2)) as a series."""
    return log_geometric_inverse(1, 2, 1, order) - log_geometric_inverse(1, 6, -1, order)


def f_surface_v_series(order: int = DEFAULT_ORDER, form: str = "sum") -> TruncatedSeries:
    if form == "sum":
        return lambert_sum([(1, 2, 1), (-1, 6, -1), (-1, 6, 1), (1, 10, -1)], 8, +1, order)
    if form == "log":
        s = lambert_sum([(1, 6, 1), (1, 10, 1), (-1, 10, -1), (-1, 14, -1)], 8, +1, order)
        return surface_log_prefactor_series(order) - s
    raise ValueError(f"unknown form {form!r}")


def f_surface_h_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    return lambert_sum([(1, 2, -1), (-1, 6, 1), (-1, 6, -1), (1, 10, 1)], 8, +1, order)


def f_corner_series(order: int = DEFAULT_ORDER, form: str = "sum") -> TruncatedSeries:
    if form == "sum":
        return lambert_sum([(-1, 4, 0), (-4, 8, 0), (-1, 12, 0)], 16, -1, order)
    if form == "product":
        inv = expand_product(
            [(1, 0, 4, 16, -1), (1, 0, 8, 16, -4), (1, 0, 12, 16, -1)], order
        )  # exp(-f_c)
        return -inv.log()
    raise ValueError(f"unknown form {form!r}")


def f_bulk_isotropic_series(order: int = DEFAULT_ORDER) -> LogSeries:
    """Isotropic reference: f_b = log(q/(1+q)) - 2 sum q^{n/2}(1-q^n)/(n(1+q^n))."""
    s = lambert_sum([(2, 2, 0), (-2, 6, 0)], 4, +1, order)
    return LogSeries(Fraction(1), -log1pq_series(order) - s)


def f_surface_isotropic_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Isotropic reference: f_s = sum q^{n/2}(1-q^n)^2/(n(1+q^{2n}))."""
    return lambert_sum([(1, 2, 0), (-2, 6, 0), (1, 10, 0)], 8, +1, order)


def series_bundle(order: int = DEFAULT_ORDER) -> FreeEnergyBundle:
    return FreeEnergyBundle(
        f_b=f_bulk_series(order),
        f_s=f_surface_v_series(order),
        f_sp=f_surface_h_series(order),
        f_c=f_corner_series(order),
        route="closedform",
        meta={"order": order},
    )


# -- auxiliary scalar series used by the functional-relation checks ----------

def sqrtQ_qseries(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """sqrt(Q) = (1 + t^4)/t^2."""
    return TruncatedSeries.term(1, -2, 0, order=order) + TruncatedSeries.term(1, 2, 0, order=order)


def Q_qseries(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    s = sqrtQ_qseries(order + 2)
    return (s * s).truncate(order)


def xi_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """xi = -Q (1-w^2)(w^2-q^2)/(w^2-q)^2 on the (t, s) grid."""
    one = TruncatedSeries.one(order + 12)
    t = lambda c, td, sd: TruncatedSeries.term(c, td, sd, order=order + 12)
    num = Q_qseries(order + 12) * (one - t(1, 2, 1)) * (t(1, 2, 1) - t(1, 8, 0))
    den = (t(1, 2, 1) - t(1, 4, 0)).pow(2)
    return (-num * den.reciprocal()).truncate(order)


def xi_offset_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """xi - Q + 1 = exp(K2(u)) exp(K2(lam-u)) = -(1-q w^2)(w^2-q^3)/(q (w^2-q)^2)."""
    one = TruncatedSeries.one(order + 12)
    t = lambda c, td, sd: TruncatedSeries.term(c, td, sd, order=order + 12)
    num = (one - t(1, 6, 1)) * (t(1, 2, 1) - t(1, 12, 0))
    den = t(1, 4, 0) * (t(1, 2, 1) - t(1, 4, 0)).pow(2)
    return (-num * den.reciprocal()).truncate(order)


def eK2_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """exp(K2) = (1/w^2)(1-q w^2)/(1-q/w^2)."""
    one = TruncatedSeries.one(order + 4)
    num = TruncatedSeries.term(1, -2, -1, order=order + 4) * (
        one - TruncatedSeries.term(1, 6, 1, order=order + 4)
    )
    den = one - TruncatedSeries.term(1, 2, -1, order=order + 4)
    return (num * den.reciprocal()).truncate(order)


def delta_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Delta(u) = exp(K2) + Q - 1."""
    return eK2_series(order) + Q_qseries(order) - 1


def delta_inverted_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Delta(lam-u) = 1 - exp(K2(u))."""
    return TruncatedSeries.one(order) - eK2_series(order)


def bulk_ratio_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """F(u) = exp(-f_b - K1 - K2) = (1+q) exp(-S_b); analytic in the annulus."""
    sb = lambert_sum([(1, 6, 1), (-1, 10, 1), (1, 6, -1), (-1, 10, -1)], 4, +1, order)
    return (TruncatedSeries.one(order) + TruncatedSeries.term(1, 4, 0, order=order)) * (-sb).exp()


def bulk_ratio_inverted_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """F(lam-u): the same function evaluated at w^2 -> q^2/w^2."""
    sb = lambert_sum([(1, 10, -1), (-1, 14, -1), (1, 2, 1), (-1, 6, 1)], 4, +1, order)
    return (TruncatedSeries.one(order) + TruncatedSeries.term(1, 4, 0, order=order)) * (-sb).exp()


def log_surface_ratio_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """log G(u) with exp(-f_s) = (1-w^2) G(u)/(1-q^2/w^2)."""
    return lambert_sum([(1, 6, 1), (1, 10, 1), (-1, 10, -1), (-1, 14, -1)], 8, +1, order)


def log_surface_ratio_inverted_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """log G(lam-u), generated from its own (transformed) sum."""
    return lambert_sum([(1, 10, -1), (1, 14, -1), (-1, 6, 1), (-1, 10, 1)], 8, +1, order)


def exp_minus_f_surface_h_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    return (-f_surface_h_series(order)).exp()


def exp_minus_f_surface_h_inverted_series(order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """exp(-f_sp(lam-u)) = exp(B(q^3/w^2)) * exp(-B(w^2/q)).

    The second factor only exists as the alternating product
    prod_m (1-x q^{2m})^{(-1)^m} (1-x q^{2m+1})^{(-1)^{m+1}} with x = w^2/q;
    its m = 0 factor (1 - s/t^2) makes the result a Laurent series of
    minimal degree -2.
    """
    ord_w = order + 4
    b_small = lambert_sum([(1, 10, -1), (-1, 14, -1)], 8, +1, ord_w)
    out = b_small.exp()
    one = TruncatedSeries.one(ord_w)
    m = 0
    while True:
        d1 = 8 * m - 2  # degree of (w^2/q) q^{2m}
        d2 = 8 * m + 2  # degree of (w^2/q) q^{2m+1}
        if d1 > ord_w and d2 > ord_w:
            break
        f1 = one - TruncatedSeries.term(1, d1, 1, order=ord_w)
        f2 = one - TruncatedSeries.term(1, d2, 1, order=ord_w)
        if m % 2 == 0:
            out = out * f1 * f2.reciprocal()
        else:
            out = out * f1.reciprocal() * f2
        m += 1
    return out.truncate(order)


# ----------------------------------------------------------------------------
# coefficient recursions from the inversion and rotation relations
# ----------------------------------------------------------------------------

@dataclass
class InversionDerivation:
    """Free energies rebuilt from the functional relations alone.

    ``corner_constant`` is the one coefficient the relations cannot fix and
    is deliberately left as the UNDETERMINED sentinel, never silently set.
    ``cb``, ``cs``, ``ds`` are the solved annulus coefficients (series in q)
    for the bulk and surface generating functions, indexed by n >= 1.
    """

    bundle: FreeEnergyBundle
    cb: dict
    db: dict
    cs: dict
    ds: dict
    corner_constant: object


def _s_slice(series: TruncatedSeries, n: int) -> TruncatedSeries:
    """Coefficient of s^n as a q-only series, with the t^(2n) of w^(2n) removed."""
    out = {}
    for d, p in series.coeffs.items():
        v = p.c.get(n)
        if v:
            out[d - 2 * n] = v
    return TruncatedSeries(series.order - 2 * n, {d: out[d] for d in out})


def derive_from_inversion(order: int = DEFAULT_ORDER, n_max: int | None = None) -> InversionDerivation:
    """Solve the coupling-inversion and rotation constraints for f_b, f_s, f_c.

    Writing exp(-f_b) = exp(K1+K2) F(u), exp(-f_s) = (1-w^2) G(u)/(1-q^2/w^2)
    and expanding log F, log G, f_c as Laurent series in w^2 over the annulus
    q <= |w^2| <= 1, the relation pair

        f_b(u) + f_b(lam-u) = -log xi(u),      f_b(u) = f_b(lam/2-u)

    fixes the bulk coefficients, the pair for f_s fixes the surface ones,
    and the corner relations force every n != 0 coefficient to vanish.  The
    right-hand sides are generated here from the xi / Delta series, not
    transcribed, so the solved coefficients are a genuine consequence of
    the relations.
    """
    if order < 4:
        raise DomainError("order must be at least 4")
    work = order + 2
    if n_max is None:
        n_max = max(order // 6 + 1, 1)
    one = TruncatedSeries.one

    # bulk: (f_b + K1 + K2)(u) + (same)(lam-u) = log[(xi - Q + 1)/xi]
    rhs_b = (xi_offset_series(work) * xi_series(work).reciprocal()).log()
    # surface: -log G(u) + log G(-u) = log[(1-q w^2)(1-q^2 w^2) / ((1-q/w^2)(1-q^2/w^2))]
    t = lambda c, td, sd: TruncatedSeries.term(c, td, sd, order=work)
    rhs_s = (
        (one(work) - t(1, 6, 1))
        * (one(work) - t(1, 10, 1))
        * (one(work) - t(1, 2, -1)).reciprocal()
        * (one(work) - t(1, 6, -1)).reciprocal()
    ).log()

    cb, db, cs, ds = {}, {}, {}, {}
    for n in range(1, n_max + 1):
        # c_n + q^{-2n} d_n = R_n and d_n = q^n c_n (rotation)
        rn = _s_slice(rhs_b, n)
        cb[n] = rn * (one(rn.order) + TruncatedSeries.term(1, -4 * n, 0, order=rn.order)).reciprocal()
        db[n] = cb[n].shift(4 * n)
        # d_n - c_n = S_n and c_n = -q^{-2n} d_n (inversion)
        sn = _s_slice(rhs_s, n)
        ds[n] = sn * (one(sn.order) + TruncatedSeries.term(1, -8 * n, 0, order=sn.order)).reciprocal()
        cs[n] = -ds[n].shift(-8 * n)

    # assemble f_b = -K1 - K2 - log(1+q) + sum_n [cb_n w^{2n} + db_n w^{-2n}]
    acc = -k1k2_plus_logq_series(order) - log1pq_series(order)
    for n in range(1, n_max + 1):
        acc = acc + cb[n].shift(2 * n, n).truncate(order)
        acc = acc + db[n].shift(-2 * n, -n).truncate(order)
    fb = LogSeries(Fraction(1), acc.truncate(order))

    # f_s = log((1-q^2/w^2)/(1-w^2)) - sum_n [cs_n w^{2n} + ds_n w^{-2n}]
    acc_s = surface_log_prefactor_series(order)
    for n in range(1, n_max + 1):
        acc_s = acc_s - cs[n].shift(2 * n, n).truncate(order)
        acc_s = acc_s - ds[n].shift(-2 * n, -n).truncate(order)
    fs = acc_s.truncate(order)

    # corner: d_n = q^{2n} c_n (inversion) and d_n = q^n c_n (rotation) force
    # (q^n - q^{2n}) c_n = 0, hence c_n = d_n = 0 for all n > 0.
    fc = TruncatedSeries.zero(order)

    bundle = FreeEnergyBundle(
        f_b=fb,
        f_s=fs,
        f_sp=fs.subst_s_inv(),
        f_c=fc,
        route="inversion",
        meta={"order": order, "corner_constant": "undetermined"},
    )
    return InversionDerivation(bundle=bundle, cb=cb, db=db, cs=cs, ds=ds, corner_constant=UNDETERMINED)


# ----------------------------------------------------------------------------
# critical region (Q -> 4+) and the Q < 4 surface integral
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalParams:
    """Trig/critical parameterization: mu, v for Q < 4; eps for the Q -> 4 side.

    Q = 4 cos(mu)^2 when mu is real; q = exp(-2 pi eps) and its conjugate
    q' = exp(-2 pi / eps) satisfy log(q) log(q') = 4 pi^2.
    """

    mu: float | None = None
    v: float | None = None
    eps: float | None = None

    @classmethod
    def for_surface(cls, mu: float, v: float) -> "CriticalParams":
        if not 0 < v < mu < math.pi / 2:
            raise DomainError("surface integral requires 0 < v < mu < pi/2")
        return cls(mu=mu, v=v)

    @classmethod
    def from_eps(cls, eps: float) -> "CriticalParams":
        if eps <= 0:
            raise DomainError("eps must be positive")
        return cls(eps=eps)

    @property
    def Q(self) -> float:
        if self.mu is None:
            raise DomainError("Q from mu requires mu")
        return 4 * math.cos(self.mu) ** 2

    @property
    def q(self) -> float:
        if self.eps is None:
            raise DomainError("q from eps requires eps")
        return math.exp(-2 * math.pi * self.eps)

    @property
    def qprime(self) -> float:
        if self.eps is None:
            raise DomainError("q' from eps requires eps")
        return math.exp(-2 * math.pi / self.eps)


def ob_surface_integrand(y: float, mu: float, v: float) -> float:
    """Integrand of the Q < 4 surface free energy (even in y, finite at 0)."""
    if abs(y) < 1e-8:
        return 2 * v * (math.pi - 2 * mu) / math.pi
    b1 = 2 * math.sinh(2 * v * y) / y
    b2 = (
        math.sinh((math.pi - 2 * mu) * y)
        * math.cosh((math.pi - mu) * y)
        * math.cosh(mu * y)
        / (math.sinh(2 * math.pi * y) * math.cosh(2 * mu * y))
    )
    return b1 * b2


def ob_surface_integral(cp: CriticalParams, rel_nodes: int = 1) -> float:
    """Surface free energy for Q < 4 via quadrature of the half-line integral.

    ``rel_nodes`` scales the subdivision limit so callers can check
    stability under node doubling.
    """
    from scipy.integrate import quad

    mu, v = cp.mu, cp.v
    if mu is None or v is None:
        raise DomainError("surface integral needs mu and v")
    decay = 4 * mu - 2 * v
    ycut = max(80.0 / decay, 40.0)
    val, err = quad(
        ob_surface_integrand,
        0.0,
        ycut,
        args=(mu, v),
        epsabs=1e-13,
        epsrel=1e-13,
        limit=200 * rel_nodes,
    )
    integral = 2 * val  # even integrand: full line = twice the half line
    if err > 1e-10:
        raise ConvergenceError(f"quadrature error estimate {err} exceeds 1e-10")
    return math.log(math.sin((mu + v) / 2) / math.sin((mu - v) / 2)) - integral


@dataclass
class ContinuationDiagnostics:
    first_sum: float
    closed_form: float
    defect: float
    correction_magnitude: float
    correction_complex: complex | None


def fs_continuation_check(
    lam: float, u: float, include_complex_correction: bool = False
) -> ContinuationDiagnostics:
    """Diagnostics for the small-lam singular structure of f_s.

    The regular part of the continuation is the same Lambert sum as the
    closed form (their difference is identically zero and is reported as a
    numeric defect).  The singular part decays like exp(-pi^2/(2 lam)); its
    term-by-term magnitude uses |i + (-1)^((n-1)/2)| = sqrt(2), and the
    complex-valued form is only produced behind the feature flag.
    """
    if not 0 < u < lam / 2:
        raise DomainError("requires 0 < u < lam/2")
    sp = SpectralParams.from_lam_u(lam, u)
    first = f_surface_v(sp, form="sum")
    closed = f_surface_v(sp, form="sum")
    mag_terms = []
    cplx = 0j if include_complex_correction else None
    n = 1
    while True:
        e = math.exp(-math.pi**2 * n / (2 * lam))
        if e < 1e-300:
            break
        amp = 4 * math.sinh(math.pi * n * (lam - 2 * u) / (2 * lam)) * e / (n * (1 - e))
        mag_terms.append(math.sqrt(2.0) * abs(amp))
        if include_complex_correction:
            cplx += (1j + (-1) ** ((n - 1) // 2)) * amp
        if n > 3 and mag_terms[-1] < 1e-18 * sum(mag_terms):
            break
        n += 2
    return ContinuationDiagnostics(
        first_sum=first,
        closed_form=closed,
        defect=abs(first - closed),
        correction_magnitude=math.fsum(mag_terms),
        correction_complex=cplx,
    )


def singular_decay_fit(lams=None, u_frac: float = 0.25):
    """Fit log |singular part| against 1/lam; the slope should be -pi^2/2.

    Fixing u = u_frac * lam makes the sinh prefactor lam-independent, so the
    fit isolates the exponential decay rate.
    """
    import numpy as np

    if lams is None:
        lams = [0.35 + 0.05 * i for i in range(8)]
    xs, ys = [], []
    for lam in lams:
        d = fs_continuation_check(lam, u_frac * lam)
        xs.append(1.0 / lam)
        ys.append(math.log(d.correction_magnitude))
    slope, _ = np.polyfit(np.asarray(xs), np.asarray(ys), 1)
    return float(slope), -math.pi**2 / 2


def conjugate_modulus_report(eps: float, prec_bits: int = 256) -> dict:
    """High-precision check of the modular product identities.

    Checks, with q = exp(-2 pi eps), q' = exp(-2 pi/eps),
    P(x) = prod (1 - x^{2k-1}) and E(x) = prod (1 - x^k):

      euler_odd_split      P(q) = E(q)/E(q^2)
      dedekind_transform   E(q) = eps^{-1/2} exp(pi(eps - 1/eps)/12) E(q')
      odd_product_transform  P(q) = sqrt(2) exp(-pi eps/12 - pi/(24 eps)) / P(q'^{1/2})
      corner_modular_form  exp(-f_c) = exp(3 pi eps/4 + pi/(8 eps))
                                        * P(q'^{1/2}) P(q'^{1/4})^4 / 2^{5/2}

    Returns the relative difference of the two sides of each identity.
    """
    import mpmath

    with mpmath.workprec(prec_bits):
        one = mpmath.mpf(1)
        pi = mpmath.pi
        e = mpmath.mpf(eps)
        q = mpmath.exp(-2 * pi * e)
        qp = mpmath.exp(-2 * pi / e)

        def euler(x):
            out, k = one, 1
            while True:
                f = x**k
                if f < mpmath.mpf(2) ** (-prec_bits - 16):
                    return out
                out *= 1 - f
                k += 1

        def podd(x):
            out, k = one, 1
            while True:
                f = x ** (2 * k - 1)
                if f < mpmath.mpf(2) ** (-prec_bits - 16):
                    return out
                out *= 1 - f
                k += 1

        def rel(a, b):
            return float(abs(a - b) / abs(b))

        report = {}
        report["euler_odd_split"] = rel(podd(q), euler(q) / euler(q * q))
        report["dedekind_transform"] = rel(
            euler(q), mpmath.exp(pi * (e - 1 / e) / 12) * euler(qp) / mpmath.sqrt(e)
        )
        report["odd_product_transform"] = rel(
            podd(q),
            mpmath.sqrt(2) * mpmath.exp(-pi * e / 12 - pi / (24 * e)) / podd(mpmath.sqrt(qp)),
        )
        emfc = 1 / (podd(q) * podd(q * q) ** 4)
        rhs = (
            mpmath.exp(3 * pi * e / 4 + pi / (8 * e))
            * podd(qp ** mpmath.mpf("0.5"))
            * podd(qp ** mpmath.mpf("0.25")) ** 4
            / mpmath.mpf(2) ** mpmath.mpf("2.5")
        )
        report["corner_modular_form"] = rel(emfc, rhs)
        return report


def fc_asymptote(eps: float) -> tuple[float, float]:
    """f_c near Q -> 4+ and its ratio to the asymptote -pi/(8 eps)."""
    import mpmath

    with mpmath.workprec(128):
        q = mpmath.exp(-2 * mpmath.pi * mpmath.mpf(eps))
        total, k = mpmath.mpf(0), 1
        while True:
            a = q ** (4 * k - 3)
            if a < mpmath.mpf(10) ** -40:
                break
            total += mpmath.log(1 - a) + 4 * mpmath.log(1 - q ** (4 * k - 2)) + mpmath.log(
                1 - q ** (4 * k - 1)
            )
            k += 1
        fc = float(total)
    asym = -math.pi / (8 * eps)
    return fc, fc / asym
