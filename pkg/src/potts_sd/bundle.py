"""Containers for the four free energies, shared by every route."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .qseries import TruncatedSeries


@dataclass(frozen=True)
class LogSeries:
    """A quantity of the form logq_coeff * log(q) + series.

    The bulk free energy contains an exact log(q); everything beyond that
    log is an honest series in t, so the pair (coefficient, series) is the
    faithful exact representation.
    """

    logq_coeff: Fraction
    series: TruncatedSeries

    def __sub__(self, other: "LogSeries"):
        if self.logq_coeff != other.logq_coeff:
            raise ValueError("log(q) parts differ; difference is not a series")
        return self.series - other.series

    def __eq__(self, other):
        if not isinstance(other, LogSeries):
            return NotImplemented
        return self.logq_coeff == other.logq_coeff and self.series == other.series

    def eval(self, t, s):
        import math

        return 4 * self.logq_coeff * math.log(t) + self.series.eval(t, s)


@dataclass
class FreeEnergyBundle:
    """(f_b, f_s, f'_s, f_c) tagged with the route that produced them.

    Numbers for numeric routes; LogSeries / TruncatedSeries for series
    routes.  ``meta`` carries route-specific diagnostics (lattice sizes,
    residuals, solver traces).
    """

    f_b: object
    f_s: object
    f_sp: object
    f_c: object
    route: str
    meta: dict = field(default_factory=dict)
