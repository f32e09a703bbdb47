"""The projective line with its two affine charts and the Fubini-Study weight.

A point is stored in whichever chart keeps its coordinate inside the closed
unit disk (up to a small overlap tolerance), so every evaluation below runs
on bounded coordinates. Sections of O(n) are polynomials of degree <= n in
the chart-Zero coordinate z; in the chart-Infinity coordinate w = 1/z the
same section has local representative sum_j c_j w^(n-j).

All metric quantities are returned in log units.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, InvalidPointError

CHART_TOL = 1e-9
POINT_EQ_TOL = 1e-12


class Chart(enum.Enum):
    ZERO = "zero"
    INFINITY = "infinity"

    @property
    def other(self) -> "Chart":
        return Chart.INFINITY if self is Chart.ZERO else Chart.ZERO


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    """A point of P^1 as (chart, affine coordinate).

    Construction canonicalizes: a coordinate with modulus above
    ``1 + CHART_TOL`` is moved to the opposite chart as its reciprocal.
    Equality is tolerance based, so instances are deliberately unhashable.
    """

    chart: Chart
    coord: complex

    def __post_init__(self):
        z = complex(self.coord)
        if not (math.isfinite(z.real) and math.isfinite(z.imag)):
            raise InvalidPointError(f"non-finite coordinate {self.coord!r}")
        chart = Chart(self.chart)
        if abs(z) > 1.0 + CHART_TOL:
            chart, z = chart.other, 1.0 / z
        object.__setattr__(self, "chart", chart)
        object.__setattr__(self, "coord", z)

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def affine(cls, z: complex) -> "ProjectivePoint":
        """The point with chart-Zero coordinate ``z``."""
        return cls(Chart.ZERO, z)

    @classmethod
    def infinity(cls) -> "ProjectivePoint":
        return cls(Chart.INFINITY, 0.0)

    @property
    def is_infinity(self) -> bool:
        return self.chart is Chart.INFINITY and self.coord == 0

    def z(self) -> complex:
        """Chart-Zero coordinate (``inf`` for the point at infinity)."""
        if self.chart is Chart.ZERO:
            return self.coord
        if self.coord == 0:
            return complex(math.inf, 0.0)
        return 1.0 / self.coord

    def coord_in(self, chart: Chart) -> complex:
        if chart is self.chart:
            return self.coord
        if self.coord == 0:
            raise InvalidPointError(f"{self} is not in chart {chart.value}")
        return 1.0 / self.coord

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        if self.chart is other.chart:
            return abs(self.coord - other.coord) <= POINT_EQ_TOL
        # canonical coordinates in opposite charts can only agree near |.| = 1
        if self.coord == 0 or other.coord == 0:
            return False
        return abs(self.coord - 1.0 / other.coord) <= POINT_EQ_TOL

    def __repr__(self):
        return f"ProjectivePoint({self.chart.value}, {self.coord!r})"


def point_arrays(points: Sequence[ProjectivePoint]) -> tuple[np.ndarray, np.ndarray]:
    """Split points into (is_infinity_chart mask, coordinate array)."""
    inf = np.fromiter((p.chart is Chart.INFINITY for p in points), dtype=bool, count=len(points))
    coords = np.fromiter((p.coord for p in points), dtype=complex, count=len(points))
    return inf, coords


def chordal_distance(a: ProjectivePoint, b: ProjectivePoint) -> float:
    """Chordal distance |a - b| / sqrt((1+|a|^2)(1+|b|^2)), chart independent."""
    if a.chart is b.chart:
        x, y = a.coord, b.coord
        return abs(x - y) / math.sqrt((1 + abs(x) ** 2) * (1 + abs(y) ** 2))
    # one point in each chart: z = a, 1/w = b  ->  |a w - 1| / sqrt(...)
    x, w = a.coord, b.coord
    return abs(x * w - 1) / math.sqrt((1 + abs(x) ** 2) * (1 + abs(w) ** 2))


def fs_weight(p: ProjectivePoint) -> float:
    """Fubini-Study weight phi = 1/2 log(1 + |coord|^2) in the point's chart."""
    if not isinstance(p, ProjectivePoint):
        raise InvalidPointError(f"expected ProjectivePoint, got {type(p).__name__}")
    return 0.5 * math.log1p(abs(p.coord) ** 2)


def fs_weight_array(coords: np.ndarray) -> np.ndarray:
    return 0.5 * np.log1p(np.abs(coords) ** 2)


def section_norm_log(coeffs, p: ProjectivePoint, n: int) -> float:
    """log ||s(p)||_{h_n} for the section with chart-Zero coefficients ``coeffs``.

    Returns ``-inf`` where the section vanishes.
    """
    c = np.asarray(coeffs, dtype=complex).reshape(-1)
    if n < 0 or c.size != n + 1:
        raise DimensionError(f"expected {n + 1} coefficients for degree {n}, got {c.size}")
    return float(section_norm_log_many(c[None, :], [p], n)[0, 0])


def section_norm_log_many(coeffs: np.ndarray, points: Sequence[ProjectivePoint], n: int) -> np.ndarray:
    """Vectorized :func:`section_norm_log`; returns an array (sections, points)."""
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    if coeffs.shape[1] != n + 1:
        raise DimensionError(f"expected {n + 1} coefficients for degree {n}, got {coeffs.shape[1]}")
    inf, coords = point_arrays(points)
    scale = np.max(np.abs(coeffs), axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    c = coeffs / safe[:, None]
    # Horner in each chart; chart Infinity uses the reversed coefficient list
    vals = np.empty((coeffs.shape[0], coords.size), dtype=complex)
    for mask, cc in ((~inf, c), (inf, c[:, ::-1])):
        if not mask.any():
            continue
        x = coords[mask]
        acc = np.zeros((cc.shape[0], x.size), dtype=complex)
        for j in range(n, -1, -1):
            acc = acc * x[None, :] + cc[:, j : j + 1]
        vals[:, mask] = acc
    with np.errstate(divide="ignore"):
        out = np.log(np.abs(vals)) + np.log(safe)[:, None] - n * fs_weight_array(coords)[None, :]
    out[scale == 0, :] = -np.inf
    return out


def section_local_values(coeffs: np.ndarray, points: Sequence[ProjectivePoint], n: int) -> np.ndarray:
    """h_n-weighted local values s_alpha(p) * exp(-n phi_alpha(p)); shape (sections, points).

    Their moduli are the h_n norms; their phases depend on the chart, which
    is harmless for anything built from moduli or from sums over the same
    point (inner products).
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    if coeffs.shape[1] != n + 1:
        raise DimensionError(f"expected {n + 1} coefficients for degree {n}, got {coeffs.shape[1]}")
    inf, coords = point_arrays(points)
    j = np.arange(n + 1)
    expo = np.where(inf[:, None], n - j[None, :], j[None, :])
    mono = coords[:, None] ** expo
    weight = np.exp(-n * fs_weight_array(coords))
    return (coeffs @ mono.T) * weight[None, :]


@dataclass(frozen=True, eq=False)
class EvalGrid:
    """Polar grids on both chart disks, overlap circle counted once."""

    points: tuple[ProjectivePoint, ...]
    radial: int
    angular: int

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def description(self) -> str:
        return f"polar grid, radial={self.radial}, angular={self.angular}, points={len(self.points)}"


def make_eval_grid(radial: int, angular: int) -> EvalGrid:
    """Build the evaluation grid used for sup-norm estimates over P^1.

    Radii are ``i / radial`` for ``i = 1..radial`` and angles ``2 pi k / angular``
    in each chart, plus both chart origins. The chart-Infinity copy of the
    unit circle is dropped when it duplicates a chart-Zero point.
    """
    if radial < 2 or angular < 4:
        raise ConfigurationError(f"grid needs radial >= 2 and angular >= 4, got ({radial}, {angular})")
    pts: list[ProjectivePoint] = []
    zero_circle: list[ProjectivePoint] = []
    for chart in (Chart.ZERO, Chart.INFINITY):
        pts.append(ProjectivePoint(chart, 0.0))
        for i in range(1, radial + 1):
            r = i / radial
            for k in range(angular):
                p = ProjectivePoint(chart, r * cmath.exp(2j * math.pi * k / angular))
                if i == radial:
                    if chart is Chart.ZERO:
                        zero_circle.append(p)
                    elif any(p == q for q in zero_circle):
                        continue
                pts.append(p)
    return EvalGrid(points=tuple(pts), radial=radial, angular=angular)


def unique_count(points: Iterable[ProjectivePoint]) -> int:
    """Number of distinct points, up to the point-equality tolerance."""
    keys = set()
    for p in points:
        # unit-circle points may sit in either chart; key them in chart Zero
        if p.chart is Chart.INFINITY and abs(abs(p.coord) - 1.0) <= CHART_TOL:
            z = 1.0 / p.coord
            chart = Chart.ZERO
        else:
            z, chart = p.coord, p.chart
        keys.add((chart, round(z.real, 11), round(z.imag, 11)))
    return len(keys)
