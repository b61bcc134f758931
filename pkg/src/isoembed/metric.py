"""Geodesic-form metrics du^2 + G(u,v) dv^2 and their Gaussian curvature.

A metric here is just its G coefficient on a closed rectangle (the other
two coefficients are identically 1 and 0 by the geodesic form and are not
stored). Closed-form registry entries carry analytic derivatives and an
analytic curvature; sampled metrics interpolate bilinearly and fall back
to finite differences.

For this metric form the intrinsic (Gaussian) curvature reduces to
K = -(sqrt(G))_uu / sqrt(G), which is what both curvature paths compute.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import GridTooSmall, IoFailure, NonPositiveMetric, OutOfDomain
from .fields import Grid2D, ScalarField2D

DEFAULT_HALF_WIDTH = 0.5  # domain half-width when a config omits it


@dataclass(frozen=True)
class Rect:
    u_min: float
    u_max: float
    v_min: float
    v_max: float

    def contains(self, u, v, tol=0.0):
        return (
            (np.asarray(u) >= self.u_min - tol)
            & (np.asarray(u) <= self.u_max + tol)
            & (np.asarray(v) >= self.v_min - tol)
            & (np.asarray(v) <= self.v_max + tol)
        )

    def contains_grid(self, grid: Grid2D, tol=1e-12):
        return bool(
            self.contains(grid.u0, grid.v0, tol) and self.contains(grid.u_max, grid.v_max, tol)
        )


@dataclass
class GeodesicMetric2D:
    """The G coefficient of du^2 + G dv^2 as an evaluable field.

    `g_fn` must accept numpy arrays. Closed-form entries also provide
    `d_sqrt_g_du` and `curvature_fn`; sampled ones leave them None.
    """

    name: str
    domain: Rect
    g_fn: Callable
    d_sqrt_g_du: Optional[Callable] = None
    curvature_fn: Optional[Callable] = None
    source: str = "closed-form"

    def eval(self, u, v):
        """G at (u, v); domain and positivity enforced."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if not np.all(self.domain.contains(u, v, tol=1e-12)):
            raise OutOfDomain(f"point outside domain of metric '{self.name}'")
        g = np.asarray(self.g_fn(u, v), dtype=float)
        g = g * np.ones_like(u, dtype=float)
        if np.any(g <= 0.0):
            raise NonPositiveMetric(f"metric '{self.name}' non-positive at a queried point")
        return g if g.ndim else float(g)

    def sqrt_g(self, u, v):
        return np.sqrt(self.eval(u, v))

    def sample(self, grid: Grid2D) -> ScalarField2D:
        U, V = grid.meshgrid()
        return ScalarField2D(grid, self.eval(U, V))

    @property
    def has_analytic_curvature(self):
        return self.curvature_fn is not None


def eval_metric(m: GeodesicMetric2D, p):
    """G at a single point p = (u, v)."""
    u, v = p
    return float(m.eval(float(u), float(v)))


# Registry entries carry sqrt(G) derivatives so the analytic curvature is
# computed as the actual ratio -(sqrt G)'' / sqrt G, not a stored constant.
_REGISTRY = {
    "flat": dict(
        g_fn=lambda u, v: np.ones_like(np.asarray(u, dtype=float)),
        d_sqrt_g_du=lambda u, v: np.zeros_like(np.asarray(u, dtype=float)),
        curvature_fn=lambda u, v: np.zeros_like(np.asarray(u, dtype=float)),
    ),
    "cos2": dict(
        g_fn=lambda u, v: np.cos(u) ** 2,
        d_sqrt_g_du=lambda u, v: -np.sin(u),
        curvature_fn=lambda u, v: -(-np.cos(u)) / np.cos(u),
    ),
    "exp": dict(
        g_fn=lambda u, v: np.exp(2.0 * u),
        d_sqrt_g_du=lambda u, v: np.exp(u),
        curvature_fn=lambda u, v: -np.exp(u) / np.exp(u),
    ),
}


def registry_names():
    return sorted(_REGISTRY)


def make_metric(name: str, domain: Rect = None) -> GeodesicMetric2D:
    """Build a metric from a registry name or 'file:<path>'."""
    if domain is None:
        h = DEFAULT_HALF_WIDTH
        domain = Rect(-h, h, -h, h)
    if name.startswith("file:"):
        return load_metric_csv(name[len("file:"):])
    if name not in _REGISTRY:
        raise KeyError(f"unknown metric '{name}'; expected one of {registry_names()} or file:<path>")
    entry = _REGISTRY[name]
    return GeodesicMetric2D(name=name, domain=domain, **entry)


def load_metric_csv(path: str) -> GeodesicMetric2D:
    """Sampled metric from CSV with header ubar,vbar,G (row-major: v fastest)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [c.strip() for c in header] != ["ubar", "vbar", "G"]:
                raise IoFailure(f"{path}: expected header 'ubar,vbar,G'")
            rows = [(float(a), float(b), float(c)) for a, b, c in reader]
    except OSError as exc:
        raise IoFailure(f"cannot read metric file {path}: {exc}") from exc
    if not rows:
        raise IoFailure(f"{path}: no data rows")
    us = np.array(sorted({r[0] for r in rows}))
    vs = np.array(sorted({r[1] for r in rows}))
    nu, nv = len(us), len(vs)
    if nu * nv != len(rows):
        raise IoFailure(f"{path}: rows do not form a complete {nu}x{nv} grid")
    du = np.diff(us)
    dv = np.diff(vs)
    if nu < 3 or nv < 3 or np.ptp(du) > 1e-9 * du.mean() or np.ptp(dv) > 1e-9 * dv.mean():
        raise IoFailure(f"{path}: grid must be uniform and at least 3x3")
    grid = Grid2D(u0=us[0], v0=vs[0], du=float(du.mean()), dv=float(dv.mean()), nu=nu, nv=nv)
    values = np.empty((nu, nv))
    for ubar, vbar, g in rows:
        i = grid.col_index_of_u(ubar)
        j = grid.row_index_of_v(vbar)
        values[i, j] = g
    if np.any(values <= 0.0):
        raise NonPositiveMetric(f"{path}: sampled G must be positive everywhere")
    fld = ScalarField2D(grid, values)

    def g_fn(u, v):
        out, ok = fld.interp(u, v)
        if not np.all(ok):
            raise OutOfDomain("sampled metric queried outside its grid")
        return out

    return GeodesicMetric2D(
        name=f"file:{path}",
        domain=Rect(us[0], us[-1], vs[0], vs[-1]),
        g_fn=g_fn,
        source="sampled",
    )


def curvature_from_samples(g_field: ScalarField2D) -> ScalarField2D:
    """K = -(sqrt G)_uu / sqrt G by central differences, interior nodes only."""
    grid = g_field.grid
    if grid.nu < 5:
        raise GridTooSmall("curvature needs at least 3 interior samples in u")
    vals = g_field.values
    if np.any(vals[g_field.mask] <= 0.0):
        raise NonPositiveMetric("curvature of a non-positive metric sample")
    w = np.where(g_field.mask, np.sqrt(np.where(g_field.mask, vals, 1.0)), np.nan)
    interior = g_field.mask.copy()
    interior[0, :] = False
    interior[-1, :] = False
    wf = ScalarField2D(grid, w, mask=g_field.mask)
    wuu = wf.d_uu().values
    k = np.where(interior, -wuu / w, np.nan)
    return ScalarField2D(grid, k, mask=interior & np.isfinite(k))


def curvature_field(m: GeodesicMetric2D, grid: Grid2D, method="auto") -> ScalarField2D:
    """Curvature of the metric on a grid.

    method 'analytic' uses the registry formula, 'fd' the sampled stencil,
    'auto' prefers analytic when the metric has one.
    """
    if method not in ("auto", "analytic", "fd"):
        raise ValueError(f"unknown curvature method '{method}'")
    if method == "analytic" or (method == "auto" and m.has_analytic_curvature):
        if not m.has_analytic_curvature:
            raise ValueError(f"metric '{m.name}' has no analytic curvature")
        U, V = grid.meshgrid()
        return ScalarField2D(grid, np.asarray(m.curvature_fn(U, V), dtype=float) * np.ones_like(U))
    return curvature_from_samples(m.sample(grid))


def gauss_curvature_geodesic(g, grid: Grid2D = None, method="auto") -> ScalarField2D:
    """Curvature of a geodesic-form metric given as a field or metric object."""
    if isinstance(g, ScalarField2D):
        return curvature_from_samples(g)
    if isinstance(g, GeodesicMetric2D):
        if grid is None:
            raise ValueError("grid required when passing a metric object")
        return curvature_field(g, grid, method=method)
    raise TypeError("expected ScalarField2D or GeodesicMetric2D")


@dataclass(frozen=True)
class Violation:
    kind: str  # 'nonpositive' | 'first_difference'
    node: tuple
    coords: tuple
    value: float


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self):
        return not self.violations


def validate_metric(
    m: GeodesicMetric2D, grid: Grid2D, tol: float = 1e-8, slope_bound: float = 1e6
) -> ValidationReport:
    """Positivity (G > tol) and bounded-first-difference checks on grid nodes.

    The difference bound is a sampling proxy for G being C^1: violations
    are data for the report, not errors.
    """
    out = []
    if not m.domain.contains_grid(grid):
        out.append(Violation("domain", (-1, -1), (grid.u0, grid.v0), float("nan")))
        return ValidationReport(out)
    U, V = grid.meshgrid()
    g = np.asarray(m.g_fn(U, V), dtype=float) * np.ones_like(U)
    bad = np.argwhere(g <= tol)
    for i, j in bad:
        out.append(
            Violation("nonpositive", (int(i), int(j)), (float(U[i, j]), float(V[i, j])), float(g[i, j]))
        )
    su = np.abs(np.diff(g, axis=0)) / grid.du
    sv = np.abs(np.diff(g, axis=1)) / grid.dv
    for (i, j) in np.argwhere(su >= slope_bound):
        out.append(
            Violation("first_difference", (int(i), int(j)), (float(U[i, j]), float(V[i, j])), float(su[i, j]))
        )
    for (i, j) in np.argwhere(sv >= slope_bound):
        out.append(
            Violation("first_difference", (int(i), int(j)), (float(U[i, j]), float(V[i, j])), float(sv[i, j]))
        )
    return ValidationReport(out)
