"""Surfaces in E^3: chart lifts, composites, and induced metrics.

The lift places a plane chart at height equal to its second parameter:
X(u, v) = (x(u, v), y(u, v), v). Its induced first fundamental form is
then E = 1, F = 0, G = G0 + 1, so EG - F^2 >= 1 and the lift is always an
immersion. A composite surface re-parametrizes any surface through a
certified parameter change by bilinear interpolation of positions; its
metric is taken by finite differences on the new parameter grid.

embed_planar places the chart at height zero instead (induced metric
(1, 0, G0)); it is the control surface for identity-change checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImageOutsideChart
from .fields import Grid2D, ScalarField2D
from .plane import PlaneChart
from .reparam import ParamChange


@dataclass
class EmbeddedSurface:
    grid: Grid2D
    position: np.ndarray  # (nu, nv, 3)
    mask: np.ndarray  # (nu, nv) bool
    provenance: str  # 'lifted' | 'planar' | 'composite'
    chart: PlaneChart = None  # the generating chart, when there is one

    def coordinate_field(self, k) -> ScalarField2D:
        return ScalarField2D(self.grid, self.position[:, :, k].copy(), mask=self.mask.copy())


def lift(chart: PlaneChart) -> EmbeddedSurface:
    """X = (x, y, v): third coordinate equals the chart's v parameter exactly."""
    grid = chart.grid
    _, V = grid.meshgrid()
    pos = np.stack([chart.x.values, chart.y.values, V], axis=2)
    return EmbeddedSurface(grid=grid, position=pos,
                           mask=np.ones((grid.nu, grid.nv), dtype=bool),
                           provenance="lifted", chart=chart)


def embed_planar(chart: PlaneChart) -> EmbeddedSurface:
    """X = (x, y, 0): the chart itself as a surface in the z = 0 plane."""
    grid = chart.grid
    pos = np.stack([chart.x.values, chart.y.values, np.zeros((grid.nu, grid.nv))], axis=2)
    return EmbeddedSurface(grid=grid, position=pos,
                           mask=np.ones((grid.nu, grid.nv), dtype=bool),
                           provenance="planar", chart=chart)


def induced_metric(surface: EmbeddedSurface) -> tuple:
    """(E, F, G) fields from finite differences of the position coordinates."""
    xu = []
    xv = []
    for k in range(3):
        c = surface.coordinate_field(k)
        xu.append(c.d_u().values)
        xv.append(c.d_v().values)
    e = sum(a * a for a in xu)
    f = sum(a * b for a, b in zip(xu, xv))
    g = sum(b * b for b in xv)
    mask = surface.mask & np.isfinite(e) & np.isfinite(f) & np.isfinite(g)
    grid = surface.grid
    return (
        ScalarField2D(grid, e, mask=mask),
        ScalarField2D(grid, f, mask=mask),
        ScalarField2D(grid, g, mask=mask),
    )


def compose(surface: EmbeddedSurface, pc: ParamChange) -> EmbeddedSurface:
    """Surface over pc's grid with positions sampled at (f, g)(node).

    Every certified node must map inside the surface's parameter rectangle;
    offenders raise ImageOutsideChart with their indices.
    """
    grid = pc.grid
    u_img = pc.f.values
    v_img = pc.g.values
    cert = pc.certified

    sg = surface.grid
    inside = (
        (u_img >= sg.u0 - 1e-12) & (u_img <= sg.u_max + 1e-12)
        & (v_img >= sg.v0 - 1e-12) & (v_img <= sg.v_max + 1e-12)
    )
    offenders = cert & ~inside
    if offenders.any():
        nodes = [tuple(t) for t in np.argwhere(offenders)[:20]]
        raise ImageOutsideChart(
            f"{int(offenders.sum())} certified nodes map outside the chart rectangle",
            nodes=nodes,
        )

    pos = np.full((grid.nu, grid.nv, 3), np.nan)
    ok_all = cert.copy()
    uq = np.where(cert, u_img, sg.u0)
    vq = np.where(cert, v_img, sg.v0)
    for k in range(3):
        fld = surface.coordinate_field(k)
        vals, ok = fld.interp(uq, vq)
        pos[:, :, k] = vals
        ok_all &= ok
    return EmbeddedSurface(grid=grid, position=pos, mask=ok_all,
                           provenance="composite", chart=surface.chart)


def regularity_check(e: ScalarField2D, f: ScalarField2D, g: ScalarField2D,
                     tol: float = 0.0) -> np.ndarray:
    """Mask of nodes where EG - F^2 > tol."""
    det = e.values * g.values - f.values**2
    return e.mask & f.mask & g.mask & np.isfinite(det) & (det > tol)


def downsample_surface(surface: EmbeddedSurface, max_per_axis: int) -> EmbeddedSurface:
    """Strided view capping each grid axis at max_per_axis nodes.

    Export-quality reduction only; solver-facing surfaces are never strided.
    """
    g = surface.grid
    su = max(1, -(-(g.nu - 1) // (max_per_axis - 1)))
    sv = max(1, -(-(g.nv - 1) // (max_per_axis - 1)))
    if su == 1 and sv == 1:
        return surface
    pos = surface.position[::su, ::sv]
    mask = surface.mask[::su, ::sv]
    grid = Grid2D(u0=g.u0, v0=g.v0, du=g.du * su, dv=g.dv * sv,
                  nu=pos.shape[0], nv=pos.shape[1])
    return EmbeddedSurface(grid=grid, position=pos, mask=mask,
                           provenance=surface.provenance, chart=surface.chart)


def _mask_runs(row):
    """[(start, end)] inclusive runs of True in a 1-D bool array."""
    idx = np.flatnonzero(row)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts, ends))


def export_obj(surface: EmbeddedSurface, path: str):
    """Wavefront OBJ: all grid vertices row-major, faces for fully valid cells.

    Masked vertices are written as the origin and simply not referenced by
    any face; the exact validity mask is preserved in '# valid' comment
    lines (run-length per u-row) so re-verification sees the same node set.
    %.17g formatting keeps round-trips bit-exact.
    """
    grid = surface.grid
    pos = surface.position
    m = surface.mask
    lines = [f"# isoembed surface provenance={surface.provenance} nu={grid.nu} nv={grid.nv}"]
    for i in range(grid.nu):
        runs = " ".join(f"{a}:{b}" for a, b in _mask_runs(m[i]))
        lines.append(f"# valid {i} {runs}".rstrip())
    flat_m = m.ravel()
    flat_p = pos.reshape(-1, 3)
    lines.extend(
        f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}" if ok else "v 0 0 0"
        for ok, p in zip(flat_m, flat_p)
    )
    cell_ok = m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]
    for i, j in np.argwhere(cell_ok):
        a = i * grid.nv + j + 1  # OBJ indices are 1-based
        b = (i + 1) * grid.nv + j + 1
        lines.append(f"f {a} {b} {b + 1}")
        lines.append(f"f {a} {b + 1} {a + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_obj_positions(path: str, nu: int, nv: int):
    """Positions and validity mask from an OBJ written by export_obj.

    Returns (positions (nu, nv, 3), mask or None when no '# valid' lines).
    """
    verts = []
    mask = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                _, x, y, z = line.split()
                verts.append((float(x), float(y), float(z)))
            elif line.startswith("# valid "):
                if mask is None:
                    mask = np.zeros((nu, nv), dtype=bool)
                parts = line.split()
                i = int(parts[2])
                if i >= nu:
                    raise ValueError(f"{path}: mask row {i} out of range for nu={nu}")
                for run in parts[3:]:
                    a, b = run.split(":")
                    mask[i, int(a): int(b) + 1] = True
    if len(verts) != nu * nv:
        raise ValueError(f"{path}: expected {nu * nv} vertices, found {len(verts)}")
    return np.array(verts).reshape(nu, nv, 3), mask
