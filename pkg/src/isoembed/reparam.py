"""The parameter change (u, v) = (f, g)(ubar, vbar): Jacobian, certificate,
and numerical inversion.

The Jacobian J = f_u g_v - f_v g_u is computed from the solved fields'
stencils. A certificate (largest grid-connected region around the initial
node where |J| stays above tolerance with constant sign) realizes the
construction's "some neighborhood of the initial point" as a computed
mask. Inversion is a 2x2 Newton iteration on the bilinear interpolants.

Two independent routes exist for J on the initial line: the stencil value
and a closed-form determinant in terms of (h', k', G(u,0)); their
agreement is one of the pipeline's cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParameter, LeftRegion, NoCertifiedRegion, NoConvergence
from .fields import ScalarField2D


@dataclass
class ParamChange:
    f: ScalarField2D
    g: ScalarField2D
    jac: ScalarField2D
    certified: np.ndarray  # bool mask, subset of jac.mask
    orientation: int  # sign of J on the certified region
    init_node: tuple  # (i0, j0) seed of the certificate

    @property
    def grid(self):
        return self.f.grid


def jacobian(f: ScalarField2D, g: ScalarField2D) -> ScalarField2D:
    """J = f_u g_v - f_v g_u per node from the fields' own stencils."""
    fu = f.d_u().values
    fv = f.d_v().values
    gu = g.d_u().values
    gv = g.d_v().values
    jac = fu * gv - fv * gu
    mask = f.mask & g.mask & np.isfinite(jac)
    return ScalarField2D(f.grid, jac, mask=mask)


def jacobian_initial_closed_form(hprime, kprime, g0):
    """Closed-form J on the initial line from the initial slopes.

    Evaluates sqrt(1-h'^2) * [h' * (h' k' G0 / (1-h'^2)) + sqrt(G0) * k'],
    the determinant obtained by substituting the initial slopes of both
    maps. Accepts scalars or arrays.
    """
    hp = np.asarray(hprime, dtype=float)
    kp = np.asarray(kprime, dtype=float)
    g0 = np.asarray(g0, dtype=float)
    if np.any(hp <= 0.0) or np.any(hp >= 1.0):
        raise BadParameter("h' must lie in (0,1)")
    if np.any(kp <= 0.0):
        raise BadParameter("k' must be positive")
    if np.any(g0 <= 0.0):
        raise BadParameter("G(u,0) must be positive")
    out = np.sqrt(1.0 - hp**2) * (hp * (hp * kp * g0 / (1.0 - hp**2)) + np.sqrt(g0) * kp)
    return out if out.ndim else float(out)


def certify_invertible(jac: ScalarField2D, tol: float, seed_node) -> tuple:
    """Largest grid-connected region around seed_node with |J| > tol and
    constant sign. Returns (mask, orientation).
    """
    i0, j0 = seed_node
    vals = jac.values
    ok = jac.mask & np.isfinite(vals) & (np.abs(vals) > tol)
    if not ok[i0, j0]:
        raise NoCertifiedRegion(
            f"|J| <= {tol} at the initial node (J = {vals[i0, j0]!r})"
        )
    orientation = 1 if vals[i0, j0] > 0 else -1
    ok &= np.sign(vals) == orientation

    # vectorized flood fill: repeated dilation restricted to `ok`
    region = np.zeros_like(ok)
    region[i0, j0] = True
    frontier = region.copy()
    while frontier.any():
        grown = np.zeros_like(ok)
        grown[1:, :] |= frontier[:-1, :]
        grown[:-1, :] |= frontier[1:, :]
        grown[:, 1:] |= frontier[:, :-1]
        grown[:, :-1] |= frontier[:, 1:]
        frontier = grown & ok & ~region
        region |= frontier
    return region, orientation


def build_param_change(f_report, g_report, jac_tol: float = 1e-8) -> ParamChange:
    """Assemble the certified parameter change from the two solve reports."""
    f = f_report.field
    g = g_report.field
    grid = f.grid
    j0 = grid.row_index_of_v(0.0)
    i0 = grid.nu // 2
    jac = jacobian(f, g)
    certified, orientation = certify_invertible(jac, jac_tol, (i0, j0))
    return ParamChange(f=f, g=g, jac=jac, certified=certified,
                       orientation=orientation, init_node=(i0, j0))


def invert(pc: ParamChange, target, seed, tol: float = 1e-10, max_iter: int = 50):
    """Solve (f, g)(p) = target by Newton iteration from seed.

    Fields are interpolated bilinearly; the Newton matrix is the analytic
    Jacobian of the bilinear surrogate inside the current cell. Iterates
    must stay inside the certified region.
    """
    u_t, v_t = float(target[0]), float(target[1])
    p = np.array([float(seed[0]), float(seed[1])])
    grid = pc.grid

    def certified_at(q):
        su = (q[0] - grid.u0) / grid.du
        sv = (q[1] - grid.v0) / grid.dv
        i = int(np.clip(np.floor(su), 0, grid.nu - 2))
        j = int(np.clip(np.floor(sv), 0, grid.nv - 2))
        inside = 0 <= su <= grid.nu - 1 and 0 <= sv <= grid.nv - 1
        cell_ok = pc.certified[i : i + 2, j : j + 2].all()
        return inside and cell_ok, (i, j, su - i, sv - j)

    for _ in range(max_iter):
        ok, (i, j, au, av) = certified_at(p)
        if not ok:
            raise LeftRegion(f"Newton iterate left the certified region at {tuple(p)}")
        fv = pc.f.values
        gv = pc.g.values

        def bil(w):
            c00, c10 = w[i, j], w[i + 1, j]
            c01, c11 = w[i, j + 1], w[i + 1, j + 1]
            val = (c00 * (1 - au) * (1 - av) + c10 * au * (1 - av)
                   + c01 * (1 - au) * av + c11 * au * av)
            d_u = ((c10 - c00) * (1 - av) + (c11 - c01) * av) / grid.du
            d_v = ((c01 - c00) * (1 - au) + (c11 - c10) * au) / grid.dv
            return val, d_u, d_v

        fval, fu, fvv = bil(fv)
        gval, gu, gvv = bil(gv)
        r = np.array([fval - u_t, gval - v_t])
        if abs(r[0]) + abs(r[1]) < tol:
            return float(p[0]), float(p[1])
        det = fu * gvv - fvv * gu
        if det == 0.0:
            raise NoConvergence("singular Newton matrix")
        step = np.array([(gvv * r[0] - fvv * r[1]) / det,
                         (-gu * r[0] + fu * r[1]) / det])
        p = p - step

    raise NoConvergence(f"no convergence after {max_iter} iterations")
