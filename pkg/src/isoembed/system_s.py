"""The per-node 3x2 linear system tying the two metric forms together.

At each certified node the squared derivatives of the parameter change
form the coefficient matrix

    [ f_u^2    g_u^2  ]           [ 1    ]
    [ f_u f_v  g_u g_v] (E, G)^T = [ 0    ]
    [ f_v^2    g_v^2  ]           [ Gbar ]

whose consistency (rank 2 = rank of the augmented matrix, vanishing
augmented determinant) encodes that (1, 0, Gbar) and (E, G) describe the
same metric across the change. The solve picks the two rows with the
largest 2x2 minor, solves exactly, and keeps the third row as a residual.
The third row also yields the closed form G = (Gbar - f_v^2)/g_v^2, an
independent route that must agree with the solved G.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RankDeficient, UncertifiedNode
from .fields import ScalarField2D
from .metric import GeodesicMetric2D
from .reparam import ParamChange

# Singular values below RANK_REL_TOL * (largest sv) count as zero. The
# augmented matrix of a marched solution carries a third singular value of
# the order of the PDE discretization residual (~1e-8 at default
# resolution), so the threshold is tied to the solver tolerance rather
# than machine precision.
RANK_REL_TOL = 1e-6


def _deriv_arrays(pc: ParamChange):
    cache = getattr(pc, "_deriv_cache", None)
    if cache is None:
        cache = (
            pc.f.d_u().values,
            pc.f.d_v().values,
            pc.g.d_u().values,
            pc.g.d_v().values,
        )
        pc._deriv_cache = cache
    return cache


@dataclass
class SystemS:
    node: tuple  # (i, j) grid indices
    coeff: np.ndarray  # (3, 2)
    rhs: np.ndarray  # (3,)

    @property
    def augmented(self):
        return np.column_stack([self.coeff, self.rhs])


def assemble(pc: ParamChange, metric: GeodesicMetric2D, node) -> SystemS:
    """Fill the system at one certified node from the stencil derivatives."""
    i, j = node
    if not pc.certified[i, j]:
        raise UncertifiedNode(f"node {node} is outside the certified region")
    fu, fv, gu, gv = (a[i, j] for a in _deriv_arrays(pc))
    u = pc.grid.u_coords[i]
    v = pc.grid.v_coords[j]
    gbar = float(metric.eval(u, v))
    return from_derivatives(fu, fv, gu, gv, gbar, node=(i, j))


def from_derivatives(fu, fv, gu, gv, gbar, node=(-1, -1)) -> SystemS:
    """System from explicit derivative values (testing and corruption runs)."""
    coeff = np.array([
        [fu * fu, gu * gu],
        [fu * fv, gu * gv],
        [fv * fv, gv * gv],
    ])
    rhs = np.array([1.0, 0.0, gbar])
    return SystemS(node=node, coeff=coeff, rhs=rhs)


def augmented_det_residual(s: SystemS) -> float:
    """Determinant of the 3x3 augmented matrix; zero on exact solutions."""
    return float(np.linalg.det(s.augmented))


def rank_checks(s: SystemS, tol: float = RANK_REL_TOL) -> tuple:
    """(rank of coefficient matrix, rank of augmented matrix) by SVD."""
    return _svd_rank(s.coeff, tol), _svd_rank(s.augmented, tol)


def _svd_rank(mat, tol):
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] <= 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def solve_for_EG(s: SystemS) -> tuple:
    """(E, G) from the two rows with the largest 2x2 minor."""
    pairs = ((0, 1), (0, 2), (1, 2))
    minors = [
        s.coeff[a, 0] * s.coeff[b, 1] - s.coeff[a, 1] * s.coeff[b, 0]
        for a, b in pairs
    ]
    k = int(np.argmax(np.abs(minors)))
    m = minors[k]
    scale = np.abs(s.coeff).max()
    if scale <= 0.0 or abs(m) <= RANK_REL_TOL * scale * scale:
        raise RankDeficient(f"all 2x2 minors vanish at node {s.node}")
    a, b = pairs[k]
    e_val = (s.rhs[a] * s.coeff[b, 1] - s.rhs[b] * s.coeff[a, 1]) / m
    g_val = (s.coeff[a, 0] * s.rhs[b] - s.coeff[b, 0] * s.rhs[a]) / m
    return float(e_val), float(g_val)


def closed_form_G(s: SystemS) -> float:
    """G from the third row alone with E fixed to 1: (Gbar - f_v^2)/g_v^2."""
    return float((s.rhs[2] - s.coeff[2, 0]) / s.coeff[2, 1])


@dataclass
class SystemReport:
    """Whole-grid solve of the system on the certified region."""

    e_val: ScalarField2D
    g_val: ScalarField2D
    g_closed: ScalarField2D
    rank_coeff: ScalarField2D
    rank_aug: ScalarField2D
    aug_det: ScalarField2D
    row_residuals: tuple  # three ScalarField2D, one per row
    mask: np.ndarray

    def rank_ok_fraction(self):
        m = self.mask
        if not m.any():
            return 0.0
        ok = (self.rank_coeff.values == 2) & (self.rank_aug.values == 2)
        return float(ok[m].sum() / m.sum())

    def g_match_rel_sup(self):
        """sup of |G_solved - G_closed| / max(1, |G_closed|) over the region."""
        d = np.abs(self.g_val.values - self.g_closed.values)
        rel = d / np.maximum(1.0, np.abs(self.g_closed.values))
        rel = np.where(self.mask, rel, np.nan)
        return float(np.nanmax(rel)) if self.mask.any() else float("nan")


def solve_system_grid(pc: ParamChange, metric: GeodesicMetric2D) -> SystemReport:
    """Vectorized assemble + rank check + solve at every certified node."""
    grid = pc.grid
    fu, fv, gu, gv = _deriv_arrays(pc)
    U, V = grid.meshgrid()
    gbar = np.asarray(metric.g_fn(U, V), dtype=float) * np.ones_like(U)

    mask = (
        pc.certified
        & np.isfinite(fu) & np.isfinite(fv) & np.isfinite(gu) & np.isfinite(gv)
    )

    A0, B0 = fu * fu, gu * gu
    A1, B1 = fu * fv, gu * gv
    A2, B2 = fv * fv, gv * gv

    m01 = A0 * B1 - B0 * A1
    m02 = A0 * B2 - B0 * A2
    m12 = A1 * B2 - B1 * A2
    minors = np.stack([m01, m02, m12])
    pick = np.argmax(np.abs(minors), axis=0)

    r0 = np.ones_like(gbar)
    r1 = np.zeros_like(gbar)
    r2 = gbar
    rows_a = (
        (A0, B0, r0, A1, B1, r1),
        (A0, B0, r0, A2, B2, r2),
        (A1, B1, r1, A2, B2, r2),
    )
    e_val = np.full_like(gbar, np.nan)
    g_val = np.full_like(gbar, np.nan)
    for k, (Aa, Ba, ra, Ab, Bb, rb) in enumerate(rows_a):
        m = minors[k]
        safe = np.where(m == 0.0, 1.0, m)
        ek = (ra * Bb - rb * Ba) / safe
        gk = (Aa * rb - Ab * ra) / safe
        sel = (pick == k) & (m != 0.0)
        e_val = np.where(sel, ek, e_val)
        g_val = np.where(sel, gk, g_val)

    g_closed = (gbar - A2) / np.where(B2 == 0.0, np.nan, B2)

    res0 = np.abs(e_val * A0 + g_val * B0 - r0)
    res1 = np.abs(e_val * A1 + g_val * B1 - r1)
    res2 = np.abs(e_val * A2 + g_val * B2 - r2)

    # batched determinants and SVD ranks on the certified nodes
    aug_det = np.full_like(gbar, np.nan)
    rank_c = np.full_like(gbar, np.nan)
    rank_a = np.full_like(gbar, np.nan)
    idx = np.flatnonzero(mask.ravel())
    if idx.size:
        coeff = np.empty((idx.size, 3, 2))
        coeff[:, 0, 0] = A0.ravel()[idx]
        coeff[:, 0, 1] = B0.ravel()[idx]
        coeff[:, 1, 0] = A1.ravel()[idx]
        coeff[:, 1, 1] = B1.ravel()[idx]
        coeff[:, 2, 0] = A2.ravel()[idx]
        coeff[:, 2, 1] = B2.ravel()[idx]
        rhs = np.stack(
            [r0.ravel()[idx], r1.ravel()[idx], r2.ravel()[idx]], axis=1
        )
        aug = np.concatenate([coeff, rhs[:, :, None]], axis=2)
        det = np.linalg.det(aug)
        sv_c = np.linalg.svd(coeff, compute_uv=False)
        sv_a = np.linalg.svd(aug, compute_uv=False)
        rc = np.sum(sv_c > RANK_REL_TOL * sv_c[:, :1], axis=1)
        ra_ = np.sum(sv_a > RANK_REL_TOL * sv_a[:, :1], axis=1)
        flat = aug_det.ravel()
        flat[idx] = det
        rank_c.ravel()[idx] = rc
        rank_a.ravel()[idx] = ra_

    def fld(arr):
        return ScalarField2D(grid, np.where(mask, arr, np.nan), mask=mask & np.isfinite(arr))

    return SystemReport(
        e_val=fld(e_val),
        g_val=fld(g_val),
        g_closed=fld(g_closed),
        rank_coeff=fld(rank_c),
        rank_aug=fld(rank_a),
        aug_det=fld(aug_det),
        row_residuals=(fld(res0), fld(res1), fld(res2)),
        mask=mask,
    )
