"""Residual measurements and machine-readable run reports.

Everything the construction claims is measured as a non-negative residual
field and folded into sup/mean summaries with explicit tolerances; a
verdict is `value < tol` and nothing else, so loosening a tolerance can
only flip fail -> pass. Reports serialize to one JSON document (summaries,
verdicts, metadata) and one CSV of per-node values whose column set is
fixed; masked cells carry the literal token NA. Identical configurations
produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import IoFailure
from .fields import ScalarField2D
from .metric import GeodesicMetric2D, curvature_field
from .reparam import ParamChange
from .surface import EmbeddedSurface, induced_metric

CSV_COLUMNS = ("ubar", "vbar", "f", "g", "J", "E_res", "F_res", "G_res", "aug_det", "dG")


@dataclass
class IsometryResiduals:
    e_res: ScalarField2D
    f_res: ScalarField2D
    g_res: ScalarField2D

    def sups(self):
        return self.e_res.sup(), self.f_res.sup(), self.g_res.sup()

    def means(self):
        return self.e_res.mean_abs(), self.f_res.mean_abs(), self.g_res.mean_abs()


def isometry_residual(surface: EmbeddedSurface, metric: GeodesicMetric2D) -> IsometryResiduals:
    """Per-node |E - 1|, |F|, |G_induced - Gbar| of a surface over (ubar, vbar)."""
    e, f, g = induced_metric(surface)
    U, V = surface.grid.meshgrid()
    gbar = np.asarray(metric.g_fn(U, V), dtype=float) * np.ones_like(U)
    mask = e.mask
    grid = surface.grid
    return IsometryResiduals(
        e_res=ScalarField2D(grid, np.abs(e.values - 1.0), mask=mask),
        f_res=ScalarField2D(grid, np.abs(f.values), mask=mask),
        g_res=ScalarField2D(grid, np.abs(g.values - gbar), mask=mask),
    )


def pullback_curvature(g_unbarred: ScalarField2D, pc: ParamChange) -> ScalarField2D:
    """Curvature of a du^2 + G dv^2 coefficient given on (ubar, vbar) nodes.

    K = -(sqrt G)_uu / sqrt G needs u-derivatives; they are taken through
    the parameter change with the inverse-Jacobian chain rule
    d/du = (g_v d/dubar - g_u d/dvbar) / J, entirely on the solve grid.
    """
    grid = g_unbarred.grid
    gu = pc.g.d_u().values
    gv = pc.g.d_v().values
    jac = pc.jac.values

    vals = g_unbarred.values
    pos = g_unbarred.mask & (vals > 0.0)
    w_vals = np.where(pos, np.sqrt(np.where(pos, vals, 1.0)), np.nan)
    w = ScalarField2D(grid, w_vals, mask=pos)

    # central-only stencils: each pass erodes the mask instead of feeding
    # boundary-order junk into the next derivative
    def d_du(fld: ScalarField2D) -> ScalarField2D:
        a = fld.d_u(one_sided=False).values
        b = fld.d_v(one_sided=False).values
        out = (gv * a - gu * b) / jac
        return ScalarField2D(grid, out, mask=fld.mask & np.isfinite(out))

    w_u = d_du(w)
    w_uu = d_du(w_u)
    k = -w_uu.values / w.values
    return ScalarField2D(grid, k, mask=w_uu.mask & np.isfinite(k))


def curvature_match(metric: GeodesicMetric2D, g_unbarred: ScalarField2D,
                    pc: ParamChange, method="auto") -> tuple:
    """sup |K(Gbar) - K(G) pulled back| and the difference field."""
    k_bar = curvature_field(metric, g_unbarred.grid, method=method)
    k_pull = pullback_curvature(g_unbarred, pc)
    diff = np.abs(k_bar.values - k_pull.values)
    mask = k_bar.mask & k_pull.mask & np.isfinite(diff)
    fld = ScalarField2D(g_unbarred.grid, diff, mask=mask)
    return fld.sup(), fld


def compatibility_residual(g_cramer: ScalarField2D, chart, pc: ParamChange) -> ScalarField2D:
    """dG(node) = |G_cramer(node) - (G0(f, g)(node) + 1)|.

    Measures how far the chosen chart is from realizing the solved metric
    coefficient; the construction itself leaves this gap unconstrained.
    """
    grid = g_cramer.grid
    g0_vals, ok = chart.g0.interp(pc.f.values, pc.g.values)
    dg = np.abs(g_cramer.values - (g0_vals + 1.0))
    mask = g_cramer.mask & ok & pc.certified & np.isfinite(dg)
    return ScalarField2D(grid, dg, mask=mask)


@dataclass
class ResidualStat:
    sup: float
    mean: float = float("nan")
    tol: float = None
    gated: bool = False

    @property
    def passed(self):
        if not self.gated or self.tol is None:
            return None
        return bool(np.isfinite(self.sup) and self.sup < self.tol)

    def to_json(self):
        out = {"sup": _num(self.sup), "mean": _num(self.mean)}
        if self.tol is not None:
            out["tol"] = _num(self.tol)
        out["gated"] = self.gated
        if self.passed is not None:
            out["pass"] = self.passed
        return out


def _num(x):
    if x is None:
        return None
    x = float(x)
    if np.isnan(x):
        return "NA"
    return x


@dataclass
class VerificationReport:
    meta: dict
    residuals: dict  # name -> ResidualStat | plain dict
    verdicts: dict  # name -> bool
    masked_count: int

    @property
    def all_passed(self):
        return all(self.verdicts.values())

    def to_json_dict(self):
        res = {}
        for name, stat in self.residuals.items():
            res[name] = stat.to_json() if isinstance(stat, ResidualStat) else stat
        return {
            "schema_version": "1",
            "meta": self.meta,
            "residuals": res,
            "verdicts": {k: bool(v) for k, v in self.verdicts.items()},
            "masked_count": int(self.masked_count),
        }


@dataclass
class NodeTable:
    """Per-node columns of the residual CSV (None column -> all NA)."""

    grid: object
    f: ScalarField2D = None
    g: ScalarField2D = None
    jac: ScalarField2D = None
    e_res: ScalarField2D = None
    f_res: ScalarField2D = None
    g_res: ScalarField2D = None
    aug_det: ScalarField2D = None
    dg: ScalarField2D = None

    def fields_in_order(self):
        return (self.f, self.g, self.jac, self.e_res, self.f_res, self.g_res,
                self.aug_det, self.dg)


def _cell(fld, i, j):
    if fld is None or not fld.mask[i, j]:
        return "NA"
    v = fld.values[i, j]
    if not np.isfinite(v):
        return "NA"
    return f"{v:.17g}"


def write_report(report: VerificationReport, json_path, csv_path, table: NodeTable = None):
    """Emit the JSON verdict document and (when a table is given) the node CSV."""
    try:
        with open(json_path, "w") as fh:
            json.dump(report.to_json_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write report {json_path}: {exc}") from exc
    if csv_path is None or table is None:
        return
    grid = table.grid
    us = grid.u_coords
    vs = grid.v_coords
    try:
        with open(csv_path, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i in range(grid.nu):
                for j in range(grid.nv):
                    row = [f"{us[i]:.17g}", f"{vs[j]:.17g}"]
                    row += [_cell(fld, i, j) for fld in table.fields_in_order()]
                    fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write CSV {csv_path}: {exc}") from exc


def write_system_csv(path, grid, sys_report):
    """Side table of the per-node linear-system solve."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write("node,E_val,G_val,G_closed_form,rank_coeff,rank_aug,aug_det\n")
            for i in range(grid.nu):
                for j in range(grid.nv):
                    if not sys_report.mask[i, j]:
                        continue
                    cells = [
                        f"({i};{j})",
                        _cell(sys_report.e_val, i, j),
                        _cell(sys_report.g_val, i, j),
                        _cell(sys_report.g_closed, i, j),
                    ]
                    rc = sys_report.rank_coeff.values[i, j]
                    ra = sys_report.rank_aug.values[i, j]
                    cells.append("NA" if not np.isfinite(rc) else str(int(rc)))
                    cells.append("NA" if not np.isfinite(ra) else str(int(ra)))
                    cells.append(_cell(sys_report.aug_det, i, j))
                    fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write CSV {path}: {exc}") from exc
