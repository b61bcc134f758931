"""End-to-end pipeline: solve, change parameters, solve the system, build
the chart, lift, compose, measure.

Chart selection: `base_curve = "auto"` fits a speed/slope profile to the
compatibility target G - 1 (G solved per node by the linear system) over
the image of the certified region, which is the only way the composite can
come close to reproducing the given metric; named curves ("line",
"circle:R", "kinked:R", "file:<path>") are taken verbatim at unit speed
and generally leave a large, honestly-reported compatibility gap.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import NonPositiveMetric
from .fields import Grid2D, ScalarField2D
from .initial import make_initial
from .ivp import SolveOptions, c2_defect_scan, solve_f, solve_g
from .metric import Rect, curvature_field, make_metric, validate_metric
from .plane import (
    ChartProfile,
    build_chart,
    chart_jacobian_min,
    fit_chart_profile,
    make_base_curve,
    s0_residuals,
)
from .report import (
    NodeTable,
    ResidualStat,
    VerificationReport,
    compatibility_residual,
    curvature_match,
    isometry_residual,
    write_report,
    write_system_csv,
)
from .reparam import build_param_change, jacobian_initial_closed_form
from .surface import compose, downsample_surface, export_obj, induced_metric, lift
from .system_s import solve_system_grid


@dataclass
class PipelineResult:
    config: RunConfig
    report: VerificationReport
    metric: object
    grid: Grid2D
    f_report: object
    g_report: object
    pc: object
    sys_report: object
    chart: object
    lifted: object
    composite: object
    iso: object
    defect: object

    @property
    def passed(self):
        return self.report.all_passed


def _interior_mask(mask, grid):
    """Nodes of `mask` whose four first-derivative stencils are central."""
    out = mask.copy()
    out[:, :2] = False
    out[:, -2:] = False
    for j in range(grid.nv):
        cols = np.flatnonzero(mask[:, j])
        if cols.size:
            out[cols[:2], j] = False
            out[cols[-2:], j] = False
    return out


def _sup_on(values, mask):
    sel = np.where(mask, values, np.nan)
    return float(np.nanmax(sel)) if mask.any() else float("nan")


def _mean_on(values, mask):
    sel = np.where(mask, values, np.nan)
    return float(np.nanmean(np.abs(sel))) if mask.any() else float("nan")


def resolve_chart_source(cfg: RunConfig, pc, sys_report):
    """Chart generator for the compose step (fitted profile or named curve)."""
    if cfg.base_curve == "auto":
        sel = pc.certified & sys_report.g_val.mask
        u_pts = pc.f.values[sel]
        v_pts = pc.g.values[sel]
        target = sys_report.g_val.values[sel]
        return fit_chart_profile(u_pts, v_pts, target)
    return make_base_curve(cfg.base_curve)


def _profile_nv_needed(source, v_lo, v_hi, u_max, v_range, lift_tol):
    """Chart v-count that keeps the lift-identity stencil error within budget.

    Bounds |d^3/dv^3 (c + u n)| from samples of the profile's speed A and
    turning angle theta, then sizes dv so the 2nd-order stencil truncation
    2 |x_v| dv^2/6 * S3 stays a factor 8 under the gate.
    """
    vs = np.linspace(v_lo, v_hi, 2001)
    a = np.asarray(source.speed(vs), dtype=float) * np.ones_like(vs)
    th = np.asarray(source.theta(vs), dtype=float) * np.ones_like(vs)
    a1 = np.gradient(a, vs)
    a2 = np.gradient(a1, vs)
    t1 = np.gradient(th, vs)
    t2 = np.gradient(t1, vs)
    t3 = np.gradient(t2, vs)
    c3 = np.abs(a2) + 2 * np.abs(a1 * t1) + np.abs(a * t2) + np.abs(a * t1**2)
    n3 = np.abs(t3) + 3 * np.abs(t1 * t2) + np.abs(t1) ** 3
    s3 = float(np.max(c3 + u_max * n3))
    xv_max = float(np.max(a + u_max * np.abs(np.asarray(source.slope(vs)))))
    if s3 <= 0 or xv_max <= 0:
        return 0
    dv_needed = np.sqrt(lift_tol * 6.0 / (8.0 * 2.0 * xv_max * s3))
    return int(np.ceil(v_range / dv_needed)) + 1


def chart_grid_for(pc, cfg: RunConfig, source=None) -> Grid2D:
    """Chart rectangle: bounding box of the certified image plus 10% margin.

    For fitted profiles the v-resolution is raised as needed to resolve the
    profile's own curvature at the lift-identity tolerance.
    """
    sel = pc.certified
    u_img = pc.f.values[sel]
    v_img = pc.g.values[sel]
    u_lo, u_hi = float(u_img.min()), float(u_img.max())
    v_lo, v_hi = float(v_img.min()), float(v_img.max())
    du = u_hi - u_lo
    dv = v_hi - v_lo
    pad_u = 0.1 * du if du > 0 else 1e-6
    pad_v = 0.1 * dv if dv > 0 else 1e-6
    nu, nv = cfg.chart_n_u, cfg.chart_n_v
    if isinstance(source, ChartProfile):
        u_max_abs = max(abs(u_lo - pad_u), abs(u_hi + pad_u))
        needed = _profile_nv_needed(source, v_lo - pad_v, v_hi + pad_v, u_max_abs,
                                    dv + 2 * pad_v, cfg.tolerances.lift_tol)
        nv = int(min(max(nv, needed), 8001))
    return Grid2D(
        u0=u_lo - pad_u, v0=v_lo - pad_v,
        du=(du + 2 * pad_u) / (nu - 1), dv=(dv + 2 * pad_v) / (nv - 1),
        nu=nu, nv=nv,
    )


def run_pipeline(cfg: RunConfig) -> PipelineResult:
    cfg.validate()
    tol = cfg.tolerances

    metric = make_metric(
        cfg.metric, domain=Rect(-cfg.metric_u_half, cfg.metric_u_half,
                                -cfg.metric_v_half, cfg.metric_v_half)
    )
    grid = Grid2D.centered(cfg.u_half, cfg.v_half, cfg.n_u, cfg.n_v)

    validation = validate_metric(metric, grid, tol=tol.positivity_floor,
                                 slope_bound=tol.slope_bound)
    if any(v.kind == "nonpositive" for v in validation.violations):
        raise NonPositiveMetric(
            f"metric '{cfg.metric}' is not positive on the requested grid"
        )

    init = make_initial(cfg.family, cfg.epsilon, cfg.delta)
    opts = SolveOptions(residual_tol=tol.residual_tol, cfl=tol.cfl, guard=tol.guard)
    f_report = solve_f(metric, init, grid, opts)
    g_report = solve_g(metric, f_report, init, grid, opts)

    pc = build_param_change(f_report, g_report, jac_tol=tol.jacobian_tol)

    # two routes to J on the initial line
    j0 = grid.row_index_of_v(0.0)
    us = grid.u_coords
    cf = jacobian_initial_closed_form(init.dh(us), init.dk(us), metric.eval(us, 0.0))
    row_ok = pc.certified[:, j0] & pc.jac.mask[:, j0]
    oracle_rel = _sup_on(np.abs(pc.jac.values[:, j0] - cf) / np.abs(cf), row_ok)

    sys_report = solve_system_grid(pc, metric)
    interior = _interior_mask(sys_report.mask, grid)

    source = resolve_chart_source(cfg, pc, sys_report)
    cgrid = chart_grid_for(pc, cfg, source)
    chart = build_chart(source, cgrid)
    s0_num = s0_residuals(chart, derivatives="numeric")
    s0_ana = s0_residuals(chart, derivatives="analytic")
    chart_jac_min = chart_jacobian_min(chart)
    # a C^1-only base curve kinks G0: the stencil comparison against the
    # closed form is resolution-limited in the kink cell, so only the
    # E0/F0 identities gate there (the analytic check still covers all
    # three rows); smooth sources gate the full triple
    chart_smooth = getattr(source, "regularity", "analytic") == "analytic"
    s0_gate_val = max(s0_num) if chart_smooth else max(s0_num[:2])

    lifted = lift(chart)
    le, lf, lg = induced_metric(lifted)
    lift_parts = (
        _sup_on(np.abs(le.values - 1.0), le.mask),
        _sup_on(np.abs(lf.values), lf.mask),
        _sup_on(np.abs(lg.values - (chart.g0.values + 1.0)), lg.mask),
    )
    # for C^1-only sources the F/G parts share the kink-cell limit and are
    # already gated through s0_numeric; only the exact E part holds 1e-6
    lift_dev = max(lift_parts) if chart_smooth else lift_parts[0]
    # min of EG - F^2 over every node with a computed metric (not over the
    # regularity mask, which would pre-filter exactly the degenerate nodes)
    reg_min = _sup_on(-(le.values * lg.values - lf.values**2), le.mask)
    reg_min = -reg_min if np.isfinite(reg_min) else float("nan")

    composite = compose(lifted, pc)
    iso = isometry_residual(composite, metric)

    k_fd = curvature_field(metric, grid, method="fd")
    if metric.has_analytic_curvature:
        k_ref = curvature_field(metric, grid, method="analytic")
        cm = k_fd.mask & k_ref.mask
        curv_dev = _sup_on(np.abs(k_fd.values - k_ref.values), cm)
    else:
        curv_dev = float("nan")
    # restrict the pullback to central-quality values of the solved G: the
    # one-sided boundary ring carries value noise that a second derivative
    # would amplify by 1/(J du)^2
    g_for_pullback = ScalarField2D(grid, sys_report.g_val.values, mask=interior)
    match_sup, _ = curvature_match(metric, g_for_pullback, pc,
                                   method="auto" if metric.has_analytic_curvature else "fd")

    dg_field = compatibility_residual(sys_report.g_val, chart, pc)

    defect = c2_defect_scan(f_report.field, threshold=tol.detector_tol)
    expect_defect = cfg.family == "c1_not_c2"
    if expect_defect:
        near = defect.near_initial_u()
        detector_ok = defect.found and near is not None and abs(near) <= 3 * grid.du
    else:
        detector_ok = not defect.found

    g_match_interior = _sup_on(
        np.abs(sys_report.g_val.values - sys_report.g_closed.values)
        / np.maximum(1.0, np.abs(sys_report.g_closed.values)),
        interior,
    )
    rank_and_det_ok = (
        (sys_report.rank_coeff.values == 2)
        & (sys_report.rank_aug.values == 2)
        & (np.abs(sys_report.aug_det.values) < tol.aug_det_tol)
    )
    rank_frac = float(rank_and_det_ok[sys_report.mask].sum() / max(1, sys_report.mask.sum()))
    pullback_sup = max(r.sup() for r in sys_report.row_residuals)
    e_dev_sup = _sup_on(np.abs(sys_report.e_val.values - 1.0), sys_report.mask)

    iso_e_sup, iso_f_sup, iso_g_sup = iso.sups()
    iso_e_mean, iso_f_mean, iso_g_mean = iso.means()

    residuals = {
        "pde_f": ResidualStat(f_report.max_residual, f_report.residual.mean_abs(),
                              tol.residual_tol, gated=True),
        "pde_g": ResidualStat(g_report.max_residual, g_report.residual.mean_abs(),
                              tol.residual_tol, gated=True),
        "jacobian_oracle_rel": ResidualStat(oracle_rel, tol=tol.jacobian_oracle_tol, gated=True),
        "aug_det": ResidualStat(sys_report.aug_det.sup(), sys_report.aug_det.mean_abs()),
        "pullback_rows": ResidualStat(pullback_sup, tol=tol.pullback_tol, gated=True),
        "e_val_dev": ResidualStat(e_dev_sup, tol=tol.e_val_tol, gated=True),
        "g_match_rel_interior": ResidualStat(g_match_interior, tol=tol.g_match_rel_tol, gated=True),
        "g_match_rel_full": ResidualStat(sys_report.g_match_rel_sup()),
        "s0_numeric": ResidualStat(s0_gate_val, tol=tol.s0_tol, gated=True),
        "s0_analytic": ResidualStat(max(s0_ana), tol=tol.s0_analytic_tol, gated=True),
        "lift_identity": ResidualStat(lift_dev, tol=tol.lift_tol, gated=True),
        "curvature_stencil": ResidualStat(curv_dev, tol=tol.curvature_tol,
                                          gated=metric.has_analytic_curvature),
        "curvature_match": ResidualStat(match_sup),
        "isometry_e": ResidualStat(iso_e_sup, iso_e_mean, tol.e_res_tol,
                                   gated=tol.gate_isometry),
        "isometry_f": ResidualStat(iso_f_sup, iso_f_mean, tol.f_res_tol,
                                   gated=tol.gate_isometry),
        "isometry_g": ResidualStat(iso_g_sup, iso_g_mean),
        "compat_dG": ResidualStat(dg_field.sup(), dg_field.mean_abs()),
    }

    verdicts = {
        "metric_valid": validation.ok,
        "rank_fraction": rank_frac >= tol.rank_fraction,
        "chart_injective": chart_jac_min > 0.0,
        "lift_regular": np.isfinite(reg_min) and reg_min >= 1.0 - 1e-9,
        "detector": detector_ok,
    }
    for name, stat in residuals.items():
        if stat.passed is not None:
            verdicts[name] = stat.passed

    total = grid.nu * grid.nv
    meta = {
        "config": cfg.to_meta(),
        "orientation": pc.orientation,
        "certified_count": int(pc.certified.sum()),
        "composite_valid_count": int(composite.mask.sum()),
        "rank_ok_fraction": rank_frac,
        "lift_eg_f2_min": reg_min,
        "chart_jacobian_min": chart_jac_min,
        "chart_smooth_source": chart_smooth,
        "s0_numeric_triple": list(s0_num),
        "lift_identity_triple": list(lift_parts),
        "solver_steps": int(f_report.steps + g_report.steps),
        "detector_hits": len(defect.hits),
        "detector_near_initial_u": defect.near_initial_u(),
        # the flagged second-difference-jump locus, thinned for the report
        "defect_locus": [
            {"vbar": h.v, "ubar": h.u, "jump": h.jump}
            for h in defect.hits[:: max(1, len(defect.hits) // 20)]
        ],
        "g_cramer_center": float(sys_report.g_val.values[grid.nu // 2, j0])
        if sys_report.g_val.mask[grid.nu // 2, j0] else None,
    }

    report = VerificationReport(
        meta=meta,
        residuals=residuals,
        verdicts=verdicts,
        masked_count=int(total - pc.certified.sum()),
    )

    return PipelineResult(
        config=cfg, report=report, metric=metric, grid=grid,
        f_report=f_report, g_report=g_report, pc=pc, sys_report=sys_report,
        chart=chart, lifted=lifted, composite=composite, iso=iso, defect=defect,
    )


def write_outputs(result: PipelineResult):
    """Write report JSON, residual CSV, system CSV and optional meshes."""
    cfg = result.config
    os.makedirs(cfg.out_dir, exist_ok=True)
    json_path = os.path.join(cfg.out_dir, cfg.report_json)
    csv_path = os.path.join(cfg.out_dir, cfg.residual_csv)
    table = NodeTable(
        grid=result.grid,
        f=result.f_report.field,
        g=result.g_report.field,
        jac=result.pc.jac,
        e_res=result.iso.e_res,
        f_res=result.iso.f_res,
        g_res=result.iso.g_res,
        aug_det=result.sys_report.aug_det,
        dg=compatibility_residual(result.sys_report.g_val, result.chart, result.pc),
    )
    write_report(result.report, json_path, csv_path, table)
    if cfg.system_csv:
        write_system_csv(os.path.join(cfg.out_dir, cfg.system_csv),
                         result.grid, result.sys_report)
    if cfg.mesh_out:
        # the lifted surface may live on an auto-refined chart grid; cap the
        # exported mesh at the configured chart resolution
        lifted_mesh = downsample_surface(result.lifted,
                                         max(cfg.chart_n_u, cfg.chart_n_v))
        export_obj(lifted_mesh, os.path.join(cfg.out_dir, cfg.mesh_out + "_lifted.obj"))
        export_obj(result.composite, os.path.join(cfg.out_dir, cfg.mesh_out + "_composite.obj"))
    return json_path, csv_path
