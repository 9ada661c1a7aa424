"""Command line interface for solving and verifying the metric families.

Layout: three groups. `bianchi` integrates the diagonal frame flows and
checks them against the explicit families, `e2` handles the complete E(2)
shooting problem and its bolt, `pde` runs the leaf-data pipeline from
conformal factors to an assembled Ricci-flat 4-metric.

Every run writes a manifest.json recording the subcommand, the full
parameter set, the tolerances, the seed and sha256 checksums of all
artifacts, so runs are reproducible bit for bit. Time series are CSV,
grids and reports JSON.

Exit codes: 0 success; 1 usage or domain error; 2 expected mathematical
termination (blow-up or early stop, partial artifacts are still written);
3 verification failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bianchi as bi
from . import e2flow as e2
from . import leafpde as lp
from .curvature import (convergence_order, einstein_residual,
                        exterior_derivative_closedness, gauss_curvature_2d,
                        riemann_max)
from .errors import (CompatibilityError, DomainError, GridError,
                     VerificationError)
from .grids import Axis, MetricGrid, TwoFormGrid
from .manifest import RunManifest, dump_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MATH = 2
EXIT_VERIFY = 3

_CASE_SPANS = {"poincare": (0.4, 1.1), "torus": (0.0, 2.0),
               "heisenberg": (1.0, 2.0), "euclidean": (1.0, 2.0)}


def _parse_floats(text: str, n: int, label: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise click.UsageError(f"{label} must be {n} comma-separated numbers")
    if len(vals) != n:
        raise click.UsageError(f"{label} must have {n} entries, got {len(vals)}")
    return vals


def _nanmax_abs(arr: np.ndarray) -> float:
    vals = np.abs(np.asarray(arr, dtype=np.float64))
    if not np.any(np.isfinite(vals)):
        raise GridError("no finite values to reduce")
    return float(np.nanmax(vals))


@click.group()
@click.option("--tol", type=float, default=None,
              help="Override the command's main tolerance.")
@click.option("--out-dir", type=click.Path(file_okay=False), default=".",
              show_default=True, help="Directory for artifacts.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed recorded in the manifest (for randomized sweeps).")
@click.pass_context
def cli(ctx, tol, out_dir, seed):
    """Cohomogeneity-one Einstein metrics: solve, construct, verify."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx.obj = {"tol": tol, "out_dir": out, "seed": seed}


def _manifest(ctx, subcommand: str, parameters: dict, tolerances: dict) -> RunManifest:
    return RunManifest(subcommand=subcommand,
                       parameters=parameters,
                       tolerances=tolerances,
                       seed=ctx.obj["seed"])


# ---------------------------------------------------------------------------
# bianchi


@cli.group()
def bianchi():
    """Diagonal type A frame flows a, b, c."""


@bianchi.command("solve")
@click.option("--p1", type=float, default=None, help="Structure sign p1.")
@click.option("--p2", type=float, default=None, help="Structure sign p2.")
@click.option("--p3", type=float, default=None, help="Structure sign p3.")
@click.option("--lam", type=float, default=0.0, show_default=True,
              help="Einstein constant (must be 0 when p3 = 0).")
@click.option("--alpha", type=float, default=None,
              help="Free constant of the p3 = 0 flow.")
@click.option("--case", "case_name", type=click.Choice(bi.CLOSED_FORM_CASES),
              default=None, help="Start on a known explicit family and "
              "verify the run against it.")
@click.option("--alpha-eq-ab", is_flag=True,
              help="Torus case: pin alpha = a0 b0 and check flatness.")
@click.option("--k", type=float, default=1.0, show_default=True)
@click.option("--w3", type=float, default=1.0, show_default=True)
@click.option("--t0", type=float, default=0.0, show_default=True)
@click.option("--a0", type=float, default=1.0, show_default=True)
@click.option("--b0", type=float, default=1.0, show_default=True)
@click.option("--c0", type=float, default=1.0, show_default=True)
@click.option("--start", default=None,
              help="Explicit start t,a,b,c (required without --case).")
@click.option("--t-start", type=float, default=None,
              help="Start time on the explicit family.")
@click.option("--t-end", type=float, default=None, help="Integration target.")
@click.option("--samples", type=int, default=200, show_default=True,
              help="Comparison points for the explicit-family check.")
@click.pass_context
def bianchi_solve(ctx, p1, p2, p3, lam, alpha, case_name, alpha_eq_ab,
                  k, w3, t0, a0, b0, c0, start, t_start, t_end, samples):
    """Integrate one flow; verify against the matching explicit family."""
    tol = ctx.obj["tol"] if ctx.obj["tol"] is not None else 1e-10
    match_bound = max(1.0e4 * tol, 1e-8)
    flat_bound = 1e-6

    consts = None
    if case_name is not None:
        if alpha_eq_ab:
            if case_name != "torus":
                raise click.UsageError("--alpha-eq-ab only applies to the torus case")
            alpha = a0 * b0
        consts = bi.ClosedFormConstants(k=k, w3=w3, alpha=alpha or 0.0,
                                        t0=t0, a0=a0, b0=b0, c0=c0)
        params = bi.closed_form_params(case_name, consts)
        span = _CASE_SPANS[case_name]
        t_begin = t_start if t_start is not None else t0 + span[0]
        t_stop = t_end if t_end is not None else t0 + span[1]
        s0 = bi.closed_form(case_name, consts, t_begin)
    else:
        if p1 is None or p2 is None or p3 is None:
            raise click.UsageError("give --p1/--p2/--p3 or pick a --case")
        if start is None or t_end is None:
            raise click.UsageError("without --case, --start and --t-end are required")
        tv, av, bv, cv = _parse_floats(start, 4, "--start")
        params = bi.BianchiParams(p1, p2, p3, lam=lam, alpha0=alpha)
        s0 = bi.ABCState(t=tv, a=av, b=bv, c=cv)
        t_stop = t_end

    mf = _manifest(ctx, "bianchi solve",
                   {"p1": params.p1, "p2": params.p2, "p3": params.p3,
                    "lam": params.lam, "alpha0": params.alpha0,
                    "case": case_name, "alpha_eq_ab": alpha_eq_ab,
                    "constants": consts.__dict__ if consts else None,
                    "start": [s0.t, s0.a, s0.b, s0.c], "t_end": t_stop,
                    "samples": samples},
                   {"integrator_tol": tol, "closed_form_match": match_bound,
                    "flatness": flat_bound})
    out = ctx.obj["out_dir"]

    traj = bi.integrate(params, s0, t_stop, tol=tol)
    mf.write_text(traj.to_csv(), out / "trajectory.csv")

    report = {"stop_reason": traj.stop_reason, "blow_up": traj.blow_up,
              "n_steps": traj.n_steps, "t_final": float(traj.t[-1]),
              "final_state": [float(v) for v in traj.states[-1]]}

    matched = None
    if case_name is not None and not traj.blow_up:
        ts = np.linspace(traj.t[0], traj.t[-1], samples + 2)[1:-1]
        numeric = np.asarray(traj.sample(ts)).T
        dev = 0.0
        for i, tv in enumerate(ts):
            ref = bi.closed_form(case_name, consts, float(tv))
            exact = np.array([ref.a, ref.b, ref.c])
            dev = max(dev, float(np.max(np.abs(numeric[i] - exact) / exact)))
        matched = dev <= match_bound
        report["closed_form"] = {"case": case_name, "max_rel_deviation": dev,
                                 "bound": match_bound, "matched": matched}

    flat = None
    if case_name == "torus" and not traj.blow_up:
        h = 1e-3
        t_mid = 0.5 * (traj.t[0] + traj.t[-1])
        t_axis = Axis("t", t_mid - 3.0 * h, h, 7)
        grid = bi.torus_metric_grid(consts, t_axis, manifest=mf.header())
        mf.write_text(grid.to_json(), out / "torus_metric.json")
        rmax = riemann_max(grid)
        eres = einstein_residual(grid, params.lam)
        flat = rmax <= flat_bound
        report["torus_flatness"] = {"max_riemann": rmax,
                                    "einstein_residual": eres,
                                    "bound": flat_bound, "flat": flat}

    mf.write_json(report, out / "bianchi_report.json")
    mf.save(out)

    if traj.blow_up:
        click.echo(f"terminated: {traj.stop_reason} at t = {traj.t[-1]:.6g} "
                   f"(partial trajectory written)")
        return EXIT_MATH
    click.echo(f"reached t = {traj.t[-1]:.6g} in {traj.n_steps} steps "
               f"({traj.stop_reason})")
    if matched is not None:
        click.echo(f"explicit-family deviation "
                   f"{report['closed_form']['max_rel_deviation']:.3e} "
                   f"(bound {match_bound:.1e})")
        if not matched:
            raise VerificationError("numerical run left the explicit family")
    if flat is not None:
        click.echo(f"torus curvature max {report['torus_flatness']['max_riemann']:.3e}")
        if alpha_eq_ab and not flat:
            raise VerificationError("alpha = a0 b0 torus metric is not flat "
                                    "to tolerance")
    return EXIT_OK


# ---------------------------------------------------------------------------
# e2


@cli.group("e2")
def e2grp():
    """Complete E(2) family: shooting, diagnostics, bolt."""


def _reshoot(traj) -> "object":
    """Re-run a shoot deterministically from the metadata in a CSV artifact.

    CSV round trips drop the dense interpolant, which the arclength and
    bolt analyses need, so the run is reproduced and cross-checked against
    the stored samples before use.
    """
    meta = traj.meta
    if "q" not in meta or "b_max" not in meta:
        raise DomainError("trajectory lacks shoot metadata; "
                          "produce it with 'e2 shoot'")
    start = None if meta.get("r_origin") == "tail" else tuple(meta["start"])
    if traj.stop_reason.startswith("event:"):
        t_max = max(500.0, 2.0 * float(traj.t[-1]))
    else:
        t_max = float(traj.t[-1])
    fresh = e2.shoot_unstable(meta["q"], eps=meta["eps"], b_max=meta["b_max"],
                              t_max=t_max, tol=traj.rtol, start=start)
    n = min(len(traj.t), len(fresh.t))
    scale = np.maximum(np.abs(traj.states[:n]), 1e-30)
    dev = float(np.max(np.abs(fresh.states[:n] - traj.states[:n]) / scale))
    if len(fresh.t) != len(traj.t) or dev > 1e-9:
        raise VerificationError(f"re-shoot deviates from the stored "
                                f"trajectory (rel {dev:.3e}); artifact stale?")
    return fresh


@e2grp.command("shoot")
@click.option("--q", type=float, default=1.0, show_default=True,
              help="Saddle parameter (a, b, c) = (q, 0, q).")
@click.option("--eps", type=float, default=None,
              help="Displacement along the unstable direction [default q*1e-5].")
@click.option("--b-max", type=float, default=100.0, show_default=True,
              help="Stop once b reaches this value.")
@click.option("--t-max", type=float, default=500.0, show_default=True)
@click.option("--start", default=None,
              help="Custom start a,b,c instead of the unstable tail.")
@click.pass_context
def e2_shoot(ctx, q, eps, b_max, t_max, start):
    """Shoot from the saddle tail and record trajectory + diagnostics."""
    tol = ctx.obj["tol"] if ctx.obj["tol"] is not None else 1e-12
    start_state = _parse_floats(start, 3, "--start") if start else None
    mf = _manifest(ctx, "e2 shoot",
                   {"q": q, "eps": eps, "b_max": b_max, "t_max": t_max,
                    "start": list(start_state) if start_state else None},
                   {"integrator_tol": tol})
    out = ctx.obj["out_dir"]

    traj = e2.shoot_unstable(q, eps=eps, b_max=b_max, t_max=t_max, tol=tol,
                             start=start_state)
    mf.write_text(traj.to_csv(), out / "e2_trajectory.csv")
    diag = e2.diagnose(traj)
    mf.write_json({"stop_reason": traj.stop_reason, "blow_up": traj.blow_up,
                   "n_steps": traj.n_steps, "t_final": float(traj.t[-1]),
                   "final_state": [float(v) for v in traj.states[-1]],
                   "diagnostics": diag.to_dict()},
                  out / "e2_diagnostics.json")
    mf.save(out)

    ok = traj.stop_reason == "event:b_max" and not traj.blow_up
    click.echo(f"stop: {traj.stop_reason}, b final = {traj.column('b')[-1]:.6g}, "
               f"region_ok = {diag.region_ok}")
    return EXIT_OK if ok else EXIT_MATH


@e2grp.command("diagnose")
@click.argument("traj_csv", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def e2_diagnose(ctx, traj_csv):
    """Re-run a stored shoot and evaluate the qualitative diagnostics."""
    stored = e2.Trajectory.from_csv(Path(traj_csv).read_text())
    mf = _manifest(ctx, "e2 diagnose", {"traj_csv": str(traj_csv),
                                        "meta": dict(stored.meta)}, {})
    out = ctx.obj["out_dir"]

    fresh = _reshoot(stored)
    diag = e2.diagnose(fresh)
    doc = diag.to_dict()
    doc["monotone_all"] = all(doc["monotone_ok"].values())
    mf.write_json(doc, out / "e2_diagnostics.json")
    mf.save(out)

    failures = [name for name, ok in
                (("region", diag.region_ok), ("nullcline", diag.nullcline_ok),
                 ("monotone", doc["monotone_all"]))
                if not ok]
    click.echo(f"region_ok = {diag.region_ok}, nullcline_ok = "
               f"{diag.nullcline_ok}, monotone = {doc['monotone_all']}, "
               f"kp_fit = {diag.kp_fit}")
    if failures:
        raise VerificationError("diagnostics failed: " + ", ".join(failures))
    return EXIT_OK


@e2grp.command("bolt")
@click.argument("traj_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--r-max", type=float, default=0.4, show_default=True,
              help="Outer arclength radius of the profile.")
@click.option("--n", type=int, default=200, show_default=True,
              help="Log-spaced sample count.")
@click.option("--r0", type=float, default=None,
              help="Anchor radius for the Richardson ladder.")
@click.pass_context
def e2_bolt(ctx, traj_csv, r_max, n, r0):
    """Arclength profile near r = 0 and the bolt smoothness extrapolation."""
    tol = ctx.obj["tol"] if ctx.obj["tol"] is not None else 1e-4
    stored = e2.Trajectory.from_csv(Path(traj_csv).read_text())
    if stored.meta.get("r_origin") != "tail":
        raise DomainError("bolt analysis needs a tail-seeded shoot "
                          "(custom --start has no bolt at r = 0)")
    mf = _manifest(ctx, "e2 bolt",
                   {"traj_csv": str(traj_csv), "r_max": r_max, "n": n,
                    "r0": r0, "meta": dict(stored.meta)},
                   {"db_dr_bound": tol})
    out = ctx.obj["out_dir"]

    fresh = _reshoot(stored)
    profile = e2.bolt_profile(fresh, r_max=r_max, n=n)
    mf.write_text(profile.to_csv(), out / "bolt_profile.csv")
    sm = e2.bolt_smoothness(profile, r0=r0)
    doc = sm.to_dict()
    doc["db_dr_deviation"] = abs(sm.db_dr_limit - 1.0)
    doc["db_dr_bound"] = tol
    doc["smooth"] = doc["db_dr_deviation"] <= tol
    mf.write_json(doc, out / "bolt_report.json")
    mf.save(out)

    click.echo(f"db/dr -> {sm.db_dr_limit:.8f} (deviation "
               f"{doc['db_dr_deviation']:.3e}, bound {tol:.1e})")
    if not doc["smooth"]:
        raise VerificationError("bolt profile fails the db/dr = 1 "
                                "smoothness check")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pde


@cli.group()
def pde():
    """Leaf data to Ricci-flat 4-metric pipeline."""


@pde.command("leaf-build")
@click.option("--h-expr", default="x", show_default=True,
              help="Harmonic function as an expression in x, y.")
@click.option("--domain", default="0,1,1,2", show_default=True,
              help="Rectangle x0,x1,y0,y1.")
@click.option("--n", type=int, default=257, show_default=True,
              help="Nodes per axis (square grid unless --nx/--ny).")
@click.option("--nx", type=int, default=None)
@click.option("--ny", type=int, default=None)
@click.option("--ell-axis", type=click.Choice(["y", "x"]), default="y",
              show_default=True,
              help="Conformal factor 1/(2 s^2) built from this coordinate.")
@click.pass_context
def pde_leaf_build(ctx, h_expr, domain, n, nx, ny, ell_axis):
    """Validate leaf data and report the curvature checks on its metric."""
    x0, x1, y0, y1 = _parse_floats(domain, 4, "--domain")
    nx = nx or n
    ny = ny or n
    if nx < 5 or ny < 5 or x1 <= x0 or y1 <= y0:
        raise click.UsageError("domain must be nondegenerate with >= 5 nodes per axis")
    x_axis = Axis("x", x0, (x1 - x0) / (nx - 1), nx)
    y_axis = Axis("y", y0, (y1 - y0) / (ny - 1), ny)
    if ell_axis == "y":
        ell = None
    else:
        with np.errstate(divide="ignore"):
            ell = np.broadcast_to(1.0 / (2.0 * x_axis.nodes[:, None] ** 2),
                                  (nx, ny)).copy()

    mf = _manifest(ctx, "pde leaf-build",
                   {"h_expr": h_expr, "domain": [x0, x1, y0, y1],
                    "nx": nx, "ny": ny, "ell_axis": ell_axis}, {})
    out = ctx.obj["out_dir"]

    spec = lp.leaf_spec(x_axis, y_axis, h=h_expr, ell=ell)
    mf.write_json(spec.to_json(), out / "leafspec.json")

    g, K = lp.leaf_metric(spec)
    gauss_dev = _nanmax_abs(gauss_curvature_2d(g) - K)
    pde_rep = lp.leaf_pde_residual(g, K)
    rescaled = MetricGrid(g.axes, g.components * K[..., None, None])
    conformal_dev = _nanmax_abs(gauss_curvature_2d(rescaled) + 2.0)
    mf.write_json({"gauss_curvature_deviation": gauss_dev,
                   "leaf_pde_residual": pde_rep.max_residual,
                   "leaf_pde_excluded_nodes": pde_rep.n_excluded,
                   "rescaled_curvature_deviation": conformal_dev,
                   "step": [x_axis.step, y_axis.step]},
                  out / "leaf_report.json")
    mf.save(out)

    click.echo(f"gauss dev {gauss_dev:.3e}, leaf residual "
               f"{pde_rep.max_residual:.3e}, rescaled curvature dev "
               f"{conformal_dev:.3e}")
    return EXIT_OK


@pde.command("profile")
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="leafspec.json from leaf-build.")
@click.option("--nx", type=int, default=None,
              help="Nodes along each geodesic [default: source count].")
@click.option("--ny", type=int, default=None,
              help="Base-curve nodes [default: source count - 2].")
@click.option("--step", type=float, default=None,
              help="Profile step [default: source step].")
@click.option("--y-start", type=float, default=None,
              help="First base-curve seed [default: one node in].")
@click.option("--substeps", type=int, default=4, show_default=True,
              help="Geodesic integrator substeps per profile step.")
@click.pass_context
def pde_profile(ctx, spec_path, nx, ny, step, y_start, substeps):
    """Shoot geodesics off the left edge and extract the profile c(x, y)."""
    spec = lp.LeafSpec.from_json(json.loads(Path(spec_path).read_text()))
    g, _ = lp.leaf_metric(spec)
    sx, sy = g.axes
    hp = step if step is not None else sx.step
    if nx or step is not None:
        x_axis = Axis("x", 0.0, hp, nx if nx else sx.count)
    else:
        x_axis = None
    if ny or y_start is not None or step is not None:
        y_axis = Axis(sy.name,
                      y_start if y_start is not None else sy.start + hp,
                      hp, ny if ny else sy.count - 2)
    else:
        y_axis = None

    mf = _manifest(ctx, "pde profile",
                   {"spec": str(spec_path), "nx": nx, "ny": ny, "step": step,
                    "y_start": y_start, "substeps": substeps}, {})
    out = ctx.obj["out_dir"]

    cp = lp.geodesic_parallel_profile(g, x_axis, y_axis, substeps=substeps)
    mf.write_json(cp.to_json(), out / "cprofile.json")
    mf.write_json({"coverage": cp.coverage, "truncated": cp.truncated,
                   "truncation_reason": cp.truncation_reason,
                   "c_min": float(np.nanmin(cp.c)),
                   "c_max": float(np.nanmax(cp.c)),
                   "shape": list(cp.c.shape)},
                  out / "profile_report.json")
    mf.save(out)

    click.echo(f"profile {cp.c.shape[0]}x{cp.c.shape[1]}, coverage "
               f"{cp.coverage:.3f}, truncated = {cp.truncated}")
    return EXIT_OK


@pde.command("construct")
@click.option("--profile", "profile_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="cprofile.json from the profile step.")
@click.option("--init", default="1,0,0,1", show_default=True,
              help="Frame initial data a,b,r,s at the window corner.")
@click.option("--compat-threshold", type=float, default=None,
              help="Abort if the mixed-partial residual exceeds this.")
@click.pass_context
def pde_construct(ctx, profile_path, init, compat_threshold):
    """Solve the linear frame system and assemble the 4-metric + form."""
    cp = lp.CProfile.from_json(json.loads(Path(profile_path).read_text()))
    init_vals = _parse_floats(init, 4, "--init")
    mf = _manifest(ctx, "pde construct",
                   {"profile": str(profile_path), "init": list(init_vals),
                    "compat_threshold": compat_threshold}, {})
    out = ctx.obj["out_dir"]

    fields = lp.reduced_fields(cp)
    s2 = lp.sys2_residuals(fields, cp)
    report = {"sys2": {"radial_R": s2.radial_R, "transverse_R": s2.transverse_R,
                       "radial_L": s2.radial_L, "mixed_PQ": s2.mixed_PQ,
                       "second_order": s2.second_order,
                       "excluded_nodes": s2.n_excluded}}
    coeffs = lp.vecsys_coefficients(fields)
    try:
        sol = lp.integrate_vecsys(coeffs, cp, init=init_vals,
                                  compat_threshold=compat_threshold)
    except CompatibilityError as exc:
        report["error"] = str(exc)
        mf.write_json(report, out / "construct_report.json")
        mf.save(out)
        raise

    g4, form = lp.assemble_four_metric(sol, cp, manifest=mf.header())
    mf.write_text(g4.to_json(), out / "metric.json")
    mf.write_text(form.to_json(), out / "kahler.json")
    report.update({"compat_residual": sol.compat_residual, "det0": sol.det0,
                   "det_drift": sol.det_drift,
                   "window_offset": list(sol.meta.get("window_offset", (0, 0))),
                   "window_shape": list(sol.a.shape)})
    mf.write_json(report, out / "construct_report.json")
    mf.save(out)

    click.echo(f"window {sol.a.shape[0]}x{sol.a.shape[1]}, compat residual "
               f"{sol.compat_residual:.3e}, det drift {sol.det_drift:.3e}")
    return EXIT_OK


def _coarsen(grid: MetricGrid, factor: int) -> MetricGrid:
    """Subsample the grid axes that carry resolution by an integer factor."""
    if factor == 1:
        return grid
    axes, slices = [], []
    for ax in grid.axes:
        if ax.count > 5:
            if (ax.count - 1) % factor or (ax.count - 1) // factor + 1 < 4:
                raise DomainError(f"axis {ax.name} ({ax.count} nodes) cannot "
                                  f"be coarsened {factor}x")
            axes.append(Axis(ax.name, ax.start, ax.step * factor,
                             (ax.count - 1) // factor + 1))
            slices.append(slice(None, None, factor))
        else:
            axes.append(ax)
            slices.append(slice(None))
    return MetricGrid(axes, grid.components[tuple(slices)],
                      manifest=grid.manifest)


@pde.command("verify")
@click.option("--metric", "metric_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--form", "form_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Parallel 2-form to test for closedness.")
@click.option("--lam", type=float, default=0.0, show_default=True,
              help="Einstein constant to verify against.")
@click.option("--sweep", type=int, default=0, show_default=True,
              help="Richardson levels (>= 3 fits a convergence order).")
@click.pass_context
def pde_verify(ctx, metric_path, form_path, lam, sweep):
    """Independent curvature check of a stored metric artifact."""
    tol = ctx.obj["tol"] if ctx.obj["tol"] is not None else 5e-3
    closed_bound = 1e-10
    grid = MetricGrid.from_json(Path(metric_path).read_text())
    mf = _manifest(ctx, "pde verify",
                   {"metric": str(metric_path), "form": form_path,
                    "lam": lam, "sweep": sweep},
                   {"einstein": tol, "closedness": closed_bound,
                    "order_range": [1.8, 2.2]})
    out = ctx.obj["out_dir"]

    doc = {"einstein_residual": einstein_residual(grid, lam),
           "einstein_bound": tol}
    doc["einstein_ok"] = doc["einstein_residual"] <= tol

    if form_path:
        form = TwoFormGrid.from_json(Path(form_path).read_text())
        doc["closedness"] = exterior_derivative_closedness(form)
        doc["closedness_bound"] = closed_bound
        doc["closedness_ok"] = doc["closedness"] <= closed_bound

    if sweep >= 3:
        factors = [2 ** k for k in range(sweep - 1, -1, -1)]
        spacings = [grid.axes[0].step * f for f in factors]
        residuals = [einstein_residual(_coarsen(grid, f), lam) for f in factors]
        fit = convergence_order(spacings, residuals)
        doc["sweep"] = {"factors": factors, "spacings": spacings,
                        "residuals": residuals, "order": fit.order,
                        "below_floor": fit.below_floor}
        doc["order_ok"] = bool(fit.below_floor or 1.8 <= fit.order <= 2.2)
    elif sweep:
        raise click.UsageError("--sweep needs at least 3 levels for an order fit")

    checks = [k for k in ("einstein_ok", "closedness_ok", "order_ok") if k in doc]
    doc["passed"] = all(doc[k] for k in checks)
    mf.write_json(doc, out / "verify_report.json")
    mf.save(out)

    click.echo(f"einstein residual {doc['einstein_residual']:.3e} "
               f"(bound {tol:.1e})" +
               (f", order {doc['sweep']['order']:.3f}" if sweep >= 3 else ""))
    if not doc["passed"]:
        failed = ", ".join(k[:-3] for k in checks if not doc[k])
        raise VerificationError(f"checks failed: {failed}")
    return EXIT_OK


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    except (DomainError, GridError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE
    except (VerificationError, CompatibilityError) as exc:
        click.echo(f"verification failure: {exc}", err=True)
        return EXIT_VERIFY
    return int(rv) if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
