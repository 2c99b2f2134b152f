"""Command-line entry points orchestrating the pipelines.

Subcommands: verify-algebra, normal-form, gauge-infinity, bianchi-solve,
renorm-volume, all.  Exit codes: 0 all checks passed, 2 a check failed,
1 usage or configuration error.  Runs are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import gauge_maps as gm
from . import infinity as inf
from . import jets, models, spaces, volume
from .exterior.grid import AnnulusGrid
from .exterior.maps import bianchi_residual, decay_slope, harmonic_map_correction
from .tensors import norm

DEFAULT_TOL = 1e-8


def _write_report(out_dir, name, payload):
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    (path / f"{name}.json").write_text(json.dumps(payload, indent=2, default=_json_default))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj)}")


def _write_csv(out_dir, name, rows):
    if out_dir is None:
        return
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / f"{name}.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _load_config(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"config error: {exc}")


def _build_model(spec, seed):
    kind = spec.get("kind", "flat")
    params = dict(spec.get("params", {}))
    if "group_order" in spec:
        params["group_order"] = spec["group_order"]
    return models.catalog_build(kind, m=spec.get("m"), seed=seed, **params)


def _s20(m, rng, scale=1.0):
    B = rng.standard_normal((m, m))
    B = 0.5 * (B + B.T)
    return scale * (B - np.trace(B) / m * np.eye(m))


def cmd_verify_algebra(args, config):
    """Tensor-space decomposition suite across dimensions."""
    checks = {}
    tol = args.tol
    ms = [args.m] if args.m else [3, 4, 5, 6]
    rng = np.random.default_rng(args.seed)
    for m in ms:
        c = {}
        dom = spaces.space_basis("S2xRm", m)
        M1 = spaces.map_matrix(gm.linear_shift, dom)
        s = np.linalg.svd(M1, compute_uv=False)
        c["linear_shift_rank"] = int(np.sum(s > 1e-8 * s[0]))
        c["linear_shift_rank_expected"] = m * m * (m + 1) // 2

        A = _random_s2s2(m, rng)
        Ct, B = spaces.split_curvature(A)
        c["curvature_split_round_trip"] = norm(Ct + gm.quadratic_shift(B) - A)

        K = spaces.kernel_basis(gm.bianchi_op1, dom)
        c["vector_shift_kernel_match"] = spaces.span_equal(
            K, spaces.space_basis("Y2", m).basis
        )

        dom4 = spaces.space_basis("S2xS2_0", m)
        A4 = dom4.from_coords(rng.standard_normal(dom4.dim))
        parts = spaces.decompose_s2_s20(A4)
        c["five_way_round_trip"] = norm(
            parts["z1"] + parts["z2"] + parts["z3"] + parts["z4"] + parts["h"] - A4
        )

        K2 = spaces.kernel_basis(gm.bianchi_op2, dom4)
        corrected = np.concatenate(
            [spaces.space_basis(z, m).basis for z in ("Z3", "Z4", "Z5", "Wtilde")]
        )
        c["divergence_kernel_match_corrected"] = spaces.span_equal(K2, corrected)

        h22 = spaces.space_basis("H22", m)
        c["weyl_span_match"] = spaces.span_equal(
            spaces.kernel_basis(gm.bianchi_op2, h22),
            spaces.space_basis("Wtilde", m).basis,
        )
        c["dim_wtilde"] = spaces.space_basis("Wtilde", m).dim
        checks[f"m={m}"] = c
    ok = all(
        c["linear_shift_rank"] == c["linear_shift_rank_expected"]
        and c["curvature_split_round_trip"] < tol
        and c["vector_shift_kernel_match"]
        and c["five_way_round_trip"] < tol
        and c["divergence_kernel_match_corrected"]
        and c["weyl_span_match"]
        for c in checks.values()
    )
    _write_report(args.out, "verify_algebra", {"ok": ok, "checks": checks})
    _write_csv(args.out, "space_dims", spaces.dims_table(ms))
    if args.out:
        m_export = ms[-1]
        basis_json = spaces.space_basis("Wtilde", m_export).to_json()
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"basis_wtilde_m{m_export}.json").write_text(basis_json)
    return ok, checks


def _random_s2s2(m, rng):
    A = rng.standard_normal((m,) * 4)
    A = 0.5 * (A + np.transpose(A, (1, 0, 2, 3)))
    return 0.5 * (A + np.transpose(A, (0, 1, 3, 2)))


def cmd_normal_form(args, config):
    """Random-jet normalization with a finite-difference curvature check."""
    m = args.m or 4
    rng = np.random.default_rng(args.seed)
    a = np.eye(m) + 0.2 * _s20(m, rng) + 0.05 * np.eye(m)
    b = 0.2 * rng.standard_normal((m, m, m))
    b = 0.5 * (b + np.transpose(b, (1, 0, 2)))
    c4 = 0.2 * _random_s2s2(m, rng)
    jet = jets.MetricJet(a, b, c4)
    change, final, R = jets.normal_form(jet)
    ric, dgam = jets.ricci_at_origin(final)
    payload = {
        "m": m,
        "final_linear_norm": norm(final.b),
        "curvature_norm": norm(R),
        "curvature_in_space": spaces.is_member("C", R, args.tol * 100),
        "ricci_consistency": norm(1.5 * dgam - ric),
        "composite_linear": change.linear.tolist(),
        "curvature": R.tolist(),
    }
    ok = (
        payload["final_linear_norm"] < args.tol
        and payload["curvature_in_space"]
        and payload["ricci_consistency"] < args.tol * max(1.0, norm(ric))
    )
    _write_report(args.out, "normal_form", {"ok": ok, **payload})
    return ok, payload


def cmd_gauge_infinity(args, config):
    """Fit a model's expansion and reduce it to Weyl form."""
    model_spec = (config or {}).get("model", {"kind": args.model or "synthetic_weyl", "m": args.m or 4})
    if args.model:
        model_spec["kind"] = args.model
    model = _build_model(model_spec, args.seed)
    pipe = (config or {}).get("pipeline", {})
    base = pipe.get("base_radius", 16.0)
    e, fit_info = inf.fit_expansion(
        model, base, n_annuli=pipe.get("n_annuli", 3), gauge="bianchi",
        extra_orders=pipe.get("extra_orders", 1),
    )
    e2, W, (ch1, ch2), report = inf.gauge_pipeline(e, tol=pipe.get("tol", 1e-4))
    payload = {
        "model": model.kind,
        "fit": fit_info,
        "report": report,
        "weyl_norm": norm(W),
        "weyl": W.tolist(),
    }
    ok = True
    if model.kind == "synthetic_weyl":
        gap = norm(W - model.W) / max(norm(model.W), 1e-300)
        payload["weyl_recovery_gap"] = gap
        ok = gap < 1e-4
    _write_report(args.out, "gauge_infinity", {"ok": ok, **payload})
    return ok, payload


def cmd_bianchi_solve(args, config):
    """Harmonic-map correction on an exterior grid."""
    m = args.m or 4
    rng = np.random.default_rng(args.seed)
    grid_spec = (config or {}).get("grid", {})
    grid = AnnulusGrid(
        m,
        grid_spec.get("R", 8.0),
        grid_spec.get("J", 4),
        points_per_octave=grid_spec.get("points_per_octave", 12),
        angular_degree=grid_spec.get("angular", 12),
    )
    model_spec = (config or {}).get("model")
    if model_spec:
        model = _build_model(model_spec, args.seed)
    else:
        base = _build_model({"kind": args.model or "synthetic_weyl", "m": m}, args.seed)
        model = models.PulledBackModel(
            base, inf.DecayingChange.identity(m), gate_radius=2.0,
            extra_vec=0.05 * rng.standard_normal(m), extra_order=m - 1,
        )
    _, gam = bianchi_residual(model, grid)
    slope, sups = decay_slope(gam)
    ntilde = -slope if np.isfinite(slope) and slope < -2.5 else m + 2.0
    result = harmonic_map_correction(
        model, ntilde, grid, tol=args.tol, max_iter=50,
        lmax=(config or {}).get("pipeline", {}).get("lmax", 4),
    )
    payload = {
        "gamma_trace_slope": slope,
        "ntilde": ntilde,
        "converged": result.converged,
        "iterations": result.iterations,
        "final_residual": result.residuals[-1] if result.residuals else 0.0,
        "ratios": result.ratios,
        "u_norm": result.u_norm,
        "inner_radius": result.inner_radius,
    }
    rows = [["iteration", "residual"]] + [
        [str(i), f"{r:.6e}"] for i, r in enumerate(result.residuals)
    ]
    _write_csv(args.out, "bianchi_solve_convergence", rows)
    _write_report(args.out, "bianchi_solve", payload)
    return bool(result.converged), payload


def cmd_renorm_volume(args, config):
    """Renormalized volume with mean-curvature and isoperimetric checks."""
    model_spec = (config or {}).get("model", {"kind": args.model or "flat", "m": args.m or 4})
    if args.model:
        model_spec["kind"] = args.model
    if args.m:
        model_spec["m"] = args.m
    model = _build_model(model_spec, args.seed)
    pipe = (config or {}).get("pipeline", {})
    rep = volume.renormalized_volume(
        model,
        pipe.get("base_radius", 4.0),
        n_doublings=pipe.get("n_doublings", 4),
        angular_degree=pipe.get("angular_degree", 12),
        second_order_tail=pipe.get("second_order_tail", False),
    )
    radii = rep.radii[: min(4, rep.radii.size)]
    ros = volume.ros_check(model, radii, pipe.get("angular_degree", 12))
    prof = volume.mean_curvature_profile(model, radii, pipe.get("angular_degree", 12))
    payload = {
        "model": model.kind,
        "limit": rep.limit,
        "error": rep.error,
        "converged": rep.converged,
        "cauchy_constants": rep.cauchy_constants.tolist(),
        "ros_gaps": [row.get("gap") for row in ros],
        "mean_curvature_profile": prof,
    }
    ok = rep.converged and all(
        row["gap"] is None or row["gap"] >= -1e-6 for row in ros
    )
    if model.kind in ("flat", "flat_quotient"):
        ok = ok and abs(rep.limit) < 1e-6
    if model.kind == "eguchi_hanson":
        ok = ok and rep.limit < 0 and abs(rep.limit) > 10 * rep.error
    _write_report(args.out, "renorm_volume", payload)
    _write_csv(args.out, "renorm_volume_table", rep.csv_rows())
    rows = [["r", "max|rH-1|"]] + [
        [f"{r:.6g}", f"{d:.6e}"] for r, d in zip(prof["radii"], prof["max_dev"])
    ]
    _write_csv(args.out, "mean_curvature_profile", rows)
    gap_rows = [["r", "ros_gap", "H_positive"]] + [
        [f"{row['r']:.6g}", "" if row["gap"] is None else f"{row['gap']:.6e}", str(row["H_positive"])]
        for row in ros
    ]
    _write_csv(args.out, "ros_gap", gap_rows)
    return ok, payload


COMMANDS = {
    "verify-algebra": cmd_verify_algebra,
    "normal-form": cmd_normal_form,
    "gauge-infinity": cmd_gauge_infinity,
    "bianchi-solve": cmd_bianchi_solve,
    "renorm-volume": cmd_renorm_volume,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="aleweyl",
        description="gauge normalization pipelines for asymptotically flat ends",
    )
    sub = parser.add_subparsers(dest="command")
    for name in list(COMMANDS) + ["all"]:
        p = sub.add_parser(name)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--model", type=str, default=None)
        p.add_argument("--config", type=str, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage()
        return 1
    config = _load_config(args.config) if args.config else None
    if config and "seed" in config and args.seed == 0:
        args.seed = config["seed"]
    names = list(COMMANDS) if args.command == "all" else [args.command]
    all_ok = True
    for name in names:
        try:
            ok, payload = COMMANDS[name](args, config)
        except (ValueError, RuntimeError) as exc:
            print(f"[{name}] ERROR {exc}")
            all_ok = False
            continue
        status = "ok" if ok else "FAIL"
        print(f"[{name}] {status}")
        all_ok = all_ok and ok
    return 0 if all_ok else 2


if __name__ == "__main__":
    sys.exit(main())
