"""Experiment runner.

Subcommands: defect, decay, suite, norm-bound, vitali, zoo. Every run is
driven by a JSON config (defaulting to the standard bank on the unit torus),
writes machine-readable outputs (JSON-lines and CSV), and uses exit codes:
0 success, 1 expectation mismatch or check failure, 2 config parse error,
3 under-resolution.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis, banks, operators as ops, transport
from .backend import backend_name
from .config import ExperimentConfig, default_config
from .errors import ConfigError, UnderResolvedError
from .fields import BallRegion, make_bump, make_vector_bump, region_mask
from .geometry import make_box, unit_torus

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_UNDER_RESOLVED = 3


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".12g")
    return str(x)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_jsonl(path: str, records: list[dict]) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _load_config(path) -> ExperimentConfig:
    if path is None:
        return default_config()
    return ExperimentConfig.load(path)


def _operator_from(rec: dict) -> ops.OperatorSpec:
    clean = {k: v for k, v in rec.items() if k not in ("applies_to", "expected", "name")}
    clean.setdefault("label", rec.get("name"))
    return ops.operator_from_record(clean)


def _suite_banks(cfg: ExperimentConfig, kind: str):
    def builder(level: int):
        chart = cfg.base_chart(level)
        diffeos = [(rec["name"], banks.build_diffeo(chart, _strip(rec)))
                   for rec in cfg.diffeos[:4]]
        field_recs = cfg.scalar_fields if kind == "scalar" else cfg.vector_fields
        fields = [(rec["name"], banks.build_field(chart, rec)) for rec in field_recs]
        return diffeos, fields

    return builder


def _strip(rec: dict) -> dict:
    return {k: v for k, v in rec.items() if k != "name"}


# -- defect -------------------------------------------------------------------------


def cmd_defect(cfg: ExperimentConfig, out: str, threads: int, verbose: bool) -> int:
    levels = [int(r) for r in cfg.refinements]

    def run_one(rec):
        op = _operator_from(rec)
        if rec.get("applies_to", "scalar") == "vector":
            verdict = analysis.falsification_suite_vector(
                op, budget=cfg.budget, levels=levels, bank_builder=_suite_banks(cfg, "vector")
            )
        else:
            verdict = analysis.falsification_suite_scalar(
                op, budget=cfg.budget, levels=levels, bank_builder=_suite_banks(cfg, "scalar")
            )
        return rec, verdict

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_one, cfg.operators))
    else:
        results = [run_one(rec) for rec in cfg.operators]

    all_reports = []
    verdict_rows = []
    ok = True
    for rec, verdict in results:
        expected = rec["expected"]
        got = "falsified" if verdict.falsified else "consistent"
        match = expected == got
        ok &= match
        for rep in verdict.reports:
            record = rep.to_json_dict()
            record["verdict"] = verdict.status
            all_reports.append(record)
        wit = verdict.witness
        verdict_rows.append([
            rec["name"], rec.get("applies_to", "scalar"), expected, verdict.status,
            "yes" if match else "no",
            wit.defect_rel if wit else float("nan"),
            verdict.fitted_lambda if verdict.fitted_lambda is not None else float("nan"),
        ])
        if verbose:
            print(f"[defect] {rec['name']}: {verdict.status} (expected {expected})")

    _write_jsonl(os.path.join(out, "defects.jsonl"), all_reports)
    _write_csv(
        os.path.join(out, "defects.csv"),
        ["operator", "diffeo", "field", "p", "grid", "defect_abs", "defect_rel",
         "verdict", "interp_residual"],
        [[r["operator"], r["diffeo"], r["field"], r["p"],
          "x".join(str(g) for g in r["grid"]), r["defect_abs"], r["defect_rel"],
          r["verdict"], r["interp_residual"]] for r in all_reports],
    )
    _write_csv(
        os.path.join(out, "verdicts.csv"),
        ["operator", "applies_to", "expected", "verdict", "match", "witness_defect_rel",
         "fitted_lambda"],
        verdict_rows,
    )
    return EXIT_OK if ok else EXIT_FAIL


# -- decay --------------------------------------------------------------------------


def cmd_decay(cfg: ExperimentConfig, out: str, verbose: bool) -> int:
    dec = cfg.decay
    rows = []
    ok = True
    for d in dec["dims"]:
        chart = unit_torus(int(d), int(dec["resolution"]))
        center = (0.5,) * int(d)
        f = make_vector_bump(chart, center, 0.35, tuple([0.7] * int(d)))
        for p in dec["p_values"]:
            curve = analysis.contraction_decay_test(
                f, center, dec["n_values"], float(p), kind="vector", scale=0.35
            )
            for n, val, bound in zip(curve.n_values, curve.norms, curve.bounds):
                within = val <= bound * 1.05
                ok &= within
                rows.append([d, p, n, val, bound, "yes" if within else "no",
                             curve.fitted_rate])
            if verbose:
                print(f"[decay] d={d} p={p} slope={curve.fitted_rate:.3f}")
    _write_csv(
        os.path.join(out, "decay.csv"),
        ["d", "p", "n", "value", "bound", "within_bound", "fitted_slope"],
        rows,
    )
    return EXIT_OK if ok else EXIT_FAIL


# -- norm bound ----------------------------------------------------------------------


def cmd_norm_bound(cfg: ExperimentConfig, out: str, verbose: bool) -> int:
    chart = cfg.base_chart()
    rows = []
    ok = True
    for rec in cfg.diffeos:
        phi = banks.build_diffeo(chart, _strip(rec))
        est = transport.operator_norm_estimate(
            phi, trials=int(cfg.norm_trials), p=2.0, kind="vector", seed=int(cfg.seed)
        )
        within = est.estimate <= est.analytic_bound * 1.01
        ok &= within
        rows.append([rec["name"], est.estimate, est.analytic_bound,
                     "yes" if within else "no"])
        if verbose:
            print(f"[norm] {rec['name']}: {est.estimate:.4f} <= {est.analytic_bound:.4f}")
    _write_csv(
        os.path.join(out, "norm_bound.csv"),
        ["diffeo", "estimate", "analytic_bound", "within_bound"],
        rows,
    )
    return EXIT_OK if ok else EXIT_FAIL


# -- vitali -------------------------------------------------------------------------


def cmd_vitali(cfg: ExperimentConfig, out: str, verbose: bool) -> int:
    vit = cfg.vitali
    chart = unit_torus(2, int(vit["resolution"]))
    f = make_bump(chart, tuple(vit["bump_center"]), float(vit["bump_radius"]), 1.0)
    region = BallRegion(tuple(vit["bump_center"]), float(vit["region_radius"]))
    keep = region_mask(chart, region)
    w = chart.quad_weights
    target = float(np.sqrt(w[keep] @ f.flat()[keep] ** 2))
    eps = float(vit["eps_factor"]) * target
    code = EXIT_OK
    try:
        result = analysis.vitali_approximate(f, region, eps, int(vit["max_balls"]))
        pieces, achieved = result.pieces, result.achieved_error
    except analysis.BudgetError as err:
        pieces, achieved = err.pieces, err.achieved_error
        code = EXIT_FAIL
    _write_csv(
        os.path.join(out, "vitali_pieces.csv"),
        ["cx", "cy", "radius", "value"],
        [[b.center[0], b.center[1], b.radius, c] for b, c in pieces],
    )
    _write_csv(
        os.path.join(out, "vitali_summary.csv"),
        ["balls", "achieved_error", "eps", "target_norm"],
        [[len(pieces), achieved, eps, target]],
    )
    if verbose:
        print(f"[vitali] {len(pieces)} balls, error {achieved:.4g} (target {eps:.4g})")
    return code


# -- zoo ----------------------------------------------------------------------------


def cmd_zoo(cfg: ExperimentConfig, out: str, verbose: bool) -> int:
    chart = cfg.base_chart(128)
    rows = []
    demo = [
        {"name": "exp_phase", "kind": "exp_phase", "expected": "demo"},
        {"name": "sqrt", "kind": "sqrt_pointwise", "expected": "demo"},
    ]
    for rec in cfg.operators + demo:
        op = _operator_from(rec)
        image = ops.m_zero_image(op, chart)
        if isinstance(image, tuple):
            re_flat, im_flat = image[0].flat(), image[1].flat()
            constant = (
                float(re_flat.max() - re_flat.min()) < 1e-15
                and float(im_flat.max() - im_flat.min()) < 1e-15
            )
            zero_val = f"({re_flat[0]:.6g};{im_flat[0]:.6g})"
        else:
            flat = image.values.reshape(-1)
            constant = float(flat.max() - flat.min()) < 1e-15
            zero_val = f"{flat[0]:.6g}"
        # the sqrt estimate is probed near zero, where its profile blows up
        pair_scale = 1e-4 if op.kind == "sqrt_pointwise" else None
        lip = ops.lipschitz_estimate(
            op, 2.0, trials=8, chart=chart, seed=int(cfg.seed), pair_scale=pair_scale
        )
        rows.append([rec["name"], op.kind, "yes" if constant else "no", zero_val, lip])
        if verbose:
            print(f"[zoo] {rec['name']}: M(0) constant={constant}, lipschitz~{lip:.3g}")
    _write_csv(
        os.path.join(out, "zoo.csv"),
        ["operator", "kind", "zero_image_constant", "zero_image_value",
         "lipschitz_estimate"],
        rows,
    )
    return EXIT_OK


# -- suite --------------------------------------------------------------------------


def _suite_structural_rows(cfg: ExperimentConfig, verbose: bool) -> list[tuple[str, bool, str]]:
    rows = []
    chart = cfg.base_chart()
    rng = np.random.default_rng(int(cfg.seed))

    # contravariance over seeded bank pairs
    bank = [banks.build_diffeo(chart, _strip(rec)) for rec in cfg.diffeos]
    fields = [banks.build_field(chart, rec) for rec in cfg.scalar_fields]
    vfields = [banks.build_field(chart, rec) for rec in cfg.vector_fields]
    tol = float(cfg.contravariance["tolerance"])
    worst = 0.0
    for k in range(int(cfg.contravariance["pairs"])):
        psi, phi = rng.choice(len(bank), 2, replace=True)
        fld = vfields[k % len(vfields)] if k % 2 else fields[k % len(fields)]
        worst = max(worst, transport.check_contravariance(bank[psi], bank[phi], fld, 2.0))
    rows.append(("contravariance", worst <= tol, f"max_rel_gap={worst:.3e}"))

    # localization / disjoint union / inclusion-exclusion, node-exact
    tanh_op = ops.pointwise_scalar("tanh")
    f = fields[1]
    u = BallRegion((0.45, 0.5), 0.2)
    loc = analysis.localization_check(tanh_op, f, u, 2.0)
    rows.append(("localization", loc == 0.0, f"pointwise_gap={loc:.3e}"))
    regions = [BallRegion((0.3, 0.3), 0.12), BallRegion((0.7, 0.4), 0.13),
               BallRegion((0.45, 0.72), 0.12)]
    dis = analysis.disjoint_union_check(tanh_op, f, regions, 2.0)
    rows.append(("disjoint-union", dis == 0.0, f"pointwise_gap={dis:.3e}"))
    cover = [BallRegion((0.40, 0.5), 0.30), BallRegion((0.62, 0.5), 0.30)]
    covered_bump = make_bump(chart, (0.5, 0.5), 0.2, 1.0)
    ie = analysis.inclusion_exclusion_reconstruct(tanh_op, covered_bump, cover, 2.0)
    rows.append(("inclusion-exclusion", ie == 0.0, f"pointwise_gap={ie:.3e}"))

    # rotation-invariance fit on a radial and a rotational-part map
    rot_cfg = cfg.rotation
    rbox = make_box([(-1.0, 1.0), (-1.0, 1.0)], [int(rot_cfg["resolution"])] * 2)
    from .fields import sample_vector

    radial = sample_vector(rbox, lambda p: np.linalg.norm(p, axis=1)[:, None] * p)
    fit = analysis.rotation_invariance_fit(
        radial, int(rot_cfg["samples"]), seed=int(cfg.seed), bins=int(rot_cfg["bins"])
    )
    gain_err = float(np.abs(fit.bin_gains - fit.bin_radii).max())
    rot_ok = gain_err <= 1e-3 and fit.orth_residual <= 1e-3
    rotational = sample_vector(
        rbox, lambda p: p + 0.1 * np.stack([-p[:, 1], p[:, 0]], axis=-1)
    )
    fit2 = analysis.rotation_invariance_fit(
        rotational, int(rot_cfg["samples"]), seed=int(cfg.seed), bins=int(rot_cfg["bins"])
    )
    rot_ok = rot_ok and fit2.max_violation >= 0.05
    rows.append(
        ("rotation-invariance", rot_ok,
         f"gain_err={gain_err:.2e} orth={fit.orth_residual:.2e} "
         f"counterexample_violation={fit2.max_violation:.3f}")
    )

    # constant image of c 1_U
    dev = analysis.constant_image_check(
        tanh_op, 1.0, BallRegion((0.5, 0.5), 0.25), chart, transports=2, seed=int(cfg.seed)
    )
    rows.append(("constant-image", dev <= 1e-12, f"deviation={dev:.3e}"))

    if verbose:
        for name, ok, detail in rows:
            print(f"[suite] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    return rows


def cmd_suite(cfg: ExperimentConfig, out: str, threads: int, verbose: bool) -> int:
    code_defect = cmd_defect(cfg, out, threads, verbose)
    code_decay = cmd_decay(cfg, out, verbose)
    code_norm = cmd_norm_bound(cfg, out, verbose)
    code_vitali = cmd_vitali(cfg, out, verbose)
    cmd_zoo(cfg, out, verbose)
    structural = _suite_structural_rows(cfg, verbose)

    scoreboard = [
        ("contraction-decay", code_decay == EXIT_OK, "transported mass within the n^-(d+1) bound"),
        ("operator-norm-bound", code_norm == EXIT_OK, "pullback norm estimates below the analytic bound"),
        ("vitali-approximation", code_vitali == EXIT_OK, "disjoint-ball approximation reached its target"),
    ] + [(name, ok, detail) for name, ok, detail in structural]

    lines = []
    all_ok = code_defect == EXIT_OK
    order = ["contraction-decay", "operator-norm-bound", "contravariance",
             "localization", "disjoint-union", "inclusion-exclusion",
             "vitali-approximation", "rotation-invariance", "constant-image"]
    by_name = {name: (ok, detail) for name, ok, detail in scoreboard}
    for name in order:
        ok, detail = by_name[name]
        all_ok &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name:24s} {detail}")
    lines.append(
        f"{'PASS' if code_defect == EXIT_OK else 'FAIL'}  "
        f"{'operator-verdicts':24s} expected vs measured verdicts (verdicts.csv)"
    )
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "scoreboard.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all_ok else EXIT_FAIL


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffeolab",
        description="Equivariance laboratory for diffeomorphism actions on sampled fields",
    )
    parser.add_argument("--version", action="store_true", help="print version and backend")
    sub = parser.add_subparsers(dest="command")
    for name, desc in [
        ("defect", "equivariance defects and falsification verdicts"),
        ("decay", "contraction decay curves"),
        ("suite", "all checks plus the scoreboard"),
        ("norm-bound", "pullback operator-norm estimates vs analytic bound"),
        ("vitali", "disjoint-ball approximation of a masked field"),
        ("zoo", "operator zoo report: zero images and Lipschitz estimates"),
    ]:
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", default=None, help="path to a JSON config")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        from . import __version__

        print(f"diffeolab {__version__} (backend: {backend_name()})")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        cfg = _load_config(args.config)
    except json.JSONDecodeError as err:
        print(f"config parse error at line {err.lineno}, column {err.colno}: {err.msg}",
              file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG

    os.makedirs(args.out, exist_ok=True)
    try:
        if args.command == "defect":
            return cmd_defect(cfg, args.out, args.threads, args.verbose)
        if args.command == "decay":
            return cmd_decay(cfg, args.out, args.verbose)
        if args.command == "suite":
            return cmd_suite(cfg, args.out, args.threads, args.verbose)
        if args.command == "norm-bound":
            return cmd_norm_bound(cfg, args.out, args.verbose)
        if args.command == "vitali":
            return cmd_vitali(cfg, args.out, args.verbose)
        if args.command == "zoo":
            return cmd_zoo(cfg, args.out, args.verbose)
    except UnderResolvedError as err:
        print(f"under-resolved: {err}", file=sys.stderr)
        return EXIT_UNDER_RESOLVED
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
