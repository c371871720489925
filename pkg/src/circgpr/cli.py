"""Command-line front end.

Subcommands mirror the pipeline stages (gen / simulate / preprocess /
migrate / autofocus / evaluate / render) so any intermediate product can be
regenerated or consumed on its own. Exit codes: 0 ok, 1 partial failure,
2 format error, 3 geometry error, 64 usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import figures, store
from .autofocus import defect_ring_mask, entropy_aft, ssim_aft
from .errors import CircgprError, FormatError, GeometryError
from .fdtd import simulate_bscan, simulate_reference, AScan
from .metrics import MaskPair, ScalarPair, iou, mae_mre, mse_image
from .migrate import MigrationParams, contour_from_scan, kirchhoff_migrate
from .pipeline import (RunConfig, generate_dataset, read_bscan, surface_zero_time,
                       write_bscan)
from .preprocess import for_migration, for_network, surface_reference
from .scene import Scene, defect_mask, image_window, sample_scene
from .autofocus import ssim_global

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FORMAT = 2
EXIT_GEOMETRY = 3
EXIT_USAGE = 64

logger = logging.getLogger("circgpr")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
    else:
        cfg = RunConfig.load(path)
    for key, val in (overrides or {}).items():
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


def _out_root(explicit: str | None) -> Path:
    if explicit:
        return Path(explicit)
    return Path(os.environ.get("CIRCGPR_OUT", "out"))


def _load_scene(path: str) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        return Scene.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = _load_config(args.config, {"workers": args.workers})
    out = _out_root(args.out)
    manifest, n_failed = generate_dataset(cfg, args.n, args.seed0, out)
    print(f"manifest: {manifest} ({args.n - n_failed}/{args.n} samples)")
    if n_failed > 0.1 * args.n:
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    scene = _load_scene(args.scene) if args.scene else sample_scene(args.seed, cfg.ranges)
    out = _out_root(args.out)
    out.mkdir(parents=True, exist_ok=True)
    b = simulate_bscan(scene, cfg.scan, cfg.sim, workers=cfg.workers)
    ref = simulate_reference(scene, cfg.scan, cfg.sim)
    write_bscan(b, out / "bscan_raw.f32grid")
    store.write_grid(out / "reference.f32grid", ref.samples)
    with open(out / "scene.json", "w", encoding="utf-8") as fh:
        json.dump(scene.to_dict(), fh, indent=2, sort_keys=True)
    print(f"wrote {out / 'bscan_raw.f32grid'}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = _load_config(args.config)
    b = read_bscan(args.bscan)
    ref_samples = store.read_grid(args.reference).astype(np.float64)
    ref = AScan(samples=ref_samples, dt=b.dt)
    zero_ref = surface_reference(surface_zero_time(cfg.scan, cfg.sim), b.dt, b.n_samples)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.path == "migration":
        g = for_migration(b, ref, cfg.profile, zero_ref)
        write_bscan(g, out)
    else:
        arr = for_network(b, ref, cfg.profile, zero_ref)
        store.write_grid(out, arr)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_migrate(args) -> int:
    b = read_bscan(args.bscan)
    scene = _load_scene(args.outline)
    contour = contour_from_scan(b, scene.outer_shape)
    spec = image_window(scene, args.image_size)
    image = kirchhoff_migrate(b, contour, MigrationParams(eps_medium=args.eps,
                                                          image_spec=spec))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    store.write_grid(out, image.intensity)
    meta = {"eps_medium_used": image.eps_medium_used, "image_spec": spec.to_dict()}
    with open(out.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    store.export_pgm(image.intensity, out.with_suffix(".pgm"))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_autofocus(args) -> int:
    cfg = _load_config(args.config)
    b = read_bscan(args.bscan)
    scene = _load_scene(args.scene)
    spec = image_window(scene, cfg.image_size)
    ring = defect_ring_mask(defect_mask(scene, spec), cfg.ring_thickness_px)
    contour = contour_from_scan(b, scene.outer_shape)
    res_ssim = ssim_aft(b, contour, ring, cfg.sweep, spec, cfg.ssim)
    res_ent = entropy_aft(b, contour, cfg.sweep, spec)
    out = _out_root(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"ssim": res_ssim.curve_dict(), "entropy": res_ent.curve_dict()}
    with open(out / "autofocus.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    figures.save_aft_curves(
        {"ssim": res_ssim.score_curve, "entropy": res_ent.score_curve},
        out / "autofocus.png",
        selected={"ssim": res_ssim.eps_selected, "entropy": res_ent.eps_selected})
    store.write_grid(out / "migrated_selected.f32grid", res_ssim.image.intensity)
    print(f"ssim-aft: {res_ssim.eps_selected:.2f}  entropy-aft: {res_ent.eps_selected:.2f}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    manifest = store.validate_manifest(args.manifest)
    root = Path(args.manifest).parent
    with open(args.predictions, "r", encoding="utf-8") as fh:
        predictions = json.load(fh)

    rows = []
    missing = []
    defect_pairs, medium_pairs = [], []
    mses, ssims, ious = [], [], []
    for sample in manifest["samples"]:
        sid = sample["id"]
        pred = predictions.get(sid)
        if pred is None:
            missing.append(sid)
            continue
        row: dict = {"id": sid}
        labels = sample["labels"]
        if "eps_defect" in pred:
            pair = ScalarPair(labels["eps_defect"], float(pred["eps_defect"]))
            defect_pairs.append(pair)
            row["eps_defect_truth"] = pair.truth
            row["eps_defect_pred"] = pair.prediction
            row["eps_defect_abs_err"] = abs(pair.truth - pair.prediction)
        if "eps_medium" in pred:
            pair = ScalarPair(labels["eps_medium_ssim"], float(pred["eps_medium"]))
            medium_pairs.append(pair)
            row["eps_medium_truth"] = pair.truth
            row["eps_medium_pred"] = pair.prediction
            row["eps_medium_abs_err"] = abs(pair.truth - pair.prediction)
        if "mask" in pred:
            truth = store.read_grid(root / sample["files"]["defect_mask"])
            guess = store.read_grid((Path(args.predictions).parent / pred["mask"]))
            mp = MaskPair(truth=truth, prediction=guess)
            row["mse"] = mse_image(mp)
            row["ssim"] = ssim_global(guess, truth)
            row["iou"] = iou(mp)
            mses.append(row["mse"]); ssims.append(row["ssim"]); ious.append(row["iou"])
        rows.append(row)

    aggregate: dict = {}
    if defect_pairs:
        mae, mre = mae_mre(defect_pairs)
        aggregate["mae_defect"], aggregate["mre_defect"] = mae, mre
    if medium_pairs:
        mae, mre = mae_mre(medium_pairs)
        aggregate["mae_medium"], aggregate["mre_medium"] = mae, mre
    for name, vals in (("mse", mses), ("ssim", ssims), ("iou", ious)):
        if vals:
            aggregate[f"mean_{name}"] = float(np.mean(vals))

    out = Path(args.out) if args.out else root / "evaluation.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    report = {"per_sample": rows, "aggregate": aggregate, "missing": missing}
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)

    csv_path = out.with_suffix(".csv")
    keys = sorted({k for r in rows for k in r})
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)
    figures.save_error_histogram(
        {"defect eps |err|": [r["eps_defect_abs_err"] for r in rows if "eps_defect_abs_err" in r],
         "medium eps |err|": [r["eps_medium_abs_err"] for r in rows if "eps_medium_abs_err" in r]},
        out.with_suffix(".png"), xlabel="absolute error")
    print(f"report: {out} ({len(rows)} scored, {len(missing)} missing)")
    return EXIT_PARTIAL if missing or not rows else EXIT_OK


def cmd_render(args) -> int:
    grid = store.read_grid(args.grid)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if out.suffix == ".pgm":
        store.export_pgm(grid, out)
    else:
        if grid.ndim != 2:
            raise FormatError("render needs a 2-D grid")
        figures.save_image_figure(grid, out, title=Path(args.grid).stem)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="circgpr",
                description="circumferential GPR simulation and imaging toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[], help="generate a dataset")
    g.add_argument("--config", help="run config JSON")
    g.add_argument("-n", type=int, default=1, help="number of samples")
    g.add_argument("--seed0", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--workers", type=int, default=None)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="simulate one raw B-scan")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scene", help="scene JSON (overrides --seed)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("preprocess", help="condition a raw B-scan")
    pp.add_argument("--config")
    pp.add_argument("--bscan", required=True)
    pp.add_argument("--reference", required=True)
    pp.add_argument("--path", choices=["migration", "network"], default="migration")
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_preprocess)

    m = sub.add_parser("migrate", help="Kirchhoff-migrate a processed B-scan")
    m.add_argument("--bscan", required=True)
    m.add_argument("--eps", type=float, required=True)
    m.add_argument("--outline", required=True, help="scene JSON carrying the outline")
    m.add_argument("--image-size", type=int, default=128)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_migrate)

    a = sub.add_parser("autofocus", help="sweep medium permittivity")
    a.add_argument("--config")
    a.add_argument("--bscan", required=True)
    a.add_argument("--scene", required=True)
    a.add_argument("--out")
    a.set_defaults(func=cmd_autofocus)

    e = sub.add_parser("evaluate", help="score predictions against a manifest")
    e.add_argument("--manifest", required=True)
    e.add_argument("--predictions", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("render", help="render a grid file to PGM/PNG")
    r.add_argument("--grid", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return EXIT_FORMAT
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except CircgprError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARTIAL


if __name__ == "__main__":
    sys.exit(main())
