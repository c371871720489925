"""Dataset generation: scene -> B-scan -> conditioning -> autofocus -> files.

One sample per seed. Each sample stores the raw B-scan, the network input,
the migration input, the selected migrated image and the defect mask, plus
permittivity labels (defect truth, both autofocus selections, and the RMS
reference) in the manifest.
"""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import figures, store
from .autofocus import (AftResult, LayerStack, SsimParams, SweepSpec,
                        defect_ring_mask, entropy_aft, rms_permittivity, ssim_aft)
from .constants import C0
from .errors import CircgprError, ParameterError
from .fdtd import (AScan, BScan, ScanConfig, SimConfig, simulate_bscan,
                   simulate_reference)
from .migrate import contour_from_scan
from .preprocess import (PreprocessProfile, for_migration, for_network,
                         surface_reference)
from .scene import (GridSpec, Scene, SceneRanges, blob_radius, defect_mask,
                    image_window, sample_scene)

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Everything one generation run needs, loadable from a single JSON file."""

    ranges: SceneRanges = field(default_factory=SceneRanges)
    sim: SimConfig = field(default_factory=SimConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    profile: PreprocessProfile = field(default_factory=PreprocessProfile)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    ssim: SsimParams = field(default_factory=SsimParams)
    ring_thickness_px: int = 5
    image_size: int = 128
    workers: int = 1
    out_dir: str = "out"

    def validate(self) -> None:
        self.ranges.validate()
        if self.ring_thickness_px < 1:
            raise ParameterError("ring_thickness_px must be >= 1")
        if self.image_size < 16:
            raise ParameterError("image_size must be >= 16")

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        kwargs: dict = {}
        if "ranges" in d:
            kwargs["ranges"] = SceneRanges.from_dict(d["ranges"])
        if "sim" in d:
            kwargs["sim"] = SimConfig(**d["sim"])
        if "scan" in d:
            kwargs["scan"] = ScanConfig(**d["scan"])
        if "profile" in d:
            kwargs["profile"] = PreprocessProfile.from_dict(d["profile"])
        if "sweep" in d:
            kwargs["sweep"] = SweepSpec(**d["sweep"])
        if "ssim" in d:
            kwargs["ssim"] = SsimParams(**d["ssim"])
        for key in ("ring_thickness_px", "image_size", "workers", "out_dir"):
            if key in d:
                kwargs[key] = d[key]
        cfg = RunConfig(**kwargs)
        cfg.validate()
        return cfg

    @staticmethod
    def load(path: str | Path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return RunConfig.from_dict(json.load(fh))


def surface_zero_time(scan: ScanConfig, sim: SimConfig) -> float:
    """Absolute time at which the transmit pulse returns from the outer
    surface: source delay plus the two-way standoff leg."""
    return sim.delay + 2.0 * scan.standoff / C0


def migration_input_for_tests(scene: Scene, scan: ScanConfig, sim: SimConfig,
                              raw: BScan, reference: AScan,
                              profile: PreprocessProfile | None = None,
                              image_size: int = 128, ring_px: int = 5):
    """Bundle the migration-path conditioning for a simulated scene:
    returns (processed B-scan, contour, imaging window, ring mask)."""
    profile = profile or PreprocessProfile()
    zero_ref = surface_reference(surface_zero_time(scan, sim), raw.dt, raw.n_samples)
    g = for_migration(raw, reference, profile, zero_ref)
    spec = image_window(scene, image_size)
    ring = defect_ring_mask(defect_mask(scene, spec), ring_px)
    contour = contour_from_scan(raw, scene.outer_shape)
    return g, contour, spec, ring


def rms_reference_stack(scene: Scene) -> LayerStack:
    """Layer stack along the radial ray through the defect centroid, ending
    at the defect's near boundary."""
    cx, cy = scene.defect_shape.center
    ox, oy = scene.outer_shape.center
    theta = np.arctan2(cy - oy, cx - ox) if (cx, cy) != (ox, oy) else 0.0
    r_surface = float(blob_radius(scene.outer_shape, theta))
    rho_center = float(np.hypot(cx - ox, cy - oy))
    r_defect_near = rho_center + float(blob_radius(scene.defect_shape, theta))
    t1, t2 = scene.layer_thicknesses
    s3 = (r_surface - t1 - t2) - r_defect_near
    if s3 <= 0:
        # defect touches layer 2 along this ray; fall back to a thin sliver
        s3 = 1e-4
    return LayerStack(((scene.layer_eps[0], t1),
                       (scene.layer_eps[1], t2),
                       (scene.layer_eps[2], s3)))


# ---------------------------------------------------------------------------
# Per-sample processing
# ---------------------------------------------------------------------------

@dataclass
class SampleResult:
    sample_id: str
    seed: int
    scene: Scene
    raw: BScan
    reference: AScan
    network_input: np.ndarray
    migration_input: BScan
    image_spec: GridSpec
    mask: np.ndarray
    ssim_result: AftResult
    entropy_result: AftResult
    eps_rms: float

    @property
    def labels(self) -> dict:
        return {
            "eps_defect": self.scene.defect_eps,
            "eps_medium_ssim": self.ssim_result.eps_selected,
            "eps_medium_entropy": self.entropy_result.eps_selected,
            "eps_rms": self.eps_rms,
        }


def process_sample(seed: int, cfg: RunConfig, workers: int = 1) -> SampleResult:
    """Run the full per-sample pipeline for one seed."""
    scene = sample_scene(seed, cfg.ranges)
    raw = simulate_bscan(scene, cfg.scan, cfg.sim, workers=workers)
    reference = simulate_reference(scene, cfg.scan, cfg.sim)
    zero_ref = surface_reference(surface_zero_time(cfg.scan, cfg.sim),
                                 raw.dt, raw.n_samples)

    net_input = for_network(raw, reference, cfg.profile, zero_ref)
    mig_input = for_migration(raw, reference, cfg.profile, zero_ref)

    spec = image_window(scene, cfg.image_size)
    mask = defect_mask(scene, spec)
    ring = defect_ring_mask(mask, cfg.ring_thickness_px)
    contour = contour_from_scan(raw, scene.outer_shape)

    ssim_result = ssim_aft(mig_input, contour, ring, cfg.sweep, spec, cfg.ssim)
    entropy_result = entropy_aft(mig_input, contour, cfg.sweep, spec)
    eps_rms = rms_permittivity(rms_reference_stack(scene))

    return SampleResult(
        sample_id=f"s{seed:05d}", seed=seed, scene=scene, raw=raw,
        reference=reference, network_input=net_input, migration_input=mig_input,
        image_spec=spec, mask=mask, ssim_result=ssim_result,
        entropy_result=entropy_result, eps_rms=eps_rms)


def write_bscan(b: BScan, path: Path) -> None:
    """Grid file plus a JSON sidecar carrying the timing/geometry metadata."""
    store.write_grid(path, b.traces)
    meta = {
        "dt": b.dt,
        "t0_offset": b.t0_offset,
        "angles": [float(a) for a in b.angles],
        "trace_positions": [[float(x), float(y)] for x, y in b.trace_positions],
    }
    with open(path.with_suffix(".meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def read_bscan(path: str | Path) -> BScan:
    path = Path(path)
    traces = store.read_grid(path).astype(np.float64)
    with open(path.with_suffix(".meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    return BScan(traces=traces, dt=float(meta["dt"]),
                 angles=np.array(meta["angles"]),
                 trace_positions=np.array(meta["trace_positions"]),
                 t0_offset=float(meta["t0_offset"]))


def write_sample(result: SampleResult, out_dir: Path, profile_name: str) -> dict:
    """Persist one sample's grids; returns its manifest entry."""
    sid = result.sample_id
    files = {
        "raw_bscan": f"{sid}_raw.f32grid",
        "reference": f"{sid}_ref.f32grid",
        "network_input": f"{sid}_net.f32grid",
        "migration_bscan": f"{sid}_mig.f32grid",
        "migrated_image": f"{sid}_img.f32grid",
        "defect_mask": f"{sid}_mask.f32grid",
    }
    write_bscan(result.raw, out_dir / files["raw_bscan"])
    store.write_grid(out_dir / files["reference"], result.reference.samples)
    store.write_grid(out_dir / files["network_input"], result.network_input)
    write_bscan(result.migration_input, out_dir / files["migration_bscan"])
    store.write_grid(out_dir / files["migrated_image"], result.ssim_result.image.intensity)
    store.write_grid(out_dir / files["defect_mask"], result.mask)

    shapes = {
        "raw_bscan": list(result.raw.traces.shape),
        "reference": [len(result.reference.samples)],
        "network_input": list(result.network_input.shape),
        "migration_bscan": list(result.migration_input.traces.shape),
        "migrated_image": list(result.ssim_result.image.intensity.shape),
        "defect_mask": list(result.mask.shape),
    }
    return {
        "id": sid,
        "seed": result.seed,
        "scene": result.scene.to_dict(),
        "files": files,
        "shapes": shapes,
        "labels": result.labels,
        "image_spec": result.image_spec.to_dict(),
        "preprocess_profile": profile_name,
        "aft": {
            "ssim_curve": result.ssim_result.curve_dict(),
            "entropy_curve": result.entropy_result.curve_dict(),
        },
    }


def _worker(args) -> tuple[int, dict | None, str | None]:
    seed, cfg_dict, out_dir = args
    cfg = RunConfig.from_dict(cfg_dict)
    try:
        result = process_sample(seed, cfg, workers=1)
        entry = write_sample(result, Path(out_dir), cfg.profile.name)
        return seed, entry, None
    except CircgprError as exc:
        return seed, None, str(exc)


def _config_dict(cfg: RunConfig) -> dict:
    from dataclasses import asdict
    d = asdict(cfg)
    d["profile"] = asdict(cfg.profile)
    d["ranges"] = asdict(cfg.ranges)
    return d


def generate_dataset(cfg: RunConfig, n: int, seed0: int,
                     out_dir: str | Path | None = None) -> tuple[Path, int]:
    """Generate ``n`` samples for seeds seed0..seed0+n-1.

    Per-sample failures are logged and skipped. Returns (manifest path,
    number of failures). Also writes a labels CSV and the medium-permittivity
    histogram figure next to the manifest.
    """
    cfg.validate()
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = list(range(seed0, seed0 + n))
    jobs = [(seed, _config_dict(cfg), str(out)) for seed in seeds]

    results: dict[int, dict] = {}
    failures: dict[int, str] = {}
    if cfg.workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for seed, entry, err in pool.map(_worker, jobs):
                if err is None:
                    results[seed] = entry
                else:
                    failures[seed] = err
    else:
        # single-sample or single-worker runs: parallelize inside the B-scan
        for seed in seeds:
            try:
                result = process_sample(seed, cfg, workers=cfg.workers)
                results[seed] = write_sample(result, out, cfg.profile.name)
            except CircgprError as exc:
                failures[seed] = str(exc)

    for seed, err in failures.items():
        logger.warning("sample seed %d failed: %s", seed, err)

    samples = [results[s] for s in seeds if s in results]
    manifest_path = out / "manifest.json"
    store.write_manifest(manifest_path, samples)
    _write_labels_csv(samples, out / "labels.csv")
    _write_label_figure(samples, out / "eps_medium_hist.png")
    return manifest_path, len(failures)


def _write_labels_csv(samples: list[dict], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "seed", "eps_defect", "eps_medium_ssim",
                         "eps_medium_entropy", "eps_rms"])
        for s in samples:
            writer.writerow([s["id"], s["seed"], s["labels"]["eps_defect"],
                             s["labels"]["eps_medium_ssim"],
                             s["labels"]["eps_medium_entropy"],
                             s["labels"]["eps_rms"]])


def _write_label_figure(samples: list[dict], path: Path) -> None:
    if not samples:
        return
    sets = {
        "ssim-aft": [s["labels"]["eps_medium_ssim"] for s in samples],
        "entropy-aft": [s["labels"]["eps_medium_entropy"] for s in samples],
        "rms reference": [s["labels"]["eps_rms"] for s in samples],
    }
    all_vals = [v for vals in sets.values() for v in vals]
    lo = np.floor(min(all_vals)) - 0.5
    hi = np.ceil(max(all_vals)) + 0.5
    edges = np.arange(lo, hi + 0.5, 0.5)
    figures.save_eps_histograms(sets, edges, path)
