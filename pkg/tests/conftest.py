"""Shared fixtures. The expensive FDTD products are session-scoped and cached
on disk under .pytest_cache, keyed by a hash of the physics sources, so
iterating on the test suite does not re-run every simulation."""

import hashlib
import pickle
from pathlib import Path

import numpy as np
import pytest

from circgpr.fdtd import ScanConfig, SimConfig, simulate_bscan, simulate_reference
from circgpr.pipeline import RunConfig, generate_dataset
from circgpr.scene import BlobShape, Scene, SceneRanges
from circgpr.store import read_manifest

_SRC = Path(__file__).resolve().parents[1] / "src" / "circgpr"
_PHYSICS_FILES = ["fdtd.py", "scene.py", "preprocess.py", "migrate.py",
                  "autofocus.py", "pipeline.py"]


def _physics_hash() -> str:
    h = hashlib.sha256()
    for name in _PHYSICS_FILES:
        h.update((_SRC / name).read_bytes())
    return h.hexdigest()[:16]


def _cached(request, key: str, builder):
    cache_dir = Path(request.config.cache.mkdir("circgpr_fixtures"))
    path = cache_dir / f"{key}_{_physics_hash()}.pkl"
    if path.exists():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    value = builder()
    for stale in cache_dir.glob(f"{key}_*.pkl"):
        stale.unlink()
    with open(path, "wb") as fh:
        pickle.dump(value, fh)
    return value


def disk_scene() -> Scene:
    """Homogeneous eps=6 disk with a small high-contrast off-center defect."""
    return Scene(
        outer_shape=BlobShape(base_radius=0.16),
        layer_thicknesses=(0.012, 0.015),
        layer_eps=(6.0, 6.0, 6.0),
        layer_sigma=(0.01, 0.01, 0.01),
        defect_shape=BlobShape(base_radius=0.03, center=(0.05, 0.02)),
        defect_eps=40.0,
        defect_sigma=0.01,
        seed=0,
    )


@pytest.fixture(scope="session")
def sim_cfg() -> SimConfig:
    """Desk-scale solver settings used by the physics fixtures."""
    return SimConfig(spacing=3e-3, duration=8e-9)


@pytest.fixture(scope="session")
def disk_case(request, sim_cfg):
    """(scene, scan, raw B-scan, coupling reference) for the focus tests."""
    scan = ScanConfig(n_traces=60)

    def build():
        scene = disk_scene()
        raw = simulate_bscan(scene, scan, sim_cfg, workers=2)
        ref = simulate_reference(scene, scan, sim_cfg)
        return scene, scan, raw, ref

    return _cached(request, "disk_case", build)


@pytest.fixture(scope="session")
def sym_case(request, sim_cfg):
    """Rotationally symmetric scene (centered circular defect) plus the same
    scene without its defect, on a light 20-station scan."""
    scan = ScanConfig(n_traces=20)

    def build():
        scene = Scene(
            outer_shape=BlobShape(base_radius=0.16),
            layer_thicknesses=(0.012, 0.015),
            layer_eps=(6.0, 6.0, 6.0),
            layer_sigma=(0.01, 0.01, 0.01),
            defect_shape=BlobShape(base_radius=0.03, center=(0.0, 0.0)),
            defect_eps=40.0,
            defect_sigma=0.01,
            seed=0,
        )
        no_defect = Scene(
            outer_shape=scene.outer_shape,
            layer_thicknesses=scene.layer_thicknesses,
            layer_eps=scene.layer_eps,
            layer_sigma=scene.layer_sigma,
            defect_shape=scene.defect_shape,
            defect_eps=scene.layer_eps[2],
            defect_sigma=scene.layer_sigma[2],
            seed=0,
        )
        raw = simulate_bscan(scene, scan, sim_cfg, workers=2)
        raw_no_defect = simulate_bscan(no_defect, scan, sim_cfg, workers=2)
        ref = simulate_reference(scene, scan, sim_cfg)
        return scene, scan, raw, raw_no_defect, ref

    return _cached(request, "sym_case", build)


def benchmark_config() -> RunConfig:
    """Three-layer benchmark pool: protocol-range materials and trace count,
    circular outer outlines (the global surface-echo time zero is exact
    there), blob defects in the lower half of the protocol size range where
    front-face returns dominate, and rank-2 clutter removal (measured more
    robust than rank 1 on this solver's data)."""
    return RunConfig.from_dict({
        "sim": {"spacing": 0.003, "duration": 8e-9},
        "scan": {"n_traces": 60},
        "profile": {"migration_svd_k": 2},
        "ranges": {
            "object_radius": [0.20, 0.28],
            "defect_radius": [0.05, 0.09],
            "outer_harmonic_amp": [0.0, 0.0],
            "clearance": 0.04,
        },
        "workers": 2,
    })


@pytest.fixture(scope="session")
def benchmark_dataset(request, tmp_path_factory):
    """20-scene generated dataset with AFT labels; returns (manifest, out dir,
    wall-clock seconds)."""

    def build():
        import time

        from circgpr.pipeline import read_bscan
        from circgpr.store import read_grid

        out = tmp_path_factory.mktemp("bench_ds")
        cfg = benchmark_config()
        t0 = time.time()
        manifest_path, n_failed = generate_dataset(cfg, 32, 100, out)
        elapsed = time.time() - t0
        assert n_failed == 0, "benchmark generation had failures"
        manifest = read_manifest(manifest_path)
        samples = manifest["samples"]
        # keep what the tests need in memory (the tmp dir does not outlive
        # the session, but the cache pickle does)
        first = samples[0]
        return {
            "labels": [s["labels"] for s in samples],
            "first_sample": first,
            "first_raw": read_bscan(out / first["files"]["raw_bscan"]),
            "first_reference": read_grid(out / first["files"]["reference"]),
            "elapsed_s": elapsed,
        }

    return _cached(request, "benchmark_dataset", build)


@pytest.fixture()
def tiny_config() -> RunConfig:
    """Fast end-to-end configuration for CLI and determinism tests."""
    return RunConfig.from_dict({
        "sim": {"spacing": 0.004, "duration": 6e-9},
        "scan": {"n_traces": 12},
        "ranges": {"object_radius": [0.14, 0.16], "defect_radius": [0.03, 0.05]},
        "workers": 1,
    })


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
