"""Fixtures for the network tests.

The 100-scene training dataset is generated once through the toolkit CLI
(the only interface this package consumes) and cached across sessions under
.pytest_cache. Set DEFECTNETS_DATASET to reuse an existing manifest.
"""

import json
import os
import subprocess
from pathlib import Path

import pytest

DATASET_CONFIG = {
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
}
DATASET_SIZE = 100
DATASET_SEED0 = 1000


@pytest.fixture(scope="session")
def dataset_manifest(request) -> Path:
    override = os.environ.get("DEFECTNETS_DATASET")
    if override:
        return Path(override)

    cache_dir = Path(request.config.cache.mkdir("defectnets_dataset"))
    out = cache_dir / f"ds_{DATASET_SIZE}_{DATASET_SEED0}"
    manifest = out / "manifest.json"
    if manifest.exists():
        return manifest

    cfg_path = cache_dir / "gen_config.json"
    cfg_path.write_text(json.dumps(DATASET_CONFIG))
    cmd = ["circgpr", "gen", "--config", str(cfg_path),
           "-n", str(DATASET_SIZE), "--seed0", str(DATASET_SEED0),
           "--out", str(out)]
    res = subprocess.run(cmd, capture_output=True, text=True)
    if res.returncode != 0:
        raise RuntimeError(f"dataset generation failed: {res.stderr[-2000:]}")
    return manifest
