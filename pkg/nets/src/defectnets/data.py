"""Dataset access: reads the generator's manifest + grid files, normalizes
inputs and labels to [0, 1] with global dataset statistics, and provides the
deterministic 80/20 split."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gridio import read_grid, read_manifest


@dataclass
class LabelScale:
    """Linear or log min-max mapping between raw and normalized labels."""

    lo: float
    hi: float
    log: bool = False

    def encode(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.log:
            return (np.log(v) - np.log(self.lo)) / (np.log(self.hi) - np.log(self.lo))
        return (v - self.lo) / (self.hi - self.lo)

    def decode(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.log:
            return np.exp(np.log(self.lo) + u * (np.log(self.hi) - np.log(self.lo)))
        return self.lo + u * (self.hi - self.lo)


@dataclass
class DatasetBundle:
    root: Path
    ids: list[str]
    net_inputs: np.ndarray        # (N, 128, 128) raw amplitudes
    mig_images: np.ndarray        # (N, 128, 128) raw migrated intensity
    masks: np.ndarray             # (N, 128, 128) ground-truth defect maps
    eps_medium: np.ndarray        # (N,) supervisory labels
    eps_defect: np.ndarray        # (N,) ground truth
    samples: list[dict]           # manifest entries, same order

    input_lo: float = 0.0
    input_hi: float = 1.0
    medium_scale: LabelScale = field(default=None)
    defect_scale: LabelScale = field(default=None)

    def normalized_inputs(self) -> np.ndarray:
        span = self.input_hi - self.input_lo
        return np.clip((self.net_inputs - self.input_lo) / span, 0.0, 1.0)

    def normalized_migrations(self) -> np.ndarray:
        return normalize_migrated(self.mig_images)


def normalize_migrated(images: np.ndarray) -> np.ndarray:
    """Per-image magnitude normalization to [0, 1] (scale-free, matching the
    autofocus scoring convention)."""
    mags = np.abs(images)
    if mags.ndim == 2:
        peak = mags.max() or 1.0
        return mags / peak
    peaks = mags.reshape(len(mags), -1).max(axis=1)
    peaks[peaks == 0.0] = 1.0
    return mags / peaks[:, None, None]


def load_dataset(manifest_path: str | Path, log_defect_labels: bool = False) -> DatasetBundle:
    manifest_path = Path(manifest_path)
    doc = read_manifest(manifest_path)
    root = manifest_path.parent
    ids, net, mig, masks, med, dfc = [], [], [], [], [], []
    for s in doc["samples"]:
        ids.append(s["id"])
        net.append(read_grid(root / s["files"]["network_input"]))
        mig.append(read_grid(root / s["files"]["migrated_image"]))
        masks.append(read_grid(root / s["files"]["defect_mask"]))
        med.append(s["labels"]["eps_medium_ssim"])
        dfc.append(s["labels"]["eps_defect"])
    net = np.stack(net).astype(np.float32)
    mig = np.stack(mig).astype(np.float32)
    masks = np.stack(masks).astype(np.float32)
    med = np.array(med)
    dfc = np.array(dfc)

    bundle = DatasetBundle(
        root=root, ids=ids, net_inputs=net, mig_images=mig, masks=masks,
        eps_medium=med, eps_defect=dfc, samples=doc["samples"],
        input_lo=float(net.min()), input_hi=float(net.max()),
    )
    bundle.medium_scale = LabelScale(float(med.min()), float(med.max()))
    bundle.defect_scale = LabelScale(float(dfc.min()), float(dfc.max()),
                                     log=log_defect_labels)
    if bundle.input_hi <= bundle.input_lo:
        raise ValueError("degenerate input statistics")
    if bundle.medium_scale.hi <= bundle.medium_scale.lo:
        bundle.medium_scale = LabelScale(bundle.medium_scale.lo - 0.5,
                                         bundle.medium_scale.hi + 0.5)
    if bundle.defect_scale.hi <= bundle.defect_scale.lo:
        bundle.defect_scale = LabelScale(bundle.defect_scale.lo - 0.5,
                                         bundle.defect_scale.hi + 0.5,
                                         log=log_defect_labels)
    return bundle


def split_ids(ids: list[str], train_frac: float = 0.8, seed: int = 0):
    """Deterministic disjoint split by sample id."""
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(train_frac * len(ids)))
    train = sorted(order[:n_train].tolist())
    test = sorted(order[n_train:].tolist())
    return train, test
