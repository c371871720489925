"""Training loops and end-to-end evaluation against the generator toolkit.

Both networks train with Adam at lr 1e-4, batch size 32, 100 epochs, keeping
the state with the lowest test loss. End-to-end evaluation regenerates each
test sample's migrated image through the toolkit CLI at the permittivity the
estimation network predicted, runs the shape network on it, and writes the
predictions JSON that `circgpr evaluate` consumes.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data import DatasetBundle, normalize_migrated
from .dpe import DpeNet
from .gridio import read_grid, write_grid
from .losses import loss_dpe, loss_sr
from .srnet import SrNet


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    train_frac: float = 0.8
    seed: int = 0
    log_defect_labels: bool = False

    def __post_init__(self):
        if not (0.0 < self.train_frac < 1.0):
            raise ValueError("train_frac must be in (0, 1)")


@dataclass
class FitResult:
    model: torch.nn.Module
    train_losses: list[float]
    test_losses: list[float]
    best_epoch: int
    best_test_loss: float


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _fit(model, inputs, targets, train_idx, test_idx, cfg: TrainConfig, loss_fn):
    torch.manual_seed(cfg.seed)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)
    x_test = inputs[test_idx]
    y_test = targets[test_idx]
    best = (np.inf, -1, None)
    train_losses, test_losses = [], []
    for epoch in range(cfg.epochs):
        model.train()
        epoch_loss, n_seen = 0.0, 0
        for batch in _batches(len(train_idx), cfg.batch_size, rng):
            idx = [train_idx[i] for i in batch]
            opt.zero_grad()
            loss = loss_fn(model(inputs[idx]), targets[idx])
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
            n_seen += len(idx)
        model.eval()
        with torch.no_grad():
            test_loss = float(loss_fn(model(x_test), y_test))
        train_losses.append(epoch_loss / n_seen)
        test_losses.append(test_loss)
        if test_loss < best[0]:
            best = (test_loss, epoch,
                    {k: v.detach().clone() for k, v in model.state_dict().items()})
    if best[2] is not None:
        model.load_state_dict(best[2])
    model.eval()
    return FitResult(model=model, train_losses=train_losses,
                     test_losses=test_losses, best_epoch=best[1],
                     best_test_loss=best[0])


def train_dpe(bundle: DatasetBundle, train_idx, test_idx,
              cfg: TrainConfig) -> FitResult:
    x = torch.from_numpy(bundle.normalized_inputs()[:, None, :, :]).float()
    y = torch.from_numpy(np.column_stack([
        bundle.medium_scale.encode(bundle.eps_medium),
        bundle.defect_scale.encode(bundle.eps_defect)])).float()
    model = DpeNet()
    return _fit(model, x, y, train_idx, test_idx, cfg, loss_dpe)


def train_sr(bundle: DatasetBundle, train_idx, test_idx,
             cfg: TrainConfig) -> FitResult:
    x = torch.from_numpy(bundle.normalized_migrations()[:, None, :, :]).float()
    y = torch.from_numpy(bundle.masks[:, None, :, :]).float()
    model = SrNet()
    return _fit(model, x, y, train_idx, test_idx, cfg, loss_sr)


def compose_permittivity_map(shape_map: np.ndarray, eps_defect_raw: float) -> np.ndarray:
    """Permittivity map: predicted shape times the de-normalized defect value
    (continuous product, background 0)."""
    return eps_defect_raw * np.asarray(shape_map, dtype=np.float64)


# ---------------------------------------------------------------------------
# End-to-end evaluation through the toolkit CLI
# ---------------------------------------------------------------------------

def predict_dpe(model: DpeNet, bundle: DatasetBundle, idx) -> dict[str, dict]:
    x = torch.from_numpy(bundle.normalized_inputs()[idx][:, None, :, :]).float()
    model.eval()
    with torch.no_grad():
        pred = model(x).numpy()
    out = {}
    for row, i in enumerate(idx):
        out[bundle.ids[i]] = {
            "eps_medium": float(bundle.medium_scale.decode(pred[row, 0])),
            "eps_defect": float(bundle.defect_scale.decode(pred[row, 1])),
        }
    return out


def migrate_at(bscan_path: Path, scene: dict, eps: float, out_path: Path,
               circgpr_cmd: str = "circgpr") -> np.ndarray:
    """Run the toolkit's migration CLI at a given permittivity."""
    scene_path = out_path.with_suffix(".scene.json")
    scene_path.write_text(json.dumps(scene))
    cmd = [circgpr_cmd, "migrate", "--bscan", str(bscan_path),
           "--eps", f"{eps:.6f}", "--outline", str(scene_path),
           "--out", str(out_path)]
    res = subprocess.run(cmd, capture_output=True, text=True)
    if res.returncode != 0:
        raise RuntimeError(f"migration failed ({res.returncode}): {res.stderr}")
    return read_grid(out_path)


def evaluate_end_to_end(dpe: DpeNet, sr: SrNet, bundle: DatasetBundle,
                        test_idx, workdir: str | Path,
                        circgpr_cmd: str = "circgpr") -> Path:
    """Write predictions (eps values + shape masks from migrations at the
    predicted medium permittivity) as the JSON schema `circgpr evaluate`
    consumes. Returns the predictions path."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    eps_preds = predict_dpe(dpe, bundle, test_idx)
    predictions = {}
    sr.eval()
    for i in test_idx:
        sid = bundle.ids[i]
        sample = bundle.samples[i]
        mig_path = bundle.root / sample["files"]["migration_bscan"]
        img = migrate_at(mig_path, sample["scene"],
                         eps_preds[sid]["eps_medium"],
                         workdir / f"{sid}_pred_mig.f32grid", circgpr_cmd)
        x = torch.from_numpy(normalize_migrated(img)[None, None]).float()
        with torch.no_grad():
            mask = sr(x).numpy()[0, 0]
        mask_path = workdir / f"{sid}_pred_mask.f32grid"
        write_grid(mask_path, mask.astype(np.float32))
        predictions[sid] = {
            "eps_medium": eps_preds[sid]["eps_medium"],
            "eps_defect": eps_preds[sid]["eps_defect"],
            "mask": mask_path.name,
        }
    pred_path = workdir / "predictions.json"
    pred_path.write_text(json.dumps(predictions, indent=2, sort_keys=True))
    return pred_path
