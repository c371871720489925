"""Training losses: summed squared errors for the two permittivities, and the
pixel-mean squared error for the shape map. Both batch-averaged."""

from __future__ import annotations

import torch


def loss_dpe(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """pred/target: (N, 2) normalized (medium, defect) values."""
    if pred.shape != target.shape or pred.shape[-1] != 2:
        raise ValueError(f"expected matching (N, 2) tensors, got {tuple(pred.shape)}")
    per_sample = ((pred - target) ** 2).sum(dim=-1)
    return per_sample.mean()


def loss_sr(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """pred/target: (N, 1, H, W) or (H, W) maps."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    diff = (pred - target) ** 2
    if diff.dim() <= 2:
        return diff.mean()
    return diff.flatten(1).mean(dim=1).mean()
