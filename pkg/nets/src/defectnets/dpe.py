"""Dual-permittivity estimation network.

Eight cascaded residual blocks (channels 16,16,32,32,64,64,128,128 with
stride-2 downsampling entering blocks 3, 5 and 7) feed a feature aggregation
stage that maps every block output to 64 channels at 4x4 and concatenates
them into a 512x4x4 tensor. A channel+spatial attention block refines the
aggregate, and the decoder regresses the two normalized permittivities
(host medium, defect) through a ReLU head.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .cbam import Cbam

BLOCK_CHANNELS = (16, 16, 32, 32, 64, 64, 128, 128)
DOWNSAMPLE_AT = (2, 4, 6)  # 0-based indices of blocks 3, 5, 7
FAM_CHANNELS = 64
FAM_SIZE = 4


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_ch != out_ch:
            self.skip = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch))
        else:
            self.skip = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        y = self.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return self.relu(y + self.skip(x))


class FamBranch(nn.Module):
    """1x1 conv to 64 channels, batch norm, adaptive max pool to 4x4."""

    def __init__(self, in_ch: int):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, FAM_CHANNELS, 1, bias=False)
        self.bn = nn.BatchNorm2d(FAM_CHANNELS)
        self.pool = nn.AdaptiveMaxPool2d(FAM_SIZE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.pool(self.bn(self.conv(x)))


class FeatureAggregation(nn.Module):
    """Concatenate the pooled per-block descriptors along the channel axis."""

    def __init__(self, block_channels=BLOCK_CHANNELS):
        super().__init__()
        self.branches = nn.ModuleList(FamBranch(c) for c in block_channels)

    def forward(self, features: list[torch.Tensor]) -> torch.Tensor:
        return torch.cat([b(f) for b, f in zip(self.branches, features)], dim=1)


class DpeNet(nn.Module):
    def __init__(self, reduction: int = 16):
        super().__init__()
        blocks = []
        in_ch = 1
        for i, out_ch in enumerate(BLOCK_CHANNELS):
            stride = 2 if i in DOWNSAMPLE_AT else 1
            blocks.append(ResBlock(in_ch, out_ch, stride))
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)
        self.fam = FeatureAggregation()
        fam_out = FAM_CHANNELS * len(BLOCK_CHANNELS)
        self.cbam = Cbam(fam_out, reduction)
        self.decoder = nn.Sequential(
            nn.Conv2d(fam_out, 512, 3, padding=1, bias=False),
            nn.BatchNorm2d(512),
            nn.ReLU(inplace=True),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )
        self.head = nn.Linear(512, 2)

    def aggregate(self, x: torch.Tensor) -> torch.Tensor:
        features = []
        for block in self.blocks:
            x = block(x)
            features.append(x)
        return self.fam(features)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(N, 1, 128, 128) in [0, 1] -> (N, 2) non-negative normalized
        (medium, defect) permittivities."""
        if x.dim() != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (N, 1, H, W) input, got {tuple(x.shape)}")
        agg = self.aggregate(x)
        refined = self.cbam(agg)
        return torch.relu(self.head(self.decoder(refined)))
