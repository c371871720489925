"""Shape reconstruction network: a U-shaped encoder/decoder with residual
shortcut paths and attention-refined skip fusion.

The encoder stacks five levels of double 3x3 convs (16..256 channels) with
2x2 max pooling between levels. Each skip passes through a two-unit residual
path before joining the decoder, where the concatenated features are gated
by channel+spatial attention and fused by two more convs. A 1x1 conv with
ReLU emits the non-negative defect map at the input resolution.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .cbam import Cbam

ENCODER_CHANNELS = (16, 32, 64, 128, 256)


class DoubleConv(nn.Module):
    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.net(x)


class ResPathUnit(nn.Module):
    """3x3 conv with a residual add, then ReLU."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return F.relu(x + self.conv(x))


class ResPath(nn.Module):
    def __init__(self, channels: int, units: int = 2):
        super().__init__()
        self.units = nn.Sequential(*[ResPathUnit(channels) for _ in range(units)])

    def forward(self, x):
        return self.units(x)


class DecoderStage(nn.Module):
    """Upsample + conv halving channels, concat with the shortcut, attention
    gate, then a double conv."""

    def __init__(self, in_ch: int, skip_ch: int, reduction: int = 16):
        super().__init__()
        self.up_conv = nn.Conv2d(in_ch, in_ch // 2, 3, padding=1)
        self.cbam = Cbam(in_ch // 2 + skip_ch, reduction)
        self.fuse = DoubleConv(in_ch // 2 + skip_ch, skip_ch)

    def forward(self, x, skip):
        x = F.relu(self.up_conv(F.interpolate(x, scale_factor=2, mode="nearest")))
        x = torch.cat([x, skip], dim=1)
        return self.fuse(self.cbam(x))


class SrNet(nn.Module):
    def __init__(self, reduction: int = 16):
        super().__init__()
        chans = ENCODER_CHANNELS
        self.enc = nn.ModuleList()
        in_ch = 1
        for c in chans:
            self.enc.append(DoubleConv(in_ch, c))
            in_ch = c
        self.pool = nn.MaxPool2d(2)
        self.respaths = nn.ModuleList(ResPath(c) for c in chans[:-1])
        self.dec = nn.ModuleList(
            DecoderStage(chans[i + 1], chans[i], reduction)
            for i in reversed(range(len(chans) - 1)))
        self.head = nn.Conv2d(chans[0], 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(N, 1, 128, 128) in [0, 1] -> (N, 1, 128, 128) non-negative map."""
        if x.dim() != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (N, 1, H, W) input, got {tuple(x.shape)}")
        skips = []
        for i, enc in enumerate(self.enc):
            x = enc(x if i == 0 else self.pool(x))
            skips.append(x)
        x = skips.pop()  # bottleneck
        for stage, level in zip(self.dec, reversed(range(len(skips)))):
            x = stage(x, self.respaths[level](skips[level]))
        return torch.relu(self.head(x))
