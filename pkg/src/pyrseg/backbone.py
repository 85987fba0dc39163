"""Stride-8 residual backbone with the dilated-network conversion.

The stem plus stages 1-2 downsample x8; stages 3-4 trade stride for dilation
(plan (1,1,2,4) by default) so the final map keeps 1/8 resolution while the
kernels keep widening their reach. The stage the auxiliary head taps is a
config field; both returned maps share spatial size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .layers import BatchNorm2d, Conv2d, Module, ModuleList
from .tensor import Tensor


@dataclass
class BackboneConfig:
    stage_blocks: tuple[int, int, int, int] = (2, 2, 2, 2)
    base_channels: int = 16
    expansion: int = 4
    stem: str = "conv3"  # "conv3" (3x3 stride 2) or "conv7-pool" (7x7 stride 2 + maxpool)
    dilation_plan: tuple[int, int, int, int] = (1, 1, 2, 4)
    aux_tap_stage: int = 3
    zero_init_block_bn: bool = False

    def __post_init__(self) -> None:
        if len(self.stage_blocks) != 4 or any(b < 1 for b in self.stage_blocks):
            raise ValueError(f"stage_blocks needs 4 positive counts, got {self.stage_blocks}")
        if len(self.dilation_plan) != 4 or any(d < 1 for d in self.dilation_plan):
            raise ValueError(f"dilation_plan needs 4 positive dilations, got {self.dilation_plan}")
        if self.stem not in ("conv3", "conv7-pool"):
            raise ValueError(f"unknown stem {self.stem!r}")
        if not 1 <= self.aux_tap_stage <= 4:
            raise ValueError(f"aux_tap_stage must be in 1..4, got {self.aux_tap_stage}")

    @property
    def stage_channels(self) -> tuple[int, int, int, int]:
        return tuple(self.base_channels * (1 << i) for i in range(4))

    @property
    def stage_strides(self) -> tuple[int, int, int, int]:
        # Stride 4 is reached before stage 2 either way; stages 3-4 never stride.
        return (2, 2, 1, 1) if self.stem == "conv3" else (1, 2, 1, 1)

    @property
    def final_channels(self) -> int:
        return self.stage_channels[3]

    @property
    def tap_channels(self) -> int:
        return self.stage_channels[self.aux_tap_stage - 1]


PRESETS = {
    "toy": dict(stage_blocks=(2, 2, 2, 2), base_channels=16, stem="conv3"),
    "resnet50-layout": dict(stage_blocks=(3, 4, 6, 3), base_channels=64, stem="conv7-pool"),
    "resnet101-layout": dict(stage_blocks=(3, 4, 23, 3), base_channels=64, stem="conv7-pool"),
}


def preset(name: str, **overrides) -> BackboneConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    kwargs = dict(PRESETS[name])
    kwargs.update(overrides)
    return BackboneConfig(**kwargs)


class Bottleneck(Module):
    """1x1 reduce -> 3x3 (stride/dilation here) -> 1x1 expand, plus shortcut."""

    def __init__(self, in_channels: int, out_channels: int, mid_channels: int,
                 stride: int, dilation: int, zero_init_bn: bool) -> None:
        super().__init__()
        self.conv1 = Conv2d(in_channels, mid_channels, 1)
        self.bn1 = BatchNorm2d(mid_channels)
        self.conv2 = Conv2d(mid_channels, mid_channels, 3, stride=stride,
                            padding=dilation, dilation=dilation)
        self.bn2 = BatchNorm2d(mid_channels)
        self.conv3 = Conv2d(mid_channels, out_channels, 1)
        self.bn3 = BatchNorm2d(out_channels, zero_init=zero_init_bn)
        if stride != 1 or in_channels != out_channels:
            self.proj = Conv2d(in_channels, out_channels, 1, stride=stride)
            self.proj_bn = BatchNorm2d(out_channels)
        else:
            self.proj = None

    def forward(self, x: Tensor) -> Tensor:
        r = ops.relu(self.bn1(self.conv1(x)))
        r = ops.relu(self.bn2(self.conv2(r)))
        r = self.bn3(self.conv3(r))
        shortcut = self.proj_bn(self.proj(x)) if self.proj is not None else x
        return ops.relu(r + shortcut)


class Backbone(Module):
    def __init__(self, cfg: BackboneConfig) -> None:
        super().__init__()
        self.cfg = cfg
        c = cfg.base_channels
        if cfg.stem == "conv3":
            self.stem_conv = Conv2d(3, c, 3, stride=2, padding=1)
        else:
            self.stem_conv = Conv2d(3, c, 7, stride=2, padding=3)
        self.stem_bn = BatchNorm2d(c)
        self.stages = ModuleList()
        in_c = c
        for i in range(4):
            out_c = cfg.stage_channels[i]
            mid_c = max(out_c // cfg.expansion, 1)
            blocks = ModuleList()
            for b in range(cfg.stage_blocks[i]):
                stride = cfg.stage_strides[i] if b == 0 else 1
                blocks.append(Bottleneck(in_c, out_c, mid_c, stride,
                                         cfg.dilation_plan[i], cfg.zero_init_block_bn))
                in_c = out_c
            self.stages.append(blocks)

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Returns (final stride-8 map, aux-tap map); both H/8 x W/8."""
        _, _, h, w = x.shape
        if h % 8 or w % 8:
            raise ValueError(f"input size {h}x{w} not divisible by 8")
        y = ops.relu(self.stem_bn(self.stem_conv(x)))
        if self.cfg.stem == "conv7-pool":
            y = ops.max_pool2d(y, kernel=3, stride=2, padding=1)
        tap = None
        for i, stage in enumerate(self.stages, start=1):
            for block in stage:
                y = block(y)
            if i == self.cfg.aux_tap_stage:
                tap = y
        return y, tap


def backbone_forward(x: Tensor, model: Backbone, training: bool) -> tuple[Tensor, Tensor]:
    model.train(training)
    return model(x)


def impulse_footprint(forward_fn, size: int, channels: int = 3) -> int:
    """Nonzero output extent of a centered impulse, mapped to input pixels."""
    x = np.zeros((1, channels, size, size), dtype=np.float32)
    x[:, :, size // 2, size // 2] = 1.0
    out = forward_fn(Tensor(x))
    plane = np.abs(out.data[0]).max(axis=0)
    rows = np.flatnonzero(plane.any(axis=1))
    cols = np.flatnonzero(plane.any(axis=0))
    if rows.size == 0:
        return 0
    extent = max(rows[-1] - rows[0] + 1, cols[-1] - cols[0] + 1)
    scale = size // plane.shape[0]
    return min(int(extent) * scale, size)


def receptive_field_probe(cfg: BackboneConfig, input_size: int = 256) -> int:
    """Positive-weight impulse probe; reports footprint capped by the canvas."""
    from .layers import init_parameters

    model = Backbone(cfg)
    init_parameters(model, seed=0)
    for name, p in model.named_parameters():
        if name.endswith("/weight"):
            p.data[...] = np.abs(p.data) + 0.01
        elif name.endswith("/gamma"):
            p.data[...] = 1.0
    model.eval()  # BN becomes identity: running stats are still (0, 1)
    return impulse_footprint(lambda t: model(t)[0], input_size)
