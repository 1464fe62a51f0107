"""Network definitions: U-Net generators and a patch discriminator.

Generators are encoder-decoder U-Nets with skip connections; inputs whose
sides are not multiples of 2**depth are reflect-padded on the bottom/right
and the output is cropped back, so output shape always equals input shape.

The discriminator is fully convolutional with no normalization anywhere, so
each score depends only on pixels inside its receptive field. Helper
functions expose the score map size and receptive field geometry; tests and
training both use them rather than re-deriving the arithmetic.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

from .core import ArityError, InputTooSmall, ShapeError

DISC_KERNEL = 4
DISC_TAIL_LAYERS = 2  # stride-1 conv layers after the strided stack
WIDTH_CAP = 8  # channel multiplier ceiling, in units of base width


def init_weights(module: nn.Module, generator: torch.Generator | None = None):
    """Draw conv weights from N(0, 0.02) and zero the biases."""
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                m.weight.normal_(0.0, 0.02, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()


def _enc_widths(depth: int, width: int) -> list[int]:
    return [width * min(2**k, WIDTH_CAP) for k in range(depth)]


class UNetGenerator(nn.Module):
    """Translate a stack of frames to one frame of the same spatial size."""

    def __init__(self, in_channels: int = 1, out_channels: int = 1,
                 depth: int = 7, width: int = 64):
        super().__init__()
        if depth < 2:
            raise ValueError(f"depth must be >= 2, got {depth}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.depth = depth
        self.width = width

        ch = _enc_widths(depth, width)
        self.encoders = nn.ModuleList()
        for k in range(depth):
            conv = nn.Conv2d(in_channels if k == 0 else ch[k - 1], ch[k],
                             kernel_size=4, stride=2, padding=1)
            layers: list[nn.Module] = [conv]
            # no norm on the outermost layer or the bottleneck (1x1 maps)
            if 0 < k < depth - 1:
                layers.append(nn.InstanceNorm2d(ch[k], affine=False,
                                                track_running_stats=False))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            self.encoders.append(nn.Sequential(*layers))

        self.decoders = nn.ModuleList()
        for k in range(depth - 1, -1, -1):
            in_ch = ch[k] if k == depth - 1 else 2 * ch[k]
            if k == 0:
                self.decoders.append(nn.Sequential(
                    nn.ConvTranspose2d(in_ch, out_channels,
                                       kernel_size=4, stride=2, padding=1),
                    nn.Tanh(),
                ))
            else:
                self.decoders.append(nn.Sequential(
                    nn.ConvTranspose2d(in_ch, ch[k - 1],
                                       kernel_size=4, stride=2, padding=1),
                    nn.InstanceNorm2d(ch[k - 1], affine=False,
                                      track_running_stats=False),
                    nn.ReLU(inplace=True),
                ))

    def _pad_amounts(self, h: int, w: int) -> tuple[int, int]:
        unit = 2**self.depth
        pad_h = (-h) % unit
        pad_w = (-w) % unit
        if pad_h >= h or pad_w >= w:
            raise ShapeError(
                f"input {h}x{w} too small to reflect-pad to a multiple of {unit}"
            )
        return pad_h, pad_w

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4:
            raise ShapeError(f"expected (B, C, H, W), got shape {tuple(x.shape)}")
        if x.shape[1] != self.in_channels:
            raise ArityError(
                f"expected {self.in_channels} input channels, got {x.shape[1]}"
            )
        h, w = x.shape[-2:]
        pad_h, pad_w = self._pad_amounts(h, w)
        if pad_h or pad_w:
            x = F.pad(x, (0, pad_w, 0, pad_h), mode="reflect")

        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
        x = self.decoders[0](skips[-1])
        for i, dec in enumerate(self.decoders[1:], start=1):
            skip = skips[self.depth - 1 - i]
            x = dec(torch.cat([x, skip], dim=1))
        if pad_h or pad_w:
            x = x[..., :h, :w]
        return x


class TemporalPredictor(nn.Module):
    """Predict the next frame of a domain from its previous tau - 1 frames."""

    def __init__(self, tau: int, depth: int = 7, width: int = 64):
        super().__init__()
        self.tau = tau
        self.net = UNetGenerator(in_channels=tau - 1, out_channels=1,
                                 depth=depth, width=width)

    def forward(self, history: torch.Tensor) -> torch.Tensor:
        if history.ndim != 4 or history.shape[1] != self.tau - 1:
            raise ArityError(
                f"expected {self.tau - 1} stacked frames, got shape {tuple(history.shape)}"
            )
        return self.net(history)


def disc_score_map_size(n: int, n_strided: int = 3) -> int:
    """Output side length for an n-pixel input side."""
    size = n
    for _ in range(n_strided):
        size = (size + 2 - DISC_KERNEL) // 2 + 1
    for _ in range(DISC_TAIL_LAYERS):
        size = size + 2 - DISC_KERNEL + 1
    return size


def disc_receptive_field(n_strided: int = 3) -> int:
    """Input extent seen by one score cell."""
    rf = 1
    for stride in [1] * DISC_TAIL_LAYERS + [2] * n_strided:
        rf = rf * stride + (DISC_KERNEL - stride)
    return rf


def disc_cell_interval(i: int, n_strided: int = 3) -> tuple[int, int]:
    """Closed input-index interval [a, b] that score cell i can depend on.

    One spatial axis; not clipped to the frame, so callers should intersect
    with [0, n - 1]. Padding means edge cells also see virtual zeros.
    """
    a = b = i
    for _ in range(DISC_TAIL_LAYERS):
        a, b = a - 1, b + 2
    for _ in range(n_strided):
        a, b = 2 * a - 1, 2 * b + 2
    return a, b


class PatchDiscriminator(nn.Module):
    """Convolutional patch critic emitting a sigmoid score per local region.

    No normalization layers: scores must stay a pure function of their
    receptive field. Inputs smaller than one receptive field are rejected.
    """

    def __init__(self, in_channels: int = 1, width: int = 64, n_strided: int = 3):
        super().__init__()
        if n_strided < 1:
            raise ValueError(f"need at least one strided layer, got {n_strided}")
        self.n_strided = n_strided
        self.min_input = disc_receptive_field(n_strided)

        layers: list[nn.Module] = []
        ch_in = in_channels
        for k in range(n_strided):
            ch_out = width * min(2**k, WIDTH_CAP)
            layers += [
                nn.Conv2d(ch_in, ch_out, kernel_size=4, stride=2, padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            ch_in = ch_out
        penult = width * min(2**n_strided, WIDTH_CAP)
        layers += [
            nn.Conv2d(ch_in, penult, kernel_size=4, stride=1, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(penult, 1, kernel_size=4, stride=1, padding=1),
            nn.Sigmoid(),
        ]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4:
            raise ShapeError(f"expected (B, C, H, W), got shape {tuple(x.shape)}")
        h, w = x.shape[-2:]
        if h < self.min_input or w < self.min_input:
            raise InputTooSmall(
                f"input {h}x{w} smaller than one receptive field "
                f"({self.min_input}px)"
            )
        return self.net(x)
