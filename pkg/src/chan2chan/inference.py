"""Applying trained models to whole sequences.

Two output modes: "spatial" translates every frame independently; "averaged"
blends the per-frame translation with the temporal prediction made from the
already-translated history, falling back to pure spatial for the first
tau - 1 frames where no full history exists.

Frames larger than the training crop can be translated in overlapping tiles
whose contributions are feather-weighted and renormalized, which avoids
visible seams at tile boundaries.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .core import Direction, Domain, DomainMismatch, Frame, VideoSequence
from .ingest import write_sequence

OUTPUT_MODES = ("spatial", "averaged")
DEFAULT_TILE = 128
DEFAULT_OVERLAP = 32


def _spatial_net(bundle, direction: Direction):
    return bundle.spatial_u2v if direction is Direction.U2V else bundle.spatial_v2u


def _temporal_net(bundle, direction: Direction):
    # the predictor for the *target* domain continues the translated movie
    return bundle.temporal_v if direction is Direction.U2V else bundle.temporal_u


def _check_source(seq: VideoSequence, direction: Direction):
    if seq.domain is not direction.source:
        raise DomainMismatch(
            f"direction {direction.value} expects source domain "
            f"{direction.source.value}, got {seq.domain.value}"
        )


def _to_sequence(frames: np.ndarray, seq: VideoSequence, domain: Domain) -> VideoSequence:
    return VideoSequence.from_array(frames.astype(np.float32), domain,
                                    seq.source_id, seq.start)


def translate_spatial(bundle, seq: VideoSequence,
                      direction: Direction = Direction.U2V) -> VideoSequence:
    """Translate every frame independently with the cross-domain generator."""
    direction = Direction(direction)
    _check_source(seq, direction)
    net = _spatial_net(bundle, direction)
    net.eval()
    with torch.no_grad():
        x = torch.from_numpy(seq.as_array()).unsqueeze(1)
        out = net(x).squeeze(1).numpy()
    return _to_sequence(out, seq, direction.target)


def translate_averaged(bundle, seq: VideoSequence,
                       direction: Direction = Direction.U2V) -> VideoSequence:
    """Blend spatial translation with the temporal continuation of the output.

    For t >= tau - 1 the result is the mean of the spatial translation of
    frame t and the temporal prediction from the previous tau - 1 translated
    frames; earlier frames are spatial-only.
    """
    direction = Direction(direction)
    _check_source(seq, direction)
    tau = bundle.config.tau
    spatial_net = _spatial_net(bundle, direction)
    temporal_net = _temporal_net(bundle, direction)
    spatial_net.eval()
    temporal_net.eval()
    with torch.no_grad():
        x = torch.from_numpy(seq.as_array()).unsqueeze(1)
        spatial = spatial_net(x)  # (T, 1, H, W)
        out = spatial.clone()
        for t in range(tau - 1, seq.T):
            history = spatial[t - tau + 1:t].squeeze(1).unsqueeze(0)
            pred = temporal_net(history)[0]
            out[t] = 0.5 * (spatial[t] + pred)
    return _to_sequence(out.squeeze(1).numpy(), seq, direction.target)


def translate(bundle, seq: VideoSequence, direction: Direction = Direction.U2V,
              mode: str | None = None) -> VideoSequence:
    """Dispatch on output mode ("spatial" | "averaged"); None uses the config."""
    mode = mode or bundle.config.output_mode
    if mode not in OUTPUT_MODES:
        raise ValueError(f"unknown output mode {mode!r}, expected one of {OUTPUT_MODES}")
    fn = translate_spatial if mode == "spatial" else translate_averaged
    return fn(bundle, seq, direction)


def translate_third_channel(bundle, seq: VideoSequence, out_dir,
                            direction: Direction = Direction.U2V,
                            mode: str | None = None, suffix: str = "_pred",
                            bit_depth: int = 16, fmt: str = "png") -> list[Path]:
    """Predict an unobserved channel and write it next to the observed ones.

    The suffix keeps predicted frame files distinguishable from measured
    frames when they share a directory.
    """
    predicted = translate(bundle, seq, direction, mode)
    return write_sequence(predicted, out_dir, bit_depth=bit_depth, fmt=fmt,
                          suffix=suffix)


def _feather_profile(n: int, ramp: int) -> np.ndarray:
    ramp = max(1, min(ramp, n))
    idx = np.arange(n, dtype=np.float64)
    w = np.minimum(idx + 1, n - idx) / ramp
    return np.minimum(w, 1.0)


def translate_frame_tiled(net, pixels: np.ndarray, tile: int = DEFAULT_TILE,
                          overlap: int = DEFAULT_OVERLAP) -> np.ndarray:
    """Apply a frame-to-frame network in overlapping feathered tiles.

    Tiles advance by tile - overlap and the last tile of each axis is pinned
    to the frame edge. Per-pixel results are weight-averaged with a
    separable ramp that fades near tile borders, so overlapping predictions
    transition smoothly.
    """
    if overlap >= tile:
        raise ValueError(f"overlap {overlap} must be smaller than tile {tile}")
    h, w = pixels.shape
    net.eval()
    if h <= tile and w <= tile:
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(pixels))[None, None]
            return net(x)[0, 0].numpy().astype(np.float32)

    def starts(extent: int) -> list[int]:
        if extent <= tile:
            return [0]
        stride = tile - overlap
        s = list(range(0, extent - tile, stride))
        s.append(extent - tile)
        return s

    acc = np.zeros((h, w), dtype=np.float64)
    wsum = np.zeros((h, w), dtype=np.float64)
    with torch.no_grad():
        for y in starts(h):
            th = min(tile, h)
            for x0 in starts(w):
                tw = min(tile, w)
                patch = np.ascontiguousarray(pixels[y:y + th, x0:x0 + tw])
                t = torch.from_numpy(patch)[None, None]
                pred = net(t)[0, 0].numpy().astype(np.float64)
                weight = np.outer(_feather_profile(th, overlap),
                                  _feather_profile(tw, overlap))
                acc[y:y + th, x0:x0 + tw] += pred * weight
                wsum[y:y + th, x0:x0 + tw] += weight
    return (acc / wsum).astype(np.float32)


def translate_sequence_tiled(bundle, seq: VideoSequence,
                             direction: Direction = Direction.U2V,
                             tile: int = DEFAULT_TILE,
                             overlap: int = DEFAULT_OVERLAP) -> VideoSequence:
    """Spatial-mode translation of a sequence via tiled frame application."""
    direction = Direction(direction)
    _check_source(seq, direction)
    net = _spatial_net(bundle, direction)
    out = np.stack([
        translate_frame_tiled(net, f.pixels, tile, overlap) for f in seq.frames
    ])
    return _to_sequence(out, seq, direction.target)
