"""Image quality metrics (MSE, PSNR, SSIM) and sequence-level reports.

All metrics are computed in metric space [0, 1] with data range L = 1, so
scores are comparable across source bit depths. SSIM follows the reference
formulation: 11x11 Gaussian window with sigma 1.5, K1 = 0.01, K2 = 0.03, and
valid-window convolution (no padding).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d

from .core import (
    FrameTooSmall,
    LengthMismatch,
    ShapeError,
    VideoSequence,
    to_metric_space,
)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0

METRIC_CONVENTIONS = {
    "space": "[0, 1]",
    "data_range": DATA_RANGE,
    "ssim_window": SSIM_WINDOW,
    "ssim_sigma": SSIM_SIGMA,
    "ssim_k1": SSIM_K1,
    "ssim_k2": SSIM_K2,
    "ssim_boundary": "valid",
    "psnr_infinite": "Infinity",
}


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ShapeError(f"expected 2-D frames, got shape {a.shape}")
    return a, b


def mse(a, b) -> float:
    """Per-pixel mean squared difference."""
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(m: float) -> float:
    """Peak signal-to-noise ratio in dB for data range 1; +inf when m == 0."""
    if m < 0:
        raise ValueError(f"mse must be >= 0, got {m}")
    if m == 0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE**2 / m)


def psnr(a, b) -> float:
    return psnr_from_mse(mse(a, b))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian weight window."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a, b) -> float:
    """Mean local structural similarity over all fully-valid window positions."""
    a, b = _check_pair(a, b)
    if min(a.shape) < SSIM_WINDOW:
        raise FrameTooSmall(
            f"frames must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape}"
        )
    win = gaussian_window()
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2

    mu_a = convolve2d(a, win, mode="valid")
    mu_b = convolve2d(b, win, mode="valid")
    var_a = convolve2d(a * a, win, mode="valid") - mu_a**2
    var_b = convolve2d(b * b, win, mode="valid") - mu_b**2
    cov = convolve2d(a * b, win, mode="valid") - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class FrameMetrics:
    index: int
    mse: float
    ssim: float
    psnr: float


@dataclass(frozen=True)
class MetricReport:
    """Per-frame metrics plus aggregates for a predicted-vs-real sequence pair."""

    per_frame: tuple[FrameMetrics, ...]
    direction: str = ""
    mode: str = ""
    aggregate: dict = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "per_frame", tuple(self.per_frame))
        object.__setattr__(self, "aggregate", self._compute_aggregate())

    def _compute_aggregate(self) -> dict:
        agg = {}
        for name in ("mse", "ssim", "psnr"):
            vals = np.array([getattr(r, name) for r in self.per_frame])
            finite = vals[np.isfinite(vals)]
            # mean and std over finite rows; frames with infinite psnr
            # (identical images) are counted, not averaged
            entry = {
                "mean": float(np.mean(finite)) if finite.size else math.nan,
                "std": float(np.std(finite)) if finite.size else math.nan,
            }
            if name == "psnr":
                entry["infinite_frames"] = int(np.sum(~np.isfinite(vals)))
                if finite.size == 0 and vals.size:
                    entry["mean"] = math.inf
            agg[name] = entry
        return agg

    def to_json(self) -> str:
        def _num(x):
            if isinstance(x, float) and math.isinf(x):
                return "Infinity"
            if isinstance(x, float) and math.isnan(x):
                return "NaN"
            return x

        payload = {
            "conventions": METRIC_CONVENTIONS,
            "direction": self.direction,
            "mode": self.mode,
            "frames": len(self.per_frame),
            "aggregate": {
                m: {k: _num(v) for k, v in entry.items()}
                for m, entry in self.aggregate.items()
            },
        }
        return json.dumps(payload, indent=2)

    def write_csv(self, path: str | Path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "mse", "ssim", "psnr"])
            for r in self.per_frame:
                w.writerow([r.index, repr(r.mse), repr(r.ssim), repr(r.psnr)])


def evaluate_sequences(
    pred: VideoSequence, real: VideoSequence, direction: str = "", mode: str = ""
) -> MetricReport:
    """Score a predicted sequence against the real one, frame by frame.

    Both sequences are mapped from model space to metric space before scoring.
    """
    if pred.T != real.T:
        raise LengthMismatch(f"sequence lengths differ: {pred.T} vs {real.T}")
    if pred.frame_shape != real.frame_shape:
        raise ShapeError(
            f"frame shapes differ: {pred.frame_shape} vs {real.frame_shape}"
        )
    rows = []
    for p, r in zip(pred.frames, real.frames):
        a = to_metric_space(p.pixels)
        b = to_metric_space(r.pixels)
        m = mse(a, b)
        rows.append(FrameMetrics(r.t, m, ssim(a, b), psnr_from_mse(m)))
    return MetricReport(tuple(rows), direction=direction, mode=mode)
