"""Synthetic paired videos with known causal structure.

Domain U is a field of moving Gaussian blobs; domain V is a pixel transform of
U delayed by ``lag`` frames, mixed with an independent blob field and noise:

    v_t = strength * transform(u_{t-lag}) + (1 - strength) * indep_t + noise_t

All randomness derives from a single seed via independent child streams, so
every output is a pure function of the config. ``oracle_translate`` returns
the best prediction of v reachable from u alone (the deterministic component
plus the analytic expectation of the independent field), which serves as the
performance ceiling in tests.

Rendering happens in intensity space [0, 1] with a raised background and
capped blob amplitudes so that model-space values stay near [-0.6, 0.6]:
additive noise then rarely hits the clip boundary and observed errors match
their nominal variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, special

from .core import (
    ConfigMismatch,
    Domain,
    LagTooLarge,
    VideoSequence,
)

BACKGROUND = 0.2
AMP_LO, AMP_HI = 0.4, 0.6
HALO_RADIUS = 3
BLUR_SIGMA = 2.0
THRESHOLD_LEVEL = 0.25
THRESHOLD_HI, THRESHOLD_LO = 0.8, 0.2

TRANSFORMS = ("identity", "halo", "blur", "threshold")


@dataclass(frozen=True)
class SynthConfig:
    n_blobs: int = 6
    blob_sigma: float = 4.0
    velocity_range: float = 2.0
    frame_size: int = 64
    T: int = 20
    lag: int = 0
    transform: str = "identity"
    strength: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0
    threshold_level: float = THRESHOLD_LEVEL

    def __post_init__(self):
        if self.n_blobs < 0:
            raise ValueError("n_blobs must be >= 0")
        if self.blob_sigma <= 0:
            raise ValueError("blob_sigma must be > 0")
        if self.velocity_range < 0:
            raise ValueError("velocity_range must be >= 0")
        if self.frame_size < 16:
            raise ValueError("frame_size must be >= 16")
        if self.lag < 0:
            raise ValueError("lag must be >= 0")
        if self.lag + 1 >= self.T:
            raise ValueError(f"lag ({self.lag}) + 1 must be < T ({self.T})")
        if self.transform not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 < self.threshold_level < 1.0:
            raise ValueError("threshold_level must be in (0, 1)")

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "SynthConfig":
        from dataclasses import fields

        known = {f.name for f in fields(SynthConfig)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key: {sorted(unknown)[0]}")
        return SynthConfig(**d)


def _child_rngs(seed: int) -> tuple[np.random.Generator, ...]:
    # fixed stream order: source blobs, independent blobs, noise
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def _reflect(pos: np.ndarray, upper: float) -> np.ndarray:
    """Fold unbounded coordinates into [0, upper] by mirror reflection."""
    period = 2.0 * upper
    m = np.mod(pos, period)
    return np.where(m > upper, period - m, m)


def _render_blob_video(
    rng: np.random.Generator, n_blobs: int, sigma: float, vel_range: float,
    height: int, width: int, T: int,
) -> np.ndarray:
    """Intensity video (T, H, W) of drifting Gaussian blobs over a flat background."""
    pos0 = rng.uniform([0.0, 0.0], [height - 1.0, width - 1.0], size=(n_blobs, 2))
    vel = rng.uniform(-vel_range, vel_range, size=(n_blobs, 2))
    amps = rng.uniform(AMP_LO, AMP_HI, size=n_blobs)

    ys = np.arange(height, dtype=np.float64)[:, None]
    xs = np.arange(width, dtype=np.float64)[None, :]
    video = np.full((T, height, width), BACKGROUND, dtype=np.float64)
    for t in range(T):
        py = _reflect(pos0[:, 0] + t * vel[:, 0], height - 1.0)
        px = _reflect(pos0[:, 1] + t * vel[:, 1], width - 1.0)
        for b in range(n_blobs):
            d2 = (ys - py[b]) ** 2 + (xs - px[b]) ** 2
            video[t] += amps[b] * np.exp(-d2 / (2.0 * sigma**2))
    return np.clip(video, 0.0, 1.0)


def _intensity_to_model(video: np.ndarray) -> np.ndarray:
    return (2.0 * video - 1.0).astype(np.float32)


def gen_source_video(cfg: SynthConfig) -> VideoSequence:
    """Domain-U video of moving blobs; deterministic given the config."""
    rng_src, _, _ = _child_rngs(cfg.seed)
    video = _render_blob_video(
        rng_src, cfg.n_blobs, cfg.blob_sigma, cfg.velocity_range,
        cfg.frame_size, cfg.frame_size, cfg.T,
    )
    return VideoSequence.from_array(
        _intensity_to_model(video), Domain.U, source_id=f"synth-{cfg.seed}"
    )


def _disk_footprint(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius**2


def transform_frames(frames_model: np.ndarray, kind: str,
                     threshold_level: float = THRESHOLD_LEVEL) -> np.ndarray:
    """Apply the configured pixel transform to model-space frames (T, H, W).

    Identity is a pure passthrough so that the lag-only tasks are bit-exact.
    Raising threshold_level above the default destroys more of the source:
    blobs whose peak never clears it leave no trace in the output at all.
    """
    if kind == "identity":
        return np.asarray(frames_model, dtype=np.float32)
    i = (np.asarray(frames_model, dtype=np.float64) + 1.0) / 2.0
    if kind == "halo":
        footprint = _disk_footprint(HALO_RADIUS)
        out = np.empty_like(i)
        for t in range(i.shape[0]):
            dil = ndimage.grey_dilation(i[t], footprint=footprint)
            out[t] = np.clip(dil - i[t], 0.0, 1.0)
    elif kind == "blur":
        out = np.empty_like(i)
        for t in range(i.shape[0]):
            out[t] = ndimage.gaussian_filter(i[t], BLUR_SIGMA)
    elif kind == "threshold":
        out = np.where(i > threshold_level, THRESHOLD_HI, THRESHOLD_LO)
    else:
        raise ValueError(f"unknown transform {kind!r}")
    return (2.0 * out - 1.0).astype(np.float32)


def _deterministic_component(u_model: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    """strength-free causal part: transform(u) delayed by lag, padded with frame 0."""
    T = u_model.shape[0]
    src_idx = np.maximum(np.arange(T) - cfg.lag, 0)
    return transform_frames(u_model[src_idx], cfg.transform, cfg.threshold_level)


def derive_target_video(u_seq: VideoSequence, cfg: SynthConfig) -> VideoSequence:
    """Domain-V video causally derived from ``u_seq`` per the config."""
    if cfg.lag >= u_seq.T:
        raise LagTooLarge(f"lag {cfg.lag} >= sequence length {u_seq.T}")
    u_model = u_seq.as_array()
    T, height, width = u_model.shape
    _, rng_indep, rng_noise = _child_rngs(cfg.seed)

    det = _deterministic_component(u_model, cfg).astype(np.float64)
    v = cfg.strength * det
    if cfg.strength < 1.0:
        indep = _render_blob_video(
            rng_indep, cfg.n_blobs, cfg.blob_sigma, cfg.velocity_range,
            height, width, T,
        )
        v = v + (1.0 - cfg.strength) * (2.0 * indep - 1.0)
    if cfg.noise_sigma > 0:
        v = v + rng_noise.normal(0.0, cfg.noise_sigma, size=(T, height, width))
    v = np.clip(v, -1.0, 1.0).astype(np.float32)
    return VideoSequence.from_array(v, Domain.V, u_seq.source_id, u_seq.start)


def independent_field_expectation(cfg: SynthConfig, height: int, width: int) -> np.ndarray:
    """Analytic per-pixel mean of the independent blob field, in intensity space.

    Blob centers stay uniformly distributed under the reflecting dynamics, so
    the expectation is the background plus n_blobs times the mean amplitude
    times the Gaussian mass that a uniformly-placed blob deposits on the pixel:
    a separable product of erf terms.
    """
    sigma = cfg.blob_sigma
    amp_mean = 0.5 * (AMP_LO + AMP_HI)

    def axis_mass(n: int) -> np.ndarray:
        x = np.arange(n, dtype=np.float64)
        upper = n - 1.0
        s = sigma * np.sqrt(2.0)
        integral = sigma * np.sqrt(np.pi / 2.0) * (
            special.erf(x / s) + special.erf((upper - x) / s)
        )
        return integral / upper

    ey = axis_mass(height)[:, None]
    ex = axis_mass(width)[None, :]
    return BACKGROUND + cfg.n_blobs * amp_mean * ey * ex


def oracle_translate(u_seq: VideoSequence, cfg: SynthConfig) -> VideoSequence:
    """Best possible U-to-V prediction: causal component plus independent-field mean.

    This is what a perfect translator converges to; its error against the
    realized v is the irreducible noise plus the independent field's variance.
    """
    if u_seq.T != cfg.T or u_seq.frame_shape != (cfg.frame_size, cfg.frame_size):
        raise ConfigMismatch(
            f"sequence ({u_seq.T}, {u_seq.frame_shape}) does not match config "
            f"({cfg.T}, {(cfg.frame_size, cfg.frame_size)})"
        )
    u_model = u_seq.as_array()
    det = _deterministic_component(u_model, cfg).astype(np.float64)
    out = cfg.strength * det
    if cfg.strength < 1.0:
        e_indep = independent_field_expectation(cfg, *u_seq.frame_shape)
        out = out + (1.0 - cfg.strength) * (2.0 * e_indep - 1.0)
    out = np.clip(out, -1.0, 1.0).astype(np.float32)
    return VideoSequence.from_array(out, Domain.V, u_seq.source_id, u_seq.start)
