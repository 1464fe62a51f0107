"""Core data model: frames, sequences, causal windows, and the run configuration.

Pixel convention: model space is [-1, 1] (what the networks consume and emit),
metric space is [0, 1] (what the quality metrics are computed in). All types
here are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

MIN_FRAME_SIZE = 16
MIN_TAU = 2


class Chan2ChanError(Exception):
    """Base class for all package errors."""


class IndexOutOfRange(Chan2ChanError):
    pass


class TauTooSmall(Chan2ChanError):
    pass


class DomainMismatch(Chan2ChanError):
    pass


class DirectionMismatch(Chan2ChanError):
    pass


class ShapeError(Chan2ChanError):
    pass


class ArityError(Chan2ChanError):
    pass


class InputTooSmall(Chan2ChanError):
    pass


class NaNLoss(Chan2ChanError):
    pass


class EmptyDirectory(Chan2ChanError):
    pass


class MixedDimensions(Chan2ChanError):
    pass


class UnsupportedBitDepth(Chan2ChanError):
    pass


class NonContiguousIndices(Chan2ChanError):
    pass


class ShiftTooLarge(Chan2ChanError):
    pass


class CropTooLarge(Chan2ChanError):
    pass


class InsufficientArea(Chan2ChanError):
    pass


class LagTooLarge(Chan2ChanError):
    pass


class ConfigMismatch(Chan2ChanError):
    pass


class SequenceTooShort(Chan2ChanError):
    pass


class LengthMismatch(Chan2ChanError):
    pass


class FrameTooSmall(Chan2ChanError):
    pass


class VersionMismatch(Chan2ChanError):
    pass


class CorruptFile(Chan2ChanError):
    pass


class DiskError(Chan2ChanError):
    pass


class Domain(str, Enum):
    U = "U"
    V = "V"


class Direction(str, Enum):
    """Translation direction between the two imaging channels."""

    U2V = "u2v"
    V2U = "v2u"

    @property
    def source(self) -> Domain:
        return Domain.U if self is Direction.U2V else Domain.V

    @property
    def target(self) -> Domain:
        return Domain.V if self is Direction.U2V else Domain.U

    @property
    def reverse(self) -> "Direction":
        return Direction.V2U if self is Direction.U2V else Direction.U2V


@dataclass(frozen=True)
class Frame:
    """One grayscale frame in model space [-1, 1] at time index ``t``."""

    pixels: np.ndarray
    t: int
    domain: Domain

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 2:
            raise ShapeError(f"frame pixels must be 2-D, got shape {px.shape}")
        if px.shape[0] < MIN_FRAME_SIZE or px.shape[1] < MIN_FRAME_SIZE:
            raise ShapeError(
                f"frame must be at least {MIN_FRAME_SIZE}x{MIN_FRAME_SIZE}, got {px.shape}"
            )
        if not np.all(np.isfinite(px)):
            raise ShapeError("frame contains non-finite pixels")
        if px.min() < -1.0 or px.max() > 1.0:
            raise ShapeError(
                f"frame pixels outside model range [-1, 1]: [{px.min()}, {px.max()}]"
            )
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "domain", Domain(self.domain))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def with_t(self, t: int) -> "Frame":
        return Frame(self.pixels, t, self.domain)


@dataclass(frozen=True)
class VideoSequence:
    """Ordered frames of one domain with consecutive integer time indices."""

    frames: tuple[Frame, ...]
    domain: Domain
    source_id: str = ""

    def __post_init__(self):
        frames = tuple(self.frames)
        if not frames:
            raise ShapeError("empty sequence")
        domain = Domain(self.domain)
        shape = frames[0].pixels.shape
        start = frames[0].t
        for i, f in enumerate(frames):
            if f.domain is not domain:
                raise DomainMismatch(
                    f"frame {i} has domain {f.domain}, sequence is {domain}"
                )
            if f.pixels.shape != shape:
                raise MixedDimensions(
                    f"frame {i} shape {f.pixels.shape} != {shape}"
                )
            if f.t != start + i:
                raise NonContiguousIndices(
                    f"frame {i} has index {f.t}, expected {start + i}"
                )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "domain", domain)

    @property
    def T(self) -> int:
        return len(self.frames)

    @property
    def start(self) -> int:
        return self.frames[0].t

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].pixels.shape

    def frame_at(self, t: int) -> Frame:
        i = t - self.start
        if i < 0 or i >= self.T:
            raise IndexOutOfRange(
                f"time index {t} outside [{self.start}, {self.start + self.T - 1}]"
            )
        return self.frames[i]

    def as_array(self) -> np.ndarray:
        """Stack frames into a (T, H, W) float32 array."""
        return np.stack([f.pixels for f in self.frames])

    @staticmethod
    def from_array(
        arr: np.ndarray, domain: Domain, source_id: str = "", start: int = 0
    ) -> "VideoSequence":
        frames = tuple(
            Frame(arr[i], start + i, domain) for i in range(arr.shape[0])
        )
        return VideoSequence(frames, domain, source_id)


@dataclass(frozen=True)
class CausalWindow:
    """The training unit: ``tau`` consecutive source frames plus one target frame.

    With time shift ``shift`` already taken into account, the source run ends at
    the target's index minus the direction-signed shift; the temporal generators
    consume the first ``tau - 1`` source-domain frames and the spatial pairs use
    all ``tau``.
    """

    inputs: tuple[Frame, ...]
    target: Frame
    tau: int
    shift: int = 0

    def __post_init__(self):
        inputs = tuple(self.inputs)
        if self.tau < MIN_TAU:
            raise TauTooSmall(f"tau must be >= {MIN_TAU}, got {self.tau}")
        if len(inputs) != self.tau:
            raise ShapeError(f"expected {self.tau} input frames, got {len(inputs)}")
        for a, b in zip(inputs, inputs[1:]):
            if b.t != a.t + 1:
                raise NonContiguousIndices(
                    f"input indices not consecutive: {a.t} -> {b.t}"
                )
            if b.domain is not a.domain:
                raise DomainMismatch("input frames span multiple domains")
        if inputs[0].domain is self.target.domain:
            raise DomainMismatch("inputs and target must belong to opposite domains")
        signed = -self.shift if self.target.domain is Domain.V else self.shift
        if inputs[-1].t != self.target.t + signed:
            raise IndexOutOfRange(
                f"source run ends at {inputs[-1].t}, expected {self.target.t + signed}"
            )
        object.__setattr__(self, "inputs", inputs)

    @property
    def direction(self) -> Direction:
        return Direction.U2V if self.target.domain is Domain.V else Direction.V2U


def make_causal_window(
    u_seq: VideoSequence,
    v_seq: VideoSequence,
    t: int,
    tau: int,
    shift: int = 0,
    direction: Direction = Direction.U2V,
) -> CausalWindow:
    """Build the causal window targeting frame ``t`` of the direction's target domain.

    For u-to-v the source run is u[t-shift-tau+1 .. t-shift]; for v-to-u it is
    v[t+shift-tau+1 .. t+shift]. Pure function: identical arguments give
    identical windows.

    Raises TauTooSmall, DomainMismatch, or IndexOutOfRange.
    """
    if tau < MIN_TAU:
        raise TauTooSmall(f"tau must be >= {MIN_TAU}, got {tau}")
    direction = Direction(direction)
    if u_seq.domain is not Domain.U or v_seq.domain is not Domain.V:
        raise DomainMismatch(
            f"expected (U, V) sequences, got ({u_seq.domain}, {v_seq.domain})"
        )
    if direction is Direction.U2V:
        source, target_seq = u_seq, v_seq
        end = t - shift
    else:
        source, target_seq = v_seq, u_seq
        end = t + shift
    inputs = tuple(source.frame_at(i) for i in range(end - tau + 1, end + 1))
    target = target_seq.frame_at(t)
    return CausalWindow(inputs, target, tau, shift)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for one training run.

    Reconstruction weights, learning rate, batch size, and crop size default to
    the published settings (lambda_s=100, lambda_t=10, lr=2e-4, batch 8, 128px
    crops). Network sizes are configurable so tests can run shrunken models.
    """

    tau: int = 3
    shift: int = 0
    lambda_s: float = 100.0
    lambda_t: float = 10.0
    learning_rate: float = 2e-4
    batch_size: int = 8
    steps: int = 2000
    crop_size: int = 128
    seed: int = 0
    spatial_only: bool = False
    output_mode: str = "averaged"  # "spatial" | "averaged"
    gen_depth: int = 7
    gen_width: int = 64
    disc_width: int = 64
    disc_strided: int = 3
    checkpoint_every: int = 500

    def __post_init__(self):
        if self.tau < MIN_TAU:
            raise TauTooSmall(f"tau must be >= {MIN_TAU}, got {self.tau}")
        if self.lambda_s < 0 or self.lambda_t < 0:
            raise ValueError("lambda_s and lambda_t must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.crop_size < MIN_FRAME_SIZE:
            raise ValueError(f"crop_size must be >= {MIN_FRAME_SIZE}")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.output_mode not in ("spatial", "averaged"):
            raise ValueError(f"output_mode must be spatial|averaged, got {self.output_mode!r}")
        if self.gen_depth < 1 or self.gen_width < 1:
            raise ValueError("gen_depth and gen_width must be >= 1")
        if self.disc_strided < 1 or self.disc_width < 1:
            raise ValueError("disc_strided and disc_width must be >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key: {sorted(unknown)[0]}")
        return TrainConfig(**d)

    def digest(self) -> str:
        """Stable hash of the full configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def arch_fields(self) -> dict:
        """The subset of fields that fix network shapes (checkpoint compatibility)."""
        keys = ("tau", "gen_depth", "gen_width", "disc_width", "disc_strided")
        return {k: getattr(self, k) for k in keys}


def to_metric_space(pixels: np.ndarray) -> np.ndarray:
    """Map model-space values [-1, 1] to metric space [0, 1]."""
    return (np.asarray(pixels, dtype=np.float64) + 1.0) / 2.0


def to_model_space(values: np.ndarray) -> np.ndarray:
    """Map metric-space values [0, 1] to model space [-1, 1]."""
    return np.asarray(values, dtype=np.float64) * 2.0 - 1.0
