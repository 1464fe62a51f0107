"""Loading paired frame directories and building patch datasets.

Frame files are grayscale PNG or TIFF, 8- or 16-bit; the frame index is the
last digit run in the file name (``frame_0000.png``, ``frame_0000_pred.png``).
Raw integer values are mapped linearly
from [0, 2^bits - 1] to model space [-1, 1]; the mapping round-trips exactly.

Patch extraction applies identical crop origins to both channels (paired
translation) and keeps train and validation crops spatially disjoint by
splitting the frame into two row bands separated by at least one crop height.
A JSON manifest records everything needed to rebuild a dataset bit-exactly.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tifffile
from PIL import Image

from .core import (
    CausalWindow,
    CropTooLarge,
    Direction,
    Domain,
    EmptyDirectory,
    Frame,
    InsufficientArea,
    MixedDimensions,
    NonContiguousIndices,
    SequenceTooShort,
    ShiftTooLarge,
    UnsupportedBitDepth,
    VideoSequence,
)

FRAME_EXTENSIONS = (".png", ".tif", ".tiff")


@dataclass(frozen=True)
class RawFrameFile:
    path: Path
    bit_depth: int
    index: int


def _parse_index(path: Path) -> int | None:
    # the frame index is the last digit run in the stem, so suffixed files
    # like frame_0003_pred.png still sort as frame 3
    runs = re.findall(r"\d+", path.stem)
    return int(runs[-1]) if runs else None


def read_frame_file(path: Path) -> tuple[np.ndarray, int]:
    """Read one grayscale frame; returns (integer array, bit depth)."""
    path = Path(path)
    if path.suffix.lower() in (".tif", ".tiff"):
        arr = tifffile.imread(path)
    else:
        arr = np.array(Image.open(path))
    if arr.ndim != 2:
        raise UnsupportedBitDepth(f"{path.name}: expected single-channel image, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return arr, 8
    if arr.dtype == np.uint16:
        return arr, 16
    if arr.dtype == np.int32 and arr.max() <= 65535 and arr.min() >= 0:
        # PIL reads 16-bit PNG as mode "I"
        return arr.astype(np.uint16), 16
    raise UnsupportedBitDepth(f"{path.name}: unsupported dtype {arr.dtype}")


def normalize_pixels(raw: np.ndarray, bit_depth: int) -> np.ndarray:
    """Map raw integers [0, 2^bits - 1] linearly to model space [-1, 1]."""
    if bit_depth not in (8, 16):
        raise UnsupportedBitDepth(f"bit depth {bit_depth} not supported")
    maxv = float(2**bit_depth - 1)
    return (raw.astype(np.float64) / maxv * 2.0 - 1.0).astype(np.float32)


def denormalize_pixels(pixels: np.ndarray, bit_depth: int) -> np.ndarray:
    """Inverse of normalize_pixels; exact for every representable raw value."""
    if bit_depth not in (8, 16):
        raise UnsupportedBitDepth(f"bit depth {bit_depth} not supported")
    maxv = float(2**bit_depth - 1)
    scaled = (pixels.astype(np.float64) + 1.0) / 2.0 * maxv
    out = np.rint(np.clip(scaled, 0, maxv))
    return out.astype(np.uint8 if bit_depth == 8 else np.uint16)


def scan_frame_files(directory: Path) -> list[RawFrameFile]:
    directory = Path(directory)
    files = []
    for p in sorted(directory.iterdir()) if directory.is_dir() else []:
        if p.suffix.lower() not in FRAME_EXTENSIONS:
            continue
        idx = _parse_index(p)
        if idx is None:
            continue
        files.append(p)
    if not files:
        raise EmptyDirectory(f"no indexed frame files in {directory}")
    out = []
    for p in files:
        _, depth = read_frame_file(p)
        out.append(RawFrameFile(p, depth, _parse_index(p)))
    return sorted(out, key=lambda f: f.index)


def load_sequence(directory: Path, domain: Domain) -> VideoSequence:
    """Load a frame directory into a normalized sequence indexed from 0.

    Raises EmptyDirectory, MixedDimensions, UnsupportedBitDepth, or
    NonContiguousIndices (missing frame numbers).
    """
    records = scan_frame_files(directory)
    indices = [r.index for r in records]
    for a, b in zip(indices, indices[1:]):
        if b != a + 1:
            raise NonContiguousIndices(
                f"{directory}: frame indices jump from {a} to {b}"
            )
    frames = []
    shape = None
    for i, rec in enumerate(records):
        raw, depth = read_frame_file(rec.path)
        if shape is None:
            shape = raw.shape
        elif raw.shape != shape:
            raise MixedDimensions(
                f"{rec.path.name}: shape {raw.shape} != {shape}"
            )
        frames.append(Frame(normalize_pixels(raw, depth), i, domain))
    return VideoSequence(tuple(frames), Domain(domain), source_id=Path(directory).name)


def write_sequence(
    seq: VideoSequence, directory: Path, bit_depth: int = 16,
    fmt: str = "png", suffix: str = "",
) -> list[Path]:
    """Write a sequence as frame files; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, frame in enumerate(seq.frames):
        raw = denormalize_pixels(frame.pixels, bit_depth)
        path = directory / f"frame_{i:04d}{suffix}.{fmt}"
        if fmt in ("tif", "tiff"):
            tifffile.imwrite(path, raw)
        else:
            Image.fromarray(raw).save(path)
        paths.append(path)
    return paths


def align_time_shift(
    u_seq: VideoSequence, v_seq: VideoSequence, s: int
) -> tuple[VideoSequence, VideoSequence]:
    """Trim both sequences so index i refers to causally corresponding frames.

    Positive ``s`` means v lags u by s frames (v_t derives from u_{t-s});
    negative means the opposite. Output lengths are min(T_u, T_v) - |s| and
    windows built on the result use shift = 0.
    """
    length = min(u_seq.T, v_seq.T) - abs(s)
    if length < 1:
        raise ShiftTooLarge(
            f"|s| = {abs(s)} leaves no overlap for lengths ({u_seq.T}, {v_seq.T})"
        )
    if s == 0 and u_seq.T == v_seq.T:
        return u_seq, v_seq
    u_off, v_off = (0, s) if s >= 0 else (-s, 0)
    u = u_seq.as_array()[u_off:u_off + length]
    v = v_seq.as_array()[v_off:v_off + length]
    return (
        VideoSequence.from_array(u, u_seq.domain, u_seq.source_id),
        VideoSequence.from_array(v, v_seq.domain, v_seq.source_id),
    )


@dataclass(frozen=True)
class WindowPair:
    """Aligned u and v crops over one causal window: (tau, crop, crop) each.

    The last frame of each stack is the window's target for the opposite
    direction, so both translation directions derive from one pair.
    """

    u_frames: np.ndarray
    v_frames: np.ndarray
    origin: tuple[int, int]  # (row, col) of the crop in the source frames
    t: int  # time index of the final (target) frame
    source_id: str = ""

    def __post_init__(self):
        for name in ("u_frames", "v_frames"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float32)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.u_frames.shape != self.v_frames.shape:
            raise MixedDimensions(
                f"u/v window shapes differ: {self.u_frames.shape} vs {self.v_frames.shape}"
            )

    @property
    def tau(self) -> int:
        return self.u_frames.shape[0]

    def as_causal_window(self, direction: Direction) -> CausalWindow:
        direction = Direction(direction)
        t0 = self.t - self.tau + 1
        if direction is Direction.U2V:
            inputs = tuple(
                Frame(self.u_frames[i], t0 + i, Domain.U) for i in range(self.tau)
            )
            target = Frame(self.v_frames[-1], self.t, Domain.V)
        else:
            inputs = tuple(
                Frame(self.v_frames[i], t0 + i, Domain.V) for i in range(self.tau)
            )
            target = Frame(self.u_frames[-1], self.t, Domain.U)
        return CausalWindow(inputs, target, self.tau, shift=0)


@dataclass(frozen=True)
class PatchDataset:
    windows: tuple[WindowPair, ...]
    split: str  # "train" | "val"
    crop_origins: tuple[tuple[int, int], ...]
    seed: int
    crop: int
    tau: int

    def __len__(self) -> int:
        return len(self.windows)

    def __getitem__(self, i: int) -> WindowPair:
        return self.windows[i]


def _val_band_start(height: int, crop: int, val_share: float) -> int:
    # val origins occupy rows [start, height - crop]; train rows [0, start - crop]
    lo, hi = crop, height - crop
    start = crop + int(round((height - 2 * crop) * (1.0 - val_share)))
    return min(max(start, lo), hi)


def extract_patches(
    u_seq: VideoSequence,
    v_seq: VideoSequence,
    crop: int,
    n_train: int,
    n_val: int,
    tau: int,
    seed: int,
    grid: bool = False,
) -> tuple[PatchDataset, PatchDataset]:
    """Sample paired crop windows and split them into train and validation sets.

    Each sampled origin is applied to both channels and unrolled over every
    valid causal window in time; the window lists are then truncated to the
    requested sizes. Validation origins are confined to a bottom row band that
    no train crop can touch, so the two splits never share a pixel.
    """
    height, width = u_seq.frame_shape
    if v_seq.frame_shape != (height, width):
        raise MixedDimensions(
            f"paired sequences differ in size: {u_seq.frame_shape} vs {v_seq.frame_shape}"
        )
    if crop > height or crop > width:
        raise CropTooLarge(f"crop {crop} exceeds frame size {(height, width)}")
    T = min(u_seq.T, v_seq.T)
    wpo = T - tau + 1  # windows per origin
    if wpo < 1:
        raise SequenceTooShort(f"need T >= tau, got T={T}, tau={tau}")

    if n_val > 0 and n_train > 0:
        if height < 2 * crop:
            raise InsufficientArea(
                f"frame height {height} cannot hold disjoint train and val bands of {crop}px"
            )
        val_share = n_val / (n_train + n_val)
        band = _val_band_start(height, crop, val_share)
        train_rows = (0, band - crop)
        val_rows = (band, height - crop)
    else:
        train_rows = val_rows = (0, height - crop)

    rng = np.random.default_rng(seed)
    u_arr = u_seq.as_array()
    v_arr = v_seq.as_array()

    def sample_origins(n_windows: int, rows: tuple[int, int]) -> list[tuple[int, int]]:
        n_origins = math.ceil(n_windows / wpo)
        if grid:
            ys = list(range(rows[0], rows[1] + 1, crop)) or [rows[0]]
            xs = list(range(0, width - crop + 1, crop)) or [0]
            cells = [(y, x) for y in ys for x in xs]
            return [cells[i % len(cells)] for i in range(n_origins)]
        ys = rng.integers(rows[0], rows[1] + 1, size=n_origins)
        xs = rng.integers(0, width - crop + 1, size=n_origins)
        return list(zip(ys.tolist(), xs.tolist()))

    def build(n_windows: int, origins: list[tuple[int, int]], split: str) -> PatchDataset:
        windows = []
        for (y, x) in origins:
            u_crop = u_arr[:, y:y + crop, x:x + crop]
            v_crop = v_arr[:, y:y + crop, x:x + crop]
            for t in range(tau - 1, T):
                windows.append(
                    WindowPair(
                        u_crop[t - tau + 1:t + 1], v_crop[t - tau + 1:t + 1],
                        (y, x), t, u_seq.source_id,
                    )
                )
                if len(windows) == n_windows:
                    break
            if len(windows) == n_windows:
                break
        return PatchDataset(tuple(windows), split, tuple(origins), seed, crop, tau)

    # train origins are drawn before val origins; order matters for determinism
    train_origins = sample_origins(n_train, train_rows) if n_train else []
    val_origins = sample_origins(n_val, val_rows) if n_val else []
    return (
        build(n_train, train_origins, "train"),
        build(n_val, val_origins, "val"),
    )


def concat_datasets(datasets: list[PatchDataset]) -> PatchDataset:
    """Merge datasets from several movies into one (same split, crop, tau)."""
    if not datasets:
        raise ValueError("nothing to concatenate")
    first = datasets[0]
    for d in datasets[1:]:
        if d.split != first.split or d.crop != first.crop or d.tau != first.tau:
            raise ValueError("datasets disagree on split/crop/tau")
    return PatchDataset(
        tuple(w for d in datasets for w in d.windows),
        first.split,
        tuple(o for d in datasets for o in d.crop_origins),
        first.seed,
        first.crop,
        first.tau,
    )


def dataset_manifest(
    train: PatchDataset, val: PatchDataset, extra: dict | None = None
) -> dict:
    """Everything needed to reconstruct the split bit-exactly from the inputs."""
    manifest = {
        "seed": train.seed,
        "crop": train.crop,
        "tau": train.tau,
        "n_train": len(train),
        "n_val": len(val),
        "split_rule": "row-band: val origins confined to a bottom band disjoint from train crops",
        "train_origins": [list(o) for o in train.crop_origins],
        "val_origins": [list(o) for o in val.crop_origins],
        "train_window_t": [w.t for w in train.windows],
        "val_window_t": [w.t for w in val.windows],
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(path: Path, manifest: dict):
    Path(path).write_text(json.dumps(manifest, indent=2))


def read_manifest(path: Path) -> dict:
    return json.loads(Path(path).read_text())
