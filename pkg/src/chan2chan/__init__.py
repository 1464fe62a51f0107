"""Cross-channel video translation for paired fluorescence microscopy movies.

Train a pair of cross-channel generators plus per-channel next-frame
predictors adversarially on aligned two-channel movies, then translate one
channel into the other (or into a withheld third channel) frame by frame.
"""

from .core import (
    CausalWindow,
    Chan2ChanError,
    Direction,
    Domain,
    Frame,
    TrainConfig,
    VideoSequence,
    make_causal_window,
)
from .metrics import MetricReport, evaluate_sequences, mse, psnr, ssim
from .synthetic import SynthConfig, derive_target_video, gen_source_video

__version__ = "0.1.0"

__all__ = [
    "CausalWindow",
    "Chan2ChanError",
    "Direction",
    "Domain",
    "Frame",
    "MetricReport",
    "SynthConfig",
    "TrainConfig",
    "VideoSequence",
    "derive_target_video",
    "evaluate_sequences",
    "gen_source_video",
    "make_causal_window",
    "mse",
    "psnr",
    "ssim",
    "__version__",
]
