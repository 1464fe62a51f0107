"""Adversarial and reconstruction losses plus the per-step loss record.

Sign conventions: discriminator_loss returns the log-likelihood the critic
wants to maximize (trainers minimize its negation); every generator-side
term is a penalty to minimize. Scores are clamped away from {0, 1} before
the log so a saturated critic cannot produce infinities.

Frame-sequence losses (adversarial, L1) sum per-frame means over the
window; with equal frame sizes that equals tau times the flat mean, which
is how the trainer computes them on stacked tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterable, Sequence

import torch

from .core import NaNLoss

SCORE_EPS = 1e-7


def _log_clamped(x: torch.Tensor) -> torch.Tensor:
    return torch.log(x.clamp(SCORE_EPS, 1.0 - SCORE_EPS))


def discriminator_loss(real_scores: torch.Tensor,
                       fake_scores: torch.Tensor) -> torch.Tensor:
    """Critic log-likelihood: mean log(real) + mean log(1 - fake)."""
    return _log_clamped(real_scores).mean() + _log_clamped(1.0 - fake_scores).mean()


def _per_frame(x) -> Sequence[torch.Tensor]:
    return x if isinstance(x, (list, tuple)) else (x,)


def generator_adversarial_loss(fake_scores) -> torch.Tensor:
    """Non-saturating fooling penalty, summed over window frames.

    Accepts one score tensor or a sequence of them (one per frame); each
    contributes the mean of -log(score) over its cells.
    """
    terms = [-_log_clamped(s).mean() for s in _per_frame(fake_scores)]
    return sum(terms[1:], start=terms[0])


def spatial_l1(fake_frames, real_frames) -> torch.Tensor:
    """Mean absolute error, summed over window frames (tensor or sequence)."""
    fakes, reals = _per_frame(fake_frames), _per_frame(real_frames)
    if len(fakes) != len(reals):
        raise ValueError(f"frame counts differ: {len(fakes)} vs {len(reals)}")
    terms = [(f - r).abs().mean() for f, r in zip(fakes, reals)]
    return sum(terms[1:], start=terms[0])


def _mse(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return ((pred - target) ** 2).mean()


def temporal_loss(pred_next: torch.Tensor, real_next: torch.Tensor) -> torch.Tensor:
    """Per-pixel MSE of the next-frame prediction from real history."""
    return _mse(pred_next, real_next)


def temporal_spatial_loss(pred_next: torch.Tensor,
                          real_next: torch.Tensor) -> torch.Tensor:
    """Per-pixel MSE of the next-frame prediction from translated history.

    Same formula as temporal_loss; kept separate because it couples both
    generators and is logged as its own component.
    """
    return _mse(pred_next, real_next)


GENERATOR_COMPONENTS = (
    "adv_u2v", "adv_v2u",
    "l1_u2v", "l1_v2u",
    "temporal_v", "temporal_u",
    "temporal_spatial_v", "temporal_spatial_u",
)


def full_generator_objective(components: dict[str, torch.Tensor],
                             lambda_s: float, lambda_t: float) -> torch.Tensor:
    """Weighted sum of the eight generator-side components."""
    missing = [k for k in GENERATOR_COMPONENTS if k not in components]
    if missing:
        raise KeyError(f"missing loss components: {missing}")
    c = components
    return (
        c["adv_u2v"] + c["adv_v2u"]
        + lambda_s * (c["l1_u2v"] + c["l1_v2u"])
        + lambda_t * (c["temporal_v"] + c["temporal_u"]
                      + c["temporal_spatial_v"] + c["temporal_spatial_u"])
    )


@dataclass(frozen=True)
class LossRecord:
    """Scalar loss values for one training step.

    disc_* store the critic log-likelihood objectives (maximized); total is
    the generator objective actually minimized, recomputable from the
    components and the weights.
    """

    step: int
    adv_u2v: float
    adv_v2u: float
    l1_u2v: float
    l1_v2u: float
    temporal_v: float
    temporal_u: float
    temporal_spatial_v: float
    temporal_spatial_u: float
    disc_v: float
    disc_u: float
    total: float

    def recompute_total(self, lambda_s: float, lambda_t: float) -> float:
        return (
            self.adv_u2v + self.adv_v2u
            + lambda_s * (self.l1_u2v + self.l1_v2u)
            + lambda_t * (self.temporal_v + self.temporal_u
                          + self.temporal_spatial_v + self.temporal_spatial_u)
        )

    def ensure_finite(self):
        import math
        for f in fields(self):
            if f.name == "step":
                continue
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise NaNLoss(f"step {self.step}: {f.name} = {value}")

    @staticmethod
    def csv_header() -> str:
        return ",".join(f.name for f in fields(LossRecord))

    def csv_row(self) -> str:
        cells = []
        for f in fields(self):
            value = getattr(self, f.name)
            cells.append(str(value) if f.name == "step" else repr(float(value)))
        return ",".join(cells)

    @staticmethod
    def from_csv_row(row: str) -> "LossRecord":
        parts = row.strip().split(",")
        names = [f.name for f in fields(LossRecord)]
        if len(parts) != len(names):
            raise ValueError(f"expected {len(names)} cells, got {len(parts)}")
        kwargs = {name: (int(p) if name == "step" else float(p))
                  for name, p in zip(names, parts)}
        return LossRecord(**kwargs)


def write_loss_log(path, records: Iterable[LossRecord]):
    with open(path, "w") as fh:
        fh.write(LossRecord.csv_header() + "\n")
        for rec in records:
            fh.write(rec.csv_row() + "\n")


def read_loss_log(path) -> list[LossRecord]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    return [LossRecord.from_csv_row(line) for line in lines[1:] if line]
