"""Joint adversarial training of the six networks.

One step updates the two critics first (on detached translations), then all
generator-side networks together under the weighted objective. Everything
is deterministic on CPU: weights come from a private seeded generator, and
the batch for step s is a pure function of (seed, dataset size, s), so an
interrupted run resumed from a checkpoint replays the identical schedule.

Checkpoints are a small header (magic, format version, payload checksum)
followed by a torch.save payload, written atomically.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import torch

from .core import ConfigMismatch, CorruptFile, TrainConfig, VersionMismatch
from .ingest import PatchDataset
from .losses import (
    LossRecord,
    discriminator_loss,
    full_generator_objective,
    generator_adversarial_loss,
    spatial_l1,
    temporal_loss,
    temporal_spatial_loss,
)
from .networks import PatchDiscriminator, TemporalPredictor, UNetGenerator, init_weights

CHECKPOINT_MAGIC = b"C2C\x01"
CHECKPOINT_VERSION = 1
ADAM_BETAS = (0.5, 0.999)

MODEL_NAMES = ("spatial_u2v", "spatial_v2u", "temporal_v", "temporal_u",
               "disc_v", "disc_u")


@dataclass
class ModelBundle:
    """The six networks of one experiment plus the config they were built from."""

    spatial_u2v: UNetGenerator
    spatial_v2u: UNetGenerator
    temporal_v: TemporalPredictor
    temporal_u: TemporalPredictor
    disc_v: PatchDiscriminator
    disc_u: PatchDiscriminator
    config: TrainConfig

    @classmethod
    def create(cls, cfg: TrainConfig) -> "ModelBundle":
        gen = torch.Generator().manual_seed(cfg.seed)
        nets = {
            "spatial_u2v": UNetGenerator(1, 1, cfg.gen_depth, cfg.gen_width),
            "spatial_v2u": UNetGenerator(1, 1, cfg.gen_depth, cfg.gen_width),
            "temporal_v": TemporalPredictor(cfg.tau, cfg.gen_depth, cfg.gen_width),
            "temporal_u": TemporalPredictor(cfg.tau, cfg.gen_depth, cfg.gen_width),
            "disc_v": PatchDiscriminator(1, cfg.disc_width, cfg.disc_strided),
            "disc_u": PatchDiscriminator(1, cfg.disc_width, cfg.disc_strided),
        }
        # init order is part of the reproducibility contract
        for name in MODEL_NAMES:
            init_weights(nets[name], gen)
        return cls(config=cfg, **nets)

    def named_models(self) -> dict[str, torch.nn.Module]:
        return {name: getattr(self, name) for name in MODEL_NAMES}

    def generator_modules(self, spatial_only: bool | None = None) -> list[torch.nn.Module]:
        if spatial_only is None:
            spatial_only = self.config.spatial_only
        mods = [self.spatial_u2v, self.spatial_v2u]
        if not spatial_only:
            mods += [self.temporal_v, self.temporal_u]
        return mods

    def discriminator_modules(self) -> list[torch.nn.Module]:
        return [self.disc_v, self.disc_u]

    def generator_parameters(self) -> list[torch.nn.Parameter]:
        return [p for m in self.generator_modules() for p in m.parameters()]

    def discriminator_parameters(self) -> list[torch.nn.Parameter]:
        return [p for m in self.discriminator_modules() for p in m.parameters()]


def make_optimizers(bundle: ModelBundle) -> tuple[torch.optim.Adam, torch.optim.Adam]:
    lr = bundle.config.learning_rate
    opt_g = torch.optim.Adam(bundle.generator_parameters(), lr=lr, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(bundle.discriminator_parameters(), lr=lr, betas=ADAM_BETAS)
    return opt_g, opt_d


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(n)


def batch_indices(step: int, n: int, batch_size: int, seed: int,
                  _perm_cache: dict = {}) -> list[int]:
    """Window indices for one step; a pure function of its arguments.

    Epochs are seeded permutations of the dataset; the final short batch of
    an epoch wraps around to the start of the same permutation so every
    batch has full size.
    """
    steps_per_epoch = math.ceil(n / batch_size)
    epoch, pos = divmod(step, steps_per_epoch)
    key = (seed, epoch, n)
    if _perm_cache.get("key") != key:
        _perm_cache["key"] = key
        _perm_cache["perm"] = epoch_permutation(seed, epoch, n)
    perm = _perm_cache["perm"]
    return [int(perm[k % n]) for k in range(pos * batch_size, (pos + 1) * batch_size)]


def _batch_tensors(dataset: PatchDataset, indices: Sequence[int]) -> tuple[torch.Tensor, torch.Tensor]:
    u = np.stack([dataset[i].u_frames for i in indices])
    v = np.stack([dataset[i].v_frames for i in indices])
    return torch.from_numpy(u), torch.from_numpy(v)


def _set_requires_grad(modules: Iterable[torch.nn.Module], flag: bool):
    for m in modules:
        for p in m.parameters():
            p.requires_grad_(flag)


def train_step(bundle: ModelBundle, opt_g: torch.optim.Adam,
               opt_d: torch.optim.Adam, u_win: torch.Tensor,
               v_win: torch.Tensor, step: int) -> LossRecord:
    """One critic update followed by one joint generator update.

    u_win and v_win are (B, tau, H, W) stacks of aligned crops; the last
    frame is the target, earlier frames are history.
    """
    cfg = bundle.config
    b, tau, h, w = u_win.shape

    u_flat = u_win.reshape(b * tau, 1, h, w)
    v_flat = v_win.reshape(b * tau, 1, h, w)
    fake_v_flat = bundle.spatial_u2v(u_flat)
    fake_u_flat = bundle.spatial_v2u(v_flat)

    # critics on detached translations; generator update then sees the
    # refreshed critics
    opt_d.zero_grad(set_to_none=True)
    d_v_obj = discriminator_loss(bundle.disc_v(v_flat),
                                 bundle.disc_v(fake_v_flat.detach()))
    d_u_obj = discriminator_loss(bundle.disc_u(u_flat),
                                 bundle.disc_u(fake_u_flat.detach()))
    (-(d_v_obj + d_u_obj)).backward()
    opt_d.step()

    _set_requires_grad(bundle.discriminator_modules(), False)
    opt_g.zero_grad(set_to_none=True)

    components = {
        "adv_u2v": tau * generator_adversarial_loss(bundle.disc_v(fake_v_flat)),
        "adv_v2u": tau * generator_adversarial_loss(bundle.disc_u(fake_u_flat)),
        "l1_u2v": tau * spatial_l1(fake_v_flat, v_flat),
        "l1_v2u": tau * spatial_l1(fake_u_flat, u_flat),
    }
    if cfg.spatial_only:
        zero = torch.zeros(())
        for name in ("temporal_v", "temporal_u",
                     "temporal_spatial_v", "temporal_spatial_u"):
            components[name] = zero
    else:
        v_target = v_win[:, tau - 1:tau]
        u_target = u_win[:, tau - 1:tau]
        fake_v_win = fake_v_flat.reshape(b, tau, h, w)
        fake_u_win = fake_u_flat.reshape(b, tau, h, w)
        components["temporal_v"] = temporal_loss(
            bundle.temporal_v(v_win[:, :tau - 1]), v_target)
        components["temporal_u"] = temporal_loss(
            bundle.temporal_u(u_win[:, :tau - 1]), u_target)
        components["temporal_spatial_v"] = temporal_spatial_loss(
            bundle.temporal_v(fake_v_win[:, :tau - 1]), v_target)
        components["temporal_spatial_u"] = temporal_spatial_loss(
            bundle.temporal_u(fake_u_win[:, :tau - 1]), u_target)

    total = full_generator_objective(components, cfg.lambda_s, cfg.lambda_t)
    total.backward()
    opt_g.step()
    _set_requires_grad(bundle.discriminator_modules(), True)

    # the logged total is recomposed from the logged components in float64,
    # so it recomputes exactly from the CSV; the optimizer saw the float32 sum
    logged = {k: float(v.detach()) for k, v in components.items()}
    return LossRecord(
        step=step,
        disc_v=float(d_v_obj.detach()),
        disc_u=float(d_u_obj.detach()),
        total=(logged["adv_u2v"] + logged["adv_v2u"]
               + cfg.lambda_s * (logged["l1_u2v"] + logged["l1_v2u"])
               + cfg.lambda_t * (logged["temporal_v"] + logged["temporal_u"]
                                 + logged["temporal_spatial_v"]
                                 + logged["temporal_spatial_u"])),
        **logged,
    )


def save_checkpoint(path, bundle: ModelBundle, opt_g: torch.optim.Adam,
                    opt_d: torch.optim.Adam, step: int):
    """Write header + checksummed torch payload atomically."""
    path = Path(path)
    obj = {
        "step": step,
        "config": bundle.config.to_dict(),
        "models": {name: m.state_dict() for name, m in bundle.named_models().items()},
        "opt_g": opt_g.state_dict(),
        "opt_d": opt_d.state_dict(),
    }
    buf = io.BytesIO()
    torch.save(obj, buf)
    payload = buf.getvalue()
    blob = (CHECKPOINT_MAGIC
            + CHECKPOINT_VERSION.to_bytes(4, "big")
            + hashlib.sha256(payload).digest()
            + payload)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    """Validate and deserialize; CorruptFile / VersionMismatch on bad files."""
    blob = Path(path).read_bytes()
    if len(blob) < 40 or blob[:4] != CHECKPOINT_MAGIC:
        raise CorruptFile(f"{path}: not a checkpoint file")
    version = int.from_bytes(blob[4:8], "big")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"{path}: format version {version}, expected {CHECKPOINT_VERSION}"
        )
    digest, payload = blob[8:40], blob[40:]
    if hashlib.sha256(payload).digest() != digest:
        raise CorruptFile(f"{path}: checksum mismatch, file is damaged")
    return torch.load(io.BytesIO(payload), weights_only=False)


def restore_bundle(path) -> tuple[ModelBundle, torch.optim.Adam, torch.optim.Adam, int]:
    """Rebuild bundle and optimizer state exactly as saved."""
    saved = load_checkpoint(path)
    cfg = TrainConfig.from_dict(saved["config"])
    bundle = ModelBundle.create(cfg)
    for name, module in bundle.named_models().items():
        module.load_state_dict(saved["models"][name])
    opt_g, opt_d = make_optimizers(bundle)
    opt_g.load_state_dict(saved["opt_g"])
    opt_d.load_state_dict(saved["opt_d"])
    return bundle, opt_g, opt_d, saved["step"]


def check_resume_config(saved_cfg: dict, cfg: TrainConfig):
    """Configs must agree on everything except the step budget."""
    current = cfg.to_dict()
    for key in sorted(current):
        if key == "steps":
            continue
        if saved_cfg.get(key) != current[key]:
            raise ConfigMismatch(
                f"checkpoint config differs at '{key}': "
                f"{saved_cfg.get(key)!r} vs {current[key]!r}"
            )


def train(bundle: ModelBundle, dataset: PatchDataset, out_dir,
          resume_from=None,
          stop_callback: Callable[[LossRecord], bool] | None = None,
          ) -> list[LossRecord]:
    """Run cfg.steps optimization steps, logging and checkpointing.

    Periodic checkpoints land at checkpoint_NNNNNN.pt; the final state is
    always checkpoint_final.pt. With resume_from, training continues at the
    saved step with the same data schedule the uninterrupted run would use.
    stop_callback can end training early (return True) once a target is met.
    """
    cfg = bundle.config
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    loss_path = out_dir / "losses.csv"

    start_step = 0
    if resume_from is not None:
        saved = load_checkpoint(resume_from)
        check_resume_config(saved["config"], cfg)
        for name, module in bundle.named_models().items():
            module.load_state_dict(saved["models"][name])
        opt_g, opt_d = make_optimizers(bundle)
        opt_g.load_state_dict(saved["opt_g"])
        opt_d.load_state_dict(saved["opt_d"])
        start_step = saved["step"]
    else:
        opt_g, opt_d = make_optimizers(bundle)

    for m in bundle.named_models().values():
        m.train()

    n = len(dataset)
    records: list[LossRecord] = []
    mode = "a" if start_step > 0 and loss_path.exists() else "w"
    with open(loss_path, mode) as log:
        if mode == "w":
            log.write(LossRecord.csv_header() + "\n")
        for step in range(start_step, cfg.steps):
            idx = batch_indices(step, n, cfg.batch_size, cfg.seed)
            u_win, v_win = _batch_tensors(dataset, idx)
            rec = train_step(bundle, opt_g, opt_d, u_win, v_win, step)
            rec.ensure_finite()
            records.append(rec)
            log.write(rec.csv_row() + "\n")
            done = step + 1
            if cfg.checkpoint_every and done % cfg.checkpoint_every == 0:
                save_checkpoint(out_dir / f"checkpoint_{done:06d}.pt",
                                bundle, opt_g, opt_d, done)
            if stop_callback is not None and stop_callback(rec):
                break
    save_checkpoint(out_dir / "checkpoint_final.pt", bundle, opt_g, opt_d,
                    records[-1].step + 1 if records else start_step)
    return records
