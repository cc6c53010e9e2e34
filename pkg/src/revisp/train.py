"""Adversarial training loop, evaluation, and checkpointing.

Each step runs one or more critic updates (Wasserstein loss plus the
weighted gradient penalty) followed by a single generator update on the
composite reconstruction objective. Data order, interpolation noise, and
weight init are all derived from the config seed, so two runs with the
same config produce identical metrics logs.
"""

import csv
import math
import os
from dataclasses import asdict, dataclass, field

import torch

from revisp.losses import (
    LossReport,
    LossWeights,
    adversarial_losses,
    gradient_penalty,
    max_feasible_scales,
    ms_ssim_loss,
    psnr,
    ssim,
    tv_loss,
)
from revisp.network import ModelConfig, ReverseISPNet, WaveletCritic

CHECKPOINT_VERSION = 1

METRIC_COLUMNS = (
    "step", "epoch", "total", "ssim", "tv", "adv", "gp",
    "d_loss", "batch_psnr", "eval_psnr", "eval_ssim",
)


class TrainingDiverged(RuntimeError):
    """Raised when a loss term goes non-finite mid-training."""


@dataclass
class TrainConfig:
    lr_g: float = 1e-4
    lr_d: float = 4e-4
    batch_size: int = 8
    epochs: int = 1
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    critic_steps_per_gen_step: int = 1
    checkpoint_every: int = 500
    ms_ssim_scales: int = None      # None picks the largest feasible count, capped at 5
    eval_every: int = 1             # epochs between evaluation passes
    max_steps: int = None           # hard step cap on top of the epoch budget
    target_psnr: float = None       # stop early once batch PSNR clears this
    out_dir: str = "runs/exp"

    def __post_init__(self):
        # zero is allowed so one side can be frozen for debugging
        if self.lr_g < 0 or self.lr_d < 0:
            raise ValueError("learning rates must be nonnegative")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.critic_steps_per_gen_step < 1:
            raise ValueError("critic_steps_per_gen_step must be >= 1")
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _epoch_seed(seed, epoch):
    return (seed * 1000003 + epoch) % (2 ** 63)


def _as_tensors(dataset):
    from revisp.data import DatasetIndex, load_dataset

    if isinstance(dataset, DatasetIndex):
        srgb, raw = load_dataset(dataset)
    else:
        srgb, raw = dataset
        srgb = torch.as_tensor(srgb).float()
        raw = torch.as_tensor(raw).float()
    if srgb.dim() != 4 or srgb.shape[1] != 3:
        raise ValueError(f"expected (N, 3, H, W) srgb tensor, got shape {tuple(srgb.shape)}")
    if srgb.shape != raw.shape:
        raise ValueError(f"srgb shape {tuple(srgb.shape)} != raw shape {tuple(raw.shape)}")
    return srgb, raw


class Trainer:
    """Owns the generator, critic, optimizers, and step counter."""

    def __init__(self, config=None, model_config=None):
        self.config = config or TrainConfig()
        self.model_config = model_config or ModelConfig(seed=self.config.seed)
        self.generator = ReverseISPNet(self.model_config)
        self.critic = WaveletCritic(self.model_config)
        betas = (0.9, 0.999)
        self.g_opt = torch.optim.Adam(self.generator.parameters(), lr=self.config.lr_g, betas=betas)
        self.d_opt = torch.optim.Adam(self.critic.parameters(), lr=self.config.lr_d, betas=betas)
        self.gp_rng = torch.Generator().manual_seed(self.config.seed + 7919)
        self.step = 0
        self._scales = self.config.ms_ssim_scales

    def _resolve_scales(self, img):
        if self._scales is None:
            self._scales = min(5, max_feasible_scales(img.shape[-2], img.shape[-1], 11))
        return self._scales

    def _check_finite(self, terms):
        for name, value in terms.items():
            if not math.isfinite(value):
                raise TrainingDiverged(f"step {self.step}: loss term '{name}' is non-finite: {value}")

    def critic_update(self, raw, fake):
        """One critic step against a detached fake batch."""
        self.d_opt.zero_grad(set_to_none=True)
        d_real = self.critic(raw)
        d_fake = self.critic(fake)
        _, d_loss = adversarial_losses(d_real, d_fake)
        self._check_finite({"d_loss": float(d_loss.detach())})
        try:
            gp = gradient_penalty(self.critic, raw, fake, self.gp_rng)
        except ValueError as e:
            raise TrainingDiverged(f"step {self.step}: {e}") from e
        self._check_finite({"gp": float(gp.detach())})
        (d_loss + self.config.weights.lambda_gp * gp).backward()
        self.d_opt.step()
        return float(d_loss.detach()), float(gp.detach())

    def generator_update(self, srgb, raw, fake):
        """One generator step on the composite objective."""
        w = self.config.weights
        scales = self._resolve_scales(fake)
        self.g_opt.zero_grad(set_to_none=True)
        for p in self.critic.parameters():
            p.requires_grad_(False)
        adv = -self.critic(fake).mean()
        for p in self.critic.parameters():
            p.requires_grad_(True)
        ssim_term = ms_ssim_loss(fake, raw, scales=scales)
        tv_term = tv_loss(fake)
        terms = {
            "ssim": float(ssim_term.detach()),
            "tv": float(tv_term.detach()),
            "adv": float(adv.detach()),
        }
        self._check_finite(terms)
        total = w.lambda_ssim * ssim_term + w.lambda_tv * tv_term + w.lambda_adv * adv
        total.backward()
        self.g_opt.step()
        return terms

    def train_step(self, srgb, raw):
        """Critic update(s), then one generator update. Returns a LossReport
        whose per_term also carries d_loss and the batch PSNR as diagnostics.
        """
        fake = self.generator(srgb)
        detached = fake.detach()
        d_val = gp_val = None
        for _ in range(self.config.critic_steps_per_gen_step):
            d_val, gp_val = self.critic_update(raw, detached)
        terms = self.generator_update(srgb, raw, fake)
        terms["gp"] = gp_val
        lam = self.config.weights.as_dict()
        total = sum(lam[k] * terms[k] for k in lam)
        terms["d_loss"] = d_val
        terms["batch_psnr"] = float(psnr(detached, raw))
        self.step += 1
        return LossReport(total=total, per_term=terms)

    def state_payload(self):
        return {
            "version": CHECKPOINT_VERSION,
            "step": self.step,
            "train_config": self.config.to_dict(),
            "model_config": asdict(self.model_config),
            "generator": self.generator.state_dict(),
            "critic": self.critic.state_dict(),
            "g_opt": self.g_opt.state_dict(),
            "d_opt": self.d_opt.state_dict(),
            "gp_rng": self.gp_rng.get_state(),
        }

    @classmethod
    def from_checkpoint(cls, path):
        payload = load_checkpoint(path)
        config = TrainConfig.from_dict(payload["train_config"])
        model_config = ModelConfig(**payload["model_config"])
        trainer = cls(config, model_config)
        trainer.generator.load_state_dict(payload["generator"])
        trainer.critic.load_state_dict(payload["critic"])
        trainer.g_opt.load_state_dict(payload["g_opt"])
        trainer.d_opt.load_state_dict(payload["d_opt"])
        trainer.gp_rng.set_state(payload["gp_rng"])
        trainer.step = payload["step"]
        return trainer


def save_checkpoint(trainer, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"ckpt_{trainer.step}.bin")
    torch.save(trainer.state_payload(), path)
    return path


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if "version" not in payload:
        raise ValueError(f"{path}: checkpoint has no version field")
    if payload["version"] != CHECKPOINT_VERSION:
        raise ValueError(
            f"{path}: unsupported checkpoint version {payload['version']}, "
            f"expected {CHECKPOINT_VERSION}"
        )
    return payload


def evaluate(model, dataset, max_val=1.0):
    """Mean PSNR and SSIM of model outputs against ground-truth RAW."""
    srgb, raw = _as_tensors(dataset)
    n = srgb.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    psnrs, ssims = [], []
    with torch.no_grad():
        for i in range(n):
            pred = model(srgb[i:i + 1])
            if pred.shape != raw[i:i + 1].shape:
                raise ValueError(
                    f"pair {i}: prediction shape {tuple(pred.shape)} != raw shape "
                    f"{tuple(raw[i:i + 1].shape)}"
                )
            psnrs.append(float(psnr(pred, raw[i:i + 1], max_val)))
            ssims.append(float(ssim(pred, raw[i:i + 1], max_val)))
    return sum(psnrs) / n, sum(ssims) / n


def train(config, dataset, model_config=None, resume=None):
    """Run the full loop; returns the final checkpoint path.

    Writes ckpt_<step>.bin files and a metrics.csv with one row per step
    into config.out_dir. With resume, continues an interrupted run and the
    appended metrics rows match an uninterrupted run's.
    """
    srgb, raw = _as_tensors(dataset)
    n = srgb.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    if resume is not None:
        trainer = Trainer.from_checkpoint(resume)
        trainer.config = config or trainer.config
    else:
        trainer = Trainer(config, model_config)
    cfg = trainer.config
    os.makedirs(cfg.out_dir, exist_ok=True)

    batch = min(cfg.batch_size, n)
    steps_per_epoch = math.ceil(n / batch)
    planned = cfg.epochs * steps_per_epoch
    if cfg.max_steps is not None:
        planned = min(planned, cfg.max_steps)

    metrics_path = os.path.join(cfg.out_dir, "metrics.csv")
    new_log = not (resume is not None and os.path.exists(metrics_path))
    log = open(metrics_path, "w" if new_log else "a", newline="")
    writer = csv.writer(log)
    if new_log:
        writer.writerow(METRIC_COLUMNS)

    last_saved = None
    if trainer.step == 0:
        last_saved = save_checkpoint(trainer, cfg.out_dir)

    try:
        stop = False
        while trainer.step < planned and not stop:
            epoch = trainer.step // steps_per_epoch
            gen = torch.Generator().manual_seed(_epoch_seed(cfg.seed, epoch))
            perm = torch.randperm(n, generator=gen)
            start = trainer.step % steps_per_epoch
            for b in range(start, steps_per_epoch):
                idx = perm[b * batch:(b + 1) * batch]
                report = trainer.train_step(srgb[idx], raw[idx])
                t = report.per_term
                row = [trainer.step, epoch, f"{report.total:.10g}"]
                row += [f"{t[k]:.10g}" for k in ("ssim", "tv", "adv", "gp", "d_loss", "batch_psnr")]
                end_of_epoch = b == steps_per_epoch - 1
                if end_of_epoch and epoch % cfg.eval_every == 0:
                    ev_psnr, ev_ssim = evaluate(trainer.generator, (srgb, raw))
                    row += [f"{ev_psnr:.10g}", f"{ev_ssim:.10g}"]
                else:
                    row += ["", ""]
                writer.writerow(row)
                log.flush()
                if cfg.checkpoint_every and trainer.step % cfg.checkpoint_every == 0:
                    last_saved = save_checkpoint(trainer, cfg.out_dir)
                if trainer.step >= planned:
                    stop = True
                    break
                if cfg.target_psnr is not None and t["batch_psnr"] >= cfg.target_psnr:
                    stop = True
                    break
    finally:
        log.close()
    final = save_checkpoint(trainer, cfg.out_dir)
    return final
