"""Pre-training orchestration.

Each step draws a batch of waveforms, cuts two random segments per clip,
augments both independently, maps them to log-mel frames, and feeds them
through the model: masked transformer passes for the prediction loss,
score-driven masks for the contrastive views, one shared encoder +
projection for the embeddings, one Adam update on the summed objective.

Randomness is budgeted so runs are reproducible and resumable: every
consumer derives its generator from the run seed plus a fixed domain tag
and index (model init; per-epoch shuffles; per-step data/mask draws).
A resumed run therefore replays the exact step stream of an
uninterrupted one without serializing generator state.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from . import checkpoint as ckpt_mod
from .augment import augment
from .config import format_config
from .dsp import Waveform, log_mel, sample_two_segments
from .errors import DataError
from .model import PretrainModel
from .optim import Adam
from .wav import read_wav

_DOMAIN_INIT = 0
_DOMAIN_SHUFFLE = 1
_DOMAIN_STEP = 2

LOSS_CSV_HEADER = ("step", "l_pred", "l_pos", "l_neg", "total")


def rng_for(seed, domain, index=0):
    """Deterministic generator for one (domain, index) slot of a run."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(domain, index)))


def load_pretrained(path):
    """Rebuild a model from a checkpoint; returns (model, config).

    The encoder comes back in evaluation mode, ready for embedding.
    """
    from .config import parse_config

    ckpt = ckpt_mod.load_checkpoint(path)
    config = parse_config(ckpt.config_text)
    model = PretrainModel(config, rng_for(config.seed, _DOMAIN_INIT))
    ckpt_mod.apply_checkpoint(ckpt, model)
    model.encoder.eval()
    return model, config


@dataclass
class LossParts:
    step: int
    l_pred: float
    l_pos: float
    l_neg: float
    total: float

    def row(self):
        return (str(self.step), f"{self.l_pred:.17g}", f"{self.l_pos:.17g}",
                f"{self.l_neg:.17g}", f"{self.total:.17g}")


def load_dataset(data_dir):
    """All WAV files under `data_dir`, sorted by name, fully in memory."""
    try:
        names = sorted(n for n in os.listdir(data_dir) if n.lower().endswith(".wav"))
    except OSError as exc:
        raise DataError(f"cannot list dataset directory {data_dir}: {exc}") from None
    if not names:
        raise DataError(f"no .wav files in {data_dir}")
    clips = []
    for name in names:
        samples, rate = read_wav(os.path.join(data_dir, name))
        clips.append(Waveform(samples=samples, sample_rate=rate))
    return names, clips


def prepare_example(clip, spec_cfg, aug_cfg, seg_len, rng):
    """One clip -> two augmented log-mel frame matrices."""
    seg1, seg2 = sample_two_segments(clip, seg_len, rng)
    f1 = log_mel(augment(seg1, aug_cfg, rng), spec_cfg)
    f2 = log_mel(augment(seg2, aug_cfg, rng), spec_cfg)
    return f1.frames, f2.frames


def train_step(model, optimizer, clips, step_rng, *, mask_ratio=None, collect_masks=False):
    """One optimizer update over a batch of waveform clips."""
    cfg = model.train_config
    spec_cfg = cfg.spectrogram_config()
    aug_cfg = cfg.augmentation_config()
    views = []
    for clip in clips:
        frames1, frames2 = prepare_example(clip, spec_cfg, aug_cfg, cfg.seg_len, step_rng)
        views.append(model.example_views(frames1, frames2, step_rng, mask_ratio=mask_ratio))
    l_pred, l_pos, l_neg, total = model.batch_losses(views)
    total.backward()
    optimizer.step()
    parts = (float(l_pred.data), float(l_pos.data), float(l_neg.data), float(total.data))
    if collect_masks:
        return parts, views
    return parts


def _open_loss_csv(out_dir, resume):
    path = os.path.join(out_dir, "loss.csv")
    if resume and os.path.exists(path):
        return open(path, "a", newline="", encoding="utf-8"), path
    fh = open(path, "w", newline="", encoding="utf-8")
    csv.writer(fh).writerow(LOSS_CSV_HEADER)
    fh.flush()
    return fh, path


def pretrain(config, data_dir, out_dir, *, resume=None, progress=None):
    """Full pre-training run; returns the final checkpoint path.

    `resume` is a checkpoint path: training continues from its step using
    the same seed schedule, appending to the existing loss log. `progress`
    is an optional callable receiving each LossParts.
    """
    names, clips = load_dataset(data_dir)
    if len(clips) < config.batch_size:
        raise DataError(
            f"dataset has {len(clips)} clips but batch_size={config.batch_size}"
        )
    os.makedirs(out_dir, exist_ok=True)

    model = PretrainModel(config, rng_for(config.seed, _DOMAIN_INIT))
    model.encoder.train()
    optimizer = Adam(model.parameters(), lr=config.learning_rate,
                     weight_decay=config.weight_decay)

    start_step = 0
    if resume is not None:
        ckpt = ckpt_mod.load_checkpoint(resume)
        if ckpt.config_text != format_config(config):
            raise DataError(
                f"checkpoint {resume} was written with a different configuration"
            )
        ckpt_mod.apply_checkpoint(ckpt, model, optimizer)
        start_step = ckpt.step

    steps_per_epoch = len(clips) // config.batch_size
    total_steps = steps_per_epoch * config.epochs
    if start_step > total_steps:
        raise DataError(
            f"checkpoint step {start_step} exceeds the configured run length {total_steps}"
        )

    loss_fh, _ = _open_loss_csv(out_dir, resume is not None and start_step > 0)
    writer = csv.writer(loss_fh)
    final_path = os.path.join(out_dir, f"checkpoint-{total_steps}.bin")
    try:
        step = start_step
        while step < total_steps:
            epoch = step // steps_per_epoch
            order = rng_for(config.seed, _DOMAIN_SHUFFLE, epoch).permutation(len(clips))
            batch_in_epoch = step % steps_per_epoch
            for b in range(batch_in_epoch, steps_per_epoch):
                batch_idx = order[b * config.batch_size : (b + 1) * config.batch_size]
                batch = [clips[i] for i in batch_idx]
                step_rng = rng_for(config.seed, _DOMAIN_STEP, step)
                lp, lpos, lneg, tot = train_step(model, optimizer, batch, step_rng)
                step += 1
                parts = LossParts(step=step, l_pred=lp, l_pos=lpos, l_neg=lneg, total=tot)
                writer.writerow(parts.row())
                loss_fh.flush()
                if progress is not None:
                    progress(parts)
                if config.checkpoint_every > 0 and step % config.checkpoint_every == 0:
                    ckpt_mod.save_checkpoint(
                        os.path.join(out_dir, f"checkpoint-{step}.bin"),
                        **ckpt_mod.checkpoint_from_model(model, optimizer, step))
    finally:
        loss_fh.close()

    ckpt_mod.save_checkpoint(final_path,
                             **ckpt_mod.checkpoint_from_model(model, optimizer, total_steps))
    return final_path
