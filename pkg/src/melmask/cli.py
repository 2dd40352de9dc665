"""Command-line entry points.

Subcommands: spectrogram (WAV -> log-mel matrix file), pretrain, embed
(checkpoint + WAVs -> representation matrix), probe (frozen-encoder
classification report), retrieve (cover retrieval report), sweep (mask
ratio ablation), make-data (synthetic corpora).
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import matrixio
from .config import TrainConfig, load_config
from .dsp import Waveform, log_mel
from .errors import MelmaskError
from .metrics import label_fraction_subsample, pr_auc, retrieval_eval, roc_auc
from .probe import embed_waveforms, train_probe
from .sweep import DEFAULT_RATIOS, probe_roc_auc, ratio_sweep, split_indices
from .synth import (cover_dataset, genre_dataset, read_labels,
                    write_labeled_dataset)
from .trainer import (load_dataset, load_pretrained, prepare_example, pretrain,
                      rng_for)
from .wav import read_wav


def _cmd_spectrogram(args):
    samples, rate = read_wav(args.input)
    w = Waveform(samples=samples, sample_rate=rate)
    cfg = TrainConfig(sample_rate=rate).spectrogram_config()
    fm = log_mel(w, cfg)
    matrixio.save_matrix(args.output, fm.frames)
    print(f"frames={fm.n_frames} bins={fm.n_bins} hop={cfg.hop} "
          f"n_fft={cfg.n_fft} n_mels={cfg.n_mels} sample_rate={cfg.sample_rate}")
    return 0


def _cmd_pretrain(args):
    config = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.mask_ratio is not None:
        overrides["mask_ratio"] = args.mask_ratio
    if overrides:
        config = dataclasses.replace(config, **overrides)

    def report(parts):
        print(f"step {parts.step}: l_pred={parts.l_pred:.4f} l_pos={parts.l_pos:.4f} "
              f"l_neg={parts.l_neg:.4f} total={parts.total:.4f}")

    final = pretrain(config, args.data, args.out, resume=args.resume,
                     progress=report if args.verbose else None)
    if args.dump_masks:
        _dump_masks(final, args.data, args.dump_masks)
    print(f"final checkpoint: {final}")
    return 0


def _dump_masks(ckpt_path, data_dir, out_dir) -> None:
    """Write one example's frame scores and mask rows for inspection."""
    model, config = load_pretrained(ckpt_path)
    _, clips = load_dataset(data_dir)
    os.makedirs(out_dir, exist_ok=True)
    step_rng = rng_for(config.seed, 98)
    frames1, frames2 = prepare_example(clips[0], config.spectrogram_config(),
                                       config.augmentation_config(), config.seg_len,
                                       step_rng)
    views = model.example_views(frames1, frames2, step_rng)
    matrixio.save_matrix(os.path.join(out_dir, "scores.bin"), views.scores.s)
    matrixio.save_matrix(os.path.join(out_dir, "mask.bin"),
                         views.mask.keep.astype(np.float64))
    matrixio.save_matrix(os.path.join(out_dir, "frames_pos.bin"), views.positive)
    print(f"wrote scores.bin, mask.bin, frames_pos.bin to {out_dir}")


def _cmd_embed(args):
    model, config = load_pretrained(args.checkpoint)
    rows = []
    for path in args.inputs:
        samples, rate = read_wav(path)
        w = Waveform(samples=samples, sample_rate=rate)
        fm = log_mel(w, config.spectrogram_config())
        rows.append(model.encoder.encode_frames(fm.frames))
    matrixio.save_matrix(args.output, np.stack(rows))
    print(f"wrote {len(rows)} x {rows[0].shape[0]} embeddings to {args.output}")
    return 0


def _load_labeled_embeddings(model, config, data_dir):
    names, clips = load_dataset(data_dir)
    label_names, labels = read_labels(os.path.join(data_dir, "labels.csv"))
    if label_names != names:
        order = {n: i for i, n in enumerate(label_names)}
        labels = labels[[order[n] for n in names]]
    emb = embed_waveforms(model.encoder, config.spectrogram_config(), clips,
                          seg_len=config.seg_len)
    return emb, labels


def _cmd_probe(args):
    model, config = load_pretrained(args.checkpoint)
    emb, labels = _load_labeled_embeddings(model, config, args.data)
    train_idx, test_idx = split_indices(len(labels))
    if args.label_fraction < 1.0:
        keep = label_fraction_subsample(train_idx.size, args.label_fraction, config.seed)
        train_idx = train_idx[keep]
    probe = train_probe(emb[train_idx], labels[train_idx], multilabel=False,
                        hidden=512 if args.mlp else 0, seed=config.seed)
    scores = probe.scores(emb[test_idx])
    test_labels = labels[test_idx]
    rocs, prs = [], []
    for c in np.unique(test_labels):
        binary = (test_labels == c).astype(np.int64)
        if 0 < binary.sum() < binary.size:
            rocs.append(roc_auc(scores[:, c], binary))
            prs.append(pr_auc(scores[:, c], binary))
    print(f"ROC-AUC {np.mean(rocs):.4f}")
    print(f"PR-AUC {np.mean(prs):.4f}")
    return 0


def _cmd_retrieve(args):
    model, config = load_pretrained(args.checkpoint)

    def load_side(directory):
        names, clips = load_dataset(directory)
        label_names, cliques = read_labels(os.path.join(directory, "labels.csv"),
                                           label_field="clique")
        if label_names != names:
            order = {n: i for i, n in enumerate(label_names)}
            cliques = cliques[[order[n] for n in names]]
        emb = embed_waveforms(model.encoder, config.spectrogram_config(), clips,
                              seg_len=config.seg_len)
        return emb, cliques, names

    q_emb, q_cliques, q_names = load_side(args.queries)
    r_emb, r_cliques, r_names = load_side(args.refs)
    m, p10, mr1 = retrieval_eval(q_emb, r_emb, q_cliques, r_cliques,
                                 query_ids=q_names, ref_ids=r_names)
    print(f"MAP {m:.4f}")
    print(f"Precision@10 {p10:.4f}")
    print(f"MR1 {mr1:.2f}")
    return 0


def _cmd_sweep(args):
    config = load_config(args.config) if args.config else TrainConfig()
    rows, table = ratio_sweep(config, args.data, args.out, tuple(args.ratios))
    for r, expected, observed, auc in rows:
        print(f"r={r:g}: dropped {observed}/{expected} expected, probe ROC-AUC {auc:.4f}")
    print(f"table: {table}")
    return 0


def _cmd_make_data(args):
    if args.kind == "genre":
        waveforms, labels = genre_dataset(args.n, args.seed,
                                          sample_rate=args.sample_rate,
                                          n_samples=args.clip_len)
        write_labeled_dataset(args.out, waveforms, labels)
    else:
        versions = max(2, args.n // max(args.cliques, 1))
        waveforms, cliques = cover_dataset(args.cliques, versions, args.seed,
                                           sample_rate=args.sample_rate,
                                           n_samples=args.clip_len)
        write_labeled_dataset(args.out, waveforms, cliques, label_field="clique")
    print(f"wrote {len(waveforms)} clips to {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="melmask",
                                     description="Masked contrastive music representation tool")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrogram", help="WAV to log-mel matrix file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(fn=_cmd_spectrogram)

    p = sub.add_parser("pretrain", help="run self-supervised pre-training")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--data", required=True, help="directory of WAV clips")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mask-ratio", type=float, default=None, dest="mask_ratio")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--dump-masks", default=None, dest="dump_masks",
                   help="directory for example scores/mask matrices")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=_cmd_pretrain)

    p = sub.add_parser("embed", help="embed WAVs with a trained encoder")
    p.add_argument("checkpoint")
    p.add_argument("inputs", nargs="+")
    p.add_argument("output")
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("probe", help="frozen-encoder classification report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mlp", action="store_true")
    p.add_argument("--label-fraction", type=float, default=1.0, dest="label_fraction")
    p.set_defaults(fn=_cmd_probe)

    p = sub.add_parser("retrieve", help="cover retrieval report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--refs", required=True)
    p.set_defaults(fn=_cmd_retrieve)

    p = sub.add_parser("sweep", help="mask-ratio ablation table")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ratios", type=float, nargs="+", default=list(DEFAULT_RATIOS))
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("make-data", help="generate synthetic corpora")
    p.add_argument("--kind", choices=("genre", "covers"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--cliques", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-rate", type=int, default=8000, dest="sample_rate")
    p.add_argument("--clip-len", type=int, default=12000, dest="clip_len")
    p.set_defaults(fn=_cmd_make_data)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MelmaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
