"""Two-phase training: supervised pretraining, then adversarial finetuning.

Phase one fits the source extractor with softmax cross-entropy on labeled
source spectra. Phase two freezes the source path, clones it into a target
extractor with the trailing `untie_count` parameter groups trainable, and
alternates k discriminator updates (source features labeled 1, target 0)
with one inverted-label update of the untied target groups, so the target
features drift toward the source feature distribution.

All losses are written as minimized negatives of the underlying likelihood
objectives; Adam performs the descent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import model as md
from . import nn
from .data import DomainDataset, draw_indices
from .rng import substream


@dataclass(frozen=True)
class PretrainConfig:
    m: int = 64
    iterations: int = 2000
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("batch size m must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")


@dataclass(frozen=True)
class FinetuneConfig:
    m: int = 64
    iterations: int = 3000
    k: int = 1
    untie_count: int = 7
    lr_d: float = 1e-4
    lr_mt: float = 1e-4
    seed: int = 0
    snapshot_every: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("batch size m must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.k < 1:
            raise ValueError("discriminator steps k must be >= 1")
        if not 1 <= self.untie_count <= 7:
            raise ValueError("untie_count must be in 1..7")
        if self.lr_d <= 0 or self.lr_mt <= 0:
            raise ValueError("learning rates must be positive")
        if self.snapshot_every < 0:
            raise ValueError("snapshot_every must be >= 0")


@dataclass
class TrainRecord:
    iteration: int
    loss_cls: float | None = None
    loss_d: float | None = None
    loss_mt: float | None = None
    src_batch_acc: float | None = None


@dataclass
class TrainLog:
    records: list[TrainRecord] = field(default_factory=list)

    CSV_HEADER = ("iter", "loss_cls", "loss_d", "loss_mt", "src_batch_acc")

    def append(self, record: TrainRecord) -> None:
        if self.records and record.iteration <= self.records[-1].iteration:
            raise ValueError("iteration indices must increase")
        self.records.append(record)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.CSV_HEADER)
            for r in self.records:
                writer.writerow([
                    r.iteration,
                    "" if r.loss_cls is None else repr(r.loss_cls),
                    "" if r.loss_d is None else repr(r.loss_d),
                    "" if r.loss_mt is None else repr(r.loss_mt),
                    "" if r.src_batch_acc is None else repr(r.src_batch_acc),
                ])


def _batch(dataset: DomainDataset, m: int, rng: np.random.Generator):
    idx = draw_indices(dataset, m, rng)
    return dataset.amplitudes[idx][..., None], dataset.labels[idx]


def pretrain(source: DomainDataset,
             cfg: PretrainConfig) -> tuple[md.FeatureExtractor, TrainLog]:
    """Fit a fresh extractor on labeled source spectra.

    Per iteration: draw m samples, minimize the mean softmax cross-entropy of
    their logits, and take one Adam step on all parameter groups.
    """
    extractor = md.build_extractor(substream(cfg.seed, "pretrain/init"))
    sample_rng = substream(cfg.seed, "pretrain/sample")
    adam = nn.AdamState.for_params(extractor.arrays(), lr=cfg.lr)
    log = TrainLog()
    for it in range(1, cfg.iterations + 1):
        x, y = _batch(source, cfg.m, sample_rng)
        logits3, caches = md.stack_forward(extractor, x, want_caches=True)
        logits = logits3.reshape(cfg.m, -1)
        loss, dlogits = nn.softmax_xent_batch(logits, y)
        grads, _ = md.stack_backward(extractor, caches, dlogits[..., None])
        nn.adam_step(extractor.arrays(), md.grads_to_arrays(extractor, grads), adam)
        acc = float(np.mean(np.argmax(logits, axis=1) + 1 == y))
        log.append(TrainRecord(it, loss_cls=loss, src_batch_acc=acc))
    return extractor, log


def adversarial_finetune(
    source_model: md.FeatureExtractor,
    source: DomainDataset,
    target: DomainDataset,
    cfg: FinetuneConfig,
    on_snapshot: Callable[[int, md.TiedPair, md.Discriminator], None] | None = None,
) -> tuple[md.TiedPair, md.Discriminator, TrainLog]:
    """Adversarially align target features with the frozen source features.

    Each outer iteration runs k discriminator updates on fresh source/target
    minibatches, then one inverted-label update of the target extractor's
    untied groups with the discriminator frozen. The source extractor is
    never written: its groups are either shared-and-untouched or cloned.
    """
    pair = md.init_target_from_source(source_model, cfg.untie_count)
    disc = md.build_discriminator(substream(cfg.seed, "finetune/disc-init"))
    src_rng = substream(cfg.seed, "finetune/source-sample")
    tgt_rng = substream(cfg.seed, "finetune/target-sample")

    adam_d = nn.AdamState.for_params(disc.arrays(), lr=cfg.lr_d)
    untied = list(pair.untied_groups)
    adam_t = nn.AdamState.for_params(pair.target.arrays(untied), lr=cfg.lr_mt)

    log = TrainLog()
    for it in range(1, cfg.iterations + 1):
        d_losses = []
        src_acc = None
        for _ in range(cfg.k):
            xs, ys = _batch(source, cfg.m, src_rng)
            xt, _ = _batch(target, cfg.m, tgt_rng)
            fs, _ = md.stack_forward(pair.source, xs)
            ft, _ = md.stack_forward(pair.target, xt)
            fs = fs.reshape(cfg.m, -1)
            ft = ft.reshape(cfg.m, -1)

            logits, dcaches = md.discriminator_forward_batch(
                disc, np.concatenate([fs, ft]), want_caches=True)
            # separate means per domain: source labeled 1, target labeled 0
            loss_s, grad_s = nn.logistic_loss_batch(logits[:cfg.m], np.ones(cfg.m))
            loss_t, grad_t = nn.logistic_loss_batch(logits[cfg.m:], np.zeros(cfg.m))
            dlogits = np.concatenate([grad_s, grad_t])
            grads, _ = md.stack_backward(disc, dcaches, dlogits.reshape(-1, 1, 1))
            nn.adam_step(disc.arrays(), md.grads_to_arrays(disc, grads), adam_d)
            d_losses.append(loss_s + loss_t)
            src_acc = float(np.mean(np.argmax(fs, axis=1) + 1 == ys))

        xt, _ = _batch(target, cfg.m, tgt_rng)
        ft3, tcaches = md.stack_forward(pair.target, xt, want_caches=True)
        logits, dcaches = md.discriminator_forward_batch(
            disc, ft3.reshape(cfg.m, -1), want_caches=True)
        # fool the frozen discriminator: push target features toward label 1
        loss_mt, dlogits = nn.logistic_loss_batch(logits, np.ones(cfg.m))
        dfeat = md.discriminator_input_grad(disc, dcaches, dlogits)
        tgrads, _ = md.stack_backward(pair.target, tcaches, dfeat[..., None],
                                      need_groups=untied)
        nn.adam_step(pair.target.arrays(untied),
                     md.grads_to_arrays(pair.target, tgrads, untied), adam_t)

        log.append(TrainRecord(it, loss_d=float(np.mean(d_losses)),
                               loss_mt=loss_mt, src_batch_acc=src_acc))
        if on_snapshot is not None and cfg.snapshot_every > 0 \
                and it % cfg.snapshot_every == 0:
            on_snapshot(it, pair, disc)
    return pair, disc, log
