"""Joint training: token-tag cross-entropy plus aspect-polarity cross-entropy."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import metrics
from .corpus import AtepcSentence
from .model import PAD_ID, POLARITY_INDEX, TAG_INDEX, LcfModel, Vocab

IGNORE_INDEX = -1


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch_index: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}, batch {batch_index}")
        self.epoch = epoch
        self.batch_index = batch_index


@dataclass(frozen=True)
class TrainConfig:
    train_size: int = 2250
    test_size: int = 250
    batch_size: int = 16
    num_epochs: int = 6
    learning_rate: float = 2e-4
    tag_loss_weight: float = 1.0
    polarity_loss_weight: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.num_epochs < 1:
            raise ValueError("batch_size and num_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.tag_loss_weight <= 0 or self.polarity_loss_weight <= 0:
            raise ValueError("loss weights must be positive")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_tag_loss: float
    mean_polarity_loss: float
    ate_f1: float | None
    apc_f1: float | None
    wall_clock_s: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "mean_tag_loss": self.mean_tag_loss,
            "mean_polarity_loss": self.mean_polarity_loss,
            "ate_f1": self.ate_f1,
            "apc_f1": self.apc_f1,
            "wall_clock_s": self.wall_clock_s,
        }


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    def to_json_lines(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.epochs)

    def deterministic_fields(self) -> list[dict]:
        """Per-epoch records without wall-clock timing, for run comparison."""
        records = []
        for stats in self.epochs:
            record = stats.to_dict()
            record.pop("wall_clock_s")
            records.append(record)
        return records


def split(
    corpus: Sequence[AtepcSentence], cfg: TrainConfig
) -> tuple[list[AtepcSentence], list[AtepcSentence]]:
    """Seeded shuffle then partition into train/test.

    Falls back to a 90/10 split when the corpus is smaller than the
    configured sizes.
    """
    if not corpus:
        raise ValueError("empty corpus")
    n = len(corpus)
    if n >= cfg.train_size + cfg.test_size:
        n_train, n_test = cfg.train_size, cfg.test_size
    else:
        n_train = int(n * 0.9)
        n_test = n - n_train
    order = np.random.default_rng(cfg.seed).permutation(n)
    train_set = [corpus[i] for i in order[:n_train]]
    test_set = [corpus[i] for i in order[n_train : n_train + n_test]]
    return train_set, test_set


@dataclass(frozen=True)
class Batch:
    ids: np.ndarray  # (B, T) int64, PAD_ID padded
    lengths: np.ndarray  # (B,) int64
    tags: np.ndarray  # (B, T) int64, IGNORE_INDEX at padding
    spans: np.ndarray  # (B, 2) int64, (-1, -1) when no focused aspect
    polarity: np.ndarray  # (B,) int64, IGNORE_INDEX when no focused aspect


def make_batch(sentences: Sequence[AtepcSentence], vocab: Vocab) -> Batch:
    max_len = max(len(s.tokens) for s in sentences)
    B = len(sentences)
    ids = np.full((B, max_len), PAD_ID, dtype=np.int64)
    tags = np.full((B, max_len), IGNORE_INDEX, dtype=np.int64)
    lengths = np.zeros(B, dtype=np.int64)
    spans = np.full((B, 2), -1, dtype=np.int64)
    polarity = np.full(B, IGNORE_INDEX, dtype=np.int64)
    for b, sentence in enumerate(sentences):
        n = len(sentence.tokens)
        lengths[b] = n
        ids[b, :n] = vocab.encode(sentence.tokens)
        tags[b, :n] = [TAG_INDEX[t] for t in sentence.tags]
        focus = sentence.focused_span()
        if focus is not None:
            spans[b] = focus
            polarity[b] = POLARITY_INDEX[sentence.focused_polarity()]
    return Batch(ids, lengths, tags, spans, polarity)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _masked_ce(logits: np.ndarray, targets: np.ndarray):
    """Mean cross-entropy over positions where target != IGNORE_INDEX.

    Returns (loss, dlogits) with dlogits exactly zero at ignored positions.
    """
    valid = targets != IGNORE_INDEX
    count = int(valid.sum())
    if count == 0:
        return 0.0, np.zeros_like(logits)
    log_probs = _log_softmax(logits)
    safe_targets = np.where(valid, targets, 0)
    picked = np.take_along_axis(log_probs, safe_targets[..., None], axis=-1)[..., 0]
    loss = -(picked * valid).sum() / count
    probs = np.exp(log_probs)
    one_hot = np.zeros_like(logits)
    np.put_along_axis(one_hot, safe_targets[..., None], 1.0, axis=-1)
    dlogits = (probs - one_hot) * valid[..., None] / count
    return float(loss), dlogits


def joint_loss(
    tag_logits: np.ndarray,
    gold_tags: np.ndarray,
    polarity_logits: np.ndarray | None,
    gold_polarity: np.ndarray | None,
    weights: tuple[float, float] = (1.0, 1.0),
) -> float:
    """Weighted sum of mean tag cross-entropy and polarity cross-entropy.

    Padding positions (gold tag == IGNORE_INDEX) contribute exactly zero.
    The polarity term is dropped when polarity logits are absent.
    """
    loss, _, _, _ = joint_loss_with_grads(
        tag_logits, gold_tags, polarity_logits, gold_polarity, weights
    )
    return loss


def joint_loss_with_grads(
    tag_logits: np.ndarray,
    gold_tags: np.ndarray,
    polarity_logits: np.ndarray | None,
    gold_polarity: np.ndarray | None,
    weights: tuple[float, float] = (1.0, 1.0),
):
    if (polarity_logits is None) != (gold_polarity is None):
        raise ValueError("polarity logits and gold polarity must be present together")
    tag_logits = np.asarray(tag_logits, dtype=np.float64)
    gold_tags = np.asarray(gold_tags, dtype=np.int64)
    if tag_logits.shape[:-1] != gold_tags.shape:
        raise ValueError(
            f"tag logits shape {tag_logits.shape} does not match targets {gold_tags.shape}"
        )
    tag_weight, polarity_weight = weights
    tag_loss, dtag = _masked_ce(tag_logits, gold_tags)
    dtag *= tag_weight
    if polarity_logits is None:
        return tag_weight * tag_loss, dtag, None, (tag_loss, 0.0)
    polarity_logits = np.asarray(polarity_logits, dtype=np.float64)
    gold_polarity = np.asarray(gold_polarity, dtype=np.int64)
    if polarity_logits.shape[:-1] != gold_polarity.shape:
        raise ValueError(
            f"polarity logits shape {polarity_logits.shape} does not match "
            f"targets {gold_polarity.shape}"
        )
    pol_loss, dpol = _masked_ce(polarity_logits, gold_polarity)
    dpol *= polarity_weight
    total = tag_weight * tag_loss + polarity_weight * pol_loss
    return float(total), dtag, dpol, (tag_loss, pol_loss)


def batch_loss_and_grads(model: LcfModel, batch: Batch, cfg: TrainConfig, train: bool = True):
    """Forward + loss + full backward pass for one batch."""
    tag_logits, pol_logits, pol_rows, cache = model.forward_batch(
        batch.ids, batch.lengths, batch.spans, train=train
    )
    gold_polarity = batch.polarity[pol_rows] if pol_logits is not None else None
    if pol_logits is not None and len(pol_logits) == 0:
        pol_logits, gold_polarity = None, None
    total, dtag, dpol, parts = joint_loss_with_grads(
        tag_logits,
        batch.tags,
        pol_logits,
        gold_polarity,
        (cfg.tag_loss_weight, cfg.polarity_loss_weight),
    )
    grads = model.backward(cache, dtag, dpol)
    return total, grads, parts


def batch_loss(model: LcfModel, batch: Batch, cfg: TrainConfig) -> float:
    """Loss only, no dropout; used by finite-difference checks."""
    tag_logits, pol_logits, pol_rows, _ = model.forward_batch(
        batch.ids, batch.lengths, batch.spans, train=False
    )
    gold_polarity = batch.polarity[pol_rows] if pol_logits is not None else None
    if pol_logits is not None and len(pol_logits) == 0:
        pol_logits, gold_polarity = None, None
    return joint_loss(
        tag_logits,
        batch.tags,
        pol_logits,
        gold_polarity,
        (cfg.tag_loss_weight, cfg.polarity_loss_weight),
    )


class Adam:
    def __init__(
        self,
        params: dict[str, np.ndarray],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for name, value in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            value -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)


def train(
    model: LcfModel,
    corpus: Sequence[AtepcSentence],
    cfg: TrainConfig,
    log=None,
) -> tuple[LcfModel, TrainHistory]:
    """Mini-batch Adam over the joint loss; evaluates on the test split each epoch."""
    train_set, test_set = split(corpus, cfg)
    if not train_set:
        raise ValueError("empty train split")
    optimizer = Adam(model.params, cfg.learning_rate)
    shuffle_rng = np.random.default_rng((cfg.seed, 1))
    history = TrainHistory()
    for epoch in range(1, cfg.num_epochs + 1):
        started = time.perf_counter()
        order = shuffle_rng.permutation(len(train_set))
        tag_losses = []
        pol_losses = []
        for batch_index, lo in enumerate(range(0, len(order), cfg.batch_size)):
            chunk = [train_set[i] for i in order[lo : lo + cfg.batch_size]]
            batch = make_batch(chunk, model.vocab)
            total, grads, (tag_loss, pol_loss) = batch_loss_and_grads(model, batch, cfg)
            if not np.isfinite(total):
                raise TrainingDiverged(epoch, batch_index, total)
            optimizer.step(model.params, grads)
            tag_losses.append(tag_loss)
            pol_losses.append(pol_loss)
        model.check_finite()
        ate_f1 = apc_f1 = None
        if test_set:
            report = metrics.evaluate(model, test_set)
            ate_f1 = report.ate_f1
            apc_f1 = report.apc_f1_macro
        stats = EpochStats(
            epoch=epoch,
            mean_tag_loss=float(np.mean(tag_losses)),
            mean_polarity_loss=float(np.mean(pol_losses)),
            ate_f1=ate_f1,
            apc_f1=apc_f1,
            wall_clock_s=time.perf_counter() - started,
        )
        history.epochs.append(stats)
        if log is not None:
            log(stats)
    return model, history
