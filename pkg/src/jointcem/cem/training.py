"""Mini-batch training loop with Adam and validation early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..alignment import AlignmentLabels, align_words, wp_to_words
from ..datagen import Hypothesis, Utterance
from ..nn.optim import AdamState, adam_step
from ..nn.tensor import no_grad
from .config import CemConfig
from .losses import batch_loss
from .model import CemModel, build_wp_vocab

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    """A non-finite value appeared during training."""


@dataclass
class Example:
    hypothesis: Hypothesis
    acoustic: np.ndarray
    labels: AlignmentLabels


@dataclass
class TrainResult:
    model: CemModel
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0


def make_examples(utterances: Sequence[Utterance], max_rank: int | None = None) -> list[Example]:
    """One example per hypothesis (all n-best entries unless ``max_rank`` is set)."""
    out = []
    for utt in utterances:
        for hyp in utt.hypotheses:
            if max_rank is not None and hyp.beam_rank >= max_rank:
                continue
            labels = align_words(wp_to_words(hyp.wp_tokens).words, utt.reference)
            out.append(Example(hyp, utt.acoustic, labels))
    return out


def split_train_val(utterances: Sequence[Utterance], val_fraction: float):
    n_val = int(round(len(utterances) * val_fraction))
    if n_val == 0 or n_val >= len(utterances):
        return list(utterances), []
    return list(utterances[:-n_val]), list(utterances[-n_val:])


def _batches(examples: Sequence[Example], batch_size: int, order: np.ndarray):
    for start in range(0, len(order), batch_size):
        yield [examples[i] for i in order[start:start + batch_size]]


def _forward_loss(model: CemModel, chunk: Sequence[Example]):
    batch = model.encode([(ex.hypothesis.wp_tokens, ex.acoustic) for ex in chunk])
    out = model.forward_batch(batch)
    return batch_loss(out, [ex.labels for ex in chunk], model.config)


def evaluate_loss(model: CemModel, examples: Sequence[Example], batch_size: int = 256) -> dict[str, float]:
    """Example-weighted mean loss components over a dataset, no gradients."""
    if not examples:
        return {}
    sums: dict[str, float] = {}
    with no_grad():
        for start in range(0, len(examples), batch_size):
            chunk = examples[start:start + batch_size]
            total, parts = _forward_loss(model, chunk)
            parts = dict(parts, total_loss=total.item())
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v * len(chunk)
    return {k: v / len(examples) for k, v in sums.items()}


def train(train_set: Sequence[Utterance], config: CemConfig,
          val_set: Sequence[Utterance] | None = None, verbose: bool = False) -> TrainResult:
    """Train the configured variant; deterministic given ``config.seed``.

    Without an explicit ``val_set`` the last ``val_fraction`` of utterances is
    held out. Parameters from the epoch with the lowest validation loss are
    returned; training stops after ``patience`` epochs without improvement.
    """
    if not train_set:
        raise ValueError("empty training set")
    if val_set is None:
        train_set, val_set = split_train_val(train_set, config.val_fraction)
    train_ex = make_examples(train_set)
    val_ex = make_examples(val_set)
    vocab = build_wp_vocab(ex.hypothesis.wp_tokens for ex in train_ex)
    model = CemModel(config, vocab)
    state = AdamState(learning_rate=config.learning_rate)
    history: list[dict] = []
    best = (np.inf, 0, model.params.state())
    stale = 0
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, epoch]))
        order = rng.permutation(len(train_ex))
        sums: dict[str, float] = {}
        for step, chunk in enumerate(_batches(train_ex, config.batch_size, order)):
            try:
                total, parts = _forward_loss(model, chunk)
                total.backward()
            except FloatingPointError as exc:
                raise TrainingDiverged(f"epoch {epoch}, step {step}: {exc}") from exc
            adam_step(model.params, state)
            parts = dict(parts, total_loss=total.item())
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v * len(chunk)
        entry = {"epoch": epoch}
        for k in ("total_loss", "word_loss", "deletion_loss", "utt_loss"):
            entry[k] = sums[k] / len(train_ex) if k in sums else None
        val = evaluate_loss(model, val_ex)
        for k in ("total_loss", "word_loss", "deletion_loss", "utt_loss"):
            entry[f"val_{k}"] = val.get(k)
        history.append(entry)
        if verbose:
            log.info("epoch %d: %s", epoch, entry)
        monitor = val.get("total_loss", entry["total_loss"])
        if monitor < best[0]:
            best = (monitor, epoch, model.params.state())
            stale = 0
        else:
            stale += 1
            if config.patience and stale >= config.patience:
                break
    if config.epochs > 0:
        model.params.load_state(best[2])
    return TrainResult(model, history, best[1])
