"""Training objectives and the WCR / WER estimators.

Columns of every probability triple are ordered (correct, insertion,
substitution). Probabilities are clamped to [1e-12, 1 - 1e-12] before any log.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..alignment import AlignmentLabels, Tag
from ..nn.tensor import Tensor, as_tensor, clip, exp, log
from .config import CemConfig
from .model import BatchOutput, CemOutput

PROB_EPS = 1e-12
TAG_COLUMN = {Tag.COR: 0, Tag.INS: 1, Tag.SUB: 2}
WER_DENOM_FLOOR = 0.5


def _safe_log(p: Tensor) -> Tensor:
    return log(clip(p, PROB_EPS, 1.0 - PROB_EPS))


def _tag_onehot(tags) -> np.ndarray:
    onehot = np.zeros((len(tags), 3))
    onehot[np.arange(len(tags)), [TAG_COLUMN[Tag(t)] for t in tags]] = 1.0
    return onehot


def word_loss(output: CemOutput, labels: AlignmentLabels) -> Tensor:
    """Summed (not averaged) word-level cross-entropy against the edit tags."""
    probs = as_tensor(output.word_probs)
    if probs.shape[0] != labels.hyp_len:
        raise ValueError(f"{probs.shape[0]} word predictions vs {labels.hyp_len} tags")
    return -(_safe_log(probs) * _tag_onehot(labels.word_tags)).sum()


def deletion_loss(output: CemOutput, labels: AlignmentLabels) -> Tensor:
    """Poisson negative log-likelihood of the gap counts, without the log(e!) constant."""
    r = as_tensor(output.deletion_log_rates)
    e = np.asarray(labels.deletion_gaps, dtype=np.float64)
    if r.shape != e.shape:
        raise ValueError(f"{r.shape[0]} deletion rates vs {e.shape[0]} gaps")
    return -(r * e - exp(r)).sum()


def utterance_loss(output: CemOutput, labels: AlignmentLabels) -> Tensor:
    if output.utt_score is None:
        raise ValueError("output has no utterance score (variant without utterance head)")
    mu = as_tensor(output.utt_score)
    y = float(labels.e_utt)
    return -(_safe_log(mu) * y + _safe_log(1.0 - mu) * (1.0 - y)).sum()


def loss_terms(config: CemConfig, n_words: int) -> dict[str, float]:
    """Coefficient on each summed loss for one utterance with ``n_words`` words."""
    heads = config.heads
    coef = {}
    if "word" in heads:
        coef["word"] = 1.0 / n_words
    if "deletion" in heads:
        coef["deletion"] = config.lambda_deletion / (n_words + 1)
    if "utt" in heads:
        coef["utt"] = config.lambda_utt
    return coef


def total_loss(output: CemOutput, labels: AlignmentLabels, config: CemConfig) -> Tensor:
    coef = loss_terms(config, labels.hyp_len)
    parts = []
    if "word" in coef:
        parts.append(word_loss(output, labels) * coef["word"])
    if "deletion" in coef:
        parts.append(deletion_loss(output, labels) * coef["deletion"])
    if "utt" in coef:
        parts.append(utterance_loss(output, labels) * coef["utt"])
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


def batch_loss(out: BatchOutput, labels: list[AlignmentLabels],
               config: CemConfig) -> tuple[Tensor, dict[str, float]]:
    """Mean over the batch of the per-utterance ``total_loss``.

    Returns the differentiable total plus the batch means of the unweighted,
    per-utterance-normalized components (word/L, deletion/(L+1), utt) for logging.
    """
    batch = out.batch
    B = batch.size
    L = batch.n_words.astype(np.float64)
    heads = config.heads
    total = None
    parts: dict[str, float] = {}

    def accumulate(term: Tensor):
        nonlocal total
        total = term if total is None else total + term

    if "word" in heads:
        onehot = _tag_onehot([t for lab in labels for t in lab.word_tags])
        per_word = -(_safe_log(out.word_probs) * onehot).sum(axis=1)
        scale = 1.0 / L[batch.word_segment]
        parts["word_loss"] = float((per_word.data * scale).sum() / B)
        accumulate((per_word * (scale / B)).sum())
    if "deletion" in heads:
        e = np.array([g for lab in labels for g in lab.deletion_gaps], dtype=np.float64)
        r = out.deletion_log_rates
        per_gap = -(r * e - exp(r))
        scale = 1.0 / (L[batch.gap_segment] + 1.0)
        parts["deletion_loss"] = float((per_gap.data * scale).sum() / B)
        accumulate((per_gap * (scale * config.lambda_deletion / B)).sum())
    if "utt" in heads:
        y = np.array([lab.e_utt for lab in labels], dtype=np.float64)
        mu = out.utt_score
        per_utt = -(_safe_log(mu) * y + _safe_log(1.0 - mu) * (1.0 - y))
        parts["utt_loss"] = float(per_utt.data.sum() / B)
        accumulate(per_utt.sum() * (config.lambda_utt / B))
    return total, parts


# -- estimators ------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfidenceSummary:
    wcr: float
    d_hat: float | None
    i_hat: float
    s_hat: float
    wer: float | None
    denominator_clamped: bool = False


def _values(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def estimate_summary(output: CemOutput) -> ConfidenceSummary:
    """Word correct ratio and, with a deletion head, the estimated WER.

    WER estimate is (D + I + S) / (L + D - I) with D the summed Poisson rates
    and I, S the summed insertion / substitution probabilities. The denominator
    is floored at 0.5 (and flagged) to stay finite.
    """
    if output.word_probs is None:
        raise ValueError("estimate_summary needs the word head")
    probs = _values(output.word_probs)
    L = probs.shape[0]
    if L == 0:
        raise ValueError("no words")
    wcr = float(probs[:, 0].sum() / L)
    i_hat = float(probs[:, 1].sum())
    s_hat = float(probs[:, 2].sum())
    if output.deletion_log_rates is None:
        return ConfidenceSummary(wcr, None, i_hat, s_hat, None)
    d_hat = float(np.exp(_values(output.deletion_log_rates)).sum())
    denom = L + d_hat - i_hat
    clamped = denom < WER_DENOM_FLOOR
    if clamped:
        denom = WER_DENOM_FLOOR
    return ConfidenceSummary(wcr, d_hat, i_hat, s_hat, (d_hat + i_hat + s_hat) / denom, clamped)


def oracle_output(labels: AlignmentLabels) -> CemOutput:
    """Outputs of a perfect model: one-hot tags, exact gap rates, exact utterance bit."""
    with np.errstate(divide="ignore"):
        rates = np.log(np.asarray(labels.deletion_gaps, dtype=np.float64))
    return CemOutput(
        word_probs=_tag_onehot(labels.word_tags),
        deletion_log_rates=rates,
        utt_score=float(labels.e_utt),
    )
