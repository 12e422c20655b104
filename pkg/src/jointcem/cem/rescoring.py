"""N-best rescoring with utterance-level confidence scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from ..alignment import align_words, wp_to_words
from ..datagen import Hypothesis, Utterance
from .losses import estimate_summary
from .model import CemModel, CemOutput

SCORE_CHOICES = ("wcr", "utt", "wer")


def rescore_nbest(scored: Sequence[tuple[Hypothesis, float]]) -> Hypothesis:
    """Highest score wins; ties go to the better (lower) beam rank."""
    if not scored:
        raise ValueError("cannot rescore an empty n-best list")
    for _, s in scored:
        if not math.isfinite(s):
            raise ValueError(f"non-finite score {s}")
    return min(scored, key=lambda hs: (-hs[1], hs[0].beam_rank))[0]


def score_from_output(output: CemOutput, choice: str) -> float:
    """Turn model outputs into a higher-is-better utterance score."""
    if choice == "utt":
        if output.utt_score is None:
            raise KeyError("utt")
        return float(output.utt_score)
    if output.word_probs is None:
        raise KeyError(choice)
    summary = estimate_summary(output)
    if choice == "wcr":
        return summary.wcr
    if choice == "wer":
        if summary.wer is None:
            raise KeyError("wer")
        return 1.0 - summary.wer
    raise ValueError(f"unknown score choice {choice!r}")


@dataclass
class RescoreResult:
    baseline_wer: float
    rescored_wer: float
    oracle_wer: float
    n_utterances: int
    n_changed: int

    def to_dict(self) -> dict:
        return {
            "baseline_wer": self.baseline_wer,
            "rescored_wer": self.rescored_wer,
            "oracle_wer": self.oracle_wer,
            "n_utterances": self.n_utterances,
            "n_changed": self.n_changed,
        }


def _errors_and_ref_len(hyp: Hypothesis, utt: Utterance) -> tuple[int, int]:
    labels = align_words(wp_to_words(hyp.wp_tokens).words, utt.reference)
    _, s, i, d = labels.counts
    return s + i + d, labels.ref_len


def rescore_corpus(utterances: Sequence[Utterance],
                   scorer: Callable[[Utterance], Sequence[float]]) -> RescoreResult:
    """Corpus WER (total errors / total reference words) before and after rescoring.

    ``scorer`` returns one score per hypothesis of the utterance, in beam order.
    """
    base_err = resc_err = orac_err = ref_total = changed = 0
    for utt in utterances:
        scores = list(scorer(utt))
        if len(scores) != len(utt.hypotheses):
            raise ValueError(f"{utt.utterance_id}: {len(scores)} scores for {len(utt.hypotheses)} hypotheses")
        errs = [_errors_and_ref_len(h, utt)[0] for h in utt.hypotheses]
        ref_total += len(utt.reference)
        top = min(range(len(utt.hypotheses)), key=lambda k: utt.hypotheses[k].beam_rank)
        chosen = rescore_nbest(list(zip(utt.hypotheses, scores)))
        k = utt.hypotheses.index(chosen)
        base_err += errs[top]
        resc_err += errs[k]
        orac_err += min(errs)
        changed += int(k != top)
    denom = max(1, ref_total)
    return RescoreResult(base_err / denom, resc_err / denom, orac_err / denom, len(utterances), changed)


def model_scorer(model: CemModel, choice: str) -> Callable[[Utterance], list[float]]:
    def scorer(utt: Utterance) -> list[float]:
        outs = model.predict([(h.wp_tokens, utt.acoustic) for h in utt.hypotheses])
        return [score_from_output(o, choice) for o in outs]
    return scorer


def oracle_scorer(utt: Utterance) -> list[float]:
    """True (1 - WER) for every hypothesis."""
    scores = []
    for h in utt.hypotheses:
        labels = align_words(wp_to_words(h.wp_tokens).words, utt.reference)
        scores.append(1.0 - labels.wer)
    return scores


def constant_scorer(utt: Utterance) -> list[float]:
    return [0.0] * len(utt.hypotheses)


def precompute_scores(model: CemModel, utterances: Sequence[Utterance], choice: str) -> dict[str, list[float]]:
    """Score every hypothesis of every utterance in large batches."""
    items, owners = [], []
    for utt in utterances:
        for h in utt.hypotheses:
            items.append((h.wp_tokens, utt.acoustic))
            owners.append(utt.utterance_id)
    outs = model.predict(items)
    table: dict[str, list[float]] = {}
    for uid, o in zip(owners, outs):
        table.setdefault(uid, []).append(score_from_output(o, choice))
    return table


def table_scorer(table: dict[str, list[float]]) -> Callable[[Utterance], list[float]]:
    return lambda utt: table[utt.utterance_id]


__all__ = [
    "RescoreResult",
    "SCORE_CHOICES",
    "constant_scorer",
    "model_scorer",
    "oracle_scorer",
    "precompute_scores",
    "rescore_corpus",
    "rescore_nbest",
    "score_from_output",
    "table_scorer",
]
