"""Run a model (or the label oracle) over a corpus and build the metrics report."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .alignment import Tag, align_words, wp_to_words
from .cem.config import HEADS_BY_VARIANT
from .cem.losses import estimate_summary, oracle_output
from .cem.model import CemModel, CemOutput
from .cem.rescoring import precompute_scores, rescore_nbest
from .datagen import Hypothesis, Utterance
from .metrics import MetricsReport, assemble_report


def gate_output(output: CemOutput, variant: str) -> CemOutput:
    """Drop the heads a variant does not have (used on oracle outputs)."""
    heads = HEADS_BY_VARIANT[variant]
    return CemOutput(
        token_probs=output.token_probs if "word" in heads else None,
        word_probs=output.word_probs if "word" in heads else None,
        deletion_log_rates=output.deletion_log_rates if "deletion" in heads else None,
        utt_score=output.utt_score if "utt" in heads else None,
    )


def select_hypotheses(utterances: Sequence[Utterance], model: CemModel | None = None,
                      score: str | None = None) -> list[Hypothesis]:
    """Beam-top hypothesis per utterance, or the rescored choice when ``score`` is given."""
    if score is None:
        return [min(u.hypotheses, key=lambda h: h.beam_rank) for u in utterances]
    if model is None:
        raise ValueError("rescored selection needs a model")
    table = precompute_scores(model, utterances, score)
    return [rescore_nbest(list(zip(u.hypotheses, table[u.utterance_id]))) for u in utterances]


def evaluate(utterances: Sequence[Utterance], variant: str, model: CemModel | None = None,
             oracle: bool = False, select_by: str | None = None,
             with_curves: bool = True) -> MetricsReport:
    if not oracle and model is None:
        raise ValueError("need a model unless running in oracle mode")
    chosen = select_hypotheses(utterances, model, select_by)
    labels = [align_words(wp_to_words(h.wp_tokens).words, u.reference) for h, u in zip(chosen, utterances)]
    if oracle:
        outputs = [gate_output(oracle_output(lab), variant) for lab in labels]
    else:
        outputs = model.predict([(h.wp_tokens, u.acoustic) for h, u in zip(chosen, utterances)])

    heads = HEADS_BY_VARIANT[variant]
    utt_scores: dict[str, list[float]] = {}
    word_scores: list[np.ndarray] = []
    word_labels: list[np.ndarray] = []
    for out, lab in zip(outputs, labels):
        if "word" in heads:
            summary = estimate_summary(out)
            utt_scores.setdefault("wcr", []).append(summary.wcr)
            if summary.wer is not None:
                utt_scores.setdefault("wer", []).append(summary.wer)
            word_scores.append(np.asarray(out.word_probs, dtype=np.float64)[:, 0])
            word_labels.append(np.array([t is Tag.COR for t in lab.word_tags], dtype=np.float64))
        if "utt" in heads:
            utt_scores.setdefault("utt", []).append(float(out.utt_score))
    return assemble_report(
        variant,
        {k: np.array(v) for k, v in utt_scores.items()},
        [lab.e_utt for lab in labels],
        [lab.wer for lab in labels],
        np.concatenate(word_scores) if word_scores else None,
        np.concatenate(word_labels) if word_labels else None,
        with_curves=with_curves,
    )
