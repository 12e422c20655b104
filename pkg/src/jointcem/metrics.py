"""Confidence metrics: NCE, ROC / PR areas, RMSE against 1 - WER.

All functions take parallel arrays of scores, binary labels and optional
non-negative weights. Ties in score are grouped into one threshold, so ROC
area equals P(s+ > s-) + P(s+ = s-) / 2 and PR area is the step-wise
(average-precision) sum of precision times recall increments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROB_EPS = 1e-12
REPORT_SCHEMA_VERSION = "1.0"


class MetricError(ValueError):
    """Metric undefined for the given samples (e.g. only one class present)."""


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int
    weight: float = 1.0


def as_arrays(samples: Sequence[ScoredSample]):
    scores = np.array([s.score for s in samples], dtype=np.float64)
    labels = np.array([s.label for s in samples], dtype=np.float64)
    weights = np.array([s.weight for s in samples], dtype=np.float64)
    return scores, labels, weights


def _prepare(scores, labels, weights):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    if not np.isfinite(scores).all():
        raise ValueError("non-finite score")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    weights = np.ones_like(scores) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    return scores, labels, weights


def nce(scores, labels, weights=None) -> float:
    """Normalized cross-entropy: relative entropy reduction over the base-rate predictor."""
    scores, labels, weights = _prepare(scores, labels, weights)
    n_pos = float((weights * labels).sum())
    n_neg = float((weights * (1 - labels)).sum())
    if n_pos <= 0 or n_neg <= 0:
        raise MetricError("NCE needs both classes")
    p = n_pos / (n_pos + n_neg)
    h_base = -(n_pos * np.log(p) + n_neg * np.log(1 - p))
    s = np.clip(scores, PROB_EPS, 1 - PROB_EPS)
    h_conf = -(weights * (labels * np.log(s) + (1 - labels) * np.log(1 - s))).sum()
    return float((h_base - h_conf) / h_base)


def _threshold_counts(scores, labels, weights):
    """Cumulative weighted (tp, fp) at each distinct threshold, highest first."""
    order = np.argsort(-scores, kind="mergesort")
    s, y, w = scores[order], labels[order], weights[order]
    last = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(w * y)[last]
    fps = np.cumsum(w * (1 - y))[last]
    return tps, fps, s[last]


def roc_curve(scores, labels, weights=None):
    """(fpr, tpr, thresholds) with the (0, 0) point first."""
    scores, labels, weights = _prepare(scores, labels, weights)
    tps, fps, thr = _threshold_counts(scores, labels, weights)
    if tps[-1] <= 0 or fps[-1] <= 0:
        raise MetricError("ROC needs both classes")
    tpr = np.r_[0.0, tps / tps[-1]]
    fpr = np.r_[0.0, fps / fps[-1]]
    return fpr, tpr, np.r_[np.inf, thr]


def auc_roc(scores, labels, weights=None) -> float:
    fpr, tpr, _ = roc_curve(scores, labels, weights)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def pr_curve(scores, labels, weights=None, target: str = "positive"):
    """(recall, precision, thresholds) for detecting ``target`` class samples.

    For ``target="negative"`` the class labels are flipped and samples are
    ranked by ``1 - score``.
    """
    scores, labels, weights = _prepare(scores, labels, weights)
    if target == "negative":
        scores, labels = 1.0 - scores, 1.0 - labels
    elif target != "positive":
        raise ValueError(f"target must be 'positive' or 'negative', got {target!r}")
    tps, fps, thr = _threshold_counts(scores, labels, weights)
    if tps[-1] <= 0:
        raise MetricError(f"no samples of the {target} class")
    precision = tps / (tps + fps)
    recall = tps / tps[-1]
    return recall, precision, thr


def auc_pr(scores, labels, weights=None, target: str = "positive") -> float:
    recall, precision, _ = pr_curve(scores, labels, weights, target)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def rmse_one_minus_wer(confidences, wers) -> float:
    """RMSE between confidence and clamp(1 - WER, 0, 1)."""
    c = np.asarray(confidences, dtype=np.float64)
    w = np.asarray(wers, dtype=np.float64)
    if c.size == 0:
        raise MetricError("RMSE over no utterances")
    if c.shape != w.shape:
        raise ValueError("confidences and wers differ in length")
    truth = np.clip(1.0 - w, 0.0, 1.0)
    return float(np.sqrt(np.mean((c - truth) ** 2)))


# -- reports ---------------------------------------------------------------------------

AVAILABLE_SCORES = {
    "W": ("wcr",),
    "U": ("utt",),
    "WD": ("wcr", "wer"),
    "WU": ("wcr", "utt"),
    "WUD": ("wcr", "utt", "wer"),
}


def ranking_score(available: Sequence[str]) -> str:
    """Score used for utterance AUCs: utt, else 1 - wer, else wcr."""
    for name in ("utt", "wer", "wcr"):
        if name in available:
            return name
    raise MetricError("no utterance score available")


def rmse_score(available: Sequence[str]) -> str | None:
    """Score used for RMSE: 1 - wer, else wcr; the utt score is never used."""
    for name in ("wer", "wcr"):
        if name in available:
            return name
    return None


def _as_confidence(name: str, values: np.ndarray) -> np.ndarray:
    return 1.0 - values if name == "wer" else values


SCORE_LABEL = {"utt": "mu_utt", "wcr": "mu_wcr", "wer": "1-mu_wer"}


@dataclass
class MetricsReport:
    variant: str
    word: dict | None
    utterance: dict
    provenance: dict
    counts: dict
    curves: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "variant": self.variant,
            "word": self.word,
            "utterance": self.utterance,
            "provenance": self.provenance,
            "counts": self.counts,
            "curves": self.curves,
        }


def _curve_dict(x_name, x, y_name, y, thr) -> dict:
    thr = [None if not np.isfinite(t) else float(t) for t in thr]
    return {x_name: [float(v) for v in x], y_name: [float(v) for v in y], "thresholds": thr}


def _safe(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except MetricError:
        return None


def assemble_report(variant: str, utt_scores: dict[str, np.ndarray], e_utt, wers,
                    word_scores=None, word_labels=None, with_curves: bool = True) -> MetricsReport:
    """Build the full report following the score-priority rules.

    ``utt_scores`` maps "wcr" / "utt" / "wer" to one value per utterance
    ("wer" is the raw WER estimate). Word arrays hold c_w and the correct bit
    for every word of the evaluated hypotheses. Metrics undefined on the data
    (a single class) are reported as null.
    """
    if variant not in AVAILABLE_SCORES:
        raise ValueError(f"unknown variant {variant!r}")
    available = AVAILABLE_SCORES[variant]
    missing = [s for s in available if s not in utt_scores]
    if missing:
        raise MetricError(f"variant {variant} requires score(s) {missing}")
    e_utt = np.asarray(e_utt, dtype=np.float64)
    wers = np.asarray(wers, dtype=np.float64)
    curves: dict = {}

    word = None
    if "wcr" in available:
        if word_scores is None or word_labels is None:
            raise MetricError(f"variant {variant} needs word-level scores")
        ws = np.asarray(word_scores, dtype=np.float64)
        wl = np.asarray(word_labels, dtype=np.float64)
        word = {
            "nce": _safe(nce, ws, wl),
            "auc_roc": _safe(auc_roc, ws, wl),
            "auc_pr_negative": _safe(auc_pr, ws, wl, target="negative"),
        }
        if with_curves:
            roc = _safe(roc_curve, ws, wl)
            if roc is not None:
                curves["word_roc"] = _curve_dict("fpr", roc[0], "tpr", roc[1], roc[2])
            pr = _safe(pr_curve, ws, wl, target="negative")
            if pr is not None:
                curves["word_pr_negative"] = _curve_dict("recall", pr[0], "precision", pr[1], pr[2])

    rank_name = ranking_score(available)
    rank_conf = _as_confidence(rank_name, np.asarray(utt_scores[rank_name], dtype=np.float64))
    rmse_name = rmse_score(available)
    rmse = None
    if rmse_name is not None:
        rmse_conf = _as_confidence(rmse_name, np.asarray(utt_scores[rmse_name], dtype=np.float64))
        rmse = rmse_one_minus_wer(rmse_conf, wers)
    utterance = {
        "auc_roc": _safe(auc_roc, rank_conf, e_utt),
        "auc_pr": _safe(auc_pr, rank_conf, e_utt, target="positive"),
        "rmse_vs_one_minus_wer": rmse,
    }
    if with_curves:
        roc = _safe(roc_curve, rank_conf, e_utt)
        if roc is not None:
            curves["utterance_roc"] = _curve_dict("fpr", roc[0], "tpr", roc[1], roc[2])
        pr = _safe(pr_curve, rank_conf, e_utt)
        if pr is not None:
            curves["utterance_pr"] = _curve_dict("recall", pr[0], "precision", pr[1], pr[2])
    provenance = {
        "available": [SCORE_LABEL[s] for s in available],
        "utterance_auc": SCORE_LABEL[rank_name],
        "rmse": None if rmse_name is None else SCORE_LABEL[rmse_name],
    }
    counts = {
        "n_utterances": int(e_utt.size),
        "n_words": None if word_scores is None else int(np.asarray(word_scores).size),
        "n_rmse_truth_clamped": int(((1.0 - wers) < 0).sum()),
    }
    return MetricsReport(variant, word, utterance, provenance, counts, curves)


_NUM_OR_NULL = {"type": ["number", "null"]}
_CURVE = {"type": "object"}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "jointcem metrics report",
    "type": "object",
    "required": ["schema_version", "variant", "word", "utterance", "provenance", "counts", "curves"],
    "properties": {
        "schema_version": {"const": REPORT_SCHEMA_VERSION},
        "variant": {"enum": list(AVAILABLE_SCORES)},
        "word": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["nce", "auc_roc", "auc_pr_negative"],
                    "properties": {"nce": _NUM_OR_NULL, "auc_roc": _NUM_OR_NULL, "auc_pr_negative": _NUM_OR_NULL},
                },
            ]
        },
        "utterance": {
            "type": "object",
            "required": ["auc_roc", "auc_pr", "rmse_vs_one_minus_wer"],
            "properties": {
                "auc_roc": _NUM_OR_NULL,
                "auc_pr": _NUM_OR_NULL,
                "rmse_vs_one_minus_wer": _NUM_OR_NULL,
            },
        },
        "provenance": {
            "type": "object",
            "required": ["available", "utterance_auc", "rmse"],
        },
        "counts": {"type": "object"},
        "curves": {"type": "object", "additionalProperties": _CURVE},
    },
}
