"""Levenshtein alignment and ground-truth labels for confidence training.

Three label kinds come out of one word-level alignment of a hypothesis
against its reference:

* a tag per hypothesis word (``cor``/``sub``/``ins``),
* ``L + 1`` deletion-gap counts: reference words dropped before the first
  hypothesis word, between consecutive words, and after the last one,
* the utterance bit ``e_utt``, 1 iff the hypothesis has zero errors.

Among several minimum-cost alignments the backtrace always prefers, at each
cell, match > substitution > deletion > insertion.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Sequence

WORD_START = "▁"


class Tag(str, enum.Enum):
    COR = "cor"
    SUB = "sub"
    INS = "ins"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class WordBoundaries:
    words: list[str]
    last_wp_index: list[int]


@dataclass(frozen=True)
class AlignmentLabels:
    word_tags: list[Tag]
    deletion_gaps: list[int]
    e_utt: int
    counts: tuple[int, int, int, int]  # (C, S, I, D)
    wer: float
    ref_len: int
    empty_reference: bool = False

    @property
    def hyp_len(self) -> int:
        return len(self.word_tags)

    def to_record(self, utterance_id: str, beam_rank: int) -> dict:
        c, s, i, d = self.counts
        return {
            "utterance_id": utterance_id,
            "beam_rank": beam_rank,
            "word_tags": [t.value for t in self.word_tags],
            "deletion_gaps": list(self.deletion_gaps),
            "counts": {"C": c, "S": s, "I": i, "D": d},
            "wer": self.wer,
            "e_utt": self.e_utt,
        }


def wp_to_words(wp_tokens: Sequence[str], marker: str = WORD_START) -> WordBoundaries:
    """Group word-pieces into words; each word starts at a marked piece."""
    words: list[str] = []
    last: list[int] = []
    for i, tok in enumerate(wp_tokens):
        if tok.startswith(marker):
            if words:
                last.append(i - 1)
            words.append(tok[len(marker):])
        else:
            if not words:
                raise ValueError(f"first word-piece {tok!r} lacks the word-start marker {marker!r}")
            words[-1] += tok
    if words:
        last.append(len(wp_tokens) - 1)
    return WordBoundaries(words, last)


def normalize_words(words: Sequence[str]) -> list[str]:
    return [w.strip().lower() for w in words]


def _backtrace(hyp: Sequence[str], ref: Sequence[str]) -> list[tuple[str, int]]:
    """Return edit ops in hypothesis order as (op, hyp_words_consumed_before).

    op is one of 'cor', 'sub', 'ins', 'del'.
    """
    n, m = len(hyp), len(ref)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        row[0] = i
        h = hyp[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (h != ref[j - 1])
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            if prev[j] + 1 < best:
                best = prev[j] + 1
            row[j] = best

    ops: list[tuple[str, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        cur = dist[i][j]
        if i > 0 and j > 0 and hyp[i - 1] == ref[j - 1] and cur == dist[i - 1][j - 1]:
            ops.append(("cor", i - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cur == dist[i - 1][j - 1] + 1:
            ops.append(("sub", i - 1))
            i, j = i - 1, j - 1
        elif j > 0 and cur == dist[i][j - 1] + 1:
            ops.append(("del", i))
            j -= 1
        else:
            ops.append(("ins", i - 1))
            i -= 1
    ops.reverse()
    return ops


def align_words(hyp_words: Sequence[str], ref_words: Sequence[str],
                normalize: bool = True) -> AlignmentLabels:
    if normalize:
        hyp_words, ref_words = normalize_words(hyp_words), normalize_words(ref_words)
    L = len(hyp_words)
    tags: list[Tag] = []
    gaps = [0] * (L + 1)
    for op, pos in _backtrace(hyp_words, ref_words):
        if op == "del":
            gaps[pos] += 1
        else:
            tags.append(Tag(op))
    c = sum(t is Tag.COR for t in tags)
    s = sum(t is Tag.SUB for t in tags)
    ins = sum(t is Tag.INS for t in tags)
    d = sum(gaps)
    ref_len = len(ref_words)
    errors = s + ins + d
    return AlignmentLabels(
        word_tags=tags,
        deletion_gaps=gaps,
        e_utt=int(errors == 0),
        counts=(c, s, ins, d),
        wer=errors / max(1, ref_len),
        ref_len=ref_len,
        empty_reference=ref_len == 0 and L > 0,
    )


def align_wp(hyp_wps: Sequence[str], ref_wps: Sequence[str]) -> list[Tag]:
    """Word-piece tags for the hypothesis; deletions have no hypothesis slot."""
    return [Tag(op) for op, _ in _backtrace(hyp_wps, ref_wps) if op != "del"]


def edit_counts(labels: AlignmentLabels) -> tuple[int, int, int, int, float]:
    c, s, i, d = labels.counts
    return c, s, i, d, labels.wer


def dump_jsonl(records, fh) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
