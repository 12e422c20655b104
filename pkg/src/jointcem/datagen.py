"""Synthetic ASR channel: references, corrupted n-best lists and acoustics.

The recognizer is simulated. Reference sentences are drawn from a vocabulary
of pronounceable consonant-vowel words, each hypothesis is an independently
corrupted copy of the reference (substitutions, deletions, insertions), and
the acoustic frames encode the *reference* word-pieces, so a model that
compares hypothesis against acoustics can detect recognition errors.

All randomness is derived from ``ChannelConfig.seed`` and the utterance index,
so any utterance can be regenerated on its own.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .alignment import WORD_START, WordBoundaries, wp_to_words

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"


@dataclass
class ChannelConfig:
    vocab_size: int = 200
    vocab_seed: int = 0
    min_words: int = 3
    max_words: int = 8
    p_sub: float = 0.08
    p_ins: float = 0.02
    p_del: float = 0.05
    n_best: int = 4
    beam_noise: float = 0.5
    noise_std: float = 0.3
    frames_per_wp: int = 2
    d_a: int = 16
    wp_max_len: int = 3
    n_utterances: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("p_sub", "p_ins", "p_del"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        if self.p_sub + self.p_del > 1.0:
            raise ValueError("p_sub + p_del must not exceed 1")
        if self.n_best < 1:
            raise ValueError("n_best must be >= 1")
        if not 1 <= self.min_words <= self.max_words:
            raise ValueError("need 1 <= min_words <= max_words")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")


@dataclass
class Hypothesis:
    utterance_id: str
    beam_rank: int
    wp_tokens: list[str]
    sim_score: float = 0.0

    @property
    def boundaries(self) -> WordBoundaries:
        return wp_to_words(self.wp_tokens)

    @property
    def words(self) -> list[str]:
        return self.boundaries.words


@dataclass
class Utterance:
    utterance_id: str
    reference: list[str]
    acoustic: np.ndarray
    hypotheses: list[Hypothesis]
    acoustic_recipe: dict | None = field(default=None, repr=False)


# -- vocabulary and tokenization ---------------------------------------------------


def make_vocabulary(size: int, seed: int = 0) -> list[str]:
    """Distinct CV/CVC-syllable words, 2-3 syllables each."""
    rng = np.random.default_rng(seed)
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < size:
        parts = []
        for _ in range(rng.integers(2, 4)):
            syl = CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))]
            if rng.random() < 0.3:
                syl += CONSONANTS[rng.integers(len(CONSONANTS))]
            parts.append(syl)
        w = "".join(parts)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def tokenize(word: str, k: int = 3, marker: str = WORD_START) -> list[str]:
    """Split a word into left-to-right chunks of at most ``k`` characters."""
    if not word:
        raise ValueError("cannot tokenize an empty word")
    pieces = [word[i:i + k] for i in range(0, len(word), k)]
    pieces[0] = marker + pieces[0]
    return pieces


def tokenize_sentence(words: Iterable[str], k: int = 3) -> list[str]:
    out: list[str] = []
    for w in words:
        out.extend(tokenize(w, k))
    return out


# -- channel -----------------------------------------------------------------------


def corrupt(reference: Sequence[str], config: ChannelConfig, rng: np.random.Generator,
            vocab: Sequence[str] | None = None) -> tuple[list[str], list[tuple]]:
    """Corrupt a reference word sequence.

    Returns the hypothesis and the generating operations, one of
    ``("cor", w)``, ``("sub", w, new)``, ``("del", w)``, ``("ins", new)``.
    """
    if vocab is None:
        vocab = make_vocabulary(config.vocab_size, config.vocab_seed)
    hyp: list[str] = []
    ops: list[tuple] = []
    n_vocab = len(vocab)
    for w in reference:
        u = rng.random()
        if u < config.p_del:
            ops.append(("del", w))
        elif u < config.p_del + config.p_sub:
            new = vocab[rng.integers(n_vocab)]
            while new == w:
                new = vocab[rng.integers(n_vocab)]
            hyp.append(new)
            ops.append(("sub", w, new))
        else:
            hyp.append(w)
            ops.append(("cor", w))
        if rng.random() < config.p_ins:
            new = vocab[rng.integers(n_vocab)]
            hyp.append(new)
            ops.append(("ins", new))
    return hyp, ops


def wp_embedding(wp: str, d_a: int) -> np.ndarray:
    """Fixed per-word-piece acoustic prototype, seeded by a hash of the piece."""
    digest = hashlib.sha256(f"{d_a}:{wp}".encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little")).standard_normal(d_a)


def synth_acoustics(reference_wps: Sequence[str], frames_per_wp: int, d_a: int,
                    noise_std: float, rng: np.random.Generator) -> np.ndarray:
    if not reference_wps:
        raise ValueError("cannot synthesize acoustics for an empty reference")
    protos = np.stack([wp_embedding(wp, d_a) for wp in reference_wps])
    frames = np.repeat(protos, frames_per_wp, axis=0)
    if noise_std > 0:
        frames = frames + rng.normal(0.0, noise_std, size=frames.shape)
    return frames


def acoustics_from_recipe(reference: Sequence[str], recipe: dict) -> np.ndarray:
    wps = tokenize_sentence(reference, recipe["wp_max_len"])
    rng = np.random.default_rng(recipe["seed"])
    return synth_acoustics(wps, recipe["frames_per_wp"], recipe["d_a"], recipe["noise_std"], rng)


def _utterance_rngs(seed: int, index: int) -> tuple[np.random.Generator, int]:
    ss = np.random.SeedSequence([seed, index])
    text_ss, acoustic_ss = ss.spawn(2)
    acoustic_seed = int(acoustic_ss.generate_state(1, dtype=np.uint64)[0])
    return np.random.default_rng(text_ss), acoustic_seed


def gen_utterance(config: ChannelConfig, index: int, vocab: Sequence[str]) -> Utterance:
    rng, acoustic_seed = _utterance_rngs(config.seed, index)
    n_words = int(rng.integers(config.min_words, config.max_words + 1))
    reference = [vocab[i] for i in rng.integers(len(vocab), size=n_words)]
    utt_id = f"utt{index:06d}"

    drawn = []
    for _ in range(config.n_best):
        for _attempt in range(100):
            hyp, ops = corrupt(reference, config, rng, vocab)
            if hyp:
                break
        else:
            raise ValueError("channel keeps producing empty hypotheses; lower p_del")
        n_edits = sum(op[0] != "cor" for op in ops)
        drawn.append((-n_edits + rng.normal(0.0, config.beam_noise), hyp))
    # stable sort: equal scores keep draw order
    drawn.sort(key=lambda item: -item[0])
    hypotheses = [
        Hypothesis(utt_id, rank, tokenize_sentence(hyp, config.wp_max_len), float(score))
        for rank, (score, hyp) in enumerate(drawn)
    ]
    recipe = {
        "frames_per_wp": config.frames_per_wp,
        "d_a": config.d_a,
        "seed": acoustic_seed,
        "noise_std": config.noise_std,
        "wp_max_len": config.wp_max_len,
    }
    return Utterance(utt_id, reference, acoustics_from_recipe(reference, recipe), hypotheses, recipe)


def gen_utterances(config: ChannelConfig) -> list[Utterance]:
    vocab = make_vocabulary(config.vocab_size, config.vocab_seed)
    return [gen_utterance(config, i, vocab) for i in range(config.n_utterances)]


# -- dataset files -------------------------------------------------------------------


def utterance_to_record(utt: Utterance, inline_acoustic: bool = False) -> dict:
    if inline_acoustic or utt.acoustic_recipe is None:
        acoustic = utt.acoustic.tolist()
    else:
        acoustic = utt.acoustic_recipe
    return {
        "utterance_id": utt.utterance_id,
        "reference": list(utt.reference),
        "acoustic": acoustic,
        "hypotheses": [
            {"beam_rank": h.beam_rank, "wp_tokens": list(h.wp_tokens), "sim_score": h.sim_score}
            for h in utt.hypotheses
        ],
    }


def record_to_utterance(rec: dict) -> Utterance:
    acoustic = rec["acoustic"]
    if isinstance(acoustic, dict):
        recipe = acoustic
        frames = acoustics_from_recipe(rec["reference"], recipe)
    else:
        recipe = None
        frames = np.asarray(acoustic, dtype=np.float64)
    hyps = [
        Hypothesis(rec["utterance_id"], h["beam_rank"], list(h["wp_tokens"]), float(h.get("sim_score", 0.0)))
        for h in rec["hypotheses"]
    ]
    hyps.sort(key=lambda h: h.beam_rank)
    return Utterance(rec["utterance_id"], list(rec["reference"]), frames, hyps, recipe)


def write_corpus(path: str | os.PathLike, utterances: Iterable[Utterance],
                 inline_acoustic: bool = False) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for utt in utterances:
            fh.write(json.dumps(utterance_to_record(utt, inline_acoustic), sort_keys=True) + "\n")
    os.replace(tmp, path)


def gen_corpus(config: ChannelConfig, path: str | os.PathLike, inline_acoustic: bool = False) -> Path:
    write_corpus(path, gen_utterances(config), inline_acoustic)
    return Path(path)


def load_corpus(path: str | os.PathLike) -> list[Utterance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(record_to_utterance(json.loads(line)))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed utterance record ({exc})") from exc
    return out


def channel_config_dict(config: ChannelConfig) -> dict:
    return asdict(config)
