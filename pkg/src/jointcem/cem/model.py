"""Confidence estimation model: transformer features plus three heads.

Per hypothesis the model produces

* ``token_probs``: (correct, insertion, substitution) softmax at every word-piece,
* ``word_probs``: the rows of ``token_probs`` at the last word-piece of each word,
* ``deletion_log_rates``: one Poisson log-rate per gap (L + 1 of them), where
  gap j <= L reads the feature of word j's last piece and gap L + 1 reads the
  feature of an end-of-sequence token appended to every hypothesis,
* ``utt_score``: probability that the utterance has zero errors, from attention
  pooling over the word-piece features.

Heads that the configured variant does not train are not built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..alignment import WordBoundaries, wp_to_words
from ..datagen import wp_embedding
from ..nn import layers
from ..nn.layers import Parameters
from ..nn.tensor import Tensor, matmul, no_grad, sigmoid, softmax, take_rows, tanh
from .config import CemConfig

PAD, UNK, EOS = "<pad>", "<unk>", "<eos>"
SPECIAL_TOKENS = (PAD, UNK, EOS)


@dataclass
class CemOutput:
    """Model outputs for one hypothesis.

    Fields hold ``Tensor`` objects when produced by :meth:`CemModel.forward`
    and plain arrays when produced in inference mode or built by hand (oracle
    outputs). ``None`` marks a head the variant does not have.
    """

    token_probs: Tensor | np.ndarray | None = None
    word_probs: Tensor | np.ndarray | None = None
    deletion_log_rates: Tensor | np.ndarray | None = None
    utt_score: Tensor | np.ndarray | float | None = None
    attention_weights: np.ndarray | None = field(default=None, repr=False)


@dataclass
class EncodedBatch:
    token_ids: np.ndarray       # (B, N) with N = max M + 1
    token_mask: np.ndarray      # (B, N) real tokens incl. EOS
    pool_mask: np.ndarray       # (B, N) real word-pieces only
    acoustic: np.ndarray        # (B, T, d_a)
    frame_mask: np.ndarray      # (B, T)
    word_rows: np.ndarray       # flat row index into B*N for each word's last piece
    word_segment: np.ndarray    # example index per word
    gap_rows: np.ndarray        # flat row index per deletion gap
    gap_segment: np.ndarray
    n_words: np.ndarray         # L per example
    n_pieces: np.ndarray        # M per example
    prototypes: np.ndarray | None = None  # (B, N, d_a) recognizer-side piece vectors

    @property
    def size(self) -> int:
        return self.token_ids.shape[0]


@dataclass
class BatchOutput:
    token_probs: Tensor | None
    word_probs: Tensor | None
    deletion_log_rates: Tensor | None
    utt_score: Tensor | None
    attention_weights: np.ndarray | None
    batch: EncodedBatch


def build_wp_vocab(token_lists) -> list[str]:
    pieces = set()
    for toks in token_lists:
        pieces.update(toks)
    pieces.difference_update(SPECIAL_TOKENS)
    return list(SPECIAL_TOKENS) + sorted(pieces)


class CemModel:
    def __init__(self, config: CemConfig, wp_vocab: Sequence[str], params: Parameters | None = None):
        if list(wp_vocab[:len(SPECIAL_TOKENS)]) != list(SPECIAL_TOKENS):
            raise ValueError("wp_vocab must start with the special tokens")
        self.config = config
        self.wp_vocab = list(wp_vocab)
        self._index = {tok: i for i, tok in enumerate(self.wp_vocab)}
        self._proto_cache: dict[str, np.ndarray] = {}
        if params is None:
            params = self.init_params(config, len(self.wp_vocab))
        else:
            expected = set(self.init_params(config, len(self.wp_vocab)).names())
            got = set(params.names())
            if expected != got:
                raise ValueError(
                    f"parameters do not match the {config.variant} architecture: "
                    f"missing {sorted(expected - got)[:3]}, unexpected {sorted(got - expected)[:3]}"
                )
        self.params = params

    # -- construction ---------------------------------------------------------------

    @staticmethod
    def init_params(config: CemConfig, vocab_size: int) -> Parameters:
        d = config.d_model
        p = Parameters(seed=config.seed)
        p.uniform("embed", np.sqrt(3.0), (vocab_size, d))
        if config.wp_prototypes:
            p.weight("proto_proj", config.d_acoustic, d)
        for b in range(config.n_blocks):
            layers.add_transformer_block(p, f"block{b}", d, config.d_acoustic, config.d_ff)
        layers.add_layer_norm(p, "ln_final", d)
        heads = config.heads
        if "word" in heads:
            layers.add_mlp(p, "word_head", (d, config.word_hidden, 3))
        if "deletion" in heads:
            layers.add_mlp(p, "deletion_head", (d, *config.deletion_hidden, 1))
        if "utt" in heads:
            layers.add_linear(p, "utt_pool.proj", d, d)
            p.weight("utt_pool.context", d, 1)
            layers.add_mlp(p, "utt_head", (d, config.utt_hidden, 1))
        return p

    def meta(self) -> dict:
        return {"config": self.config.to_dict(), "wp_vocab": self.wp_vocab}

    @classmethod
    def from_checkpoint(cls, params: Parameters, meta: dict) -> "CemModel":
        return cls(CemConfig.from_dict(meta["config"]), meta["wp_vocab"], params)

    # -- batching -------------------------------------------------------------------

    def encode(self, items: Sequence[tuple[Sequence[str], np.ndarray]],
               boundaries: Sequence[WordBoundaries] | None = None) -> EncodedBatch:
        """Pad a list of (wp_tokens, acoustic frames) pairs into one batch."""
        if not items:
            raise ValueError("empty batch")
        B = len(items)
        if boundaries is None:
            boundaries = [wp_to_words(toks) for toks, _ in items]
        n_pieces = np.array([len(toks) for toks, _ in items])
        if (n_pieces == 0).any():
            raise ValueError("hypothesis with no word-pieces")
        n_frames = np.array([a.shape[0] for _, a in items])
        if (n_frames == 0).any():
            raise ValueError("acoustic input with no frames")
        d_a = items[0][1].shape[1]
        if d_a != self.config.d_acoustic:
            raise ValueError(f"acoustic dim {d_a} != configured {self.config.d_acoustic}")
        N = int(n_pieces.max()) + 1
        T = int(n_frames.max())
        ids = np.zeros((B, N), dtype=np.intp)
        token_mask = np.zeros((B, N), dtype=bool)
        pool_mask = np.zeros((B, N), dtype=bool)
        acoustic = np.zeros((B, T, d_a))
        frame_mask = np.zeros((B, T), dtype=bool)
        word_rows, word_seg, gap_rows, gap_seg = [], [], [], []
        unk, eos = self._index[UNK], self._index[EOS]
        protos = np.zeros((B, N, d_a)) if self.config.wp_prototypes else None
        for b, ((toks, frames), bnd) in enumerate(zip(items, boundaries)):
            M = len(toks)
            ids[b, :M] = [self._index.get(t, unk) for t in toks]
            ids[b, M] = eos
            if protos is not None:
                protos[b, :M] = [self._prototype(t) for t in toks]
            token_mask[b, :M + 1] = True
            pool_mask[b, :M] = True
            acoustic[b, :frames.shape[0]] = frames
            frame_mask[b, :frames.shape[0]] = True
            rows = [b * N + i for i in bnd.last_wp_index]
            word_rows.extend(rows)
            word_seg.extend([b] * len(rows))
            gap_rows.extend(rows + [b * N + M])
            gap_seg.extend([b] * (len(rows) + 1))
        return EncodedBatch(
            ids, token_mask, pool_mask, acoustic, frame_mask,
            np.array(word_rows, dtype=np.intp), np.array(word_seg, dtype=np.intp),
            np.array(gap_rows, dtype=np.intp), np.array(gap_seg, dtype=np.intp),
            np.array([len(bnd.words) for bnd in boundaries]), n_pieces, protos,
        )

    def _prototype(self, wp: str) -> np.ndarray:
        vec = self._proto_cache.get(wp)
        if vec is None:
            vec = self._proto_cache[wp] = wp_embedding(wp, self.config.d_acoustic)
        return vec

    # -- forward --------------------------------------------------------------------

    def features(self, batch: EncodedBatch) -> Tensor:
        """Transformer features f(y) for every padded position, shape (B, N, d)."""
        cfg, p = self.config, self.params
        B, N = batch.token_ids.shape
        d = cfg.d_model
        x = take_rows(p["embed"], batch.token_ids.reshape(-1)).reshape(B, N, d)
        if cfg.wp_prototypes:
            x = x + matmul(Tensor(batch.prototypes, op="prototypes"), p["proto_proj"])
        acoustic = batch.acoustic
        if cfg.positional:
            x = x + layers.sinusoidal_positions(N, d)
            acoustic = acoustic + layers.sinusoidal_positions(acoustic.shape[1], acoustic.shape[2])
        a = Tensor(acoustic, op="acoustic")
        for blk in range(cfg.n_blocks):
            x = layers.transformer_block(p, f"block{blk}", x, a, cfg.n_heads,
                                         batch.token_mask, batch.frame_mask)
        return layers.norm(p, "ln_final", x)

    def forward_batch(self, batch: EncodedBatch) -> BatchOutput:
        cfg, p = self.config, self.params
        B, N = batch.token_ids.shape
        d = cfg.d_model
        f = self.features(batch)
        flat = f.reshape(B * N, d)
        heads = cfg.heads
        token_probs = word_probs = rates = utt = alpha = None
        if "word" in heads:
            logits = layers.mlp(p, "word_head", flat, 2)
            token_probs = softmax(logits, axis=-1)
            word_probs = take_rows(token_probs, batch.word_rows)
        if "deletion" in heads:
            gap_feats = take_rows(flat, batch.gap_rows)
            n_layers = len(cfg.deletion_hidden) + 1
            rates = layers.mlp(p, "deletion_head", gap_feats, n_layers).reshape(-1)
        if "utt" in heads:
            u = tanh(layers.linear(p, "utt_pool.proj", f))
            scores = matmul(u, p["utt_pool.context"]).reshape(B, N)
            weights = softmax(scores, axis=-1, mask=batch.pool_mask)
            pooled = matmul(weights.reshape(B, 1, N), f).reshape(B, d)
            utt = sigmoid(layers.mlp(p, "utt_head", pooled, 2)).reshape(B)
            alpha = weights.data
        return BatchOutput(token_probs, word_probs, rates, utt, alpha, batch)

    def forward(self, wp_tokens: Sequence[str], acoustic: np.ndarray) -> CemOutput:
        """Differentiable outputs for a single hypothesis."""
        batch = self.encode([(wp_tokens, acoustic)])
        out = self.forward_batch(batch)
        M = len(wp_tokens)
        return CemOutput(
            token_probs=None if out.token_probs is None else out.token_probs[:M],
            word_probs=out.word_probs,
            deletion_log_rates=out.deletion_log_rates,
            utt_score=None if out.utt_score is None else out.utt_score.reshape(()),
            attention_weights=None if out.attention_weights is None else out.attention_weights[0, :M],
        )

    def predict(self, items: Sequence[tuple[Sequence[str], np.ndarray]],
                batch_size: int = 256) -> list[CemOutput]:
        """Inference-mode outputs (numpy arrays) for many hypotheses."""
        results: list[CemOutput] = []
        with no_grad():
            for start in range(0, len(items), batch_size):
                chunk = items[start:start + batch_size]
                batch = self.encode(chunk)
                out = self.forward_batch(batch)
                results.extend(split_batch_output(out))
        return results


def split_batch_output(out: BatchOutput) -> list[CemOutput]:
    batch = out.batch
    B, N = batch.token_ids.shape
    word_bounds = np.concatenate([[0], np.cumsum(batch.n_words)])
    gap_bounds = np.concatenate([[0], np.cumsum(batch.n_words + 1)])
    tok = None if out.token_probs is None else out.token_probs.data.reshape(B, N, 3)
    res = []
    for b in range(B):
        M = int(batch.n_pieces[b])
        res.append(CemOutput(
            token_probs=None if tok is None else tok[b, :M].copy(),
            word_probs=None if out.word_probs is None
            else out.word_probs.data[word_bounds[b]:word_bounds[b + 1]].copy(),
            deletion_log_rates=None if out.deletion_log_rates is None
            else out.deletion_log_rates.data[gap_bounds[b]:gap_bounds[b + 1]].copy(),
            utt_score=None if out.utt_score is None else float(out.utt_score.data[b]),
            attention_weights=None if out.attention_weights is None
            else out.attention_weights[b, :M].copy(),
        ))
    return res
