import numpy as np
import pytest

from jointcem.alignment import align_words, wp_to_words
from jointcem.datagen import (
    ChannelConfig,
    corrupt,
    gen_corpus,
    gen_utterances,
    load_corpus,
    make_vocabulary,
    synth_acoustics,
    tokenize,
    tokenize_sentence,
    wp_embedding,
    write_corpus,
)

from _oracles import levenshtein


def test_tokenize_examples():
    assert tokenize("morning", k=4) == ["▁morn", "ing"]
    assert tokenize("go") == ["▁go"]
    with pytest.raises(ValueError):
        tokenize("")


def test_tokenize_round_trip():
    vocab = make_vocabulary(300, seed=4)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        words = list(rng.choice(vocab, size=rng.integers(1, 9)))
        k = int(rng.integers(1, 6))
        assert wp_to_words(tokenize_sentence(words, k)).words == words


def test_vocabulary_is_distinct_and_deterministic():
    v = make_vocabulary(150, seed=1)
    assert len(set(v)) == 150
    assert v == make_vocabulary(150, seed=1)


def test_config_validation():
    with pytest.raises(ValueError):
        ChannelConfig(p_sub=0.7, p_del=0.5)
    with pytest.raises(ValueError):
        ChannelConfig(n_best=0)


class TestCorrupt:
    ref = ["aa", "bb", "cc", "dd"]

    def test_zero_rates_identity(self):
        cfg = ChannelConfig(p_sub=0, p_ins=0, p_del=0)
        hyp, ops = corrupt(self.ref, cfg, np.random.default_rng(0))
        assert hyp == self.ref and all(op[0] == "cor" for op in ops)

    def test_delete_everything(self):
        cfg = ChannelConfig(p_sub=0, p_ins=0, p_del=1)
        hyp, _ = corrupt(self.ref, cfg, np.random.default_rng(0))
        assert hyp == []
        assert align_words(hyp, self.ref).counts[3] == len(self.ref)

    def test_substitution_rate(self):
        cfg = ChannelConfig(p_sub=0.1, p_ins=0, p_del=0)
        rng = np.random.default_rng(3)
        vocab = make_vocabulary(cfg.vocab_size)
        ref = list(rng.choice(vocab, size=10_000))
        _, ops = corrupt(ref, cfg, rng, vocab)
        frac = sum(op[0] == "sub" for op in ops) / len(ref)
        assert abs(frac - 0.1) < 0.01

    def test_generator_ops_bound_distance(self):
        cfg = ChannelConfig(p_sub=0.2, p_ins=0.2, p_del=0.2)
        rng = np.random.default_rng(5)
        vocab = make_vocabulary(cfg.vocab_size)
        for _ in range(300):
            ref = list(rng.choice(vocab, size=6))
            hyp, ops = corrupt(ref, cfg, rng, vocab)
            applied = sum(op[0] != "cor" for op in ops)
            assert levenshtein(hyp, ref) <= applied


class TestAcoustics:
    def test_shape_and_noiseless_determinism(self):
        wps = tokenize_sentence(["bako", "tu"])
        a = synth_acoustics(wps, 3, 8, 0.0, np.random.default_rng(0))
        b = synth_acoustics(wps, 3, 8, 0.0, np.random.default_rng(99))
        assert a.shape == (3 * len(wps), 8)
        np.testing.assert_array_equal(a, b)

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            synth_acoustics([], 2, 4, 0.1, np.random.default_rng(0))

    def test_nearest_prototype_decoding(self):
        cfg = ChannelConfig(noise_std=0.05, n_utterances=50, seed=2)
        utts = gen_utterances(cfg)
        inventory = sorted({wp for u in utts for wp in tokenize_sentence(u.reference, cfg.wp_max_len)})
        protos = np.stack([wp_embedding(w, cfg.d_a) for w in inventory])
        hits = total = 0
        for u in utts:
            wps = tokenize_sentence(u.reference, cfg.wp_max_len)
            d = ((u.acoustic[:, None, :] - protos[None]) ** 2).sum(-1)
            decoded = [inventory[i] for i in d.argmin(axis=1)]
            expected = [w for w in wps for _ in range(cfg.frames_per_wp)]
            hits += sum(x == y for x, y in zip(decoded, expected))
            total += len(expected)
        assert hits / total >= 0.99

    def test_acoustics_ignore_hypotheses(self):
        base = ChannelConfig(n_utterances=5, seed=1)
        noisy = ChannelConfig(n_utterances=5, seed=1, p_sub=0.5, p_ins=0.3)
        for a, b in zip(gen_utterances(base), gen_utterances(noisy)):
            assert a.reference == b.reference
            np.testing.assert_array_equal(a.acoustic, b.acoustic)


class TestCorpus:
    def test_byte_identical_regeneration(self, tmp_path):
        cfg = ChannelConfig(n_utterances=20, seed=7)
        gen_corpus(cfg, tmp_path / "a.jsonl")
        gen_corpus(cfg, tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_n_best_and_ranks(self):
        for u in gen_utterances(ChannelConfig(n_utterances=30, n_best=4)):
            assert [h.beam_rank for h in u.hypotheses] == [0, 1, 2, 3]
            scores = [h.sim_score for h in u.hypotheses]
            assert scores == sorted(scores, reverse=True)
            assert all(h.wp_tokens for h in u.hypotheses)
            assert u.acoustic.shape[0] == 2 * len(tokenize_sentence(u.reference))

    def test_recipe_and_inline_load_identically(self, tmp_path):
        utts = gen_utterances(ChannelConfig(n_utterances=10, seed=3))
        write_corpus(tmp_path / "r.jsonl", utts)
        write_corpus(tmp_path / "i.jsonl", utts, inline_acoustic=True)
        for a, b, c in zip(utts, load_corpus(tmp_path / "r.jsonl"), load_corpus(tmp_path / "i.jsonl")):
            assert a.acoustic.tobytes() == b.acoustic.tobytes() == c.acoustic.tobytes()
            assert [h.wp_tokens for h in a.hypotheses] == [h.wp_tokens for h in c.hypotheses]

    def test_labels_agree_with_generator_distance(self):
        cfg = ChannelConfig(n_utterances=200, seed=11, p_sub=0.15, p_ins=0.1, p_del=0.1)
        vocab = make_vocabulary(cfg.vocab_size)
        rng = np.random.default_rng(0)
        for _ in range(500):
            ref = list(rng.choice(vocab, size=5))
            hyp, ops = corrupt(ref, cfg, rng, vocab)
            lab = align_words(hyp, ref)
            _, s, i, d = lab.counts
            assert s + i + d == levenshtein(hyp, ref) <= sum(op[0] != "cor" for op in ops)

    def test_malformed_file(self, tmp_path):
        p = tmp_path / "bad.jsonl"
        p.write_text('{"utterance_id": "x"}\n')
        with pytest.raises(ValueError, match="bad.jsonl:1"):
            load_corpus(p)
