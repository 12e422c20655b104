import pytest

from jointcem.cem import CemConfig
from jointcem.datagen import ChannelConfig, gen_utterances

TINY_MODEL = dict(d_model=8, n_heads=2, n_blocks=1, d_ff=16, d_acoustic=4,
                  word_hidden=8, deletion_hidden=(8, 4), utt_hidden=4)


def tiny_config(**overrides) -> CemConfig:
    return CemConfig(**{**TINY_MODEL, **overrides})


@pytest.fixture(scope="session")
def tiny_corpus():
    cfg = ChannelConfig(n_utterances=24, d_a=4, vocab_size=30, min_words=2, max_words=5,
                        p_sub=0.2, p_ins=0.1, p_del=0.1, seed=123)
    return gen_utterances(cfg)


# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {n}. {title}: {detail}")
