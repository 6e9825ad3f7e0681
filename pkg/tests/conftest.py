"""Shared fixtures: the worked two-population example and a synthetic corpus."""

from __future__ import annotations

import numpy as np
import pytest

from unseen.core import SampleSet, build_fingerprint

# Two populations over labels A..F; the source of most hand-checked values.
WORKED_OBSERVATIONS = [(1, x) for x in "ABCEF"] + [(2, x) for x in "ABDEEFF"]
WORKED_MATRIX = {(0, 1): 1, (1, 0): 1, (1, 1): 2, (1, 2): 2}
WORKED_SIZES = (5, 7)


@pytest.fixture
def worked_samples() -> SampleSet:
    return SampleSet.from_observations(2, WORKED_OBSERVATIONS)


@pytest.fixture
def worked_fingerprint(worked_samples):
    return build_fingerprint(worked_samples)


def make_bursty_corpus(
    seed: int = 0,
    chapters: int = 20,
    words_per_chapter: int = 600,
    common_vocab: int = 300,
    chapter_vocab: int = 80,
    common_share: float = 0.65,
) -> str:
    """Deterministic synthetic text with chapter-local vocabulary.

    Each chapter mixes a global word stock (Zipf-weighted) with words used
    only inside that chapter, so a contiguous excerpt sees a biased slice
    of the vocabulary while a random sample does not.
    """
    rng = np.random.default_rng([seed])
    ranks = np.arange(1, common_vocab + 1, dtype=float)
    common_w = 1.0 / ranks
    common_w /= common_w.sum()
    words = []
    for ch in range(chapters):
        local = [f"ch{ch}w{k}" for k in range(chapter_vocab)]
        for _ in range(words_per_chapter):
            if rng.random() < common_share:
                words.append(f"common{rng.choice(common_vocab, p=common_w)}")
            else:
                words.append(local[int(rng.integers(chapter_vocab))])
    # line breaks every dozen words keep the text shaped like prose
    lines = [" ".join(words[i : i + 12]) for i in range(0, len(words), 12)]
    return "\n".join(lines) + "\n"


@pytest.fixture(scope="session")
def bursty_corpus() -> str:
    return make_bursty_corpus(seed=5)
