"""Deterministic synthetic data generators for exercising the pipeline.

Real association datasets are large and externally licensed; these
generators produce small lexicons and response tables with controllable
structure: planted linear signal for regression checks and planted
value-homophily for compartmentalization checks.
"""

from __future__ import annotations

import string

import numpy as np

from .ingest import FEATURE_NAMES, Lexicon, LexiconEntry, ResponseRow, ResponseTable

_RANGES = {
    "valence": (1.0, 9.0),
    "arousal": (1.0, 9.0),
    "dominance": (1.0, 9.0),
    "semantic_size": (1.0, 7.0),
    "concreteness": (1.0, 7.0),
    "gender": (1.0, 7.0),
    "aoa": (1.0, 7.0),
    "familiarity": (1.0, 7.0),
}


def _random_words(n: int, rng: np.random.Generator, min_len=3, max_len=9) -> list[str]:
    letters = np.array(list(string.ascii_lowercase))
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        length = int(rng.integers(min_len, max_len + 1))
        word = "".join(rng.choice(letters, size=length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def random_lexicon(n_words: int, seed: int = 0) -> Lexicon:
    """Independent uniform features; length derived from the word itself."""
    rng = np.random.default_rng(seed)
    entries = {}
    for word in _random_words(n_words, rng):
        features = {}
        for name, (lo, hi) in _RANGES.items():
            features[name] = float(rng.uniform(lo, hi))
        features["log_frequency"] = float(rng.uniform(0.0, 12.0))
        features["polysemy"] = float(rng.integers(0, 12))
        features["length"] = float(len(word))
        entries[word] = LexiconEntry(word=word, features=features)
    return Lexicon(entries=entries)


def linear_target_lexicon(n_words: int, target: str = "concreteness",
                          coefs: dict[str, float] | None = None,
                          noise: float = 0.1, seed: int = 0) -> Lexicon:
    """Lexicon whose target feature is an affine function of the others plus noise."""
    rng = np.random.default_rng(seed)
    base = random_lexicon(n_words, seed=seed + 1)
    if coefs is None:
        coefs = {"valence": 0.5, "aoa": -0.4, "log_frequency": 0.2}
    entries = {}
    for word, entry in base.entries.items():
        features = dict(entry.features)
        value = 4.0 + sum(c * features[f] for f, c in coefs.items())
        features[target] = value + float(rng.normal(0.0, noise))
        entries[word] = LexiconEntry(word=word, features=features)
    return Lexicon(entries=entries)


def random_rows(lexicon: Lexicon, n_rows: int, seed: int = 0) -> ResponseTable:
    """Uniformly random cue/response rows (1-3 responses, no self-response)."""
    rng = np.random.default_rng(seed)
    words = lexicon.words_sorted()
    rows = []
    for _ in range(n_rows):
        cue = words[int(rng.integers(len(words)))]
        n_resp = int(rng.integers(1, 4))
        candidates = [w for w in words if w != cue]
        picks = rng.choice(len(candidates), size=min(n_resp, len(candidates)), replace=False)
        rows.append(ResponseRow(cue=cue, responses=tuple(candidates[int(i)] for i in picks)))
    return ResponseTable(rows=tuple(rows))


def planted_homophily_rows(lexicon: Lexicon, feature: str, n_rows: int,
                           band_width: float = 0.05, seed: int = 0) -> ResponseTable:
    """Rows whose members share similar values of one feature.

    Each row picks an anchor word and draws responses from the narrow band
    of words closest to the anchor's feature value; the resulting
    hyperedges are strongly homophilous in that feature.
    """
    rng = np.random.default_rng(seed)
    words = lexicon.words_sorted()
    values = np.array([lexicon.value(w, feature) for w in words])
    order = np.argsort(values, kind="stable")
    sorted_words = [words[i] for i in order]
    n = len(sorted_words)
    half = max(2, int(band_width * n))
    rows = []
    for _ in range(n_rows):
        center = int(rng.integers(n))
        lo = max(0, center - half)
        hi = min(n, center + half + 1)
        band = sorted_words[lo:hi]
        cue = band[int(rng.integers(len(band)))]
        others = [w for w in band if w != cue]
        n_resp = int(rng.integers(2, 4))
        picks = rng.choice(len(others), size=min(n_resp, len(others)), replace=False)
        rows.append(ResponseRow(cue=cue, responses=tuple(others[int(i)] for i in picks)))
    return ResponseTable(rows=tuple(rows))


def homophilous_lexicon_and_rows(n_words: int = 120, n_rows: int = 400,
                                 feature: str = "aoa", seed: int = 0):
    """Convenience pair used by the compartmentalization demonstrations."""
    lexicon = random_lexicon(n_words, seed=seed)
    rows = planted_homophily_rows(lexicon, feature, n_rows, seed=seed + 1)
    return lexicon, rows
