import os
from pathlib import Path

import pytest

from hyperlex import Lexicon, LexiconEntry, ResponseRow, ResponseTable

TOY_WORDS = ("dog", "box", "cat", "zebra", "elephant")

# norm values for the five-word toy; length is derived from the word itself
TOY_NORMS = {
    "valence":       {"dog": 7.0, "box": 5.0, "cat": 6.5, "zebra": 6.0, "elephant": 6.2},
    "arousal":       {"dog": 5.0, "box": 3.0, "cat": 4.5, "zebra": 4.0, "elephant": 4.2},
    "dominance":     {"dog": 5.5, "box": 4.0, "cat": 5.0, "zebra": 4.8, "elephant": 6.0},
    "semantic_size": {"dog": 4.0, "box": 3.5, "cat": 3.8, "zebra": 4.5, "elephant": 6.5},
    "concreteness":  {"dog": 6.9, "box": 6.5, "cat": 6.8, "zebra": 6.7, "elephant": 6.6},
    "gender":        {"dog": 4.5, "box": 4.0, "cat": 3.5, "zebra": 4.2, "elephant": 4.4},
    "aoa":           {"dog": 2.0, "box": 3.0, "cat": 2.2, "zebra": 4.0, "elephant": 3.5},
    "familiarity":   {"dog": 6.8, "box": 6.5, "cat": 6.7, "zebra": 5.0, "elephant": 5.5},
    "frequency":     {"dog": 400, "box": 300, "cat": 350, "zebra": 20, "elephant": 60},
    "polysemy":      {"dog": 7, "box": 9, "cat": 8, "zebra": 2, "elephant": 2},
}

TOY_ROWS = (
    ("dog", "box", "cat", ""),
    ("zebra", "dog", "box", "NA"),
    ("dog", "zebra", "elephant", ""),
)


def write_toy_files(root: Path) -> dict[str, Path]:
    responses = root / "responses.tsv"
    lines = ["cue\tR1\tR2\tR3"]
    for cue, r1, r2, r3 in TOY_ROWS:
        lines.append(f"{cue}\t{r1}\t{r2}\t{r3}")
    responses.write_text("\n".join(lines) + "\n", encoding="utf-8")

    ratings = root / "ratings.csv"
    rating_cols = ["valence", "arousal", "dominance", "semantic_size",
                   "concreteness", "gender", "aoa", "familiarity"]
    lines = ["word," + ",".join(rating_cols)]
    for w in TOY_WORDS:
        lines.append(w + "," + ",".join(str(TOY_NORMS[c][w]) for c in rating_cols))
    ratings.write_text("\n".join(lines) + "\n", encoding="utf-8")

    counts = root / "counts.csv"
    lines = ["word,frequency,polysemy"]
    for w in TOY_WORDS:
        lines.append(f"{w},{TOY_NORMS['frequency'][w]},{TOY_NORMS['polysemy'][w]}")
    counts.write_text("\n".join(lines) + "\n", encoding="utf-8")

    cover = root / "cover.tsv"
    cover.write_text("dog\tdog\tbox\tcat\ndog\tdog\tzebra\telephant\n", encoding="utf-8")
    return {"responses": responses, "ratings": ratings, "counts": counts, "cover": cover}


@pytest.fixture(scope="session")
def toy_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    return write_toy_files(root)


def make_toy_lexicon(**overrides) -> Lexicon:
    """In-memory toy lexicon; overrides map feature -> {word: value}."""
    import math

    entries = {}
    for w in TOY_WORDS:
        feats = {}
        for name, per_word in TOY_NORMS.items():
            if name == "frequency":
                feats["log_frequency"] = math.log1p(per_word[w])
            else:
                feats[name] = float(per_word[w])
        feats["length"] = float(len(w))
        for name, per_word in overrides.items():
            feats[name] = float(per_word[w])
        entries[w] = LexiconEntry(word=w, features=feats)
    return Lexicon(entries=entries)


def make_toy_rows() -> ResponseTable:
    return ResponseTable(rows=(
        ResponseRow("dog", ("box", "cat")),
        ResponseRow("zebra", ("dog", "box")),
        ResponseRow("dog", ("zebra", "elephant")),
    ))


@pytest.fixture
def toy_lexicon():
    return make_toy_lexicon()


@pytest.fixture
def toy_rows():
    return make_toy_rows()


@pytest.fixture(scope="session")
def real_data_dir():
    """Directory with full-scale responses.tsv and norms CSVs, if provided."""
    path = os.environ.get("HYPERLEX_DATA_DIR")
    if not path:
        pytest.skip("HYPERLEX_DATA_DIR not set; full-scale data checks skipped "
                    "(see README, section 'Real data')")
    root = Path(path)
    responses = root / "responses.tsv"
    if not responses.exists():
        pytest.skip(f"{responses} not found; full-scale data checks skipped")
    norms = sorted(root.glob("norms*.csv"))
    if not norms:
        pytest.skip(f"no norms*.csv under {root}; full-scale data checks skipped")
    return {"responses": responses, "norms": norms}
