"""Ingestion of free-association responses and psycholinguistic norm tables.

Input formats:

* responses: UTF-8 TSV with a header row naming a cue column and up to
  three response columns (``cue``, ``R1``, ``R2``, ``R3``); a blank cell
  or the literal marker ``NA`` means "no response given".
* norms: UTF-8 CSV keyed by a ``word`` column, one column per feature.
  Several files may each contribute a subset of the features; they are
  merged with inner-join semantics (a word must be covered by every
  feature to survive).

Tokens are normalized by lowercasing and whitespace trimming only.
Word length is always derived from the normalized word itself, and a raw
``frequency`` column is converted to ``log_frequency`` on the way in.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

#: Canonical feature order used by every downstream module.
FEATURE_NAMES: tuple[str, ...] = (
    "valence",
    "arousal",
    "dominance",
    "semantic_size",
    "concreteness",
    "gender",
    "aoa",
    "familiarity",
    "log_frequency",
    "polysemy",
    "length",
)

# Features that must be supplied by some norms file (length is derived,
# log_frequency may arrive as a raw "frequency" count instead).
_SUPPLIED_FEATURES = tuple(f for f in FEATURE_NAMES if f != "length")


class DataFormatError(ValueError):
    """An input file is unusable (bad header, no valid rows, ...)."""


def normalize_token(token: str) -> str:
    return token.strip().lower()


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def log_transform_frequency(raw_count: float) -> float:
    """Map a raw occurrence count to ln(1 + count).

    Strictly increasing, maps 0 to 0. Negative counts are rejected.
    """
    if raw_count < 0:
        raise ValueError(f"frequency count must be >= 0, got {raw_count!r}")
    return math.log1p(raw_count)


@dataclass(frozen=True)
class ResponseRow:
    """One participant instance: a cue and its 1-3 surviving responses."""

    cue: str
    responses: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.cue:
            raise ValueError("cue must be non-empty")
        if not 1 <= len(self.responses) <= 3:
            raise ValueError(f"need 1..3 responses, got {len(self.responses)}")

    def words(self) -> tuple[str, ...]:
        return (self.cue,) + self.responses


@dataclass(frozen=True)
class ResponseFormat:
    """Column layout of a responses file."""

    delimiter: str = "\t"
    cue: str = "cue"
    responses: tuple[str, ...] = ("R1", "R2", "R3")
    missing: tuple[str, ...] = ("", "NA")


DEFAULT_RESPONSE_FORMAT = ResponseFormat()


@dataclass
class ResponseTable:
    rows: tuple[ResponseRow, ...]
    skipped: int = 0
    provenance: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def vocabulary(self) -> set[str]:
        vocab: set[str] = set()
        for row in self.rows:
            vocab.add(row.cue)
            vocab.update(row.responses)
        return vocab

    def to_tsv(self, path: str | Path, fmt: ResponseFormat = DEFAULT_RESPONSE_FORMAT) -> None:
        """Serialize; parsing the result back is lossless for valid rows."""
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter=fmt.delimiter, lineterminator="\n")
            writer.writerow([fmt.cue, *fmt.responses])
            for row in self.rows:
                padded = list(row.responses) + [""] * (len(fmt.responses) - len(row.responses))
                writer.writerow([row.cue, *padded])


@dataclass(frozen=True)
class LexiconEntry:
    word: str
    features: dict[str, float]

    def __post_init__(self) -> None:
        missing = [f for f in FEATURE_NAMES if f not in self.features]
        if missing:
            raise ValueError(f"{self.word!r}: missing features {missing}")
        for name, value in self.features.items():
            if not math.isfinite(value):
                raise ValueError(f"{self.word!r}: non-finite {name}={value!r}")
        if self.features["length"] != len(self.word) or len(self.word) < 1:
            raise ValueError(f"{self.word!r}: length feature must equal character count")
        if self.features["log_frequency"] < 0:
            raise ValueError(f"{self.word!r}: log_frequency must be >= 0")
        poly = self.features["polysemy"]
        if poly < 0 or poly != int(poly):
            raise ValueError(f"{self.word!r}: polysemy must be a non-negative integer")


@dataclass
class Lexicon:
    entries: dict[str, LexiconEntry]
    dropped_incomplete: int = 0
    conflicts: int = 0
    provenance: dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: str) -> bool:
        return word in self.entries

    def vocabulary(self) -> set[str]:
        return set(self.entries)

    def value(self, word: str, feature: str) -> float:
        return self.entries[word].features[feature]

    def words_sorted(self) -> tuple[str, ...]:
        return tuple(sorted(self.entries))

    def restrict(self, words: Iterable[str]) -> "Lexicon":
        keep = {w: e for w, e in self.entries.items() if w in set(words)}
        return Lexicon(
            entries=keep,
            dropped_incomplete=self.dropped_incomplete,
            conflicts=self.conflicts,
            provenance=dict(self.provenance),
        )


@dataclass
class FilteredDataset:
    """Responses and lexicon restricted to one shared vocabulary."""

    lexicon: Lexicon
    responses: ResponseTable
    provenance: dict[str, str] = field(default_factory=dict)
    dropped_rows: int = 0
    dropped_response_tokens: int = 0

    @property
    def vocabulary_size(self) -> int:
        return len(self.lexicon)


def parse_responses(
    path: str | Path, fmt: ResponseFormat = DEFAULT_RESPONSE_FORMAT
) -> ResponseTable:
    """Read a responses TSV into one ResponseRow per participant instance.

    Malformed rows (missing cue, no surviving response) are skipped and
    counted; a file with zero valid rows is fatal.
    """
    path = Path(path)
    rows: list[ResponseRow] = []
    skipped = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=fmt.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        lookup = {name.strip().lower(): i for i, name in enumerate(header)}
        if fmt.cue.lower() not in lookup:
            raise DataFormatError(f"{path}: header lacks cue column {fmt.cue!r}")
        cue_idx = lookup[fmt.cue.lower()]
        resp_idx = [lookup[c.lower()] for c in fmt.responses if c.lower() in lookup]
        if not resp_idx:
            raise DataFormatError(f"{path}: header lacks response columns {fmt.responses}")
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) <= cue_idx:
                skipped += 1
                log.warning("%s:%d: short row skipped", path, lineno)
                continue
            cue = normalize_token(record[cue_idx])
            if not cue or record[cue_idx].strip() in fmt.missing:
                skipped += 1
                log.warning("%s:%d: missing cue, row skipped", path, lineno)
                continue
            responses = []
            for idx in resp_idx:
                raw = record[idx].strip() if idx < len(record) else ""
                if raw in fmt.missing:
                    continue
                token = normalize_token(raw)
                if token:
                    responses.append(token)
            if not responses:
                skipped += 1
                log.warning("%s:%d: no responses, row skipped", path, lineno)
                continue
            rows.append(ResponseRow(cue=cue, responses=tuple(responses)))
    if not rows:
        raise DataFormatError(f"{path}: no valid response rows")
    if skipped:
        log.warning("%s: skipped %d malformed rows", path, skipped)
    return ResponseTable(
        rows=tuple(rows), skipped=skipped, provenance={str(path): sha256_file(path)}
    )


def _read_norm_file(path: Path) -> tuple[list[str], list[tuple[str, dict[str, float]]]]:
    """Return (recognized columns, ordered (word, column -> value) records)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "word" not in [f.strip().lower() for f in reader.fieldnames]:
            raise DataFormatError(f"{path}: norms file needs a 'word' column")
        fields = {f.strip().lower(): f for f in reader.fieldnames}
        known = [c for c in fields if c in _SUPPLIED_FEATURES or c == "frequency"]
        ignored = [c for c in fields if c not in known and c != "word"]
        if ignored:
            log.info("%s: ignoring columns %s", path, ignored)
        if not known:
            raise DataFormatError(f"{path}: no recognized feature columns")
        records: list[tuple[str, dict[str, float]]] = []
        for record in reader:
            word = normalize_token(record.get(fields["word"], "") or "")
            if not word:
                continue
            parsed: dict[str, float] = {}
            for col in known:
                raw = (record.get(fields[col]) or "").strip()
                try:
                    val = float(raw)
                except ValueError:
                    continue
                if math.isfinite(val):
                    parsed[col] = val
            records.append((word, parsed))
    return known, records


def parse_norms(paths: Sequence[str | Path]) -> Lexicon:
    """Merge norm CSVs into a lexicon of words with all 11 features.

    Words missing any feature after the merge are dropped (counted).
    Duplicate words with conflicting values keep the first value seen.
    A feature supplied by no file at all is fatal.
    """
    if not paths:
        raise DataFormatError("no norm files given")
    provenance: dict[str, str] = {}
    supplied: set[str] = set()
    merged: dict[str, dict[str, float]] = {}
    conflicts = 0
    for raw_path in paths:
        path = Path(raw_path)
        provenance[str(path)] = sha256_file(path)
        columns, records = _read_norm_file(path)
        supplied.update(columns)
        for word, cols in records:
            slot = merged.setdefault(word, {})
            for col, val in cols.items():
                if col in slot:
                    if slot[col] != val:
                        conflicts += 1
                        log.warning(
                            "duplicate value for %r.%s: keeping %s, ignoring %s",
                            word, col, slot[col], val,
                        )
                else:
                    slot[col] = val
    missing_columns = [
        f for f in _SUPPLIED_FEATURES
        if f not in supplied and not (f == "log_frequency" and "frequency" in supplied)
    ]
    if missing_columns:
        raise DataFormatError(f"no source supplies required columns: {missing_columns}")

    entries: dict[str, LexiconEntry] = {}
    dropped = 0
    for word in sorted(merged):
        cols = merged[word]
        features: dict[str, float] = {}
        ok = True
        for name in _SUPPLIED_FEATURES:
            if name == "log_frequency" and name not in cols:
                if "frequency" in cols and cols["frequency"] >= 0:
                    features[name] = log_transform_frequency(cols["frequency"])
                else:
                    ok = False
                    break
            elif name in cols:
                features[name] = cols[name]
            else:
                ok = False
                break
        if ok:
            poly = features["polysemy"]
            if poly < 0 or poly != int(poly) or features["log_frequency"] < 0:
                ok = False
        if not ok:
            dropped += 1
            continue
        features["length"] = float(len(word))
        entries[word] = LexiconEntry(word=word, features=features)
    if dropped:
        log.warning("norms merge dropped %d words missing some feature", dropped)
    if not entries:
        raise DataFormatError("norms merge produced an empty lexicon")
    return Lexicon(
        entries=entries, dropped_incomplete=dropped, conflicts=conflicts, provenance=provenance
    )


def intersect_vocabulary(responses: ResponseTable, lexicon: Lexicon) -> FilteredDataset:
    """Restrict responses and lexicon to their shared vocabulary.

    Out-of-vocabulary responses are removed from rows, rows whose cue is
    out of vocabulary (or with no surviving response) are removed, and the
    lexicon is restricted to words that still appear somewhere. Applying
    the operation twice equals applying it once.
    """
    if not responses.rows or not lexicon.entries:
        raise DataFormatError("cannot intersect empty inputs")
    vocab = lexicon.vocabulary()
    kept_rows: list[ResponseRow] = []
    dropped_rows = 0
    dropped_tokens = 0
    for row in responses.rows:
        if row.cue not in vocab:
            dropped_rows += 1
            continue
        surviving = tuple(r for r in row.responses if r in vocab)
        dropped_tokens += len(row.responses) - len(surviving)
        if not surviving:
            dropped_rows += 1
            continue
        kept_rows.append(ResponseRow(cue=row.cue, responses=surviving))
    if not kept_rows:
        raise DataFormatError("vocabulary intersection is empty")
    table = ResponseTable(
        rows=tuple(kept_rows),
        skipped=responses.skipped,
        provenance=dict(responses.provenance),
    )
    used = table.vocabulary()
    provenance = {**responses.provenance, **lexicon.provenance}
    dataset = FilteredDataset(
        lexicon=lexicon.restrict(used),
        responses=table,
        provenance=provenance,
        dropped_rows=dropped_rows,
        dropped_response_tokens=dropped_tokens,
    )
    log.info(
        "intersection: %d words, %d rows kept (%d rows, %d response tokens dropped)",
        dataset.vocabulary_size, len(table), dropped_rows, dropped_tokens,
    )
    return dataset
