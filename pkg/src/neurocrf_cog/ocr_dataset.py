"""
OCR letter file loading and per-word experiment partitioning.

Input is one letter record per line, tab separated:

    id  letter  next_id  word_id  position  fold  p_0 ... p_127

Pixels are the 16×8 raster in row-major order. Words are rebuilt by
following next_id links from each chain head until next_id == -1. The fold
column is read but not used for splitting.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt
from mini_app_polis import logger as logger_mod

from neurocrf_cog.core import (
    Dataset,
    ExperimentSkip,
    InsufficientDataError,
    InvalidArgumentError,
    LabelAlphabet,
    LabeledSequence,
    ParseError,
    StructuralError,
    split_count,
)

log = logger_mod.get_logger()

PIXELS = 128
_FIXED_FIELDS = 6


@dataclass(frozen=True, eq=False)
class OcrRecord:
    letter_id: int
    letter: str
    next_id: int
    word_id: int
    position: int
    fold: int
    pixels: npt.NDArray[np.float64]


@dataclass(frozen=True)
class WordPartition:
    train: tuple[LabeledSequence, ...]
    self_test: tuple[LabeledSequence, ...]
    nonself: tuple[LabeledSequence, ...]


@dataclass(frozen=True)
class WordLengthRow:
    length: int
    words: int
    instances: int


def parse_ocr_line(line: str, *, path: str | None = None, lineno: int | None = None) -> OcrRecord:
    fields = line.rstrip("\r\n").rstrip("\t").split("\t")
    if len(fields) != _FIXED_FIELDS + PIXELS:
        raise ParseError(
            f"expected {_FIXED_FIELDS + PIXELS} fields, got {len(fields)}", path=path, line=lineno
        )
    try:
        letter_id, next_id, word_id, position, fold = (
            int(fields[0]),
            int(fields[2]),
            int(fields[3]),
            int(fields[4]),
            int(fields[5]),
        )
        pixels = np.array([int(v) for v in fields[_FIXED_FIELDS:]], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"bad integer field: {exc}", path=path, line=lineno) from None
    letter = fields[1].strip()
    if len(letter) != 1 or not ("a" <= letter <= "z"):
        raise ParseError(f"letter must be one of a-z, got {letter!r}", path=path, line=lineno)
    if not np.all((pixels == 0.0) | (pixels == 1.0)):
        raise ParseError("pixels must be 0 or 1", path=path, line=lineno)
    return OcrRecord(letter_id, letter, next_id, word_id, position, fold, pixels)


def load_ocr_records(path: str | Path) -> list[OcrRecord]:
    path = Path(path)
    records = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            records.append(parse_ocr_line(line, path=str(path), lineno=lineno))
    return records


def assemble_words(records: Sequence[OcrRecord]) -> list[list[OcrRecord]]:
    """Follow next_id chains; every record must belong to exactly one word."""
    by_id: dict[int, OcrRecord] = {}
    for rec in records:
        if rec.letter_id in by_id:
            raise StructuralError(f"Duplicate letter id {rec.letter_id}")
        by_id[rec.letter_id] = rec

    pointed_to = {rec.next_id for rec in records if rec.next_id != -1}
    missing = sorted(pointed_to - by_id.keys())
    if missing:
        raise StructuralError(f"next_id points at unknown letter ids: {missing[:10]}")

    words: list[list[OcrRecord]] = []
    visited: set[int] = set()
    for rec in records:
        if rec.letter_id in pointed_to:
            continue
        chain = []
        cur: OcrRecord | None = rec
        while cur is not None:
            if cur.letter_id in visited:
                raise StructuralError(f"Letter id {cur.letter_id} reached twice")
            visited.add(cur.letter_id)
            chain.append(cur)
            cur = by_id[cur.next_id] if cur.next_id != -1 else None
        words.append(chain)

    if len(visited) != len(by_id):
        raise StructuralError(
            f"{len(by_id) - len(visited)} letter records are not reachable from a word start"
        )
    return words


def word_text(seq: LabeledSequence, alphabet: LabelAlphabet) -> str:
    return "".join(alphabet.decode(seq.labels))


def load_ocr(path: str | Path) -> Dataset:
    """Load the letter file as one dataset of word instances over the letters seen."""
    records = load_ocr_records(path)
    if not records:
        raise InsufficientDataError(f"No letter records in {path}")
    words = assemble_words(records)
    alphabet = LabelAlphabet(tuple(sorted({rec.letter for rec in records})))
    sequences = []
    for chain in words:
        text = "".join(rec.letter for rec in chain)
        sequences.append(
            LabeledSequence(
                observations=np.stack([rec.pixels for rec in chain]),
                labels=alphabet.encode([rec.letter for rec in chain]),
                sequence_id=f"{text}:{chain[0].letter_id}",
            )
        )
    log.info(
        "✅ Loaded %d letters as %d word instances from %s", len(records), len(sequences), path
    )
    return Dataset(alphabet, tuple(sequences), PIXELS)


def words_by_instance(dataset: Dataset) -> dict[str, list[LabeledSequence]]:
    """Word text -> its instances, keys sorted."""
    grouped: dict[str, list[LabeledSequence]] = defaultdict(list)
    for seq in dataset.sequences:
        grouped[word_text(seq, dataset.alphabet)].append(seq)
    return {word: grouped[word] for word in sorted(grouped)}


def same_length_peers(
    words: Mapping[str, Sequence[LabeledSequence]], word: str
) -> list[LabeledSequence]:
    """Instances of every other word with the same number of letters."""
    return [
        seq
        for other, instances in words.items()
        if other != word and len(other) == len(word)
        for seq in instances
    ]


def partition_word_experiment(
    word_instances: Sequence[LabeledSequence],
    other_words_same_length: Sequence[LabeledSequence],
    ratio: float,
    nonself_count: int,
    seed: int,
) -> WordPartition:
    if not word_instances:
        raise InvalidArgumentError("word_instances must not be empty")
    if not other_words_same_length:
        raise ExperimentSkip("No other words of the same length to test against")
    if nonself_count < 1:
        raise InvalidArgumentError("nonself_count must be >= 1")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(word_instances))
    n_train = split_count(len(word_instances), ratio)
    shuffled = [word_instances[int(i)] for i in order]

    pool = len(other_words_same_length)
    take = min(nonself_count, pool)
    if take < nonself_count:
        log.warning("⚠️ Only %d non-self instances available (wanted %d)", pool, nonself_count)
    picks = rng.choice(pool, size=take, replace=False)

    return WordPartition(
        train=tuple(shuffled[:n_train]),
        self_test=tuple(shuffled[n_train:]),
        nonself=tuple(other_words_same_length[int(i)] for i in picks),
    )


def ocr_dataset_summary(dataset: Dataset) -> list[WordLengthRow]:
    """Per word length: distinct words and total instances."""
    words = words_by_instance(dataset)
    lengths: dict[int, list[str]] = defaultdict(list)
    for word in words:
        lengths[len(word)].append(word)
    return [
        WordLengthRow(
            length=length,
            words=len(lengths[length]),
            instances=sum(len(words[w]) for w in lengths[length]),
        )
        for length in sorted(lengths)
    ]
