from unittest.mock import patch

import numpy as np
import pytest

import neurocrf_cog.ocr_dataset as ocr_dataset
from neurocrf_cog.core import (
    ExperimentSkip,
    InvalidArgumentError,
    LabeledSequence,
    ParseError,
    StructuralError,
)


def _line(letter_id: int, letter: str, next_id: int, pixels=None) -> str:
    pixels = pixels if pixels is not None else [0] * 128
    fields = [str(letter_id), letter, str(next_id), "1", "1", "0", *map(str, pixels)]
    return "\t".join(fields)


def test_parse_line_accepts_trailing_tab() -> None:
    rec = ocr_dataset.parse_ocr_line(_line(7, "q", -1, [1] * 128) + "\t\n")
    assert (rec.letter_id, rec.letter, rec.next_id) == (7, "q", -1)
    assert rec.pixels.shape == (128,)
    assert rec.pixels.sum() == 128


@pytest.mark.parametrize(
    "line, message",
    [
        (_line(1, "a", -1)[:-2], "expected 134 fields"),
        (_line(1, "A", -1), "letter must be one of a-z"),
        (_line(1, "a", -1, [2] + [0] * 127), "pixels must be 0 or 1"),
        (_line(1, "a", -1).replace("1", "x", 1), "bad integer field"),
    ],
)
def test_parse_line_errors(line, message) -> None:
    with pytest.raises(ParseError, match=message):
        ocr_dataset.parse_ocr_line(line)


def test_load_reports_bad_line_number(tmp_path) -> None:
    path = tmp_path / "letter.data"
    path.write_text(_line(1, "a", 2) + "\n" + _line(2, "b", -1)[:-4] + "\n", encoding="utf-8")
    with pytest.raises(ParseError) as exc:
        ocr_dataset.load_ocr_records(path)
    assert exc.value.line == 2


def _records(*triples):
    return [ocr_dataset.parse_ocr_line(_line(*t)) for t in triples]


def test_assemble_words_follows_next_id_chains() -> None:
    # chains may be listed out of order
    words = ocr_dataset.assemble_words(
        _records((3, "o", -1), (1, "h", 4), (2, "g", 3), (4, "i", -1))
    )
    assert ["".join(r.letter for r in w) for w in words] == ["hi", "go"]


@pytest.mark.parametrize(
    "triples, message",
    [
        (((1, "a", 2), (1, "b", -1)), "Duplicate letter id"),
        (((1, "a", 9), (2, "b", -1)), "unknown letter ids"),
        (((1, "a", 2), (2, "b", 1)), "not reachable"),
        (((1, "a", 3), (2, "b", 3), (3, "c", -1)), "reached twice"),
    ],
)
def test_assemble_words_structural_errors(triples, message) -> None:
    with pytest.raises(StructuralError, match=message):
        ocr_dataset.assemble_words(_records(*triples))


def test_load_ocr_builds_word_dataset(ocr_file) -> None:
    ds = ocr_dataset.load_ocr(ocr_file)
    assert ds.feature_dim == 128
    assert ds.alphabet.labels == tuple("abcdegot")
    assert len(ds) == 42
    first = ds.sequences[0]
    assert first.sequence_id == "cat:1"
    assert ocr_dataset.word_text(first, ds.alphabet) == "cat"


def test_words_by_instance_and_peers(ocr_file) -> None:
    words = ocr_dataset.words_by_instance(ocr_dataset.load_ocr(ocr_file))
    assert list(words) == ["bee", "cat", "dog", "go"]
    assert len(words["go"]) == 6
    peers = ocr_dataset.same_length_peers(words, "cat")
    assert len(peers) == 24
    assert ocr_dataset.same_length_peers(words, "go") == []


def test_summary_groups_by_length(ocr_file) -> None:
    rows = ocr_dataset.ocr_dataset_summary(ocr_dataset.load_ocr(ocr_file))
    assert rows == [
        ocr_dataset.WordLengthRow(length=2, words=1, instances=6),
        ocr_dataset.WordLengthRow(length=3, words=3, instances=36),
    ]


def _seqs(n, tag):
    return [LabeledSequence(np.zeros((2, 3)), (0, 0), f"{tag}{i}") for i in range(n)]


def test_partition_splits_two_thirds() -> None:
    word = _seqs(150, "w")
    others = _seqs(200, "o")
    part = ocr_dataset.partition_word_experiment(word, others, 2 / 3, 100, seed=1)
    assert len(part.train) == 100
    assert len(part.self_test) == 50
    assert len(part.nonself) == 100
    assert {s.sequence_id for s in part.train} | {s.sequence_id for s in part.self_test} == {
        s.sequence_id for s in word
    }
    assert len({s.sequence_id for s in part.nonself}) == 100


def test_partition_is_seeded() -> None:
    word, others = _seqs(9, "w"), _seqs(30, "o")
    a = ocr_dataset.partition_word_experiment(word, others, 2 / 3, 5, seed=3)
    b = ocr_dataset.partition_word_experiment(word, others, 2 / 3, 5, seed=3)
    assert [s.sequence_id for s in a.train] == [s.sequence_id for s in b.train]
    assert [s.sequence_id for s in a.nonself] == [s.sequence_id for s in b.nonself]


def test_partition_warns_on_short_nonself_pool() -> None:
    with patch.object(ocr_dataset, "log") as log:
        part = ocr_dataset.partition_word_experiment(_seqs(6, "w"), _seqs(10, "o"), 2 / 3, 100, seed=0)
    assert len(part.nonself) == 10
    log.warning.assert_called_once()


def test_partition_edge_cases() -> None:
    with pytest.raises(ExperimentSkip):
        ocr_dataset.partition_word_experiment(_seqs(6, "w"), [], 2 / 3, 10, seed=0)
    with pytest.raises(InvalidArgumentError):
        ocr_dataset.partition_word_experiment([], _seqs(3, "o"), 2 / 3, 10, seed=0)
    part = ocr_dataset.partition_word_experiment(_seqs(2, "w"), _seqs(3, "o"), 2 / 3, 10, seed=0)
    assert (len(part.train), len(part.self_test)) == (1, 1)
