"""
Event-log sessions: segmentation, n-gram vocabulary, featurization, splits
and descriptive statistics.

An event log is a CSV with header ``user,timestamp,label,text``; timestamps
are integer epoch seconds. A user's events split into a new session
whenever the gap to the previous event exceeds the session gap (one hour
by default). Sessions of length 4-6 become labelled sequences; longer ones
are truncated to their first 6 events.

Each event becomes a binary vector:

    [24 hour-of-day bits | 7 day-of-week bits | one bit per vocabulary n-gram]
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd
import pytz
from mini_app_polis import logger as logger_mod
from scipy import stats

import neurocrf_cog.config as config
from neurocrf_cog.core import (
    Dataset,
    InsufficientDataError,
    InvalidArgumentError,
    LabelAlphabet,
    LabeledSequence,
    ParseError,
    split_count,
)

log = logger_mod.get_logger()

HOURS = 24
DAYS = 7
TIME_FEATURES = HOURS + DAYS
EVENT_LOG_COLUMNS = ["user", "timestamp", "label", "text"]

EventSequence = tuple["SessionEvent", ...]


@dataclass(frozen=True)
class SessionEvent:
    user: str
    timestamp: int
    label: str
    text: str = ""

    def __post_init__(self) -> None:
        if self.timestamp < 0:
            raise InvalidArgumentError(f"Negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class Session:
    user: str
    events: tuple[SessionEvent, ...]

    def __post_init__(self) -> None:
        if not self.events:
            raise InvalidArgumentError("A session needs at least one event")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def start(self) -> int:
        return self.events[0].timestamp

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.events)


@dataclass(frozen=True)
class NgramVocabulary:
    per_label: dict[str, tuple[str, ...]]
    n_range: tuple[int, int] = (1, 2)
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        lo, hi = self.n_range
        if not 1 <= lo <= hi:
            raise InvalidArgumentError(f"Invalid n-gram range {self.n_range}")
        # labels in sorted order, n-grams in rank order; shared n-grams keep their first slot
        index: dict[str, int] = {}
        for label in sorted(self.per_label):
            for gram in self.per_label[label]:
                index.setdefault(gram, len(index))
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.index)

    @property
    def feature_dim(self) -> int:
        return TIME_FEATURES + len(self.index)


@dataclass(frozen=True)
class SessionLengthRow:
    length: str
    entropy: float | None
    sessions: int
    unique_labels: int


# ---------------------------------------------------------------------------
# Loading and segmentation
# ---------------------------------------------------------------------------


def load_event_log(path: str | Path) -> list[SessionEvent]:
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            dtype={"user": str, "label": str, "text": str, "timestamp": str},
            keep_default_na=False,
            encoding="utf-8",
        )
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ParseError(str(exc), path=str(path)) from None
    except pd.errors.EmptyDataError:
        raise ParseError("empty event log", path=str(path)) from None

    missing = [c for c in EVENT_LOG_COLUMNS if c not in frame.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", path=str(path), line=1)

    events = []
    for offset, row in enumerate(frame[EVENT_LOG_COLUMNS].itertuples(index=False)):
        lineno = offset + 2
        try:
            timestamp = int(row.timestamp)
        except ValueError:
            raise ParseError(
                f"timestamp must be an integer, got {row.timestamp!r}", path=str(path), line=lineno
            ) from None
        if timestamp < 0 or not row.user or not row.label:
            raise ParseError(
                "user and label are required and timestamp must be >= 0",
                path=str(path),
                line=lineno,
            )
        events.append(SessionEvent(row.user, timestamp, row.label, row.text))
    log.info("✅ Loaded %d events for %d users from %s", len(events), len({e.user for e in events}), path)
    return events


def save_event_log(events: Iterable[SessionEvent], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [(e.user, e.timestamp, e.label, e.text) for e in events], columns=EVENT_LOG_COLUMNS
    )
    frame.to_csv(path, index=False, encoding="utf-8")
    return path


def events_by_user(events: Iterable[SessionEvent]) -> dict[str, list[SessionEvent]]:
    grouped: dict[str, list[SessionEvent]] = defaultdict(list)
    for event in events:
        grouped[event.user].append(event)
    return {user: grouped[user] for user in sorted(grouped)}


def segment_sessions(
    events: Iterable[SessionEvent], gap_seconds: int = config.SESSION_GAP_SECONDS
) -> list[Session]:
    """Split one user's events wherever consecutive events are more than gap_seconds apart."""
    ordered = sorted(events, key=lambda e: e.timestamp)
    sessions: list[Session] = []
    current: list[SessionEvent] = []
    for event in ordered:
        if current and event.timestamp - current[-1].timestamp > gap_seconds:
            sessions.append(Session(current[0].user, tuple(current)))
            current = []
        current.append(event)
    if current:
        sessions.append(Session(current[0].user, tuple(current)))
    return sessions


def sessions_to_sequences(
    sessions: Iterable[Session],
    min_len: int = config.MIN_SESSION_LEN,
    max_len: int = config.MAX_SESSION_LEN,
) -> list[EventSequence]:
    if not 1 <= min_len <= max_len:
        raise InvalidArgumentError(f"Need 1 <= min_len <= max_len, got {min_len}, {max_len}")
    return [s.events[:max_len] for s in sessions if len(s) >= min_len]


# ---------------------------------------------------------------------------
# Vocabulary and features
# ---------------------------------------------------------------------------


def tokenize(text: str) -> list[str]:
    return text.lower().split()


def text_ngrams(text: str, n_range: tuple[int, int] = (1, 2)) -> list[str]:
    tokens = tokenize(text)
    lo, hi = n_range
    return [
        " ".join(tokens[i : i + n]) for n in range(lo, hi + 1) for i in range(len(tokens) - n + 1)
    ]


def build_ngram_vocab(
    events: Iterable[SessionEvent],
    n_range: tuple[int, int] = (1, 2),
    cap_per_label: int = config.NGRAM_CAP,
) -> NgramVocabulary:
    """Top n-grams per label by count, ties broken lexicographically."""
    if cap_per_label < 1:
        raise InvalidArgumentError("cap_per_label must be >= 1")
    counts: dict[str, Counter[str]] = defaultdict(Counter)
    for event in events:
        counts[event.label].update(text_ngrams(event.text, n_range))
    per_label = {
        label: tuple(
            gram for gram, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:cap_per_label]
        )
        for label, counter in counts.items()
    }
    return NgramVocabulary(per_label=per_label, n_range=n_range)


def _zone(tz: str | pytz.BaseTzInfo | None) -> pytz.BaseTzInfo:
    if tz is None:
        tz = config.TIMEZONE
    if isinstance(tz, str):
        try:
            return pytz.timezone(tz)
        except pytz.UnknownTimeZoneError:
            raise InvalidArgumentError(f"Unknown timezone {tz!r}") from None
    return tz


def featurize_event(
    event: SessionEvent, vocab: NgramVocabulary, tz: str | pytz.BaseTzInfo | None = None
) -> np.ndarray:
    when = datetime.fromtimestamp(event.timestamp, tz=_zone(tz))
    vec = np.zeros(vocab.feature_dim, dtype=np.float64)
    vec[when.hour] = 1.0
    vec[HOURS + when.weekday()] = 1.0
    for gram in text_ngrams(event.text, vocab.n_range):
        idx = vocab.index.get(gram)
        if idx is not None:
            vec[TIME_FEATURES + idx] = 1.0
    return vec


def session_alphabet(event_lists: Iterable[Sequence[SessionEvent]]) -> LabelAlphabet:
    """Labels seen in training, sorted, plus the reserved unknown label last."""
    seen = {e.label for events in event_lists for e in events}
    seen.discard(config.UNKNOWN_LABEL)
    return LabelAlphabet((*sorted(seen), config.UNKNOWN_LABEL))


def sequence_id(events: Sequence[SessionEvent]) -> str:
    return f"{events[0].user}:{events[0].timestamp}"


def sequences_to_dataset(
    event_lists: Iterable[Sequence[SessionEvent]],
    vocab: NgramVocabulary,
    alphabet: LabelAlphabet,
    tz: str | pytz.BaseTzInfo | None = None,
) -> Dataset:
    zone = _zone(tz)
    unknown = alphabet.index(config.UNKNOWN_LABEL)
    sequences = []
    for events in event_lists:
        labels = [
            alphabet.index(e.label) if e.label in alphabet.labels else unknown for e in events
        ]
        sequences.append(
            LabeledSequence(
                observations=np.stack([featurize_event(e, vocab, zone) for e in events]),
                labels=tuple(labels),
                sequence_id=sequence_id(events),
            )
        )
    return Dataset(alphabet, tuple(sequences), vocab.feature_dim)


def temporal_split(
    sequences: Sequence[EventSequence],
    train_fraction: float = config.SESSION_TRAIN_FRACTION,
) -> tuple[list[EventSequence], list[EventSequence]]:
    """Earliest sequences to train, latest to test; ties keep input order."""
    if len(sequences) < 2:
        raise InsufficientDataError(f"Need at least 2 sequences to split, got {len(sequences)}")
    ordered = sorted(sequences, key=lambda events: events[0].timestamp)
    n_train = split_count(len(ordered), train_fraction)
    return ordered[:n_train], ordered[n_train:]


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def _entropy_bits(labels: Sequence[Hashable]) -> float:
    if not labels:
        raise InvalidArgumentError("Entropy of an empty label distribution is undefined")
    counts = np.array(list(Counter(labels).values()), dtype=np.float64)
    return float(stats.entropy(counts, base=2))


def label_entropy(
    sequences: Iterable[Sequence[Hashable]],
    position: int | None = None,
    *,
    length: int | None = None,
) -> float:
    """
    Shannon entropy (bits) of labels either at one position across the
    sequences reaching it, or pooled over the sequences of exactly ``length``.
    """
    if (position is None) == (length is None):
        raise InvalidArgumentError("Pass exactly one of position or length")
    seqs = [tuple(s) for s in sequences]
    if position is not None:
        if position < 0:
            raise InvalidArgumentError("position must be >= 0")
        labels = [s[position] for s in seqs if len(s) > position]
    else:
        labels = [y for s in seqs if len(s) == length for y in s]
    return _entropy_bits(labels)


def session_length_summary(
    sessions: Iterable[Session], max_len: int = config.MAX_SESSION_LEN
) -> list[SessionLengthRow]:
    """Rows for lengths 1..max_len and one ">max_len" bucket without entropy."""
    cohorts: dict[int, list[Session]] = defaultdict(list)
    longer: list[Session] = []
    for s in sessions:
        (longer if len(s) > max_len else cohorts[len(s)]).append(s)

    rows = []
    for n in range(1, max_len + 1):
        labels = [y for s in cohorts[n] for y in s.labels]
        rows.append(
            SessionLengthRow(
                length=str(n),
                entropy=_entropy_bits(labels) if labels else None,
                sessions=len(cohorts[n]),
                unique_labels=len(set(labels)),
            )
        )
    rows.append(
        SessionLengthRow(
            length=f">{max_len}",
            entropy=None,
            sessions=len(longer),
            unique_labels=len({y for s in longer for y in s.labels}),
        )
    )
    return rows


def label_frequency_by_position(
    sessions: Iterable[Session], top_k: int = 5, max_len: int = config.MAX_SESSION_LEN
) -> dict[int, dict[str, float]]:
    """Relative frequency of the top_k most common labels at each session position."""
    sessions = list(sessions)
    overall = Counter(y for s in sessions for y in s.labels)
    top = [label for label, _ in sorted(overall.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]]
    out: dict[int, dict[str, float]] = {}
    for pos in range(max_len):
        at_pos = [s.labels[pos] for s in sessions if len(s) > pos]
        if not at_pos:
            break
        counts = Counter(at_pos)
        out[pos] = {label: counts[label] / len(at_pos) for label in top}
    return out


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def save_vocab(vocab: NgramVocabulary, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "n_range": list(vocab.n_range),
        "per_label": {label: list(vocab.per_label[label]) for label in sorted(vocab.per_label)},
    }
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_vocab(path: str | Path) -> NgramVocabulary:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        lo, hi = payload["n_range"]
        per_label = {str(k): tuple(str(g) for g in v) for k, v in payload["per_label"].items()}
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad vocabulary file: {exc}", path=str(path)) from None
    return NgramVocabulary(per_label=per_label, n_range=(int(lo), int(hi)))


def save_split_manifest(splits: Mapping[str, Iterable[str]], path: str | Path) -> Path:
    """One ``split,item`` row per member, splits in the given order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [(name, item) for name, items in splits.items() for item in items]
    pd.DataFrame(rows, columns=["split", "item"]).to_csv(path, index=False)
    return path
