"""
Synthetic event logs with user-distinct habits over a shared topic pool.

All users talk about the same topics with the same words, so the label
evidence in a post says nothing about who wrote it. What differs is habit:
each user posts on their own weekday at their own hour, files posts under
their own label names and signs every post with a personal tag after a
shared ``--`` separator. Every kept session visits each topic equally often
and is long enough to be cut to exactly the maximum session length, so
sequence scores are comparable across users. Some sessions are shorter than
the minimum length so the length filter is exercised too.
"""

from __future__ import annotations

import numpy as np
from mini_app_polis import logger as logger_mod

from neurocrf_cog import config
from neurocrf_cog.core import InvalidArgumentError
from neurocrf_cog.sessions import SessionEvent

log = logger_mod.get_logger()

EPOCH_START = 1_704_067_200  # 2024-01-01 00:00 UTC, a Monday
DAY = 86_400
WEEK = 7 * DAY
SIGN_OFF = "--"


def topic_words(topic: int, words_per_topic: int) -> list[str]:
    return [f"t{topic}w{j}" for j in range(words_per_topic)]


def _balanced_labels(rng: np.random.Generator, n_topics: int, length: int) -> list[int]:
    order: list[int] = []
    while len(order) < length:
        order.extend(int(k) for k in rng.permutation(n_topics))
    return order[:length]


def generate_synthetic_event_log(
    n_users: int = 5,
    seed: int = 0,
    *,
    sessions_per_user: int = 40,
    topics: int = 3,
    words_per_topic: int = 4,
    session_len: int = config.MAX_SESSION_LEN,
    short_session_share: float = 0.2,
    event_spacing_seconds: int = 300,
) -> list[SessionEvent]:
    if n_users < 1 or sessions_per_user < 1 or topics < 1 or words_per_topic < 2:
        raise InvalidArgumentError(
            "n_users, sessions_per_user and topics must be >= 1 and words_per_topic >= 2"
        )
    if session_len < 4:
        raise InvalidArgumentError("session_len must be >= 4")
    if not 0.0 <= short_session_share < 1.0:
        raise InvalidArgumentError("short_session_share must be in [0, 1)")
    # A long session plus its start jitter must stay inside one hour.
    if not 0 < event_spacing_seconds * (session_len + 1) <= 3000:
        raise InvalidArgumentError("event_spacing_seconds out of range")

    rng = np.random.default_rng(seed)
    vocab = [topic_words(k, words_per_topic) for k in range(topics)]
    events: list[SessionEvent] = []
    for u in range(n_users):
        user = f"user{u:02d}"
        labels = [f"{user}_topic{k}" for k in range(topics)]
        hour = (u * 24 // n_users) % 24
        weekday = u % 7

        for s in range(sessions_per_user):
            length = (
                int(rng.integers(1, 4))
                if rng.random() < short_session_share
                else int(rng.integers(session_len, session_len + 3))
            )
            start = EPOCH_START + weekday * DAY + s * WEEK + hour * 3600 + int(rng.integers(0, 600))
            for i, k in enumerate(_balanced_labels(rng, topics, length)):
                words = rng.choice(vocab[k], size=2, replace=False)
                events.append(
                    SessionEvent(
                        user=user,
                        timestamp=start + i * event_spacing_seconds,
                        label=labels[k],
                        text=" ".join([*(str(w) for w in words), SIGN_OFF, user]),
                    )
                )

    events.sort(key=lambda e: (e.timestamp, e.user))
    log.info("✅ Generated %d synthetic events for %d users (seed %d)", len(events), n_users, seed)
    return events
