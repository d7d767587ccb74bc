"""
Domain types shared across neurocrf-cog.

Observations are binary indicator vectors. A sequence stores its
observations as one read-only (n, d) float array so the decoder and the
training loops can slice rows without copying. Everything here is frozen
after construction.
"""

from __future__ import annotations

import enum
import hashlib
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

import neurocrf_cog.config as config

Observation = npt.NDArray[np.float64]


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class NeuroCrfError(Exception):
    """Base class for all neurocrf-cog errors."""


class InvalidArgumentError(NeuroCrfError, ValueError):
    pass


class ParseError(NeuroCrfError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(f"{where}{message}")


class StructuralError(NeuroCrfError):
    pass


class DegenerateFitError(NeuroCrfError):
    pass


class InsufficientDataError(NeuroCrfError):
    pass


class ExperimentSkip(NeuroCrfError):
    """Raised when an experiment unit cannot run (e.g. no non-self peers)."""


class ModelDataMismatchError(InvalidArgumentError):
    """Model and data disagree on feature dimension or label alphabet."""


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


class Architecture(enum.StrEnum):
    CRF_MLP = "crf-mlp"
    CRF_RNN = "crf-rnn"
    CRF_PRCPT = "crf-prcpt"

    @classmethod
    def parse(cls, value: str) -> Architecture:
        key = value.strip().lower().replace("_", "-")
        for arch in cls:
            if arch.value == key:
                return arch
        raise InvalidArgumentError(f"Unknown architecture: {value!r}")


@dataclass(frozen=True)
class LabelAlphabet:
    labels: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        if not labels:
            raise InvalidArgumentError("Label alphabet must not be empty")
        if len(set(labels)) != len(labels):
            raise InvalidArgumentError(f"Duplicate label names in alphabet: {labels}")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(labels)})

    @property
    def start_index(self) -> int:
        """Edge-input slot reserved for START; never a decode output."""
        return len(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise InvalidArgumentError(f"Label {label!r} is not in the alphabet") from None

    def label(self, i: int) -> str:
        if not 0 <= i < len(self.labels):
            raise InvalidArgumentError(f"Label index {i} out of range")
        return self.labels[i]

    def encode(self, labels: Sequence[str]) -> tuple[int, ...]:
        return tuple(self.index(name) for name in labels)

    def decode(self, indices: Sequence[int]) -> list[str]:
        return [self.label(i) for i in indices]


def as_observations(values: Any) -> npt.NDArray[np.float64]:
    """Coerce to a read-only (n, d) array of 0/1 floats."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"Observations must be 2-D, got shape {arr.shape}")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise InvalidArgumentError("Observation features must be binary (0/1)")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    observations: npt.NDArray[np.float64]
    labels: tuple[int, ...]
    sequence_id: str = ""

    def __post_init__(self) -> None:
        obs = as_observations(self.observations)
        labels = tuple(int(y) for y in self.labels)
        if len(labels) < 1:
            raise InvalidArgumentError(f"Sequence {self.sequence_id!r} is empty")
        if obs.shape[0] != len(labels):
            raise InvalidArgumentError(
                f"Sequence {self.sequence_id!r}: {obs.shape[0]} observations "
                f"but {len(labels)} labels"
            )
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return int(self.observations.shape[1])


@dataclass(frozen=True, eq=False)
class Dataset:
    alphabet: LabelAlphabet
    sequences: tuple[LabeledSequence, ...]
    feature_dim: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "sequences", tuple(self.sequences))
        self.validate()

    def validate(self) -> None:
        n_labels = len(self.alphabet)
        for seq in self.sequences:
            if seq.feature_dim != self.feature_dim:
                raise InvalidArgumentError(
                    f"Sequence {seq.sequence_id!r} has dimension {seq.feature_dim}, "
                    f"expected {self.feature_dim}"
                )
            bad = [y for y in seq.labels if not 0 <= y < n_labels]
            if bad:
                raise InvalidArgumentError(
                    f"Sequence {seq.sequence_id!r} has labels outside the alphabet: {bad}"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    def subset(self, sequences: Sequence[LabeledSequence]) -> Dataset:
        return Dataset(self.alphabet, tuple(sequences), self.feature_dim)


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float = config.LEARNING_RATE
    regularization: float = config.REGULARIZATION
    max_sgd_examples: int = config.MAX_SGD_EXAMPLES
    init_stddev: float = config.INIT_STDDEV
    minibatch: int = config.MINIBATCH
    rng_seed: int = config.RNG_SEED

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be > 0")
        if not self.regularization >= 0:
            raise InvalidArgumentError("regularization must be >= 0")
        if self.max_sgd_examples < 1:
            raise InvalidArgumentError("max_sgd_examples must be >= 1")
        if not self.init_stddev > 0:
            raise InvalidArgumentError("init_stddev must be > 0")
        if self.minibatch < 1:
            raise InvalidArgumentError("minibatch must be >= 1")


@dataclass(frozen=True)
class ModelDescriptor:
    architecture: Architecture
    feature_dim: int
    num_labels: int
    hidden_size: int = 0
    hyperparameters: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self) -> None:
        if self.feature_dim < 1 or self.num_labels < 1:
            raise InvalidArgumentError("feature_dim and num_labels must be >= 1")
        if self.architecture is not Architecture.CRF_PRCPT and self.hidden_size <= 0:
            raise InvalidArgumentError(
                f"{self.architecture.value} requires hidden_size > 0"
            )

    @classmethod
    def for_dataset(
        cls,
        architecture: Architecture,
        dataset: Dataset,
        hyperparameters: HyperParams | None = None,
    ) -> ModelDescriptor:
        n_labels = len(dataset.alphabet)
        hidden = (
            0
            if architecture is Architecture.CRF_PRCPT
            else hidden_size(dataset.feature_dim, n_labels)
        )
        return cls(
            architecture=architecture,
            feature_dim=dataset.feature_dim,
            num_labels=n_labels,
            hidden_size=hidden,
            hyperparameters=hyperparameters or HyperParams(),
        )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def hidden_size(n_inputs: int, n_outputs: int) -> int:
    """Hidden width (n_inputs + n_outputs) / 4, floored, at least 1."""
    if n_inputs < 1 or n_outputs < 1:
        raise InvalidArgumentError("hidden_size needs n_inputs >= 1 and n_outputs >= 1")
    return max(1, (n_inputs + n_outputs) // 4)


def one_hot(index: int, size: int) -> npt.NDArray[np.float64]:
    """Length size+1 indicator; index == size is the START slot."""
    if not 0 <= index <= size:
        raise InvalidArgumentError(f"one_hot index {index} outside [0, {size}]")
    vec = np.zeros(size + 1, dtype=np.float64)
    vec[index] = 1.0
    return vec


def derive_seed(base_seed: int, iteration: int, key: str = "") -> int:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return (base_seed + iteration + int.from_bytes(digest[:4], "big")) % 2**32


def split_count(n: int, ratio: float) -> int:
    """ceil(ratio * n), clamped so both sides keep at least one item."""
    if not 0.0 < ratio < 1.0:
        raise InvalidArgumentError(f"ratio must be in (0, 1), got {ratio}")
    if n < 2:
        raise InsufficientDataError(f"Need at least 2 items to split, got {n}")
    # the epsilon keeps 2/3 * 150 at 100
    return min(n - 1, max(1, math.ceil(ratio * n - 1e-9)))
