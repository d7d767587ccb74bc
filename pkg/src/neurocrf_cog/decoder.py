"""
Linear-chain Viterbi decoding over neural factor scores.

Every architecture is reduced to one per-step transition matrix
T_t[prev, y] of shape (|Y|+1) × |Y|, with the START predecessor as the
last row:

  - CRF-MLP:   T_t[p, y] = obs_mlp(x_t)[y] + edge_mlp(one_hot(p))[y]
  - CRF-RNN:   T_t[p, y] = elman(x_t, context_t)[y]          (rows identical)
  - CRF-PRCPT: T_t[p, y] = perceptron(x_t ⊕ one_hot(p))[y]

The RNN context is advanced once per step from the observations only, so
the trellis never depends on label hypotheses. Argmax ties go to the
lowest label index.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import expit, logsumexp

from neurocrf_cog.core import (
    Architecture,
    InvalidArgumentError,
    ModelDataMismatchError,
)
from neurocrf_cog.neural import (
    CrfMlpNets,
    ElmanNet,
    NeuroCrfModel,
    PerceptronNet,
    elman_forward,
    mlp_forward,
)

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]
DecoderState = Vector | None

_BRUTE_FORCE_LIMIT = 2_000_000


@dataclass(frozen=True)
class AlphaEntry:
    to: int
    from_: int
    score: float


@dataclass(eq=False)
class AlphaTable:
    """Trellis: best accumulated score and predecessor per (step, label)."""

    scores: Matrix  # [n × |Y|]
    backpointers: npt.NDArray[np.int64]  # [n × |Y|]; row 0 holds START

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    def step(self, t: int) -> list[AlphaEntry]:
        return [
            AlphaEntry(to=y, from_=int(self.backpointers[t, y]), score=float(self.scores[t, y]))
            for y in range(self.scores.shape[1])
        ]

    @property
    def steps(self) -> list[list[AlphaEntry]]:
        return [self.step(t) for t in range(len(self))]

    def backtrack(self, last_label: int) -> list[int]:
        path = [last_label]
        for t in range(len(self) - 1, 0, -1):
            path.append(int(self.backpointers[t, path[-1]]))
        path.reverse()
        return path


@dataclass(frozen=True)
class DecodeResult:
    labels: tuple[int, ...]
    score: float
    probability: float
    alphas: AlphaTable | None = field(default=None, repr=False, compare=False)


# ---------------------------------------------------------------------------
# Per-step scores
# ---------------------------------------------------------------------------


def initial_state(model: NeuroCrfModel) -> DecoderState:
    if isinstance(model.nets, ElmanNet):
        return model.nets.initial_context()
    return None


def edge_matrix(model: NeuroCrfModel) -> Matrix | None:
    """Edge-network scores for every predecessor one-hot, START last."""
    if not isinstance(model.nets, CrfMlpNets):
        return None
    edge = model.nets.edge
    # one-hot inputs select weight columns, so the batch forward is W1ᵀ + b1
    hidden = expit(edge.hidden.weights.T + edge.hidden.bias)
    return hidden @ edge.output.weights.T + edge.output.bias


def transition_scores(
    model: NeuroCrfModel,
    x_t: Vector,
    state: DecoderState,
    edges: Matrix | None = None,
) -> tuple[Matrix, DecoderState]:
    """Return (T_t, next carried state) for one observation."""
    n_labels = model.num_labels
    nets = model.nets
    match model.architecture:
        case Architecture.CRF_MLP:
            assert isinstance(nets, CrfMlpNets)
            obs_scores, _ = mlp_forward(nets.obs, x_t)
            if edges is None:
                edges = edge_matrix(model)
            assert edges is not None
            return obs_scores[np.newaxis, :] + edges, None
        case Architecture.CRF_RNN:
            assert isinstance(nets, ElmanNet)
            context = nets.initial_context() if state is None else state
            scores, new_context = elman_forward(nets, x_t, context)
            return np.tile(scores, (n_labels + 1, 1)), new_context
        case Architecture.CRF_PRCPT:
            assert isinstance(nets, PerceptronNet)
            d = nets.feature_dim
            x_t = np.asarray(x_t, dtype=np.float64)
            if x_t.shape != (d,):
                raise InvalidArgumentError(
                    f"perceptron observation: expected length {d}, got shape {x_t.shape}"
                )
            weights = nets.output.weights
            base = weights[:, :d] @ x_t + nets.output.bias
            return base[np.newaxis, :] + weights[:, d:].T, None
    raise InvalidArgumentError(f"Unsupported architecture {model.architecture}")


def step_scores(
    model: NeuroCrfModel,
    x_t: Vector,
    prev_label: int,
    carried_state: DecoderState = None,
) -> Vector:
    if not 0 <= prev_label <= model.alphabet.start_index:
        raise InvalidArgumentError(f"Previous label {prev_label} out of range")
    matrix, _ = transition_scores(model, x_t, carried_state)
    return matrix[prev_label].copy()


def _advance(prev_scores: Vector, rows: Matrix) -> tuple[Vector, npt.NDArray[np.int64]]:
    candidates = prev_scores[:, np.newaxis] + rows
    best = np.argmax(candidates, axis=0)
    return candidates[best, np.arange(rows.shape[1])], best


def forward_step(
    model: NeuroCrfModel,
    x_t: Vector,
    alpha_prev: Sequence[AlphaEntry],
    carried_state: DecoderState = None,
) -> list[AlphaEntry]:
    """
    One trellis column. alpha_prev holds one entry per label, or a single
    entry with to == START for the initial column.
    """
    if not alpha_prev:
        raise InvalidArgumentError("alpha_prev must not be empty")
    ordered = sorted(alpha_prev, key=lambda e: e.to)
    matrix, _ = transition_scores(model, x_t, carried_state)
    prev_labels = np.array([e.to for e in ordered], dtype=np.int64)
    prev_scores = np.array([e.score for e in ordered], dtype=np.float64)
    scores, best = _advance(prev_scores, matrix[prev_labels])
    return [
        AlphaEntry(to=y, from_=int(prev_labels[best[y]]), score=float(scores[y]))
        for y in range(model.num_labels)
    ]


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def _observation_matrix(model: NeuroCrfModel, observations: npt.ArrayLike) -> Matrix:
    obs = np.asarray(observations, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] == 0:
        raise InvalidArgumentError("viterbi needs a non-empty (n, d) observation sequence")
    if obs.shape[1] != model.feature_dim:
        raise ModelDataMismatchError(
            f"Observations have dimension {obs.shape[1]}, model expects {model.feature_dim}"
        )
    return obs


def transition_tensor(model: NeuroCrfModel, observations: npt.ArrayLike) -> list[Matrix]:
    """All per-step transition matrices of a sequence, in order."""
    obs = _observation_matrix(model, observations)
    edges = edge_matrix(model)
    state = initial_state(model)
    out: list[Matrix] = []
    for x_t in obs:
        matrix, state = transition_scores(model, x_t, state, edges)
        out.append(matrix)
    return out


def sequence_probability(
    alpha_final: Sequence[AlphaEntry] | npt.ArrayLike, score: float
) -> float:
    """exp(score) / Σ_y exp(α_y), evaluated with a max shift."""
    if isinstance(alpha_final, Sequence) and alpha_final and isinstance(alpha_final[0], AlphaEntry):
        values = np.array([e.score for e in alpha_final], dtype=np.float64)
    else:
        values = np.asarray(alpha_final, dtype=np.float64)
    return float(min(1.0, np.exp(score - logsumexp(values))))


def viterbi(model: NeuroCrfModel, observations: npt.ArrayLike) -> DecodeResult:
    matrices = transition_tensor(model, observations)
    start = model.alphabet.start_index
    n, n_labels = len(matrices), model.num_labels

    scores = np.empty((n, n_labels), dtype=np.float64)
    back = np.empty((n, n_labels), dtype=np.int64)
    scores[0] = matrices[0][start]
    back[0] = start
    for t in range(1, n):
        scores[t], back[t] = _advance(scores[t - 1], matrices[t][:n_labels])

    table = AlphaTable(scores=scores, backpointers=back)
    last = int(np.argmax(scores[-1]))
    best = float(scores[-1, last])
    return DecodeResult(
        labels=tuple(table.backtrack(last)),
        score=best,
        probability=sequence_probability(scores[-1], best),
        alphas=table,
    )


def path_score(
    model: NeuroCrfModel, observations: npt.ArrayLike, labels: Sequence[int]
) -> float:
    """Sum of step scores along one label path."""
    matrices = transition_tensor(model, observations)
    if len(labels) != len(matrices):
        raise InvalidArgumentError("labels and observations differ in length")
    prev = model.alphabet.start_index
    total = 0.0
    for matrix, y in zip(matrices, labels, strict=True):
        total += float(matrix[prev, y])
        prev = y
    return total


def brute_force_decode(
    model: NeuroCrfModel, observations: npt.ArrayLike
) -> tuple[tuple[int, ...], float]:
    """Exhaustive max over all |Y|ⁿ paths; reference for small problems only."""
    matrices = transition_tensor(model, observations)
    n, n_labels = len(matrices), model.num_labels
    if n_labels**n > _BRUTE_FORCE_LIMIT:
        raise InvalidArgumentError(f"{n_labels}^{n} paths is too many to enumerate")
    paths = np.array(list(itertools.product(range(n_labels), repeat=n)), dtype=np.int64)
    totals = matrices[0][model.alphabet.start_index, paths[:, 0]].copy()
    for t in range(1, n):
        totals += matrices[t][paths[:, t - 1], paths[:, t]]
    best = int(np.argmax(totals))
    return tuple(int(y) for y in paths[best]), float(totals[best])
