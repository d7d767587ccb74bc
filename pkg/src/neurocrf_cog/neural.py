"""
Neural factor networks for the three CRF architectures.

  - Mlp: one sigmoid hidden layer, linear (energy) outputs. CRF-MLP uses
    two of them, one over observations and one over the one-hot previous
    label (edge network).
  - ElmanNet: same shape over [x ⊕ context], where context is the hidden
    activation of the previous step. Context is owned by the caller.
  - PerceptronNet: a single linear layer over [x ⊕ one_hot(previous label)].

Updates are single-example backprop steps on the square loss
½·Σ(score_k − target_k)² with weight elimination:

    w_ij ← w_ij − η·x_i·(δ_j + 2λ·w_ij / (1 + w_ij²)²)

x_i is the presynaptic activation of the connection (1 for biases).
All update functions mutate the network in place and return it.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from mini_app_polis import logger as logger_mod
from scipy.special import expit

from neurocrf_cog.core import (
    Architecture,
    InvalidArgumentError,
    LabelAlphabet,
    ModelDescriptor,
    NeuroCrfError,
    hidden_size,
    one_hot,
)

log = logger_mod.get_logger()

Vector = npt.NDArray[np.float64]
Matrix = npt.NDArray[np.float64]


@dataclass(eq=False)
class DenseLayer:
    weights: Matrix  # [n_out × n_in]
    bias: Vector  # [n_out]

    @property
    def n_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.weights.shape[0])

    def affine(self, x: Vector) -> Vector:
        return self.weights @ x + self.bias

    def check_finite(self) -> None:
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise NeuroCrfError("Non-finite weights produced by update")


@dataclass(eq=False)
class Mlp:
    hidden: DenseLayer
    output: DenseLayer

    @property
    def n_in(self) -> int:
        return self.hidden.n_in


@dataclass(eq=False)
class ElmanNet:
    hidden: DenseLayer  # over [input ⊕ context]
    output: DenseLayer
    context: Vector

    @property
    def hidden_width(self) -> int:
        return self.hidden.n_out

    @property
    def feature_dim(self) -> int:
        return self.hidden.n_in - self.hidden.n_out

    def initial_context(self) -> Vector:
        return np.zeros(self.hidden_width, dtype=np.float64)


@dataclass(eq=False)
class PerceptronNet:
    output: DenseLayer  # over [observation ⊕ one_hot(prev)]
    feature_dim: int

    @property
    def num_labels(self) -> int:
        return self.output.n_out


@dataclass(eq=False)
class CrfMlpNets:
    obs: Mlp
    edge: Mlp


Networks = CrfMlpNets | ElmanNet | PerceptronNet


@dataclass(eq=False)
class NeuroCrfModel:
    """One trained (or freshly initialised) model for a single "self" class."""

    descriptor: ModelDescriptor
    alphabet: LabelAlphabet
    nets: Networks

    @property
    def architecture(self) -> Architecture:
        return self.descriptor.architecture

    @property
    def num_labels(self) -> int:
        return self.descriptor.num_labels

    @property
    def feature_dim(self) -> int:
        return self.descriptor.feature_dim


@dataclass
class LayerGradients:
    weights: Matrix
    bias: Vector


@dataclass
class TwoLayerGradients:
    hidden: LayerGradients
    output: LayerGradients


# ---------------------------------------------------------------------------
# Initialisation
# ---------------------------------------------------------------------------


def _normal_layer(
    rng: np.random.Generator, n_out: int, n_in: int, stddev: float
) -> DenseLayer:
    weights = rng.normal(0.0, stddev, size=(n_out, n_in))
    bias = rng.normal(0.0, stddev, size=n_out)
    return DenseLayer(weights=weights, bias=bias)


def _normal_mlp(
    rng: np.random.Generator, n_in: int, n_hidden: int, n_out: int, stddev: float
) -> Mlp:
    return Mlp(
        hidden=_normal_layer(rng, n_hidden, n_in, stddev),
        output=_normal_layer(rng, n_out, n_hidden, stddev),
    )


def init_weights(descriptor: ModelDescriptor, seed: int) -> Networks:
    """Draw every weight and bias i.i.d. from N(0, init_stddev)."""
    rng = np.random.default_rng(seed)
    sigma = descriptor.hyperparameters.init_stddev
    d = descriptor.feature_dim
    n_labels = descriptor.num_labels

    match descriptor.architecture:
        case Architecture.CRF_MLP:
            obs = _normal_mlp(rng, d, descriptor.hidden_size, n_labels, sigma)
            edge_hidden = hidden_size(n_labels + 1, n_labels)
            edge = _normal_mlp(rng, n_labels + 1, edge_hidden, n_labels, sigma)
            return CrfMlpNets(obs=obs, edge=edge)
        case Architecture.CRF_RNN:
            h = descriptor.hidden_size
            return ElmanNet(
                hidden=_normal_layer(rng, h, d + h, sigma),
                output=_normal_layer(rng, n_labels, h, sigma),
                context=np.zeros(h, dtype=np.float64),
            )
        case Architecture.CRF_PRCPT:
            return PerceptronNet(
                output=_normal_layer(rng, n_labels, d + n_labels + 1, sigma),
                feature_dim=d,
            )
    raise InvalidArgumentError(f"Unsupported architecture {descriptor.architecture}")


def init_model(
    descriptor: ModelDescriptor, alphabet: LabelAlphabet, seed: int
) -> NeuroCrfModel:
    if len(alphabet) != descriptor.num_labels:
        raise InvalidArgumentError(
            f"Alphabet has {len(alphabet)} labels, descriptor expects {descriptor.num_labels}"
        )
    log.debug(
        "Initialising %s model d=%d |Y|=%d hidden=%d seed=%d",
        descriptor.architecture.value,
        descriptor.feature_dim,
        descriptor.num_labels,
        descriptor.hidden_size,
        seed,
    )
    return NeuroCrfModel(descriptor, alphabet, init_weights(descriptor, seed))


# ---------------------------------------------------------------------------
# Shared two-layer machinery (MLP and Elman)
# ---------------------------------------------------------------------------


def weight_elimination_penalty(w: npt.ArrayLike, lam: float) -> npt.NDArray[np.float64]:
    w = np.asarray(w, dtype=np.float64)
    return 2.0 * lam * w / (1.0 + w * w) ** 2


def _check_dim(x: Vector, expected: int, what: str) -> None:
    if x.ndim != 1 or x.shape[0] != expected:
        raise InvalidArgumentError(
            f"{what}: expected a vector of length {expected}, got shape {x.shape}"
        )


def _two_layer_forward(
    hidden: DenseLayer, output: DenseLayer, inputs: Vector
) -> tuple[Vector, Vector]:
    h = expit(hidden.affine(inputs))
    return output.affine(h), h


def _two_layer_gradients(
    hidden: DenseLayer, output: DenseLayer, inputs: Vector, target: Vector
) -> tuple[TwoLayerGradients, Vector, Vector]:
    scores, h = _two_layer_forward(hidden, output, inputs)
    delta_out = scores - target
    delta_hidden = (output.weights.T @ delta_out) * h * (1.0 - h)
    grads = TwoLayerGradients(
        hidden=LayerGradients(np.outer(delta_hidden, inputs), delta_hidden),
        output=LayerGradients(np.outer(delta_out, h), delta_out),
    )
    return grads, delta_out, delta_hidden


def _eliminate(
    layer: DenseLayer,
    presynaptic: Vector,
    delta: Vector,
    eta: float,
    lam: float,
) -> None:
    w_pen = weight_elimination_penalty(layer.weights, lam)
    layer.weights -= eta * presynaptic[np.newaxis, :] * (delta[:, np.newaxis] + w_pen)
    layer.bias -= eta * (delta + weight_elimination_penalty(layer.bias, lam))
    layer.check_finite()


def _two_layer_update(
    hidden: DenseLayer,
    output: DenseLayer,
    inputs: Vector,
    target: Vector,
    eta: float,
    lam: float,
) -> None:
    scores, h = _two_layer_forward(hidden, output, inputs)
    delta_out = scores - target
    # hidden deltas use the output weights before this step changes them
    delta_hidden = (output.weights.T @ delta_out) * h * (1.0 - h)
    _eliminate(output, h, delta_out, eta, lam)
    _eliminate(hidden, inputs, delta_hidden, eta, lam)


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------


def mlp_forward(net: Mlp, x: Vector) -> tuple[Vector, Vector]:
    """Return (scores, hidden activations); scores are pre-softmax energies."""
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, net.n_in, "mlp_forward")
    return _two_layer_forward(net.hidden, net.output, x)


def mlp_gradients(net: Mlp, x: Vector, target: Vector) -> TwoLayerGradients:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, net.n_in, "mlp_gradients")
    grads, _, _ = _two_layer_gradients(net.hidden, net.output, x, np.asarray(target))
    return grads


def mlp_update(
    net: Mlp, x: Vector, target: Vector, eta: float, lam: float
) -> Mlp:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, net.n_in, "mlp_update")
    _two_layer_update(net.hidden, net.output, x, np.asarray(target, dtype=np.float64), eta, lam)
    return net


# ---------------------------------------------------------------------------
# Elman
# ---------------------------------------------------------------------------


def _elman_inputs(net: ElmanNet, x: Vector, context: Vector) -> Vector:
    x = np.asarray(x, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    _check_dim(x, net.feature_dim, "elman observation")
    _check_dim(context, net.hidden_width, "elman context")
    return np.concatenate([x, context])


def elman_forward(net: ElmanNet, x: Vector, context: Vector) -> tuple[Vector, Vector]:
    """Return (scores, new_context); new_context is this step's hidden activation."""
    inputs = _elman_inputs(net, x, context)
    scores, h = _two_layer_forward(net.hidden, net.output, inputs)
    return scores, h


def elman_gradients(
    net: ElmanNet, x: Vector, context: Vector, target: Vector
) -> TwoLayerGradients:
    inputs = _elman_inputs(net, x, context)
    grads, _, _ = _two_layer_gradients(net.hidden, net.output, inputs, np.asarray(target))
    return grads


def elman_update(
    net: ElmanNet,
    x: Vector,
    context: Vector,
    target: Vector,
    eta: float,
    lam: float,
) -> ElmanNet:
    """One backprop step with context held as a constant input (no BPTT)."""
    inputs = _elman_inputs(net, x, context)
    _two_layer_update(
        net.hidden, net.output, inputs, np.asarray(target, dtype=np.float64), eta, lam
    )
    return net


# ---------------------------------------------------------------------------
# Perceptron
# ---------------------------------------------------------------------------


def perceptron_input(net: PerceptronNet, x: Vector, prev: int) -> Vector:
    x = np.asarray(x, dtype=np.float64)
    _check_dim(x, net.feature_dim, "perceptron observation")
    return np.concatenate([x, one_hot(prev, net.num_labels)])


def perceptron_scores(net: PerceptronNet, x: Vector, prev: int) -> Vector:
    return net.output.affine(perceptron_input(net, x, prev))


def perceptron_accumulate_and_apply(
    net: PerceptronNet,
    errors: Sequence[tuple[Vector, Vector, Vector]],
    eta: float,
) -> PerceptronNet:
    """
    Apply one averaged 0/1-loss update from (input, predicted one-hot,
    gold one-hot) entries. The bias moves as a connection with input 1.
    """
    if not errors:
        return net
    inputs = np.stack([np.asarray(e[0], dtype=np.float64) for e in errors])
    diffs = np.stack(
        [np.asarray(e[2], dtype=np.float64) - np.asarray(e[1], dtype=np.float64) for e in errors]
    )
    net.output.weights += eta * (diffs.T @ inputs) / len(errors)
    net.output.bias += eta * diffs.mean(axis=0)
    net.output.check_finite()
    return net
