"""
Plain-text model files.

Layout::

    neurocrf-model 1
    architecture crf-mlp
    labels ["a", "b", "c"]
    feature_dim 128
    hidden_size 33
    hyperparameters {"learning_rate": 0.5, ...}
    array obs.hidden.weights 33 128
    <one line per row>
    array obs.hidden.bias 33
    <one line>
    ...
    end

Floats are written with repr(), which round-trips exactly, so saving the
same weights twice produces identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
from mini_app_polis import logger as logger_mod

from neurocrf_cog.core import (
    Architecture,
    HyperParams,
    InvalidArgumentError,
    LabelAlphabet,
    ModelDescriptor,
    ParseError,
)
from neurocrf_cog.neural import (
    CrfMlpNets,
    DenseLayer,
    ElmanNet,
    Networks,
    NeuroCrfModel,
    PerceptronNet,
    init_weights,
)

log = logger_mod.get_logger()

MAGIC = "neurocrf-model"
FORMAT_VERSION = 1


def _named_layers(nets: Networks) -> dict[str, DenseLayer]:
    if isinstance(nets, CrfMlpNets):
        return {
            "obs.hidden": nets.obs.hidden,
            "obs.output": nets.obs.output,
            "edge.hidden": nets.edge.hidden,
            "edge.output": nets.edge.output,
        }
    if isinstance(nets, ElmanNet):
        return {"hidden": nets.hidden, "output": nets.output}
    if isinstance(nets, PerceptronNet):
        return {"output": nets.output}
    raise InvalidArgumentError(f"Unsupported network type {type(nets).__name__}")


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps_model(model: NeuroCrfModel) -> str:
    desc = model.descriptor
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"architecture {desc.architecture.value}",
        f"labels {json.dumps(list(model.alphabet.labels), ensure_ascii=False)}",
        f"feature_dim {desc.feature_dim}",
        f"hidden_size {desc.hidden_size}",
        f"hyperparameters {json.dumps(asdict(desc.hyperparameters), sort_keys=True)}",
    ]
    for name, layer in _named_layers(model.nets).items():
        rows, cols = layer.weights.shape
        lines.append(f"array {name}.weights {rows} {cols}")
        lines.extend(_fmt(row) for row in layer.weights)
        lines.append(f"array {name}.bias {layer.bias.shape[0]}")
        lines.append(_fmt(layer.bias))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_model(model: NeuroCrfModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_model(model), encoding="utf-8")
    log.info("💾 Saved %s model to %s", model.architecture.value, path)
    return path


class _Reader:
    def __init__(self, text: str, path: str | None):
        self.lines = text.splitlines()
        self.pos = 0
        self.path = path

    def error(self, message: str) -> ParseError:
        return ParseError(message, path=self.path, line=min(self.pos, len(self.lines)) or None)

    def next(self) -> str:
        if self.pos >= len(self.lines):
            self.pos += 1
            raise self.error("unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def field(self, key: str) -> str:
        line = self.next()
        name, _, value = line.partition(" ")
        if name != key or not value:
            raise self.error(f"expected {key!r}, got {line!r}")
        return value

    def floats(self, expected: int) -> np.ndarray:
        line = self.next()
        try:
            values = np.array([float(tok) for tok in line.split()], dtype=np.float64)
        except ValueError as exc:
            raise self.error(f"bad number: {exc}") from None
        if values.shape[0] != expected:
            raise self.error(f"expected {expected} values, got {values.shape[0]}")
        return values


def loads_model(text: str, *, path: str | None = None) -> NeuroCrfModel:
    reader = _Reader(text, path)
    header = reader.next().split()
    if len(header) != 2 or header[0] != MAGIC:
        raise reader.error("not a neurocrf model file")
    if header[1] != str(FORMAT_VERSION):
        raise reader.error(f"unsupported model format version {header[1]}")

    try:
        architecture = Architecture.parse(reader.field("architecture"))
        alphabet = LabelAlphabet(tuple(json.loads(reader.field("labels"))))
        feature_dim = int(reader.field("feature_dim"))
        hidden = int(reader.field("hidden_size"))
        hyper = HyperParams(**json.loads(reader.field("hyperparameters")))
        descriptor = ModelDescriptor(
            architecture=architecture,
            feature_dim=feature_dim,
            num_labels=len(alphabet),
            hidden_size=hidden,
            hyperparameters=hyper,
        )
    except (ValueError, TypeError) as exc:
        # InvalidArgumentError and JSONDecodeError are both ValueErrors
        raise reader.error(f"bad model header: {exc}") from None

    # a throwaway template fixes every expected shape
    nets = init_weights(descriptor, 0)
    for name, layer in _named_layers(nets).items():
        rows, cols = layer.weights.shape
        spec = reader.field("array").split()
        if spec != [f"{name}.weights", str(rows), str(cols)]:
            raise reader.error(f"expected array {name}.weights {rows} {cols}, got {spec}")
        layer.weights[:] = np.stack([reader.floats(cols) for _ in range(rows)])
        spec = reader.field("array").split()
        if spec != [f"{name}.bias", str(rows)]:
            raise reader.error(f"expected array {name}.bias {rows}, got {spec}")
        layer.bias[:] = reader.floats(rows)
        if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
            raise reader.error(f"non-finite values in {name}")
    if reader.next().strip() != "end":
        raise reader.error("missing end marker")

    return NeuroCrfModel(descriptor, alphabet, nets)


def load_model(path: str | Path) -> NeuroCrfModel:
    path = Path(path)
    model = loads_model(path.read_text(encoding="utf-8"), path=str(path))
    log.debug("Loaded %s model from %s", model.architecture.value, path)
    return model


def read_sequence_file(path: str | Path) -> list[np.ndarray]:
    """
    Observation sequences for decoding: one observation per line as
    whitespace-separated 0/1 values, a blank line between sequences,
    ``#`` starts a comment.
    """
    path = Path(path)
    sequences: list[np.ndarray] = []
    current: list[list[float]] = []

    def _flush() -> None:
        if current:
            sequences.append(np.array(current, dtype=np.float64))
            current.clear()

    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            # comment-only lines do not end a sequence
            if not raw.strip():
                _flush()
            continue
        tokens = line.split()
        if any(tok not in ("0", "1") for tok in tokens):
            raise ParseError("observation values must be 0 or 1", path=str(path), line=lineno)
        if current and len(tokens) != len(current[0]):
            raise ParseError(
                f"expected {len(current[0])} values, got {len(tokens)}", path=str(path), line=lineno
            )
        current.append([float(tok) for tok in tokens])
    _flush()

    if not sequences:
        raise ParseError("no observation sequences found", path=str(path))
    return sequences
