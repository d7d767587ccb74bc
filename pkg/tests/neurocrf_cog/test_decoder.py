import numpy as np
import pytest

import neurocrf_cog.decoder as decoder
from neurocrf_cog.core import (
    Architecture,
    HyperParams,
    InvalidArgumentError,
    LabelAlphabet,
    ModelDataMismatchError,
    ModelDescriptor,
    one_hot,
)
from neurocrf_cog.neural import (
    elman_forward,
    init_model,
    mlp_forward,
    perceptron_scores,
)

ARCHITECTURES = [Architecture.CRF_MLP, Architecture.CRF_RNN, Architecture.CRF_PRCPT]


def _model(architecture, d=3, n_labels=3, seed=0, stddev=0.1):
    alphabet = LabelAlphabet(tuple("abcde"[:n_labels]))
    hidden = 0 if architecture is Architecture.CRF_PRCPT else 2
    desc = ModelDescriptor(
        architecture, d, n_labels, hidden_size=hidden,
        hyperparameters=HyperParams(init_stddev=stddev),
    )
    return init_model(desc, alphabet, seed)


def _zero_model(architecture, d=3, n_labels=3):
    model = _model(architecture, d, n_labels)
    for arr in _arrays(model.nets):
        arr[...] = 0.0
    return model


def _arrays(nets):
    if hasattr(nets, "obs"):
        layers = [nets.obs.hidden, nets.obs.output, nets.edge.hidden, nets.edge.output]
    elif hasattr(nets, "hidden"):
        layers = [nets.hidden, nets.output]
    else:
        layers = [nets.output]
    for layer in layers:
        yield layer.weights
        yield layer.bias


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_viterbi_matches_brute_force(architecture) -> None:
    rng = np.random.default_rng(2024)
    for trial in range(500):
        n_labels = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        model = _model(architecture, d=4, n_labels=n_labels, seed=trial)
        obs = rng.integers(0, 2, size=(n, 4)).astype(float)

        result = decoder.viterbi(model, obs)
        labels, best = decoder.brute_force_decode(model, obs)

        assert abs(result.score - best) < 1e-9
        assert abs(decoder.path_score(model, obs, result.labels) - result.score) < 1e-9
        assert len(result.labels) == n
        assert 0.0 < result.probability <= 1.0


@pytest.mark.parametrize("architecture", ARCHITECTURES)
def test_ties_go_to_lowest_label_index(architecture) -> None:
    model = _zero_model(architecture)
    result = decoder.viterbi(model, np.ones((4, 3)))
    assert result.labels == (0, 0, 0, 0)
    assert result.score == 0.0
    assert result.probability == pytest.approx(1 / 3)


def test_transition_scores_mlp_rows_are_obs_plus_edge() -> None:
    model = _model(Architecture.CRF_MLP, stddev=0.5, seed=1)
    x = np.array([1.0, 0.0, 1.0])
    matrix, state = decoder.transition_scores(model, x, None)
    assert matrix.shape == (4, 3)
    assert state is None
    obs_scores, _ = mlp_forward(model.nets.obs, x)
    for prev in range(4):
        edge_scores, _ = mlp_forward(model.nets.edge, one_hot(prev, 3))
        np.testing.assert_allclose(matrix[prev], obs_scores + edge_scores, atol=1e-12)


def test_transition_scores_perceptron_rows_match_scores() -> None:
    model = _model(Architecture.CRF_PRCPT, stddev=0.5, seed=2)
    x = np.array([0.0, 1.0, 1.0])
    matrix, _ = decoder.transition_scores(model, x, None)
    for prev in range(4):
        np.testing.assert_allclose(matrix[prev], perceptron_scores(model.nets, x, prev))
    np.testing.assert_allclose(decoder.step_scores(model, x, 3), matrix[3])


def test_rnn_decoding_is_per_step_argmax() -> None:
    model = _model(Architecture.CRF_RNN, stddev=0.8, seed=3)
    obs = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]], dtype=float)
    context = model.nets.initial_context()
    expected = []
    for x_t in obs:
        scores, context = elman_forward(model.nets, x_t, context)
        expected.append(int(np.argmax(scores)))
    assert decoder.viterbi(model, obs).labels == tuple(expected)


def test_forward_step_reproduces_alpha_table() -> None:
    model = _model(Architecture.CRF_PRCPT, stddev=0.5, seed=4)
    obs = np.array([[1, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=float)
    table = decoder.viterbi(model, obs).alphas
    start = model.alphabet.start_index

    alpha = [decoder.AlphaEntry(to=start, from_=start, score=0.0)]
    for t, x_t in enumerate(obs):
        alpha = decoder.forward_step(model, x_t, alpha)
        assert [e.to for e in alpha] == [0, 1, 2]
        for entry, expected in zip(alpha, table.step(t), strict=True):
            assert entry.from_ == expected.from_
            assert entry.score == pytest.approx(expected.score, abs=1e-12)


def test_sequence_probability_accepts_alpha_entries() -> None:
    entries = [decoder.AlphaEntry(to=i, from_=0, score=s) for i, s in enumerate([1.0, 2.0, 3.0])]
    expected = np.exp(3.0) / np.sum(np.exp([1.0, 2.0, 3.0]))
    assert decoder.sequence_probability(entries, 3.0) == pytest.approx(expected)
    assert decoder.sequence_probability([0.0], 0.0) == 1.0


def test_viterbi_probability_is_stable_for_large_scores() -> None:
    assert decoder.sequence_probability([1000.0, 999.0], 1000.0) == pytest.approx(
        1 / (1 + np.exp(-1.0))
    )


def test_viterbi_rejects_bad_observations() -> None:
    model = _model(Architecture.CRF_MLP)
    with pytest.raises(ModelDataMismatchError):
        decoder.viterbi(model, np.ones((2, 5)))
    with pytest.raises(InvalidArgumentError):
        decoder.viterbi(model, np.zeros((0, 3)))


def test_step_scores_rejects_out_of_range_previous_label() -> None:
    model = _model(Architecture.CRF_MLP)
    with pytest.raises(InvalidArgumentError):
        decoder.step_scores(model, np.ones(3), 4)


def test_brute_force_refuses_huge_problems() -> None:
    model = _model(Architecture.CRF_PRCPT, n_labels=5)
    with pytest.raises(InvalidArgumentError):
        decoder.brute_force_decode(model, np.ones((10, 3)))
