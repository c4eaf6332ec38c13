import numpy as np
import pytest
from hypothesis import given, strategies as st

from infogcl.autodiff import Tensor, gradcheck
from infogcl.augment import AugmentationSpec, apply_augmentation
from infogcl.contrast import ModeSpec, ScoreFn, apply_mode, contrastive_loss
from infogcl.encoder import (CHECKPOINT_FORMAT, EncoderSpec, encode, encode_batch, encode_graphs,
                             evaluation_embeddings, gcn_layer_forward, gin_layer_forward, init_params,
                             load_checkpoint, parameter_shapes, save_checkpoint)
from infogcl.errors import ShapeError
from infogcl.graph import Graph
from infogcl.rng import SplitMix64

from conftest import random_graph

SPECS = [EncoderSpec("gcn", 1, 4, projection_layers=0), EncoderSpec("gcn", 2, 5, readout="sum"),
         EncoderSpec("gin", 2, 4), EncoderSpec("gin", 3, 3, gin_epsilon=0.3, projection_layers=1)]


def test_gcn_isolated_node():
    g = Graph.from_edges(1, [])
    out = gcn_layer_forward(g, Tensor([[0.5, -0.2]]), Tensor(np.eye(2)))
    assert out.value.tolist() == [[0.5, 0.0]]


def test_gcn_symmetric_pair():
    g = Graph.from_edges(2, [(0, 1)])
    w = Tensor(SplitMix64(1).uniform(-1, 1, (2, 3)))
    out = gcn_layer_forward(g, Tensor([[0.3, 0.7], [0.3, 0.7]]), w).value
    assert np.array_equal(out[0], out[1])


def test_gcn_path_matches_hand_normalization(path_graph):
    # degrees with self-loops: 2, 3, 3, 2
    d = np.array([2.0, 3.0, 3.0, 2.0])
    a_hat = np.eye(4) + np.array([[0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 0]])
    norm = a_hat / np.sqrt(np.outer(d, d))
    assert abs(norm[0, 1] - 1 / np.sqrt(6)) < 1e-15 and abs(norm[1, 1] - 1 / 3) < 1e-15
    w = SplitMix64(4).uniform(-1, 1, (2, 3))
    out = gcn_layer_forward(path_graph, Tensor(path_graph.attributes), Tensor(w)).value
    assert np.allclose(out, np.maximum(norm @ path_graph.attributes @ w, 0.0), atol=1e-14)


def test_gin_single_node_identity_mlp():
    g = Graph.from_edges(1, [])
    h = Tensor([[0.4, 1.5]])
    out = gin_layer_forward(g, h, 0.0, [Tensor(np.eye(2)), Tensor(np.eye(2))])
    assert np.array_equal(out.value, h.value)


def test_gin_star_pre_mlp_value():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    h = np.array([[1.0, 2.0], [0.5, 0.0], [0.25, 1.0], [2.0, 3.0]])
    eps = 0.5
    out = gin_layer_forward(g, Tensor(h), eps, [Tensor(np.eye(2)), Tensor(np.eye(2))]).value
    expected = (1 + eps) * h[0] + h[1:].sum(axis=0)
    assert np.allclose(out[0], expected, atol=1e-15)


def test_gin_triangle_against_dense_oracle():
    rng = SplitMix64(9)
    g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    h = rng.uniform(-1, 1, (3, 2))
    w1, b1, w2, b2 = rng.uniform(-1, 1, (2, 4)), rng.uniform(-1, 1, (1, 4)), rng.uniform(-1, 1, (4, 3)), \
        rng.uniform(-1, 1, (1, 3))
    eps = 0.2
    agg = np.zeros_like(h)
    for v in range(3):
        agg[v] = (1 + eps) * h[v] + sum(h[u] for u in range(3) if u != v)
    expected = np.maximum(agg @ w1 + b1, 0) @ w2 + b2
    out = gin_layer_forward(g, Tensor(h), eps, [Tensor(x) for x in (w1, b1, w2, b2)]).value
    assert np.allclose(out, expected, atol=1e-14)


def test_layer_shape_errors(path_graph):
    with pytest.raises(ShapeError):
        gcn_layer_forward(path_graph, Tensor(np.ones((4, 2))), Tensor(np.ones((3, 2))))
    with pytest.raises(ShapeError):
        gin_layer_forward(path_graph, Tensor(np.ones((3, 2))), 0.0, [Tensor(np.eye(2)), Tensor(np.eye(2))])


def test_single_node_mean_readout_is_node_embedding():
    spec = EncoderSpec("gcn", 1, 3, projection_layers=0)
    params = init_params(spec, 2, 0)
    reps = encode(spec, params, Graph.from_edges(1, [], np.array([[0.3, 0.9]])))
    assert np.array_equal(reps.graph_embedding.value, reps.projected_nodes.value)


def test_encode_is_bit_stable(path_graph):
    spec = EncoderSpec("gin", 2, 4)
    a = encode(spec, init_params(spec, 2, 7), path_graph).graph_embedding.value
    b = encode(spec, init_params(spec, 2, 7), path_graph).graph_embedding.value
    assert a.tobytes() == b.tobytes()


def test_encode_accepts_view(path_graph):
    spec = EncoderSpec("gcn", 1, 3)
    params = init_params(spec, 2, 0)
    view = apply_augmentation(path_graph, AugmentationSpec("node_drop", 0.25), 3)
    assert encode(spec, params, view).node_embeddings.shape == (3, 3)


def test_parameter_shapes():
    shapes = parameter_shapes(EncoderSpec("gin", 2, 8, projection_layers=2), 5)
    assert shapes["layer0.W1"] == (5, 8) and shapes["layer1.W2"] == (8, 8) and shapes["proj.b2"] == (1, 8)
    assert "layer0.W" in parameter_shapes(EncoderSpec("gcn", 1, 8, projection_layers=0), 5)


def test_init_is_glorot_bounded():
    params = init_params(EncoderSpec("gcn", 1, 6), 4, 3)
    bound = np.sqrt(6 / (4 + 6))
    assert np.abs(params["layer0.W"].value).max() <= bound
    assert np.all(params["proj.b1"].value == 0)


@given(st.integers(0, 2 ** 32), st.integers(2, 9), st.sampled_from(SPECS))
def test_permutation_equivariance(seed, n, spec):
    rng = SplitMix64(seed)
    g = random_graph(rng, n)
    perm = rng.permutation(n)
    params = init_params(spec, 3, seed)
    base = encode(spec, params, g)
    moved = encode(spec, params, g.permuted(perm))
    assert np.abs(moved.node_embeddings.value - base.node_embeddings.value[perm]).max() <= 1e-10
    assert np.abs(moved.graph_embedding.value - base.graph_embedding.value).max() <= 1e-10


@given(st.integers(0, 2 ** 32), st.integers(1, 5), st.sampled_from(SPECS))
def test_batch_equals_solo(seed, count, spec):
    rng = SplitMix64(seed)
    graphs = [random_graph(rng, 1 + rng.randbelow(7)) for _ in range(count)]
    params = init_params(spec, 3, seed)
    for b, g in zip(encode_batch(spec, params, graphs), graphs):
        s = encode(spec, params, g)
        assert np.abs(b.graph_embedding.value - s.graph_embedding.value).max() <= 1e-10
        assert np.abs(b.projected_nodes.value - s.projected_nodes.value).max() <= 1e-10
        for x, y in zip(b.per_layer, s.per_layer):
            assert np.abs(x.value - y.value).max() <= 1e-10


def test_evaluation_embeddings_concatenate_layer_readouts(path_graph):
    spec = EncoderSpec("gin", 2, 4)
    params = init_params(spec, 2, 1)
    emb = evaluation_embeddings(spec, params, [path_graph, path_graph], chunk=1)
    reps = encode(spec, params, path_graph)
    expected = np.concatenate([t.value.mean(axis=0) for t in reps.per_layer])
    assert emb.shape == (2, 8) and np.allclose(emb[0], expected) and np.allclose(emb[1], expected)


def test_checkpoint_round_trip(tmp_path):
    spec = EncoderSpec("gin", 2, 3)
    params = init_params(spec, 2, 5)
    path = save_checkpoint(params, tmp_path / "ck.json", {"note": "x"})
    back, meta = load_checkpoint(path)
    assert meta == {"note": "x"}
    assert all(np.array_equal(params[k].value, back[k].value) for k in params)
    assert f'"format": "{CHECKPOINT_FORMAT}"' in path.read_text()


def test_encoder_gradients_through_loss():
    rng = SplitMix64(2)
    graphs = [random_graph(rng, 5), random_graph(rng, 4), random_graph(rng, 6)]
    views = [apply_augmentation(g, AugmentationSpec("attr_mask", 0.3), i).graph for i, g in enumerate(graphs)]
    spec = EncoderSpec("gcn", 2, 3, projection_layers=1)
    names = list(parameter_shapes(spec, 3))
    tensors = [Tensor(rng.uniform(-1, 1, s)) for s in parameter_shapes(spec, 3).values()]

    def fn(*ts):
        params = dict(zip(names, ts))
        batches = apply_mode(ModeSpec("local_global"), encode_graphs(spec, params, graphs),
                             encode_graphs(spec, params, views))
        return contrastive_loss(batches, ScoreFn(temperature=0.5))

    assert gradcheck(fn, tensors).worst < 1e-4
