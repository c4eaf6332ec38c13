import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from infogcl.augment import AugmentationSpec, apply_augmentation
from infogcl.contrast import MODES, ModeSpec
from infogcl.encoder import EncoderSpec
from infogcl.errors import DomainError
from infogcl.graph import Graph, GraphDataset
from infogcl.infomeasure import (Candidate, DiscreteJoint, ExactTable, compute_ib_objective, discrete_mi, entropy,
                                 fit_summary_edges, label_mi_proxy, mi_lower_bound_from_nce, quantile_edges,
                                 rank_candidates, sample_mi, score_augmentation_pair, select_augmentations,
                                 select_encoder, select_mode, train_nce_critic, verify_corollary1, verify_corollary2,
                                 verify_corollary3, view_summary)
from infogcl.rng import SplitMix64
from infogcl.synthetic import (drop_nuisance, generate_synthetic_graphs, marker_distance_dataset,
                               triangle_count_dataset, two_factor_process)

LN2 = math.log(2)


def test_discrete_mi_examples():
    assert discrete_mi(DiscreteJoint(np.full((2, 2), 0.25))).nats == 0.0
    assert abs(discrete_mi(DiscreteJoint(np.diag([0.5, 0.5]))).nats - 0.693147) < 1e-6
    # by hand: 2 * 0.4 ln(0.4 / 0.25) + 2 * 0.1 ln(0.1 / 0.25)
    hand = 0.8 * math.log(1.6) + 0.2 * math.log(0.4)
    value = discrete_mi(DiscreteJoint(np.array([[0.4, 0.1], [0.1, 0.4]]))).nats
    assert abs(value - hand) < 1e-15 and abs(value - 0.192745) < 1e-6


@pytest.mark.parametrize("table", [[[0.5, -0.1], [0.3, 0.3]], [[0.5, 0.4]], [[np.nan, 1.0]], []])
def test_joint_validation(table):
    with pytest.raises(DomainError):
        DiscreteJoint(np.array(table))


joints = st.builds(lambda seed, r, c: SplitMix64(seed).uniform(0, 1, (r, c)),
                   st.integers(0, 2 ** 32), st.integers(1, 6), st.integers(1, 6)).map(lambda t: t / t.sum())


@given(joints)
def test_mi_properties(t):
    i = discrete_mi(DiscreteJoint(t)).nats
    assert i >= 0
    assert abs(discrete_mi(DiscreteJoint(t.T)).nats - i) < 1e-12
    pu, pv = t.sum(axis=1), t.sum(axis=0)
    assert discrete_mi(DiscreteJoint(np.outer(pu, pv))).nats < 1e-12
    assert abs(discrete_mi(DiscreteJoint(np.diag(pu))).nats - entropy(pu)) < 1e-12
    assert i <= min(entropy(pu), entropy(pv)) + 1e-12


def test_exact_rational_factorization():
    t = np.outer([0.5, 0.25, 0.25], [0.125, 0.875])
    assert discrete_mi(DiscreteJoint(t)).nats < 1e-12


def test_sample_mi_matches_joint():
    u = [0, 0, 1, 1, 1, 0, 1, 0]
    assert abs(sample_mi(u, u) - LN2) < 1e-12
    assert sample_mi(u, ["a"] * 8) == 0.0


def test_ib_objective():
    assert compute_ib_objective(1.0, 0.5, 2.0) == 0.0
    assert compute_ib_objective(0.7, 0.4, 0.0) == -0.7
    assert compute_ib_objective(0.0, 1.3, 1.0) == 1.3


def test_nce_bound_examples():
    assert abs(mi_lower_bound_from_nce(LN2, 2).nats) < 1e-15
    assert abs(mi_lower_bound_from_nce(0.0, 8).nats - 2.079442) < 1e-6
    assert mi_lower_bound_from_nce(0.0, 8).estimator == "nce_bound"
    with pytest.raises(DomainError):
        mi_lower_bound_from_nce(0.1, 1)
    with pytest.raises(DomainError):
        mi_lower_bound_from_nce(-0.1, 4)


def test_trained_critic_stays_below_exact():
    trace = train_nce_critic(DiscreteJoint(np.array([[0.4, 0.1], [0.1, 0.4]])), steps=150, seed=3)
    assert abs(trace.exact - 0.192745) < 1e-6
    assert max(trace.bounds) <= trace.exact + 0.05
    assert trace.bounds[-1] > trace.bounds[0]


def test_probe_proxy_one_hot():
    y = np.arange(200) % 2
    est = label_mi_proxy(np.eye(2)[y], y)
    assert abs(est.nats - LN2) < 0.05 and est.estimator == "label_probe"


def test_probe_proxy_noise():
    y = np.arange(200) % 2
    x = SplitMix64(1).uniform(-1, 1, (200, 4))
    assert label_mi_proxy(x, y).nats < 0.05


def test_probe_proxy_constant():
    y = np.arange(100) % 2
    assert label_mi_proxy(np.ones((100, 3)), y).nats == 0.0


def test_probe_proxy_errors():
    with pytest.raises(DomainError):
        label_mi_proxy(np.ones((20, 2)), np.zeros(20, dtype=int))


@given(st.integers(0, 2 ** 32), st.integers(2, 4))
def test_probe_proxy_bounded_by_log_classes(seed, classes):
    rng = SplitMix64(seed)
    y = np.arange(60) % classes
    x = np.eye(classes)[y] * 5 + rng.uniform(-1, 1, (60, classes))
    assert label_mi_proxy(x, y, folds=3, seed=seed).nats <= math.log(classes) + 1e-9


def test_quantile_edges_tie_aware():
    assert quantile_edges([2, 2, 2, 3, 3, 5], 4).tolist() == [2.5, 4.0]
    v = np.arange(100, dtype=float)
    assert np.allclose(quantile_edges(v, 4), np.quantile(v, [0.25, 0.5, 0.75]))


def _fixture_dataset():
    rng = SplitMix64(12)
    graphs = []
    for i in range(40):
        n = 3 + rng.randbelow(6)
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.4]
        graphs.append(Graph.from_edges(n, edges, rng.uniform(0, 2, (n, 2))))
    return GraphDataset(tuple(graphs), np.arange(40) % 2, 2, "fixture")


def test_view_summary_matches_independent_quantiles():
    ds = _fixture_dataset()
    edges = fit_summary_edges(ds.graphs, bins=8)
    # one-off recomputation with plain numpy
    deg = np.concatenate([np.asarray(g.dense().sum(axis=1)).ravel() for g in ds.graphs])
    distinct = np.unique(deg)
    deg_edges = (distinct[:-1] + distinct[1:]) / 2 if len(distinct) <= 4 else np.unique(
        np.quantile(deg, [0.25, 0.5, 0.75]))
    feats = []
    for g in ds.graphs:
        d = np.asarray(g.dense().sum(axis=1)).ravel()
        bucket = np.searchsorted(deg_edges, d, side="right")
        feats.append(np.concatenate([[np.mean(bucket == b) for b in range(4)], g.attributes.mean(axis=0)]))
    feats = np.array(feats)
    for k in range(feats.shape[1]):
        col = feats[:, k]
        if len(np.unique(col)) > 8:
            e = np.unique(np.quantile(col, np.arange(1, 8) / 8))
        else:
            u = np.unique(col)
            e = (u[:-1] + u[1:]) / 2
        expected = np.searchsorted(e, col, side="right")
        got = np.array([view_summary(g, edges)[k] for g in ds.graphs])
        assert np.array_equal(got, expected), k


def test_view_summary_identical_and_masked():
    ds = _fixture_dataset()
    edges = fit_summary_edges(ds.graphs)
    g = ds.graphs[0]
    assert np.array_equal(view_summary(g, edges), view_summary(g, edges))
    masked = apply_augmentation(g, AugmentationSpec("attr_mask", 1.0), 0)
    attr_symbols = view_summary(masked, edges)[4:]
    zero_bins = [np.searchsorted(e, 0.0, side="right") for e in edges.coord_edges[4:]]
    assert attr_symbols.tolist() == zero_bins


@pytest.fixture(scope="module")
def two_factor():
    return generate_synthetic_graphs(two_factor_process(nuisance_bits=4), 400, 1)


def test_identity_pair_has_maximal_shared_information(two_factor):
    ident = AugmentationSpec()
    others = [AugmentationSpec("attr_mask", 0.5), AugmentationSpec("node_drop", 0.2),
              AugmentationSpec("edge_perturb", 0.2)]
    base = score_augmentation_pair(two_factor, ident, ident, 0)[1]["i_vi_vj"].nats
    for spec in others:
        assert score_augmentation_pair(two_factor, ident, spec, 0)[1]["i_vi_vj"].nats <= base + 1e-12


def test_mask_pair_beats_identity_pair(two_factor):
    mask = AugmentationSpec("attr_mask", 0.5)
    ident = AugmentationSpec()
    assert score_augmentation_pair(two_factor, mask, mask, 0)[0] > score_augmentation_pair(two_factor, ident, ident, 0)[0]


def test_pair_score_symmetric(two_factor):
    a, b = AugmentationSpec("node_drop", 0.2), AugmentationSpec("attr_mask", 0.5)
    s_ab, c_ab = score_augmentation_pair(two_factor, a, b, 4)
    s_ba, c_ba = score_augmentation_pair(two_factor, b, a, 4)
    assert s_ab == s_ba
    assert c_ab["i_vi_y"].nats == c_ba["i_vj_y"].nats


def test_single_candidate_report(two_factor):
    rep = select_augmentations(two_factor, [AugmentationSpec("node_drop", 0.2)], 0)
    assert rep.ranking == [0] and len(rep.candidates) == 1
    doc = json.loads(rep.to_json())
    assert set(doc) >= {"task", "candidates", "ranking", "config_echo"}
    assert set(doc["candidates"][0]["components"]) == {"i_vi_y", "i_vj_y", "i_vi_vj"}


def test_selection_is_pure(two_factor):
    cands = [AugmentationSpec(), AugmentationSpec("attr_mask", 0.5)]
    assert select_augmentations(two_factor, cands, 2).to_json() == select_augmentations(two_factor, cands, 2).to_json()


def test_ranking_ties_break_by_description():
    cands = [Candidate("b", 1.0, {}), Candidate("a", 1.0, {}), Candidate("c", 2.0, {}),
             Candidate("z", float("-inf"), {}, ["diverged"])]
    assert rank_candidates(cands) == [2, 1, 0, 3]
    assert cands[3].to_dict()["score"] is None


def test_encoder_selection_prefers_two_hops():
    ds = marker_distance_dataset(200, 0)
    view = (AugmentationSpec("attr_mask", 0.1), AugmentationSpec("attr_mask", 0.1))
    gin, gcn = EncoderSpec("gin", 2, 32), EncoderSpec("gcn", 1, 32)
    rep = select_encoder(ds, view, [gcn, gin, gin], 5, 0)
    scores = [c.score for c in rep.candidates]
    assert rep.best.desc == gin.desc
    assert scores[1] == scores[2] and rep.ranking[:2] == [1, 2]
    assert scores[1] > scores[0]


def test_encoder_selection_untrained_flag():
    ds = marker_distance_dataset(60, 1)
    rep = select_encoder(ds, (AugmentationSpec(), AugmentationSpec()), [EncoderSpec("gcn", 1, 8)], 0, 0)
    assert rep.candidates[0].flags == ["untrained"]


def test_mode_selection_prefers_global_aware_modes():
    ds = triangle_count_dataset(200, 0)
    rep = select_mode(ds, [ModeSpec(m) for m in MODES], 0, train_budget=10)
    scores = {c.desc: c.score for c in rep.candidates}
    assert len(rep.candidates) == 5
    assert scores["local_global"] > scores["local_local"]
    assert scores["global_global"] > scores["local_local"]


def test_mode_selection_single():
    ds = triangle_count_dataset(40, 2)
    assert select_mode(ds, [ModeSpec("global_global")], 0, train_budget=1).ranking == [0]


# ------------------------------------------------------------- corollaries


def test_exact_table_conditional_mi():
    t = ExactTable(np.full(4, 0.25))
    t.add("a", [0, 0, 1, 1])
    t.add("b", [0, 1, 0, 1])
    t.add("x", [0, 1, 1, 0])
    assert t.mi("a", "b") < 1e-15
    assert abs(t.mi("a", "b", ["x"]) - LN2) < 1e-12


def test_corollary1_identity_only():
    p = two_factor_process(nuisance_bits=2)
    rep = verify_corollary1(p, {"identity": lambda g: g})
    pair = rep.pair("identity", "identity")
    assert pair.feasible and abs(pair.i_vi_vj - rep.h_g) < 1e-12


def test_corollary1_regions_and_processing():
    p = two_factor_process(nuisance_bits=2, relevant_bits=1)
    fns = {"keep-all": lambda g: g, "drop-nuisance": drop_nuisance, "degrees": lambda g: tuple(g.degrees())}
    rep = verify_corollary1(p, fns)
    for r in rep.pairs:
        reg = r.regions
        assert r.i_vi_y <= rep.i_g_y + 1e-12 and r.i_vj_y <= rep.i_g_y + 1e-12
        assert abs(reg["A"] + reg["D"] - r.i_vi_y) < 1e-9
        assert abs(reg["B"] + reg["D"] - r.i_vj_y) < 1e-9
        assert abs(reg["C"] + reg["D"] - r.i_vi_vj) < 1e-9
        assert abs(reg["A"] + reg["B"] + reg["D"] + reg["E"] - rep.i_g_y) < 1e-9
    # the degree sequence keeps exactly (y, r), as drop-nuisance does, so the two tie
    assert ("drop-nuisance", "drop-nuisance") in rep.co_optima and ("degrees", "degrees") in rep.co_optima
    assert rep.optimum == ("degrees", "degrees")
    # the pendant bit is shared by both views but independent of y, so C holds exactly its entropy
    assert abs(rep.pair("drop-nuisance", "drop-nuisance").regions["C"] - LN2) < 1e-12


def test_corollary2_feasibility():
    p = two_factor_process(nuisance_bits=2)

    def keep_even(g):
        a = np.array(g.attributes)
        a[1::2, 1] = 0
        return Graph(g.adjacency, a)

    def keep_odd(g):
        a = np.array(g.attributes)
        a[0::2, 1] = 0
        return Graph(g.adjacency, a)

    rep = verify_corollary2(p, keep_even, keep_odd, {"identity": lambda v: v, "shared": drop_nuisance,
                                                     "constant": lambda v: 0})
    assert "identity" in rep.feasible and "constant" not in rep.feasible
    assert rep.optimum == "shared"
    for e in rep.encoders:
        if e.feasible:
            assert e.i_f_vi >= rep.i_vi_vj - 1e-12


def test_corollary3_co_optima():
    p = two_factor_process(nuisance_bits=2)
    rep = verify_corollary3(p, lambda g: g, drop_nuisance, {
        "identity": lambda z: z,
        "structure": lambda z: z.edge_count,
        "constant": lambda z: 0,
    })
    assert set(rep.co_optima) == {"identity", "structure"}
    assert rep.ranking[-1] == "constant" and rep.values["constant"] == 0.0


def test_corollaries_need_enumerable_process():
    with pytest.raises(DomainError):
        verify_corollary1([1, 2], {"x": lambda g: g})


def test_brute_force_conditional_mi_against_definition():
    # I(a;b|c) by explicit summation over the joint
    rng = SplitMix64(4)
    probs = rng.uniform(0, 1, 27)
    probs /= probs.sum()
    cells = list(itertools.product(range(3), repeat=3))
    t = ExactTable(probs)
    t.add("a", [c[0] for c in cells])
    t.add("b", [c[1] for c in cells])
    t.add("c", [c[2] for c in cells])
    p = probs.reshape(3, 3, 3)
    pc = p.sum(axis=(0, 1))
    pac = p.sum(axis=1)
    pbc = p.sum(axis=0)
    direct = sum(p[a, b, c] * math.log(p[a, b, c] * pc[c] / (pac[a, c] * pbc[b, c]))
                 for a, b, c in cells)
    assert abs(t.mi("a", "b", ["c"]) - direct) < 1e-12
