"""Posterior summaries, median-model selection, evaluation, diagnostics."""

import numpy as np
import pandas as pd
import pytest

from poenet.model import ValidationError
from poenet.sampler import MoveStats
from poenet.simulate import SimulationTruth
from poenet.summarize import (
    classification_auc,
    compute_summary,
    diagnostics,
    evaluate_against_truth,
    overlap_statistic,
    select_median_model,
    SelectedGraph,
)
from poenet.trace import TraceStore


def make_store(seed=0, T=40, p=3, n=4, edges=((1, 0), (0, 1), (2, 0)),
               chain_id=0, init_mode="prior-graph-full"):
    meta = {
        "p": p, "n": n, "d": 2, "K": len(edges),
        "n_iter": 2 * T, "burn_in": T, "thin": 1, "n_retained": T,
        "seed": seed, "init_mode": init_mode, "chain_id": chain_id,
        "gene_ids": [f"g{i}" for i in range(p)],
        "sample_ids": [f"s{j}" for j in range(n)],
        "edges": [list(e) for e in edges],
    }
    store = TraceStore(meta)
    rng = np.random.default_rng(seed)
    store.iterations = np.arange(T + 1, 2 * T + 1)
    store.edge_included = (rng.random((T, len(edges))) < 0.5).astype(np.uint8)
    store.edge_beta = rng.normal(size=(T, len(edges))) * store.edge_included
    store.counts_plus = rng.integers(0, T // 2, size=(p, n))
    store.counts_minus = rng.integers(0, T // 2, size=(p, n))
    store.edge_count = np.concatenate([
        rng.integers(0, len(edges) + 1, size=T),
        store.edge_included.sum(axis=1),
    ]).astype(np.int64)
    store.stats = MoveStats(len(edges))
    store.stats.add("b_row", 100, 37)
    store.stats.add("alpha", 50, 50)
    return store


def test_all_over_expressed_gives_pstar_one():
    store = make_store()
    store.counts_plus[:] = store.n_saved
    store.counts_minus[:] = 0
    s = compute_summary(store)
    assert np.all(s.p_star == 1.0)


def test_never_visited_edge_zeroes():
    store = make_store()
    store.edge_included[:, 1] = 0
    store.edge_beta[:, 1] = 0.0
    s = compute_summary(store)
    assert s.v[1] == 0.0
    assert s.beta_mean[1] == 0.0
    assert s.beta_mean_given_inclusion[1] == 0.0


def test_probability_bounds_hold():
    s = compute_summary(make_store(seed=3))
    assert np.all(s.pi_plus + s.pi_minus <= 1.0 + 1e-12)
    assert np.all(s.p_star >= -1.0) and np.all(s.p_star <= 1.0)
    assert np.all(s.v >= 0.0) and np.all(s.v <= 1.0)


def test_beta_mean_bounded_by_observed_values():
    store = make_store(seed=4)
    s = compute_summary(store)
    for t in range(store.meta["K"]):
        assert abs(s.beta_mean[t]) <= np.abs(store.edge_beta[:, t]).max() + 1e-12


def test_summary_matches_recount_from_saved_csv(tmp_path):
    store = make_store(seed=5)
    store.save(tmp_path)
    s = compute_summary(TraceStore.load(tmp_path))
    edges = pd.read_csv(tmp_path / "edges.csv")
    for t in range(store.meta["K"]):
        sub = edges[edges["edge_index"] == t]
        assert s.v[t] == pytest.approx(sub["included"].mean(), abs=1e-12)
        assert s.beta_mean[t] == pytest.approx(sub["beta"].mean(), rel=1e-9,
                                               abs=1e-12)


def test_pooling_equals_concatenated_recount():
    a = make_store(seed=6, chain_id=0)
    b = make_store(seed=7, chain_id=1)
    pooled = compute_summary([a, b])
    inc = np.concatenate([a.edge_included, b.edge_included])
    assert np.allclose(pooled.v, inc.mean(axis=0))
    assert pooled.n_draws == a.n_saved + b.n_saved
    counts = a.counts_plus + b.counts_plus
    assert np.allclose(pooled.pi_plus, counts / pooled.n_draws)


def test_pooling_rejects_mismatched_universes():
    a = make_store(seed=8)
    b = make_store(seed=9, p=4, edges=((1, 0), (0, 1), (2, 0), (3, 0)))
    with pytest.raises(ValidationError):
        compute_summary([a, b])


def test_degree_posterior_support_within_prior_graph():
    store = make_store(seed=10)
    s = compute_summary(store)
    assert np.allclose(s.degree_posterior.sum(axis=1), 1.0)
    # gene 0 touches edges (1,0), (0,1), (2,0): neighbors {1, 2}, max degree 2
    assert s.degree_posterior.shape[1] == 3
    # gene 1 has the single neighbor 0 through the reciprocal pair
    assert np.all(s.degree_posterior[1, 2:] == 0.0)


def test_degree_counts_reciprocal_pair_once():
    store = make_store(seed=11, T=4)
    store.edge_included[:] = 0
    store.edge_included[0, 0] = 1   # 1 -> 0 only
    store.edge_included[1, :2] = 1  # both directions of the pair
    s = compute_summary(store)
    # draws 0 and 1 both give gene 0 exactly one neighbor from the pair
    assert s.degree_posterior[1, 1] == pytest.approx(0.5)
    assert s.degree_posterior[1, 0] == pytest.approx(0.5)


def test_median_model_selection():
    store = make_store(seed=12)
    s = compute_summary(store)
    empty = select_median_model(s, threshold=1.0)
    assert empty.edges == []
    everything = select_median_model(s, threshold=-0.01)
    assert len(everything.edges) == store.meta["K"]
    # strict inequality at the threshold
    s.v[0] = 0.5
    sel = select_median_model(s, threshold=0.5)
    assert (1, 0) not in sel.edge_set


def test_median_model_monotone_in_threshold():
    s = compute_summary(make_store(seed=13))
    sizes = [len(select_median_model(s, th).edges)
             for th in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert sizes == sorted(sizes, reverse=True)


def _truth(p, true_edges):
    B = np.eye(p)
    for (k, i) in true_edges:
        B[i, k] = 1.0
    return SimulationTruth(B_true=B, Omega_z=np.eye(p), E_star=list(true_edges))


def test_evaluate_exact_recovery():
    sel = SelectedGraph(threshold=0.5,
                        edges=[((1, 0), 0.9, 0.5), ((2, 0), 0.8, -0.2)],
                        p=3, gene_ids=["g0", "g1", "g2"])
    fdr, power, counts = evaluate_against_truth(sel, _truth(3, [(1, 0), (2, 0)]))
    assert fdr == 0.0 and power == 1.0
    assert counts == {"tp": 2, "fp": 0, "fn": 0, "n_selected": 2, "n_true": 2}


def test_evaluate_empty_selection_convention():
    sel = SelectedGraph(threshold=0.5, edges=[], p=3,
                        gene_ids=["g0", "g1", "g2"])
    fdr, power, counts = evaluate_against_truth(sel, _truth(3, [(1, 0)]))
    assert fdr == 0.0 and power == 0.0


def test_evaluate_counts_false_positives():
    sel = SelectedGraph(threshold=0.5,
                        edges=[((1, 0), 0.9, 0.1), ((0, 1), 0.7, 0.2)],
                        p=3, gene_ids=["g0", "g1", "g2"])
    fdr, power, counts = evaluate_against_truth(sel, _truth(3, [(1, 0)]))
    assert fdr == pytest.approx(0.5)
    assert power == 1.0


def test_evaluate_against_truth_record_dict():
    sel = SelectedGraph(threshold=0.5, edges=[((1, 0), 0.9, 0.1)], p=2,
                        gene_ids=["a", "b"])
    record = {
        "gene_ids": ["a", "b"],
        "edges": [
            {"src": "b", "dst": "a", "is_true": True, "beta_true": 1.0},
            {"src": "a", "dst": "b", "is_true": False, "beta_true": 0.0},
        ],
        "e_true": [[0, 0], [0, 0]],
    }
    fdr, power, counts = evaluate_against_truth(sel, record)
    assert fdr == 0.0 and power == 1.0
    with pytest.raises(ValidationError):
        evaluate_against_truth(
            SelectedGraph(threshold=0.5, edges=[], p=2, gene_ids=["x", "y"]),
            record,
        )


def test_classification_auc_perfect_and_chance():
    p_star = np.array([[0.9, -0.8], [0.05, -0.02]])
    e_true = np.array([[1, -1], [0, 0]])
    assert classification_auc(p_star, e_true) == 1.0
    assert np.isnan(classification_auc(p_star, np.zeros((2, 2))))


def test_overlap_statistic_identical_chains_is_zero():
    x = np.array([3, 4, 5, 4, 3])
    assert overlap_statistic(x, x) == 0.0


def test_diagnostics_report_contents():
    a = make_store(seed=20, chain_id=0)
    b = make_store(seed=20, chain_id=1, init_mode="empty-graph")
    report = diagnostics([a, b])
    assert "overlap_statistic chain0-chain1 = 0.0000" in report
    for kernel in ("b_row", "alpha"):
        assert kernel in report
    assert "empty-graph" in report
