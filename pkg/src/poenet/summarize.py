"""Posterior summaries, median-model selection, evaluation against simulation
truth, and convergence diagnostics. Pure post-processing over trace stores;
multi-chain input is pooled by concatenating retained draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .model import ValidationError


def _as_list(traces):
    return list(traces) if isinstance(traces, (list, tuple)) else [traces]


def _check_compatible(stores):
    first = stores[0].meta
    for other in stores[1:]:
        for key in ("p", "n", "K", "gene_ids", "sample_ids", "edges"):
            if other.meta[key] != first[key]:
                raise ValidationError(f"traces disagree on {key}; cannot pool")
    return first


@dataclass
class PosteriorSummary:
    """Cell-level expression probabilities and edge-level inclusion summaries."""

    pi_plus: np.ndarray                 # (p, n)
    pi_minus: np.ndarray                # (p, n)
    p_star: np.ndarray                  # (p, n) = pi_plus - pi_minus
    v: np.ndarray                       # (K,) edge inclusion probabilities
    beta_mean: np.ndarray               # (K,) model-averaged coefficient means
    beta_mean_given_inclusion: np.ndarray
    degree_posterior: np.ndarray        # (p, max_degree + 1)
    edge_count_traces: list             # per chain, every sweep incl. burn-in
    gene_ids: list
    sample_ids: list
    edges: list                         # (src, dst) index pairs, G0 order
    n_draws: int
    burn_in: int


def compute_summary(traces) -> PosteriorSummary:
    """Empirical posterior frequencies from one or more trace stores."""
    stores = _as_list(traces)
    if not stores:
        raise ValidationError("no traces supplied")
    meta = _check_compatible(stores)
    total = sum(s.n_saved for s in stores)
    if total < 1:
        raise ValidationError("traces contain no retained draws")

    counts_plus = sum(s.counts_plus for s in stores)
    counts_minus = sum(s.counts_minus for s in stores)
    pi_plus = counts_plus / total
    pi_minus = counts_minus / total

    included = np.concatenate([s.edge_included for s in stores], axis=0)
    betas = np.concatenate([s.edge_beta for s in stores], axis=0)
    v = included.mean(axis=0)
    beta_mean = betas.mean(axis=0)
    incl_counts = included.sum(axis=0)
    beta_given = np.where(incl_counts > 0,
                          betas.sum(axis=0) / np.maximum(incl_counts, 1), 0.0)

    edges = [tuple(e) for e in meta["edges"]]
    p = meta["p"]
    degree_posterior = _degree_posterior(included, edges, p)

    return PosteriorSummary(
        pi_plus=pi_plus,
        pi_minus=pi_minus,
        p_star=pi_plus - pi_minus,
        v=v,
        beta_mean=beta_mean,
        beta_mean_given_inclusion=beta_given,
        degree_posterior=degree_posterior,
        edge_count_traces=[s.edge_count.copy() for s in stores],
        gene_ids=list(meta["gene_ids"]),
        sample_ids=list(meta["sample_ids"]),
        edges=edges,
        n_draws=total,
        burn_in=meta["burn_in"],
    )


def _degree_posterior(included, edges, p):
    """Per-gene distribution of neighbor counts over the sampled graphs.

    A neighbor counts once even when linked by a reciprocal pair, so each
    neighbor's indicator is the union of its connecting edges.
    """
    neighbor_slots = [dict() for _ in range(p)]
    for t, (src, dst) in enumerate(edges):
        neighbor_slots[src].setdefault(dst, []).append(t)
        neighbor_slots[dst].setdefault(src, []).append(t)
    max_deg = max((len(s) for s in neighbor_slots), default=0)
    T = included.shape[0]
    table = np.zeros((p, max_deg + 1))
    for i in range(p):
        slots = neighbor_slots[i]
        if slots:
            deg = np.zeros(T, dtype=np.int64)
            for idxs in slots.values():
                deg += included[:, idxs].any(axis=1)
            hist = np.bincount(deg, minlength=max_deg + 1)
        else:
            hist = np.zeros(max_deg + 1, dtype=np.int64)
            hist[0] = T
        table[i] = hist / T
    return table


@dataclass
class SelectedGraph:
    """Edges surviving the inclusion-probability cut, directions from G0."""

    threshold: float
    edges: list                 # ((src, dst), v, beta_mean) triples
    p: int
    gene_ids: list

    @property
    def edge_set(self):
        return {e for e, _, _ in self.edges}


def select_median_model(summary: PosteriorSummary, threshold=0.5) -> SelectedGraph:
    """Keep edges with inclusion probability strictly above the threshold."""
    chosen = [
        (edge, float(summary.v[t]), float(summary.beta_mean[t]))
        for t, edge in enumerate(summary.edges)
        if summary.v[t] > threshold
    ]
    return SelectedGraph(
        threshold=float(threshold),
        edges=chosen,
        p=len(summary.gene_ids),
        gene_ids=list(summary.gene_ids),
    )


def evaluate_against_truth(selected: SelectedGraph, truth):
    """Realized FDR and power of a selected graph over directed edges.

    ``truth`` is either a SimulationTruth or a loaded truth.json record.
    FDR uses the max(1, discoveries) convention so an empty selection scores 0.
    """
    if isinstance(truth, dict):
        if truth["gene_ids"] != selected.gene_ids:
            raise ValidationError("truth and selection use different gene universes")
        index = {g: i for i, g in enumerate(truth["gene_ids"])}
        true_edges = {
            (index[rec["src"]], index[rec["dst"]])
            for rec in truth["edges"]
            if rec["is_true"]
        }
    else:
        if truth.B_true.shape[0] != selected.p:
            raise ValidationError("truth and selection use different gene universes")
        true_edges = set(truth.E_star)
    picked = selected.edge_set
    tp = len(picked & true_edges)
    fp = len(picked - true_edges)
    fn = len(true_edges - picked)
    fdr = fp / max(1, fp + tp)
    power = tp / len(true_edges) if true_edges else float("nan")
    counts = {
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "n_selected": len(picked),
        "n_true": len(true_edges),
    }
    return fdr, power, counts


def classification_auc(p_star, e_true) -> float:
    """AUC of ranking cells by |p*| against the truly non-null cells."""
    scores = np.abs(np.asarray(p_star)).ravel()
    labels = (np.asarray(e_true) != 0).ravel()
    n1 = int(labels.sum())
    n0 = labels.size - n1
    if n1 == 0 or n0 == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def overlap_statistic(counts_a, counts_b) -> float:
    """Difference of mean edge counts in units of the pooled SD."""
    ma, mb = np.mean(counts_a), np.mean(counts_b)
    va, vb = np.var(counts_a), np.var(counts_b)
    pooled = math.sqrt(0.5 * (va + vb))
    if pooled == 0.0:
        return 0.0 if ma == mb else float("inf")
    return abs(ma - mb) / pooled


def diagnostics(traces) -> str:
    """Cross-chain edge-count comparison and per-kernel acceptance rates."""
    stores = _as_list(traces)
    if not stores:
        raise ValidationError("no traces supplied")
    lines = ["# convergence diagnostics", f"chains = {len(stores)}", ""]
    post = []
    lines.append("chain\tinit_mode\tn_iter\tburn_in\tmean_k_g\tsd_k_g\tmin_k_g\tmax_k_g")
    for s in stores:
        kept = s.edge_count[s.meta["burn_in"]:]
        post.append(kept)
        lines.append(
            "\t".join([
                str(s.meta["chain_id"]), s.meta["init_mode"],
                str(s.meta["n_iter"]), str(s.meta["burn_in"]),
                f"{kept.mean():.4f}", f"{kept.std():.4f}",
                str(kept.min()), str(kept.max()),
            ])
        )
    lines.append("")
    for a in range(len(stores)):
        for b in range(a + 1, len(stores)):
            stat = overlap_statistic(post[a], post[b])
            lines.append(
                f"overlap_statistic chain{stores[a].meta['chain_id']}"
                f"-chain{stores[b].meta['chain_id']} = {stat:.4f}"
            )
    lines.append("")
    lines.append("kernel\tproposals\taccepted\trate")
    merged = {}
    for s in stores:
        if s.stats is None:
            continue
        for name, (prop, acc) in s.stats.kernels.items():
            entry = merged.setdefault(name, [0, 0])
            entry[0] += prop
            entry[1] += acc
    for name in sorted(merged):
        prop, acc = merged[name]
        rate = acc / prop if prop else float("nan")
        lines.append(f"{name}\t{prop}\t{acc}\t{rate:.4f}")
    return "\n".join(lines) + "\n"
