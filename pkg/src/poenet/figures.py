"""Figure rendering for the CLI report paths.

Every function writes a PNG next to the delimited outputs and returns the
path. Axes carry the same quantities as the corresponding tables.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_edge_count_traces(edge_counts, burn_in, path, labels=None):
    """Edge count by MCMC iteration for one or more chains."""
    fig, ax = plt.subplots(figsize=(7.0, 3.5))
    for c, trace in enumerate(edge_counts):
        label = labels[c] if labels else f"chain {c}"
        ax.plot(np.arange(1, len(trace) + 1), trace, lw=0.7, label=label)
    if burn_in:
        ax.axvline(burn_in, color="k", ls="--", lw=0.8)
    ax.set_xlabel("MCMC iteration")
    ax.set_ylabel("edges included")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_pstar_heatmap(summary, path):
    """Signed over/under-expression probabilities, genes by samples."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    im = ax.imshow(summary.p_star, cmap="RdBu_r", vmin=-1.0, vmax=1.0,
                   aspect="auto", interpolation="nearest")
    ax.set_xlabel("sample")
    ax.set_ylabel("gene")
    fig.colorbar(im, ax=ax, label="p* = pi+ - pi-")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_inclusion_vs_beta(summary, path, false_edges=None, threshold=0.5):
    """Posterior mean coefficient against inclusion probability per edge.

    False edges (when simulation truth is available) are drawn as filled
    black circles.
    """
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    v = summary.v
    bm = summary.beta_mean
    if false_edges:
        false_set = set(false_edges)
        is_false = np.array([e in false_set for e in summary.edges])
    else:
        is_false = np.zeros(len(summary.edges), dtype=bool)
    ax.scatter(v[~is_false], bm[~is_false], s=18, facecolors="none",
               edgecolors="tab:blue", label="edge")
    if is_false.any():
        ax.scatter(v[is_false], bm[is_false], s=18, color="k", label="false edge")
    ax.axvline(threshold, color="k", ls="--", lw=0.8)
    ax.set_xlabel("inclusion probability")
    ax.set_ylabel("posterior mean coefficient")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_degree_posterior(summary, path):
    """Posterior mean degree with 95% interval per gene."""
    table = summary.degree_posterior
    degrees = np.arange(table.shape[1])
    mean = table @ degrees
    cdf = np.cumsum(table, axis=1)
    lo = np.argmax(cdf >= 0.025, axis=1)
    hi = np.argmax(cdf >= 0.975, axis=1)
    x = np.arange(len(mean))
    fig, ax = plt.subplots(figsize=(max(5.0, 0.25 * len(mean)), 3.5))
    ax.errorbar(x, mean, yerr=[mean - lo, hi - mean], fmt="o", ms=3,
                lw=0.8, capsize=2)
    ax.set_xticks(x)
    ax.set_xticklabels(summary.gene_ids, rotation=90, fontsize=6)
    ax.set_ylabel("posterior degree")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
