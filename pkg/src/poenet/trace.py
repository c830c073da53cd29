"""Persisted per-iteration draws of one chain.

On disk a trace directory holds one CSV per block plus key-value JSON:

  theta.csv          iteration,parameter,value   (thinned post-burn-in draws)
  edges.csv          iteration,edge_index,included,beta
  scores_summary.csv running over/under-expression counts per cell
  edge_count.csv     iteration,k_g for every sweep, burn-in included
  stats.json         proposal/acceptance counters
  meta.json          shapes, run settings, ids, and the G0 edge order
"""

from __future__ import annotations

import json
import os

import numpy as np
import pandas as pd

from .io import atomic_write_text, fmt
from .model import ValidationError

TRACE_FILES = ("theta.csv", "edges.csv", "scores_summary.csv",
               "edge_count.csv", "stats.json", "meta.json")


class TraceStore:
    """In-memory accumulator for one chain's retained draws."""

    def __init__(self, meta):
        self.meta = dict(meta)
        T = self.meta["n_retained"]
        p, n, d, K = (self.meta[k] for k in ("p", "n", "d", "K"))
        self.iterations = np.zeros(T, dtype=np.int64)
        self.alpha = np.zeros((T, n))
        self.mu = np.zeros((T, p))
        self.sigma2 = np.zeros((T, p))
        self.kappa_minus = np.zeros((T, p))
        self.kappa_plus = np.zeros((T, p))
        self.s2 = np.zeros((T, p))
        self.phi = np.zeros(T)
        self.b = np.zeros((T, p, d))
        self.edge_included = np.zeros((T, K), dtype=np.uint8)
        self.edge_beta = np.zeros((T, K))
        self.counts_plus = np.zeros((p, n), dtype=np.int64)
        self.counts_minus = np.zeros((p, n), dtype=np.int64)
        self.edge_count = np.zeros(self.meta["n_iter"], dtype=np.int64)
        self.stats = None
        self.final_state = None

    # -- construction -------------------------------------------------------

    @classmethod
    def allocate(cls, data, g0, config, chain_id=0):
        meta = {
            "p": data.p,
            "n": data.n,
            "d": data.d,
            "K": g0.K,
            "n_iter": config.n_iter,
            "burn_in": config.burn_in,
            "thin": config.thin,
            "n_retained": config.n_retained,
            "seed": config.seed,
            "init_mode": config.init_mode,
            "chain_id": chain_id,
            "gene_ids": list(data.gene_ids),
            "sample_ids": list(data.sample_ids),
            "edges": [[int(src), int(dst)] for src, dst in g0.edges],
        }
        return cls(meta)

    @property
    def n_saved(self):
        return self.meta["n_retained"]

    @property
    def edges(self):
        return [tuple(e) for e in self.meta["edges"]]

    def record(self, slot, state, g0) -> None:
        mix = state.mixture
        self.iterations[slot] = state.iteration
        self.alpha[slot] = mix.alpha
        self.mu[slot] = mix.mu
        self.sigma2[slot] = mix.sigma2
        self.kappa_minus[slot] = mix.kappa_minus
        self.kappa_plus[slot] = mix.kappa_plus
        self.s2[slot] = state.sem.s2
        self.phi[slot] = state.phi
        self.b[slot] = state.sem.b_coeffs
        B = state.sem.B
        graph = state.graph
        for t, (k, i) in enumerate(g0.edges):
            if graph.has_edge(k, i):
                self.edge_included[slot, t] = 1
                self.edge_beta[slot, t] = -B[i, k]
        E = state.latent.E
        self.counts_plus += E == 1
        self.counts_minus += E == -1

    # -- persistence --------------------------------------------------------

    def _theta_blocks(self):
        n, p, d = self.meta["n"], self.meta["p"], self.meta["d"]
        blocks = [("alpha", self.alpha, [f"alpha[{j}]" for j in range(n)]),
                  ("mu", self.mu, [f"mu[{i}]" for i in range(p)]),
                  ("sigma2", self.sigma2, [f"sigma2[{i}]" for i in range(p)]),
                  ("kappa_minus", self.kappa_minus,
                   [f"kappa_minus[{i}]" for i in range(p)]),
                  ("kappa_plus", self.kappa_plus,
                   [f"kappa_plus[{i}]" for i in range(p)]),
                  ("s2", self.s2, [f"s2[{i}]" for i in range(p)]),
                  ("b", self.b.reshape(self.n_saved, p * d),
                   [f"b[{i}][{c}]" for i in range(p) for c in range(d)]),
                  ("phi", self.phi[:, None], ["phi"])]
        return blocks

    def save(self, directory) -> None:
        directory = os.fspath(directory)
        os.makedirs(directory, exist_ok=True)
        blocks = self._theta_blocks()
        names = [nm for _, _, labels in blocks for nm in labels]
        theta = ["iteration,parameter,value"]
        for slot in range(self.n_saved):
            it = self.iterations[slot]
            values = np.concatenate([arr[slot] for _, arr, _ in blocks])
            theta.extend(
                f"{it},{nm},{fmt(v)}" for nm, v in zip(names, values)
            )
        atomic_write_text(os.path.join(directory, "theta.csv"),
                          "\n".join(theta) + "\n")

        edges = ["iteration,edge_index,included,beta"]
        for slot in range(self.n_saved):
            it = self.iterations[slot]
            inc = self.edge_included[slot]
            bet = self.edge_beta[slot]
            edges.extend(
                f"{it},{t},{int(inc[t])},{fmt(bet[t])}"
                for t in range(self.meta["K"])
            )
        atomic_write_text(os.path.join(directory, "edges.csv"),
                          "\n".join(edges) + "\n")

        gene_ids = self.meta["gene_ids"]
        sample_ids = self.meta["sample_ids"]
        scores = ["gene_index,sample_index,gene_id,sample_id,count_plus,count_minus"]
        for i in range(self.meta["p"]):
            for j in range(self.meta["n"]):
                scores.append(
                    f"{i},{j},{gene_ids[i]},{sample_ids[j]},"
                    f"{self.counts_plus[i, j]},{self.counts_minus[i, j]}"
                )
        atomic_write_text(os.path.join(directory, "scores_summary.csv"),
                          "\n".join(scores) + "\n")

        counts = ["iteration,k_g"]
        counts.extend(f"{t + 1},{self.edge_count[t]}"
                      for t in range(self.meta["n_iter"]))
        atomic_write_text(os.path.join(directory, "edge_count.csv"),
                          "\n".join(counts) + "\n")

        stats_dict = self.stats.to_dict() if self.stats is not None else {}
        atomic_write_text(os.path.join(directory, "stats.json"),
                          json.dumps(stats_dict, sort_keys=True, indent=1) + "\n")
        atomic_write_text(os.path.join(directory, "meta.json"),
                          json.dumps(self.meta, sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, directory):
        directory = os.fspath(directory)
        meta_path = os.path.join(directory, "meta.json")
        try:
            with open(meta_path, encoding="utf-8") as fh:
                meta = json.load(fh)
        except OSError as err:
            raise ValidationError(f"not a trace directory: {directory} ({err})") from err
        except json.JSONDecodeError as err:
            raise ValidationError(f"{meta_path}: invalid JSON ({err})") from err
        store = cls(meta)
        T = store.n_saved
        p, n, d, K = (meta[k] for k in ("p", "n", "d", "K"))

        theta = pd.read_csv(os.path.join(directory, "theta.csv"))
        per_iter = n + 5 * p + p * d + 1
        if len(theta) != T * per_iter:
            raise ValidationError(
                f"{directory}/theta.csv: expected {T * per_iter} rows, found {len(theta)}"
            )
        values = theta["value"].to_numpy().reshape(T, per_iter)
        labels = theta["parameter"].to_numpy()[:per_iter]
        blocks = store._theta_blocks()
        expected = [nm for _, _, names in blocks for nm in names]
        if list(labels) != expected:
            raise ValidationError(f"{directory}/theta.csv: unexpected parameter layout")
        store.iterations = theta["iteration"].to_numpy()[::per_iter].astype(np.int64)
        offset = 0
        store.alpha = values[:, offset:offset + n]; offset += n
        store.mu = values[:, offset:offset + p]; offset += p
        store.sigma2 = values[:, offset:offset + p]; offset += p
        store.kappa_minus = values[:, offset:offset + p]; offset += p
        store.kappa_plus = values[:, offset:offset + p]; offset += p
        store.s2 = values[:, offset:offset + p]; offset += p
        store.b = values[:, offset:offset + p * d].reshape(T, p, d); offset += p * d
        store.phi = values[:, offset]

        edges = pd.read_csv(os.path.join(directory, "edges.csv"))
        if len(edges) != T * K:
            raise ValidationError(
                f"{directory}/edges.csv: expected {T * K} rows, found {len(edges)}"
            )
        store.edge_included = (
            edges["included"].to_numpy().reshape(T, K).astype(np.uint8)
        )
        store.edge_beta = edges["beta"].to_numpy().reshape(T, K)

        scores = pd.read_csv(os.path.join(directory, "scores_summary.csv"))
        if len(scores) != p * n:
            raise ValidationError(f"{directory}/scores_summary.csv: wrong row count")
        store.counts_plus = scores["count_plus"].to_numpy().reshape(p, n)
        store.counts_minus = scores["count_minus"].to_numpy().reshape(p, n)

        ec = pd.read_csv(os.path.join(directory, "edge_count.csv"))
        store.edge_count = ec["k_g"].to_numpy().astype(np.int64)

        stats_path = os.path.join(directory, "stats.json")
        with open(stats_path, encoding="utf-8") as fh:
            stats_dict = json.load(fh)
        if stats_dict:
            from .sampler import MoveStats

            store.stats = MoveStats.from_dict(stats_dict)
        return store
