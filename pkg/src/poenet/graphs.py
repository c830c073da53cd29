"""Directed pathway graphs, the edge-deletion model space, and the structure prior.

Nodes are integers in [0, p) and map one-to-one onto rows of the expression
matrix. Edges are ordered (src, dst) pairs; reciprocal pairs a->b and b->a
are two distinct edges and cycles are allowed. Undirected edges are not
supported.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy.special import betaln


class ReciprocalGraph:
    """Directed graph with exact O(1) edge membership, insertion and deletion.

    Edge iteration order is insertion order, so a graph built from an edge
    list file preserves the file's ordering.
    """

    def __init__(self, p, edges=()):
        if p < 1:
            raise ValueError(f"node count must be positive, got {p}")
        self.p = int(p)
        self._edges = {}
        self._parents = [set() for _ in range(self.p)]
        self._children = [set() for _ in range(self.p)]
        for src, dst in edges:
            self.add_edge(src, dst)

    def _check_node(self, i):
        if not 0 <= i < self.p:
            raise IndexError(f"node {i} out of range [0, {self.p})")

    def add_edge(self, src, dst):
        self._check_node(src)
        self._check_node(dst)
        if src == dst:
            raise ValueError(f"self-loop {src}->{dst} not allowed")
        if (src, dst) in self._edges:
            raise ValueError(f"duplicate edge {src}->{dst}")
        self._edges[(src, dst)] = None
        self._parents[dst].add(src)
        self._children[src].add(dst)

    def remove_edge(self, src, dst):
        if (src, dst) not in self._edges:
            raise KeyError(f"edge {src}->{dst} not in graph")
        del self._edges[(src, dst)]
        self._parents[dst].discard(src)
        self._children[src].discard(dst)

    def has_edge(self, src, dst):
        return (src, dst) in self._edges

    @property
    def edges(self):
        return list(self._edges)

    @property
    def n_edges(self):
        return len(self._edges)

    def copy(self):
        return ReciprocalGraph(self.p, self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, ReciprocalGraph)
            and self.p == other.p
            and set(self._edges) == set(other._edges)
        )

    def __repr__(self):
        return f"ReciprocalGraph(p={self.p}, edges={self.edges})"


class UndirectedGraph:
    """Symmetric adjacency over [0, p); pairs stored as sorted tuples."""

    def __init__(self, p, pairs=()):
        self.p = int(p)
        self.pairs = set()
        for a, b in pairs:
            self.add_pair(a, b)

    def add_pair(self, a, b):
        if a == b:
            raise ValueError(f"self-loop {a} not allowed")
        if not (0 <= a < self.p and 0 <= b < self.p):
            raise IndexError(f"pair ({a},{b}) out of range")
        self.pairs.add((min(a, b), max(a, b)))

    def has_pair(self, a, b):
        return (min(a, b), max(a, b)) in self.pairs

    def neighbors(self, i):
        out = set()
        for a, b in self.pairs:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return sorted(out)


class PriorGraph:
    """The centering graph G0; the sampler explores its edge subsets.

    Immutable for the duration of a chain. `K` is the total edge count and
    indexes the fixed edge ordering used by traces and reversible-jump moves.
    """

    def __init__(self, graph: ReciprocalGraph):
        self.graph = graph.copy()
        self.edges = self.graph.edges
        self.K = len(self.edges)
        self._edge_index = {e: t for t, e in enumerate(self.edges)}

    @property
    def p(self):
        return self.graph.p

    def edge_index(self, src, dst):
        return self._edge_index[(src, dst)]

    def __repr__(self):
        return f"PriorGraph(p={self.p}, K={self.K})"


@dataclass(frozen=True)
class StructurePriorParams:
    """Beta hyperparameters of the exchangeable edge-inclusion probability."""

    a_phi: float = 1.0
    b_phi: float = 1.0

    def __post_init__(self):
        if self.a_phi <= 0 or self.b_phi <= 0:
            raise ValueError("a_phi and b_phi must be strictly positive")


def parents(g: ReciprocalGraph, i) -> list:
    """All k with k->i in g, in ascending index order."""
    g._check_node(i)
    return sorted(g._parents[i])


def children(g: ReciprocalGraph, i) -> list:
    """All k with i->k in g, in ascending index order."""
    g._check_node(i)
    return sorted(g._children[i])


def degree(g: ReciprocalGraph, i) -> int:
    """Number of distinct neighbors of i; a reciprocal pair counts once."""
    g._check_node(i)
    return len(g._parents[i] | g._children[i])


def moralize(g: ReciprocalGraph) -> UndirectedGraph:
    """Marry parents of common children and drop edge directions."""
    moral = UndirectedGraph(g.p)
    for src, dst in g.edges:
        moral.add_pair(src, dst)
    for child in range(g.p):
        pa = sorted(g._parents[child])
        for a_idx in range(len(pa)):
            for b_idx in range(a_idx + 1, len(pa)):
                moral.add_pair(pa[a_idx], pa[b_idx])
    return moral


def is_subgraph(g: ReciprocalGraph, g0: PriorGraph) -> bool:
    """True iff every edge of g lies in the prior graph."""
    if g.p != g0.p:
        raise ValueError(f"node count mismatch: {g.p} vs {g0.p}")
    return all(e in g0._edge_index for e in g._edges)


def log_structure_prior(k_g: int, K: int, prior: StructurePriorParams) -> float:
    """Log prior probability of a graph with k_g of the K candidate edges.

    Beta-binomial marginal of exchangeable Bernoulli inclusions with a
    Beta(a_phi, b_phi) mixing probability:

        p(G) = B(k_g + a_phi, K - k_g + b_phi) / B(a_phi, b_phi)

    Depends on the graph only through its edge count, and sums to one over
    the 2^K subsets of the prior graph.
    """
    if not 0 <= k_g <= K:
        raise ValueError(f"edge count {k_g} outside [0, {K}]")
    return float(
        betaln(k_g + prior.a_phi, K - k_g + prior.b_phi)
        - betaln(prior.a_phi, prior.b_phi)
    )
