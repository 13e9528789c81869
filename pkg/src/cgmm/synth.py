"""Deterministic synthetic datasets for tests and demos."""

from __future__ import annotations

import numpy as np

from .graph import Graph, GraphDataset

__all__ = ["gen_cycle", "gen_cycles", "gen_random_graphs", "gen_two_hop"]

CENTER, SPOKE, LEAF_A, LEAF_B = 1, 2, 3, 4


def _star_of_stars(gid, pairs, target):
    """Center -> spokes -> two leaves per spoke; ``pairs`` gives the leaf labels of each spoke."""
    labels = [CENTER]
    arcs = []
    for leaves in pairs:
        s = len(labels)
        labels.append(SPOKE)
        arcs += [(0, s, 1), (s, 0, 1)]
        for lab in leaves:
            v = len(labels)
            labels.append(lab)
            arcs += [(s, v, 1), (v, s, 1)]
    return Graph.from_arcs(gid, labels, arcs, target)


def gen_two_hop(n_per_class: int, seed=0) -> GraphDataset:
    """Two classes that agree on every vertex label and every labeled arc.

    Each graph is a center with ``k`` spokes (``k`` even, drawn per pair of
    graphs) and two leaves per spoke. In class 0 half the spokes carry two
    label-3 leaves and the other half two label-4 leaves; in class 1 every
    spoke carries one of each. Label histograms and (label, label, arc)
    triples coincide, so only context reaching two hops separates them.
    Graph ``2m`` (class 0) and ``2m+1`` (class 1) form a matched pair.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = np.random.default_rng(seed)
    graphs = []
    for m in range(n_per_class):
        k = 2 * int(rng.integers(1, 4))
        class0 = [(LEAF_A, LEAF_A)] * (k // 2) + [(LEAF_B, LEAF_B)] * (k // 2)
        class0 = [class0[i] for i in rng.permutation(k)]
        class1 = [(LEAF_A, LEAF_B) if rng.random() < 0.5 else (LEAF_B, LEAF_A) for _ in range(k)]
        graphs.append(_star_of_stars(f"twohop_{m}_0", class0, 0))
        graphs.append(_star_of_stars(f"twohop_{m}_1", class1, 1))
    return GraphDataset(graphs, M=4, A=1, name="two_hop")


def gen_random_graphs(n: int, v_range=(1, 10), edge_prob: float = 0.2, M: int = 3, A: int = 2,
                      seed=0, n_classes: int = 2) -> GraphDataset:
    """Directed Erdos-Renyi graphs with uniform labels; no self-loops."""
    rng = np.random.default_rng(seed)
    lo, hi = v_range
    graphs = []
    for k in range(n):
        nv = int(rng.integers(lo, hi + 1))
        labels = rng.integers(1, M + 1, size=nv)
        mask = rng.random((nv, nv)) < edge_prob
        np.fill_diagonal(mask, False)
        src, dst = np.nonzero(mask)
        arc_labels = rng.integers(1, A + 1, size=len(src))
        graphs.append(Graph(f"rand_{k}", labels, src, dst, arc_labels, int(rng.integers(n_classes))))
    return GraphDataset(graphs, M=M, A=A, name="random")


def gen_cycle(length: int, labels=None, seed=0, undirected: bool = False, M: int = 3,
              gid: str = "cycle", target=None) -> Graph:
    """A single cycle ``0 -> 1 -> ... -> length-1 -> 0`` (both directions if undirected).

    ``labels`` defaults to a random sequence over ``1..M``.
    """
    if length < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    if labels is None:
        labels = np.random.default_rng(seed).integers(1, M + 1, size=length)
    if len(labels) != length:
        raise ValueError("need one label per vertex")
    arcs = [(u, (u + 1) % length, 1) for u in range(length)]
    if undirected:
        arcs += [(v, u, a) for u, v, a in arcs]
    return Graph.from_arcs(gid, labels, arcs, target)


def gen_cycles(lengths, seed=0, undirected: bool = False, M: int = 3) -> GraphDataset:
    rng = np.random.default_rng(seed)
    graphs = [gen_cycle(n, rng.integers(1, M + 1, size=n), undirected=undirected,
                        gid=f"cycle_{k}", target=k % 2)
              for k, n in enumerate(lengths)]
    return GraphDataset(graphs, M=M, A=1, name="cycles")
