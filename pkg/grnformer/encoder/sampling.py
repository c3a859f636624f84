"""Neighbor sampling and edge perturbation of regulatory graphs."""

import logging
import math
from typing import List, Optional, Set, Tuple

import numpy as np

from grnformer.models import CoExpressionGraph, Edge, EdgeProvenance, Grn, GrnScale

logger = logging.getLogger(__name__)


def sample_neighbors(
    grn: Grn,
    node: int,
    sample_size: int,
    rng: np.random.Generator,
    with_replacement: bool = False,
) -> np.ndarray:
    """Uniform fixed-size sample of a node's undirected neighborhood.

    Without replacement a neighborhood smaller than ``sample_size`` is
    returned whole; with replacement exactly ``sample_size`` draws are made.
    Isolated nodes always give an empty sample.
    """
    neighbors = grn.neighbors[node]
    if neighbors.size == 0:
        return neighbors
    if with_replacement:
        return rng.choice(neighbors, size=sample_size, replace=True)
    if neighbors.size <= sample_size:
        return neighbors
    return rng.choice(neighbors, size=sample_size, replace=False)


def n_replaced(alpha: float, n_edges: int) -> int:
    """floor(alpha * |E|), robust to representation error in alpha."""
    return int(math.floor(alpha * n_edges + 1e-9))


def _orient(u: int, v: int, tfs) -> Tuple[int, int]:
    if (u in tfs) != (v in tfs):
        return (u, v) if u in tfs else (v, u)
    return (min(u, v), max(u, v))


def _swap(grn: Grn, added_pairs: List[Tuple[int, int]], removed: np.ndarray, provenance: EdgeProvenance) -> Grn:
    dropped = set(int(i) for i in removed)
    kept = [e for i, e in enumerate(grn.edges) if i not in dropped]
    added = [Edge(*_orient(u, v, grn.tfs), weight=1.0, provenance=provenance) for u, v in added_pairs]
    return grn.replace(kept + added)


def _fresh_co_expression_pairs(
    co_graph: CoExpressionGraph,
    existing: Set[Tuple[int, int]],
    count: int,
    rng: np.random.Generator,
) -> List[Tuple[int, int]]:
    """Up to ``count`` distinct clique pairs outside ``existing``, uniformly at random.

    Pairs are drawn by clique index and rejected when taken. A clique that is
    not much larger than the blocked and requested pairs is listed instead.
    """
    active = set(co_graph.active.tolist())
    blocked = {p for p in existing if p[0] in active and p[1] in active}
    count = min(count, co_graph.n_pairs - len(blocked))
    if count <= 0:
        return []
    if co_graph.n_pairs <= 4 * (len(blocked) + count):
        listed = ((min(u, v), max(u, v)) for u, v in co_graph.pairs().tolist())
        fresh = [p for p in listed if p not in blocked]
        return [fresh[i] for i in rng.choice(len(fresh), size=count, replace=False)]
    taken = set(blocked)
    chosen: List[Tuple[int, int]] = []
    while len(chosen) < count:
        for u, v in co_graph.pairs_at(rng.integers(co_graph.n_pairs, size=count - len(chosen))).tolist():
            pair = (min(u, v), max(u, v))
            if pair not in taken and len(chosen) < count:
                taken.add(pair)
                chosen.append(pair)
    return chosen


def perturb_grn(grn: Grn, co_graph: CoExpressionGraph, alpha: float, rng: np.random.Generator) -> Grn:
    """Replace floor(alpha |E|) edges with co-expression pairs.

    A uniform sample of original edges is removed; the same number of
    pairs is drawn uniformly from the cell's co-expression clique by pair
    index, skipping pairs that already appear (in either direction) in the
    original graph; the clique is never listed when it dwarfs the graph.
    Added edges have weight 1, provenance ``coexpression``, and start at
    the TF endpoint when exactly one endpoint is a TF.

    With too few co-expression pairs as many as exist are added and a
    warning is logged.
    """
    n_swap = n_replaced(alpha, len(grn))
    if n_swap == 0:
        return grn
    removed = rng.choice(len(grn), size=n_swap, replace=False)

    added = _fresh_co_expression_pairs(co_graph, grn.undirected_pairs, n_swap, rng)
    if len(added) < n_swap:
        logger.warning(
            "cell %s offers %d new co-expression pairs for %d replacement edges",
            co_graph.owner, len(added), n_swap,
        )
    return _swap(grn, added, removed, EdgeProvenance.COEXPRESSION)


def _fresh_random_pairs(n_genes: int, existing: Set[Tuple[int, int]], count: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    available = n_genes * (n_genes - 1) // 2 - len(existing)
    count = min(count, available)
    chosen: List[Tuple[int, int]] = []
    taken = set(existing)
    while len(chosen) < count:
        u, v = (int(i) for i in rng.choice(n_genes, size=2, replace=False))
        pair = (min(u, v), max(u, v))
        if pair not in taken:
            taken.add(pair)
            chosen.append(pair)
    return chosen


def random_perturb_grn(grn: Grn, alpha: float, rng: np.random.Generator) -> Grn:
    """Edge perturbation whose replacement pairs ignore co-expression."""
    n_swap = n_replaced(alpha, len(grn))
    if n_swap == 0:
        return grn
    removed = rng.choice(len(grn), size=n_swap, replace=False)
    added = _fresh_random_pairs(grn.n_genes, set(grn.undirected_pairs), n_swap, rng)
    if len(added) < n_swap:
        logger.warning("graph %s is nearly complete; adding %d of %d random edges", grn.owner, len(added), n_swap)
    return _swap(grn, added, removed, EdgeProvenance.RANDOM)


def random_grn(
    n_edges: int,
    n_genes: int,
    tfs,
    rng: np.random.Generator,
    owner: str,
    scale: GrnScale,
) -> Grn:
    """TF -> gene graph with ``n_edges`` uniformly drawn regulatory edges."""
    tf_list = np.array(sorted(tfs), dtype=np.int64)
    capacity = len(tf_list) * (n_genes - 1)
    n_edges = min(n_edges, capacity)
    pairs: List[Tuple[int, int]] = []
    seen: Set[Tuple[int, int]] = set()
    while len(pairs) < n_edges:
        source = int(rng.choice(tf_list))
        target = int(rng.integers(n_genes))
        if target == source or (source, target) in seen:
            continue
        seen.add((source, target))
        pairs.append((source, target))
    edges = tuple(Edge(s, t, 1.0) for s, t in pairs)
    return Grn(scale=scale, edges=edges, owner=owner, n_genes=n_genes, tfs=frozenset(tfs))


__all__ = [
    "sample_neighbors",
    "n_replaced",
    "perturb_grn",
    "random_perturb_grn",
    "random_grn",
]
