"""Spanning trees, offline LCA, tree resistances and BFS neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import AdjacencyView, Graph, GraphError


class UnionFind:
    """Array-based disjoint sets with path compression and union by rank."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int8)

    def find(self, x: int) -> int:
        p = self.parent
        root = x
        while p[root] != root:
            root = p[root]
        while p[x] != root:
            p[x], x = root, p[x]
        return int(root)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


@dataclass(frozen=True)
class SpanningTree:
    """Rooted spanning tree with per-vertex parent links and resistive depths.

    ``rdepth[v]`` is the sum of reciprocal edge weights on the root path, so
    the effective resistance between two tree vertices is
    ``rdepth[p] + rdepth[q] - 2 rdepth[lca]``.
    """

    root: int
    parent: np.ndarray        # -1 at root
    parent_edge: np.ndarray   # edge id into the owning graph, -1 at root
    parent_weight: np.ndarray # 0.0 at root
    depth: np.ndarray
    rdepth: np.ndarray
    in_tree: np.ndarray       # bool flag per graph edge
    order: np.ndarray         # BFS order from the root

    @property
    def n(self) -> int:
        return len(self.parent)

    def edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.in_tree)


def max_weight_spanning_tree(g: Graph, root: int = 0) -> SpanningTree:
    """Maximum-weight spanning tree via Kruskal.

    Edges are taken in descending weight order, ties broken by smaller edge
    id, so the result is deterministic. Raises if ``g`` is disconnected.
    """
    order = np.lexsort((np.arange(g.m), -g.edge_w))
    uf = UnionFind(g.n)
    in_tree = np.zeros(g.m, dtype=bool)
    taken = 0
    for k in order:
        if uf.union(int(g.edge_u[k]), int(g.edge_v[k])):
            in_tree[k] = True
            taken += 1
            if taken == g.n - 1:
                break
    if taken != g.n - 1:
        raise GraphError("graph is disconnected; no spanning tree exists")
    return tree_from_edges(g, np.flatnonzero(in_tree), root=root)


def tree_from_edges(g: Graph, edge_ids: np.ndarray, root: int = 0) -> SpanningTree:
    """Orient the given n-1 edges into a rooted SpanningTree (BFS from root)."""
    edge_ids = np.asarray(edge_ids, dtype=np.int64)
    if len(edge_ids) != g.n - 1:
        raise GraphError(f"need exactly {g.n - 1} edges, got {len(edge_ids)}")
    adj = g.subgraph_adjacency(edge_ids)
    n = g.n
    parent = np.full(n, -1, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    parent_weight = np.zeros(n)
    depth = np.zeros(n, dtype=np.int64)
    rdepth = np.zeros(n)
    order = np.empty(n, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    order[0] = root
    head, tail = 0, 1
    while head < tail:
        v = int(order[head])
        head += 1
        nbrs, eids = adj.neighbors(v)
        for u, e in zip(nbrs, eids):
            if not seen[u]:
                seen[u] = True
                parent[u] = v
                parent_edge[u] = e
                w = g.edge_w[e]
                parent_weight[u] = w
                depth[u] = depth[v] + 1
                rdepth[u] = rdepth[v] + 1.0 / w
                order[tail] = u
                tail += 1
    if tail != n:
        raise GraphError("edge set does not span the graph")
    in_tree = np.zeros(g.m, dtype=bool)
    in_tree[edge_ids] = True
    return SpanningTree(root=root, parent=parent, parent_edge=parent_edge,
                        parent_weight=parent_weight, depth=depth, rdepth=rdepth,
                        in_tree=in_tree, order=order)


def offline_lca(t: SpanningTree, queries: Sequence[tuple[int, int]]) -> np.ndarray:
    """Tarjan's offline lowest-common-ancestor algorithm.

    Answers all queries in one DFS over the tree with a disjoint-set union,
    near-linear in ``n + len(queries)``. Iterative, so deep trees are fine.
    """
    n = t.n
    children: list[list[int]] = [[] for _ in range(n)]
    for v in t.order[1:]:
        children[t.parent[v]].append(int(v))

    by_vertex: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    answers = np.full(len(queries), -1, dtype=np.int64)
    for qi, (p, q) in enumerate(queries):
        if not (0 <= p < n and 0 <= q < n):
            raise GraphError(f"query ({p}, {q}) out of range")
        if p == q:
            answers[qi] = p
        else:
            by_vertex[p].append((q, qi))
            by_vertex[q].append((p, qi))

    uf = UnionFind(n)
    ancestor = np.arange(n, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    # stack entries: (vertex, next-child index)
    stack: list[list[int]] = [[t.root, 0]]
    while stack:
        v, ci = stack[-1]
        if ci < len(children[v]):
            stack[-1][1] += 1
            stack.append([children[v][ci], 0])
            continue
        stack.pop()
        for other, qi in by_vertex[v]:
            if done[other]:
                answers[qi] = ancestor[uf.find(other)]
        done[v] = True
        if stack:
            par = stack[-1][0]
            uf.union(par, v)
            ancestor[uf.find(par)] = par
    return answers


def tree_effective_resistance(t: SpanningTree, p: int, q: int, lca: int) -> float:
    """Effective resistance between p and q through the tree (exact path sum)."""
    return float(t.rdepth[p] + t.rdepth[q] - 2.0 * t.rdepth[lca])


def tree_path_edges(t: SpanningTree, p: int, q: int,
                    lca: int | None = None) -> set[int]:
    """Edge ids on the unique tree path between p and q (empty when p == q).

    When the lowest common ancestor is already known (batch pipelines), the
    two climbs stop at it directly.
    """
    path: set[int] = set()
    if lca is not None:
        for v in (p, q):
            while v != lca:
                path.add(int(t.parent_edge[v]))
                v = int(t.parent[v])
        return path
    a, b = p, q
    da, db = int(t.depth[a]), int(t.depth[b])
    while da > db:
        path.add(int(t.parent_edge[a]))
        a = int(t.parent[a])
        da -= 1
    while db > da:
        path.add(int(t.parent_edge[b]))
        b = int(t.parent[b])
        db -= 1
    while a != b:
        path.add(int(t.parent_edge[a]))
        path.add(int(t.parent_edge[b]))
        a = int(t.parent[a])
        b = int(t.parent[b])
    return path


@dataclass(frozen=True)
class Neighborhood:
    """Vertices within ``beta`` hops of ``center`` in some subgraph.

    ``members`` lists vertices in layer order starting with the center;
    ``pred``/``pred_edge`` record the first-discovery predecessor (neighbors
    scanned in adjacency order), ``hop`` the BFS layer.
    """

    center: int
    beta: int
    members: np.ndarray
    pred: np.ndarray
    pred_edge: np.ndarray
    hop: np.ndarray

    def member_set(self) -> set[int]:
        return set(int(v) for v in self.members)


def bfs_neighborhood(adj: AdjacencyView, p: int, beta: int) -> Neighborhood:
    """beta-layer BFS from ``p`` over the given subgraph adjacency."""
    if beta < 0:
        raise GraphError("beta must be >= 0")
    visited = np.zeros(adj.n, dtype=bool)
    return _bfs_layers(adj, p, beta, visited)


def _bfs_layers(adj: AdjacencyView, p: int, beta: int,
                visited: np.ndarray) -> Neighborhood:
    """Layered BFS using ``visited`` as scratch (reset before returning)."""
    members = [np.array([p], dtype=np.int64)]
    preds = [np.array([-1], dtype=np.int64)]
    pred_edges = [np.array([-1], dtype=np.int64)]
    hops = [np.array([0], dtype=np.int64)]
    visited[p] = True
    frontier = members[0]
    for layer in range(1, beta + 1):
        starts = adj.indptr[frontier]
        counts = adj.indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        pos = _slice_positions(starts, counts, total)
        nbrs = adj.nbr[pos]
        eids = adj.eid[pos]
        srcs = np.repeat(frontier, counts)
        fresh = ~visited[nbrs]
        nbrs, eids, srcs = nbrs[fresh], eids[fresh], srcs[fresh]
        if len(nbrs) == 0:
            break
        uniq, first = np.unique(nbrs, return_index=True)
        visited[uniq] = True
        members.append(uniq)
        preds.append(srcs[first])
        pred_edges.append(eids[first])
        hops.append(np.full(len(uniq), layer, dtype=np.int64))
        frontier = uniq
    all_members = np.concatenate(members)
    visited[all_members] = False
    return Neighborhood(center=p, beta=beta, members=all_members,
                        pred=np.concatenate(preds),
                        pred_edge=np.concatenate(pred_edges),
                        hop=np.concatenate(hops))


def _slice_positions(starts: np.ndarray, counts: np.ndarray, total: int) -> np.ndarray:
    """Flat positions of concatenated CSR slices [starts_k, starts_k+counts_k)."""
    base = np.cumsum(counts) - counts
    return np.arange(total, dtype=np.int64) - np.repeat(base, counts) + np.repeat(starts, counts)
