"""End-to-end sparsifier construction: spanning tree, then iterative rounds
of score -> recover -> re-factorize, with similarity-based exclusion so one
round does not spend its whole budget on edges shorting the same region.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cholesky import approx_inverse, factorize
from .graph import (DEFAULT_GAMMA, GammaPolicy, Graph, GraphError,
                    RegularizedLaplacian, build_laplacian, laplacian_from_edges)
from .scores import EdgeScore, approx_truncated_scores, tree_truncated_scores
from .solver import estimate_trace
from .tree import max_weight_spanning_tree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SparsifyConfig:
    """Knobs for sparsifier construction.

    ``alpha_frac`` is the fraction of the vertex count to recover in total,
    spread over ``rounds`` passes; ``beta`` bounds the BFS truncation of the
    scores, ``delta`` the pruning threshold of the approximate factor
    inverse, ``beta_sim`` the similarity-exclusion radius.
    """

    alpha_frac: float = 0.10
    rounds: int = 5
    beta: int = 5
    delta: float = 0.1
    beta_sim: int = 2
    gamma: GammaPolicy | float = DEFAULT_GAMMA
    seed: int = 0
    trace_probes: int = 64

    def __post_init__(self):
        if self.alpha_frac <= 0:
            raise GraphError("alpha_frac must be positive")
        if self.rounds < 1:
            raise GraphError("rounds must be >= 1")
        if self.beta < 0 or self.beta_sim < 0:
            raise GraphError("beta and beta_sim must be >= 0")
        if not (0 <= self.delta < 1):
            raise GraphError("delta must satisfy 0 <= delta < 1")
        if self.trace_probes < 1:
            raise GraphError("trace_probes must be >= 1")


@dataclass(frozen=True)
class RoundStats:
    added: int
    score_max: float | None
    score_min: float | None
    trace_estimate: float


@dataclass(frozen=True)
class Sparsifier:
    """Tree plus recovered edges, with per-round provenance and stats."""

    graph: Graph
    tree_edges: np.ndarray
    recovered: tuple[np.ndarray, ...]  # per round, ids into the source graph
    rounds: tuple[RoundStats, ...]
    gamma: float
    source_m: int

    @property
    def recovered_total(self) -> int:
        return int(sum(len(r) for r in self.recovered))

    def edge_ids(self) -> np.ndarray:
        """All subgraph edge ids (tree + recovered), ascending."""
        parts = [self.tree_edges] + [np.asarray(r) for r in self.recovered]
        return np.sort(np.concatenate(parts))

    def laplacian(self) -> RegularizedLaplacian:
        return build_laplacian(self.graph, self.gamma)


class ExclusionMarks:
    """Per-edge exclusion flags; marked edges are skipped at recovery forever."""

    def __init__(self, m: int):
        self.flags = np.zeros(m, dtype=bool)

    def count(self) -> int:
        return int(self.flags.sum())


def mark_similar(marks: ExclusionMarks, g: Graph, live_adj: list[list[tuple[int, int]]],
                 in_subgraph: np.ndarray, p: int, q: int, beta_sim: int) -> ExclusionMarks:
    """Mark off-subgraph edges made redundant by the just-recovered (p, q).

    An edge is similar when one endpoint lies within ``beta_sim`` hops of p
    and the other within ``beta_sim`` hops of q (in either orientation),
    hops taken in the current subgraph including the new edge.
    """
    ball_p = _hop_ball(live_adj, p, beta_sim)
    ball_q = _hop_ball(live_adj, q, beta_sim)
    adj = g.adjacency
    for i in ball_p:
        nbrs, eids = adj.neighbors(i)
        for j, e in zip(nbrs, eids):
            if in_subgraph[e] or marks.flags[e]:
                continue
            if (j in ball_q) or (j in ball_p and i in ball_q):
                marks.flags[e] = True
    return marks


def _hop_ball(live_adj: list[list[tuple[int, int]]], center: int, beta: int) -> set[int]:
    seen = {center}
    frontier = [center]
    for _ in range(beta):
        nxt = []
        for v in frontier:
            for u, _e in live_adj[v]:
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        if not nxt:
            break
        frontier = nxt
    return seen


def resolve_alpha(g: Graph, cfg: SparsifyConfig) -> int:
    alpha = math.ceil(cfg.alpha_frac * g.n)
    if alpha < cfg.rounds:
        raise GraphError(
            f"edge budget {alpha} smaller than round count {cfg.rounds}")
    return alpha


def sparsify(g: Graph, cfg: SparsifyConfig = SparsifyConfig()) -> Sparsifier:
    """Build a spectrally similar subgraph of ``g``.

    Round 1 scores all off-tree edges exactly on the spanning tree; each
    later round factorizes the current subgraph Laplacian, builds the pruned
    inverse of its factor, re-scores the remaining candidates against the
    densified subgraph, and recovers the next batch of top-scoring unmarked
    edges. Fully deterministic for a fixed config.
    """
    if not g.is_connected():
        raise GraphError("input graph must be connected")
    gamma = cfg.gamma.resolve(g) if isinstance(cfg.gamma, GammaPolicy) else float(cfg.gamma)
    if gamma <= 0:
        raise GraphError("gamma must resolve to a positive value")
    alpha = resolve_alpha(g, cfg)
    quota_base = math.ceil(alpha / cfg.rounds)
    lg = build_laplacian(g, gamma)

    t = max_weight_spanning_tree(g)
    in_sub = t.in_tree.copy()
    marks = ExclusionMarks(g.m)
    live_adj: list[list[tuple[int, int]]] = [[] for _ in range(g.n)]
    for e in np.flatnonzero(in_sub):
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        live_adj[u].append((v, int(e)))
        live_adj[v].append((u, int(e)))

    recovered_rounds: list[np.ndarray] = []
    round_stats: list[RoundStats] = []
    scores: list[EdgeScore] = []
    factor = None
    total = 0

    for rnd in range(1, cfg.rounds + 1):
        if rnd == 1:
            scores = tree_truncated_scores(g, t, cfg.beta)
        else:
            sub_ids = np.flatnonzero(in_sub)
            z = approx_inverse(factor, cfg.delta)
            cand = np.flatnonzero(~in_sub & ~marks.flags)
            scores = approx_truncated_scores(
                g, g.subgraph_adjacency(sub_ids), z, cfg.beta, cand)

        quota = min(quota_base, alpha - total)
        added = _recover_round(g, scores, quota, in_sub, marks, live_adj, cfg.beta_sim)
        total += len(added)
        if len(added) < quota:
            log.warning("round %d recovered %d of %d: candidate pool exhausted",
                        rnd, len(added), quota)

        sub_ids = np.flatnonzero(in_sub)
        lp = laplacian_from_edges(g.n, g.edge_u[sub_ids], g.edge_v[sub_ids],
                                  g.edge_w[sub_ids], gamma)
        factor = factorize(lp)
        trace_est = estimate_trace(lg, factor, probes=cfg.trace_probes, seed=cfg.seed)
        recovered_rounds.append(np.array([e for e, _ in added], dtype=np.int64))
        round_stats.append(RoundStats(
            added=len(added),
            score_max=max((s for _, s in added), default=None),
            score_min=min((s for _, s in added), default=None),
            trace_estimate=trace_est))

    sub_ids = np.flatnonzero(in_sub)
    p_graph = Graph(n=g.n, edge_u=g.edge_u[sub_ids], edge_v=g.edge_v[sub_ids],
                    edge_w=g.edge_w[sub_ids])
    return Sparsifier(graph=p_graph, tree_edges=t.edge_ids(),
                      recovered=tuple(recovered_rounds), rounds=tuple(round_stats),
                      gamma=gamma, source_m=g.m)


def _recover_round(g: Graph, scores: list[EdgeScore], quota: int,
                   in_sub: np.ndarray, marks: ExclusionMarks,
                   live_adj: list[list[tuple[int, int]]],
                   beta_sim: int) -> list[tuple[int, float]]:
    """Take the top unmarked edges by (score desc, edge id asc) up to quota."""
    if quota <= 0 or not scores:
        return []
    eids = np.array([s.edge for s in scores], dtype=np.int64)
    svals = np.array([s.score for s in scores])
    order = np.lexsort((eids, -svals))
    added: list[tuple[int, float]] = []
    for k in order:
        if len(added) >= quota:
            break
        e = int(eids[k])
        if marks.flags[e] or in_sub[e]:
            continue
        in_sub[e] = True
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        live_adj[u].append((v, e))
        live_adj[v].append((u, e))
        mark_similar(marks, g, live_adj, in_sub, u, v, beta_sim)
        added.append((e, float(svals[k])))
    return added
