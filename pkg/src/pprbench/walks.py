"""Geometric-restart random walks and the shared-walk schedule.

A walk from node v steps to a uniform out-neighbor L times, where
P[L = l] = alpha * (1-alpha)^l for l >= 0; the endpoint then follows the
personalized PageRank distribution seeded at v. Walk sharing samples,
for each start node, the maximum count any source requests there, and
each source reads back the first X_s(v) endpoints, so clustered sources
reuse most of the work.

Reproducibility: execute_walk_plan derives one RNG stream per
(master seed, start node, walk index), so results are identical for any
worker count and any other plan that visits the same (node, index).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WalkPlan",
    "EndpointTable",
    "sample_walk_length",
    "sample_walk_endpoint",
    "sample_endpoints_batch",
    "draw_start_counts",
    "build_walk_plan",
    "execute_walk_plan",
    "source_endpoint_counts",
]

# stream tag separating shared-plan walks from other consumers of the
# same master seed
WALK_STREAM = 1


@dataclass
class WalkPlan:
    """Start counts for a shared walk stage.

    per_source[i] maps start node -> X_s(v) for source i; consolidated
    holds the elementwise maximum; w is the largest per-source budget.
    """
    per_source: list
    consolidated: dict
    w: int

    @property
    def total_walks(self):
        return sum(self.consolidated.values())


@dataclass
class EndpointTable:
    """Ordered walk endpoints per start node."""
    endpoints: dict = field(default_factory=dict)

    @property
    def total_walks(self):
        return sum(len(v) for v in self.endpoints.values())


def _seed_tuple(seed):
    if isinstance(seed, (tuple, list)):
        return tuple(int(x) for x in seed)
    return (int(seed),)


def sample_walk_length(alpha, rng):
    """Number of steps before restart: P[L = l] = alpha*(1-alpha)^l."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0,1]")
    return int(rng.geometric(alpha)) - 1


def sample_walk_endpoint(g, start, alpha, rng):
    """Walk a geometric number of uniform out-neighbor steps from start
    and return the final node."""
    if not 0 <= start < g.n:
        raise ValueError("start id out of range")
    length = sample_walk_length(alpha, rng)
    node = start
    if length > 0:
        oadj = g.out_adj
        for x in rng.random(length):
            nbrs = oadj[node]
            idx = int(x * len(nbrs))
            if idx == len(nbrs):  # guard the closed endpoint
                idx -= 1
            node = nbrs[idx]
    return node


def sample_endpoints_batch(g, starts, alpha, rng):
    """Vectorized endpoints for an array of start nodes (one stream).

    Same endpoint law as sample_walk_endpoint; used where per-walk
    streams are not needed, e.g. inside a per-block stream.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0,1]")
    starts = np.asarray(starts, dtype=np.int64)
    if starts.size == 0:
        return starts.copy()
    pos = starts.copy()
    lengths = rng.geometric(alpha, starts.size).astype(np.int64) - 1
    indptr, targets = g.walk_arrays()
    deg = g.out_deg
    active = np.flatnonzero(lengths > 0)
    remaining = lengths[active]
    while active.size:
        cur = pos[active]
        d = deg[cur]
        idx = np.minimum((rng.random(active.size) * d).astype(np.int64), d - 1)
        pos[active] = targets[indptr[cur] + idx]
        remaining -= 1
        keep = remaining > 0
        active = active[keep]
        remaining = remaining[keep]
    return pos


def draw_start_counts(sigmas, w, rng):
    """Draw start-node counts X_s ~ Multinomial(w_s, sigma_s) per source.

    sigmas are sparse dicts; w is a shared budget or a per-source list.
    Returns one {node: count} dict per source, zero counts dropped.
    """
    if isinstance(w, (int, np.integer)):
        budgets = [int(w)] * len(sigmas)
    else:
        budgets = [int(x) for x in w]
        if len(budgets) != len(sigmas):
            raise ValueError("one budget per source required")
    counts = []
    for sigma, budget in zip(sigmas, budgets):
        if budget < 0:
            raise ValueError("walk budget must be nonnegative")
        items = sorted(sigma.items())
        total = math.fsum(v for _, v in items)
        if abs(total - 1.0) > 1e-9:
            raise ValueError("sigma must sum to 1 within 1e-9")
        probs = np.array([v for _, v in items]) / total
        draw = rng.multinomial(budget, probs)
        counts.append({items[i][0]: int(c)
                       for i, c in enumerate(draw) if c})
    return counts


def build_walk_plan(counts):
    """Consolidate per-source counts into max-per-node shared counts."""
    consolidated = {}
    for src in counts:
        for v, c in src.items():
            if c < 0:
                raise ValueError("counts must be nonnegative")
            if c > consolidated.get(v, 0):
                consolidated[v] = c
    totals = [sum(src.values()) for src in counts]
    return WalkPlan(per_source=[dict(src) for src in counts],
                    consolidated=consolidated,
                    w=max(totals, default=0))


def execute_walk_plan(g, plan, alpha, rng, threads=1):
    """Sample X(v) walks from every start node in the plan.

    rng is a master seed (int or tuple); each walk runs on the stream
    (seed, WALK_STREAM, node, index), so output is identical for any
    thread count.
    """
    base = _seed_tuple(rng) + (WALK_STREAM,)
    nodes = sorted(plan.consolidated)

    def run(v):
        count = plan.consolidated[v]
        outs = []
        for i in range(count):
            sub = np.random.default_rng(base + (v, i))
            outs.append(sample_walk_endpoint(g, v, alpha, sub))
        return v, outs

    if threads > 1 and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(run, nodes))
    else:
        pairs = [run(v) for v in nodes]
    return EndpointTable(endpoints=dict(pairs))


def source_endpoint_counts(table, source_counts):
    """Endpoint multiplicities for one source: the first X_s(v)
    endpoints at each of its start nodes."""
    out = {}
    for v, c in source_counts.items():
        row = table.endpoints[v]
        if len(row) < c:
            raise ValueError("table holds fewer walks than requested")
        for u in row[:c]:
            out[u] = out.get(u, 0) + 1
    return out
