"""Clustering quantities that predict estimation cost.

Two numbers drive the accelerations: the walk-sharing total is
proportional to the max-norm sum of the source residual distributions
(low when sources cluster), and the backward merge savings grow with the
count of ordered target pairs whose PPR clears the push threshold (high
when targets cluster). This module computes both plus a sweep protocol
correlating them with conductance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import conductance, exact_ppr_rows, validate_node_set
from .push import backward_push_many, forward_push_degree_normalized

__all__ = [
    "sigma_infinity_one",
    "CtResult",
    "target_clustering_ct",
    "oracle_lookup",
    "push_interval_lookup",
    "clustering_correlation_protocol",
]


def sigma_infinity_one(rows):
    """Sum over nodes of the per-node maximum across source rows.

    rows are sparse dicts, each summing to 1; the result lies in
    [1, len(rows)].
    """
    rows = list(rows)
    if not rows:
        raise ValueError("at least one row required")
    peak = {}
    for row in rows:
        if abs(math.fsum(row.values()) - 1.0) > 1e-9:
            raise ValueError("rows must sum to 1")
        for v, x in row.items():
            if x < 0:
                raise ValueError("rows must be nonnegative")
            if x > peak.get(v, 0.0):
                peak[v] = x
    return math.fsum(peak.values())


@dataclass
class CtResult:
    """Pair count with the push-window ambiguity reported separately."""
    count: int
    ambiguous: int = 0


def target_clustering_ct(ppr_lookup, targets, r_max_t):
    """Count ordered pairs (j < i) with pi_{t_j}(t_i) above r_max_t.

    ppr_lookup(t_j, t_i) returns either a float (exact value) or a
    (lo, hi) interval; interval pairs that straddle the threshold are
    tallied as ambiguous rather than counted.
    """
    order = list(targets)
    if len(set(order)) != len(order):
        raise ValueError("targets must be distinct")
    count = ambiguous = 0
    for i in range(len(order)):
        for j in range(i):
            val = ppr_lookup(order[j], order[i])
            if isinstance(val, tuple):
                lo, hi = val
                if lo > r_max_t:
                    count += 1
                elif hi > r_max_t:
                    ambiguous += 1
            elif val > r_max_t:
                count += 1
    return CtResult(count=count, ambiguous=ambiguous)


def oracle_lookup(g, targets, alpha, tol=1e-12):
    """Exact pairwise lookup backed by power iteration rows."""
    order = validate_node_set(g, targets)
    rows = exact_ppr_rows(g, order, alpha, tol=tol)
    index = {t: i for i, t in enumerate(order)}

    def lookup(src, dst):
        return float(rows[index[src], dst])

    return lookup


def push_interval_lookup(results_by_target, r_max_t):
    """Interval lookup from backward push results: the settled mass at
    the source brackets the true value within r_max_t."""

    def lookup(src, dst):
        p = results_by_target[dst].p.get(src, 0.0)
        return (p, p + r_max_t)

    return lookup


# ---------------------------------------------------------------------------
# Conductance sweep protocol
# ---------------------------------------------------------------------------

def clustering_correlation_protocol(g, size, seeds, *, alpha=0.2,
                                    r_tilde_max_s=1e-3, r_max_t=4e-3,
                                    levels=None, ct_mode="oracle",
                                    oracle_tol=1e-9):
    """Sample S and T from growing community unions and record the cost
    metrics next to the sets' conductance.

    For each level l and seed, S and T (|S| = |T| = size) are drawn
    uniformly from the union of l communities chosen at random. The
    forward stage uses the degree-normalized stop, whose residual keeps
    the community footprint of the source (the global L1 stop diffuses
    it and erases the clustering signal). Returns one row per
    (level, seed) with keys phi_S, sigma_inf1, phi_T, c_T, srank, seed,
    level.
    """
    from .sketch import build_push_matrices, surrogate_stable_rank

    if g.labels is None:
        raise ValueError("graph carries no community labels")
    by_label = {}
    for v, lab in enumerate(g.labels):
        by_label.setdefault(lab, []).append(v)
    all_labels = sorted(by_label)
    k = len(all_labels)
    if levels is None:
        levels = range(1, k + 1)
    rows = []
    for level in levels:
        if not 1 <= level <= k:
            raise ValueError(f"level {level} outside [1,{k}]")
        for seed in seeds:
            rng = np.random.default_rng((seed, level, 7))
            S = _draw_from_union(by_label, all_labels, level, size, rng)
            T = _draw_from_union(by_label, all_labels, level, size, rng)
            fwd = [forward_push_degree_normalized(g, s, alpha,
                                                  r_tilde_max_s)
                   for s in S]
            sigmas = []
            for res in fwd:
                norm = math.fsum(res.r.values())
                sigmas.append({v: x / norm for v, x in res.r.items()})
            bwd, _ = backward_push_many(g, T, alpha, r_max_t)
            if ct_mode == "oracle":
                lookup = oracle_lookup(g, T, alpha, tol=oracle_tol)
            elif ct_mode == "push":
                lookup = push_interval_lookup(dict(zip(T, bwd)), r_max_t)
            else:
                raise ValueError(f"unknown ct_mode {ct_mode!r}")
            ct = target_clustering_ct(lookup, T, r_max_t)
            pm = build_push_matrices(fwd, bwd, g.n)
            try:
                srank = surrogate_stable_rank(pm, S)
            except ValueError:
                srank = float("nan")
            rows.append({
                "level": level,
                "seed": seed,
                "phi_S": conductance(g, S),
                "sigma_inf1": sigma_infinity_one(sigmas),
                "phi_T": conductance(g, T),
                "c_T": ct.count,
                "ct_ambiguous": ct.ambiguous,
                "srank": srank,
            })
    return rows


def _draw_from_union(by_label, all_labels, level, size, rng):
    labels = [all_labels[i] for i in
              rng.choice(len(all_labels), size=level, replace=False)]
    pool = sorted(v for lab in labels for v in by_label[lab])
    if size > len(pool):
        raise ValueError("set size exceeds community pool")
    picks = rng.choice(len(pool), size=size, replace=False)
    return [pool[i] for i in picks]
