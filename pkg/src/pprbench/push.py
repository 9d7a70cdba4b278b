"""Local push routines: forward and backward dynamic programming over a
directed graph, and the merge-accelerated multi-target backward variant.

A push run maintains two sparse vectors: settled mass p and residual
mass r. The defining invariant (checked against the exact oracle in the
tests) is

    forward,  source s:  pi_s(u) = p(u) + sum_w r(w) * pi_w(u)
    backward, target t:  pi_v(t) = p(v) + sum_w pi_v(w) * r(w)

at every iteration. Node selection is by max priority with ties to the
smallest id; the heap keeps stale entries and skips them lazily.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

__all__ = [
    "PushResult",
    "MergeStats",
    "forward_push_l1",
    "forward_push_degree_normalized",
    "backward_push",
    "merge_update",
    "backward_push_many",
]

# residuals touched by many pushes resync their tracked L1 norm this often
_NORM_RESYNC = 1024


@dataclass
class PushResult:
    """Sparse output of one push run.

    p maps node -> settled estimate mass, r maps node -> residual mass.
    pushed_work counts degrees touched (a machine-independent cost).
    """
    p: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    iterations: int = 0
    pushed_work: int = 0


@dataclass
class MergeStats:
    merge_count: int = 0
    extend_count: int = 0
    per_target_iterations: list = field(default_factory=list)

    @property
    def total_iterations(self):
        return self.merge_count + self.extend_count


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")


# ---------------------------------------------------------------------------
# Forward push
# ---------------------------------------------------------------------------

def forward_push_l1(g, s, alpha, r_max_s, max_iterations=None):
    """Forward push from source s until ||r||_1 <= r_max_s.

    Each iteration pops the node maximizing r(v)/d_out(v), settles
    alpha*r(v) into p(v), and spreads the rest over out-neighbors.
    ||r||_1 drops by exactly alpha*r(v) per iteration, so the loop ends
    after at most (1 - r_max_s)/(alpha * r_max_s) iterations.

    max_iterations caps the loop for snapshot inspection; the invariant
    holds at any stopping point.
    """
    _check_alpha(alpha)
    if not 0.0 < r_max_s <= 1.0:
        raise ValueError("r_max_s must lie in (0,1]")
    if not 0 <= s < g.n:
        raise ValueError("source id out of range")
    res = PushResult(r={s: 1.0})
    p, r = res.p, res.r
    odeg, oadj = g.out_deg_list, g.out_adj
    heap = [(-1.0 / odeg[s], s)]
    norm1 = 1.0
    while norm1 > r_max_s:
        if max_iterations is not None and res.iterations >= max_iterations:
            break
        neg, v = heappop(heap)
        rv = r.get(v, 0.0)
        if rv / odeg[v] != -neg:
            continue  # stale entry
        del r[v]
        p[v] = p.get(v, 0.0) + alpha * rv
        share = (1.0 - alpha) * rv / odeg[v]
        for u in oadj[v]:
            nu = r.get(u, 0.0) + share
            r[u] = nu
            heappush(heap, (-nu / odeg[u], u))
        res.iterations += 1
        res.pushed_work += odeg[v]
        norm1 -= alpha * rv
        if res.iterations % _NORM_RESYNC == 0:
            norm1 = math.fsum(r.values())
    return res


def forward_push_degree_normalized(g, s, alpha, r_tilde_max_s,
                                   max_iterations=None):
    """Forward push from s until max_v r(v)/d_out(v) <= r_tilde_max_s.

    Same update rule as forward_push_l1 with a degree-normalized stop;
    total pushed work is bounded by 1/(alpha * r_tilde_max_s).
    """
    _check_alpha(alpha)
    if r_tilde_max_s <= 0.0:
        raise ValueError("r_tilde_max_s must be positive")
    if not 0 <= s < g.n:
        raise ValueError("source id out of range")
    res = PushResult(r={s: 1.0})
    p, r = res.p, res.r
    odeg, oadj = g.out_deg_list, g.out_adj
    heap = [(-1.0 / odeg[s], s)]
    while heap:
        if max_iterations is not None and res.iterations >= max_iterations:
            break
        neg, v = heap[0]
        if r.get(v, 0.0) / odeg[v] != -neg:
            heappop(heap)
            continue
        if -neg <= r_tilde_max_s:
            break
        heappop(heap)
        rv = r.pop(v)
        p[v] = p.get(v, 0.0) + alpha * rv
        share = (1.0 - alpha) * rv / odeg[v]
        for u in oadj[v]:
            nu = r.get(u, 0.0) + share
            r[u] = nu
            heappush(heap, (-nu / odeg[u], u))
        res.iterations += 1
        res.pushed_work += odeg[v]
    return res


# ---------------------------------------------------------------------------
# Backward push
# ---------------------------------------------------------------------------

def backward_push(g, t, alpha, r_max_t, max_iterations=None):
    """Backward push toward target t until ||r||_inf <= r_max_t.

    Pops the node of maximum residual, settles alpha*r(v) into p(v), and
    spreads (1-alpha)*r(v)/d_out(u) to each in-neighbor u.
    """
    _check_alpha(alpha)
    if not 0.0 < r_max_t < 1.0:
        raise ValueError("r_max_t must lie in (0,1)")
    if not 0 <= t < g.n:
        raise ValueError("target id out of range")
    res = PushResult(r={t: 1.0})
    heap = [(-1.0, t)]
    _backward_loop(g, res, heap, alpha, r_max_t, None, None, max_iterations)
    return res


def _backward_loop(g, res, heap, alpha, r_max_t, done, stats, max_iterations):
    """Drain the backward heap for one target. If done is given, popping
    an earlier target triggers a merge of its final result."""
    p, r = res.p, res.r
    odeg, iadj, ideg = g.out_deg_list, g.in_adj, g.in_deg_list
    while heap:
        if max_iterations is not None and res.iterations >= max_iterations:
            return False
        neg, v = heap[0]
        if r.get(v, 0.0) != -neg:
            heappop(heap)
            continue
        if -neg <= r_max_t:
            break
        heappop(heap)
        if done is not None and v in done:
            donor = done[v]
            merge_update(res, donor, v)
            stats.merge_count += 1
            for u in donor.r:
                if u in r:
                    heappush(heap, (-r[u], u))
            continue
        rv = r.pop(v)
        p[v] = p.get(v, 0.0) + alpha * rv
        coef = (1.0 - alpha) * rv
        for u in iadj[v]:
            nu = r.get(u, 0.0) + coef / odeg[u]
            r[u] = nu
            heappush(heap, (-nu, u))
        res.iterations += 1
        res.pushed_work += ideg[v]
        if stats is not None:
            stats.extend_count += 1
    return True


def merge_update(current, donor, donor_id):
    """Splice a finished target's push result into the current one.

    Where a plain step at donor_id would spread residual one edge layer
    back, this substitutes the donor's whole (p, r) pair at once:

        p += q * donor.p
        r += q * (donor.r - e_donor)     with q = current residual there

    The donor_id coordinate is assigned q * donor.r(donor_id) directly
    (never by subtraction, so no cancellation residue to clamp).
    """
    q = current.r.pop(donor_id, 0.0)
    if q <= 0.0:
        raise ValueError("current result has no residual at the donor id")
    p, r = current.p, current.r
    for u, val in donor.p.items():
        p[u] = p.get(u, 0.0) + q * val
    for u, val in donor.r.items():
        if u != donor_id:
            r[u] = r.get(u, 0.0) + q * val
    tail = q * donor.r.get(donor_id, 0.0)
    if tail > 0.0:
        r[donor_id] = tail
    current.iterations += 1
    current.pushed_work += len(donor.p) + len(donor.r)
    return current


def backward_push_many(g, targets, alpha, r_max_t,
                       max_total_iterations=None):
    """Backward push over an ordered target list with merge reuse.

    Targets run in the given order. While pushing for target t_i, popping
    a node that is an earlier target splices that target's final result
    in one step instead of extending. Donor results are never touched
    again after they finish.

    Returns (results, stats); results[i] pairs with targets[i]. With a
    total-iteration cap the run stops mid-target and returns the partial
    results so far (the push invariant holds at any cut point).
    """
    _check_alpha(alpha)
    if not 0.0 < r_max_t < 1.0:
        raise ValueError("r_max_t must lie in (0,1)")
    order = list(targets)
    if len(set(order)) != len(order):
        raise ValueError("targets must be distinct")
    stats = MergeStats()
    results = []
    done = {}
    used = 0
    for t in order:
        if not 0 <= t < g.n:
            raise ValueError("target id out of range")
        res = PushResult(r={t: 1.0})
        heap = [(-1.0, t)]
        cap = None if max_total_iterations is None else max_total_iterations - used
        finished = _backward_loop(g, res, heap, alpha, r_max_t, done, stats, cap)
        results.append(res)
        stats.per_target_iterations.append(res.iterations)
        used += res.iterations
        if not finished:
            break
        done[t] = res
    return results, stats
