"""Simulated multi-machine walk sampling with source partitioning.

Sources are spread over k machines; each machine samples shared walks
for its own sources, so the max-over-machines walk count is what the
assignment controls. The greedy partitioners grow parts that keep the
per-part start distributions overlapping: the elementwise-max norm of a
part is exactly the walks it needs per unit budget, and the distance of
a source to a part is exactly the norm increase its arrival would cause.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from time import perf_counter

import numpy as np

from .estimators import stack_sparse_columns
from .graphs import validate_node_set
from .push import backward_push_many, forward_push_degree_normalized
from .sketch import stable_rank
from .walks import build_walk_plan, draw_start_counts, execute_walk_plan, \
    source_endpoint_counts

__all__ = [
    "Partition",
    "MachineRow",
    "MachineReport",
    "partition_distance",
    "source_partition_max",
    "source_partition_avg",
    "source_partition_avg_alt",
    "partition_objective_max",
    "partition_objective_avg",
    "partition_balance",
    "source_surrogate_rows",
    "run_distributed_estimation",
    "save_push_store",
    "load_push_store",
]

# rng stream tags: seeding, per-machine count draws, per-machine walks
SEED_STREAM = 5
COUNT_STREAM = 6
MACHINE_WALK_STREAM = 7

SCHEMES = ("baseline", "heuristic_max", "heuristic_avg",
           "heuristic_avg_alt", "oracle")


@dataclass
class Partition:
    """Disjoint cover of the source list by k parts of source indices."""
    parts: list
    sigma_parts: list | None = None
    audit: list | None = None

    def check_cover(self, m):
        seen = set()
        for part in self.parts:
            if not part:
                raise ValueError("empty part")
            for i in part:
                if i in seen:
                    raise ValueError(f"source index {i} assigned twice")
                seen.add(i)
        if seen != set(range(m)):
            raise ValueError("parts do not cover all sources")


@dataclass
class MachineRow:
    machine_id: int
    walks: int
    push_work: int
    modeled_time_ms: float
    wall_time_ms: float = 0.0


@dataclass
class MachineReport:
    machines: list
    partition: Partition
    scheme: str

    @property
    def total_walks(self):
        return sum(row.walks for row in self.machines)

    @property
    def max_walks(self):
        return max(row.walks for row in self.machines)

    @property
    def max_modeled_time_ms(self):
        return max(row.modeled_time_ms for row in self.machines)


# ---------------------------------------------------------------------------
# Distances and objectives
# ---------------------------------------------------------------------------

def partition_distance(sigma_s, part_sigma):
    """One-sided L1 overshoot of sigma_s over the part aggregate: the
    exact increase of the part's elementwise-max norm if s joins."""
    return math.fsum(max(x - part_sigma.get(v, 0.0), 0.0)
                     for v, x in sigma_s.items())


def _merge_max(agg, sigma):
    for v, x in sigma.items():
        if x > agg.get(v, 0.0):
            agg[v] = x


def partition_objective_max(sigmas, partition):
    """Largest per-part elementwise-max norm (the walk-count driver)."""
    worst = 0.0
    for part in partition.parts:
        agg = {}
        for i in part:
            _merge_max(agg, sigmas[i])
        worst = max(worst, math.fsum(agg.values()))
    return worst


def partition_objective_avg(surrogates, partition):
    """Largest sqrt(|part| * srank(part rows)) over the parts."""
    rows = _surrogate_rows(surrogates)
    worst = 0.0
    for part in partition.parts:
        stacked = rows[sorted(part), :]
        worst = max(worst, math.sqrt(len(part) * stable_rank(stacked)))
    return worst


def partition_balance(partition):
    sizes = [len(part) for part in partition.parts]
    return {"min": min(sizes), "max": max(sizes)}


# ---------------------------------------------------------------------------
# Greedy partitioners
# ---------------------------------------------------------------------------

def _as_rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng((int(rng), SEED_STREAM))


def _l1_dicts(a, b):
    keys = set(a) | set(b)
    return math.fsum(abs(a.get(v, 0.0) - b.get(v, 0.0)) for v in keys)


def _draw_seeds(count, k, rng, dist_to):
    """Distance-proportional seeding: the first seed is uniform, each
    further seed is drawn with probability proportional to its distance
    from the nearest existing seed. dist_to(i) returns the distance
    vector from item i to all items."""
    first = int(rng.integers(count))
    seeds = [first]
    nearest = dist_to(first)
    nearest[first] = 0.0
    while len(seeds) < k:
        total = nearest.sum()
        if total <= 0.0:  # all remaining items identical to some seed
            taken = set(seeds)
            free = [i for i in range(count) if i not in taken]
            pick = free[int(rng.integers(len(free)))]
        else:
            pick = int(rng.choice(count, p=nearest / total))
        seeds.append(pick)
        nearest = np.minimum(nearest, dist_to(pick))
        nearest[pick] = 0.0
    return seeds


def _visit_order(count, taken, rng):
    """Random arrival order for the unseeded sources."""
    free = np.array([i for i in range(count) if i not in taken], dtype=int)
    return [int(i) for i in rng.permutation(free)]


def _validate_k(k, m):
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")


def source_partition_max(sigmas, k, rng):
    """Greedy partition that minimizes the growth of each part's
    elementwise-max norm as sources arrive (ties to the lowest part).

    Unseeded sources are visited in a random order drawn from rng: the
    greedy rule balances part norms, so a systematic order that streams
    one cluster at a time would smear that cluster over all parts."""
    m = len(sigmas)
    _validate_k(k, m)
    rng = _as_rng(rng)

    def dist_to(i):
        return np.array([_l1_dicts(sigmas[j], sigmas[i]) for j in range(m)])

    seeds = _draw_seeds(m, k, rng, dist_to)
    parts = [[i] for i in seeds]
    aggs = [dict(sigmas[i]) for i in seeds]
    norms = [math.fsum(agg.values()) for agg in aggs]
    taken = set(seeds)
    for s in _visit_order(m, taken, rng):
        best, best_cost = 0, math.inf
        for j in range(k):
            cost = partition_distance(sigmas[s], aggs[j]) + norms[j]
            if cost < best_cost:
                best, best_cost = j, cost
        parts[best].append(s)
        _merge_max(aggs[best], sigmas[s])
        norms[best] = math.fsum(aggs[best].values())
    part = Partition(parts=parts, sigma_parts=aggs)
    part.check_cover(m)
    return part


def _surrogate_rows(surrogates):
    rows = np.asarray(surrogates, dtype=float)
    if rows.ndim != 2:
        raise ValueError("surrogates must form a 2d row array")
    if (rows < 0).any():
        raise ValueError("surrogate rows must be nonnegative")
    if (rows.sum(axis=1) <= 0).any():
        raise ValueError("every surrogate row needs positive mass")
    return rows


def _dense_dist_to(rows):
    def dist_to(i):
        return np.abs(rows - rows[i]).sum(axis=1)
    return dist_to


def source_partition_avg(surrogates, k, rng):
    """Greedy partition on sqrt((|part|+1) * srank(stacked rows)), with
    the stable rank recomputed exactly per candidate part. Quadratic in
    part size, intended for small instances; the _alt variant scales."""
    rows = _surrogate_rows(surrogates)
    m = rows.shape[0]
    _validate_k(k, m)
    rng = _as_rng(rng)
    seeds = _draw_seeds(m, k, rng, _dense_dist_to(rows))
    parts = [[i] for i in seeds]
    taken = set(seeds)
    for s in _visit_order(m, taken, rng):
        best, best_cost = 0, math.inf
        for j in range(k):
            stacked = rows[sorted(parts[j]) + [s], :]
            cost = math.sqrt((len(parts[j]) + 1) * stable_rank(stacked))
            if cost < best_cost:
                best, best_cost = j, cost
        parts[best].append(s)
    part = Partition(parts=parts)
    part.check_cover(m)
    return part


def source_partition_avg_alt(surrogates, k, rng, audit=False):
    """Scalable variant of source_partition_avg: bounds the stable rank
    from below by dividing the Frobenius mass by the Gram matrix's max
    row sum (an upper bound on its top eigenvalue), maintained from
    running row aggregates so each candidate costs O(row length). The
    resulting score never exceeds the exact one. audit=True records
    every (source, part, score, members-before) evaluation."""
    rows = _surrogate_rows(surrogates)
    m = rows.shape[0]
    _validate_k(k, m)
    rng = _as_rng(rng)
    norm1 = rows.sum(axis=1)
    sq = np.square(rows).sum(axis=1)
    seeds = _draw_seeds(m, k, rng, _dense_dist_to(rows))
    parts = [[i] for i in seeds]
    x = [float(sq[i]) for i in seeds]
    y = [rows[i] * norm1[i] for i in seeds]
    log = [] if audit else None
    taken = set(seeds)
    for s in _visit_order(m, taken, rng):
        cand = rows[s] * norm1[s]
        best, best_cost = 0, math.inf
        for j in range(k):
            denom = float(np.max(y[j] + cand))
            cost = math.sqrt((len(parts[j]) + 1) * (x[j] + float(sq[s]))
                             / denom)
            if audit:
                log.append((s, j, cost, tuple(parts[j])))
            if cost < best_cost:
                best, best_cost = j, cost
        parts[best].append(s)
        x[best] += float(sq[s])
        y[best] = y[best] + cand
    part = Partition(parts=parts, audit=log)
    part.check_cover(m)
    return part


# ---------------------------------------------------------------------------
# Simulated distributed run
# ---------------------------------------------------------------------------

def run_distributed_estimation(g, S, k, scheme, params, *, w=None,
                               targets=None, labels=None, push_store=None,
                               threads=1, timing=False):
    """Three-stage simulation: arbitrary pre-split with per-machine
    forward pushes, central partitioning, then per-machine shared walk
    sampling. Returns (MachineReport, estimates); estimates is an
    |S| x |targets| array when targets are given, else None.

    The baseline scheme skips the forward stage and samples w walks from
    every source on its machine. The oracle scheme groups sources by
    their community label (exactly k labels must occur).
    """
    params.validate()
    S = validate_node_set(g, S)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if k < 1 or k > len(S):
        raise ValueError(f"k must be in [1, {len(S)}]")
    if len(S) % k:
        raise ValueError("k must divide |S| for the arbitrary pre-split")
    alpha = params.alpha
    w_cont = float(w) if w is not None else \
        params.c * params.r_max_t / params.delta
    if w_cont <= 0:
        raise ValueError("walk budget must be positive")
    chunk = len(S) // k
    chunks = [list(range(j * chunk, (j + 1) * chunk)) for j in range(k)]

    # stage 1: forward pushes on the arbitrary split
    push_work = [0] * k
    if scheme == "baseline":
        sigmas = [{s: 1.0} for s in S]
        norms = [1.0] * len(S)
        fwd = None
    else:
        fwd = [None] * len(S)

        def push_chunk(j):
            total = 0
            for i in chunks[j]:
                res = forward_push_degree_normalized(
                    g, S[i], alpha, params.r_tilde_max_s)
                fwd[i] = res
                total += res.pushed_work
            return total

        push_work = _over_machines(push_chunk, k, threads)
        norms = [math.fsum(res.r.values()) for res in fwd]
        sigmas = [{v: val / norm for v, val in res.r.items()}
                  for res, norm in zip(fwd, norms)]

    # backward tables, needed for estimates and for the avg surrogates
    bwd = None
    if targets is not None:
        targets = validate_node_set(g, targets)
        if push_store is not None:
            tables, meta = load_push_store(push_store)
            if meta["alpha"] != alpha or meta["r_max_t"] != params.r_max_t:
                raise ValueError("push store parameters do not match")
            missing = [t for t in targets if t not in tables]
            if missing:
                raise ValueError(f"push store lacks targets {missing}")
            bwd = [tables[t] for t in targets]
        else:
            bwd, _ = backward_push_many(g, targets, alpha, params.r_max_t)

    # stage 2: central partitioning
    if scheme == "baseline":
        partition = Partition(parts=chunks)
    elif scheme == "heuristic_max":
        partition = source_partition_max(sigmas, k, params.seed)
    elif scheme in ("heuristic_avg", "heuristic_avg_alt"):
        if bwd is None:
            raise ValueError(f"{scheme} needs targets for its surrogates")
        surr = source_surrogate_rows(g, S, fwd, bwd)
        if scheme == "heuristic_avg":
            partition = source_partition_avg(surr, k, params.seed)
        else:
            partition = source_partition_avg_alt(surr, k, params.seed)
    else:
        labs = g.labels if labels is None else labels
        if labs is None:
            raise ValueError("oracle scheme needs community labels")
        found = sorted({labs[s] for s in S})
        if len(found) != k:
            raise ValueError(
                f"oracle scheme needs exactly {k} labels, found {len(found)}")
        partition = Partition(parts=[
            [i for i, s in enumerate(S) if labs[s] == lab] for lab in found])
    partition.check_cover(len(S))

    # stage 3: per-machine shared sampling
    if scheme == "baseline":
        budgets = [max(1, math.ceil(w_cont))] * len(S)
    else:
        budgets = [math.ceil(w_cont * norm) for norm in norms]

    def sample_machine(j):
        part = sorted(partition.parts[j])
        rng_counts = np.random.default_rng((params.seed, COUNT_STREAM, j))
        counts = draw_start_counts([sigmas[i] for i in part],
                                   [budgets[i] for i in part], rng_counts)
        plan = build_walk_plan(counts)
        start = perf_counter()
        table = execute_walk_plan(
            g, plan, alpha, (params.seed, MACHINE_WALK_STREAM, j))
        wall = (perf_counter() - start) * 1000.0 if timing else 0.0
        return part, counts, table, wall

    sampled = _over_machines(sample_machine, k, threads)
    machines = [
        MachineRow(machine_id=j, walks=table.total_walks,
                   push_work=push_work[j],
                   modeled_time_ms=table.total_walks / alpha,
                   wall_time_ms=wall)
        for j, (part, counts, table, wall) in enumerate(sampled)]
    report = MachineReport(machines=machines, partition=partition,
                           scheme=scheme)

    estimates = None
    if targets is not None:
        estimates = _assemble_estimates(
            g, S, targets, bwd, fwd, sampled, scheme, w_cont, budgets)
    return report, estimates


def _over_machines(fn, k, threads):
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(k)))
    return [fn(j) for j in range(k)]


def source_surrogate_rows(g, S, fwd, bwd):
    """Rows P_T(s,:) + (p^s)^T R_T, one per source."""
    p_t = stack_sparse_columns([res.p for res in bwd], g.n)
    r_t = stack_sparse_columns([res.r for res in bwd], g.n)
    p_s = stack_sparse_columns([res.p for res in fwd], g.n)
    return np.asarray(p_t.tocsr()[S, :].todense()) \
        + np.asarray((p_s.T @ r_t).todense())


def _assemble_estimates(g, S, targets, bwd, fwd, sampled, scheme, w_cont,
                        budgets):
    r_t = stack_sparse_columns([res.r for res in bwd], g.n)
    p_t = stack_sparse_columns([res.p for res in bwd], g.n).tocsr()
    out = np.zeros((len(S), len(targets)))
    for part, counts, table, _ in sampled:
        for pos, i in enumerate(part):
            row = np.asarray(p_t[S[i], :].todense()).ravel()
            if fwd is not None:
                p_vec = stack_sparse_columns([fwd[i].p], g.n)
                row = row + np.asarray((p_vec.T @ r_t).todense()).ravel()
            endpoints = source_endpoint_counts(table, counts[pos])
            if endpoints:
                n_vec = stack_sparse_columns([endpoints], g.n)
                mc = np.asarray((n_vec.T @ r_t).todense()).ravel()
                scale = 1.0 / w_cont if fwd is not None \
                    else 1.0 / budgets[i]
                row = row + scale * mc
            out[i, :] = row
    return out


# ---------------------------------------------------------------------------
# On-disk push tables
# ---------------------------------------------------------------------------

def save_push_store(path, results_by_target, alpha, r_max_t, n):
    """One file per target holding its settled and residual entries,
    plus an index file listing the targets."""
    os.makedirs(path, exist_ok=True)
    for t, res in results_by_target.items():
        nodes = sorted(set(res.p) | set(res.r))
        with open(os.path.join(path, f"t{t}.tsv"), "w",
                  newline="\n") as fh:
            fh.write(f"{alpha!r} {r_max_t!r} {n}\n")
            for v in nodes:
                fh.write(f"{v}\t{res.p.get(v, 0.0)!r}"
                         f"\t{res.r.get(v, 0.0)!r}\n")
    with open(os.path.join(path, "targets.txt"), "w", newline="\n") as fh:
        for t in sorted(results_by_target):
            fh.write(f"{t}\n")


def load_push_store(path):
    """Inverse of save_push_store: returns ({target: PushResult}, meta)."""
    from .push import PushResult

    index = os.path.join(path, "targets.txt")
    with open(index) as fh:
        targets = [int(line) for line in fh if line.strip()]
    tables = {}
    meta = None
    for t in targets:
        with open(os.path.join(path, f"t{t}.tsv")) as fh:
            header = fh.readline().split()
            this = {"alpha": float(header[0]),
                    "r_max_t": float(header[1]), "n": int(header[2])}
            if meta is None:
                meta = this
            elif meta != this:
                raise ValueError("inconsistent push store headers")
            p, r = {}, {}
            for line in fh:
                node, pv, rv = line.split("\t")
                node = int(node)
                if float(pv) != 0.0:
                    p[node] = float(pv)
                if float(rv) != 0.0:
                    r[node] = float(rv)
            tables[t] = PushResult(p=p, r=r)
    if meta is None:
        raise ValueError("push store is empty")
    return tables, meta
