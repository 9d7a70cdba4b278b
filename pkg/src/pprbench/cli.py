"""Command-line benchmark harness.

Subcommands cover graph generation (gen-er, gen-sbm), estimation
(pair, many, matrix), backward-table precomputation
(precompute-targets), source partitioning (partition), the simulated
multi-machine pipeline (distributed), benchmark sweeps (bench), and
the clustering correlation protocol (metrics).

Determinism contract: for a fixed configuration and seed the CSV bytes
are identical across runs and across --threads values. Floats are
written with repr(), rows end with a bare newline, and wall-clock
columns stay 0 unless --timing is passed. The seed defaults to
DEFAULT_SEED; the PPR_SEED environment variable overrides the default
and the --seed flag overrides both.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import replace
from time import perf_counter

import numpy as np

from .distributed import (
    run_distributed_estimation,
    save_push_store,
    source_partition_avg,
    source_partition_avg_alt,
    source_partition_max,
    source_surrogate_rows,
)
from .estimators import PROFILES, EstimatorParams, estimate_many_pairs
from .graphs import (
    construct_clustered_set,
    generate_directed_er,
    generate_directed_sbm,
    load_edge_list,
    save_edge_list,
    validate_node_set,
)
from .metrics import (
    clustering_correlation_protocol,
    push_interval_lookup,
    target_clustering_ct,
)
from .push import backward_push_many, forward_push_degree_normalized
from .sketch import (
    approx_matrix,
    build_push_matrices,
    practical_matrix_walks,
    surrogate_stable_rank,
)

__all__ = ["main", "DEFAULT_SEED"]

DEFAULT_SEED = 20240808
SAMPLE_STREAM = 4

ESTIMATE_HEADER = ("method", "s", "t", "estimate", "walks", "push_iters",
                   "merge_count", "sigma_inf1", "c_T", "srank_surrogate",
                   "wall_ms")
METRICS_HEADER = ("phi_S", "sigma_inf1", "phi_T", "c_T", "srank", "seed")
MACHINE_HEADER = ("machine_id", "walks", "push_work", "modeled_time_ms",
                  "wall_time_ms")
PARTITION_HEADER = ("part_id", "size", "sigma_norm1")
TARGET_HEADER = ("target", "iterations", "settled_mass")
GROWTH_HEADER = ("seed", "size", "method", "walks", "push_iters",
                 "merge_count", "sigma_inf1", "wall_ms")
REALGRAPH_HEADER = ("seed", "sampling", "method", "walks", "push_iters",
                    "merge_count", "sigma_inf1", "wall_ms")
DISTBENCH_HEADER = ("seed", "scheme", "max_walks", "total_walks",
                    "objective", "balance_min", "balance_max",
                    "max_modeled_time_ms")

_COLUMN_DOC = """\
CSV columns emitted by the subcommands (all floats printed via repr();
wall columns are 0 unless --timing is given):

pair / many / matrix rows:
  method           estimator name (fwbw, fwbw-l1, bidir, matrix-<mode>)
  s, t             source and target node ids
  estimate         estimated value pi_s(t)
  walks            total walks executed by the run behind the row
  push_iters       forward plus backward push iterations for (s, t);
                   empty for matrix rows
  merge_count      backward-table merges performed by the run; empty
                   for matrix rows
  sigma_inf1       sum over nodes of the per-source maximum of the
                   normalized forward residuals (walk-sharing overhead)
  c_T              ordered target pairs whose settled mass already
                   exceeds rmax-t (0 for a single target; empty for
                   matrix rows)
  srank_surrogate  stable rank of the deterministic part of the
                   source-target matrix
  wall_ms          wall-clock milliseconds for the estimation call

precompute-targets rows:
  target           target node id
  iterations       backward push iterations for that target
  settled_mass     sum of the settled vector p over all nodes

partition rows:
  part_id          machine index, 0..k-1
  size             number of sources assigned to the part
  sigma_norm1      L1 norm of the elementwise max of the part's
                   normalized residuals (its shared walk budget factor)

distributed rows:
  machine_id       machine index, 0..k-1
  walks            walks sampled on the machine
  push_work        forward push operations performed on the machine
  modeled_time_ms  walks / alpha, a machine-time proxy
  wall_time_ms     measured machine wall time

metrics rows (also bench --protocol clustering):
  phi_S            conductance of the sampled source set
  sigma_inf1       walk-sharing overhead norm of the source set
  phi_T            conductance of the sampled target set
  c_T              ordered target pairs over the rmax-t threshold
  srank            stable rank of the deterministic surrogate matrix
  seed             per-row sampling seed

bench --protocol growth rows:
  seed, size, method, walks, push_iters, merge_count, sigma_inf1,
  wall_ms          as above, with size = |S| = |T| for the sweep point

bench --protocol realgraph rows:
  seed, sampling (uniform or clustered), method, walks, push_iters,
  merge_count, sigma_inf1, wall_ms as above

bench --protocol distributed rows:
  seed, scheme     per-trial partitioning scheme
  max_walks        largest per-machine walk count
  total_walks      walks summed over machines
  objective        max over machines of the part's sigma_norm1
  balance_min/max  smallest and largest part size
  max_modeled_time_ms  largest per-machine modeled time
"""


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _resolve_seed(args):
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("PPR_SEED")
    if env is not None:
        return int(env)
    return DEFAULT_SEED


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return str(x)


def _emit(header, rows, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])
    finally:
        if out:
            fh.close()
    return 0


def _load_graph(path, *, need_labels=False):
    g = load_edge_list(path)
    label_path = path + ".labels"
    if os.path.exists(label_path):
        with open(label_path) as fh:
            labels = [int(line.split()[0]) for line in fh if line.strip()]
        if len(labels) != g.n:
            raise ValueError(
                f"{label_path}: {len(labels)} labels for {g.n} nodes")
        g.labels = tuple(labels)
    if need_labels and g.labels is None:
        raise ValueError(
            f"{path}: community labels required (no {label_path})")
    return g


def _parse_nodes(text):
    """Comma-separated ids with inclusive a-b ranges: "0-3,7" -> [0,1,2,3,7]."""
    nodes = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "-" in piece[1:]:
            lo, hi = piece.split("-", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty node range {piece!r}")
            nodes.extend(range(lo, hi + 1))
        else:
            nodes.append(int(piece))
    if not nodes:
        raise ValueError("empty node list")
    return nodes


def _pick_nodes(args, g, which, stream):
    """Explicit --sources/--targets list, or uniform sample of the
    requested size from stream (seed, SAMPLE_STREAM, stream)."""
    listed = getattr(args, which, None)
    if listed:
        return validate_node_set(g, _parse_nodes(listed))
    count = getattr(args, f"sample_{which}", None)
    if count is None:
        raise ValueError(f"--{which} or --sample-{which} required")
    if count < 1 or count > g.n:
        raise ValueError(f"cannot sample {count} of {g.n} nodes")
    rng = np.random.default_rng((_resolve_seed(args), SAMPLE_STREAM, stream))
    return sorted(int(v) for v in rng.choice(g.n, size=count, replace=False))


def _resolve_params(args, n, method="fwbw"):
    seed = _resolve_seed(args)
    alpha = args.alpha if args.alpha is not None else 0.2
    eps = args.eps if args.eps is not None else 0.5
    p_fail = args.pfail if args.pfail is not None else 0.1
    if args.profile is not None:
        params = PROFILES[args.profile].params(
            n, method=method, alpha=alpha, eps=eps, p_fail=p_fail, seed=seed)
    else:
        params = EstimatorParams(alpha=alpha, eps=eps, p_fail=p_fail,
                                 seed=seed)
        if method == "bidir":
            params = replace(params, r_max_s=1.0)
    override = {}
    if args.delta is not None:
        override["delta"] = args.delta
    if args.c is not None:
        override["c"] = args.c
    if args.rmax_s is not None:
        override["r_max_s"] = args.rmax_s
    if args.rmax_t is not None:
        override["r_max_t"] = args.rmax_t
    if args.rtilde_max_s is not None:
        override["r_tilde_max_s"] = args.rtilde_max_s
    if override:
        params = replace(params, **override)
    params.validate()
    return params


_METHOD_TABLE = {
    # method name -> (profile method key, variant)
    "fwbw": ("fwbw", "practical"),
    "fwbw-l1": ("fwbw-l1", "standard"),
    "bidir": ("bidir", "standard"),
}


def _estimate_rows(g, S, T, params, *, method, mode, walks, threads, timing):
    variant = _METHOD_TABLE[method][1]
    t0 = perf_counter()
    est, stats = estimate_many_pairs(g, S, T, params, mode=mode,
                                     variant=variant, walks=walks,
                                     threads=threads)
    wall = (perf_counter() - t0) * 1000.0 if timing else 0.0
    bwd = stats["backward_results"]
    lookup = push_interval_lookup(dict(zip(T, bwd)), params.r_max_t)
    ct = target_clustering_ct(lookup, T, params.r_max_t).count
    pm = build_push_matrices(stats["forward_results"], bwd, g.n)
    try:
        srank = surrogate_stable_rank(pm, S)
    except ValueError:
        srank = float("nan")
    per_t = stats["merge_stats"].per_target_iterations
    merge_count = stats["merge_stats"].merge_count
    rows = []
    for i, s in enumerate(S):
        for j, t in enumerate(T):
            rows.append([
                method if mode == "shared" else f"{method}-baseline",
                s, t, float(est[i, j]), stats["plan_walks"],
                stats["forward_iterations"][i] + per_t[j], merge_count,
                stats["sigma_inf1"], ct, srank, wall,
            ])
    return rows


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_er(args):
    g = generate_directed_er(args.n, args.p, _resolve_seed(args))
    save_edge_list(g, args.out)
    return 0


def cmd_gen_sbm(args):
    g = generate_directed_sbm(args.n, args.blocks, args.in_expected,
                              args.out_expected, _resolve_seed(args))
    save_edge_list(g, args.out)
    with open(args.out + ".labels", "w", newline="") as fh:
        for lab in g.labels:
            fh.write(f"{lab}\n")
    return 0


def cmd_pair(args):
    g = _load_graph(args.graph)
    params = _resolve_params(args, g.n,
                             method=_METHOD_TABLE[args.method][0])
    rows = _estimate_rows(g, [args.source], [args.target], params,
                          method=args.method, mode=args.mode,
                          walks=args.walks, threads=args.threads,
                          timing=args.timing)
    return _emit(ESTIMATE_HEADER, rows, args.out)


def cmd_many(args):
    g = _load_graph(args.graph)
    S = _pick_nodes(args, g, "sources", 0)
    T = _pick_nodes(args, g, "targets", 1)
    params = _resolve_params(args, g.n,
                             method=_METHOD_TABLE[args.method][0])
    rows = _estimate_rows(g, S, T, params, method=args.method,
                          mode=args.mode, walks=args.walks,
                          threads=args.threads, timing=args.timing)
    return _emit(ESTIMATE_HEADER, rows, args.out)


def cmd_matrix(args):
    g = _load_graph(args.graph)
    S = _pick_nodes(args, g, "sources", 0)
    T = _pick_nodes(args, g, "targets", 1)
    params = _resolve_params(args, g.n)
    t0 = perf_counter()
    if args.walks is not None:
        w = args.walks
    else:
        pre = approx_matrix(g, S, T, params, args.mode, 0,
                            variant=args.variant)
        w = practical_matrix_walks(args.mode, len(S), params,
                                   sigma_inf1=pre.sigma_inf1,
                                   srank=pre.srank_surrogate)
    out = approx_matrix(g, S, T, params, args.mode, w, variant=args.variant,
                        clamp=args.clamp, threads=args.threads)
    wall = (perf_counter() - t0) * 1000.0 if args.timing else 0.0
    rows = []
    for i, s in enumerate(S):
        for j, t in enumerate(T):
            rows.append([f"matrix-{args.mode}", s, t,
                         float(out.matrix[i, j]), out.w_used, None, None,
                         out.sigma_inf1, None, out.srank_surrogate, wall])
    return _emit(ESTIMATE_HEADER, rows, args.out)


def cmd_precompute_targets(args):
    g = _load_graph(args.graph)
    T = _pick_nodes(args, g, "targets", 1)
    params = _resolve_params(args, g.n)
    results, _ = backward_push_many(g, T, params.alpha, params.r_max_t)
    save_push_store(args.store, dict(zip(T, results)), params.alpha,
                    params.r_max_t, g.n)
    rows = [[t, res.iterations, math.fsum(res.p.values())]
            for t, res in zip(T, results)]
    return _emit(TARGET_HEADER, rows, args.out)


def _oracle_parts(g, S):
    if g.labels is None:
        raise ValueError("oracle scheme needs community labels")
    by_label = {}
    for i, s in enumerate(S):
        by_label.setdefault(g.labels[s], []).append(i)
    return [by_label[lab] for lab in sorted(by_label)]


def _source_sigmas(g, S, params):
    sigmas = []
    for s in S:
        res = forward_push_degree_normalized(g, s, params.alpha,
                                             params.r_tilde_max_s)
        norm = math.fsum(res.r.values())
        sigmas.append({v: x / norm for v, x in res.r.items()})
    return sigmas


def _part_norm1(sigmas, part):
    agg = {}
    for i in part:
        for v, x in sigmas[i].items():
            if x > agg.get(v, 0.0):
                agg[v] = x
    return math.fsum(agg.values())


def cmd_partition(args):
    need_labels = args.scheme == "oracle"
    g = _load_graph(args.graph, need_labels=need_labels)
    S = _pick_nodes(args, g, "sources", 0)
    k = args.k
    if k < 1 or k > len(S):
        raise ValueError(f"k must be in [1, {len(S)}]")
    params = _resolve_params(args, g.n)
    seed = _resolve_seed(args)
    sigmas = _source_sigmas(g, S, params)
    if args.scheme == "baseline":
        if len(S) % k:
            raise ValueError("baseline chunks need k to divide |S|")
        chunk = len(S) // k
        parts = [list(range(j * chunk, (j + 1) * chunk)) for j in range(k)]
    elif args.scheme == "heuristic_max":
        parts = source_partition_max(sigmas, k, seed).parts
    elif args.scheme in ("heuristic_avg", "heuristic_avg_alt"):
        if not args.targets and args.sample_targets is None:
            raise ValueError(f"{args.scheme} needs --targets")
        T = _pick_nodes(args, g, "targets", 1)
        fwd = [forward_push_degree_normalized(g, s, params.alpha,
                                              params.r_tilde_max_s)
               for s in S]
        bwd, _ = backward_push_many(g, T, params.alpha, params.r_max_t)
        surr = source_surrogate_rows(g, S, fwd, bwd)
        build = source_partition_avg if args.scheme == "heuristic_avg" \
            else source_partition_avg_alt
        parts = build(surr, k, seed).parts
    elif args.scheme == "oracle":
        parts = _oracle_parts(g, S)
        if len(parts) != k:
            raise ValueError(
                f"oracle scheme needs exactly {k} labels, found {len(parts)}")
    else:
        raise ValueError(f"unknown scheme {args.scheme!r}")
    rows = [[j, len(part), _part_norm1(sigmas, part)]
            for j, part in enumerate(parts)]
    return _emit(PARTITION_HEADER, rows, args.out)


def cmd_distributed(args):
    need_labels = args.scheme == "oracle"
    g = _load_graph(args.graph, need_labels=need_labels)
    S = _pick_nodes(args, g, "sources", 0)
    targets = None
    if args.targets or args.sample_targets is not None:
        targets = _pick_nodes(args, g, "targets", 1)
    params = _resolve_params(args, g.n)
    report, _ = run_distributed_estimation(
        g, S, args.k, args.scheme, params, w=args.walks, targets=targets,
        labels=g.labels, push_store=args.push_store, threads=args.threads,
        timing=args.timing)
    rows = [[m.machine_id, m.walks, m.push_work, m.modeled_time_ms,
             m.wall_time_ms] for m in report.machines]
    return _emit(MACHINE_HEADER, rows, args.out)


def cmd_metrics(args):
    g = _load_graph(args.graph, need_labels=True)
    levels = _parse_nodes(args.levels) if args.levels else None
    base = _resolve_seed(args)
    seeds = [base + i for i in range(args.trials)]
    params = _resolve_params(args, g.n)
    rows = clustering_correlation_protocol(
        g, args.size, seeds, alpha=params.alpha,
        r_tilde_max_s=params.r_tilde_max_s, r_max_t=params.r_max_t,
        levels=levels, ct_mode=args.ct_mode)
    table = [[r["phi_S"], r["sigma_inf1"], r["phi_T"], r["c_T"], r["srank"],
              r["seed"]] for r in rows]
    return _emit(METRICS_HEADER, table, args.out)


# ---------------------------------------------------------------------------
# bench protocols
# ---------------------------------------------------------------------------

def _bench_graph(args, seed):
    """--graph wins; otherwise generate the protocol's default instance."""
    if args.graph:
        return _load_graph(args.graph)
    if args.protocol in ("clustering", "distributed"):
        return generate_directed_sbm(args.n, args.blocks, 9.0, 1.0, seed)
    return generate_directed_er(args.n, 0.005, seed)


def _bench_growth(args, g, seeds):
    sizes = [int(x) for x in args.sizes.split(",")]
    rows = []
    for seed_t in seeds:
        for size in sizes:
            rng_s = np.random.default_rng((seed_t, SAMPLE_STREAM, size, 0))
            rng_u = np.random.default_rng((seed_t, SAMPLE_STREAM, size, 1))
            S = sorted(int(v) for v in
                       rng_s.choice(g.n, size=size, replace=False))
            T = sorted(int(v) for v in
                       rng_u.choice(g.n, size=size, replace=False))
            for label, mode in (("fwbw", "shared"), ("baseline", "baseline")):
                params = replace(_resolve_params(args, g.n), seed=seed_t)
                t0 = perf_counter()
                _, stats = estimate_many_pairs(
                    g, S, T, params, mode=mode, variant="practical",
                    walks=args.walks, threads=args.threads)
                wall = (perf_counter() - t0) * 1000.0 if args.timing else 0.0
                pushes = sum(stats["forward_iterations"]) \
                    + sum(stats["merge_stats"].per_target_iterations)
                rows.append([seed_t, size, label, stats["plan_walks"],
                             pushes, stats["merge_stats"].merge_count,
                             stats["sigma_inf1"], wall])
    return GROWTH_HEADER, rows


def _bench_clustering(args, g, seeds):
    params = _resolve_params(args, g.n)
    levels = _parse_nodes(args.levels) if args.levels else None
    rows = clustering_correlation_protocol(
        g, args.size, seeds, alpha=params.alpha,
        r_tilde_max_s=params.r_tilde_max_s, r_max_t=params.r_max_t,
        levels=levels, ct_mode=args.ct_mode)
    table = [[r["phi_S"], r["sigma_inf1"], r["phi_T"], r["c_T"], r["srank"],
              r["seed"]] for r in rows]
    return METRICS_HEADER, table


def _bench_realgraph(args, g, seeds):
    rows = []
    for seed_t in seeds:
        rng = np.random.default_rng((seed_t, SAMPLE_STREAM, 0))
        uniform_S = sorted(int(v) for v in
                           rng.choice(g.n, size=args.size, replace=False))
        uniform_T = sorted(int(v) for v in
                           rng.choice(g.n, size=args.size, replace=False))
        clustered_S = construct_clustered_set(g, args.size, seed_t)
        clustered_T = construct_clustered_set(g, args.size, seed_t + 1)
        cases = (("uniform", uniform_S, uniform_T),
                 ("clustered", clustered_S, clustered_T))
        for sampling, S, T in cases:
            for label, mode in (("fwbw", "shared"), ("baseline", "baseline")):
                params = replace(_resolve_params(args, g.n), seed=seed_t)
                t0 = perf_counter()
                _, stats = estimate_many_pairs(
                    g, S, T, params, mode=mode, variant="practical",
                    walks=args.walks, threads=args.threads)
                wall = (perf_counter() - t0) * 1000.0 if args.timing else 0.0
                pushes = sum(stats["forward_iterations"]) \
                    + sum(stats["merge_stats"].per_target_iterations)
                rows.append([seed_t, sampling, label, stats["plan_walks"],
                             pushes, stats["merge_stats"].merge_count,
                             stats["sigma_inf1"], wall])
    return REALGRAPH_HEADER, rows


def _bench_distributed(args, g, seeds):
    if g.labels is None:
        raise ValueError("distributed protocol needs community labels")
    by_label = {}
    for v, lab in enumerate(g.labels):
        by_label.setdefault(lab, []).append(v)
    all_labels = sorted(by_label)
    if args.k > len(all_labels):
        raise ValueError(f"k={args.k} exceeds {len(all_labels)} communities")
    rows = []
    for seed_t in seeds:
        rng = np.random.default_rng((seed_t, SAMPLE_STREAM, 2))
        labs = [all_labels[i] for i in
                rng.choice(len(all_labels), size=args.k, replace=False)]
        S = []
        for lab in sorted(labs):
            pool = by_label[lab]
            take = rng.choice(len(pool), size=args.per_part, replace=False)
            S.extend(pool[i] for i in sorted(int(x) for x in take))
        params = replace(_resolve_params(args, g.n), seed=seed_t)
        sigmas = _source_sigmas(g, S, params)
        for scheme in ("baseline", "heuristic_max", "oracle"):
            report, _ = run_distributed_estimation(
                g, S, args.k, scheme, params, w=args.walks,
                labels=g.labels, threads=args.threads, timing=args.timing)
            sizes = [len(p) for p in report.partition.parts]
            objective = max(_part_norm1(sigmas, p)
                            for p in report.partition.parts)
            rows.append([seed_t, scheme, report.max_walks,
                         report.total_walks, objective, min(sizes),
                         max(sizes), report.max_modeled_time_ms])
    return DISTBENCH_HEADER, rows


_BENCH_TABLE = {
    "growth": (_bench_growth, GROWTH_HEADER),
    "clustering": (_bench_clustering, METRICS_HEADER),
    "realgraph": (_bench_realgraph, REALGRAPH_HEADER),
    "distributed": (_bench_distributed, DISTBENCH_HEADER),
}


def cmd_bench(args):
    runner, header = _BENCH_TABLE[args.protocol]
    if args.trials == 0:
        return _emit(header, [], args.out)
    if args.protocol == "realgraph" and not args.graph:
        raise ValueError("realgraph protocol needs --graph")
    base = _resolve_seed(args)
    g = _bench_graph(args, base)
    seeds = [base + i for i in range(args.trials)]
    header, rows = runner(args, g, seeds)
    return _emit(header, rows, args.out)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_params(p, *, graph=True):
    if graph:
        p.add_argument("--graph", required=True,
                       help="edge list file (u<TAB>v per line)")
    p.add_argument("--profile", choices=sorted(PROFILES),
                   help="per-dataset tuning preset")
    p.add_argument("--alpha", type=float, help="teleport probability")
    p.add_argument("--delta", type=float,
                   help="smallest value of interest (default profile/0.001)")
    p.add_argument("--eps", type=float, help="relative error target")
    p.add_argument("--pfail", type=float, help="failure probability budget")
    p.add_argument("--c", type=float, help="empirical walk-count constant")
    p.add_argument("--rmax-s", type=float, dest="rmax_s",
                   help="forward residual L1 stop")
    p.add_argument("--rmax-t", type=float, dest="rmax_t",
                   help="backward residual max stop")
    p.add_argument("--rtilde-max-s", type=float, dest="rtilde_max_s",
                   help="degree-normalized forward stop")
    p.add_argument("--seed", type=int,
                   help=f"base RNG seed (default {DEFAULT_SEED}; PPR_SEED "
                        "env var overrides the default)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (never changes output bytes)")
    p.add_argument("--out", help="output CSV path (default stdout)")
    p.add_argument("--timing", action="store_true",
                   help="fill wall-clock columns (otherwise 0)")


def _add_node_pick(p, which, sample_help):
    p.add_argument(f"--{which}", help=f"{which} as ids/ranges, e.g. 0-49,99")
    p.add_argument(f"--sample-{which}", type=int, dest=f"sample_{which}",
                   help=sample_help)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ppr",
        description="Benchmark harness for personalized PageRank "
                    "estimation with shared random walks.",
        epilog=_COLUMN_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="cmd", metavar="subcommand")

    p = sub.add_parser("gen-er", help="write a directed G(n, p) edge list")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--p", type=float, default=0.005)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="edge list path")
    p.set_defaults(func=cmd_gen_er)

    p = sub.add_parser("gen-sbm", help="write a directed block-model edge "
                                       "list plus a .labels sidecar")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--blocks", type=int, default=20,
                   help="number of equal communities")
    p.add_argument("--in-expected", type=float, default=9.0,
                   dest="in_expected",
                   help="expected within-community out-edges per node")
    p.add_argument("--out-expected", type=float, default=1.0,
                   dest="out_expected",
                   help="expected cross-community out-edges per node")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="edge list path")
    p.set_defaults(func=cmd_gen_sbm)

    p = sub.add_parser("pair", help="estimate one pi_s(t)")
    _add_params(p)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--method", choices=sorted(_METHOD_TABLE),
                   default="fwbw")
    p.add_argument("--mode", choices=["shared", "baseline"],
                   default="shared")
    p.add_argument("--walks", type=int, help="override the walk budget")
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("many", help="estimate a grid of pairs S x T")
    _add_params(p)
    _add_node_pick(p, "sources", "sample this many sources uniformly")
    _add_node_pick(p, "targets", "sample this many targets uniformly")
    p.add_argument("--method", choices=sorted(_METHOD_TABLE),
                   default="fwbw")
    p.add_argument("--mode", choices=["shared", "baseline"],
                   default="shared")
    p.add_argument("--walks", type=int, help="override the walk budget")
    p.set_defaults(func=cmd_many)

    p = sub.add_parser("matrix", help="estimate the S x T value matrix by "
                                      "sampling residual entries")
    _add_params(p)
    _add_node_pick(p, "sources", "sample this many sources uniformly")
    _add_node_pick(p, "targets", "sample this many targets uniformly")
    p.add_argument("--mode", choices=["avg", "max", "baseline"],
                   default="avg", help="residual sampling distribution")
    p.add_argument("--variant", choices=["standard", "practical"],
                   default="standard", help="forward push stopping rule")
    p.add_argument("--walks", type=int,
                   help="override the mode's default walk budget")
    p.add_argument("--clamp", action="store_true",
                   help="clamp negative entries to zero")
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("precompute-targets",
                       help="run backward pushes and save the tables")
    _add_params(p)
    _add_node_pick(p, "targets", "sample this many targets uniformly")
    p.add_argument("--store", required=True,
                   help="directory for the push table files")
    p.set_defaults(func=cmd_precompute_targets)

    p = sub.add_parser("partition", help="split sources into k machine "
                                         "groups by residual overlap")
    _add_params(p)
    _add_node_pick(p, "sources", "sample this many sources uniformly")
    _add_node_pick(p, "targets", "sample targets (avg schemes only)")
    p.add_argument("--scheme", default="heuristic_max",
                   choices=["baseline", "heuristic_max", "heuristic_avg",
                            "heuristic_avg_alt", "oracle"])
    p.add_argument("--k", type=int, required=True, help="part count")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("distributed",
                       help="simulate the k-machine estimation pipeline")
    _add_params(p)
    _add_node_pick(p, "sources", "sample this many sources uniformly")
    _add_node_pick(p, "targets", "sample this many targets uniformly")
    p.add_argument("--scheme", default="heuristic_max",
                   choices=["baseline", "heuristic_max", "heuristic_avg",
                            "heuristic_avg_alt", "oracle"])
    p.add_argument("--k", type=int, required=True, help="machine count")
    p.add_argument("--walks", type=int,
                   help="per-source walk budget scale")
    p.add_argument("--push-store", dest="push_store",
                   help="directory from precompute-targets")
    p.set_defaults(func=cmd_distributed)

    p = sub.add_parser("bench", help="run a benchmark sweep")
    _add_params(p, graph=False)
    p.add_argument("--graph", help="edge list (defaults to a generated "
                                   "instance for growth/clustering/"
                                   "distributed)")
    p.add_argument("--protocol", required=True,
                   choices=sorted(_BENCH_TABLE))
    p.add_argument("--trials", type=int, default=3,
                   help="trial count; 0 emits only the header")
    p.add_argument("--n", type=int, default=2000,
                   help="generated graph size")
    p.add_argument("--blocks", type=int, default=20,
                   help="communities in generated block-model graphs")
    p.add_argument("--sizes", default="10,20,40,80",
                   help="growth sweep set sizes")
    p.add_argument("--size", type=int, default=50,
                   help="set size for clustering/realgraph")
    p.add_argument("--levels", help="clustering union levels, e.g. 1,4,16")
    p.add_argument("--ct-mode", dest="ct_mode", default="push",
                   choices=["oracle", "push"],
                   help="target overlap counting rule")
    p.add_argument("--k", type=int, default=4,
                   help="machines for the distributed protocol")
    p.add_argument("--per-part", type=int, default=25, dest="per_part",
                   help="sources per community for the distributed protocol")
    p.add_argument("--walks", type=int, help="override walk budgets")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("metrics",
                       help="clustering correlation protocol rows")
    _add_params(p)
    p.add_argument("--size", type=int, default=50, help="|S| = |T|")
    p.add_argument("--levels", help="community union sizes, e.g. 1,4,16")
    p.add_argument("--trials", type=int, default=3,
                   help="seeds per level")
    p.add_argument("--ct-mode", dest="ct_mode", default="oracle",
                   choices=["oracle", "push"])
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_help()
        return 0
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
