"""Hybrid push-plus-walk estimators of personalized PageRank values.

The pair estimate decomposes as

    pi_s(t) = p^t(s) + <p^s, r^t> + ||r^s||_1 * E[r^t(U)],

where (p^s, r^s) comes from a forward push at s, (p^t, r^t) from a
backward push at t, and U is the endpoint of a walk started from the
normalized forward residual. Only the last term is sampled. The grid
estimator shares walk endpoints across sources and shares backward push
work across targets; the classic two-stage estimator is the special case
r_max_s = 1 (no forward stage, walks start at s itself).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .graphs import validate_node_set
from .metrics import sigma_infinity_one
from .push import (
    backward_push_many,
    forward_push_degree_normalized,
    forward_push_l1,
)
from .walks import build_walk_plan, draw_start_counts, execute_walk_plan

__all__ = [
    "EstimatorParams",
    "PairEstimate",
    "PROFILES",
    "fwbw_mcmc_single",
    "fwbw_mcmc_practical",
    "bidirectional_ppr",
    "estimate_many_pairs",
    "optimal_parameters",
    "reference_error_bounds",
    "stack_sparse_columns",
]

# multinomial start-count draws use this stream off the master seed
COUNT_STREAM = 2


@dataclass
class EstimatorParams:
    """Shared parameter bundle for the estimators.

    delta is the smallest PPR value of interest, eps the relative error
    target at that scale, p_fail the allowed failure probability, c the
    empirical walk-count constant (walks scale as c * r_max_t / delta).
    """
    alpha: float = 0.2
    delta: float = 0.001
    eps: float = 0.5
    p_fail: float = 0.1
    r_max_s: float = 0.1
    r_max_t: float = 0.01
    r_tilde_max_s: float = 0.001
    c: float = 10.0
    seed: int = 0

    def validate(self):
        for name in ("alpha", "delta", "eps", "p_fail"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0,1)")
        if not 0.0 < self.r_max_s <= 1.0:
            raise ValueError("r_max_s must lie in (0,1]")
        if not 0.0 < self.r_max_t < 1.0:
            raise ValueError("r_max_t must lie in (0,1)")
        if self.r_tilde_max_s <= 0.0:
            raise ValueError("r_tilde_max_s must be positive")
        if self.c <= 0.0:
            raise ValueError("c must be positive")
        return self


@dataclass
class PairEstimate:
    value: float
    walks_used: int
    push_iterations: int
    method: str


# ---------------------------------------------------------------------------
# Parameter profiles (per-dataset defaults used by the benchmarks)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Per-dataset tuning: delta = delta_scale / n, thresholds, walk
    constants for the practical forward-backward method and for the
    no-forward-stage method."""
    delta_scale: float
    fwbw_r_tilde_max_s: float
    fwbw_r_max_t: float
    fwbw_c: float
    bidir_r_max_t: float
    bidir_c: float

    def params(self, n, method="fwbw", alpha=0.2, eps=0.5, p_fail=0.1,
               seed=0):
        delta = self.delta_scale / n
        if method in ("fwbw", "fwbw-l1"):
            return EstimatorParams(
                alpha=alpha, delta=delta, eps=eps, p_fail=p_fail,
                r_tilde_max_s=self.fwbw_r_tilde_max_s,
                r_max_t=self.fwbw_r_max_t, c=self.fwbw_c, seed=seed)
        if method == "bidir":
            return EstimatorParams(
                alpha=alpha, delta=delta, eps=eps, p_fail=p_fail,
                r_max_s=1.0, r_max_t=self.bidir_r_max_t, c=self.bidir_c,
                seed=seed)
        raise ValueError(f"unknown method {method!r}")


PROFILES = {
    "direct-er": Profile(1.0, 1.0e-3, 3.0e-3, 7.0, 1.7e-3, 10.0),
    "direct-sbm": Profile(1.0, 1.0e-3, 4.0e-3, 7.0, 3.0e-3, 10.0),
    "com-amazon": Profile(10.0, 3.6e-3, 18.2e-3, 12.0, 7.4e-3, 13.0),
    "com-dblp": Profile(10.0, 2.9e-3, 14.3e-3, 13.0, 6.0e-3, 15.0),
    "roadnet-pa": Profile(10.0, 15.1e-3, 34.8e-3, 6.0, 12.8e-3, 6.0),
    "slashdot": Profile(10.0, 2.0e-3, 12.2e-3, 7.0, 4.2e-3, 17.0),
    "web-berkstan": Profile(10.0, 6.9e-3, 23.0e-3, 3.0, 11.6e-3, 3.0),
    "web-google": Profile(10.0, 4.5e-3, 17.6e-3, 8.0, 6.7e-3, 11.0),
    "wikitalk": Profile(10.0, 2.3e-3, 7.5e-3, 8.0, 2.9e-3, 20.0),
}


# ---------------------------------------------------------------------------
# Sparse assembly
# ---------------------------------------------------------------------------

def stack_sparse_columns(vecs, n):
    """Stack sparse dict vectors as columns of an n x len(vecs) CSR
    matrix (deterministic entry order)."""
    rows, cols, data = [], [], []
    for j, vec in enumerate(vecs):
        for node in sorted(vec):
            rows.append(node)
            cols.append(j)
            data.append(vec[node])
    return sp.coo_matrix((data, (rows, cols)),
                         shape=(n, len(vecs))).tocsr()


# ---------------------------------------------------------------------------
# Grid estimation
# ---------------------------------------------------------------------------

def estimate_many_pairs(g, S, T, params, mode="shared", *, variant="standard",
                        walks=None, threads=1):
    """Estimate pi_s(t) for every (s, t) in S x T.

    mode "shared": one forward push per source, one merged backward pass
    over the targets, and a consolidated walk plan in which each start
    node samples the maximum count any source requests there.

    mode "baseline": no forward stage (each source's walks all start at
    the source) and independent backward pushes, i.e. the classic
    two-stage method run per pair.

    variant "standard" stops the forward push on the residual L1 norm
    and gives every source ceil(c * r_max_s * r_max_t / delta) walks;
    "practical" stops on the degree-normalized criterion and gives
    source s ceil(w * ||r^s||_1) walks with w = c * r_max_t / delta.
    An explicit `walks` overrides the derived w.

    Returns (estimates, stats): a dense |S| x |T| array and a dict of
    diagnostics including the raw push results.
    """
    params.validate()
    S = validate_node_set(g, S)
    T = validate_node_set(g, T)
    if not S or not T:
        raise ValueError("S and T must be nonempty")
    if mode not in ("shared", "baseline"):
        raise ValueError(f"unknown mode {mode!r}")
    if variant not in ("standard", "practical"):
        raise ValueError(f"unknown variant {variant!r}")
    alpha = params.alpha

    # forward stage
    if mode == "baseline":
        from .push import PushResult
        fwd = [PushResult(r={s: 1.0}) for s in S]
    elif variant == "practical":
        fwd = _map_sources(
            lambda s: forward_push_degree_normalized(
                g, s, alpha, params.r_tilde_max_s), S, threads)
    else:
        fwd = _map_sources(
            lambda s: forward_push_l1(g, s, alpha, params.r_max_s),
            S, threads)
    norms = [math.fsum(res.r.values()) for res in fwd]
    sigmas = [
        {k: v / norm for k, v in res.r.items()} if norm > 0.0 else {}
        for res, norm in zip(fwd, norms)
    ]

    # walk budgets and the scale applied to each source's endpoint sum
    if mode == "baseline" or variant == "standard":
        if walks is None:
            w_cont = params.c * params.r_max_s * params.r_max_t / params.delta
            if mode == "baseline":
                w_cont = params.c * params.r_max_t / params.delta
            w_int = max(1, math.ceil(w_cont))
        else:
            w_int = int(walks)
        budgets = [w_int if sig else 0 for sig in sigmas]
        scales = [norm / w_int if w_int > 0 else 0.0 for norm in norms]
        w_cont_out = float(w_int)
    else:
        w_cont = params.c * params.r_max_t / params.delta \
            if walks is None else float(walks)
        budgets = [math.ceil(w_cont * norm) if norm > 0.0 and w_cont > 0.0
                   else 0 for norm in norms]
        scales = [1.0 / w_cont if w_cont > 0.0 else 0.0] * len(S)
        w_cont_out = w_cont

    # walk stage
    seed = params.seed
    rng_counts = np.random.default_rng((seed, COUNT_STREAM))
    active = [i for i, sig in enumerate(sigmas) if sig and budgets[i] > 0]
    counts = [{} for _ in S]
    if active:
        drawn = draw_start_counts([sigmas[i] for i in active],
                                  [budgets[i] for i in active], rng_counts)
        for i, cts in zip(active, drawn):
            counts[i] = cts
    plan = build_walk_plan(counts)
    table = execute_walk_plan(g, plan, alpha, seed, threads=threads)

    # backward stage
    if mode == "shared":
        bwd, merge_stats = backward_push_many(g, T, alpha, params.r_max_t)
    else:
        from .push import MergeStats, backward_push
        bwd = [backward_push(g, t, alpha, params.r_max_t) for t in T]
        merge_stats = MergeStats(
            extend_count=sum(r.iterations for r in bwd),
            per_target_iterations=[r.iterations for r in bwd])

    # assemble the three estimate terms over the grid
    n = g.n
    r_t_mat = stack_sparse_columns([res.r for res in bwd], n)
    p_t_mat = stack_sparse_columns([res.p for res in bwd], n)
    p_s_mat = stack_sparse_columns([res.p for res in fwd], n)
    end_counts = [
        _endpoint_counts(table, counts[i]) for i in range(len(S))
    ]
    n_mat = stack_sparse_columns(end_counts, n)
    base = np.asarray(p_t_mat[S, :].todense())
    dots = np.asarray((p_s_mat.T @ r_t_mat).todense())
    mc = np.asarray((n_mat.T @ r_t_mat).todense())
    mc *= np.asarray(scales)[:, None]
    estimates = base + dots + mc

    stats = {
        "mode": mode,
        "variant": variant,
        "w": w_cont_out,
        "walks_per_source": budgets,
        "plan_walks": table.total_walks,
        "sigma_inf1": sigma_infinity_one([sig for sig in sigmas if sig])
        if any(sigmas) else None,
        "sharing_bound": _sharing_bound(sigmas, params.eps, params.p_fail),
        "residual_norms": norms,
        "forward_iterations": [res.iterations for res in fwd],
        "forward_work": [res.pushed_work for res in fwd],
        "forward_results": fwd,
        "backward_results": bwd,
        "merge_stats": merge_stats,
        "counts": counts,
    }
    return estimates, stats


def _map_sources(fn, S, threads):
    if threads > 1 and len(S) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, S))
    return [fn(s) for s in S]


def _endpoint_counts(table, source_counts):
    out = {}
    for v, c in source_counts.items():
        for u in table.endpoints[v][:c]:
            out[u] = out.get(u, 0) + 1
    return out


def _sharing_bound(sigmas, eps, p_fail):
    """Walk count above which the consolidated plan size concentrates
    around its mean (reported, never enforced)."""
    support = sum(len(sig) for sig in sigmas)
    smallest = min((v for sig in sigmas for v in sig.values() if v > 0),
                   default=None)
    if not support or smallest is None:
        return None
    return 3.0 * math.log(2.0 * support / p_fail) / (eps * eps * smallest)


# ---------------------------------------------------------------------------
# Single-pair fronts
# ---------------------------------------------------------------------------

def _single(g, s, t, params, variant, mode, method):
    est, stats = estimate_many_pairs(g, [s], [t], params, mode=mode,
                                     variant=variant)
    pushes = stats["forward_iterations"][0] \
        + stats["merge_stats"].per_target_iterations[0]
    return PairEstimate(value=float(est[0, 0]),
                        walks_used=stats["walks_per_source"][0],
                        push_iterations=pushes,
                        method=method)


def fwbw_mcmc_single(g, s, t, params):
    """Forward push, backward push, then walks from the normalized
    forward residual; see the module docstring for the decomposition."""
    return _single(g, s, t, params, "standard", "shared", "fwbw-l1")


def fwbw_mcmc_practical(g, s, t, params):
    """Like fwbw_mcmc_single with the degree-normalized forward stop and
    ceil(w * ||r^s||_1) walks at scale 1/w."""
    return _single(g, s, t, params, "practical", "shared", "fwbw")


def bidirectional_ppr(g, s, t, params):
    """No forward stage: backward push plus w walks started at s.

    Exactly the r_max_s = 1 special case of fwbw_mcmc_single.
    """
    est = _single(g, s, t, replace(params, r_max_s=1.0), "standard",
                  "shared", "bidir")
    return est


# ---------------------------------------------------------------------------
# Parameter selection
# ---------------------------------------------------------------------------

def optimal_parameters(m, delta, eps, p_fail, n=None):
    """Cost-balancing push thresholds and walk counts.

    The worst-case variant balances forward push work m/r_max_s against
    walk work K * r_max_s * r_max_t with K = log(1/p_fail)/(delta *
    eps^(7/3)), which yields r_max_s = r_max_t =
    (m*delta)^(1/3) * eps^(7/9) / log(1/p_fail)^(1/3) and assumes
    m*delta < log(1/p_fail)/eps^2. The practical variant (needs n)
    balances the degree-normalized forward stop against average-case
    backward work. Outputs clamped to (0,1]; the flags record whether
    clamping fired or the assumption failed.
    """
    if min(m, delta, eps, p_fail) <= 0 or eps >= 1 or p_fail >= 1:
        raise ValueError("need m > 0, delta > 0, eps and p_fail in (0,1)")
    log_pf = math.log(1.0 / p_fail)
    precondition_ok = m * delta < log_pf / (eps * eps)
    clamped = False

    def clamp(x):
        nonlocal clamped
        if x > 1.0:
            clamped = True
            return 1.0
        return x

    r_worst = (m * delta) ** (1 / 3) * eps ** (7 / 9) / log_pf ** (1 / 3)
    r_worst_c = clamp(r_worst)
    c_theory = 3.0 * (2.0 * math.e) ** (1 / 3) \
        * math.log(2.0 / p_fail) / eps ** (7 / 3)
    out = {
        "worst_case": {
            "r_max_s": r_worst_c,
            "r_max_t": r_worst_c,
            "w": math.ceil(c_theory * r_worst_c * r_worst_c / delta),
        },
        "c_theory": c_theory,
        "precondition_ok": precondition_ok,
    }
    if n is not None:
        r_max_t = math.sqrt(m * delta) * eps ** (7 / 6) \
            / math.sqrt(n * log_pf)
        r_max_t_c = clamp(r_max_t)
        r_tilde = delta * eps ** (7 / 3) / (r_max_t_c * log_pf)
        out["practical"] = {
            "r_max_t": r_max_t_c,
            "r_tilde_max_s": clamp(r_tilde),
        }
    out["clamped"] = clamped
    return out


# ---------------------------------------------------------------------------
# Reference error bounds
# ---------------------------------------------------------------------------

def reference_error_bounds(g, t, eta, estimates, delta, alpha=0.2):
    """Certified error bounds from a fine backward push, no oracle needed.

    A backward push at threshold eta leaves p(s) within eta of the true
    pi_s(t), so |est - p(s)| + eta bounds the absolute error. Pairs with
    p(s) >= delta are labeled significant (relative bound
    |est - p(s)|/p(s) + eta/delta); pairs with p(s) < delta - eta are
    insignificant; the gap cases are labeled ambiguous and excluded from
    error statistics.
    """
    if not eta < delta:
        raise ValueError("eta must be smaller than delta")
    from .push import backward_push
    ref = backward_push(g, t, alpha, eta)
    rows = []
    for s, value in estimates:
        p_ref = ref.p.get(s, 0.0)
        dev = abs(value - p_ref)
        if p_ref >= delta:
            label = "significant"
        elif p_ref < delta - eta:
            label = "insignificant"
        else:
            label = "ambiguous"
        rows.append({
            "s": s,
            "value": value,
            "reference": p_ref,
            "label": label,
            "relative_bound": dev / p_ref + eta / delta if p_ref > 0 else None,
            "absolute_bound": dev + eta,
        })
    return rows
