"""Submatrix estimation: push matrices plus rank-one walk samples.

Stacking per-source forward pushes (P_S, R_S) and per-target backward
pushes (P_T, R_T) as columns turns the pair decomposition into

    Pi(S,T) = P_T(S,:) + P_S^T R_T + R_S^T Pi R_T,

where only the last term is unknown. Each Monte-Carlo sample draws a
start node mu from a distribution sigma built over the source residuals,
walks to an endpoint nu, and contributes the rank-one product of row
R_S(mu,:)/sigma(mu) with row R_T(nu,:), an unbiased estimate of the
unknown term at O(l^2) cost per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import stack_sparse_columns
from .graphs import validate_node_set
from .push import backward_push_many, forward_push_degree_normalized, \
    forward_push_l1, PushResult
from .walks import sample_endpoints_batch

__all__ = [
    "PushMatrices",
    "PprMatrixEstimate",
    "build_push_matrices",
    "sampling_distribution",
    "approx_matrix",
    "stable_rank",
    "surrogate_stable_rank",
    "matrix_walk_bound",
    "practical_matrix_walks",
]

# block size and stream tag for the rank-one sample draws
_BLOCK = 4096
MATRIX_STREAM = 3


@dataclass
class PushMatrices:
    """Column-stacked push outputs, all shaped n x l (CSR)."""
    p_s: object
    r_s: object
    p_t: object
    r_t: object


@dataclass
class PprMatrixEstimate:
    matrix: np.ndarray
    w_used: int
    mode: str
    srank_surrogate: float
    sigma_inf1: float | None
    outside_guarantee: bool = False
    deterministic_only: bool = False


def build_push_matrices(fwd, bwd, n):
    """Assemble PushMatrices from per-source forward and per-target
    backward push results."""
    if not fwd or not bwd:
        raise ValueError("push result lists must be nonempty")
    for res in list(fwd) + list(bwd):
        for node in res.p:
            if not 0 <= node < n:
                raise ValueError("push entry outside node range")
    return PushMatrices(
        p_s=stack_sparse_columns([r.p for r in fwd], n),
        r_s=stack_sparse_columns([r.r for r in fwd], n),
        p_t=stack_sparse_columns([r.p for r in bwd], n),
        r_t=stack_sparse_columns([r.r for r in bwd], n),
    )


def sampling_distribution(r_s, mode):
    """Start-node distribution over the union of residual supports.

    mode "avg" averages the column-normalized residuals; mode "max"
    takes the per-node maximum and renormalizes. Returns (nodes, probs)
    restricted to the support.
    """
    csc = r_s.tocsc()
    sums = np.asarray(csc.sum(axis=0)).ravel()
    if (sums <= 0).any():
        raise ValueError("every source needs positive residual mass")
    normalized = csc.multiply(1.0 / sums)
    if mode == "avg":
        sigma = np.asarray(normalized.sum(axis=1)).ravel() / csc.shape[1]
    elif mode == "max":
        sigma = np.asarray(normalized.max(axis=1).todense()).ravel()
    else:
        raise ValueError(f"unknown mode {mode!r}")
    support = np.flatnonzero(sigma > 0)
    probs = sigma[support]
    return support, probs / probs.sum()


def approx_matrix(g, S, T, params, mode, w, *, variant="standard",
                  clamp=False, threads=1, pushes=None):
    """Estimate the PPR submatrix Pi(S,T) with w rank-one samples.

    mode "avg" or "max" picks the sampling distribution; "baseline"
    skips the forward stage entirely (residuals stay point masses at the
    sources, start nodes are uniform over S). variant "practical" uses
    the degree-normalized forward stop, which is outside the operator-
    norm guarantee and flagged as such. w = 0 returns only the
    deterministic part. pushes, a (fwd, bwd) pair of result lists
    aligned with S and T, skips the push stage so repeated sampling
    runs reuse one set of tables.
    """
    params.validate()
    S = validate_node_set(g, S)
    T = validate_node_set(g, T)
    if len(S) != len(T) or not S:
        raise ValueError("S and T must be nonempty and equally sized")
    w = int(w)
    if w < 0:
        raise ValueError("w must be nonnegative")
    alpha = params.alpha

    outside = variant == "practical" and mode != "baseline"
    if mode not in ("baseline", "avg", "max"):
        raise ValueError(f"unknown mode {mode!r}")
    dist_mode = "avg" if mode == "baseline" else mode
    if pushes is not None:
        fwd, bwd = pushes
        if len(fwd) != len(S) or len(bwd) != len(T):
            raise ValueError("pushes must align with S and T")
    else:
        if mode == "baseline":
            # uniform over S for point-mass residuals
            fwd = [PushResult(r={s: 1.0}) for s in S]
        elif variant == "practical":
            fwd = [forward_push_degree_normalized(
                g, s, alpha, params.r_tilde_max_s) for s in S]
        else:
            fwd = [forward_push_l1(g, s, alpha, params.r_max_s) for s in S]
        bwd, _ = backward_push_many(g, T, alpha, params.r_max_t)
    pm = build_push_matrices(fwd, bwd, g.n)

    base = deterministic_part(pm, S)
    support, probs = sampling_distribution(pm.r_s, dist_mode)
    sigma_inf1 = None
    if dist_mode == "max":
        norms = [math.fsum(res.r.values()) for res in fwd]
        sigma_inf1 = sigma_infinity_from_columns(pm.r_s, norms)

    l = len(S)
    acc = np.zeros((l, l))
    if w > 0:
        blocks = range((w + _BLOCK - 1) // _BLOCK)
        seed = params.seed
        r_s_csr = pm.r_s.tocsr()
        r_t_csr = pm.r_t.tocsr()

        def run_block(b):
            count = min(_BLOCK, w - b * _BLOCK)
            rng = np.random.default_rng((seed, MATRIX_STREAM, b))
            picks = rng.choice(support.size, size=count, p=probs)
            starts = support[picks]
            ends = sample_endpoints_batch(g, starts, alpha, rng)
            a = r_s_csr[starts, :].multiply(
                (1.0 / probs[picks])[:, None]).tocsr()
            bmat = r_t_csr[ends, :]
            return np.asarray((a.T @ bmat).todense())

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run_block, blocks))
        else:
            parts = [run_block(b) for b in blocks]
        for part in parts:  # fixed block order keeps the sum deterministic
            acc += part
        acc /= w
    est = base + acc
    if clamp:
        est = np.maximum(est, 0.0)
    try:
        srank_surr = stable_rank(base)
    except ValueError:
        srank_surr = float("nan")
    return PprMatrixEstimate(
        matrix=est, w_used=w, mode=mode, srank_surrogate=srank_surr,
        sigma_inf1=sigma_inf1, outside_guarantee=outside,
        deterministic_only=(w == 0))


def deterministic_part(pm, S):
    """P_T(S,:) + P_S^T R_T as a dense array."""
    base = np.asarray(pm.p_t.tocsr()[list(S), :].todense())
    return base + np.asarray((pm.p_s.T @ pm.r_t).todense())


def sigma_infinity_from_columns(r_s, norms):
    """Max-norm sum of the column-normalized residual matrix."""
    normalized = r_s.tocsc().multiply(1.0 / np.asarray(norms))
    return float(np.asarray(normalized.max(axis=1).todense()).sum())


# ---------------------------------------------------------------------------
# Stable rank
# ---------------------------------------------------------------------------

_POWER_TOL = 1e-10
_POWER_MAX_ITERS = 100_000


def stable_rank(matrix):
    """(Frobenius norm / spectral norm)^2, between 1 and the rank.

    The spectral norm comes from power iteration on A^T A with a
    deterministic all-ones start (basis-vector fallback when that start
    is orthogonal to the range).
    """
    sparse = hasattr(matrix, "toarray")
    fro2 = float((matrix.multiply(matrix)).sum()) if sparse \
        else float(np.square(np.asarray(matrix)).sum())
    if fro2 == 0.0:
        raise ValueError("stable rank of the zero matrix is undefined")
    cols = matrix.shape[1]

    def step(x):
        return matrix.T @ (matrix @ x)

    x = np.ones(cols) / math.sqrt(cols)
    if np.linalg.norm(step(x)) == 0.0:
        for j in range(cols):  # all-ones start may be orthogonal
            e = np.zeros(cols)
            e[j] = 1.0
            if np.linalg.norm(step(e)) > 0.0:
                x = e
                break
    lam = 0.0
    for _ in range(_POWER_MAX_ITERS):
        y = step(x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        nxt = float(x @ y)
        x = y / norm
        if lam > 0.0 and abs(nxt - lam) <= _POWER_TOL * lam:
            lam = nxt
            break
        lam = nxt
    return fro2 / lam


def surrogate_stable_rank(pm, S):
    """Stable rank of the deterministic part, a cheap stand-in for the
    stable rank of the true submatrix."""
    return stable_rank(deterministic_part(pm, S))


# ---------------------------------------------------------------------------
# Walk budgets
# ---------------------------------------------------------------------------

def matrix_walk_bound(l, eps, p_fail, r_max_s, r_max_t, mode, *,
                      srank=None, sigma_inf1=None):
    """Sample count sufficient for the operator-norm guarantee
    ||Pi - est||_2 <= eps * max(||Pi||_2, 1) with probability 1-p_fail."""
    common = math.log(2.0 * l / p_fail) * r_max_s * r_max_t \
        * (6.0 + 4.0 * eps) / (3.0 * eps * eps)
    if mode == "avg":
        if srank is None:
            raise ValueError("avg bound needs a stable rank")
        return math.ceil(l * l * math.sqrt(srank) * common)
    if mode == "max":
        if sigma_inf1 is None:
            raise ValueError("max bound needs the max-norm sum")
        return math.ceil(l ** 1.5 * sigma_inf1 * common)
    raise ValueError(f"unknown mode {mode!r}")


def practical_matrix_walks(mode, l, params, *, sigma_inf1=None, srank=None):
    """Benchmark walk budgets: the scalar budget c*r_max_t/delta scaled
    by l (baseline), by the max-norm sum (max), or by
    sqrt(l * srank) (avg)."""
    unit = params.c * params.r_max_t / params.delta
    if mode == "baseline":
        return math.ceil(l * unit)
    if mode == "max":
        if sigma_inf1 is None:
            raise ValueError("max budget needs the max-norm sum")
        return math.ceil(sigma_inf1 * unit)
    if mode == "avg":
        if srank is None:
            raise ValueError("avg budget needs a stable rank")
        return math.ceil(math.sqrt(l * srank) * unit)
    raise ValueError(f"unknown mode {mode!r}")
