"""Directed graphs with dense integer ids, plus generators and an exact
personalized PageRank oracle.

Everything downstream assumes each node has at least one out-edge, so
construction repairs dangling nodes with a self-loop. Adjacency lives in
plain tuples; a Graph is immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "load_edge_list",
    "save_edge_list",
    "generate_directed_er",
    "generate_directed_sbm",
    "conductance",
    "construct_clustered_set",
    "exact_ppr",
    "exact_ppr_rows",
    "global_pagerank",
    "basis_vector",
    "uniform_distribution",
    "validate_distribution",
    "validate_node_set",
]


# ---------------------------------------------------------------------------
# Graph container
# ---------------------------------------------------------------------------

class Graph:
    """Immutable directed multigraph on nodes 0..n-1.

    Attributes
    ----------
    n, m : int
        Node and edge counts (self-loops from dangling repair included).
    out_adj, in_adj : tuple[tuple[int, ...], ...]
        Per-node neighbor tuples; in_adj is the exact transpose of out_adj.
    out_deg, in_deg : numpy.ndarray
        Per-node degree counts (multi-edges counted with multiplicity).
    labels : tuple[int, ...] | None
        Optional per-node community labels (set by the block-model
        generator, or attached by a loader).
    """

    __slots__ = ("n", "m", "out_adj", "in_adj", "out_deg", "in_deg",
                 "out_deg_list", "in_deg_list", "labels", "_pt", "_walk_csr")

    def __init__(self, out_lists, labels=None):
        n = len(out_lists)
        if n == 0:
            raise ValueError("graph must have at least one node")
        out_adj = []
        for u, nbrs in enumerate(out_lists):
            row = tuple(int(v) for v in nbrs)
            for v in row:
                if not (0 <= v < n):
                    raise ValueError(f"edge {u}->{v} leaves id range [0,{n})")
            if not row:
                row = (u,)  # dangling repair: self-loop keeps P row-stochastic
            out_adj.append(row)
        in_lists = [[] for _ in range(n)]
        for u, row in enumerate(out_adj):
            for v in row:
                in_lists[v].append(u)
        self.n = n
        self.out_adj = tuple(out_adj)
        self.in_adj = tuple(tuple(x) for x in in_lists)
        self.out_deg_list = tuple(len(r) for r in self.out_adj)
        self.in_deg_list = tuple(len(r) for r in self.in_adj)
        self.out_deg = np.array(self.out_deg_list, dtype=np.int64)
        self.in_deg = np.array(self.in_deg_list, dtype=np.int64)
        self.m = int(self.out_deg.sum())
        if labels is not None:
            if len(labels) != n:
                raise ValueError("labels length must equal node count")
            labels = tuple(int(x) for x in labels)
        self.labels = labels
        self._pt = None
        self._walk_csr = None

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"

    def transition_transpose(self):
        """P^T as a scipy CSR matrix, built lazily and cached.

        P[u, v] = multiplicity(u->v) / d_out(u).
        """
        if self._pt is None:
            rows, cols, data = [], [], []
            for u, nbrs in enumerate(self.out_adj):
                share = 1.0 / len(nbrs)
                for v in nbrs:
                    rows.append(v)
                    cols.append(u)
                    data.append(share)
            self._pt = sp.coo_matrix(
                (data, (rows, cols)), shape=(self.n, self.n)
            ).tocsr()
        return self._pt

    def walk_arrays(self):
        """Flattened adjacency (indptr, targets) for vectorized stepping."""
        if self._walk_csr is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.cumsum(self.out_deg, out=indptr[1:])
            targets = np.fromiter(
                (v for row in self.out_adj for v in row),
                dtype=np.int64, count=self.m)
            self._walk_csr = (indptr, targets)
        return self._walk_csr


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def load_edge_list(source, *, symmetrize=False, dedup=True, remap_out=None):
    """Parse "src dst" lines into a Graph with dense ids.

    Parameters
    ----------
    source : str | iterable of str
        Path or open text stream. Lines starting with '#' and blank
        lines are skipped.
    symmetrize : bool
        Insert each edge in both directions (for undirected inputs).
    dedup : bool
        Drop duplicate edges (applied after symmetrize).
    remap_out : writable text stream, optional
        If given, receives one "orig<TAB>dense" line per node.

    Returns
    -------
    Graph
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            return load_edge_list(fh, symmetrize=symmetrize, dedup=dedup,
                                  remap_out=remap_out)
    edges = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two fields, got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer field in {line!r}") from None
        if u < 0 or v < 0:
            raise ValueError(f"line {lineno}: negative node id in {line!r}")
        edges.append((u, v))
        if symmetrize and u != v:
            edges.append((v, u))
    if not edges:
        raise ValueError("empty edge list")
    ids = sorted({u for e in edges for u in e})
    dense = {orig: i for i, orig in enumerate(ids)}
    if remap_out is not None:
        for orig in ids:
            remap_out.write(f"{orig}\t{dense[orig]}\n")
    out_lists = [[] for _ in ids]
    if dedup:
        seen = set()
        for u, v in edges:
            if (u, v) not in seen:
                seen.add((u, v))
                out_lists[dense[u]].append(dense[v])
    else:
        for u, v in edges:
            out_lists[dense[u]].append(dense[v])
    return Graph(out_lists)


def save_edge_list(g, stream):
    """Write one "u<TAB>v" line per edge (repair self-loops included).

    stream may be a path or an open text stream.
    """
    if isinstance(stream, str):
        with open(stream, "w", encoding="utf-8", newline="") as fh:
            save_edge_list(g, fh)
        return
    for u, row in enumerate(g.out_adj):
        for v in row:
            stream.write(f"{u}\t{v}\n")


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

def generate_directed_er(n, p, seed):
    """Directed Erdos-Renyi digraph: each ordered pair (u,v), u != v,
    is an edge independently with probability p."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0,1]")
    rng = np.random.default_rng(seed)
    out_lists = []
    for u in range(n):
        mask = rng.random(n) < p
        mask[u] = False
        out_lists.append(np.flatnonzero(mask))
    return Graph(out_lists)


def generate_directed_sbm(n, k, in_expected, out_expected, seed):
    """Directed stochastic block model with k equal contiguous blocks.

    Ordered pairs inside a block are edges with probability
    in_expected/(block_size - 1); pairs across blocks with probability
    out_expected/(n - block_size). Community labels are stored on the
    returned graph.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be >= 1")
    if n % k != 0:
        raise ValueError(f"k={k} does not divide n={n}")
    b = n // k
    p_in = in_expected / (b - 1) if b > 1 else 0.0
    p_out = out_expected / (n - b) if n > b else 0.0
    if not 0.0 <= p_in <= 1.0 or not 0.0 <= p_out <= 1.0:
        raise ValueError("expected degrees exceed available pair counts")
    labels = [u // b for u in range(n)]
    rng = np.random.default_rng(seed)
    out_lists = []
    prob = np.empty(n)
    for u in range(n):
        blk = labels[u]
        prob[:] = p_out
        prob[blk * b:(blk + 1) * b] = p_in
        mask = rng.random(n) < prob
        mask[u] = False
        out_lists.append(np.flatnonzero(mask))
    return Graph(out_lists, labels=labels)


# ---------------------------------------------------------------------------
# Clustering helpers
# ---------------------------------------------------------------------------

def validate_node_set(g, nodes):
    """Check ids are valid, distinct; return them as a list."""
    out = [int(v) for v in nodes]
    if len(set(out)) != len(out):
        raise ValueError("node set contains duplicates")
    for v in out:
        if not 0 <= v < g.n:
            raise ValueError(f"node id {v} out of range [0,{g.n})")
    return out


def conductance(g, u):
    """Directed conductance: edges leaving U over min of the out-degree
    volumes of U and its complement."""
    nodes = validate_node_set(g, u)
    if not nodes or len(nodes) == g.n:
        raise ValueError("node set must be a nonempty proper subset")
    inside = set(nodes)
    cut = sum(1 for v in nodes for w in g.out_adj[v] if w not in inside)
    vol = int(g.out_deg[nodes].sum())
    return cut / min(vol, g.m - vol)


def construct_clustered_set(g, l, seed):
    """Grow a low-conductance node set by weighted frontier expansion.

    Starts from a uniform node; each subsequent node is drawn from the
    out-frontier with probability proportional to (# in-set in-neighbors)
    divided by in-degree. Returns fewer than l nodes with a warning if
    the frontier empties first.
    """
    if not 1 <= l <= g.n:
        raise ValueError("l must lie in [1, n]")
    rng = np.random.default_rng(seed)
    start = int(rng.integers(g.n))
    chosen = [start]
    inside = {start}
    counts = {}  # frontier node -> # distinct in-set in-neighbors

    def absorb(v):
        counts.pop(v, None)
        for w in set(g.out_adj[v]):
            if w not in inside:
                counts[w] = counts.get(w, 0) + 1

    absorb(start)
    while len(chosen) < l:
        if not counts:
            warnings.warn(
                f"frontier exhausted at {len(chosen)} of {l} nodes",
                stacklevel=2)
            break
        front = sorted(counts)
        weights = np.array([counts[w] / g.in_deg[w] for w in front])
        weights /= weights.sum()
        v = front[int(rng.choice(len(front), p=weights))]
        chosen.append(v)
        inside.add(v)
        absorb(v)
    return chosen


# ---------------------------------------------------------------------------
# Exact oracle
# ---------------------------------------------------------------------------

def validate_distribution(n, sigma):
    """Coerce to a dense nonnegative array of length n summing to 1."""
    arr = np.asarray(sigma, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"distribution must have shape ({n},)")
    if (arr < 0).any():
        raise ValueError("distribution entries must be nonnegative")
    if abs(arr.sum() - 1.0) > 1e-12:
        raise ValueError("distribution must sum to 1 within 1e-12")
    return arr


def basis_vector(n, v):
    e = np.zeros(n)
    e[v] = 1.0
    return e


def uniform_distribution(n, nodes=None):
    """Uniform over all nodes, or over the given subset."""
    sigma = np.zeros(n)
    if nodes is None:
        sigma[:] = 1.0 / n
    else:
        idx = list(nodes)
        sigma[idx] = 1.0 / len(idx)
    return sigma


_MAX_ORACLE_ITERS = 100_000


def exact_ppr(g, sigma, alpha, tol=1e-12):
    """Power-iteration PPR oracle.

    Iterates pi <- alpha*sigma + (1-alpha)*pi*P until the successive
    L1 change drops below tol.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0,1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    sigma = validate_distribution(g.n, sigma)
    pt = g.transition_transpose()
    pi = sigma.copy()
    for _ in range(_MAX_ORACLE_ITERS):
        nxt = alpha * sigma + (1.0 - alpha) * (pt @ pi)
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise RuntimeError("oracle power iteration failed to converge")


def exact_ppr_rows(g, sources, alpha, tol=1e-12):
    """Rows of exact PPR for basis-vector sources, as a dense array of
    shape (len(sources), n). Vectorized counterpart of exact_ppr."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0,1]")
    nodes = validate_node_set(g, sources)
    pt = g.transition_transpose()
    sig = np.zeros((len(nodes), g.n))
    sig[np.arange(len(nodes)), nodes] = 1.0
    pi = sig.copy()
    for _ in range(_MAX_ORACLE_ITERS):
        nxt = alpha * sig + (1.0 - alpha) * (pt @ pi.T).T
        if np.abs(nxt - pi).sum(axis=1).max() < tol:
            return nxt
        pi = nxt
    raise RuntimeError("oracle power iteration failed to converge")


def global_pagerank(g, alpha, tol=1e-12):
    """PPR seeded with the uniform distribution."""
    return exact_ppr(g, uniform_distribution(g.n), alpha, tol=tol)
