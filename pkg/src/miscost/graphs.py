"""G(n,p) sampling and brute-force oracles for small graphs.

Adjacency lives in per-vertex bitmasks (Python ints), so removing a
closed neighborhood N*(v) = {v} plus neighbors is one mask operation.
The brute-force oracles enumerate all 2^n vertex subsets with a
subset-DP (a subset is independent iff the subset minus its lowest
vertex is independent and that vertex has no neighbor inside), which is
a different algorithm from the branching search it cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from numpy.random import Generator, Philox, SeedSequence

from .errors import DomainError, SizeTooLarge
from .numerics import ModelParams

__all__ = [
    "GraphInstance",
    "make_stream",
    "sample_gnp",
    "brute_force_alpha",
    "count_independent_sets",
    "dump_edges",
    "parse_edges",
]

BRUTE_FORCE_LIMIT = 25


def make_stream(master_seed: int, *key: int) -> Generator:
    """Counter-based RNG stream, reproducible given (master_seed, key).

    Philox is keyed through a SeedSequence spawn key, so distinct keys
    give statistically independent streams and the same key always
    replays the same stream, on any platform and in any thread.
    """
    return Generator(Philox(SeedSequence(master_seed, spawn_key=tuple(key))))


@dataclass(frozen=True)
class GraphInstance:
    """A labeled undirected graph with bitmask adjacency.

    ``adj[v]`` holds the open neighborhood of v (v's own bit is clear).
    """

    n: int
    adj: tuple
    seed: int = 0

    def __post_init__(self):
        if len(self.adj) != self.n:
            raise DomainError("adjacency length must equal n")
        for v, mask in enumerate(self.adj):
            if mask >> self.n:
                raise DomainError(f"vertex {v} has a neighbor label >= n")
            if mask & (1 << v):
                raise DomainError(f"self-loop at vertex {v}")
            rest = mask
            while rest:
                u = (rest & -rest).bit_length() - 1
                rest &= rest - 1
                if not self.adj[u] & (1 << v):
                    raise DomainError(f"asymmetric edge {{{v},{u}}}")

    @property
    def m(self) -> int:
        return sum(mask.bit_count() for mask in self.adj) // 2

    def edges(self):
        for v in range(self.n):
            rest = self.adj[v] >> (v + 1)
            while rest:
                u = (rest & -rest).bit_length() - 1 + v + 1
                rest &= rest - 1
                yield (v, u)

    def closed_neighborhood_words(self) -> np.ndarray:
        """N*(v) masks packed into (n, ceil(n/64)) uint64 words for kernels."""
        words = max(1, (self.n + 63) // 64)
        out = np.zeros((self.n, words), dtype=np.uint64)
        for v in range(self.n):
            mask = self.adj[v] | (1 << v)
            w = 0
            while mask:
                out[v, w] = mask & 0xFFFFFFFFFFFFFFFF
                mask >>= 64
                w += 1
        return out

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple], seed: int = 0) -> "GraphInstance":
        adj = [0] * n
        for u, v in edges:
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return cls(n=n, adj=tuple(adj), seed=seed)


def sample_gnp(n: int, params: ModelParams, stream: Generator, seed: int = 0) -> GraphInstance:
    """Draw G(n,p): each of the C(n,2) unordered pairs is an edge w.p. p.

    The pair (u,v), u<v, consumes one uniform draw in lexicographic
    order, so the instance is a pure function of the stream state.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    m = n * (n - 1) // 2
    if m == 0:
        return GraphInstance(n=n, adj=(0,) * n, seed=seed)
    pf = float(params.p)
    hits = stream.random(m) < pf
    adj = [0] * n
    idx = 0
    for u in range(n):
        for v in range(u + 1, n):
            if hits[idx]:
                adj[u] |= 1 << v
                adj[v] |= 1 << u
            idx += 1
    return GraphInstance(n=n, adj=tuple(adj), seed=seed)


@njit(cache=True)
def _subset_scan(adj: np.ndarray, n: int):
    # subset-DP over all 2^n masks: independent(S) = independent(S \ lowbit)
    # and lowbit's neighbors avoid S
    size = 1 << n
    ind = np.zeros(size, dtype=np.bool_)
    ind[0] = True
    count = 0
    best = 0
    for s in range(1, size):
        low = s & (-s)
        v = 0
        t = low
        while t > 1:
            t >>= 1
            v += 1
        if ind[s ^ low] and (adj[v] & s) == 0:
            ind[s] = True
            count += 1
            c = 0
            t = s
            while t:
                t &= t - 1
                c += 1
            if c > best:
                best = c
    return best, count


def _scan(g: GraphInstance):
    if g.n > BRUTE_FORCE_LIMIT:
        raise SizeTooLarge(
            f"brute-force enumeration capped at n <= {BRUTE_FORCE_LIMIT}, got n = {g.n}"
        )
    if g.n == 0:
        return 0, 0
    adj = np.array(g.adj, dtype=np.int64)
    return _subset_scan(adj, g.n)


def brute_force_alpha(g: GraphInstance) -> int:
    """Stability number alpha(G) by exhaustive subset enumeration."""
    return _scan(g)[0]


def count_independent_sets(g: GraphInstance) -> int:
    """Number of nonempty independent vertex subsets."""
    return _scan(g)[1]


def dump_edges(g: GraphInstance) -> str:
    """Edge-list dump: 'n m seed' header then one 'u v' line per edge."""
    lines = [f"{g.n} {g.m} {g.seed}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def parse_edges(text: str) -> GraphInstance:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    n, m, seed = (int(tok) for tok in lines[0].split())
    edges = [tuple(int(tok) for tok in ln.split()) for ln in lines[1 : m + 1]]
    return GraphInstance.from_edges(n, edges, seed=seed)
