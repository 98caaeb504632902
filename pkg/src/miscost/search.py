"""Instrumented exhaustive MIS search and the idealized cost samplers.

The search follows the branch decomposition

    alpha(G) = max( alpha(G - v),  1 + alpha(G - N*(v)) )

with the lowest-labeled alive vertex as pivot v, no memoization, and an
explicit stack.  Cost is leaf-anchored: the empty graph costs 0, a
single vertex costs 1, so cost(G) counts single-vertex base calls and
matches the initial conditions X_0 = 0, X_1 = 1 of the distributional
recurrence.  Two frozen consequences used as oracles everywhere:
cost(K_n) = 1 and cost(E_n) = 2^(n-1).

Y and Z are the idealized recurrences with fully independent subcalls

    Y_n = Y_{n-1} + Y*_{n-1-Binom(n-1,p)}      Y_0 = 0, Y_1 = 1
    Z_n = Z_{n-1} + Z_{Uniform{0..n-1}}        Z_0 = 0, Z_1 = 1

Because every pending subproblem expands independently, the sampler
keeps one counter per size and scatters each size's binomial (resp.
uniform) draws with a single multinomial, which is distribution-
identical to growing the recursion tree node by node but costs O(n^2)
per sample instead of O(sampled value).
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import int64, njit
from numpy.random import Generator

from .errors import BudgetExceeded, DomainError
from .exact import binomial_weights_float
from .graphs import GraphInstance
from .numerics import ModelParams

__all__ = [
    "CostSample",
    "DEFAULT_BUDGET",
    "run_exhaustive_mis",
    "search_cost_python",
    "sample_Y",
    "sample_Z",
    "samples_to_csv",
]

DEFAULT_BUDGET = 10**9


@dataclass(frozen=True)
class CostSample:
    """One draw of a cost variable (X, Y, or Z)."""

    kind: str
    n: int
    cost: int
    alpha: Optional[int] = None
    replicate_id: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.n == 0 and self.cost != 0:
            raise DomainError("cost must be 0 on the empty instance")
        if self.n >= 1 and self.cost < 1:
            raise DomainError("cost must be >= 1 for n >= 1")


@njit(cache=True, nogil=True)
def _search_kernel(closed: np.ndarray, n: int, words: int, guard: int64):
    """Iterative branch search; returns (alpha, cost) or (-1, -1) past guard."""
    cap = 2 * (n + 2)
    stack = np.zeros((cap, words), dtype=np.uint64)
    bonus = np.zeros(cap, dtype=np.int64)
    full_words = n >> 6
    for w in range(full_words):
        stack[0, w] = np.uint64(0xFFFFFFFFFFFFFFFF)
    rem = n & 63
    if rem:
        stack[0, full_words] = (np.uint64(1) << np.uint64(rem)) - np.uint64(1)
    top = 1
    cost = int64(0)
    alpha = int64(0)
    while top > 0:
        top -= 1
        b = bonus[top]
        alive = 0
        low = -1
        for w in range(words):
            x = stack[top, w]
            if x != np.uint64(0):
                if low < 0:
                    t = x & (~x + np.uint64(1))
                    pos = 0
                    while t > np.uint64(1):
                        t >>= np.uint64(1)
                        pos += 1
                    low = 64 * w + pos
                y = x
                while y != np.uint64(0):
                    y &= y - np.uint64(1)
                    alive += 1
        if alive == 0:
            if b > alpha:
                alpha = b
            continue
        if alive == 1:
            cost += 1
            if cost > guard:
                return int64(-1), int64(-1)
            if b + 1 > alpha:
                alpha = b + 1
            continue
        vbit = np.uint64(1) << np.uint64(low & 63)
        for w in range(words):
            stack[top + 1, w] = stack[top, w] & ~closed[low, w]
        bonus[top + 1] = b + 1
        stack[top, low >> 6] &= ~vbit
        bonus[top] = b
        top += 2
    return alpha, cost


def run_exhaustive_mis(g: GraphInstance, budget: int = DEFAULT_BUDGET):
    """Run the instrumented search; returns (alpha, cost).

    Raises BudgetExceeded once the leaf counter passes ``budget``.
    """
    if g.n == 0:
        return 0, 0
    closed = g.closed_neighborhood_words()
    alpha, cost = _search_kernel(closed, g.n, closed.shape[1], budget)
    if alpha < 0:
        raise BudgetExceeded(f"search on n={g.n} exceeded {budget} leaf calls")
    return int(alpha), int(cost)


def search_cost_python(g: GraphInstance, budget: int = DEFAULT_BUDGET):
    """Pure-Python reference of the same recursion (slow; for cross-checks)."""
    if g.n == 0:
        return 0, 0
    closed = [g.adj[v] | (1 << v) for v in range(g.n)]
    full = (1 << g.n) - 1
    stack = [(full, 0)]
    cost = 0
    alpha = 0
    while stack:
        mask, b = stack.pop()
        if mask == 0:
            alpha = max(alpha, b)
            continue
        if mask & (mask - 1) == 0:
            cost += 1
            if cost > budget:
                raise BudgetExceeded(f"search on n={g.n} exceeded {budget} leaf calls")
            alpha = max(alpha, b + 1)
            continue
        v = (mask & -mask).bit_length() - 1
        stack.append((mask & ~(1 << v), b))
        stack.append((mask & ~closed[v], b + 1))
    return alpha, cost


def _scatter_population(n, pmf_for_size, stream, budget):
    """Common population loop: counts per size, multinomial scatter."""
    counts = np.zeros(n + 1, dtype=np.int64)
    counts[n] = 1
    spawned = 1
    for k in range(n, 1, -1):
        ck = int(counts[k])
        if ck == 0:
            continue
        counts[k - 1] += ck
        scatter = stream.multinomial(ck, pmf_for_size(k))
        counts[:k] += scatter
        counts[k] = 0
        spawned += 2 * ck
        if spawned > budget:
            raise BudgetExceeded(
                f"population sampler at n={n} spawned over {budget} subproblems"
            )
    return int(counts[1])


def sample_Y(
    n: int,
    params: ModelParams,
    stream: Generator,
    budget: int = DEFAULT_BUDGET,
    pmf_rows: Optional[dict] = None,
) -> int:
    """One independent-model cost draw Y_n; E[Y_n] equals mu_n.

    ``pmf_rows`` may carry precomputed float rows {k: pmf over sizes
    0..k-1} shared across replicates of a campaign.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 0
    if n == 1:
        return 1

    if pmf_rows is None:
        pmf_rows = {}

    def pmf_for_size(k):
        # pi_{k,j} is already indexed by subproblem size j = 0..k-1
        row = pmf_rows.get(k)
        if row is None:
            row = binomial_weights_float(k, params)
            row /= row.sum()
            pmf_rows[k] = row
        return row

    return _scatter_population(n, pmf_for_size, stream, budget)


def sample_Z(n: int, stream: Generator, budget: int = DEFAULT_BUDGET) -> int:
    """One uniform-split cost draw Z_n; E[Z_n] equals nu_n.

    The sampled value grows like e^{2 sqrt n}, so n <= 80 or so is the
    practical range before the budget guard starts firing.
    """
    if n < 0:
        raise DomainError("n must be nonnegative")
    if n == 0:
        return 0
    if n == 1:
        return 1
    uniform_rows = {}

    def pmf_for_size(k):
        row = uniform_rows.get(k)
        if row is None:
            row = np.full(k, 1.0 / k)
            row /= row.sum()
            uniform_rows[k] = row
        return row

    return _scatter_population(n, pmf_for_size, stream, budget)


def samples_to_csv(samples, p_label: str, fh=None) -> str:
    """Stream samples as 'kind,n,p,replicate,cost,alpha,seed' CSV rows."""
    own = fh is None
    if own:
        fh = io.StringIO()
    fh.write("kind,n,p,replicate,cost,alpha,seed\n")
    for s in samples:
        alpha = "" if s.alpha is None else str(s.alpha)
        fh.write(f"{s.kind},{s.n},{p_label},{s.replicate_id},{s.cost},{alpha},{s.seed}\n")
    if own:
        return fh.getvalue()
    return ""
