"""Statistics of multi-population histograms.

Expected fingerprints, extrapolated discovery counts, seen-at-least-k
counts, and the earthmover distance between histograms.  All expectation
operations are linear in histogram mass.
"""

from __future__ import annotations

import heapq
import math
from collections.abc import Iterable

from .core import DimensionMismatchError, Fingerprint, Histogram, IndexVector

# Combined support size beyond which the exact transport solve is refused.
EMD_SUPPORT_LIMIT = 10_000


class TransportTooLargeError(ValueError):
    """Combined EMD support exceeds the exact-solver limit."""


def pow1m(alpha: float, n: float) -> float:
    """(1-alpha)^n via exp(n*log1p(-alpha)); exact at alpha in {0,1}."""
    if alpha <= 0.0:
        return 1.0
    if alpha >= 1.0:
        return 0.0 if n > 0 else 1.0
    if n == 0:
        return 1.0
    return math.exp(n * math.log1p(-alpha))


def binom_pmf(alpha: float, n: int, i: int) -> float:
    """C(n,i) alpha^i (1-alpha)^(n-i)."""
    if i < 0 or i > n:
        return 0.0
    if alpha <= 0.0:
        return 1.0 if i == 0 else 0.0
    if alpha >= 1.0:
        return 1.0 if i == n else 0.0
    return math.comb(n, i) * alpha**i * pow1m(alpha, n - i)


def expected_fingerprint(
    h: Histogram, n: tuple[int, ...], keys: Iterable[IndexVector]
) -> dict[IndexVector, float]:
    """Expected fingerprint entries at the requested keys under histogram h."""
    out: dict[IndexVector, float] = {}
    for key in keys:
        if all(i == 0 for i in key):
            raise ValueError("the all-zero key has no fingerprint entry")
        total = []
        for alpha, mass in h:
            prod = mass
            for aj, nj, ij in zip(alpha, n, key):
                prod *= binom_pmf(aj, nj, ij)
                if prod == 0.0:
                    break
            total.append(prod)
        out[key] = math.fsum(total)
    return out


def expected_distinct(h: Histogram, n: tuple[int, ...]) -> float:
    """Expected number of distinct elements observed in samples of sizes n."""
    return math.fsum(
        mass * (1.0 - math.prod(pow1m(aj, nj) for aj, nj in zip(alpha, n)))
        for alpha, mass in h
    )


def expected_new_distinct(
    h: Histogram, n_old: tuple[int, ...], b: tuple[int, ...]
) -> float:
    """Expected number of distinct elements in the b new samples unseen in the old."""
    terms = []
    for alpha, mass in h:
        p_unseen = math.prod(pow1m(aj, nj) for aj, nj in zip(alpha, n_old))
        p_missed = math.prod(pow1m(aj, bj) for aj, bj in zip(alpha, b))
        terms.append(mass * p_unseen * (1.0 - p_missed))
    return math.fsum(terms)


def expected_new_seen_at_least(
    h: Histogram, n_old: tuple[int, ...], b: tuple[int, ...], k: int
) -> float:
    """Expected new elements appearing at least k times in the new samples, k in {1,2}."""
    if k == 1:
        return expected_new_distinct(h, n_old, b)
    if k != 2:
        raise ValueError("only k in {1, 2} is supported")
    terms = []
    for alpha, mass in h:
        p_unseen = math.prod(pow1m(aj, nj) for aj, nj in zip(alpha, n_old))
        p0 = math.prod(pow1m(aj, bj) for aj, bj in zip(alpha, b))
        # exactly-one: a single success in exactly one population's batch
        p1_parts = []
        for j, (aj, bj) in enumerate(zip(alpha, b)):
            if bj == 0 or aj == 0.0:
                continue
            rest = math.prod(
                pow1m(al, bl) for l, (al, bl) in enumerate(zip(alpha, b)) if l != j
            )
            p1_parts.append(bj * aj * pow1m(aj, bj - 1) * rest)
        p1 = math.fsum(p1_parts)
        terms.append(mass * p_unseen * (1.0 - p0 - p1))
    return math.fsum(terms)


def covered_mass(h: Histogram, n: tuple[int, ...]) -> float:
    """Experimental: expected probability mass (summed over populations) of the
    elements observed in samples of sizes n.  Exposed for exploration only."""
    return math.fsum(
        mass * math.fsum(aj * (1.0 - pow1m(aj, nj)) for aj, nj in zip(alpha, n))
        for alpha, mass in h
    )


# ---------------------------------------------------------------------------
# Earthmover distance


def emd(h1: Histogram, h2: Histogram) -> float:
    """Multi-population earthmover distance in [0, 1].

    Per-unit transport cost between probability vectors is their L1 distance
    scaled by 1/(2m).  The all-zero vector is available on both sides with
    unbounded mass, so unequal totals are absorbed there.  Solved exactly.
    """
    if h1.m != h2.m:
        raise DimensionMismatchError("histogram dimensions differ")
    m = h1.m
    zero = (0.0,) * m
    supply = [(k, v) for k, v in sorted(h1.entries.items())]
    demand = [(k, v) for k, v in sorted(h2.entries.items())]
    if len(supply) + len(demand) + 2 > EMD_SUPPORT_LIMIT:
        raise TransportTooLargeError(
            f"combined support {len(supply) + len(demand)} exceeds {EMD_SUPPORT_LIMIT}"
        )
    # Balance totals by granting each side a zero-vector point; zero-to-zero
    # transport is free, so the exact split does not matter.
    s_tot = math.fsum(v for _, v in supply)
    d_tot = math.fsum(v for _, v in demand)
    supply = supply + [(zero, d_tot)]
    demand = demand + [(zero, s_tot)]
    if s_tot + d_tot == 0.0:
        return 0.0
    scale = 1.0 / (2.0 * m)
    cost = [
        [scale * math.fsum(abs(a - b) for a, b in zip(ka, kb)) for kb, _ in demand]
        for ka, _ in supply
    ]
    return _transport(cost, [v for _, v in supply], [v for _, v in demand])


def _transport(cost: list[list[float]], supply: list[float], demand: list[float]) -> float:
    """Exact balanced dense transportation problem via successive shortest paths.

    Bipartite min-cost flow with uncapacitated arcs; multi-source Dijkstra
    with Johnson potentials keeps reduced costs nonnegative.  Node indices:
    sources 0..ns-1, sinks ns..ns+nt-1.
    """
    ns, nt = len(supply), len(demand)
    nv = ns + nt
    rem_s = list(supply)
    rem_t = list(demand)
    flow: dict[tuple[int, int], float] = {}
    pot = [0.0] * nv
    eps = 1e-12 * (1.0 + max(max(supply, default=0.0), max(demand, default=0.0)))
    INF = math.inf

    while True:
        active = [i for i in range(ns) if rem_s[i] > eps]
        if not active:
            break
        dist = [INF] * nv
        parent = [-1] * nv
        pq: list[tuple[float, int]] = []
        for i in active:
            dist[i] = 0.0
            heapq.heappush(pq, (0.0, i))
        while pq:
            d, u = heapq.heappop(pq)
            if d > dist[u] + eps:
                continue
            if u < ns:
                for j in range(nt):
                    v = ns + j
                    rc = cost[u][j] + pot[u] - pot[v]
                    nd = d + (rc if rc > 0.0 else 0.0)
                    if nd < dist[v] - eps:
                        dist[v] = nd
                        parent[v] = u
                        heapq.heappush(pq, (nd, v))
            else:
                j = u - ns
                for i in range(ns):
                    if flow.get((i, j), 0.0) > eps:
                        rc = -cost[i][j] + pot[u] - pot[i]
                        nd = d + (rc if rc > 0.0 else 0.0)
                        if nd < dist[i] - eps:
                            dist[i] = nd
                            parent[i] = u
                            heapq.heappush(pq, (nd, i))
        best = -1
        for j in range(nt):
            if rem_t[j] > eps and dist[ns + j] < INF:
                if best < 0 or dist[ns + j] < dist[ns + best]:
                    best = j
        if best < 0:
            raise RuntimeError("infeasible transportation problem")
        target = ns + best
        # walk back to the root source, collecting arcs and the bottleneck
        arcs: list[tuple[int, int, bool]] = []  # (i, j, forward)
        v = target
        bottleneck = rem_t[best]
        while parent[v] != -1:
            u = parent[v]
            if v >= ns:
                arcs.append((u, v - ns, True))
            else:
                bottleneck = min(bottleneck, flow[(v, u - ns)])
                arcs.append((v, u - ns, False))
            v = u
        root = v
        bottleneck = min(bottleneck, rem_s[root])
        for i, j, forward in arcs:
            if forward:
                flow[(i, j)] = flow.get((i, j), 0.0) + bottleneck
            else:
                flow[(i, j)] -= bottleneck
                if flow[(i, j)] <= eps:
                    del flow[(i, j)]
        rem_s[root] -= bottleneck
        rem_t[best] -= bottleneck
        dmax = dist[target]
        for v in range(nv):
            pot[v] += min(dist[v], dmax)

    return math.fsum(f * cost[i][j] for (i, j), f in flow.items())
