"""Moment combinatorics of the kernel ensemble, checked by brute force.

The q-th spectral moment is a weighted count over quotients of the even
cycle with 2q edges: pick a set partition of the q row-index slots and one
of the q column-index slots, glue the cycle accordingly, and keep the result
when it is a cactus (every edge on exactly one cycle, cycles meeting in at
most one vertex).  A graph with b two-cycles, iv row identifications and jv
column identifications carries weight

    theta1^b * theta2^(q-b) * psi^(iv+1-q) * phi^jv.

Quotients are counted as labeled identification patterns (no isomorphism
reduction): that convention is the one under which the all-two-cycle
entries reproduce the Narayana numbers exactly, which the tests verify.

Enumeration is brute force over partition pairs, deliberately capped at
q <= 6 where the Bell-number growth is still trivial; the census feeds the
closed moment formula, and an independent Monte Carlo trace estimate closes
the loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .activations import Activation, ThetaParams
from .distributions import EntryDistribution
from .ensemble import Shape, conjugate_kernel_factor
from .errors import ParameterError
from .parallel import run_trials
from .spectra import full_spectrum

__all__ = [
    "GraphCensus",
    "set_partitions",
    "enumerate_admissible",
    "narayana",
    "moment_formula",
    "MomentEstimate",
    "monte_carlo_moment",
    "monte_carlo_moments",
]

MAX_Q = 6


def set_partitions(n: int):
    """All set partitions of range(n) as restricted-growth tuples.

    Element i is assigned block label a[i], with a[0] = 0 and each new label
    at most one above the running maximum; every partition appears exactly
    once.
    """
    a = [0] * n
    while True:
        yield tuple(a)
        i = n - 1
        while i > 0:
            if a[i] <= max(a[:i]):
                a[i] += 1
                for j in range(i + 1, n):
                    a[j] = 0
                break
            i -= 1
        else:
            return


def _biconnected_blocks(num_vertices: int, edges) -> list[list[int]]:
    """Biconnected components of a connected multigraph, as edge-id lists.

    Multi-edges are honored by tracking edge ids, so a doubled edge forms a
    proper two-cycle block rather than looking like a revisited tree edge.
    """
    adj = [[] for _ in range(num_vertices)]
    for eid, (u, v) in enumerate(edges):
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    disc = [-1] * num_vertices
    low = [0] * num_vertices
    stack: list[int] = []
    blocks: list[list[int]] = []
    timer = 0

    def dfs(u: int, entry_eid: int) -> None:
        nonlocal timer
        disc[u] = low[u] = timer
        timer += 1
        for v, eid in adj[u]:
            if eid == entry_eid:
                continue
            if disc[v] == -1:
                stack.append(eid)
                dfs(v, eid)
                low[u] = min(low[u], low[v])
                if low[v] >= disc[u]:
                    blk = []
                    while True:
                        e = stack.pop()
                        blk.append(e)
                        if e == eid:
                            break
                    blocks.append(blk)
            elif disc[v] < disc[u]:
                stack.append(eid)
                low[u] = min(low[u], disc[v])

    dfs(0, -1)
    return blocks


@dataclass(frozen=True)
class GraphCensus:
    """Counts of admissible quotients keyed by (row idents, col idents, two-cycles)."""

    q: int
    table: dict

    def count(self, row_idents: int, col_idents: int, two_cycles: int) -> int:
        return self.table.get((row_idents, col_idents, two_cycles), 0)

    def total(self) -> int:
        return sum(self.table.values())

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("q,row_idents,col_idents,two_cycles,count\n")
            for (ii, ij, b), cnt in sorted(self.table.items()):
                fh.write(f"{self.q},{ii},{ij},{b},{cnt}\n")


_CENSUS_CACHE: dict[int, dict] = {}


def enumerate_admissible(q: int) -> GraphCensus:
    """Brute-force census of admissible quotients of the 2q-cycle (q <= 6).

    For every pair of slot partitions the quotient multigraph is built and
    kept iff each biconnected block is a single cycle (block edge count equal
    to its vertex count).  Quotients of a closed walk have all degrees even,
    so bridges cannot occur and that test is exactly the cactus condition.
    """
    if not 1 <= q <= MAX_Q:
        raise ParameterError(f"census supports 1 <= q <= {MAX_Q}, got {q}")
    if q not in _CENSUS_CACHE:
        table: dict = {}
        partitions = list(set_partitions(q))
        for pi in partitions:
            nbi = max(pi) + 1
            for pj in partitions:
                nbj = max(pj) + 1
                edges = []
                for r in range(q):
                    jv = nbi + pj[r]
                    edges.append((pi[r], jv))
                    edges.append((jv, pi[(r + 1) % q]))
                blocks = _biconnected_blocks(nbi + nbj, edges)
                two_cycles = 0
                admissible = True
                for blk in blocks:
                    verts = set()
                    for eid in blk:
                        verts.update(edges[eid])
                    if len(blk) != len(verts):
                        admissible = False
                        break
                    if len(blk) == 2:
                        two_cycles += 1
                if admissible:
                    key = (q - nbi, q - nbj, two_cycles)
                    table[key] = table.get(key, 0) + 1
        _CENSUS_CACHE[q] = table
    return GraphCensus(q, dict(_CENSUS_CACHE[q]))


def narayana(q: int, l: int) -> int:
    """(1/q) C(q, l) C(q, l-1): trees of q two-cycles with l distinct column labels."""
    if not 1 <= l <= q:
        return 0
    num = math.comb(q, l) * math.comb(q, l - 1)
    assert num % q == 0
    return num // q


def moment_formula(
    q: int,
    thetas: ThetaParams,
    phi: float,
    psi: float,
    census: GraphCensus | None = None,
) -> float:
    """Closed q-th moment of the limiting eigenvalue law from the census."""
    if census is None:
        census = enumerate_admissible(q)
    if census.q != q:
        raise ParameterError(f"census is for q={census.q}, asked for q={q}")
    t1, t2 = thetas.theta1, thetas.theta2
    total = 0.0
    for (ii, ij, b), cnt in census.table.items():
        total += cnt * t1**b * t2 ** (q - b) * psi ** (ii + 1 - q) * phi**ij
    return total


@dataclass(frozen=True)
class MomentEstimate:
    """Monte Carlo moment estimate with jackknife standard error."""

    value: float
    stderr: float
    trials: int


def _jackknife(values: np.ndarray) -> MomentEstimate:
    n = values.size
    if n < 2:
        return MomentEstimate(float(values.mean()), float("inf"), n)
    loo = (values.sum() - values) / (n - 1)
    var = (n - 1) / n * float(np.sum((loo - loo.mean()) ** 2))
    return MomentEstimate(float(values.mean()), math.sqrt(var), n)


def monte_carlo_moments(
    shape: Shape,
    dist_w: EntryDistribution,
    dist_x: EntryDistribution,
    act: Activation,
    qs,
    trials: int,
    seed: int,
    dtype=np.float64,
    workers: int | None = None,
) -> dict[int, MomentEstimate]:
    """Estimate (1/n1) E Tr M^q for several q from the same spectra.

    Each trial draws an independent kernel, takes its full spectrum, and
    contributes mean(lambda^q); estimates share trials across all q.
    """
    qs = sorted(set(int(q) for q in qs))
    if qs and qs[-1] > MAX_Q:
        raise ParameterError(f"moment order capped at q = {MAX_Q}, got {qs[-1]}")
    if shape.n1 > 1000:
        raise ParameterError(
            f"trace Monte Carlo is meant for modest n1 <= 1000, got {shape.n1}"
        )

    def one_trial(t: int) -> np.ndarray:
        factor = conjugate_kernel_factor(shape, dist_w, dist_x, act, seed, trial=t, dtype=dtype)
        eigs = full_spectrum(factor).eigenvalues
        return np.array([np.mean(eigs**q) for q in qs])

    rows = np.asarray(run_trials(one_trial, trials, workers))
    return {q: _jackknife(rows[:, i]) for i, q in enumerate(qs)}


def monte_carlo_moment(
    shape: Shape,
    dist_w: EntryDistribution,
    dist_x: EntryDistribution,
    act: Activation,
    q: int,
    trials: int,
    seed: int,
    dtype=np.float64,
    workers: int | None = None,
) -> MomentEstimate:
    """Single-q version of :func:`monte_carlo_moments`."""
    return monte_carlo_moments(
        shape, dist_w, dist_x, act, [q], trials, seed, dtype=dtype, workers=workers
    )[q]
