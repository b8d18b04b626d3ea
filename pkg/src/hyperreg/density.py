"""Relative densities and embedding probabilities of colored complexes.

Exact quantities are ``fractions.Fraction``.  Embedding probabilities are
computed by enumerating every partitionwise map of the pattern's vertices
(chunked and vectorized); only vertices touched by a relevant edge are
enumerated, which leaves the probability unchanged.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .model import Edge, Hypergraph, SimplicialComplex, TotalColor, subsets
from .rng import derive_rng

DEFAULT_BUDGET = 10 ** 7
CHUNK = 1 << 18


class BudgetExceeded(RuntimeError):
    """Exact enumeration would exceed the configured budget."""


@dataclass(frozen=True)
class DensityValue:
    value: Fraction
    defined: bool = True

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class EstimatorConfig:
    samples: int = 100_000
    seed: int = 0
    confidence: float = 0.99
    batch_size: int = 1 << 16

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("sample_count must be at least 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    half_width: float
    samples: int
    seed: int
    confidence: float

    @property
    def interval(self) -> tuple[float, float]:
        return (max(0.0, self.estimate - self.half_width), min(1.0, self.estimate + self.half_width))

    def contains(self, value) -> bool:
        return abs(float(value) - self.estimate) <= self.half_width


def hoeffding_half_width(n: int, confidence: float) -> float:
    """Two-sided Hoeffding radius for the mean of n variables in [0, 1]."""
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


# -- relative density --------------------------------------------------------

def density_table(G: Hypergraph, I) -> dict:
    """``{TotalColor: Fraction}`` for every realized total color of index I."""
    I = tuple(I)
    key = ("density", I)
    if key not in G._cache:
        codes, tcs = G.total_color_table(I)
        tc_counts = np.bincount(codes, minlength=len(tcs))
        frame_counts = Counter()
        for tc, n in zip(tcs, tc_counts):
            frame_counts[tc.frame] += int(n)
        G._cache[key] = {tc: Fraction(int(n), frame_counts[tc.frame])
                         for tc, n in zip(tcs, tc_counts)}
        G._cache[("frames", I)] = dict(frame_counts)
    return G._cache[key]


def frame_count(G: Hypergraph, I, frame: tuple) -> int:
    density_table(G, I)
    return G._cache[("frames", tuple(I))].get(tuple(frame), 0)


def relative_density(G: Hypergraph, tc: TotalColor) -> DensityValue:
    """P[G(e) = top | G(frame of e) = frame]; 1 and undefined when the frame
    never occurs."""
    table = density_table(G, tc.index)
    if tc in table:
        return DensityValue(table[tc], True)
    if frame_count(G, tc.index, tc.frame) == 0:
        return DensityValue(Fraction(1), False)
    return DensityValue(Fraction(0), True)


def density(G: Hypergraph, tc: TotalColor) -> Fraction:
    return relative_density(G, tc).value


# -- map enumeration ----------------------------------------------------------

def _vertices_of(edges: Iterable[Edge]) -> list[tuple]:
    """Pattern vertices (part, slot) touched by the edges, sorted."""
    out = set()
    for e in edges:
        out.update(zip(e.index, e.vertices))
    return sorted(out)


def map_count(G: Hypergraph, vertices: Sequence[tuple]) -> int:
    return math.prod(G.parts[i] for i, _ in vertices)


def iter_assignments(G: Hypergraph, vertices: Sequence[tuple], budget: int = DEFAULT_BUDGET):
    """Yield ``{vertex: host ids}`` arrays covering every map exactly once."""
    total = map_count(G, vertices)
    if total > budget:
        raise BudgetExceeded(f"{total} maps exceed the enumeration budget {budget}")
    dims = tuple(G.parts[i] for i, _ in vertices)
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        coords = np.unravel_index(idx, dims) if dims else ()
        yield dict(zip(vertices, coords)), len(idx)


def edge_matches(G: Hypergraph, edges: Sequence[Edge], colors: Sequence[int],
                 assign: dict, n: int) -> np.ndarray:
    """Boolean matrix ``[edge, map]``: does the host color of the image of
    each pattern edge equal the requested color."""
    out = np.empty((len(edges), n), dtype=bool)
    for row, (e, c) in enumerate(zip(edges, colors)):
        idx = tuple(assign[(i, a)] for i, a in zip(e.index, e.vertices))
        out[row] = G.coloring[e.index][idx] == c
    return out


def pattern_counts(G: Hypergraph, S: SimplicialComplex, targets: Sequence[Edge],
                   condition: Sequence[Edge], budget: int = DEFAULT_BUDGET):
    """Among maps where every ``condition`` edge matches S, count each
    match pattern of ``targets`` (bit n set when targets[n] matches).

    Returns ``(Counter{pattern: count}, conditioned maps, total maps)``.
    """
    targets, condition = list(targets), list(condition)
    vertices = _vertices_of(targets + condition)
    total = map_count(G, vertices)
    counts = Counter()
    cond_total = 0
    weights = (1 << np.arange(len(targets), dtype=np.int64)) if targets else None
    for assign, n in iter_assignments(G, vertices, budget):
        ok = np.ones(n, dtype=bool)
        if condition:
            ok &= edge_matches(G, condition, [S.edge_color(e) for e in condition], assign, n).all(axis=0)
        cond_total += int(ok.sum())
        if targets:
            m = edge_matches(G, targets, [S.edge_color(e) for e in targets], assign, n)[:, ok]
            codes = weights @ m.astype(np.int64)
            vals, cnt = np.unique(codes, return_counts=True)
            for v, c in zip(vals, cnt):
                counts[int(v)] += int(c)
        else:
            counts[0] += int(ok.sum())
    return counts, cond_total, total


def edges_probability(G: Hypergraph, S: SimplicialComplex, edges: Sequence[Edge],
                      budget: int = DEFAULT_BUDGET) -> Fraction:
    """P over maps that every listed pattern edge gets its S color."""
    edges = list(edges)
    if not edges:
        return Fraction(1)
    _, hits, total = pattern_counts(G, S, [], edges, budget)
    return Fraction(hits, total)


def embed_probability_exact(G: Hypergraph, S: SimplicialComplex,
                            budget: int = DEFAULT_BUDGET) -> Fraction:
    """P_{phi in Phi(h)}[G(phi(e)) = S(e) for all visible e], exactly."""
    return edges_probability(G, S, S.visible_edges, budget)


def conditional_embed_probability(G: Hypergraph, S: SimplicialComplex,
                                  condition: Sequence[Edge] | None = None,
                                  budget: int = DEFAULT_BUDGET) -> DensityValue:
    """P[all visible edges match | the ``condition`` edges match]."""
    condition = list(condition or [])
    cond_set = set(condition)
    rest = [e for e in S.visible_edges if e not in cond_set]
    counts, cond_total, _ = pattern_counts(G, S, rest, condition, budget)
    if cond_total == 0:
        return DensityValue(Fraction(1), False)
    full = (1 << len(rest)) - 1
    return DensityValue(Fraction(counts.get(full, 0), cond_total), True)


def embed_probability_mc(G: Hypergraph, S: SimplicialComplex,
                         cfg: EstimatorConfig = EstimatorConfig()) -> MCEstimate:
    """Mean of i.i.d. embedding indicators with a Hoeffding interval.

    Batch ``b`` draws from the stream labelled ``("embed_mc", b)`` so the
    estimate does not depend on how batches are scheduled."""
    edges = S.visible_edges
    hw = hoeffding_half_width(cfg.samples, cfg.confidence)
    if not edges:
        return MCEstimate(1.0, hw, cfg.samples, cfg.seed, cfg.confidence)
    vertices = _vertices_of(edges)
    colors = [S.edge_color(e) for e in edges]
    hits = 0
    done, batch = 0, 0
    while done < cfg.samples:
        n = min(cfg.batch_size, cfg.samples - done)
        rng = derive_rng(cfg.seed, "embed_mc", batch)
        assign = {v: rng.integers(0, G.parts[v[0]], size=n) for v in vertices}
        hits += int(edge_matches(G, edges, colors, assign, n).all(axis=0).sum())
        done += n
        batch += 1
    return MCEstimate(hits / cfg.samples, hw, cfg.samples, cfg.seed, cfg.confidence)


def product_of_densities(G: Hypergraph, S: SimplicialComplex,
                         edges: Sequence[Edge] | None = None) -> Fraction:
    edges = S.visible_edges if edges is None else edges
    out = Fraction(1)
    for e in edges:
        out *= density(G, S.total_color(e))
    return out


def total_colors_of_frame(G: Hypergraph, I, frame: tuple) -> list[TotalColor]:
    """Every total color (realized or not) that extends ``frame``."""
    I = tuple(I)
    return [TotalColor(I, tuple(frame) + (c,)) for c in range(len(G.colors[I]))]


def realized_frames(G: Hypergraph, I) -> list[tuple]:
    density_table(G, I)
    return sorted(G._cache[("frames", tuple(I))])


def proper_restrictions(tc: TotalColor) -> list[TotalColor]:
    return [tc.restrict(J) for J in subsets(tc.index, proper=True)]
