"""Recolor bad edges to kill every copy of a pattern, or certify that many
copies exist."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .density import (DEFAULT_BUDGET, BudgetExceeded, _vertices_of, iter_assignments,
                      relative_density)
from .model import (INVISIBLE, Edge, Hypergraph, SimplicialComplex, TotalColor,
                    ValidationError, complex_from_edges, subsets, restrict_edge)
from .regularity import ErrorFunction, is_bad, uniform_slack
from .regularize import regularize, sample_map_vector


@dataclass(frozen=True)
class UniformPattern:
    """An h-vertex pattern whose visible edges all have size k.

    ``edges`` maps each visible edge to a host color id of its index set."""
    r: int
    k: int
    h: int
    edges: Mapping[Edge, int]

    def __post_init__(self):
        if not self.edges:
            raise ValidationError("pattern has no visible edge")
        for e in self.edges:
            if len(e.index) != self.k:
                raise ValidationError(f"pattern edge {e} is not of size k={self.k}")
            if any(not 0 <= v < self.h for v in e.vertices) or max(e.index) >= self.r:
                raise ValidationError(f"pattern edge {e} is out of range")

    def colors(self, I) -> set:
        return {c for e, c in self.edges.items() if e.index == tuple(I)}

    def as_complex(self) -> SimplicialComplex:
        return complex_from_edges(self.r, self.k, self.h, dict(self.edges))

    def validate(self, G: Hypergraph) -> None:
        if (G.r, G.k) != (self.r, self.k):
            raise ValidationError("pattern and host disagree on (r, k)")
        for e, c in self.edges.items():
            if not 0 <= c < G.num_colors(e.index):
                raise ValidationError(f"color {c} not in the table of {e.index}")
        for I in G.index_sets([G.k]):
            if len(self.colors(I)) >= G.num_colors(I):
                raise ValidationError(f"pattern uses every color of {I}; no spare color")


def spare_colors(G: Hypergraph, F: UniformPattern) -> dict:
    """Lowest color id of each full-size index set not used by F."""
    out = {}
    for I in G.index_sets([G.k]):
        free = [c for c in range(G.num_colors(I)) if c not in F.colors(I)]
        if not free:
            raise ValidationError(f"no spare color available for {I}")
        out[I] = free[0]
    return out


def recolor_bad_edges(G: Hypergraph, Gstar: Hypergraph, bad: set, spare: Mapping) -> Hypergraph:
    """G with every full-size edge e whose G*<e> is in ``bad`` given the
    spare color of its index set.  Smaller edges are untouched."""
    coloring = dict(G.coloring)
    for I in G.index_sets([G.k]):
        codes, tcs = Gstar.total_color_table(I)
        hit = np.array([tc in bad for tc in tcs], dtype=bool)
        if not hit.any():
            continue
        if I not in spare:
            raise ValidationError(f"no spare color for {I}")
        arr = G.coloring[I].reshape(-1).copy()
        arr[hit[codes]] = spare[I]
        coloring[I] = arr.reshape(G.shape(I))
    return Hypergraph(G.r, G.k, G.parts, G.colors, coloring)


def copy_probability(G: Hypergraph, F: UniformPattern, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Exact P_phi[every pattern edge maps to its color]."""
    edges = list(F.edges)
    hits, total = 0, 0
    for assign, n in iter_assignments(G, _vertices_of(edges), budget):
        ok = np.ones(n, dtype=bool)
        for e in edges:
            idx = tuple(assign[(i, a)] for i, a in zip(e.index, e.vertices))
            ok &= G.coloring[e.index][idx] == F.edges[e]
        hits += int(ok.sum())
        total += n
    return Fraction(hits, total)


def change_fractions(G: Hypergraph, G2: Hypergraph) -> dict:
    return {I: Fraction(int(np.count_nonzero(G.coloring[I] != G2.coloring[I])), G.coloring[I].size)
            for I in G.index_sets([G.k])}


def pattern_complexes(Gstar: Hypergraph, F: UniformPattern, budget: int = DEFAULT_BUDGET):
    """The complexes with F's full-size edges plus all their restrictions,
    one per lower coloring realized by some map, with exact probabilities.

    Unrealized lower colorings have probability 0 and are omitted."""
    lower = sorted({restrict_edge(e, J) for e in F.edges for J in subsets(e.index, proper=True)},
                   key=lambda e: (len(e.index), e.index, e.vertices))
    top = list(F.edges)
    counts: dict = {}
    total = 0
    for assign, n in iter_assignments(Gstar, _vertices_of(top), budget):
        ok = np.ones(n, dtype=bool)
        for e in top:
            idx = tuple(assign[(i, a)] for i, a in zip(e.index, e.vertices))
            ok &= Gstar.coloring[e.index][idx] == F.edges[e]
        total += n
        if not ok.any():
            continue
        cols = np.stack([Gstar.coloring[e.index][tuple(assign[(i, a)][ok]
                                                        for i, a in zip(e.index, e.vertices))]
                         for e in lower], axis=1) if lower else np.zeros((int(ok.sum()), 0), np.int64)
        rows, cnt = np.unique(cols, axis=0, return_counts=True)
        for row, c in zip(rows, cnt):
            key = tuple(int(x) for x in row)
            counts[key] = counts.get(key, 0) + int(c)
    out = []
    for key in sorted(counts):
        edges = dict(F.edges)
        edges.update(zip(lower, key))
        out.append((complex_from_edges(F.r, F.k, F.h, edges), Fraction(counts[key], total)))
    return out


@dataclass(frozen=True)
class RemovalConfig:
    sample_sizes: Sequence[int] | None = None  # default: one sample per level
    seed: int = 0
    budget: int = DEFAULT_BUDGET


@dataclass
class RemovalOutcome:
    case: str
    G_prime: Hypergraph | None
    change_fractions: dict
    bound: Fraction | None
    exact_probability: Fraction | None
    eps: Fraction
    eps_bar: Fraction
    bad: set
    survivors: int
    family_size: int
    fallback: bool = False
    seeds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .regularity import frac_str
        return {
            "case": self.case,
            "epsilon": frac_str(self.eps),
            "epsilon_bar": frac_str(self.eps_bar),
            "change_fractions": {",".join(map(str, I)): frac_str(v)
                                 for I, v in self.change_fractions.items()},
            "bound": None if self.bound is None else frac_str(self.bound),
            "exact_probability": None if self.exact_probability is None
            else frac_str(self.exact_probability),
            "bad_colors": len(self.bad),
            "survivors": self.survivors,
            "family_size": self.family_size,
            "fallback": self.fallback,
            "seeds": self.seeds,
        }


def removal_decision(G: Hypergraph, F: UniformPattern, eps, cfg: RemovalConfig = RemovalConfig()
                     ) -> RemovalOutcome:
    """Case "i": a recoloring changing at most ``eps`` of each full-size
    index set leaves no copy of F.  Case "ii": the copy probability is at
    least ``bound`` (a sum of products of ``d - delta`` over surviving
    complexes, or the exact probability when ``fallback`` is set)."""
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValidationError("epsilon must lie in (0, 1)")
    F.validate(G)
    k = G.k
    sqrt_bar = eps / (3 * 2 ** k)
    eps_bar = sqrt_bar ** 2
    sizes = list(cfg.sample_sizes) if cfg.sample_sizes is not None else [1] * (k - 1)
    Gstar = regularize(G, sample_map_vector(G, sizes, cfg.seed)) if k >= 2 else G
    seeds = {"regularize": cfg.seed, "sample_sizes": sizes}

    family = pattern_complexes(Gstar, F, cfg.budget)
    values: dict = {}
    for S, p in family:
        tcs = [S.total_color(e) for e in S.visible_edges]
        t = uniform_slack(p, [relative_density(Gstar, tc).value for tc in tcs])
        for tc in tcs:
            values[tc] = max(values.get(tc, Fraction(0)), t)
    delta = ErrorFunction(values)

    def bad_tc(tc):
        return is_bad(Gstar, tc, delta, sqrt_bar, include_self=True)

    survivors = [(S, p) for S, p in family
                 if not any(bad_tc(S.total_color(e)) for e in S.visible(k))]
    if survivors:
        bound = Fraction(0)
        for S, _ in survivors:
            term = Fraction(1)
            for e in S.visible_edges:
                tc = S.total_color(e)
                term *= max(Fraction(0), relative_density(Gstar, tc).value - delta(tc))
            bound += term
        exact = _exact_or_none(G, F, cfg.budget)
        return RemovalOutcome("ii", None, {}, bound, exact, eps, eps_bar, set(),
                              len(survivors), len(family), seeds=seeds)

    exact = _exact_or_none(G, F, cfg.budget)
    if exact == 0:
        zero = {I: Fraction(0) for I in G.index_sets([k])}
        return RemovalOutcome("i", G, zero, None, exact, eps, eps_bar, set(), 0, len(family),
                              seeds=seeds)
    bad = set()
    for I in Gstar.index_sets([k]):
        used = F.colors(I)
        bad.update(tc for tc in Gstar.total_color_table(I)[1] if tc.top in used and bad_tc(tc))
    G2 = recolor_bad_edges(G, Gstar, bad, spare_colors(G, F))
    fractions = change_fractions(G, G2)
    if all(v <= eps for v in fractions.values()):
        return RemovalOutcome("i", G2, fractions, None, exact, eps, eps_bar, bad, 0, len(family),
                              seeds=seeds)
    if exact is None:
        exact = copy_probability(G, F, cfg.budget)
    return RemovalOutcome("ii", None, fractions, exact, exact, eps, eps_bar, bad, 0, len(family),
                          fallback=True, seeds=seeds)


def _exact_or_none(G, F, budget):
    try:
        return copy_probability(G, F, budget)
    except BudgetExceeded:
        return None
