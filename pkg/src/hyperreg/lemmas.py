"""Exact checks of the three inequalities behind the counting argument.

Every quantity here is a ``Fraction``.  Each check returns a
``CheckResult`` whose ``margin`` is the slack in the asserted direction, so
a check passes exactly when ``margin >= 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .density import (DEFAULT_BUDGET, _vertices_of, edges_probability, iter_assignments,
                      pattern_counts, relative_density)
from .model import (Edge, Hypergraph, SimplicialComplex, ValidationError, embedded_complex,
                    random_hypergraph, subsets)
from .regularity import (ErrorFunction, _capped, exhaustive_family, truncate,
                         verify_error_function)
from .regularize import count_maps, enumerate_maps, s_regularize
from .rng import derive_rng


@dataclass
class CheckResult:
    lhs: Fraction
    rhs: Fraction
    margin: Fraction
    skipped: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.skipped or self.margin >= 0


# -- nested conditional expectations -------------------------------------

@dataclass
class NestedEquivalence:
    """Uniform ground set ``range(n)``; ``fine`` and ``coarse`` are class
    labels and ``X`` the random variable."""
    fine: Sequence
    coarse: Sequence
    X: Sequence

    def __post_init__(self):
        self.fine, self.coarse = list(self.fine), list(self.coarse)
        self.X = [Fraction(x) for x in self.X]
        if not len(self.fine) == len(self.coarse) == len(self.X) or not self.X:
            raise ValidationError("labels and values must have the same nonzero length")
        owner = {}
        for f, c in zip(self.fine, self.coarse):
            if owner.setdefault(f, c) != c:
                raise ValidationError(f"fine class {f!r} meets two coarse classes")


def conditional_square_mean(labels: Sequence, X: Sequence[Fraction]) -> Fraction:
    """E[(E[X | class])^2] under the uniform measure."""
    sums: dict = {}
    sizes: dict = {}
    for lab, x in zip(labels, X):
        sums[lab] = sums.get(lab, Fraction(0)) + x
        sizes[lab] = sizes.get(lab, 0) + 1
    return sum((s * s / sizes[lab] for lab, s in sums.items()), Fraction(0)) / len(X)


def check_nested_cauchy_schwarz(inst: NestedEquivalence) -> CheckResult:
    lhs = conditional_square_mean(inst.fine, inst.X)
    rhs = conditional_square_mean(inst.coarse, inst.X)
    return CheckResult(lhs, rhs, lhs - rhs)


def random_nested(seed: int, max_size: int = 12, denominator: int = 6) -> NestedEquivalence:
    rng = derive_rng(seed, "nested")
    n = int(rng.integers(1, max_size + 1))
    coarse = rng.integers(0, max(1, n // 2) + 1, size=n)
    split = rng.integers(0, 3, size=n)
    fine = [(int(c), int(s)) for c, s in zip(coarse, split)]
    X = [Fraction(int(v), denominator) for v in rng.integers(-denominator, denominator + 1, size=n)]
    return NestedEquivalence(fine, coarse.tolist(), X)


# -- edge images under enumerated maps -------------------------------------

def _edge_colors(G: Hypergraph, e: Edge, assign: dict) -> np.ndarray:
    idx = tuple(assign[(i, a)] for i, a in zip(e.index, e.vertices))
    return G.coloring[e.index][idx]


def _full_edges(S: SimplicialComplex, k: int) -> list[Edge]:
    return [e for e in S.visible_edges if len(e.index) == k]


def _lower_edges(S: SimplicialComplex, k: int) -> list[Edge]:
    return [e for e in S.visible_edges if len(e.index) < k]


# -- counting error ----------------------------------------------------------

def check_counting_error_bound(G: Hypergraph, S: SimplicialComplex,
                               budget: int = DEFAULT_BUDGET) -> CheckResult:
    """|P[top edges match | lower edges match] - prod d| against
    |V_k| * max_D |E[prod_{e in D} (1_e - d_e) | lower edges match]|."""
    k = G.k
    top, low = _full_edges(S, k), _lower_edges(S, k)
    if not top:
        return CheckResult(Fraction(0), Fraction(0), Fraction(0))
    counts, cond_total, _ = pattern_counts(G, S, top, low, budget)
    if cond_total == 0:
        return CheckResult(Fraction(0), Fraction(0), Fraction(0), skipped=True,
                           note="conditioning event is empty")
    d = [relative_density(G, S.total_color(e)).value for e in top]
    full = (1 << len(top)) - 1
    prod_d = Fraction(1)
    for x in d:
        prod_d *= x
    lhs = abs(Fraction(counts.get(full, 0), cond_total) - prod_d)
    worst = Fraction(0)
    for size in range(1, len(top) + 1):
        for D in combinations(range(len(top)), size):
            acc = Fraction(0)
            for pattern, c in counts.items():
                term = Fraction(c)
                for j in D:
                    term *= ((pattern >> j) & 1) - d[j]
                acc += term
            worst = max(worst, abs(acc) / cond_total)
    rhs = len(top) * worst
    return CheckResult(lhs, rhs, rhs - lhs)


# -- mean square bound --------------------------------------------------------

@dataclass
class TestFunctional:
    """``values[e][c]``: F_e at host color id ``c`` of e's index set."""
    values: Mapping[Edge, Sequence]

    __test__ = False  # not a pytest class

    def __post_init__(self):
        self.values = {e: tuple(Fraction(v) for v in vals) for e, vals in self.values.items()}
        for e, vals in self.values.items():
            if any(abs(v) > 1 for v in vals):
                raise ValidationError(f"|F| exceeds 1 on {e}")

    def __call__(self, e: Edge, color: int) -> Fraction:
        return self.values[e][color]

    @classmethod
    def zero(cls, G: Hypergraph, S: SimplicialComplex) -> "TestFunctional":
        return cls({e: (0,) * G.num_colors(e.index) for e in _full_edges(S, G.k)})


def random_functional(G: Hypergraph, S: SimplicialComplex, seed: int,
                      denominator: int = 4) -> TestFunctional:
    rng = derive_rng(seed, "functional")
    vals = {}
    for e in _full_edges(S, G.k):
        nums = rng.integers(-denominator, denominator + 1, size=G.num_colors(e.index))
        vals[e] = tuple(Fraction(int(x), denominator) for x in nums)
    return TestFunctional(vals)


def _f_array(F: TestFunctional, e: Edge) -> np.ndarray:
    return np.array(F.values[e], dtype=object)


def _correlation(G, S, F, top, low, budget):
    """Over all maps of the touched vertices: the sum of prod F * prod 1_low,
    the number of maps matching every lower edge, and the number of maps."""
    edges = top + low
    vertices = _vertices_of(edges)
    sum_f = Fraction(0)
    hits = 0
    total = 0
    for assign, n in iter_assignments(G, vertices, budget):
        ok = np.ones(n, dtype=bool)
        for e in low:
            ok &= _edge_colors(G, e, assign) == S.edge_color(e)
        prod = np.ones(int(ok.sum()), dtype=object)
        for e in top:
            prod = prod * _f_array(F, e)[_edge_colors(G, e, assign)[ok]]
        sum_f += sum(prod.tolist(), Fraction(0))
        hits += int(ok.sum())
        total += n
    return sum_f, hits, total


def _refined_square(G: Hypergraph, e0: Edge, values: np.ndarray, frame_mask: np.ndarray | None,
                    a: int, budget: int) -> Fraction:
    """E_phi E_{e*}[(E_e[values | e ~ e*])^2] over phi in Phi(a), with e*
    restricted to ``frame_mask`` when given."""
    if count_maps(G, a) > budget:
        from .density import BudgetExceeded
        raise BudgetExceeded("Phi(mh) exceeds the enumeration budget")
    I = e0.index
    mask = np.ones(values.size, dtype=bool) if frame_mask is None else frame_mask
    n_class = int(mask.sum())
    acc, count = Fraction(0), 0
    for phi in enumerate_maps(G, a):
        codes = (s_regularize(G, G.k - 1, phi) if G.k >= 2 else G).frame_codes(I)[mask]
        sums: dict = {}
        sizes: dict = {}
        for c, v in zip(codes.tolist(), values[mask].tolist()):
            sums[c] = sums.get(c, Fraction(0)) + v
            sizes[c] = sizes.get(c, 0) + 1
        acc += sum((s * s / sizes[c] for c, s in sums.items()), Fraction(0)) / n_class
        count += 1
    return acc / count


def _frame_mask(G: Hypergraph, S: SimplicialComplex, e0: Edge) -> np.ndarray:
    frame = S.total_color(e0).frame
    stacked = G.stacked_colors(e0.index, subsets(e0.index, proper=True))
    return np.all(stacked == np.asarray(frame, dtype=np.int64), axis=1)


def doubled_complex(S: SimplicialComplex, e0: Edge, k: int) -> SimplicialComplex:
    """Two copies of the lower part of S glued along the vertices of e0.

    Vertex slot ``v`` of part ``i`` in copy 2 becomes ``h + v`` unless it is
    e0's vertex in part ``i``; edges mixing non-shared vertices of both
    copies are invisible."""
    h = S.h
    shared = dict(zip(e0.index, e0.vertices))
    coloring = {}
    for I, arr in S.coloring.items():
        if len(I) >= k:
            continue
        out = np.full((2 * h,) * len(I), -1, dtype=np.int64)
        out[(slice(0, h),) * len(I)] = arr
        coloring[I] = out
    for e in _lower_edges(S, k):
        second = tuple(v if shared.get(i) == v else h + v for i, v in zip(e.index, e.vertices))
        coloring[e.index][second] = S.coloring[e.index][e.vertices]
    return SimplicialComplex(S.r, k - 1, 2 * h, coloring, S.binding)


def lower_complex(S: SimplicialComplex, k: int) -> SimplicialComplex:
    return SimplicialComplex(S.r, k - 1, S.h, {I: a for I, a in S.coloring.items() if len(I) < k},
                             S.binding)


def check_mean_square_bound(G: Hypergraph, S: SimplicialComplex, F: TestFunctional, m: int,
                            delta: ErrorFunction, e0: Edge | None = None,
                            budget: int = DEFAULT_BUDGET, family_limit: int = 20_000,
                            verify: bool = True) -> CheckResult:
    """Both right sides of the correlation bound, plus the conditional form
    when the smallness guard holds.

    ``rhs`` is the stated bound with ``d + delta`` (capped at 1) in place
    of each ``d^(delta)``; ``extra['rhs_chain']`` is the intermediate bound
    ``Q * (P[S''] + P[S^-] / m)`` that the stated one dominates.
    """
    k = G.k
    if k < 2:
        raise ValidationError("the correlation bound needs k >= 2")
    if m < 1:
        raise ValidationError("m must be positive")
    top, low = _full_edges(S, k), _lower_edges(S, k)
    if not top:
        raise ValidationError("S has no full-size visible edge")
    e0 = top[0] if e0 is None else e0
    if e0 not in top:
        raise ValidationError("e0 must be a visible full-size edge of S")
    if verify:
        lowG = truncate(G, k - 1)
        family = exhaustive_family(lowG, 2 * S.h, limit=family_limit)
        if family is None:
            raise ValidationError("cannot verify delta: (k-1, 2h) family too large")
        cert = verify_error_function(lowG, delta.restricted(k - 1), 2 * S.h, family, budget=budget)
        if not cert.passed:
            raise ValidationError("delta is not a (k-1, 2h)-error function of G")

    sum_f, hits, total = _correlation(G, S, F, top, low, budget)
    lhs = (sum_f / total) ** 2

    I = e0.index
    frame_mask = _frame_mask(G, S, e0)
    f0 = _f_array(F, e0)[G.coloring[I].reshape(-1)]
    q = _refined_square(G, e0, np.where(frame_mask, f0, Fraction(0)), None, m * S.h, budget)

    e0_set = set(zip(e0.index, e0.vertices))
    outside = [e for e in low if not set(zip(e.index, e.vertices)) <= e0_set]
    p_double = edges_probability(G, doubled_complex(S, e0, k),
                                 doubled_complex(S, e0, k).visible_edges, budget)
    p_low = Fraction(hits, total)
    rhs_chain = q * (p_double + p_low / m)

    upper = {e: min(Fraction(1), relative_density(G, S.total_color(e)).value
                    + _capped(delta(S.total_color(e)))) for e in low}
    prod_low, prod_out = Fraction(1), Fraction(1)
    for e in low:
        prod_low *= upper[e]
    for e in outside:
        prod_out *= upper[e]
    rhs = q * prod_low * (prod_out + Fraction(1, m))

    extra = {"rhs_chain": rhs_chain, "q": q, "p_double": p_double, "p_low": p_low,
             "e0": e0, "chain_holds": lhs <= rhs_chain}

    dens = {e: relative_density(G, S.total_color(e)).value for e in low}
    guard = all(dens[e] / 2 - _capped(delta(S.total_color(e))) > 0 for e in low)
    lower_prod = Fraction(1)
    for e in outside:
        lower_prod *= dens[e] - _capped(delta(S.total_color(e)))
    guard = guard and Fraction(1, m) <= lower_prod
    extra["guard"] = guard
    if guard:
        if hits == 0 or not frame_mask.any():
            extra["conditional"] = None
            extra["conditional_note"] = "conditioning event is empty"
        else:
            lhs_c = (sum_f / hits) ** 2
            q_c = _refined_square(G, e0, f0, frame_mask, m * S.h, budget)
            rhs_c = 2 * 3 ** (2 * len(low)) * q_c
            extra["conditional"] = CheckResult(lhs_c, rhs_c, rhs_c - lhs_c)
    return CheckResult(lhs, rhs, min(rhs - lhs, rhs_chain - lhs), extra=extra)


# -- corpus -------------------------------------------------------------------

def load_corpus(path=None) -> dict:
    """The pinned instance descriptors (shipped with the package by default)."""
    if path is None:
        text = resources.files("hyperreg").joinpath("data/lemma_corpus.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


def counting_instance(desc: Mapping):
    G = random_hypergraph(desc["r"], desc["k"], desc["b"], desc["parts"], desc["seed"])
    S = embedded_complex(G, desc["h"], desc["seed"], desc.get("p_visible", 0.8))
    return G, S


def mean_square_instance(desc: Mapping):
    G, S = counting_instance(desc)
    F = random_functional(G, S, desc["seed"])
    return G, S, F


def run_corpus(corpus: Mapping, budget: int = DEFAULT_BUDGET) -> list[dict]:
    """Rows ``{id, kind, lhs, rhs, margin, skipped}`` for every instance."""
    rows = []
    for desc in corpus["nested"]:
        res = check_nested_cauchy_schwarz(random_nested(desc["seed"], desc.get("max_size", 12)))
        rows.append(_row(desc["id"], "nested", res))
    for desc in corpus["counting"]:
        G, S = counting_instance(desc)
        rows.append(_row(desc["id"], "counting", check_counting_error_bound(G, S, budget)))
    for desc in corpus["mean_square"]:
        G, S, F = mean_square_instance(desc)
        if not _full_edges(S, G.k):
            continue
        res = check_mean_square_bound(G, S, F, desc["m"], ErrorFunction.constant(Fraction(0)),
                                      budget=budget)
        rows.append(_row(desc["id"], "mean_square", res))
        cond = res.extra.get("conditional")
        if cond is not None:
            rows.append(_row(desc["id"] + "/conditional", "mean_square_conditional", cond))
    return rows


def _row(iid: str, kind: str, res: CheckResult) -> dict:
    return {"id": iid, "kind": kind, "lhs": res.lhs, "rhs": res.rhs,
            "margin": res.margin, "skipped": res.skipped}
