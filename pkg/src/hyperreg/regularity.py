"""Error functions, regularity certificates and the sample-size schedule.

An error function assigns a slack to every total color.  It is verified
against a family of complexes: each embedding probability must lie in the
product interval ``prod [max(0, d - delta), min(1, d + delta)]``.  The
certified bound is ``max_I |C_I| * E_{e in Omega_I}[delta(G<e>)]``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .density import (DEFAULT_BUDGET, BudgetExceeded, embed_probability_exact,
                      hoeffding_half_width, relative_density)
from .model import (INVISIBLE, Edge, Hypergraph, SimplicialComplex, TotalColor,
                    ValidationError, index_sets, restrict_edge, subsets, validate_complex)
from .regularize import (color_bound, color_bound_bits, count_maps, enumerate_maps,
                         s_regularize, sample_map)
from .rng import derive_rng, derive_seed


# -- exact helpers ----------------------------------------------------------

def exact_sqrt(q: Fraction) -> Fraction:
    """Square root of a rational that is a perfect square."""
    q = Fraction(q)
    if q < 0:
        raise ValidationError("negative value has no square root")
    a, b = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if a * a != q.numerator or b * b != q.denominator:
        raise ValidationError(f"{q} is not the square of a rational")
    return Fraction(a, b)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float) and not math.isfinite(x):
        raise ValueError("non-finite value")
    return Fraction(x)


def _capped(x) -> Fraction:
    """min(x, 1) as a rational; slack above 1 never matters."""
    if isinstance(x, float) and math.isinf(x):
        return Fraction(1)
    return min(as_fraction(x), Fraction(1))


# -- constants --------------------------------------------------------------

@dataclass(frozen=True)
class Constants:
    """epsilon_1 and C.  C is sqrt(2) times the rational ``c_over_sqrt2``,
    so ``c_squared`` is exact."""
    k: int
    h: int
    r: int
    b_k: int
    epsilon: Fraction
    epsilon1: Fraction
    sqrt_epsilon1: Fraction
    c_over_sqrt2: Fraction

    @property
    def c_squared(self) -> Fraction:
        return 2 * self.c_over_sqrt2 ** 2

    @property
    def C(self) -> float:
        try:
            return math.sqrt(2) * float(self.c_over_sqrt2)
        except OverflowError:
            return math.inf

    def times_C(self, x: Fraction) -> float:
        """C * sqrt(x) as a float (inf on overflow)."""
        x = Fraction(x)
        if x == 0:
            return 0.0
        try:
            return math.sqrt(float(self.c_squared * x))
        except OverflowError:
            return math.inf


def _sum_lower_exponent(r: int, k: int, h: int) -> int:
    return sum(comb(r, j) * h ** j for j in range(1, k))


def constants_bits(k: int, h: int, r: int, b_k: int, eps) -> float:
    """log2 of C / sqrt(2), estimated without building it."""
    eps = Fraction(eps)
    ck = comb(r, k)
    sqrt_e1 = eps / (12 * 2 ** k * b_k * ck)
    base = Fraction(b_k) / (2 * sqrt_e1)
    return (math.log2(ck * h ** k) + (ck * h ** k - 1) * math.log2(base)
            + _sum_lower_exponent(r, k, h) * math.log2(3))


def constants(k: int, h: int, r: int, b_k: int, eps) -> Constants:
    eps = Fraction(eps)
    if not 0 < eps < 1:
        raise ValidationError("epsilon must lie in (0, 1)")
    if k < 1 or h < 1 or r < k or b_k < 1:
        raise ValidationError("need 1 <= k <= r, h >= 1, b_k >= 1")
    ck = comb(r, k)
    sqrt_e1 = eps / (12 * 2 ** k * b_k * ck)
    base = Fraction(b_k) / (2 * sqrt_e1)
    c = ck * h ** k * base ** (ck * h ** k - 1) * 3 ** _sum_lower_exponent(r, k, h)
    return Constants(k, h, r, b_k, eps, sqrt_e1 ** 2, sqrt_e1, Fraction(c))


# -- error functions --------------------------------------------------------

@dataclass
class ErrorFunction:
    """``values[tc]`` with ``default`` for total colors not listed."""
    values: dict = field(default_factory=dict)
    default: Fraction | float = Fraction(0)

    def __post_init__(self):
        for tc, v in self.values.items():
            if v < 0:
                raise ValidationError(f"negative slack for {tc}")
        if self.default < 0:
            raise ValidationError("negative default slack")

    def __call__(self, tc: TotalColor):
        return self.values.get(tc, self.default)

    def sizes(self) -> set:
        return {len(tc.index) for tc in self.values}

    def restricted(self, max_size: int) -> "ErrorFunction":
        return ErrorFunction({tc: v for tc, v in self.values.items()
                              if len(tc.index) <= max_size}, self.default)

    def merged(self, other: "ErrorFunction") -> "ErrorFunction":
        vals = dict(self.values)
        vals.update(other.values)
        return ErrorFunction(vals, self.default)

    @classmethod
    def constant(cls, value) -> "ErrorFunction":
        return cls({}, value)


# -- eta --------------------------------------------------------------------

@dataclass(frozen=True)
class EtaStatistic:
    total_color: TotalColor
    m: int
    value: Fraction | float
    mode: str
    half_width: float = 0.0
    samples: int = 0
    defined: bool = True


@dataclass(frozen=True)
class EtaConfig:
    budget: int = 4096
    samples: int = 256
    seed: int = 0
    confidence: float = 0.99


def _frame_mask(G: Hypergraph, tc: TotalColor) -> np.ndarray:
    stacked = G.stacked_colors(tc.index, subsets(tc.index, proper=True))
    if stacked.shape[1] == 0:
        return np.ones(stacked.shape[0], dtype=bool)
    return np.all(stacked == np.asarray(tc.frame, dtype=np.int64), axis=1)


def _square_deviation(codes: np.ndarray, hit: np.ndarray, d: Fraction) -> Fraction:
    """Sum over classes of n_g * (p_g - d)^2, p_g the hit rate of class g."""
    _, inv = np.unique(codes, return_inverse=True)
    n = np.bincount(inv)
    c = np.bincount(inv, weights=hit.astype(np.int64)).astype(np.int64)
    total = Fraction(0)
    for ng, cg in zip(n.tolist(), c.tolist()):
        total += Fraction((cg - d * ng) ** 2, 1) / ng
    return total


def _refined_codes(G: Hypergraph, I: tuple, phi) -> np.ndarray:
    if G.k < 2:
        return G.frame_codes(I)
    return s_regularize(G, G.k - 1, phi).frame_codes(I)


def _map_stream(G: Hypergraph, a: int, cfg: EtaConfig):
    """``(maps, exact)``: every map of Phi(a) if within budget, else samples."""
    if count_maps(G, a) <= cfg.budget:
        return enumerate_maps(G, a), True
    stream = (sample_map(G, a, cfg.seed, label=("eta_map", i)) for i in range(cfg.samples))
    return stream, False


def eta(G: Hypergraph, tc: TotalColor, m: int, h: int = 1,
        cfg: EtaConfig = EtaConfig()) -> EtaStatistic:
    """Mean over phi in Phi(m h) and frame-class edges e* of the squared gap
    between the refined-class hit rate and the relative density."""
    I = tuple(tc.index)
    if len(I) != G.k:
        raise ValidationError("eta is defined for full-size total colors")
    mask = _frame_mask(G, tc)
    n_class = int(mask.sum())
    if n_class == 0:
        return EtaStatistic(tc, m, Fraction(0), "exact", defined=False)
    d = relative_density(G, tc).value
    hit = (G.coloring[I].reshape(-1) == tc.top)[mask]
    maps, exact = _map_stream(G, m * h, cfg)
    acc, count = Fraction(0), 0
    for phi in maps:
        codes = _refined_codes(G, I, phi)[mask]
        acc += _square_deviation(codes, hit, d) / n_class
        count += 1
    value = acc / count
    if exact:
        return EtaStatistic(tc, m, value, "exact", samples=count)
    hw = hoeffding_half_width(count, cfg.confidence)
    return EtaStatistic(tc, m, float(value), "mc", hw, count)


def refined_square_mean(G: Hypergraph, I, top: int, a: int,
                        cfg: EtaConfig = EtaConfig(budget=10 ** 6)) -> Fraction:
    """E_phi E_{e~}[(P[G(e) = top | e ~ e~ in the frame of G /^{k-1} phi])^2]
    over phi in Phi(a) and uniform e~ in Omega_I, exactly."""
    I = tuple(I)
    hit = G.coloring[I].reshape(-1) == top
    n = hit.size
    maps, exact = _map_stream(G, a, cfg)
    if not exact:
        raise BudgetExceeded("Phi(a) exceeds the enumeration budget")
    acc, count = Fraction(0), 0
    for phi in maps:
        codes = _refined_codes(G, I, phi)
        _, inv = np.unique(codes, return_inverse=True)
        sizes = np.bincount(inv)
        hits = np.bincount(inv, weights=hit.astype(np.int64)).astype(np.int64)
        acc += sum(Fraction(int(c) ** 2, int(s)) for s, c in zip(sizes, hits)) / n
        count += 1
    return acc / count


# -- BAD colors ------------------------------------------------------------

def is_bad(G: Hypergraph, tc: TotalColor, delta: ErrorFunction, sqrt_eps1: Fraction,
           include_self: bool = False) -> bool:
    """Large lower slack or small density on some restriction of ``tc``.
    ``include_self`` also tests the slack of ``tc`` itself."""
    for J in subsets(tc.index):
        sub = tc.restrict(J)
        ncol = G.num_colors(J)
        # slack is capped at 1, which is harmless since thresholds are below 1
        if (J != tc.index or include_self) and _capped(delta(sub)) >= sqrt_eps1 / ncol:
            return True
        if relative_density(G, sub).value <= 2 * sqrt_eps1 / ncol:
            return True
    return False


def bad_colors(G: Hypergraph, delta: ErrorFunction, eps1, sizes=None,
               include_self: bool = False) -> set:
    """BAD_I over the realized total colors of the given sizes (default k)."""
    sqrt_eps1 = exact_sqrt(Fraction(eps1))
    sizes = [G.k] if sizes is None else list(sizes)
    out = set()
    for I in G.index_sets(sizes):
        for tc in G.total_color_table(I)[1]:
            if is_bad(G, tc, delta, sqrt_eps1, include_self):
                out.add(tc)
    return out


# -- building error functions ---------------------------------------------

def faithful_top_level(G: Hypergraph, lower: ErrorFunction | None, eps, h: int, m: int,
                       cfg: EtaConfig = EtaConfig()) -> ErrorFunction:
    """Slack 1 on BAD colors and C sqrt(eta) elsewhere for full-size colors;
    lower sizes are taken from ``lower``."""
    if G.k >= 2 and lower is None:
        raise ValidationError("faithful mode needs the lower-level error function")
    if G.k == 1:
        return ErrorFunction({tc: Fraction(0) for tc in G.total_colors})
    const = constants(G.k, h, G.r, G.max_colors(G.k), eps)
    values = {tc: v for tc, v in lower.values.items() if len(tc.index) < G.k}
    for I in G.index_sets(range(1, G.k)):
        for tc in G.total_color_table(I)[1]:
            values.setdefault(tc, lower(tc))
    for I in G.index_sets([G.k]):
        for tc in G.total_color_table(I)[1]:
            if is_bad(G, tc, lower, const.sqrt_epsilon1):
                values[tc] = Fraction(1)
            else:
                values[tc] = const.times_C(as_fraction(eta(G, tc, m, h, cfg).value))
    return ErrorFunction(values)


def truncate(G: Hypergraph, k: int) -> Hypergraph:
    """Forget edges of size above ``k``."""
    if not 1 <= k <= G.k:
        raise ValidationError("truncation level out of range")
    keep = set(G.index_sets(range(1, k + 1)))
    return Hypergraph(G.r, k, G.parts, {I: c for I, c in G.colors.items() if I in keep},
                      {I: a for I, a in G.coloring.items() if I in keep})


def faithful_error_function(G: Hypergraph, h: int, eps, ms: Sequence[int],
                            cfg: EtaConfig = EtaConfig()) -> ErrorFunction:
    """The recursive construction: level k uses (h, eps, ms[k-2]) and the
    levels below use (2h, epsilon_1) on the truncated graph."""
    if G.k == 1:
        return faithful_top_level(G, None, eps, h, 0, cfg)
    ms = list(ms)
    if len(ms) != G.k - 1:
        raise ValidationError("need one eta sample size per level above 1")
    const = constants(G.k, h, G.r, G.max_colors(G.k), eps)
    lower = faithful_error_function(truncate(G, G.k - 1), 2 * h, const.epsilon1, ms[:-1], cfg)
    return faithful_top_level(G, lower, eps, h, ms[-1], cfg)


def _bracket(probs: Sequence[Fraction], t: Fraction):
    lo, hi = Fraction(1), Fraction(1)
    for d in probs:
        lo *= max(Fraction(0), d - t)
        hi *= min(Fraction(1), d + t)
    return lo, hi


def uniform_slack(P: Fraction, densities: Sequence[Fraction], steps: int = 40) -> Fraction:
    """Smallest dyadic t (to 2^-steps) with prod(d - t)+ <= P <= prod min(1, d + t)."""
    lo, hi = _bracket(densities, Fraction(0))
    if lo <= P <= hi:
        return Fraction(0)
    a, b = Fraction(0), Fraction(1)
    for _ in range(steps):
        mid = (a + b) / 2
        l, u = _bracket(densities, mid)
        if l <= P <= u:
            b = mid
        else:
            a = mid
    return b


def empirical_error_function(G: Hypergraph, family: Sequence[SimplicialComplex],
                             budget: int = DEFAULT_BUDGET) -> ErrorFunction:
    """For each S, the least uniform slack t_S making S's probability fit its
    bracket; a color gets the largest t_S over the complexes that use it."""
    values: dict = {}
    for S in family:
        edges = S.visible_edges
        tcs = [S.total_color(e) for e in edges]
        dens = [relative_density(G, tc).value for tc in tcs]
        t = uniform_slack(embed_probability_exact(G, S, budget), dens)
        for tc in tcs:
            if t > values.get(tc, Fraction(-1)):
                values[tc] = t
    return ErrorFunction(values)


def build_error_function(G: Hypergraph, mode: str, **params) -> ErrorFunction:
    """``mode='faithful'`` takes ``lower, eps, h, m`` (optional ``cfg``);
    ``mode='empirical'`` takes ``family`` (optional ``budget``)."""
    if mode == "faithful":
        if "lower" not in params and G.k >= 2:
            raise ValidationError("faithful mode needs the lower-level error function")
        return faithful_top_level(G, params.get("lower"), params["eps"], params.get("h", 1),
                                  params.get("m", 1), params.get("cfg", EtaConfig()))
    if mode == "empirical":
        return empirical_error_function(G, params["family"], params.get("budget", DEFAULT_BUDGET))
    raise ValidationError(f"unknown mode {mode!r}")


# -- verification and certificates -----------------------------------------

@dataclass
class MemberCheck:
    probability: Fraction
    lower: Fraction
    upper: Fraction

    @property
    def margin(self) -> Fraction:
        return min(self.probability - self.lower, self.upper - self.probability)

    @property
    def ok(self) -> bool:
        return self.margin >= 0


@dataclass
class RegularityCertificate:
    delta: ErrorFunction
    family: list
    checks: list
    per_index: dict
    bound: Fraction
    mode: str = "empirical"
    exhaustive: bool = False
    seeds: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def violations(self) -> list[int]:
        return [i for i, c in enumerate(self.checks) if not c.ok]

    @property
    def worst_margin(self) -> Fraction | None:
        return min((c.margin for c in self.checks), default=None)

    @property
    def family_digest(self) -> str:
        return family_digest(self.family)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "exhaustive": self.exhaustive,
            "passed": self.passed,
            "bound": frac_str(self.bound),
            "per_index": {",".join(map(str, I)): frac_str(v) for I, v in self.per_index.items()},
            "family_size": len(self.family),
            "family_digest": self.family_digest,
            "margins": [frac_str(c.margin) for c in self.checks],
            "violations": self.violations,
            "seeds": self.seeds,
        }


def frac_str(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def complex_payload(S: SimplicialComplex) -> dict:
    return {
        "r": S.r, "s": S.s, "h": S.h,
        "coloring": {",".join(map(str, I)): arr.reshape(-1).tolist() for I, arr in S.coloring.items()},
        "binding": None if S.binding is None else
        {",".join(map(str, I)): list(v) for I, v in S.binding.items()},
    }


def family_digest(family: Sequence[SimplicialComplex]) -> str:
    h = hashlib.sha256()
    for S in family:
        h.update(json.dumps(complex_payload(S), sort_keys=True).encode())
    return h.hexdigest()


def check_member(G: Hypergraph, S: SimplicialComplex, delta: ErrorFunction,
                 budget: int = DEFAULT_BUDGET) -> MemberCheck:
    lo, hi = Fraction(1), Fraction(1)
    for e in S.visible_edges:
        tc = S.total_color(e)
        d = relative_density(G, tc).value
        t = _capped(delta(tc))
        lo *= max(Fraction(0), d - t)
        hi *= min(Fraction(1), d + t)
    return MemberCheck(embed_probability_exact(G, S, budget), lo, hi)


def average_slack(G: Hypergraph, delta: ErrorFunction, sizes=None) -> dict:
    """``{I: |C_I| * E_{e in Omega_I}[min(1, delta(G<e>))]}``."""
    sizes = range(1, G.k + 1) if sizes is None else sizes
    out = {}
    for I in G.index_sets(sizes):
        codes, tcs = G.total_color_table(I)
        counts = np.bincount(codes, minlength=len(tcs))
        total = sum(int(n) * _capped(delta(tc)) for tc, n in zip(tcs, counts))
        out[I] = G.num_colors(I) * Fraction(total, int(codes.size))
    return out


def verify_error_function(G: Hypergraph, delta: ErrorFunction, h: int,
                          family: Sequence[SimplicialComplex], mode: str = "exact",
                          budget: int = DEFAULT_BUDGET, sizes=None) -> RegularityCertificate:
    """Check every member's bracket and compute the averaged-slack bound.
    Slack values above 1 are capped at 1, which changes neither check."""
    for S in family:
        if S.h != h:
            raise ValidationError(f"complex has h={S.h}, expected {h}")
        report = validate_complex(S, G)
        if not report.valid:
            raise ValidationError(f"invalid complex in family: {report}")
    checks = [check_member(G, S, delta, budget) for S in family]
    per_index = average_slack(G, delta, sizes)
    bound = max(per_index.values(), default=Fraction(0))
    return RegularityCertificate(delta, list(family), checks, per_index, bound, mode)


# -- families ---------------------------------------------------------------

def _pattern_edges(r: int, s: int, h: int) -> list[Edge]:
    out = []
    for I in index_sets(r, range(1, s + 1)):
        for verts in itertools.product(range(h), repeat=len(I)):
            out.append(Edge(I, verts))
    return out


def exhaustive_family(G: Hypergraph, h: int, s: int | None = None,
                      limit: int = 100_000, prune: bool = True) -> list[SimplicialComplex] | None:
    """Every downward-closed coloring with host color ids (identity binding).

    With ``prune`` complexes are skipped when some visible edge has a total
    color whose frame is realized but whose top is not; those have
    probability 0 and a zero lower bracket, so they pass for any slack.
    Returns None when more than ``limit`` complexes would be produced."""
    s = G.k if s is None else s
    edges = _pattern_edges(G.r, s, h)
    out: list[SimplicialComplex] = []
    assign: dict = {}

    def dead(e: Edge) -> bool:
        tc = TotalColor(e.index, tuple(assign[restrict_edge(e, J)] for J in subsets(e.index)))
        dv = relative_density(G, tc)
        return dv.defined and dv.value == 0

    def rec(pos: int) -> bool:
        if pos == len(edges):
            if len(out) >= limit:
                return False
            coloring = {I: np.full((h,) * len(I), INVISIBLE, dtype=np.int64)
                        for I in index_sets(G.r, range(1, s + 1))}
            for e, c in assign.items():
                if c != INVISIBLE:
                    coloring[e.index][e.vertices] = c
            out.append(SimplicialComplex(G.r, s, h, coloring))
            return True
        e = edges[pos]
        below = [assign[restrict_edge(e, J)] for J in subsets(e.index, proper=True)]
        options = [INVISIBLE]
        if all(c != INVISIBLE for c in below):
            options += list(range(G.num_colors(e.index)))
        for c in options:
            assign[e] = c
            if c != INVISIBLE and prune and dead(e):
                continue
            if not rec(pos + 1):
                return False
        del assign[e]
        return True

    return out if rec(0) else None


def sampled_family(G: Hypergraph, h: int, samples: int, seed: int,
                   p_visible: float = 0.8) -> list[SimplicialComplex]:
    from .model import random_complex
    out = []
    for i in range(samples):
        sub = int(derive_seed(seed, "family", i).generate_state(1)[0])
        out.append(random_complex(G, h, sub, p_visible))
    return out


@dataclass(frozen=True)
class RegConfig:
    max_family: int = 20_000
    samples: int = 200
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    p_visible: float = 0.8


def reg_upper_bound(G: Hypergraph, h: int = 1, cfg: RegConfig = RegConfig()) -> RegularityCertificate:
    """Certified upper bound on reg_{k,h}(G) from an empirical error function.

    When ``exhaustive`` is set the family contains every complex, so the
    bound holds for reg itself; otherwise it certifies the sampled family
    alone."""
    if G.k == 1:
        # single-vertex events of distinct pattern vertices are independent
        delta = ErrorFunction({tc: Fraction(0) for tc in G.total_colors})
        cert = verify_error_function(G, delta, h, [], budget=cfg.budget)
        cert.exhaustive = True
        return cert
    family = exhaustive_family(G, h, limit=cfg.max_family)
    exhaustive = family is not None
    if not exhaustive:
        family = sampled_family(G, h, cfg.samples, cfg.seed, cfg.p_visible)
    delta = empirical_error_function(G, family, cfg.budget)
    cert = verify_error_function(G, delta, h, family, mode="empirical", budget=cfg.budget)
    cert.exhaustive = exhaustive
    cert.seeds = {} if exhaustive else {"family": cfg.seed}
    return cert


# -- sample-size schedule ---------------------------------------------------

class ScheduleRefused(RuntimeError):
    """A schedule value would exceed the cost ceiling."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = list(trace)


class SampleSchedule:
    """Exact evaluators for m^{(i)}(n_i, ..., n_{k-1}) and
    n~^{(j)}(n_{j+1}, ..., n_{k-1}) at parameters (k, h, b, eps).

    Values are tower-type; any quantity whose bit length would exceed
    ``max_bits`` raises ScheduleRefused carrying the values computed so far.
    """

    def __init__(self, k: int, h: int, b: Sequence[int], eps, r: int,
                 max_bits: int = 1 << 20, _shared: dict | None = None):
        eps = Fraction(eps)
        if not 0 < eps < 1:
            raise ValidationError("epsilon must lie in (0, 1)")
        b = tuple(int(x) for x in b)
        if len(b) != k:
            raise ValidationError(f"b must have length k={k}")
        self.k, self.h, self.b, self.eps, self.r = k, h, b, eps, r
        self.max_bits = max_bits
        self._shared = {} if _shared is None else _shared
        self.trace = self._shared.setdefault("__trace__", [])
        self._m_top: dict[int, int] = {0: 0}
        self._const = None

    @property
    def key(self):
        return (self.k, self.h, self.b, self.eps)

    def _log(self, what, value):
        self.trace.append((f"k={self.k},h={self.h}", what, value if value.bit_length() < 256
                           else f"<{value.bit_length()} bits>"))

    def _refuse(self, what, bits):
        size = f"about {bits:.3g}" if math.isfinite(bits) else "more than 1e308"
        raise ScheduleRefused(f"{what} needs {size} bits (ceiling {self.max_bits})", self.trace)

    def _sub(self, k, h, b, eps) -> "SampleSchedule":
        key = (k, h, tuple(b), Fraction(eps))
        if key not in self._shared:
            self._shared[key] = SampleSchedule(k, h, b, eps, self.r, self.max_bits, self._shared)
        return self._shared[key]

    def constants(self) -> Constants:
        if self._const is None:
            bits = constants_bits(self.k, self.h, self.r, self.b[-1], self.eps)
            if bits > self.max_bits:
                self._refuse("C", bits)
            self._const = constants(self.k, self.h, self.r, self.b[-1], self.eps)
        return self._const

    def n_tilde_top(self) -> int:
        """Least n with C b_k sqrt(b_k / n) <= eps / (4 C(r, k))."""
        c = self.constants()
        bk = self.b[-1]
        bound = c.c_squared * bk ** 3 * (4 * comb(self.r, self.k) / self.eps) ** 2
        n = max(1, math.ceil(bound))
        self._log("n~^(k-1)", n)
        return n

    def _lower(self) -> "SampleSchedule":
        return self._sub(self.k - 1, self.h, self.b[:-1], self.eps)

    def _star(self, n: int) -> "SampleSchedule":
        """Schedule (k-1, 2h, b*, epsilon_1) used for n_{k-1} = n + 1."""
        top = self.m(self.k - 1, n + 1)
        bstar = []
        for i in range(1, self.k):
            bits = color_bound_bits(self.b, top, i, self.r)
            if bits > self.max_bits:
                self._refuse(f"b*_{i}", bits)
            bstar.append(color_bound(self.b, top, i, self.r))
        return self._sub(self.k - 1, 2 * self.h, bstar, self.constants().epsilon1)

    def n_tilde(self, j: int, *args: int) -> int:
        if not 1 <= j <= self.k - 1:
            raise ValidationError(f"j must lie in [1, {self.k - 1}]")
        if len(args) != self.k - 1 - j:
            raise ValidationError(f"n~^({j}) takes {self.k - 1 - j} arguments")
        if j == self.k - 1:
            return self.n_tilde_top()
        *rest, last = args
        if last == 0:
            return self._lower().n_tilde(j, *rest)
        return self._star(last - 1).n_tilde(j, *rest)

    def m(self, i: int, *args: int) -> int:
        if not 1 <= i <= self.k - 1:
            raise ValidationError(f"i must lie in [1, {self.k - 1}]")
        if len(args) != self.k - i:
            raise ValidationError(f"m^({i}) takes {self.k - i} arguments")
        if any(a < 0 for a in args):
            raise ValidationError("arguments must be nonnegative")
        *rest, last = args
        if i == self.k - 1:
            return self._top(last)
        if last == 0:
            return self._lower().m(i, *rest)
        return self._star(last - 1).m(i, *rest)

    def _top(self, n: int) -> int:
        start = max(x for x in self._m_top if x <= n)
        for t in range(start, n):
            self._m_top[t + 1] = self._step(t)
        return self._m_top[n]

    def eta_samples(self, n: int) -> int:
        """m-bar at n_{k-1} = n: the eta sample size used one level up."""
        return self._mbar(self._total(n))

    def _total(self, n: int) -> int:
        k = self.k
        nbar: dict[int, int] = {}
        for j in range(k - 2, 0, -1):
            nbar[j] = self.n_tilde(j, *[nbar[t] for t in range(j + 1, k - 1)], n)
        total = 0
        for j in range(1, k):
            total += self.m(j, *[nbar[t] for t in range(j, k - 1)], n) if j < k - 1 \
                else self._m_top[n]
        return total

    def _mbar(self, total: int) -> int:
        sqrt_e1 = self.constants().sqrt_epsilon1
        bits = 0.0
        for i in range(1, self.k):
            e = comb(self.r, i) * self.h ** i
            bits += e * (color_bound_bits(self.b, total, i, self.r) - math.log2(sqrt_e1))
        if bits > self.max_bits:
            self._refuse("m-bar", bits)
        out = Fraction(1)
        for i in range(1, self.k):
            out *= (color_bound(self.b, total, i, self.r) / sqrt_e1) ** (comb(self.r, i) * self.h ** i)
        return math.ceil(out)

    def _step(self, n: int) -> int:
        total = self._total(n)
        value = total + self._mbar(total) * self.h
        self._log(f"m^(k-1)({n + 1})", value)
        return value


def faithful_schedule(k: int, h: int, b: Sequence[int], eps, r: int,
                      max_bits: int = 1 << 20) -> SampleSchedule:
    return SampleSchedule(k, h, b, eps, r, max_bits)
