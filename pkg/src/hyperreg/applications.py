"""Corners in simplices, homothetic copies of finite patterns, and
arithmetic progressions, with brute-force oracles."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .density import DEFAULT_BUDGET, BudgetExceeded
from .model import Edge, Hypergraph, ValidationError, build_hypergraph, index_sets
from .rng import derive_rng


def _points(S: Iterable) -> frozenset:
    return frozenset(tuple(int(x) for x in p) for p in S)


# -- simplex corners ----------------------------------------------------------

@dataclass(frozen=True)
class SimplexSet:
    """A subset of T(N, k) = {x in [N]_0^{k+1} : sum x = N - 1}."""
    N: int
    k: int
    members: frozenset

    def __init__(self, N: int, k: int, members: Iterable):
        object.__setattr__(self, "N", int(N))
        object.__setattr__(self, "k", int(k))
        pts = _points(members)
        for p in pts:
            if len(p) != k + 1 or sum(p) != N - 1 or any(not 0 <= x < N for x in p):
                raise ValidationError(f"{p} is not in T({N}, {k})")
        object.__setattr__(self, "members", pts)

    def __contains__(self, p) -> bool:
        return tuple(p) in self.members

    def __len__(self):
        return len(self.members)

    @classmethod
    def full(cls, N: int, k: int) -> "SimplexSet":
        pts = [p + (N - 1 - sum(p),) for p in itertools.product(range(N), repeat=k)
               if sum(p) <= N - 1]
        return cls(N, k, pts)

    @classmethod
    def random(cls, N: int, k: int, density: float, seed: int) -> "SimplexSet":
        rng = derive_rng(seed, "simplex_set")
        full = sorted(cls.full(N, k).members)
        keep = rng.random(len(full)) < density
        return cls(N, k, [p for p, x in zip(full, keep) if x])


@dataclass(frozen=True)
class CornerSolution:
    a: tuple
    c: int

    def points(self) -> list[tuple]:
        out = []
        for i in range(len(self.a)):
            p = list(self.a)
            p[i] += self.c
            out.append(tuple(p))
        return out

    def verify(self, S: SimplexSet) -> bool:
        return (self.c != 0 and self.c == S.N - 1 - sum(self.a)
                and tuple(self.a) not in S and all(p in S for p in self.points()))


def corner_hypergraph(S: SimplexSet) -> Hypergraph:
    """(k+1)-partite graph on [N]_0: a k-edge is red iff some member of S
    agrees with it on its index set; smaller edges carry one color."""
    r, k, N = S.k + 1, S.k, S.N
    colors, coloring = {}, {}
    for I in index_sets(r, range(1, k + 1)):
        if len(I) < k:
            colors[I] = ("invisible",)
            coloring[I] = np.zeros((N,) * len(I), dtype=np.int64)
        else:
            colors[I] = ("white", "red")
            arr = np.zeros((N,) * k, dtype=np.int64)
            for p in S.members:
                arr[tuple(p[i] for i in I)] = 1
            coloring[I] = arr
    return build_hypergraph(r, k, [N] * r, colors, coloring)


def corner_pattern(k: int):
    """The 1-vertex pattern whose k+1 edges of size k are all red (id 1)."""
    from .removal import UniformPattern
    r = k + 1
    return UniformPattern(r, k, 1, {Edge(I, (0,) * k): 1 for I in index_sets(r, [k])})


def _red_mask(S: SimplexSet) -> np.ndarray:
    N, r = S.N, S.k + 1
    red = np.ones((N,) * r, dtype=bool)
    for drop in range(r):
        proj = np.zeros((N,) * S.k, dtype=bool)
        for p in S.members:
            proj[p[:drop] + p[drop + 1:]] = True
        red &= np.expand_dims(proj, drop)
    return red


def simplex_corners(S: SimplexSet, budget: int = DEFAULT_BUDGET) -> np.ndarray:
    """Every non-degenerate red tuple a (lexicographic rows), by full scan."""
    total = S.N ** (S.k + 1)
    if total > budget:
        raise BudgetExceeded(f"{total} tuples exceed the scan budget {budget}")
    red = _red_mask(S)
    for p in S.members:
        red[p] = False
    return np.argwhere(red)


def _indexed_corners(S: SimplexSet) -> list[tuple]:
    """Anchor each member as a + c e_0 and test the other k points."""
    N = S.N
    out = set()
    for s in S.members:
        for c in range(-(N - 1), N):
            if c == 0 or not 0 <= s[0] - c < N:
                continue
            a = (s[0] - c,) + s[1:]
            if all(a[:i] + (a[i] + c,) + a[i + 1:] in S.members for i in range(1, len(a))):
                out.add(a)
    return sorted(out)


def find_simplex_corner(S: SimplexSet, backend: str = "brute",
                        budget: int = DEFAULT_BUDGET) -> CornerSolution | None:
    """Lexicographically first a with a + c E_{k+1} in S, c = N-1-sum(a) != 0."""
    if backend == "brute":
        rows = simplex_corners(S, budget)
        if len(rows) == 0:
            return None
        a = tuple(int(x) for x in rows[0])
    elif backend == "indexed":
        found = _indexed_corners(S)
        if not found:
            return None
        a = found[0]
    else:
        raise ValidationError(f"unknown backend {backend!r}")
    sol = CornerSolution(a, S.N - 1 - sum(a))
    if not sol.verify(S):
        raise AssertionError(f"corner {sol} failed verification")
    return sol


def count_simplex_corners(S: SimplexSet, budget: int = DEFAULT_BUDGET) -> int:
    return len(simplex_corners(S, budget))


def corner_removal_crosscheck(S: SimplexSet, eps, seed: int = 0, budget: int = DEFAULT_BUDGET):
    """Run the removal decision on the corner graph; returns the outcome."""
    from .removal import RemovalConfig, removal_decision
    G = corner_hypergraph(S)
    return removal_decision(G, corner_pattern(S.k), eps,
                            RemovalConfig(sample_sizes=[0] * (S.k - 1), seed=seed, budget=budget))


# -- symmetrization -----------------------------------------------------------

@dataclass(frozen=True)
class SymmetricSubset:
    """T = {t in S : z - t in S}, symmetric about x = z / 2."""
    z: tuple
    T: frozenset
    exhaustive: bool

    @property
    def x(self) -> tuple:
        return tuple(Fraction(v, 2) for v in self.z)


def symmetric_part(S: frozenset, z: Sequence[int]) -> frozenset:
    z = tuple(z)
    return frozenset(t for t in S if tuple(a - b for a, b in zip(z, t)) in S)


def symmetrize_set(S: Iterable, N: int, r: int, trials: int = 64, seed: int = 0) -> SymmetricSubset:
    """Largest symmetric part over candidate centres z/2, z in [2N)_0^r.
    All centres are tried when ``trials >= (2N)^r``; ties go to the
    lexicographically smallest z."""
    S = _points(S)
    exhaustive = trials >= (2 * N) ** r
    if exhaustive:
        centres = itertools.product(range(2 * N), repeat=r)
    else:
        rng = derive_rng(seed, "symmetrize")
        centres = sorted({tuple(int(v) for v in rng.integers(0, 2 * N, size=r)) for _ in range(trials)})
    best_z, best_T = None, frozenset()
    for z in centres:
        T = symmetric_part(S, z)
        if best_z is None or len(T) > len(best_T):
            best_z, best_T = tuple(z), T
    return SymmetricSubset(best_z, best_T, exhaustive)


# -- pattern reduction ------------------------------------------------------

@dataclass(frozen=True)
class PatternReduction:
    """F = offset + Lambda(B_{r'}), Lambda an r x r' integer matrix whose
    columns are the nonzero points of F - offset in lexicographic order."""
    F: tuple
    offset: tuple
    matrix: np.ndarray
    box: int

    @property
    def r(self) -> int:
        return len(self.offset)

    @property
    def r_prime(self) -> int:
        return self.matrix.shape[1]

    def apply(self, w) -> tuple:
        return tuple(int(x) for x in self.matrix @ np.asarray(w, dtype=np.int64))

    def image_of_basis(self) -> set:
        """Lambda(E_{r'} + {0}) shifted back by the offset."""
        pts = {tuple(self.offset)}
        for j in range(self.r_prime):
            e = np.zeros(self.r_prime, dtype=np.int64)
            e[j] = 1
            pts.add(tuple(o + x for o, x in zip(self.offset, self.apply(e))))
        return pts


def pattern_reduction(F: Iterable) -> PatternReduction:
    pts = sorted(_points(F))
    if len(pts) < 2:
        raise ValidationError("pattern needs at least two points")
    r = len(pts[0])
    if any(len(p) != r for p in pts):
        raise ValidationError("pattern points have different dimensions")
    offset = pts[0]
    shifted = [tuple(a - b for a, b in zip(p, offset)) for p in pts[1:]]
    matrix = np.array(shifted, dtype=np.int64).T.reshape(r, len(shifted))
    spans = [max(p[i] for p in pts) - min(p[i] for p in pts) for i in range(r)]
    return PatternReduction(tuple(pts), offset, matrix, max(spans) + 1)


# -- configurations -----------------------------------------------------------

@dataclass(frozen=True)
class ConfigurationResult:
    a: tuple
    c: int
    witness: tuple
    route: str

    def verify(self, S: frozenset, N: int) -> bool:
        return 1 <= self.c <= N and all(p in S for p in self.witness)


@dataclass(frozen=True)
class ConfigConfig:
    trials: int = 64
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    pipeline: bool = True


def _witness(a, c, F) -> tuple:
    return tuple(tuple(ai + c * fi for ai, fi in zip(a, f)) for f in sorted(F))


def _lift(T: frozenset, red: PatternReduction, N: int, budget: int) -> frozenset:
    """{w in [N]_0^{r'} : Lambda w in T - offset}, by vectorized scan."""
    rp = red.r_prime
    total = N ** rp
    if total > budget:
        raise BudgetExceeded(f"lift scans {total} points, over budget {budget}")
    targets = {tuple(a - b for a, b in zip(t, red.offset)) for t in T}
    if not targets:
        return frozenset()
    out = set()
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        W = np.stack(np.unravel_index(idx, (N,) * rp), axis=1)
        img = W @ red.matrix.T
        for w, v in zip(W.tolist(), img.tolist()):
            if tuple(v) in targets:
                out.add(tuple(w))
    return frozenset(out)


def _pipeline(S: frozenset, F, N: int, cfg: ConfigConfig):
    red = pattern_reduction(F)
    sym = symmetrize_set(S, N, red.r, cfg.trials, cfg.seed)
    if not sym.T:
        return None
    lifted = _lift(sym.T, red, N, cfg.budget)
    if not lifted:
        return None
    rp = red.r_prime
    N2 = rp * (N - 1) + 1
    simplex = SimplexSet(N2, rp, [(N2 - 1 - sum(w),) + w for w in lifted])
    corner = find_simplex_corner(simplex, backend="indexed")
    if corner is None:
        return None
    w0, c = corner.a[1:], corner.c
    # the corner gives P + c(F - offset) inside T, P = Lambda w0 + offset
    P = tuple(b + o for b, o in zip(red.apply(w0), red.offset))
    if c < 0:
        # reflect through the centre z / 2: z - (P + cF') = (z - P) + |c| F'
        P, c = tuple(zz - p for zz, p in zip(sym.z, P)), -c
    a = tuple(p - c * o for p, o in zip(P, red.offset))
    return a, c


def _scan_first(S: frozenset, F, N: int):
    """Lexicographically first (a, c), anchoring the first point of F on S."""
    pts = sorted(_points(F))
    f0 = pts[0]
    best = None
    for s in S:
        for c in range(1, N + 1):
            a = tuple(x - c * f for x, f in zip(s, f0))
            if all(tuple(ai + c * fi for ai, fi in zip(a, f)) in S for f in pts):
                if best is None or (a, c) < best:
                    best = (a, c)
    return best


def find_configuration(S: Iterable, F: Iterable, N: int,
                       cfg: ConfigConfig = ConfigConfig()) -> ConfigurationResult | None:
    """Some a and c in [N] with a + cF inside S.

    The reduction route (symmetrize, lift through Lambda, corner search,
    reflect when c < 0) runs first; when it finds nothing an anchored
    exhaustive scan decides, so existence never depends on the sampled
    centre.  Every result is re-checked by membership."""
    S, F = _points(S), _points(F)
    if not F:
        raise ValidationError("empty pattern")
    if len(F) == 1:
        (f,) = F
        for s in sorted(S):
            a = tuple(x - y for x, y in zip(s, f))
            return _checked(S, F, N, a, 1, "trivial")
        return None
    zero = (0,) * len(next(iter(F)))
    shortcut = _checked(S, F, N, zero, 1, "shortcut")
    if shortcut is not None:
        return shortcut
    if cfg.pipeline:
        got = _pipeline(S, F, N, cfg)
        if got is not None and 1 <= got[1] <= N:
            res = _checked(S, F, N, *got, "reduction")
            if res is not None:
                return res
    got = _scan_first(S, F, N)
    if got is None:
        return None
    res = _checked(S, F, N, *got, "scan")
    if res is None:
        raise AssertionError("scan produced an invalid witness")
    return res


def _checked(S, F, N, a, c, route):
    res = ConfigurationResult(tuple(a), int(c), _witness(a, c, F), route)
    return res if res.verify(S, N) else None


def find_ap(S: Iterable, m: int, N: int, cfg: ConfigConfig = ConfigConfig()):
    """(a, c, progression) with a, a+c, ..., a+(m-1)c in S, or None."""
    if m < 1:
        raise ValidationError("length must be at least 1")
    S1 = {(int(s),) if np.isscalar(s) else tuple(s) for s in S}
    res = find_configuration(S1, [(i,) for i in range(m)], N, cfg)
    if res is None:
        return None
    a, c = res.a[0], res.c
    return a, c, tuple(a + i * c for i in range(m))


def brute_force_oracle(S: Iterable, F: Iterable, N: int, budget: int = DEFAULT_BUDGET) -> list:
    """Every (a, c), c in [1, N], with a + cF inside S (sorted)."""
    S, F = _points(S), sorted(_points(F))
    if not F:
        raise ValidationError("empty pattern")
    r = len(F[0])
    out = []
    work = 0
    for c in range(1, N + 1):
        ranges = [range(-c * min(f[i] for f in F), N - c * max(f[i] for f in F)) for i in range(r)]
        work += int(np.prod([len(x) for x in ranges])) * len(F)
        if work > budget:
            raise BudgetExceeded("oracle scan exceeds the budget")
        for a in itertools.product(*ranges):
            if all(tuple(ai + c * fi for ai, fi in zip(a, f)) in S for f in F):
                out.append((tuple(a), c))
    return sorted(out)
