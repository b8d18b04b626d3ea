"""Colored k-bounded r-partite hypergraphs, simplicial complexes and
partitionwise maps.

Colorings are stored densely: for every index set ``I`` (a sorted tuple of
part ids) the hypergraph keeps an integer array of shape
``(parts[i] for i in I)`` whose entries are color ids into the table
``colors[I]``.  Color ids are local to their index set.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterator, Mapping, Sequence

import numpy as np

from .rng import derive_rng

INVISIBLE = -1

IndexSet = tuple  # sorted tuple of part ids


class ValidationError(ValueError):
    """Raised when an object violates its structural invariants."""


def index_sets(r: int, sizes: Sequence[int] | int) -> list[tuple]:
    """All index sets of the given size(s), ordered by size then lexicographically."""
    if isinstance(sizes, int):
        sizes = [sizes]
    out = []
    for s in sorted(sizes):
        out.extend(itertools.combinations(range(r), s))
    return out


def subsets(index: Sequence[int], proper: bool = False) -> list[tuple]:
    """Nonempty subsets of ``index`` in canonical order (by size, then lex)."""
    index = tuple(index)
    top = len(index) - 1 if proper else len(index)
    out = []
    for s in range(1, top + 1):
        out.extend(itertools.combinations(index, s))
    return out


def _check_index(index, r: int, k: int) -> tuple:
    index = tuple(int(i) for i in index)
    if not index:
        raise ValidationError("index set must be nonempty")
    if any(b <= a for a, b in zip(index, index[1:])):
        raise ValidationError(f"index set {index} is not strictly increasing")
    if index[0] < 0 or index[-1] >= r:
        raise ValidationError(f"index set {index} out of range for r={r}")
    if len(index) > k:
        raise ValidationError(f"index set {index} larger than k={k}")
    return index


@dataclass(frozen=True)
class Edge:
    """One vertex per member of ``index``."""

    index: tuple
    vertices: tuple

    def __post_init__(self):
        if len(self.index) != len(self.vertices):
            raise ValidationError("edge needs exactly one vertex per index")

    def restrict(self, J: Sequence[int]) -> "Edge":
        return restrict_edge(self, J)


def restrict_edge(e: Edge, J: Sequence[int]) -> Edge:
    """Keep exactly the vertices of ``e`` whose parts lie in ``J``."""
    J = tuple(sorted(J))
    if not J:
        raise ValidationError("cannot restrict to the empty index set")
    pos = {i: n for n, i in enumerate(e.index)}
    missing = [j for j in J if j not in pos]
    if missing:
        raise ValidationError(f"{J} is not contained in {e.index}")
    return Edge(J, tuple(e.vertices[pos[j]] for j in J))


@dataclass(frozen=True)
class TotalColor:
    """Colors of every restriction ``e|_J``, ``J`` running over the nonempty
    subsets of ``index`` in canonical order.  The last entry is the color of
    the edge itself; everything before it is the frame color."""

    index: tuple
    entries: tuple

    def __post_init__(self):
        if len(self.entries) != 2 ** len(self.index) - 1:
            raise ValidationError(
                f"total color over {self.index} needs {2 ** len(self.index) - 1} entries"
            )

    @property
    def top(self):
        return self.entries[-1]

    @property
    def frame(self) -> tuple:
        return self.entries[:-1]

    def as_dict(self) -> dict:
        return dict(zip(subsets(self.index), self.entries))

    def restrict(self, J: Sequence[int]) -> "TotalColor":
        J = tuple(sorted(J))
        lookup = self.as_dict()
        return TotalColor(J, tuple(lookup[sub] for sub in subsets(J)))

    def __str__(self):
        body = ",".join(
            f"{''.join(map(str, J))}:{c}" for J, c in zip(subsets(self.index), self.entries)
        )
        return f"<{body}>"


class Hypergraph:
    """An immutable k-bounded colored r-partite hypergraph.

    ``colors[I]`` is the color table of index set ``I`` and
    ``coloring[I]`` a read-only integer array over ``Omega_I``.
    """

    def __init__(self, r: int, k: int, parts: Sequence[int],
                 colors: Mapping[tuple, Sequence[Hashable]],
                 coloring: Mapping[tuple, np.ndarray]):
        self.r = int(r)
        self.k = int(k)
        self.parts = tuple(int(n) for n in parts)
        self.colors = {tuple(I): tuple(c) for I, c in colors.items()}
        self.coloring = {}
        for I, arr in coloring.items():
            arr = np.array(arr, dtype=np.int64, copy=True)
            arr.setflags(write=False)
            self.coloring[tuple(I)] = arr
        self._cache: dict = {}

    def index_sets(self, sizes=None) -> list[tuple]:
        if sizes is None:
            sizes = range(1, self.k + 1)
        return index_sets(self.r, sizes)

    def shape(self, I: Sequence[int]) -> tuple:
        return tuple(self.parts[i] for i in I)

    def num_colors(self, I: Sequence[int]) -> int:
        return len(self.colors[tuple(I)])

    def max_colors(self, size: int) -> int:
        """c_i(G): the largest color table among index sets of this size."""
        return max(len(self.colors[I]) for I in self.index_sets([size]))

    @property
    def b(self) -> tuple:
        return tuple(self.max_colors(s) for s in range(1, self.k + 1))

    def color(self, e: Edge) -> int:
        return int(self.coloring[tuple(e.index)][tuple(e.vertices)])

    def color_name(self, I, cid):
        return self.colors[tuple(I)][cid]

    def __eq__(self, other):
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return (
            (self.r, self.k, self.parts) == (other.r, other.k, other.parts)
            and self.colors == other.colors
            and self.coloring.keys() == other.coloring.keys()
            and all(np.array_equal(self.coloring[I], other.coloring[I]) for I in self.coloring)
        )

    def __hash__(self):
        return hash((self.r, self.k, self.parts))

    def __repr__(self):
        return f"Hypergraph(r={self.r}, k={self.k}, parts={self.parts}, b={self.b})"

    # -- total colors -------------------------------------------------------

    def stacked_colors(self, I: Sequence[int], Js: Sequence[tuple]) -> np.ndarray:
        """Array of shape ``(|Omega_I|, len(Js))``: column ``n`` holds the
        color of ``e|_{Js[n]}`` for every edge ``e`` in lexicographic order."""
        I = tuple(I)
        shape = self.shape(I)
        cols = []
        for J in Js:
            arr = self.coloring[J]
            view = arr.reshape(tuple(self.parts[i] if i in J else 1 for i in I))
            cols.append(np.broadcast_to(view, shape).reshape(-1))
        if not cols:
            return np.zeros((int(np.prod(shape)), 0), dtype=np.int64)
        return np.stack(cols, axis=1)

    def total_color_table(self, I: Sequence[int]):
        """Intern the total colors of index ``I``.

        Returns ``(codes, tcs)`` where ``codes`` is an int array over the
        flattened ``Omega_I`` and ``tcs[code]`` the matching TotalColor.
        Codes follow first appearance in lexicographic edge order.
        """
        I = tuple(I)
        key = ("tc", I)
        if key not in self._cache:
            stacked = self.stacked_colors(I, subsets(I))
            codes, rows = _intern_rows(stacked)
            tcs = [TotalColor(I, tuple(int(x) for x in row)) for row in rows]
            self._cache[key] = (codes, tcs)
        return self._cache[key]

    def frame_codes(self, I: Sequence[int]) -> np.ndarray:
        """Interned frame colors (proper restrictions) over the flattened Omega_I."""
        I = tuple(I)
        key = ("frame", I)
        if key not in self._cache:
            stacked = self.stacked_colors(I, subsets(I, proper=True))
            codes, _ = _intern_rows(stacked)
            self._cache[key] = codes
        return self._cache[key]

    @cached_property
    def total_colors(self) -> list[TotalColor]:
        """TC(G): every realized total color, index sets in canonical order."""
        out = []
        for I in self.index_sets():
            out.extend(self.total_color_table(I)[1])
        return out


def _intern_rows(stacked: np.ndarray):
    """Label equal rows by first appearance.  Returns (labels, unique rows)."""
    n = stacked.shape[0]
    if stacked.shape[1] == 0:
        return np.zeros(n, dtype=np.int64), [()]
    uniq, first, inverse = np.unique(stacked, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    relabel = np.empty(len(order), dtype=np.int64)
    relabel[order] = np.arange(len(order))
    labels = relabel[inverse.reshape(-1)]
    return labels, [tuple(uniq[j]) for j in order]


def total_color(G: Hypergraph, e: Edge) -> TotalColor:
    """G<e>: colors of all nonempty restrictions of ``e``."""
    return TotalColor(tuple(e.index),
                      tuple(G.color(restrict_edge(e, J)) for J in subsets(e.index)))


def enumerate_edges(G: Hypergraph, I: Sequence[int]) -> Iterator[Edge]:
    I = tuple(I)
    if len(I) > G.k:
        raise ValidationError(f"|I|={len(I)} exceeds k={G.k}")
    for verts in itertools.product(*(range(G.parts[i]) for i in I)):
        yield Edge(I, verts)


def build_hypergraph(r: int, k: int, parts: Sequence[int],
                     colors: Mapping, coloring: Mapping) -> Hypergraph:
    """Validate raw data and build a Hypergraph.

    ``colors`` maps each index set of size 1..k to its color table.
    ``coloring`` maps each index set to either a flat row-major sequence of
    color ids or a dict from vertex tuples to color ids (or names).
    """
    r, k = int(r), int(k)
    if k < 1:
        raise ValidationError("k must be at least 1")
    if k > r:
        raise ValidationError(f"k exceeds r (k={k}, r={r})")
    parts = tuple(int(n) for n in parts)
    if len(parts) != r:
        raise ValidationError(f"expected {r} part sizes, got {len(parts)}")
    if any(n < 1 for n in parts):
        raise ValidationError("all part sizes must be positive")

    norm_colors = {}
    for I, table in colors.items():
        I = _check_index(I, r, k)
        table = tuple(table)
        if not table:
            raise ValidationError(f"color table of {I} is empty")
        if len(set(table)) != len(table):
            raise ValidationError(f"color table of {I} has duplicate names")
        norm_colors[I] = table
    b = {}
    for I in index_sets(r, range(1, k + 1)):
        if I not in norm_colors:
            raise ValidationError(f"missing color table for index set {I}")
        n = len(norm_colors[I])
        if b.setdefault(len(I), n) != n:
            raise ValidationError(
                f"b-vector inconsistency: index sets of size {len(I)} have "
                f"{b[len(I)]} and {n} colors"
            )

    norm_coloring = {}
    for I, data in coloring.items():
        norm_coloring[_check_index(I, r, k)] = data
    arrays = {}
    for I in index_sets(r, range(1, k + 1)):
        table = norm_colors[I]
        shape = tuple(parts[i] for i in I)
        if I not in norm_coloring:
            raise ValidationError(f"incomplete coloring: no coloring for index set {I}")
        data = norm_coloring[I]
        arr = np.full(shape, -1, dtype=np.int64)
        if isinstance(data, Mapping):
            name_to_id = {c: n for n, c in enumerate(table)}
            for verts, c in data.items():
                verts = (verts,) if isinstance(verts, int) else tuple(verts)
                if len(verts) != len(I) or any(
                        not 0 <= v < n for v, n in zip(verts, shape)):
                    raise ValidationError(f"bad vertex tuple {verts} for index set {I}")
                if arr[verts] != -1:
                    raise ValidationError(f"duplicate color assignment for {I} tuple {verts}")
                cid = name_to_id.get(c, c)
                if not isinstance(cid, (int, np.integer)) or not 0 <= cid < len(table):
                    raise ValidationError(f"unknown color {c!r} for index set {I}")
                arr[verts] = cid
        else:
            flat = [INVISIBLE if c is None else c for c in np.asarray(data, dtype=object).reshape(-1)]
            flat = np.asarray(flat, dtype=np.int64)
            if flat.size < arr.size:
                first = tuple(int(x) for x in np.unravel_index(flat.size, shape))
                raise ValidationError(
                    f"incomplete coloring: index set {I} tuple {first} uncolored "
                    f"({flat.size} of {arr.size} entries given)"
                )
            if flat.size > arr.size:
                raise ValidationError(
                    f"index set {I} has {flat.size} entries, expected {arr.size}")
            if flat.size and flat.min() < 0:
                first = tuple(int(x) for x in np.unravel_index(int(np.argmin(flat >= 0)), shape))
                raise ValidationError(f"incomplete coloring: index set {I} tuple {first} uncolored")
            arr = flat.reshape(shape)
            if arr.size and (arr.min() < 0 or arr.max() >= len(table)):
                raise ValidationError(f"color id out of range for index set {I}")
        missing = np.argwhere(arr < 0)
        if len(missing):
            raise ValidationError(
                f"incomplete coloring: index set {I} tuple {tuple(int(x) for x in missing[0])} uncolored"
            )
        arrays[I] = arr
    return Hypergraph(r, k, parts, norm_colors, arrays)


def random_hypergraph(r: int, k: int, b: Sequence[int], parts: Sequence[int],
                      seed: int) -> Hypergraph:
    """Every edge colored independently and uniformly from its table."""
    if len(b) != k:
        raise ValidationError(f"b must have k={k} entries")
    rng = derive_rng(seed, "random_hypergraph")
    colors, coloring = {}, {}
    for I in index_sets(r, range(1, k + 1)):
        nb = int(b[len(I) - 1])
        colors[I] = tuple(str(c) for c in range(nb))
        shape = tuple(parts[i] for i in I)
        coloring[I] = rng.integers(0, nb, size=shape).reshape(-1)
    return build_hypergraph(r, k, parts, colors, coloring)


def constant_hypergraph(r: int, k: int, parts: Sequence[int],
                        b: Sequence[int] | None = None) -> Hypergraph:
    """Every edge gets color 0."""
    b = b or (1,) * k
    colors = {I: tuple(str(c) for c in range(b[len(I) - 1])) for I in index_sets(r, range(1, k + 1))}
    coloring = {I: np.zeros(int(np.prod([parts[i] for i in I])), dtype=np.int64) for I in colors}
    return build_hypergraph(r, k, parts, colors, coloring)


# -- partitionwise maps -----------------------------------------------------

@dataclass(frozen=True)
class PartitionwiseMap:
    """``images[i]`` is the sequence of sampled vertices of part ``i``.

    The domain of part ``i`` is labelled ``(i, 1..len(images[i]))``;
    repeated vertices are allowed.
    """

    images: tuple

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(tuple(int(v) for v in im) for im in self.images))

    @property
    def r(self) -> int:
        return len(self.images)

    @property
    def sizes(self) -> tuple:
        return tuple(len(im) for im in self.images)

    def validate(self, parts: Sequence[int]) -> None:
        if len(parts) != self.r:
            raise ValidationError("map and hypergraph disagree on r")
        for i, (im, n) in enumerate(zip(self.images, parts)):
            if any(not 0 <= v < n for v in im):
                raise ValidationError(f"map sends a vertex of part {i} outside 0..{n - 1}")

    @classmethod
    def empty(cls, r: int) -> "PartitionwiseMap":
        return cls(tuple(() for _ in range(r)))


# -- simplicial complexes ---------------------------------------------------

class SimplicialComplex:
    """A small colored pattern with ``h`` vertices per part.

    ``coloring[I]`` is an int array of shape ``(h,) * |I|``; ``INVISIBLE``
    (-1) marks invisible edges, other values are pattern color ids.
    ``binding[I]`` sends pattern color ids to host color ids; when it is
    ``None`` pattern ids are host ids.
    """

    def __init__(self, r: int, s: int, h: int, coloring: Mapping[tuple, np.ndarray],
                 binding: Mapping[tuple, Sequence[int]] | None = None):
        self.r, self.s, self.h = int(r), int(s), int(h)
        self.coloring = {}
        for I in index_sets(self.r, range(1, self.s + 1)):
            arr = coloring.get(I)
            if arr is None:
                arr = np.full((self.h,) * len(I), INVISIBLE, dtype=np.int64)
            arr = np.array(arr, dtype=np.int64, copy=True).reshape((self.h,) * len(I))
            arr.setflags(write=False)
            self.coloring[I] = arr
        self.binding = None if binding is None else {tuple(I): tuple(v) for I, v in binding.items()}

    def __repr__(self):
        return f"SimplicialComplex(r={self.r}, s={self.s}, h={self.h}, visible={len(self.visible_edges)})"

    def host_color(self, I, verts) -> int:
        c = int(self.coloring[tuple(I)][tuple(verts)])
        if c == INVISIBLE or self.binding is None:
            return c
        return self.binding[tuple(I)][c]

    @cached_property
    def visible_edges(self) -> list[Edge]:
        """V(S) in canonical order (index sets by size/lex, tuples lex)."""
        out = []
        for I, arr in self.coloring.items():
            for verts in itertools.product(range(self.h), repeat=len(I)):
                if arr[verts] != INVISIBLE:
                    out.append(Edge(I, verts))
        out.sort(key=lambda e: (len(e.index), e.index, e.vertices))
        return out

    def visible(self, size=None) -> list[Edge]:
        if size is None:
            return list(self.visible_edges)
        return [e for e in self.visible_edges if len(e.index) == size]

    def visible_below(self, size: int) -> list[Edge]:
        """V_(size)(S): visible edges of size at most ``size``."""
        return [e for e in self.visible_edges if len(e.index) <= size]

    def edge_color(self, e: Edge) -> int:
        return self.host_color(e.index, e.vertices)

    def total_color(self, e: Edge) -> TotalColor:
        """S<e> in host color ids (every restriction of a visible edge is visible
        once the complex is valid)."""
        return TotalColor(tuple(e.index), tuple(
            self.host_color(J, restrict_edge(e, J).vertices) for J in subsets(e.index)))

    def with_coloring(self, updates: Mapping[tuple, np.ndarray]) -> "SimplicialComplex":
        coloring = dict(self.coloring)
        coloring.update(updates)
        return SimplicialComplex(self.r, self.s, self.h, coloring, self.binding)

    def hidden(self, edges: Sequence[Edge]) -> "SimplicialComplex":
        """Copy with the given edges made invisible."""
        coloring = {I: arr.copy() for I, arr in self.coloring.items()}
        for e in edges:
            coloring[e.index][e.vertices] = INVISIBLE
        return SimplicialComplex(self.r, self.s, self.h, coloring, self.binding)

    def __eq__(self, other):
        if not isinstance(other, SimplicialComplex):
            return NotImplemented
        return ((self.r, self.s, self.h) == (other.r, other.s, other.h)
                and self.binding == other.binding
                and all(np.array_equal(self.coloring[I], other.coloring[I]) for I in self.coloring))

    def __hash__(self):
        return hash((self.r, self.s, self.h, tuple(arr.tobytes() for arr in self.coloring.values())))


@dataclass
class ComplexReport:
    valid: bool
    closure_violations: list = field(default_factory=list)
    binding_violations: list = field(default_factory=list)
    visible: dict = field(default_factory=dict)


def validate_complex(S: SimplicialComplex, G: Hypergraph) -> ComplexReport:
    """Check upward-closed invisibility and the injective color binding.

    Violations are collected rather than raised.  ``closure_violations``
    holds ``(invisible_edge, visible_superset_edge)`` pairs.
    """
    closure, binding = [], []
    if S.r != G.r:
        binding.append(("r", S.r, G.r))
    if S.s > G.k:
        binding.append(("s", S.s, G.k))
    for I, arr in S.coloring.items():
        for verts in itertools.product(range(S.h), repeat=len(I)):
            if arr[verts] == INVISIBLE:
                continue
            e = Edge(I, verts)
            for J in subsets(I, proper=True):
                sub = restrict_edge(e, J)
                if S.coloring[J][sub.vertices] == INVISIBLE:
                    closure.append((sub, e))
    for I, arr in S.coloring.items():
        if I not in G.colors:
            continue
        used = sorted({int(c) for c in arr.reshape(-1) if c != INVISIBLE})
        ncol = len(G.colors[I])
        if S.binding is None:
            targets = {c: c for c in used}
        else:
            table = S.binding.get(I, ())
            targets = {c: (table[c] if c < len(table) else None) for c in used}
        seen = {}
        for c, t in targets.items():
            if t is None or not 0 <= t < ncol:
                binding.append((I, c, t))
            elif t in seen:
                binding.append((I, (seen[t], c), t))
            else:
                seen[t] = c
    visible = {}
    for e in S.visible_edges:
        visible.setdefault(e.index, []).append(e)
    return ComplexReport(not closure and not binding, closure, binding, visible)


def complex_from_edges(r: int, s: int, h: int, edges: Mapping[Edge, int] | Sequence) -> SimplicialComplex:
    """Complex whose visible edges are exactly the given ``{Edge: host color}``."""
    coloring = {I: np.full((h,) * len(I), INVISIBLE, dtype=np.int64)
                for I in index_sets(r, range(1, s + 1))}
    items = edges.items() if isinstance(edges, Mapping) else edges
    for e, c in items:
        coloring[tuple(e.index)][tuple(e.vertices)] = c
    return SimplicialComplex(r, s, h, coloring)


def random_complex(G: Hypergraph, h: int, seed: int, p_visible: float = 0.7,
                   s: int | None = None) -> SimplicialComplex:
    """A random valid complex: an edge may be visible only if all of its
    proper restrictions are; visible edges get uniform host colors."""
    s = G.k if s is None else s
    rng = derive_rng(seed, "random_complex")
    coloring = {}
    for I in index_sets(G.r, range(1, s + 1)):
        arr = np.full((h,) * len(I), INVISIBLE, dtype=np.int64)
        ncol = len(G.colors[I])
        for verts in itertools.product(range(h), repeat=len(I)):
            e = Edge(I, verts)
            below_ok = all(coloring[J][restrict_edge(e, J).vertices] != INVISIBLE
                           for J in subsets(I, proper=True))
            if below_ok and rng.random() < p_visible:
                arr[verts] = rng.integers(0, ncol)
        coloring[I] = arr
    return SimplicialComplex(G.r, s, h, coloring)


def embedded_complex(G: Hypergraph, h: int, seed: int, p_visible: float = 0.8,
                     s: int | None = None) -> SimplicialComplex:
    """A random valid complex colored by the image of a random map, so at
    least that map embeds it."""
    s = G.k if s is None else s
    rng = derive_rng(seed, "embedded_complex")
    images = [rng.integers(0, n, size=h) for n in G.parts]
    coloring = {}
    for I in index_sets(G.r, range(1, s + 1)):
        arr = np.full((h,) * len(I), INVISIBLE, dtype=np.int64)
        for verts in itertools.product(range(h), repeat=len(I)):
            e = Edge(I, verts)
            below_ok = all(coloring[J][restrict_edge(e, J).vertices] != INVISIBLE
                           for J in subsets(I, proper=True))
            if below_ok and rng.random() < p_visible:
                arr[verts] = G.coloring[I][tuple(images[i][v] for i, v in zip(I, verts))]
        coloring[I] = arr
    return SimplicialComplex(G.r, s, h, coloring)
