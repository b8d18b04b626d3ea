"""Recoloring small edges by their color traces against sampled vertices."""

from __future__ import annotations

import itertools
import math
from math import comb
from typing import Sequence

import numpy as np

from .model import Hypergraph, PartitionwiseMap, ValidationError, _intern_rows, index_sets
from .rng import derive_rng


def sample_map(G: Hypergraph, m: int, seed: int, label="sample_map") -> PartitionwiseMap:
    """``m`` independent uniform vertices from every part (with replacement)."""
    if m < 0:
        raise ValidationError("sample size must be nonnegative")
    rng = derive_rng(seed, label, m)
    return PartitionwiseMap(tuple(tuple(rng.integers(0, n, size=m)) for n in G.parts))


def union_maps(phi: PartitionwiseMap, phi2: PartitionwiseMap) -> PartitionwiseMap:
    """Disjoint union: the domain of ``phi2`` is relabelled after ``phi``'s."""
    if phi.r != phi2.r:
        raise ValidationError("maps have different numbers of parts")
    return PartitionwiseMap(tuple(a + b for a, b in zip(phi.images, phi2.images)))


def trace_components(r: int, I: tuple, s: int) -> list[tuple]:
    """Index sets J disjoint from I with |J| <= s + 1 - |I|, ordered by size
    then lexicographically.  The empty J comes first."""
    rest = [i for i in range(r) if i not in I]
    out = []
    for size in range(0, s + 2 - len(I)):
        out.extend(itertools.combinations(rest, size))
    return out


def _trace_block(G: Hypergraph, I: tuple, J: tuple, phi: PartitionwiseMap) -> np.ndarray:
    """Colors G(e + f) for every e in Omega_I (rows) and every tuple f of
    sample positions over J (columns, lexicographic)."""
    union = tuple(sorted(I + J))
    sub = G.coloring[union]
    for j in J:
        sub = np.take(sub, np.asarray(phi.images[j], dtype=np.int64), axis=union.index(j))
    order = [union.index(i) for i in I] + [union.index(j) for j in J]
    sub = np.transpose(sub, order)
    n_e = int(np.prod(G.shape(I)))
    return sub.reshape(n_e, -1)


def s_regularize(G: Hypergraph, s: int, phi: PartitionwiseMap) -> Hypergraph:
    """G /^s phi: every edge of size <= s is recolored by its trace."""
    if not 1 <= s < G.k:
        raise ValidationError(f"s must lie in [1, k-1] = [1, {G.k - 1}], got {s}")
    phi.validate(G.parts)
    colors = dict(G.colors)
    coloring = dict(G.coloring)
    for I in index_sets(G.r, range(1, s + 1)):
        blocks = [_trace_block(G, I, J, phi) for J in trace_components(G.r, I, s)]
        stacked = np.concatenate(blocks, axis=1)
        codes, rows = _intern_rows(stacked)
        colors[I] = tuple(tuple(int(x) for x in row) for row in rows)
        coloring[I] = codes.reshape(G.shape(I))
    return Hypergraph(G.r, G.k, G.parts, colors, coloring)


def regularize(G: Hypergraph, maps: Sequence[PartitionwiseMap]) -> Hypergraph:
    """G / (phi_1, ..., phi_{k-1}), applying /^{k-1} phi_{k-1} first."""
    maps = list(maps)
    if len(maps) != G.k - 1:
        raise ValidationError(f"need k-1 = {G.k - 1} maps, got {len(maps)}")
    out = G
    for s in range(G.k - 1, 0, -1):
        out = s_regularize(out, s, maps[s - 1])
    return out


def sample_map_vector(G: Hypergraph, sizes: Sequence[int], seed: int) -> list[PartitionwiseMap]:
    return [sample_map(G, m, seed, label=("map_vector", i)) for i, m in enumerate(sizes, 1)]


def color_bound(b: Sequence[int], m: int, i: int, r: int) -> int:
    """B_i(b, m) = prod_{j=0}^{k-i} b_{i+j}^{C(r-i, j) m^j}, exact."""
    k = len(b)
    if not 1 <= i <= k:
        raise ValidationError(f"i must lie in [1, {k}]")
    out = 1
    for j in range(0, k - i + 1):
        out *= int(b[i + j - 1]) ** (comb(r - i, j) * m ** j)
    return out


def color_bound_bits(b: Sequence[int], m: int, i: int, r: int) -> float:
    """log2 of B_i(b, m) without materializing it."""
    k = len(b)
    total = 0.0
    for j in range(0, k - i + 1):
        lb = math.log2(max(int(b[i + j - 1]), 1))
        if lb == 0:
            continue
        exponent = comb(r - i, j) * m ** j
        if exponent.bit_length() > 1000:
            return math.inf
        total += exponent * lb
    return total


def class_partition(G: Hypergraph, I) -> np.ndarray:
    """Color ids of index ``I`` flattened in lexicographic edge order."""
    return G.coloring[tuple(I)].reshape(-1)


def refines(fine: np.ndarray, coarse: np.ndarray) -> bool:
    """True when equal labels in ``fine`` imply equal labels in ``coarse``
    (exhaustive scan over all pairs)."""
    fine = np.asarray(fine).reshape(-1)
    coarse = np.asarray(coarse).reshape(-1)
    same_fine = fine[:, None] == fine[None, :]
    same_coarse = coarse[:, None] == coarse[None, :]
    return bool(np.all(~same_fine | same_coarse))


def same_partition(a: np.ndarray, b: np.ndarray) -> bool:
    return refines(a, b) and refines(b, a)


def count_maps(G: Hypergraph, a: int) -> int:
    """|Phi(a)|: number of partitionwise maps with ``a`` samples per part."""
    return math.prod(n ** a for n in G.parts)


def enumerate_maps(G: Hypergraph, a: int):
    """Every map of Phi(a), lexicographic in (part, position)."""
    per_part = [itertools.product(range(n), repeat=a) for n in G.parts]
    for images in itertools.product(*[list(p) for p in per_part]):
        yield PartitionwiseMap(images)


def refined_frame_codes(G: Hypergraph, I, phi: PartitionwiseMap) -> np.ndarray:
    """Labels of the frame classes of Omega_I in G /^{k-1} phi, i.e. the
    relation e ~ e' iff they agree on every proper restriction after
    regularization."""
    I = tuple(I)
    if G.k < 2:
        return G.frame_codes(I)
    return s_regularize(G, G.k - 1, phi).frame_codes(I)
