"""Serialization of hypergraphs, complexes, point sets and reports."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from . import __version__
from .model import Edge, Hypergraph, SimplicialComplex, TotalColor, ValidationError, build_hypergraph

HYPERGRAPH_SCHEMA = {
    "type": "object",
    "required": ["r", "k", "parts", "colors", "coloring"],
    "properties": {
        "r": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "parts": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "colors": {"type": "object", "additionalProperties": {"type": "array", "minItems": 1}},
        "coloring": {"type": "object", "additionalProperties": {"type": "array"}},
    },
}


def index_key(I) -> str:
    return ",".join(str(i) for i in I)


def parse_index(key: str) -> tuple:
    try:
        return tuple(int(x) for x in key.split(","))
    except ValueError:
        raise ValidationError(f"bad index set key {key!r}") from None


# -- values -----------------------------------------------------------------

def to_jsonable(x: Any):
    """Rationals become "p/q" strings; tuples become lists."""
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, bool) or x is None or isinstance(x, (str, int)):
        return x
    if isinstance(x, float):
        return x if np.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return [to_jsonable(v) for v in x.tolist()]
    if isinstance(x, Edge):
        return {"index": list(x.index), "vertices": list(x.vertices)}
    if isinstance(x, TotalColor):
        return {"index": list(x.index), "entries": list(x.entries)}
    if isinstance(x, dict):
        return {(index_key(k) if isinstance(k, tuple) else str(k)): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [to_jsonable(v) for v in items]
    if hasattr(x, "to_dict"):
        return to_jsonable(x.to_dict())
    raise TypeError(f"cannot serialize {type(x).__name__}")


def parse_fraction(s) -> Fraction:
    return Fraction(s)


# -- hypergraphs --------------------------------------------------------------

def hypergraph_to_dict(G: Hypergraph) -> dict:
    return {
        "r": G.r, "k": G.k, "parts": list(G.parts),
        "colors": {index_key(I): [to_jsonable(c) if not isinstance(c, tuple) else str(c)
                                  for c in G.colors[I]] for I in G.index_sets()},
        "coloring": {index_key(I): G.coloring[I].reshape(-1).tolist() for I in G.index_sets()},
    }


def hypergraph_from_dict(data: dict) -> Hypergraph:
    try:
        jsonschema.validate(data, HYPERGRAPH_SCHEMA)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ValidationError(f"schema violation at {where}: {err.message}") from None
    colors = {parse_index(k): v for k, v in data["colors"].items()}
    coloring = {parse_index(k): v for k, v in data["coloring"].items()}
    return build_hypergraph(data["r"], data["k"], data["parts"], colors, coloring)


def load_hypergraph(path) -> Hypergraph:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    try:
        return hypergraph_from_dict(data)
    except ValidationError as err:
        raise ValidationError(f"{path}: {err}") from None


def save_hypergraph(G: Hypergraph, path) -> None:
    Path(path).write_text(json.dumps(hypergraph_to_dict(G), sort_keys=True) + "\n")


def hypergraph_digest(G: Hypergraph) -> str:
    return hashlib.sha256(json.dumps(hypergraph_to_dict(G), sort_keys=True).encode()).hexdigest()


# -- complexes and patterns ---------------------------------------------------

def complex_to_dict(S: SimplicialComplex) -> dict:
    return {
        "r": S.r, "s": S.s, "h": S.h,
        "coloring": {index_key(I): a.reshape(-1).tolist() for I, a in S.coloring.items()},
    }


def complex_from_dict(data: dict) -> SimplicialComplex:
    try:
        r, s, h = int(data["r"]), int(data["s"]), int(data["h"])
        coloring = {parse_index(k): np.asarray(v, dtype=np.int64) for k, v in data["coloring"].items()}
    except (KeyError, TypeError, ValueError) as err:
        raise ValidationError(f"bad complex description: {err}") from None
    for I, arr in coloring.items():
        if arr.size != h ** len(I):
            raise ValidationError(f"complex index set {I} needs {h ** len(I)} entries")
    return SimplicialComplex(r, s, h, coloring)


def pattern_from_dict(data: dict, G: Hypergraph):
    """``{"h": 1, "edges": [{"index": [0, 1], "vertices": [0, 0], "color": "red"}]}``;
    colors may be names from G's tables or ids."""
    from .removal import UniformPattern
    edges = {}
    for item in data["edges"]:
        I = tuple(item["index"])
        c = item["color"]
        if isinstance(c, str):
            table = list(G.colors[I])
            if c not in table:
                raise ValidationError(f"unknown color {c!r} for {I}")
            c = table.index(c)
        edges[Edge(I, tuple(item.get("vertices", [0] * len(I))))] = int(c)
    return UniformPattern(G.r, G.k, int(data.get("h", 1)), edges)


# -- point sets -------------------------------------------------------------

def load_points(path) -> list[tuple]:
    """A JSON array of integers or integer lists, or one tuple per line
    (whitespace or comma separated)."""
    text = Path(path).read_text().strip()
    if text.startswith("["):
        data = json.loads(text)
        return [(int(p),) if isinstance(p, int) else tuple(int(x) for x in p) for p in data]
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.append(tuple(int(x) for x in line.replace(",", " ").split()))
        except ValueError:
            raise ValidationError(f"{path}: line {n}: not an integer tuple: {line!r}") from None
    return out


# -- reports ----------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    params: dict
    seeds: dict = field(default_factory=dict)
    digests: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(data["command"], data["params"], data.get("seeds", {}),
                   data.get("digests", {}), data.get("version", __version__))


@dataclass
class Report:
    manifest: RunManifest
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    columns: Sequence[str] | None = None

    def to_dict(self) -> dict:
        return {"manifest": self.manifest.to_dict(), "summary": to_jsonable(self.summary),
                "rows": [to_jsonable(r) for r in self.rows]}


def report_schema() -> dict:
    return json.loads(resources.files("hyperreg").joinpath("data/report.schema.json").read_text())


def render_report(report: Report, fmt: str = "json") -> str:
    if fmt == "json":
        data = report.to_dict()
        jsonschema.validate(data, report_schema())
        return json.dumps(data, sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        rows = [to_jsonable(r) for r in report.rows]
        cols = list(report.columns) if report.columns else sorted({k for r in rows for k in r})
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(cols)
        for r in rows:
            writer.writerow([_cell(r.get(c)) for c in cols])
        return buf.getvalue()
    raise ValidationError(f"unknown format {fmt!r}")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def emit_report(report: Report, fmt: str = "json", path=None) -> str:
    """Render deterministically; write to ``path`` when given."""
    text = render_report(report, fmt)
    if path is not None:
        Path(path).write_text(text)
    return text
