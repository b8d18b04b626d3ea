"""Command-line entry point.

Every command renders a report (JSON or CSV) whose manifest records the
command, its normalized arguments, seeds and input digests, so
``hyperreg replay MANIFEST`` reproduces the same bytes."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, plotting
from .applications import (ConfigConfig, SimplexSet, count_simplex_corners, find_ap,
                           find_configuration, find_simplex_corner)
from .density import (DEFAULT_BUDGET, BudgetExceeded, EstimatorConfig, embed_probability_exact,
                      embed_probability_mc, relative_density)
from .io import (Report, RunManifest, complex_from_dict, emit_report, hypergraph_digest,
                 load_hypergraph, load_points, pattern_from_dict, save_hypergraph, index_key)
from .lemmas import load_corpus, run_corpus
from .model import ValidationError, random_hypergraph
from .regularity import (EtaConfig, RegConfig, ScheduleRefused, exhaustive_family,
                         faithful_error_function, faithful_schedule, reg_upper_bound,
                         sampled_family, verify_error_function)
from .regularize import color_bound, regularize, sample_map_vector
from .rng import derive_rng
from .removal import RemovalConfig, removal_decision

# flags that only choose where output goes; left out of manifests
OUTPUT_FLAGS = {"--out", "--figures", "--manifest", "--graph-out"}

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_ASSERT = 0, 1, 2, 3


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational like 1/2, got {text!r}")


def point_list(text: str) -> list[tuple]:
    """``"0,0; 1,0; 0,1"`` -> [(0, 0), (1, 0), (0, 1)]."""
    try:
        return [tuple(int(x) for x in part.split(",")) for part in text.split(";") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad point list {text!r}")


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- commands -----------------------------------------------------------------

def cmd_gen(args, ctx):
    G = random_hypergraph(args.r, args.k, args.b, args.parts, args.seed)
    if args.graph_out:
        save_hypergraph(G, args.graph_out)
    rows = [{"index": index_key(I), "colors": G.num_colors(I), "edges": int(G.coloring[I].size)}
            for I in G.index_sets()]
    ctx.seeds["random_hypergraph"] = args.seed
    return rows, {"digest": hypergraph_digest(G), "b": list(G.b)}


def _input_graph(args, ctx):
    G = load_hypergraph(args.input)
    ctx.digests["input"] = file_digest(args.input)
    return G


def cmd_regularize(args, ctx):
    G = _input_graph(args, ctx)
    sizes = args.sizes if args.sizes is not None else [1] * (G.k - 1)
    if len(sizes) != G.k - 1:
        raise ValidationError(f"need k-1={G.k - 1} sample sizes")
    H = regularize(G, sample_map_vector(G, sizes, args.seed))
    ctx.seeds["sample_map_vector"] = args.seed
    if args.graph_out:
        save_hypergraph(H, args.graph_out)
    b, m = list(G.b), sum(sizes)
    rows = []
    for I in G.index_sets():
        row = {"index": index_key(I), "colors_before": G.num_colors(I),
               "colors_after": H.num_colors(I)}
        if len(I) < G.k:
            row["bound"] = color_bound(b, m, len(I), G.r)
        rows.append(row)
    return rows, {"sizes": sizes, "digest": hypergraph_digest(H)}


def cmd_density(args, ctx):
    G = _input_graph(args, ctx)
    if args.complex:
        ctx.digests["complex"] = file_digest(args.complex)
        S = complex_from_dict(json.loads(Path(args.complex).read_text()))
        if args.mode == "mc":
            est = embed_probability_mc(G, S, EstimatorConfig(args.samples, args.seed))
            ctx.seeds["embed_mc"] = args.seed
            return [], {"mode": "mc", "estimate": est.estimate, "half_width": est.half_width,
                        "samples": est.samples, "confidence": est.confidence}
        return [], {"mode": "exact", "probability": embed_probability_exact(G, S, args.budget)}
    rows = []
    for tc in G.total_colors:
        dv = relative_density(G, tc)
        rows.append({"index": index_key(tc.index), "total_color": list(tc.entries),
                     "color": str(G.color_name(tc.index, tc.top)),
                     "density": dv.value, "defined": dv.defined})
    if ctx.figures:
        labels = [f"{r['index']}:{r['color']}" for r in rows]
        ctx.figure(plotting.density_bars(labels, [float(r["density"]) for r in rows], ctx.figures))
    return rows, {"total_colors": len(rows)}


def cmd_reg_bound(args, ctx):
    G = _input_graph(args, ctx)
    if args.mode == "faithful":
        ms = args.eta_m if args.eta_m is not None else [1] * (G.k - 1)
        delta = faithful_error_function(G, args.h, args.eps, ms,
                                        EtaConfig(budget=args.budget, seed=args.seed))
        family = exhaustive_family(G, args.h, limit=args.max_family)
        exhaustive = family is not None
        if not exhaustive:
            family = sampled_family(G, args.h, args.samples, args.seed)
            ctx.seeds["family"] = args.seed
        cert = verify_error_function(G, delta, args.h, family, mode="faithful",
                                     budget=args.budget)
        cert.exhaustive = exhaustive
        ctx.seeds["eta"] = args.seed
    elif args.mode in ("empirical", None):
        cert = reg_upper_bound(G, args.h, RegConfig(max_family=args.max_family,
                                                    samples=args.samples, seed=args.seed,
                                                    budget=args.budget))
        ctx.seeds.update(cert.seeds)
    else:
        raise ValidationError(f"reg-bound does not support mode {args.mode!r}")
    if ctx.figures:
        ctx.figure(plotting.slack_histogram([float(min(v, 1)) for v in cert.delta.values.values()],
                                            ctx.figures))
    rows = [{"complex": i, "probability": c.probability, "lower": c.lower, "upper": c.upper,
             "margin": c.margin, "ok": c.ok} for i, c in enumerate(cert.checks)]
    summary = cert.to_dict()
    summary.pop("margins")
    if not cert.passed:
        raise AssertionError(f"error function failed verification on {cert.violations}")
    return rows, summary


def cmd_verify_lemmas(args, ctx):
    if args.corpus:
        ctx.digests["corpus"] = file_digest(args.corpus)
    rows = run_corpus(load_corpus(args.corpus), args.budget)
    failed = [r["id"] for r in rows if not r["skipped"] and r["margin"] < 0]
    if ctx.figures:
        pts = [r for r in rows if not r["skipped"]]
        ctx.figure(plotting.margin_plot([float(r["lhs"]) for r in pts],
                                        [float(r["rhs"]) for r in pts], ctx.figures))
    summary = {"checked": sum(not r["skipped"] for r in rows),
               "skipped": sum(r["skipped"] for r in rows), "failed": failed}
    if failed:
        ctx.pending_error = AssertionError(f"inequality violated on {failed}")
    return rows, summary


def cmd_remove(args, ctx):
    G = _input_graph(args, ctx)
    ctx.digests["pattern"] = file_digest(args.pattern)
    F = pattern_from_dict(json.loads(Path(args.pattern).read_text()), G)
    out = removal_decision(G, F, args.eps, RemovalConfig(args.sizes, args.seed, args.budget))
    ctx.seeds["regularize"] = args.seed
    if args.graph_out and out.G_prime is not None:
        save_hypergraph(out.G_prime, args.graph_out)
    summary = out.to_dict()
    rows = [{"index": I, "changed": v} for I, v in summary.pop("change_fractions").items()]
    return rows, summary


def _input_set(args, ctx, dim: int, universe):
    if args.set:
        ctx.digests["set"] = file_digest(args.set)
        return load_points(args.set)
    if args.density is None:
        raise ValidationError("give --set FILE or --density P")
    rng = derive_rng(args.seed, "cli_set")
    ctx.seeds["set"] = args.seed
    pts = list(universe)
    keep = rng.random(len(pts)) < args.density
    return [p for p, x in zip(pts, keep) if x]


def cmd_find_corner(args, ctx):
    full = sorted(SimplexSet.full(args.N, args.k).members)
    S = SimplexSet(args.N, args.k, _input_set(args, ctx, args.k + 1, full))
    sol = find_simplex_corner(S, args.backend, args.budget)
    summary = {"size": len(S), "found": sol is not None, "backend": args.backend}
    rows = []
    if sol is not None:
        summary.update(a=list(sol.a), c=sol.c)
        rows = [{"point": list(p)} for p in [sol.a, *sol.points()]]
    if args.count:
        summary["corners"] = count_simplex_corners(S, args.budget)
    if ctx.figures:
        ctx.figure(plotting.point_set(sorted(S.members), [] if sol is None else sol.points(),
                                      ctx.figures))
    return rows, summary


def cmd_find_config(args, ctx):
    r = len(args.pattern[0])
    universe = (tuple(int(x) for x in p) for p in np.ndindex(*(args.N,) * r))
    S = _input_set(args, ctx, r, universe)
    res = find_configuration(S, args.pattern, args.N,
                             ConfigConfig(trials=args.trials, seed=args.seed, budget=args.budget))
    ctx.seeds["symmetrize"] = args.seed
    summary = {"size": len(S), "found": res is not None}
    rows = []
    if res is not None:
        summary.update(a=list(res.a), c=res.c, route=res.route)
        rows = [{"point": list(p)} for p in res.witness]
    if ctx.figures:
        ctx.figure(plotting.point_set(sorted(S), [] if res is None else res.witness, ctx.figures))
    return rows, summary


def cmd_find_ap(args, ctx):
    S = [p[0] for p in _input_set(args, ctx, 1, ((x,) for x in range(args.N)))]
    got = find_ap(S, args.length, args.N,
                  ConfigConfig(trials=args.trials, seed=args.seed, budget=args.budget))
    ctx.seeds["symmetrize"] = args.seed
    summary = {"size": len(S), "found": got is not None}
    if got is not None:
        summary.update(a=got[0], c=got[1], progression=list(got[2]))
    if ctx.figures:
        ctx.figure(plotting.point_set([(x,) for x in sorted(S)],
                                      [] if got is None else [(x,) for x in got[2]], ctx.figures))
    return [], summary


def cmd_schedule(args, ctx):
    sched = faithful_schedule(args.k, args.h, args.b, args.eps, args.r, args.max_bits)
    c = sched.constants()
    summary = {"epsilon1": c.epsilon1, "C_squared": c.c_squared}
    rows = []
    if args.k >= 2:
        summary["n_tilde_top"] = sched.n_tilde_top()
    try:
        for n in range(args.upto + 1):
            if args.k >= 2:
                v = sched.m(args.k - 1, *([0] * (args.k - 2)), n)
                rows.append({"n": n, "bits": v.bit_length(),
                             "value": str(v) if v.bit_length() <= 256 else ""})
    except ScheduleRefused as err:
        summary["refused"] = str(err)
        summary["trace"] = [[str(x) for x in t] for t in err.trace]
        ctx.pending_error = err
    if ctx.figures and rows:
        ctx.figure(plotting.schedule_bits([f"m({r['n']})" for r in rows],
                                          [r["bits"] for r in rows], ctx.figures))
    return rows, summary


# -- parser -----------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help="largest exact enumeration allowed")
    p.add_argument("--mode", choices=["exact", "mc", "faithful", "empirical"], default=None)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--figures", help="directory for SVG figures")
    p.add_argument("--manifest", help="also write the run manifest here")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="hyperreg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "random colored hypergraph")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", type=int_list, required=True, help="colors per level, e.g. 1,2")
    p.add_argument("--parts", type=int_list, required=True)
    p.add_argument("--graph-out", help="write the hypergraph JSON here")

    p = add("regularize", cmd_regularize, "sample maps and regularize")
    p.add_argument("input")
    p.add_argument("--sizes", type=int_list, help="map sizes for s = 1..k-1")
    p.add_argument("--graph-out")

    p = add("density", cmd_density, "relative densities or embedding probability")
    p.add_argument("input")
    p.add_argument("--complex", help="complex JSON; reports its embedding probability")
    p.add_argument("--samples", type=int, default=100_000)

    p = add("reg-bound", cmd_reg_bound, "certified regularity upper bound")
    p.add_argument("input")
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--eps", type=fraction, default=Fraction(1, 2), help="faithful mode only")
    p.add_argument("--eta-m", type=int_list, help="faithful mode: eta sample size per level")
    p.add_argument("--max-family", type=int, default=20000)
    p.add_argument("--samples", type=int, default=200)

    p = add("verify-lemmas", cmd_verify_lemmas, "run the pinned inequality corpus")
    p.add_argument("--corpus", help="corpus JSON (default: shipped corpus)")

    p = add("remove", cmd_remove, "recolor bad edges or certify many copies")
    p.add_argument("input")
    p.add_argument("--pattern", required=True, help="pattern JSON")
    p.add_argument("--eps", type=fraction, required=True)
    p.add_argument("--sizes", type=int_list)
    p.add_argument("--graph-out", help="write the recolored graph here (case i)")

    for name, func, help in [("find-corner", cmd_find_corner, "corner in a simplex subset"),
                             ("find-config", cmd_find_config, "homothetic copy of a pattern"),
                             ("find-ap", cmd_find_ap, "arithmetic progression")]:
        p = add(name, func, help)
        p.add_argument("--N", type=int, required=True)
        p.add_argument("--set", help="points file (JSON array or one tuple per line)")
        p.add_argument("--density", type=float, help="random subset instead of --set")
        if name == "find-corner":
            p.add_argument("--k", type=int, required=True)
            p.add_argument("--backend", choices=["brute", "indexed"], default="brute")
            p.add_argument("--count", action="store_true")
        else:
            p.add_argument("--trials", type=int, default=64)
        if name == "find-config":
            p.add_argument("--pattern", type=point_list, required=True, help='e.g. "0,0;1,0;0,1"')
        if name == "find-ap":
            p.add_argument("--length", type=int, default=3)

    p = add("schedule", cmd_schedule, "exact sample-size schedule values")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--h", type=int, default=1)
    p.add_argument("--b", type=int_list, required=True)
    p.add_argument("--eps", type=fraction, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--upto", type=int, default=1, help="evaluate m(0..upto)")
    p.add_argument("--max-bits", type=int, default=1 << 20)

    p = sub.add_parser("replay", help="re-run a manifest")
    p.add_argument("manifest")
    p.add_argument("--out")
    p.add_argument("--format", choices=["json", "csv"])
    p.add_argument("--figures")
    p.set_defaults(func=None)
    return parser


def _clean_argv(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        name = tok.split("=", 1)[0]
        if name in OUTPUT_FLAGS or name == "--format":
            skip = "=" not in tok
            continue
        out.append(tok)
    return out


class Context:
    def __init__(self, figures):
        self.figures = figures
        self.seeds: dict = {}
        self.digests: dict = {}
        self.figure_paths: list = []
        self.pending_error: BaseException | None = None

    def figure(self, path):
        self.figure_paths.append(str(path))


def run(argv: list[str], stdout=sys.stdout) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        data = json.loads(Path(args.manifest).read_text())
        manifest = RunManifest.from_dict(data.get("manifest", data))
        replay_argv = list(manifest.params["argv"])
        for flag in ("out", "format", "figures"):
            if getattr(args, flag):
                replay_argv += [f"--{flag}", getattr(args, flag)]
        return run(replay_argv, stdout)

    ctx = Context(args.figures)
    rows, summary = args.func(args, ctx)
    params = {"argv": _clean_argv(list(argv))}
    manifest = RunManifest(args.command, params, ctx.seeds, ctx.digests)
    report = Report(manifest, rows, summary)
    text = emit_report(report, args.format, args.out)
    if args.out is None:
        stdout.write(text)
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    for path in ctx.figure_paths:
        print(f"figure: {path}", file=sys.stderr)
    if ctx.pending_error is not None:
        raise ctx.pending_error
    return EXIT_OK


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except ScheduleRefused as err:
        print(f"refused: {err}", file=sys.stderr)
        for entry in err.trace:
            print("  " + " ".join(str(x) for x in entry), file=sys.stderr)
        return EXIT_BUDGET
    except BudgetExceeded as err:
        print(f"refused: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except AssertionError as err:
        print(f"internal assertion failed: {err}", file=sys.stderr)
        return EXIT_ASSERT


if __name__ == "__main__":
    sys.exit(main())
