"""Command-line front end.

Exit status: 0 success, 1 invalid configuration, 2 verification failure,
3 internal invariant violation.  Errors are reported as a single line
``error: kind=<kind> message=<text>`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .chains import (
    InvariantViolation,
    NotAMeasureError,
    aux_walk,
    ballot_chain,
    crossing_products,
    fib_walk,
    marginals,
    motzkin_chain,
    rows_to_csv,
    trace_weights,
    transition_csv,
    verify_centrality,
)
from .fusscat import (
    InconsistencyError,
    bracket_dim,
    bracket_dim_derooted,
    fuss_catalan,
    power_coeff,
)
from .graphs import (
    EndSpec,
    bsharp_graph,
    bsharp_witness,
    fc_tree,
    graphs_isomorphic_up_to,
    motzkin_graph,
    pascalize,
    semi_pascal,
    to_dot,
    to_json,
    to_labels,
)
from .montecarlo import (
    convergence_to_end,
    exit_times_direct,
    exit_times_increments,
    lln_experiment,
    recurrence_probe,
    return_probabilities,
    su2_moment,
)
from .paths import count_ballot, count_motzkin, motzkin_number

OUTDIR_ENV = "NCTRACES_OUTDIR"

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_INTERNAL = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class VerificationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# Parsing helpers


def parse_number(text: str):
    """'p/q' or an integer gives an exact Fraction; a decimal gives a float."""
    text = text.strip()
    try:
        if "/" in text or text.lstrip("+-").isdigit():
            return Fraction(text)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_range(text: str) -> list[int]:
    """'a..b' (inclusive), 'a,b,c' or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            a, b = int(a), int(b)
            if b < a:
                raise ConfigError(f"empty range {text!r}")
            return list(range(a, b + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"not an integer range: {text!r}") from exc


def parse_point_pair(text: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """'a,b..c,d' gives ((a, b), (c, d))."""
    try:
        left, right = text.split("..", 1)
        a, b = (int(x) for x in left.split(","))
        c, d = (int(x) for x in right.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected 'a,b..c,d', got {text!r}") from exc
    return (a, b), (c, d)


def parse_assignments(tokens: list[str]) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_word(text: str) -> str:
    return "" if text in ("", "∅", "-", "empty") else to_labels(text)


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return x.item()
    return x


def _mode_of(*values) -> str:
    return "exact" if all(isinstance(v, Fraction) for v in values) else "float"


# ---------------------------------------------------------------------------
# Output


class Output:
    def __init__(self, args, config: dict):
        self.fmt = getattr(args, "format", "csv")
        self._command = args.command
        self._config = config
        outdir = getattr(args, "out", None) or os.environ.get(OUTDIR_ENV)
        self.outdir = Path(outdir) if outdir else None
        self.stdout = sys.stdout

    @property
    def config(self) -> dict:
        # read at write time so later additions to the run config are echoed
        return {"command": self._command, **_jsonable(self._config)}

    def header(self) -> str:
        return (
            f"# nctraces {__version__}\n"
            f"# config: {json.dumps(self.config, sort_keys=True)}\n"
        )

    def meta(self) -> dict:
        return {"tool": "nctraces", "version": __version__, "config": self.config}

    def table(self, name: str, rows: list[dict], columns: list[str]) -> None:
        if self.fmt == "json":
            text = json.dumps({"meta": self.meta(), name: _jsonable(rows)}, sort_keys=True, indent=1) + "\n"
        else:
            text = self.header() + rows_to_csv(rows, columns)
        self.emit(name, text, "json" if self.fmt == "json" else "csv")

    def document(self, name: str, payload: dict, ext: str = "json") -> None:
        text = json.dumps({"meta": self.meta(), **_jsonable(payload)}, sort_keys=True, indent=1) + "\n"
        self.emit(name, text, ext)

    def raw(self, name: str, text: str, ext: str) -> None:
        self.emit(name, text, ext)

    def emit(self, name: str, text: str, ext: str, to_stdout: bool = True) -> None:
        if self.outdir is not None:
            self.outdir.mkdir(parents=True, exist_ok=True)
            (self.outdir / f"{name}.{ext}").write_text(text)
        if to_stdout:
            self.stdout.write(text)

    def file_only(self, name: str, text: str, ext: str) -> None:
        if self.outdir is not None:
            self.emit(name, text, ext, to_stdout=False)


# ---------------------------------------------------------------------------
# count


def cmd_count(args) -> int:
    rows: list[dict] = []
    config: dict = {}
    if args.motzkin_numbers:
        ns = parse_range(args.motzkin_numbers)
        config["motzkin_numbers"] = ns
        rows += [{"quantity": "motzkin_number", "n": n, "value": motzkin_number(n)} for n in ns]
    if args.ballot:
        src, dst = parse_point_pair(args.ballot)
        config["ballot"] = [src, dst]
        rows.append({"quantity": "ballot", "from": f"{src[0]},{src[1]}", "to": f"{dst[0]},{dst[1]}", "value": count_ballot(src, dst)})
    if args.motzkin:
        src, dst = parse_point_pair(args.motzkin)
        config["motzkin"] = [src, dst]
        rows.append({"quantity": "motzkin", "from": f"{src[0]},{src[1]}", "to": f"{dst[0]},{dst[1]}", "value": count_motzkin(src, dst)})
    if args.fuss_catalan:
        opts = parse_assignments(args.fuss_catalan)
        s, ns = int(opts.get("s", 2)), parse_range(opts.get("n", "0..6"))
        config["fuss_catalan"] = {"s": s, "n": ns}
        rows += [{"quantity": "fuss_catalan", "s": s, "n": n, "value": fuss_catalan(s, n)} for n in ns]
    if args.power:
        opts = parse_assignments(args.power)
        s, l, ns = int(opts.get("s", 2)), int(opts.get("l", 1)), parse_range(opts.get("n", "0..6"))
        config["power"] = {"s": s, "l": l, "n": ns}
        rows += [{"quantity": "power_coeff", "s": s, "l": l, "n": n, "value": power_coeff(s, l, n)} for n in ns]
    for flag, fn, label in (
        (args.bracket, bracket_dim, "bracket"),
        (args.bracket_derooted, bracket_dim_derooted, "bracket_derooted"),
    ):
        if flag:
            opts = parse_assignments(flag)
            s = int(opts.get("s", 2))
            default_w = str(s) if label == "bracket_derooted" else ""
            w = parse_word(opts.get("w", default_w))
            ns = parse_range(opts.get("n", "0..6"))
            config[label] = {"s": s, "w": w, "n": ns}
            rows += [{"quantity": label, "s": s, "w": w, "n": n, "value": fn(s, n, w)} for n in ns]
    if not rows:
        raise ConfigError("nothing to count; see count --help")
    columns = [c for c in ("quantity", "s", "l", "w", "from", "to", "n", "value") if any(c in r for r in rows)]
    Output(args, config).table("counts", rows, columns)
    return EXIT_OK


# ---------------------------------------------------------------------------
# graph


def _build_graph(args):
    if args.semi_pascal:
        return semi_pascal(), {"graph": "semi-pascal"}
    if args.motzkin:
        return motzkin_graph(), {"graph": "motzkin"}
    if args.bsharp:
        return None, {"graph": "bsharp"}
    if args.fc_tree is not None or args.pascal_fc is not None:
        tokens = args.fc_tree if args.fc_tree is not None else args.pascal_fc
        opts = parse_assignments([t for t in tokens if "=" in t])
        derooted = "derooted" in tokens or opts.get("derooted", "0") in ("1", "true", "yes")
        s = int(opts.get("s", 2))
        g = fc_tree(s, derooted)
        kind = "fc-tree"
        if args.pascal_fc is not None:
            g = pascalize(g)
            kind = "pascal-fc"
        return g, {"graph": kind, "s": s, "derooted": derooted}
    raise ConfigError("choose a graph: --semi-pascal, --motzkin, --bsharp, --fc-tree or --pascal-fc")


def cmd_graph(args) -> int:
    g, config = _build_graph(args)
    if args.levels < 1:
        raise ConfigError("--levels must be at least 1")
    n_max = args.levels - 1
    if args.verify_iso is not None:
        if config["graph"] != "bsharp":
            raise ConfigError("--verify-iso applies to --bsharp")
        n = args.verify_iso
        config["verify_iso"] = n
        result = graphs_isomorphic_up_to(
            pascalize(fc_tree(2, derooted=True)), bsharp_graph(n), n, witness=bsharp_witness
        )
        rows = [
            {"level": k, "size": len(result.bijection[k]) if result.bijection else ""}
            for k in range(n + 1)
        ]
        out = Output(args, config)
        out.table("bsharp_iso", rows, ["level", "size"])
        if not result:
            raise VerificationFailure(f"isomorphism fails at level {result.failed_level}: {result.reason}")
        return EXIT_OK
    if g is None:
        g = bsharp_graph(n_max)
    config["levels"] = args.levels
    fmt = "dot" if args.dot else "json" if args.json else args.format
    out = Output(args, config)
    if fmt == "dot":
        out.raw("graph", out.header().replace("# ", "// ") + to_dot(g, n_max), "dot")
    elif fmt == "json":
        out.document("graph", to_json(g, n_max))
    else:
        rows = [{"level": n, "size": len(g.level(n))} for n in range(n_max + 1)]
        out.table("level_sizes", rows, ["level", "size"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# chain


def _build_chain(args):
    kind = args.kind
    if kind == "ballot":
        lam = parse_number(args.lam)
        return ballot_chain(lam), {"chain": "ballot", "lambda": lam, "mode": _mode_of(lam)}
    if kind == "motzkin":
        l1, l2 = parse_number(args.l1), parse_number(args.l2)
        chain = motzkin_chain(l1, l2, strict=not args.allow_signed)
        return chain, {"chain": "motzkin", "lambda1": l1, "lambda2": l2, "mode": _mode_of(l1, l2), "allow_signed": args.allow_signed}
    if kind == "fib":
        eta = parse_number(args.eta)
        end = EndSpec.parse(args.end, args.s) if args.end else EndSpec.ray(args.s)
        chain = fib_walk(end, eta, s=args.s, derooted=args.derooted)
        return chain, {"chain": "fib", "end": str(end), "eta": eta, "s": args.s, "derooted": args.derooted, "mode": _mode_of(eta)}
    if kind == "aux":
        eta = parse_number(args.eta)
        return aux_walk(eta), {"chain": "aux", "eta": eta, "mode": _mode_of(eta)}
    raise ConfigError(f"unknown chain {kind!r}")


def _prob_text(p) -> str:
    if isinstance(p, Fraction):
        return str(p)
    if isinstance(p, float):
        return repr(p)
    return repr(p)


def cmd_chain(args) -> int:
    chain, config = _build_chain(args)
    levels = args.levels
    config["levels"] = levels
    if args.verify_centrality is not None:
        n_str, tol_str = args.verify_centrality
        n, tol = int(n_str), parse_number(tol_str)
        config["verify_centrality"] = [n, tol]
        report = verify_centrality(chain, n, tol)
        rows = [{"check": "centrality", "n_max": n, "max_spread": _prob_text(report.max_spread),
                 "vertices": report.vertices_checked, "paths": report.paths_checked,
                 "result": "PASS" if report.passed else "FAIL"}]
        Output(args, config).table("centrality", rows, ["check", "n_max", "max_spread", "vertices", "paths", "result"])
        if not report.passed:
            raise VerificationFailure(report.summary())
        return EXIT_OK
    if args.depth is not None:
        if chain.walk is None:
            raise ConfigError("--depth (crossing products) applies to tree walks")
        config["depth"] = args.depth
        eta = chain.walk.eta
        rows, bad = [], 0
        for v, w, prod in crossing_products(chain, args.depth):
            root_edge = chain.walk.root_probs is not None and v == chain.walk.root
            ok = root_edge or (prod == eta if chain.mode == "exact" else abs(float(prod) - float(eta)) <= 1e-12)
            bad += not ok
            rows.append({"from": v or "∅", "to": w, "product": _prob_text(prod), "root_edge": int(root_edge),
                         "equals_eta": "" if root_edge else int(ok)})
        Output(args, config).table("crossing", rows, ["from", "to", "product", "root_edge", "equals_eta"])
        if bad:
            raise VerificationFailure(f"{bad} edges violate p(v,w) p(w,v) = eta")
        return EXIT_OK
    out = Output(args, config)
    what = args.table
    if what == "transitions":
        out.raw("transitions", out.header() + transition_csv(chain, levels), "csv")
    elif what == "marginals":
        table = marginals(chain, levels)
        rows = [{"level": n, "vertex": v, "probability": _prob_text(p)} for n, row in enumerate(table) for v, p in row.items()]
        rows += [{"level": n, "vertex": "sum", "probability": _prob_text(sum(row.values()))} for n, row in enumerate(table)]
        out.table("marginals", rows, ["level", "vertex", "probability"])
    elif what == "weights":
        rows = []
        for n in range(levels + 1):
            for v, wgt in trace_weights(chain, n).items():
                rows.append({"level": n, "vertex": v, "dim": chain.graph.dims(n)[v], "weight": _prob_text(wgt)})
        out.table("trace_weights", rows, ["level", "vertex", "dim", "weight"])
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _end_arg(args) -> EndSpec:
    return EndSpec.parse(args.end, 2) if args.end else EndSpec.ray(2)


def cmd_simulate(args) -> int:
    exp = args.experiment
    config: dict = {"experiment": exp, "seed": args.seed, "count": args.count}
    summary_cols = ["parameter", "estimate", "stderr", "exact_target"]
    if exp == "su2":
        l1, l2 = parse_number(args.l1), parse_number(args.l2)
        ns = parse_range(args.n)
        config.update({"lambda1": l1, "lambda2": l2, "n": ns, "order": args.order, "mode": "float"})
        del config["seed"], config["count"]
        rows = []
        for n in ns:
            m = su2_moment(l1, l2, n, args.order)
            rows.append({"parameter": f"n={n}", "estimate": repr(m.value), "stderr": repr(m.error), "exact_target": repr(m.exact)})
        Output(args, config).table("su2", rows, summary_cols)
        return EXIT_OK

    eta = parse_number(args.eta)
    config["eta"] = eta
    config["mode"] = _mode_of(eta)
    end = _end_arg(args)
    out = Output(args, config)
    if exp == "returns":
        ns = parse_range(args.n)
        config.update({"n": ns, "end": str(end)})
        rows = []
        for r in return_probabilities(fib_walk(end, eta), ns, args.count, args.seed):
            rows.append({"parameter": f"n={r.n}", "estimate": repr(r.estimate), "stderr": repr(r.stderr), "exact_target": repr(r.exact)})
        out.table("returns", rows, summary_cols)
    elif exp in ("exit-times", "lln"):
        k = args.k
        config.update({"k": k, "end": str(end)})
        if exp == "exit-times":
            config.update({"method": args.method, "horizon": args.horizon})
            if args.method == "direct":
                ex = exit_times_direct(fib_walk(end, eta), k, args.horizon, args.count, args.seed)
            else:
                ex = exit_times_increments(end, eta, k, args.count, args.seed)
            out.file_only("exit_records", out.header() + ex.to_csv(), "csv")
            x = ex.ratios(k)
            rows = [{"parameter": f"ratio k={k}", "estimate": repr(float(x.mean())),
                     "stderr": repr(float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else ""),
                     "exact_target": "", }]
            rows.append({"parameter": "censored_fraction", "estimate": repr(float(ex.censored.mean())), "stderr": "", "exact_target": ""})
            out.table("exit_times", rows, summary_cols)
        else:
            ks = sorted({k // 2, k}) if args.divergence else [k]
            s = lln_experiment(end, eta, k, args.count, args.seed, ks=ks)
            rows = []
            for kk, m, e, c in zip(s.ks, s.means, s.stderrs, s.censored_fraction):
                rows.append({"parameter": f"mean ratio k={kk}", "estimate": repr(m), "stderr": repr(e), "exact_target": repr(s.target)})
                rows.append({"parameter": f"censored fraction k={kk}", "estimate": repr(c), "stderr": "", "exact_target": ""})
            rows.append({"parameter": "loop mean per label", "estimate": repr(s.loop_mean_per_label), "stderr": "", "exact_target": ""})
            out.table("lln", rows, summary_cols)
    elif exp == "convergence":
        chain = aux_walk(eta) if args.walk == "aux" else fib_walk(end, eta)
        config.update({"steps": args.steps, "walk": args.walk, "end": str(end), "threshold": args.threshold})
        c = convergence_to_end(chain, end, args.steps, args.count, args.seed, args.threshold)
        rows = [{"parameter": f"fraction prefix > {c.threshold}", "estimate": repr(c.fraction), "stderr": "", "exact_target": ""}]
        out.table("convergence", rows, summary_cols)
    elif exp == "recurrence":
        horizons = parse_range(args.horizons)
        chain = aux_walk(eta) if args.walk == "aux" else fib_walk(end, eta)
        config.update({"horizons": horizons, "walk": args.walk})
        r = recurrence_probe(chain, horizons, args.count, args.seed)
        rows = [{"parameter": f"mean returns h={h}", "estimate": repr(m), "stderr": "", "exact_target": ""}
                for h, m in zip(r.horizons, r.mean_returns)]
        rows.append({"parameter": "fraction still returning", "estimate": repr(r.fraction_growing()), "stderr": "", "exact_target": ""})
        out.table("recurrence", rows, summary_cols)
    else:
        raise ConfigError(f"unknown experiment {exp!r}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nctraces", description="Branching graphs, central chains and tree-walk experiments.")
    p.add_argument("--version", action="version", version=f"nctraces {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--out", help=f"directory for output files (or set {OUTDIR_ENV})")

    c = sub.add_parser("count", help="path counts, Motzkin and Fuss-Catalan numbers, brackets")
    common(c)
    c.add_argument("--motzkin-numbers", metavar="RANGE")
    c.add_argument("--ballot", metavar="a,b..c,d")
    c.add_argument("--motzkin", metavar="a,b..c,d")
    c.add_argument("--fuss-catalan", nargs="+", metavar="KEY=VALUE")
    c.add_argument("--power", nargs="+", metavar="KEY=VALUE")
    c.add_argument("--bracket", nargs="+", metavar="KEY=VALUE")
    c.add_argument("--bracket-derooted", nargs="+", metavar="KEY=VALUE")
    c.set_defaults(func=cmd_count)

    g = sub.add_parser("graph", help="export branching graphs")
    common(g)
    sel = g.add_mutually_exclusive_group()
    sel.add_argument("--semi-pascal", action="store_true")
    sel.add_argument("--motzkin", action="store_true")
    sel.add_argument("--bsharp", action="store_true")
    sel.add_argument("--fc-tree", nargs="*", metavar="s=S|derooted")
    sel.add_argument("--pascal-fc", nargs="*", metavar="s=S|derooted")
    g.add_argument("--levels", type=int, default=5, help="number of levels, starting at level 0")
    g.add_argument("--dot", action="store_true")
    g.add_argument("--json", action="store_true")
    g.add_argument("--verify-iso", "--verify-bsharp-iso", dest="verify_iso", type=int, metavar="N")
    g.set_defaults(func=cmd_graph)

    ch = sub.add_parser("chain", help="central chains: tables and verification")
    common(ch)
    ch.add_argument("kind", choices=["ballot", "motzkin", "fib", "aux"])
    ch.add_argument("--lambda", dest="lam", default="1/2")
    ch.add_argument("--l1", default="1/3")
    ch.add_argument("--l2", default="1/3")
    ch.add_argument("--allow-signed", action="store_true", help="build Motzkin tables even with negative marginals")
    ch.add_argument("--eta", default="1/10")
    ch.add_argument("--end", help="end as prefix:period over labels {1,2}")
    ch.add_argument("--s", type=int, default=2)
    ch.add_argument("--derooted", action="store_true")
    ch.add_argument("--levels", type=int, default=6)
    ch.add_argument("--table", choices=["transitions", "marginals", "weights"], default="transitions")
    ch.add_argument("--verify-centrality", nargs=2, metavar=("N", "TOL"))
    ch.add_argument("--depth", type=int, help="list crossing products up to this depth")
    ch.set_defaults(func=cmd_chain)

    sm = sub.add_parser("simulate", help="Monte Carlo experiments")
    common(sm)
    sm.add_argument("experiment", choices=["returns", "exit-times", "lln", "convergence", "recurrence", "su2"])
    sm.add_argument("--eta", default="1/10")
    sm.add_argument("--end")
    sm.add_argument("--n", default="1..4")
    sm.add_argument("--k", type=int, default=200)
    sm.add_argument("--count", type=int, default=10000)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--steps", type=int, default=2000)
    sm.add_argument("--threshold", type=int)
    sm.add_argument("--horizon", type=int, default=2000)
    sm.add_argument("--horizons", default="1000,10000")
    sm.add_argument("--method", choices=["increments", "direct"], default="increments")
    sm.add_argument("--walk", choices=["fib", "aux"], default="fib")
    sm.add_argument("--divergence", action="store_true", help="also report the mean at k/2")
    sm.add_argument("--l1", default="1/2")
    sm.add_argument("--l2", default="1/2")
    sm.add_argument("--order", type=int, default=32)
    sm.set_defaults(func=cmd_simulate)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    text = " ".join(str(message).split())
    print(f"error: kind={kind} message={text}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except VerificationFailure as exc:
        return _fail("verification_failure", str(exc), EXIT_VERIFY)
    except (InvariantViolation, InconsistencyError) as exc:
        return _fail("internal", str(exc), EXIT_INTERNAL)
    except NotAMeasureError as exc:
        return _fail("invalid_config", str(exc), EXIT_CONFIG)
    except (ConfigError, ValueError, TypeError) as exc:
        return _fail("invalid_config", str(exc), EXIT_CONFIG)
    except ArithmeticError as exc:
        return _fail("internal", str(exc), EXIT_INTERNAL)


if __name__ == "__main__":
    sys.exit(main())
