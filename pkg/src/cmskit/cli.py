"""Command-line front end.

Every command prints (or writes to --out) a JSON payload; --format csv gives a
flat table instead. Payloads contain no timestamps, so identical arguments give
identical bytes. With --out, a manifest sidecar PATH.manifest.json records the
command line, system identity, seed, version and wall time.

Exit codes: 0 success, 1 a check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys as _sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import CMSError
from .graph import is_aperiodic, is_irreducible, period
from .space import SequencePoint
from .system import EuclideanSystem, MarkovSystem, load_system, parse_builtin_arg, validate

CHECK_FAILED = 1
USAGE = 2


class UsageError(Exception):
    pass


# --- helpers -------------------------------------------------------------------------------

def _load(args) -> Optional[MarkovSystem]:
    if args.command == "moduli" and args.jo and not (args.system or args.builtin):
        return None  # the closed-form profile needs no system
    if args.system:
        return load_system(args.system)
    if args.builtin:
        return parse_builtin_arg(args.builtin)
    raise UsageError("one of --system FILE or --builtin NAME is required")


def _point(sys: MarkovSystem, text: Optional[str], default_vertex: int = 1):
    """Euclidean: comma-separated coordinates. Sequence: comma-separated edge ids
    appended onto the anchor of the first edge's source vertex."""
    if text is None:
        return sys.representative(default_vertex)
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if isinstance(sys, EuclideanSystem):
        try:
            x = tuple(float(p) for p in parts)
        except ValueError as exc:
            raise UsageError(f"bad point {text!r}: {exc}") from None
        if len(x) != sys.dim:
            raise UsageError(f"point {text!r} has {len(x)} coordinates, system has {sys.dim}")
        return x
    if not parts:
        return sys.representative(default_vertex)
    g = sys.graph
    if not g.is_admissible(parts):
        raise UsageError(f"{text!r} is not an admissible word")
    p = sys.representative(g.source(parts[0]))
    for e in parts:
        p = p.append(e)
    return p


def _enc(x):
    if isinstance(x, SequencePoint):
        return x.to_json()
    if isinstance(x, (tuple, list, np.ndarray)):
        return [float(c) for c in x]
    return x


def _clean(obj):
    """JSON-safe copy: numpy scalars to floats, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, SequencePoint):
        return obj.to_json()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Result:
    def __init__(self, payload: dict, table: Optional[tuple] = None, ok: bool = True):
        self.payload = payload
        self.table = table  # (header, rows)
        self.ok = ok


def _provenance(args, sys: MarkovSystem) -> dict:
    return {"op": args.command, "system": sys.identity if sys is not None else None, "seed": args.seed, "version": __version__}


def _est(e) -> dict:
    return {"value": e.value, "std_error": e.std_error, "n": e.n, "seed": e.master_seed,
            "stream_id": e.stream_id, "note": e.note}


# --- commands -----------------------------------------------------------------------------

def cmd_graph_check(args, sys):
    g = sys.graph
    irr = is_irreducible(g)
    out = {"vertices": g.vertex_count, "edges": len(g.edges), "irreducible": irr,
           "period": period(g) if irr else None, "aperiodic": is_aperiodic(g) if irr else None,
           "edge_list": [[e.id, e.source, e.target] for e in g.edges]}
    rows = [[e.id, e.source, e.target] for e in g.edges]
    return Result(out, (["edge", "source", "target"], rows), ok=irr)


def cmd_validate(args, sys):
    rep = validate(sys, args.budget or 10_000, args.seed)
    d = rep.to_dict()
    rows = [[e, p, args.seed] for e, p in d["min_prob_by_edge"].items()]
    return Result(d, (["edge", "min_prob", "seed"], rows), ok=rep.passed)


def cmd_rate(args, sys):
    from .analysis import estimate_contraction_rate
    rep = estimate_contraction_rate(sys, args.budget or 100_000, args.seed)
    d = rep.to_dict()
    ok = rep.declared_rate is None or rep.max_ratio <= rep.declared_rate + 1e-9
    rows = [[k, v, args.seed] for k, v in d["per_stratum"].items()]
    return Result(d, (["stratum", "max_ratio", "seed"], rows), ok=ok)


def cmd_moduli(args, sys):
    from .analysis import jo_profile, modulus_profile, variation_class
    from .simulate import observable
    N = args.n or 20
    if args.jo:
        try:
            alpha, delta = (float(v) for v in args.jo.split(","))
        except ValueError:
            raise UsageError("--jo takes ALPHA,DELTA") from None
        prof = jo_profile(alpha, delta, N)
    else:
        if args.edge:
            e = sys.graph.edge(args.edge)
            vertex = e.source
            fn = lambda x, e=e.id: sys.prob(e, x)
            if isinstance(sys, EuclideanSystem):
                fn.batch = lambda X, e=e.id: sys.prob_batch(e, X)
        elif args.expr:
            vertex = args.vertex or 1
            fn = observable(sys, args.expr)
        else:
            raise UsageError("moduli needs --edge ID, --expr EXPR or --jo ALPHA,DELTA")
        prof = modulus_profile(fn, vertex, sys, args.b, args.c, N, args.budget or 100_000, args.seed)
    rep = variation_class(prof)
    rows = [r + [args.seed] for r in prof.rows()]
    payload = {"mode": prof.mode, "b": prof.b, "c": prof.c, "meta": prof.meta,
               "variation": rep.to_dict()}
    if N <= 1000:
        payload["rows"] = rows
    return Result(payload, (["n", "t", "phi", "S1", "S2", "seed"], rows))


def cmd_simulate(args, sys):
    from .simulate import run
    x0 = _point(sys, args.start)
    tr = run(sys, x0, args.n if args.n is not None else 100, args.seed, args.stream)
    header = ["seed", "stream", "step", "edge"] + (
        [f"x{i + 1}" for i in range(sys.dim)] if isinstance(sys, EuclideanSystem) else ["word"])
    return Result(tr.to_json(), (header, list(tr.csv_rows())))


def cmd_ergodic(args, sys):
    from .estimators import ergodic_average
    x0 = _point(sys, args.start)
    if not args.f:
        raise UsageError("ergodic needs --f EXPR")
    try:
        f = float(args.f)
    except ValueError:
        f = args.f
    est = ergodic_average(sys, x0, f, args.n or 100_000, args.seed, args.stream)
    d = _est(est) | {"start": _enc(x0), "f": args.f}
    return Result(d, (["value", "std_error", "n", "seed", "stream"],
                      [[est.value, est.std_error, est.n, args.seed, args.stream]]))


def cmd_entropy(args, sys):
    from .estimators import estimate_entropy_integral, estimate_entropy_lyapunov
    x0 = _point(sys, args.start)
    n = args.n or 100_000
    scale = 1 / math.log(2) if args.bits else 1.0
    lyap = estimate_entropy_lyapunov(sys, x0, n, args.seed, args.trajectories, args.stream, jobs=args.jobs)
    integ = estimate_entropy_integral(sys, x0, n, args.seed, args.trajectories, args.stream, jobs=args.jobs)
    out = {"unit": "bits" if args.bits else "nats", "start": _enc(x0)}
    rows = []
    for name, e in (("lyapunov", lyap), ("integral", integ)):
        d = _est(e)
        d["value"] *= scale
        d["std_error"] *= scale
        out[name] = d
        rows.append([name, d["value"], d["std_error"], n, args.seed, args.stream])
    se = math.hypot(lyap.std_error, integ.std_error)
    out["agree_within_3se"] = bool(abs(lyap.value - integ.value) <= 3 * se)
    return Result(out, (["estimator", "value", "std_error", "n", "seed", "stream"], rows))


def cmd_measure(args, sys):
    from .analysis import moment_bound
    from .estimators import empirical_measure, representative_distance, stationarity_check
    x0 = _point(sys, args.start)
    n = args.n or 100_000
    mu = empirical_measure(sys, x0, n, args.burnin, args.seed, args.stream)
    plug = representative_distance(sys, mu)
    words = [()] + [(e,) for e in sys.graph.edge_ids]
    stat = stationarity_check(sys, mu, words)
    out = {"sample": mu.provenance, "support_size": len(mu),
           "representative_distance": _est(plug),
           "stationarity": [{"word": list(r.word), "mass": r.mass, "extended_mass": r.extended_mass,
                             "discrepancy": r.discrepancy} for r in stat]}
    ok = True
    if sys.rate is not None:
        bound = moment_bound(sys)
        out["moment_bound"] = bound
        ok = plug.value <= bound + 3 * plug.std_error
        out["moment_bound_holds"] = ok
    if isinstance(sys, EuclideanSystem):
        arr = mu.array()
        out["mean"] = arr.mean(axis=0)
    rows = [[" ".join(r.word), r.mass, r.extended_mass, r.discrepancy, args.seed, args.stream] for r in stat]
    return Result(out, (["word", "mass", "extended_mass", "discrepancy", "seed", "stream"], rows), ok=ok)


def _word_arg(text: Optional[str]) -> tuple:
    if not text:
        return ()
    return tuple(p.strip() for p in text.split(",") if p.strip())


def cmd_cylinder(args, sys):
    from .simulate import cylinder_prob
    from .estimators import empirical_measure, markov_measure_cylinder
    word = _word_arg(args.word)
    x0 = _point(sys, args.start)
    out = {"word": list(word), "start": _enc(x0), "P_x": cylinder_prob(sys, x0, word)}
    rows = [["P_x", out["P_x"], 0.0, args.seed]]
    if args.markov:
        mu = empirical_measure(sys, x0, args.n or 100_000, args.burnin, args.seed, args.stream)
        est = markov_measure_cylinder(sys, mu, word)
        out["M"] = _est(est)
        rows.append(["M", est.value, est.std_error, args.seed])
    return Result(out, (["quantity", "value", "std_error", "seed"], rows))


def cmd_code(args, sys):
    from .coding import DEFAULT_DEPTHS, code_word, coding_convergence, holder_fit
    if args.word:
        word = _word_arg(args.word)
        x = code_word(sys, word)
        return Result({"word": list(word), "code": _enc(x)}, (["word", "code"], [[" ".join(word), json.dumps(_enc(x))]]))
    depths = [int(v) for v in args.depths.split(",")] if args.depths else list(DEFAULT_DEPTHS)
    rep = coding_convergence(sys, args.seed, depths, args.words)
    out = rep.to_dict()
    if args.holder:
        out["holder"] = holder_fit(sys, args.seed, args.holder).to_dict()
    rows = [s.row() + [args.seed] for s in rep.stats]
    return Result(out, (["depth", "median_dist", "p90_dist", "start_indep_median", "seed"], rows))


def cmd_martingale(args, sys):
    from .martingale import martingale_check_exact, tail_bound_check, variance_bound_check, y_martingale_check_exact
    x = _point(sys, args.x)
    y = _point(sys, args.y)
    n = args.n if args.n is not None else 5
    exact = [martingale_check_exact(sys, x, y, k).to_dict() for k in range(n + 1)]
    yexact = [y_martingale_check_exact(sys, x, y, k).to_dict() for k in range(n + 1)]
    ok = all(r["max_discrepancy"] <= 1e-10 for r in exact + yexact)
    out = {"x": _enc(x), "y": _enc(y), "exact": exact, "y_exact": yexact}
    budget = args.budget or 100_000
    if sys.rate is not None:
        tail = tail_bound_check(sys, x, y, args.imax, budget, args.seed)
        out["tail"] = tail.to_dict()
        ok = ok and tail.violations == 0
        if sys.envelope is not None:
            var = variance_bound_check(sys, x, y, args.imax, budget, args.seed)
            out["variance"] = var.to_dict()
            ok = ok and var.holds
    out["passed"] = ok
    rows = [[r["n"], "X", r["max_discrepancy"], args.seed] for r in exact]
    rows += [[r["n"], "Y", r["max_discrepancy"], args.seed] for r in yexact]
    return Result(out, (["n", "martingale", "max_discrepancy", "seed"], rows), ok=ok)


COMMANDS = {
    "graph-check": cmd_graph_check, "validate": cmd_validate, "rate": cmd_rate,
    "moduli": cmd_moduli, "simulate": cmd_simulate, "ergodic": cmd_ergodic,
    "entropy": cmd_entropy, "measure": cmd_measure, "cylinder": cmd_cylinder,
    "code": cmd_code, "martingale": cmd_martingale,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--system", metavar="FILE", help="system description file (.cms)")
    src.add_argument("--builtin", metavar="NAME[:params]", help="example_r2, example_r1 or gmarkov:p11,p12,...")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--stream", type=int, default=0, help="stream id within the seed")
    common.add_argument("--n", type=int)
    common.add_argument("--burnin", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--jobs", type=int, default=1, help="worker threads; results do not depend on it")

    p = argparse.ArgumentParser(prog="cmskit", description="Contractive Markov system toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name in ("simulate", "ergodic", "entropy", "measure", "cylinder"):
            sp.add_argument("--start", help="start point (coordinates or edge word)")
        if name == "moduli":
            sp.add_argument("--edge")
            sp.add_argument("--expr")
            sp.add_argument("--vertex", type=int)
            sp.add_argument("--jo", metavar="ALPHA,DELTA")
            sp.add_argument("--b", type=float, default=1.0)
            sp.add_argument("--c", type=float, default=0.5)
        if name == "ergodic":
            sp.add_argument("--f", help="test function expression (same for every edge)")
        if name == "entropy":
            sp.add_argument("--bits", action="store_true")
            sp.add_argument("--trajectories", type=int, default=1)
        if name == "cylinder":
            sp.add_argument("--word", help="comma-separated edge ids")
            sp.add_argument("--markov", action="store_true", help="also estimate the Markov-measure mass")
        if name == "code":
            sp.add_argument("--word", help="backward word, oldest edge first")
            sp.add_argument("--depths", help="comma-separated depth grid")
            sp.add_argument("--words", type=int, default=1000)
            sp.add_argument("--holder", type=int, metavar="DEPTH", help="also fit a Holder exponent")
        if name == "martingale":
            sp.add_argument("--x")
            sp.add_argument("--y")
            sp.add_argument("--imax", type=int, default=20)
    return p


def _render(res: Result, fmt: str) -> str:
    if fmt == "csv":
        if res.table is None:
            raise UsageError("this command has no CSV form")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header, rows = res.table
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        return buf.getvalue()
    return json.dumps(_clean(res.payload), indent=2, sort_keys=True) + "\n"


def main(argv: Optional[list] = None) -> int:
    argv = list(_sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    t0 = time.perf_counter()
    try:
        sys = _load(args)
        res = COMMANDS[args.command](args, sys)
        if args.format == "json":
            res.payload = {"provenance": _provenance(args, sys)} | res.payload
        text = _render(res, args.format)
    except (UsageError, CMSError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"cmskit {args.command}: error: {exc}", file=_sys.stderr)
        return USAGE
    if args.out:
        out = Path(args.out)
        out.write_text(text, encoding="utf-8")
        manifest = {"argv": ["cmskit", *argv], "system": sys.identity if sys is not None else None, "seed": args.seed,
                    "version": __version__, "wall_time_s": time.perf_counter() - t0,
                    "output": out.name, "format": args.format, "jobs": args.jobs}
        Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    else:
        _sys.stdout.write(text)
    return 0 if res.ok else CHECK_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
