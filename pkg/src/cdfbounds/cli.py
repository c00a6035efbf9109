"""Command-line entry point: ``cdfbounds validate|signs|query|bound|decide|generate``.

Exit status: 0 ok, 1 invalid network, 2 impossible evidence, 3 decision
precondition failed, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import signal
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .abstraction import Partition
from .decision import (
    DecisionError,
    NotSupermodular,
    UtilityTable,
    admissible_decisions,
    admissible_decisions_from_bounds,
    expected_value_interval,
    load_utility,
    optimal_decisions,
    require_supermodular,
)
from .eligibility import check_node
from .generate import random_network
from .inference import ZeroProbabilityEvidence, joint_posterior
from .issa import STRATEGIES, BoundsTrace, interval_probability, iterate_bounds, select_abstraction_nodes
from .netmodel import (
    NetworkError,
    ParseError,
    ValidationError,
    load_network,
    parse_evidence,
    serialize_network,
    validate,
)
from .stochdom import detect_generalized_sign, detect_sign
from .traceio import TraceWriter

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_EVIDENCE = 2
EXIT_DECISION = 3
EXIT_USAGE = 64

log = logging.getLogger("cdfbounds")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _fraction(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cdfbounds", description="Anytime CDF bounds for discrete Bayesian networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    net = _Parser(add_help=False)
    net.add_argument("--network", required=True, metavar="PATH")
    net.add_argument("--format", choices=("json", "csv"), default="json")

    q = _Parser(add_help=False)
    q.add_argument("--evidence", default="", metavar="K=V,...")
    q.add_argument("--query", metavar="Z")
    q.add_argument("--strict-t2", action="store_true", help="require Z to be the only descendant for query-parent nodes")

    run = _Parser(add_help=False)
    run.add_argument("--max-iterations", type=_positive_int, metavar="N")
    run.add_argument("--deadline-ms", type=_positive_float, metavar="T")
    run.add_argument("--tolerance", type=_positive_float, default=1e-9, metavar="F")
    run.add_argument("--strategy", choices=STRATEGIES, default="widest")
    run.add_argument("--plan", metavar="PATH", help="JSON map of node to initial blocks")
    run.add_argument("--no-early-stop", action="store_true", help="refine to singletons even once bounds meet")
    run.add_argument("--values", metavar="PATH", help="JSON numeric value per query state")

    sub.add_parser("validate", parents=[net], help="check structure, CPTs and declared signs")
    sub.add_parser("signs", parents=[net, q], help="arc signs and per-node eligibility")
    sub.add_parser("query", parents=[net, q], help="exact posterior of the query node")
    b = sub.add_parser("bound", parents=[net, q, run], help="stream anytime CDF bounds")
    b.add_argument("--plot", metavar="PATH", help="write a figure of the trace")
    d = sub.add_parser("decide", parents=[net, q, run], help="prune decisions with a supermodular utility")
    d.add_argument("--utility", required=True, metavar="PATH")

    g = sub.add_parser("generate", help="print a seeded random network")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--nodes", type=_positive_int, default=5)
    g.add_argument("--min-states", type=_positive_int, default=2)
    g.add_argument("--max-states", type=_positive_int, default=4)
    g.add_argument("--max-parents", type=int, default=2)
    g.add_argument("--arc-prob", type=_fraction, default=0.6)
    g.add_argument("--monotone-fraction", type=_fraction, default=1.0)
    g.add_argument("--no-declare", action="store_true", help="leave arc signs undeclared")
    return p


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


def _read_json(path, what):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from None


def _load(args, validate_net=True):
    path = Path(args.network)
    if not path.is_file():
        raise UsageError(f"network file {path} not found")
    return load_network(path, validate_net=validate_net)


def _query_args(net, args, need_query=True):
    try:
        evidence = parse_evidence(net, args.evidence)
    except NetworkError as exc:
        raise UsageError(str(exc)) from None
    Z = args.query
    if Z is None:
        if need_query:
            raise UsageError("--query is required")
        return None, evidence
    if Z not in net:
        raise UsageError(f"unknown query variable {Z!r}")
    if Z in evidence:
        raise UsageError(f"query {Z!r} is also in the evidence")
    return Z, evidence


def _values(net, Z, path):
    if path is None:
        return None
    doc = _read_json(path, "values file")
    states = net.var(Z).states
    if isinstance(doc, dict):
        missing = [s for s in states if s not in doc]
        if missing:
            raise UsageError(f"values file lacks states {missing}")
        vals = [doc[s] for s in states]
    else:
        vals = list(doc)
    if len(vals) != len(states):
        raise UsageError(f"{len(vals)} values for {len(states)} states of {Z}")
    try:
        return np.asarray(vals, dtype=np.float64)
    except (TypeError, ValueError):
        raise UsageError("values must be numbers") from None


def _plan(net, path):
    if path is None:
        return None
    doc = _read_json(path, "plan file")
    if isinstance(doc, dict) and "entries" in doc:
        doc = {e["node"]: e["blocks"] for e in doc["entries"]}
    if not isinstance(doc, dict):
        raise UsageError("plan must map node names to block lists")
    plan = {}
    for name, blocks in doc.items():
        if name not in net:
            raise UsageError(f"plan names unknown node {name!r}")
        try:
            plan[name] = Partition(name, tuple(tuple(b) for b in blocks))
            plan[name].check(net.var(name))
        except (NetworkError, TypeError, ValueError) as exc:
            raise UsageError(f"bad plan for {name}: {exc}") from None
    return plan


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args) -> int:
    net = _load(args, validate_net=False)
    report = validate(net)
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("kind", "where", "detail"))
        for v in report:
            w.writerow((v.kind, v.where, v.detail))
    else:
        _emit({"valid": not report, "violations": [v.to_dict() for v in report]})
    for v in report:
        log.error("%s", v)
    return EXIT_INVALID if report else EXIT_OK


def _arc_report(net):
    out = []
    for u, v in net.arcs:
        cpt = net.cpts[v]
        sign = detect_sign(cpt, u)
        gen = detect_generalized_sign(cpt, u)
        rec = {"from": u, "to": v, "sign": str(sign)}
        declared = net.arc_signs.get((u, v))
        if declared is not None:
            rec["declared"] = str(declared)
        rec["generalized"] = None if gen is None else {"sign": str(gen.sign), "n": gen.n}
        if not sign.decisive:
            rec["note"] = (
                "ambiguous; numeric fallback found no gap" if gen is None
                else f"ambiguous; numeric fallback: decisive for state gaps >= {gen.n}"
            )
        out.append(rec)
    return out


def cmd_signs(args) -> int:
    net = _load(args)
    Z, evidence = _query_args(net, args, need_query=False)
    doc = {"arcs": _arc_report(net)}
    if Z is not None:
        nodes = []
        for name in net.names:
            if name == Z or name in evidence or not net.children(name):
                continue
            nodes.append(check_node(net, name, Z, evidence, strict_t2=args.strict_t2).to_dict())
        doc["query"] = Z
        doc["evidence"] = {k: net.var(k).states[i] for k, i in evidence.items()}
        doc["nodes"] = nodes
        doc["selected"] = [el.node for el in select_abstraction_nodes(net, Z, evidence, strict_t2=args.strict_t2)]
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("from", "to", "sign", "generalized_sign", "n", "declared"))
        for a in doc["arcs"]:
            g = a["generalized"] or {}
            w.writerow((a["from"], a["to"], a["sign"], g.get("sign", ""), g.get("n", ""), a.get("declared", "")))
    else:
        _emit(doc)
    return EXIT_OK


def cmd_query(args) -> int:
    net = _load(args)
    Z, evidence = _query_args(net, args)
    pmf, logz = joint_posterior(net, [Z], evidence, return_log_evidence=True)
    cdf = np.minimum(np.cumsum(pmf), 1.0)
    cdf[-1] = 1.0
    states = net.var(Z).states
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("state_index", "state", "pmf", "cdf"))
        for k, s in enumerate(states):
            w.writerow((k, s, repr(float(pmf[k])), repr(float(cdf[k]))))
    else:
        _emit({
            "query": Z,
            "evidence": {k: net.var(k).states[i] for k, i in evidence.items()},
            "states": list(states),
            "pmf": pmf.tolist(),
            "cdf": cdf.tolist(),
            "log_evidence": logz,
        })
    return EXIT_OK


def _run(net, Z, evidence, args, trace):
    return iterate_bounds(
        net,
        Z,
        evidence,
        max_iterations=args.max_iterations,
        deadline_ms=args.deadline_ms,
        plan=_plan(net, args.plan),
        strategy=args.strategy,
        tolerance=args.tolerance,
        early_stop=not args.no_early_stop,
        strict_t2=args.strict_t2,
        trace=trace,
    )


def _summary(trace: BoundsTrace, values):
    last = trace.final
    m = len(last.lower)
    doc = {
        "converged": trace.converged,
        "iterations": len(trace.iterations),
        "exact_fallback": last.exact_fallback,
        "selected": [el.node for el in trace.nodes],
        "intervals": [
            {"state": trace.states[k], **interval_probability(last.lower, last.upper, k - 1, k).to_dict()}
            for k in range(m)
        ],
    }
    if values is not None:
        doc["expected_value"] = list(expected_value_interval(last.lower, last.upper, values))
    return doc


def cmd_bound(args) -> int:
    net = _load(args)
    Z, evidence = _query_args(net, args)
    values = _values(net, Z, args.values)
    if values is not None and np.any(np.diff(values) < 0):
        raise UsageError("values must be nondecreasing in the state order for expected-value bounds")
    trace = BoundsTrace(Z, dict(evidence), net.var(Z).states)
    writer = TraceWriter(sys.stdout, args.format)
    header_done = False
    for it in _run(net, Z, evidence, args, trace):
        if not header_done:
            writer.header(trace)
            header_done = True
        if it.exact_fallback:
            log.warning("no node can be abstracted for %s; reporting the exact posterior", Z)
        writer.iteration(it)
    summary = _summary(trace, values)
    if args.format == "csv":
        sys.stderr.write(json.dumps(summary) + "\n")
    else:
        writer.summary(summary)
    if args.plot:
        from .plotting import plot_trace

        exact = np.cumsum(joint_posterior(net, [Z], evidence))
        plot_trace(trace, args.plot, exact=exact)
        log.info("figure written to %s", args.plot)
    return EXIT_OK


def cmd_decide(args) -> int:
    net = _load(args)
    Z, evidence = _query_args(net, args)
    try:
        u = load_utility(args.utility)
    except OSError as exc:
        raise UsageError(f"cannot read utility {args.utility}: {exc.strerror}") from None
    values = _values(net, Z, args.values)
    if values is not None:
        u = UtilityTable(u.decisions, tuple(values), u.values)
    if len(u.outcomes) != net.card(Z):
        raise DecisionError(f"utility has {len(u.outcomes)} outcomes, {Z} has {net.card(Z)} states")
    require_supermodular(u)
    trace = BoundsTrace(Z, dict(evidence), net.var(Z).states)
    w = csv.writer(sys.stdout, lineterminator="\n") if args.format == "csv" else None
    if w:
        w.writerow(("iteration", "ev_lower", "ev_upper", "d_lo", "d_hi", "grid_d_lo", "grid_d_hi", "wall_ms"))
        sys.stdout.flush()
    for it in _run(net, Z, evidence, args, trace):
        ev = expected_value_interval(it.lower, it.upper, u.outcomes)
        ds = admissible_decisions_from_bounds(u, it.lower, it.upper)
        grid = admissible_decisions(u, ev)
        if w:
            w.writerow((it.index, repr(ev[0]), repr(ev[1]), ds.lo, ds.hi, grid.lo, grid.hi, f"{it.wall_ms:.3f}"))
            sys.stdout.flush()
        else:
            _emit({
                "type": "decision",
                "iteration": it.index,
                "expected_value": list(ev),
                "admissible": ds.to_dict(),
                "grid_rule": grid.to_dict(),
                "wall_ms": it.wall_ms,
            })
    best = optimal_decisions(u, trace.final.lower) if trace.converged else None
    summary = {"type": "summary", "converged": trace.converged, "iterations": len(trace.iterations)}
    if best is not None:
        summary["optimal"] = [u.decisions[i] for i in best]
    if w:
        sys.stderr.write(json.dumps(summary) + "\n")
    else:
        _emit(summary)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.min_states > args.max_states:
        raise UsageError("--min-states exceeds --max-states")
    net = random_network(
        args.seed,
        n_nodes=args.nodes,
        min_states=args.min_states,
        max_states=args.max_states,
        max_parents=args.max_parents,
        arc_prob=args.arc_prob,
        monotone_fraction=args.monotone_fraction,
        declare_signs=not args.no_declare,
    )
    sys.stdout.write(serialize_network(net) + "\n")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "signs": cmd_signs,
    "query": cmd_query,
    "bound": cmd_bound,
    "decide": cmd_decide,
    "generate": cmd_generate,
}


def _on_term(signum, frame):
    raise KeyboardInterrupt


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(name)s: %(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(line_buffering=True)
    signal.signal(signal.SIGTERM, _on_term)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except ValidationError as exc:
        for v in exc.report:
            log.error("%s", v)
        return EXIT_INVALID
    except (ParseError, NetworkError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except ZeroProbabilityEvidence as exc:
        log.error("%s", exc)
        return EXIT_EVIDENCE
    except NotSupermodular as exc:
        log.error("%s", exc)
        _emit({"error": "not-supermodular", "witness": list(exc.witness), "excess": exc.excess})
        return EXIT_DECISION
    except DecisionError as exc:
        log.error("%s", exc)
        return EXIT_DECISION
    except KeyboardInterrupt:
        # every emitted line is complete; the prefix on stdout is a valid trace
        sys.stdout.flush()
        return 130
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
