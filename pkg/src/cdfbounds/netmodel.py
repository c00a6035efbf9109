"""Discrete Bayesian networks: variables, CPTs, the JSON file format and
the structural graph queries used by the bounding conditions.

State order is whatever the file declares. Index 0 is the smallest state;
booleans are conventionally declared ``["false", "true"]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

ROW_TOL = 1e-9

Evidence = dict[str, int]


class NetworkError(ValueError):
    """Base class for malformed networks and bad references."""


class ParseError(NetworkError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class ValidationError(NetworkError):
    def __init__(self, report: list["Violation"]):
        self.report = report
        super().__init__("; ".join(str(v) for v in report))


@dataclass(frozen=True)
class Variable:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        if not self.states:
            raise NetworkError(f"variable {self.name!r} has no states")
        if len(set(self.states)) != len(self.states):
            raise NetworkError(f"variable {self.name!r} has duplicate state labels")

    @property
    def card(self) -> int:
        return len(self.states)

    def index(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise NetworkError(f"{label!r} is not a state of {self.name!r}") from None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def cumulate(table: np.ndarray) -> np.ndarray:
    """Cumulative sums along the last axis, capped at 1 with the top entry
    pinned to exactly 1."""
    c = np.minimum(np.cumsum(table, axis=-1), 1.0)
    c[..., -1] = 1.0
    return c


def difference(cdf: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Inverse of :func:`cumulate`: PMF rows from CDF rows."""
    p = np.diff(cdf, axis=-1, prepend=0.0)
    if np.any(p < -tol):
        raise NetworkError(f"CDF is decreasing by {-p.min():.3g}; not a distribution")
    neg = p < 0
    if neg.any():
        p = np.where(neg, 0.0, p)
        p = p / p.sum(axis=-1, keepdims=True)
    return p


class Cpt:
    """Conditional probability table ``Pr(child | parents)``.

    ``table`` has one axis per parent (in declared order) followed by the
    child axis. A CPT built from CDFs (as abstraction does) keeps those CDF
    values verbatim so that repeated envelope and aggregation steps act by
    pure selection and commute bit-for-bit.
    """

    def __init__(self, child: str, parents: Sequence[str], table, cdf=None):
        self.child = child
        self.parents = tuple(parents)
        self.table = _readonly(table)
        if self.table.ndim != len(self.parents) + 1:
            raise NetworkError(
                f"CPT of {child!r}: table has {self.table.ndim} axes, "
                f"expected {len(self.parents) + 1}"
            )
        self._cdf = None if cdf is None else _readonly(cdf)

    @classmethod
    def from_cdf(cls, child: str, parents: Sequence[str], cdf) -> "Cpt":
        cdf = np.asarray(cdf, dtype=np.float64)
        return cls(child, parents, difference(cdf), cdf=cdf)

    @property
    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            self._cdf = _readonly(cumulate(self.table))
        return self._cdf

    @property
    def shape(self) -> tuple[int, ...]:
        return self.table.shape

    def row(self, given: Sequence[int]) -> np.ndarray:
        return self.table[tuple(given)]

    def rows(self) -> dict[tuple[int, ...], np.ndarray]:
        return {idx: self.table[idx] for idx in np.ndindex(*self.table.shape[:-1])}

    def axis_of(self, parent: str) -> int:
        try:
            return self.parents.index(parent)
        except ValueError:
            raise NetworkError(f"{parent!r} is not a parent of {self.child!r}") from None

    def same_values(self, other: "Cpt") -> bool:
        return (
            self.child == other.child
            and self.parents == other.parents
            and self.table.shape == other.table.shape
            and self.table.tobytes() == other.table.tobytes()
        )

    def __repr__(self):
        return f"Cpt({self.child!r} | {', '.join(self.parents)}; shape={self.table.shape})"


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str
    where: str = ""

    def __str__(self):
        return f"{self.kind}: {self.detail}" + (f" [{self.where}]" if self.where else "")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail, "where": self.where}


@dataclass(frozen=True, eq=False)
class BayesianNetwork:
    variables: tuple[Variable, ...]
    arcs: tuple[tuple[str, str], ...]
    cpts: Mapping[str, Cpt]
    arc_signs: Mapping[tuple[str, str], object] = field(default_factory=dict)

    def __hash__(self):
        return id(self)

    @cached_property
    def _by_name(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(v.name for v in self.variables)
        g.add_edges_from(self.arcs)
        return g

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def var(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise NetworkError(f"unknown variable {name!r}") from None

    def card(self, name: str) -> int:
        return self.var(name).card

    def parents(self, name: str) -> tuple[str, ...]:
        self.var(name)
        return self.cpts[name].parents

    def children(self, name: str) -> list[str]:
        self.var(name)
        order = {n: i for i, n in enumerate(self.names)}
        return sorted(self.graph.successors(name), key=order.__getitem__)

    def descendants(self, name: str) -> set[str]:
        self.var(name)
        return nx.descendants(self.graph, name)

    def ancestors(self, name: str) -> set[str]:
        self.var(name)
        return nx.ancestors(self.graph, name)

    @cached_property
    def topological_order(self) -> list[str]:
        order = {n: i for i, n in enumerate(self.names)}
        return list(nx.lexicographical_topological_sort(self.graph, key=order.__getitem__))

    def joint_size(self) -> int:
        return int(np.prod([v.card for v in self.variables], dtype=object))

    def replace(self, variables=None, cpts=None, arc_signs=None) -> "BayesianNetwork":
        """Copy with selected variables/CPTs swapped in by name."""
        new_vars = dict(self._by_name)
        for v in variables or ():
            new_vars[v.name] = v
        new_cpts = dict(self.cpts)
        new_cpts.update(cpts or {})
        return BayesianNetwork(
            variables=tuple(new_vars[n] for n in self.names),
            arcs=self.arcs,
            cpts=new_cpts,
            arc_signs=dict(self.arc_signs) if arc_signs is None else arc_signs,
        )

    def structurally_equal(self, other: "BayesianNetwork") -> bool:
        return (
            self.variables == other.variables
            and sorted(self.arcs) == sorted(other.arcs)
            and set(self.cpts) == set(other.cpts)
            and all(self.cpts[n].same_values(other.cpts[n]) for n in self.cpts)
            and {k: str(s) for k, s in self.arc_signs.items()}
            == {k: str(s) for k, s in other.arc_signs.items()}
        )


# ---------------------------------------------------------------------------
# file format


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"syntax error: {exc.msg}", exc.lineno, exc.colno) from None


def _require(obj, key, ctx):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{ctx}: missing field {key!r}")
    return obj[key]


def network_from_dict(doc: Mapping, validate_net: bool = True) -> BayesianNetwork:
    from .stochdom import Sign

    variables = []
    seen = set()
    for i, vd in enumerate(_require(doc, "variables", "document")):
        name = _require(vd, "name", f"variables[{i}]")
        if name in seen:
            raise ParseError(f"duplicate variable {name!r}")
        seen.add(name)
        states = _require(vd, "states", f"variable {name!r}")
        try:
            variables.append(Variable(str(name), tuple(str(s) for s in states)))
        except NetworkError as exc:
            raise ParseError(str(exc)) from None
    by_name = {v.name: v for v in variables}

    def known(name, ctx):
        if name not in by_name:
            raise ParseError(f"{ctx}: unknown variable {name!r}")
        return name

    arcs, signs = [], {}
    for i, ad in enumerate(doc.get("arcs", [])):
        src = known(_require(ad, "from", f"arcs[{i}]"), f"arcs[{i}]")
        dst = known(_require(ad, "to", f"arcs[{i}]"), f"arcs[{i}]")
        if (src, dst) in arcs:
            raise ParseError(f"duplicate arc {src}->{dst}")
        arcs.append((src, dst))
        if ad.get("sign") is not None:
            try:
                signs[(src, dst)] = Sign.parse(ad["sign"])
            except ValueError as exc:
                raise ParseError(f"arcs[{i}]: {exc}") from None

    cpts = {}
    for i, cd in enumerate(doc.get("cpts", [])):
        child = known(_require(cd, "child", f"cpts[{i}]"), f"cpts[{i}]")
        if child in cpts:
            raise ParseError(f"duplicate CPT for {child!r}")
        parents = [known(p, f"CPT of {child!r}") for p in cd.get("parents", [])]
        shape = [by_name[p].card for p in parents] + [by_name[child].card]
        table = np.full(shape, np.nan)
        for j, rd in enumerate(_require(cd, "rows", f"CPT of {child!r}")):
            given = tuple(int(g) for g in rd.get("given", []))
            p = _require(rd, "p", f"CPT of {child!r} row {j}")
            if len(given) != len(parents):
                raise ParseError(f"CPT of {child!r} row {j}: 'given' has {len(given)} entries, expected {len(parents)}")
            if any(not 0 <= g < s for g, s in zip(given, shape)):
                raise ParseError(f"CPT of {child!r} row {j}: parent state index out of range")
            if len(p) != shape[-1]:
                raise ParseError(f"CPT of {child!r} row {j}: expected {shape[-1]} probabilities, got {len(p)}")
            if not np.all(np.isnan(table[given])):
                raise ParseError(f"CPT of {child!r}: duplicate row for given={list(given)}")
            table[given] = [float(x) for x in p]
        cpts[child] = Cpt(child, parents, table)

    for v in variables:
        if v.name not in cpts:
            raise ParseError(f"no CPT for variable {v.name!r}")

    net = BayesianNetwork(tuple(variables), tuple(arcs), cpts, signs)
    if validate_net:
        report = validate(net)
        if report:
            raise ValidationError(report)
    return net


def parse_network(text: str, validate_net: bool = True) -> BayesianNetwork:
    """Parse the JSON network format; validates unless told otherwise."""
    return network_from_dict(_load_json(text), validate_net=validate_net)


def load_network(path, validate_net: bool = True) -> BayesianNetwork:
    with open(path) as fh:
        return parse_network(fh.read(), validate_net=validate_net)


def network_to_dict(net: BayesianNetwork) -> dict:
    arcs = []
    for a in net.arcs:
        d = {"from": a[0], "to": a[1]}
        if a in net.arc_signs:
            d["sign"] = str(net.arc_signs[a])
        arcs.append(d)
    cpts = []
    for v in net.variables:
        cpt = net.cpts[v.name]
        rows = [
            {"given": list(map(int, idx)), "p": [float(x) for x in r]}
            for idx, r in cpt.rows().items()
        ]
        cpts.append({"child": v.name, "parents": list(cpt.parents), "rows": rows})
    return {
        "variables": [{"name": v.name, "states": list(v.states)} for v in net.variables],
        "arcs": arcs,
        "cpts": cpts,
    }


def serialize_network(net: BayesianNetwork, indent: int | None = 1) -> str:
    return json.dumps(network_to_dict(net), indent=indent)


def parse_evidence(net: BayesianNetwork, text: str | None) -> Evidence:
    """``"A=a2,E=true"`` -> ``{"A": 1, "E": 1}`` (states by label)."""
    ev: Evidence = {}
    if not text:
        return ev
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise NetworkError(f"bad evidence item {item!r}; expected NAME=STATE")
        name, label = (s.strip() for s in item.split("=", 1))
        ev[name] = net.var(name).index(label)
    return ev


def check_evidence(net: BayesianNetwork, evidence: Mapping[str, int]) -> None:
    for name, idx in evidence.items():
        card = net.card(name)
        if not 0 <= idx < card:
            raise NetworkError(f"evidence {name}={idx} out of range (card {card})")


# ---------------------------------------------------------------------------
# validation


def _sign_compatible(declared, detected) -> bool:
    from .stochdom import Sign

    if declared == Sign.AMBIGUOUS or declared == detected:
        return True
    # identical rows satisfy both dominance directions
    return detected == Sign.ZERO and declared in (Sign.POSITIVE, Sign.NEGATIVE)


def validate(net: BayesianNetwork) -> list[Violation]:
    """Every invariant violation found; an empty list means the network is sound."""
    from .stochdom import detect_sign

    report: list[Violation] = []
    g = net.graph
    if not nx.is_directed_acyclic_graph(g):
        cycle = nx.find_cycle(g)
        path = " -> ".join([u for u, _ in cycle] + [cycle[0][0]])
        report.append(Violation("cycle", f"arcs form a cycle {path}", path))

    for v in net.variables:
        cpt = net.cpts.get(v.name)
        if cpt is None:
            report.append(Violation("missing-cpt", f"no CPT for {v.name!r}", v.name))
            continue
        incoming = {u for u, w in net.arcs if w == v.name}
        if set(cpt.parents) != incoming or len(cpt.parents) != len(incoming):
            report.append(
                Violation(
                    "parent-mismatch",
                    f"CPT parents {list(cpt.parents)} differ from incoming arcs {sorted(incoming)}",
                    v.name,
                )
            )
        expected = tuple(net.card(p) for p in cpt.parents if p in net) + (v.card,)
        if cpt.table.shape != expected:
            report.append(Violation("shape", f"CPT shape {cpt.table.shape} != {expected}", v.name))
            continue
        for idx in np.ndindex(*cpt.table.shape[:-1]):
            row = cpt.table[idx]
            where = f"{v.name} | given={list(idx)}"
            if np.any(np.isnan(row)):
                report.append(Violation("missing-row", "no probabilities for this parent instantiation", where))
            elif np.any(row < 0) or np.any(row > 1):
                report.append(Violation("row-range", f"entries outside [0, 1]: {row.tolist()}", where))
            elif abs(row.sum() - 1.0) > ROW_TOL:
                report.append(Violation("row-normalization", f"row sums to {row.sum():.12g}", where))

    if not any(x.kind in ("missing-row", "row-range", "row-normalization", "shape", "missing-cpt") for x in report):
        for (src, dst), declared in net.arc_signs.items():
            cpt = net.cpts[dst]
            if src not in cpt.parents:
                continue
            detected = detect_sign(cpt, src)
            if not _sign_compatible(declared, detected):
                report.append(
                    Violation(
                        "sign-inconsistency",
                        f"declared {declared} but CPT yields {detected}",
                        f"{src}->{dst}",
                    )
                )
    return report


# ---------------------------------------------------------------------------
# structural queries


def is_descendant(net: BayesianNetwork, u: str, v: str) -> bool:
    """True iff a directed path v -> ... -> u exists (u strictly below v)."""
    net.var(u)
    net.var(v)
    return u != v and nx.has_path(net.graph, v, u)


def ancestral_order_exists(net: BayesianNetwork, E: Iterable[str], A: str, Y: Iterable[str]) -> bool:
    """Whether some ancestral ordering lists all of ``E``, then ``A``, then all of ``Y``."""
    E, Y = set(E), set(Y)
    for name in E | Y | {A}:
        net.var(name)
    if A in E or A in Y or E & Y:
        raise NetworkError("E, A and Y must be disjoint")
    below_a = net.descendants(A)
    below_y = set().union(*(net.descendants(y) for y in Y)) if Y else set()
    if E & (below_a | below_y):
        return False
    return A not in below_y


def d_separated(net: BayesianNetwork, X: str, W: str, S: Iterable[str]) -> bool:
    S = set(S)
    for name in S | {X, W}:
        net.var(name)
    if X == W or X in S or W in S:
        raise NetworkError("d-separation needs distinct X, W outside the conditioning set")
    return nx.is_d_separator(net.graph, {X}, {W}, S)


def instantiations(net: BayesianNetwork, names: Sequence[str]):
    """All joint state-index tuples for ``names`` in row-major order."""
    return product(*(range(net.card(n)) for n in names))
