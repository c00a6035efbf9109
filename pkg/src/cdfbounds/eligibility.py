"""Which nodes may be abstracted for a query, and with which child signs.

Two licences exist. When the query node ``Z`` is not a child of the candidate
``A`` (``T1``), every child of ``A`` needs a decisive sign towards ``Z`` given
the evidence and every instantiation of its siblings, ``Z`` must be
d-separated from ``A`` by the evidence plus ``A``'s children, the evidence
must precede ``A`` and ``A`` its children in some ancestral ordering, and no
child may descend from a sibling. When ``Z`` is a child of ``A`` (``T2``) only
the last two structural requirements apply.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import networkx as nx
import numpy as np

from .inference import BRUTE_FORCE_CAP, InferenceError, joint_posterior
from .netmodel import BayesianNetwork, NetworkError, ancestral_order_exists, d_separated, is_descendant
from .stochdom import (
    GeneralizedSign,
    Sign,
    detect_sign,
    dominance_gaps,
    generalized_from_gaps,
    sign_from_gaps,
)

DIRECT = "direct-cpt"
PATH = "path-propagation"
NUMERIC = "numeric-verification"

MAX_PATHS = 256


@dataclass(frozen=True)
class ChildSignReport:
    child: str
    sign: Sign
    method: str
    generalized: GeneralizedSign | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        d = {"child": self.child, "sign": str(self.sign), "method": self.method}
        if self.generalized is not None:
            d["generalized"] = {"sign": str(self.generalized.sign), "n": self.generalized.n}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass(frozen=True)
class Eligibility:
    node: str
    theorem: str
    children: tuple[ChildSignReport, ...]
    z_in_children: bool

    @property
    def child_names(self) -> list[str]:
        return [c.child for c in self.children]

    def sign_of(self, child: str) -> Sign:
        for c in self.children:
            if c.child == child:
                return c.sign
        raise KeyError(child)

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "eligible": True,
            "theorem": self.theorem,
            "z_in_children": self.z_in_children,
            "children": [c.to_dict() for c in self.children],
        }


@dataclass(frozen=True)
class Rejection:
    node: str
    condition: str
    detail: str
    children: tuple[ChildSignReport, ...] = field(default=())

    def __bool__(self):
        return False

    def to_dict(self) -> dict:
        d = {"node": self.node, "eligible": False, "condition": self.condition, "detail": self.detail}
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


def arc_sign(net: BayesianNetwork, parent: str, child: str) -> Sign:
    return detect_sign(net.cpts[child], parent)


def path_sign(net: BayesianNetwork, source: str, target: str) -> Sign:
    """Sign algebra over directed paths: product along, sum across.

    Ignores evidence and intercausal effects, so it is a hint, not a proof.
    """
    total = Sign.ZERO
    for count, path in enumerate(nx.all_simple_paths(net.graph, source, target)):
        if count >= MAX_PATHS:
            return Sign.AMBIGUOUS
        s = Sign.POSITIVE
        for u, v in zip(path, path[1:]):
            s = s * arc_sign(net, u, v)
        total = total + s
        if total is Sign.AMBIGUOUS:
            break
    return total


def _numeric_sign(net, Y_i, Z, evidence, siblings):
    """Exhaustive FSD check of ``F(z | y_i, e, sb)`` across ``y_i`` for every ``sb``."""
    scope = [Y_i, *siblings, Z]
    joint = joint_posterior(net, scope, evidence)
    mass = joint.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(mass > 0.0, joint / mass, np.nan)
    C = np.minimum(np.cumsum(cond, axis=-1), 1.0)
    C[..., -1] = np.where(np.isnan(C[..., -1]), np.nan, 1.0)
    live = ~np.isnan(C[..., 0])
    if not live.any():
        return Sign.AMBIGUOUS, None, "every conditioning combination has zero probability"
    D = dominance_gaps(C)
    skipped = int((~live).sum())
    note = f"{skipped} zero-probability contexts skipped" if skipped else ""
    return sign_from_gaps(D), generalized_from_gaps(D), note


def sign_report(
    net: BayesianNetwork,
    Y_i: str,
    Z: str,
    evidence: Mapping[str, int],
    siblings: Iterable[str] = (),
    cap: int = BRUTE_FORCE_CAP,
) -> ChildSignReport:
    """Sign of ``Y_i`` on ``Z`` given the evidence and all sibling states."""
    siblings = [s for s in siblings if s not in evidence]
    if Y_i == Z:
        raise NetworkError("derived sign needs Y_i != Z")
    if Y_i in evidence:
        raise NetworkError(f"{Y_i!r} is an evidence node")
    cond = set(evidence) | set(siblings)
    if d_separated(net, Z, Y_i, cond - {Z, Y_i}):
        return ChildSignReport(Y_i, Sign.ZERO, PATH, GeneralizedSign(Sign.ZERO, 1), "d-separated from query")
    hint = path_sign(net, Y_i, Z)
    scope_size = int(np.prod([net.card(n) for n in [Y_i, *siblings, Z]]))
    if net.joint_size() > cap or scope_size > cap:
        return ChildSignReport(Y_i, hint, PATH, None, "unverified: network exceeds enumeration cap")
    try:
        sign, gen, note = _numeric_sign(net, Y_i, Z, evidence, siblings)
    except InferenceError as exc:
        return ChildSignReport(Y_i, Sign.AMBIGUOUS, NUMERIC, None, str(exc))
    if (
        sign is hint
        and Z in net.children(Y_i)
        and not siblings
        and not evidence
        and len(net.parents(Z)) == 1
    ):
        return ChildSignReport(Y_i, sign, DIRECT, gen, note)
    detail = note if hint is sign else f"path sign {hint}; {note}".rstrip("; ")
    return ChildSignReport(Y_i, sign, NUMERIC, gen, detail)


def derived_sign(
    net: BayesianNetwork,
    Y_i: str,
    Z: str,
    evidence: Mapping[str, int],
    siblings: Iterable[str] = (),
    cap: int = BRUTE_FORCE_CAP,
) -> Sign:
    return sign_report(net, Y_i, Z, evidence, siblings, cap).sign


def _check_structure(net, A, children, evidence):
    """Conditions 3 and 4; returns a Rejection or None."""
    E = set(evidence)
    if E & set(children):
        return Rejection(A, "3", f"evidence {sorted(E & set(children))} is a child of {A}")
    if not ancestral_order_exists(net, E, A, children):
        return Rejection(A, "3", "no ancestral ordering puts the evidence before the node before its children")
    for y in children:
        for s in children:
            if s != y and is_descendant(net, y, s):
                return Rejection(A, "4", f"child {y} descends from sibling {s}")
    return None


def _pre(net, A, Z, evidence):
    net.var(A)
    net.var(Z)
    if A in evidence:
        raise NetworkError(f"{A!r} is an evidence node")
    if Z in evidence:
        raise NetworkError(f"query {Z!r} is an evidence node")
    if A == Z:
        raise NetworkError("the query node cannot be abstracted")


def check_theorem1(
    net: BayesianNetwork, A: str, Z: str, evidence: Mapping[str, int], cap: int = BRUTE_FORCE_CAP
) -> Eligibility | Rejection:
    _pre(net, A, Z, evidence)
    children = net.children(A)
    if Z in children:
        raise NetworkError(f"{Z!r} is a child of {A!r}; use check_theorem2")
    # structural conditions first; they are cheap and purely graphical
    E = set(evidence)
    if not d_separated(net, Z, A, E | set(children)):
        return Rejection(A, "2", f"{Z} is not d-separated from {A} by evidence and children")
    rejected = _check_structure(net, A, children, evidence)
    if rejected is not None:
        return rejected
    reports = []
    for y in children:
        rep = sign_report(net, y, Z, evidence, [s for s in children if s != y], cap)
        reports.append(rep)
        if not rep.sign.decisive:
            return Rejection(A, "1", f"child {y} has ambiguous sign towards {Z}", tuple(reports))
    return Eligibility(A, "T1", tuple(reports), False)


def check_theorem2(
    net: BayesianNetwork,
    A: str,
    Z: str,
    evidence: Mapping[str, int],
    strict: bool = False,
) -> Eligibility | Rejection:
    """``Z`` is a child of ``A``: strengthening ``Z``'s CPT w.r.t. ``A`` bounds from below.

    ``strict`` additionally requires ``Z`` to be ``A``'s only descendant.
    """
    _pre(net, A, Z, evidence)
    children = net.children(A)
    if Z not in children:
        raise NetworkError(f"{Z!r} is not a child of {A!r}; use check_theorem1")
    rejected = _check_structure(net, A, children, evidence)
    if rejected is not None:
        return rejected
    if strict and net.descendants(A) != {Z}:
        return Rejection(A, "strict", f"{Z} is not the only descendant of {A}")
    reports = []
    for y in children:
        if y == Z:
            reports.append(ChildSignReport(y, Sign.POSITIVE, DIRECT, None, "query node"))
        else:
            # siblings of Z are neither ancestors of Z nor of the evidence here
            reports.append(ChildSignReport(y, Sign.ZERO, PATH, GeneralizedSign(Sign.ZERO, 1), "barren for the query"))
    return Eligibility(A, "T2", tuple(reports), True)


def check_node(
    net: BayesianNetwork,
    A: str,
    Z: str,
    evidence: Mapping[str, int],
    strict_t2: bool = False,
    cap: int = BRUTE_FORCE_CAP,
) -> Eligibility | Rejection:
    if Z in net.children(A):
        return check_theorem2(net, A, Z, evidence, strict=strict_t2)
    return check_theorem1(net, A, Z, evidence, cap)
