"""Iterative state-space abstraction: the anytime bounding loop.

Each iteration evaluates two abstract networks, one built for a lower and
one for an upper bound of ``F(z | e)``, then splits one superstate. Bounds
only ever tighten, and once every abstracted node is back to its original
states both equal the exact CDF.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .abstraction import AbstractionPlan, Bound, Partition, build_abn
from .eligibility import PATH, Eligibility, check_node, sign_report
from .inference import BRUTE_FORCE_CAP, ZeroProbabilityEvidence, posterior
from .netmodel import BayesianNetwork, NetworkError, cumulate
from .stochdom import Sign, detect_generalized_sign, fsd

log = logging.getLogger(__name__)

CONVERGENCE_TOL = 1e-9
STRATEGIES = ("widest", "leftmost")


@dataclass
class Iteration:
    index: int
    lower: np.ndarray
    upper: np.ndarray
    partitions: dict[str, list[list[int]]]
    wall_ms: float
    vacuous: bool = False
    exact_fallback: bool = False

    @property
    def width(self) -> float:
        return float(np.max(self.upper - self.lower))

    def to_dict(self) -> dict:
        d = {
            "iteration": self.index,
            "lower": [float(x) for x in self.lower],
            "upper": [float(x) for x in self.upper],
            "partitions": self.partitions,
            "wall_ms": self.wall_ms,
        }
        if self.vacuous:
            d["vacuous"] = True
        if self.exact_fallback:
            d["exact_fallback"] = True
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Iteration":
        return cls(
            index=int(d["iteration"]),
            lower=np.asarray(d["lower"], dtype=np.float64),
            upper=np.asarray(d["upper"], dtype=np.float64),
            partitions={k: [list(b) for b in v] for k, v in d.get("partitions", {}).items()},
            wall_ms=float(d.get("wall_ms", 0.0)),
            vacuous=bool(d.get("vacuous", False)),
            exact_fallback=bool(d.get("exact_fallback", False)),
        )


@dataclass
class BoundsTrace:
    query: str
    evidence: dict[str, int]
    states: tuple[str, ...]
    iterations: list[Iteration] = field(default_factory=list)
    converged: bool = False
    nodes: list[Eligibility] = field(default_factory=list)

    @property
    def final(self) -> Iteration:
        return self.iterations[-1]

    def check(self, slack: float = 1e-12) -> list[str]:
        """Invariant violations (bracketing per iteration, monotone tightening)."""
        problems = []
        for it in self.iterations:
            if not fsd(it.lower, it.upper, slack):
                problems.append(f"iteration {it.index}: lower does not dominate upper")
        for a, b in zip(self.iterations, self.iterations[1:]):
            if not fsd(a.lower, b.lower, slack):
                problems.append(f"iteration {b.index}: lower bound loosened")
            if not fsd(b.upper, a.upper, slack):
                problems.append(f"iteration {b.index}: upper bound loosened")
        return problems

    def header(self) -> dict:
        return {
            "query": self.query,
            "evidence": dict(self.evidence),
            "states": list(self.states),
            "nodes": [n.to_dict() for n in self.nodes],
        }

    def to_dict(self) -> dict:
        d = self.header()
        d["iterations"] = [it.to_dict() for it in self.iterations]
        d["converged"] = self.converged
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "BoundsTrace":
        return cls(
            query=d["query"],
            evidence=dict(d.get("evidence", {})),
            states=tuple(d.get("states", ())),
            iterations=[Iteration.from_dict(x) for x in d.get("iterations", [])],
            converged=bool(d.get("converged", False)),
        )


def select_abstraction_nodes(
    net: BayesianNetwork,
    Z: str,
    evidence: Mapping[str, int],
    strict_t2: bool = False,
    cap: int = BRUTE_FORCE_CAP,
    candidates=None,
    strategy: str = "widest",
) -> list[Eligibility]:
    """Greedy set of licensed nodes with pairwise disjoint children.

    Larger state spaces are taken first; ties follow network order. Nodes
    with a single state or no children are skipped since abstracting them
    changes nothing. A node only joins the set if the whole refinement
    schedule stays safe (see :func:`unsafe_step`).
    """
    if Z in evidence:
        raise NetworkError(f"query {Z!r} is an evidence node")
    order = {n: i for i, n in enumerate(net.names)}
    pool = [
        n
        for n in (candidates if candidates is not None else net.names)
        if n != Z and n not in evidence and net.card(n) > 1 and net.children(n)
    ]
    pool.sort(key=lambda n: (-net.card(n), order[n]))
    chosen: list[Eligibility] = []
    taken: set[str] = set()
    for node in pool:
        kids = set(net.children(node))
        if kids & taken:
            continue
        result = check_node(net, node, Z, evidence, strict_t2=strict_t2, cap=cap)
        if not result:
            continue
        trial = chosen + [result]
        if len(trial) > 1:
            parts = {el.node: Partition.coarsest(el.node, net.card(el.node)) for el in trial}
            bad = unsafe_step(net, Z, evidence, trial, parts, strategy, cap)
            if bad is not None:
                log.debug("skipping %s: %s", node, bad)
                continue
        chosen.append(result)
        taken |= kids
    return chosen


def schedule(partitions: Mapping[str, Partition], order, strategy: str = "widest"):
    """Yield ``(node, before, after)`` for every split the loop will make."""
    parts = dict(partitions)
    cursor = 0
    while True:
        for step in range(len(order)):
            name = order[(cursor + step) % len(order)]
            refined = split(parts[name], strategy)
            if refined is not None:
                before = dict(parts)
                parts[name] = refined
                cursor = (cursor + step + 1) % len(order)
                yield name, before, dict(parts)
                break
        else:
            return


def _required_sign(sigma: Sign) -> Sign:
    # zero-sign children are resolved as if positive when building plans
    return Sign.POSITIVE if sigma is Sign.ZERO else sigma


def unsafe_step(net, Z, evidence, nodes, partitions, strategy="widest", cap=BRUTE_FORCE_CAP) -> str | None:
    """First split of the schedule that could loosen a bound, or ``None``.

    Refining one node while the others stay put is a single-node abstraction
    inside the network where the others are already abstracted (abstraction
    commutes exactly). Query-parent nodes tighten in any such network; for
    the others, each child's sign must still hold there.
    """
    by_name = {el.node: el for el in nodes}
    for name, before, _ in schedule(partitions, [el.node for el in nodes], strategy):
        el = by_name[name]
        if el.theorem == "T2":
            continue
        others = [o for o in nodes if o.node != name and not before[o.node].is_finest()]
        if not others:
            continue
        for target in (Bound.LOWER, Bound.UPPER):
            base = build_abn(net, AbstractionPlan.from_eligibility(target, others, before))
            kids = el.child_names
            for rep in el.children:
                if rep.method == PATH and rep.sign is Sign.ZERO:
                    continue  # graphical, unaffected by other abstractions
                got = sign_report(base, rep.child, Z, evidence, [k for k in kids if k != rep.child], cap)
                if not _required_sign(rep.sign).satisfied_by(got.sign):
                    return (
                        f"splitting {name} with {[o.node for o in others]} abstracted ({target}): "
                        f"child {rep.child} sign {got.sign}, needed {rep.sign}"
                    )
    return None


def split(partition: Partition, strategy: str = "widest") -> Partition | None:
    """Halve one superstate at its midpoint; ``None`` when all are singletons."""
    wide = [(l - k, i) for i, (k, l) in enumerate(partition.blocks) if l > k]
    if not wide:
        return None
    if strategy == "widest":
        _, i = max(wide, key=lambda t: (t[0], -t[1]))
    elif strategy == "leftmost":
        _, i = wide[0]
    else:
        raise ValueError(f"unknown split strategy {strategy!r}; choose from {STRATEGIES}")
    k, l = partition.blocks[i]
    m = (k + l) // 2
    blocks = partition.blocks[:i] + ((k, m), (m + 1, l)) + partition.blocks[i + 1 :]
    return Partition(partition.variable, blocks)


def _vacuous(m: int) -> tuple[np.ndarray, np.ndarray]:
    lower = np.zeros(m)
    lower[-1] = 1.0
    return lower, np.ones(m)


def _bound_cdf(net, plan, Z, evidence):
    try:
        return cumulate(posterior(build_abn(net, plan), Z, evidence)), False
    except ZeroProbabilityEvidence:
        return None, True


def iterate_bounds(
    net: BayesianNetwork,
    Z: str,
    evidence: Mapping[str, int],
    max_iterations: int | None = None,
    deadline_ms: float | None = None,
    plan: Mapping[str, Partition] | None = None,
    strategy: str = "widest",
    tolerance: float = CONVERGENCE_TOL,
    early_stop: bool = True,
    strict_t2: bool = False,
    use_windows: bool = False,
    trace: BoundsTrace | None = None,
) -> Iterator[Iteration]:
    """Generator form of :func:`run_issa`; yields each iteration as computed.

    ``plan`` maps node names to initial partitions and replaces automatic
    node selection; each node must still be licensed for the query.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown split strategy {strategy!r}; choose from {STRATEGIES}")
    if max_iterations is not None and max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if Z in evidence:
        raise NetworkError(f"query {Z!r} is an evidence node")
    start = time.perf_counter()
    m = net.card(Z)
    if trace is None:
        trace = BoundsTrace(Z, dict(evidence), net.var(Z).states)
    # raises ZeroProbabilityEvidence for evidence impossible in the original network
    exact = posterior(net, Z, evidence)
    if plan is not None:
        nodes = []
        for name in plan:
            res = check_node(net, name, Z, evidence, strict_t2=strict_t2)
            if not res:
                raise NetworkError(f"plan node {name!r} is not licensed: condition {res.condition}: {res.detail}")
            nodes.append(res)
        owners: dict[str, str] = {}
        for el in nodes:
            for c in el.child_names:
                if c in owners:
                    raise NetworkError(f"plan nodes {owners[c]!r} and {el.node!r} share child {c!r}")
                owners[c] = el.node
        partitions = dict(plan)
        for name, p in partitions.items():
            p.check(net.var(name))
        bad = unsafe_step(net, Z, evidence, nodes, partitions, strategy) if len(nodes) > 1 else None
        if bad is not None:
            raise NetworkError(f"plan cannot guarantee tightening bounds: {bad}")
    else:
        nodes = select_abstraction_nodes(net, Z, evidence, strict_t2=strict_t2, strategy=strategy)
        partitions = {el.node: Partition.coarsest(el.node, net.card(el.node)) for el in nodes}
    trace.nodes = list(nodes)

    def elapsed():
        return (time.perf_counter() - start) * 1000.0

    if not nodes:
        F = cumulate(exact)
        it = Iteration(0, F, F.copy(), {}, elapsed(), exact_fallback=True)
        trace.iterations.append(it)
        trace.converged = True
        yield it
        return

    windows = {}
    if use_windows:
        for el in nodes:
            for c in el.child_names:
                g = detect_generalized_sign(net.cpts[c], el.node)
                if g is not None:
                    windows[(el.node, c)] = g

    order = [el.node for el in nodes]
    cursor = 0
    index = 0
    while True:
        plans = {
            target: AbstractionPlan.from_eligibility(target, nodes, partitions, windows)
            for target in (Bound.LOWER, Bound.UPPER)
        }
        lower, lv = _bound_cdf(net, plans[Bound.LOWER], Z, evidence)
        upper, uv = _bound_cdf(net, plans[Bound.UPPER], Z, evidence)
        vac_lower, vac_upper = _vacuous(m)
        if lv:
            lower = vac_lower
        if uv:
            upper = vac_upper
        it = Iteration(
            index,
            lower,
            upper,
            {n: partitions[n].to_list() for n in order},
            elapsed(),
            vacuous=lv or uv,
        )
        trace.iterations.append(it)
        all_fine = all(p.is_finest() for p in partitions.values())
        if all_fine or (early_stop and not (lv or uv) and it.width <= tolerance):
            trace.converged = True
        yield it
        if trace.converged:
            return
        index += 1
        if max_iterations is not None and index >= max_iterations:
            return
        if deadline_ms is not None and elapsed() >= deadline_ms:
            log.info("deadline reached after %d iterations", index)
            return
        for step in range(len(order)):
            name = order[(cursor + step) % len(order)]
            refined = split(partitions[name], strategy)
            if refined is not None:
                partitions[name] = refined
                cursor = (cursor + step + 1) % len(order)
                break


def run_issa(net: BayesianNetwork, Z: str, evidence: Mapping[str, int], **options) -> BoundsTrace:
    """Run the anytime loop to completion (or its limits) and return the trace.

    Options are those of :func:`iterate_bounds`.
    """
    trace = BoundsTrace(Z, dict(evidence), net.var(Z).states)
    for _ in iterate_bounds(net, Z, evidence, trace=trace, **options):
        pass
    return trace


@dataclass(frozen=True)
class IntervalProbability:
    """Bounds on ``Pr(x_i < X <= x_j)``; ``i == -1`` means no lower limit."""

    i: int
    j: int
    lower: float
    upper: float

    def to_dict(self) -> dict:
        return {"i": self.i, "j": self.j, "lower": self.lower, "upper": self.upper}


def interval_probability(lower, upper, i: int, j: int) -> IntervalProbability:
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    m = lower.shape[0]
    if not -1 <= i < j < m:
        raise ValueError(f"need -1 <= i < j < {m}, got i={i}, j={j}")
    if not fsd(lower, upper):
        raise ValueError("lower CDF must lie below the upper CDF")
    lo_i = 0.0 if i < 0 else lower[i]
    up_i = 0.0 if i < 0 else upper[i]
    lo = max(0.0, float(lower[j] - up_i))
    hi = float(upper[j] - lo_i)
    return IntervalProbability(i, j, min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0))
