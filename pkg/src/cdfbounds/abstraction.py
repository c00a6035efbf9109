"""Abstract networks under the dominance policy.

An abstracted node's states are merged into contiguous superstates whose
probabilities add up; each child's conditional CDF given a superstate is
the pointwise minimum (strengthen) or maximum (weaken) of its CDFs over the
member states. Both steps act on stored CDF values by selection only, so
abstracting several nodes gives the same bits in any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .netmodel import BayesianNetwork, Cpt, NetworkError, Variable
from .stochdom import GeneralizedSign, Sign


class Bound(str, Enum):
    LOWER = "lower"
    UPPER = "upper"

    def __str__(self):
        return self.value


class Direction(str, Enum):
    STRENGTHEN = "strengthen"
    WEAKEN = "weaken"
    EITHER = "either"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Partition:
    variable: str
    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple((int(k), int(l)) for k, l in self.blocks))
        if not self.blocks:
            raise NetworkError(f"partition of {self.variable!r} has no blocks")
        expect = 0
        for k, l in self.blocks:
            if k != expect or l < k:
                raise NetworkError(
                    f"partition of {self.variable!r} is not an ordered contiguous cover: {list(self.blocks)}"
                )
            expect = l + 1

    @classmethod
    def coarsest(cls, variable: str, card: int) -> "Partition":
        return cls(variable, ((0, card - 1),))

    @classmethod
    def finest(cls, variable: str, card: int) -> "Partition":
        return cls(variable, tuple((i, i) for i in range(card)))

    @property
    def card(self) -> int:
        """Number of original states covered."""
        return self.blocks[-1][1] + 1

    @property
    def size(self) -> int:
        return len(self.blocks)

    def is_finest(self) -> bool:
        return all(k == l for k, l in self.blocks)

    def refines(self, other: "Partition") -> bool:
        """Every block of ``self`` lies inside a block of ``other``."""
        if self.variable != other.variable or self.card != other.card:
            return False
        return all(any(k2 <= k and l <= l2 for k2, l2 in other.blocks) for k, l in self.blocks)

    def labels(self, states) -> tuple[str, ...]:
        return tuple(states[k] if k == l else f"{states[k]}..{states[l]}" for k, l in self.blocks)

    def check(self, var: Variable) -> None:
        if self.variable != var.name or self.card != var.card:
            raise NetworkError(f"partition covers {self.card} states; {var.name!r} has {var.card}")

    def to_list(self) -> list[list[int]]:
        return [[k, l] for k, l in self.blocks]


def direction_for_child(sigma: Sign, target: Bound) -> Direction:
    target = Bound(target)
    if sigma is Sign.ZERO:
        return Direction.EITHER
    if sigma is Sign.POSITIVE:
        return Direction.STRENGTHEN if target is Bound.LOWER else Direction.WEAKEN
    if sigma is Sign.NEGATIVE:
        return Direction.WEAKEN if target is Bound.LOWER else Direction.STRENGTHEN
    raise ValueError("no bounding direction for an ambiguous sign")


def _resolve(direction: Direction, target: Bound) -> Direction:
    # a zero-sign child is unaffected either way; pick a fixed side
    if direction is Direction.EITHER:
        return Direction.STRENGTHEN if target is Bound.LOWER else Direction.WEAKEN
    return direction


def abstract_node_cpt(cpt: Cpt, partition: Partition) -> Cpt:
    """Superstate probability = sum of member-state probabilities, per parent context."""
    if partition.card != cpt.shape[-1]:
        raise NetworkError(f"partition covers {partition.card} states; {cpt.child!r} has {cpt.shape[-1]}")
    if partition.is_finest():
        return cpt
    ends = [l for _, l in partition.blocks]
    return Cpt.from_cdf(cpt.child, cpt.parents, cpt.cdf[..., ends])


def _window(k: int, l: int, direction: Direction, gen: GeneralizedSign) -> tuple[int, int]:
    n = gen.n
    top = (gen.sign is Sign.POSITIVE) == (direction is Direction.STRENGTHEN)
    if top:
        return max(k, l - n + 1), l
    return k, min(l, k + n - 1)


def abstract_child_cpt(
    cpt: Cpt,
    parent: str,
    partition: Partition,
    direction: Direction,
    window: GeneralizedSign | None = None,
) -> Cpt:
    """Child CDFs given each superstate: envelope over the member states.

    With a verified generalized sign of ``parent`` on this child, only the
    ``n`` member states that can attain the envelope are scanned.
    """
    direction = Direction(direction)
    if direction is Direction.EITHER:
        raise ValueError("direction must be strengthen or weaken")
    axis = cpt.axis_of(parent)
    if partition.card != cpt.shape[axis]:
        raise NetworkError(f"partition covers {partition.card} states; {parent!r} has {cpt.shape[axis]}")
    if partition.is_finest():
        return cpt
    if window is not None and window.sign not in (Sign.POSITIVE, Sign.NEGATIVE):
        window = None
    C = np.moveaxis(cpt.cdf, axis, 0)
    reduce = np.min if direction is Direction.STRENGTHEN else np.max
    out = []
    for k, l in partition.blocks:
        lo, hi = _window(k, l, direction, window) if window is not None else (k, l)
        out.append(reduce(C[lo : hi + 1], axis=0))
    return Cpt.from_cdf(cpt.child, cpt.parents, np.moveaxis(np.stack(out), 0, axis))


@dataclass(frozen=True)
class PlanEntry:
    partition: Partition
    directions: Mapping[str, Direction]
    theorem: str = ""
    windows: Mapping[str, GeneralizedSign] = field(default_factory=dict)


@dataclass(frozen=True)
class AbstractionPlan:
    target: Bound
    entries: Mapping[str, PlanEntry]

    @classmethod
    def from_eligibility(
        cls,
        target: Bound,
        eligible: Iterable,
        partitions: Mapping[str, Partition],
        windows: Mapping[tuple[str, str], GeneralizedSign] | None = None,
    ) -> "AbstractionPlan":
        """Directions from each child's sign; ``windows`` keyed by ``(node, child)``."""
        target = Bound(target)
        windows = windows or {}
        entries = {}
        for el in eligible:
            dirs = {c.child: direction_for_child(c.sign, target) for c in el.children}
            win = {c: windows[(el.node, c)] for c in dirs if (el.node, c) in windows}
            entries[el.node] = PlanEntry(partitions[el.node], dirs, el.theorem, win)
        return cls(target, entries)

    def subset(self, nodes: Iterable[str]) -> "AbstractionPlan":
        return AbstractionPlan(self.target, {n: self.entries[n] for n in nodes})

    def to_dict(self) -> dict:
        return {
            "target": str(self.target),
            "entries": [
                {
                    "node": node,
                    "blocks": e.partition.to_list(),
                    "directions": {c: str(d) for c, d in e.directions.items()},
                    "theorem": e.theorem,
                }
                for node, e in self.entries.items()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: Mapping) -> "AbstractionPlan":
        entries = {}
        for e in doc["entries"]:
            entries[e["node"]] = PlanEntry(
                Partition(e["node"], tuple(map(tuple, e["blocks"]))),
                {c: Direction(d) for c, d in e.get("directions", {}).items()},
                e.get("theorem", ""),
            )
        return cls(Bound(doc["target"]), entries)


def check_plan(net: BayesianNetwork, plan: AbstractionPlan) -> None:
    owner: dict[str, str] = {}
    for node, entry in plan.entries.items():
        entry.partition.check(net.var(node))
        children = set(net.children(node))
        if set(entry.directions) != children:
            raise NetworkError(f"plan for {node!r} must give a direction for exactly its children {sorted(children)}")
        for c in children:
            if c in owner:
                raise NetworkError(f"abstracted nodes {owner[c]!r} and {node!r} share child {c!r}")
            owner[c] = node


def build_abn(net: BayesianNetwork, plan: AbstractionPlan) -> BayesianNetwork:
    """Apply every plan entry to ``net`` at once."""
    check_plan(net, plan)
    cpts = dict(net.cpts)
    for node, entry in plan.entries.items():
        for child, d in entry.directions.items():
            cpts[child] = abstract_child_cpt(
                cpts[child], node, entry.partition, _resolve(d, plan.target), entry.windows.get(child)
            )
    variables = []
    for node, entry in plan.entries.items():
        cpts[node] = abstract_node_cpt(cpts[node], entry.partition)
        if not entry.partition.is_finest():
            variables.append(Variable(node, entry.partition.labels(net.var(node).states)))
    changed = set(plan.entries) | {c for e in plan.entries.values() for c in e.directions}
    signs = {a: s for a, s in net.arc_signs.items() if a[1] not in changed}
    return net.replace(variables=variables, cpts=cpts, arc_signs=signs)
