"""Seeded random networks with controllable qualitative structure."""

from __future__ import annotations

import numpy as np

from .netmodel import BayesianNetwork, Cpt, Variable, cumulate, difference
from .stochdom import Sign


def monotone_cdf_table(rng, shape, signed_axes: dict[int, Sign]) -> np.ndarray:
    """CDF table whose parent axes in ``signed_axes`` carry the given sign.

    Rows are drawn from a flat Dirichlet, then each CDF column is sorted along
    each signed axis. Sorting one axis keeps earlier axes sorted, and sorting
    columns independently keeps every row nondecreasing.
    """
    m = shape[-1]
    rows = rng.dirichlet(np.ones(m), size=shape[:-1])
    C = cumulate(rows)
    for axis, sign in signed_axes.items():
        C = np.sort(C, axis=axis)
        if sign is Sign.POSITIVE:
            # larger parent state -> smaller CDF
            C = np.flip(C, axis=axis)
    C[..., -1] = 1.0
    return C


def random_cpt(rng, child: str, child_card: int, parents: dict[str, int], signs: dict[str, Sign]) -> Cpt:
    names = list(parents)
    shape = tuple(parents[p] for p in names) + (child_card,)
    signed = {names.index(p): s for p, s in signs.items()}
    C = monotone_cdf_table(rng, shape, signed)
    return Cpt(child, names, difference(C))


def random_network(
    seed: int,
    n_nodes: int = 5,
    min_states: int = 2,
    max_states: int = 4,
    max_parents: int = 2,
    arc_prob: float = 0.6,
    monotone_fraction: float = 1.0,
    declare_signs: bool = True,
    cards: dict[str, int] | None = None,
) -> BayesianNetwork:
    """Random DAG over ``X0..X{n-1}`` (topologically ordered by index).

    Each arc is decisively signed with probability ``monotone_fraction``;
    signed arcs are declared in the network when ``declare_signs`` is set.
    """
    rng = np.random.default_rng(seed)
    names = [f"X{i}" for i in range(n_nodes)]
    card = {n: int(rng.integers(min_states, max_states + 1)) for n in names}
    card.update(cards or {})
    variables = tuple(Variable(n, tuple(f"s{k}" for k in range(card[n]))) for n in names)
    arcs, signs, cpts = [], {}, {}
    for j, child in enumerate(names):
        earlier = names[:j]
        parents = [p for p in earlier if rng.random() < arc_prob]
        if len(parents) > max_parents:
            parents = sorted(rng.choice(parents, size=max_parents, replace=False).tolist(), key=names.index)
        child_signs = {}
        for p in parents:
            arcs.append((p, child))
            if rng.random() < monotone_fraction:
                s = Sign.POSITIVE if rng.random() < 0.5 else Sign.NEGATIVE
                child_signs[p] = s
                if declare_signs:
                    signs[(p, child)] = s
        cpts[child] = random_cpt(rng, child, card[child], {p: card[p] for p in parents}, child_signs)
    return BayesianNetwork(variables, tuple(arcs), cpts, signs)


def network_from_structure(seed, cards: dict[str, int], arcs, signs: dict | None = None) -> BayesianNetwork:
    """Random CPTs on a fixed DAG; ``signs`` maps arcs to the sign to impose."""
    rng = np.random.default_rng(seed)
    signs = signs or {}
    names = list(cards)
    variables = tuple(Variable(n, tuple(f"{n.lower()}{k}" for k in range(cards[n]))) for n in names)
    cpts = {}
    for child in names:
        parents = [u for u, v in arcs if v == child]
        child_signs = {p: signs[(p, child)] for p in parents if (p, child) in signs}
        cpts[child] = random_cpt(rng, child, cards[child], {p: cards[p] for p in parents}, child_signs)
    return BayesianNetwork(variables, tuple(arcs), cpts, dict(signs))
