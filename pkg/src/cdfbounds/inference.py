"""Exact posteriors by variable elimination, and a joint-enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .netmodel import BayesianNetwork, NetworkError
from .stochdom import cdf_from_pmf

BRUTE_FORCE_CAP = 10**7


class InferenceError(Exception):
    pass


class ZeroProbabilityEvidence(InferenceError):
    """The conditioning event has probability zero in the given network."""

    def __init__(self, evidence: Mapping[str, int]):
        self.evidence = dict(evidence)
        super().__init__(f"evidence {self.evidence} has zero probability")


class StateSpaceTooLarge(InferenceError):
    pass


@dataclass
class Factor:
    scope: tuple[str, ...]
    table: np.ndarray

    def aligned(self, scope: Sequence[str]) -> np.ndarray:
        """View of ``table`` broadcastable against ``scope``."""
        perm = sorted(range(len(self.scope)), key=lambda i: scope.index(self.scope[i]))
        t = np.transpose(self.table, perm)
        shape = [1] * len(scope)
        for i in perm:
            shape[scope.index(self.scope[i])] = self.table.shape[i]
        return t.reshape(shape)

    def reduce(self, evidence: Mapping[str, int]) -> "Factor":
        keep = [v for v in self.scope if v not in evidence]
        if len(keep) == len(self.scope):
            return self
        index = tuple(evidence[v] if v in evidence else slice(None) for v in self.scope)
        return Factor(tuple(keep), self.table[index])


def _product(factors: Sequence[Factor]) -> Factor:
    scope: list[str] = []
    for f in factors:
        for v in f.scope:
            if v not in scope:
                scope.append(v)
    out = np.ones([1] * len(scope))
    for f in factors:
        out = out * f.aligned(scope)
    return Factor(tuple(scope), out)


def _min_degree(factors: list[Factor], hidden: list[str], rank: Mapping[str, int]) -> str:
    def degree(v):
        nbrs = set()
        for f in factors:
            if v in f.scope:
                nbrs.update(f.scope)
        return len(nbrs) - 1

    return min(hidden, key=lambda v: (degree(v), rank[v]))


def _relevant(net: BayesianNetwork, names) -> set[str]:
    keep = set(names)
    for n in names:
        keep |= net.ancestors(n)
    return keep


def joint_posterior(
    net: BayesianNetwork,
    query: Sequence[str],
    evidence: Mapping[str, int],
    order: Sequence[str] | None = None,
    return_log_evidence: bool = False,
):
    """Normalized posterior over ``query`` (axes in that order) given ``evidence``.

    Nodes that are neither ancestors of the query nor of the evidence are
    dropped up front. Intermediate factors are rescaled by their maximum and
    the log of the scale carried, so ``Pr(e)`` is never underflowed.
    """
    query = list(query)
    for v in query:
        net.var(v)
        if v in evidence:
            raise InferenceError(f"query variable {v!r} is assigned in the evidence")
    if len(set(query)) != len(query):
        raise InferenceError("duplicate query variables")
    for v, idx in evidence.items():
        if not 0 <= idx < net.card(v):
            raise NetworkError(f"evidence {v}={idx} out of range")

    keep = _relevant(net, list(query) + list(evidence))
    rank = {n: i for i, n in enumerate(net.topological_order)}
    factors = []
    log_scale = 0.0
    for name in net.topological_order:
        if name not in keep:
            continue
        cpt = net.cpts[name]
        f = Factor(cpt.parents + (name,), np.asarray(cpt.table)).reduce(evidence)
        peak = f.table.max()
        if peak <= 0.0:
            raise ZeroProbabilityEvidence(evidence)
        log_scale += math.log(peak)
        if f.scope:
            factors.append(Factor(f.scope, f.table / peak))
    hidden = [n for n in net.topological_order if n in keep and n not in evidence and n not in query]
    if order is not None:
        order = [v for v in order if v in hidden]
        if set(order) != set(hidden):
            raise InferenceError("elimination order must cover every hidden variable")

    while hidden:
        v = order.pop(0) if order is not None else _min_degree(factors, hidden, rank)
        hidden.remove(v)
        touching = [f for f in factors if v in f.scope]
        factors = [f for f in factors if v not in f.scope]
        prod = _product(touching)
        summed = Factor(
            tuple(s for s in prod.scope if s != v),
            prod.table.sum(axis=prod.scope.index(v)),
        )
        peak = summed.table.max() if summed.table.size else 0.0
        if peak <= 0.0:
            raise ZeroProbabilityEvidence(evidence)
        log_scale += math.log(peak)
        factors.append(Factor(summed.scope, summed.table / peak))

    result = _product(factors) if factors else Factor((), np.ones(()))
    table = result.aligned(query).reshape([net.card(q) for q in query]) if query else result.table
    total = float(table.sum())
    if not total > 0.0:
        raise ZeroProbabilityEvidence(evidence)
    post = table / total
    if return_log_evidence:
        return post, log_scale + math.log(total)
    return post


def posterior(net: BayesianNetwork, Z: str, evidence: Mapping[str, int], order=None) -> np.ndarray:
    return joint_posterior(net, [Z], evidence, order=order)


def log_evidence(net: BayesianNetwork, evidence: Mapping[str, int]) -> float:
    _, logz = joint_posterior(net, [], evidence, return_log_evidence=True)
    return logz


def brute_force_joint(net: BayesianNetwork, cap: int = BRUTE_FORCE_CAP) -> np.ndarray:
    """The full joint table, axes in ``net.names`` order."""
    size = net.joint_size()
    if size > cap:
        raise StateSpaceTooLarge(f"joint has {size} states, cap is {cap}")
    names = net.names
    joint = np.ones([net.card(n) for n in names])
    for n in names:
        cpt = net.cpts[n]
        scope = cpt.parents + (n,)
        # place each CPT axis on its variable's joint axis
        t = np.asarray(cpt.table)
        perm = sorted(range(len(scope)), key=lambda i: names.index(scope[i]))
        shape = [1] * len(names)
        for i in perm:
            shape[names.index(scope[i])] = t.shape[i]
        joint = joint * np.transpose(t, perm).reshape(shape)
    return joint


def brute_force_posterior(
    net: BayesianNetwork, Z: str, evidence: Mapping[str, int], cap: int = BRUTE_FORCE_CAP
) -> np.ndarray:
    if Z in evidence:
        raise InferenceError(f"query variable {Z!r} is assigned in the evidence")
    joint = brute_force_joint(net, cap)
    names = net.names
    index = tuple(evidence.get(n, slice(None)) for n in names)
    sub = joint[index]
    rest = [n for n in names if n not in evidence]
    axes = tuple(i for i, n in enumerate(rest) if n != Z)
    marg = sub.sum(axis=axes)
    total = marg.sum()
    if total <= 0.0:
        raise ZeroProbabilityEvidence(evidence)
    return marg / total


def conditional_cdf_given(net: BayesianNetwork, Z: str, cond: Mapping[str, int]) -> np.ndarray:
    return cdf_from_pmf(posterior(net, Z, cond))
