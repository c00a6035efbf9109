"""Expected-value intervals from CDF bounds and decision pruning.

For a nondecreasing value assignment the stochastically larger CDF (the
pointwise smaller one) yields the larger expectation, so a CDF bracket gives
an expectation bracket. With a supermodular utility the best decision is
monotone in the outcome, which turns an outcome bracket into a contiguous
range of decisions worth considering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .stochdom import check_cdf, fsd, pmf_from_cdf

SUPERMODULAR_TOL = 1e-12
TIE_TOL = 1e-9


class DecisionError(ValueError):
    pass


class NotSupermodular(DecisionError):
    def __init__(self, witness: tuple[int, int, int, int], excess: float):
        self.witness = witness
        self.excess = excess
        d1, d2, x1, x2 = witness
        super().__init__(
            f"utility is not supermodular: u(d{d1},x{x2}) + u(d{d2},x{x1}) exceeds "
            f"u(d{d1},x{x1}) + u(d{d2},x{x2}) by {excess:.3g}"
        )


@dataclass(frozen=True)
class UtilityTable:
    decisions: tuple
    outcomes: tuple[float, ...]
    values: np.ndarray  # [decision, outcome]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(self.decisions), len(self.outcomes)):
            raise DecisionError(
                f"values must be {len(self.decisions)}x{len(self.outcomes)}, got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise DecisionError("utility values must be finite")
        out = np.asarray(self.outcomes, dtype=np.float64)
        if out.size == 0 or len(self.decisions) == 0:
            raise DecisionError("need at least one decision and one outcome")
        if np.any(np.diff(out) <= 0):
            raise DecisionError("outcome values must be strictly increasing")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "outcomes", tuple(float(x) for x in out))
        object.__setattr__(self, "decisions", tuple(self.decisions))

    @classmethod
    def from_function(cls, decisions: Sequence[float], outcomes: Sequence[float], fn) -> "UtilityTable":
        vals = [[fn(d, x) for x in outcomes] for d in decisions]
        return cls(tuple(decisions), tuple(outcomes), np.array(vals, dtype=np.float64))

    @classmethod
    def from_dict(cls, doc) -> "UtilityTable":
        try:
            return cls(tuple(doc["decisions"]), tuple(doc["outcomes"]), np.array(doc["values"], dtype=np.float64))
        except (KeyError, TypeError) as exc:
            raise DecisionError(f"utility table needs decisions, outcomes and values: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "decisions": list(self.decisions),
            "outcomes": list(self.outcomes),
            "values": self.values.tolist(),
        }


def load_utility(path) -> UtilityTable:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DecisionError(f"{path}: invalid JSON: {exc}") from None
    return UtilityTable.from_dict(doc)


@dataclass(frozen=True)
class DecisionSet:
    """Contiguous range ``[lo, hi]`` of decision indices."""

    lo: int
    hi: int
    labels: tuple = ()

    def __post_init__(self):
        if self.lo > self.hi:
            raise DecisionError(f"empty decision range [{self.lo}, {self.hi}]")

    @property
    def indices(self) -> list[int]:
        return list(range(self.lo, self.hi + 1))

    def __contains__(self, d: int) -> bool:
        return self.lo <= d <= self.hi

    def __len__(self):
        return self.hi - self.lo + 1

    def issubset(self, other: "DecisionSet") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def to_dict(self) -> dict:
        d = {"lo": self.lo, "hi": self.hi}
        if self.labels:
            d["decisions"] = [self.labels[i] for i in self.indices]
        return d


def expected_value(cdf, values) -> float:
    cdf = np.asarray(cdf, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if cdf.shape != values.shape:
        raise DecisionError(f"cdf has {cdf.size} states but {values.size} values were given")
    return float(np.dot(pmf_from_cdf(cdf), values))


def expected_value_interval(lower, upper, values) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    if np.any(np.diff(values) < 0):
        raise DecisionError("values must be nondecreasing in the state index")
    if not fsd(lower, upper):
        raise DecisionError("lower CDF must lie below the upper CDF")
    lo = expected_value(upper, values)
    hi = expected_value(lower, values)
    return lo, max(lo, hi)


def supermodularity_witness(u: UtilityTable, tol: float = SUPERMODULAR_TOL):
    """First ``(d1, d2, x1, x2)`` breaking increasing differences, with its excess."""
    V = u.values
    n, m = V.shape
    for d1 in range(n):
        for d2 in range(d1 + 1, n):
            diff = V[d2] - V[d1]  # nondecreasing in x iff supermodular for this pair
            for x1 in range(m):
                for x2 in range(x1 + 1, m):
                    excess = diff[x1] - diff[x2]
                    if excess > tol:
                        return (d1, d2, x1, x2), float(excess)
    return None


def is_supermodular(u: UtilityTable, tol: float = SUPERMODULAR_TOL) -> bool:
    return supermodularity_witness(u, tol) is None


def require_supermodular(u: UtilityTable) -> None:
    found = supermodularity_witness(u)
    if found is not None:
        raise NotSupermodular(*found)


def _argmax_set(scores: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    best = scores.max()
    return np.flatnonzero(scores >= best - tol * max(1.0, abs(best)))


def best_decisions_at(u: UtilityTable, x_index: int) -> list[int]:
    """``argmax_d u(d, x)`` at one grid outcome."""
    return _argmax_set(u.values[:, x_index]).tolist()


def admissible_decisions(u: UtilityTable, interval: tuple[float, float]) -> DecisionSet:
    """Decisions that can be optimal for some outcome value in ``interval``.

    Endpoints off the outcome grid take the union of the maximizers at the
    two grid outcomes around them; endpoints outside the grid are clamped.
    """
    require_supermodular(u)
    lo, hi = map(float, interval)
    if lo > hi:
        raise DecisionError(f"interval ({lo}, {hi}) is reversed")
    grid = np.asarray(u.outcomes)
    lo = min(max(lo, grid[0]), grid[-1])
    hi = min(max(hi, grid[0]), grid[-1])

    def around(x):
        exact = np.flatnonzero(np.abs(grid - x) <= 1e-12 * max(1.0, abs(x)))
        if exact.size:
            return [int(exact[0])]
        right = int(np.searchsorted(grid, x))
        return [right - 1, right]

    d_lo = min(min(best_decisions_at(u, i)) for i in around(lo))
    d_hi = max(max(best_decisions_at(u, i)) for i in around(hi))
    return DecisionSet(d_lo, d_hi, u.decisions)


def expected_utilities(u: UtilityTable, cdf) -> np.ndarray:
    cdf = check_cdf(cdf)
    if cdf.size != len(u.outcomes):
        raise DecisionError(f"cdf has {cdf.size} states, utility has {len(u.outcomes)} outcomes")
    return u.values @ pmf_from_cdf(cdf)


def optimal_decisions(u: UtilityTable, cdf) -> list[int]:
    """Maximizers of expected utility under ``cdf``."""
    return _argmax_set(expected_utilities(u, cdf)).tolist()


def admissible_decisions_from_bounds(u: UtilityTable, lower, upper) -> DecisionSet:
    """Decision range from a CDF bracket.

    Increasing differences make the expected-utility gain of a larger
    decision grow when the outcome distribution moves up, so every
    maximizer under a CDF inside the bracket lies between the smallest
    maximizer under ``upper`` and the largest under ``lower``.
    """
    require_supermodular(u)
    if not fsd(lower, upper):
        raise DecisionError("lower CDF must lie below the upper CDF")
    d_lo = min(optimal_decisions(u, upper))
    d_hi = max(optimal_decisions(u, lower))
    return DecisionSet(d_lo, d_hi, u.decisions)
