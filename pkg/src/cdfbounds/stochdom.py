"""First-order stochastic dominance on ordered discrete spaces.

A CDF ``F`` dominates ``G`` (``fsd(F, G)``) when ``F <= G`` pointwise: ``F``
puts at least as much mass on large states. Qualitative signs summarize how
a child's conditional CDF moves with one parent in this order.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .netmodel import Cpt, cumulate, difference

FSD_TOL = 1e-9


class Sign(str, Enum):
    POSITIVE = "+"
    NEGATIVE = "-"
    ZERO = "0"
    AMBIGUOUS = "?"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Sign":
        text = {"−": "-", "pos": "+", "neg": "-"}.get(text, text)
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown sign {text!r}") from None

    @property
    def decisive(self) -> bool:
        return self is not Sign.AMBIGUOUS

    def __mul__(self, other: "Sign") -> "Sign":
        """Sign of a chain of influences."""
        if Sign.ZERO in (self, other):
            return Sign.ZERO
        if Sign.AMBIGUOUS in (self, other):
            return Sign.AMBIGUOUS
        return Sign.POSITIVE if self is other else Sign.NEGATIVE

    def __add__(self, other: "Sign") -> "Sign":
        """Sign of parallel influences."""
        if self is Sign.ZERO:
            return other
        if other is Sign.ZERO or self is other:
            return self
        return Sign.AMBIGUOUS

    def satisfied_by(self, detected: "Sign") -> bool:
        """Whether a detected sign establishes this one (0 establishes + and -)."""
        if self is Sign.AMBIGUOUS or detected is self:
            return True
        return detected is Sign.ZERO


@dataclass(frozen=True)
class GeneralizedSign:
    """Dominance that is only guaranteed between states at least ``n`` apart."""

    sign: Sign
    n: int

    def __str__(self):
        return f"{self.sign}{self.n}"


def check_pmf(p, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("PMF must be a nonempty vector")
    if np.any(p < -1e-12):
        raise ValueError(f"PMF has negative entry {p.min():.3g}")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"PMF sums to {p.sum():.12g}, not 1")
    return p


def check_cdf(F) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 1 or F.size == 0:
        raise ValueError("CDF must be a nonempty vector")
    if np.any(np.diff(F) < -1e-12):
        raise ValueError("CDF is not nondecreasing")
    if abs(F[-1] - 1.0) > 1e-9:
        raise ValueError(f"CDF ends at {F[-1]:.12g}, not 1")
    if F.min() < -1e-12 or F.max() > 1 + 1e-12:
        raise ValueError("CDF leaves [0, 1]")
    return F


def cdf_from_pmf(p) -> np.ndarray:
    return cumulate(check_pmf(p))


def pmf_from_cdf(F) -> np.ndarray:
    return difference(np.asarray(F, dtype=np.float64))


def _same_space(F, G):
    F = np.asarray(F, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    if F.shape != G.shape:
        raise ValueError(f"CDFs over different spaces: {F.shape} vs {G.shape}")
    return F, G


def fsd(F, G, tol: float = FSD_TOL) -> bool:
    """``F`` first-order stochastically dominates ``G``."""
    F, G = _same_space(F, G)
    return bool(np.all(F <= G + tol))


def _stack(family: Sequence) -> np.ndarray:
    if len(family) == 0:
        raise ValueError("empty CDF family")
    arrs = [np.asarray(f, dtype=np.float64) for f in family]
    if len({a.shape for a in arrs}) != 1:
        raise ValueError("CDF family spans different spaces")
    return np.stack(arrs)


def cdf_min_envelope(family: Sequence) -> np.ndarray:
    """Pointwise minimum: the least dominated CDF dominating every member."""
    return _stack(family).min(axis=0)


def cdf_max_envelope(family: Sequence) -> np.ndarray:
    return _stack(family).max(axis=0)


def dominance_gaps(C: np.ndarray) -> np.ndarray:
    """``D[i, j] = max(C[j] - C[i])`` over all trailing axes.

    ``C`` holds conditional CDFs indexed first by the conditioning variable's
    state; NaN slices (impossible contexts) are ignored. ``D[i, j] <= tol``
    means state ``j``'s CDFs dominate state ``i``'s in every context.
    """
    m = C.shape[0]
    flat = C.reshape(m, -1)
    diff = flat[None, :, :] - flat[:, None, :]
    with np.errstate(invalid="ignore"):
        filled = np.where(np.isnan(diff), -np.inf, diff)
    return filled.max(axis=-1) if flat.shape[1] else np.full((m, m), -np.inf)


def _holds(D: np.ndarray, gap: int, tol: float) -> tuple[bool, bool]:
    m = D.shape[0]
    i, j = np.triu_indices(m, k=gap)
    if i.size == 0:
        return True, True
    return bool(np.all(D[i, j] <= tol)), bool(np.all(D[j, i] <= tol))


def sign_from_gaps(D: np.ndarray, tol: float = FSD_TOL) -> Sign:
    pos, neg = _holds(D, 1, tol)
    if pos and neg:
        return Sign.ZERO
    if pos:
        return Sign.POSITIVE
    if neg:
        return Sign.NEGATIVE
    return Sign.AMBIGUOUS


def generalized_from_gaps(D: np.ndarray, tol: float = FSD_TOL) -> GeneralizedSign | None:
    m = D.shape[0]
    first = sign_from_gaps(D, tol)
    if first.decisive:
        return GeneralizedSign(first, 1)
    for n in range(2, m):
        pos, neg = _holds(D, n, tol)
        if pos:
            return GeneralizedSign(Sign.POSITIVE, n)
        if neg:
            return GeneralizedSign(Sign.NEGATIVE, n)
    return None


def _parent_first(cpt: Cpt, parent: str) -> tuple[np.ndarray, int]:
    axis = cpt.axis_of(parent)
    return np.moveaxis(cpt.cdf, axis, 0), axis


def detect_sign(cpt: Cpt, parent: str, tol: float = FSD_TOL) -> Sign:
    """Qualitative influence of ``parent`` on the CPT's child."""
    C, _ = _parent_first(cpt, parent)
    return sign_from_gaps(dominance_gaps(C), tol)


def detect_generalized_sign(cpt: Cpt, parent: str, tol: float = FSD_TOL) -> GeneralizedSign | None:
    """Smallest state gap ``n`` beyond which ``parent``'s influence is decisive.

    Returns ``None`` when no gap up to ``m - 1`` works in either direction.
    With ``n == 1`` the sign equals :func:`detect_sign` (including ``0``).
    """
    C, _ = _parent_first(cpt, parent)
    return generalized_from_gaps(dominance_gaps(C), tol)


def monotonize_cpt(cpt: Cpt, parent: str, target: Sign, direction: str) -> Cpt:
    """Force ``target`` sign of ``parent`` on the child by running envelopes.

    ``direction="raise"`` only ever increases CDF values (a weakening),
    ``"lower"`` only decreases them. The result is the closest table, state by
    state, with that property.
    """
    if target not in (Sign.POSITIVE, Sign.NEGATIVE):
        raise ValueError(f"target sign must be + or -, got {target}")
    if direction not in ("raise", "lower"):
        raise ValueError(f"direction must be 'raise' or 'lower', got {direction!r}")
    C, axis = _parent_first(cpt, parent)
    # + needs CDFs nonincreasing along the parent axis, - nondecreasing.
    from_top = (target is Sign.POSITIVE) == (direction == "raise")
    acc = np.maximum.accumulate if direction == "raise" else np.minimum.accumulate
    if from_top:
        out = acc(C[::-1], axis=0)[::-1]
    else:
        out = acc(C, axis=0)
    out = np.moveaxis(out, 0, axis)
    if np.array_equal(out, cpt.cdf):
        return cpt
    result = Cpt.from_cdf(cpt.child, cpt.parents, out)
    got = detect_sign(result, parent)
    assert target.satisfied_by(got), f"monotonize produced sign {got}"
    return result
