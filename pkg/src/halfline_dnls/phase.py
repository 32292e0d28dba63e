"""Resonance phase of the one-sided mode interactions.

When the equation is conjugated by the free propagator, a product of modes
``n_1, ..., n_{k+1}`` recombining into ``n = n_1 + ... + n_{k+1}`` picks up
the oscillation ``e^{it Phi}`` with

    Phi(n_1, ..., n_{k+1}) = -(n_1 + ... + n_{k+1})^alpha + sum_l n_l^alpha.

For positive frequencies and ``alpha >= 1`` the phase obeys the lower bound

    |Phi| >= (alpha - 1) * (largest n_l)^(alpha-1) * (second largest n_l),

so it never vanishes for ``alpha > 1``; that nonvanishing is what allows the
normal-form reduction to divide by Phi.  This module evaluates Phi exactly
(arbitrary-precision integers for integer alpha), certifies the lower bound
by exhaustive enumeration, and enumerates the additive semigroup that
confines the support of solutions.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Iterable, Optional, Sequence

__all__ = [
    "PhaseTuple",
    "PhaseCertificate",
    "resonance_phase",
    "phase_lower_bound",
    "certify_phase_bound",
    "support_semigroup",
    "worker_count",
]

# relative slack for the bound check when alpha is not an integer: the bound
# itself is sharp, but floating powers are not
FLOAT_ALPHA_SLACK = 1e-9


def _is_integer_alpha(alpha: float) -> bool:
    return float(alpha).is_integer()


def resonance_phase(alpha: float, indices: Sequence[int]):
    """``Phi = -(sum n_l)^alpha + sum n_l^alpha``.

    Exact (Python integer) for integer alpha; floating point otherwise.
    """
    idx = [int(n) for n in indices]
    if not idx or any(n < 1 for n in idx):
        raise ValueError("indices must be a nonempty tuple of positive integers")
    if _is_integer_alpha(alpha):
        a = int(alpha)
        return -(sum(idx) ** a) + sum(n**a for n in idx)
    af = float(alpha)
    return -math.pow(sum(idx), af) + math.fsum(math.pow(n, af) for n in idx)


def phase_lower_bound(alpha: float, indices: Sequence[int]):
    """``(alpha - 1) * max^(alpha-1) * second_max`` over the index tuple."""
    idx = sorted((int(n) for n in indices), reverse=True)
    if len(idx) < 2 or idx[-1] < 1:
        raise ValueError("need at least two positive indices")
    if alpha < 1:
        raise ValueError("the bound requires alpha >= 1")
    if _is_integer_alpha(alpha):
        a = int(alpha)
        return (a - 1) * idx[0] ** (a - 1) * idx[1]
    return (float(alpha) - 1.0) * math.pow(idx[0], float(alpha) - 1.0) * idx[1]


@dataclass(frozen=True)
class PhaseTuple:
    """An index tuple with its phase value and certified lower bound."""

    indices: tuple
    alpha: float
    phi: float
    bound: float

    @classmethod
    def build(cls, alpha: float, indices: Sequence[int]) -> "PhaseTuple":
        t = tuple(int(n) for n in indices)
        return cls(indices=t, alpha=float(alpha),
                   phi=resonance_phase(alpha, t),
                   bound=phase_lower_bound(alpha, t))

    def satisfies_bound(self) -> bool:
        if _is_integer_alpha(self.alpha):
            return abs(self.phi) >= self.bound
        return abs(self.phi) >= self.bound * (1.0 - FLOAT_ALPHA_SLACK)


@dataclass(frozen=True)
class PhaseCertificate:
    alpha: float
    k: int
    index_cap: int
    passed: bool
    tuples_checked: int
    counterexample: Optional[tuple] = None

    def to_dict(self) -> dict:
        d = {
            "alpha": self.alpha,
            "k": self.k,
            "cap": self.index_cap,
            "pass": self.passed,
            "tuples_checked": self.tuples_checked,
        }
        if self.counterexample is not None:
            d["counterexample"] = list(self.counterexample)
        return d


def worker_count() -> int:
    """Worker cap from HALFLINE_DNLS_THREADS (>= 1); defaults to 1."""
    raw = os.environ.get("HALFLINE_DNLS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _check_block(alpha, k, cap, leading: int) -> Optional[tuple]:
    # tuples are enumerated nonincreasing (sorted representatives only);
    # Phi is permutation symmetric, so this prunes the (k+1)! orderings
    for rest in combinations_with_replacement(range(leading, 0, -1), k):
        t = (leading, *rest)
        pt = PhaseTuple.build(alpha, t)
        if not pt.satisfies_bound():
            return t
    return None


def certify_phase_bound(alpha: float, k: int, index_cap: int,
                        workers: Optional[int] = None) -> PhaseCertificate:
    """Exhaustively check ``|Phi| >= (alpha-1) max^(alpha-1) smax`` over all
    (k+1)-tuples with entries in ``1..index_cap``.

    Integer alpha is checked in exact integer arithmetic.  Returns the first
    violating tuple if any.  Work is partitioned by leading (largest) index
    and may run on several threads; verdicts are merged by logical AND.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if index_cap < 1:
        raise ValueError("index_cap must be >= 1")
    workers = worker_count() if workers is None else max(1, workers)
    total = math.comb(index_cap + k, k + 1)
    leads = range(1, index_cap + 1)
    counterexample = None
    if workers == 1:
        for lead in leads:
            counterexample = _check_block(alpha, k, index_cap, lead)
            if counterexample is not None:
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(lambda m: _check_block(alpha, k, index_cap, m), leads):
                if res is not None and counterexample is None:
                    counterexample = res
    return PhaseCertificate(
        alpha=float(alpha), k=int(k), index_cap=int(index_cap),
        passed=counterexample is None,
        tuples_checked=total,
        counterexample=counterexample,
    )


def support_semigroup(generators: Iterable[int], cap: int) -> set:
    """All sums of one or more generators (with repetition) that are <= cap.

    This is the set that can carry spectrum when the initial data is
    supported on ``generators``: closed under addition within the cap.
    """
    gens = sorted({int(g) for g in generators})
    if any(g < 0 for g in gens):
        raise ValueError("generators must be nonnegative")
    if not gens or cap < 0:
        return set()
    reachable = [False] * (cap + 1)
    for g in gens:
        if g <= cap:
            reachable[g] = True
    for n in range(cap + 1):
        if not reachable[n]:
            continue
        for g in gens:
            if g == 0:
                continue
            if n + g <= cap:
                reachable[n + g] = True
    return {n for n, r in enumerate(reachable) if r}
