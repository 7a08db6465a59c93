"""Exact small-instance distributions by multinomial enumeration.

For a finite sample space (``space <= 6``) and tiny ``n`` (``<= 5``) every
empirical measure is enumerable with its multinomial probability, so the
law of any statistic of ``P_n`` is exact.  Probabilities are computed with
``fractions.Fraction`` when the cell probabilities are rational, otherwise
as floating sums (error well below 1e-14 at these sizes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np

_MAX_OUTCOMES = 200_000


@dataclass
class DiscreteLaw:
    values: np.ndarray  # ascending
    probs: list  # Fractions or floats, parallel to values

    def expectation(self) -> float:
        return float(sum(float(p) * v for p, v in zip(self.probs, self.values)))

    def moment(self, k: float) -> float:
        return float(sum(float(p) * v**k for p, v in zip(self.probs, self.values)))

    def tail(self, x: float, strict: bool = False) -> float:
        """``Pr{V > x}`` (strict) or ``Pr{V >= x}``."""
        tot = 0
        for p, v in zip(self.probs, self.values):
            if (v > x) if strict else (v >= x - 1e-15):
                tot += p
        return float(tot)

    def cdf(self, x: float) -> float:
        return 1.0 - self.tail(x, strict=True)


def _compositions(n: int, k: int):
    """All count vectors of length k summing to n."""
    for marks in combinations_with_replacement(range(k), n):
        counts = [0] * k
        for m in marks:
            counts[m] += 1
        yield tuple(counts)


def exact_small_oracle(probs: Sequence, n: int, statistic: Callable[[np.ndarray], float]) -> DiscreteLaw:
    """Exact law of ``statistic(P_n)`` where ``P_n`` is the empirical
    probability vector of ``n`` i.i.d. draws from ``probs``.

    ``statistic`` receives the empirical probability vector as floats.
    Values within 1e-12 of each other are merged into one atom.
    """
    k = len(probs)
    if math.comb(n + k - 1, k - 1) > _MAX_OUTCOMES:
        raise ValueError("outcome space too large for exact enumeration")
    exact = all(isinstance(p, Fraction) for p in probs)
    if not exact:
        probs = [float(p) for p in probs]
    if abs(float(sum(probs)) - 1.0) > 1e-12:
        raise ValueError("probs must sum to 1")
    atoms: dict = {}
    for counts in _compositions(n, k):
        if exact:
            pmf = Fraction(math.factorial(n))
            for c, p in zip(counts, probs):
                pmf *= p**c
                pmf /= math.factorial(c)
        else:
            pmf = float(math.factorial(n))
            for c, p in zip(counts, probs):
                pmf *= p**c / math.factorial(c)
        pn = np.asarray(counts, dtype=float) / n
        val = float(statistic(pn))
        key = round(val, 12)
        atoms[key] = atoms.get(key, Fraction(0) if exact else 0.0) + pmf
    vals = np.array(sorted(atoms))
    return DiscreteLaw(values=vals, probs=[atoms[v] for v in vals])


# -- statistic factories over explicit dictionaries ------------------------


def stat_sup_abs(rows: np.ndarray, p: np.ndarray, member_idx=None) -> Callable:
    """``sup_f |P_n f - P f|`` over the dictionary rows (or a subset)."""
    rows = np.asarray(rows, dtype=float)
    p = np.asarray(p, dtype=float)
    if member_idx is not None:
        rows = rows[list(member_idx)]
    means = rows @ p

    def stat(pn: np.ndarray) -> float:
        return float(np.max(np.abs(rows @ pn - means))) if len(rows) else 0.0

    return stat


def stat_sup_ratio(rows: np.ndarray, p: np.ndarray, member_idx=None) -> Callable:
    """``sup_f |P_n f / P f - 1|`` over rows with positive means."""
    rows = np.asarray(rows, dtype=float)
    p = np.asarray(p, dtype=float)
    if member_idx is not None:
        rows = rows[list(member_idx)]
    means = rows @ p
    keep = means > 0
    rows, means = rows[keep], means[keep]

    def stat(pn: np.ndarray) -> float:
        return float(np.max(np.abs(rows @ pn / means - 1.0))) if len(rows) else 0.0

    return stat


def stat_weighted_sup(rows: np.ndarray, p: np.ndarray, sigma: np.ndarray,
                      slice_edges: Sequence, phi_vals: Sequence) -> Callable:
    """Discretized weighted sup ``max_j ||P_n - P||_{slice j} / phi(hi_j)``.

    ``slice_edges`` is a list of (lo, hi] scale pairs and ``phi_vals`` the
    step-weight value per slice.
    """
    rows = np.asarray(rows, dtype=float)
    p = np.asarray(p, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    means = rows @ p
    groups = []
    for (lo, hi), w in zip(slice_edges, phi_vals):
        idx = np.where((sigma > lo) & (sigma <= hi))[0]
        if len(idx):
            groups.append((idx, w))

    def stat(pn: np.ndarray) -> float:
        best = 0.0
        for idx, w in groups:
            dev = float(np.max(np.abs(rows[idx] @ pn - means[idx])))
            best = max(best, dev / w)
        return best

    return stat


def stat_erm_excess(rows: np.ndarray, p: np.ndarray) -> Callable:
    """Excess risk ``P f_hat - min_f P f`` of the empirical risk minimizer
    (ties broken by the first index)."""
    rows = np.asarray(rows, dtype=float)
    p = np.asarray(p, dtype=float)
    means = rows @ p
    best_true = float(np.min(means))

    def stat(pn: np.ndarray) -> float:
        emp = rows @ pn
        return float(means[int(np.argmin(emp))] - best_true)

    return stat
