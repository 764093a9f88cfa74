"""Integer lattice / multiset algebra and brute-force submodularity checks.

Points of the lattice ``{0..k_1-1} x ... x {0..k_n-1}`` are plain tuples of
ints; the same tuple is the multiplicity vector of a multiset over the
ground set ``{0..n-1}``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

ENUMERATION_CAP = 10**7

# Inequality slack used by every checker; values are floats.
TOLERANCE = 1e-9


class DomainMismatchError(ValueError):
    pass


class DomainTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeDomain:
    """Product of integer chains, one per ground-set element."""

    levels: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(int(k) for k in self.levels)
        if len(levels) < 1:
            raise ValueError("domain needs at least one element")
        if any(k < 2 for k in levels):
            raise ValueError(f"every element needs >= 2 levels, got {levels}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def uniform(cls, n: int, k: int) -> "LatticeDomain":
        return cls((k,) * n)

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def kmax(self) -> int:
        return max(self.levels)

    @property
    def is_uniform(self) -> bool:
        return len(set(self.levels)) == 1

    @property
    def size(self) -> int:
        return math.prod(self.levels)

    @property
    def top(self) -> tuple[int, ...]:
        return tuple(k - 1 for k in self.levels)

    @property
    def bottom(self) -> tuple[int, ...]:
        return (0,) * self.n

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.n and all(0 <= int(v) < k for v, k in zip(x, self.levels))

    def require_enumerable(self, cap: int = ENUMERATION_CAP) -> None:
        if self.size > cap:
            raise DomainTooLargeError(
                f"domain with {self.size} points is too large to enumerate (cap {cap})"
            )

    def points(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        """All lattice points as an ``(size, n)`` int array in lexicographic order."""
        self.require_enumerable(cap)
        grids = np.indices(self.levels, dtype=np.int64)
        return grids.reshape(self.n, -1).T.copy()

    def ravel(self, X: np.ndarray) -> np.ndarray:
        """Flat lexicographic index of each row of ``X``."""
        return np.ravel_multi_index(tuple(np.asarray(X).T), self.levels)


def _check_pair(x, y, domain):
    if len(x) != len(y):
        raise DomainMismatchError(f"points of length {len(x)} and {len(y)}")
    if domain is not None:
        for p in (x, y):
            if not domain.contains(p):
                raise DomainMismatchError(f"{tuple(p)} is outside {domain.levels}")


def join(x, y, domain: LatticeDomain | None = None) -> tuple[int, ...]:
    _check_pair(x, y, domain)
    return tuple(max(int(a), int(b)) for a, b in zip(x, y))


def meet(x, y, domain: LatticeDomain | None = None) -> tuple[int, ...]:
    _check_pair(x, y, domain)
    return tuple(min(int(a), int(b)) for a, b in zip(x, y))


def multiset_difference(x, y, domain: LatticeDomain | None = None) -> tuple[int, ...]:
    """Clamped difference ``(x - y) v 0``."""
    _check_pair(x, y, domain)
    return tuple(max(int(a) - int(b), 0) for a, b in zip(x, y))


def leq(x, y) -> bool:
    """Sub-multiset relation ``x <= y`` (componentwise)."""
    return all(int(a) <= int(b) for a, b in zip(x, y))


def enumerate_domain(
    domain: LatticeDomain, cap: int = ENUMERATION_CAP
) -> Iterator[tuple[int, ...]]:
    domain.require_enumerable(cap)
    return itertools.product(*(range(k) for k in domain.levels))


@dataclass
class CheckReport:
    """Outcome of an exhaustive (or sampled) inequality scan.

    ``witness`` holds the first violating configuration in scan order and
    ``deficit`` the amount by which the inequality failed (negative).
    ``worst`` is the smallest slack seen over everything checked.
    """

    passed: bool
    checked: int = 0
    witness: dict | None = None
    deficit: float = 0.0
    worst: float = math.inf
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed


def _value_table(f, cap):
    f.domain.require_enumerable(cap)
    return np.asarray(f.table(), dtype=float).ravel()


def _chunk_rows(total, width):
    # keep the (rows, total, width) temporaries around a few million entries
    return max(1, min(total, 4_000_000 // max(1, total * width)))


def check_lattice_submodular(f, cap: int = ENUMERATION_CAP, tol: float = TOLERANCE) -> CheckReport:
    """Scan ``f(x) + f(y) >= f(x v y) + f(x ^ y)`` over all ordered pairs.

    Pairs are visited with ``x`` as the outer and ``y`` as the inner loop,
    both in lexicographic order; the first pair whose slack is below
    ``-tol`` is reported.
    """
    domain = f.domain
    vals = _value_table(f, cap)
    pts = domain.points(cap)
    N = len(pts)
    worst = math.inf
    step = _chunk_rows(N, domain.n)
    for start in range(0, N, step):
        X = pts[start : start + step, None, :]
        J = domain.ravel(np.maximum(X, pts[None]).reshape(-1, domain.n)).reshape(-1, N)
        M = domain.ravel(np.minimum(X, pts[None]).reshape(-1, domain.n)).reshape(-1, N)
        slack = vals[start : start + step, None] + vals[None, :] - vals[J] - vals[M]
        worst = min(worst, float(slack.min()))
        bad = np.flatnonzero(slack.ravel() < -tol)
        if bad.size:
            a, b = divmod(int(bad[0]), N)
            x, y = tuple(int(v) for v in pts[start + a]), tuple(int(v) for v in pts[b])
            return CheckReport(
                passed=False,
                checked=(start + a) * N + b + 1,
                witness={"x": x, "y": y, "join": join(x, y), "meet": meet(x, y)},
                deficit=float(slack[a, b]),
                worst=worst,
            )
    return CheckReport(passed=True, checked=N * N, worst=worst)


def check_dr_submodular(f, cap: int = ENUMERATION_CAP, tol: float = TOLERANCE) -> CheckReport:
    """Scan diminishing returns ``f(x+e_i) - f(x) >= f(y+e_i) - f(y)`` for ``x <= y``.

    Only coordinates with ``y_i + 1 < k_i`` are tested. Scan order is ``x``
    (outer), ``y``, then coordinate ``i``; ``i`` in the witness is 0-based.
    """
    domain = f.domain
    vals = _value_table(f, cap).reshape(domain.levels)
    pts = domain.points(cap)
    N, n = pts.shape
    # gains[p, i] = f(p + e_i) - f(p), NaN where p_i is already at the top
    gains = np.full((N, n), np.nan)
    for i, k in enumerate(domain.levels):
        lo = [slice(None)] * n
        hi = [slice(None)] * n
        lo[i], hi[i] = slice(0, k - 1), slice(1, k)
        g = np.full(domain.levels, np.nan)
        g[tuple(lo)] = vals[tuple(hi)] - vals[tuple(lo)]
        gains[:, i] = g.ravel()
    worst = math.inf
    checked = 0
    step = _chunk_rows(N, n)
    for start in range(0, N, step):
        X = pts[start : start + step]
        comparable = np.all(X[:, None, :] <= pts[None, :, :], axis=2)
        slack = gains[start : start + step, None, :] - gains[None, :, :]
        valid = comparable[:, :, None] & ~np.isnan(gains)[None, :, :]
        checked += int(valid.sum())
        slack = np.where(valid, slack, np.inf)
        worst = min(worst, float(slack.min()))
        bad = np.flatnonzero(slack.ravel() < -tol)
        if bad.size:
            a, rest = divmod(int(bad[0]), N * n)
            b, i = divmod(rest, n)
            x, y = tuple(int(v) for v in pts[start + a]), tuple(int(v) for v in pts[b])
            return CheckReport(
                passed=False,
                checked=checked,
                witness={
                    "x": x,
                    "y": y,
                    "i": i,
                    "gain_x": float(gains[start + a, i]),
                    "gain_y": float(gains[b, i]),
                },
                deficit=float(slack[a, b, i]),
                worst=worst,
            )
    return CheckReport(passed=True, checked=checked, worst=worst)


def check_monotone(f, cap: int = ENUMERATION_CAP, tol: float = TOLERANCE) -> CheckReport:
    """Monotonicity scan ``f(x) <= f(y)`` for ``x <= y``.

    Checking every unit step ``f(x + e_i) >= f(x)`` is equivalent, since any
    comparable pair is joined by a chain of unit steps.
    """
    domain = f.domain
    vals = _value_table(f, cap).reshape(domain.levels)
    worst = math.inf
    checked = 0
    first = None
    for i, k in enumerate(domain.levels):
        lo = [slice(None)] * domain.n
        hi = [slice(None)] * domain.n
        lo[i], hi[i] = slice(0, k - 1), slice(1, k)
        step = vals[tuple(hi)] - vals[tuple(lo)]
        checked += step.size
        worst = min(worst, float(step.min()))
        bad = np.argwhere(step < -tol)
        if bad.size:
            x = tuple(int(v) for v in bad[0])
            flat = np.ravel_multi_index(x, domain.levels)
            if first is None or flat < first[0]:
                first = (flat, x, i, float(step[tuple(bad[0])]))
    if first is None:
        return CheckReport(passed=True, checked=checked, worst=worst)
    _, x, i, d = first
    y = list(x)
    y[i] += 1
    return CheckReport(
        passed=False, checked=checked, witness={"x": x, "y": tuple(y), "i": i}, deficit=d, worst=worst
    )
