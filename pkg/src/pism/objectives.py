"""Integer submodular energy functions behind one evaluation interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lattice import ENUMERATION_CAP, LatticeDomain

# rows per vectorized evaluation; bounds the size of temporaries
_BATCH = 256


class Objective:
    """An energy ``f`` on a finite integer lattice.

    Subclasses implement ``_evaluate`` on an ``(S, n)`` int array. They may
    override ``_gains`` with a closed form of the single-coordinate
    differences ``f(x with x_i = l) - f(x with x_i = 0)``, which is all the
    gradient estimators need.

    Instances are read-only after construction and may be evaluated from
    several threads at once.
    """

    name = "objective"
    monotone: bool | None = None

    def __init__(self, domain: LatticeDomain, value_bound: tuple[float, float]):
        self.domain = domain
        lo, hi = float(value_bound[0]), float(value_bound[1])
        if lo > hi:
            raise ValueError(f"empty value bound [{lo}, {hi}]")
        self.value_bound = (lo, hi)
        self._table = None

    def _evaluate(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != self.domain.n:
            raise ValueError(f"expected points of shape (S, {self.domain.n}), got {X.shape}")
        if len(X) <= _BATCH:
            return np.asarray(self._evaluate(X), dtype=float)
        return np.concatenate([self._evaluate(X[s : s + _BATCH]) for s in range(0, len(X), _BATCH)])

    def evaluate(self, x: Sequence[int]) -> float:
        x = tuple(int(v) for v in x)
        if not self.domain.contains(x):
            raise ValueError(f"{x} is outside the domain {self.domain.levels}")
        return float(self.evaluate_batch(np.asarray([x]))[0])

    __call__ = evaluate

    def table(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        """Values on the whole domain, shaped ``domain.levels`` (cached)."""
        if self._table is None:
            pts = self.domain.points(cap)
            vals = np.empty(len(pts))
            step = 1 << 16
            for s in range(0, len(pts), step):
                vals[s : s + step] = self.evaluate_batch(pts[s : s + step])
            vals.setflags(write=False)
            self._table = vals.reshape(self.domain.levels)
        return self._table

    def _gains(self, X: np.ndarray, blocks: np.ndarray) -> np.ndarray:
        out = np.zeros((len(X), len(blocks), self.domain.kmax))
        for b, i in enumerate(blocks):
            Z = X.copy()
            Z[:, i] = 0
            base = self.evaluate_batch(Z)
            for level in range(1, self.domain.levels[i]):
                Z[:, i] = level
                out[:, b, level] = self.evaluate_batch(Z) - base
        return out

    def coordinate_gains(self, X, blocks=None) -> np.ndarray:
        """``out[s, b, l] = f(X_s with x_i = l) - f(X_s with x_i = 0)`` for ``i = blocks[b]``.

        Levels beyond ``k_i - 1`` are zero.
        """
        X = np.asarray(X, dtype=np.int64)
        blocks = np.arange(self.domain.n) if blocks is None else np.asarray(blocks, dtype=np.int64)
        if len(X) <= _BATCH:
            return self._gains(X, blocks)
        return np.concatenate([self._gains(X[s : s + _BATCH], blocks) for s in range(0, len(X), _BATCH)])

    def describe(self) -> dict:
        return {"kind": self.name, "levels": list(self.domain.levels)}


def value_range(f: Objective) -> tuple[float, float]:
    """Interval containing every value of ``f``; its width is the Hoeffding range."""
    return f.value_bound


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Dense non-negative weight matrix with zero diagonal."""

    weights: np.ndarray
    labels: tuple = ()
    edge_lines: int = 0

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"weights must be square, got shape {W.shape}")
        if (W < 0).any():
            raise ValueError("weights must be non-negative")
        if np.any(np.diag(W) != 0):
            raise ValueError("weights must have a zero diagonal")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(1, len(W) + 1)))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def num_pairs(self) -> int:
        """Distinct unordered node pairs carrying weight."""
        W = self.weights
        return int(np.count_nonzero(np.triu(W + W.T, 1)))

    @property
    def symmetric(self) -> bool:
        return bool(np.array_equal(self.weights, self.weights.T))

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.weights, other.weights)


def random_graph(n: int, edges: int, seed: int, weight: float = 1.0) -> WeightedGraph:
    """Undirected graph with ``edges`` distinct unit edges drawn uniformly."""
    pairs = np.array(np.triu_indices(n, 1)).T
    if edges > len(pairs):
        raise ValueError(f"at most {len(pairs)} edges fit on {n} nodes")
    rng = np.random.default_rng(seed)
    chosen = pairs[np.sort(rng.choice(len(pairs), size=edges, replace=False))]
    W = np.zeros((n, n))
    W[chosen[:, 0], chosen[:, 1]] = weight
    W[chosen[:, 1], chosen[:, 0]] = weight
    return WeightedGraph(W, edge_lines=edges)


class RevenueObjective(Objective):
    """Expected revenue of the influence-and-exploit strategy with discrete free units.

    ``f(x) = sum_i sum_{j != i} W_ij (1 - q^x_i) q^x_j``
    """

    name = "revenue"
    monotone = False

    def __init__(self, graph: WeightedGraph, q: float, k: int):
        if not 0.0 < q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {q}")
        if k < 2:
            raise ValueError("k must be at least 2")
        self.graph = graph
        self.q = float(q)
        self.W = graph.weights
        # level -> (1 - q^l, q^l)
        self._adv = 1.0 - self.q ** np.arange(k)
        self._stay = self.q ** np.arange(k)
        super().__init__(LatticeDomain.uniform(graph.n, k), (0.0, float(self.W.sum())))

    def _evaluate(self, X):
        stay = self._stay[X]
        return ((1.0 - stay) @ self.W * stay).sum(axis=1)

    def _gains(self, X, blocks):
        # Terms touching coordinate i: a_i (W b)_i + b_i (W^T a)_i, with a_0 = 0, b_0 = 1.
        stay = self._stay[X]
        out_w = stay @ self.W[blocks].T
        in_w = (1.0 - stay) @ self.W[:, blocks]
        return self._adv[None, None, :] * (out_w - in_w)[:, :, None]

    def describe(self):
        return {"kind": self.name, "n": self.graph.n, "k": self.domain.kmax, "q": self.q}


def revenue_objective(graph: WeightedGraph, q: float, k: int) -> RevenueObjective:
    return RevenueObjective(graph, q, k)


@dataclass(frozen=True, eq=False)
class FacilityWeights:
    """Utility tables ``table[c, j, l] = w_cj(l)`` for customer c, facility j, level l."""

    table: np.ndarray

    def __post_init__(self):
        w = np.array(self.table, dtype=float)
        if w.ndim != 3 or w.shape[2] < 2:
            raise ValueError(f"expected a (m, n, k) table with k >= 2, got {w.shape}")
        if np.any(w[:, :, 0] != 0):
            raise ValueError("utility at level 0 must be zero")
        if np.any(np.diff(w, axis=2) < 0):
            raise ValueError("utility tables must be non-decreasing in the level")
        w.setflags(write=False)
        object.__setattr__(self, "table", w)

    @property
    def m(self) -> int:
        return self.table.shape[0]

    @property
    def n(self) -> int:
        return self.table.shape[1]

    @property
    def k(self) -> int:
        return self.table.shape[2]


def synthetic_facility_weights(n: int, m: int, k: int, seed: int) -> FacilityWeights:
    """Random monotone utility tables.

    For each level ``l = 1..k-1`` draw ``L`` with standard normal entries,
    take ``|L L^T| / n`` and keep its first ``m`` rows and ``n`` columns as
    the utility increment of that level; cumulative sums over levels make
    every table non-decreasing with ``w(0) = 0``.
    """
    if min(n, m, k) < 1:
        raise ValueError("n, m and k must be positive")
    rng = np.random.default_rng(seed)
    d = max(n, m)
    increments = np.zeros((m, n, k))
    for level in range(1, k):
        L = rng.standard_normal((d, n))
        increments[:, :, level] = np.abs(L @ L.T / n)[:m, :n]
    return FacilityWeights(np.cumsum(increments, axis=2))


class FacilityLocationObjective(Objective):
    """``f(x) = sum_c max_j w_cj(x_j)``: monotone and lattice submodular."""

    name = "facility"
    monotone = True

    def __init__(self, weights: FacilityWeights, k: int | None = None):
        if k is not None and k != weights.k:
            raise ValueError(f"weights have {weights.k} levels, not {k}")
        self.weights = weights
        # (n, k, m) so that w_by_facility[j, x_j] is the customer vector
        self._w = np.ascontiguousarray(weights.table.transpose(1, 2, 0))
        hi = float(weights.table[:, :, -1].max(axis=1).sum())
        super().__init__(LatticeDomain.uniform(weights.n, weights.k), (0.0, hi))

    def _utilities(self, X):
        return self._w[np.arange(self.domain.n)[None, :], X]  # (S, n, m)

    def _evaluate(self, X):
        return self._utilities(X).max(axis=1).sum(axis=1)

    def _gains(self, X, blocks):
        U = self._utilities(X)
        n = self.domain.n
        if n == 1:
            other = np.zeros((len(X), 1, U.shape[2]))
        else:
            top = U.argmax(axis=1)  # (S, m)
            first = np.take_along_axis(U, top[:, None, :], axis=1)[:, 0]
            masked = U.copy()
            np.put_along_axis(masked, top[:, None, :], -np.inf, axis=1)
            second = masked.max(axis=1)
            is_top = top[:, None, :] == blocks[None, :, None]
            other = np.where(is_top, second[:, None, :], first[:, None, :])
        base = np.maximum(other, 0.0)  # (S, B, m)
        w = self._w[blocks]  # (B, k, m)
        return (np.maximum(base[:, :, None, :], w[None]) - base[:, :, None, :]).sum(axis=3)

    def describe(self):
        return {"kind": self.name, "n": self.weights.n, "m": self.weights.m, "k": self.weights.k}


def facility_location_objective(weights: FacilityWeights, k: int | None = None) -> FacilityLocationObjective:
    return FacilityLocationObjective(weights, k)


class ModularObjective(Objective):
    """``f(x) = sum_i c_i(x_i)``; ``levels[i]`` entries of row i are used."""

    name = "modular"

    def __init__(self, values, levels: Sequence[int] | None = None):
        rows = [np.asarray(r, dtype=float) for r in values]
        if levels is None:
            levels = [len(r) for r in rows]
        domain = LatticeDomain(tuple(levels))
        self.values = np.zeros((domain.n, domain.kmax))
        for i, (r, k) in enumerate(zip(rows, domain.levels)):
            self.values[i, :k] = r[:k]
        self.values.setflags(write=False)
        lo = sum(float(self.values[i, :k].min()) for i, k in enumerate(domain.levels))
        hi = sum(float(self.values[i, :k].max()) for i, k in enumerate(domain.levels))
        self.monotone = all(np.all(np.diff(self.values[i, :k]) >= 0) for i, k in enumerate(domain.levels))
        super().__init__(domain, (lo, hi))

    @classmethod
    def linear(cls, coefficients, k: int) -> "ModularObjective":
        c = np.asarray(coefficients, dtype=float)
        return cls(c[:, None] * np.arange(k)[None, :])

    def _evaluate(self, X):
        return self.values[np.arange(self.domain.n)[None, :], X].sum(axis=1)

    def _gains(self, X, blocks):
        g = self.values[blocks] - self.values[blocks, :1]
        for b, i in enumerate(blocks):
            g[b, self.domain.levels[i] :] = 0.0
        return np.broadcast_to(g, (len(X),) + g.shape).copy()


class TableObjective(Objective):
    """An explicit value table over a small domain."""

    name = "table"

    def __init__(self, values):
        values = np.array(values, dtype=float)
        values.setflags(write=False)
        super().__init__(LatticeDomain(values.shape), (float(values.min()), float(values.max())))
        self._table = values

    def _evaluate(self, X):
        return self._table[tuple(X.T)]


class FunctionObjective(Objective):
    """Wraps a Python callable on integer tuples."""

    name = "function"

    def __init__(self, fn: Callable[[tuple], float], domain: LatticeDomain, value_bound):
        self.fn = fn
        super().__init__(domain, value_bound)

    def _evaluate(self, X):
        return np.array([self.fn(tuple(int(v) for v in row)) for row in X], dtype=float)
