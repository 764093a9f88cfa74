"""Products of independent categorical distributions (the mean-field family).

Block ``i`` stores the probabilities of levels ``1..k_i-1``; level 0 carries
the residual mass ``1 - sum_j rho_ij``. Blocks are padded with zeros to the
widest block so the parameters form one ``(n, kmax - 1)`` array.
"""

from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np

from ._streams import chunk_map
from .lattice import LatticeDomain

FEASIBILITY_TOL = 1e-9
DEFAULT_CLIP = 1e-6


class InfeasibleMarginalsError(ValueError):
    pass


class ProductCategorical:
    """Immutable point of the product of simplices."""

    __slots__ = ("rho", "levels", "_mask")

    def __init__(self, rho, levels: Sequence[int] | None = None, tol: float = FEASIBILITY_TOL):
        rho = np.array(rho, dtype=float)
        if rho.ndim != 2:
            raise ValueError(f"rho must be 2-d, got shape {rho.shape}")
        if levels is None:
            levels = (rho.shape[1] + 1,) * rho.shape[0]
        levels = LatticeDomain(tuple(levels)).levels
        if len(levels) != rho.shape[0] or rho.shape[1] != max(levels) - 1:
            raise ValueError(f"rho shape {rho.shape} does not fit levels {levels}")
        mask = np.arange(rho.shape[1])[None, :] < (np.array(levels)[:, None] - 1)
        if np.any(rho[~mask] != 0):
            raise InfeasibleMarginalsError("padding entries must be zero")
        if not np.all(np.isfinite(rho)):
            raise InfeasibleMarginalsError("rho must be finite")
        if rho.min(initial=0.0) < -tol:
            raise InfeasibleMarginalsError(f"negative probability {rho.min()}")
        if rho.sum(axis=1).max() > 1 + tol:
            raise InfeasibleMarginalsError(f"block mass {rho.sum(axis=1).max()} exceeds 1")
        rho.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "_mask", mask)

    def __setattr__(self, name, value):
        raise AttributeError("ProductCategorical is immutable")

    def __repr__(self):
        return f"ProductCategorical(n={self.n}, levels={self.levels})"

    def __eq__(self, other):
        if not isinstance(other, ProductCategorical):
            return NotImplemented
        return self.levels == other.levels and np.array_equal(self.rho, other.rho)

    __hash__ = None

    @property
    def n(self) -> int:
        return len(self.levels)

    @property
    def kmax(self) -> int:
        return max(self.levels)

    @property
    def domain(self) -> LatticeDomain:
        return LatticeDomain(self.levels)

    @property
    def mask(self) -> np.ndarray:
        """True where an entry of ``rho`` is a real (non-padding) parameter."""
        return self._mask

    @property
    def residual(self) -> np.ndarray:
        return 1.0 - self.rho.sum(axis=1)

    @property
    def probs(self) -> np.ndarray:
        """Full ``(n, kmax)`` level probabilities, level 0 first, padding zero."""
        return np.concatenate([self.residual[:, None], self.rho], axis=1)

    def block(self, i: int) -> np.ndarray:
        return self.rho[i, : self.levels[i] - 1]

    @classmethod
    def uniform(cls, levels: Sequence[int]) -> "ProductCategorical":
        levels = tuple(levels)
        rho = np.zeros((len(levels), max(levels) - 1))
        for i, k in enumerate(levels):
            rho[i, : k - 1] = 1.0 / k
        return cls(rho, levels)

    @classmethod
    def zeros(cls, levels: Sequence[int]) -> "ProductCategorical":
        levels = tuple(levels)
        return cls(np.zeros((len(levels), max(levels) - 1)), levels)

    @classmethod
    def random(cls, levels: Sequence[int], rng: np.random.Generator) -> "ProductCategorical":
        """Each block drawn from a flat Dirichlet over its ``k_i`` levels."""
        levels = tuple(levels)
        rho = np.zeros((len(levels), max(levels) - 1))
        for i, k in enumerate(levels):
            rho[i, : k - 1] = rng.dirichlet(np.ones(k))[1:]
        return cls(rho, levels)

    @classmethod
    def point_mass(cls, x: Sequence[int], levels: Sequence[int]) -> "ProductCategorical":
        rho = cls.zeros(levels)
        for i, v in enumerate(x):
            rho = clamp_block(rho, i, int(v))
        return rho

    @classmethod
    def from_probs(cls, probs, levels: Sequence[int] | None = None) -> "ProductCategorical":
        """From full level probabilities (level 0 column included)."""
        probs = np.asarray(probs, dtype=float)
        return cls(probs[:, 1:], levels)


def replace_block(rho: ProductCategorical, i: int, values) -> ProductCategorical:
    """Copy of ``rho`` with block ``i`` set to ``values`` (length ``k_i - 1``)."""
    if not 0 <= i < rho.n:
        raise IndexError(f"block {i} out of range for n={rho.n}")
    values = np.asarray(values, dtype=float)
    if values.shape != (rho.levels[i] - 1,):
        raise ValueError(f"block {i} takes {rho.levels[i] - 1} values, got {values.shape}")
    new = rho.rho.copy()
    new[i, : rho.levels[i] - 1] = values
    return ProductCategorical(new, rho.levels)


def clamp_block(rho: ProductCategorical, i: int, level: int) -> ProductCategorical:
    """Put all of block ``i``'s mass on ``level`` (0 means the zero vector)."""
    if not 0 <= i < rho.n:
        raise IndexError(f"block {i} out of range for n={rho.n}")
    if not 0 <= level < rho.levels[i]:
        raise ValueError(f"level {level} out of range for block {i} with {rho.levels[i]} levels")
    v = np.zeros(rho.levels[i] - 1)
    if level:
        v[level - 1] = 1.0
    return replace_block(rho, i, v)


def _inverse_cdf(cdf: np.ndarray, usable: np.ndarray, u: np.ndarray) -> np.ndarray:
    # level = number of cumulative thresholds at or below u
    return ((u[:, :, None] >= cdf[None, :, :]) & usable[None, :, :]).sum(axis=2)


def _sampler(rho: ProductCategorical):
    probs = np.clip(rho.probs, 0.0, None)
    cdf = np.cumsum(probs, axis=1)[:, :-1]
    usable = np.arange(rho.kmax - 1)[None, :] < (np.array(rho.levels)[:, None] - 1)
    return cdf, usable


def sample(rho: ProductCategorical, rng: np.random.Generator) -> tuple[int, ...]:
    """One draw of the random integer vector with independent categorical coordinates."""
    cdf, usable = _sampler(rho)
    x = _inverse_cdf(cdf, usable, rng.random((1, rho.n)))[0]
    return tuple(int(v) for v in x)


def sample_chunk(rho: ProductCategorical, rng: np.random.Generator, size: int) -> np.ndarray:
    cdf, usable = _sampler(rho)
    return _inverse_cdf(cdf, usable, rng.random((size, rho.n)))


def sample_batch(rho: ProductCategorical, count: int, seed, workers: int = 1) -> np.ndarray:
    """``count`` independent draws as an ``(count, n)`` array.

    Reproducible for a given seed whatever ``workers`` is.
    """
    parts = chunk_map(lambda rng, size: sample_chunk(rho, rng, size), count, seed, workers)
    return np.concatenate(parts)


def block_entropies(rho: ProductCategorical) -> np.ndarray:
    p = rho.probs
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=1)


def entropy(rho: ProductCategorical) -> float:
    """Sum of block entropies, with ``0 log 0 = 0``."""
    return float(block_entropies(rho).sum())


def entropy_gradient(rho: ProductCategorical, eps: float = DEFAULT_CLIP) -> np.ndarray:
    """``d H / d rho_ij = log(rho_i0 / rho_ij)``, probabilities clipped to ``[eps, 1 - eps]``.

    The clip keeps the gradient finite on the faces of the simplex; it does
    not touch ``rho`` itself. Padding entries are zero.
    """
    p = np.clip(rho.probs, eps, 1.0 - eps)
    grad = np.log(p[:, :1]) - np.log(p[:, 1:])
    return np.where(rho.mask, grad, 0.0)


def format_marginals_csv(rho: ProductCategorical) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["element", "level", "prob"])
    probs = rho.probs
    for i, k in enumerate(rho.levels):
        for level in range(k):
            writer.writerow([i, level, f"{probs[i, level]:.17g}"])
    return buf.getvalue()


def parse_marginals_csv(text: str) -> ProductCategorical:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty marginal table")
    table: dict[int, dict[int, float]] = {}
    for row in rows:
        table.setdefault(int(row["element"]), {})[int(row["level"])] = float(row["prob"])
    n = max(table) + 1
    if sorted(table) != list(range(n)):
        raise ValueError("marginal table skips elements")
    levels = tuple(max(table[i]) + 1 for i in range(n))
    rho = np.zeros((n, max(levels) - 1))
    for i in range(n):
        for level, p in table[i].items():
            if level:
                rho[i, level - 1] = p
    return ProductCategorical(rho, levels)
