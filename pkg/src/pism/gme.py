"""Generalized multilinear extension ``F(rho) = E[f(R(rho))]`` of an integer function.

Exact routines contract the full value table of ``f`` against the block
probabilities, one axis at a time (``O(prod k_i)`` work). Estimators average
over draws of ``R(rho)`` with chunked, seed-addressed substreams.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._streams import chunk_map, combine_moments, moments, substream
from .lattice import ENUMERATION_CAP, TOLERANCE, CheckReport
from .marginals import ProductCategorical, clamp_block, sample_chunk


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    stderr: float
    samples: int

    def __float__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """Entrywise means and standard errors, shape ``(n, kmax - 1)``."""

    values: np.ndarray
    stderr: np.ndarray
    samples: int


def _block_probs(rho: ProductCategorical):
    p = rho.probs
    return [p[i, :k] for i, k in enumerate(rho.levels)]


def contract(table: np.ndarray, probs, keep=()) -> np.ndarray:
    """Sum ``table`` against the product distribution over every axis not in ``keep``.

    The kept axes come out first, in the order given.
    """
    keep = tuple(keep)
    others = [a for a in range(table.ndim) if a not in keep]
    T = np.moveaxis(table, keep, tuple(range(len(keep))))
    # contract trailing axes first so each step is a matmul over the last axis
    for ax in reversed(others):
        T = T @ probs[ax]
    return np.asarray(T)


def _check_domains(f, rho):
    if tuple(f.domain.levels) != tuple(rho.levels):
        raise ValueError(f"objective levels {f.domain.levels} differ from marginals {rho.levels}")


def gme_exact(f, rho: ProductCategorical, cap: int = ENUMERATION_CAP) -> float:
    _check_domains(f, rho)
    return float(contract(f.table(cap), _block_probs(rho)))


def conditional_expectations(f, rho: ProductCategorical, i: int, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``E[f(R) | R_i = l]`` for every level ``l`` of block ``i``."""
    _check_domains(f, rho)
    return contract(f.table(cap), _block_probs(rho), keep=(i,))


def gradient_exact(f, rho: ProductCategorical, blocks=None, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``dF/drho_ij = F(rho_i = e_j) - F(rho_i = 0)`` as an ``(n, kmax - 1)`` array.

    Only rows listed in ``blocks`` are filled when it is given; padding is zero.
    """
    _check_domains(f, rho)
    table = f.table(cap)
    probs = _block_probs(rho)
    grad = np.zeros_like(rho.rho)
    for i in range(rho.n) if blocks is None else blocks:
        g = contract(table, probs, keep=(i,))
        grad[i, : len(g) - 1] = g[1:] - g[0]
    return grad


def gme_estimate(f, rho: ProductCategorical, samples: int, seed, workers: int = 1) -> EstimateWithError:
    """Sample mean of ``f`` over ``samples`` draws of ``R(rho)``; stderr uses ``ddof=1``."""
    _check_domains(f, rho)
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def run(rng, size):
        return moments(f.evaluate_batch(sample_chunk(rho, rng, size)))

    count, mean, m2 = combine_moments(chunk_map(run, samples, seed, workers))
    stderr = math.sqrt(max(float(m2), 0.0) / (count - 1) / count) if count > 1 else 0.0
    return EstimateWithError(float(mean), stderr, count)


def gradient_estimate(f, rho: ProductCategorical, samples: int, seed, blocks=None, workers: int = 1) -> GradientEstimate:
    """Monte Carlo gradient with common random numbers.

    Every draw ``R`` is shared by all blocks and levels: entry ``(i, j)``
    averages ``f(R with R_i = j) - f(R with R_i = 0)``, which is unbiased
    because ``R_i`` is independent of ``R_{-i}``.
    """
    _check_domains(f, rho)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rows = np.arange(rho.n) if blocks is None else np.asarray(list(blocks), dtype=np.int64)

    def run(rng, size):
        X = sample_chunk(rho, rng, size)
        return moments(f.coordinate_gains(X, rows)[:, :, 1:])

    count, mean, m2 = combine_moments(chunk_map(run, samples, seed, workers))
    values = np.zeros_like(rho.rho)
    stderr = np.zeros_like(rho.rho)
    values[rows] = mean
    if count > 1:
        stderr[rows] = np.sqrt(np.maximum(m2, 0.0) / (count - 1) / count)
    values = np.where(rho.mask, values, 0.0)
    stderr = np.where(rho.mask, stderr, 0.0)
    return GradientEstimate(values, stderr, count)


def hoeffding_samples(range_b: float, eps: float, delta: float) -> int:
    """Smallest ``S`` with ``2 exp(-2 S eps^2 / B^2) <= delta``."""
    if range_b <= 0 or eps <= 0 or not 0 < delta < 1:
        raise ValueError("need B > 0, eps > 0 and 0 < delta < 1")
    s = range_b**2 * math.log(2.0 / delta) / (2.0 * eps**2)
    n = math.ceil(s)
    # guard against s landing a hair above an integer through rounding
    if n - 1 >= 1 and 2.0 * math.exp(-2.0 * (n - 1) * eps**2 / range_b**2) <= delta:
        n -= 1
    return max(n, 1)


def mixed_second_difference(f, rho: ProductCategorical, a: tuple[int, int], b: tuple[int, int], cap: int = ENUMERATION_CAP) -> float:
    """``d^2 F / d rho_a d rho_b`` for entries ``a = (i, j)``, ``b = (k, l)``.

    Distinct blocks use the four-point clamped identity
    ``F(e_j, e_l) + F(0, 0) - F(e_j, 0) - F(0, e_l)``. Within one block ``F``
    is affine, and the value is the unit-step mixed difference of ``F``.
    """
    (i, j), (k, l) = a, b
    table = f.table(cap)
    probs = _block_probs(rho)
    if i != k:
        G = contract(table, probs, keep=(i, k))
        return float(G[j, l] + G[0, 0] - G[j, 0] - G[0, l])

    def F(di, dk):
        p = [q.copy() for q in probs]
        # F is a polynomial in rho, so unit steps are fine even off the simplex
        p[i][j] += di
        p[i][0] -= di
        p[i][l] += dk
        p[i][0] -= dk
        return float(contract(table, p))

    return F(1, 1) - F(1, 0) - F(0, 1) + F(0, 0)


def _entries(rho):
    return [(i, j) for i, k in enumerate(rho.levels) for j in range(1, k)]


def dr_certificate(
    f,
    rho: ProductCategorical,
    trials: int = 200,
    seed=0,
    monotone: bool | None = None,
    exhaustive_limit: int = 5000,
    cap: int = ENUMERATION_CAP,
    tol: float = TOLERANCE,
) -> CheckReport:
    """Certify DR-submodularity of the extension at ``rho``.

    Checks that every (or, for large problems, ``trials`` random) mixed second
    derivatives across blocks are ``<= tol`` and within a block are zero to
    ``tol``. When ``f`` is monotone (``monotone`` defaults to ``f.monotone``)
    the gradient is also required to be ``>= -tol``.
    """
    _check_domains(f, rho)
    table = f.table(cap)
    probs = _block_probs(rho)
    entries = _entries(rho)
    if monotone is None:
        monotone = bool(getattr(f, "monotone", False))

    block_pairs = [(i, k) for i in range(rho.n) for k in range(i, rho.n)]
    if len(entries) ** 2 > exhaustive_limit:
        rng = np.random.default_rng(substream(seed, 0))
        picks = rng.choice(len(block_pairs), size=min(trials, len(block_pairs)), replace=False)
        block_pairs = [block_pairs[p] for p in sorted(picks)]

    worst = -math.inf
    checked = 0
    failure = None
    for i, k in block_pairs:
        if i == k:
            ki = rho.levels[i]
            for j, l in itertools.product(range(1, ki), repeat=2):
                d = mixed_second_difference(f, rho, (i, j), (i, l), cap)
                checked += 1
                worst = max(worst, abs(d))
                if abs(d) > tol and failure is None:
                    failure = {"a": (i, j), "b": (i, l), "value": d, "kind": "same-block"}
            continue
        G = contract(table, probs, keep=(i, k))
        D = G[1:, 1:] + G[0, 0] - G[1:, :1] - G[:1, 1:]
        checked += D.size
        worst = max(worst, float(D.max()))
        if failure is None and (D > tol).any():
            j, l = np.argwhere(D > tol)[0]
            failure = {"a": (i, int(j) + 1), "b": (k, int(l) + 1), "value": float(D[j, l]), "kind": "cross-block"}

    details = {"max_mixed": worst, "pairs": len(block_pairs)}
    if monotone:
        grad = gradient_exact(f, rho, cap=cap)[rho.mask]
        details["min_gradient"] = float(grad.min())
        checked += grad.size
        if failure is None and grad.min() < -tol:
            failure = {"a": entries[int(np.argmin(grad))], "value": float(grad.min()), "kind": "gradient"}

    if failure is None:
        return CheckReport(passed=True, checked=checked, worst=-worst, details=details)
    return CheckReport(
        passed=False, checked=checked, witness=failure, deficit=-abs(failure["value"]), worst=-worst, details=details
    )


def clamped_gradient(f, rho: ProductCategorical, i: int, j: int, cap: int = ENUMERATION_CAP) -> float:
    """Gradient entry as the literal difference of two clamped extensions."""
    return gme_exact(f, clamp_block(rho, i, j), cap) - gme_exact(f, clamp_block(rho, i, 0), cap)
