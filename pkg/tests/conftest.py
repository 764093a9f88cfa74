"""Independent brute-force oracles and instance factories shared by the tests.

The oracles here deliberately avoid the package's contraction and sampling
code paths: they loop over ``itertools.product`` in plain Python.
"""

import itertools
import math
import warnings

import numpy as np
import pytest

from pism.marginals import ProductCategorical
from pism.objectives import (
    FacilityWeights,
    FacilityLocationObjective,
    RevenueObjective,
    TableObjective,
    WeightedGraph,
    synthetic_facility_weights,
)


def brute_expectation(f, rho):
    """sum_x f(x) prod_i P(R_i = x_i), one point at a time."""
    probs = rho.probs
    total = 0.0
    for x in itertools.product(*(range(k) for k in rho.levels)):
        w = 1.0
        for i, v in enumerate(x):
            w *= probs[i, v]
        total += f.evaluate(x) * w
    return total


def brute_log_partition(f):
    vals = [f.evaluate(x) for x in itertools.product(*(range(k) for k in f.domain.levels))]
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def nine_term_expansion(fv, r11, r12, r21, r22):
    """The n=2, k=3 extension written out term by term; ``fv[a][b] = f(a, b)``."""
    return (
        fv[0][0] * (1 - r11 - r12) * (1 - r21 - r22)
        + fv[2][2] * r12 * r22
        + fv[1][0] * r11 * (1 - r21 - r22)
        + fv[0][1] * (1 - r11 - r12) * r21
        + fv[2][0] * r12 * (1 - r21 - r22)
        + fv[0][2] * (1 - r11 - r12) * r22
        + fv[1][1] * r11 * r21
        + fv[1][2] * r11 * r22
        + fv[2][1] * r12 * r21
    )


def set_multilinear(values, p):
    """Classical multilinear extension of a set function given on bitmasks."""
    n = len(p)
    total = 0.0
    for mask in range(1 << n):
        w = 1.0
        for i in range(n):
            w *= p[i] if mask >> i & 1 else 1 - p[i]
        total += values[mask] * w
    return total


def central_difference(fn, rho, h=1e-5):
    """Finite-difference gradient of ``fn`` w.r.t. each real entry of ``rho``."""
    grad = np.zeros_like(rho.rho)
    for i, k in enumerate(rho.levels):
        for j in range(k - 1):
            up = rho.rho.copy()
            dn = rho.rho.copy()
            up[i, j] += h
            dn[i, j] -= h
            grad[i, j] = (fn(up) - fn(dn)) / (2 * h)
    return grad


def random_revenue(rng, n, k, q=None, density=0.6, symmetric=False):
    W = rng.uniform(0, 1, (n, n)) * (rng.random((n, n)) < density)
    if symmetric:
        W = np.triu(W, 1)
        W = W + W.T
    np.fill_diagonal(W, 0)
    q = float(rng.uniform(0.1, 0.9)) if q is None else q
    return RevenueObjective(WeightedGraph(W), q, k)


def random_facility(rng, n, k, m=None):
    m = n if m is None else m
    return FacilityLocationObjective(synthetic_facility_weights(n, m, k, int(rng.integers(1 << 31))))


def random_table(rng, levels):
    return TableObjective(rng.normal(size=levels))


def interior_rho(rng, levels, floor=0.05):
    """Random marginals bounded away from every face."""
    rho = ProductCategorical.random(levels, rng)
    probs = floor + (1 - floor * max(levels)) * rho.probs
    for i, k in enumerate(levels):
        probs[i, k:] = 0
        probs[i, :k] /= probs[i, :k].sum()
    return ProductCategorical.from_probs(probs, levels)


@pytest.fixture
def rng():
    return np.random.default_rng(20200612)


@pytest.fixture
def two_node_revenue():
    return RevenueObjective(WeightedGraph(np.array([[0.0, 1.0], [1.0, 0.0]])), 0.5, 3)


@pytest.fixture
def facility_example():
    # m=1, n=2, k=3: w_1 = (0, 1, 2), w_2 = (0, 0.5, 3)
    return FacilityLocationObjective(FacilityWeights(np.array([[[0, 1, 2], [0, 0.5, 3]]], dtype=float)), 3)


def numeric_block_max(g):
    """Maximize <g, xi> + H(xi) over {xi >= 0, sum xi <= 1} with a generic solver."""
    from scipy.optimize import minimize, minimize_scalar

    g = np.asarray(g, dtype=float)

    def neg(xi):
        p = np.concatenate([[1.0 - xi.sum()], xi])
        p = np.clip(p, 1e-300, None)
        return -(g @ xi - np.sum(p * np.log(p)))

    def neg_grad(xi):
        p0 = max(1.0 - xi.sum(), 1e-300)
        return -(g + np.log(p0) - np.log(np.clip(xi, 1e-300, None)))

    if g.size == 1:
        res = minimize_scalar(lambda t: neg(np.array([t])), bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-13})
        return np.array([res.x])
    k = g.size + 1
    with warnings.catch_warnings():
        # SLSQP may probe just outside the bounds before clipping
        warnings.simplefilter("ignore", RuntimeWarning)
        res = minimize(
            neg,
            np.full(g.size, 1.0 / k),
            jac=neg_grad,
            method="SLSQP",
            bounds=[(1e-15, 1.0)] * g.size,
            constraints=[{"type": "ineq", "fun": lambda xi: 1.0 - xi.sum() - 1e-15, "jac": lambda xi: -np.ones_like(xi)}],
            options={"ftol": 1e-16, "maxiter": 1000},
        )
    return res.x


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
