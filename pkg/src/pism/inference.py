"""Mean-field ELBO maximization: block coordinate ascent and two Frank-Wolfe variants."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._streams import substream
from .gme import EstimateWithError, gme_estimate, gme_exact, gradient_estimate, gradient_exact
from .lattice import ENUMERATION_CAP
from .marginals import DEFAULT_CLIP, ProductCategorical, entropy, entropy_gradient, replace_block

EXACT = "exact"
MONTE_CARLO = "monte-carlo"

# substream keys under the run seed
_EVAL_KEY = 0
_BLOCK_CA_KEY = 1
_SHRUNKEN_KEY = 2
_TWO_PHASE_KEY = 3
_SCHEDULE_KEY = 4


@dataclass
class ElboConfig:
    """Settings shared by every maximizer.

    ``iterations`` is ``K``: block updates for Block CA, Frank-Wolfe steps
    for Shrunken FW, and steps per phase for Two-Phase FW.
    ``elbo_samples`` sets the Monte Carlo size of ELBO checkpoints and
    defaults to ``4 * samples``.
    """

    iterations: int = 100
    mode: str = EXACT
    samples: int = 1000
    seed: int = 0
    schedule: str = "cyclic"
    entropy_eps: float = DEFAULT_CLIP
    elbo_samples: int | None = None
    record: str = "epoch"
    workers: int = 1
    keep_iterates: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.mode not in (EXACT, MONTE_CARLO):
            raise ValueError(f"unknown gradient mode {self.mode!r}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.schedule not in ("cyclic", "random"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.record not in ("epoch", "iteration"):
            raise ValueError(f"unknown record granularity {self.record!r}")

    @property
    def eval_samples(self) -> int:
        return self.elbo_samples or 4 * self.samples


@dataclass
class TrajectoryPoint:
    epoch: float
    elbo: float
    mode: str
    algorithm: str
    seconds: float
    stderr: float = 0.0
    iterate: ProductCategorical | None = None


@dataclass
class Trajectory:
    """Append-only checkpoint log of one run."""

    algorithm: str
    points: list[TrajectoryPoint] = field(default_factory=list)

    def append(self, point: TrajectoryPoint) -> None:
        if self.points and point.epoch < self.points[-1].epoch:
            raise ValueError("epochs must be non-decreasing")
        self.points.append(point)

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, idx):
        return self.points[idx]

    @property
    def final(self) -> TrajectoryPoint:
        return self.points[-1]

    def elbos(self) -> np.ndarray:
        return np.array([p.elbo for p in self.points])

    def to_csv(self, timing: bool = False) -> str:
        """``epoch,elbo,mode,algorithm,seconds``; seconds left blank unless ``timing``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "elbo", "mode", "algorithm", "seconds"])
        for p in self.points:
            writer.writerow(
                [f"{p.epoch:.17g}", f"{p.elbo:.17g}", p.mode, p.algorithm, f"{p.seconds:.6f}" if timing else ""]
            )
        return buf.getvalue()


@dataclass
class InferenceResult:
    rho: ProductCategorical
    trajectory: Trajectory
    epochs: float
    info: dict = field(default_factory=dict)


def elbo(f, rho: ProductCategorical, mode: str = EXACT, samples: int = 1000, seed=0, workers: int = 1, cap: int = ENUMERATION_CAP):
    """``F(rho) + sum_i H(rho_i)``.

    Exact mode returns a float; Monte Carlo mode estimates ``F`` and returns
    an :class:`EstimateWithError` (the entropy term is always exact).
    """
    h = entropy(rho)
    if mode == EXACT:
        return gme_exact(f, rho, cap) + h
    if mode == MONTE_CARLO:
        est = gme_estimate(f, rho, samples, seed, workers)
        return EstimateWithError(est.value + h, est.stderr, est.samples)
    raise ValueError(f"unknown mode {mode!r}")


def log_partition_bruteforce(f, cap: int = ENUMERATION_CAP) -> float:
    """``log sum_x exp f(x)`` by streaming, max-shifted log-sum-exp over the domain."""
    f.domain.require_enumerable(cap)
    pts = f.domain.points(cap)
    running_max = -math.inf
    scaled_sum = 0.0
    step = 1 << 16
    for s in range(0, len(pts), step):
        vals = f.evaluate_batch(pts[s : s + step])
        m = float(vals.max())
        if m > running_max:
            scaled_sum *= math.exp(running_max - m) if running_max > -math.inf else 0.0
            running_max = m
        scaled_sum += float(np.exp(vals - running_max).sum())
    return running_max + math.log(scaled_sum)


def block_ca_update(grad_block) -> np.ndarray:
    """Maximizer of ``<g, xi> + H(xi)`` over one block: ``exp(g_j) / (1 + sum exp(g))``."""
    g = np.asarray(grad_block, dtype=float)
    z = np.concatenate([[0.0], g])
    e = np.exp(z - z.max())
    return e[1:] / e.sum()


def lmo_simplex_block(grad_block) -> np.ndarray:
    """Best vertex of ``{v >= 0, sum v <= 1}``: ``e_j`` for the largest positive entry, else 0."""
    g = np.asarray(grad_block, dtype=float)
    v = np.zeros_like(g)
    if g.size:
        j = int(np.argmax(g))
        if g[j] > 0:
            v[j] = 1.0
    return v


def lmo_shrunken_block(grad_block, caps, budget: float) -> np.ndarray:
    """Maximize ``<g, v>`` over ``{0 <= v <= caps, sum v <= budget}`` by greedy filling."""
    g = np.asarray(grad_block, dtype=float)
    caps = np.maximum(np.asarray(caps, dtype=float), 0.0)
    left = max(float(budget), 0.0)
    v = np.zeros_like(g)
    for j in np.argsort(-g, kind="stable"):
        if g[j] <= 0 or left <= 0:
            break
        v[j] = min(caps[j], left)
        left -= v[j]
    return v


class _Run:
    """Shared plumbing for one algorithm run: gradients, checkpoints, timing."""

    def __init__(self, f, config: ElboConfig, algorithm: str, key: int, callback, on_record):
        self.f = f
        self.config = config
        self.key = key
        self.callback = callback
        self.on_record = on_record
        self.trajectory = Trajectory(algorithm)
        self.start = time.perf_counter()
        self.exact = config.mode == EXACT

    def gme_gradient(self, rho, step: int, blocks=None, phase: int = 0) -> np.ndarray:
        if self.exact:
            return gradient_exact(self.f, rho, blocks)
        seed = substream(self.config.seed, self.key, phase, step)
        return gradient_estimate(self.f, rho, self.config.samples, seed, blocks, self.config.workers).values

    def elbo_gradient(self, rho, step: int, phase: int = 0) -> np.ndarray:
        return self.gme_gradient(rho, step, phase=phase) + entropy_gradient(rho, self.config.entropy_eps)

    def evaluate(self, rho) -> tuple[float, float, str]:
        if self.exact:
            return float(elbo(self.f, rho, EXACT)), 0.0, EXACT
        # one evaluation seed for every checkpoint: common random numbers across the run
        est = elbo(self.f, rho, MONTE_CARLO, self.config.eval_samples, substream(self.config.seed, _EVAL_KEY), self.config.workers)
        return est.value, est.stderr, MONTE_CARLO

    def record(self, rho, epoch: float) -> TrajectoryPoint:
        value, stderr, mode = self.evaluate(rho)
        point = TrajectoryPoint(
            epoch=epoch,
            elbo=value,
            mode=mode,
            algorithm=self.trajectory.algorithm,
            seconds=time.perf_counter() - self.start,
            stderr=stderr,
            iterate=rho if self.config.keep_iterates else None,
        )
        self.append(point, rho)
        return point

    def append(self, point: TrajectoryPoint, rho) -> None:
        self.trajectory.append(point)
        if self.on_record is not None:
            self.on_record(point, rho)

    def step(self, iteration: int, rho) -> None:
        if self.callback is not None:
            self.callback(iteration, rho)


def block_ca(
    f,
    rho0: ProductCategorical,
    config: ElboConfig,
    algorithm: str = "block-ca",
    epoch_offset: float = 0.0,
    callback: Callable | None = None,
    on_record: Callable | None = None,
) -> InferenceResult:
    """Block coordinate ascent: each iteration replaces one block by its closed-form optimum.

    ``n`` block updates cost one epoch. With exact gradients the ELBO never
    decreases.
    """
    run = _Run(f, config, algorithm, _BLOCK_CA_KEY, callback, on_record)
    n = rho0.n
    rho = rho0
    run.record(rho, epoch_offset)
    order = np.arange(n)
    for t in range(config.iterations):
        sweep, pos = divmod(t, n)
        if pos == 0 and config.schedule == "random":
            order = np.random.default_rng(substream(config.seed, _SCHEDULE_KEY, sweep)).permutation(n)
        i = int(order[pos])
        g = run.gme_gradient(rho, t, blocks=[i])
        rho = replace_block(rho, i, block_ca_update(g[i, : rho.levels[i] - 1]))
        run.step(t, rho)
        if config.record == "iteration" or pos == n - 1 or t == config.iterations - 1:
            run.record(rho, epoch_offset + (t + 1) / n)
    return InferenceResult(rho, run.trajectory, epoch_offset + config.iterations / n)


def _apply_blocks(rho: ProductCategorical, grad: np.ndarray, oracle) -> np.ndarray:
    v = np.zeros_like(rho.rho)
    for i, k in enumerate(rho.levels):
        v[i, : k - 1] = oracle(i, grad[i, : k - 1])
    return v


def shrunken_fw(
    f,
    config: ElboConfig,
    algorithm: str = "shrunken-fw",
    callback: Callable | None = None,
    on_record: Callable | None = None,
) -> InferenceResult:
    """Frank-Wolfe from 0 with step ``1/K`` and a shrinking per-block oracle.

    At step ``t`` block ``i`` may only add mass up to ``1 - x_ij`` per entry
    and ``1 - sum_j x_ij`` in total, so every iterate stays feasible.
    """
    run = _Run(f, config, algorithm, _SHRUNKEN_KEY, callback, on_record)
    K = config.iterations
    levels = f.domain.levels
    x = ProductCategorical.zeros(levels)
    run.record(x, 0.0)
    for t in range(K):
        grad = run.elbo_gradient(x, t)

        def oracle(i, g):
            block = x.block(i)
            return lmo_shrunken_block(g, 1.0 - block, 1.0 - block.sum())

        v = _apply_blocks(x, grad, oracle)
        x = ProductCategorical(x.rho + v / K, levels)
        run.step(t, x)
        run.record(x, float(t + 1))
    return InferenceResult(x, run.trajectory, float(K))


def oblivious_step(t: int) -> float:
    return 2.0 / (t + 2)


def two_phase_fw(
    f,
    config: ElboConfig,
    x0: ProductCategorical | None = None,
    algorithm: str = "two-phase-fw",
    callback: Callable | None = None,
    on_record: Callable | None = None,
) -> InferenceResult:
    """Two runs of non-convex Frank-Wolfe with steps ``2/(t+2)``.

    Phase 1 searches the product of simplices from ``x0`` and ends at ``z1``.
    Phase 2 searches ``{y feasible : y <= 1 - z1}`` from 0 and ends at
    ``z2``. The endpoint with the larger ELBO is returned. Each phase runs
    ``K`` steps, one epoch each.
    """
    run = _Run(f, config, algorithm, _TWO_PHASE_KEY, callback, on_record)
    K = config.iterations
    levels = f.domain.levels
    x = ProductCategorical.zeros(levels) if x0 is None else x0
    if x.levels != tuple(levels):
        raise ValueError("x0 does not match the objective's domain")
    steps: list[tuple[int, int, float]] = []
    run.record(x, 0.0)

    def phase(x, number, oracle, epoch0):
        for t in range(K):
            grad = run.elbo_gradient(x, t, phase=number)
            v = _apply_blocks(x, grad, oracle)
            gamma = oblivious_step(t)
            steps.append((number, t, gamma))
            x = ProductCategorical((1.0 - gamma) * x.rho + gamma * v, levels)
            run.step(epoch0 + t, x)
            run.record(x, float(epoch0 + t + 1))
        return x

    z1 = phase(x, 1, lambda i, g: lmo_simplex_block(g), 0)
    room = 1.0 - z1.rho
    z2 = phase(ProductCategorical.zeros(levels), 2, lambda i, g: lmo_shrunken_block(g, room[i, : len(g)], 1.0), K)

    e1, s1, mode = run.evaluate(z1)
    e2, s2, _ = run.evaluate(z2)
    chosen, value, stderr = (z1, e1, s1) if e1 >= e2 else (z2, e2, s2)
    run.append(
        TrajectoryPoint(
            epoch=float(2 * K),
            elbo=value,
            mode=mode,
            algorithm=algorithm,
            seconds=time.perf_counter() - run.start,
            stderr=stderr,
            iterate=chosen if config.keep_iterates else None,
        ),
        chosen,
    )
    info = {
        "step_sizes": steps,
        "phase_elbos": (e1, e2),
        "phase_endpoints": (z1, z2),
        "selected_phase": 1 if chosen is z1 else 2,
    }
    return InferenceResult(chosen, run.trajectory, float(2 * K), info)
