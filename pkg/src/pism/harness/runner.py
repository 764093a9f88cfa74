"""Run configured experiments into result bundles and compare bundles."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import logging
import os
import platform
import socket
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from .. import __version__
from .._streams import substream
from ..inference import ElboConfig, Trajectory, block_ca, shrunken_fw, two_phase_fw
from ..marginals import ProductCategorical, format_marginals_csv
from ..objectives import FacilityLocationObjective, Objective, RevenueObjective
from .config import ExperimentConfig, build_objective

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
_INIT_KEY = 5


class StageError(RuntimeError):
    """A failure tagged with the pipeline stage it happened in."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def objective_fingerprint(f: Objective) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(f.describe(), sort_keys=True).encode())
    if isinstance(f, RevenueObjective):
        h.update(np.ascontiguousarray(f.W).tobytes())
    elif isinstance(f, FacilityLocationObjective):
        h.update(np.ascontiguousarray(f.weights.table).tobytes())
    elif hasattr(f, "values"):
        h.update(np.ascontiguousarray(f.values).tobytes())
    return h.hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


@dataclass
class RunSummary:
    label: str
    algorithm: str
    init: str | None
    epochs: float
    final_elbo: float
    final_stderr: float
    mode: str
    wall_seconds: float
    trajectory_file: str
    marginals_file: str


def _elbo_config(config: ExperimentConfig, iterations: int) -> ElboConfig:
    g = config.gradient
    return ElboConfig(
        iterations=iterations,
        mode=g["mode"],
        samples=int(g.get("samples", 1)),
        seed=config.seed,
        schedule=config.schedule,
        entropy_eps=config.entropy_eps,
        elbo_samples=config.elbo_samples,
        workers=config.workers,
    )


def _start_point(init, levels, results, seed):
    if init in (None, "zero"):
        return ProductCategorical.zeros(levels), 0.0
    if init == "uniform":
        return ProductCategorical.uniform(levels), 0.0
    if init == "random":
        return ProductCategorical.random(levels, np.random.default_rng(substream(seed, _INIT_KEY))), 0.0
    rho, epochs = results[init]
    return rho, epochs


def run_experiment(
    config: ExperimentConfig,
    output: str | Path | None = None,
    config_text: str | None = None,
    base_dir: Path | None = None,
) -> Path:
    """Build the objective, run every configured algorithm and write the bundle.

    The bundle holds ``trajectory_<run>.csv`` and ``marginals_<run>.csv`` per
    run and a ``manifest.json``. Data files depend only on the config.
    """
    out = Path(output or config.output)
    out.mkdir(parents=True, exist_ok=True)
    config_text = config_text if config_text is not None else config.to_json()
    lock = FileLock(str(out / ".lock"), timeout=0)
    try:
        lock.acquire()
    except Timeout:
        raise StageError("lock", f"another experiment is running in {out}") from None
    try:
        return _run_locked(config, out, config_text, base_dir)
    finally:
        lock.release()


def _run_locked(config, out, config_text, base_dir):
    started = time.perf_counter()
    started_at = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        f = build_objective(config.objective, base_dir)
    except Exception as exc:
        raise StageError("objective", str(exc)) from exc
    n = f.domain.n
    results: dict[str, tuple[ProductCategorical, float]] = {}
    summaries: list[RunSummary] = []

    for spec in config.algorithms:
        stage = f"run {spec.label}"
        traj_path = out / f"trajectory_{spec.slug}.csv"
        marg_path = out / f"marginals_{spec.slug}.csv"
        t0 = time.perf_counter()
        try:
            written = []

            def on_record(point, rho, _written=written):
                _written.append(point)
                _atomic_write(traj_path, Trajectory(spec.label, list(_written)).to_csv(config.timing))
                if config.snapshots:
                    _atomic_write(out / f"snapshot_{spec.slug}_{len(_written) - 1:04d}.csv", format_marginals_csv(rho))

            if spec.name == "block-ca":
                rho0, offset = _start_point(spec.init or "uniform", f.domain.levels, results, config.seed)
                cfg = _elbo_config(config, spec.epochs * n)
                res = block_ca(f, rho0, cfg, algorithm=spec.label, epoch_offset=offset, on_record=on_record)
            elif spec.name == "shrunken-fw":
                res = shrunken_fw(f, _elbo_config(config, spec.epochs), algorithm=spec.label, on_record=on_record)
            else:
                x0, _ = _start_point(spec.init, f.domain.levels, results, config.seed)
                cfg = _elbo_config(config, max(1, spec.epochs // 2))
                res = two_phase_fw(f, cfg, x0=x0, algorithm=spec.label, on_record=on_record)
        except Exception as exc:
            raise StageError(stage, f"{type(exc).__name__}: {exc}") from exc
        results[spec.label] = (res.rho, res.trajectory.final.epoch)
        _atomic_write(marg_path, format_marginals_csv(res.rho))
        final = res.trajectory.final
        summaries.append(
            RunSummary(
                label=spec.label,
                algorithm=spec.name,
                init=spec.init,
                epochs=final.epoch,
                final_elbo=final.elbo,
                final_stderr=final.stderr,
                mode=final.mode,
                wall_seconds=time.perf_counter() - t0,
                trajectory_file=traj_path.name,
                marginals_file=marg_path.name,
            )
        )
        log.info("%s: final ELBO %.6g after %g epochs", spec.label, final.elbo, final.epoch)

    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "config_text": config_text,
        "seeds": {"root": config.seed},
        "objective": f.describe(),
        "objective_hash": objective_fingerprint(f),
        "runs": [s.__dict__ for s in summaries],
        "started_at": started_at,
        "hostname": socket.gethostname(),
        "python": platform.python_version(),
        "wall_seconds": time.perf_counter() - started,
    }
    _atomic_write(out / MANIFEST, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def read_trajectory(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"epoch": float(r["epoch"]), "elbo": float(r["elbo"]), "mode": r["mode"], "algorithm": r["algorithm"]}
            for r in csv.DictReader(fh)
        ]


def epochs_to_within(points: list[dict], rel: float = 0.01) -> float:
    final = points[-1]["elbo"]
    for p in points:
        if abs(p["elbo"] - final) <= rel * abs(final):
            return p["epoch"]
    return points[-1]["epoch"]


def compare_runs(bundles) -> list[dict]:
    """One row per run across bundles that share an objective.

    Columns: bundle, run, final ELBO, epochs to within 1% of the final value,
    wall time and, for runs chained from another run, the ELBO gain over
    that initializer.
    """
    rows = []
    fingerprint = None
    for bundle in bundles:
        bundle = Path(bundle)
        manifest = json.loads((bundle / MANIFEST).read_text())
        if fingerprint is None:
            fingerprint = manifest["objective_hash"]
        elif manifest["objective_hash"] != fingerprint:
            raise ValueError(f"{bundle} was run on a different objective; refusing to compare")
        finals = {r["label"]: r["final_elbo"] for r in manifest["runs"]}
        for run in manifest["runs"]:
            points = read_trajectory(bundle / run["trajectory_file"])
            init = run.get("init")
            rows.append(
                {
                    "bundle": str(bundle),
                    "run": run["label"],
                    "final_elbo": points[-1]["elbo"],
                    "mode": points[-1]["mode"],
                    "epochs": points[-1]["epoch"],
                    "epochs_to_1pct": epochs_to_within(points),
                    "wall_seconds": run["wall_seconds"],
                    "delta_vs_init": points[-1]["elbo"] - finals[init] if init in finals else None,
                }
            )
    return rows


def format_comparison(rows: list[dict]) -> str:
    header = ["bundle", "run", "final_elbo", "mode", "epochs", "epochs_to_1pct", "wall_seconds", "delta_vs_init"]
    table = [header]
    for r in rows:
        table.append(
            [
                r["bundle"],
                r["run"],
                f"{r['final_elbo']:.6f}",
                r["mode"],
                f"{r['epochs']:g}",
                f"{r['epochs_to_1pct']:g}",
                f"{r['wall_seconds']:.2f}",
                "" if r["delta_vs_init"] is None else f"{r['delta_vs_init']:+.6f}",
            ]
        )
    widths = [max(len(row[c]) for row in table) for c in range(len(header))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table) + "\n"
