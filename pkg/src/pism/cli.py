"""Command line entry point: ``pism run|preset|check|compare|lmo-test|oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .gme import dr_certificate
from .harness.config import PRESETS, ConfigError, ExperimentConfig, build_objective, preset
from .harness.runner import StageError, compare_runs, format_comparison, run_experiment
from .inference import ElboConfig, block_ca, block_ca_update, elbo, lmo_shrunken_block, lmo_simplex_block, log_partition_bruteforce
from .lattice import check_dr_submodular, check_lattice_submodular, check_monotone
from .marginals import ProductCategorical


def _load_objective_spec(path: Path) -> dict:
    data = json.loads(path.read_text())
    if "config_text" in data:
        data = json.loads(data["config_text"])
    return data["objective"] if "objective" in data else data


def cmd_run(args) -> int:
    path = Path(args.config)
    try:
        config, text = ExperimentConfig.load(path)
    except (OSError, ValueError) as exc:
        raise StageError("config", str(exc)) from exc
    if args.workers is not None:
        config.workers = args.workers
    out = run_experiment(config, output=args.output, config_text=text, base_dir=path.parent)
    print(out)
    return 0


def cmd_preset(args) -> int:
    config = preset(args.name, dataset=args.dataset, samples=args.samples, output=args.output)
    text = config.to_json()
    if args.write:
        Path(args.write).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _line(name, report) -> str:
    status = "pass" if report.passed else "FAIL"
    extra = f" witness={report.witness} deficit={report.deficit:.3g}" if not report.passed else ""
    return f"{name:<22} {status} (checked {report.checked}){extra}"


def cmd_check(args) -> int:
    path = Path(args.objective)
    try:
        f = build_objective(_load_objective_spec(path), path.parent)
    except (OSError, ValueError, KeyError) as exc:
        raise StageError("objective", str(exc)) from exc
    print(f"objective {f.describe()} on {f.domain.size} lattice points")
    print(_line("lattice submodular", check_lattice_submodular(f)))
    print(_line("DR-submodular", check_dr_submodular(f)))
    print(_line("monotone", check_monotone(f)))
    rng = np.random.default_rng(args.seed)
    for t in range(args.points):
        rho = ProductCategorical.random(f.domain.levels, rng)
        print(_line(f"extension DR @rho{t}", dr_certificate(f, rho, seed=args.seed)))
    return 0


def cmd_compare(args) -> int:
    try:
        rows = compare_runs(args.bundles)
    except (OSError, ValueError, KeyError) as exc:
        raise StageError("compare", str(exc)) from exc
    sys.stdout.write(format_comparison(rows))
    return 0


def cmd_lmo_test(args) -> int:
    g = np.array(args.grad, dtype=float)
    caps = np.array(args.caps, dtype=float) if args.caps else np.ones_like(g)
    print("simplex vertex:   ", lmo_simplex_block(g).tolist())
    print("shrunken oracle:  ", lmo_shrunken_block(g, caps, args.budget).tolist())
    print("block CA update:  ", block_ca_update(g).tolist())
    return 0


def cmd_oracle(args) -> int:
    path = Path(args.objective)
    f = build_objective(_load_objective_spec(path), path.parent)
    log_z = log_partition_bruteforce(f)
    uniform = ProductCategorical.uniform(f.domain.levels)
    res = block_ca(f, uniform, ElboConfig(iterations=args.sweeps * f.domain.n))
    print(f"log Z                 {log_z:.12g}")
    print(f"ELBO(uniform)         {elbo(f, uniform):.12g}")
    print(f"ELBO(block CA, exact) {res.trajectory.final.elbo:.12g}")
    print(f"gap log Z - ELBO      {log_z - res.trajectory.final.elbo:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pism", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config (or re-run a bundle manifest)")
    p.add_argument("config")
    p.add_argument("--output", help="bundle directory (defaults to the config's output)")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help="print a preset experiment config")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--dataset", help="edge list for graph presets")
    p.add_argument("--samples", type=int, default=200, help="Monte Carlo samples per gradient")
    p.add_argument("--output")
    p.add_argument("--write", metavar="PATH", help="write the config here instead of stdout")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("check", help="submodularity / DR certificates for a small objective")
    p.add_argument("objective", help="JSON objective spec or experiment config")
    p.add_argument("--points", type=int, default=3, help="random marginals for the extension certificate")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="summarize result bundles")
    p.add_argument("bundles", nargs="+")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("lmo-test", help="show the linear oracles and block update for a gradient")
    p.add_argument("grad", type=float, nargs="+")
    p.add_argument("--caps", type=float, nargs="+")
    p.add_argument("--budget", type=float, default=1.0)
    p.set_defaults(func=cmd_lmo_test)

    p = sub.add_parser("oracle", help="brute-force log Z against exact Block CA")
    p.add_argument("objective")
    p.add_argument("--sweeps", type=int, default=20)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"pism: error {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"pism: error [{args.command}] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
