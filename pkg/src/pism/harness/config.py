"""Experiment configuration: a JSON document plus presets for the benchmark setups."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..inference import EXACT, MONTE_CARLO
from ..objectives import (
    FacilityLocationObjective,
    ModularObjective,
    Objective,
    RevenueObjective,
    random_graph,
    synthetic_facility_weights,
)
from .graphs import load_edge_list

ALGORITHMS = ("block-ca", "shrunken-fw", "two-phase-fw")
BASE_INITS = ("uniform", "zero", "random")


class ConfigError(ValueError):
    pass


@dataclass
class AlgorithmSpec:
    """One run; ``epochs`` counts full-gradient evaluations.

    ``init`` is ``uniform``/``zero``/``random`` or the label of an earlier
    run whose final marginals seed this one (Block CA and Two-Phase FW only).
    """

    name: str
    epochs: int = 20
    init: str | None = None
    label: str | None = None

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.name == "shrunken-fw" and self.init not in (None, "zero"):
            raise ConfigError("shrunken-fw always starts from 0")
        if self.label is None:
            self.label = self.name if self.init is None else f"{self.name}(init={self.init})"

    @property
    def slug(self) -> str:
        return re.sub(r"[^A-Za-z0-9]+", "-", self.label).strip("-")


@dataclass
class ExperimentConfig:
    objective: dict
    algorithms: list[AlgorithmSpec]
    gradient: dict = field(default_factory=lambda: {"mode": EXACT})
    elbo_samples: int | None = None
    seed: int = 0
    workers: int = 1
    schedule: str = "cyclic"
    entropy_eps: float = 1e-6
    timing: bool = False
    snapshots: bool = False
    output: str = "runs/experiment"

    def __post_init__(self):
        self.algorithms = [a if isinstance(a, AlgorithmSpec) else AlgorithmSpec(**a) for a in self.algorithms]
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate run labels in {labels}")
        slugs = [a.slug for a in self.algorithms]
        if len(set(slugs)) != len(slugs):
            raise ConfigError(f"run labels collide as file names: {slugs}")
        for pos, a in enumerate(self.algorithms):
            if a.init is None or a.init in BASE_INITS:
                continue
            if a.init not in labels[:pos]:
                raise ConfigError(f"{a.label}: init {a.init!r} must name an earlier run or one of {BASE_INITS}")
        mode = self.gradient.get("mode")
        if mode not in (EXACT, MONTE_CARLO):
            raise ConfigError(f"gradient mode must be {EXACT!r} or {MONTE_CARLO!r}")
        if mode == MONTE_CARLO and int(self.gradient.get("samples", 0)) < 1:
            raise ConfigError("monte-carlo gradients need samples >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        kind = self.objective.get("kind")
        if kind not in ("revenue", "facility", "modular"):
            raise ConfigError(f"unknown objective kind {kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = copy.deepcopy(data)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if "config_text" in data and "runs" in data:
            # a bundle manifest: re-run the configuration it recorded
            return cls.from_json(data["config_text"])
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> tuple["ExperimentConfig", str]:
        """Parsed config and the verbatim text of the file it came from."""
        path = Path(path)
        text = path.read_text()
        data = json.loads(text)
        if "config_text" in data and "runs" in data:
            text = data["config_text"]
        return cls.from_json(text), text


def build_objective(spec: dict, base_dir: Path | None = None) -> Objective:
    """Instantiate the objective described by a config's ``objective`` section."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "revenue":
        q, k = float(spec.get("q", 0)), int(spec.get("k", 0))
        if "dataset" in spec and spec["dataset"]:
            path = Path(spec["dataset"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            if not path.exists():
                raise ConfigError(f"dataset {path} does not exist")
            graph = load_edge_list(path, symmetrize=spec.get("symmetrize", True))
        elif "random_graph" in spec:
            g = spec["random_graph"]
            graph = random_graph(int(g["n"]), int(g["edges"]), int(g.get("seed", 0)))
        else:
            raise ConfigError("revenue objective needs 'dataset' or 'random_graph'")
        return RevenueObjective(graph, q, k)
    if kind == "facility":
        n = int(spec["n"])
        weights = synthetic_facility_weights(n, int(spec.get("m", n)), int(spec["k"]), int(spec.get("seed", 0)))
        return FacilityLocationObjective(weights)
    if kind == "modular":
        return ModularObjective(spec["values"])
    raise ConfigError(f"unknown objective kind {kind!r}")


# (n, #edges, q, #categories) per dataset
GRAPH_DATASETS = {
    "seventh-graders": (29, 376, 0.7, 6),
    "highschool": (70, 366, 0.2, 10),
    "reality-mining": (96, 1_086_404, 0.75, 6),
    "residence-hall": (217, 2_672, 0.75, 10),
    "infectious": (410, 17_298, 0.7, 6),
}

FOOTBALL = {"n": 35, "edges": 118, "k": 5, "q": 0.75}

_COMPARISON_RUNS = [
    {"name": "shrunken-fw", "epochs": 20},
    {"name": "two-phase-fw", "epochs": 20},
    {"name": "block-ca", "epochs": 20, "init": "zero"},
    {"name": "block-ca", "epochs": 20, "init": "shrunken-fw"},
    {"name": "block-ca", "epochs": 20, "init": "two-phase-fw"},
]

PRESETS = ("facility", "football", *GRAPH_DATASETS)


def preset(name: str, dataset: str | None = None, samples: int = 200, output: str | None = None, **overrides) -> ExperimentConfig:
    """Benchmark configurations: five runs of 20 epochs on one objective.

    ``football`` uses ``dataset`` when given and otherwise a seeded random
    graph with the same node and edge counts. Graph-dataset presets require the
    Konect edge list.
    """
    if name == "facility":
        objective = {"kind": "facility", "n": 50, "m": 50, "k": 5, "seed": 0}
    elif name == "football":
        objective = {"kind": "revenue", "q": FOOTBALL["q"], "k": FOOTBALL["k"]}
        if dataset:
            objective["dataset"] = dataset
        else:
            objective["random_graph"] = {"n": FOOTBALL["n"], "edges": FOOTBALL["edges"], "seed": 0}
    elif name in GRAPH_DATASETS:
        if not dataset:
            raise ConfigError(f"preset {name!r} needs the dataset edge list (--dataset)")
        _, _, q, k = GRAPH_DATASETS[name]
        objective = {"kind": "revenue", "q": q, "k": k, "dataset": dataset}
    else:
        raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")
    data = {
        "objective": objective,
        "algorithms": copy.deepcopy(_COMPARISON_RUNS),
        "gradient": {"mode": MONTE_CARLO, "samples": samples},
        "elbo_samples": 10 * samples,
        "seed": 0,
        "output": output or f"runs/{name}",
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)
