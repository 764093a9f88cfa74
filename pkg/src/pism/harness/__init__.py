"""Experiment harness: dataset ingestion, configuration, runs and comparisons."""

from .config import PRESETS, AlgorithmSpec, ConfigError, ExperimentConfig, build_objective, preset
from .graphs import EdgeListError, format_edge_list, load_edge_list, parse_edge_list, write_edge_list
from .runner import StageError, compare_runs, format_comparison, objective_fingerprint, run_experiment
