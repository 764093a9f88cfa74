"""Edge-list ingestion for Konect-style graph files."""

from __future__ import annotations

import os
import warnings
from pathlib import Path

import numpy as np

from ..objectives import WeightedGraph


class EdgeListError(ValueError):
    pass


def parse_edge_list(lines, symmetrize: bool = True, collapse: bool = True, source: str = "<edges>") -> WeightedGraph:
    """Parse ``u v [weight [...]]`` lines.

    ``%`` and ``#`` lines are comments. Node ids are arbitrary integers
    (Konect uses 1-based ids) and are remapped to dense indices in sorted
    order. Columns after the weight (Konect timestamps) are ignored.
    Repeated edges add up when ``collapse`` is set and are an error
    otherwise. Self-loops are dropped with a warning.
    """
    edges: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line[0] in "%#":
            continue
        parts = line.split()
        if len(parts) < 2:
            raise EdgeListError(f"{source}:{lineno}: expected 'u v [weight]', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) > 2 else 1.0
        except ValueError:
            raise EdgeListError(f"{source}:{lineno}: malformed edge {line!r}") from None
        if not np.isfinite(w) or w < 0:
            raise EdgeListError(f"{source}:{lineno}: weight must be finite and non-negative, got {w}")
        if u == v:
            warnings.warn(f"{source}:{lineno}: dropping self-loop on node {u}", stacklevel=2)
            continue
        edges.append((u, v, w))
    if not edges:
        raise EdgeListError(f"{source}: graph has no edges")

    labels = sorted({u for u, _, _ in edges} | {v for _, v, _ in edges})
    index = {label: i for i, label in enumerate(labels)}
    W = np.zeros((len(labels), len(labels)))
    seen = set()
    for u, v, w in edges:
        a, b = index[u], index[v]
        key = (min(a, b), max(a, b)) if symmetrize else (a, b)
        if key in seen and not collapse:
            raise EdgeListError(f"{source}: repeated edge {u} {v}")
        seen.add(key)
        W[a, b] += w
        if symmetrize:
            W[b, a] += w
    return WeightedGraph(W, labels=tuple(labels), edge_lines=len(edges))


def load_edge_list(path, symmetrize: bool = True, collapse: bool = True) -> WeightedGraph:
    path = Path(path)
    with open(path) as fh:
        return parse_edge_list(fh, symmetrize=symmetrize, collapse=collapse, source=str(path))


def format_edge_list(graph: WeightedGraph) -> str:
    """Inverse of :func:`parse_edge_list` for graphs it produced.

    Symmetric graphs are written once per unordered pair and reload with
    ``symmetrize=True``; others list every directed entry.
    """
    W = graph.weights
    sym = graph.symmetric
    lines = ["% sym weighted" if sym else "% asym weighted"]
    rows, cols = np.nonzero(np.triu(W, 1) if sym else W)
    for a, b in zip(rows, cols):
        lines.append(f"{graph.labels[a]} {graph.labels[b]} {float(W[a, b])!r}")
    return "\n".join(lines) + "\n"


def write_edge_list(graph: WeightedGraph, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(format_edge_list(graph))
    os.replace(tmp, path)
