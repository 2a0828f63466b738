"""Reading and writing the files the command-line tool consumes and produces."""

import dataclasses
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from linglam import __version__
from linglam.entities import (
    DataMatrix,
    DiscoveryResult,
    GinResult,
    LingLamGraph,
    NoiseSpec,
    RunConfig,
    TraceEntry,
)
from linglam.errors import DataFormatError, DuplicateColumn, NonNumericCell, TooFewRows
from linglam.evaluation import BenchmarkRow, benchmark_frame
from linglam.graph import SCHEMA_VERSION, graph_from_dict, graph_to_dict, noise_to_dict

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def load_csv(path: PathLike) -> DataMatrix:
    """Header row of column names followed by numeric rows; cells must be finite."""
    try:
        table = pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True
        )
    except pd.errors.EmptyDataError:
        raise TooFewRows(0)
    except pd.errors.ParserError as exc:
        raise DataFormatError(f"malformed CSV file {path}: {exc}") from exc
    names = [str(name).strip() for name in table.iloc[0]]
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateColumn(name)
        seen.add(name)
    body = table.iloc[1:].to_numpy(dtype=str)
    if body.shape[0] < 2:
        raise TooFewRows(body.shape[0])
    try:
        values = body.astype(float)
    except ValueError:
        values = None
    if values is None or not np.all(np.isfinite(values)):
        for row, cells in enumerate(body, start=1):
            for column, cell in enumerate(cells):
                try:
                    value = float(cell)
                except ValueError:
                    raise NonNumericCell(row, names[column], cell)
                if not np.isfinite(value):
                    raise NonNumericCell(row, names[column], cell)
    return DataMatrix(values=values, names=tuple(names))


def write_csv(data: DataMatrix, path: PathLike):
    """Write with shortest round-trip float representations."""
    frame = pd.DataFrame(data.values, columns=list(data.names))
    frame.to_csv(path, index=False, lineterminator="\r\n")


def jsonable(obj: Any) -> Any:
    """Convert configuration and result objects into plain JSON values."""
    if isinstance(obj, NoiseSpec):
        return noise_to_dict(obj)
    if isinstance(obj, Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def provenance(run_config: RunConfig, seed: Optional[int]) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "seed": seed,
        "config": jsonable(run_config),
    }


def gin_result_to_dict(result: GinResult) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "satisfied": result.satisfied,
        "combined_p": result.combined_p,
        "pairwise_p": [{"z": name, "p": p} for name, p in result.pairwise_p],
        "degenerate": result.degenerate,
        "clamped": result.clamped,
    }
    if result.omega is not None:
        doc["omega"] = {
            "vector": result.omega.omega.tolist(),
            "residual_singular_value": result.omega.residual_singular_value,
            "null_dim": result.omega.null_dim,
            "degenerate": result.omega.degenerate,
        }
    if result.certificate:
        doc["certificate"] = list(result.certificate)
    return doc


def _trace_entry_to_dict(entry: TraceEntry) -> Dict[str, Any]:
    return {
        "description": entry.description,
        "z": list(entry.z),
        "y": list(entry.y),
        "satisfied": entry.result.satisfied,
        "combined_p": entry.result.combined_p,
    }


def result_to_dict(result: DiscoveryResult) -> Dict[str, Any]:
    doc: Dict[str, Any] = {
        "clusters": [
            {"id": i, "members": list(cluster.names), "latent_dim": cluster.latent_dim}
            for i, cluster in enumerate(result.clusters)
        ],
        "order": list(result.order),
        "unclustered": [ref.name for ref in sorted(result.unclustered)],
        "low_confidence": list(result.low_confidence),
    }
    if result.trace:
        doc["trace"] = [_trace_entry_to_dict(entry) for entry in result.trace]
    return doc


def result_to_dot(result: DiscoveryResult) -> str:
    """Clusters as boxes around their observed members, latent sets as ellipses
    joined along the discovered order."""
    lines = ["digraph discovery {", "  compound=true;"]
    for i, cluster in enumerate(result.clusters):
        lines.append(f"  subgraph cluster_{i} {{")
        lines.append("    style=rounded;")
        lines.append(f'    label="S{i + 1}";')
        for name in cluster.names:
            lines.append(f'    "{name}" [shape=plaintext];')
        lines.append("  }")
        lines.append(f'  "L(S{i + 1})" [shape=ellipse, label="L(S{i + 1}) dim={cluster.latent_dim}"];')
        for name in cluster.names:
            lines.append(f'  "L(S{i + 1})" -> "{name}";')
    for earlier, later in zip(result.order, list(result.order)[1:]):
        lines.append(f'  "L(S{earlier + 1})" -> "L(S{later + 1})" [style=bold];')
    for ref in sorted(result.unclustered):
        lines.append(f'  "{ref.name}" [shape=plaintext, fontcolor=gray];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_json(doc: Mapping[str, Any], path: PathLike):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def load_graph(path: PathLike) -> LingLamGraph:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"graph file {path} is not valid JSON: {exc}") from exc
    return graph_from_dict(doc)


def write_graph(graph: LingLamGraph, path: PathLike, extra: Optional[Mapping[str, Any]] = None):
    write_json({**graph_to_dict(graph), **(extra or {})}, path)


def write_benchmark(
    rows: Sequence[BenchmarkRow],
    csv_path: PathLike,
    json_path: Optional[PathLike] = None,
    gnuplot_path: Optional[PathLike] = None,
    extra: Optional[Mapping[str, Any]] = None,
):
    benchmark_frame(rows).to_csv(csv_path, index=False, lineterminator="\r\n")
    if json_path is not None:
        write_json({**(extra or {}), "rows": jsonable(list(rows))}, json_path)
    if gnuplot_path is not None:
        lines = ["# scenario n ordering_rate"]
        for scenario in dict.fromkeys(row.scenario for row in rows):
            lines.append(f"# {scenario}")
            lines.extend(
                f"{row.scenario} {row.sample_size} {row.ordering_rate:.4f}"
                for row in rows
                if row.scenario == scenario
            )
            lines.append("")
        Path(gnuplot_path).write_text("\n".join(lines) + "\n")
