"""
rdbn Artifact Store

Writes and reads every stage output of a run: datasets, DAGs, fitted
networks, edge strengths, traces, reports and the run manifest.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from rdbn.bootstrap import EdgeStrengthTable
from rdbn.dag import Dag, Edge
from rdbn.data_pipeline import MergedDataset
from rdbn.exceptions import DeserializationError, StructuralError, ValidationError
from rdbn.network import FittedNetwork

# File format version for compatibility checking
FILE_FORMAT_VERSION = 1

PathLike = Union[str, Path]

MANIFEST_FILE = "manifest.json"


def _clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def dumps(data: Any) -> str:
    return json.dumps(_clean(data), indent=2, sort_keys=True, allow_nan=False) + "\n"


def file_digest(path: PathLike) -> str:
    """SHA-256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactStore:
    """
    Output directory of one run.

    File structure (each file written only by the stages that produce it):
        out_dir/
        ├── manifest.json             # RunManifest
        ├── merged.csv / merged.json  # MergedDataset + sidecar
        ├── missingness.csv
        ├── completed.csv / completed.json
        ├── imputation_trace.csv / imputation_summary.json
        ├── dag.json / dag.dot / network.json / search_trace.jsonl
        ├── strengths.csv / strengths.json
        ├── consensus.json / consensus.dot / consensus_network.json
        ├── report.csv / report.json / correlations.csv
        ├── regression_table.txt / regression_table.csv
        └── scenario.json / truth.csv / truth.dot

    Args:
        out_dir: Directory for the run's files. Created if missing.
    """

    def __init__(self, out_dir: PathLike) -> None:
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def list_files(self) -> List[str]:
        return sorted(p.name for p in self.out_dir.iterdir() if p.is_file() and p.suffix != ".tmp")

    # ------------------------------------------------------------------
    # Primitive writers
    # ------------------------------------------------------------------

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        self._atomic_write(path, text.encode("utf-8"))
        return path

    def write_json(self, name: str, data: Mapping[str, Any]) -> Path:
        """Write a JSON object stamped with the file format version."""
        payload = {"version": FILE_FORMAT_VERSION, **data}
        return self.write_text(name, dumps(payload))

    def write_jsonl(self, name: str, records: Iterable[Mapping[str, Any]]) -> Path:
        lines = [json.dumps(_clean(r), sort_keys=True, allow_nan=False) for r in records]
        return self.write_text(name, "".join(line + "\n" for line in lines))

    def write_frame(self, name: str, frame: pd.DataFrame, index: bool = False) -> Path:
        return self.write_text(name, frame.to_csv(index=index, lineterminator="\n"))

    # ------------------------------------------------------------------
    # Domain writers
    # ------------------------------------------------------------------

    def write_dataset(self, stem: str, dataset: MergedDataset) -> Path:
        """``<stem>.csv`` (country-indexed, empty = missing) plus ``<stem>.json`` sidecar."""
        path = self.write_frame(f"{stem}.csv", dataset.to_frame(), index=True)
        self.write_json(
            f"{stem}.json",
            {
                "subject": dataset.subject,
                "columns": list(dataset.columns),
                "n": dataset.n,
                "p": dataset.p,
                "n_missing": dataset.n_missing,
            },
        )
        return path

    def write_dag(self, stem: str, dag: Dag, strengths: Optional[Mapping[Edge, float]] = None,
                  labels: Optional[Mapping[str, str]] = None) -> Path:
        """``<stem>.json`` and ``<stem>.dot``."""
        self.write_text(f"{stem}.dot", dag.to_dot(strengths=strengths, labels=labels))
        return self.write_json(f"{stem}.json", {"dag": dag.to_dict()})

    def write_network(self, name: str, net: FittedNetwork) -> Path:
        return self.write_json(name, {"network": net.to_dict()})

    def write_strengths(self, stem: str, table: EdgeStrengthTable) -> Path:
        """``<stem>.csv`` (parent,child,strength,direction) and ``<stem>.json``."""
        self.write_frame(f"{stem}.csv", table.to_frame())
        return self.write_json(f"{stem}.json", {"strengths": table.to_dict()})

    def save_manifest(self, manifest: Mapping[str, Any]) -> Path:
        return self.write_json(MANIFEST_FILE, manifest)

    def load_manifest(self) -> Dict[str, Any]:
        return read_json(self.path(MANIFEST_FILE))

    def _atomic_write(self, path: Path, data: bytes) -> None:
        """
        Write data to file atomically using temp file + rename.

        Args:
            path: Target file path
            data: Data to write
        """
        tmp_path = path.with_suffix(path.suffix + ".tmp")
        with open(tmp_path, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())

        # Atomic rename
        tmp_path.replace(path)

    def __repr__(self) -> str:
        return f"ArtifactStore(out_dir='{self.out_dir}')"


# ----------------------------------------------------------------------
# Readers
# ----------------------------------------------------------------------


def read_json(path: PathLike) -> Dict[str, Any]:
    """
    Load a JSON artifact and check its format version.

    Raises:
        DeserializationError: Missing, corrupt or too-new file
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise DeserializationError(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise DeserializationError(f"Corrupt JSON file {path}: {e}")
    if not isinstance(data, dict):
        raise DeserializationError(f"{path} does not hold a JSON object")
    version = data.get("version", 0)
    if not isinstance(version, int) or isinstance(version, bool):
        raise DeserializationError(f"{path} has an invalid format version: {version!r}")
    if version > FILE_FORMAT_VERSION:
        raise DeserializationError(
            f"File format version {data.get('version')} is newer than supported {FILE_FORMAT_VERSION}"
        )
    return data


def read_dataset(path: PathLike, subject: Optional[str] = None) -> MergedDataset:
    """
    Load a dataset CSV written by ``ArtifactStore.write_dataset``.

    The subject comes from the ``.json`` sidecar next to the CSV when it
    exists and ``subject`` is not given.
    """
    path = Path(path)
    if subject is None:
        sidecar = path.with_suffix(".json")
        subject = read_json(sidecar).get("subject", "reading") if sidecar.exists() else "reading"
    try:
        frame = pd.read_csv(path, index_col="country")
    except FileNotFoundError:
        raise DeserializationError(f"File not found: {path}")
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DeserializationError(f"Malformed dataset {path}: {e}")
    frame.index = frame.index.astype(str)
    try:
        return MergedDataset.from_frame(frame, subject=subject)
    except ValidationError as e:
        raise DeserializationError(f"Invalid dataset {path}: {e}")


def read_dag(path: PathLike) -> Dag:
    data = read_json(path)
    try:
        return Dag.from_dict(data["dag"])
    except (KeyError, TypeError) as e:
        raise DeserializationError(f"Invalid DAG file {path}: {e}")
    except StructuralError as e:
        raise DeserializationError(f"{path} does not describe a DAG: {e}")


def read_network(path: PathLike) -> FittedNetwork:
    data = read_json(path)
    try:
        return FittedNetwork.from_dict(data["network"])
    except (KeyError, TypeError, ValueError) as e:
        raise DeserializationError(f"Invalid network file {path}: {e}")
    except StructuralError as e:
        raise DeserializationError(f"{path} does not describe a DAG: {e}")


def read_strengths(path: PathLike) -> EdgeStrengthTable:
    data = read_json(path)
    if "strengths" not in data:
        raise DeserializationError(f"Invalid strengths file {path}: no 'strengths' entry")
    return EdgeStrengthTable.from_dict(data["strengths"])
