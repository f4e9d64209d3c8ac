import csv
import hashlib
import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from qtraj.exceptions import ArtifactError
from qtraj.models.artifact import ArtifactRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        for chunk in iter(lambda: f.read(1024 * 1024), b""):
            h.update(chunk)
    return h.hexdigest()


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(run_dir: Path, name: str, columns: Mapping[str, Sequence | np.ndarray]) -> ArtifactRecord:
    """One column per mapping entry, all of equal length; floats with 17 significant digits."""
    lengths = {key: len(values) for key, values in columns.items()}
    if len(set(lengths.values())) > 1:
        raise ArtifactError(f"{name}: columns have different lengths {lengths}")
    path = Path(run_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = next(iter(lengths.values()), 0)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, quoting=csv.QUOTE_MINIMAL, lineterminator="\n")
        writer.writerow(list(columns))
        for row in zip(*columns.values()):
            writer.writerow([_cell(value) for value in row])
    logger.debug("[Artifacts] Wrote %s (%d rows)", path, rows)
    return ArtifactRecord(name=name, sha256=sha256_file(path), kind="csv", rows=rows)


def write_json(run_dir: Path, name: str, payload: Any) -> ArtifactRecord:
    path = Path(run_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")
    logger.debug("[Artifacts] Wrote %s", path)
    return ArtifactRecord(name=name, sha256=sha256_file(path), kind="json")


def read_json(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"missing artifact: {path}")
    with path.open("r", encoding="utf-8") as f:
        payload = json.load(f)
    if not isinstance(payload, dict):
        raise ArtifactError(f"expected a JSON object in {path}")
    return payload


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Columns of a numeric CSV artifact as float arrays."""
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"missing artifact: {path}")
    with path.open("r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ArtifactError(f"empty CSV artifact: {path}")
        rows = list(reader)
    try:
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    except ValueError as e:
        raise ArtifactError(f"{path}: non-numeric or ragged rows ({e})")
    return {name: data[:, n] for n, name in enumerate(header)}


def read_npz(path: Path, required: Sequence[str]) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"missing input file: {path}")
    with np.load(path, allow_pickle=False) as data:
        missing = [key for key in required if key not in data.files]
        if missing:
            raise ArtifactError(f"{path} lacks arrays {missing}")
        return {key: data[key] for key in data.files}
