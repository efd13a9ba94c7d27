import csv
import io
import json
import math
import zipfile
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def artifact_version() -> str:
    try:
        return version("mgcavity")
    except PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True, kw_only=True)
class Provenance:
    """Identity stamped on every data file: configuration hash, seeds and artifact version."""

    config_hash: str
    seeds: tuple[int, ...]
    version: str

    def to_record(self) -> dict[str, Any]:
        return {"config_hash": self.config_hash, "seeds": list(self.seeds), "version": self.version}


def _jsonable(value: Any) -> Any:
    match value:
        case np.ndarray():
            return value.tolist()
        case np.integer():
            return int(value)
        case np.floating():
            return float(value)
        case np.bool_():
            return bool(value)
        case Path():
            return str(value)
        case tuple() | set():
            return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _finite(value: Any) -> Any:
    match value:
        case float() | np.floating() if not math.isfinite(value):
            return None
        case dict():
            return {key: _finite(item) for key, item in value.items()}
        case list() | tuple():
            return [_finite(item) for item in value]
        case np.ndarray():
            return _finite(value.tolist())
    return value


def dump_json(payload: dict[str, Any]) -> str:
    """Sorted, indented JSON; non-finite floats are written as null."""
    return json.dumps(_finite(payload), sort_keys=True, indent=2, allow_nan=False, default=_jsonable) + "\n"


def write_json(path: Path, payload: dict[str, Any], provenance: Provenance) -> Path:
    path.write_text(dump_json({"meta": provenance.to_record(), **payload}), encoding="utf-8")
    return path


def read_json(path: Path) -> dict[str, Any]:
    return json.loads(path.read_text(encoding="utf-8"))


def _cell(value: Any) -> Any:
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    if value is None:
        return ""
    return value


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]], provenance: Provenance) -> Path:
    """CSV preceded by ``# key: value`` metadata lines."""
    with path.open("w", encoding="utf-8", newline="") as stream:
        for key, value in provenance.to_record().items():
            stream.write(f"# {key}: {json.dumps(value)}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def read_csv(path: Path) -> tuple[dict[str, Any], list[dict[str, str]]]:
    meta: dict[str, Any] = {}
    with path.open(encoding="utf-8", newline="") as stream:
        lines = stream.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value)
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def write_arrays(path: Path, arrays: dict[str, NDArray[Any]], provenance: Provenance) -> Path:
    """
    ``.npz`` archive readable with :func:`numpy.load`, with a ``meta`` entry
    holding the provenance as JSON. Member timestamps are pinned so identical
    inputs give identical bytes.
    """
    members = {"meta": np.asarray(dump_json(provenance.to_record())), **arrays}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(members):
            buffer = io.BytesIO()
            np.lib.format.write_array(buffer, np.asarray(members[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            archive.writestr(info, buffer.getvalue())
    return path


def read_arrays(path: Path) -> tuple[dict[str, Any], dict[str, NDArray[Any]]]:
    with np.load(path, allow_pickle=False) as archive:
        arrays = {name: archive[name] for name in archive.files if name != "meta"}
        meta = json.loads(str(archive["meta"]))
    return meta, arrays
