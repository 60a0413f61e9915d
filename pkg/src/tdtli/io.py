"""CSV and JSON emission of scan results.

CSV files open with `#`-prefixed metadata lines, one `# units:` line and a
header row; numbers are written with 17 significant digits.  The JSON mirror
holds the same numbers, which `json` round-trips exactly.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from importlib import metadata as _metadata
from pathlib import Path

import numpy as np

from .results import ScanResult

TIMESTAMP_KEY = "timestamp"


def artifact_version() -> str:
    try:
        return _metadata.version("artifact")
    except _metadata.PackageNotFoundError:
        return "0+unknown"


def stamp(meta: dict, config_digest: str | None = None) -> dict:
    out = dict(meta)
    out.setdefault("artifact_version", artifact_version())
    if config_digest is not None:
        out["config_digest"] = config_digest
    out[TIMESTAMP_KEY] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return out


def _plain(value):
    """Metadata to JSON-native types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    return value


def to_dict(result: ScanResult, extra: dict | None = None) -> dict:
    out = {
        "parameter": result.parameter,
        "columns": list(result.columns),
        "units": {k: result.units[k] for k in result.columns},
        "rows": [[float(result.columns[c][i]) for c in result.columns] for i in range(len(result))],
        "metadata": _plain(result.metadata),
    }
    if extra:
        out.update(_plain(extra))
    return out


def dumps_json(result: ScanResult, extra: dict | None = None) -> str:
    return json.dumps(to_dict(result, extra), sort_keys=True, indent=1) + "\n"


def write_json(result: ScanResult, path: str | Path, extra: dict | None = None) -> Path:
    path = Path(path)
    path.write_text(dumps_json(result, extra), encoding="utf-8")
    return path


def read_json(path: str | Path) -> tuple[ScanResult, dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    names = data["columns"]
    rows = np.asarray(data["rows"], dtype=float).reshape(-1, len(names))
    result = ScanResult(data["parameter"], {n: rows[:, i] for i, n in enumerate(names)},
                        data["units"], data.get("metadata", {}))
    extra = {k: v for k, v in data.items()
             if k not in ("parameter", "columns", "units", "rows", "metadata")}
    return result, extra


def write_csv(result: ScanResult, path: str | Path) -> Path:
    path = Path(path)
    names = list(result.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# parameter: {result.parameter}\n")
        for key in sorted(result.metadata):
            fh.write(f"# {key}: {json.dumps(_plain(result.metadata[key]), sort_keys=True)}\n")
        fh.write("# units: " + ",".join(result.units[n] for n in names) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(len(result)):
            writer.writerow([f"{result.columns[n][i]:.17g}" for n in names])
    return path


def read_csv(path: str | Path) -> ScanResult:
    meta: dict = {}
    units: list[str] = []
    parameter = None
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            if key == "parameter":
                parameter = value
            elif key == "units":
                units = value.split(",")
            else:
                meta[key] = json.loads(value)
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: no header row")
    names = rows[0]
    if len(units) != len(names):
        raise ValueError(f"{path}: units line has {len(units)} entries for {len(names)} columns")
    data = np.asarray([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(names))
    return ScanResult(parameter or names[0], {n: data[:, i] for i, n in enumerate(names)},
                      dict(zip(names, units)), meta)


def emit(result: ScanResult, out_dir: str | Path, stem: str, extra: dict | None = None,
         formats: tuple[str, ...] = ("csv", "json")) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    if "csv" in formats:
        paths["csv"] = write_csv(result, out_dir / f"{stem}.csv")
    if "json" in formats:
        paths["json"] = write_json(result, out_dir / f"{stem}.json", extra)
    return paths


def strip_timestamp(text: str) -> dict:
    """Parsed JSON output with the timestamp removed, for determinism checks."""
    data = json.loads(text)
    data.get("metadata", {}).pop(TIMESTAMP_KEY, None)
    return data
