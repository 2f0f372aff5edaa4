"""Binary-free parameter store.

A parameter set is saved as a directory holding ``manifest.json`` (layer
list, shapes, hyperparameters) plus one flat CSV file per tensor under
``params/``. Values are written with 17 significant digits, which decodes
back to the identical float64 bit pattern.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_NAME = "dwnet-params-v1"


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def _safe_name(name: str) -> str:
    return name.replace("/", "_").replace("\\", "_")


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def save_params(directory, manifest: dict, params: dict[str, np.ndarray]) -> None:
    """Write ``manifest`` and the named float64 arrays under ``directory``."""
    directory = Path(directory)
    (directory / "params").mkdir(parents=True, exist_ok=True)
    index = []
    for name, arr in params.items():
        arr = np.asarray(arr, dtype=np.float64)
        fname = f"params/{_safe_name(name)}.csv"
        lines = "\n".join(format_float(v) for v in arr.reshape(-1))
        (directory / fname).write_text(lines + "\n" if arr.size else "")
        index.append({"name": name, "shape": list(arr.shape), "file": fname})
    dump_json(
        {"format": FORMAT_NAME, "manifest": manifest, "params": index},
        directory / "manifest.json",
    )


def load_params(directory) -> tuple[dict, dict[str, np.ndarray]]:
    """Read back (manifest, params) written by :func:`save_params`."""
    directory = Path(directory)
    doc = json.loads((directory / "manifest.json").read_text())
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"unexpected parameter format {doc.get('format')!r} "
                         f"in {directory / 'manifest.json'}")
    params = {}
    for entry in doc["params"]:
        text = (directory / entry["file"]).read_text()
        values = [float(t) for t in text.split()]
        shape = tuple(entry["shape"])
        arr = np.array(values, dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise ValueError(
                f"parameter {entry['name']!r}: {arr.size} values do not fill shape {shape}"
            )
        params[entry["name"]] = arr.reshape(shape)
    return doc["manifest"], params
