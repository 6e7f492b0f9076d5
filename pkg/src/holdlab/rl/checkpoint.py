from __future__ import annotations

from pathlib import Path

import numpy as np

from .qnet import QNetworkParams

FORMAT_VERSION = 1


def save_params(params: QNetworkParams, path: str | Path, **meta: float | str) -> Path:
    path = Path(path)
    arrays = {f"W{i}": w for i, w in enumerate(params.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(params.biases)})
    with open(path, "wb") as fh:
        np.savez(fh, version=np.array(FORMAT_VERSION), dims=np.array(params.dims),
                 meta_keys=np.array(sorted(meta), dtype=str),
                 meta_vals=np.array([str(meta[k]) for k in sorted(meta)], dtype=str), **arrays)
    return path


def load_params(path: str | Path) -> QNetworkParams:
    with np.load(path) as data:
        version = int(data["version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = [int(d) for d in data["dims"]]
        n = len(dims) - 1
        ws = [data[f"W{i}"].copy() for i in range(n)]
        bs = [data[f"b{i}"].copy() for i in range(n)]
    params = QNetworkParams(ws, bs)
    if params.dims != dims:
        raise ValueError(f"checkpoint dims header {dims} does not match tensors {params.dims}")
    return params
