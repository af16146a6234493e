"""Flat binary persistence for path bundles and CSV step statistics.

Layout: 8-byte little-endian header length, a UTF-8 JSON header (dims, grid,
seed, which arrays are present), then the arrays as row-major float64 in the
order X, Q, dW1, dW2, frozen_x.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd

from .grid import TimeGrid
from .simulate import PathBundle

MAGIC = "twoscale-bundle/1"
ARRAY_ORDER = ("X", "Q", "dW1", "dW2", "frozen_x")
_DTYPE = np.dtype("<f8")


def save_bundle(bundle: PathBundle, path: Path) -> Path:
    header = {
        "magic": MAGIC,
        "grid": bundle.grid.to_dict(),
        "n_paths": bundle.n_paths,
        "seed": bundle.seed,
        "eps": bundle.eps,
        "shapes": {
            name: list(getattr(bundle, name).shape)
            for name in ARRAY_ORDER
            if getattr(bundle, name) is not None
        },
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(np.uint64(len(encoded)).astype("<u8").tobytes())
        handle.write(encoded)
        for name in ARRAY_ORDER:
            value = getattr(bundle, name)
            if value is not None:
                handle.write(np.ascontiguousarray(value, dtype=_DTYPE).tobytes())
    return path


def load_bundle(path: Path) -> PathBundle:
    raw = Path(path).read_bytes()
    length = int(np.frombuffer(raw[:8], dtype="<u8")[0])
    header = json.loads(raw[8 : 8 + length].decode("utf-8"))
    if header.get("magic") != MAGIC:
        raise ValueError(f"{path} is not a path bundle file")
    offset = 8 + length
    arrays: dict[str, np.ndarray | None] = {name: None for name in ARRAY_ORDER}
    for name in ARRAY_ORDER:
        shape = header["shapes"].get(name)
        if shape is None:
            continue
        count = int(np.prod(shape))
        arrays[name] = (
            np.frombuffer(raw, dtype=_DTYPE, count=count, offset=offset).reshape(shape).copy()
        )
        offset += count * _DTYPE.itemsize
    grid = header["grid"]
    return PathBundle(
        grid=TimeGrid(grid["t0"], grid["t1"], grid["n_steps"]),
        n_paths=header["n_paths"],
        seed=header["seed"],
        eps=header["eps"],
        **arrays,
    )


def step_statistics(bundle: PathBundle) -> pd.DataFrame:
    frame = pd.DataFrame({"step": np.arange(bundle.grid.n_steps + 1), "t": bundle.grid.times})
    for label, states in (("x", bundle.X), ("q", bundle.Q)):
        if states is None:
            continue
        for column in range(states.shape[2]):
            frame[f"{label}{column + 1}_mean"] = states[:, :, column].mean(axis=0)
            frame[f"{label}{column + 1}_std"] = states[:, :, column].std(axis=0)
    return frame


def export_step_statistics(bundle: PathBundle, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    step_statistics(bundle).to_csv(path, index=False, float_format="%.12g")
    return path
