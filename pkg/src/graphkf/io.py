"""On-disk formats: episode directories and model checkpoints.

An episode directory holds ``meta.json`` plus long-format CSVs
(``t,node,value``) for inputs, outputs, and (when known) true states.
States are optional on load so externally recorded data without ground
truth still fits. Checkpoints are single JSON files carrying the graph,
family, dimensions, and named parameter arrays.

Both formats carry a ``format_version`` field; loaders reject versions
they do not understand instead of guessing.
"""

import json
import os

import numpy as np

from .errors import DataFormatError
from .graphs import GraphTopology
from .models import ReplicaModel, ReplicaParams, StgnnModel
from .simulate import Episode, config_from_dict, config_to_dict

__all__ = [
    "FORMAT_VERSION",
    "save_episode",
    "load_episode",
    "save_checkpoint",
    "load_checkpoint",
]

FORMAT_VERSION = 1


def _write_series(path: str, arr: np.ndarray) -> None:
    total, n = arr.shape
    with open(path, "w") as fh:
        fh.write("t,node,value\n")
        for t in range(total):
            row = arr[t]
            fh.writelines(f"{t},{v},{row[v]:.17g}\n" for v in range(n))


def _read_series(path: str, total: int, n: int) -> np.ndarray:
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise DataFormatError(f"cannot parse {path}: {exc}") from exc
    if raw.shape != (total * n, 3):
        raise DataFormatError(f"{path}: expected {total * n} rows of t,node,value, got shape {raw.shape}")
    arr = np.full((total, n), np.nan)
    t_idx = raw[:, 0].astype(np.intp)
    v_idx = raw[:, 1].astype(np.intp)
    if t_idx.min() < 0 or t_idx.max() >= total or v_idx.min() < 0 or v_idx.max() >= n:
        raise DataFormatError(f"{path}: t/node indices out of range")
    arr[t_idx, v_idx] = raw[:, 2]
    if np.isnan(arr).any():
        raise DataFormatError(f"{path}: some (t, node) cells missing")
    return arr


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataFormatError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path} is not valid JSON: {exc}") from exc


def _check_version(data: dict, kind: str, path: str) -> None:
    if data.get("kind") != kind:
        raise DataFormatError(f"{path}: expected kind={kind!r}, got {data.get('kind')!r}")
    if data.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported format_version {data.get('format_version')!r}")


def save_episode(episode: Episode, dirpath: str) -> None:
    """Write meta.json + inputs/states/outputs CSVs into ``dirpath``."""
    os.makedirs(dirpath, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": "episode",
        "n_nodes": episode.n_nodes,
        "length": episode.length,
        "edges": episode.topology.edges(),
        "config": config_to_dict(episode.config),
    }
    with open(os.path.join(dirpath, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_series(os.path.join(dirpath, "inputs.csv"), episode.inputs)
    _write_series(os.path.join(dirpath, "outputs.csv"), episode.outputs)
    if episode.states is not None:
        _write_series(os.path.join(dirpath, "states.csv"), episode.states)


def load_episode(dirpath: str) -> Episode:
    """Inverse of :func:`save_episode`; ``states`` is None if states.csv is absent."""
    meta = _load_json(os.path.join(dirpath, "meta.json"))
    _check_version(meta, "episode", dirpath)
    try:
        n = int(meta["n_nodes"])
        total = int(meta["length"])
        edges = meta["edges"]
        config = config_from_dict(meta["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{dirpath}/meta.json: bad or missing field ({exc})") from exc
    topology = GraphTopology.from_edges(n, edges)
    inputs = _read_series(os.path.join(dirpath, "inputs.csv"), total, n)
    outputs = _read_series(os.path.join(dirpath, "outputs.csv"), total, n)
    states_path = os.path.join(dirpath, "states.csv")
    states = _read_series(states_path, total, n) if os.path.exists(states_path) else None
    return Episode(config, topology, inputs, states, outputs)


def save_checkpoint(model, path: str, extra: dict = None) -> None:
    """Serialize a fitted model (graph, dims, named parameters) to JSON."""
    data = {
        "format_version": FORMAT_VERSION,
        "kind": "checkpoint",
        "n_nodes": model.n_nodes,
        "edges": model.topology.edges(),
    }
    if isinstance(model, ReplicaModel):
        p = model.params
        data["family"] = "replica"
        data["params"] = {
            "time_weight": p.time_weight,
            "space_weight": p.space_weight,
            "readout_bias": p.readout_bias,
            "readout_scale": p.readout_scale,
        }
        data["activations"] = {"state": p.state_activation, "readout": p.readout_activation}
    elif isinstance(model, StgnnModel):
        data["family"] = "stgnn"
        data["dims"] = {"d_x": model.d_x, "d_h": model.d_h, "d_y": model.d_y, "hidden": model.hidden}
        data["params"] = {name: arr.tolist() for name, arr in model._param_arrays()}
    else:
        raise DataFormatError(f"cannot checkpoint model type {type(model).__name__}")
    if extra:
        data["extra"] = extra
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str):
    """Rebuild the model stored at ``path``; returns (model, metadata dict)."""
    data = _load_json(path)
    _check_version(data, "checkpoint", path)
    try:
        topology = GraphTopology.from_edges(int(data["n_nodes"]), data["edges"])
        family = data["family"]
        params = data["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad or missing field ({exc})") from exc

    if family == "replica":
        acts = data.get("activations", {})
        try:
            rp = ReplicaParams(
                time_weight=float(params["time_weight"]),
                space_weight=float(params["space_weight"]),
                readout_bias=float(params["readout_bias"]),
                readout_scale=float(params["readout_scale"]),
                state_activation=acts.get("state", "identity"),
                readout_activation=acts.get("readout", "identity"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: bad replica params ({exc})") from exc
        return ReplicaModel(topology, rp), data

    if family == "stgnn":
        dims = data.get("dims", {})
        model = StgnnModel(
            topology,
            d_x=int(dims.get("d_x", 1)),
            d_h=int(dims.get("d_h", 7)),
            d_y=int(dims.get("d_y", 1)),
            hidden=int(dims.get("hidden", 7)),
        )
        try:
            for name, arr in model._param_arrays():
                stored = np.asarray(params[name], dtype=np.float64)
                if stored.shape != arr.shape:
                    raise DataFormatError(f"{path}: parameter {name} has shape {stored.shape}, expected {arr.shape}")
                arr[...] = stored
        except KeyError as exc:
            raise DataFormatError(f"{path}: missing parameter {exc}") from exc
        return model, data

    raise DataFormatError(f"{path}: unknown model family {family!r}")
