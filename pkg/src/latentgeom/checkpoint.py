"""Model checkpoints: a JSON envelope plus little-endian float64 side files."""

from __future__ import annotations

import json
import os

import numpy as np

from .models.base import Dataset
from .models.kernel_models import gp_from_params, krr_fit
from .models.kernels import KernelParams
from .models.mlp import MLPModel, MlpParams
from .models.vae import MlpStd, RbfPrecisionNet, VAEModel

FORMAT = "latentgeom-checkpoint/1"


def _write_blob(path, stem, name, arr, table):
    fname = f"{stem}.{name}.f64"
    np.ascontiguousarray(arr, dtype="<f8").tofile(os.path.join(os.path.dirname(path) or ".", fname))
    table[name] = {"file": fname, "shape": list(np.shape(arr))}


def _read_blob(path, entry):
    full = os.path.join(os.path.dirname(path) or ".", entry["file"])
    if not os.path.exists(full):
        raise FileNotFoundError(f"checkpoint blob missing: {full}")
    return np.fromfile(full, dtype="<f8").reshape(entry["shape"])


def _mlp_arrays(prefix, p, out):
    for k, (W, b) in enumerate(zip(p.weights, p.biases)):
        out[f"{prefix}W{k}"] = W
        out[f"{prefix}b{k}"] = b


def _mlp_from(prefix, arrays, n_layers):
    return MlpParams(tuple(arrays[f"{prefix}W{k}"] for k in range(n_layers)),
                     tuple(arrays[f"{prefix}b{k}"] for k in range(n_layers)))


def save_model(model, path, name=None):
    """Write ``path`` (JSON) and its blob files next to it."""
    stem = os.path.splitext(os.path.basename(path))[0]
    arrays = {}
    hyper = {}
    params = {}
    mtype = model.model_type
    if mtype in ("krr", "gp"):
        arrays["Z"], arrays["X"] = model.data.Z, model.data.X
        hyper = model.params.to_dict()
    elif mtype == "mlp":
        _mlp_arrays("mean_", model.params, arrays)
        params["layers"] = len(model.params.weights)
    elif mtype in ("vae", "vae_rbf"):
        _mlp_arrays("mean_", model.mean.params, arrays)
        params["layers"] = len(model.mean.params.weights)
        if mtype == "vae_rbf":
            net = model.std
            arrays["centers"], arrays["precision_weights"] = net.centers, net.weights
            hyper = {"bandwidth": net.bandwidth, "floor": net.floor}
        else:
            _mlp_arrays("std_", model.std.params, arrays)
            params["std_layers"] = len(model.std.params.weights)
    else:
        raise ValueError(f"cannot checkpoint model type {mtype!r}")
    table = {}
    for key in sorted(arrays):
        _write_blob(path, stem, key, arrays[key], table)
    env = {
        "format": FORMAT,
        "model_type": mtype,
        "name": name or mtype,
        "params": params,
        "hyperparameters": hyper,
        "seed": getattr(model, "seed", None),
        "arrays": table,
    }
    with open(path, "w") as fh:
        json.dump(env, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return env


def load_model(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path) as fh:
        env = json.load(fh)
    if env.get("format") != FORMAT:
        raise ValueError(f"{path}: not a checkpoint of format {FORMAT}")
    arrays = {k: _read_blob(path, v) for k, v in env["arrays"].items()}
    mtype = env["model_type"]
    if mtype in ("krr", "gp"):
        data = Dataset(arrays["Z"], arrays["X"])
        p = KernelParams(**env["hyperparameters"])
        return krr_fit(data, p) if mtype == "krr" else gp_from_params(data, p)
    mean = MLPModel(_mlp_from("mean_", arrays, env["params"]["layers"]), seed=env["seed"])
    if mtype == "mlp":
        return mean
    if mtype == "vae_rbf":
        h = env["hyperparameters"]
        std = RbfPrecisionNet(arrays["centers"], h["bandwidth"], arrays["precision_weights"], h["floor"])
    else:
        std = MlpStd(_mlp_from("std_", arrays, env["params"]["std_layers"]))
    return VAEModel(mean, std, mtype, env["seed"])
