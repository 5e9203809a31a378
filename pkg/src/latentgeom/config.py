"""Run configuration for the command-line tools (JSON)."""

from __future__ import annotations

import copy
import json

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "threads": 1,
    "dataset": {"N": 200, "D": 1000, "noise": 0.1},
    "model": {
        "type": "gp",
        "theta_rbf": None,
        "alpha": None,
        "theta_lin": 0.0,
        "noise": None,
        "epochs": 2000,
        "lr": 1e-3,
        "batch_size": 32,
        "widths": None,
        "vae_epochs": 500,
        "n_centers": 32,
        "bandwidth": None,
        "floor": 1e-4,
    },
    "solver": {"K": 32, "max_iter": 5000, "gtol": 1e-6},
    "evaluation": {"n_pairs": 50},
    "measure": {"bounds": [-1.6, 1.6, -1.6, 1.6], "resolution": 64,
                "mode": "sqrtdet_of_expected", "n_samples": 500},
    "swirl": {"n": 10000},
}

MODEL_TYPES = ("gp", "krr", "krr_linear", "mlp", "vae", "vae_rbf", "euclidean")
MEASURE_MODES = ("sqrtdet_of_expected", "expected_sqrtdet_mc")


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("invalid configuration: " + "; ".join(problems))
        self.problems = problems


def _merge(base, over, path, problems):
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            problems.append(f"unknown key '{where}'")
        elif isinstance(base[key], dict):
            if not isinstance(val, dict):
                problems.append(f"'{where}' must be an object")
            else:
                _merge(base[key], val, where + ".", problems)
        else:
            base[key] = val


def _check(cfg, problems):
    def num(path, v, lo=None, integer=False, optional=False):
        if v is None and optional:
            return
        ok = isinstance(v, int) if integer else isinstance(v, (int, float))
        if isinstance(v, bool) or not ok or (lo is not None and v < lo):
            problems.append(f"'{path}' must be {'an integer' if integer else 'a number'}"
                            + (f" >= {lo}" if lo is not None else ""))

    num("seed", cfg["seed"], 0, True)
    num("threads", cfg["threads"], 1, True)
    if not isinstance(cfg["out"], str) or not cfg["out"]:
        problems.append("'out' must be a non-empty path")
    ds = cfg["dataset"]
    num("dataset.N", ds["N"], 4, True)
    num("dataset.D", ds["D"], 3, True)
    num("dataset.noise", ds["noise"], 0)
    m = cfg["model"]
    if m["type"] not in MODEL_TYPES:
        problems.append(f"'model.type' must be one of {', '.join(MODEL_TYPES)}")
    for k in ("theta_rbf", "alpha", "noise", "bandwidth"):
        num(f"model.{k}", m[k], 0, optional=True)
    num("model.theta_lin", m["theta_lin"], 0)
    num("model.epochs", m["epochs"], 1, True)
    num("model.vae_epochs", m["vae_epochs"], 1, True)
    num("model.batch_size", m["batch_size"], 1, True)
    num("model.n_centers", m["n_centers"], 1, True)
    num("model.lr", m["lr"], 0)
    num("model.floor", m["floor"], 0)
    if m["widths"] is not None and not (
        isinstance(m["widths"], list) and all(isinstance(w, int) and w > 0 for w in m["widths"])
    ):
        problems.append("'model.widths' must be a list of positive integers")
    s = cfg["solver"]
    num("solver.K", s["K"], 3, True)
    num("solver.max_iter", s["max_iter"], 1, True)
    num("solver.gtol", s["gtol"], 0)
    num("evaluation.n_pairs", cfg["evaluation"]["n_pairs"], 3, True)
    me = cfg["measure"]
    b = me["bounds"]
    if not (isinstance(b, list) and len(b) == 4 and all(isinstance(x, (int, float)) for x in b)
            and b[0] < b[1] and b[2] < b[3]):
        problems.append("'measure.bounds' must be [xmin, xmax, ymin, ymax] with min < max")
    num("measure.resolution", me["resolution"], 16, True)
    num("measure.n_samples", me["n_samples"], 100, True)
    if me["mode"] not in MEASURE_MODES:
        problems.append(f"'measure.mode' must be one of {', '.join(MEASURE_MODES)}")
    num("swirl.n", cfg["swirl"]["n"], 2, True)


def parse_config(obj):
    """Merge ``obj`` over the defaults and validate; raises :class:`ConfigError`."""
    if not isinstance(obj, dict):
        raise ConfigError(["configuration must be a JSON object"])
    cfg = copy.deepcopy(DEFAULTS)
    problems = []
    _merge(cfg, obj, "", problems)
    _check(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path):
    if path is None:
        return parse_config({})
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError([f"{path} is not valid JSON: {e}"]) from None
    return parse_config(obj)


def dump_config(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"
