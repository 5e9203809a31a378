"""Command-line entry point: ``latentgeom <command> [--config PATH] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import checkpoint
from .config import ConfigError, dump_config, load_config, parse_config
from .errors import DegenerateInputError, GeometryError, PreconditionError
from .experiments.data import CircleDatasetSpec, generate_circle_data
from .experiments.evaluation import evaluate_model
from .experiments.figures import write_svg
from .experiments.measures import measure_grid, write_grid_csv
from .experiments.swirl import swirl_demo
from .experiments.table import derive_seeds, reproduce_table1, table_json
from .geodesics import GeodesicProblem, solve_geodesic
from .geometry import euclidean_field
from .models.base import Dataset
from .models.kernel_models import fit_linear_weight, gp_fit, gp_from_params, krr_fit
from .models.kernels import KernelParams
from .models.mlp import mlp_train
from .models.vae import vae_mlp_fit, vae_rbf_fit

log = logging.getLogger("latentgeom")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _path(cfg, name):
    return os.path.join(cfg["out"], name)


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
    log.info("wrote %s", path)


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _spec(cfg):
    ds = cfg["dataset"]
    return CircleDatasetSpec(ds["N"], ds["D"], float(ds["noise"]), derive_seeds(cfg["seed"])["data"])


def _load_dataset(cfg):
    path = _path(cfg, "dataset.csv")
    if not os.path.exists(path):
        raise FileNotFoundError(f"dataset not found at {path}; run 'generate' first")
    with open(path) as fh:
        return Dataset.from_csv(fh.read())


def cmd_generate(cfg):
    data = generate_circle_data(_spec(cfg))
    _write(_path(cfg, "dataset.csv"), data.to_csv())
    _write(_path(cfg, "dataset.json"), _dump(_spec(cfg).to_dict()))


def _kernel_params(m):
    given = {k: m[k] for k in ("theta_rbf", "alpha", "noise") if m[k] is not None}
    return given


def fit_from_config(cfg, data):
    m = cfg["model"]
    seeds = derive_seeds(cfg["seed"])
    kind = m["type"]
    if kind in ("gp", "krr", "krr_linear"):
        given = _kernel_params(m)
        if len(given) == 3:
            p = KernelParams(theta_lin=m["theta_lin"], **given)
            gp = gp_from_params(data, p)
        else:
            gp = gp_fit(data, KernelParams(theta_lin=m["theta_lin"]))
        if kind == "gp":
            return gp
        p = gp.params
        if kind == "krr_linear" and p.theta_lin == 0:
            p = p.replace(theta_lin=fit_linear_weight(data, p))
        return krr_fit(data, p)
    if kind == "euclidean":
        raise ConfigError(["'model.type' euclidean needs no fitting"])
    ae = mlp_train(data, m["widths"], m["epochs"], m["lr"], m["batch_size"], seeds["mlp"])
    if kind == "mlp":
        return ae
    if kind == "vae":
        return vae_mlp_fit(data, ae, epochs=m["vae_epochs"], lr=m["lr"], seed=seeds["vae"])
    return vae_rbf_fit(data, ae, m["n_centers"], m["bandwidth"], seeds["vae_rbf"], m["floor"])


def cmd_fit(cfg):
    data = _load_dataset(cfg)
    model = fit_from_config(cfg, data)
    checkpoint.save_model(model, _path(cfg, "model.json"), name=cfg["model"]["type"])


def _load_model(cfg):
    if cfg["model"]["type"] == "euclidean":
        return euclidean_field(2)
    return checkpoint.load_model(_path(cfg, "model.json"))


def _field(model):
    return model if hasattr(model, "evaluate") else model.metric_field()


def _point(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError([f"cannot parse point '{text}'"]) from None
    return np.array(vals)


def cmd_geodesic(cfg, start, end):
    F = _field(_load_model(cfg))
    s = cfg["solver"]
    sol = solve_geodesic(GeodesicProblem(F, _point(start), _point(end), K=s["K"],
                                         max_iter=s["max_iter"], gtol=s["gtol"]))
    _write(_path(cfg, "geodesic.csv"), sol.curve.to_csv())
    _write(_path(cfg, "geodesic.json"), sol.to_json() + "\n")
    return sol


def cmd_measure(cfg, mode=None):
    me = cfg["measure"]
    mode = mode or me["mode"]
    model = _load_model(cfg)
    bounds = tuple(float(b) for b in me["bounds"])
    grid, se = measure_grid(model, bounds, me["resolution"], mode, me["n_samples"], cfg["seed"])
    write_grid_csv(_path(cfg, f"measure_{mode}.csv"), grid, bounds, mode)
    pts = None
    if os.path.exists(_path(cfg, "dataset.csv")):
        pts = _load_dataset(cfg).Z
    write_svg(_path(cfg, f"measure_{mode}.svg"), bounds, grid, pts, title=mode)
    return grid


def cmd_evaluate(cfg):
    data = _load_dataset(cfg)
    model = _load_model(cfg)
    s = cfg["solver"]
    rep = evaluate_model(model, data, cfg["evaluation"]["n_pairs"], derive_seeds(cfg["seed"])["pairs"],
                         K=s["K"], max_iter=s["max_iter"], gtol=s["gtol"], threads=cfg["threads"],
                         model_type=cfg["model"]["type"])
    _write(_path(cfg, "evaluation.json"), rep.to_json() + "\n")
    return rep


def cmd_demo_swirl(cfg):
    res = swirl_demo(cfg["swirl"]["n"], cfg["seed"])
    _write(_path(cfg, "swirl.json"), _dump(res))
    return res


def cmd_reproduce_table1(cfg):
    m = cfg["model"]
    res = reproduce_table1(cfg["seed"], _spec(cfg), cfg["evaluation"]["n_pairs"], cfg["solver"]["K"],
                           cfg["threads"], mlp_epochs=m["epochs"], vae_epochs=m["vae_epochs"])
    _write(_path(cfg, "table1.json"), table_json(res))
    return res


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides config 'out')")
    common.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    common.add_argument("--threads", type=int, help="maximum worker threads")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="latentgeom", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write the circle dataset")
    sub.add_parser("fit", parents=[common], help="fit the configured model")
    g = sub.add_parser("geodesic", parents=[common], help="solve one geodesic")
    g.add_argument("--start", required=True, help="x,y")
    g.add_argument("--end", required=True, help="x,y")
    m = sub.add_parser("measure", parents=[common], help="volume-measure grid")
    m.add_argument("--mode", choices=("sqrtdet_of_expected", "expected_sqrtdet_mc"))
    sub.add_parser("evaluate", parents=[common], help="geodesics vs circular arcs")
    sub.add_parser("demo-swirl", parents=[common], help="swirl reparametrization demo")
    sub.add_parser("reproduce-table1", parents=[common], help="six-model comparison")
    sub.add_parser("show-config", parents=[common], help="print the merged configuration")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        for key in ("out", "seed", "threads"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        cfg = parse_config(cfg)
        os.makedirs(cfg["out"], exist_ok=True)
        cmd = args.command
        if cmd == "generate":
            cmd_generate(cfg)
        elif cmd == "fit":
            cmd_fit(cfg)
        elif cmd == "geodesic":
            cmd_geodesic(cfg, args.start, args.end)
        elif cmd == "measure":
            cmd_measure(cfg, args.mode)
        elif cmd == "evaluate":
            cmd_evaluate(cfg)
        elif cmd == "demo-swirl":
            cmd_demo_swirl(cfg)
        elif cmd == "reproduce-table1":
            cmd_reproduce_table1(cfg)
        elif cmd == "show-config":
            sys.stdout.write(dump_config(cfg))
    except (ConfigError, DegenerateInputError, PreconditionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (GeometryError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
