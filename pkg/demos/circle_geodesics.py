"""Geodesics across the circle under four models, compared with the true arcs.

    python3 demos/circle_geodesics.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from latentgeom.experiments.data import generate_circle_data, ground_truth_geodesic
from latentgeom.experiments.evaluation import hausdorff_distance, sample_pairs
from latentgeom.experiments.figures import write_svg
from latentgeom.experiments.measures import measure_grid
from latentgeom.geodesics import GeodesicProblem, solve_geodesic
from latentgeom.models.kernel_models import gp_fit, krr_fit
from latentgeom.models.mlp import mlp_train
from latentgeom.models.vae import vae_rbf_fit

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)
data = generate_circle_data()
gp = gp_fit(data)
ae = mlp_train(data, epochs=2000, seed=1)
models = {"gp": gp, "krr": krr_fit(data, gp.params), "ae": ae, "vae_rbf": vae_rbf_fit(data, ae, seed=3)}
pairs = sample_pairs(data.N, 8, seed=4)

for name, model in models.items():
    F = model.metric_field()
    curves, haus = [], []
    for i, j in pairs:
        sol = solve_geodesic(GeodesicProblem(F, data.Z[i], data.Z[j]))
        gt, _ = ground_truth_geodesic(data.Z[i], data.Z[j])
        curves.append(sol.curve)
        haus.append(hausdorff_distance(sol.curve, gt))
    grid, _ = measure_grid(model, resolution=48)
    write_svg(out / f"geodesics_{name}.svg", (-1.6, 1.6, -1.6, 1.6), np.log10(grid + 1e-300),
              data.Z, curves, title=name)
    print(f"{name:8s} mean Hausdorff to the true arcs {np.mean(haus):.3f}")
print(f"figures written to {out}/")
