"""Comparing estimated geodesics with the circular ground truth."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateInputError
from ..geodesics import GeodesicProblem, solve_geodesic
from ..geometry import DiscreteCurve, MetricField, curve_length
from ..stochastic import RngStream
from .data import ground_truth_geodesic

log = logging.getLogger(__name__)


def length_correlation(pairs):
    """Pearson correlation of ``(gt_length, est_length)`` pairs."""
    P = np.asarray(pairs, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] < 3:
        raise ValueError("need at least 3 (gt, est) pairs")
    a, b = P[:, 0] - P[:, 0].mean(), P[:, 1] - P[:, 1].mean()
    na, nb = np.sqrt(a @ a), np.sqrt(b @ b)
    if na == 0 or nb == 0:
        raise DegenerateInputError("correlation undefined: a coordinate has zero variance")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _points(c):
    return c.points if isinstance(c, DiscreteCurve) else np.atleast_2d(np.asarray(c, dtype=float))


def _point_segment_dist(P, B):
    """Distances from each row of ``P`` to each segment of polyline ``B``, ``(n, m)``."""
    if len(B) == 1:
        return np.linalg.norm(P[:, None, :] - B[None], axis=2)
    A0, A1 = B[:-1], B[1:]
    e = A1 - A0
    ee = np.einsum("md,md->m", e, e)
    w = P[:, None, :] - A0[None]
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(ee > 0, np.einsum("nmd,md->nm", w, e) / ee, 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.linalg.norm(w - s[..., None] * e[None], axis=2)


def _directed_hausdorff(A, B, tol):
    """``sup_{x in A} dist(x, B)`` for polylines, by branch and bound over A's segments.

    On a sub-segment ``[p, q]`` the distance to one segment of ``B`` is convex,
    so ``min_j max(d_j(p), d_j(q))`` bounds the supremum from above.
    """
    Dk = _point_segment_dist(A, B)
    best = Dk.min(1).max()
    lo, hi = A[:-1], A[1:]
    Dlo, Dhi = Dk[:-1], Dk[1:]
    while len(lo):
        keep = np.maximum(Dlo, Dhi).min(1) > best + tol
        lo, hi, Dlo, Dhi = lo[keep], hi[keep], Dlo[keep], Dhi[keep]
        if not len(lo):
            break
        mid = 0.5 * (lo + hi)
        Dm = _point_segment_dist(mid, B)
        best = max(best, Dm.min(1).max())
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        Dlo, Dhi = np.concatenate([Dlo, Dm]), np.concatenate([Dm, Dhi])
    return float(best)


def hausdorff_distance(c1, c2, tol=1e-7):
    """Symmetric Hausdorff distance between two polylines (to within ``tol``)."""
    A, B = _points(c1), _points(c2)
    if not len(A) or not len(B):
        raise ValueError("curves must be non-empty")
    return max(_directed_hausdorff(A, B, tol), _directed_hausdorff(B, A, tol))


@dataclass(frozen=True)
class PairRecord:
    i: int
    j: int
    gt_length: float
    est_length: float
    hausdorff: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class EvaluationReport:
    model_type: str
    length_correlation: float
    mean_hausdorff: float
    n_pairs: int
    n_unconverged: int
    seed: int
    pairs: list = field(default_factory=list)

    def to_dict(self):
        return {
            "model_type": self.model_type,
            "length_correlation": self.length_correlation,
            "mean_hausdorff": self.mean_hausdorff,
            "n_pairs": self.n_pairs,
            "n_unconverged": self.n_unconverged,
            "seed": self.seed,
            "pairs": [vars(p) for p in self.pairs],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def sample_pairs(N, n_pairs, seed):
    """Disjoint index pairs drawn without replacement."""
    if 2 * n_pairs > N:
        raise ValueError(f"cannot draw {n_pairs} disjoint pairs from {N} points")
    gen = RngStream(seed).generator()
    return gen.choice(N, 2 * n_pairs, replace=False).reshape(n_pairs, 2)


def _field_of(model):
    return model if isinstance(model, MetricField) else model.metric_field()


def evaluate_model(model, data, n_pairs=50, seed=0, K=32, gt_knots=64, max_iter=5000,
                   gtol=1e-6, threads=1, model_type=None):
    """Geodesics between random training latents versus circular arcs.

    The ground-truth length of a pair is the model-metric length of its arc,
    so the correlation measures how well the model ranks distances.
    """
    F = _field_of(model)
    idx = sample_pairs(data.N, n_pairs, seed)

    def one(pair):
        i, j = int(pair[0]), int(pair[1])
        u, v = data.Z[i], data.Z[j]
        gt, _ = ground_truth_geodesic(u, v, gt_knots)
        sol = solve_geodesic(GeodesicProblem(F, u, v, K=K, max_iter=max_iter, gtol=gtol))
        return PairRecord(i, j, float(curve_length(F, gt)), float(sol.length),
                          hausdorff_distance(sol.curve, gt), bool(sol.converged), int(sol.iterations))

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            records = list(ex.map(one, idx))
    else:
        records = [one(p) for p in idx]
    ok = [r for r in records if r.converged]
    n_bad = len(records) - len(ok)
    if n_bad:
        log.warning("%d of %d geodesics did not converge and are excluded", n_bad, len(records))
    corr = length_correlation([(r.gt_length, r.est_length) for r in ok])
    haus = float(np.mean([r.hausdorff for r in ok]))
    name = model_type or getattr(model, "model_type", None) or F.name or "field"
    return EvaluationReport(name, corr, haus, n_pairs, n_bad, seed, records)
