"""A reparametrization that moves points but not their distribution.

    python3 demos/swirl.py
"""

from latentgeom.experiments.swirl import swirl_demo

r = swirl_demo(10_000, seed=0)
s = r["distance_shift_stats"]
print(f"points move by {s['mean']:.3f} on average (max {s['max']:.3f}); norms change by at most"
      f" {r['max_norm_change']:.1e}")
print(f"per-coordinate KS p-values {r['ks_pvalue'][0]:.3f}, {r['ks_pvalue'][1]:.3f}:"
      " the latent density cannot tell the two codes apart, so distances in it are not identifiable")
