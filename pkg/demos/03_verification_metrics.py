"""
FAR, FRR and the equal error rate
=================================

All unordered record pairs are split into same-subject and different-subject
sets. A pair is accepted when its distance is at most the threshold.
"""

import numpy as np

from faceqa import SynthSpec, build_pairs, curve, eer, generate
from faceqa.metrics import default_grid, distance_histograms

###############################################################################
# 50 subjects with 15 images each, a gallery the size of a small face database.
ds, _ = generate(SynthSpec(50, 15, 32, 0.05, 0.25, 1.0, seed=4))
pairs = build_pairs(ds)
print(f"{pairs.n_same} same-subject pairs, {pairs.n_diff} different-subject pairs")

###############################################################################
# FAR rises and FRR falls as the threshold grows; the EER sits where they meet.
c = curve(pairs, default_grid(pairs, 512))
for i in range(0, 512, 64):
    print(f"d={c.thresholds[i]:6.3f}  FAR={c.far[i]:.4f}  FRR={c.frr[i]:.4f}")
res = eer(c)
print(f"EER {res.eer:.4f} at threshold {res.threshold:.4f}")

###############################################################################
# Intra- vs inter-class distance histograms on a shared set of bins.
h = distance_histograms(pairs, bins=16)
for lo, hi, a, b in zip(h.edges[:-1], h.edges[1:], h.intra, h.inter):
    print(f"[{lo:5.2f}, {hi:5.2f})  intra {a:6d}  {'#' * int(40 * a / h.intra.max()):40s} "
          f"inter {b:6d}")
