"""
Quality labels from a template gallery
======================================

Every subject enrolls one template. Each remaining image (a probe) is scored
by how far its genuine distance sits below the distances to everybody else's
templates, measured in impostor standard deviations.
"""

import numpy as np

from faceqa import generate, label_dataset, partition, SynthSpec

###############################################################################
# A small synthetic gallery: 8 subjects, 5 images each, 16-dim embeddings.
# ``truth`` keeps the noise level each image was generated with.
ds, truth = generate(SynthSpec(n_subjects=8, images_per_subject=5, dim=16,
                               noise_low=0.02, noise_high=0.3, seed=1))
print(f"{len(ds)} records, dim {ds.dim}")

###############################################################################
# One template per subject; ``first`` takes the smallest image id.
part = partition(ds, policy="first")
print(f"{len(part.templates)} templates, {len(part.probes)} probes")

###############################################################################
# Label the probes. ``z`` is negative when the probe is closer to its own
# template than to a typical impostor; ``target`` maps it into (0, 1).
labels = label_dataset(part)
print(f"{'probe':>16} {'tau':>6} {'d_gen':>7} {'mu_imp':>7} {'sd_imp':>7} {'z':>7} {'target':>7}")
for lab in labels[:8]:
    print(f"{lab.subject_id + '/' + lab.image_id:>16} {truth[lab.key]:6.3f} "
          f"{lab.genuine_dist:7.3f} {lab.impostor_mean:7.3f} {lab.impostor_std:7.3f} "
          f"{lab.z_score:7.2f} {lab.target:7.3f}")

###############################################################################
# The target depends on the template too: a noisy template drags down the
# scores of every probe of that subject.
tmpl_tau = {s: truth[r.key] for s, r in part.templates.items()}
for s in list(part.templates)[:4]:
    mean_t = np.mean([l.target for l in labels if l.subject_id == s])
    print(f"subject {s}: template tau {tmpl_tau[s]:.3f}, mean probe target {mean_t:.3f}")
