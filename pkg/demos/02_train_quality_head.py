"""
Training the sigmoid quality head
=================================

The head is ``logistic(w . x + b)`` on fixed embeddings, fit with RMSLE loss
and momentum SGD (lr 0.001, momentum 0.99, weight decay 1e-5, batches of 64,
30 epochs, 70/30 split).
"""

import numpy as np
from scipy.stats import spearmanr

from faceqa import (Dataset, QualityLabel, RegressionHead, SynthSpec, TrainConfig,
                    generate, label_dataset, partition, predict, train)

###############################################################################
# First a target the head can represent: labels produced by a hidden logistic
# "teacher". Held-out loss drops well below its starting value.
rng = np.random.default_rng(0)
x = rng.standard_normal((600, 16))
teacher = RegressionHead(rng.standard_normal(16), 0.3)
y = predict(teacher, x)
ds = Dataset.from_arrays([f"s{i}" for i in range(600)], ["0"] * 600, x)
labels = [QualityLabel(f"s{i}", "0", 0, 0, 1, 0, float(y[i])) for i in range(600)]
head, hist = train(labels, ds, TrainConfig(seed=0))
print("teacher target: test RMSLE", " ".join(f"{v:.3f}" for v in hist.test_loss[::5]))

###############################################################################
# Now gallery-derived labels on synthetic faces with noise levels in [0.05, 1].
# A linear function of the embedding cannot see how *far* an image is from its
# centroid, so the head has little to grab onto here.
ds, truth = generate(SynthSpec(50, 10, 32, 0.05, 1.0, 1.0, seed=0))
labels = label_dataset(partition(ds))
head, hist = train(labels, ds, TrainConfig(seed=0))
x_test = np.stack([ds.get(*k).vector for k in hist.test_keys])
tau_test = [truth[k] for k in hist.test_keys]
print("gallery labels: test RMSLE", " ".join(f"{v:.3f}" for v in hist.test_loss[::5]))
print("Spearman(tau, predicted quality) on held-out:",
      f"{spearmanr(tau_test, predict(head, x_test)).statistic:.3f}")
print("Spearman(tau, label target) on held-out:",
      f"{spearmanr(tau_test, [l.target for l in labels if l.key in set(hist.test_keys)]).statistic:.3f}")
