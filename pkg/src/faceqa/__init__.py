"""Face image quality labels, a sigmoid quality head, and verification metrics."""

from .core import (
    DataError,
    Dataset,
    EmbeddingRecord,
    FaceQAError,
    NumericError,
    batch_triplet_loss,
    euclidean_distance,
    load_jsonl,
    save_jsonl,
    triplet_loss,
    triplet_loss_grad,
)
from .gallery import GalleryPartition, partition
from .labeler import QualityLabel, label_dataset
from .metrics import EerResult, EvalCurve, PairSet, build_pairs, curve, eer
from .synth import SynthSpec, SynthTruth, generate
from .trainer import (
    RegressionHead,
    TrainConfig,
    TrainHistory,
    loss_gradient,
    predict,
    rmsle_loss,
    sgd_step,
    train,
)

__version__ = "0.1.0"
