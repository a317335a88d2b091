"""Reported quantities: accuracy, per-class precision/recall, confusion
matrices, a proxy domain-divergence estimate, and feature export for external
embedding tools.

The divergence estimate trains a small, fixed-capacity domain classifier to
separate source features (pseudo-label 0) from target features (pseudo-label
1); its test error eps gives d_hat = clamp(1 - 2*eps, 0, 1). Perfectly
overlapping feature sets are inseparable (eps about 0.5, d_hat about 0);
disjoint ones are trivially separable (eps about 0, d_hat about 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import model as md
from . import nn
from .data import DomainDataset
from .rng import substream

# frozen domain-classifier convention, kept small so the estimate reflects
# distribution overlap rather than memorization
DIVERGENCE_HIDDEN = 32
DIVERGENCE_ITERATIONS = 500
DIVERGENCE_LR = 1e-2


@dataclass
class MetricsReport:
    """Classification quality on one dataset; confusion rows are true labels."""

    accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    n: int

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "n": self.n,
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.as_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


@dataclass
class DivergenceReport:
    """Proxy divergence between two feature sets."""

    epsilon: float
    d_hat: float
    n_train: int
    n_test: int

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "d_hat": self.d_hat,
                "n_train": self.n_train, "n_test": self.n_test}

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.as_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def confusion_matrix(true_labels: np.ndarray, predicted: np.ndarray,
                     num_classes: int) -> np.ndarray:
    """K x K counts; rows are true classes, columns predicted (1-based labels)."""
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError("true and predicted label arrays differ in shape")
    if t.min() < 1 or t.max() > num_classes or p.min() < 1 or p.max() > num_classes:
        raise ValueError(f"labels outside 1..{num_classes}")
    flat = (t - 1) * num_classes + (p - 1)
    return np.bincount(flat, minlength=num_classes * num_classes) \
        .reshape(num_classes, num_classes)


def metrics_from_confusion(confusion: np.ndarray) -> MetricsReport:
    """Accuracy and per-class precision/recall from a count matrix.

    A class never predicted gets precision 0; a class absent from the truth
    gets recall 0 (both 0/0 conventions, recorded so tables reproduce).
    """
    c = np.asarray(confusion, dtype=np.int64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {c.shape}")
    if c.min() < 0:
        raise ValueError("confusion counts must be non-negative")
    n = int(c.sum())
    if n == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(c).astype(np.float64)
    col = c.sum(axis=0).astype(np.float64)
    row = c.sum(axis=1).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(col > 0, diag / np.where(col > 0, col, 1), 0.0)
        recall = np.where(row > 0, diag / np.where(row > 0, row, 1), 0.0)
    return MetricsReport(accuracy=float(diag.sum() / n), confusion=c,
                         precision=precision, recall=recall, n=n)


def evaluate_classifier(extractor: md.FeatureExtractor,
                        dataset: DomainDataset) -> MetricsReport:
    """Predict every sample and tabulate the usual metrics."""
    predicted, _ = md.predict_batch(extractor, dataset.amplitudes)
    return metrics_from_confusion(
        confusion_matrix(dataset.labels, predicted, dataset.num_classes))


def _canonical_order(x: np.ndarray) -> np.ndarray:
    """Rows sorted lexicographically, so list order cannot affect results."""
    return x[np.lexsort(x.T[::-1])]


def proxy_a_distance(features_source, features_target,
                     split_fraction: float = 0.5, seed: int = 0) -> DivergenceReport:
    """Train a fresh domain classifier and score its test error.

    `split_fraction` is the training share of the shuffled, pseudo-labeled
    pool. Inputs are canonicalized by sorting before the seeded shuffle, so
    the estimate is a pure function of the two feature multisets.
    """
    fs = np.asarray(features_source, dtype=np.float64)
    ft = np.asarray(features_target, dtype=np.float64)
    if fs.ndim != 2 or ft.ndim != 2 or fs.shape[0] == 0 or ft.shape[0] == 0:
        raise ValueError("feature sets must be non-empty 2-D arrays")
    if fs.shape[1] != ft.shape[1]:
        raise ValueError("feature dimensionality differs between domains")
    if not 0.0 < split_fraction < 1.0:
        raise ValueError("split_fraction must lie strictly between 0 and 1")

    x = np.concatenate([_canonical_order(fs), _canonical_order(ft)])
    d = np.concatenate([np.zeros(fs.shape[0]), np.ones(ft.shape[0])])
    order = substream(seed, "divergence/shuffle").permutation(x.shape[0])
    x, d = x[order], d[order]

    n_train = int(round(split_fraction * x.shape[0]))
    n_train = min(max(n_train, 1), x.shape[0] - 1)
    x_train, d_train = x[:n_train], d[:n_train]
    x_test, d_test = x[n_train:], d[n_train:]

    specs = (nn.dense(x.shape[1], DIVERGENCE_HIDDEN), nn.relu(),
             nn.dense(DIVERGENCE_HIDDEN, 1))
    rng = substream(seed, "divergence/init")
    clf = md.LayerStack(specs, [nn.init_params(s, rng) for s in specs])
    adam = nn.AdamState.for_params(clf.arrays(), lr=DIVERGENCE_LR)
    xt3 = x_train[..., None]
    for _ in range(DIVERGENCE_ITERATIONS):
        logits3, caches = md.stack_forward(clf, xt3, want_caches=True)
        _, dlogits = nn.logistic_loss_batch(logits3.reshape(-1), d_train)
        grads, _ = md.stack_backward(clf, caches, dlogits.reshape(-1, 1, 1))
        nn.adam_step(clf.arrays(), md.grads_to_arrays(clf, grads), adam)

    logits3, _ = md.stack_forward(clf, x_test[..., None])
    predicted = (logits3.reshape(-1) > 0.0).astype(np.float64)
    epsilon = float(np.mean(predicted != d_test))
    d_hat = float(np.clip(1.0 - 2.0 * epsilon, 0.0, 1.0))
    return DivergenceReport(epsilon=epsilon, d_hat=d_hat,
                            n_train=n_train, n_test=x.shape[0] - n_train)


def export_features(extractor_source: md.FeatureExtractor,
                    extractor_target: md.FeatureExtractor,
                    source: DomainDataset, target: DomainDataset, path) -> None:
    """Write per-sample features as CSV: source block first, dataset order.

    Source samples go through the source extractor, target samples through
    the target extractor; rows carry the domain and class labels so external
    embedding tools can color them.
    """
    dim = extractor_source.specs[-1].out_dim
    header = "domain,label," + ",".join(f"f{i}" for i in range(1, dim + 1))
    lines = [header]
    for dataset, extractor in ((source, extractor_source), (target, extractor_target)):
        features = md.extract_features_batch(extractor, dataset.amplitudes)
        for sample, row in zip(dataset.samples, features):
            values = ",".join(repr(float(v)) for v in row)
            lines.append(f"{sample.domain_label},{sample.class_label},{values}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
