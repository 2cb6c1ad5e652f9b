"""Per-frame multi-label annotation on frozen frame features.

The annotator is a small perceptron with independent sigmoid outputs, one
per action class, trained with binary cross-entropy on whatever frames have
been labeled. Because the encoder stays frozen, retraining after a labeling
pass or a class-list change takes seconds, which is what makes the
label-retrain-review loop interactive.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .data import LabelMatrix
from .ranking import _init_linear


@dataclass(frozen=True)
class AnnotatorConfig:
    hidden: int = 256
    epochs: int = 50
    lr: float = 5e-3
    threshold: float = 0.5   # sigmoid decision threshold per class
    batch_size: int = 512

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class FrameAnnotator:
    """Trained per-frame classifier plus its bookkeeping."""

    def __init__(self, net: nn.Module, num_classes: int, cfg: AnnotatorConfig,
                 dead_classes: list[int], train_seconds: float):
        self.net = net
        self.num_classes = num_classes
        self.cfg = cfg
        self.dead_classes = dead_classes  # classes with no positive training frame
        self.train_seconds = train_seconds

    def scores(self, frame_features: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(np.asarray(frame_features, dtype=np.float32))
        with torch.no_grad():
            out = torch.sigmoid(self.net(x)).numpy()
        if self.dead_classes:
            out[:, self.dead_classes] = 0.0
        return out


def _build_net(feature_dim: int, hidden: int, m: int, rng: np.random.Generator) -> nn.Module:
    net = nn.Sequential(nn.Linear(feature_dim, hidden), nn.ReLU(), nn.Linear(hidden, m))
    for module in net:
        if isinstance(module, nn.Linear):
            _init_linear(module, rng)
    return net


def train_annotator(
    frame_features: dict[str, np.ndarray],
    labels: dict[str, LabelMatrix],
    cfg: AnnotatorConfig | None = None,
    seed: int = 0,
) -> FrameAnnotator:
    """Fit the annotator on per-frame features of the labeled sequences.

    ``frame_features`` maps sequence id to a (T, F) array; every id in
    ``labels`` must be present with a matching frame count. Classes that have
    no positive frame anywhere are recorded as dead (a warning is emitted and
    they are always predicted 0). Deterministic per seed; wall-clock training
    time is recorded on the returned annotator.
    """
    cfg = cfg or AnnotatorConfig()
    if not labels:
        raise ValueError("no labeled sequences to train on")
    xs, ys = [], []
    for seq_id in sorted(labels):
        if seq_id not in frame_features:
            raise ValueError(f"no frame features for labeled sequence {seq_id!r}")
        feats = np.asarray(frame_features[seq_id])
        mat = labels[seq_id]
        if feats.shape[0] != mat.num_frames:
            raise ValueError(
                f"sequence {seq_id!r}: {feats.shape[0]} feature rows vs "
                f"{mat.num_frames} label rows"
            )
        xs.append(feats.astype(np.float32))
        ys.append(mat.labels.astype(np.float32))
    x = torch.from_numpy(np.concatenate(xs))
    y = torch.from_numpy(np.concatenate(ys))
    m = y.shape[1]

    positives = y.sum(dim=0).numpy()
    dead = [k for k in range(m) if positives[k] == 0]
    if dead:
        warnings.warn(
            f"classes with no positive training frames will always predict 0: {dead}",
            stacklevel=2,
        )

    rng = np.random.default_rng(seed)
    net = _build_net(x.shape[1], cfg.hidden, m, rng)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    loss_fn = nn.BCEWithLogitsLoss()
    n = x.shape[0]

    started = time.perf_counter()
    net.train()
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            opt.zero_grad()
            loss = loss_fn(net(x[sel]), y[sel])
            loss.backward()
            opt.step()
    net.eval()
    elapsed = time.perf_counter() - started
    return FrameAnnotator(net, m, cfg, dead, elapsed)


def predict(
    annotator: FrameAnnotator,
    frame_features: np.ndarray,
    sequence_id: str = "",
    threshold: float | None = None,
) -> LabelMatrix:
    """Threshold the per-frame sigmoid scores into a binary label matrix."""
    theta = annotator.cfg.threshold if threshold is None else threshold
    scores = annotator.scores(frame_features)
    return LabelMatrix(sequence_id=sequence_id, labels=(scores >= theta).astype(np.uint8))


def predict_all(
    annotator: FrameAnnotator,
    frame_features: dict[str, np.ndarray],
    threshold: float | None = None,
) -> dict[str, LabelMatrix]:
    return {
        seq_id: predict(annotator, feats, seq_id, threshold)
        for seq_id, feats in frame_features.items()
    }


@dataclass(frozen=True)
class EvalReport:
    micro_f1: float
    macro_f1: float
    per_class_f1: list[float]
    true_positive: list[int]
    false_positive: list[int]
    false_negative: list[int]
    true_negative: list[int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "micro_f1": self.micro_f1,
                "macro_f1": self.macro_f1,
                "per_class_f1": self.per_class_f1,
                "counts": {
                    "tp": self.true_positive,
                    "fp": self.false_positive,
                    "fn": self.false_negative,
                    "tn": self.true_negative,
                },
            },
            indent=1,
        )


def _f1(tp: float, fp: float, fn: float) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def evaluate(
    pred: dict[str, LabelMatrix] | list[LabelMatrix],
    truth: dict[str, LabelMatrix] | list[LabelMatrix],
) -> EvalReport:
    """Pooled micro-F1 and per-class macro-F1 over aligned label sets.

    Micro-F1 pools true/false positives and negatives over every frame and
    class; macro-F1 is the unweighted mean of per-class F1 scores, where a
    class with no positives, no false positives and no false negatives counts
    as 0. Invariant to sequence order and to any consistent class relabeling.
    """
    pred_map = {p.sequence_id: p for p in pred.values()} if isinstance(pred, dict) else {
        p.sequence_id: p for p in pred
    }
    truth_map = {t.sequence_id: t for t in truth.values()} if isinstance(truth, dict) else {
        t.sequence_id: t for t in truth
    }
    if set(pred_map) != set(truth_map):
        missing = set(truth_map) ^ set(pred_map)
        raise ValueError(f"prediction/truth id mismatch: {sorted(missing)}")
    if not pred_map:
        raise ValueError("nothing to evaluate")

    m = next(iter(truth_map.values())).num_classes
    tp = np.zeros(m, dtype=np.int64)
    fp = np.zeros(m, dtype=np.int64)
    fn = np.zeros(m, dtype=np.int64)
    tn = np.zeros(m, dtype=np.int64)
    for seq_id, t in truth_map.items():
        p = pred_map[seq_id]
        if p.labels.shape != t.labels.shape:
            raise ValueError(
                f"sequence {seq_id!r}: prediction shape {p.labels.shape} "
                f"vs truth shape {t.labels.shape}"
            )
        pl, tl = p.labels.astype(bool), t.labels.astype(bool)
        tp += (pl & tl).sum(axis=0)
        fp += (pl & ~tl).sum(axis=0)
        fn += (~pl & tl).sum(axis=0)
        tn += (~pl & ~tl).sum(axis=0)

    per_class = [_f1(tp[k], fp[k], fn[k]) for k in range(m)]
    return EvalReport(
        micro_f1=_f1(tp.sum(), fp.sum(), fn.sum()),
        macro_f1=float(np.mean(per_class)) if per_class else 0.0,
        per_class_f1=per_class,
        true_positive=tp.tolist(),
        false_positive=fp.tolist(),
        false_negative=fn.tolist(),
        true_negative=tn.tolist(),
    )
