"""Frozen-encoder feature extraction shared by ranking, annotation, and the service."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import AugmentationConfig
from .data import MotionDataset, normalize_dataset
from .encoder import MotionEncoder, encode
from .pretrain import enhance_dataset


@dataclass(frozen=True)
class SequenceFeatures:
    frame: np.ndarray  # (T, F) unit-norm rows
    seq: np.ndarray    # (F,) unit-norm


def extract_features(
    encoder: MotionEncoder,
    dataset: MotionDataset,
    aug: AugmentationConfig,
    normalize: bool = True,
    enhanced: bool = True,
) -> dict[str, SequenceFeatures]:
    """Encode every full sequence (no augmentation) with the frozen encoder.

    Sequences longer than the encoder's frame capacity are strided down to
    fit, and per-frame features are repeated back onto the original time axis
    so label alignment is preserved.
    """
    if normalize:
        dataset = normalize_dataset(dataset)
    views = enhance_dataset(dataset, aug, enhanced=enhanced)
    out = {}
    for seq_id, view in views.items():
        T = len(view)
        cap = encoder.params.max_frames
        if T <= cap:
            frame_feats, seq_feat = encode(view, encoder)
        else:
            stride = -(-T // cap)  # ceil division
            kept = np.arange(0, T, stride)
            sub = type(view)(view.blocks[kept])
            sub_frames, seq_feat = encode(sub, encoder)
            frame_feats = sub_frames[np.minimum(np.arange(T) // stride, len(kept) - 1)]
        out[seq_id] = SequenceFeatures(frame=frame_feats, seq=seq_feat)
    return out


def sequence_feature_map(features: dict[str, SequenceFeatures]) -> dict[str, np.ndarray]:
    return {seq_id: f.seq for seq_id, f in features.items()}


def frame_feature_map(features: dict[str, SequenceFeatures]) -> dict[str, np.ndarray]:
    return {seq_id: f.frame for seq_id, f in features.items()}
