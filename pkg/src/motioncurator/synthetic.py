"""Procedural skeleton-motion benchmark with per-frame multi-label ground truth.

Eight action classes on a 15-joint skeleton: four full-sequence locomotion
styles (walk, run, jump, squat) with class-specific frequency, amplitude and
travel-speed signatures, and four arm/leg gestures (wave_left, wave_right,
punch, kick) overlaid on a random sub-span, so overlapping frames genuinely
carry multiple labels. Class frequencies are deliberately imbalanced and
every sequence gets a random yaw, placement, scale, phase and coordinate
noise, which is what the normalization and representation stages must undo.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import LabelMatrix, MotionDataset, MotionSequence, save_dataset, save_labels

JOINT_NAMES = [
    "pelvis", "spine", "head",
    "l_hip", "l_knee", "l_foot",
    "r_hip", "r_knee", "r_foot",
    "l_shoulder", "l_elbow", "l_hand",
    "r_shoulder", "r_elbow", "r_hand",
]
BONES = [
    (0, 1), (1, 2),
    (0, 3), (3, 4), (4, 5),
    (0, 6), (6, 7), (7, 8),
    (1, 9), (9, 10), (10, 11),
    (1, 12), (12, 13), (13, 14),
]
ROOT_JOINT = 0
FACING_JOINTS = (3, 6)  # left hip -> right hip

BASE_CLASSES = ["walk", "run", "jump", "squat"]
GESTURE_CLASSES = ["wave_left", "wave_right", "punch", "kick"]
CLASS_NAMES = BASE_CLASSES + GESTURE_CLASSES

BASE_PROBS = [0.45, 0.30, 0.15, 0.10]
GESTURE_PROBS = [0.40, 0.30, 0.18, 0.12]
GESTURE_RATE = 0.55  # share of sequences that carry a gesture overlay

_REST = np.array([
    [0.00, 1.00, 0.00],   # pelvis
    [0.00, 1.25, 0.00],   # spine
    [0.00, 1.62, 0.00],   # head
    [0.00, 0.95, -0.12],  # l_hip
    [0.02, 0.52, -0.13],  # l_knee
    [0.04, 0.08, -0.13],  # l_foot
    [0.00, 0.95, 0.12],   # r_hip
    [0.02, 0.52, 0.13],   # r_knee
    [0.04, 0.08, 0.13],   # r_foot
    [0.00, 1.42, -0.22],  # l_shoulder
    [0.01, 1.12, -0.26],  # l_elbow
    [0.02, 0.86, -0.27],  # l_hand
    [0.00, 1.42, 0.22],   # r_shoulder
    [0.01, 1.12, 0.26],   # r_elbow
    [0.02, 0.86, 0.27],   # r_hand
])

_J = {name: i for i, name in enumerate(JOINT_NAMES)}


@dataclass(frozen=True)
class SyntheticSpec:
    num_sequences: int = 200
    min_frames: int = 270
    max_frames: int = 330
    fps: float = 120.0
    noise: float = 0.006
    seed: int = 0


def _base_motion(kind: str, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Displacement field (T, J, 3) for a locomotion class over time t (s)."""
    T = t.shape[0]
    d = np.zeros((T, len(JOINT_NAMES), 3))
    jitter = lambda: rng.uniform(0.85, 1.15)
    phase = rng.uniform(0, 2 * np.pi)

    if kind in ("walk", "run"):
        f = (1.4 if kind == "walk" else 2.6) * jitter()
        amp = (0.35 if kind == "walk" else 0.55) * jitter()
        speed = (1.2 if kind == "walk" else 3.0) * jitter()
        bob = 0.03 if kind == "walk" else 0.07
        p = 2 * np.pi * f * t + phase
        swing, counter = np.sin(p), np.sin(p + np.pi)
        d[:, _J["l_foot"], 0] += amp * swing
        d[:, _J["r_foot"], 0] += amp * counter
        d[:, _J["l_knee"], 0] += 0.55 * amp * swing
        d[:, _J["r_knee"], 0] += 0.55 * amp * counter
        d[:, _J["l_foot"], 1] += 0.10 * np.clip(swing, 0, None)
        d[:, _J["r_foot"], 1] += 0.10 * np.clip(counter, 0, None)
        arm = 0.5 * amp
        for side, ph in (("l", np.pi), ("r", 0.0)):
            d[:, _J[f"{side}_hand"], 0] += arm * np.sin(p + ph)
            d[:, _J[f"{side}_elbow"], 0] += 0.5 * arm * np.sin(p + ph)
        for name in ("pelvis", "spine", "head", "l_hip", "r_hip"):
            d[:, _J[name], 1] += bob * np.sin(2 * p)
        d[:, :, 0] += (speed * t)[:, None]

    elif kind == "jump":
        f = 0.9 * jitter()
        rise = 0.35 * jitter()
        p = 2 * np.pi * f * t + phase
        airborne = np.clip(np.sin(p), 0, None) ** 2
        crouch = np.clip(-np.sin(p), 0, None)
        d[:, :, 1] += rise * airborne[:, None]
        for name in ("pelvis", "spine", "head", "l_hip", "r_hip",
                     "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
                     "l_hand", "r_hand"):
            d[:, _J[name], 1] -= 0.18 * crouch
        for name in ("l_knee", "r_knee"):
            d[:, _J[name], 1] -= 0.08 * crouch
            d[:, _J[name], 0] += 0.07 * crouch
        d[:, :, 0] += (0.25 * t)[:, None]

    elif kind == "squat":
        f = 0.45 * jitter()
        depth = 0.38 * jitter()
        p = 2 * np.pi * f * t + phase
        c = 0.5 * (1 - np.cos(p))
        for name in ("pelvis", "spine", "head", "l_hip", "r_hip",
                     "l_shoulder", "r_shoulder", "l_elbow", "r_elbow",
                     "l_hand", "r_hand"):
            d[:, _J[name], 1] -= depth * c
        d[:, _J["l_knee"], 2] -= 0.10 * c
        d[:, _J["r_knee"], 2] += 0.10 * c
        d[:, _J["l_knee"], 1] -= 0.12 * c
        d[:, _J["r_knee"], 1] -= 0.12 * c

    else:
        raise ValueError(f"unknown base class {kind!r}")
    return d


def _gesture_motion(kind: str, t: np.ndarray, envelope: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    T = t.shape[0]
    d = np.zeros((T, len(JOINT_NAMES), 3))
    jitter = lambda: rng.uniform(0.85, 1.15)
    phase = rng.uniform(0, 2 * np.pi)

    if kind in ("wave_left", "wave_right"):
        side = "l" if kind == "wave_left" else "r"
        f = 2.2 * jitter()
        osc = 0.16 * jitter() * np.sin(2 * np.pi * f * t + phase)
        d[:, _J[f"{side}_hand"], 1] += 0.60 * envelope
        d[:, _J[f"{side}_hand"], 0] += 0.06 * envelope
        d[:, _J[f"{side}_hand"], 2] += osc * envelope
        d[:, _J[f"{side}_elbow"], 1] += 0.28 * envelope
        d[:, _J[f"{side}_elbow"], 2] += 0.5 * osc * envelope

    elif kind == "punch":
        f = 1.7 * jitter()
        thrust = np.clip(np.sin(2 * np.pi * f * t + phase), 0, None) ** 2
        d[:, _J["r_hand"], 0] += 0.48 * jitter() * thrust * envelope
        d[:, _J["r_hand"], 1] += 0.20 * thrust * envelope
        d[:, _J["r_elbow"], 0] += 0.24 * thrust * envelope

    elif kind == "kick":
        f = 1.2 * jitter()
        swing = np.clip(np.sin(2 * np.pi * f * t + phase), 0, None) ** 2
        d[:, _J["r_foot"], 0] += 0.55 * jitter() * swing * envelope
        d[:, _J["r_foot"], 1] += 0.38 * swing * envelope
        d[:, _J["r_knee"], 0] += 0.28 * swing * envelope
        d[:, _J["r_knee"], 1] += 0.18 * swing * envelope

    else:
        raise ValueError(f"unknown gesture class {kind!r}")
    return d


def _span_envelope(T: int, start: int, end: int) -> np.ndarray:
    """Smooth 0..1 ramp over [start, end) with ~0.2 s shoulders."""
    env = np.zeros(T)
    span = end - start
    ramp = max(1, min(24, span // 4))
    i = np.arange(span)
    env[start:end] = np.minimum(1.0, np.minimum((i + 1) / ramp, (span - i) / ramp))
    return env


def _nuisance(frames: np.ndarray, rng: np.random.Generator, noise: float) -> np.ndarray:
    """Random yaw, horizontal placement, uniform scale, and coordinate noise."""
    yaw = rng.uniform(-np.pi, np.pi)
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    out = frames @ rot.T
    out *= rng.uniform(0.9, 1.1)
    out[:, :, 0] += rng.uniform(-5.0, 5.0)
    out[:, :, 2] += rng.uniform(-5.0, 5.0)
    if noise > 0:
        out += rng.normal(0.0, noise, size=out.shape)
    return out


def make_benchmark(spec: SyntheticSpec | None = None) -> tuple[MotionDataset, dict[str, LabelMatrix]]:
    """Generate the benchmark dataset and its ground-truth labels."""
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    m = len(CLASS_NAMES)
    sequences = []
    labels = {}
    for i in range(spec.num_sequences):
        T = int(rng.integers(spec.min_frames, spec.max_frames + 1))
        t = np.arange(T) / spec.fps
        base = rng.choice(len(BASE_CLASSES), p=BASE_PROBS)
        frames = _REST[None].repeat(T, axis=0) + _base_motion(BASE_CLASSES[base], t, rng)
        mat = np.zeros((T, m), dtype=np.uint8)
        mat[:, base] = 1

        if rng.random() < GESTURE_RATE:
            gesture = rng.choice(len(GESTURE_CLASSES), p=GESTURE_PROBS)
            span = int(rng.integers(T // 3, (2 * T) // 3))
            start = int(rng.integers(0, T - span))
            env = _span_envelope(T, start, start + span)
            frames += _gesture_motion(GESTURE_CLASSES[gesture], t, env, rng)
            mat[start : start + span, len(BASE_CLASSES) + gesture] = 1

        frames = _nuisance(frames, rng, spec.noise)
        seq_id = f"seq{i:04d}"
        sequences.append(MotionSequence(id=seq_id, fps=spec.fps, frames=frames))
        labels[seq_id] = LabelMatrix(sequence_id=seq_id, labels=mat)

    dataset = MotionDataset(
        sequences=sequences,
        class_names=list(CLASS_NAMES),
        joint_names=list(JOINT_NAMES),
        fps=spec.fps,
        bones=list(BONES),
        root_joint=ROOT_JOINT,
        facing_joints=FACING_JOINTS,
    )
    return dataset, labels


def write_benchmark(root: str | Path, spec: SyntheticSpec | None = None) -> MotionDataset:
    """Generate and write the benchmark in the standard dataset layout."""
    dataset, labels = make_benchmark(spec)
    root = Path(root)
    save_dataset(dataset, root)
    save_labels(labels, root / "labels")
    return dataset


def dominant_class(labels: LabelMatrix) -> int:
    """Index of the most frequent class in a label matrix (probe target)."""
    return int(labels.labels.sum(axis=0).argmax())


def benchmark_config() -> dict:
    """The pipeline configuration used for benchmark experiments.

    Matches the shipped configs/benchmark.json; desk-scale values chosen so
    the full pipeline (pretrain, rank, annotate) runs in minutes on a CPU.
    """
    return {
        "augmentation": {"n_ds": 64, "window_s": 0.1, "dilution": 6},
        "encoder": {
            "embed_dim": 64, "heads": 4, "spatial_layers": 2,
            "temporal_layers": 2, "feature_dim": 128, "max_frames": 512,
        },
        "loss": {},
        "schedule": {"epochs": 15, "queue_capacity": 4096, "seed": 0},
        "discriminator": {"epochs": 15},
        "annotator": {"epochs": 30},
    }


def make_cluster_features(
    clusters: int = 8,
    count: int = 200,
    dim: int = 16,
    sigma: float = 0.05,
    seed: int = 0,
) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    """Unit-norm features in well-separated Gaussian clusters on the sphere.

    Returns (features by id, cluster index by id); cluster sizes are equal up
    to remainder.
    """
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(clusters, dim))
    means /= np.linalg.norm(means, axis=1, keepdims=True)
    features, assignment = {}, {}
    for i in range(count):
        c = i % clusters
        v = means[c] + rng.normal(0.0, sigma, size=dim)
        v /= np.linalg.norm(v)
        key = f"p{i:04d}"
        features[key] = v
        assignment[key] = c
    return features, assignment


def make_spin_probe(
    count: int = 24,
    frames: int = 96,
    fps: float = 60.0,
    seed: int = 0,
) -> tuple[MotionDataset, list[int]]:
    """Tiny two-class set: an arm circling clockwise vs counter-clockwise.

    The reversed copy of one class looks like the other, which is exactly the
    structure the reversal-negative contrastive objective should separate.
    Returns the dataset and the per-sequence class indices.
    """
    rng = np.random.default_rng(seed)
    joints = ["pelvis", "spine", "head", "shoulder", "hand"]
    rest = np.array([
        [0.0, 1.0, 0.0], [0.0, 1.3, 0.0], [0.0, 1.6, 0.0],
        [0.0, 1.45, 0.25], [0.0, 1.45, 0.65],
    ])
    sequences, classes = [], []
    for i in range(count):
        cls = i % 2
        direction = 1.0 if cls == 0 else -1.0
        f = 0.9 * rng.uniform(0.85, 1.15)
        phase = rng.uniform(0, 2 * np.pi)
        t = np.arange(frames) / fps
        angle = direction * 2 * np.pi * f * t + phase
        seq = rest[None].repeat(frames, axis=0)
        seq[:, 4, 0] += 0.35 * np.cos(angle)
        seq[:, 4, 1] += 0.35 * np.sin(angle)
        seq[:, 3, 0] += 0.10 * np.cos(angle)
        seq[:, 3, 1] += 0.10 * np.sin(angle)
        seq += rng.normal(0.0, 0.004, size=seq.shape)
        sequences.append(MotionSequence(id=f"spin{i:03d}", fps=fps, frames=seq))
        classes.append(cls)
    dataset = MotionDataset(
        sequences=sequences,
        class_names=["clockwise", "counter_clockwise"],
        joint_names=joints,
        fps=fps,
        bones=[(0, 1), (1, 2), (1, 3), (3, 4)],
        root_joint=0,
        facing_joints=(0, 3),
    )
    return dataset, classes
