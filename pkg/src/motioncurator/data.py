"""Skeleton motion datasets: core types, loading, validation, normalization.

On-disk layout::

    root/
      manifest.json          {"class_names": [...], "joint_names": [...], "fps": 120.0,
                              "bones": [[i, j], ...],             # optional
                              "root_joint": 0,                    # optional
                              "facing_joints": [3, 6]}            # optional
      sequences/<id>.json    {"id": "...", "frames": [[[x, y, z] * J] * T]}
      labels/<id>.json       {"id": "...", "labels": [[0|1] * m] * T}

All numbers are IEEE-754 doubles serialized as plain JSON numbers, so a
load -> save -> load cycle reproduces coordinates bit for bit.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# A skeleton frame is a (J, 3) float array of world-space joint coordinates.
SkeletonFrame = np.ndarray

MANIFEST_NAME = "manifest.json"
SEQUENCE_DIR = "sequences"
LABEL_DIR = "labels"


class DatasetError(ValueError):
    """Raised when a dataset or one of its files fails validation."""


def _check_frames(frames: np.ndarray, where: str) -> None:
    if frames.ndim != 3 or frames.shape[2] != 3:
        raise DatasetError(
            f"{where}: frames must have shape (T, J, 3), got {frames.shape} "
            "(multi-actor or malformed frame data is not supported)"
        )
    if frames.shape[0] < 1 or frames.shape[1] < 1:
        raise DatasetError(f"{where}: need at least one frame and one joint")
    if not np.isfinite(frames).all():
        t, j, _ = np.argwhere(~np.isfinite(frames))[0]
        raise DatasetError(f"{where}: non-finite coordinate at frame {t + 1}, joint {j}")


@dataclass(frozen=True)
class MotionSequence:
    """An ordered run of skeleton poses captured at a fixed frame rate."""

    id: str
    fps: float
    frames: np.ndarray  # (T, J, 3) float64

    def __post_init__(self):
        if not self.id:
            raise DatasetError("sequence id must be non-empty")
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise DatasetError(f"sequence {self.id!r}: fps must be positive, got {self.fps}")
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        _check_frames(frames, f"sequence {self.id!r}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_joints(self) -> int:
        return self.frames.shape[1]

    def frame(self, index: int) -> SkeletonFrame:
        """Return the (J, 3) pose at 0-based ``index``."""
        return self.frames[index]


@dataclass(frozen=True)
class LabelMatrix:
    """Per-frame multi-label annotations: one binary row of m classes per frame."""

    sequence_id: str
    labels: np.ndarray  # (T, m) uint8, entries in {0, 1}

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise DatasetError(f"labels for {self.sequence_id!r} must be 2-D, got {labels.shape}")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DatasetError(f"labels for {self.sequence_id!r} must be binary")
        object.__setattr__(self, "labels", labels.astype(np.uint8))

    @property
    def num_frames(self) -> int:
        return self.labels.shape[0]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class MotionDataset:
    """A collection of motion sequences sharing one skeleton and class list.

    Immutable after construction; safe to share across threads.
    """

    sequences: list[MotionSequence]
    class_names: list[str]
    joint_names: list[str]
    fps: float = 120.0
    bones: list[tuple[int, int]] | None = None
    root_joint: int = 0
    # (0, 0) means "no facing configured": normalization keeps the original yaw
    facing_joints: tuple[int, int] = (0, 0)
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.class_names) < 1:
            raise DatasetError("need at least one class name")
        j = len(self.joint_names)
        if j < 1:
            raise DatasetError("need at least one joint name")
        index: dict[str, int] = {}
        for pos, seq in enumerate(self.sequences):
            if seq.id in index:
                raise DatasetError(f"duplicate sequence id {seq.id!r}")
            if seq.num_joints != j:
                raise DatasetError(
                    f"sequence {seq.id!r} has {seq.num_joints} joints, expected {j}"
                )
            index[seq.id] = pos
        for idx in (self.root_joint, *self.facing_joints):
            if not 0 <= idx < j:
                raise DatasetError(f"joint index {idx} out of range for {j} joints")
        if self.bones is not None:
            for a, b in self.bones:
                if not (0 <= a < j and 0 <= b < j):
                    raise DatasetError(f"bone ({a}, {b}) out of range for {j} joints")
        object.__setattr__(self, "_index", index)

    @property
    def ids(self) -> list[str]:
        return [seq.id for seq in self.sequences]

    @property
    def num_sequences(self) -> int:
        return len(self.sequences)

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def by_id(self, sequence_id: str) -> MotionSequence:
        try:
            return self.sequences[self._index[sequence_id]]
        except KeyError:
            raise KeyError(f"no sequence with id {sequence_id!r}") from None


def _parse_sequence_file(path: Path, fps: float) -> MotionSequence:
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "frames" not in doc:
        raise DatasetError(f"{path.name}: missing 'frames' field")
    seq_id = doc.get("id") or path.stem
    try:
        frames = np.asarray(doc["frames"], dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise DatasetError(f"{path.name}: ragged or non-numeric frame data ({exc})") from None
    _check_frames(frames, path.name)
    return MotionSequence(id=seq_id, fps=fps, frames=frames)


def load_dataset(root_path: str | Path) -> MotionDataset:
    """Load and validate a dataset from the on-disk layout.

    Every sequence file is checked; if any fail, one DatasetError reports all
    offending files with per-file diagnostics (file name plus frame index for
    non-finite coordinates).
    """
    root = Path(root_path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest: {manifest_path}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    for key in ("class_names", "joint_names", "fps"):
        if key not in manifest:
            raise DatasetError(f"manifest missing required key {key!r}")

    seq_dir = root / SEQUENCE_DIR
    files = sorted(seq_dir.glob("*.json")) if seq_dir.is_dir() else []
    if not files:
        raise DatasetError(f"no sequences found under {seq_dir}")

    fps = float(manifest["fps"])
    sequences = []
    problems = []
    for path in files:
        try:
            sequences.append(_parse_sequence_file(path, fps))
        except (DatasetError, json.JSONDecodeError) as exc:
            problems.append(f"{path.name}: {exc}")
    if problems:
        raise DatasetError(
            "invalid sequence files:\n  " + "\n  ".join(problems)
        )

    bones = manifest.get("bones")
    return MotionDataset(
        sequences=sequences,
        class_names=list(manifest["class_names"]),
        joint_names=list(manifest["joint_names"]),
        fps=fps,
        bones=[tuple(b) for b in bones] if bones else None,
        root_joint=int(manifest.get("root_joint", 0)),
        facing_joints=tuple(manifest.get("facing_joints", (0, 0))),
    )


def save_dataset(dataset: MotionDataset, root_path: str | Path) -> None:
    """Write a dataset back out in the canonical layout."""
    root = Path(root_path)
    (root / SEQUENCE_DIR).mkdir(parents=True, exist_ok=True)
    manifest = {
        "class_names": dataset.class_names,
        "joint_names": dataset.joint_names,
        "fps": dataset.fps,
        "root_joint": dataset.root_joint,
        "facing_joints": list(dataset.facing_joints),
    }
    if dataset.bones is not None:
        manifest["bones"] = [list(b) for b in dataset.bones]
    with open(root / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=1)
    for seq in dataset.sequences:
        with open(root / SEQUENCE_DIR / f"{seq.id}.json", "w") as fh:
            json.dump({"id": seq.id, "frames": seq.frames.tolist()}, fh)


def load_labels(root_path: str | Path, dataset: MotionDataset) -> dict[str, LabelMatrix]:
    """Load whatever label files exist for ``dataset`` under root/labels/."""
    label_dir = Path(root_path) / LABEL_DIR
    out: dict[str, LabelMatrix] = {}
    if not label_dir.is_dir():
        return out
    m = dataset.num_classes
    for seq in dataset.sequences:
        path = label_dir / f"{seq.id}.json"
        if not path.is_file():
            continue
        with open(path) as fh:
            doc = json.load(fh)
        mat = LabelMatrix(sequence_id=seq.id, labels=np.asarray(doc["labels"]))
        if mat.num_frames != seq.num_frames:
            raise DatasetError(
                f"{path.name}: {mat.num_frames} label rows but sequence has {seq.num_frames} frames"
            )
        if mat.num_classes != m:
            raise DatasetError(f"{path.name}: {mat.num_classes} classes, dataset has {m}")
        out[seq.id] = mat
    return out


def save_labels(labels: dict[str, LabelMatrix], label_dir: str | Path) -> None:
    out_dir = Path(label_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for seq_id, mat in labels.items():
        with open(out_dir / f"{seq_id}.json", "w") as fh:
            json.dump({"id": seq_id, "labels": mat.labels.astype(int).tolist()}, fh)


def label_matrix_to_json(mat: LabelMatrix) -> str:
    return json.dumps({"id": mat.sequence_id, "labels": mat.labels.astype(int).tolist()})


def _yaw_rotation(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    # rotation about the vertical (+y) axis
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _mean_bone_length(frame: np.ndarray, bones: list[tuple[int, int]]) -> float:
    diffs = np.stack([frame[a] - frame[b] for a, b in bones])
    return float(np.linalg.norm(diffs, axis=1).mean())


def normalize_sequence(
    seq: MotionSequence,
    root_joint: int,
    facing_joints: tuple[int, int],
    bones: list[tuple[int, int]] | None = None,
) -> MotionSequence:
    """Canonicalize position, heading, and skeleton size of a sequence.

    Per frame the root joint is moved to the origin of the horizontal plane;
    the vertical offset of the frame-1 root is removed once so jumps keep
    their height profile; the whole sequence is yaw-rotated so the horizontal
    vector between ``facing_joints`` at frame 1 points along +x; finally all
    coordinates are divided by the mean bone length of frame 1.

    ``bones`` defaults to a star topology out of the root joint when the
    dataset does not define a skeleton hierarchy.

    The result is idempotent and invariant (to ~1e-6) under global
    translation, yaw rotation, and uniform scaling of the input.
    """
    frames = seq.frames.copy()
    T, J, _ = frames.shape
    for idx in (root_joint, *facing_joints):
        if not 0 <= idx < J:
            raise DatasetError(f"joint index {idx} out of range for {J} joints")

    # horizontal root centering, per frame; vertical offset removed once
    root = frames[:, root_joint, :]
    frames[:, :, 0] -= root[:, 0:1]
    frames[:, :, 2] -= root[:, 2:3]
    frames[:, :, 1] -= root[0, 1]

    facing = frames[0, facing_joints[1]] - frames[0, facing_joints[0]]
    horiz = np.hypot(facing[0], facing[2])
    if horiz < 1e-9:
        warnings.warn(
            f"sequence {seq.id!r}: facing joints coincide in the horizontal plane; "
            "keeping original orientation",
            stacklevel=2,
        )
    else:
        rot = _yaw_rotation(np.arctan2(facing[2], facing[0]))
        frames = frames @ rot.T

    if bones is None:
        bones = [(root_joint, j) for j in range(J) if j != root_joint]
    if not bones:  # single-joint skeleton: nothing to scale by
        return replace(seq, frames=frames)
    scale = _mean_bone_length(frames[0], bones)
    if scale < 1e-12:
        raise DatasetError(f"sequence {seq.id!r}: degenerate skeleton, mean bone length is zero")
    return replace(seq, frames=frames / scale)


def normalize_dataset(dataset: MotionDataset) -> MotionDataset:
    """Apply normalize_sequence to every sequence, using the dataset's skeleton config."""
    normalized = [
        normalize_sequence(seq, dataset.root_joint, dataset.facing_joints, dataset.bones)
        for seq in dataset.sequences
    ]
    return replace(dataset, sequences=normalized)
