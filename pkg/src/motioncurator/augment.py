"""Temporal context enhancement and the contrastive view augmentations.

A view is an ordered run of enhanced frames. Each enhanced frame carries the
raw pose plus 2n dilated trajectory blocks: backward differences
(s_j - s_{j-nl}, ..., s_j - s_{j-l}), the pose s_j itself, then forward
differences (s_{j+l} - s_j, ..., s_{j+nl} - s_j), where n = floor(t * fps / l)
for a context window of t seconds at dilution factor l. Out-of-range frame
indices clamp to the nearest valid frame, so boundary frames carry zero
velocity rather than fictitious motion.

Augmentations treat an enhanced frame as one opaque vector: zeroing a frame
zeroes its trajectory blocks too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MotionSequence


class AugmentationError(ValueError):
    """Raised for unsatisfiable augmentation configurations or arguments."""


@dataclass(frozen=True)
class EnhancedFrame:
    """A single pose with its dilated trajectory context."""

    center: np.ndarray        # (J, 3)
    trajectories: np.ndarray  # (2n, J, 3), backward diffs then forward diffs

    @property
    def blocks(self) -> np.ndarray:
        """All 2n+1 blocks in canonical order (backward, center, forward)."""
        n = self.trajectories.shape[0] // 2
        return np.concatenate(
            [self.trajectories[:n], self.center[None], self.trajectories[n:]]
        )


class View:
    """An ordered list of enhanced frames, stored densely as (T, B, J, 3).

    B = 2n+1 blocks per frame with the raw pose at block index n. Indexing
    yields EnhancedFrame objects; augmentations operate on the dense array.
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks: np.ndarray):
        blocks = np.asarray(blocks)
        if blocks.ndim != 4 or blocks.shape[3] != 3 or blocks.shape[1] % 2 != 1:
            raise AugmentationError(
                f"view blocks must have shape (T, 2n+1, J, 3), got {blocks.shape}"
            )
        if blocks.shape[0] < 1:
            raise AugmentationError("a view must contain at least one frame")
        self.blocks = blocks

    def __len__(self) -> int:
        return self.blocks.shape[0]

    def __getitem__(self, index: int) -> EnhancedFrame:
        n = self.num_context
        row = self.blocks[index]
        return EnhancedFrame(
            center=row[n],
            trajectories=np.concatenate([row[:n], row[n + 1:]]),
        )

    @property
    def num_context(self) -> int:
        """n, the number of trajectory blocks on each side of the pose."""
        return self.blocks.shape[1] // 2

    @property
    def num_joints(self) -> int:
        return self.blocks.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, View) and np.array_equal(self.blocks, other.blocks)


@dataclass(frozen=True)
class AugmentationConfig:
    """Knobs for view generation.

    t_pb is the total perturbation probability per frame, t_md the share of
    perturbations that are data-missing (the rest are frame disorder), n_ds
    the number of frames kept by downsampling, window_s / dilution the
    temporal context parameters (n = floor(window_s * fps / dilution)).
    """

    t_pb: float = 0.15
    t_md: float = 0.9
    n_ds: int = 512
    window_s: float = 0.1
    dilution: int = 6
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.t_pb <= 1.0:
            raise AugmentationError(f"t_pb must be in [0, 1], got {self.t_pb}")
        if not 0.0 <= self.t_md <= 1.0:
            raise AugmentationError(f"t_md must be in [0, 1], got {self.t_md}")
        if self.n_ds < 1:
            raise AugmentationError(f"n_ds must be positive, got {self.n_ds}")
        if self.dilution < 1:
            raise AugmentationError(f"dilution must be >= 1, got {self.dilution}")

    def context_blocks(self, fps: float) -> int:
        """n at the given capture rate; raises if the window is too small."""
        n = int(np.floor(self.window_s * fps / self.dilution))
        if n < 1:
            raise AugmentationError(
                f"window {self.window_s}s at {fps} fps with dilution {self.dilution} "
                "yields no context blocks (n = 0)"
            )
        return n


def enhance(seq: MotionSequence, dilution: int, window_s: float) -> View:
    """Build the dilated-trajectory view of a full sequence.

    Frame j (0-based here) gets blocks (s_j - s_{j-nl}, ..., s_j - s_{j-l},
    s_j, s_{j+l} - s_j, ..., s_{j+nl} - s_j) with indices clamped to [0, T-1].
    """
    if dilution < 1:
        raise AugmentationError(f"dilution must be >= 1, got {dilution}")
    n = int(np.floor(window_s * seq.fps / dilution))
    if n < 1:
        raise AugmentationError(
            f"window {window_s}s at {seq.fps} fps with dilution {dilution} "
            "yields no context blocks (n = 0)"
        )
    frames = seq.frames
    T = frames.shape[0]
    idx = np.arange(T)
    blocks = np.empty((T, 2 * n + 1, frames.shape[1], 3), dtype=frames.dtype)
    for k in range(1, n + 1):
        back = frames[np.clip(idx - k * dilution, 0, T - 1)]
        fwd = frames[np.clip(idx + k * dilution, 0, T - 1)]
        blocks[:, n - k] = frames - back
        blocks[:, n + k] = fwd - frames
    blocks[:, n] = frames
    return View(blocks)


def raw_view(seq: MotionSequence) -> View:
    """A context-free view (B = 1): just the raw poses. Used by ablations."""
    return View(seq.frames[:, None, :, :])


def perturb(view: View, cfg: AugmentationConfig, rng: np.random.Generator) -> View:
    """Stochastic per-frame perturbation: missing data or frame disorder.

    Per frame draw p ~ U[0,1]: p < t_pb*t_md zeroes the frame, otherwise
    p < t_pb replaces it with a uniformly drawn frame of the pre-perturbation
    view; all other frames pass through.
    """
    T = len(view)
    p = rng.random(T)
    out = view.blocks.copy()
    source = view.blocks
    zero_cut = cfg.t_pb * cfg.t_md
    for i in range(T):
        if p[i] < zero_cut:
            out[i] = 0.0
        elif p[i] < cfg.t_pb:
            out[i] = source[rng.integers(0, T)]
    return View(out)


def downsample(view: View, offset: int, delta: int, n_ds: int) -> View:
    """Keep n_ds frames starting at 1-based ``offset`` with stride ``delta``."""
    T = len(view)
    if offset < 1 or delta < 1 or n_ds < 1:
        raise AugmentationError(
            f"offset, delta, n_ds must be >= 1, got ({offset}, {delta}, {n_ds})"
        )
    last = offset + (n_ds - 1) * delta
    if last > T:
        raise AugmentationError(
            f"downsample out of range: offset {offset} + (n_ds {n_ds} - 1) * delta {delta} "
            f"= {last} exceeds {T} frames"
        )
    return View(view.blocks[offset - 1 : last : delta].copy())


def reverse(view: View) -> View:
    """Invert frame order; the negative augmentation."""
    return View(view.blocks[::-1].copy())


def draw_window(T: int, n_ds: int, rng: np.random.Generator) -> tuple[int, int]:
    """Uniformly draw a valid (offset, delta) for a length-n_ds downsample."""
    if n_ds == 1:
        return int(rng.integers(1, T + 1)), 1
    delta_max = (T - 1) // (n_ds - 1)
    delta = int(rng.integers(1, delta_max + 1))
    offset_max = T - (n_ds - 1) * delta
    return int(rng.integers(1, offset_max + 1)), delta


def make_views(
    source: View,
    cfg: AugmentationConfig,
    rng: np.random.Generator,
    share_positive_axis: bool = False,
) -> tuple[View, View, View]:
    """Generate the two positive views and the reversed negative view.

    Each view is a perturbed random downsample of ``source``; the negative is
    additionally reversed. The downsample length is min(cfg.n_ds, len(source))
    so short sequences stay usable. With ``share_positive_axis`` the second
    positive view reuses the first one's (offset, delta), which puts both
    positives on one time axis so frame-index distances between them are
    meaningful; perturbations stay independent.
    """
    T = len(source)
    n_ds = min(cfg.n_ds, T)

    a1, d1 = draw_window(T, n_ds, rng)
    v1 = perturb(downsample(source, a1, d1, n_ds), cfg, rng)

    a2, d2 = (a1, d1) if share_positive_axis else draw_window(T, n_ds, rng)
    v2 = perturb(downsample(source, a2, d2, n_ds), cfg, rng)

    a3, d3 = draw_window(T, n_ds, rng)
    vr = reverse(perturb(downsample(source, a3, d3, n_ds), cfg, rng))
    return v1, v2, vr
