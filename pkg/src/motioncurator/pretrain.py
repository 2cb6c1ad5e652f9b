"""Contrastive pretraining at the sequence and frame levels.

Per training step one sequence yields two positive views and a reversed
negative view. The native encoder embeds the first positive; the momentum
encoder embeds the second positive and the negative. The sequence-level loss
contrasts the positive pair against a FIFO queue of past features, the
frame-level loss rewards similarity between temporally close frames of the
two positives, and their weighted sum drives gradient steps on the native
encoder while the momentum encoder trails via exponential averaging.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch

from .augment import (AugmentationConfig, View, downsample, draw_window, enhance,
                      make_views, perturb, raw_view, reverse)
from .data import MotionDataset
from .encoder import EncoderParams, MotionEncoder, momentum_step


class DivergenceError(RuntimeError):
    """Raised when the training loss becomes non-finite."""


class NegativeQueue:
    """Fixed-capacity FIFO of unit-norm feature vectors used as negatives.

    Entries may carry the id of the sequence that produced them; the loss can
    then skip negatives that came from the sequence currently being trained
    on. Queued features are only negatives by virtue of coming from different
    sequences, and at small dataset sizes the queue revisits every sequence
    often enough that unfiltered entries would contradict that premise.
    """

    def __init__(self, capacity: int = 4096):
        if capacity < 0:
            raise ValueError(f"capacity must be >= 0, got {capacity}")
        self.capacity = capacity
        self.entries: deque[torch.Tensor] = deque(maxlen=capacity)
        self.sources: deque[str | None] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, feature: torch.Tensor, source: str | None = None) -> None:
        if self.capacity > 0:
            self.entries.append(feature.detach().clone())
            self.sources.append(source)

    def as_tensor(self, exclude_source: str | None = None) -> torch.Tensor | None:
        if exclude_source is None:
            entries = list(self.entries)
        else:
            entries = [
                f for f, s in zip(self.entries, self.sources) if s != exclude_source
            ]
        if not entries:
            return None
        return torch.stack(entries)


def enqueue_step(
    queue: NegativeQueue,
    fr_neg: torch.Tensor,
    f1: torch.Tensor,
    f2: torch.Tensor,
    source: str | None = None,
) -> NegativeQueue:
    """Enqueue the step's reversed-negative and both positives, FIFO-evicting."""
    for feature in (fr_neg, f1, f2):
        queue.push(feature, source)
    return queue


@dataclass(frozen=True)
class LossConfig:
    tau: float = 0.07
    omega: float = 1.0
    t_nb: int = 12
    normalized_frame_loss: bool = False

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.t_nb < 1:
            raise ValueError(f"t_nb must be >= 1, got {self.t_nb}")


def sequence_loss(
    f1: torch.Tensor,
    f2: torch.Tensor,
    queue: NegativeQueue,
    tau: float,
    exclude_source: str | None = None,
) -> torch.Tensor:
    """Contrast the positive pair against the queue.

    -log( exp(f1.f2/tau) / (exp(f1.f2/tau) + sum_i exp(f1.neg_i/tau)) ),
    i.e. cross-entropy of the similarity logits against the positive slot.
    An empty queue gives exactly zero. ``exclude_source`` drops queue entries
    recorded from that sequence id, keeping negatives truly foreign.
    """
    pos = (f1 * f2).sum() / tau
    negatives = queue.as_tensor(exclude_source)
    if negatives is None:
        return pos - pos  # zero, but differentiable through f1 and f2
    neg = (negatives.to(f1.dtype) @ f1) / tau
    logits = torch.cat([pos.reshape(1), neg])
    return torch.logsumexp(logits, dim=0) - pos


def frame_loss(frames1: torch.Tensor, frames2: torch.Tensor, cfg: LossConfig) -> torch.Tensor:
    """Local-consistency loss between two aligned frame-feature runs.

    The literal form is -log sum_i sum_{|i-j| < t_nb} exp(f1_i . f2_j / tau),
    an unnormalized log-sum over temporally close cross-view pairs (it can go
    negative and is unbounded below). The normalized variant divides each
    frame's close-pair mass by its total mass over all of frames2, averaged
    over frames, which is bounded and behaves like a softmax cross-entropy.
    """
    if frames1.ndim != 2 or frames2.ndim != 2:
        raise ValueError("frame features must be (T, F) matrices")
    sims = frames1 @ frames2.T / cfg.tau
    i = torch.arange(sims.shape[0]).unsqueeze(1)
    j = torch.arange(sims.shape[1]).unsqueeze(0)
    close = (i - j).abs() < cfg.t_nb
    if not close.any():
        raise ValueError("empty frame neighbourhood; t_nb must be >= 1")
    masked = sims.masked_fill(~close, -torch.inf)
    if cfg.normalized_frame_loss:
        per_frame = torch.logsumexp(masked, dim=1) - torch.logsumexp(sims, dim=1)
        return -per_frame.mean()
    return -torch.logsumexp(masked.reshape(-1), dim=0)


def total_loss(ls: torch.Tensor, lf: torch.Tensor, omega: float) -> torch.Tensor:
    return ls + omega * lf


@dataclass(frozen=True)
class TrainingSchedule:
    epochs: int = 30
    lr: float = 1e-3
    optimizer: str = "adam"    # "adam" or "sgd" (momentum 0.9)
    momentum: float = 0.9
    grad_clip: float = 5.0
    alpha: float = 0.9         # momentum-encoder coefficient
    queue_capacity: int = 4096
    seed: int = 0
    lr_min: float = 0.0
    foreign_negatives_only: bool = True  # skip queue entries from the current sequence
    warm_start_queue: bool = True        # prime the queue before the first step

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")


@dataclass
class LossRow:
    step: int
    sequence: float
    frame: float
    total: float


@dataclass
class PretrainResult:
    encoder_q: MotionEncoder
    encoder_k: MotionEncoder
    params: EncoderParams
    loss_rows: list[LossRow] = field(default_factory=list)
    wall_seconds: float = 0.0

    def epoch_means(self, steps_per_epoch: int) -> list[float]:
        totals = [row.total for row in self.loss_rows]
        return [
            float(np.mean(totals[i : i + steps_per_epoch]))
            for i in range(0, len(totals), steps_per_epoch)
        ]


def _cosine_lr(schedule: TrainingSchedule, step: int, total_steps: int) -> float:
    if total_steps <= 1:
        return schedule.lr
    t = step / (total_steps - 1)
    return schedule.lr_min + 0.5 * (schedule.lr - schedule.lr_min) * (1 + math.cos(math.pi * t))


def enhance_dataset(
    dataset: MotionDataset, aug: AugmentationConfig, enhanced: bool = True
) -> dict[str, View]:
    """Precompute the (deterministic) enhanced view of every sequence."""
    out = {}
    for seq in dataset.sequences:
        view = enhance(seq, aug.dilution, aug.window_s) if enhanced else raw_view(seq)
        out[seq.id] = View(view.blocks.astype(np.float32))
    return out


def pretrain(
    dataset: MotionDataset,
    encoder_params: EncoderParams | None,
    aug: AugmentationConfig,
    loss_cfg: LossConfig,
    schedule: TrainingSchedule,
    enhanced: bool = True,
    share_positive_axis: bool = True,
    augmented: bool = True,
    reverse_negative: bool = True,
    log_every: int = 0,
) -> PretrainResult:
    """Run the contrastive pretraining loop over the dataset.

    The ablation switches: ``enhanced`` toggles dilated trajectory context,
    ``augmented`` toggles random downsampling windows (off means a fixed
    leading window) and ``reverse_negative`` toggles reversal of the negative
    view. Perturbation is disabled through aug.t_pb = 0.

    Raises DivergenceError when the loss becomes non-finite.
    """
    if dataset.num_sequences == 0:
        raise ValueError("cannot pretrain on an empty dataset")
    views = enhance_dataset(dataset, aug, enhanced=enhanced)
    blocks = next(iter(views.values())).blocks.shape[1]
    if encoder_params is None:
        encoder_params = EncoderParams(num_joints=dataset.num_joints, input_blocks=blocks)
    elif encoder_params.input_blocks != blocks:
        raise ValueError(
            f"encoder expects {encoder_params.input_blocks} blocks per frame, "
            f"views have {blocks}"
        )

    torch.manual_seed(schedule.seed)
    rng = np.random.default_rng(schedule.seed)
    encoder_q = MotionEncoder(encoder_params)
    encoder_k = MotionEncoder(encoder_params)
    encoder_k.load_state_dict(encoder_q.state_dict())
    for p in encoder_k.parameters():
        p.requires_grad_(False)

    if schedule.optimizer == "adam":
        opt = torch.optim.Adam(encoder_q.parameters(), lr=schedule.lr)
    elif schedule.optimizer == "sgd":
        opt = torch.optim.SGD(
            encoder_q.parameters(), lr=schedule.lr, momentum=schedule.momentum
        )
    else:
        raise ValueError(f"unknown optimizer {schedule.optimizer!r}")
    queue = NegativeQueue(schedule.queue_capacity)
    ids = dataset.ids
    total_steps = schedule.epochs * len(ids)
    result = PretrainResult(encoder_q=encoder_q, encoder_k=encoder_k, params=encoder_params)

    if schedule.warm_start_queue and schedule.queue_capacity > 0:
        # prime the dictionary so even the first steps see a populated set of
        # negatives instead of an attraction-only objective
        with torch.no_grad():
            for seq_id in ids:
                _, _, vr = make_views(views[seq_id], aug, rng)
                _, fr = encoder_k.encode_view(vr)
                queue.push(fr, source=seq_id)

    started = time.perf_counter()
    step = 0
    for _epoch in range(schedule.epochs):
        for idx in rng.permutation(len(ids)):
            seq_id = ids[idx]
            source = views[seq_id]
            if augmented and reverse_negative:
                v1, v2, vr = make_views(source, aug, rng, share_positive_axis=share_positive_axis)
            else:
                v1, v2, vr = _ablation_views(
                    source, aug, rng,
                    share_positive_axis=share_positive_axis,
                    augmented=augmented,
                    reverse_negative=reverse_negative,
                )

            lr = _cosine_lr(schedule, step, total_steps)
            for group in opt.param_groups:
                group["lr"] = lr

            frames1, f1 = encoder_q.encode_view(v1)
            with torch.no_grad():
                frames2, f2 = encoder_k.encode_view(v2)
                if vr is v2:
                    fr = f2
                else:
                    _, fr = encoder_k.encode_view(vr)

            ls = sequence_loss(
                f1, f2, queue, loss_cfg.tau,
                exclude_source=seq_id if schedule.foreign_negatives_only else None,
            )
            lf = frame_loss(frames1, frames2, loss_cfg)
            loss = total_loss(ls, lf, loss_cfg.omega)
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at step {step}: sequence={ls.detach().item():.4g} "
                    f"frame={lf.detach().item():.4g} (lr={lr:.4g}, queue={len(queue)})"
                )

            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(encoder_q.parameters(), schedule.grad_clip)
            opt.step()
            momentum_step(encoder_q, encoder_k, schedule.alpha)
            enqueue_step(queue, fr, f1, f2, source=seq_id)

            row = LossRow(step, ls.detach().item(), lf.detach().item(), loss.detach().item())
            result.loss_rows.append(row)
            step += 1
            if log_every and step % log_every == 0:
                print(f"step {step}/{total_steps} loss {row.total:.4f}")

    result.wall_seconds = time.perf_counter() - started
    encoder_q.eval()
    encoder_k.eval()
    return result


def _ablation_views(
    source: View,
    aug: AugmentationConfig,
    rng: np.random.Generator,
    share_positive_axis: bool,
    augmented: bool,
    reverse_negative: bool,
) -> tuple[View, View, View]:
    """View triple with downsampling and/or reversal switched off.

    Without random downsampling each view is the sequence's fixed leading
    window (the naive fixed-shape baseline); perturbation still applies per
    aug.t_pb. When the negative view is identical to the second positive the
    same object is returned so the caller can skip re-encoding it.
    """
    T = len(source)
    n_ds = min(aug.n_ds, T)
    if augmented:
        a1, d1 = draw_window(T, n_ds, rng)
        v1 = perturb(downsample(source, a1, d1, n_ds), aug, rng)
        a2, d2 = (a1, d1) if share_positive_axis else draw_window(T, n_ds, rng)
        v2 = perturb(downsample(source, a2, d2, n_ds), aug, rng)
        a3, d3 = draw_window(T, n_ds, rng)
        v3 = perturb(downsample(source, a3, d3, n_ds), aug, rng)
    else:
        window = View(source.blocks[:n_ds])
        if aug.t_pb > 0:
            v1, v2, v3 = (perturb(window, aug, rng) for _ in range(3))
        else:
            v1 = v2 = v3 = window
    if not reverse_negative:
        return v1, v2, v2 if v3 is v2 else v3
    return v1, v2, reverse(v3)


def loss_rows_to_csv(rows: list[LossRow]) -> str:
    lines = ["step,sequence_loss,frame_loss,total_loss"]
    lines += [f"{r.step},{r.sequence:.8g},{r.frame:.8g},{r.total:.8g}" for r in rows]
    return "\n".join(lines) + "\n"
