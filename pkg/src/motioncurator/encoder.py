"""Spatial-temporal transformer encoder for enhanced motion views.

Each enhanced frame is embedded per joint by a two-layer MLP, run through
self-attention over joints (spatial), mean-pooled into a frame token, then
run through self-attention over frames (temporal). A linear head produces
per-frame outputs; frame features are their unit-normalized rows and the
sequence feature is the unit-normalized mean of the pre-normalization rows.

Position information enters only through learned additive encodings on the
joint and time axes, so with the joint encodings zeroed the sequence feature
is invariant to joint permutations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .augment import View


@dataclass(frozen=True)
class EncoderParams:
    num_joints: int
    input_blocks: int = 1        # B = 2n+1 blocks per enhanced frame
    embed_dim: int = 64
    heads: int = 4
    spatial_layers: int = 2
    temporal_layers: int = 2
    feature_dim: int = 128
    max_frames: int = 512

    def __post_init__(self):
        for name in ("num_joints", "input_blocks", "embed_dim", "heads",
                     "spatial_layers", "temporal_layers", "feature_dim", "max_frames"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.embed_dim % self.heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )

    def to_dict(self) -> dict:
        return {
            "num_joints": self.num_joints,
            "input_blocks": self.input_blocks,
            "embed_dim": self.embed_dim,
            "heads": self.heads,
            "spatial_layers": self.spatial_layers,
            "temporal_layers": self.temporal_layers,
            "feature_dim": self.feature_dim,
            "max_frames": self.max_frames,
        }


# A feature vector is a unit-norm float array of length feature_dim.
FeatureVector = np.ndarray


def check_unit_norm(values: np.ndarray, tol: float = 1e-4) -> np.ndarray:
    values = np.asarray(values)
    norms = np.linalg.norm(values, axis=-1)
    if not np.allclose(norms, 1.0, atol=tol):
        worst = float(np.abs(norms - 1.0).max())
        raise ValueError(f"feature vectors must be unit-norm (worst deviation {worst:.2e})")
    return values


class _SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x):
        # x: (batch, tokens, dim)
        b, t, d = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        shape = (b, t, self.heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-1, -2) / self.head_dim**0.5, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, t, d)
        return self.proj(out)


class _TransformerBlock(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = _SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, dim))

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class MotionEncoder(nn.Module):
    """Maps an enhanced view to per-frame and per-sequence unit-norm features."""

    def __init__(self, params: EncoderParams, dtype: torch.dtype = torch.float32):
        super().__init__()
        self.params = params
        e = params.embed_dim
        self.joint_embed = nn.Sequential(
            nn.Linear(params.input_blocks * 3, e), nn.GELU(), nn.Linear(e, e)
        )
        self.joint_pos = nn.Parameter(torch.zeros(params.num_joints, e))
        self.time_pos = nn.Parameter(torch.zeros(params.max_frames, e))
        self.spatial = nn.ModuleList(
            _TransformerBlock(e, params.heads) for _ in range(params.spatial_layers)
        )
        self.temporal = nn.ModuleList(
            _TransformerBlock(e, params.heads) for _ in range(params.temporal_layers)
        )
        self.final_norm = nn.LayerNorm(e)
        self.head = nn.Linear(e, params.feature_dim)
        nn.init.normal_(self.joint_pos, std=0.02)
        nn.init.normal_(self.time_pos, std=0.02)
        if dtype != torch.float32:
            self.to(dtype)
        self._dtype = dtype

    def forward(self, blocks: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """blocks: (T, B, J, 3) -> (frame_features (T, F), seq_feature (F,))."""
        p = self.params
        if blocks.ndim != 4 or blocks.shape[1] != p.input_blocks or blocks.shape[2] != p.num_joints:
            raise ValueError(
                f"expected view of shape (T, {p.input_blocks}, {p.num_joints}, 3), "
                f"got {tuple(blocks.shape)}"
            )
        T = blocks.shape[0]
        if T > p.max_frames:
            raise ValueError(f"view has {T} frames, encoder supports at most {p.max_frames}")

        # per-joint tokens: all blocks of a joint concatenated
        tokens = blocks.permute(0, 2, 1, 3).reshape(T, p.num_joints, p.input_blocks * 3)
        tokens = self.joint_embed(tokens) + self.joint_pos
        for block in self.spatial:
            tokens = block(tokens)
        frame_tokens = tokens.mean(dim=1) + self.time_pos[:T]
        seq = frame_tokens.unsqueeze(0)
        for block in self.temporal:
            seq = block(seq)
        raw = self.head(self.final_norm(seq.squeeze(0)))  # (T, F) pre-normalization outputs

        frame_features = raw / raw.norm(dim=1, keepdim=True).clamp_min(1e-12)
        pooled = raw.mean(dim=0)
        seq_feature = pooled / pooled.norm().clamp_min(1e-12)
        return frame_features, seq_feature

    def encode_view(self, view: View) -> tuple[torch.Tensor, torch.Tensor]:
        blocks = torch.as_tensor(np.ascontiguousarray(view.blocks), dtype=self._dtype)
        return self(blocks)


def encode(view: View, encoder: MotionEncoder) -> tuple[np.ndarray, FeatureVector]:
    """Inference-mode encoding; returns numpy (frame_features, seq_feature)."""
    with torch.no_grad():
        frame_features, seq_feature = encoder.encode_view(view)
    return frame_features.numpy(), seq_feature.numpy()


@dataclass
class MomentumState:
    """Parameter sets of the native (theta_q) and momentum (theta_k) encoders."""

    theta_q: dict[str, torch.Tensor]
    theta_k: dict[str, torch.Tensor]
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        _check_same_shapes(self.theta_q, self.theta_k)


def _check_same_shapes(a: dict[str, torch.Tensor], b: dict[str, torch.Tensor]) -> None:
    if a.keys() != b.keys():
        raise ValueError("parameter sets have different names")
    for name in a:
        if a[name].shape != b[name].shape:
            raise ValueError(
                f"shape mismatch for {name}: {tuple(a[name].shape)} vs {tuple(b[name].shape)}"
            )


def momentum_update(state: MomentumState) -> MomentumState:
    """One momentum step: theta_k <- alpha * theta_k + (1 - alpha) * theta_q."""
    a = state.alpha
    with torch.no_grad():
        new_k = {
            name: a * state.theta_k[name] + (1.0 - a) * state.theta_q[name]
            for name in state.theta_k
        }
    return MomentumState(theta_q=state.theta_q, theta_k=new_k, alpha=a)


def momentum_step(encoder_q: MotionEncoder, encoder_k: MotionEncoder, alpha: float) -> None:
    """Apply a momentum update to encoder_k's parameters in place."""
    state = momentum_update(
        MomentumState(encoder_q.state_dict(), encoder_k.state_dict(), alpha)
    )
    encoder_k.load_state_dict(state.theta_k)
