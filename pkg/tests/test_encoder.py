"""Encoder shapes, normalization, momentum updates, and gradient checks."""

import numpy as np
import pytest
import torch

from motioncurator.augment import View
from motioncurator.encoder import (
    EncoderParams,
    MomentumState,
    MotionEncoder,
    check_unit_norm,
    encode,
    momentum_step,
    momentum_update,
)

TINY = EncoderParams(
    num_joints=3, input_blocks=3, embed_dim=8, heads=2,
    spatial_layers=1, temporal_layers=1, feature_dim=8, max_frames=16,
)


def tiny_view(frames=4, blocks=3, joints=3, seed=0):
    rng = np.random.default_rng(seed)
    return View(rng.normal(size=(frames, blocks, joints, 3)))


def test_outputs_are_unit_norm():
    torch.manual_seed(0)
    enc = MotionEncoder(TINY)
    frame_feats, seq_feat = encode(tiny_view(), enc)
    assert np.allclose(np.linalg.norm(frame_feats, axis=1), 1.0, atol=1e-5)
    assert abs(np.linalg.norm(seq_feat) - 1.0) < 1e-5
    check_unit_norm(frame_feats)
    check_unit_norm(seq_feat)


def test_shape_contract_t_frames():
    torch.manual_seed(0)
    enc = MotionEncoder(TINY)
    for t in (1, 4, 9):
        frame_feats, seq_feat = encode(tiny_view(frames=t), enc)
        assert frame_feats.shape == (t, 8)
        assert seq_feat.shape == (8,)


def test_identical_views_encode_identically():
    torch.manual_seed(0)
    enc = MotionEncoder(TINY)
    view = tiny_view(seed=3)
    a = encode(view, enc)
    b = encode(View(view.blocks.copy()), enc)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_dimension_mismatch_rejected():
    enc = MotionEncoder(TINY)
    with pytest.raises(ValueError, match="expected view"):
        encode(tiny_view(joints=5), enc)
    with pytest.raises(ValueError, match="at most"):
        encode(tiny_view(frames=99), enc)


def test_params_validation():
    with pytest.raises(ValueError, match="divisible"):
        EncoderParams(num_joints=2, embed_dim=10, heads=4)
    with pytest.raises(ValueError, match="positive"):
        EncoderParams(num_joints=0)


class TestMomentum:
    def _states(self, alpha):
        torch.manual_seed(1)
        q = {"w": torch.randn(3, 2), "b": torch.randn(4)}
        k = {"w": torch.randn(3, 2), "b": torch.randn(4)}
        return MomentumState(theta_q=q, theta_k=k, alpha=alpha)

    def test_alpha_zero_copies_native(self):
        state = self._states(alpha=0.0)
        out = momentum_update(state)
        for name in state.theta_q:
            torch.testing.assert_close(out.theta_k[name], state.theta_q[name])

    def test_scalar_evaluation(self):
        state = MomentumState(
            theta_q={"p": torch.tensor([0.0], dtype=torch.float64)},
            theta_k={"p": torch.tensor([1.0], dtype=torch.float64)},
            alpha=0.999,
        )
        out = momentum_update(state)
        assert abs(out.theta_k["p"].item() - 0.999) < 1e-9

    def test_fixed_point(self):
        state = self._states(alpha=0.5)
        state = MomentumState(state.theta_q, {k: v.clone() for k, v in state.theta_q.items()}, 0.5)
        out = momentum_update(state)
        for name in state.theta_q:
            torch.testing.assert_close(out.theta_k[name], state.theta_q[name])

    def test_native_untouched(self):
        state = self._states(alpha=0.9)
        before = {k: v.clone() for k, v in state.theta_q.items()}
        momentum_update(state)
        for name in before:
            torch.testing.assert_close(state.theta_q[name], before[name])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            MomentumState(
                theta_q={"p": torch.zeros(2)}, theta_k={"p": torch.zeros(3)}, alpha=0.5
            )

    def test_geometric_convergence_per_parameter(self):
        alpha = 0.75
        state = self._states(alpha)
        gaps = []
        for _ in range(5):
            gap = {n: (state.theta_k[n] - state.theta_q[n]).clone() for n in state.theta_q}
            gaps.append(gap)
            state = momentum_update(state)
        for step in range(4):
            for name in gaps[0]:
                torch.testing.assert_close(
                    gaps[step + 1][name], alpha * gaps[step][name]
                )

    def test_momentum_step_updates_module(self):
        torch.manual_seed(0)
        q = MotionEncoder(TINY)
        k = MotionEncoder(TINY)
        momentum_step(q, k, alpha=0.0)
        for (name, pq), (_, pk) in zip(q.state_dict().items(), k.state_dict().items()):
            torch.testing.assert_close(pq, pk)


def test_permutation_sensitivity_only_via_position_encodings():
    torch.manual_seed(0)
    enc = MotionEncoder(TINY)
    with torch.no_grad():
        enc.joint_pos.zero_()
    view = tiny_view(seed=5)
    perm = [2, 0, 1]
    permuted = View(view.blocks[:, :, perm, :])
    _, seq_a = encode(view, enc)
    _, seq_b = encode(permuted, enc)
    np.testing.assert_allclose(seq_a, seq_b, atol=1e-5)
    # with encodings present, permutation is visible
    torch.manual_seed(0)
    enc2 = MotionEncoder(TINY)
    _, seq_c = encode(view, enc2)
    _, seq_d = encode(permuted, enc2)
    assert not np.allclose(seq_c, seq_d, atol=1e-5)


def test_gradient_check_against_finite_differences():
    """Analytic grads of a scalar readout of the encoder outputs vs central FD."""
    torch.manual_seed(0)
    enc = MotionEncoder(TINY, dtype=torch.float64)
    blocks = torch.tensor(tiny_view(seed=2).blocks, dtype=torch.float64)
    probe_f = torch.randn(4, 8, dtype=torch.float64)
    probe_s = torch.randn(8, dtype=torch.float64)

    def readout():
        frame_feats, seq_feat = enc(blocks)
        return (frame_feats * probe_f).sum() + (seq_feat * probe_s).sum()

    loss = readout()
    loss.backward()
    params = [p for p in enc.parameters() if p.grad is not None]
    analytic = torch.cat([p.grad.reshape(-1) for p in params])

    h = 1e-3
    fd = torch.empty_like(analytic)
    pos = 0
    with torch.no_grad():
        for p in params:
            flat = p.reshape(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = readout().item()
                flat[i] = orig - h
                down = readout().item()
                flat[i] = orig
                fd[pos] = (up - down) / (2 * h)
                pos += 1
    rel = (analytic - fd).norm() / max(analytic.norm(), fd.norm())
    assert rel < 1e-4, f"gradient mismatch: rel err {rel:.2e}"
