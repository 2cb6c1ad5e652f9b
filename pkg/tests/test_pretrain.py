"""Losses, the negatives queue, and the training loop."""

import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from motioncurator.augment import AugmentationConfig
from motioncurator.data import normalize_dataset
from motioncurator.encoder import EncoderParams
from motioncurator.pretrain import (
    DivergenceError,
    LossConfig,
    NegativeQueue,
    TrainingSchedule,
    enqueue_step,
    frame_loss,
    loss_rows_to_csv,
    pretrain,
    sequence_loss,
    total_loss,
)
from motioncurator.synthetic import SyntheticSpec, make_benchmark, make_spin_probe


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return torch.tensor(v / np.linalg.norm(v))


def queue_of(*vectors):
    q = NegativeQueue(capacity=4096)
    for v in vectors:
        q.push(unit(v))
    return q


class TestSequenceLoss:
    def test_empty_queue_is_zero(self):
        f1, f2 = unit([1.0, 0.0]), unit([0.6, 0.8])
        loss = sequence_loss(f1, f2, NegativeQueue(), tau=0.07)
        assert loss.item() == 0.0

    def test_orthogonal_negative_hand_value(self):
        # f1.f2 = 1, f1.neg = 0, tau = 1 -> log(1 + e^-1)
        f1 = unit([1.0, 0.0])
        loss = sequence_loss(f1, f1.clone(), queue_of([0.0, 1.0]), tau=1.0)
        assert abs(loss.item() - math.log(1 + math.exp(-1))) < 1e-6

    def test_equal_similarity_gives_log2(self):
        f1 = unit([1.0, 0.0])
        f2 = unit([0.0, 1.0])
        loss = sequence_loss(f1, f2, queue_of([0.0, 1.0]), tau=0.31)
        assert abs(loss.item() - math.log(2)) < 1e-6

    def test_matches_independent_softmax_cross_entropy(self):
        # oracle: explicit (K+1)-way softmax cross-entropy against class 0
        rng = np.random.default_rng(0)
        for _ in range(20):
            dim, k = 8, 5

            def vec():
                v = rng.normal(size=dim)
                return v / np.linalg.norm(v)

            f1, f2 = vec(), vec()
            negs = [vec() for _ in range(k)]
            tau = rng.uniform(0.05, 1.0)

            logits = np.array([f1 @ f2] + [f1 @ n for n in negs]) / tau
            shifted = np.exp(logits - logits.max())
            oracle = -math.log(shifted[0] / shifted.sum())

            loss = sequence_loss(unit(f1), unit(f2), queue_of(*negs), tau=tau)
            assert abs(loss.item() - oracle) < 1e-6

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            f1 = unit(rng.normal(size=4))
            f2 = unit(rng.normal(size=4))
            q = queue_of(*(rng.normal(size=4) for _ in range(3)))
            assert sequence_loss(f1, f2, q, tau=0.07).item() >= 0.0


class TestFrameLoss:
    def test_single_frame_similarity_one(self):
        f = unit([1.0, 0.0])
        loss = frame_loss(f.reshape(1, -1), f.reshape(1, -1), LossConfig(tau=1.0))
        assert abs(loss.item() - (-1.0)) < 1e-6

    def test_two_orthogonal_frames(self):
        # all four cross-similarities are 0 within the neighbourhood: -log 4
        a = torch.tensor([[1.0, 0.0], [1.0, 0.0]], dtype=torch.float64)
        b = torch.tensor([[0.0, 1.0], [0.0, 1.0]], dtype=torch.float64)
        loss = frame_loss(a, b, LossConfig(tau=1.0, t_nb=12))
        assert abs(loss.item() - (-math.log(4))) < 1e-6

    def test_smaller_tau_decreases_loss_for_positive_similarities(self):
        rng = np.random.default_rng(2)
        a = torch.tensor(rng.uniform(0.1, 1.0, size=(4, 3)))
        b = torch.tensor(rng.uniform(0.1, 1.0, size=(4, 3)))
        losses = [
            frame_loss(a, b, LossConfig(tau=tau)).item() for tau in (1.0, 0.5, 0.1)
        ]
        assert losses[0] > losses[1] > losses[2]

    def test_neighbourhood_is_strict_inequality(self):
        # with t_nb = 1 only |i-j| = 0 pairs count
        a = torch.eye(3, dtype=torch.float64)
        b = torch.eye(3, dtype=torch.float64)
        loss = frame_loss(a, b, LossConfig(tau=1.0, t_nb=1))
        assert abs(loss.item() - (-math.log(3 * math.e))) < 1e-6

    def test_normalized_variant_is_bounded_below_by_zero(self):
        rng = np.random.default_rng(3)
        a = torch.tensor(rng.normal(size=(6, 4)))
        b = torch.tensor(rng.normal(size=(6, 4)))
        loss = frame_loss(a, b, LossConfig(tau=0.2, normalized_frame_loss=True))
        assert loss.item() >= 0.0


class TestTotalLoss:
    def test_paper_weighting(self):
        ls = torch.tensor(0.5, dtype=torch.float64)
        lf = torch.tensor(-1.0, dtype=torch.float64)
        assert total_loss(ls, lf, omega=1.0).item() == -0.5

    def test_omega_zero_disables_frame_term(self):
        ls = torch.tensor(0.7, dtype=torch.float64)
        lf = torch.tensor(123.0, dtype=torch.float64)
        assert total_loss(ls, lf, omega=0.0).item() == 0.7

    def test_zero_case(self):
        zero = torch.tensor(0.0, dtype=torch.float64)
        assert total_loss(zero, zero, omega=1.0).item() == 0.0


class TestQueue:
    def test_fifo_eviction(self):
        q = NegativeQueue(capacity=2)
        a, b, c, d, e = (unit([1, i]) for i in range(5))
        q.push(a)
        q.push(b)
        enqueue_step(q, c, d, e)
        stacked = q.as_tensor()
        torch.testing.assert_close(stacked[0], d)
        torch.testing.assert_close(stacked[1], e)

    def test_append_order(self):
        q = NegativeQueue(capacity=10)
        fr, f1, f2 = unit([1, 0]), unit([0, 1]), unit([1, 1])
        enqueue_step(q, fr, f1, f2)
        assert len(q) == 3
        stacked = q.as_tensor()
        torch.testing.assert_close(stacked[0], fr)
        torch.testing.assert_close(stacked[1], f1)
        torch.testing.assert_close(stacked[2], f2)

    @settings(max_examples=25, deadline=None)
    @given(capacity=st.integers(0, 17), steps=st.integers(1, 15))
    def test_contents_are_exactly_last_k_enqueued(self, capacity, steps):
        q = NegativeQueue(capacity=capacity)
        history = []
        counter = 0
        for _ in range(steps):
            triple = []
            for _ in range(3):
                counter += 1
                triple.append(unit([1.0, float(counter)]))
            history.extend(triple)
            enqueue_step(q, *triple)
            assert len(q) <= capacity
        expected = history[-capacity:] if capacity else []
        got = q.as_tensor()
        assert len(q) == len(expected)
        if expected:
            torch.testing.assert_close(got, torch.stack(expected))

    def test_zero_capacity_stays_empty(self):
        q = NegativeQueue(capacity=0)
        enqueue_step(q, unit([1, 0]), unit([0, 1]), unit([1, 1]))
        assert len(q) == 0 and q.as_tensor() is None


def test_total_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    f1v = rng.normal(size=6)
    f1v /= np.linalg.norm(f1v)
    f2 = unit(rng.normal(size=6))
    frames2 = torch.tensor(rng.normal(size=(3, 6)))
    queue = queue_of(*(rng.normal(size=6) for _ in range(4)))
    cfg = LossConfig(tau=0.2, t_nb=2)

    def total_of(vec: torch.Tensor) -> torch.Tensor:
        ls = sequence_loss(vec, f2, queue, cfg.tau)
        lf = frame_loss(vec.expand(3, -1), frames2, cfg)
        return total_loss(ls, lf, cfg.omega)

    f1 = torch.tensor(f1v, requires_grad=True)
    total_of(f1).backward()
    analytic = f1.grad.numpy()

    h = 1e-6
    fd = np.empty_like(f1v)
    for i in range(len(f1v)):
        up, down = f1v.copy(), f1v.copy()
        up[i] += h
        down[i] -= h
        fd[i] = (
            total_of(torch.tensor(up)).item() - total_of(torch.tensor(down)).item()
        ) / (2 * h)
    rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(analytic), np.linalg.norm(fd))
    assert rel < 1e-4


def tiny_setup(num_sequences=6, epochs=2, seed=0, **sched_kw):
    ds, _ = make_benchmark(
        SyntheticSpec(num_sequences=num_sequences, min_frames=60, max_frames=80, seed=1)
    )
    ds = normalize_dataset(ds)
    aug = AugmentationConfig(n_ds=16, window_s=0.1, dilution=6)
    params = EncoderParams(
        num_joints=15, input_blocks=5, embed_dim=16, heads=2,
        spatial_layers=1, temporal_layers=1, feature_dim=16, max_frames=128,
    )
    sched = TrainingSchedule(epochs=epochs, lr=0.02, queue_capacity=64, seed=seed, **sched_kw)
    return ds, params, aug, sched


class TestPretrainLoop:
    def test_fixed_seed_reproduces_loss_curve(self):
        ds, params, aug, sched = tiny_setup()
        a = pretrain(ds, params, aug, LossConfig(), sched)
        b = pretrain(ds, params, aug, LossConfig(), sched)
        assert [r.total for r in a.loss_rows] == [r.total for r in b.loss_rows]

    def test_zero_queue_and_zero_omega_is_a_no_op(self):
        ds, params, aug, _ = tiny_setup()
        sched = TrainingSchedule(epochs=1, lr=0.5, queue_capacity=0, seed=0)
        res = pretrain(ds, params, aug, LossConfig(omega=0.0), sched)
        assert all(r.total == 0.0 for r in res.loss_rows)
        torch.manual_seed(sched.seed)
        from motioncurator.encoder import MotionEncoder

        fresh = MotionEncoder(params)
        for name, value in res.encoder_q.state_dict().items():
            torch.testing.assert_close(value, fresh.state_dict()[name])

    def test_loss_csv_has_one_row_per_step(self):
        ds, params, aug, sched = tiny_setup(num_sequences=4, epochs=3)
        res = pretrain(ds, params, aug, LossConfig(), sched)
        csv = loss_rows_to_csv(res.loss_rows)
        lines = csv.strip().split("\n")
        assert lines[0] == "step,sequence_loss,frame_loss,total_loss"
        assert len(lines) == 1 + 4 * 3

    def test_empty_dataset_rejected(self):
        _, params, aug, sched = tiny_setup()
        from motioncurator.data import MotionDataset

        with pytest.raises(ValueError, match="empty"):
            pretrain(
                MotionDataset(sequences=[], class_names=["a"], joint_names=["j"]),
                params, aug, LossConfig(), sched,
            )

    def test_divergence_aborts_with_diagnostics(self):
        ds, params, aug, _ = tiny_setup()
        sched = TrainingSchedule(epochs=3, lr=1e9, grad_clip=1e9, queue_capacity=64, seed=0)
        with pytest.raises(DivergenceError, match="step"):
            pretrain(ds, params, aug, LossConfig(tau=0.01), sched)

    @pytest.mark.slow
    def test_loss_decreases_over_training(self):
        ds, _ = make_benchmark(SyntheticSpec(num_sequences=20, seed=1))
        ds = normalize_dataset(ds)
        aug = AugmentationConfig(n_ds=64, window_s=0.1, dilution=6)
        params = EncoderParams(
            num_joints=15, input_blocks=5, embed_dim=32, heads=4,
            spatial_layers=2, temporal_layers=2, feature_dim=64, max_frames=512,
        )
        sched = TrainingSchedule(epochs=30, queue_capacity=1024, seed=0)
        res = pretrain(ds, params, aug, LossConfig(), sched)
        means = res.epoch_means(steps_per_epoch=ds.num_sequences)
        assert means[-1] < means[0]


@pytest.mark.slow
def test_linear_probe_separates_spin_directions():
    """Frozen features from a short pretrain must linearly separate cw/ccw."""
    from sklearn.linear_model import LogisticRegression

    from motioncurator.features import extract_features, sequence_feature_map

    ds, classes = make_spin_probe(count=32, frames=96, seed=0)
    aug = AugmentationConfig(n_ds=48, window_s=0.15, dilution=3)
    params = EncoderParams(
        num_joints=5, input_blocks=7, embed_dim=32, heads=4,
        spatial_layers=1, temporal_layers=1, feature_dim=32, max_frames=128,
    )
    sched = TrainingSchedule(epochs=30, queue_capacity=128, seed=0)
    res = pretrain(normalize_dataset(ds), params, aug, LossConfig(), sched)

    feats = sequence_feature_map(extract_features(res.encoder_q, ds, aug))
    x = np.stack([feats[seq.id] for seq in ds.sequences])
    y = np.array(classes)
    train = np.arange(len(y)) % 3 != 0  # thirds split: 16 train, 8 test
    clf = LogisticRegression(max_iter=2000).fit(x[train], y[train])
    accuracy = clf.score(x[~train], y[~train])
    assert accuracy >= 0.9, f"probe accuracy {accuracy:.2f}"
