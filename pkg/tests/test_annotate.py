"""Per-frame annotator training, prediction, and the F1 metrics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from motioncurator.annotate import (
    AnnotatorConfig,
    FrameAnnotator,
    evaluate,
    predict,
    predict_all,
    train_annotator,
)
from motioncurator.data import LabelMatrix


def mat(seq_id, rows):
    return LabelMatrix(sequence_id=seq_id, labels=np.array(rows, dtype=np.uint8))


def separable_set(n_frames=400, dim=8, seed=0):
    """Two linearly separable classes: sign of the first two feature dims."""
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n_frames, dim))
    labels = np.stack([feats[:, 0] > 0, feats[:, 1] > 0], axis=1).astype(np.uint8)
    return {"s": feats}, {"s": mat("s", labels)}


class TestTrainAnnotator:
    def test_learns_linearly_separable_labels(self):
        feats, labels = separable_set()
        ann = train_annotator(feats, labels, AnnotatorConfig(epochs=60), seed=0)
        preds = predict(ann, feats["s"], "s")
        report = evaluate([preds], [labels["s"]])
        assert report.micro_f1 >= 0.99

    def test_zero_epochs_predicts_at_chance(self):
        feats, labels = separable_set(seed=1)
        ann = train_annotator(feats, labels, AnnotatorConfig(epochs=0), seed=0)
        preds = predict(ann, feats["s"], "s")
        rate = preds.labels.mean()
        assert 0.05 < rate < 0.95  # untrained: neither all-0 nor all-1

    def test_dead_class_warned_and_masked(self):
        rng = np.random.default_rng(2)
        feats = {"s": rng.normal(size=(50, 4))}
        labels = {"s": mat("s", np.stack([np.ones(50), np.zeros(50)], axis=1))}
        with pytest.warns(UserWarning, match="no positive"):
            ann = train_annotator(feats, labels, AnnotatorConfig(epochs=5), seed=0)
        assert ann.dead_classes == [1]
        preds = predict(ann, feats["s"], "s")
        assert not preds.labels[:, 1].any()

    def test_length_mismatch_names_sequence(self):
        feats = {"bad": np.zeros((5, 4))}
        labels = {"bad": mat("bad", np.zeros((6, 2)))}
        with pytest.raises(ValueError, match="bad"):
            train_annotator(feats, labels, AnnotatorConfig(epochs=1))

    def test_deterministic_per_seed(self):
        feats, labels = separable_set(seed=3)
        a = train_annotator(feats, labels, AnnotatorConfig(epochs=5), seed=9)
        b = train_annotator(feats, labels, AnnotatorConfig(epochs=5), seed=9)
        pa = predict(a, feats["s"], "s")
        pb = predict(b, feats["s"], "s")
        assert np.array_equal(pa.labels, pb.labels)

    def test_records_wall_clock(self):
        feats, labels = separable_set()
        ann = train_annotator(feats, labels, AnnotatorConfig(epochs=2), seed=0)
        assert ann.train_seconds > 0


class TestPredict:
    def _fixed_annotator(self, scores_row):
        class Net:
            def __call__(self, x):
                import torch

                logits = torch.logit(torch.tensor(scores_row, dtype=torch.float32))
                return logits.expand(x.shape[0], -1)

            def eval(self):
                return self

        return FrameAnnotator(Net(), len(scores_row), AnnotatorConfig(), [], 0.0)

    def test_threshold_rule(self):
        ann = self._fixed_annotator([0.9, 0.2])
        out = predict(ann, np.zeros((1, 3)), "s", threshold=0.5)
        assert out.labels.tolist() == [[1, 0]]

    def test_threshold_zero_epsilon_marks_everything(self):
        ann = self._fixed_annotator([0.9, 0.2])
        out = predict(ann, np.zeros((2, 3)), "s", threshold=1e-9)
        assert out.labels.tolist() == [[1, 1], [1, 1]]

    def test_identical_frames_identical_rows(self):
        feats, labels = separable_set(seed=4)
        ann = train_annotator(feats, labels, AnnotatorConfig(epochs=3), seed=0)
        same = np.tile(feats["s"][0], (4, 1))
        out = predict(ann, same, "s")
        assert (out.labels == out.labels[0]).all()

    def test_predict_all_keys(self):
        feats, labels = separable_set(seed=5)
        ann = train_annotator(feats, labels, AnnotatorConfig(epochs=2), seed=0)
        out = predict_all(ann, {"a": feats["s"], "b": feats["s"]})
        assert set(out) == {"a", "b"}
        assert out["a"].sequence_id == "a"


class TestEvaluate:
    def test_hand_counted_micro_f1(self):
        truth = [mat("s", [[1, 0], [1, 1]])]
        pred = [mat("s", [[1, 1], [0, 1]])]
        report = evaluate(pred, truth)
        assert abs(report.micro_f1 - 4 / 6) < 1e-12
        assert report.true_positive == [1, 1]
        assert report.false_positive == [0, 1]
        assert report.false_negative == [1, 0]

    def test_perfect_prediction(self):
        rows = [[1, 0, 1], [0, 1, 0]]
        report = evaluate([mat("s", rows)], [mat("s", rows)])
        assert report.micro_f1 == 1.0
        assert report.macro_f1 == 1.0

    def test_complement_scores_zero(self):
        truth = mat("s", [[1, 0], [0, 1]])
        pred = mat("s", 1 - truth.labels)
        assert evaluate([pred], [truth]).micro_f1 == 0.0

    def test_empty_class_scores_zero_in_macro(self):
        truth = [mat("s", [[1, 0], [1, 0]])]
        pred = [mat("s", [[1, 0], [1, 0]])]
        report = evaluate(pred, truth)
        assert report.per_class_f1 == [1.0, 0.0]
        assert report.macro_f1 == 0.5

    def test_single_class_micro_equals_per_class(self):
        truth = [mat("s", [[1], [0], [1]])]
        pred = [mat("s", [[1], [1], [0]])]
        report = evaluate(pred, truth)
        assert abs(report.micro_f1 - report.per_class_f1[0]) < 1e-12

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            evaluate([mat("s", [[1, 0]])], [mat("s", [[1, 0], [0, 1]])])

    def test_id_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            evaluate([mat("a", [[1]])], [mat("b", [[1]])])

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 9999))
    def test_invariant_to_order_and_class_permutation(self, seed):
        rng = np.random.default_rng(seed)
        n_seq, m = 3, 4
        truths, preds = [], []
        for i in range(n_seq):
            t = rng.integers(0, 2, size=(5, m)).astype(np.uint8)
            p = rng.integers(0, 2, size=(5, m)).astype(np.uint8)
            truths.append(mat(f"s{i}", t))
            preds.append(mat(f"s{i}", p))
        base = evaluate(preds, truths)

        perm = rng.permutation(m)
        shuffled_t = [mat(t.sequence_id, t.labels[:, perm]) for t in truths]
        shuffled_p = [mat(p.sequence_id, p.labels[:, perm]) for p in preds]
        swapped = evaluate(list(reversed(shuffled_p)), shuffled_t)
        assert abs(base.micro_f1 - swapped.micro_f1) < 1e-12
        assert abs(base.macro_f1 - swapped.macro_f1) < 1e-12
        assert 0.0 <= base.micro_f1 <= 1.0

    def test_report_consistent_with_own_counts(self):
        truth = [mat("s", [[1, 0], [1, 1], [0, 1]])]
        pred = [mat("s", [[1, 1], [1, 0], [0, 1]])]
        r = evaluate(pred, truth)
        tp, fp, fn = sum(r.true_positive), sum(r.false_positive), sum(r.false_negative)
        assert abs(r.micro_f1 - 2 * tp / (2 * tp + fp + fn)) < 1e-12


@pytest.mark.slow
def test_retraining_speed_at_scale():
    """10k frames x 128 dims retrains in well under 30 s."""
    rng = np.random.default_rng(0)
    feats = {"s": rng.normal(size=(10_000, 128)).astype(np.float32)}
    labels = {"s": mat("s", rng.integers(0, 2, size=(10_000, 8)))}
    ann = train_annotator(feats, labels, AnnotatorConfig(epochs=50), seed=0)
    assert ann.train_seconds < 30.0, f"took {ann.train_seconds:.1f}s"