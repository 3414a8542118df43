import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcuts3d import (ArgumentError, DataError, SegmentationMask, auroc,
                     confusion_counts, evaluate, jaccard,
                     misclassification_error, roc_curve)


def mask_from(flat, shape=(2, 2, 2)):
    return SegmentationMask(np.array(flat, bool).reshape(shape))


def pairwise_auroc(score, truth):
    """Oracle: Mann-Whitney probability over all (positive, negative) pairs."""
    pos = score[truth]
    neg = score[~truth]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (pos.size * neg.size)


class TestJaccard:
    def test_identical(self):
        m = mask_from([1, 0, 1, 0, 1, 0, 1, 0])
        assert jaccard(m, m) == 1.0

    def test_disjoint(self):
        assert jaccard(mask_from([1, 1, 0, 0, 0, 0, 0, 0]),
                       mask_from([0, 0, 1, 1, 0, 0, 0, 0])) == 0.0

    def test_partial_overlap(self):
        # pred solids {0,1,2,3}, truth solids {2,3,4,5} -> 2/6
        pred = mask_from([1, 1, 1, 1, 0, 0, 0, 0])
        truth = mask_from([0, 0, 1, 1, 1, 1, 0, 0])
        assert np.isclose(jaccard(pred, truth), 1 / 3)

    def test_both_empty_defined_as_one(self):
        m = mask_from([0] * 8)
        assert jaccard(m, m) == 1.0

    @settings(deadline=None, max_examples=30)
    @given(st.integers(0, 10_000), st.integers(0, 10_000))
    def test_symmetric_and_equals_count_form(self, s1, s2):
        a = SegmentationMask(np.random.default_rng(s1).random((3, 3, 3)) > 0.5)
        b = SegmentationMask(np.random.default_rng(s2).random((3, 3, 3)) > 0.5)
        assert jaccard(a, b) == jaccard(b, a)
        tp, fp, _, fn = confusion_counts(a, b)
        expect = 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)
        assert jaccard(a, b) == expect

    def test_dims_mismatch(self):
        with pytest.raises(ArgumentError):
            jaccard(mask_from([0] * 8), mask_from([0] * 12, (3, 2, 2)))


class TestMisclassificationError:
    def test_identical(self):
        m = mask_from([1, 0, 1, 0, 1, 0, 1, 0])
        assert misclassification_error(m, m) == 0.0

    def test_complementary(self):
        m = mask_from([1, 0, 1, 0, 1, 0, 1, 0])
        inv = SegmentationMask(~m.solid)
        assert misclassification_error(m, inv) == 1.0

    def test_one_wrong_of_eight(self):
        pred = mask_from([1, 0, 0, 0, 0, 0, 0, 0])
        truth = mask_from([0] * 8)
        assert misclassification_error(pred, truth) == 0.125

    def test_invariant_under_joint_complement(self):
        rng = np.random.default_rng(7)
        pred = SegmentationMask(rng.random((3, 3, 3)) > 0.4)
        truth = SegmentationMask(rng.random((3, 3, 3)) > 0.6)
        inv = misclassification_error(SegmentationMask(~pred.solid),
                                      SegmentationMask(~truth.solid))
        assert misclassification_error(pred, truth) == inv


class TestRocCurve:
    def truth(self):
        rng = np.random.default_rng(8)
        return SegmentationMask(rng.random((3, 3, 3)) > 0.5)

    def test_perfect_score_passes_through_corner(self):
        truth = self.truth()
        pts = roc_curve(truth.solid.astype(float), truth)
        assert any(np.allclose(p, (0.0, 1.0)) for p in pts)
        assert np.isclose(auroc(pts), 1.0)

    def test_inverted_score_has_zero_area(self):
        truth = self.truth()
        pts = roc_curve(1.0 - truth.solid, truth)
        assert np.isclose(auroc(pts), 0.0)

    def test_constant_score_is_chance(self):
        truth = self.truth()
        pts = roc_curve(np.full(truth.solid.shape, 0.5), truth)
        assert np.isclose(auroc(pts), 0.5)

    def test_shape_and_monotonicity(self):
        truth = self.truth()
        rng = np.random.default_rng(9)
        pts = roc_curve(rng.random(truth.solid.shape), truth, n_thresholds=64)
        assert pts.shape == (65, 2)
        assert tuple(pts[0]) == (0.0, 0.0)
        assert tuple(pts[-1]) == (1.0, 1.0)
        assert (np.diff(pts[:, 0]) >= 0).all()

    def test_single_class_truth_rejected(self):
        truth = SegmentationMask(np.ones((2, 2, 2), bool))
        with pytest.raises(DataError):
            roc_curve(np.zeros((2, 2, 2)), truth)


class TestAuroc:
    def test_matches_pairwise_oracle_small_instance(self):
        rng = np.random.default_rng(1)
        truth = SegmentationMask(rng.random((20, 1, 1)) > 0.5)
        score = rng.random((20, 1, 1))
        got = auroc(roc_curve(score, truth))
        want = pairwise_auroc(score.ravel(), truth.solid.ravel())
        assert abs(got - want) <= 1e-3

    def test_matches_pairwise_oracle_many_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(10, 500))
            truth_flat = rng.random(n) > rng.uniform(0.2, 0.8)
            if truth_flat.all() or not truth_flat.any():
                continue
            score_flat = np.round(rng.random(n), 3)  # induce ties too
            truth = SegmentationMask(truth_flat.reshape(n, 1, 1))
            # finer grid keeps the tie-bin quantization below the tolerance
            got = auroc(roc_curve(score_flat.reshape(n, 1, 1), truth,
                                  n_thresholds=2048))
            assert abs(got - pairwise_auroc(score_flat, truth_flat)) <= 1e-3

    @settings(deadline=None, max_examples=20)
    @given(st.integers(0, 10_000))
    def test_complement_sums_to_one(self, seed):
        rng = np.random.default_rng(seed)
        truth_flat = rng.random(60) > 0.5
        if truth_flat.all() or not truth_flat.any():
            return
        truth = SegmentationMask(truth_flat.reshape(60, 1, 1))
        score = rng.random((60, 1, 1))
        total = auroc(roc_curve(score, truth)) + auroc(roc_curve(1.0 - score, truth))
        assert abs(total - 1.0) <= 1 / 256


class TestEvaluate:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(12)
        truth = SegmentationMask(rng.random((4, 4, 4)) > 0.5)
        rep = evaluate(truth, truth.solid.astype(float), truth)
        assert rep.iou == 1.0 and rep.me == 0.0 and np.isclose(rep.auroc, 1.0)

    def test_inverted_prediction(self):
        rng = np.random.default_rng(13)
        truth = SegmentationMask(rng.random((4, 4, 4)) > 0.5)
        pred = SegmentationMask(~truth.solid)
        rep = evaluate(pred, None, truth)
        assert rep.iou == 0.0 and rep.me == 1.0 and rep.auroc is None

    def test_fields_consistent_with_counts(self):
        rng = np.random.default_rng(14)
        truth = SegmentationMask(rng.random((5, 5, 5)) > 0.4)
        pred = SegmentationMask(rng.random((5, 5, 5)) > 0.6)
        rep = evaluate(pred, rng.random((5, 5, 5)), truth)
        tp, fp, tn, fn = rep.counts
        assert tp + fp + tn + fn == 125
        assert rep.me == (fp + fn) / 125
        assert rep.iou == (1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn))

    def test_csv_row_format(self):
        rng = np.random.default_rng(15)
        truth = SegmentationMask(rng.random((4, 4, 4)) > 0.5)
        rep = evaluate(truth, truth.solid.astype(float), truth)
        row = rep.csv_row("vol7", scales=(2000, 4000), runtime_s=1.5)
        fields = row.split(",")
        assert fields[0] == "vol7"
        assert fields[1] == "2000;4000"
        assert float(fields[2]) == 1.0
        assert float(fields[5]) == 1.5
        assert len(fields) == len(rep.csv_header().split(","))
