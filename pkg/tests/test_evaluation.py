import numpy as np
import pytest

from vesselacs import evaluation
from vesselacs.errors import DataError, DimensionMismatchError
from vesselacs.evaluation import ConfusionCounts, confusion, metrics


def naive_confusion(pred, truth, fov):
    tp = fp = tn = fn = 0
    for yy in range(pred.shape[0]):
        for xx in range(pred.shape[1]):
            if not fov[yy, xx]:
                continue
            if pred[yy, xx] and truth[yy, xx]:
                tp += 1
            elif pred[yy, xx]:
                fp += 1
            elif truth[yy, xx]:
                fn += 1
            else:
                tn += 1
    return tp, fp, tn, fn


def random_fixture(seed):
    rng = np.random.default_rng(seed)
    pred = rng.random((16, 16)) < 0.3
    truth = rng.random((16, 16)) < 0.2
    fov = rng.random((16, 16)) < 0.8
    return pred, truth, fov


class TestConfusion:
    def test_perfect_prediction(self):
        _, truth, fov = random_fixture(0)
        c = confusion(truth, truth, fov)
        assert c.fp == 0 and c.fn == 0
        assert c.total == int(fov.sum())

    def test_all_background_prediction(self):
        pred = np.zeros((8, 8), dtype=bool)
        _, truth, fov = random_fixture(1)
        c = confusion(pred, truth[:8, :8], fov[:8, :8])
        assert c.tp == 0 and c.fp == 0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_naive_loop(self, seed):
        pred, truth, fov = random_fixture(seed)
        c = confusion(pred, truth, fov)
        assert (c.tp, c.fp, c.tn, c.fn) == naive_confusion(pred, truth, fov)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            confusion(np.zeros((3, 3), bool), np.zeros((4, 3), bool))

    def test_swapping_pred_truth_transposes_fp_fn(self):
        pred, truth, fov = random_fixture(2)
        a = confusion(pred, truth, fov)
        b = confusion(truth, pred, fov)
        assert (a.fp, a.fn) == (b.fn, b.fp)
        assert metrics(a).acc == metrics(b).acc

    def test_whole_image_when_fov_none(self):
        pred, truth, _ = random_fixture(3)
        c = confusion(pred, truth, None)
        assert c.total == pred.size

    def test_permutation_invariance(self):
        pred, truth, fov = random_fixture(4)
        perm = np.random.default_rng(5).permutation(16)
        a = confusion(pred, truth, fov)
        b = confusion(pred[perm], truth[perm], fov[perm])
        assert a == b


class TestMetrics:
    def test_perfect(self):
        m = metrics(ConfusionCounts(tp=10, fp=0, tn=70, fn=0))
        assert (m.sn, m.sp, m.acc) == (100.0, 100.0, 100.0)

    def test_all_background_at_one_to_seven(self):
        m = metrics(ConfusionCounts(tp=0, fp=0, tn=70, fn=10))
        assert (m.sn, m.sp, m.acc) == (0.0, 100.0, 87.5)

    def test_zero_denominator_flagged(self):
        m = metrics(ConfusionCounts(tp=0, fp=3, tn=5, fn=0))
        assert m.sn is None
        m = metrics(ConfusionCounts(tp=3, fp=0, tn=0, fn=5))
        assert m.sp is None

    def test_empty_raises(self):
        with pytest.raises(DataError):
            metrics(ConfusionCounts(0, 0, 0, 0))

    def test_acc_between_sn_and_sp(self):
        for seed in range(5):
            pred, truth, fov = random_fixture(seed + 10)
            c = confusion(pred, truth, fov)
            m = metrics(c)
            if m.sn is None or m.sp is None:
                continue
            assert min(m.sn, m.sp) - 1e-9 <= m.acc <= max(m.sn, m.sp) + 1e-9

    def test_add(self):
        a = ConfusionCounts(1, 2, 3, 4)
        b = ConfusionCounts(5, 6, 7, 8)
        assert evaluation.add(a, b) == ConfusionCounts(6, 8, 10, 12)
