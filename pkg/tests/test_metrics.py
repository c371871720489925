import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circgpr.errors import ParameterError
from circgpr.metrics import MaskPair, ScalarPair, histogram, iou, mae_mre, mse_image


# ---------------------------------------------------------------------------
# brute-force oracles (plain Python, no numpy reductions)
# ---------------------------------------------------------------------------

def iou_brute(a, b, thr=0.5):
    inter = union = 0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            x = a[i, j] >= thr
            y = b[i, j] >= thr
            inter += x and y
            union += x or y
    return 1.0 if union == 0 else inter / union


def mse_brute(a, b):
    total = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            total += (float(a[i, j]) - float(b[i, j])) ** 2
    return total / (a.shape[0] * a.shape[1])


def test_mae_mre_examples():
    assert mae_mre([ScalarPair(10, 10)]) == (0.0, 0.0)
    mae, mre = mae_mre([ScalarPair(10, 9)])
    assert mae == pytest.approx(1.0)
    assert mre == pytest.approx(0.10)
    mae, mre = mae_mre([ScalarPair(4, 5), ScalarPair(8, 6)])
    assert mae == pytest.approx(1.5)
    assert mre == pytest.approx(0.25)


def test_mae_mre_zero_truth_rejected():
    with pytest.raises(ParameterError):
        mae_mre([ScalarPair(0.0, 1.0)])


@given(st.permutations(range(6)))
@settings(max_examples=30, deadline=None)
def test_mae_mre_permutation_invariant(perm):
    pairs = [ScalarPair(float(i + 1), float(2 * i + 1)) for i in range(6)]
    shuffled = [pairs[i] for i in perm]
    assert mae_mre(shuffled) == pytest.approx(mae_mre(pairs))


def test_iou_examples():
    a = np.zeros((4, 4))
    a[1, 1] = a[1, 2] = 1.0
    b = np.zeros((4, 4))
    b[1, 2] = b[1, 3] = 1.0
    assert iou(MaskPair(a, a)) == 1.0
    assert iou(MaskPair(a, np.roll(a, 2, axis=0))) == 0.0
    assert iou(MaskPair(a, b)) == pytest.approx(1 / 3)
    empty = np.zeros((4, 4))
    assert iou(MaskPair(empty, empty)) == 1.0


def test_iou_symmetry():
    rng = np.random.default_rng(1)
    a = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
    b = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
    assert iou(MaskPair(a, b)) == iou(MaskPair(b, a))


def test_mse_examples():
    a = np.zeros((2, 2))
    assert mse_image(MaskPair(a, a)) == 0.0
    assert mse_image(MaskPair(np.ones((3, 3)), np.zeros((3, 3)))) == 1.0
    b = a.copy()
    b[0, 1] = 0.5
    assert mse_image(MaskPair(a, b)) == pytest.approx(0.0625)


def test_metrics_match_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(100):
        a = rng.uniform(size=(6, 7))
        b = rng.uniform(size=(6, 7))
        m = MaskPair(a, b)
        assert abs(iou(m) - iou_brute(a, b)) < 1e-12
        assert abs(mse_image(m) - mse_brute(a, b)) < 1e-12


def test_histogram_examples():
    assert histogram([], [0, 1, 2]).tolist() == [0, 0]
    assert histogram([2.5, 3.0, 3.4], [2.5, 3.0, 3.5]).tolist() == [1, 2]
    # left edges belong to their bin, the final edge does not
    assert histogram([1.0], [1.0, 2.0]).tolist() == [1]
    assert histogram([2.0], [1.0, 2.0]).tolist() == [0]


def test_histogram_rejects_bad_edges():
    with pytest.raises(ParameterError):
        histogram([1.0], [0.0, 0.0, 1.0])
