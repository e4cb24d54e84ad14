import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmrfcg.evaluation import ConfusionCounts, EmptyClassWarning, confusion, dice, match_and_report
from hmrfcg.grid import LatticeShape
from hmrfcg.model import Labeling


def lab(values, k=None):
    arr = np.asarray(values).reshape(1, -1)
    return Labeling.from_array(arr, k)


def test_confusion_identity():
    x = lab([1, 2, 2, 3])
    assert confusion(x, x, (2, 2)) == ConfusionCounts(2, 0, 0)


def test_confusion_disjoint():
    assert confusion(lab([1, 1, 2, 2]), lab([2, 2, 1, 1]), (1, 1)).tp == 0


def test_confusion_masks():
    # pred mask {1,1,0,0}, truth mask {1,0,1,0}
    c = confusion(lab([1, 1, 2, 2]), lab([1, 2, 1, 2]), (1, 1))
    assert (c.tp, c.fp, c.fn) == (1, 1, 1)


def test_confusion_shape_mismatch():
    a = Labeling(LatticeShape((2, 2)), [1, 1, 2, 2], 2)
    b = Labeling(LatticeShape((1, 4)), [1, 1, 2, 2], 2)
    with pytest.raises(ValueError):
        confusion(a, b, (1, 1))


@pytest.mark.parametrize("counts,expected", [
    (ConfusionCounts(3, 1, 1), 0.75),
    (ConfusionCounts(7, 0, 0), 1.0),
    (ConfusionCounts(0, 2, 5), 0.0),
])
def test_dice_values(counts, expected):
    assert dice(counts) == expected


def test_dice_empty_vs_empty():
    with pytest.warns(EmptyClassWarning):
        assert dice(ConfusionCounts(0, 0, 0)) == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(1, 3)), min_size=1, max_size=40))
def test_dice_symmetric_and_bounded(pairs):
    p = lab([a for a, _ in pairs], 3)
    t = lab([b for _, b in pairs], 3)
    for pc in (1, 2, 3):
        for tc in (1, 2, 3):
            fwd = confusion(p, t, (pc, tc))
            if 2 * fwd.tp + fwd.fp + fwd.fn == 0:
                continue
            back = confusion(t, p, (tc, pc))
            assert dice(fwd) == dice(back)
            assert 0.0 <= dice(fwd) <= 1.0


def test_report_identity():
    x = lab([1, 1, 2, 3, 3, 3])
    r = match_and_report(x, x)
    assert r.per_class == {1: 1.0, 2: 1.0, 3: 1.0}
    assert r.matching == {1: 1, 2: 2, 3: 3}
    assert r.mean == 1.0


def test_report_absorbs_permutation():
    truth = lab([1, 1, 2, 2, 3, 3])
    pred = lab([3, 3, 1, 1, 2, 2])
    r = match_and_report(pred, truth)
    assert r.mean == 1.0
    assert r.matching == {3: 1, 1: 2, 2: 3}


def test_report_one_region_wrong():
    truth = np.repeat([1, 2, 3], 10)
    pred = truth.copy()
    pred[truth == 3] = 1
    r = match_and_report(lab(pred, 3), lab(truth, 3))
    # predicted class 1 now covers truth regions 1 and 3: dice 2*10/(20+10)
    assert r.per_class[1] == pytest.approx(2 / 3)
    assert r.per_class[2] == 1.0
    assert r.per_class[3] == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=8, max_size=8), st.permutations([1, 2, 3, 4]))
def test_count_conservation(labels, perm):
    truth = lab(labels, 4)
    pred = lab([perm[v - 1] for v in labels], 4)
    r = match_and_report(pred, truth)
    assert sum(c.tp + c.fn for c in r.counts.values()) == len(labels)
    assert r.mean == 1.0
