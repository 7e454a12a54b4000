import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmcm.errors import EmptyBatch, NoPositives, UndefinedRatio
from hmcm.metrics import EvalBatch, au_avg_prc, emr, hamming_accuracy, pr_curve, write_pr_csv


def brute_force_auprc(scores, truths):
    """Count TP/FP at every distinct threshold with explicit loops."""
    s = [float(v) for v in np.ravel(scores)]
    y = [bool(v) for v in np.ravel(truths)]
    positives = sum(y)
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(s), reverse=True):
        tp = sum(1 for v, lab in zip(s, y) if v >= t and lab)
        fp = sum(1 for v, lab in zip(s, y) if v >= t and not lab)
        recall = tp / positives
        area += (recall - prev_recall) * (tp / (tp + fp))
        prev_recall = recall
    return area


# a=0, b=1, c=2
PAIRED = EvalBatch.from_sets([{0, 1}, {0, 2}], [{0, 1}, {0}], label_count=3)


class TestSetMetrics:
    def test_paired_example(self):
        assert emr(PAIRED) == 0.5
        assert hamming_accuracy(PAIRED) == 0.75

    def test_identical(self):
        b = EvalBatch.from_sets([{0, 1}, {2}], [{0, 1}, {2}], 3)
        assert emr(b) == 1.0 and hamming_accuracy(b) == 1.0

    def test_disjoint(self):
        b = EvalBatch.from_sets([{0}, {1}], [{1}, {2}], 3)
        assert emr(b) == 0.0 and hamming_accuracy(b) == 0.0

    def test_one_third(self):
        b = EvalBatch.from_sets([{0, 1, 2}], [{0}], 3)
        assert hamming_accuracy(b) == pytest.approx(1 / 3, abs=1e-15)

    def test_empty_batch(self):
        b = EvalBatch(np.zeros((0, 3)), np.zeros((0, 3)))
        with pytest.raises(EmptyBatch):
            emr(b)
        with pytest.raises(EmptyBatch):
            hamming_accuracy(b)

    def test_undefined_ratio(self):
        b = EvalBatch.from_sets([set(), {0}], [set(), {0}], 3)
        with pytest.raises(UndefinedRatio):
            hamming_accuracy(b)


class TestPRCurve:
    def test_two_point(self):
        b = EvalBatch([[1, 0]], scores=[[0.9, 0.1]])
        pts = pr_curve(b)
        assert [(p.threshold, p.precision, p.recall) for p in pts] == [(0.9, 1.0, 1.0), (0.1, 0.5, 1.0)]
        assert au_avg_prc(b) == 1.0

    def test_single_positive(self):
        pts = pr_curve(EvalBatch([[1]], scores=[[0.7]]))
        assert [(p.precision, p.recall) for p in pts] == [(1.0, 1.0)]

    def test_perfect_ranking(self, rng):
        y = rng.random((20, 5)) < 0.4
        y[0, 0] = True
        s = np.where(y, rng.uniform(0.6, 1.0, y.shape), rng.uniform(0.0, 0.5, y.shape))
        b = EvalBatch(y, scores=s)
        assert any(p.precision == 1.0 and p.recall == 1.0 for p in pr_curve(b))
        assert au_avg_prc(b) == 1.0

    def test_no_positives(self):
        with pytest.raises(NoPositives):
            au_avg_prc(EvalBatch([[0, 0]], scores=[[0.3, 0.2]]))

    def test_ties_grouped(self):
        b = EvalBatch([[1, 0, 1, 0]], scores=[[0.5, 0.5, 0.2, 0.2]])
        pts = pr_curve(b)
        assert [p.threshold for p in pts] == [0.5, 0.2]
        assert au_avg_prc(b) == pytest.approx(0.5 * 0.5 + 0.5 * 0.5)

    def test_oracle_random(self, rng):
        for _ in range(100):
            n_lab, n_samp = int(rng.integers(1, 6)), int(rng.integers(1, 21))
            y = rng.random((n_samp, n_lab)) < 0.4
            if not y.any():
                y[0, 0] = True
            # coarse scores so ties are common
            s = rng.integers(0, 10, y.shape) / 10.0
            assert au_avg_prc(EvalBatch(y, scores=s)) == pytest.approx(brute_force_auprc(s, y), abs=1e-9)

    def test_csv(self, tmp_path):
        p = tmp_path / "pr.csv"
        write_pr_csv(p, EvalBatch([[1, 0]], scores=[[0.9, 0.1]]))
        assert p.read_text().splitlines() == ["threshold,precision,recall", "0.9,1.0,1.0", "0.1,0.5,1.0"]


@st.composite
def batches(draw):
    n_samp = draw(st.integers(1, 15))
    n_lab = draw(st.integers(1, 6))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    y = rng.random((n_samp, n_lab)) < 0.5
    z = rng.random((n_samp, n_lab)) < 0.5
    y[:, 0] = True  # keeps every union nonempty and at least one positive
    s = rng.integers(0, 6, (n_samp, n_lab)) / 5.0
    return y, z, s


class TestProperties:
    @given(batches())
    def test_bounds_and_ordering(self, b):
        y, z, s = b
        batch = EvalBatch(y, z, s)
        e, h, a = emr(batch), hamming_accuracy(batch), au_avg_prc(batch)
        assert 0.0 <= e <= h <= 1.0
        assert 0.0 <= a <= 1.0

    @given(batches(), st.integers(0, 1000))
    def test_permutation_invariance(self, b, seed):
        y, z, s = b
        perm = np.random.default_rng(seed).permutation(len(y))
        b1, b2 = EvalBatch(y, z, s), EvalBatch(y[perm], z[perm], s[perm])
        assert emr(b1) == emr(b2)
        assert hamming_accuracy(b1) == pytest.approx(hamming_accuracy(b2), abs=1e-15)
        assert au_avg_prc(b1) == pytest.approx(au_avg_prc(b2), abs=1e-15)

    @given(batches())
    def test_monotone_transform_invariance(self, b):
        y, z, s = b
        base = au_avg_prc(EvalBatch(y, z, s))
        assert au_avg_prc(EvalBatch(y, z, np.exp(3 * s) - 7)) == pytest.approx(base, abs=1e-15)

    @settings(max_examples=50)
    @given(batches())
    def test_recall_nondecreasing(self, b):
        y, _, s = b
        r = [p.recall for p in pr_curve(EvalBatch(y, scores=s))]
        assert all(a <= b for a, b in zip(r, r[1:]))
        assert r[-1] == 1.0
