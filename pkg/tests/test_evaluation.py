import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdsense.evaluation import (ConfusionCounts, MlpBaseline, choose_threshold,
                                f1_score, roc_curve, rolling_f1)


def brute_force_roc(scores, labels):
    """Exhaustive threshold enumeration oracle (prediction: score >= t)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    n_pos, n_neg = labels.sum(), (~labels).sum()
    points = [(np.inf, 0.0, 0.0)]
    for t in sorted(set(scores), reverse=True):
        pred = scores >= t
        tpr = (pred & labels).sum() / n_pos
        fpr = (pred & ~labels).sum() / n_neg
        points.append((t, fpr, tpr))
    fprs = [p[1] for p in points]
    tprs = [p[2] for p in points]
    auc = np.trapezoid(tprs, fprs)
    return points, float(auc)


class TestRoc:
    def test_perfect_separation(self):
        scores = [0.9, 0.8, 0.2, 0.1]
        labels = [True, True, False, False]
        assert roc_curve(scores, labels).auc == 1.0

    def test_identical_scores_give_half(self):
        curve = roc_curve([0.5] * 6, [True, False] * 3)
        assert curve.auc == pytest.approx(0.5)

    def test_four_sample_hand_case(self):
        curve = roc_curve([0.9, 0.8, 0.7, 0.3], [True, False, True, False])
        assert curve.auc == pytest.approx(0.75)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            roc_curve([0.1, 0.2], [True, True])

    def test_endpoints_present(self):
        curve = roc_curve([0.9, 0.8, 0.7, 0.3], [True, False, True, False])
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(4, 51))
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            scores = np.round(rng.uniform(-1, 1, n), 2)  # force some ties
            curve = roc_curve(scores, labels)
            points, auc = brute_force_roc(scores, labels)
            assert curve.auc == pytest.approx(auc, abs=1e-12)
            np.testing.assert_allclose(curve.fpr, [p[1] for p in points], atol=1e-12)
            np.testing.assert_allclose(curve.tpr, [p[2] for p in points], atol=1e-12)

    def test_auc_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(1)
        scores = rng.uniform(-1, 1, 40)
        labels = rng.random(40) < 0.4
        base = roc_curve(scores, labels).auc
        for transform in (lambda s: 3 * s + 2, np.tanh, lambda s: np.exp(s)):
            assert roc_curve(transform(scores), labels).auc == pytest.approx(base)

    def test_monotone_rates_as_threshold_decreases(self):
        rng = np.random.default_rng(2)
        curve = roc_curve(rng.uniform(0, 1, 50), rng.random(50) < 0.5)
        assert np.all(np.diff(curve.fpr) >= 0)
        assert np.all(np.diff(curve.tpr) >= 0)

    def test_csv_output(self, tmp_path):
        curve = roc_curve([0.9, 0.1], [True, False])
        path = tmp_path / "roc.csv"
        curve.write_csv(path, config_hash="abcd")
        assert path.read_text().startswith("# config_hash=abcd")


class TestChooseThreshold:
    def curve(self):
        return roc_curve([0.9, 0.8, 0.7, 0.3], [True, False, True, False])

    def test_budget_one_ties_resolve_to_largest_threshold(self):
        # tpr = 1.0 is reached at 0.7 and 0.3; the conservative 0.7 wins
        assert choose_threshold(self.curve(), 1.0) == pytest.approx(0.7)

    def test_budget_zero_on_separable(self):
        curve = roc_curve([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
        t = choose_threshold(curve, 0.0)
        assert t == pytest.approx(0.8)  # largest threshold reaching tpr=1 at fpr=0

    def test_hand_case(self):
        assert choose_threshold(self.curve(), 0.5) == pytest.approx(0.7)

    def test_never_violates_budget(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(6, 40))
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                continue
            scores = rng.uniform(-1, 1, n)
            curve = roc_curve(scores, labels)
            for target in (0.0, 0.1, 0.35, 1.0):
                t = choose_threshold(curve, target)
                fpr = np.mean(scores[~labels] >= t)
                assert fpr <= target + 1e-12


class TestF1:
    def test_perfect(self):
        assert f1_score(ConfusionCounts(tp=10, fp=0, tn=5, fn=0)) == 1.0

    def test_zero_tp(self):
        assert f1_score(ConfusionCounts(tp=0, fp=0, tn=5, fn=3)) == 0.0

    def test_arithmetic(self):
        assert f1_score(ConfusionCounts(tp=8, fp=2, fn=4)) == pytest.approx(8 / 11)

    def test_undefined(self):
        with pytest.raises(ValueError):
            f1_score(ConfusionCounts(tp=0, fp=0, tn=9, fn=0))

    @given(st.integers(1, 50), st.integers(0, 50), st.integers(0, 50))
    @settings(max_examples=100, deadline=None)
    def test_fp_fn_swap_invariance_only_when_equal(self, tp, fp, fn):
        a = f1_score(ConfusionCounts(tp=tp, fp=fp, fn=fn))
        b = f1_score(ConfusionCounts(tp=tp, fp=fn, fn=fp))
        assert (a == b) == True  # denominators match: 2tp + fp + fn is symmetric
        # the interesting asymmetric pair: precision vs recall differ unless fp == fn
        if fp != fn:
            precision = tp / (tp + fp)
            recall = tp / (tp + fn)
            assert precision != pytest.approx(recall) or (fp == fn)

    def test_counts_validated(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1, fp=0, tn=0, fn=0)

    def test_from_predictions(self):
        c = ConfusionCounts.from_predictions([True, True, False, False],
                                             [True, False, True, False])
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)


class TestRollingF1:
    def test_window(self):
        preds = [True] * 10
        labels = [True] * 5 + [False] * 5
        series = rolling_f1(preds, labels, window=5)
        assert series[4][1] == 1.0
        assert series[9][1] == 0.0


class TestMlpBaseline:
    def test_separable_reaches_perfect_f1(self):
        rng = np.random.default_rng(4)
        x_pos = rng.normal(2, 0.2, (30, 4))
        x_neg = rng.normal(-2, 0.2, (30, 4))
        features = np.vstack([x_pos, x_neg])
        labels = np.array([True] * 30 + [False] * 30)
        baseline = MlpBaseline(hidden_dim=16, epochs=500, seed=0).fit(features, labels)
        preds = baseline.predict(features)
        c = ConfusionCounts.from_predictions(preds, labels)
        assert f1_score(c) == 1.0
        scores = baseline.scores(features)
        assert scores.shape == (60,)
        assert np.all((scores >= 0) & (scores <= 1))
