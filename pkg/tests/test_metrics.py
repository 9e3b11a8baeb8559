import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linker.errors import (
    DegenerateLabels,
    LengthMismatch,
    NoPositives,
    NoPredictions,
)
from linker.metrics import (
    EvalReport,
    build_report,
    enrichment,
    export_curves,
    pr_curve,
    prevalence,
    prevalence_and_enrichment,
    rmse,
    roc_curve,
    weighted_precision,
)


# --- independent brute-force oracles ---------------------------------------


def brute_ap(scores, labels):
    pos_total = sum(labels)
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        precision = tp / (tp + fp)
        recall = tp / pos_total
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


def scored_cases(seed, n_cases, max_n=64):
    rng = np.random.default_rng(seed)
    for _ in range(n_cases):
        n = int(rng.integers(2, max_n + 1))
        # coarse quantization forces plenty of ties
        scores = np.round(rng.random(n), 1)
        labels = rng.integers(0, 2, size=n)
        if labels.sum() == 0:
            labels[int(rng.integers(0, n))] = 1
        if labels.sum() == n:
            labels[int(rng.integers(0, n))] = 0
        yield scores, labels.astype(float)


# --- frozen fixtures --------------------------------------------------------


class TestFixtures:
    def test_ap_fixture(self):
        # thresholds 0.9, 0.8, 0.3: AP = 0.5*1 + 0*(1/2) + 0.5*(2/3)
        _, ap = pr_curve([0.9, 0.8, 0.3], [1, 0, 1])
        assert ap == pytest.approx(0.5 + 0.5 * (2.0 / 3.0), abs=1e-12)
        assert round(ap, 4) == 0.8333

    def test_auc_fixture(self):
        # pairs: (0.9 vs 0.8) win, (0.3 vs 0.8) loss
        _, auc = roc_curve([0.9, 0.8, 0.3], [1, 0, 1])
        assert auc == 0.5

    def test_perfect_ranking(self):
        _, ap = pr_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        _, auc = roc_curve([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert ap == 1.0 and auc == 1.0

    def test_all_tied_scores(self):
        points, ap = pr_curve([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
        assert len(points) == 1
        assert points[0].precision == 0.5 and points[0].recall == 1.0
        assert ap == 0.5
        _, auc = roc_curve([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0])
        assert auc == 0.5  # every pair is a tie

    def test_reversed_ranking_auc_zero(self):
        _, auc = roc_curve([0.1, 0.9], [1, 0])
        assert auc == 0.0


# --- oracle equivalence -----------------------------------------------------


class TestOracleEquivalence:
    def test_ap_exact_vs_brute_force(self):
        for scores, labels in scored_cases(seed=101, n_cases=1000):
            _, ap = pr_curve(scores, labels)
            assert ap == brute_ap(list(scores), list(labels))

    def test_auc_exact_vs_pairwise(self):
        for scores, labels in scored_cases(seed=202, n_cases=1000):
            _, auc = roc_curve(scores, labels)
            assert auc == brute_auc(list(scores), list(labels))

    @given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 1)),
                    min_size=2, max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_hypothesis_integer_scores(self, pairs):
        scores = [float(s) for s, _ in pairs]
        labels = [y for _, y in pairs]
        if sum(labels) == 0 or sum(labels) == len(labels):
            return
        _, ap = pr_curve(scores, labels)
        _, auc = roc_curve(scores, labels)
        assert ap == brute_ap(scores, labels)
        assert auc == brute_auc(scores, labels)


# --- curve laws -------------------------------------------------------------


class TestCurveLaws:
    def test_pr_rightmost_point(self):
        for scores, labels in scored_cases(seed=303, n_cases=50):
            points, _ = pr_curve(scores, labels)
            last = points[-1]
            assert last.recall == 1.0
            assert last.precision == prevalence(labels)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(7)
        scores = np.round(rng.random(40), 1)
        labels = (rng.random(40) < 0.4).astype(float)
        labels[0] = 1.0
        labels[1] = 0.0
        _, ap0 = pr_curve(scores, labels)
        _, auc0 = roc_curve(scores, labels)
        for transform in (lambda s: 2.0 * s + 3.0,
                          lambda s: np.exp(s),
                          lambda s: s ** 3):
            _, ap1 = pr_curve(transform(scores), labels)
            _, auc1 = roc_curve(transform(scores), labels)
            assert ap1 == ap0
            assert auc1 == auc0

    def test_roc_endpoints(self):
        points, _ = roc_curve([0.9, 0.5, 0.5, 0.1], [1, 1, 0, 0])
        assert points[-1].fpr == 1.0 and points[-1].tpr == 1.0

    def test_ties_processed_as_one_threshold(self):
        points, _ = pr_curve([0.7, 0.7, 0.2], [1, 0, 1])
        assert len(points) == 2  # 0.7 group and 0.2 group


# --- errors -----------------------------------------------------------------


class TestErrors:
    def test_no_positives(self):
        with pytest.raises(NoPositives):
            pr_curve([0.5, 0.2], [0, 0])
        with pytest.raises(NoPositives):
            prevalence([0, 0, 0])

    def test_degenerate_roc(self):
        with pytest.raises(DegenerateLabels):
            roc_curve([0.5, 0.2], [1, 1])
        with pytest.raises(DegenerateLabels):
            roc_curve([0.5, 0.2], [0, 0])

    def test_non_binary_labels(self):
        with pytest.raises(DegenerateLabels):
            pr_curve([0.5, 0.2], [1, 0.3])

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            pr_curve([0.5, 0.2, 0.1], [1, 0])
        with pytest.raises(LengthMismatch):
            rmse([1.0, 2.0], [1.0])

    def test_no_predictions(self):
        with pytest.raises(NoPredictions):
            weighted_precision([0, 0, 0], [0.5, 0.2, 0.9])


# --- scalar metrics ---------------------------------------------------------


class TestScalars:
    def test_weighted_precision_brute(self):
        preds = [1, 0, 1, 1]
        smooth = [0.9, 0.4, 0.1, 0.6]
        expected = (0.9 + 0.1 + 0.6) / 3.0
        assert weighted_precision(preds, smooth) == pytest.approx(expected)

    def test_weighted_precision_rejects_soft_preds(self):
        with pytest.raises(DegenerateLabels):
            weighted_precision([0.7, 0.2], [1.0, 0.0])

    def test_prevalence(self):
        assert prevalence([1, 0, 0, 1]) == 0.5

    def test_enrichment_linear_scale(self):
        # known anchor: prevalence 0.000613 at 174x enrichment gives
        # precision near 0.1067
        prev = 0.000613
        assert enrichment(0.000613 * 174.0, prev) == pytest.approx(174.0)
        assert prev * 174.0 == pytest.approx(0.1067, abs=5e-5)

    def test_prevalence_and_enrichment(self):
        prev, enr = prevalence_and_enrichment([0.5, 0.25], [1, 0, 0, 0])
        assert prev == 0.25
        assert enr == [2.0, 1.0]

    def test_rmse(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))

    def test_random_scores_ap_near_prevalence(self):
        rng = np.random.default_rng(11)
        n = 20000
        labels = (rng.random(n) < 0.0243).astype(float)
        scores = rng.random(n)
        _, ap = pr_curve(scores, labels)
        assert abs(ap - labels.mean()) < 0.01


# --- report / export --------------------------------------------------------


class TestReport:
    def test_build_report_fields(self):
        scores = [0.9, 0.8, 0.3]
        labels = [1, 0, 1]
        smooth = [0.8, 0.3, 0.9]
        report = build_report(scores, labels, smooth_labels=smooth,
                              thresholds=(0.5,),
                              affinity_pairs=([1.0, 2.0], [1.5, 2.5]))
        assert report.ap == pytest.approx(0.8333, abs=5e-5)
        assert report.roc_auc == 0.5
        assert report.prevalence == pytest.approx(2.0 / 3.0)
        assert report.enrichment_at_recall[-1][1] == pytest.approx(1.0)
        t, wp = report.weighted_precision_at[0]
        assert t == 0.5
        assert wp == pytest.approx((0.8 + 0.3) / 2.0)
        assert report.rmse == pytest.approx(0.5)

    def test_report_json_round_trip(self):
        report = EvalReport(ap=0.5, roc_auc=0.7, prevalence=0.1)
        payload = json.loads(report.to_json())
        assert payload["ap"] == 0.5
        assert "rmse" not in payload

    def test_export_curves(self, tmp_path):
        paths = export_curves([0.9, 0.8, 0.3], [1, 0, 1], tmp_path,
                              smooth_labels=[0.9, 0.1, 0.8],
                              thresholds=(0.5,))
        names = {p.name for p in paths}
        assert names == {"pr_curve.csv", "roc_curve.csv", "summary.json"}
        pr_text = (tmp_path / "pr_curve.csv").read_text()
        assert pr_text.splitlines()[0] == "threshold,precision,recall"
        assert len(pr_text.splitlines()) == 4  # header + 3 thresholds
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["roc_auc"] == 0.5
