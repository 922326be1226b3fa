import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnclust.metrics import (
    ABSENT,
    adjusted_mutual_info,
    adjusted_rand_index,
    average_evaluation,
    contingency_table,
    evaluate,
    expected_mutual_information,
    format_score,
    homogeneity_completeness_v,
    mutual_information,
    parse_score,
    report_row,
    silhouette_score,
)

import oracles


class TestContingency:
    def test_diagonal(self):
        t = contingency_table([0, 0, 1, 1], [0, 0, 1, 1])
        assert t.counts.tolist() == [[2, 0], [0, 2]]

    def test_all_cells_one(self):
        t = contingency_table([0, 0, 1, 1], [0, 1, 0, 1])
        assert t.counts.tolist() == [[1, 1], [1, 1]]

    def test_marginals_conserved(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            n = int(rng.integers(1, 30))
            true = rng.integers(0, 4, n)
            pred = rng.integers(0, 4, n)
            t = contingency_table(true, pred)
            assert t.a.sum() == n == t.b.sum() == t.counts.sum()

    def test_string_labels_accepted(self):
        t = contingency_table(["flu", "flu", "acne"], [1, 0, 1])
        assert t.n == 3

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            contingency_table([0, 1], [0])


class TestHomogeneityCompletenessV:
    def test_harmonic_relation_on_published_style_values(self):
        # find a labeling pair whose homo/comp land near (.498, .514) is not
        # needed: V is a pure function of homo and comp
        homo, comp = 0.498, 0.514
        v = 2 * homo * comp / (homo + comp)
        assert v == pytest.approx(0.506, abs=5e-4)

    def test_single_cluster_prediction(self):
        t = contingency_table([0, 0, 1, 1, 2], [7, 7, 7, 7, 7])
        homo, comp, v = homogeneity_completeness_v(t)
        assert homo == 0.0
        assert comp == 1.0
        assert v == 0.0

    def test_perfect_prediction(self):
        t = contingency_table([0, 1, 2, 0], [5, 9, 2, 5])
        assert homogeneity_completeness_v(t) == (1.0, 1.0, 1.0)

    def test_single_class_truth(self):
        t = contingency_table([0, 0, 0], [0, 1, 2])
        homo, comp, _ = homogeneity_completeness_v(t)
        assert homo == 1.0  # zero-entropy convention
        assert comp == 0.0


class TestARI:
    def test_permutation_invariance_exact_one(self):
        t = contingency_table([0, 0, 1, 1, 2], [4, 4, 0, 0, 9])
        assert adjusted_rand_index(t) == pytest.approx(1.0)

    def test_crossed_pairs(self):
        t = contingency_table([0, 0, 1, 1], [0, 1, 0, 1])
        assert adjusted_rand_index(t) == pytest.approx(-0.5)

    def test_single_cluster_pred_zero(self):
        t = contingency_table([0, 0, 1, 1], [0, 0, 0, 0])
        assert adjusted_rand_index(t) == pytest.approx(0.0)


class TestAMI:
    def test_identical_is_one(self):
        t = contingency_table([0, 1, 2, 0, 1], [5, 6, 7, 5, 6])
        assert adjusted_mutual_info(t) == pytest.approx(1.0)

    def test_single_cluster_pred_zero(self):
        t = contingency_table([0, 0, 1, 1], [3, 3, 3, 3])
        assert adjusted_mutual_info(t) == pytest.approx(0.0)

    def test_montecarlo_emi_agreement(self):
        rng = np.random.default_rng(7)
        for case in range(6):
            n = int(rng.integers(5, 9))
            true = rng.integers(0, 3, n).tolist()
            pred = rng.integers(0, 3, n).tolist()
            exact = expected_mutual_information(contingency_table(true, pred))
            mc = oracles.emi_monte_carlo(true, pred, n_samples=100_000,
                                         seed=case)
            assert exact == pytest.approx(mc, abs=0.02)


class TestOracleEquivalence:
    """Library metrics against first-principles reimplementations."""

    def test_exhaustive_small_labelings(self):
        parts = oracles.partitions_up_to(5, 3)
        for true in parts:
            for pred in parts:
                t = contingency_table(true, pred)
                homo, comp, v = homogeneity_completeness_v(t)
                o_homo, o_comp, o_v = oracles.homo_comp_v_oracle(true, pred)
                assert homo == pytest.approx(o_homo, abs=1e-9)
                assert comp == pytest.approx(o_comp, abs=1e-9)
                assert v == pytest.approx(o_v, abs=1e-9)
                assert adjusted_rand_index(t) == pytest.approx(
                    oracles.ari_oracle(true, pred), abs=1e-9)
                assert mutual_information(t) == pytest.approx(
                    oracles.mi_oracle(true, pred), abs=1e-9)
                assert adjusted_mutual_info(t) == pytest.approx(
                    oracles.ami_oracle(true, pred), abs=1e-9)

    @given(st.lists(st.integers(0, 3), min_size=2, max_size=12),
           st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariance(self, true, seed):
        rng = np.random.default_rng(seed)
        pred = rng.integers(0, 4, len(true)).tolist()
        # relabel both sides through random bijections
        t_map = {v: x for v, x in zip(set(true), rng.permutation(100)[:len(set(true))])}
        p_map = {v: x for v, x in zip(set(pred), rng.permutation(100)[:len(set(pred))])}
        t1 = contingency_table(true, pred)
        t2 = contingency_table([t_map[x] for x in true],
                               [p_map[x] for x in pred])
        for fn in (adjusted_rand_index, adjusted_mutual_info):
            assert fn(t1) == pytest.approx(fn(t2), abs=1e-12)
        assert homogeneity_completeness_v(t1) \
            == pytest.approx(homogeneity_completeness_v(t2), abs=1e-12)

    @given(st.lists(st.integers(0, 2), min_size=2, max_size=10),
           st.lists(st.integers(0, 2), min_size=2, max_size=10))
    @settings(max_examples=60, deadline=None)
    def test_symmetry(self, a, b):
        n = min(len(a), len(b))
        a, b = a[:n], b[:n]
        t_ab = contingency_table(a, b)
        t_ba = contingency_table(b, a)
        assert adjusted_rand_index(t_ab) \
            == pytest.approx(adjusted_rand_index(t_ba), abs=1e-12)
        assert adjusted_mutual_info(t_ab) \
            == pytest.approx(adjusted_mutual_info(t_ba), abs=1e-12)
        assert homogeneity_completeness_v(t_ab)[2] \
            == pytest.approx(homogeneity_completeness_v(t_ba)[2], abs=1e-12)

    def test_v_between_homo_and_comp(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            n = int(rng.integers(4, 20))
            t = contingency_table(rng.integers(0, 3, n), rng.integers(0, 3, n))
            homo, comp, v = homogeneity_completeness_v(t)
            if homo > 0 and comp > 0:
                assert min(homo, comp) - 1e-12 <= v <= max(homo, comp) + 1e-12


class TestSilhouette:
    def test_absent_for_single_cluster(self):
        points = np.arange(8.0).reshape(-1, 1)
        assert silhouette_score(points, [0] * 8) is None

    def test_absent_when_every_point_alone(self):
        points = np.arange(4.0).reshape(-1, 1)
        assert silhouette_score(points, [0, 1, 2, 3]) is None

    def test_two_tight_groups(self):
        points = np.array([[0.0], [1.0], [10.0], [11.0]])
        score = silhouette_score(points, [0, 0, 1, 1])
        assert score == pytest.approx(0.8997, abs=5e-4)

    def test_coincident_clusters_not_positive(self):
        points = np.array([[0.0], [1.0], [0.0], [1.0]])
        assert silhouette_score(points, [0, 0, 1, 1]) <= 0.0

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            n = int(rng.integers(4, 15))
            points = rng.normal(size=(n, 2))
            labels = rng.integers(0, 3, n)
            got = silhouette_score(points, labels)
            want = oracles.silhouette_oracle(points, labels)
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(want, abs=1e-9)

    def test_translation_and_scale_invariance(self):
        rng = np.random.default_rng(6)
        points = rng.normal(size=(12, 3))
        labels = rng.integers(0, 3, 12)
        base = silhouette_score(points, labels)
        shifted = silhouette_score(points + 17.5, labels)
        scaled = silhouette_score(points * 42.0, labels)
        assert shifted == pytest.approx(base, abs=1e-9)
        assert scaled == pytest.approx(base, abs=1e-9)

    def test_singleton_cluster_scores_zero(self):
        points = np.array([[0.0], [0.5], [9.0]])
        score = silhouette_score(points, [0, 0, 1])
        per_point = [(0.5 - 9.0) / 9.0 * -1, 0, 0]  # just check finite mean
        assert np.isfinite(score)


class TestAverageEvaluation:
    def test_published_row_arithmetic(self):
        avg, defined = average_evaluation(.498, .514, .506, .000, .002, .008)
        assert defined
        assert avg == pytest.approx(0.2547, abs=5e-5)

    def test_second_published_row(self):
        avg, _ = average_evaluation(.567, .580, .574, .015, .057, .041)
        assert avg == pytest.approx(0.3057, abs=5e-5)

    def test_all_zero(self):
        avg, defined = average_evaluation(0, 0, 0, 0, 0, 0.0)
        assert avg == 0.0 and defined

    def test_absent_silhouette_averages_five(self):
        avg, defined = average_evaluation(0.0, 1.0, 0.0, 0.0, 0.0, None)
        assert not defined
        assert avg == pytest.approx(0.2)


class TestEvaluateAndFormat:
    def test_degenerate_row_shape(self):
        # one predicted cluster against a multi-class truth
        points = np.array([[0.0], [1.0], [2.0], [3.0]])
        report = evaluate([0, 0, 1, 1], [0, 0, 0, 0], points)
        assert report.homo == pytest.approx(0.0)
        assert report.comp == pytest.approx(1.0)
        assert report.v_measure == pytest.approx(0.0)
        assert report.ari == pytest.approx(0.0)
        assert report.ami == pytest.approx(0.0)
        assert report.silhouette is None and not report.silhouette_defined
        assert report_row(report)[:6] \
            == [".000", "1.000", ".000", ".000", ".000", "----"]

    def test_format_score(self):
        assert format_score(0.498) == ".498"
        assert format_score(1.0) == "1.000"
        assert format_score(-0.06) == "-.060"
        assert format_score(-0.00001) == "0.000" or format_score(-0.00001) == ".000"
        assert format_score(None) == ABSENT

    def test_parse_roundtrip(self):
        for value in (0.498, 1.0, -0.06, 0.0):
            assert parse_score(format_score(value)) \
                == pytest.approx(value, abs=5e-4)
        assert parse_score(ABSENT) is None
