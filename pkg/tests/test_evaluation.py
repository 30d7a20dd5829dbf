import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parcelingam.exceptions import IdMismatch
from parcelingam.ordering import CausalOrderingMatrix
from parcelingam.evaluation import (
    ScoreReport,
    f_measure,
    max_recall,
    mean_report,
    oracle_result,
    score_ordering,
    score_strengths,
)
from parcelingam.simgen import (
    SemSpec,
    builtin_network,
    confounded_4var,
    generate,
    random_dag,
    spec_truth,
)


def two_var_truth(b21=0.8):
    B = np.array([[0.0, 0.0], [b21, 0.0]])
    return spec_truth(SemSpec(B, np.zeros((2, 0)), ["Laplace"] * 2, []))


def test_perfect_estimate():
    truth = spec_truth(builtin_network("fig3_10var"))
    r = score_ordering(truth.true_ordering, truth)
    assert (r.precision, r.recall, r.f_measure) == (1.0, 1.0, 1.0)
    assert r.total_true_pairs == 45


def test_empty_estimate():
    truth = spec_truth(builtin_network("fig2_5var"))
    r = score_ordering(CausalOrderingMatrix.zeros(range(5)), truth)
    assert r.precision is None
    assert r.recall == 0.0
    assert r.f_measure == 0.0


def test_counts_by_hand():
    truth = spec_truth(builtin_network("chain", d=3))
    # 0 before 1 (right), 2 before 0 (wrong), (1, 2) unknown.
    E = np.array([[0, -1, 1], [1, 0, 0], [-1, 0, 0]])
    r = score_ordering(CausalOrderingMatrix(E, (0, 1, 2)), truth)
    assert (r.decided_pairs, r.correct_pairs, r.total_true_pairs) == (2, 1, 3)
    assert r.precision == 0.5
    assert r.recall == pytest.approx(1 / 3)
    assert r.f_measure == pytest.approx(2 * 0.5 * (1 / 3) / (0.5 + 1 / 3))


def test_id_mismatch():
    truth = spec_truth(builtin_network("chain", d=3))
    with pytest.raises(IdMismatch):
        score_ordering(CausalOrderingMatrix.zeros((0, 1, 5)), truth)


def test_exclude_path_free():
    B = np.zeros((3, 3))
    B[2, 0] = 1.0
    truth = spec_truth(SemSpec(B, np.zeros((3, 0)), ["Laplace"] * 3, []))
    est = CausalOrderingMatrix.from_order([1, 0, 2])
    both = score_ordering(est, truth)
    only_paths = score_ordering(est, truth, exclude_path_free=True)
    assert both.total_true_pairs == 3
    assert only_paths.total_true_pairs == 1
    assert only_paths.excluded_pairs == 2
    assert only_paths.precision == 1.0


def test_strength_rmse():
    truth = two_var_truth(0.8)
    assert score_strengths({(1, 0): 1.0}, truth) == (pytest.approx(0.2), 1)
    assert score_strengths({(1, 0): 0.8, (0, 1): 0.0}, truth) == (0.0, 2)
    assert score_strengths({}, truth) == (None, 0)
    with pytest.raises(IdMismatch):
        score_strengths({(3, 0): 1.0}, truth)


def test_f_measure_convention():
    assert f_measure(None, 0.0) == 0.0
    assert f_measure(1.0, 0.0) == 0.0
    assert f_measure(0.5, 0.5) == 0.5


def test_fig2_maximal_recall():
    # Exact-independence oracle: the two pairs sharing a confounder with x_3
    # are the only undecidable ones.
    assert max_recall(builtin_network("fig2_5var")) == pytest.approx(0.8)


def test_oracle_on_confounded_chain():
    result, truth = oracle_result(confounded_4var())
    report = score_ordering(result.ordering, truth)
    assert report.precision == 1.0
    assert result.ordering.get(0, 3) == 0
    for a, b in [(0, 1), (0, 2), (1, 2)]:
        assert result.ordering.get(a, b) == -1


def test_oracle_without_confounders_orders_everything():
    spec = random_dag(6, 0.5, 0, seed=3)
    result, truth = oracle_result(spec)
    r = score_ordering(result.ordering, truth, exclude_path_free=True)
    assert r.precision == 1.0 and r.recall == 1.0


@st.composite
def estimate_and_truth(draw):
    seed = draw(st.integers(0, 1000))
    d = draw(st.integers(2, 6))
    truth = spec_truth(random_dag(d, 0.5, 0, seed))
    E = np.zeros((d, d), dtype=int)
    for i in range(d):
        for j in range(i + 1, d):
            E[i, j] = draw(st.sampled_from([-1, 0, 1]))
            E[j, i] = -E[i, j]
    return CausalOrderingMatrix(E, tuple(range(d))), truth


@settings(max_examples=60, deadline=None)
@given(estimate_and_truth(), st.randoms(use_true_random=False))
def test_scores_invariant_to_relabeling(args, rnd):
    est, truth = args
    d = len(est.variable_ids)
    perm = list(range(d))
    rnd.shuffle(perm)
    est_p = CausalOrderingMatrix(est.entries[np.ix_(perm, perm)], tuple(range(d)))
    t = truth.true_ordering
    truth_p = type(truth)(
        CausalOrderingMatrix(t.entries[np.ix_(perm, perm)], tuple(range(d))),
        truth.true_B[np.ix_(perm, perm)],
        tuple(range(d)),
        truth.path_free[np.ix_(perm, perm)],
    )
    a, b = score_ordering(est, truth), score_ordering(est_p, truth_p)
    assert (a.precision, a.recall) == (b.precision, b.recall)


@settings(max_examples=60, deadline=None)
@given(estimate_and_truth(), st.data())
def test_adding_correct_pair_never_hurts(args, data):
    est, truth = args
    E = est.entries.copy()
    unknown = [(i, j) for i in range(E.shape[0]) for j in range(i + 1, E.shape[0]) if E[i, j] == 0]
    if not unknown:
        return
    i, j = data.draw(st.sampled_from(unknown))
    E[i, j] = truth.true_ordering.entries[i, j]
    E[j, i] = -E[i, j]
    before = score_ordering(est, truth)
    after = score_ordering(CausalOrderingMatrix(E, est.variable_ids), truth)
    assert after.recall >= before.recall
    assert before.precision is None or after.precision >= before.precision


def test_truth_scores_perfectly_after_generation():
    _, truth = generate(builtin_network("fig2_5var", seed=4), 50)
    r = score_ordering(truth.true_ordering, truth)
    assert (r.precision, r.recall, r.f_measure) == (1.0, 1.0, 1.0)


def test_mean_report_skips_undefined():
    reports = [
        ScoreReport(None, 0.0, 0.0, 0, 0, 3),
        ScoreReport(1.0, 0.5, 2 / 3, 1, 1, 2, rmse=0.1, strength_count=1),
        ScoreReport(0.5, 0.5, 0.5, 2, 1, 2, rmse=0.3, strength_count=2),
    ]
    m = mean_report(reports)
    assert m["precision"] == pytest.approx(0.75)
    assert m["recall"] == pytest.approx(1 / 3)
    assert m["rmse"] == pytest.approx(0.2)
    assert m["trials"] == 3
    assert m["undefined_precision"] == 1
