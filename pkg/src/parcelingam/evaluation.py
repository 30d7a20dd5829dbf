"""Scoring estimated orderings and connection strengths against ground truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Mapping

import numpy as np

from .exceptions import IdMismatch
from .ordering import CausalOrderingMatrix
from .simgen import SemGroundTruth, SemSpec, population_matrix, spec_truth


@dataclass
class ScoreReport:
    """Pairwise order scores. ``precision`` is None when nothing was decided;
    ``rmse`` is None when no strengths were scored."""

    precision: float | None
    recall: float
    f_measure: float
    decided_pairs: int
    correct_pairs: int
    total_true_pairs: int
    excluded_pairs: int = 0
    rmse: float | None = None
    strength_count: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def f_measure(precision: float | None, recall: float) -> float:
    if precision is None or precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_ordering(
    est: CausalOrderingMatrix,
    truth: SemGroundTruth,
    exclude_path_free: bool = False,
) -> ScoreReport:
    """Precision, recall and F-measure over unordered variable pairs.

    With ``exclude_path_free`` set, pairs with no directed path between
    them are dropped from every count.
    """
    true = truth.true_ordering
    if set(est.variable_ids) != set(true.variable_ids) or len(est.variable_ids) != len(true.variable_ids):
        raise IdMismatch("estimate and truth cover different variables")
    E = est.reindexed(true.variable_ids).entries
    T = true.entries
    d = T.shape[0]
    iu = np.triu_indices(d, k=1)
    keep = np.ones(iu[0].shape[0], dtype=bool)
    if exclude_path_free:
        keep = ~truth.path_free[iu]
    e, t = E[iu][keep], T[iu][keep]
    decided = int(np.count_nonzero(e))
    correct = int(np.count_nonzero((e != 0) & (e == t)))
    total = int(keep.sum())
    precision = correct / decided if decided else None
    recall = correct / total if total else 0.0
    return ScoreReport(
        precision=precision,
        recall=recall,
        f_measure=f_measure(precision, recall),
        decided_pairs=decided,
        correct_pairs=correct,
        total_true_pairs=total,
        excluded_pairs=int((~keep).sum()),
    )


def score_strengths(
    est: Mapping[tuple[int, int], float], truth: SemGroundTruth
) -> tuple[float | None, int]:
    """RMSE of the estimated entries against the true ``B`` (0 where no edge)."""
    if not est:
        return None, 0
    d = truth.true_B.shape[0]
    errors = []
    for (i, j), b in est.items():
        if not (0 <= i < d and 0 <= j < d):
            raise IdMismatch(f"strength key {(i, j)} outside the variable range")
        errors.append(b - truth.true_B[i, j])
    errors = np.asarray(errors)
    return float(np.sqrt(np.mean(errors**2))), len(errors)


def score_result(result, truth: SemGroundTruth, exclude_path_free: bool = False) -> ScoreReport:
    """Order and strength scores of a :class:`DiscoveryResult` in one report."""
    report = score_ordering(result.ordering, truth, exclude_path_free)
    report.rmse, report.strength_count = score_strengths(result.strengths, truth)
    return report


def oracle_result(spec: SemSpec, subset_cap: int = 15):
    """ParceLiNGAM run on population moments with an exact independence
    oracle: what the method finds when no statistical errors occur.

    Returns ``(result, truth)`` in unpermuted coordinates.
    """
    from .discovery import algorithm3
    from .independence import SourceOracleTester

    X = population_matrix(spec)
    tester = SourceOracleTester(spec.d + spec.q)
    result = algorithm3(X, 0.5, tester, subset_cap=subset_cap)
    return result, spec_truth(spec)


def max_recall(spec: SemSpec, exclude_path_free: bool = False) -> float:
    """Recall of the error-free (oracle) run against the generated truth."""
    result, truth = oracle_result(spec)
    return score_ordering(result.ordering, truth, exclude_path_free).recall


def mean_report(reports: Iterable[ScoreReport]) -> dict:
    """Trial average of each metric; undefined values are skipped."""
    reports = list(reports)
    out = {}
    for key in ("precision", "recall", "f_measure", "rmse"):
        vals = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        out[key] = float(np.mean(vals)) if vals else None
    out["trials"] = len(reports)
    out["undefined_precision"] = sum(r.precision is None for r in reports)
    return out


def _uniform_chain(rng, n):
    # x1 -> x2 -> x3 with uniform external influences.
    e = rng.uniform(-1.0, 1.0, (3, n))
    x1 = e[0]
    x2 = 1.0 * x1 + e[1]
    x3 = -0.8 * x2 + e[2]
    return np.vstack([x1, x2, x3])


def lemma_rates(n: int = 2000, trials: int = 50, seed: int = 0, alpha: float = 0.05) -> dict:
    """How often the residual-independence characterizations hold on a
    three-variable chain ``x1 -> x2 -> x3``.

    ``exogenous_accepted``: the root is independent of every simple-regression
    residual on it. ``non_exogenous_rejected``: the middle variable is not.
    ``sink_accepted``: the last variable's multiple-regression residual is
    independent of its regressors. ``non_sink_rejected``: the root's is not.
    """
    from .core_stats import multiple_residual, residual_matrix
    from .independence import fisher_independence

    counts = dict.fromkeys(
        ("exogenous_accepted", "non_exogenous_rejected", "sink_accepted", "non_sink_rejected"), 0
    )
    for t in range(trials):
        X = _uniform_chain(np.random.default_rng([seed, t]), n)
        X = X - X.mean(axis=1, keepdims=True)
        counts["exogenous_accepted"] += fisher_independence(X[0], residual_matrix(X, 0)) >= alpha
        counts["non_exogenous_rejected"] += fisher_independence(X[1], residual_matrix(X, 1)) < alpha
        r3 = multiple_residual(X[2], X[:2])
        counts["sink_accepted"] += fisher_independence(r3, X[:2]) >= alpha
        r1 = multiple_residual(X[0], X[1:])
        counts["non_sink_rejected"] += fisher_independence(r1, X[1:]) < alpha
    return {k: v / trials for k, v in counts.items()}


def hsic_null_rate(n: int, reps: int = 500, seed: int = 0, alpha: float = 0.05) -> float:
    """False-positive rate of the gamma-approximated HSIC test on
    independent standard normal pairs."""
    from .independence import hsic_test

    rng = np.random.default_rng([seed, n])
    hits = sum(
        hsic_test(rng.standard_normal(n), rng.standard_normal(n)).p_value < alpha
        for _ in range(reps)
    )
    return hits / reps


def hsic_gamma_vs_permutation(
    n: int, instances: int = 50, n_permutations: int = 1000, seed: int = 0, alpha: float = 0.05
) -> tuple[float, float]:
    """Rejection rates ``(gamma, permutation)`` on the same null instances."""
    from .independence import hsic_permutation_test, hsic_test

    rng = np.random.default_rng([seed, n, 1])
    gamma = perm = 0
    for k in range(instances):
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        gamma += hsic_test(u, v).p_value < alpha
        perm += hsic_permutation_test(u, v, n_permutations, seed=k)[1] < alpha
    return gamma / instances, perm / instances
