"""Hybrid causal-order search, subset (parcel) enumeration and the full
ParceLiNGAM pipeline."""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import core_stats
from .core_stats import DataMatrix
from .exceptions import DegenerateVariance, SingularCovariance, SubsetBudgetExceeded
from .independence import P_FLOOR, HsicTester, fisher_combine
from .ordering import (
    CausalOrderingMatrix,
    OrderedLists,
    PlausibilityRecord,
    build_ordering_matrix,
    merge_orderings,
)

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.05
DEFAULT_SUBSET_CAP = 15


class StopReason(str, enum.Enum):
    ALL_ORDERED = "AllOrdered"
    REJECTED_TOP_DOWN = "IndependenceRejectedTopDown"
    REJECTED_BOTTOM_UP = "IndependenceRejectedBottomUp"
    FEWER_THAN_THREE = "FewerThanThreeRemain"


@dataclass
class Algorithm1Trace:
    """Everything algorithm1 decided, with the p-values that backed it.

    ``head_p_values[m]`` maps each variable whose residual was tested when
    ``m`` joined the head list to the HSIC p-value of that test;
    ``tail_p_values[m]`` maps each regressor tested against ``m``'s
    residual when ``m`` joined the tail list.
    """

    lists: OrderedLists
    head_p_values: dict[int, dict[int, float]] = field(default_factory=dict)
    tail_p_values: dict[int, dict[int, float]] = field(default_factory=dict)
    stop_reasons: list[StopReason] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def component_p_values(self) -> list[float]:
        out = []
        for m in self.lists.k_head:
            out.extend(self.head_p_values.get(m, {}).values())
        for m in self.lists.k_tail:
            out.extend(self.tail_p_values.get(m, {}).values())
        return out

    def to_dict(self) -> dict:
        def _pmap(pm):
            return {str(m): {str(i): p for i, p in sorted(ps.items())} for m, ps in pm.items()}

        return {
            "k_head": list(self.lists.k_head),
            "k_tail": list(self.lists.k_tail),
            "head_p_values": _pmap(self.head_p_values),
            "tail_p_values": _pmap(self.tail_p_values),
            "stop_reasons": [r.value for r in self.stop_reasons],
            "warnings": list(self.warnings),
        }


@dataclass
class DiscoveryResult:
    ordering: CausalOrderingMatrix
    strengths: dict[tuple[int, int], float]
    subset_records: list[PlausibilityRecord]
    trace: Algorithm1Trace
    plausibility: float = 0.0

    @property
    def acyclic(self) -> bool:
        return self.ordering.has_topological_extension()

    def strength_matrix(self) -> np.ndarray:
        """Dense ``d x d`` strengths with NaN where nothing was estimated."""
        ids = self.ordering.variable_ids
        B = np.full((len(ids), len(ids)), np.nan)
        for (i, j), b in self.strengths.items():
            B[ids.index(i), ids.index(j)] = b
        return B

    def to_dict(self) -> dict:
        return {
            "ordering": self.ordering.to_dict(),
            "acyclic": self.acyclic,
            "plausibility": self.plausibility,
            "strengths": [
                {"target": i, "source": j, "value": b}
                for (i, j), b in sorted(self.strengths.items())
            ],
            "trace": self.trace.to_dict(),
            "subset_records": [r.to_dict() for r in self.subset_records],
        }


def _warn(trace: Algorithm1Trace, message: str):
    logger.warning(message)
    trace.warnings.append(message)


def _cached_pvalues(cache, keys, tester, fixed, others):
    # Only rows whose key is new are tested; values are shared across calls.
    missing = [k for k, key in enumerate(keys) if key not in cache]
    if missing:
        for k, p in zip(missing, tester.pvalues(fixed, others[missing])):
            cache[keys[k]] = p
    return [cache[key] for key in keys]


def _top_down(X: DataMatrix, alpha, tester, trace, head, cache):
    work = X.values
    remaining = list(X.variable_ids)
    d = X.d
    while True:
        best = None
        prefix = tuple(head)
        for j in sorted(remaining):
            k = remaining.index(j)
            try:
                R = core_stats.residual_matrix(work, k)
            except DegenerateVariance:
                _warn(trace, f"variable {j} skipped in top-down round {len(head) + 1}: degenerate variance")
                continue
            others = [v for v in remaining if v != j]
            keys = [("td", prefix, j, i) for i in others]
            ps = _cached_pvalues(cache, keys, tester, work[k], R)
            p = fisher_combine(ps).p_value
            if best is None or p > best[0]:
                best = (p, j, dict(zip(others, ps)), R)
        if best is None or best[0] < alpha:
            trace.stop_reasons.append(StopReason.REJECTED_TOP_DOWN)
            return False
        _, m, ps, R = best
        head.append(m)
        trace.head_p_values[m] = ps
        remaining.remove(m)
        work = R
        if len(head) == d - 1:
            head.append(remaining[0])
            trace.stop_reasons.append(StopReason.ALL_ORDERED)
            return True


def _bottom_up(X: DataMatrix, alpha, tester, trace, head, tail, cache):
    work_ids = list(X.variable_ids)
    work = X.values
    candidates = [v for v in work_ids if v not in head]
    while True:
        best = None
        for j in sorted(candidates):
            k = work_ids.index(j)
            rest = np.delete(work, k, axis=0)
            key = ("bu", tuple(work_ids), j)
            if key not in cache:
                try:
                    r = core_stats.multiple_residual(work[k], rest)
                    cache[key] = tuple(tester.pvalues(r, rest))
                except (DegenerateVariance, SingularCovariance) as exc:
                    cache[key] = str(exc)
            ps = cache[key]
            if isinstance(ps, str):
                _warn(trace, f"variable {j} skipped in bottom-up round {len(tail) + 1}: {ps}")
                continue
            p = fisher_combine(ps).p_value
            if best is None or p > best[0]:
                others = [v for v in work_ids if v != j]
                best = (p, j, dict(zip(others, ps)))
        if best is None or best[0] < alpha:
            trace.stop_reasons.append(StopReason.REJECTED_BOTTOM_UP)
            return
        _, m, ps = best
        tail.insert(0, m)
        trace.tail_p_values[m] = ps
        k = work_ids.index(m)
        work = np.delete(work, k, axis=0)
        work_ids.pop(k)
        candidates.remove(m)
        if len(candidates) < 3:
            trace.stop_reasons.append(StopReason.FEWER_THAN_THREE)
            return


def algorithm1(X: DataMatrix, alpha: float = DEFAULT_ALPHA, tester=None, cache=None):
    """Find exogenous variables top-down, then sinks bottom-up.

    Top-down, the variable most independent of its simple-regression
    residuals is appended to the head list and regressed out of the rest,
    until the best Fisher-combined p-value drops below ``alpha``. If more
    than two variables are left unordered, sinks are searched for on the
    original data: the variable whose multiple-regression residual is most
    independent of its regressors is prepended to the tail list and
    dropped, until rejection or fewer than three candidates remain.

    ``cache`` is an optional dict of p-values keyed by how each residual
    was derived. Runs on subsets of the same data may share one cache,
    since a residual depends only on the variables it was built from.

    Returns ``(lists, ordering_matrix, trace)``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if X.d < 2:
        raise ValueError("algorithm1 needs at least two variables")
    tester = tester or HsicTester()
    cache = {} if cache is None else cache
    head: list[int] = []
    tail: list[int] = []
    trace = Algorithm1Trace(OrderedLists())
    done = _top_down(X, alpha, tester, trace, head, cache)
    if not done and len(head) < X.d - 2:
        _bottom_up(X, alpha, tester, trace, head, tail, cache)
    lists = OrderedLists(tuple(head), tuple(tail))
    trace.lists = lists
    return lists, build_ordering_matrix(lists, X.variable_ids), trace


def plausibility(trace: Algorithm1Trace) -> float:
    """Fisher-combined p-value over every test backing the ordered lists.

    Higher is more plausible; a trace that ordered nothing scores 0.
    """
    components = trace.component_p_values()
    if not components:
        return 0.0
    return fisher_combine(components).p_value


def _log_p_sum(trace: Algorithm1Trace) -> float:
    return float(sum(math.log(max(p, P_FLOOR)) for p in trace.component_p_values()))


def enumerate_subsets(ids: Sequence[int]) -> list[tuple[int, ...]]:
    """All subsets of size >= 2, largest first, lexicographic within a size."""
    ids = sorted(ids)
    out = []
    for size in range(len(ids), 1, -1):
        out.extend(combinations(ids, size))
    return out


def algorithm2(
    X: DataMatrix,
    alpha: float = DEFAULT_ALPHA,
    tester=None,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    threads: int = 1,
):
    """Run algorithm1 on every subset of two or more variables and merge.

    Returns ``(merged_ordering, records)`` where ``records`` holds one
    :class:`PlausibilityRecord` per subset in enumeration order.

    Raises:
        SubsetBudgetExceeded: if ``X.d > subset_cap``.
    """
    if X.d > subset_cap:
        raise SubsetBudgetExceeded(X.d, subset_cap)
    tester = tester or HsicTester()
    subsets = enumerate_subsets(X.variable_ids)
    cache: dict = {}

    def run(subset):
        lists, ordering, trace = algorithm1(X.subset(subset), alpha, tester, cache)
        return PlausibilityRecord(
            subset, ordering, plausibility(trace), _log_p_sum(trace), lists
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, subsets))
    else:
        records = [run(s) for s in subsets]
    return merge_orderings(records, X.variable_ids), records


def estimate_strengths(
    X: DataMatrix, ordering: CausalOrderingMatrix
) -> dict[tuple[int, int], float]:
    """Connection strengths for every variable whose order is fully decided.

    Row ``i`` is regressed on all ``j`` ordered before it; variables ordered
    after ``i`` get strength 0.
    """
    strengths = {}
    for i in ordering.variable_ids:
        if not ordering.row_decided(i):
            continue
        earlier = [j for j in ordering.variable_ids if j != i and ordering.get(i, j) == 1]
        later = [j for j in ordering.variable_ids if j != i and ordering.get(i, j) == -1]
        if earlier:
            try:
                coefs = core_stats.regression_coefficients(
                    X.row(i), X.subset(earlier).values
                )
            except (DegenerateVariance, SingularCovariance) as exc:
                logger.warning("strengths for variable %d not estimated: %s", i, exc)
                continue
            for j, b in zip(earlier, np.atleast_1d(coefs)):
                strengths[(i, j)] = float(b)
        for j in later:
            strengths[(i, j)] = 0.0
    return strengths


def fill_unknown(base: CausalOrderingMatrix, update: CausalOrderingMatrix) -> CausalOrderingMatrix:
    """Copy decided entries of ``update`` into the zero entries of ``base``."""
    entries = base.entries.copy()
    ids = base.variable_ids
    idx = np.array([ids.index(v) for v in update.variable_ids])
    block = entries[np.ix_(idx, idx)]
    fill = (block == 0) & (update.entries != 0)
    block[fill] = update.entries[fill]
    entries[np.ix_(idx, idx)] = block
    return CausalOrderingMatrix(entries, ids)


def algorithm3(
    X: DataMatrix,
    alpha: float = DEFAULT_ALPHA,
    tester=None,
    subset_cap: int = DEFAULT_SUBSET_CAP,
    threads: int = 1,
) -> DiscoveryResult:
    """ParceLiNGAM: whole-set search, subset search on what is left, then
    connection strengths.

    Variables left unordered by :func:`algorithm1` have the head variables
    regressed out jointly; :func:`algorithm2` runs on those residuals and
    only fills pairs the whole-set pass left unknown.
    """
    tester = tester or HsicTester()
    lists, ordering, trace = algorithm1(X, alpha, tester)
    listed = set(lists.k_head) | set(lists.k_tail)
    residual_ids = [v for v in X.variable_ids if v not in listed]
    records: list[PlausibilityRecord] = []
    if len(residual_ids) > 2:
        R = core_stats.residualize_rows(
            X.subset(residual_ids).values, X.subset(lists.k_head).values
        )
        merged, records = algorithm2(
            DataMatrix(R, tuple(residual_ids)), alpha, tester, subset_cap, threads
        )
        ordering = fill_unknown(ordering, merged)
    strengths = estimate_strengths(X, ordering)
    return DiscoveryResult(ordering, strengths, records, trace, plausibility(trace))


def direct_lingam(X: DataMatrix, tester=None) -> DiscoveryResult:
    """Baseline without confounder handling: the top-down search never
    rejects, so every variable is ordered (as in DirectLiNGAM)."""
    if X.d < 2:
        raise ValueError("direct_lingam needs at least two variables")
    tester = tester or HsicTester()
    head: list[int] = []
    trace = Algorithm1Trace(OrderedLists())
    _top_down(X, 0.0, tester, trace, head, {})
    # Candidates skipped as degenerate in every round leave the list short.
    head.extend(v for v in X.variable_ids if v not in head)
    trace.lists = OrderedLists(tuple(head), ())
    ordering = CausalOrderingMatrix.from_order(head).reindexed(X.variable_ids)
    return DiscoveryResult(
        ordering, estimate_strengths(X, ordering), [], trace, plausibility(trace)
    )
