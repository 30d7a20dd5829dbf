"""Causal ordering matrices: construction from ordered lists and merging."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import OverlappingLists


@dataclass(frozen=True, eq=False)
class CausalOrderingMatrix:
    """Pairwise order knowledge over a set of variables.

    ``entries[i, j]`` is -1 if variable ``i`` precedes ``j``, +1 if it
    follows, and 0 if the order is unknown. Rows and columns are indexed by
    position in ``variable_ids``.
    """

    entries: np.ndarray
    variable_ids: tuple[int, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=int)
        ids = tuple(int(i) for i in self.variable_ids)
        d = len(ids)
        if entries.shape != (d, d):
            raise ValueError(f"entries shape {entries.shape} does not match {d} ids")
        if not np.isin(entries, (-1, 0, 1)).all():
            raise ValueError("entries must be in {-1, 0, 1}")
        if np.any(np.diag(entries) != 0):
            raise ValueError("diagonal entries must be 0")
        if np.any(entries != -entries.T):
            raise ValueError("ordering matrix must be antisymmetric")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "variable_ids", ids)

    def __eq__(self, other):
        if not isinstance(other, CausalOrderingMatrix):
            return NotImplemented
        return self.variable_ids == other.variable_ids and np.array_equal(
            self.entries, other.entries
        )

    def __hash__(self):
        return hash((self.variable_ids, self.entries.tobytes()))

    @classmethod
    def zeros(cls, variable_ids: Sequence[int]) -> "CausalOrderingMatrix":
        d = len(variable_ids)
        return cls(np.zeros((d, d), dtype=int), tuple(variable_ids))

    @classmethod
    def from_order(cls, order: Sequence[int]) -> "CausalOrderingMatrix":
        """Fully decided matrix for a total order (first element earliest)."""
        ids = tuple(order)
        d = len(ids)
        entries = np.zeros((d, d), dtype=int)
        iu = np.triu_indices(d, k=1)
        entries[iu] = -1
        entries = entries - entries.T
        return cls(entries, ids)

    def get(self, i: int, j: int) -> int:
        """Entry for the pair of variable *ids* ``(i, j)``."""
        ids = self.variable_ids
        return int(self.entries[ids.index(i), ids.index(j)])

    def reindexed(self, variable_ids: Sequence[int]) -> "CausalOrderingMatrix":
        idx = [self.variable_ids.index(i) for i in variable_ids]
        return CausalOrderingMatrix(self.entries[np.ix_(idx, idx)], tuple(variable_ids))

    def decided_pairs(self) -> int:
        return int(np.count_nonzero(self.entries)) // 2

    def row_decided(self, i: int) -> bool:
        """True if every off-diagonal entry of variable ``i``'s row is nonzero."""
        k = self.variable_ids.index(i)
        row = np.delete(self.entries[k], k)
        return bool(np.all(row != 0))

    def has_topological_extension(self) -> bool:
        """True if the ``-1`` relation is acyclic (some total order agrees)."""
        d = len(self.variable_ids)
        precedes = self.entries == -1
        indegree = precedes.sum(axis=0)
        ready = [k for k in range(d) if indegree[k] == 0]
        seen = 0
        while ready:
            k = ready.pop()
            seen += 1
            for j in np.flatnonzero(precedes[k]):
                indegree[j] -= 1
                if indegree[j] == 0:
                    ready.append(int(j))
        return seen == d

    def to_dict(self) -> dict:
        return {
            "variable_ids": list(self.variable_ids),
            "entries": self.entries.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CausalOrderingMatrix":
        return cls(np.asarray(data["entries"], dtype=int), tuple(data["variable_ids"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.variable_ids)
        writer.writerows(self.entries.tolist())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CausalOrderingMatrix":
        rows = list(csv.reader(io.StringIO(text)))
        ids = tuple(int(v) for v in rows[0])
        return cls(np.asarray([[int(v) for v in r] for r in rows[1:]]), ids)


@dataclass(frozen=True)
class OrderedLists:
    """Variables ordered from the top (``k_head``) and from the bottom
    (``k_tail``); ``k_tail[-1]`` is the last variable in the causal order."""

    k_head: tuple[int, ...] = ()
    k_tail: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "k_head", tuple(int(i) for i in self.k_head))
        object.__setattr__(self, "k_tail", tuple(int(i) for i in self.k_tail))


@dataclass(frozen=True)
class PlausibilityRecord:
    subset: tuple[int, ...]
    ordering: CausalOrderingMatrix
    p_value: float
    component_log_p_sum: float = 0.0
    lists: OrderedLists = field(default_factory=OrderedLists)

    def __post_init__(self):
        if len(self.subset) < 2:
            raise ValueError("a plausibility record needs a subset of size >= 2")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")
        object.__setattr__(self, "subset", tuple(sorted(int(i) for i in self.subset)))

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "p_value": self.p_value,
            "component_log_p_sum": self.component_log_p_sum,
            "k_head": list(self.lists.k_head),
            "k_tail": list(self.lists.k_tail),
            "ordering": self.ordering.to_dict(),
        }


def build_ordering_matrix(
    lists: OrderedLists, all_ids: Sequence[int]
) -> CausalOrderingMatrix:
    """Ordering matrix implied by the head and tail lists.

    Head variables precede everything after them in the head list and every
    unlisted or tail variable; tail variables follow everything before them
    in the tail list and every unlisted or head variable. Pairs of unlisted
    variables stay unknown.
    """
    head, tail = lists.k_head, lists.k_tail
    if set(head) & set(tail):
        raise OverlappingLists(f"ids in both lists: {sorted(set(head) & set(tail))}")
    ids = tuple(all_ids)
    missing = (set(head) | set(tail)) - set(ids)
    if missing:
        raise ValueError(f"listed ids not in all_ids: {sorted(missing)}")

    # Rank: heads first in list order, unlisted share one middle rank, tails last.
    rank = {}
    for r, v in enumerate(head):
        rank[v] = r
    middle = len(head)
    for r, v in enumerate(tail):
        rank[v] = middle + 1 + r
    d = len(ids)
    entries = np.zeros((d, d), dtype=int)
    for a in range(d):
        ra = rank.get(ids[a], middle)
        for b in range(a + 1, d):
            rb = rank.get(ids[b], middle)
            if ra < rb:
                entries[a, b], entries[b, a] = -1, 1
            elif ra > rb:
                entries[a, b], entries[b, a] = 1, -1
    return CausalOrderingMatrix(entries, ids)


def _record_rank(record: PlausibilityRecord):
    return (-record.p_value, -len(record.subset), record.subset)


def merge_orderings(
    records: Iterable[PlausibilityRecord],
    variable_ids: Sequence[int] | None = None,
) -> CausalOrderingMatrix:
    """Combine per-subset orderings, most plausible decided record first.

    For each pair, the highest-plausibility record that contains both
    variables and decides their order supplies the entry. Ties in
    plausibility go to the larger subset, then to the lexicographically
    smaller subset.
    """
    records = sorted(records, key=_record_rank)
    if variable_ids is None:
        universe = sorted({v for r in records for v in r.subset})
    else:
        universe = list(variable_ids)
    pos = {v: k for k, v in enumerate(universe)}
    d = len(universe)
    entries = np.zeros((d, d), dtype=int)
    decided = np.zeros((d, d), dtype=bool)
    np.fill_diagonal(decided, True)
    for record in records:
        if decided.all():
            break
        sub = record.ordering
        idx = np.array([pos[v] for v in sub.variable_ids])
        block = sub.entries
        mask = (block != 0) & ~decided[np.ix_(idx, idx)]
        if not mask.any():
            continue
        rows, cols = np.nonzero(mask)
        entries[idx[rows], idx[cols]] = block[rows, cols]
        decided[idx[rows], idx[cols]] = True
    return CausalOrderingMatrix(entries, tuple(universe))
