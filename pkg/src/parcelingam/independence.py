"""Kernel independence testing (HSIC) and Fisher's combination of p-values.

The default null approximation is the two-moment gamma fit of Gretton et
al. (2008); a permutation test is provided for calibration checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .exceptions import ConstantInput, EmptyInput

logger = logging.getLogger(__name__)

P_FLOOR = 1e-300
CONSTANT_TOL = 1e-12
MIN_SAMPLES = 10


@dataclass(frozen=True)
class HsicResult:
    statistic: float
    p_value: float
    n: int
    bandwidth_u: float
    bandwidth_v: float


@dataclass(frozen=True)
class FisherCombination:
    statistic: float
    degrees_of_freedom: int
    p_value: float
    component_p_values: tuple[float, ...]


def _count_pairs_within(xs: np.ndarray, t: float) -> int:
    # Pairs i < j of sorted xs with xs[j] - xs[i] <= t.
    upper = np.searchsorted(xs, xs + t, side="right")
    return int((upper - np.arange(1, xs.shape[0] + 1)).sum())


def _kth_pairwise_difference(xs: np.ndarray, k: int) -> float:
    """k-th smallest (0-based) of ``xs[j] - xs[i]`` over i < j, xs sorted."""
    n = xs.shape[0]
    lo, hi = -1.0, float(xs[-1] - xs[0])
    below = 0  # pairs with difference <= lo
    # Bisect on the value until few candidate pairs remain, then select.
    for _ in range(200):
        if _count_pairs_within(xs, hi) - below <= 4 * n:
            break
        mid = 0.5 * (lo + hi) if lo >= 0 else 0.5 * hi
        c = _count_pairs_within(xs, mid)
        if c > k:
            hi = mid
        else:
            lo, below = mid, c
        if lo < 0 and c <= k:
            lo = 0.0
    start = np.searchsorted(xs, xs + lo, side="right") if lo >= 0 else np.arange(1, n + 1)
    start = np.maximum(start, np.arange(1, n + 1))
    stop = np.searchsorted(xs, xs + hi, side="right")
    cands = np.concatenate([xs[a:b] - xs[i] for i, (a, b) in enumerate(zip(start, stop)) if b > a])
    return float(np.partition(cands, k - below)[k - below])


def median_bandwidth(x: np.ndarray) -> float:
    """Median of pairwise absolute differences, 1.0 if that median is zero."""
    xs = np.sort(np.asarray(x, dtype=float))
    n = xs.shape[0]
    m = n * (n - 1) // 2
    if m % 2:
        width = _kth_pairwise_difference(xs, m // 2)
    else:
        width = 0.5 * (
            _kth_pairwise_difference(xs, m // 2 - 1) + _kth_pairwise_difference(xs, m // 2)
        )
    return width if width > 0 else 1.0


def stride_subsample(n: int, cap: int | None) -> np.ndarray | None:
    """Deterministic, evenly spaced sample indices (``None`` if no cap applies)."""
    if cap is None or n <= cap:
        return None
    return np.floor(np.linspace(0, n - 1, cap)).astype(int)


class _Gram:
    """Centered Gaussian Gram matrix of one vector plus the moments the
    gamma approximation needs."""

    __slots__ = ("centered", "off_diag_mean", "width")

    def __init__(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        if np.var(x, ddof=1) <= CONSTANT_TOL:
            raise ConstantInput("input vector is constant")
        n = x.shape[0]
        self.width = median_bandwidth(x)
        diff = x[:, None] - x[None, :]
        diff *= diff
        diff *= -1.0 / (2.0 * self.width**2)
        K = np.exp(diff, out=diff)
        row_mean = K.mean(axis=0)
        self.centered = K - row_mean[:, None] - row_mean[None, :] + row_mean.mean()
        self.off_diag_mean = (K.sum() - n) / (n * (n - 1))


def _hsic_from_grams(gu: _Gram, gv: _Gram) -> tuple[float, float]:
    n = gu.centered.shape[0]
    prod = gu.centered * gv.centered
    statistic = float(prod.sum() / n)

    flat = prod.ravel()
    diag = np.diagonal(prod)
    var = (flat @ flat - diag @ diag) / 36.0 / n / (n - 1)
    var = var * 72.0 * (n - 4) * (n - 5) / n / (n - 1) / (n - 2) / (n - 3)
    mu_u, mu_v = gu.off_diag_mean, gv.off_diag_mean
    mean = (1.0 + mu_u * mu_v - mu_u - mu_v) / n

    if not (var > 0 and mean > 0):
        return max(statistic, 0.0), 1.0
    shape = mean**2 / var
    scale = var * n / mean
    p_value = float(stats.gamma.sf(statistic, shape, scale=scale))
    return max(statistic, 0.0), min(max(p_value, 0.0), 1.0)


def _check_pair(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or u.shape != v.shape:
        raise ValueError("u and v must be 1-d vectors of equal length")
    if u.shape[0] < MIN_SAMPLES:
        raise ValueError(f"HSIC needs at least {MIN_SAMPLES} samples")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("HSIC inputs must be finite")
    return u, v


def hsic_test(u, v, sample_cap: int | None = None) -> HsicResult:
    """HSIC independence test with Gaussian kernels and a gamma null.

    Bandwidths follow the median heuristic on each input separately. When
    ``sample_cap`` is set and smaller than ``n``, both vectors are thinned
    with the same deterministic stride before the Gram matrices are built.

    Raises:
        ConstantInput: if either vector is constant.
    """
    u, v = _check_pair(u, v)
    idx = stride_subsample(u.shape[0], sample_cap)
    if idx is not None:
        u, v = u[idx], v[idx]
    gu, gv = _Gram(u), _Gram(v)
    statistic, p_value = _hsic_from_grams(gu, gv)
    return HsicResult(statistic, p_value, u.shape[0], gu.width, gv.width)


def hsic_permutation_test(
    u, v, n_permutations: int = 1000, seed: int = 0
) -> tuple[float, float]:
    """Permutation p-value of the HSIC statistic; returns ``(statistic, p)``.

    Slow (one statistic per shuffle); used to calibrate the gamma null.
    """
    u, v = _check_pair(u, v)
    gu, gv = _Gram(u), _Gram(v)
    n = u.shape[0]
    Ku, Kv = gu.centered, gv.centered
    observed = float((Ku * Kv).sum() / n)
    rng = np.random.default_rng(seed)
    exceed = 0
    for _ in range(n_permutations):
        p = rng.permutation(n)
        # Centering commutes with a joint row/column permutation.
        if (Ku * Kv[np.ix_(p, p)]).sum() / n >= observed:
            exceed += 1
    return observed, (exceed + 1) / (n_permutations + 1)


def fisher_combine(p_values: Sequence[float]) -> FisherCombination:
    """Fisher's method: ``-2 sum log p_i`` against chi-square with ``2c`` dof."""
    ps = tuple(float(p) for p in p_values)
    if not ps:
        raise EmptyInput("fisher_combine needs at least one p-value")
    for p in ps:
        if not (0.0 <= p <= 1.0) or np.isnan(p):
            raise ValueError(f"p-value {p} outside [0, 1]")
    clamped = np.maximum(np.asarray(ps), P_FLOOR)
    statistic = float(-2.0 * np.log(clamped).sum())
    dof = 2 * len(ps)
    p_value = float(stats.chi2.sf(statistic, dof))
    return FisherCombination(statistic, dof, p_value, ps)


class HsicTester:
    """Pairwise HSIC p-values of one fixed vector against many.

    The fixed vector's Gram matrix is built once per call. Constant inputs
    count as independent (p = 1).
    """

    def __init__(self, sample_cap: int | None = None):
        self.sample_cap = sample_cap

    def _thin(self, x):
        idx = stride_subsample(x.shape[-1], self.sample_cap)
        return x if idx is None else x[..., idx]

    def pvalues(self, fixed, others) -> list[float]:
        fixed = self._thin(np.asarray(fixed, dtype=float))
        others = self._thin(np.atleast_2d(np.asarray(others, dtype=float)))
        try:
            g_fixed = _Gram(fixed)
        except ConstantInput:
            logger.warning("constant input in HSIC; treating pairs as independent")
            return [1.0] * others.shape[0]
        out = []
        for row in others:
            try:
                g_row = _Gram(row)
            except ConstantInput:
                logger.warning("constant input in HSIC; treating pair as independent")
                out.append(1.0)
                continue
            out.append(_hsic_from_grams(g_fixed, g_row)[1])
        return out


class SourceOracleTester:
    """Exact independence oracle for population-level runs.

    Rows are coefficient vectors over independent non-Gaussian sources (see
    :func:`parcelingam.simgen.population_matrix`); only the first
    ``n_sources`` entries are read. Two linear forms of independent
    non-Gaussian sources are independent iff no source loads on both, so
    the p-value is 1.0 or 0.0.
    """

    def __init__(self, n_sources: int, tol: float = 1e-9):
        self.n_sources = n_sources
        self.tol = tol

    def _support(self, x):
        a = np.abs(np.asarray(x, dtype=float)[..., : self.n_sources])
        scale = a.max(axis=-1, keepdims=True)
        return a > self.tol * np.maximum(scale, 1.0)

    def pvalues(self, fixed, others) -> list[float]:
        sf = self._support(fixed)
        so = self._support(np.atleast_2d(others))
        shared = (so & sf[None, :]).any(axis=1)
        return [0.0 if s else 1.0 for s in shared]


def fisher_independence(target, others, tester=None) -> float:
    """Fisher-combined p-value of ``target`` against each row of ``others``."""
    others = np.atleast_2d(np.asarray(others, dtype=float))
    if others.shape[0] == 0:
        raise EmptyInput("others must contain at least one row")
    tester = tester or HsicTester()
    return fisher_combine(tester.pvalues(target, others)).p_value
