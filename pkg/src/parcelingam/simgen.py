"""Synthetic latent-variable LiNGAM data.

Models are ``x = B x + Lambda f + e`` with independent non-Gaussian
external influences ``e`` and latent confounders ``f``. Non-root external
influences are scaled so that ``var(e_i) / var(x_i) = 1/2`` on the realized
sample; confounders keep unit variance.
"""

from __future__ import annotations

import dataclasses
import enum
import io
import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .core_stats import DataMatrix
from .exceptions import InvalidSpec, ScalingNonConvergence, UnknownNetwork
from .ordering import CausalOrderingMatrix

WEIGHT_RANGE = (0.5, 1.5)
TARGET_RATIO = 0.5
RATIO_BAND = (0.45, 0.55)


class NoiseFamily(str, enum.Enum):
    GAUSS_MIX_ASYM = "GaussMixAsym"
    LAPLACE = "Laplace"
    GAUSS_MIX_SYM = "GaussMixSym"


# (weight, mean, sd) per component; standardized after sampling.
MIXTURES = {
    NoiseFamily.GAUSS_MIX_ASYM: ((0.7, -1.1, 0.7), (0.3, 2.57, 1.0)),
    NoiseFamily.GAUSS_MIX_SYM: ((0.5, -1.5, 0.5), (0.5, 1.5, 0.5)),
}

_FAMILY_CYCLE = (NoiseFamily.GAUSS_MIX_ASYM, NoiseFamily.LAPLACE, NoiseFamily.GAUSS_MIX_SYM)


def default_family(index: int) -> NoiseFamily:
    """Family of source number ``index`` (0-based): asym, Laplace, sym, repeat."""
    return _FAMILY_CYCLE[index % 3]


def sample_noise(family, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws from ``family``, standardized to zero mean, unit variance."""
    family = NoiseFamily(family)
    if n < 1:
        raise ValueError("n must be positive")
    if family is NoiseFamily.LAPLACE:
        x = rng.laplace(0.0, 1.0, n)
    else:
        (w0, m0, s0), (_, m1, s1) = MIXTURES[family]
        first = rng.random(n) < w0
        x = np.where(first, rng.normal(m0, s0, n), rng.normal(m1, s1, n))
    if n == 1:
        return np.zeros(1)
    x = x - x.mean()
    return x / x.std(ddof=1)


@dataclass(eq=False)
class SemSpec:
    """Generator description. ``B[i, j]`` is the effect of ``x_j`` on
    ``x_i``; ``Lambda[i, k]`` the effect of confounder ``f_k`` on ``x_i``."""

    B: np.ndarray
    Lambda: np.ndarray
    noise_e: tuple[NoiseFamily, ...]
    noise_f: tuple[NoiseFamily, ...]
    seed: int = 0
    name: str = "custom"
    representative: bool = False

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        d = self.B.shape[0]
        lam = np.asarray(self.Lambda, dtype=float)
        self.Lambda = lam.reshape(d, 0) if lam.size == 0 else lam
        self.noise_e = tuple(NoiseFamily(f) for f in self.noise_e)
        self.noise_f = tuple(NoiseFamily(f) for f in self.noise_f)

    def __eq__(self, other):
        if not isinstance(other, SemSpec):
            return NotImplemented
        return (
            np.array_equal(self.B, other.B)
            and np.array_equal(self.Lambda, other.Lambda)
            and (self.noise_e, self.noise_f, self.seed, self.name, self.representative)
            == (other.noise_e, other.noise_f, other.seed, other.name, other.representative)
        )

    __hash__ = None

    @property
    def d(self) -> int:
        return self.B.shape[0]

    @property
    def q(self) -> int:
        return self.Lambda.shape[1]

    def with_seed(self, seed: int) -> "SemSpec":
        return dataclasses.replace(self, seed=int(seed))

    def validate(self) -> None:
        """Raise :class:`InvalidSpec` naming the first violated invariant."""
        d, q = self.d, self.q
        if self.B.shape != (d, d):
            raise InvalidSpec("B must be square")
        if self.Lambda.shape != (d, q):
            raise InvalidSpec(f"Lambda must be {d} x q")
        if len(self.noise_e) != d or len(self.noise_f) != q:
            raise InvalidSpec("noise assignments must cover every e_i and f_k")
        if not (np.all(np.isfinite(self.B)) and np.all(np.isfinite(self.Lambda))):
            raise InvalidSpec("B and Lambda must be finite")
        if np.any(np.diag(self.B) != 0):
            raise InvalidSpec("B acyclicity: diagonal must be zero")
        if topological_order(self.B) is None:
            raise InvalidSpec("B acyclicity: edge pattern contains a directed cycle")
        for k in range(q):
            if np.count_nonzero(self.Lambda[:, k]) < 2:
                raise InvalidSpec(
                    f"Lambda column {k}: a latent confounder needs at least two children"
                )
        if q and np.linalg.matrix_rank(self.Lambda) < q:
            raise InvalidSpec("Lambda must have full column rank")

    def to_toml(self) -> str:
        edges = [
            [int(i), int(j), float(self.B[i, j])]
            for i, j in zip(*np.nonzero(self.B))
        ]
        confounders = []
        for k in range(self.q):
            children = np.flatnonzero(self.Lambda[:, k])
            confounders.append(
                [k, [int(c) for c in children], [float(self.Lambda[c, k]) for c in children]]
            )
        doc = {
            "schema": 1,
            "name": self.name,
            "representative": self.representative,
            "seed": int(self.seed),
            "dims": {"d": self.d, "q": self.q},
            "edges": edges,
            "confounders": confounders,
            "noise": {
                "e": [f.value for f in self.noise_e],
                "f": [f.value for f in self.noise_f],
            },
        }
        return tomli_w.dumps(doc)

    @classmethod
    def from_toml(cls, text: str) -> "SemSpec":
        """Parse a spec document; structural errors raise :class:`InvalidSpec`."""
        try:
            doc = tomllib.loads(text)
            d = int(doc["dims"]["d"])
            q = int(doc["dims"].get("q", 0))
            B = np.zeros((d, d))
            for i, j, w in doc.get("edges", []):
                B[int(i), int(j)] = float(w)
            Lambda = np.zeros((d, q))
            for k, children, weights in doc.get("confounders", []):
                if len(children) != len(weights):
                    raise InvalidSpec(f"confounder {k}: children and weights differ in length")
                for c, w in zip(children, weights):
                    Lambda[int(c), int(k)] = float(w)
            noise = doc.get("noise", {})
            noise_e = noise.get("e", [default_family(i).value for i in range(d)])
            noise_f = noise.get("f", [default_family(k).value for k in range(q)])
            spec = cls(
                B,
                Lambda,
                tuple(noise_e),
                tuple(noise_f),
                seed=int(doc.get("seed", 0)),
                name=str(doc.get("name", "custom")),
                representative=bool(doc.get("representative", False)),
            )
        except InvalidSpec:
            raise
        except (KeyError, TypeError, ValueError, IndexError, tomllib.TOMLDecodeError) as exc:
            raise InvalidSpec(f"malformed spec document: {exc}") from exc
        spec.validate()
        return spec


@dataclass
class SemGroundTruth:
    """True structure in the (permuted) coordinates of the generated data.

    ``path_free[i, j]`` marks pairs with no directed path either way; their
    entry in ``true_ordering`` follows the generating topological order.
    """

    true_ordering: CausalOrderingMatrix
    true_B: np.ndarray
    permutation: tuple[int, ...]
    path_free: np.ndarray
    mixing: np.ndarray = field(repr=False, default=None)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "ordering": self.true_ordering.to_dict(),
            "true_B": self.true_B.tolist(),
            "permutation": list(self.permutation),
            "path_free": self.path_free.astype(int).tolist(),
            "metadata": self.metadata,
        }


def topological_order(B: np.ndarray) -> list[int] | None:
    """Causes before effects (Kahn's algorithm, smallest index first);
    ``None`` if the nonzero pattern of ``B`` has a cycle."""
    adj = np.asarray(B) != 0
    d = adj.shape[0]
    indegree = adj.sum(axis=1)  # parents of i are the nonzeros in row i
    ready = sorted(int(i) for i in np.flatnonzero(indegree == 0))
    order = []
    while ready:
        j = ready.pop(0)
        order.append(j)
        for i in np.flatnonzero(adj[:, j]):
            indegree[i] -= 1
            if indegree[i] == 0:
                ready.append(int(i))
                ready.sort()
    return order if len(order) == d else None


def reachability(B: np.ndarray) -> np.ndarray:
    """``R[i, j]`` is True iff there is a directed path from ``x_i`` to ``x_j``."""
    step = (np.asarray(B) != 0).T
    reach = step.copy()
    for _ in range(step.shape[0]):
        nxt = reach | ((reach.astype(int) @ step.astype(int)) > 0)
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    return reach


def ground_truth_ordering(B: np.ndarray) -> tuple[CausalOrderingMatrix, np.ndarray]:
    """Ordering matrix of ``B``'s DAG plus the path-free pair mask."""
    reach = reachability(B)
    order = topological_order(B)
    rank = {v: k for k, v in enumerate(order)}
    d = B.shape[0]
    entries = np.zeros((d, d), dtype=int)
    path_free = np.zeros((d, d), dtype=bool)
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            if reach[i, j]:
                entries[i, j] = -1
            elif reach[j, i]:
                entries[i, j] = 1
            else:
                path_free[i, j] = True
                entries[i, j] = -1 if rank[i] < rank[j] else 1
    return CausalOrderingMatrix(entries, tuple(range(d))), path_free


def population_mixing(spec: SemSpec) -> np.ndarray:
    """Population coefficients of each ``x_i`` on the unit-variance sources
    ``(e_1..e_d, f_1..f_q)``, with the same variance-ratio scaling as
    :func:`generate`."""
    d, q = spec.d, spec.q
    M = np.zeros((d, d + q))
    for i in topological_order(spec.B):
        row = spec.B[i] @ M
        row[d:] += spec.Lambda[i]
        signal_var = float(row @ row)
        row[i] = np.sqrt(signal_var) if signal_var > 0 else 1.0
        M[i] = row
    return M


def population_matrix(spec: SemSpec) -> DataMatrix:
    """A data matrix whose sample moments equal the population moments.

    Columns are ``[M, -M]`` for the mixing matrix ``M``: rows are exactly
    centered and their sample covariance is proportional to ``M M^T``, so
    the least-squares operators act on it as on infinite data. Pair with
    :class:`parcelingam.independence.SourceOracleTester`.
    """
    M = population_mixing(spec)
    return DataMatrix(np.hstack([M, -M]), tuple(range(spec.d)))


def spec_truth(spec: SemSpec) -> SemGroundTruth:
    """Ground truth in the spec's own (unpermuted) coordinates."""
    ordering, path_free = ground_truth_ordering(spec.B)
    return SemGroundTruth(
        ordering,
        spec.B.copy(),
        tuple(range(spec.d)),
        path_free,
        mixing=population_mixing(spec),
        metadata={"network": spec.name, "representative": spec.representative},
    )


def _scale_noise(signal: np.ndarray, z: np.ndarray) -> float:
    # Solve c^2 = var(s) + 2 c cov(s, z) for c > 0 so that
    # var(c z) / var(s + c z) = 1/2 on this sample (var(z) = 1).
    n = z.shape[0]
    sc = signal - signal.mean()
    var_s = sc @ sc / (n - 1)
    cov_sz = sc @ (z - z.mean()) / (n - 1)
    return float(cov_sz + np.sqrt(cov_sz**2 + var_s))


def generate(spec: SemSpec, n: int, permute: bool = True):
    """Draw ``n`` samples; returns ``(DataMatrix, SemGroundTruth)``.

    Variables are simulated in topological order. Variables with at least
    one observed parent or confounder get external-influence variance
    matching the rest of their variance; root variables keep unit-variance
    noise. The variables are then shuffled (when ``permute``) and the
    ground truth is expressed in the shuffled coordinates.

    Raises:
        InvalidSpec: if the spec fails validation.
        ScalingNonConvergence: if the realized variance ratio misses the
            target band.
    """
    spec.validate()
    if n < 3:
        raise ValueError("n must be at least 3")
    rng = np.random.default_rng(spec.seed)
    d, q = spec.d, spec.q
    f = np.vstack([sample_noise(fam, n, rng) for fam in spec.noise_f]) if q else np.zeros((0, n))
    z = np.vstack([sample_noise(fam, n, rng) for fam in spec.noise_e])
    x = np.zeros((d, n))
    scales = np.ones(d)
    ratios = np.ones(d)
    for i in topological_order(spec.B):
        signal = spec.B[i] @ x + spec.Lambda[i] @ f
        if np.any(spec.B[i] != 0) or np.any(spec.Lambda[i] != 0):
            scales[i] = _scale_noise(signal, z[i])
            e = scales[i] * z[i]
            ratio = np.var(e, ddof=1) / np.var(signal + e, ddof=1)
            if not RATIO_BAND[0] <= ratio <= RATIO_BAND[1]:
                raise ScalingNonConvergence(
                    f"variance ratio {ratio:.3f} for x_{i} outside {RATIO_BAND}"
                )
            x[i] = signal + e
            ratios[i] = ratio
        else:
            x[i] = z[i]

    perm = rng.permutation(d) if permute else np.arange(d)
    x_perm = x[perm]
    B_perm = spec.B[np.ix_(perm, perm)]
    ordering, path_free = ground_truth_ordering(B_perm)
    M = population_mixing(spec)[perm]
    truth = SemGroundTruth(
        ordering,
        B_perm,
        tuple(int(p) for p in perm),
        path_free,
        mixing=M,
        metadata={
            "network": spec.name,
            "representative": spec.representative,
            "seed": int(spec.seed),
            "n": int(n),
            "noise_scales": [float(scales[p]) for p in perm],
            "variance_ratios": [float(ratios[p]) for p in perm],
            "mixtures": {
                fam.value: [list(c) for c in comps] for fam, comps in MIXTURES.items()
            },
        },
    )
    data = DataMatrix(x_perm - x_perm.mean(axis=1, keepdims=True), tuple(range(d)))
    return data, truth


def _weights(rng, size):
    lo, hi = WEIGHT_RANGE
    return rng.uniform(lo, hi, size) * rng.choice((-1.0, 1.0), size)


def _from_edges(d, edges, confounders, seed, name, representative=False):
    """Spec with the given structure and random weights in +-[0.5, 1.5]."""
    rng = np.random.default_rng(seed)
    B = np.zeros((d, d))
    for i, j in edges:
        B[i, j] = _weights(rng, 1)[0]
    q = len(confounders)
    Lambda = np.zeros((d, q))
    for k, children in enumerate(confounders):
        Lambda[list(children), k] = _weights(rng, len(children))
    return SemSpec(
        B,
        Lambda,
        tuple(default_family(i) for i in range(d)),
        tuple(default_family(k) for k in range(q)),
        seed=seed,
        name=name,
        representative=representative,
    )


def random_dag(
    d: int, density: float = 0.4, q: int = 0, seed: int = 0, name: str = "random_dag"
) -> SemSpec:
    """Random DAG over a random causal order with ``q`` confounders of
    two or three children each."""
    if d < 2:
        raise ValueError("d must be at least 2")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    if q > d:
        raise ValueError("cannot have more confounders than variables")
    rng = np.random.default_rng(seed)
    order = rng.permutation(d)
    edges = [
        (int(order[b]), int(order[a]))
        for a in range(d)
        for b in range(a + 1, d)
        if rng.random() < density
    ]
    for _ in range(100):
        confounders = [
            tuple(sorted(int(c) for c in rng.choice(d, size=int(rng.integers(2, 4)) if d > 2 else 2, replace=False)))
            for _ in range(q)
        ]
        spec = _from_edges(d, edges, confounders, seed, name)
        if q == 0 or np.linalg.matrix_rank(spec.Lambda) == q:
            return spec
    raise InvalidSpec("could not draw a full-column-rank Lambda")


def chain(d: int = 3, seed: int = 0) -> SemSpec:
    """``x_0 -> x_1 -> ... -> x_{d-1}``, no confounders."""
    return _from_edges(d, [(i + 1, i) for i in range(d - 1)], [], seed, "chain")


def confounded_4var(seed: int = 0) -> SemSpec:
    """Chain ``x_0 -> x_1 -> x_2 -> x_3`` with one confounder of the first
    and last variable: no unconfounded exogenous or sink variable exists,
    but dropping ``x_3`` leaves an ordinary chain.

    Weights are fixed rather than drawn: the confounder needs a large share
    of ``x_3`` and a clearly non-Gaussian (bimodal) law to be detectable at
    n = 1000. ``seed`` only drives the data.
    """
    B = np.zeros((4, 4))
    B[1, 0], B[2, 1], B[3, 2] = 1.0, 1.0, 0.5
    Lambda = np.array([[1.0], [0.0], [0.0], [3.0]])
    return SemSpec(
        B,
        Lambda,
        tuple(default_family(i) for i in range(4)),
        (NoiseFamily.GAUSS_MIX_SYM,),
        seed=seed,
        name="confounded_4var",
        representative=True,
    )


# Representative stand-ins for the benchmark networks. Each has a directed
# path x_0 -> x_1 -> ... through all variables, so every pair has a true
# order, and confounders placed so that the exact-independence oracle
# decides 8/10, 41/45 and 99/105 pairs. Weights are one fixed draw from
# +-[0.5, 1.5] (the last field is the draw's seed); trial seeds only drive
# the data, as with a fixed published network.
_FIG_NETWORKS = {
    "fig2_5var": (
        5,
        [(1, 0), (2, 1), (3, 2), (4, 3)],
        [(1, 3), (2, 3)],
        2,
    ),
    "fig3_10var": (
        10,
        [(1, 0), (2, 1), (3, 2), (4, 3), (5, 4), (6, 5), (7, 6), (8, 7), (9, 8),
         (8, 2), (9, 2), (5, 3), (7, 3), (8, 4), (9, 4)],
        [(0, 1, 2), (0, 1), (8, 9)],
        0,
    ),
    "fig4_15var": (
        15,
        [(k + 1, k) for k in range(14)]
        + [(4, 1), (7, 3), (9, 5), (12, 8), (14, 10), (11, 6)],
        [(0, 1, 2), (7, 8), (12, 14), (13, 14)],
        0,
    ),
}


def builtin_network(name: str, seed: int = 0, **kwargs) -> SemSpec:
    """Named network. ``random_dag`` and ``chain`` accept their own keyword
    arguments (``d``, ``density``, ``q``)."""
    if name == "chain":
        return chain(kwargs.get("d", 3), seed)
    if name == "random_dag":
        return random_dag(
            kwargs.get("d", 6), kwargs.get("density", 0.4), kwargs.get("q", 1), seed
        )
    if name == "confounded_4var":
        return confounded_4var(seed)
    if name in _FIG_NETWORKS:
        d, edges, confounders, weight_seed = _FIG_NETWORKS[name]
        spec = _from_edges(d, edges, confounders, weight_seed, name, representative=True)
        return spec.with_seed(seed)
    raise UnknownNetwork(f"unknown network {name!r}")


BUILTIN_NETWORKS = ("chain", "random_dag", "confounded_4var", *_FIG_NETWORKS)


def data_to_csv(X: DataMatrix, names: Sequence[str] | None = None) -> str:
    """Samples as rows, header row of variable ids (or ``names``)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names if names is not None else X.variable_ids)
    for col in X.values.T:
        writer.writerow([repr(float(v)) for v in col])
    return buf.getvalue()
