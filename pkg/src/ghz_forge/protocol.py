"""Randomized partition protocol: partition sampling, per-outcome collision
graphs, free-diagonal extraction, the random-GHZ ensemble, and the
expectation sandwich used to certify the randomized construction."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bounds, entropy, lp, subrank
from .states import (
    PureState,
    SupportSet,
    distribution_of,
    support_of,
    truncate_to_typical,
)

FAILURE_Y = "*"
FAILURE_X = 0

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4B07B9
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

MATERIALIZE_CAP = 1 << 22
ENUM_GUARD = 10_000_000
_CHUNK = 1 << 16


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX2)
    z ^= z >> np.uint64(31)
    return z


@dataclass
class PartitionFamily:
    """Per-site labelings I_j -> [M_j], derived from a counter-based hash.

    The label of index i at site j is a pure function of (seed, j, i), so
    evaluation order and worker count cannot change the family.
    """

    dims: tuple
    M: tuple
    seed: int

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.M = tuple(int(m) for m in self.M)
        if len(self.M) != len(self.dims):
            raise ValueError("need one partition count per site")
        if any(m < 1 for m in self.M):
            raise ValueError("partition counts must be >= 1")
        self._cache = {}

    @property
    def k(self):
        return len(self.dims)

    def label_array(self, site: int, indices) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.uint64)
        base = (int(self.seed) * _MIX2 + (site + 1) * _GOLDEN) & _MASK64
        z = _splitmix(np.uint64(base) + idx * np.uint64(_GOLDEN))
        return (z % np.uint64(self.M[site])).astype(np.int64)

    def label(self, site: int, index: int) -> int:
        if not 0 <= index < self.dims[site]:
            raise ValueError(f"index {index} outside site {site} dimension")
        return int(self.label_array(site, [index])[0])

    def labels(self, site: int) -> np.ndarray:
        """Materialized labels for every basis index of one site."""
        if site not in self._cache:
            if self.dims[site] > MATERIALIZE_CAP:
                raise ValueError("site dimension too large to materialize")
            self._cache[site] = self.label_array(site, np.arange(self.dims[site]))
        return self._cache[site]

    def outcome_of(self, idx) -> tuple:
        return tuple(self.label(j, i) for j, i in enumerate(idx))


def sample_partitions(dims, M, seed: int) -> PartitionFamily:
    """Uniform independent labels for every basis index, reproducible by seed."""
    return PartitionFamily(tuple(dims), tuple(M), int(seed))


# ---------------------------------------------------------------------------
# collision graphs and free diagonals


@dataclass
class CollisionGraph:
    vertices: tuple
    edges: tuple

    def __post_init__(self):
        vs = set(self.vertices)
        for a, b in self.edges:
            if a == b or a not in vs or b not in vs:
                raise ValueError("edges must join distinct vertices of the graph")


@dataclass
class FreeDiagonal:
    """Isolated-vertex set; diagonality and freeness are checked on creation."""

    elements: frozenset
    vertex_set: frozenset = field(repr=False)

    def __post_init__(self):
        self.elements = frozenset(self.elements)
        self.vertex_set = frozenset(self.vertex_set)
        if not self.elements:
            return
        if not self.elements <= self.vertex_set:
            raise ValueError("diagonal must live inside its vertex set")
        if not subrank.is_diagonal(self.elements):
            raise ValueError("isolated set failed the diagonality check")
        k = len(next(iter(self.elements)))
        proj = [set() for _ in range(k)]
        for e in self.elements:
            for j in range(k):
                proj[j].add(e[j])
        for cand in self.vertex_set:
            if cand not in self.elements and all(cand[j] in proj[j] for j in range(k)):
                raise ValueError("isolated set failed the freeness check")


def _colliding(elems) -> tuple:
    """Pairs of distinct elements sharing at least one coordinate."""
    edges = []
    for a, b in itertools.combinations(elems, 2):
        if any(x == y for x, y in zip(a, b)):
            edges.append((a, b))
    return tuple(edges)


def collision_graph(
    support: SupportSet, pf: PartitionFamily, outcome: tuple
) -> CollisionGraph:
    outcome = tuple(outcome)
    if len(outcome) != support.k or any(
        not 0 <= m < pf.M[j] for j, m in enumerate(outcome)
    ):
        raise ValueError(f"outcome {outcome} outside the partition range")
    verts = tuple(
        e
        for e in sorted(support.elements)
        if all(pf.label(j, e[j]) == outcome[j] for j in range(support.k))
    )
    return CollisionGraph(verts, _colliding(verts))


def isolated_vertices(graph: CollisionGraph) -> FreeDiagonal:
    touched = set()
    for a, b in graph.edges:
        touched.add(a)
        touched.add(b)
    gamma = frozenset(v for v in graph.vertices if v not in touched)
    return FreeDiagonal(gamma, frozenset(graph.vertices))


# ---------------------------------------------------------------------------
# ensembles of generalized GHZ states with classical flags


@dataclass
class GhzEnsemble:
    """Joint weights over (x, y): x a surviving tuple under flag y = m, plus
    the merged failure atom at (0, '*')."""

    weights: dict
    M: tuple | None = None

    def __post_init__(self):
        total = math.fsum(self.weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"ensemble mass {total!r} differs from 1")
        if any(p < 0 for p in self.weights.values()):
            raise ValueError("negative ensemble weight")

    @property
    def failure_mass(self) -> float:
        return self.weights.get((FAILURE_X, FAILURE_Y), 0.0)

    @property
    def success_mass(self) -> float:
        return 1.0 - self.failure_mass

    def pair(self) -> entropy.ConditionalPair:
        return entropy.ConditionalPair(dict(self.weights))

    def conditional_entropy(self) -> float:
        return self.pair().conditional_entropy()


def _group_outcomes(idx_mat, pf, workers):
    n_rows = idx_mat.shape[0]
    k = idx_mat.shape[1]
    chunks = [(lo, min(lo + _CHUNK, n_rows)) for lo in range(0, n_rows, _CHUNK)]

    def label_chunk(span):
        lo, hi = span
        out = np.empty((hi - lo, k), dtype=np.int64)
        for j in range(k):
            out[:, j] = pf.label_array(j, idx_mat[lo:hi, j])
        return out

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(label_chunk, chunks))
    else:
        parts = [label_chunk(span) for span in chunks]
    return np.vstack(parts)


def build_ensemble(
    phi: PureState, pf: PartitionFamily, *, workers: int = 1
) -> GhzEnsemble:
    """Run the two measurement rounds classically: group the support by
    partition outcome, keep per-outcome isolated vertices, merge the rest
    into the failure atom."""
    items = sorted(phi.amps.items())
    idx_mat = np.array([idx for idx, _ in items], dtype=np.int64)
    probs = np.array([abs(a) ** 2 for _, a in items])
    outcomes = _group_outcomes(idx_mat, pf, workers)

    _, gid = np.unique(outcomes, axis=0, return_inverse=True)
    isolated = np.ones(len(items), dtype=bool)
    for j in range(phi.k):
        pair_keys = gid.astype(np.int64) * (max(phi.dims[j], 1) + 1) + idx_mat[:, j]
        _, inv, counts = np.unique(pair_keys, return_inverse=True, return_counts=True)
        isolated &= counts[inv] == 1

    weights = {}
    for row in np.nonzero(isolated)[0]:
        x = tuple(int(v) for v in idx_mat[row])
        y = tuple(int(v) for v in outcomes[row])
        weights[(x, y)] = float(probs[row])
    failure = 1.0 - math.fsum(weights.values())
    if failure > 0.0 or not weights:
        weights[(FAILURE_X, FAILURE_Y)] = max(0.0, failure)
    return GhzEnsemble(weights, M=pf.M)


class UniformReference:
    """The proof's reference on outcomes: (1 - r)/prod(M) per outcome, r on '*'."""

    def __init__(self, M, r: float):
        if not 0.0 < r < 1.0:
            raise ValueError("r must be in (0, 1)")
        self.M = tuple(int(m) for m in M)
        self.r = float(r)
        self._cell = (1.0 - self.r) / math.prod(self.M)

    def get(self, y, default=None):
        if y == FAILURE_Y:
            return self.r
        if len(y) == len(self.M) and all(0 <= m < mm for m, mm in zip(y, self.M)):
            return self._cell
        return default


def achievable_value(ens: GhzEnsemble, alpha: float, reference) -> float:
    """Right-hand side of the ensemble guarantee: a renyi_up lower bound
    evaluated against an explicit reference distribution on the flags."""
    if alpha <= 1 or alpha == math.inf:
        raise ValueError("alpha must be finite and > 1")
    total = 0.0
    for (x, y), p in ens.weights.items():
        r = reference.get(y, 0.0) if hasattr(reference, "get") else reference[y]
        if r is None or r <= 0.0:
            raise ValueError(f"reference vanishes at flag {y!r} with positive mass")
        total += p**alpha * r ** (1.0 - alpha)
    return math.log2(total) / (1.0 - alpha)


@dataclass
class ExtractResult:
    N: int
    N_exact: int
    alpha: float
    eps: float
    renyi_up_value: float


def extract_ghz_count(ens: GhzEnsemble, alpha: float, eps: float) -> ExtractResult:
    """Smooth count floor(H^up_alpha - (1 + 1/(alpha-1)) log2(10/eps^2)) and the
    exact-LOCC count floor(H^down_inf)."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    pair = ens.pair()
    up = entropy.renyi_up(pair, alpha)
    smooth = entropy.alt_smooth_min_lb(pair, alpha, eps)
    exact = entropy.renyi_down(pair, math.inf)
    return ExtractResult(
        N=math.floor(smooth),
        N_exact=math.floor(exact),
        alpha=alpha,
        eps=eps,
        renyi_up_value=up,
    )


# ---------------------------------------------------------------------------
# homogeneous subset models and the expectation sandwich


@dataclass
class HomogeneousModel:
    """Pair-inclusion probabilities p_J, keyed by the disagreement mask."""

    k: int
    p: dict

    def __post_init__(self):
        need = {0} | set(entropy.proper_masks(self.k)) | {(1 << self.k) - 1}
        if set(self.p) != need:
            raise ValueError("model must assign p_J for every mask including 0 and [k]")
        for mask, v in self.p.items():
            if not 0.0 <= v <= 1.0 + 1e-12:
                raise ValueError(f"p_J at mask {mask} outside [0, 1]")
            if v > self.p[0] + 1e-12:
                raise ValueError("p_empty must dominate every p_J")


@dataclass
class IndependentInclusionModel:
    """Each basis index of site j enters W_j independently with probability q_j."""

    dims: tuple
    q: tuple

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.q = tuple(float(v) for v in self.q)
        if len(self.q) != len(self.dims):
            raise ValueError("need one inclusion probability per site")
        if any(not 0.0 <= v <= 1.0 for v in self.q):
            raise ValueError("inclusion probabilities must lie in [0, 1]")

    def homogeneous_model(self) -> HomogeneousModel:
        k = len(self.dims)
        base = math.prod(self.q)
        p = {0: base}
        for mask in list(entropy.proper_masks(k)) + [(1 << k) - 1]:
            p[mask] = base * math.prod(
                self.q[j] for j in entropy.mask_sites(mask, k)
            )
        return HomogeneousModel(k, p)

    def _positions(self):
        return [(j, v) for j, d in enumerate(self.dims) for v in range(d)]

    def config_count(self) -> int:
        return 1 << len(self._positions())

    def presence_matrix(self, elements, config_slice) -> tuple:
        """(presence, weights) for the subset choices indexed by config_slice."""
        pos = self._positions()
        bit_of = {pv: b for b, pv in enumerate(pos)}
        configs = np.asarray(config_slice, dtype=np.int64)
        weights = np.ones(len(configs))
        for b, (j, _) in enumerate(pos):
            on = (configs >> b) & 1
            weights *= np.where(on == 1, self.q[j], 1.0 - self.q[j])
        present = np.ones((len(configs), len(elements)), dtype=bool)
        for col, e in enumerate(elements):
            for j, i in enumerate(e):
                present[:, col] &= ((configs >> bit_of[(j, i)]) & 1) == 1
        return present, weights

    def sample_configs(self, rng, n_samples) -> np.ndarray:
        bits = rng.integers(0, 2, size=(n_samples, len(self._positions())))
        return (bits << np.arange(bits.shape[1])).sum(axis=1).astype(np.int64)


@dataclass
class PartitionCellModel:
    """W_j is one cell of a uniformly random labeling I_j -> [M_j]; the
    disagreement-mask probabilities are those of the partition protocol."""

    dims: tuple
    M: tuple

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.M = tuple(int(m) for m in self.M)
        if len(self.M) != len(self.dims):
            raise ValueError("need one partition count per site")
        if any(m < 1 for m in self.M):
            raise ValueError("partition counts must be >= 1")

    def homogeneous_model(self) -> HomogeneousModel:
        k = len(self.dims)
        base = 1.0 / math.prod(self.M)
        p = {0: base}
        for mask in list(entropy.proper_masks(k)) + [(1 << k) - 1]:
            p[mask] = base / math.prod(self.M[j] for j in entropy.mask_sites(mask, k))
        return HomogeneousModel(k, p)

    def _radices(self):
        return [self.M[j] for j, d in enumerate(self.dims) for _ in range(d)]

    def config_count(self) -> int:
        return math.prod(m**d for m, d in zip(self.M, self.dims))

    def presence_matrix(self, elements, config_slice) -> tuple:
        radices = self._radices()
        offsets = {}
        b = 0
        for j, d in enumerate(self.dims):
            for v in range(d):
                offsets[(j, v)] = b
                b += 1
        strides = np.ones(len(radices), dtype=np.int64)
        for i in range(len(radices) - 2, -1, -1):
            strides[i] = strides[i + 1] * radices[i + 1]
        configs = np.asarray(config_slice, dtype=np.int64)
        present = np.ones((len(configs), len(elements)), dtype=bool)
        for col, e in enumerate(elements):
            for j, i in enumerate(e):
                b = offsets[(j, i)]
                digit = (configs // strides[b]) % radices[b]
                present[:, col] &= digit == 0
        return present, np.full(len(configs), 1.0 / self.config_count())

    def sample_configs(self, rng, n_samples) -> np.ndarray:
        radices = self._radices()
        strides = np.ones(len(radices), dtype=np.int64)
        for i in range(len(radices) - 2, -1, -1):
            strides[i] = strides[i + 1] * radices[i + 1]
        digits = np.stack(
            [rng.integers(0, m, size=n_samples) for m in radices], axis=1
        )
        return (digits * strides).sum(axis=1).astype(np.int64)


def meanbounds_sandwich(support: SupportSet, f: dict, model: HomogeneousModel):
    """Lower/upper bounds on E[sum_{i in Gamma} f(i)] for a homogeneous model."""
    if any(v < 0 for v in f.values()):
        raise ValueError("f must be nonnegative")
    if any(e not in support.elements for e in f):
        raise ValueError("f must be supported on the set")
    total = math.fsum(f.get(e, 0.0) for e in support.elements)
    penalty = math.fsum(
        2.0 ** entropy.max_entropy_conditional(support, mask) * model.p[mask]
        for mask in entropy.proper_masks(support.k)
    )
    return (model.p[0] - penalty) * total, model.p[0] * total


def _isolated_sums(elements, f_vec, present):
    adj = np.zeros((len(elements), len(elements)), dtype=bool)
    for a in range(len(elements)):
        for b in range(a + 1, len(elements)):
            if any(x == y for x, y in zip(elements[a], elements[b])):
                adj[a, b] = adj[b, a] = True
    collide = present @ adj.astype(np.int64) > 0
    isolated = present & ~collide
    return isolated @ f_vec


def exact_expectation(support: SupportSet, f: dict, generator) -> float:
    """E[sum_{i in Gamma} f(i)] by full enumeration of the generator's
    configuration space (subset choices or labelings)."""
    count = generator.config_count()
    if count > ENUM_GUARD:
        raise ValueError(f"{count} configurations exceed the enumeration guard")
    elements = sorted(support.elements)
    f_vec = np.array([f.get(e, 0.0) for e in elements])
    total = 0.0
    for lo in range(0, count, _CHUNK):
        configs = np.arange(lo, min(lo + _CHUNK, count))
        present, weights = generator.presence_matrix(elements, configs)
        total += float(weights @ _isolated_sums(elements, f_vec, present))
    return total


def monte_carlo_expectation(support: SupportSet, f: dict, generator, samples: int, seed: int):
    """Monte Carlo estimate of the isolated-weight expectation; returns
    (mean, standard error)."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    elements = sorted(support.elements)
    f_vec = np.array([f.get(e, 0.0) for e in elements])
    values = np.empty(samples)
    done = 0
    while done < samples:
        take = min(_CHUNK, samples - done)
        configs = generator.sample_configs(rng, take)
        present, _ = generator.presence_matrix(elements, configs)
        values[done : done + take] = _isolated_sums(elements, f_vec, present)
        done += take
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return mean, stderr


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass
class ProtocolReport:
    n: int
    delta: float
    eps: float
    seed: int
    x: tuple
    M: tuple
    success_mass: float
    N_exact: int
    N_smooth: int
    rate_per_copy: float
    conditional_entropy: float = 0.0
    conditional_entropy_rate: float = 0.0
    retained_mass: float = 0.0
    alpha: float = 2.0
    theorem1_value: float = 0.0
    ensemble: GhzEnsemble | None = field(default=None, repr=False)

    def serialize(self) -> str:
        xs = ", ".join(f"{v:.6f}" for v in self.x)
        ms = ", ".join(str(m) for m in self.M)
        return (
            "{"
            f'"n": {self.n}, "delta": {self.delta:.6f}, "eps": {self.eps:.6f}, '
            f'"seed": {self.seed}, "x": [{xs}], "M": [{ms}], '
            f'"success_mass": {self.success_mass:.6f}, '
            f'"N_exact": {self.N_exact}, "N_smooth": {self.N_smooth}, '
            f'"rate_per_copy": {self.rate_per_copy:.6f}'
            "}"
        )


def run_protocol(
    psi: PureState,
    n: int,
    delta: float,
    eps: float,
    seed: int,
    *,
    workers: int = 1,
    alpha: float | None = None,
) -> ProtocolReport:
    """Typical truncation, covering-LP rates, partition sampling, ensemble
    assembly and GHZ extraction, end to end."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    trunc = truncate_to_typical(psi, n, delta, eps)
    phi = trunc.state

    base = distribution_of(psi)
    sol = lp.solve_primal(lp.CoveringLP(base.k, bounds.entropy_profile(base)))
    x = sol.x
    exponents = [n * (xj + 2.0 * delta) + psi.k for xj in x]
    if max(exponents) > 60:
        raise ValueError("partition counts overflow the integer guard")
    m_counts = tuple(math.ceil(2.0**e) for e in exponents)

    pf = sample_partitions(phi.dims, m_counts, seed)
    ens = build_ensemble(phi, pf, workers=workers)
    pair = ens.pair()
    cond = pair.conditional_entropy()

    if alpha is None:
        q = distribution_of(phi)
        dval = _delta_of_support(support_of(phi), m_counts)
        gap = entropy.min_entropy(q) - math.fsum(math.log2(m) for m in m_counts)
        alpha = 1.0 + dval / gap if (dval > 0 and gap > 0) else 2.0
    extract = extract_ghz_count(ens, alpha, eps)

    return ProtocolReport(
        n=n,
        delta=delta,
        eps=eps,
        seed=seed,
        x=tuple(x),
        M=m_counts,
        success_mass=ens.success_mass,
        N_exact=extract.N_exact,
        N_smooth=extract.N,
        rate_per_copy=extract.N / n,
        conditional_entropy=cond,
        conditional_entropy_rate=cond / n,
        retained_mass=trunc.retained_mass,
        alpha=alpha,
        theorem1_value=bounds.theorem1_bound(base).value,
        ensemble=ens,
    )


def _delta_of_support(supp: SupportSet, m_counts) -> float:
    log_m = [math.log2(m) for m in m_counts]
    best = min(
        sum(log_m[j] for j in entropy.mask_sites(mask, supp.k))
        - entropy.max_entropy_conditional(supp, mask)
        for mask in entropy.proper_masks(supp.k)
    )
    return -supp.k + best
