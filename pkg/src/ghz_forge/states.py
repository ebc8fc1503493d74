"""Sparse multipartite pure states, induced distributions and state families."""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

IndexTuple = tuple  # length-k tuple of per-site basis indices

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
AMP_DROP_TOL = 1e-14

SUPPORT_POWER_GUARD = 10_000_000


class StateValidationError(ValueError):
    pass


class StateFileError(ValueError):
    """Raised on malformed state files; message carries line/field info."""


class EmptyTypicalSetError(ValueError):
    """No tuple satisfies the typicality window (n too small for delta)."""

    def __init__(self, message, *, n, delta, eps, window, retained_mass=0.0):
        super().__init__(message)
        self.n = n
        self.delta = delta
        self.eps = eps
        self.window = window
        self.retained_mass = retained_mass


def _check_sites(k, dims, idx):
    if len(idx) != k:
        raise StateValidationError(f"index {idx} has length {len(idx)}, expected {k}")
    for j, (i, d) in enumerate(zip(idx, dims)):
        if not 0 <= i < d:
            raise StateValidationError(f"index {idx}: site {j} entry {i} outside [0, {d})")


@dataclass
class PureState:
    """A unit vector stored as a sparse map from index tuples to amplitudes."""

    k: int
    dims: tuple
    amps: dict

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if self.k != len(self.dims):
            raise StateValidationError("dims length must equal party count")
        cleaned = {}
        for idx, a in self.amps.items():
            idx = tuple(int(i) for i in idx)
            _check_sites(self.k, self.dims, idx)
            a = complex(a)
            if abs(a) > AMP_DROP_TOL:
                cleaned[idx] = a
        norm2 = math.fsum(abs(a) ** 2 for a in cleaned.values())
        if abs(norm2 - 1.0) > NORM_TOL:
            raise StateValidationError(f"state norm^2 = {norm2!r}, not 1 within {NORM_TOL}")
        self.amps = cleaned


@dataclass
class JointDistribution:
    """Nonnegative weights over index tuples; may be subnormalized."""

    k: int
    dims: tuple
    probs: dict
    normalized: bool = True

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if self.k != len(self.dims):
            raise StateValidationError("dims length must equal party count")
        cleaned = {}
        for idx, p in self.probs.items():
            idx = tuple(int(i) for i in idx)
            _check_sites(self.k, self.dims, idx)
            p = float(p)
            if p < 0:
                raise StateValidationError(f"negative weight {p} at {idx}")
            if p > 0:
                cleaned[idx] = p
        total = math.fsum(cleaned.values())
        if total > 1.0 + NORM_TOL:
            raise StateValidationError(f"total weight {total} exceeds 1")
        if self.normalized and abs(total - 1.0) > NORM_TOL:
            raise StateValidationError(f"total weight {total}, not 1 within {NORM_TOL}")
        self.probs = cleaned

    def total(self):
        return math.fsum(self.probs.values())

    def marginal(self, sites):
        """Marginal over the given site indices (kept in ascending order)."""
        sites = sorted(sites)
        out = {}
        for idx, p in self.probs.items():
            key = tuple(idx[j] for j in sites)
            out[key] = out.get(key, 0.0) + p
        return JointDistribution(
            k=len(sites),
            dims=tuple(self.dims[j] for j in sites),
            probs=out,
            normalized=self.normalized,
        )


@dataclass
class SupportSet:
    """A nonempty subset of a product index space."""

    k: int
    dims: tuple
    elements: frozenset

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        elems = frozenset(tuple(int(i) for i in idx) for idx in self.elements)
        if not elems:
            raise StateValidationError("support is empty")
        for idx in elems:
            _check_sites(self.k, self.dims, idx)
        self.elements = elems

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(sorted(self.elements))


@dataclass
class LocalUnitary:
    site: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise StateValidationError("unitary must be a square matrix")
        gram = u @ u.conj().T
        if np.max(np.abs(gram - np.eye(u.shape[0]))) > UNITARY_TOL:
            raise StateValidationError("matrix is not unitary within tolerance")
        self.matrix = u


def distribution_of(state: PureState) -> JointDistribution:
    """Squared-modulus distribution induced by measuring in the product basis."""
    probs = {idx: abs(a) ** 2 for idx, a in state.amps.items()}
    return JointDistribution(state.k, state.dims, probs, normalized=True)


def support_of(x) -> SupportSet:
    if isinstance(x, PureState):
        elems = x.amps.keys()
        k, dims = x.k, x.dims
    elif isinstance(x, JointDistribution):
        elems = x.probs.keys()
        k, dims = x.k, x.dims
    else:
        raise TypeError(f"unsupported input {type(x).__name__}")
    return SupportSet(k, dims, frozenset(elems))


def apply_local_unitary(state: PureState, u: LocalUnitary) -> PureState:
    j = u.site
    if not 0 <= j < state.k:
        raise StateValidationError(f"site {j} outside [0, {state.k})")
    d = state.dims[j]
    if u.matrix.shape[0] != d:
        raise StateValidationError(
            f"unitary dimension {u.matrix.shape[0]} does not match site dimension {d}"
        )
    out = {}
    for idx, a in state.amps.items():
        col = u.matrix[:, idx[j]]
        for r in range(d):
            c = col[r]
            if c == 0:
                continue
            new = idx[:j] + (r,) + idx[j + 1 :]
            out[new] = out.get(new, 0j) + c * a
    return PureState(state.k, state.dims, out)


def permute_sites(state: PureState, perm) -> PureState:
    """Reorder the parties: new site j holds what was at perm[j]."""
    perm = list(perm)
    dims = tuple(state.dims[p] for p in perm)
    amps = {tuple(idx[p] for p in perm): a for idx, a in state.amps.items()}
    return PureState(state.k, dims, amps)


def tensor_power(state: PureState, n: int) -> PureState:
    """n-fold tensor power with per-site indices flattened to mixed-radix ints."""
    if n < 1:
        raise StateValidationError("power must be >= 1")
    if len(state.amps) ** n > SUPPORT_POWER_GUARD:
        raise StateValidationError(
            f"support^{n} has {len(state.amps)}^{n} tuples, beyond the enumeration guard"
        )
    dims = tuple(d**n for d in state.dims)
    amps = {}
    for combo in itertools.product(sorted(state.amps), repeat=n):
        a = 1.0 + 0j
        for sym in combo:
            a *= state.amps[sym]
        idx = tuple(_flatten_site(combo, j, state.dims[j]) for j in range(state.k))
        amps[idx] = a
    return PureState(state.k, dims, amps)


def _flatten_site(combo, j, d):
    v = 0
    for sym in combo:
        v = v * d + sym[j]
    return v


# ---------------------------------------------------------------------------
# named families

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def ghz_p(probs, k: int = 3) -> PureState:
    """Generalized GHZ state with coefficients sqrt(P(x)) on repeated tuples."""
    probs = [float(p) for p in probs]
    if any(p < 0 for p in probs) or abs(math.fsum(probs) - 1.0) > 1e-9:
        raise StateValidationError("probs must be a probability vector")
    if k < 2:
        raise StateValidationError("need at least two parties")
    r = len(probs)
    amps = {(x,) * k: math.sqrt(p) for x, p in enumerate(probs) if p > 0}
    return PureState(k, (r,) * k, amps)


def ghz(r: int = 2, k: int = 3) -> PureState:
    """Uniform r-level GHZ state on k parties."""
    if r < 1:
        raise StateValidationError("need at least one level")
    return ghz_p([1.0 / r] * r, k)


def w(k: int) -> PureState:
    if k < 2:
        raise StateValidationError("need at least two parties")
    a = 1.0 / math.sqrt(k)
    amps = {}
    for j in range(k):
        idx = [0] * k
        idx[j] = 1
        amps[tuple(idx)] = a
    return PureState(k, (2,) * k, amps)


def asymmetric_w(p: float) -> PureState:
    """sqrt(p)|100> + sqrt(p)|010> + sqrt(1-2p)|001> for p in [0, 1/2]."""
    if not 0.0 <= p <= 0.5:
        raise StateValidationError(f"p={p} outside [0, 1/2]")
    amps = {
        (1, 0, 0): math.sqrt(p),
        (0, 1, 0): math.sqrt(p),
        (0, 0, 1): math.sqrt(1.0 - 2.0 * p),
    }
    return PureState(3, (2, 2, 2), amps)


def rohrlich(p: float) -> PureState:
    """Interpolates between a B-C EPR pair (p=0) and a rotated GHZ (p=1/2)."""
    if not 0.0 <= p <= 1.0:
        raise StateValidationError(f"p={p} outside [0, 1]")
    amps = {
        (0, 0, 0): math.sqrt(p / 2.0),
        (0, 1, 1): math.sqrt(p / 2.0),
        (1, 0, 0): math.sqrt((1.0 - p) / 2.0),
        (1, 1, 1): -math.sqrt((1.0 - p) / 2.0),
    }
    return PureState(3, (2, 2, 2), amps)


def permutation_superposition(k: int) -> PureState:
    if k < 2:
        raise StateValidationError("need at least two parties")
    a = 1.0 / math.sqrt(math.factorial(k))
    amps = {tuple(sigma): a for sigma in itertools.permutations(range(k))}
    return PureState(k, (k,) * k, amps)


_FAMILIES = {
    "ghz": ghz_p,
    "w": w,
    "asymmetric_w": asymmetric_w,
    "rohrlich": rohrlich,
    "permutation": permutation_superposition,
}


def family(name: str, param) -> PureState:
    """Build a named state family; see _FAMILIES for the accepted names."""
    if name not in _FAMILIES:
        raise StateValidationError(
            f"unknown family {name!r}; choose from {sorted(_FAMILIES)}"
        )
    if name == "ghz":
        if isinstance(param, (int, np.integer)):
            return ghz(int(param))
        return ghz_p(param)
    if name in ("w", "permutation"):
        return _FAMILIES[name](int(param))
    return _FAMILIES[name](float(param))


# ---------------------------------------------------------------------------
# jointly typical truncation


@dataclass
class TruncationResult:
    state: PureState
    retained_mass: float
    window: float
    n: int
    delta: float
    eps: float


def truncate_to_typical(state: PureState, n: int, delta: float, eps: float = 0.1) -> TruncationResult:
    """Renormalized restriction of state^(x)n to the jointly typical set.

    A length-n tuple of support symbols is typical when, for every nonempty
    subset J of sites, its empirical per-copy surprisal under the J-marginal
    lies within delta + (1/n) log2(1/(1-eps)) of the marginal's entropy.
    Per-site indices of the output are flattened to mixed-radix integers.
    """
    if n < 1:
        raise StateValidationError("n must be >= 1")
    if delta <= 0:
        raise StateValidationError("delta must be positive")
    if not 0.0 < eps < 1.0:
        raise StateValidationError("eps must be in (0, 1)")
    symbols = sorted(state.amps)
    s = len(symbols)
    if s**n > SUPPORT_POWER_GUARD:
        raise StateValidationError(
            f"support^{n} has {s}^{n} tuples, beyond the enumeration guard"
        )
    window = delta - math.log2(1.0 - eps) / n

    dist = distribution_of(state)
    k = state.k
    masks = range(1, 1 << k)
    # per symbol and subset J: surprisal of the J-marginal at the symbol's projection
    surprisal = np.empty((s, (1 << k) - 1))
    entropies = np.empty((1 << k) - 1)
    for mi, mask in enumerate(masks):
        sites = [j for j in range(k) if mask >> j & 1]
        marg = {}
        for idx, p in dist.probs.items():
            key = tuple(idx[j] for j in sites)
            marg[key] = marg.get(key, 0.0) + p
        entropies[mi] = -math.fsum(p * math.log2(p) for p in marg.values())
        for si, sym in enumerate(symbols):
            surprisal[si, mi] = -math.log2(marg[tuple(sym[j] for j in sites)])

    probs = np.array([dist.probs[sym] for sym in symbols])
    log_probs = np.log(probs)

    # typicality depends on the type (count vector) only
    accepted = []
    total_mass = 0.0
    for counts in _compositions(n, s):
        c = np.array(counts, dtype=float)
        emp = c @ surprisal / n
        if np.all(np.abs(emp - entropies) <= window + 1e-12):
            mass = math.exp(
                _log_multinomial(n, counts) + float(c @ log_probs)
            )
            accepted.append(counts)
            total_mass += mass
    if not accepted:
        raise EmptyTypicalSetError(
            f"typical set empty at n={n}, delta={delta}, eps={eps} (window {window:.6g})",
            n=n,
            delta=delta,
            eps=eps,
            window=window,
        )

    scale = 1.0 / math.sqrt(total_mass)
    amps = {}
    dims = tuple(d**n for d in state.dims)
    for counts in accepted:
        base = 1.0 + 0j
        for si, c in enumerate(counts):
            base *= state.amps[symbols[si]] ** c
        base *= scale
        for seq in _multiset_sequences(symbols, counts):
            idx = tuple(_flatten_site(seq, j, state.dims[j]) for j in range(k))
            amps[idx] = base
    out = PureState(k, dims, amps)
    return TruncationResult(out, total_mass, window, n, delta, eps)


def _compositions(n, parts):
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def _log_multinomial(n, counts):
    v = math.lgamma(n + 1)
    for c in counts:
        v -= math.lgamma(c + 1)
    return v


def _multiset_sequences(symbols, counts):
    """All arrangements of the multiset {symbols[i] x counts[i]} as tuples."""
    n = sum(counts)
    seq = [None] * n
    remaining = list(counts)

    def rec(pos):
        if pos == n:
            yield tuple(seq)
            return
        for si, c in enumerate(remaining):
            if c == 0:
                continue
            remaining[si] -= 1
            seq[pos] = symbols[si]
            yield from rec(pos + 1)
            remaining[si] += 1

    yield from rec(0)


# ---------------------------------------------------------------------------
# state file format


def parse_state_text(text: str) -> PureState:
    """Parse the JSON state document {k, dims, amps:[{idx, re, im}, ...]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise StateFileError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise StateFileError("top-level value must be an object")
    for fld in ("k", "dims", "amps"):
        if fld not in doc:
            raise StateFileError(f"missing field {fld!r}")
    k = doc["k"]
    if not isinstance(k, int) or k < 1:
        raise StateFileError("field 'k' must be a positive integer")
    dims = doc["dims"]
    if not isinstance(dims, list) or not all(isinstance(d, int) and d > 0 for d in dims):
        raise StateFileError("field 'dims' must be a list of positive integers")
    amps = {}
    if not isinstance(doc["amps"], list):
        raise StateFileError("field 'amps' must be a list")
    for pos, rec in enumerate(doc["amps"]):
        where = f"amps[{pos}]"
        if not isinstance(rec, dict):
            raise StateFileError(f"field {where} must be an object")
        for fld in ("idx", "re", "im"):
            if fld not in rec:
                raise StateFileError(f"field {where} is missing {fld!r}")
        idx = rec["idx"]
        if not isinstance(idx, list) or not all(isinstance(i, int) for i in idx):
            raise StateFileError(f"field {where}.idx must be a list of integers")
        try:
            a = complex(float(rec["re"]), float(rec["im"]))
        except (TypeError, ValueError):
            raise StateFileError(f"field {where}.re/.im must be numbers") from None
        key = tuple(idx)
        if key in amps:
            raise StateFileError(f"field {where}.idx duplicates an earlier record")
        amps[key] = a
    try:
        return PureState(k, tuple(dims), amps)
    except StateValidationError as e:
        raise StateFileError(str(e)) from e


def load_state(path) -> PureState:
    with open(path, encoding="utf-8") as fh:
        return parse_state_text(fh.read())


def dump_state(state: PureState) -> str:
    recs = [
        {"idx": list(idx), "re": a.real, "im": a.imag}
        for idx, a in sorted(state.amps.items())
    ]
    return json.dumps({"k": state.k, "dims": list(state.dims), "amps": recs}, indent=1)


def save_state(state: PureState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_state(state))


def hadamard(site: int) -> LocalUnitary:
    return LocalUnitary(site, HADAMARD)
