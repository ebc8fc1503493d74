"""Entropy functionals: Shannon, Renyi, conditional variants, smoothing bounds,
majorization, purified distance, and constrained conditional-entropy maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .states import JointDistribution, SupportSet

LOG2 = math.log(2.0)

# gradient cap used where the entropy gradient diverges at zero mass
_GRAD_CAP = 1024.0


class InfeasibleMarginalsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# subset masks


def mask_sites(mask: int, k: int) -> list:
    return [j for j in range(k) if mask >> j & 1]


def proper_masks(k: int):
    """All J with J != empty and J != [k], as bitmasks."""
    return range(1, (1 << k) - 1)


def complement(mask: int, k: int) -> int:
    return ((1 << k) - 1) ^ mask


@dataclass
class EntropyProfile:
    """Right-hand sides h_J, one per proper nonempty subset mask."""

    k: int
    values: dict

    def __post_init__(self):
        want = set(proper_masks(self.k))
        have = set(self.values)
        if have != want:
            raise ValueError("profile must assign every proper nonempty subset")
        for mask, h in self.values.items():
            if h < -1e-12:
                raise ValueError(f"negative entry {h} at mask {mask}")
            self.values[mask] = max(0.0, float(h))

    @classmethod
    def from_distribution(cls, dist: JointDistribution) -> "EntropyProfile":
        return cls(dist.k, {m: conditional_shannon(dist, m) for m in proper_masks(dist.k)})

    @classmethod
    def from_support(cls, support: SupportSet) -> "EntropyProfile":
        return cls(
            support.k,
            {m: max_entropy_conditional(support, m) for m in proper_masks(support.k)},
        )


# ---------------------------------------------------------------------------
# Shannon / max entropies


def _entropy_of(values) -> float:
    return -math.fsum(p * math.log2(p) for p in values if p > 0.0)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    return _entropy_of((p, 1.0 - p))


def shannon(dist: JointDistribution) -> float:
    if not dist.normalized or abs(dist.total() - 1.0) > 1e-12:
        raise ValueError("shannon entropy requires a normalized distribution")
    return _entropy_of(dist.probs.values())


def conditional_shannon(dist: JointDistribution, mask: int) -> float:
    """H(A_J | A_Jbar) = H(full) - H(marginal on the complement)."""
    if not 0 < mask < (1 << dist.k):
        raise ValueError(f"mask {mask} out of range for k={dist.k}")
    h_full = shannon(dist)
    rest = mask_sites(complement(mask, dist.k), dist.k)
    if not rest:
        return h_full
    marg = dist.marginal(rest)
    return h_full - _entropy_of(marg.probs.values())


def max_entropy_conditional(support: SupportSet, mask: int) -> float:
    """log2 of the largest fiber of the support over the complement coordinates."""
    if not 0 < mask < (1 << support.k):
        raise ValueError(f"mask {mask} out of range for k={support.k}")
    rest = mask_sites(complement(mask, support.k), support.k)
    fibers = {}
    for idx in support.elements:
        key = tuple(idx[j] for j in rest)
        fibers[key] = fibers.get(key, 0) + 1
    return math.log2(max(fibers.values()))


# ---------------------------------------------------------------------------
# Renyi entropies of a plain distribution


def renyi(dist: JointDistribution, alpha: float) -> float:
    if alpha == math.inf:
        return min_entropy(dist)
    if alpha <= 0 or alpha == 1:
        raise ValueError(f"alpha={alpha} must be positive and != 1")
    if abs(dist.total() - 1.0) > 1e-12:
        raise ValueError("renyi entropy requires a normalized distribution")
    s = math.fsum(p**alpha for p in dist.probs.values())
    return math.log2(s) / (1.0 - alpha)


def min_entropy(dist: JointDistribution) -> float:
    if abs(dist.total() - 1.0) > 1e-12:
        raise ValueError("min-entropy requires a normalized distribution")
    return -math.log2(max(dist.probs.values()))


# ---------------------------------------------------------------------------
# conditional pairs and the two conditional Renyi families


@dataclass
class ConditionalPair:
    """Joint weights over (x, y); possibly subnormalized."""

    weights: dict

    def __post_init__(self):
        cleaned = {}
        total = 0.0
        for (x, y), p in self.weights.items():
            p = float(p)
            if p < 0:
                raise ValueError(f"negative weight {p} at {(x, y)}")
            if p > 0:
                cleaned[(x, y)] = p
                total += p
        if total > 1.0 + 1e-9:
            raise ValueError(f"total weight {total} exceeds 1")
        if not cleaned:
            raise ValueError("conditional pair has empty support")
        self.weights = cleaned

    def y_marginal(self) -> dict:
        out = {}
        for (_, y), p in self.weights.items():
            out[y] = out.get(y, 0.0) + p
        return out

    def by_y(self) -> dict:
        out = {}
        for (x, y), p in self.weights.items():
            out.setdefault(y, {})[x] = p
        return out

    def total(self) -> float:
        return math.fsum(self.weights.values())

    def conditional_entropy(self) -> float:
        """Shannon H(X|Y) of the (normalized) pair."""
        if abs(self.total() - 1.0) > 1e-9:
            raise ValueError("conditional entropy requires a normalized pair")
        return _entropy_of(self.weights.values()) - _entropy_of(self.y_marginal().values())


def _check_alpha(alpha):
    if alpha != math.inf and alpha <= 1:
        raise ValueError(f"alpha={alpha} must be > 1 (or inf)")


def renyi_up(pair: ConditionalPair, alpha: float) -> float:
    """Reference-optimized conditional Renyi entropy H^up_alpha(X|Y)."""
    _check_alpha(alpha)
    groups = pair.by_y()
    if alpha == math.inf:
        return -math.log2(math.fsum(max(g.values()) for g in groups.values()))
    s = math.fsum(
        math.fsum(p**alpha for p in g.values()) ** (1.0 / alpha) for g in groups.values()
    )
    return alpha / (1.0 - alpha) * math.log2(s)


def renyi_up_optimizer(pair: ConditionalPair, alpha: float) -> dict:
    """The reference distribution on Y attaining the supremum in renyi_up."""
    _check_alpha(alpha)
    if alpha == math.inf:
        raw = {y: max(g.values()) for y, g in pair.by_y().items()}
    else:
        raw = {
            y: math.fsum(p**alpha for p in g.values()) ** (1.0 / alpha)
            for y, g in pair.by_y().items()
        }
    z = math.fsum(raw.values())
    return {y: v / z for y, v in raw.items()}


def renyi_down(pair: ConditionalPair, alpha: float) -> float:
    """Marginal-referenced conditional Renyi entropy H^down_alpha(X|Y)."""
    _check_alpha(alpha)
    py = pair.y_marginal()
    if alpha == math.inf:
        best = max(p / py[y] for (_, y), p in pair.weights.items())
        return -math.log2(best)
    s = math.fsum(p**alpha * py[y] ** (1.0 - alpha) for (_, y), p in pair.weights.items())
    return math.log2(s) / (1.0 - alpha)


def renyi_up_with_reference(pair: ConditionalPair, alpha: float, reference: dict) -> float:
    """-D_alpha(P_XY || I_X (x) R); lower-bounds renyi_up for any valid R."""
    if alpha == math.inf or alpha <= 1:
        raise ValueError(f"alpha={alpha} must be finite and > 1")
    tot = math.fsum(reference.values())
    if abs(tot - 1.0) > 1e-9 or any(v < 0 for v in reference.values()):
        raise ValueError("reference must be a normalized distribution on Y")
    s = 0.0
    for (_, y), p in pair.weights.items():
        r = reference.get(y, 0.0)
        if r <= 0.0:
            raise ValueError(f"reference vanishes at y={y!r} where P_Y > 0")
        s += p**alpha * r ** (1.0 - alpha)
    return math.log2(s) / (1.0 - alpha)


def smooth_min_lb(pair: ConditionalPair, alpha: float, eps: float) -> float:
    """Smooth-min-entropy lower bound H^up_alpha - log2(2/eps^2)/(alpha-1)."""
    _check_alpha(alpha)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps={eps} outside (0, 1]")
    if alpha == math.inf:
        penalty = 0.0
    else:
        penalty = math.log2(2.0 / eps**2) / (alpha - 1.0)
    return renyi_up(pair, alpha) - penalty


def alt_smooth_min_lb(pair: ConditionalPair, alpha: float, eps: float) -> float:
    """Alternative bound with the (1 + 1/(alpha-1)) log2(10/eps^2) penalty."""
    _check_alpha(alpha)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps={eps} outside (0, 1]")
    coeff = 1.0 if alpha == math.inf else 1.0 + 1.0 / (alpha - 1.0)
    return renyi_up(pair, alpha) - coeff * math.log2(10.0 / eps**2)


# ---------------------------------------------------------------------------
# majorization and purified distance


def _value_array(p):
    if isinstance(p, dict):
        return np.array(sorted(p.values(), reverse=True), dtype=float)
    return np.sort(np.asarray(list(p), dtype=float))[::-1]


def majorizes(p, q) -> bool:
    """True when p is majorized by q (sorted partial sums of q dominate)."""
    pv, qv = _value_array(p), _value_array(q)
    n = max(len(pv), len(qv))
    pv = np.pad(pv, (0, n - len(pv)))
    qv = np.pad(qv, (0, n - len(qv)))
    if np.any(pv < -1e-12) or np.any(qv < -1e-12):
        raise ValueError("majorization needs nonnegative vectors")
    return bool(np.all(np.cumsum(pv) <= np.cumsum(qv) + 1e-12))


def _aligned(p, q):
    if isinstance(p, dict) or isinstance(q, dict):
        if not (isinstance(p, dict) and isinstance(q, dict)):
            raise ValueError("align either two dicts or two sequences")
        keys = sorted(set(p) | set(q), key=repr)
        return (
            np.array([p.get(k, 0.0) for k in keys]),
            np.array([q.get(k, 0.0) for k in keys]),
        )
    pv = np.asarray(list(p), dtype=float)
    qv = np.asarray(list(q), dtype=float)
    n = max(len(pv), len(qv))
    return np.pad(pv, (0, n - len(pv))), np.pad(qv, (0, n - len(qv)))


def fidelity(p, q) -> float:
    """Generalized fidelity of subnormalized distributions on a common alphabet."""
    pv, qv = _aligned(p, q)
    if np.any(pv < -1e-12) or np.any(qv < -1e-12):
        raise ValueError("fidelity needs nonnegative weights")
    pv, qv = np.clip(pv, 0.0, None), np.clip(qv, 0.0, None)
    slack = math.sqrt(max(0.0, 1.0 - pv.sum()) * max(0.0, 1.0 - qv.sum()))
    return slack + float(np.sqrt(pv * qv).sum())


def purified_distance(p, q) -> float:
    f = min(1.0, fidelity(p, q))
    return math.sqrt(max(0.0, 1.0 - f * f))


# ---------------------------------------------------------------------------
# H(A_J | A_Jbar) maximized over the marginal polytope (pairwise Frank-Wolfe)


def _transport_system(elements, dims, marginals):
    rows = []
    rhs = []
    for j, d in enumerate(dims):
        pj = [float(v) for v in marginals[j]]
        if len(pj) != d:
            raise InfeasibleMarginalsError(f"marginal {j} has wrong length")
        if any(v < -1e-12 for v in pj) or abs(math.fsum(pj) - 1.0) > 1e-9:
            raise InfeasibleMarginalsError(f"marginal {j} is not a distribution")
        for v in range(d):
            rows.append([1.0 if e[j] == v else 0.0 for e in elements])
            rhs.append(pj[v])
    return np.array(rows), np.array(rhs)


def _cond_entropy_value(q, groups):
    h_joint = -np.sum(q[q > 0] * np.log2(q[q > 0]))
    gs = np.array([q[g].sum() for g in groups])
    h_y = -np.sum(gs[gs > 0] * np.log2(gs[gs > 0]))
    return h_joint - h_y


def _cond_entropy_grad(q, groups, group_of):
    gs = np.array([q[g].sum() for g in groups])
    grad = np.full(len(q), _GRAD_CAP)
    ok = q > 0
    grad[ok] = np.log2(gs[group_of[ok]]) - np.log2(q[ok])
    return np.minimum(grad, _GRAD_CAP)


def maximize_conditional_entropy(
    support: SupportSet,
    marginals,
    mask: int,
    *,
    gap_tol: float = 1e-7,
    max_iter: int = 10_000,
):
    """max H(A_J|A_Jbar)_Q over Q supported on the set with the given marginals.

    Conditional entropy is concave in the joint distribution, so a pairwise
    Frank-Wolfe scheme applies; the linear subproblems run on the transportation
    polytope via the simplex solver. Returns (value, optimizer).
    """
    from . import lp  # deferred: lp imports this module's profile types

    if not 0 < mask < (1 << support.k):
        raise ValueError(f"mask {mask} out of range for k={support.k}")
    elements = sorted(support.elements)
    a_eq, b_eq = _transport_system(elements, support.dims, marginals)

    rest = mask_sites(complement(mask, support.k), support.k)
    keys = sorted({tuple(e[j] for j in rest) for e in elements})
    key_index = {key: gi for gi, key in enumerate(keys)}
    group_of = np.array([key_index[tuple(e[j] for j in rest)] for e in elements])
    groups = [np.nonzero(group_of == gi)[0] for gi in range(len(keys))]

    def solve_linear(objective):
        res = lp.simplex_min(-objective, a_eq=a_eq, b_eq=b_eq)
        if res.status != "optimal":
            raise InfeasibleMarginalsError(
                f"marginal polytope infeasible on the given support ({res.status})"
            )
        return np.clip(res.x, 0.0, None)

    q = solve_linear(np.zeros(len(elements)))
    atoms = {_atom_key(q): [q, 1.0]}

    for _ in range(max_iter):
        grad = _cond_entropy_grad(q, groups, group_of)
        s = solve_linear(grad)
        gap = float(grad @ (s - q))
        if gap < gap_tol:
            break
        away_key = min(atoms, key=lambda kk: float(grad @ atoms[kk][0]))
        v_away, w_away = atoms[away_key]
        d = s - v_away
        if np.max(np.abs(d)) < 1e-15:
            break
        gamma = _line_search(q, d, w_away, groups)
        q = q + gamma * d
        skey = _atom_key(s)
        atoms.setdefault(skey, [s, 0.0])[1] += gamma
        atoms[away_key][1] -= gamma
        if atoms[away_key][1] <= 1e-14:
            del atoms[away_key]

    value = float(_cond_entropy_value(q, groups))
    probs = {e: float(q[i]) for i, e in enumerate(elements) if q[i] > 1e-15}
    opt = JointDistribution(support.k, support.dims, probs, normalized=True)
    return value, opt


def _atom_key(v):
    return np.round(v, 12).tobytes()


def _line_search(q, d, gamma_max, groups, iters: int = 80):
    """Golden-section maximization of the concave section value on [0, gamma_max]."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, gamma_max
    x1 = hi - phi * (hi - lo)
    x2 = lo + phi * (hi - lo)
    f1 = _cond_entropy_value(np.clip(q + x1 * d, 0.0, None), groups)
    f2 = _cond_entropy_value(np.clip(q + x2 * d, 0.0, None), groups)
    for _ in range(iters):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + phi * (hi - lo)
            f2 = _cond_entropy_value(np.clip(q + x2 * d, 0.0, None), groups)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - phi * (hi - lo)
            f1 = _cond_entropy_value(np.clip(q + x1 * d, 0.0, None), groups)
        if hi - lo < 1e-15:
            break
    best = 0.5 * (lo + hi)
    if _cond_entropy_value(np.clip(q + gamma_max * d, 0.0, None), groups) >= (
        _cond_entropy_value(np.clip(q + best * d, 0.0, None), groups)
    ):
        return gamma_max
    return best
