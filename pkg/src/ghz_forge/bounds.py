"""Headline rate bounds: the asymptotic LP bound, one-shot counts, the
asymptotic-subrank rate bound, and the small-k closed forms."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import entropy, lp
from .states import JointDistribution, SupportSet, support_of


@dataclass
class OneShotParams:
    M: tuple
    alpha: float
    eps: float

    def __post_init__(self):
        self.M = tuple(int(m) for m in self.M)
        if any(m < 1 for m in self.M):
            raise ValueError("partition counts must be >= 1")
        if self.alpha <= 1:
            raise ValueError("alpha must be > 1")
        if not 0.0 < self.eps < 1.0:
            raise ValueError("eps must be in (0, 1)")


@dataclass
class BoundReport:
    value: float
    provenance: str
    witness: dict = field(default_factory=dict, repr=False)
    flags: dict = field(default_factory=dict)


def entropy_profile(dist: JointDistribution) -> entropy.EntropyProfile:
    return entropy.EntropyProfile.from_distribution(dist)


def theorem1_bound(dist: JointDistribution) -> BoundReport:
    """H(P) minus the optimal covering-LP value, clamped at zero."""
    h = entropy.shannon(dist)
    sol = lp.solve_primal(lp.CoveringLP(dist.k, entropy_profile(dist)))
    raw = h - sol.objective
    return BoundReport(
        value=max(0.0, raw),
        provenance="theorem1",
        witness={"H": h, "lp": sol},
        flags={"clamped": raw < 0.0},
    )


# ---------------------------------------------------------------------------
# one-shot counts


def _delta_of(q: JointDistribution, m_counts) -> float:
    supp = support_of(q)
    log_m = [math.log2(m) for m in m_counts]
    best = min(
        sum(log_m[j] for j in entropy.mask_sites(mask, q.k))
        - entropy.max_entropy_conditional(supp, mask)
        for mask in entropy.proper_masks(q.k)
    )
    return -q.k + best


def _oneshot_value(h_alpha: float, sum_log_m: float, delta: float, alpha: float, eps: float):
    """Floor argument of the one-shot count, plus the optimal failure weight r."""
    a = (1.0 - alpha) / alpha * (h_alpha - sum_log_m)
    b = -delta / alpha
    bracket = np.logaddexp2(a, b)
    penalty = (1.0 + 1.0 / (alpha - 1.0)) * math.log2(10.0 / eps**2)
    value = alpha / (1.0 - alpha) * float(bracket) - penalty
    r_opt = float(np.exp2(b - bracket))
    return value, r_opt


def oneshot_N(q: JointDistribution, params: OneShotParams) -> BoundReport:
    """Floor of the randomized-partition guarantee for extractable GHZ copies."""
    if len(params.M) != q.k:
        raise ValueError("need one partition count per site")
    delta = _delta_of(q, params.M)
    h_alpha = entropy.renyi(q, params.alpha)
    sum_log_m = math.fsum(math.log2(m) for m in params.M)
    value, r_opt = _oneshot_value(h_alpha, sum_log_m, delta, params.alpha, params.eps)
    n = math.floor(value)
    return BoundReport(
        value=float(n),
        provenance="oneshot",
        witness={
            "delta": delta,
            "h_alpha": h_alpha,
            "sum_log_m": sum_log_m,
            "r_opt": r_opt,
            "unfloored": value,
        },
        flags={"negative": n < 0},
    )


class OneShotPreconditionError(ValueError):
    pass


def _corollary_value(gap: float, delta: float, sum_log_dims: float, eps: float) -> float:
    penalty = (2.0 + sum_log_dims / delta) * math.log2(10.0 / eps**2)
    return gap * (1.0 - 1.0 / delta) - penalty


def corollary_N(q: JointDistribution, params: OneShotParams) -> BoundReport:
    """Simplified count valid when Delta > 0 and H_min clears the partition cost."""
    if len(params.M) != q.k:
        raise ValueError("need one partition count per site")
    delta = _delta_of(q, params.M)
    if delta <= 0:
        raise OneShotPreconditionError(f"Delta = {delta:.6g} fails Delta > 0")
    h_min = entropy.min_entropy(q)
    sum_log_m = math.fsum(math.log2(m) for m in params.M)
    gap = h_min - sum_log_m
    if gap <= 0:
        raise OneShotPreconditionError(
            f"H_min(Q) = {h_min:.6g} fails H_min(Q) > sum log2 M_j = {sum_log_m:.6g}"
        )
    sum_log_dims = math.fsum(math.log2(d) for d in q.dims)
    value = _corollary_value(gap, delta, sum_log_dims, eps=params.eps)
    alpha_internal = 1.0 + delta / gap
    return BoundReport(
        value=value,
        provenance="corollary",
        witness={
            "delta": delta,
            "h_min": h_min,
            "gap": gap,
            "alpha_internal": alpha_internal,
            "sum_log_dims": sum_log_dims,
        },
        flags={"negative": value < 0},
    )


# ---------------------------------------------------------------------------
# asymptotic subrank rate (uniform random subsets route)


def subrank_rate_bound(
    support: SupportSet, dist: JointDistribution, *, margin: float = 0.0
) -> BoundReport:
    """h_[k] minus the covering optimum over the marginal-maximized profile.

    The covering optimum attains the constraints with equality while the
    underlying estimate needs h_J strictly below sum_{j in J} x_j; the value
    reported is the limit, with an optional per-site margin shrinking it to a
    strictly feasible point.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    marginals = [
        [dist.marginal([j]).probs.get((v,), 0.0) for v in range(dist.dims[j])]
        for j in range(dist.k)
    ]
    values = {}
    for mask in entropy.proper_masks(support.k):
        values[mask], _ = entropy.maximize_conditional_entropy(support, marginals, mask)
    h_full, _ = entropy.maximize_conditional_entropy(
        support, marginals, (1 << support.k) - 1
    )
    profile = entropy.EntropyProfile(support.k, values)
    sol = lp.solve_primal(lp.CoveringLP(support.k, profile))
    value = h_full - (sol.objective + support.k * margin)
    return BoundReport(
        value=value,
        provenance="subrank_rate",
        witness={"h_full": h_full, "profile": values, "lp": sol},
        flags={"strict_feasibility_limit": margin == 0.0},
    )


# ---------------------------------------------------------------------------
# closed forms


def _marginal_entropy(dist: JointDistribution, sites) -> float:
    return entropy._entropy_of(dist.marginal(sites).probs.values())


def closed_form_k3(dist: JointDistribution) -> float:
    """min of the three one-vs-rest mutual informations and half the tripartite one."""
    if dist.k != 3:
        raise ValueError("closed form requires k = 3")
    h = entropy.shannon(dist)
    singles = [_marginal_entropy(dist, [j]) for j in range(3)]
    pairs = {
        frozenset(p): _marginal_entropy(dist, list(p))
        for p in itertools.combinations(range(3), 2)
    }
    cands = []
    for j in range(3):
        rest = frozenset({0, 1, 2} - {j})
        cands.append(singles[j] + pairs[rest] - h)
    cands.append(0.5 * (sum(singles) - h))
    return max(0.0, min(cands))


def closed_form_k4(dist: JointDistribution) -> float:
    """Minimum over the five k=4 vertex expressions and all site permutations."""
    if dist.k != 4:
        raise ValueError("closed form requires k = 4")
    h = entropy.shannon(dist)
    hm = {}

    def mh(sites):
        key = frozenset(sites)
        if key not in hm:
            hm[key] = _marginal_entropy(dist, sorted(key))
        return hm[key]

    cands = []
    for a, b, c, d in itertools.permutations(range(4)):
        cands.append(mh([a]) + mh([b, c, d]) - h)
        cands.append(mh([a, b]) + mh([c, d]) - h)
        cands.append(0.5 * (mh([a, b]) + mh([c]) + mh([d]) - h))
        cands.append(
            (mh([a]) + mh([b]) + mh([c]) + mh([d]) - h) / 3.0
        )
        cands.append(
            (mh([a, b]) + mh([a, c]) + mh([b, c])) / 3.0 + 2.0 / 3.0 * mh([d]) - 2.0 / 3.0 * h
        )
    return max(0.0, min(cands))


def symmetric_closed_form(dist: JointDistribution) -> float:
    """min_j (k H(A_[k-j]) - (k-j) H(P)) / j for permutation-invariant P."""
    k = dist.k
    if not _is_symmetric(dist):
        raise ValueError("distribution is not permutation-invariant")
    h = entropy.shannon(dist)
    best = math.inf
    for j in range(1, k):
        hk_j = _marginal_entropy(dist, list(range(k - j)))
        best = min(best, (k * hk_j - (k - j) * h) / j)
    return max(0.0, best)


def _is_symmetric(dist: JointDistribution, tol: float = 1e-9) -> bool:
    if len(set(dist.dims)) > 1:
        return False
    for perm in itertools.permutations(range(dist.k)):
        for idx, p in dist.probs.items():
            q = dist.probs.get(tuple(idx[j] for j in perm), 0.0)
            if abs(p - q) > tol:
                return False
    return True
