"""Covering/packing linear programs over entropy profiles.

A small dense two-phase primal simplex (Bland's rule, pivot tolerance 1e-11)
backs everything; problem sizes are k variables by 2^k - 2 constraints.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .entropy import EntropyProfile, mask_sites, proper_masks

PIVOT_TOL = 1e-11
DUALITY_TOL = 1e-9


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray
    fun: float


def simplex_min(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None, *, max_iter=20_000):
    """Minimize c.x subject to a_ub x <= b_ub, a_eq x = b_eq, x >= 0."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    rows = []
    rhs = []
    n_slack = 0
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        b_ub = np.asarray(b_ub, dtype=float)
        n_slack = a_ub.shape[0]
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.asarray(b_eq, dtype=float)

    m = (a_ub.shape[0] if a_ub is not None else 0) + (
        a_eq.shape[0] if a_eq is not None else 0
    )
    total = n + n_slack + m  # structurals, slacks, artificials
    tab = np.zeros((m, total + 1))
    r = 0
    if a_ub is not None:
        for i in range(a_ub.shape[0]):
            tab[r, :n] = a_ub[i]
            tab[r, n + i] = 1.0
            tab[r, -1] = b_ub[i]
            r += 1
    if a_eq is not None:
        for i in range(a_eq.shape[0]):
            tab[r, :n] = a_eq[i]
            tab[r, -1] = b_eq[i]
            r += 1
    # make rhs nonnegative, then give every row an artificial basis column
    for i in range(m):
        if tab[i, -1] < 0:
            tab[i] = -tab[i]
        tab[i, n + n_slack + i] = 1.0
    basis = [n + n_slack + i for i in range(m)]

    art_cost = np.zeros(total)
    art_cost[n + n_slack :] = 1.0
    if not _run_simplex(tab, basis, art_cost, max_iter):
        return SimplexResult("iteration_limit", np.full(n, np.nan), math.nan)
    art_value = sum(tab[i, -1] for i in range(m) if basis[i] >= n + n_slack)
    if art_value > 1e-7:
        return SimplexResult("infeasible", np.full(n, np.nan), math.nan)
    _evict_artificials(tab, basis, n + n_slack)

    real_cost = np.zeros(total)
    real_cost[:n] = c
    blocked = np.zeros(total, dtype=bool)
    blocked[n + n_slack :] = True
    if not _run_simplex(tab, basis, real_cost, max_iter, blocked=blocked):
        return SimplexResult("iteration_limit", np.full(n, np.nan), math.nan)

    x = np.zeros(total)
    for i, b in enumerate(basis):
        x[b] = tab[i, -1]
    sol = x[:n]
    return SimplexResult("optimal", sol, float(c @ sol))


def _run_simplex(tab, basis, cost, max_iter, blocked=None):
    m, width = tab.shape
    total = width - 1
    for _ in range(max_iter):
        reduced = cost.copy()
        for i, b in enumerate(basis):
            if cost[b] != 0.0:
                reduced -= cost[b] * tab[i, :-1]
        reduced[np.abs(reduced) < PIVOT_TOL] = 0.0
        entering = -1
        for j in range(total):  # Bland: lowest eligible index enters
            if blocked is not None and blocked[j]:
                continue
            if reduced[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return True
        best_ratio = math.inf
        leave = -1
        for i in range(m):
            a = tab[i, entering]
            if a > PIVOT_TOL:
                ratio = tab[i, -1] / a
                if ratio < best_ratio - PIVOT_TOL or (
                    abs(ratio - best_ratio) <= PIVOT_TOL
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            return True  # unbounded; callers here only pose bounded problems
        _pivot(tab, leave, entering)
        basis[leave] = entering
    return False


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]


def _evict_artificials(tab, basis, n_real):
    for i, b in enumerate(basis):
        if b < n_real:
            continue
        for j in range(n_real):
            if abs(tab[i, j]) > PIVOT_TOL:
                _pivot(tab, i, j)
                basis[i] = j
                break
        # a row with no real pivot is redundant; its artificial stays at zero


# ---------------------------------------------------------------------------
# covering / packing problems over entropy profiles


@dataclass
class CoveringLP:
    k: int
    h: EntropyProfile

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need k >= 2")
        if self.h.k != self.k:
            raise ValueError("profile party count mismatch")


@dataclass
class LpSolution:
    x: tuple
    objective: float
    tight_constraints: frozenset
    certificate: dict = field(repr=False)

    def dual_objective(self, h: EntropyProfile) -> float:
        return math.fsum(self.certificate[m] * h.values[m] for m in self.certificate)


def _incidence(k):
    masks = list(proper_masks(k))
    a = np.zeros((len(masks), k))
    for row, mask in enumerate(masks):
        for j in mask_sites(mask, k):
            a[row, j] = 1.0
    return masks, a


def solve_dual(problem: CoveringLP) -> LpSolution:
    """Packing side: maximize sum h_J y_J with every site covered at most once."""
    masks, a = _incidence(problem.k)
    h = np.array([problem.h.values[m] for m in masks])
    res = simplex_min(-h, a_ub=a.T, b_ub=np.ones(problem.k))
    if res.status != "optimal":
        raise RuntimeError(f"packing solve failed: {res.status}")
    y = {m: float(v) for m, v in zip(masks, res.x)}
    obj = -res.fun
    x = _primal_point(problem, obj)
    tight = frozenset(
        m
        for m, row in zip(masks, a)
        if abs(float(row @ x) - problem.h.values[m]) <= DUALITY_TOL
    )
    return LpSolution(tuple(x), obj, tight, y)


def _primal_point(problem, objective):
    """Lexicographically smallest optimal x of the covering program."""
    masks, a = _incidence(problem.k)
    h = np.array([problem.h.values[m] for m in masks])
    k = problem.k
    pad = 1e-11
    fixed = []
    for t in range(k):
        c = np.zeros(k)
        c[t] = 1.0
        a_rows = [-a, np.ones((1, k))]
        b_rows = [-h, np.array([objective + pad])]
        for i, v in fixed:
            e = np.zeros((1, k))
            e[0, i] = 1.0
            a_rows += [e, -e]
            b_rows += [np.array([v + pad]), np.array([-(v - pad)])]
        res = simplex_min(c, a_ub=np.vstack(a_rows), b_ub=np.concatenate(b_rows))
        if res.status != "optimal":
            raise RuntimeError(f"lexicographic refinement failed: {res.status}")
        fixed.append((t, float(res.x[t])))
    return np.array([v for _, v in fixed])


def solve_primal(problem: CoveringLP) -> LpSolution:
    """Minimize sum x_j subject to sum_{j in J} x_j >= h_J for proper J."""
    sol = solve_dual(problem)
    primal_obj = math.fsum(sol.x)
    if abs(primal_obj - sol.objective) > DUALITY_TOL:
        raise RuntimeError(
            f"strong duality violated: primal {primal_obj} vs dual {sol.objective}"
        )
    return sol


def symmetric_optimum(k: int, h_by_size) -> float:
    """Optimal covering objective when h_J depends only on |J|.

    h_by_size lists h for |J| = 1 .. k-1; the per-site optimum is
    max_s h_s / s and the objective is k times that.
    """
    h_by_size = [float(v) for v in h_by_size]
    if len(h_by_size) != k - 1:
        raise ValueError("need h for sizes 1..k-1")
    return k * max(h / (s + 1) for s, h in enumerate(h_by_size))


# ---------------------------------------------------------------------------
# exact dual vertex enumeration (k <= 4)


@dataclass
class DualVertex:
    k: int
    y: dict  # mask -> Fraction

    def as_tuple(self):
        """Weights ordered by (|J|, mask), matching singletons-then-pairs listings."""
        order = sorted(proper_masks(self.k), key=lambda m: (bin(m).count("1"), m))
        return tuple(self.y.get(m, Fraction(0)) for m in order)

    def support(self):
        return [m for m, v in self.y.items() if v > 0]


def _solve_exact(a_cols, k):
    """Solve the k x k system sum_{J in S, J owns j} y_J = 1 exactly."""
    a = [[Fraction(1) if mask >> j & 1 else Fraction(0) for mask in a_cols] for j in range(k)]
    b = [Fraction(1)] * k
    n = len(a_cols)
    row = 0
    where = [-1] * n
    for col in range(n):
        piv = next((r for r in range(row, k) if a[r][col] != 0), None)
        if piv is None:
            continue
        a[row], a[piv] = a[piv], a[row]
        b[row], b[piv] = b[piv], b[row]
        inv = 1 / a[row][col]
        a[row] = [v * inv for v in a[row]]
        b[row] *= inv
        for r in range(k):
            if r != row and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[row])]
                b[r] -= f * b[row]
        where[col] = row
        row += 1
    if any(w < 0 for w in where):
        return None  # underdetermined: not a basic solution for this column set
    for r in range(row, k):
        if b[r] != 0:
            return None
    return [b[where[col]] for col in range(n)]


def _ssa_reducible(masks_with_weight, k):
    full = (1 << k) - 1
    for j1, j2 in itertools.combinations(masks_with_weight, 2):
        if j1 & j2 == 0 and (j1 | j2) != full:
            return True
    return False


def enumerate_dual_vertices(k: int, *, ssa_filter: bool = False):
    """All vertices of the packing polytope with every cover row tight.

    With ssa_filter=True, vertices carrying two disjoint supported sets whose
    union is not [k] are dropped (strong subadditivity makes them redundant
    when the profile comes from an actual distribution).
    """
    if k not in (2, 3, 4):
        raise ValueError("exhaustive vertex enumeration supports k in {2, 3, 4} only")
    masks = list(proper_masks(k))
    seen = {}
    for cols in itertools.combinations(range(len(masks)), k):
        sel = [masks[i] for i in cols]
        sol = _solve_exact(sel, k)
        if sol is None or any(v < 0 for v in sol):
            continue
        y = {m: v for m, v in zip(sel, sol) if v > 0}
        key = tuple(sorted(y.items()))
        if key not in seen:
            seen[key] = DualVertex(k, y)
    vertices = list(seen.values())
    if ssa_filter:
        vertices = [v for v in vertices if not _ssa_reducible(v.support(), k)]
    vertices.sort(key=lambda v: v.as_tuple())
    return vertices


def vertex_maximum(problem: CoveringLP, *, ssa_filter: bool = False) -> float:
    """Dual optimum via exhaustive vertex enumeration (oracle for small k)."""
    best = 0.0
    for v in enumerate_dual_vertices(problem.k, ssa_filter=ssa_filter):
        val = math.fsum(float(w) * problem.h.values[m] for m, w in v.y.items())
        best = max(best, val)
    return best
