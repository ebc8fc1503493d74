"""Exact combinatorial subrank for small supports, plus product constructions."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .entropy import max_entropy_conditional, proper_masks
from .states import SupportSet

BRUTE_FORCE_GUARD = 30


@dataclass
class DiagonalCertificate:
    elements: frozenset
    diagonal: bool
    free: bool

    def __post_init__(self):
        if not (self.diagonal and self.free):
            raise ValueError("certificate must carry a verified free diagonal")


def is_diagonal(elements, support: SupportSet | None = None) -> bool:
    """Every coordinate projection is injective on the set."""
    elems = [tuple(e) for e in elements]
    if support is not None and any(e not in support.elements for e in elems):
        raise ValueError("set is not contained in the support")
    if not elems:
        return True
    k = len(elems[0])
    for j in range(k):
        seen = set()
        for e in elems:
            if e[j] in seen:
                return False
            seen.add(e[j])
    return True


def is_free(elements, support: SupportSet) -> bool:
    """The set equals the support intersected with the product of its projections."""
    elems = {tuple(e) for e in elements}
    if any(e not in support.elements for e in elems):
        raise ValueError("set is not contained in the support")
    if not elems:
        return True
    k = support.k
    proj = [set() for _ in range(k)]
    for e in elems:
        for j in range(k):
            proj[j].add(e[j])
    for cand in support.elements:
        if cand not in elems and all(cand[j] in proj[j] for j in range(k)):
            return False
    return True


def brute_force_subrank(support: SupportSet):
    """Exact size of the largest free diagonal, with a witness.

    Depth-first over elements in sorted order with per-coordinate usage sets;
    prunes on the remaining-element bound and verifies freeness on candidates.
    Returns (size, DiagonalCertificate).
    """
    elems = sorted(support.elements)
    if len(elems) > BRUTE_FORCE_GUARD:
        raise ValueError(
            f"support has {len(elems)} elements; exact search is capped at {BRUTE_FORCE_GUARD}"
        )
    k = support.k
    used = [set() for _ in range(k)]
    current = []
    best = {"size": 0, "witness": ()}

    def consider():
        if len(current) > best["size"] and is_free(current, support):
            best["size"] = len(current)
            best["witness"] = tuple(current)

    def dfs(pos):
        if len(current) + (len(elems) - pos) <= best["size"]:
            return
        if pos == len(elems):
            return
        e = elems[pos]
        if all(e[j] not in used[j] for j in range(k)):
            for j in range(k):
                used[j].add(e[j])
            current.append(e)
            consider()
            dfs(pos + 1)
            current.pop()
            for j in range(k):
                used[j].discard(e[j])
        dfs(pos + 1)

    dfs(0)  # any singleton is a free diagonal, so the optimum is at least 1
    cert = DiagonalCertificate(
        frozenset(best["witness"]),
        diagonal=is_diagonal(best["witness"], support),
        free=is_free(best["witness"], support),
    )
    return best["size"], cert


def product_set(phi: SupportSet, psi: SupportSet) -> SupportSet:
    """Componentwise-paired product inside (I_1 x J_1) x ... x (I_k x J_k).

    Paired per-site indices (a, b) are flattened to a * |J_j| + b.
    """
    if phi.k != psi.k:
        raise ValueError(f"party counts differ: {phi.k} vs {psi.k}")
    k = phi.k
    dims = tuple(phi.dims[j] * psi.dims[j] for j in range(k))
    elements = frozenset(
        tuple(a[j] * psi.dims[j] + b[j] for j in range(k))
        for a in phi.elements
        for b in psi.elements
    )
    return SupportSet(k, dims, elements)


def isolated_lower_bound(support: SupportSet):
    """Elements sharing no coordinate with any other element: a free diagonal."""
    elems = sorted(support.elements)
    k = support.k
    counts = [dict() for _ in range(k)]
    for e in elems:
        for j in range(k):
            counts[j][e[j]] = counts[j].get(e[j], 0) + 1
    gamma = [e for e in elems if all(counts[j][e[j]] == 1 for j in range(k))]
    return gamma


def homogeneous_lower_bound(support: SupportSet, model) -> float:
    """Mean-isolated-count bound |Phi| (p_empty - sum_J 2^{Hmax_J} p_J)."""
    k = support.k
    p0 = model.p[0]
    penalty = math.fsum(
        2.0 ** max_entropy_conditional(support, mask) * model.p[mask]
        for mask in proper_masks(k)
    )
    return len(support.elements) * (p0 - penalty)
