"""Shared cached fixtures and small independent helpers for the test suite."""

from functools import lru_cache

import numpy as np

from dsforge.complex import CellComplex
from dsforge.ds import run_ds
from dsforge.meshio import generate_canonical, split_regions
from dsforge.snf import betti_numbers, homology

CANONICAL = ("solid-torus-in-box", "hopf-link-in-box", "trefoil-tube-in-box", "genus2-handlebody-in-box")
ORACLE_CAP = 50_000


@lru_cache(maxsize=None)
def mesh(shape, refinement=1):
    return generate_canonical(shape, refinement)


@lru_cache(maxsize=None)
def complex_(shape, refinement=1):
    return CellComplex.from_mesh(mesh(shape, refinement))


@lru_cache(maxsize=None)
def split(shape, refinement=1):
    return split_regions(complex_(shape, refinement), [1])


@lru_cache(maxsize=None)
def lazy(shape, refinement=1):
    return run_ds(complex_(shape, refinement), split(shape, refinement))


@lru_cache(maxsize=None)
def oracle_h1(shape, refinement=1):
    return homology(split(shape, refinement).K_a, 1)


@lru_cache(maxsize=None)
def oracle_betti_K(shape, refinement=1):
    return betti_numbers(complex_(shape, refinement))


def oracle_sized(refinements=(1, 2, 3)):
    """(shape, refinement) pairs of canonical meshes within the oracle cell cap."""
    out = []
    for s in CANONICAL:
        for r in refinements:
            if complex_(s, r).num_all_cells <= ORACLE_CAP:
                out.append((s, r))
    return out


def single_tet():
    return CellComplex([[0, 1, 2, 3]], [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)])


def torus_grid(n=3):
    """Triangulated n x n torus with identified sides."""
    idx = lambda i, j: (i % n) * n + (j % n)
    tri = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tri += [(a, b, c), (a, c, d)]
    return tri


def fox_colourings(path, direction=(1.0, 0.2718, 0.1414)):
    """Number of Fox 3-colourings of a closed polygon projected along ``direction``.

    A count above 3 certifies the knot is nontrivial.  Arcs are split at
    undercrossings and the colouring equations are solved over Z/3.
    """
    d = np.asarray(direction, dtype=float)
    d /= np.linalg.norm(d)
    u = np.cross(d, [0.0, 0.0, 1.0] if abs(d[2]) < 0.9 else [1.0, 0.0, 0.0])
    u /= np.linalg.norm(u)
    v = np.cross(d, u)
    raw = np.asarray(path, dtype=float)
    pts = np.stack([raw @ u, raw @ v, raw @ d], axis=1)
    keep, direction = [0, 1], 2
    n = len(pts)
    segs = [(pts[i], pts[(i + 1) % n]) for i in range(n)]
    crossings = []  # (under segment, param on under, over segment)
    for i in range(n):
        for j in range(n):
            if abs(i - j) <= 1 or {i, j} == {0, n - 1}:
                continue
            p0, p1 = segs[i]
            q0, q1 = segs[j]
            a, b = p0[keep], p1[keep]
            c, d = q0[keep], q1[keep]
            r, s = b - a, d - c
            den = r[0] * s[1] - r[1] * s[0]
            if den == 0:
                continue
            w = c - a
            t = (w[0] * s[1] - w[1] * s[0]) / den
            u = (w[0] * r[1] - w[1] * r[0]) / den
            if 0 < t < 1 and 0 < u < 1:
                hp = p0[direction] + t * (p1[direction] - p0[direction])
                hq = q0[direction] + u * (q1[direction] - q0[direction])
                if hp < hq:
                    crossings.append((i, t, j, u))
    if not crossings:
        return 3
    # arcs: cut the polygon at each undercrossing
    cuts = sorted((i + t, k) for k, (i, t, _, _) in enumerate(crossings))
    m = len(cuts)

    def arc_at(pos):
        for a in range(m):
            lo, hi = cuts[a][0], cuts[(a + 1) % m][0]
            if lo < hi and lo < pos < hi:
                return a
            if lo >= hi and (pos > lo or pos < hi):
                return a
        raise AssertionError

    eqs = []
    for k, (i, t, j, u) in enumerate(crossings):
        a = [idx for idx, (_, kk) in enumerate(cuts) if kk == k][0]
        before, after = (a - 1) % m, a
        over = arc_at(j + u)
        eqs.append((before, after, over))
    A = np.zeros((len(eqs), m), dtype=np.int64)
    for r, (x, y, z) in enumerate(eqs):
        A[r, x] += 1
        A[r, y] += 1
        A[r, z] -= 2
    return 3 ** (m - _rank_mod3(A % 3))


def _rank_mod3(A):
    A = A.copy() % 3
    rank = 0
    for c in range(A.shape[1]):
        piv = [r for r in range(rank, A.shape[0]) if A[r, c]]
        if not piv:
            continue
        A[[rank, piv[0]]] = A[[piv[0], rank]]
        A[rank] = (A[rank] * A[rank, c]) % 3  # inverse of 1 is 1, of 2 is 2
        for r in range(A.shape[0]):
            if r != rank and A[r, c]:
                A[r] = (A[r] - A[r, c] * A[rank]) % 3
        rank += 1
    return rank


@lru_cache(maxsize=None)
def linking(shape, refinement=1, seed=0):
    from dsforge.basis import compute_linking_matrix
    return compute_linking_matrix(complex_(shape, refinement), split(shape, refinement),
                                  lazy(shape, refinement), seed=seed)


def gauss_matrix(L):
    """Linking matrix recomputed with the numeric Gauss double integral (unrounded)."""
    from dsforge.basis import gauss_linking_number
    n = len(L.surface)
    G = np.zeros((n, n))
    for i, pieces in enumerate(L.submerged):
        for j, s in enumerate(L.surface):
            G[i, j] = sum(gauss_linking_number(c, s) for c in pieces)
    return G
