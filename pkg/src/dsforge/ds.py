"""Thinned currents, simultaneous cocycle extension and the full pipeline.

The extension solves ``delta h = t`` for all lanes at once.  Its schedule
depends only on the mesh: a BFS spanning tree of the 1-skeleton pins
``h = 0`` on tree edges, then generations of faces with a single unknown edge
determine that edge.  Whatever the greedy sweep cannot reach is solved
exactly with the Smith form of the residual face/edge system.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .complex import Cochain
from .errors import ExtensionFailed
from .snf import snf, solve_integer
from .surface import extract_components, surface_generators

log = logging.getLogger(__name__)


@dataclass
class ThinnedCurrentSet:
    """2-cochain on conductor faces, one lane per surface generator."""

    component: object
    cochain: Cochain

    @property
    def lanes(self):
        return self.cochain.lanes


def thin_currents(surf, K_c):
    """Spread each surface cocycle over the conductor faces around its support.

    For every support edge ``E`` with coefficient ``c_E`` and every face ``T``
    of ``K_c`` containing ``E``, ``t[T] += c_E * k(T, E)``.
    """
    K = K_c.parent
    gen = surf.cochain
    lanes = gen.lanes
    if gen.cells.size == 0:
        return ThinnedCurrentSet(surf.component, Cochain.zeros(2, lanes=lanes))
    ptr = K.edge_faces_ptr
    starts, stops = ptr[gen.cells], ptr[gen.cells + 1]
    counts = stops - starts
    idx = np.repeat(stops - counts.cumsum(), counts) + np.arange(counts.sum())
    faces = K.edge_faces[idx]
    signs = K.edge_face_sign[idx]
    coeffs = np.repeat(gen.coeffs, counts, axis=0) * signs[:, None]
    keep = K_c.masks[2][faces]
    return ThinnedCurrentSet(surf.component, Cochain(2, faces[keep], coeffs[keep], lanes=lanes))


def thinned_current_violations(K, t, K_c=None):
    """Number of (tet, lane) pairs with nonzero coboundary (restricted to ``K_c`` tets if given)."""
    d = K.coboundary(t.cochain if hasattr(t, "cochain") else t, dense=True)
    if K_c is not None:
        d = d[K_c.masks[3]]
    return int(np.count_nonzero(d))


# ------------------------------------------------------------------ extension

def _spanning_tree(K):
    """Level-synchronous BFS tree of the 1-skeleton from vertex 0.

    Each newly reached vertex takes the lowest-id edge from the previous
    level.  Returns a boolean mask over edges.
    """
    nv = K.num_vertices
    in_tree = np.zeros(K.num_cells(1), dtype=bool)
    seen = np.zeros(nv, dtype=bool)
    ptr, ve = K.vertex_edges_ptr, K.vertex_edges
    edges = K.edges
    for root in range(nv):
        if seen[root]:
            continue
        seen[root] = True
        frontier = np.array([root])
        while frontier.size:
            counts = ptr[frontier + 1] - ptr[frontier]
            idx = np.repeat(ptr[frontier + 1] - counts.cumsum(), counts) + np.arange(counts.sum())
            cand = ve[idx]
            src = np.repeat(frontier, counts)
            ends = edges[cand]
            other = np.where(ends[:, 0] == src, ends[:, 1], ends[:, 0])
            fresh = ~seen[other]
            cand, other = cand[fresh], other[fresh]
            if cand.size == 0:
                break
            order = np.lexsort((cand, other))
            cand, other = cand[order], other[order]
            first = np.ones(other.size, dtype=bool)
            first[1:] = other[1:] != other[:-1]
            in_tree[cand[first]] = True
            seen[other[first]] = True
            frontier = other[first]
    return in_tree


@dataclass
class _Generation:
    edges: np.ndarray
    faces: np.ndarray
    sign: np.ndarray          # k(face, edge)
    other_edges: np.ndarray   # (n, 2)
    other_sign: np.ndarray    # (n, 2)


@dataclass
class ExtensionPlan:
    """Mesh-only schedule for solving ``delta h = t``."""

    tree: np.ndarray
    generations: list
    residual_edges: np.ndarray
    residual_faces: np.ndarray
    residual_snf: object = field(default=None, repr=False)

    @property
    def fallback_needed(self):
        return self.residual_edges.size > 0

    @property
    def depth(self):
        return len(self.generations)


def plan_extension(K, greedy=True):
    """Build the back-substitution schedule for ``K``.

    With ``greedy=False`` every non-tree edge goes to the exact solver
    (used to cross-check the sweep).
    """
    ne, nf = K.num_cells(1), K.num_cells(2)
    tree = _spanning_tree(K)
    known = tree.copy()
    fe, fs = K.face_edges, K.face_edge_sign
    unknown_count = (~known[fe]).sum(axis=1)
    eptr, ef = K.edge_faces_ptr, K.edge_faces
    cand = np.flatnonzero(unknown_count == 1) if greedy else np.zeros(0, dtype=np.int64)
    generations = []
    while cand.size:
        slot = np.argmax(~known[fe[cand]], axis=1)
        edge = fe[cand, slot]
        # lowest face id wins for each edge (cand is sorted)
        _, first = np.unique(edge, return_index=True)
        faces, edge, slot = cand[first], edge[first], slot[first]
        rest = np.array([[1, 2], [0, 2], [0, 1]])[slot]
        generations.append(_Generation(
            edge, faces, fs[faces, slot],
            np.take_along_axis(fe[faces], rest, axis=1),
            np.take_along_axis(fs[faces], rest, axis=1)))
        known[edge] = True
        counts = eptr[edge + 1] - eptr[edge]
        idx = np.repeat(eptr[edge + 1] - counts.cumsum(), counts) + np.arange(counts.sum())
        touched = ef[idx]
        np.subtract.at(unknown_count, touched, 1)
        touched = np.unique(touched)
        cand = touched[unknown_count[touched] == 1]
    residual_edges = np.flatnonzero(~known)
    plan = ExtensionPlan(tree, generations, residual_edges, np.zeros(0, dtype=np.int64))
    if residual_edges.size:
        faces = np.flatnonzero(unknown_count > 0)
        local = np.full(ne, -1, dtype=np.int64)
        local[residual_edges] = np.arange(residual_edges.size)
        sub = local[fe[faces]]
        r, c = np.nonzero(sub >= 0)
        trip = zip(r.tolist(), sub[r, c].tolist(), fs[faces][r, c].tolist())
        plan.residual_faces = faces
        plan.residual_snf = snf(((faces.size, residual_edges.size), trip), transforms=("U", "V"))
        log.info("extension: %d edges left to the exact solver", residual_edges.size)
    return plan


def apply_extension(K, plan, t_dense):
    """Solve ``delta h = t`` for every lane; ``t_dense`` is (F, lanes)."""
    ne = K.num_cells(1)
    lanes = t_dense.shape[1]
    h = np.zeros((ne, lanes), dtype=np.int64)
    for g in plan.generations:
        known_part = (g.other_sign[:, :, None] * h[g.other_edges]).sum(axis=1)
        h[g.edges] = g.sign[:, None] * (t_dense[g.faces] - known_part)
    if plan.fallback_needed:
        fe, fs = K.face_edges[plan.residual_faces], K.face_edge_sign[plan.residual_faces]
        is_res = np.zeros(ne, dtype=bool)
        is_res[plan.residual_edges] = True
        mask = (~is_res[fe])[:, :, None]
        rhs = t_dense[plan.residual_faces] - (mask * fs[:, :, None] * h[fe]).sum(axis=1)
        try:
            x = solve_integer(None, rhs, decomposition=plan.residual_snf)
        except ValueError as exc:
            raise ExtensionFailed(f"residual system: {exc}") from None
        h[plan.residual_edges] = np.asarray(x, dtype=np.int64)
    return h


def extension_residual(K, h, t_dense):
    """Number of (face, lane) pairs where ``delta h != t``."""
    d = (K.face_edge_sign[:, :, None] * h[K.face_edges]).sum(axis=1)
    return int(np.count_nonzero(d - t_dense))


@dataclass
class LazyGeneratorSet:
    """Lazy generators of the insulator's first cohomology.

    ``cochain`` holds one lane per surface generator, restricted to the
    insulator's edges; ``provenance[i]`` is ``(component, closing_edge)``.
    """

    cochain: Cochain
    provenance: list
    num_edges: int
    components: list = field(default_factory=list, repr=False)
    surface_sets: list = field(default_factory=list, repr=False)
    thinned: list = field(default_factory=list, repr=False)
    full: np.ndarray | None = field(default=None, repr=False)
    timings: dict = field(default_factory=dict)
    fallback_edges: int = 0
    fallback_solves: int = 0

    @property
    def count(self):
        return self.cochain.lanes

    def lanes_of(self, component):
        return [i for i, (c, _) in enumerate(self.provenance) if c == component]

    def thinned_cochain(self):
        """All thinned-current lanes side by side (same lane order as ``cochain``)."""
        if not self.thinned:
            return Cochain.zeros(2, lanes=0)
        return Cochain.stack([t.cochain for t in self.thinned])


def extend_to_cocycle(t, K, K_c=None, K_a=None, plan=None):
    """Extend thinned currents to 1-cochains ``h`` on ``K`` with ``delta h = t``.

    Returns ``(h_full, h_restricted, plan)`` where ``h_full`` is the dense
    (E, lanes) array and ``h_restricted`` the Cochain on the edges of ``K_a``
    (or all edges when ``K_a`` is None).  Raises ExtensionFailed when no
    integer solution exists.
    """
    tc = t.cochain if hasattr(t, "cochain") else t
    plan = plan or plan_extension(K)
    t_dense = tc.to_dense(K.num_cells(2))
    h = apply_extension(K, plan, t_dense)
    bad = extension_residual(K, h, t_dense)
    if bad:
        raise ExtensionFailed(f"delta h differs from t on {bad} (face, lane) pairs; "
                              "is t a cocycle and the domain free of 2-dimensional holes?")
    full = Cochain.from_dense(1, h)
    restricted = full.restrict(K_a.masks[1]) if K_a is not None else full
    return h, restricted, plan


def _threads(threads):
    env = os.environ.get("DSFORGE_THREADS")
    if env:
        threads = int(env)
    return max(1, int(threads or os.cpu_count() or 1))


def run_ds(K, split, threads=None, keep_full=True, plan=None):
    """Full pipeline: surfaces, surface generators, thinned currents, extension, restriction."""
    timings = {}
    t0 = time.perf_counter()
    comps = extract_components(split)
    timings["surfaces"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    workers = _threads(threads)
    if workers > 1 and len(comps) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            surf = list(pool.map(surface_generators, comps))
    else:
        surf = [surface_generators(c) for c in comps]
    timings["surface_generators"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    thinned = [thin_currents(s, split.K_c) for s in surf]
    timings["thinned_currents"] = time.perf_counter() - t0

    provenance = [(s.component.index, e) for s in surf for e in s.closing_edges]
    lanes = len(provenance)
    t0 = time.perf_counter()
    fallback_edges = 0
    if lanes:
        t_all = Cochain.stack([t.cochain for t in thinned])
        full, restricted, plan = extend_to_cocycle(t_all, K, split.K_c, split.K_a, plan=plan)
        fallback_edges = int(plan.residual_edges.size)
    else:
        full = np.zeros((K.num_cells(1), 0), dtype=np.int64)
        restricted = Cochain.zeros(1, lanes=0)
    timings["extension"] = time.perf_counter() - t0
    timings["total"] = sum(timings.values())
    return LazyGeneratorSet(restricted, provenance, K.num_cells(1), comps, surf, thinned,
                            full if keep_full else None, timings, fallback_edges,
                            int(fallback_edges > 0))
