"""True cohomology basis from lazy generators via linking numbers.

Each lazy lane has two closed curves on the barycentric dual:

* a submerged cycle through conductor tets, following the dual edges of the
  faces carrying its thinned current;
* a surface cycle that follows the lane's surface dual path, pushed into
  the insulator by walking around each crossed edge through insulator tets.

Linking numbers between them are computed exactly by counting signed
crossings in a generic projection (integer orientation predicates), and the
Smith form of the resulting matrix yields the integer combinations of lazy
lanes that form a basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lcm

import numpy as np

from .complex import Cochain, DualComplex
from .errors import (CyclesIntersect, DegenerateCycle, DegenerateProjection, EmptySupport,
                     NotARing, RankMismatch)
from .snf import is_unimodular, pairing_matrix, snf

MAX_PROJECTION_ATTEMPTS = 32


@dataclass(eq=False)
class DualCycle:
    """Closed polyline with exact coordinates ``points / denominator``."""

    points: np.ndarray
    denominator: int = 1
    source: str = ""
    lane: int = -1

    def __post_init__(self):
        p = np.asarray(self.points)
        if p.dtype != object:
            p = p.astype(np.int64)
        p = p.reshape(-1, 3)
        self.points = p
        if p.shape[0] < 2 or not np.array_equal(p[0], p[-1]):
            raise DegenerateCycle("polyline is not closed")
        if np.any(np.all(p[1:] == p[:-1], axis=1)):
            raise DegenerateCycle("consecutive points coincide")
        if len({tuple(int(x) for x in q) for q in p}) < 3:
            raise DegenerateCycle("fewer than three distinct points")

    @property
    def num_segments(self):
        return self.points.shape[0] - 1

    def as_float(self):
        return np.asarray(self.points, dtype=float) / self.denominator


def _polyline(points):
    """Drop consecutive duplicates and close the loop."""
    out = [points[0]]
    for p in points[1:]:
        if not np.array_equal(p, out[-1]):
            out.append(p)
    if not np.array_equal(out[0], out[-1]):
        out.append(out[0])
    return np.array(out)


def _lane_flow(K, t, lane):
    """Directed dual edges (tail tet, face, head tet) of one thinned-current lane with multiplicity."""
    c = t.cochain if hasattr(t, "cochain") else t
    vals = c.coeffs[:, lane]
    nz = vals != 0
    faces, vals = c.cells[nz], vals[nz]
    if faces.size == 0:
        raise EmptySupport(f"lane {lane} has an empty thinned current")
    ft, fs = K.face_tets[faces], K.face_tet_sign[faces]
    if np.any(ft[:, 1] < 0):
        raise NotARing("thinned current touches a boundary face")
    # flow leaves the tet T where k(T, F) * t(F) > 0
    out0 = fs[:, 0] * vals > 0
    tail = np.where(out0, ft[:, 0], ft[:, 1])
    head = np.where(out0, ft[:, 1], ft[:, 0])
    mult = np.abs(vals)
    return tail, faces, head, mult


def order_thinned_cells(K, t, lane, dual=None):
    """Chain the support faces of one thinned-current lane into a single closed dual polyline.

    Raises EmptySupport for a zero lane and NotARing when the support is not
    one simple ring of tets.
    """
    dual = dual or DualComplex(K)
    tail, faces, head, mult = _lane_flow(K, t, lane)
    if np.any(mult != 1):
        raise NotARing("thinned current has coefficients of magnitude > 1")
    if np.unique(tail).size != tail.size or np.unique(head).size != head.size:
        raise NotARing("thinned current support branches")
    nxt = {int(a): (int(f), int(b)) for a, f, b in zip(tail, faces, head)}
    start = int(tail.min())
    pts = [dual.node_points[start]]
    cur, steps = start, 0
    while True:
        f, b = nxt[cur]
        pts += [dual.face_points[f], dual.node_points[b]]
        cur = b
        steps += 1
        if cur == start:
            break
        if cur not in nxt or steps > len(nxt):
            raise NotARing("thinned current support does not close into a ring")
    if steps != len(nxt):
        raise NotARing(f"support splits into several rings ({steps} of {len(nxt)} cells walked)")
    return DualCycle(_polyline(pts), dual.denominator, "thinned-current", lane)


def eulerian_cycles(K, t, lane, dual=None):
    """Split one lane's directed dual support into closed walks (one per connected piece)."""
    dual = dual or DualComplex(K)
    tail, faces, head, mult = _lane_flow(K, t, lane)
    order = np.lexsort((faces, tail))
    out = {}
    for i in order:
        out.setdefault(int(tail[i]), []).extend([(int(faces[i]), int(head[i]))] * int(mult[i]))
    for a in out:
        out[a].reverse()  # pop() takes the lowest face first
    cycles = []
    while out:
        start = min(out)
        stack = [(start, -1)]
        walk = []
        while stack:
            v, f = stack[-1]
            edges = out.get(v)
            if edges:
                g, w = edges.pop()
                if not edges:
                    del out[v]
                stack.append((w, g))
            else:
                walk.append(stack.pop())
        walk.reverse()
        pts = [dual.node_points[walk[0][0]]]
        for v, f in walk[1:]:
            pts += [dual.face_points[f], dual.node_points[v]]
        cycles.append(DualCycle(_polyline(pts), dual.denominator, "thinned-current", lane))
    return cycles


def submerged_cycles(K, t, lane, dual=None):
    """(cycles, used_fallback) for one lane: a single ring when possible, else Eulerian pieces."""
    try:
        return [order_thinned_cells(K, t, lane, dual)], False
    except EmptySupport:
        return [], False
    except NotARing:
        return eulerian_cycles(K, t, lane, dual), True


def surface_cycle(K, split, surf, lane, dual=None):
    """The lane's surface dual path pushed into the insulator side."""
    dual = dual or DualComplex(K)
    in_c = np.zeros(K.num_cells(3), dtype=bool)
    in_c[split.conductor_tets] = True
    faces = [int(f) for f in surf.face_paths[lane]]
    edges = [int(e) for e in surf.edge_paths[lane]]

    def outer_tet(f):
        a, b = K.face_tets[f]
        return int(b) if in_c[a] else int(a)

    pts = [dual.node_points[outer_tet(faces[0])]]
    for i, E in enumerate(edges):
        A, B = faces[i], faces[i + 1]
        tet, came = outer_tet(A), A
        guard = 0
        while True:
            tf = K.tet_faces[tet]
            around = [int(f) for f in tf if f != came and E in K.face_edges[f]]
            if len(around) != 1:
                raise DegenerateCycle("edge fan is not a manifold fan")
            f = around[0]
            if f == B:
                break
            a, b = K.face_tets[f]
            nxt = int(b) if a == tet else int(a)
            if nxt < 0 or in_c[nxt]:
                raise DegenerateCycle("insulator fan around a surface edge is interrupted")
            pts += [dual.face_points[f], dual.node_points[nxt]]
            tet, came = nxt, f
            guard += 1
            if guard > K.num_cells(3):
                raise DegenerateCycle("runaway fan walk")
    return DualCycle(_polyline(pts), dual.denominator, "surface", lane)


# ------------------------------------------------------------------ linking numbers

def _direction(seed, attempt):
    rng = np.random.default_rng([int(seed), int(attempt)])
    while True:
        d = rng.integers(-64, 65, size=3)
        if np.count_nonzero(d) == 3:
            return d.astype(np.int64)


def _frame(d):
    k = int(np.argmin(np.abs(d)))
    a = np.zeros(3, dtype=np.int64)
    a[k] = 1
    u = np.cross(d, a)
    v = np.cross(d, u)
    hand = int(np.sign(np.dot(np.cross(u, v), d)))
    return u, v, hand


def _project(points, u, v, d):
    p = points
    if p.dtype == object:
        return (p.dot(u.astype(object)), p.dot(v.astype(object)), p.dot(d.astype(object)))
    return p @ u, p @ v, p @ d


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _crossings(a, b, d):
    """Signed crossings of ``a`` over ``b`` seen along ``d``.

    Raises DegenerateProjection for any non-transversal contact in the
    projection and CyclesIntersect when a crossing has equal heights.
    """
    u, v, hand = _frame(d)
    ax, ay, az = _project(a.points, u, v, d)
    bx, by, bz = _project(b.points, u, v, d)
    bound = max(int(np.max(np.abs(ax))), int(np.max(np.abs(ay))),
                int(np.max(np.abs(bx))), int(np.max(np.abs(by))), 1)
    exact_int64 = a.points.dtype != object and b.points.dtype != object and 8 * bound * bound < 2**62
    if not exact_int64:
        ax, ay, bx, by = (np.asarray(x, dtype=object) for x in (ax, ay, bx, by))
    a0x, a0y, a1x, a1y = ax[:-1, None], ay[:-1, None], ax[1:, None], ay[1:, None]
    b0x, b0y, b1x, b1y = bx[None, :-1], by[None, :-1], bx[None, 1:], by[None, 1:]
    if np.any((a0x == a1x) & (a0y == a1y)) or np.any((b0x == b1x) & (b0y == b1y)):
        raise DegenerateProjection("a segment projects to a point")
    # bounding-box prefilter
    box = ((np.minimum(a0x, a1x) <= np.maximum(b0x, b1x)) & (np.minimum(b0x, b1x) <= np.maximum(a0x, a1x))
           & (np.minimum(a0y, a1y) <= np.maximum(b0y, b1y)) & (np.minimum(b0y, b1y) <= np.maximum(a0y, a1y)))
    i, j = np.nonzero(box)
    if i.size == 0:
        return 0
    A0x, A0y, A1x, A1y = ax[i], ay[i], ax[i + 1], ay[i + 1]
    B0x, B0y, B1x, B1y = bx[j], by[j], bx[j + 1], by[j + 1]
    o1 = np.sign(_orient(A0x, A0y, A1x, A1y, B0x, B0y))
    o2 = np.sign(_orient(A0x, A0y, A1x, A1y, B1x, B1y))
    o3 = np.sign(_orient(B0x, B0y, B1x, B1y, A0x, A0y))
    o4 = np.sign(_orient(B0x, B0y, B1x, B1y, A1x, A1y))
    o1, o2, o3, o4 = (np.asarray(o, dtype=np.int64) for o in (o1, o2, o3, o4))
    touching = (o1 * o2 <= 0) & (o3 * o4 <= 0)
    zero = (o1 == 0) | (o2 == 0) | (o3 == 0) | (o4 == 0)
    if np.any(touching & zero):
        raise DegenerateProjection("projection has a non-transversal contact")
    total = 0
    for k in np.flatnonzero(touching).tolist():
        p, q = int(i[k]), int(j[k])
        adx, ady = int(ax[p + 1]) - int(ax[p]), int(ay[p + 1]) - int(ay[p])
        bdx, bdy = int(bx[q + 1]) - int(bx[q]), int(by[q + 1]) - int(by[q])
        wx, wy = int(bx[q]) - int(ax[p]), int(by[q]) - int(ay[p])
        den = adx * bdy - ady * bdx
        s_num = wx * bdy - wy * bdx
        t_num = wx * ady - wy * adx
        za = int(az[p]) * den + s_num * (int(az[p + 1]) - int(az[p]))
        zb = int(bz[q]) * den + t_num * (int(bz[q + 1]) - int(bz[q]))
        diff = (za - zb) * (1 if den > 0 else -1)
        if diff == 0:
            raise CyclesIntersect("the cycles meet in space")
        if diff > 0:
            total += hand * (1 if den > 0 else -1)
    return total


def _cross3(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _segments_meet(p0, p1, q0, q1):
    """Exact test whether two closed 3D segments with integer endpoints share a point."""
    r = [y - x for x, y in zip(p0, p1)]
    s = [y - x for x, y in zip(q0, q1)]
    w = [y - x for x, y in zip(p0, q0)]
    n = _cross3(r, s)
    if any(n):
        if _dot3(w, n):
            return False  # skew
        nn = _dot3(n, n)
        t = _dot3(_cross3(w, s), n)
        u = _dot3(_cross3(w, r), n)
        return 0 <= t <= nn and 0 <= u <= nn
    if any(_cross3(w, r)):
        return False  # parallel, not collinear
    t0 = _dot3(w, r)
    t1 = _dot3([y - x for x, y in zip(p0, q1)], r)
    return max(min(t0, t1), 0) <= min(max(t0, t1), _dot3(r, r))


def cycles_meet(a, b):
    """True when the two polylines share a point (exact; quadratic in the segment counts)."""
    a, b = _common_scale(a, b)
    pa = [[int(x) for x in p] for p in a.points]
    pb = [[int(x) for x in p] for p in b.points]
    for i in range(len(pa) - 1):
        for j in range(len(pb) - 1):
            if _segments_meet(pa[i], pa[i + 1], pb[j], pb[j + 1]):
                return True
    return False


def _common_scale(a, b):
    if a.denominator == b.denominator:
        return a, b
    m = lcm(a.denominator, b.denominator)
    fa, fb = m // a.denominator, m // b.denominator
    return (DualCycle(a.points * fa, m, a.source, a.lane), DualCycle(b.points * fb, m, b.source, b.lane))


def linking_number_certified(a, b, seed=0, max_attempts=MAX_PROJECTION_ATTEMPTS):
    """(linking number, projection retries used)."""
    a, b = _common_scale(a, b)
    for attempt in range(max_attempts):
        try:
            return _crossings(a, b, _direction(seed, attempt)), attempt
        except DegenerateProjection:
            continue
    if cycles_meet(a, b):
        raise CyclesIntersect("the cycles meet in space")
    raise DegenerateProjection(f"no generic projection found in {max_attempts} attempts")


def linking_number(a, b, seed=0):
    """Linking number of two disjoint closed polylines (exact)."""
    return linking_number_certified(a, b, seed)[0]


def _segments_float(c):
    p = c.as_float()
    return p[:-1], p[1:]


def gauss_linking_number(a, b, method="analytic", samples=16, chunk=1 << 20):
    """Floating-point Gauss linking integral, as an independent oracle.

    ``analytic`` sums the closed-form contribution of every segment pair
    (the signed solid angle swept by their difference vectors); ``quadrature`` uses a midpoint rule with ``samples`` points per
    segment.
    """
    a0, a1 = _segments_float(a)
    b0, b1 = _segments_float(b)
    if method == "quadrature":
        s = (np.arange(samples) + 0.5) / samples
        pa = (a0[:, None] + s[None, :, None] * (a1 - a0)[:, None]).reshape(-1, 3)
        da = np.repeat((a1 - a0) / samples, samples, axis=0)
        pb = (b0[:, None] + s[None, :, None] * (b1 - b0)[:, None]).reshape(-1, 3)
        db = np.repeat((b1 - b0) / samples, samples, axis=0)
        total = 0.0
        step = max(1, chunk // max(1, len(pb)))
        for lo in range(0, len(pa), step):
            r = pa[lo:lo + step, None] - pb[None]
            cr = np.cross(da[lo:lo + step, None], db[None])
            total += np.sum(np.einsum("ijk,ijk->ij", r, cr) / np.linalg.norm(r, axis=2) ** 3)
        return total / (4 * np.pi)
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    total = 0.0
    step = max(1, chunk // max(1, len(b0)))
    for lo in range(0, len(a0), step):
        r1, r2 = a0[lo:lo + step, None], a1[lo:lo + step, None]
        r3, r4 = b0[None], b1[None]
        # image of the segment pair on the unit sphere: the quadrilateral r3-r1, r4-r1, r4-r2, r3-r2
        p1, p2, p3, p4 = r3 - r1, r4 - r1, r4 - r2, r3 - r2
        total += np.sum(_triangle_solid_angle(p1, p2, p3) + _triangle_solid_angle(p1, p3, p4))
    return -total / (4 * np.pi)


def _triangle_solid_angle(a, b, c):
    """Signed solid angle of the triangle abc seen from the origin (Van Oosterom and Strackee)."""
    la, lb, lc = (np.linalg.norm(x, axis=-1) for x in (a, b, c))
    dot = lambda x, y: np.einsum("...k,...k->...", x, y)
    num = dot(a, np.cross(b, c))
    den = la * lb * lc + dot(a, b) * lc + dot(a, c) * lb + dot(b, c) * la
    return 2 * np.arctan2(num, den)


# ------------------------------------------------------------------ matrix and basis

@dataclass
class LinkingMatrix:
    """Rows: submerged cycles (lazy lanes); columns: surface cycles (lazy lanes)."""

    entries: np.ndarray
    retries: np.ndarray
    submerged: list = field(repr=False)
    surface: list = field(repr=False)
    eulerian_lanes: list = field(default_factory=list)

    @property
    def shape(self):
        return self.entries.shape


def lane_cycles(K, split, lazy, dual=None):
    """Submerged and surface cycles of every lazy lane, in lane order."""
    dual = dual or DualComplex(K)
    submerged, surface, eulerian = [], [], []
    lane = 0
    for surf, thin in zip(lazy.surface_sets, lazy.thinned):
        for j in range(surf.count):
            cyc, fallback = submerged_cycles(K, thin, j, dual)
            submerged.append(cyc)
            if fallback:
                eulerian.append(lane)
            surface.append(surface_cycle(K, split, surf, j, dual))
            lane += 1
    return submerged, surface, eulerian


def compute_linking_matrix(K, split, lazy, seed=0, dual=None):
    submerged, surface, eulerian = lane_cycles(K, split, lazy, dual)
    n = len(surface)
    L = np.zeros((n, n), dtype=np.int64)
    R = np.zeros((n, n), dtype=np.int64)
    for i, pieces in enumerate(submerged):
        for j, s in enumerate(surface):
            for c in pieces:
                value, retries = linking_number_certified(c, s, seed=seed)
                L[i, j] += value
                R[i, j] += retries
    return LinkingMatrix(L, R, submerged, surface, eulerian)


@dataclass
class BasisSelection:
    """``combination[k]`` gives true generator ``k`` as integer combination of lazy lanes."""

    combination: np.ndarray
    rank: int
    cochain: Cochain
    invariant_factors: list
    pairing: np.ndarray | None = None
    unimodular: bool | None = None


def change_of_basis(lazy, L, beta1=None, basis=None):
    """Integer combinations of lazy lanes forming a basis of the insulator's first cohomology.

    With ``U L V = S`` the rows of ``U`` beyond the rank of ``L`` combine
    lanes into trivial classes, so the leading ``rank`` rows give a basis.
    ``beta1`` (or ``basis.betti``) is checked against the rank; passing an
    oracle ``basis`` also records the pairing matrix and its unimodularity.
    """
    entries = L.entries if hasattr(L, "entries") else np.asarray(L, dtype=np.int64)
    n = lazy.count
    if beta1 is None and basis is not None:
        beta1 = basis.betti
    if n == 0:
        comb = np.zeros((0, 0), dtype=np.int64)
        rank, factors = 0, []
    else:
        D = snf(entries, transforms=("U",))
        rank, factors = D.rank, D.invariant_factors
        comb = np.array(D.U[:rank].tolist(), dtype=np.int64).reshape(rank, n)
    if beta1 is not None and rank != beta1:
        raise RankMismatch(f"linking matrix has rank {rank}, oracle first Betti number is {beta1}")
    cochain = lazy.cochain.combine(comb) if n else Cochain.zeros(1, lanes=0)
    sel = BasisSelection(comb, rank, cochain, factors)
    if basis is not None:
        P = pairing_matrix(cochain, basis, lazy.num_edges)
        sel.pairing = P
        sel.unimodular = bool(P.shape[0] == P.shape[1] and (P.size == 0 or is_unimodular(P)))
    return sel
