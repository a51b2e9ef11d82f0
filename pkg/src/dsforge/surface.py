"""Closed boundary surfaces of the conductor and their first cohomology generators.

Each component is handled as a small standalone triangle complex with local
numbering plus maps back to the global cell ids of the tetrahedral mesh.
Generators come from a tree-cotree split: a BFS spanning tree ``T`` of the
vertex-edge graph, a BFS spanning tree ``T'`` of the face adjacency graph
that avoids ``T``, and one dual cycle closed by every leftover edge.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .complex import Cochain
from .errors import InternalError, NonOrientable, NotAManifold, NotClosedSurface


def _csr_lists(owner, n, items):
    order = np.argsort(owner, kind="stable")
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, owner + 1, 1)
    return np.cumsum(ptr), items[order]


@dataclass(eq=False)
class SurfaceComponent:
    """A connected closed triangulated surface.

    ``faces``, ``edges`` and ``vertices`` hold global ids of the parent mesh;
    the tables ``face_edges`` / ``face_edge_sign`` / ``edge_verts`` use local
    indices.  ``orientation[f]`` is the sign making the faces coherent.
    """

    index: int
    faces: np.ndarray
    edges: np.ndarray
    vertices: np.ndarray
    face_edges: np.ndarray
    face_edge_sign: np.ndarray
    edge_verts: np.ndarray
    orientation: np.ndarray
    inner_tets: np.ndarray | None = None
    edge_faces: np.ndarray = field(init=False, repr=False)
    edge_face_sign: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ne = self.edges.size
        owner = self.face_edges.reshape(-1)
        faces = np.repeat(np.arange(self.faces.size), 3)
        order = np.lexsort((faces, owner))
        self.edge_faces = faces[order].reshape(ne, 2)
        self.edge_face_sign = self.face_edge_sign.reshape(-1)[order].reshape(ne, 2)

    @property
    def num_vertices(self):
        return int(self.vertices.size)

    @property
    def num_edges(self):
        return int(self.edges.size)

    @property
    def num_faces(self):
        return int(self.faces.size)

    @property
    def euler_characteristic(self):
        return self.num_vertices - self.num_edges + self.num_faces

    @property
    def genus(self):
        return (2 - self.euler_characteristic) // 2

    @property
    def primal_skeleton(self):
        """(vertices, edges as (E, 2) local vertex pairs)."""
        return np.arange(self.num_vertices), self.edge_verts

    @property
    def dual_skeleton(self):
        """(faces, dual edges as (E, 2) local face pairs, one per surface edge)."""
        return np.arange(self.num_faces), self.edge_faces

    def chain_complex(self, k):
        """Global ids and local boundary matrix of dimension ``k`` (homology protocol)."""
        ids = [self.vertices, self.edges, self.faces, np.zeros(0, dtype=np.int64)]
        if k == 0 or k >= 3:
            n_prev = ids[k - 1].size if k else 0
            return ids[min(k, 3)], ids, ((n_prev, ids[min(k, 3)].size), [])
        if k == 1:
            ne = self.num_edges
            rows = self.edge_verts.reshape(-1)
            cols = np.repeat(np.arange(ne), 2)
            vals = np.tile([-1, 1], ne)
            return ids[1], ids, ((self.num_vertices, ne), zip(rows.tolist(), cols.tolist(), vals.tolist()))
        rows = self.face_edges.reshape(-1)
        cols = np.repeat(np.arange(self.num_faces), 3)
        vals = self.face_edge_sign.reshape(-1)
        return ids[2], ids, ((self.num_edges, self.num_faces),
                             zip(rows.tolist(), cols.tolist(), vals.tolist()))

    def fundamental_class(self):
        """Coherently oriented 2-cycle as a dict global face id -> +-1."""
        return {int(f): int(o) for f, o in zip(self.faces, self.orientation)}


def _check_and_orient(nf, nv, face_edges, face_edge_sign, edge_verts, face_verts, root_sign):
    """Manifold checks and BFS orientation of a single closed surface (local ids)."""
    ne = edge_verts.shape[0]
    counts = np.bincount(face_edges.reshape(-1), minlength=ne)
    if np.any(counts > 2):
        raise NotAManifold(f"{int(np.sum(counts > 2))} surface edge(s) with more than two faces")
    if np.any(counts < 2):
        raise NotClosedSurface(f"{int(np.sum(counts < 2))} surface edge(s) with a single face")
    # vertex links: corners (face, local vertex) glued across shared edges must form one cycle per vertex
    faces = np.repeat(np.arange(nf), 3)
    owner = face_edges.reshape(-1)
    order = np.lexsort((faces, owner))
    pair = faces[order].reshape(ne, 2)
    corner_id = lambda f, v: f * 3 + np.argmax(face_verts[f] == v[:, None], axis=1)
    rows, cols = [], []
    for end in (0, 1):
        v = edge_verts[:, end]
        rows.append(corner_id(pair[:, 0], v))
        cols.append(corner_id(pair[:, 1], v))
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    g = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(3 * nf, 3 * nf))
    _, lab = connected_components(g, directed=False)
    corner_vertex = face_verts.reshape(-1)
    per_vertex = np.unique(np.stack([corner_vertex, lab], axis=1), axis=0)[:, 0]
    links = np.bincount(per_vertex, minlength=nv)
    if np.any(links != 1):
        raise NotAManifold(f"{int(np.sum(links != 1))} surface vertex link(s) not a single cycle")
    # BFS orientation: o[a] k(a, e) + o[b] k(b, e) = 0 across every edge
    sign_order = face_edge_sign.reshape(-1)[order].reshape(ne, 2)
    o = np.zeros(nf, dtype=np.int64)
    o[0] = root_sign
    nbr_ptr, nbr = _csr_lists(np.concatenate([pair[:, 0], pair[:, 1]]), nf,
                              np.concatenate([np.arange(ne), np.arange(ne)]))
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for e in nbr[nbr_ptr[f]:nbr_ptr[f + 1]]:
            a, b = pair[e]
            sa, sb = sign_order[e]
            if a == f:
                other, want = b, -o[f] * sa * sb
            else:
                other, want = a, -o[f] * sb * sa
            if o[other] == 0:
                o[other] = want
                queue.append(other)
            elif o[other] != want:
                raise NonOrientable("surface component admits no coherent orientation")
    return o


def _component_from_global(index, K, faces, inner_tets):
    order = np.argsort(faces)
    faces, inner_tets = faces[order], inner_tets[order]
    fe = K.face_edges[faces]
    edges = np.unique(fe)
    ev = K.edges[edges]
    vertices = np.unique(ev)
    face_edges = np.searchsorted(edges, fe)
    edge_verts = np.searchsorted(vertices, ev)
    face_verts = np.searchsorted(vertices, K.faces[faces])
    sign = K.face_edge_sign[faces]
    # root orientation: outward from the conductor (induced by the inner tet)
    t0 = inner_tets[0]
    slot = np.flatnonzero(K.tet_faces[t0] == faces[0])[0]
    root = int(K.tet_face_sign[t0, slot])
    o = _check_and_orient(faces.size, vertices.size, face_edges, sign, edge_verts, face_verts, root)
    return SurfaceComponent(index, faces, edges, vertices, face_edges, sign, edge_verts, o,
                            inner_tets=np.asarray(inner_tets))


def extract_components(split):
    """Connected components of the conductor boundary, checked to be closed orientable manifolds.

    Components are numbered by their lowest global face id.
    """
    K = split.complex
    faces = np.asarray(split.boundary_faces, dtype=np.int64)
    if faces.size == 0:
        return []
    cond = np.zeros(K.num_cells(3), dtype=bool)
    cond[split.conductor_tets] = True
    ft = K.face_tets[faces]
    inner = np.where((ft[:, 0] >= 0) & cond[np.maximum(ft[:, 0], 0)], ft[:, 0], ft[:, 1])
    fe = K.face_edges[faces]
    counts = np.bincount(fe.reshape(-1), minlength=K.num_cells(1))
    if np.any(counts > 2):
        raise NotAManifold(f"{int(np.sum(counts > 2))} conductor boundary edge(s) shared by more than two faces")
    if np.any(counts == 1):
        raise NotClosedSurface(f"{int(np.sum(counts == 1))} conductor boundary edge(s) with a single face; "
                               "does a conductor touch the outer boundary?")
    local = np.full(K.num_cells(2), -1, dtype=np.int64)
    local[faces] = np.arange(faces.size)
    owner = np.repeat(np.arange(faces.size), 3)
    edge = fe.reshape(-1)
    order = np.lexsort((owner, edge))
    pair = owner[order].reshape(-1, 2)
    n = faces.size
    g = coo_matrix((np.ones(len(pair)), (pair[:, 0], pair[:, 1])), shape=(n, n))
    ncomp, lab = connected_components(g, directed=False)
    first = np.full(ncomp, n, dtype=np.int64)
    np.minimum.at(first, lab, np.arange(n))
    rank = np.argsort(first)
    out = []
    for i, c in enumerate(rank):
        sel = np.flatnonzero(lab == c)
        out.append(_component_from_global(i, K, faces[sel], inner[sel]))
    return out


def component_from_triangles(triangles, n_vertices=None):
    """Standalone surface component from a list of vertex triples.

    Edge and face orientations follow the same sorted-vertex convention as
    the tetrahedral complex; global ids are the local ones.
    """
    tri = np.sort(np.asarray(triangles, dtype=np.int64).reshape(-1, 3), axis=1)
    nv = int(n_vertices if n_vertices is not None else tri.max() + 1)
    pairs = tri[:, [[1, 2], [0, 2], [0, 1]]]  # edge opposite local vertex i
    key = pairs[..., 0] * nv + pairs[..., 1]
    ukey, inv = np.unique(key.reshape(-1), return_inverse=True)
    edge_verts = np.stack([ukey // nv, ukey % nv], axis=1)
    face_edges = inv.reshape(-1, 3)
    sign = np.tile(np.array([1, -1, 1], dtype=np.int64), (tri.shape[0], 1))
    vertices = np.arange(nv)
    o = _check_and_orient(tri.shape[0], nv, face_edges, sign, edge_verts, tri, 1)
    return SurfaceComponent(0, np.arange(tri.shape[0]), np.arange(edge_verts.shape[0]), vertices,
                            face_edges, sign, edge_verts, o)


@dataclass
class TreeCotree:
    """Primal tree ``T``, dual tree ``T'`` and leftover edges (local ids) of one component."""

    component: SurfaceComponent
    tree: np.ndarray
    cotree: np.ndarray
    leftover: np.ndarray
    face_parent: np.ndarray = field(repr=False)
    face_parent_edge: np.ndarray = field(repr=False)
    face_depth: np.ndarray = field(repr=False)


def _bfs_tree(n_nodes, ends, allowed):
    """BFS spanning tree from node 0 over the graph edges ``ends[e]`` with ``allowed[e]``.

    Neighbours are scanned in increasing edge id.  Returns (tree edge mask,
    parent, parent edge, depth).
    """
    ne = ends.shape[0]
    eid = np.flatnonzero(allowed)
    owner = np.concatenate([ends[eid, 0], ends[eid, 1]])
    items = np.concatenate([eid, eid])
    order = np.lexsort((items, owner))
    ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.add.at(ptr, owner + 1, 1)
    ptr = np.cumsum(ptr)
    adj = items[order].tolist()
    ptr = ptr.tolist()
    ends_l = ends.tolist()
    parent = [-1] * n_nodes
    parent_edge = [-1] * n_nodes
    depth = [-1] * n_nodes
    in_tree = np.zeros(ne, dtype=bool)
    if n_nodes == 0:
        return in_tree, np.array(parent), np.array(parent_edge), np.array(depth)
    depth[0] = 0
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for e in adj[ptr[u]:ptr[u + 1]]:
            a, b = ends_l[e]
            w = b if a == u else a
            if depth[w] < 0:
                depth[w] = depth[u] + 1
                parent[w] = u
                parent_edge[w] = e
                in_tree[e] = True
                queue.append(w)
    return in_tree, np.array(parent), np.array(parent_edge), np.array(depth)


def build_tree_cotree(comp):
    """Tree-cotree decomposition; raises InternalError if the leftover count is not 2 - chi."""
    ne = comp.num_edges
    tree, _, _, vdepth = _bfs_tree(comp.num_vertices, comp.edge_verts, np.ones(ne, dtype=bool))
    if np.any(vdepth < 0):
        raise InternalError("primal tree does not span the surface")
    cotree, fpar, fpar_e, fdepth = _bfs_tree(comp.num_faces, comp.edge_faces, ~tree)
    if np.any(fdepth < 0):
        raise InternalError("dual tree does not span the surface")
    leftover = np.flatnonzero(~tree & ~cotree)
    if leftover.size != 2 - comp.euler_characteristic:
        raise InternalError(f"{leftover.size} leftover edges, expected {2 - comp.euler_characteristic}")
    return TreeCotree(comp, np.flatnonzero(tree), np.flatnonzero(cotree), leftover, fpar, fpar_e, fdepth)


@dataclass
class SurfaceGeneratorSet:
    """2g surface 1-cocycles (one lane each) with the leftover edge that closed each."""

    component: SurfaceComponent
    tree_cotree: TreeCotree
    cochain: Cochain
    closing_edges: list
    face_paths: list = field(repr=False)
    edge_paths: list = field(repr=False)

    @property
    def count(self):
        return len(self.closing_edges)

    def lane(self, i):
        return self.cochain.lane(i)


def _tree_path(tc, a, b):
    """Faces and crossed edges of the dual-tree path from face ``a`` to face ``b``."""
    up_a, up_b = [a], [b]
    ea, eb = [], []
    da, db = tc.face_depth[a], tc.face_depth[b]
    x, y = a, b
    while da > db:
        ea.append(tc.face_parent_edge[x])
        x = tc.face_parent[x]
        up_a.append(x)
        da -= 1
    while db > da:
        eb.append(tc.face_parent_edge[y])
        y = tc.face_parent[y]
        up_b.append(y)
        db -= 1
    while x != y:
        ea.append(tc.face_parent_edge[x])
        x = tc.face_parent[x]
        up_a.append(x)
        eb.append(tc.face_parent_edge[y])
        y = tc.face_parent[y]
        up_b.append(y)
    faces = up_a + up_b[-2::-1]
    edges = ea + eb[::-1]
    return faces, edges


def close_generators(tc):
    """One surface cocycle per leftover edge.

    For a leftover edge with faces ``v < w`` the dual cycle runs along the
    dual tree from ``w`` down to ``v`` and returns across the edge.  Crossing
    an edge ``E`` from face ``A`` into face ``B`` contributes ``o(A) k(A, E)``.
    """
    comp = tc.component
    o = comp.orientation
    face_edge_sign = {}
    for f in range(comp.num_faces):
        for e, s in zip(comp.face_edges[f].tolist(), comp.face_edge_sign[f].tolist()):
            face_edge_sign[(f, e)] = s
    cells, coeffs, lanes = [], [], []
    face_paths, edge_paths, closing = [], [], []
    for lane, e in enumerate(tc.leftover.tolist()):
        v, w = sorted(comp.edge_faces[e].tolist())
        faces, edges = _tree_path(tc, w, v)
        faces = faces + [w]
        edges = edges + [e]
        for i, E in enumerate(edges):
            A = faces[i]
            cells.append(comp.edges[E])
            coeffs.append(int(o[A]) * face_edge_sign[(A, E)])
            lanes.append(lane)
        face_paths.append(comp.faces[faces])
        edge_paths.append(comp.edges[edges])
        closing.append(int(comp.edges[e]))
    n = len(closing)
    if n:
        cells = np.asarray(cells, dtype=np.int64)
        vals = np.zeros((cells.size, n), dtype=np.int64)
        vals[np.arange(cells.size), lanes] = coeffs
        cochain = Cochain(1, cells, vals, lanes=n)
    else:
        cochain = Cochain.zeros(1, lanes=0)
    return SurfaceGeneratorSet(comp, tc, cochain, closing, face_paths, edge_paths)


def surface_generators(comp):
    return close_generators(build_tree_cotree(comp))


def surface_coboundary_violations(gens):
    """Number of (surface face, lane) pairs where the generator's coboundary is nonzero."""
    comp = gens.component
    if gens.count == 0:
        return 0
    local = {int(g): i for i, g in enumerate(comp.edges)}
    dense = np.zeros((comp.num_edges, gens.count), dtype=np.int64)
    for c, row in zip(gens.cochain.cells.tolist(), gens.cochain.coeffs):
        dense[local[c]] += row
    d = (comp.face_edge_sign[:, :, None] * dense[comp.face_edges]).sum(axis=1)
    return int(np.count_nonzero(d))


def debug_export(generator_sets):
    """JSON-ready dict of trees, leftover edges and generator supports (global edge ids)."""
    out = []
    for gs in generator_sets:
        comp, tc = gs.component, gs.tree_cotree
        gens = []
        for i in range(gs.count):
            lane = gs.cochain.lane(i)
            gens.append({
                "closing_edge": gs.closing_edges[i],
                "support": [[int(c), int(v)] for c, v in zip(lane.cells, lane.coeffs[:, 0])],
            })
        out.append({
            "component": comp.index,
            "euler_characteristic": comp.euler_characteristic,
            "genus": comp.genus,
            "faces": comp.num_faces,
            "tree": comp.edges[tc.tree].tolist(),
            "cotree": comp.edges[tc.cotree].tolist(),
            "leftover": comp.edges[tc.leftover].tolist(),
            "generators": gens,
        })
    return {"components": out}
