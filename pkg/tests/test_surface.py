from collections import deque

import numpy as np
import pytest

from dsforge.complex import CellComplex, Chain
from dsforge.errors import NonOrientable, NotAManifold, NotClosedSurface
from dsforge.meshio import split_regions, voxel_mesh
from dsforge.snf import homology, is_unimodular, pairing_matrix
from dsforge.surface import (build_tree_cotree, component_from_triangles, debug_export, extract_components,
                             surface_coboundary_violations, surface_generators)

from support import CANONICAL, complex_, split, torus_grid

TET_BOUNDARY = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
RP2 = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
       (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3)]


def tree_loop(comp, tc, e):
    """1-cycle (local edge -> coeff) made of the primal-tree path closed by edge ``e``."""
    adj = {}
    for t in tc.tree.tolist():
        a, b = comp.edge_verts[t].tolist()
        adj.setdefault(a, []).append((b, t))
        adj.setdefault(b, []).append((a, t))
    a, b = comp.edge_verts[e].tolist()
    prev = {b: None}
    q = deque([b])
    while q:
        u = q.popleft()
        for w, t in adj.get(u, []):
            if w not in prev:
                prev[w] = (u, t)
                q.append(w)
    cyc = {e: 1}  # a -> b along e, then b -> a through the tree
    v = a
    while prev[v] is not None:
        u, t = prev[v]  # the tree path steps u -> v
        lo = comp.edge_verts[t][0]
        cyc[t] = cyc.get(t, 0) + (1 if lo == u else -1)
        v = u
    return cyc


def loop_pairing(gens, comp, loops):
    dense = np.zeros((comp.num_edges, gens.count), dtype=np.int64)
    local = {int(g): i for i, g in enumerate(comp.edges)}
    for c, row in zip(gens.cochain.cells.tolist(), gens.cochain.coeffs):
        dense[local[c]] = row
    return np.array([[sum(v * dense[e, j] for e, v in loop.items()) for j in range(gens.count)]
                     for loop in loops], dtype=np.int64)


def test_tree_loops_are_cycles():
    comp = component_from_triangles(torus_grid(3))
    tc = build_tree_cotree(comp)
    for e in tc.leftover.tolist():
        loop = tree_loop(comp, tc, e)
        d = np.zeros(comp.num_vertices, dtype=np.int64)
        for edge, c in loop.items():
            a, b = comp.edge_verts[edge]
            d[a] -= c
            d[b] += c
        assert not d.any()


# ----------------------------------------------------------------- fixtures

def test_tet_boundary_sphere():
    comp = component_from_triangles(TET_BOUNDARY)
    assert comp.euler_characteristic == 2 and comp.genus == 0
    tc = build_tree_cotree(comp)
    assert tc.leftover.size == 0
    assert surface_generators(comp).count == 0


def test_torus_fixture_has_two_leftover_edges():
    comp = component_from_triangles(torus_grid(3))
    assert comp.euler_characteristic == 0 and comp.genus == 1
    tc = build_tree_cotree(comp)
    assert tc.leftover.size == 2


def test_torus_generators_dual_to_tree_loops():
    comp = component_from_triangles(torus_grid(3))
    gens = surface_generators(comp)
    tc = gens.tree_cotree
    P = loop_pairing(gens, comp, [tree_loop(comp, tc, e) for e in tc.leftover.tolist()])
    assert np.array_equal(np.abs(P), np.eye(2, dtype=np.int64))


def test_torus_generators_unimodular_against_meridian_and_longitude():
    n = 3
    comp = component_from_triangles(torus_grid(n))
    gens = surface_generators(comp)
    idx = lambda i, j: (i % n) * n + (j % n)
    ev = comp.edge_verts.tolist()

    def loop(pts):
        out = {}
        for a, b in zip(pts, pts[1:] + pts[:1]):
            e = ev.index(sorted([a, b]))
            out[e] = out.get(e, 0) + (1 if a < b else -1)
        return out

    P = loop_pairing(gens, comp, [loop([idx(i, 0) for i in range(n)]), loop([idx(0, j) for j in range(n)])])
    assert is_unimodular(P)


def test_genus_two_component_matches_oracle():
    s = split("genus2-handlebody-in-box", 1)
    (comp,) = extract_components(s)
    tc = build_tree_cotree(comp)
    assert tc.leftover.size == 4 == 2 - comp.euler_characteristic
    assert homology(comp, 1).betti == 4


@pytest.mark.parametrize("shape", CANONICAL)
def test_tree_cotree_structure(shape):
    for comp in extract_components(split(shape, 1)):
        tc = build_tree_cotree(comp)
        assert np.intersect1d(tc.tree, tc.cotree).size == 0
        assert tc.tree.size == comp.num_vertices - 1
        assert tc.cotree.size == comp.num_faces - 1
        assert np.all(tc.face_depth >= 0)
        assert tc.leftover.size == 2 * comp.genus == homology(comp, 1).betti


@pytest.mark.parametrize("shape", CANONICAL)
def test_surface_generators_are_cocycles_with_unit_coefficients(shape):
    K = complex_(shape, 1)
    for comp in extract_components(split(shape, 1)):
        gens = surface_generators(comp)
        assert gens.count == 2 * comp.genus
        assert surface_coboundary_violations(gens) == 0
        assert set(np.unique(np.abs(gens.cochain.coeffs)).tolist()) <= {0, 1}
        # pairing with the boundary of a single surface face vanishes
        for f in comp.faces[:20].tolist():
            d = K.boundary(Chain(2, [f], [1]))
            dense = gens.cochain.to_dense(K.num_cells(1))
            assert not np.any(d.coeffs @ dense[d.cells])
        H = homology(comp, 1)
        P = pairing_matrix(gens.cochain, H, K.num_cells(1))
        assert is_unimodular(P)


def test_components_of_hopf_link():
    comps = extract_components(split("hopf-link-in-box", 1))
    assert [c.genus for c in comps] == [1, 1]
    assert comps[0].faces.min() < comps[1].faces.min()


def test_orientation_is_outward_fundamental_class():
    K = complex_("solid-torus-in-box", 1)
    s = split("solid-torus-in-box", 1)
    (comp,) = extract_components(s)
    cls = comp.fundamental_class()
    tets = s.conductor_tets
    expected = K.boundary(Chain(3, tets, np.ones(tets.size, dtype=np.int64)))
    assert dict(expected.items()) == cls


def test_sphere_conductor_has_no_generators():
    comps = extract_components(split("sphere-in-box", 1))
    assert len(comps) == 1 and comps[0].genus == 0
    assert surface_generators(comps[0]).count == 0


# ----------------------------------------------------------------- errors

def test_pinched_vertex_is_not_a_manifold():
    other = [(a + 3, b + 3, c + 3) for a, b, c in TET_BOUNDARY]  # shares vertex 3
    with pytest.raises(NotAManifold):
        component_from_triangles(TET_BOUNDARY + other)


def test_edge_touching_voxels_are_not_a_manifold():
    tags = np.full((4, 4, 3), 2)
    tags[1, 1, 1] = tags[2, 2, 1] = 1  # share only a lattice edge
    K = CellComplex.from_mesh(voxel_mesh(tags))
    with pytest.raises(NotAManifold):
        extract_components(split_regions(K, [1]))


def test_conductor_touching_outer_boundary():
    tags = np.full((3, 3, 3), 2)
    tags[0, 1, 1] = 1
    K = CellComplex.from_mesh(voxel_mesh(tags))
    with pytest.raises(NotClosedSurface):
        extract_components(split_regions(K, [1]))
    # without exclusion the surface closes up through the outer boundary
    (comp,) = extract_components(split_regions(K, [1], exclude_outer_boundary=False))
    assert comp.genus == 0


def test_projective_plane_is_non_orientable():
    with pytest.raises(NonOrientable):
        component_from_triangles(RP2)


def test_debug_export_uses_global_edges():
    gens = [surface_generators(c) for c in extract_components(split("solid-torus-in-box", 1))]
    doc = debug_export(gens)
    (c,) = doc["components"]
    assert c["genus"] == 1 and len(c["leftover"]) == 2 and len(c["generators"]) == 2
    assert set(c["leftover"]) == {g["closing_edge"] for g in c["generators"]}
    assert not set(c["tree"]) & set(c["cotree"])
