import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from sympy.matrices.normalforms import invariant_factors as sympy_invariant_factors

from dsforge.complex import CellComplex, Chain, Cochain
from dsforge.meshio import EXPECTED_BETTI1, EXTRA_SHAPES, split_regions, voxel_mesh
from dsforge.snf import (betti_numbers, homology, is_unimodular, matrix_rank, snf, solve_integer,
                         verify_span, _det)
from dsforge.surface import component_from_triangles

from support import complex_, lazy, oracle_h1, single_tet, split, torus_grid

RP2 = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5), (0, 5, 1),
       (1, 2, 4), (2, 3, 5), (3, 4, 1), (4, 5, 2), (5, 1, 3)]


class TriangleComplex:
    """Bare 2-dimensional simplicial complex speaking the homology protocol (no orientability check)."""

    def __init__(self, triangles):
        tri = np.sort(np.asarray(triangles), axis=1)
        self.tri = tri
        self.nv = int(tri.max()) + 1
        pairs = tri[:, [[1, 2], [0, 2], [0, 1]]].reshape(-1, 2)
        self.edges, inv = np.unique(pairs, axis=0, return_inverse=True)
        self.face_edges = inv.reshape(-1, 3)

    def chain_complex(self, k):
        ids = [np.arange(self.nv), np.arange(len(self.edges)), np.arange(len(self.tri)), np.zeros(0, int)]
        if k == 0 or k == 3:
            return ids[k], ids, ((0 if k == 0 else len(self.tri), len(ids[k])), [])
        if k == 1:
            trip = [(int(v), e, s) for e, (a, b) in enumerate(self.edges) for v, s in ((a, -1), (b, 1))]
            return ids[1], ids, ((self.nv, len(self.edges)), trip)
        trip = [(int(e), f, s) for f, row in enumerate(self.face_edges) for e, s in zip(row, (1, -1, 1))]
        return ids[2], ids, ((len(self.edges), len(self.tri)), trip)


def test_identity():
    D = snf(np.eye(3, dtype=int))
    assert D.invariant_factors == [1, 1, 1]
    assert D.verify(np.eye(3, dtype=int))


def test_already_diagonal():
    A = [[2, 0], [0, 0]]
    D = snf(A)
    assert D.invariant_factors == [2] and D.rank == 1 and D.torsion == [2]
    assert D.verify(A)


def test_divisibility_chain_is_enforced():
    A = [[2, 0], [0, 3]]
    D = snf(A)
    assert D.invariant_factors == [1, 6]
    assert D.verify(A)


def test_big_integers_do_not_overflow():
    big = 2**70 + 1
    A = [[big, 0], [0, 2 * big]]
    D = snf(A)
    assert D.invariant_factors == [big, 2 * big]
    assert D.verify(A)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_matches_sympy(m, n, data):
    A = data.draw(st.lists(st.lists(st.integers(-9, 9), min_size=n, max_size=n), min_size=m, max_size=m))
    D = snf(A)
    ref = [abs(int(x)) for x in sympy_invariant_factors(sympy.Matrix(A), domain=sympy.ZZ) if x != 0]
    assert D.invariant_factors == ref
    assert D.verify(A)
    assert abs(_det(D.U)) == 1 and abs(_det(D.V)) == 1
    for a, b in zip(D.invariant_factors, D.invariant_factors[1:]):
        assert b % a == 0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(1, 3), st.data())
def test_solve_integer_recovers_a_solution(m, n, lanes, data):
    A = np.array(data.draw(st.lists(st.lists(st.integers(-4, 4), min_size=n, max_size=n),
                                    min_size=m, max_size=m)), dtype=object)
    X0 = np.array(data.draw(st.lists(st.lists(st.integers(-4, 4), min_size=lanes, max_size=lanes),
                                     min_size=n, max_size=n)), dtype=object)
    B = A.dot(X0)
    X = solve_integer(A, B)
    assert np.array_equal(A.dot(X), B)


def test_solve_integer_rejects_inconsistent_and_non_integral():
    with pytest.raises(ValueError):
        solve_integer([[1, 1], [1, 1]], [[1], [2]])
    with pytest.raises(ValueError):
        solve_integer([[2]], [[1]])


def test_torus_grid_boundary():
    comp = component_from_triangles(torus_grid(3))
    _, _, bd = comp.chain_complex(2)
    (shape, trip) = bd
    D = snf((shape, list(trip)), transforms="none")
    # b1 = E - rank d1 - rank d2 = 27 - 8 - 17
    assert D.rank == 17 and D.torsion == []
    assert homology(comp, 1).betti == 2
    assert betti_numbers(comp)[:3] == (1, 2, 1)


def test_projective_plane_has_two_torsion():
    X = TriangleComplex(RP2)
    H1 = homology(X, 1)
    assert H1.betti == 0 and H1.torsion == [2]
    assert len(H1.torsion_cycles) == 1
    assert betti_numbers(X)[:3] == (1, 0, 0)


def test_single_tet_homology():
    K = single_tet()
    assert betti_numbers(K) == (1, 0, 0, 0)
    assert homology(K, 0).betti == 1


@pytest.mark.parametrize("X", ["single", "torus", "hopf", "rp2"])
def test_euler_poincare(X):
    if X == "single":
        cx = single_tet()
        counts = cx.cell_counts
    elif X == "rp2":
        cx = TriangleComplex(RP2)
        counts = (6, 15, 10, 0)
    else:
        cx = split({"torus": "solid-torus-in-box", "hopf": "hopf-link-in-box"}[X], 1).K_a
        counts = tuple(cx.num_cells(k) for k in range(4))
    b = betti_numbers(cx)
    assert sum((-1) ** k * b[k] for k in range(4)) == sum((-1) ** k * counts[k] for k in range(4))


def test_homology_cycles_are_cycles_and_independent():
    s = split("hopf-link-in-box", 1)
    H = oracle_h1("hopf-link-in-box", 1)
    K = s.complex
    assert H.betti == 2 and H.torsion == []
    for c in H.cycles:
        assert K.boundary(c).is_zero()
        assert np.all(s.K_a.masks[1][c.cells])
    assert matrix_rank(H.matrix(K.num_cells(1))) == 2


def test_solid_torus_insulator():
    H = oracle_h1("solid-torus-in-box", 1)
    assert H.betti == 1 and H.torsion == []


def test_six_handle_analogue():
    K = CellComplex.from_mesh(voxel_mesh(EXTRA_SHAPES["handlebody6-in-box"]()))
    assert homology(split_regions(K, [1]).K_a, 1).betti == EXPECTED_BETTI1["handlebody6-in-box"] == 6


# ----------------------------------------------------------------- span

def test_span_solid_torus():
    rep = verify_span(lazy("solid-torus-in-box", 1), oracle_h1("solid-torus-in-box", 1))
    assert rep.pairing.shape == (1, 2)
    assert rep.rank == 1 and rep.invariant_factors == [1] and rep.passed


def test_trivial_class_lane_has_zero_column():
    rep = verify_span(lazy("solid-torus-in-box", 1), oracle_h1("solid-torus-in-box", 1))
    zero_cols = [j for j in range(2) if not np.any(rep.pairing[:, j])]
    assert len(zero_cols) == 1


def test_empty_lazy_set_passes_when_betti_zero():
    H = homology(complex_("sphere-in-box", 1), 1)
    assert H.betti == 0
    rep = verify_span(Cochain.zeros(1, lanes=0), H)
    assert rep.passed and rep.rank == 0


def test_span_fails_for_doubled_generator():
    H = oracle_h1("solid-torus-in-box", 1)
    lz = lazy("solid-torus-in-box", 1)
    doubled = lz.cochain.combine([[2, 0], [0, 2]])
    rep = verify_span(doubled, H)
    assert rep.rank == 1 and rep.invariant_factors == [2] and not rep.passed


def test_is_unimodular():
    assert is_unimodular([[2, 1], [1, 1]])
    assert not is_unimodular([[2, 0], [0, 1]])
    assert not is_unimodular([[1, 0, 0]])


def test_homology_rejects_bad_dimension():
    with pytest.raises(ValueError):
        homology(single_tet(), 3)


def test_chain_from_homology_has_global_ids():
    H = oracle_h1("solid-torus-in-box", 1)
    assert isinstance(H.cycles[0], Chain) and H.cycles[0].dim == 1
