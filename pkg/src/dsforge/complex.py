"""Oriented tetrahedral cell complexes with integer chain/cochain algebra.

Cells of every dimension are numbered densely from zero.  Edges and faces
are stored with sorted vertex ids, which fixes their orientation; each
tetrahedron is stored with a vertex order of positive geometric volume, so
the 3-chain with all coefficients equal to one is coherently oriented.
Incidence numbers follow the usual simplicial rule: removing the vertex in
position ``i`` of an oriented simplex yields a face with sign ``(-1)**i``.

Incidence is kept as fixed-arity adjacency tables in both directions
(``tet_faces``/``face_tets``, ``face_edges``/``edge_faces``, ...).  Global
sparse matrices are only materialized for verification.
"""

from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from math import lcm

import numpy as np

from .errors import DegenerateCell, DimensionMismatch, NonConformingMesh

# face opposite vertex i of an oriented tetrahedron
_TET_FACE_LOCAL = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])
_TET_FACE_SIGN = np.array([1, -1, 1, -1])
# edge opposite vertex i of a sorted triangle
_FACE_EDGE_LOCAL = np.array([[1, 2], [0, 2], [0, 1]])
_FACE_EDGE_SIGN = np.array([1, -1, 1])

BARYCENTER_SCALE = 12  # lcm(1, 2, 3, 4): barycenters of any cell are integral at this scale


def _exact_coordinates(coords):
    """Convert coordinates to (integer numerators, common denominator)."""
    rows = [tuple(Fraction(x) if not isinstance(x, str) else Fraction(x.strip()) for x in p)
            for p in coords]
    if any(len(p) != 3 for p in rows):
        raise ValueError("every vertex needs exactly three coordinates")
    den = 1
    for p in rows:
        for x in p:
            den = lcm(den, x.denominator)
    nums = [[int(x * den) for x in p] for p in rows]
    bound = max((abs(v) for p in nums for v in p), default=0)
    # headroom for barycenter scaling and 3x3 determinants
    if bound < 2**40:
        arr = np.array(nums, dtype=np.int64).reshape(-1, 3)
    else:
        arr = np.empty((len(nums), 3), dtype=object)
        for i, p in enumerate(nums):
            arr[i] = p
    return arr, den


def _sort_with_parity(rows):
    """Sort each row ascending; return sorted rows and permutation parity (+1/-1)."""
    order = np.argsort(rows, axis=1, kind="stable")
    srt = np.take_along_axis(rows, order, axis=1)
    k = rows.shape[1]
    inversions = np.zeros(rows.shape[0], dtype=np.int64)
    for i in range(k):
        for j in range(i + 1, k):
            inversions += order[:, i] > order[:, j]
    return srt, np.where(inversions % 2 == 0, 1, -1)


def _unique_rows(rows, n_vertices):
    """np.unique over rows of small int tuples, via integer keys when they fit."""
    k = rows.shape[1]
    if n_vertices ** k < 2**62:
        key = np.zeros(rows.shape[0], dtype=np.int64)
        for j in range(k):
            key = key * n_vertices + rows[:, j]
        _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
        return rows[first], inverse.reshape(-1)
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1)


def _csr(owner, n_owner, values):
    """Group ``values`` by ``owner`` into (indptr, grouped-values) with stable order."""
    order = np.argsort(owner, kind="stable")
    counts = np.bincount(owner, minlength=n_owner)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return indptr, [v[order] for v in values]


class _SparseVector:
    """Shared storage for chains and cochains: sorted cell ids + coefficient rows."""

    def __init__(self, dim, cells, coeffs):
        if dim not in (0, 1, 2, 3):
            raise DimensionMismatch(f"cell dimension must be 0..3, got {dim}")
        self.dim = int(dim)
        cells = np.asarray(cells, dtype=np.int64).reshape(-1)
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        if coeffs.shape[0] != cells.shape[0]:
            raise ValueError("cells and coefficients differ in length")
        if cells.size and cells.min() < 0:
            raise ValueError("negative cell id")
        uniq, inv = np.unique(cells, return_inverse=True)
        summed = np.zeros((uniq.size, coeffs.shape[1]), dtype=np.int64)
        np.add.at(summed, inv.reshape(-1), coeffs)
        keep = np.any(summed != 0, axis=1)
        self.cells = uniq[keep]
        self._coeffs = summed[keep]
        self._lanes = coeffs.shape[1]

    def __len__(self):
        return int(self.cells.size)

    @property
    def support(self):
        return self.cells

    def _row(self, cell):
        i = np.searchsorted(self.cells, cell)
        if i < self.cells.size and self.cells[i] == cell:
            return self._coeffs[i]
        return None

    def to_dense(self, n):
        if self.cells.size and self.cells[-1] >= n:
            raise DimensionMismatch(f"cell id {self.cells[-1]} outside range {n}")
        out = np.zeros((n, self._lanes), dtype=np.int64)
        out[self.cells] = self._coeffs
        return out

    def restrict(self, mask):
        """Keep only cells whose entry in the boolean ``mask`` is true."""
        keep = np.asarray(mask)[self.cells]
        return type(self)._from_rows(self.dim, self.cells[keep], self._coeffs[keep])

    def is_zero(self):
        return self.cells.size == 0


class Chain(_SparseVector):
    """Integer k-chain: a sparse map from k-cells to integers."""

    @classmethod
    def _from_rows(cls, dim, cells, coeffs):
        return cls(dim, cells, coeffs[:, 0] if coeffs.ndim == 2 else coeffs)

    @classmethod
    def from_dict(cls, dim, mapping):
        items = sorted(mapping.items())
        return cls(dim, [k for k, _ in items], [v for _, v in items])

    @classmethod
    def from_dense(cls, dim, dense):
        dense = np.asarray(dense, dtype=np.int64).reshape(-1)
        nz = np.flatnonzero(dense)
        return cls(dim, nz, dense[nz])

    @property
    def coeffs(self):
        return self._coeffs[:, 0]

    def __getitem__(self, cell):
        row = self._row(cell)
        return 0 if row is None else int(row[0])

    def items(self):
        return zip(self.cells.tolist(), self.coeffs.tolist())

    def __eq__(self, other):
        return (isinstance(other, Chain) and self.dim == other.dim
                and np.array_equal(self.cells, other.cells)
                and np.array_equal(self.coeffs, other.coeffs))

    def __add__(self, other):
        if self.dim != other.dim:
            raise DimensionMismatch("cannot add chains of different dimension")
        return Chain(self.dim, np.concatenate([self.cells, other.cells]),
                     np.concatenate([self.coeffs, other.coeffs]))

    def __neg__(self):
        return Chain(self.dim, self.cells, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, k):
        return Chain(self.dim, self.cells, self.coeffs * int(k))

    __rmul__ = __mul__

    def __repr__(self):
        return f"Chain(dim={self.dim}, support={len(self)})"


class Cochain(_SparseVector):
    """Integer k-cochain with one or more coefficient lanes.

    ``values`` maps cell id to an integer vector of length ``lanes``; cells
    absent from the support carry the zero vector.
    """

    def __init__(self, dim, cells, coeffs, lanes=None):
        coeffs = np.asarray(coeffs, dtype=np.int64)
        if coeffs.ndim == 1:
            coeffs = coeffs.reshape(-1, 1)
        if lanes is not None and coeffs.size == 0:
            coeffs = coeffs.reshape(0, lanes)
        super().__init__(dim, cells, coeffs)
        if lanes is not None and self._lanes != lanes:
            raise ValueError(f"expected {lanes} lanes, got {self._lanes}")

    @classmethod
    def _from_rows(cls, dim, cells, coeffs):
        return cls(dim, cells, coeffs, lanes=coeffs.shape[1])

    @classmethod
    def zeros(cls, dim, lanes=1):
        return cls(dim, [], np.zeros((0, lanes), dtype=np.int64), lanes=lanes)

    @classmethod
    def from_dense(cls, dim, dense):
        dense = np.asarray(dense, dtype=np.int64)
        if dense.ndim == 1:
            dense = dense.reshape(-1, 1)
        nz = np.flatnonzero(np.any(dense != 0, axis=1))
        return cls(dim, nz, dense[nz], lanes=dense.shape[1])

    @classmethod
    def from_dict(cls, dim, mapping, lanes=1):
        items = sorted(mapping.items())
        rows = np.array([np.broadcast_to(np.asarray(v, dtype=np.int64), (lanes,)) for _, v in items],
                        dtype=np.int64).reshape(-1, lanes)
        return cls(dim, [k for k, _ in items], rows, lanes=lanes)

    @classmethod
    def stack(cls, cochains):
        """Concatenate the lanes of several cochains of equal dimension."""
        cochains = list(cochains)
        if not cochains:
            raise ValueError("nothing to stack")
        dim = cochains[0].dim
        if any(c.dim != dim for c in cochains):
            raise DimensionMismatch("cannot stack cochains of different dimension")
        cells = np.unique(np.concatenate([c.cells for c in cochains]))
        blocks = []
        for c in cochains:
            block = np.zeros((cells.size, c.lanes), dtype=np.int64)
            block[np.searchsorted(cells, c.cells)] = c.coeffs
            blocks.append(block)
        coeffs = np.concatenate(blocks, axis=1)
        return cls(dim, cells, coeffs, lanes=coeffs.shape[1])

    @property
    def lanes(self):
        return self._lanes

    @property
    def coeffs(self):
        return self._coeffs

    def __getitem__(self, cell):
        row = self._row(cell)
        return np.zeros(self._lanes, dtype=np.int64) if row is None else row.copy()

    def lane(self, i):
        col = self._coeffs[:, i]
        return Cochain(self.dim, self.cells, col.reshape(-1, 1), lanes=1)

    def combine(self, matrix):
        """Integer combinations of lanes: ``out[:, k] = sum_i matrix[k][i] * lane_i``."""
        m = np.asarray(matrix, dtype=np.int64).reshape(-1, self._lanes)
        return Cochain(self.dim, self.cells, self._coeffs @ m.T, lanes=m.shape[0])

    def __eq__(self, other):
        return (isinstance(other, Cochain) and self.dim == other.dim and self.lanes == other.lanes
                and np.array_equal(self.cells, other.cells)
                and np.array_equal(self._coeffs, other._coeffs))

    def __add__(self, other):
        if self.dim != other.dim or self.lanes != other.lanes:
            raise DimensionMismatch("cannot add cochains of different shape")
        return Cochain(self.dim, np.concatenate([self.cells, other.cells]),
                       np.concatenate([self._coeffs, other._coeffs]), lanes=self.lanes)

    def __neg__(self):
        return Cochain(self.dim, self.cells, -self._coeffs, lanes=self.lanes)

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        return f"Cochain(dim={self.dim}, lanes={self.lanes}, support={len(self)})"


def pairing(cochain, chain):
    """Evaluate a cochain on a chain, one integer per lane."""
    if cochain.dim != chain.dim:
        raise DimensionMismatch(f"cannot pair a {cochain.dim}-cochain with a {chain.dim}-chain")
    common, ia, ib = np.intersect1d(cochain.cells, chain.cells, assume_unique=True,
                                    return_indices=True)
    if common.size == 0:
        return np.zeros(cochain.lanes, dtype=np.int64)
    return (cochain.coeffs[ia] * chain.coeffs[ib, None]).sum(axis=0)


class CellComplex:
    """Immutable oriented 3-dimensional simplicial cell complex.

    Attributes
    ----------
    vertices_of : tuple of arrays
        ``vertices_of[k]`` is the (n_k, k+1) vertex table of the k-cells.
    tet_faces, tet_face_sign : (T, 4) arrays
        Faces of each tetrahedron and the incidence numbers kappa(tet, face).
    face_edges, face_edge_sign : (F, 3) arrays
        Same for faces and their edges.
    face_tets, face_tet_sign : (F, 2) arrays
        Co-faces of each face, padded with -1 / 0 for boundary faces.
    edge_faces_ptr, edge_faces, edge_face_sign : CSR lists of faces around each edge.
    region : (T,) array of integer region tags.
    """

    def __init__(self, tets, coords, regions=None, coord_den=None):
        tets = np.asarray(tets, dtype=np.int64).reshape(-1, 4)
        if coord_den is None:
            self.coord_num, self.coord_den = _exact_coordinates(coords)
        else:
            # coords are already integer numerators over coord_den
            self.coord_num = np.asarray(coords).reshape(-1, 3)
            if self.coord_num.dtype != object:
                self.coord_num = self.coord_num.astype(np.int64)
            self.coord_den = int(coord_den)
        nv = self.coord_num.shape[0]
        if tets.size and (tets.min() < 0 or tets.max() >= nv):
            raise ValueError(f"tetrahedron references a vertex outside [0, {nv})")
        srt = np.sort(tets, axis=1)
        bad = np.flatnonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))
        if bad.size:
            raise DegenerateCell(f"tetrahedron {int(bad[0])} repeats a vertex: {tets[bad[0]].tolist()}")
        if regions is None:
            regions = np.zeros(tets.shape[0], dtype=np.int64)
        self.region = np.asarray(regions, dtype=np.int64).reshape(-1)
        if self.region.size != tets.shape[0]:
            raise ValueError("one region tag per tetrahedron required")

        self.tets = self._orient_tets(tets)
        nt = self.tets.shape[0]

        # faces
        raw = self.tets[:, _TET_FACE_LOCAL].reshape(-1, 3)
        raw_sorted, parity = _sort_with_parity(raw)
        faces, inv = _unique_rows(raw_sorted, nv)
        self.faces = faces
        self.tet_faces = inv.reshape(nt, 4)
        self.tet_face_sign = (parity * np.tile(_TET_FACE_SIGN, nt)).reshape(nt, 4)
        nf = faces.shape[0]

        counts = np.bincount(inv, minlength=nf)
        if np.any(counts > 2):
            f = int(np.flatnonzero(counts > 2)[0])
            raise NonConformingMesh(f"face {faces[f].tolist()} has {int(counts[f])} co-faces")
        _, tet_inv = _unique_rows(srt, nv)
        if np.unique(tet_inv).size != nt:
            raise NonConformingMesh("duplicate tetrahedra")

        owner = np.repeat(np.arange(nt), 4)
        ptr, (ft, fs) = _csr(inv, nf, [owner, self.tet_face_sign.reshape(-1)])
        self.face_tets = np.full((nf, 2), -1, dtype=np.int64)
        self.face_tet_sign = np.zeros((nf, 2), dtype=np.int64)
        first = ptr[:-1]
        self.face_tets[:, 0] = ft[first]
        self.face_tet_sign[:, 0] = fs[first]
        two = counts == 2
        self.face_tets[two, 1] = ft[first[two] + 1]
        self.face_tet_sign[two, 1] = fs[first[two] + 1]

        # edges
        raw_e = faces[:, _FACE_EDGE_LOCAL].reshape(-1, 2)
        edges, einv = _unique_rows(raw_e, nv)
        self.edges = edges
        self.face_edges = einv.reshape(nf, 3)
        self.face_edge_sign = np.tile(_FACE_EDGE_SIGN, (nf, 1))
        ne = edges.shape[0]
        fowner = np.repeat(np.arange(nf), 3)
        self.edge_faces_ptr, (self.edge_faces, self.edge_face_sign) = _csr(
            einv, ne, [fowner, self.face_edge_sign.reshape(-1)])

        vowner = np.repeat(np.arange(ne), 2)
        self.vertex_edges_ptr, (self.vertex_edges,) = _csr(edges.reshape(-1), nv, [vowner])

        for arr in (self.tets, self.faces, self.edges, self.region, self.tet_faces,
                    self.tet_face_sign, self.face_tets, self.face_tet_sign, self.face_edges,
                    self.face_edge_sign, self.edge_faces_ptr, self.edge_faces,
                    self.edge_face_sign, self.vertex_edges_ptr, self.vertex_edges,
                    self.coord_num):
            arr.setflags(write=False)

    def _orient_tets(self, tets):
        p = self.coord_num
        if p.dtype == object:
            a = p[tets[:, 1]] - p[tets[:, 0]]
            b = p[tets[:, 2]] - p[tets[:, 0]]
            c = p[tets[:, 3]] - p[tets[:, 0]]
            det = np.array([
                x[0] * (y[1] * z[2] - y[2] * z[1]) - x[1] * (y[0] * z[2] - y[2] * z[0])
                + x[2] * (y[0] * z[1] - y[1] * z[0]) for x, y, z in zip(a, b, c)], dtype=object)
            neg = np.array([d < 0 for d in det], dtype=bool)
        else:
            a = p[tets[:, 1]] - p[tets[:, 0]]
            b = p[tets[:, 2]] - p[tets[:, 0]]
            c = p[tets[:, 3]] - p[tets[:, 0]]
            cross = np.cross(b, c)
            det = np.einsum("ij,ij->i", a, cross)
            neg = det < 0
        out = tets.copy()
        out[neg, 2], out[neg, 3] = tets[neg, 3], tets[neg, 2]
        return out

    @classmethod
    def from_mesh(cls, mesh):
        return cls(mesh.tets, mesh.coord_num, mesh.regions, coord_den=mesh.coord_den)

    # ------------------------------------------------------------------ sizes
    @property
    def vertices_of(self):
        return (np.arange(self.num_vertices).reshape(-1, 1), self.edges, self.faces, self.tets)

    @property
    def num_vertices(self):
        return int(self.coord_num.shape[0])

    def num_cells(self, k):
        return (self.num_vertices, self.edges.shape[0], self.faces.shape[0], self.tets.shape[0])[k]

    @property
    def cell_counts(self):
        return tuple(self.num_cells(k) for k in range(4))

    @property
    def num_all_cells(self):
        return sum(self.cell_counts)

    @cached_property
    def coords_float(self):
        return np.asarray(self.coord_num, dtype=float) / self.coord_den

    @cached_property
    def tet_edges(self):
        """(T, 6) edge ids of each tetrahedron, in face-major order, deduplicated."""
        e = self.face_edges[self.tet_faces].reshape(-1, 12)
        return np.sort(e, axis=1)[:, ::2]

    def region_tags(self):
        return sorted(set(self.region.tolist()))

    # ------------------------------------------------------------ incidence
    def boundary_table(self, k):
        """Fixed-arity table of (k-1)-faces and signs of every k-cell, k >= 1."""
        if k == 1:
            signs = np.tile(np.array([-1, 1], dtype=np.int64), (self.edges.shape[0], 1))
            return self.edges, signs
        if k == 2:
            return self.face_edges, self.face_edge_sign
        if k == 3:
            return self.tet_faces, self.tet_face_sign
        raise DimensionMismatch(f"no boundary table for dimension {k}")

    def incidence(self, k):
        """COO triplets (row=(k-1)-cell, col=k-cell, sign) of the boundary map."""
        table, sign = self.boundary_table(k)
        cols = np.repeat(np.arange(table.shape[0]), table.shape[1])
        return table.reshape(-1), cols, sign.reshape(-1)

    def boundary_matrix(self, k):
        import scipy.sparse as sp
        rows, cols, vals = self.incidence(k)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.num_cells(k - 1), self.num_cells(k)))

    def kappa(self, cell, face, k):
        """Incidence number between the k-cell ``cell`` and the (k-1)-cell ``face``."""
        table, sign = self.boundary_table(k)
        hit = np.flatnonzero(table[cell] == face)
        return int(sign[cell, hit[0]]) if hit.size else 0

    def boundary(self, chain):
        if chain.dim < 1:
            raise DimensionMismatch("the boundary of a 0-chain is not defined here")
        table, sign = self.boundary_table(chain.dim)
        if chain.cells.size and chain.cells[-1] >= table.shape[0]:
            raise DimensionMismatch(f"cell id out of range for dimension {chain.dim}")
        cells = table[chain.cells].reshape(-1)
        coeffs = (sign[chain.cells] * chain.coeffs[:, None]).reshape(-1)
        return Chain(chain.dim - 1, cells, coeffs)

    def coboundary(self, cochain, dense=False):
        """Coboundary of a k-cochain, k <= 2.  ``dense=True`` returns the (n_{k+1}, lanes) array."""
        if cochain.dim > 2:
            raise DimensionMismatch("the coboundary of a 3-cochain is zero-dimensional")
        table, sign = self.boundary_table(cochain.dim + 1)
        c = cochain.to_dense(self.num_cells(cochain.dim))
        out = np.zeros((table.shape[0], cochain.lanes), dtype=np.int64)
        for j in range(table.shape[1]):
            out += sign[:, j, None] * c[table[:, j]]
        return out if dense else Cochain.from_dense(cochain.dim + 1, out)

    # ------------------------------------------------------------ geometry
    def barycenters(self, k):
        """Exact barycenters of all k-cells as integers at scale ``barycenter_denominator``."""
        verts = self.vertices_of[k]
        p = self.coord_num[verts]
        factor = BARYCENTER_SCALE // verts.shape[1]
        return p.sum(axis=1) * factor

    @property
    def barycenter_denominator(self):
        return BARYCENTER_SCALE * self.coord_den

    def __repr__(self):
        v, e, f, t = self.cell_counts
        return f"CellComplex(V={v}, E={e}, F={f}, T={t})"


def build_complex(tets, coords, regions=None):
    """Materialize the oriented cell complex of a tetrahedral mesh.

    ``tets`` is a (T, 4) array of vertex ids (or a list of ``(quad, tag)``
    pairs, in which case ``regions`` is taken from the tags).
    """
    if regions is None and len(tets) and isinstance(tets[0], tuple) and len(tets[0]) == 2:
        regions = [tag for _, tag in tets]
        tets = [quad for quad, _ in tets]
    return CellComplex(tets, coords, regions)


class Subcomplex:
    """Face-closed subset of a CellComplex, stored as one boolean mask per dimension."""

    def __init__(self, parent, masks):
        self.parent = parent
        self.masks = tuple(np.asarray(m, dtype=bool) for m in masks)
        for k, m in enumerate(self.masks):
            if m.shape != (parent.num_cells(k),):
                raise DimensionMismatch(f"mask for dimension {k} has wrong length")

    @classmethod
    def closure(cls, parent, k, cell_mask):
        """Smallest subcomplex containing the k-cells selected by ``cell_mask``."""
        masks = [np.zeros(parent.num_cells(d), dtype=bool) for d in range(4)]
        masks[k] = np.asarray(cell_mask, dtype=bool).copy()
        for d in range(k, 0, -1):
            table, _ = parent.boundary_table(d)
            masks[d - 1][table[masks[d]].reshape(-1)] = True
        return cls(parent, masks)

    @classmethod
    def of_tets(cls, parent, tet_mask):
        return cls.closure(parent, 3, tet_mask)

    def __or__(self, other):
        return Subcomplex(self.parent, [a | b for a, b in zip(self.masks, other.masks)])

    def __and__(self, other):
        return Subcomplex(self.parent, [a & b for a, b in zip(self.masks, other.masks)])

    def cells(self, k):
        return np.flatnonzero(self.masks[k])

    def num_cells(self, k):
        return int(self.masks[k].sum())

    @property
    def num_all_cells(self):
        return sum(self.num_cells(k) for k in range(4))

    def contains(self, k, cell):
        return bool(self.masks[k][cell])

    def is_closed(self):
        for d in range(3, 0, -1):
            table, _ = self.parent.boundary_table(d)
            if not np.all(self.masks[d - 1][table[self.masks[d]]]):
                return False
        return True

    def incidence(self, k):
        rows, cols, vals = self.parent.incidence(k)
        keep = self.masks[k][cols]
        return rows[keep], cols[keep], vals[keep]

    def restrict(self, cochain):
        return cochain.restrict(self.masks[cochain.dim])

    def __repr__(self):
        return "Subcomplex(" + ", ".join(str(self.num_cells(k)) for k in range(4)) + ")"


class DualComplex:
    """Barycentric dual of a CellComplex.

    The dual map sends the k-cell ``i`` to the dual (3-k)-cell ``i``; the
    dual 1-cell of a face is the polyline tet-barycenter -> face-barycenter
    -> tet-barycenter (one segment only for a boundary face).  Points are
    exact integers at scale ``denominator``.
    """

    def __init__(self, K):
        self.primal = K
        self.denominator = K.barycenter_denominator
        self.node_points = K.barycenters(3)
        self.face_points = K.barycenters(2)
        self.edge_points = K.barycenters(1)
        self.vertex_points = K.barycenters(0)

    def num_cells(self, k):
        return self.primal.num_cells(3 - k)

    def dual_map(self, k, cell):
        """(dimension, index) of the dual cell of the primal k-cell ``cell``."""
        if not 0 <= cell < self.primal.num_cells(k):
            raise IndexError(cell)
        return 3 - k, cell

    def inverse_map(self, k, cell):
        return 3 - k, cell

    def dual_edge(self, face):
        """Polyline points (m, 3) of the dual 1-cell of ``face``."""
        t0, t1 = self.primal.face_tets[face]
        pts = [self.node_points[t0], self.face_points[face]]
        if t1 >= 0:
            pts.append(self.node_points[t1])
        return np.array(pts)

    def dual_edge_endpoints(self, face):
        """(first tet, last tet) of the dual 1-cell; last is -1 at the boundary."""
        return tuple(int(x) for x in self.primal.face_tets[face])

    def dual_face(self, edge):
        """Primal faces around ``edge``; their dual edges bound the dual 2-cell of ``edge``."""
        K = self.primal
        return K.edge_faces[K.edge_faces_ptr[edge]:K.edge_faces_ptr[edge + 1]]

    def dual_volume(self, vertex):
        """Primal edges at ``vertex``; their dual faces bound the dual 3-cell of ``vertex``."""
        K = self.primal
        return K.vertex_edges[K.vertex_edges_ptr[vertex]:K.vertex_edges_ptr[vertex + 1]]


def build_dual(K):
    return DualComplex(K)


# ------------------------------------------------------------ invariant checks

def boundary_squared_violations(K):
    """Nonzero entries of d_{k-1} d_k for k = 2, 3 (zero for a valid complex)."""
    out = {}
    for k in (2, 3):
        prod = (K.boundary_matrix(k - 1) @ K.boundary_matrix(k)).tocsr()
        prod.eliminate_zeros()
        out[k] = int(prod.nnz)
    return out


def coboundary_squared_violations(K):
    """Nonzero entries of delta_{k+1} delta_k for k = 0, 1."""
    out = {}
    for k in (0, 1):
        d0 = K.boundary_matrix(k + 1).T.tocsr()
        d1 = K.boundary_matrix(k + 2).T.tocsr()
        prod = (d1 @ d0).tocsr()
        prod.eliminate_zeros()
        out[k] = int(prod.nnz)
    return out


def massey_violations(K):
    """Number of (tet, edge) pairs breaking the two-face incidence identity.

    For every tetrahedron T and edge E of T there must be exactly two faces
    T1, T2 of T containing E, with k(T,T1)k(T1,E) + k(T,T2)k(T2,E) = 0.
    """
    nt = K.num_cells(3)
    if nt == 0:
        return 0
    f = K.tet_faces  # (T, 4)
    edges = K.face_edges[f]  # (T, 4, 3)
    prod = K.tet_face_sign[:, :, None] * K.face_edge_sign[f]  # (T, 4, 3)
    tet = np.repeat(np.arange(nt), 12)
    key = tet * K.num_cells(1) + edges.reshape(-1)
    order = np.argsort(key, kind="stable")
    key = key[order]
    val = prod.reshape(-1)[order]
    uniq, start, count = np.unique(key, return_index=True, return_counts=True)
    bad = int(np.sum(count != 2))
    ok = count == 2
    sums = val[start[ok]] + val[start[ok] + 1]
    bad += int(np.count_nonzero(sums))
    if uniq.size != 6 * nt:
        bad += abs(int(uniq.size) - 6 * nt)
    return bad


def check_invariants(K):
    """Exhaustive structural checks; returns a dict of violation counts."""
    b = boundary_squared_violations(K)
    c = coboundary_squared_violations(K)
    return {
        "boundary_squared": sum(b.values()),
        "coboundary_squared": sum(c.values()),
        "massey": massey_violations(K),
        "max_cofaces": int(np.max((K.face_tets >= 0).sum(axis=1))) if K.num_cells(2) else 0,
    }
