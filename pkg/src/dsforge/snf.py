"""Exact Smith normal form over the integers and homology of chain complexes.

The decomposition works on a sparse dict-of-dicts copy of the matrix with
Python integers throughout, so there is no overflow.  Transform matrices
are tracked only on request because they dominate the cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
import scipy.sparse as sp

from .complex import CellComplex, Chain, Subcomplex


def _xgcd(a, b):
    """Return (g, s, t) with g = s*a + t*b = gcd(a, b) > 0."""
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if a < 0:
        a, s0, t0 = -a, -s0, -t0
    return a, s0, t0


class _Lines:
    """A list of sparse integer vectors (dicts) supporting elementary operations."""

    __slots__ = ("v",)

    def __init__(self, n, identity=True):
        self.v = [{i: 1} for i in range(n)] if identity else [dict() for _ in range(n)]

    def axpy(self, dst, src, q):
        """v[dst] += q * v[src]"""
        d = self.v[dst]
        for k, x in self.v[src].items():
            y = d.get(k, 0) + q * x
            if y:
                d[k] = y
            else:
                d.pop(k, None)

    def mix(self, i, j, a, b, c, d):
        """(v[i], v[j]) <- (a v[i] + b v[j], c v[i] + d v[j])"""
        vi, vj = self.v[i], self.v[j]
        ni, nj = {}, {}
        for k in vi.keys() | vj.keys():
            x, y = vi.get(k, 0), vj.get(k, 0)
            p, q = a * x + b * y, c * x + d * y
            if p:
                ni[k] = p
            if q:
                nj[k] = q
        self.v[i], self.v[j] = ni, nj

    def negate(self, i):
        self.v[i] = {k: -x for k, x in self.v[i].items()}

    def dense(self, order_outer, n_inner, order_inner=None):
        out = np.zeros((len(order_outer), n_inner), dtype=object)
        pos = None if order_inner is None else {c: i for i, c in enumerate(order_inner)}
        for r, i in enumerate(order_outer):
            for k, x in self.v[i].items():
                out[r, k if pos is None else pos[k]] = x
        return out


class _Work:
    """Mutable sparse matrix with row and column dict views kept in sync."""

    def __init__(self, m, n, triples):
        self.rows = [dict() for _ in range(m)]
        self.cols = [dict() for _ in range(n)]
        for i, j, x in triples:
            if x:
                y = self.rows[i].get(j, 0) + x
                if y:
                    self.rows[i][j] = y
                    self.cols[j][i] = y
                else:
                    self.rows[i].pop(j, None)
                    self.cols[j].pop(i, None)

    def _set(self, i, j, x):
        if x:
            self.rows[i][j] = x
            self.cols[j][i] = x
        else:
            self.rows[i].pop(j, None)
            self.cols[j].pop(i, None)

    def row_axpy(self, dst, src, q):
        d = self.rows[dst]
        for j, x in list(self.rows[src].items()):
            self._set(dst, j, d.get(j, 0) + q * x)

    def col_axpy(self, dst, src, q):
        d = self.cols[dst]
        for i, x in list(self.cols[src].items()):
            self._set(i, dst, d.get(i, 0) + q * x)

    def row_mix(self, i, j, a, b, c, d):
        ri, rj = self.rows[i], self.rows[j]
        for k in list(ri.keys() | rj.keys()):
            x, y = ri.get(k, 0), rj.get(k, 0)
            self._set(i, k, a * x + b * y)
            self._set(j, k, c * x + d * y)

    def col_mix(self, i, j, a, b, c, d):
        ci, cj = self.cols[i], self.cols[j]
        for k in list(ci.keys() | cj.keys()):
            x, y = ci.get(k, 0), cj.get(k, 0)
            self._set(k, i, a * x + b * y)
            self._set(k, j, c * x + d * y)

    def row_negate(self, i):
        for j, x in list(self.rows[i].items()):
            self._set(i, j, -x)


@dataclass
class SnfDecomposition:
    """``U @ A @ V == S`` with ``S`` diagonal in its leading ``rank`` block.

    Row ``i`` of ``U`` is the stored row ``row_order[i]``; column ``j`` of ``V``
    is the stored column ``col_order[j]``.  Transform matrices that were not
    requested are ``None``.
    """

    shape: tuple
    invariant_factors: list
    row_order: list
    col_order: list
    _U: _Lines | None = field(default=None, repr=False)
    _U_inv: _Lines | None = field(default=None, repr=False)
    _V: _Lines | None = field(default=None, repr=False)
    _V_inv: _Lines | None = field(default=None, repr=False)

    @property
    def rank(self):
        return len(self.invariant_factors)

    @property
    def torsion(self):
        return [d for d in self.invariant_factors if d > 1]

    @property
    def S(self):
        m, n = self.shape
        out = np.zeros((m, n), dtype=object)
        for i, d in enumerate(self.invariant_factors):
            out[i, i] = d
        return out

    # dense accessors (object arrays of Python ints)
    @property
    def U(self):
        return self._U.dense(self.row_order, self.shape[0])

    @property
    def U_inv(self):
        # stored as columns
        return self._U_inv.dense(self.row_order, self.shape[0]).T

    @property
    def V(self):
        return self._V.dense(self.col_order, self.shape[1]).T

    @property
    def V_inv(self):
        return self._V_inv.dense(self.col_order, self.shape[1])

    def V_column(self, j):
        """Column ``j`` of V as a sparse dict."""
        return self._V.v[self.col_order[j]]

    def U_inv_column(self, i):
        return self._U_inv.v[self.row_order[i]]

    def U_row(self, i):
        return self._U.v[self.row_order[i]]

    def V_inv_row(self, j):
        return self._V_inv.v[self.col_order[j]]

    def verify(self, A):
        """Check ``U A V == S`` exactly and that U, V are unimodular."""
        A = _dense_object(A)
        if not np.array_equal(self.U.dot(A).dot(self.V), self.S):
            return False
        return abs(_det(self.U)) == 1 and abs(_det(self.V)) == 1


def _dense_object(A):
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A, dtype=object)
    return np.vectorize(int, otypes=[object])(A) if A.size else A


def _det(M):
    """Exact determinant by fraction-free (Bareiss) elimination."""
    M = [list(map(int, row)) for row in np.asarray(M, dtype=object).tolist()]
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k]:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[-1][-1]


def _triples(A):
    if sp.issparse(A):
        C = A.tocoo()
        return C.shape, zip(C.row.tolist(), C.col.tolist(), C.data.tolist())
    if isinstance(A, tuple) and len(A) == 2:
        shape, trip = A
        return shape, trip
    A = np.asarray(A, dtype=object)
    if A.ndim != 2:
        raise ValueError("expected a 2-d integer matrix")
    nz = [(i, j, int(A[i, j])) for i in range(A.shape[0]) for j in range(A.shape[1]) if A[i, j]]
    return A.shape, nz


def snf(A, transforms="all"):
    """Smith normal form of an integer matrix.

    ``A`` may be a dense array, a scipy sparse matrix or ``(shape, triples)``.
    ``transforms`` selects which of ``U``, ``U_inv``, ``V``, ``V_inv`` to
    track: ``"all"``, ``"none"`` or an iterable of names.

    Pivots are taken column by column; within a column the entry of least
    absolute value wins, ties broken by the shorter row and then by the lower
    row index.  Non-divisible entries are handled with unimodular 2x2 gcd
    steps, and the divisibility chain is enforced at the end.
    """
    (m, n), trip = _triples(A)
    m, n = int(m), int(n)
    if transforms == "all":
        want = {"U", "U_inv", "V", "V_inv"}
    elif transforms in (None, "none"):
        want = set()
    else:
        want = set(transforms)
    W = _Work(m, n, trip)
    U = _Lines(m) if "U" in want else None          # rows of U
    Ui = _Lines(m) if "U_inv" in want else None     # columns of U^-1
    V = _Lines(n) if "V" in want else None          # columns of V
    Vi = _Lines(n) if "V_inv" in want else None     # rows of V^-1

    def row_axpy(dst, src, q):  # row_dst += q row_src
        W.row_axpy(dst, src, q)
        if U:
            U.axpy(dst, src, q)
        if Ui:
            Ui.axpy(src, dst, -q)

    def col_axpy(dst, src, q):  # col_dst += q col_src
        W.col_axpy(dst, src, q)
        if V:
            V.axpy(dst, src, q)
        if Vi:
            Vi.axpy(src, dst, -q)

    def row_mix(i, j, a, b, c, d):  # det = ad - bc = 1
        W.row_mix(i, j, a, b, c, d)
        if U:
            U.mix(i, j, a, b, c, d)
        if Ui:
            # inverse [[d, -b], [-c, a]] applied on the right to columns i, j
            Ui.mix(i, j, d, -c, -b, a)

    def col_mix(i, j, a, b, c, d):
        W.col_mix(i, j, a, b, c, d)
        if V:
            V.mix(i, j, a, b, c, d)
        if Vi:
            Vi.mix(i, j, d, -c, -b, a)

    pivots = []  # (row, col)
    for j in range(n):
        while True:
            col = W.cols[j]
            if not col:
                break
            p = min(col, key=lambda i: (abs(col[i]), len(W.rows[i]), i))
            # clear column j below/above the pivot with row operations
            for i in sorted(col):
                if i == p or i not in col:
                    continue
                a, b = col[p], col[i]
                if b % a == 0:
                    row_axpy(i, p, -(b // a))
                else:
                    g, s, t = _xgcd(a, b)
                    row_mix(p, i, s, t, -b // g, a // g)
            # clear row p with column operations
            row = W.rows[p]
            dirty = False
            for k in sorted(row):
                if k == j or k not in row:
                    continue
                a, b = row[j], row[k]
                if b % a == 0:
                    col_axpy(k, j, -(b // a))
                else:
                    g, s, t = _xgcd(a, b)
                    col_mix(j, k, s, t, -b // g, a // g)
                    dirty = True
            if not dirty or len(W.cols[j]) == 1:
                pivots.append((p, j))
                break

    diag = [W.rows[p][q] for p, q in pivots]
    r = len(pivots)
    # divisibility chain on the diagonal
    order = sorted(range(r), key=lambda i: (abs(diag[i]), i))
    pivots = [pivots[i] for i in order]
    diag = [diag[i] for i in order]
    for i in range(r):
        for k in range(i + 1, r):
            a, b = diag[i], diag[k]
            if b % a == 0:
                continue
            (pi, qi), (pk, qk) = pivots[i], pivots[k]
            col_axpy(qi, qk, 1)                      # [[a,0],[b,b]]
            g, s, t = _xgcd(a, b)
            row_mix(pi, pk, s, t, -b // g, a // g)   # col qi -> (g, 0)
            top = W.rows[pi].get(qk, 0)
            if top:
                col_axpy(qk, qi, -(top // g))
            diag[i], diag[k] = g, W.rows[pk][qk]
    for i, (p, q) in enumerate(pivots):
        if diag[i] < 0:
            W.row_negate(p)
            if U:
                U.negate(p)
            if Ui:
                Ui.negate(p)
            diag[i] = -diag[i]
    pr = {p for p, _ in pivots}
    pc = {q for _, q in pivots}
    row_order = [p for p, _ in pivots] + [i for i in range(m) if i not in pr]
    col_order = [q for _, q in pivots] + [j for j in range(n) if j not in pc]
    return SnfDecomposition((m, n), [int(d) for d in diag], row_order, col_order, U, Ui, V, Vi)


def matrix_rank(A):
    return snf(A, transforms="none").rank


def solve_integer(A, B, decomposition=None):
    """Integer solution X of ``A X = B`` (B is (m, lanes)); raises ValueError if none exists.

    A decomposition with ``U`` and ``V`` tracked can be passed to amortize
    repeated solves with the same ``A``.
    """
    D = decomposition or snf(A, transforms=("U", "V"))
    m, n = D.shape
    B = np.asarray(B, dtype=object).reshape(m, -1)
    lanes = B.shape[1]
    X = np.zeros((n, lanes), dtype=object)
    for i in range(m):
        u = D.U_row(i)
        y = [sum(x * B[k, l] for k, x in u.items()) for l in range(lanes)]
        if i < D.rank:
            d = D.invariant_factors[i]
            if any(v % d for v in y):
                raise ValueError("system has no integer solution")
            y = [v // d for v in y]
            for k, x in D.V_column(i).items():
                for l in range(lanes):
                    X[k, l] += x * y[l]
        elif any(y):
            raise ValueError("system is inconsistent")
    return X


# ------------------------------------------------------------------ homology

@dataclass
class HomologyBasis:
    """Betti number, torsion and explicit cycle representatives in dimension ``dim``."""

    dim: int
    betti: int
    torsion: list
    cycles: list  # Chain objects in global cell ids
    torsion_cycles: list = field(default_factory=list)

    def matrix(self, n_cells):
        """Dense (len(cycles), n_cells) coefficient array."""
        out = np.zeros((len(self.cycles), n_cells), dtype=np.int64)
        for i, c in enumerate(self.cycles):
            out[i, c.cells] = c.coeffs
        return out


def _cells_and_boundary(X, k):
    """Global ids of the k-cells of X and the local (shape, triples) of its d_k."""
    if hasattr(X, "chain_complex"):
        return X.chain_complex(k)
    if isinstance(X, CellComplex):
        parent, masks = X, None
    elif isinstance(X, Subcomplex):
        parent, masks = X.parent, X.masks
    else:
        raise TypeError(f"cannot compute homology of {type(X).__name__}")
    ids = [np.arange(parent.num_cells(d)) if masks is None else np.flatnonzero(masks[d])
           for d in range(4)]
    if k < 0 or k > 3:
        return np.zeros(0, dtype=np.int64), ids, None
    if k == 0:
        return ids[0], ids, ((0, ids[0].size), [])
    table, sign = parent.boundary_table(k)
    cols = ids[k]
    local = np.full(parent.num_cells(k - 1), -1, dtype=np.int64)
    local[ids[k - 1]] = np.arange(ids[k - 1].size)
    sub = local[table[cols]]
    if np.any(sub < 0):
        raise ValueError("subcomplex is not closed")
    r = sub.reshape(-1)
    c = np.repeat(np.arange(cols.size), table.shape[1])
    v = sign[cols].reshape(-1)
    return ids[k], ids, ((ids[k - 1].size, cols.size), zip(r.tolist(), c.tolist(), v.tolist()))


def betti_numbers(X):
    """(b0, b1, b2, b3) from ranks of the boundary maps (no transforms)."""
    ranks = [0]
    sizes = []
    for k in range(4):
        cells, _, bd = _cells_and_boundary(X, k)
        sizes.append(len(cells))
        if k >= 1:
            ranks.append(snf(bd, transforms="none").rank if len(cells) else 0)
    ranks.append(0)
    return tuple(sizes[k] - ranks[k] - ranks[k + 1] for k in range(4))


def homology(X, k):
    """Homology basis of ``X`` (CellComplex, Subcomplex or surface component) in dimension ``k``.

    The kernel of ``d_k`` comes from the column transform of its Smith form;
    ``d_{k+1}`` is rewritten in that kernel basis and reduced again, and the
    free generators are the leftover columns of the second row transform.
    """
    if k not in (0, 1, 2):
        raise ValueError("homology dimension must be 0, 1 or 2")
    cells, _, bd_k = _cells_and_boundary(X, k)
    nk = len(cells)
    D1 = snf(bd_k, transforms=("V", "V_inv")) if k >= 1 and nk else None
    r1 = D1.rank if D1 else 0
    nz = nk - r1
    # kernel basis columns z_a = V[:, r1 + a]; coordinates of a cycle c are rows r1: of V^-1 c
    _, _, bd_next = _cells_and_boundary(X, k + 1)
    (_, n_next), trip = bd_next
    if D1 is None:
        triples = list(trip)
    else:
        by_row = {}
        for i, j, v in trip:
            by_row.setdefault(i, []).append((j, v))
        acc = {}
        for a in range(nz):
            for i, x in D1.V_inv_row(r1 + a).items():
                for j, y in by_row.get(i, ()):
                    key = (a, j)
                    acc[key] = acc.get(key, 0) + x * y
        triples = [(a, j, v) for (a, j), v in acc.items() if v]
    D2 = snf(((nz, n_next), triples), transforms=("U_inv",))
    r2 = D2.rank

    def lift(coords):
        out = {}
        for a, x in coords.items():
            basis = D1.V_column(r1 + a) if D1 is not None else {a: 1}
            for i, y in basis.items():
                out[i] = out.get(i, 0) + x * y
        return Chain.from_dict(k, {int(cells[i]): v for i, v in out.items() if v})

    cycles = [lift(D2.U_inv_column(i)) for i in range(r2, nz)]
    tors_idx = [i for i, d in enumerate(D2.invariant_factors) if d > 1]
    torsion = [D2.invariant_factors[i] for i in tors_idx]
    tcycles = [lift(D2.U_inv_column(i)) for i in tors_idx]
    return HomologyBasis(k, nz - r2, torsion, cycles, tcycles)


# ------------------------------------------------------------------ span check

@dataclass
class SpanReport:
    betti: int
    n_lanes: int
    pairing: np.ndarray
    rank: int
    invariant_factors: list
    passed: bool

    def as_dict(self):
        return {
            "betti1": self.betti,
            "lanes": self.n_lanes,
            "pairing": [[int(x) for x in row] for row in self.pairing.tolist()],
            "rank": self.rank,
            "invariant_factors": [int(d) for d in self.invariant_factors],
            "pass": self.passed,
        }


def pairing_matrix(cochain, basis, n_cells):
    """P[i, j] = <lane j of cochain, cycle i>."""
    dense = cochain.to_dense(n_cells)
    Z = basis.matrix(n_cells)
    return Z @ dense if Z.size else np.zeros((0, cochain.lanes), dtype=np.int64)


def verify_span(lazy, basis):
    """Check that the 1-cochain lanes of ``lazy`` span the dual of ``basis``.

    ``lazy`` is a LazyGeneratorSet (or a 1-Cochain).  Passes iff the pairing
    matrix has rank equal to the Betti number and every nonzero invariant
    factor is one.
    """
    cochain = getattr(lazy, "cochain", lazy)
    n = getattr(lazy, "num_edges", None)
    if n is None:
        n = max([int(cochain.cells.max()) + 1 if cochain.cells.size else 0]
                + [int(c.cells.max()) + 1 for c in basis.cycles if c.cells.size])
    P = pairing_matrix(cochain, basis, n)
    D = snf(P, transforms="none") if P.size else None
    rank = D.rank if D else 0
    factors = D.invariant_factors if D else []
    ok = rank == basis.betti and all(d == 1 for d in factors)
    return SpanReport(basis.betti, cochain.lanes, P, rank, factors, ok)


def is_unimodular(M):
    M = np.asarray(M, dtype=object)
    return M.ndim == 2 and M.shape[0] == M.shape[1] and abs(_det(M)) == 1


def gcd_all(values):
    g = 0
    for v in values:
        g = gcd(g, int(v))
    return g
