"""Labeled tetrahedral meshes: Gmsh 2.2 / TetGen I/O, region splitting, test meshes.

Canonical meshes are voxel models: a coarse grid of tagged voxels is
refined by splitting every voxel into ``8**(refinement-1)`` sub-voxels and
each voxel into six tetrahedra along its main diagonal (Kuhn split), which
keeps the mesh conforming at every level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import permutations
from pathlib import Path

import numpy as np

from .complex import Subcomplex, _exact_coordinates
from .errors import ParseError, UnknownRegionTag, UnsupportedFormatVersion

log = logging.getLogger(__name__)

GMSH = "gmsh-msh-v2-ascii"
TETGEN = "tetgen-node-ele"
FORMATS = (GMSH, TETGEN)

MAX_VERTEX_ID = 2**62


@dataclass(eq=False)
class MeshFile:
    """Vertices with exact coordinates (``coord_num / coord_den``) and tagged tetrahedra."""

    coord_num: np.ndarray
    coord_den: int
    tets: np.ndarray
    regions: np.ndarray
    format: str = GMSH

    def __post_init__(self):
        self.tets = np.asarray(self.tets, dtype=np.int64).reshape(-1, 4)
        self.regions = np.asarray(self.regions, dtype=np.int64).reshape(-1)
        if self.regions.size != self.tets.shape[0]:
            raise ValueError("one region tag per tetrahedron required")
        nv = len(self.coord_num)
        if self.tets.size and (self.tets.min() < 0 or self.tets.max() >= nv):
            raise ValueError("tetrahedron vertex index out of range")

    @classmethod
    def from_coordinates(cls, coords, tets, regions, format=GMSH):
        num, den = _exact_coordinates(coords)
        return cls(num, den, tets, regions, format)

    @property
    def num_vertices(self):
        return len(self.coord_num)

    @property
    def num_tets(self):
        return int(self.tets.shape[0])

    @cached_property
    def vertices(self):
        """Exact coordinates as tuples of Fractions."""
        return [tuple(Fraction(int(x), self.coord_den) for x in p) for p in self.coord_num]

    def region_tags(self):
        return sorted(set(self.regions.tolist()))

    def __eq__(self, other):
        if not isinstance(other, MeshFile):
            return NotImplemented
        same_coords = (self.coord_den == other.coord_den
                       and np.array_equal(np.asarray(self.coord_num, dtype=object),
                                          np.asarray(other.coord_num, dtype=object)))
        if not same_coords and self.num_vertices == other.num_vertices:
            same_coords = self.vertices == other.vertices
        return (same_coords and np.array_equal(self.tets, other.tets)
                and np.array_equal(self.regions, other.regions))


# ---------------------------------------------------------------- parsing

def _fraction(token, line, path):
    try:
        x = Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad coordinate {token!r}", line, path) from None
    return x


def _int(token, line, path, what="integer"):
    try:
        return int(token)
    except ValueError:
        try:
            f = float(token)
        except ValueError:
            raise ParseError(f"bad {what} {token!r}", line, path) from None
        if f != int(f):
            raise ParseError(f"bad {what} {token!r}", line, path) from None
        return int(f)


def _read_lines(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read mesh file: {exc.strerror}", None, path) from None


def _parse_gmsh(path):
    lines = _read_lines(path)
    pos = 0
    n = len(lines)
    version = None
    node_ids = {}
    coords = []
    tets, regions = [], []

    def next_line():
        nonlocal pos
        while pos < n and not lines[pos].strip():
            pos += 1
        if pos >= n:
            raise ParseError("unexpected end of file", n, path)
        pos += 1
        return lines[pos - 1].split(), pos

    while True:
        while pos < n and not lines[pos].strip():
            pos += 1
        if pos >= n:
            break
        tok, lineno = next_line()
        head = tok[0]
        if head == "$MeshFormat":
            tok, lineno = next_line()
            if len(tok) < 3:
                raise ParseError("malformed $MeshFormat", lineno, path)
            version = tok[0]
            if not version.startswith("2"):
                raise UnsupportedFormatVersion(f"{path}: Gmsh format {version} (only 2.2 ASCII)")
            if tok[1] != "0":
                raise UnsupportedFormatVersion(f"{path}: binary Gmsh files are not supported")
            tok, lineno = next_line()
            if tok[0] != "$EndMeshFormat":
                raise ParseError("expected $EndMeshFormat", lineno, path)
        elif head == "$Nodes":
            tok, lineno = next_line()
            count = _int(tok[0], lineno, path, "node count")
            for _ in range(count):
                tok, lineno = next_line()
                if len(tok) < 4:
                    raise ParseError("node line needs id x y z", lineno, path)
                nid = _int(tok[0], lineno, path, "node id")
                if nid in node_ids:
                    raise ParseError(f"duplicate node id {nid}", lineno, path)
                node_ids[nid] = len(coords)
                coords.append(tuple(_fraction(t, lineno, path) for t in tok[1:4]))
            tok, lineno = next_line()
            if tok[0] != "$EndNodes":
                raise ParseError("expected $EndNodes", lineno, path)
        elif head == "$Elements":
            tok, lineno = next_line()
            count = _int(tok[0], lineno, path, "element count")
            for _ in range(count):
                tok, lineno = next_line()
                if len(tok) < 3:
                    raise ParseError("malformed element line", lineno, path)
                etype = _int(tok[1], lineno, path, "element type")
                ntags = _int(tok[2], lineno, path, "tag count")
                if etype != 4:
                    continue
                body = tok[3 + ntags:]
                if len(body) != 4:
                    raise ParseError("tetrahedron needs four nodes", lineno, path)
                quad = []
                for t in body:
                    vid = _int(t, lineno, path, "node id")
                    if vid not in node_ids:
                        raise ParseError(f"element references unknown node {vid}", lineno, path)
                    quad.append(node_ids[vid])
                tets.append(quad)
                regions.append(_int(tok[3], lineno, path, "tag") if ntags > 0 else 0)
            tok, lineno = next_line()
            if tok[0] != "$EndElements":
                raise ParseError("expected $EndElements", lineno, path)
        elif head.startswith("$") and not head.startswith("$End"):
            end = "$End" + head[1:]
            while pos < n and lines[pos].strip() != end:
                pos += 1
            if pos >= n:
                raise ParseError(f"unterminated section {head}", n, path)
            pos += 1
        else:
            raise ParseError(f"unexpected content {lines[lineno - 1].strip()!r}", lineno, path)
    if version is None:
        raise ParseError("missing $MeshFormat section", 1, path)
    num, den = _exact_coordinates(coords)
    return MeshFile(num, den, np.array(tets, dtype=np.int64).reshape(-1, 4),
                    np.array(regions, dtype=np.int64), GMSH)


def _tetgen_rows(path):
    rows = []
    for i, raw in enumerate(_read_lines(path), start=1):
        text = raw.split("#", 1)[0].split()
        if text:
            rows.append((i, text))
    if not rows:
        raise ParseError("empty file", 1, path)
    return rows


def _tetgen_paths(path):
    p = Path(path)
    if p.suffix in (".node", ".ele"):
        return p.with_suffix(".node"), p.with_suffix(".ele")
    return Path(str(p) + ".node"), Path(str(p) + ".ele")


def _parse_tetgen(path):
    node_path, ele_path = _tetgen_paths(path)
    rows = _tetgen_rows(node_path)
    lineno, head = rows[0]
    count = _int(head[0], lineno, node_path, "point count")
    dim = _int(head[1], lineno, node_path, "dimension") if len(head) > 1 else 3
    if dim != 3:
        raise ParseError(f"expected 3-dimensional points, got {dim}", lineno, node_path)
    if len(rows) - 1 < count:
        raise ParseError("fewer points than declared", rows[-1][0], node_path)
    index = {}
    coords = []
    for lineno, tok in rows[1:count + 1]:
        if len(tok) < 4:
            raise ParseError("point line needs index x y z", lineno, node_path)
        vid = _int(tok[0], lineno, node_path, "point index")
        index[vid] = len(coords)
        coords.append(tuple(_fraction(t, lineno, node_path) for t in tok[1:4]))

    rows = _tetgen_rows(ele_path)
    lineno, head = rows[0]
    count = _int(head[0], lineno, ele_path, "tetrahedron count")
    per = _int(head[1], lineno, ele_path, "nodes per tetrahedron") if len(head) > 1 else 4
    nattr = _int(head[2], lineno, ele_path, "attribute count") if len(head) > 2 else 0
    if per != 4:
        raise UnsupportedFormatVersion(f"{ele_path}: {per}-node tetrahedra are not supported")
    if len(rows) - 1 < count:
        raise ParseError("fewer tetrahedra than declared", rows[-1][0], ele_path)
    tets, regions = [], []
    for lineno, tok in rows[1:count + 1]:
        if len(tok) < 5 + nattr:
            raise ParseError("tetrahedron line too short", lineno, ele_path)
        quad = []
        for t in tok[1:5]:
            vid = _int(t, lineno, ele_path, "point index")
            if vid not in index:
                raise ParseError(f"tetrahedron references unknown point {vid}", lineno, ele_path)
            quad.append(index[vid])
        tets.append(quad)
        regions.append(_int(tok[5], lineno, ele_path, "region attribute") if nattr else 0)
    num, den = _exact_coordinates(coords)
    return MeshFile(num, den, np.array(tets, dtype=np.int64).reshape(-1, 4),
                    np.array(regions, dtype=np.int64), TETGEN)


def _guess_format(path):
    suffix = Path(path).suffix.lower()
    if suffix == ".msh":
        return GMSH
    if suffix in (".node", ".ele"):
        return TETGEN
    raise ParseError(f"cannot infer mesh format from {Path(path).name!r}", None, path)


def parse_mesh(path, format=None):
    """Load a labeled tetrahedral mesh.

    ``format`` is one of ``"gmsh-msh-v2-ascii"`` or ``"tetgen-node-ele"``;
    by default it is inferred from the file suffix.  Decimal coordinates
    are converted to exact rationals.
    """
    format = format or _guess_format(path)
    if format == GMSH:
        return _parse_gmsh(path)
    if format == TETGEN:
        return _parse_tetgen(path)
    raise ValueError(f"unknown mesh format {format!r}")


# ---------------------------------------------------------------- writing

def _decimal(num, den):
    """Exact decimal string of num/den; den must have no prime factors besides 2 and 5."""
    num, den = int(num), int(den)
    if num % den == 0:
        return str(num // den)
    d, k2, k5 = den, 0, 0
    while d % 2 == 0:
        d //= 2
        k2 += 1
    while d % 5 == 0:
        d //= 5
        k5 += 1
    if d != 1:
        frac = Fraction(num, den)
        if frac.denominator != den:
            return _decimal(frac.numerator, frac.denominator)
        raise ValueError(f"{num}/{den} has no finite decimal expansion")
    k = max(k2, k5)
    scaled = num * 10**k // den
    sign = "-" if scaled < 0 else ""
    digits = str(abs(scaled)).rjust(k + 1, "0")
    out = f"{sign}{digits[:-k]}.{digits[-k:]}".rstrip("0")
    return out


def write_mesh(mesh, path, format=None):
    """Write ``mesh`` losslessly (coordinates as exact decimals)."""
    format = format or _guess_format(path)
    coords = [" ".join(_decimal(x, mesh.coord_den) for x in p) for p in mesh.coord_num]
    if format == GMSH:
        out = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(coords))]
        out += [f"{i + 1} {c}" for i, c in enumerate(coords)]
        out += ["$EndNodes", "$Elements", str(mesh.num_tets)]
        for i, (q, r) in enumerate(zip(mesh.tets.tolist(), mesh.regions.tolist())):
            out.append(f"{i + 1} 4 2 {r} {r} {q[0] + 1} {q[1] + 1} {q[2] + 1} {q[3] + 1}")
        out.append("$EndElements")
        Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
    elif format == TETGEN:
        node_path, ele_path = _tetgen_paths(path)
        lines = [f"{len(coords)} 3 0 0"] + [f"{i} {c}" for i, c in enumerate(coords)]
        node_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        lines = [f"{mesh.num_tets} 4 1"]
        for i, (q, r) in enumerate(zip(mesh.tets.tolist(), mesh.regions.tolist())):
            lines.append(f"{i} {q[0]} {q[1]} {q[2]} {q[3]} {r}")
        ele_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown mesh format {format!r}")


# ---------------------------------------------------------------- regions

@dataclass
class RegionSplit:
    """Conductor / insulator subcomplexes of a mesh and the conductor boundary."""

    complex: object
    conductor_tags: frozenset
    K_c: Subcomplex
    K_a: Subcomplex
    exclude_outer_boundary: bool
    boundary_faces: np.ndarray = field(repr=False)
    conductor_tets: np.ndarray = field(repr=False)

    @property
    def boundary_mask(self):
        m = np.zeros(self.complex.num_cells(2), dtype=bool)
        m[self.boundary_faces] = True
        return m


def split_regions(K, conductor_tags, exclude_outer_boundary=True):
    """Split ``K`` into conductor ``K_c`` and insulator ``K_a`` by region tag.

    The conductor boundary consists of the faces with exactly one co-face in
    the conductor; with ``exclude_outer_boundary`` the faces of the outer
    boundary of ``K`` are dropped from it and added (with their closure) to
    ``K_a``.
    """
    tags = frozenset(int(t) for t in conductor_tags)
    if not tags:
        raise UnknownRegionTag("at least one conductor region tag is required")
    present = set(K.region.tolist())
    missing = sorted(tags - present)
    if missing:
        raise UnknownRegionTag(f"region tag(s) {missing} not present in mesh (have {sorted(present)})")
    cond = np.isin(K.region, list(tags))
    K_c = Subcomplex.of_tets(K, cond)
    K_a = Subcomplex.of_tets(K, ~cond)
    outer = K.face_tets[:, 1] < 0
    if exclude_outer_boundary:
        K_a = K_a | Subcomplex.closure(K, 2, outer)
    ft = K.face_tets
    in_c = np.where(ft >= 0, cond[np.maximum(ft, 0)], False)
    boundary = in_c.sum(axis=1) == 1
    if exclude_outer_boundary:
        boundary &= ~outer
    return RegionSplit(K, tags, K_c, K_a, exclude_outer_boundary,
                       np.flatnonzero(boundary), np.flatnonzero(cond))


# ---------------------------------------------------------------- generation

# lattice trefoil (50 unit steps), checked knotted by Fox 3-colouring in the tests
_TREFOIL_PATH = (
    (2, 1, 2), (2, 1, 1), (3, 1, 1), (3, 1, 0), (3, 2, 0), (4, 2, 0), (4, 3, 0), (4, 3, 1),
    (4, 3, 2), (4, 3, 3), (4, 4, 3), (4, 4, 4), (3, 4, 4), (3, 3, 4), (2, 3, 4), (2, 3, 3),
    (1, 3, 3), (1, 3, 2), (1, 2, 2), (1, 2, 1), (1, 1, 1), (1, 1, 0), (1, 0, 0), (1, 0, 1),
    (2, 0, 1), (2, 0, 2), (2, 0, 3), (3, 0, 3), (3, 0, 4), (3, 1, 4), (3, 1, 3), (3, 2, 3),
    (3, 2, 2), (3, 3, 2), (3, 3, 1), (2, 3, 1), (2, 3, 0), (1, 3, 0), (1, 4, 0), (0, 4, 0),
    (0, 4, 1), (0, 3, 1), (0, 3, 2), (0, 3, 3), (0, 3, 4), (0, 2, 4), (1, 2, 4), (1, 1, 4),
    (1, 1, 3), (2, 1, 3),
)


def tube_voxels(path):
    """Voxels of a one-voxel-thick tube along a closed unit-step lattice polygon.

    The polygon is scaled by two so that strands of the tube that are not
    neighbours along the path are separated by at least one voxel.
    """
    p = np.asarray(path, dtype=np.int64) * 2
    nxt = np.roll(p, -1, axis=0)
    if np.any(np.abs(nxt - p).sum(axis=1) != 2):
        raise ValueError("path must be a closed unit-step lattice polygon")
    vox = np.empty((2 * len(p), 3), dtype=np.int64)
    vox[0::2] = p
    vox[1::2] = (p + nxt) // 2
    return vox


def _plate(shape, holes, z=1):
    tags = np.full(shape, 2, dtype=np.int64)
    nx, ny, _ = shape
    tags[1:nx - 1, 1:ny - 1, z] = 1
    for x, y in holes:
        tags[x, y, z] = 2
    return tags


def _solid_torus():
    return _plate((5, 5, 3), [(2, 2)])


def _genus2():
    return _plate((7, 5, 3), [(2, 2), (4, 2)])


def _handlebody(holes):
    return _plate((2 * holes + 3, 5, 3), [(2 * k, 2) for k in range(1, holes + 1)])


def _sphere():
    tags = np.full((3, 3, 3), 2, dtype=np.int64)
    tags[1, 1, 1] = 1
    return tags


def _hopf(second_tag=1, box_tag=2):
    tags = np.full((9, 7, 7), box_tag, dtype=np.int64)
    ring_a = np.zeros((9, 7), dtype=bool)
    ring_a[1:6, 1:6] = True
    ring_a[2:5, 2:5] = False
    tags[:, :, 3][ring_a] = 1
    ring_b = np.zeros((9, 7), dtype=bool)  # indexed (x, z) in the plane y = 3
    ring_b[3:8, 1:6] = True
    ring_b[4:7, 2:5] = False
    tags[:, 3, :][ring_b] = second_tag
    return tags


def _trefoil():
    vox = tube_voxels(_TREFOIL_PATH) + 1
    shape = tuple(int(v) for v in vox.max(axis=0) + 2)
    tags = np.full(shape, 2, dtype=np.int64)
    tags[vox[:, 0], vox[:, 1], vox[:, 2]] = 1
    return tags


SHAPES = {
    "solid-torus-in-box": _solid_torus,
    "hopf-link-in-box": _hopf,
    "trefoil-tube-in-box": _trefoil,
    "genus2-handlebody-in-box": _genus2,
}
# extra desk-scale fixtures
EXTRA_SHAPES = {
    "sphere-in-box": _sphere,
    "handlebody6-in-box": lambda: _handlebody(6),
}

# first Betti number of the insulator for each shape
EXPECTED_BETTI1 = {
    "solid-torus-in-box": 1,
    "hopf-link-in-box": 2,
    "trefoil-tube-in-box": 1,
    "genus2-handlebody-in-box": 2,
    "sphere-in-box": 0,
    "handlebody6-in-box": 6,
}

_KUHN = np.array([[[0, 0, 0]] + [list(np.sum(np.eye(3, dtype=int)[list(perm[:k])], axis=0))
                                  for k in range(1, 4)]
                  for perm in permutations(range(3))], dtype=np.int64)  # (6, 4, 3)


def voxel_mesh(tags, refinement=1):
    """Conforming tetrahedral mesh of a tagged voxel block.

    Each coarse voxel becomes ``s**3`` voxels with ``s = 2**(refinement-1)``
    and every voxel is split into six tetrahedra sharing its main diagonal.
    Coordinates are in coarse-voxel units (exact dyadic rationals).
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    s = 2 ** (refinement - 1)
    tags = np.asarray(tags, dtype=np.int64)
    fine = tags.repeat(s, axis=0).repeat(s, axis=1).repeat(s, axis=2)
    nx, ny, nz = fine.shape
    gx, gy, gz = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), np.arange(nz + 1), indexing="ij")
    # vertex id = i + (nx+1)*(j + (ny+1)*k), so coordinates listed k-major
    coords = np.stack([gx.transpose(2, 1, 0).ravel(), gy.transpose(2, 1, 0).ravel(),
                       gz.transpose(2, 1, 0).ravel()], axis=1)
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    corners = np.stack([i.ravel(), j.ravel(), k.ravel()], axis=1)  # voxel order: k, j, i
    vtag = fine[corners[:, 0], corners[:, 1], corners[:, 2]]
    pts = corners[:, None, None, :] + _KUHN[None]  # (nvox, 6, 4, 3)
    vid = pts[..., 0] + (nx + 1) * (pts[..., 1] + (ny + 1) * pts[..., 2])
    tets = vid.reshape(-1, 4)
    regions = np.repeat(vtag, 6)
    return MeshFile(coords.astype(np.int64), s, tets, regions, GMSH)


def generate_canonical(shape, refinement=1):
    """Desk-scale benchmark mesh: conductor tagged 1 inside a box tagged 2.

    Shapes: ``solid-torus-in-box``, ``hopf-link-in-box``,
    ``trefoil-tube-in-box``, ``genus2-handlebody-in-box`` (plus the extra
    fixtures ``sphere-in-box`` and ``handlebody6-in-box``).  The tetrahedron
    count grows by a factor 8 per refinement step.
    """
    builder = SHAPES.get(shape) or EXTRA_SHAPES.get(shape)
    if builder is None:
        raise ValueError(f"unknown shape {shape!r}; choose from {sorted(SHAPES) + sorted(EXTRA_SHAPES)}")
    return voxel_mesh(builder(), refinement)
