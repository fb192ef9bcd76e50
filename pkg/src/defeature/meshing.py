"""Conforming multipatch meshes for the exact/defeatured/extension domains.

A family layout is a list of mapped tensor-product patches covering the
"universe" Omega0 union F_p union (F~ \\ F_p).  Each patch carries a region
label, so the three meshes are element subsets of one master grid:

    defeatured mesh : base + feature_n          (= Omega_0)
    exact mesh      : base + feature_p          (= Omega)
    extension mesh  : feature_p + ext shells    (= F~_p)

Sharing the master grid makes the exact/defeatured correspondence on
Omega* an identity on vertex coordinates, so solution differences can be
integrated without inter-mesh interpolation.

Uniform refinement subdivides every element through its own multilinear
map, so children exactly tile their parent and cross-level element
correspondences are exact.  Curved boundaries therefore keep the
piecewise-linear geometry fixed by the production resolution; refinement
factors must be powers of two so shared-edge nodes are reproduced
bit-for-bit on both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .errors import (InvalidGeometryError, MeshResolutionError,
                     UnknownTagError)
from .geometry import (Arc, Polyline, Segment, Tag, BASE, EXT_A, EXT_B,
                       FEATURE_N, FEATURE_P, DIRICHLET, NEUMANN_REST,
                       GAMMA_N, GAMMA_0N, GAMMA_P, GAMMA_0P, GAMMA_TILDE)

_SIDES_2D = ("u0", "u1", "v0", "v1")
_SIDES_3D = _SIDES_2D + ("w0", "w1")

# local faces of the reference quad (nodes ordered n00, n10, n11, n01)
_QUAD_FACES = {"v0": (0, 1), "u1": (1, 2), "v1": (3, 2), "u0": (0, 3)}
# local faces of the reference hex (n000 n100 n110 n010 n001 n101 n111 n011)
_HEX_FACES = {"w0": (0, 1, 2, 3), "w1": (4, 5, 6, 7), "v0": (0, 1, 5, 4),
              "u1": (1, 2, 6, 5), "v1": (3, 2, 6, 7), "u0": (0, 3, 7, 4)}


@dataclass
class SideSpec:
    """Boundary metadata of one patch side."""

    tags: dict = field(default_factory=dict)   # role -> Tag
    curve: object = None                       # parametric curve, optional
    crange: tuple = (0.0, 1.0)                 # curve params at side s=0, s=1


@dataclass
class Patch:
    mapping: object                 # callable (m, rdim) -> (m, dim)
    breaks: tuple                   # per-direction break arrays in [0, 1]
    label: str
    sides: dict = field(default_factory=dict)  # side key -> SideSpec

    @property
    def rdim(self):
        return len(self.breaks)


def bilinear_map(p00, p10, p11, p01):
    c = np.asarray([p00, p10, p11, p01], dtype=float)

    def f(uv):
        u, v = uv[:, 0:1], uv[:, 1:2]
        return ((1 - u) * (1 - v) * c[0] + u * (1 - v) * c[1]
                + u * v * c[2] + (1 - u) * v * c[3])

    return f


def rect_map(x0, x1, y0, y1):
    return bilinear_map((x0, y0), (x1, y0), (x1, y1), (x0, y1))


def ruled_map(c_in, c_out):
    """Lofted patch between two curves sharing the s parameter."""

    def f(uv):
        s, t = uv[:, 0], uv[:, 1:2]
        return (1 - t) * c_in.points(s) + t * c_out.points(s)

    return f


def box_map(x0, x1, y0, y1, z0, z1):
    lo = np.asarray([x0, y0, z0], dtype=float)
    ext = np.asarray([x1 - x0, y1 - y0, z1 - z0], dtype=float)

    def f(uvw):
        return lo + uvw * ext

    return f


# --------------------------- break helpers --------------------------------

def uniform_breaks(n):
    return np.linspace(0.0, 1.0, max(1, int(n)) + 1)


def graded_breaks(length, h_first, growth, max_cells=60):
    """Breakpoints on [0,1] for an interval of physical `length` whose cell
    widths start at `h_first` on the 0 side and grow by `growth`."""
    if length <= 0:
        raise ValueError("length must be positive")
    h_first = min(h_first, length)
    widths = [h_first]
    while sum(widths) < length and len(widths) < max_cells:
        widths.append(widths[-1] * growth)
    w = np.asarray(widths)
    w *= length / w.sum()
    return np.concatenate([[0.0], np.cumsum(w)]) / length


def graded_breaks_rev(length, h_first, growth, max_cells=60):
    """Like graded_breaks but the fine end sits at parameter 1."""
    b = graded_breaks(length, h_first, growth, max_cells)
    return 1.0 - b[::-1]


def geometric_layers(length, h_first, ratio, max_cells=60):
    """Number of layers used by graded_breaks (the grading oracle helper)."""
    return len(graded_breaks(length, h_first, ratio, max_cells)) - 1


def refine_breaks(breaks, factor):
    ts = np.linspace(0.0, 1.0, factor + 1)[1:]
    parts = [breaks[:1]]
    for i in range(len(breaks) - 1):
        parts.append(breaks[i] + ts * (breaks[i + 1] - breaks[i]))
    return np.concatenate(parts)


# --------------------------- mesh containers ------------------------------

@dataclass
class BoundaryFace:
    elem: int
    side: str
    cell: tuple
    vertices: tuple       # local compact vertex ids, in face-node order
    s_range: tuple        # side parameter interval of the face
    t_range: tuple | None # second side parameter interval (3D faces)
    curve: object = None
    c_range: tuple | None = None


class Mesh:
    """One extracted mesh: compact vertices plus (patch, cell) genealogy."""

    def __init__(self, dim, coords, conn, elem_patch, elem_cell, level,
                 patches, role, master, labels):
        self.dim = dim
        self.coords = coords
        self.conn = conn
        self.elem_patch = elem_patch
        self.elem_cell = elem_cell
        self.level = level
        self.patches = patches
        self.role = role
        self.master = master              # compact -> universe vertex id
        self.labels = labels              # per-element label strings
        self.face_tags = {}               # Tag -> list[BoundaryFace]
        self._cell_index = None
        self._master_inv = None

    @property
    def n_vertices(self):
        return len(self.coords)

    @property
    def n_elements(self):
        return len(self.conn)

    def tags(self):
        return tuple(self.face_tags.keys())

    def faces_of(self, tag):
        if tag not in self.face_tags:
            raise UnknownTagError(f"tag {tag} not on mesh role={self.role}")
        return self.face_tags[tag]

    def cell_lookup(self):
        """dict (patch, cell tuple) -> element index."""
        if self._cell_index is None:
            self._cell_index = {
                (int(p),) + tuple(int(c) for c in cell): i
                for i, (p, cell) in enumerate(zip(self.elem_patch,
                                                  self.elem_cell))}
        return self._cell_index

    def master_inverse(self, n_universe):
        if self._master_inv is None:
            inv = np.full(n_universe, -1, dtype=np.int64)
            inv[self.master] = np.arange(self.n_vertices)
            self._master_inv = inv
        return self._master_inv

    def element_corners(self, elems=None):
        idx = slice(None) if elems is None else elems
        return self.coords[self.conn[idx]]

    def write(self, path):
        """Plain-text dump: one record per line (see README for the format)."""
        with open(path, "w") as fh:
            fh.write(f"dim {self.dim}\n")
            for i, x in enumerate(self.coords):
                fh.write("node %d %s\n" % (i, " ".join("%.17g" % v for v in x)))
            for i, (c, lab) in enumerate(zip(self.conn, self.labels)):
                fh.write("elem %d %s %s\n" % (i, " ".join(str(v) for v in c), lab))
            for tag, faces in self.face_tags.items():
                for f in faces:
                    fh.write(f"face {f.elem} {f.side} {tag}\n")


class Universe:
    """Master grid: deduplicated vertices plus per-patch index grids."""

    def __init__(self, patches, coords, grids, level=1):
        self.patches = patches
        self.coords = coords
        self.grids = grids          # per patch: integer array of vertex ids
        self.level = level

    @property
    def dim(self):
        return self.coords.shape[1]


def _dedup_coords(points, scale):
    """Merge nearly identical points; returns (unique coords, index map)."""
    tree = cKDTree(points)
    pairs = tree.query_pairs(r=1e-10 * scale, output_type="ndarray")
    parent = np.arange(len(points))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(len(points))])
    uniq, index = np.unique(roots, return_inverse=True)
    return points[uniq] + 0.0, index


def flip_u(patch):
    """Reverse the u direction of a patch (sides and curve ranges follow)."""
    inner = patch.mapping

    def mapping(uv):
        uv2 = np.array(uv, dtype=float, copy=True)
        uv2[:, 0] = 1.0 - uv2[:, 0]
        return inner(uv2)

    breaks = ((1.0 - patch.breaks[0][::-1]),) + tuple(patch.breaks[1:])
    sides = {}
    for key, spec in patch.sides.items():
        nk = {"u0": "u1", "u1": "u0"}.get(key, key)
        if nk[0] != "u" and spec.curve is not None:
            spec = SideSpec(spec.tags, spec.curve,
                            (spec.crange[1], spec.crange[0]))
        sides[nk] = spec
    return Patch(mapping, breaks, patch.label, sides)


def auto_orient(patches):
    """Flip patches whose Jacobian at the center is negative."""
    out = []
    for p in patches:
        mid = np.full((1, p.rdim), 0.5)
        h = 1e-5
        cols = []
        for a in range(p.rdim):
            d = mid.copy()
            d[0, a] += h
            cols.append((p.mapping(d)[0] - p.mapping(mid)[0]) / h)
        det = float(np.linalg.det(np.stack(cols, axis=1)))
        out.append(flip_u(p) if det < 0 else p)
    return out


def build_universe(patches):
    """Evaluate every patch on its break grid and merge shared vertices."""
    dim = None
    all_pts = []
    shapes = []
    for p in patches:
        grids = np.meshgrid(*p.breaks, indexing="ij")
        params = np.stack([g.ravel() for g in grids], axis=1)
        pts = np.asarray(p.mapping(params), dtype=float)
        dim = pts.shape[1]
        all_pts.append(pts)
        shapes.append(tuple(len(b) for b in p.breaks))
    pts = np.concatenate(all_pts, axis=0)
    scale = max(1.0, float(np.abs(pts).max()))
    coords, index = _dedup_coords(pts, scale)
    grids = []
    off = 0
    for shp, block in zip(shapes, all_pts):
        n = len(block)
        grids.append(index[off:off + n].reshape(shp))
        off += n
    return Universe(list(patches), coords, grids, level=1)


def refine_universe(uni, factor):
    """Split every cell into factor^dim children through its multilinear map."""
    if factor == 1:
        return uni
    if factor & (factor - 1):
        raise ValueError("refinement factor must be a power of two")
    dim = uni.dim
    ts = np.linspace(0.0, 1.0, factor + 1)
    key2id = {}
    coords_list = []

    def intern(pts):
        pts = pts + 0.0
        ids = np.empty(len(pts), dtype=np.int64)
        for i, row in enumerate(pts):
            k = row.tobytes()
            j = key2id.get(k)
            if j is None:
                j = len(coords_list)
                key2id[k] = j
                coords_list.append(row)
            ids[i] = j
        return ids

    new_grids = []
    for p, grid in zip(uni.patches, uni.grids):
        shp = tuple((s - 1) * factor + 1 for s in grid.shape)
        if dim == 2:
            c = uni.coords[grid]            # (nu, nv, 2)
            nu, nv = grid.shape
            wu = np.stack([1 - ts, ts])     # (2, f+1)
            corner = np.stack([np.stack([c[:-1, :-1], c[:-1, 1:]], 2),
                               np.stack([c[1:, :-1], c[1:, 1:]], 2)], 2)
            pts = np.einsum("af,bg,ijabd->ifjgd", wu, wu, corner)
            # child (a, b) of cell (i, j) sits at grid slot (i*f+a, j*f+b);
            # overlapping cell faces produce identical bytes by construction
            full = np.empty(shp + (dim,))
            f = factor
            for i in range(nu - 1):
                for j in range(nv - 1):
                    full[i * f:i * f + f + 1, j * f:j * f + f + 1] = \
                        pts[i, :, j, :, :]
        else:
            c = uni.coords[grid]            # (nu, nv, nw, 3)
            nu, nv, nw = grid.shape
            wu = np.stack([1 - ts, ts])
            corner = np.stack(
                [np.stack([np.stack([c[:-1, :-1, :-1], c[:-1, :-1, 1:]], 3),
                           np.stack([c[:-1, 1:, :-1], c[:-1, 1:, 1:]], 3)], 3),
                 np.stack([np.stack([c[1:, :-1, :-1], c[1:, :-1, 1:]], 3),
                           np.stack([c[1:, 1:, :-1], c[1:, 1:, 1:]], 3)], 3)],
                3)                           # (nu-1, nv-1, nw-1, 2,2,2, 3)
            pts = np.einsum("af,bg,ch,ijkabcd->ifjgkhd", wu, wu, wu, corner)
            full = np.empty(shp + (dim,))
            f = factor
            for i in range(nu - 1):
                for j in range(nv - 1):
                    for k in range(nw - 1):
                        full[i * f:i * f + f + 1, j * f:j * f + f + 1,
                             k * f:k * f + f + 1] = pts[i, :, j, :, k, :, :]
        ids = intern(full.reshape(-1, dim)).reshape(shp)
        new_grids.append(ids)
    coords = np.asarray(coords_list)
    return Universe(uni.patches, coords, new_grids, level=uni.level * factor)


def role_labels(role, choice="identity"):
    """Region labels belonging to a mesh role."""
    def match(kinds):
        return lambda lab: any(lab == k or lab.startswith(k + "@")
                               for k in kinds)
    if role == "defeatured":
        return match((BASE, FEATURE_N))
    if role == "exact":
        return match((BASE, FEATURE_P))
    if role == "extension":
        kinds = [FEATURE_P]
        if choice in ("custom-arc", "bounding-box"):
            kinds.append(EXT_A)
        if choice == "bounding-box":
            kinds.append(EXT_B)
        return match(tuple(kinds))
    if role == "universe":
        return lambda lab: True
    raise ValueError(f"unknown role {role!r}")


def extract_mesh(uni, role, choice="identity"):
    """Element subset of the universe belonging to `role`, with face tags."""
    dim = uni.dim
    sel = role_labels(role, choice)
    conn = []
    elem_patch = []
    elem_cell = []
    labels = []
    for ip, (p, grid) in enumerate(zip(uni.patches, uni.grids)):
        if not sel(p.label):
            continue
        shp = grid.shape
        if dim == 2:
            nu, nv = shp[0] - 1, shp[1] - 1
            for i in range(nu):
                for j in range(nv):
                    conn.append((grid[i, j], grid[i + 1, j],
                                 grid[i + 1, j + 1], grid[i, j + 1]))
                    elem_patch.append(ip)
                    elem_cell.append((i, j))
                    labels.append(p.label)
        else:
            g = grid
            nu, nv, nw = shp[0] - 1, shp[1] - 1, shp[2] - 1
            for i in range(nu):
                for j in range(nv):
                    for k in range(nw):
                        conn.append(
                            (g[i, j, k], g[i + 1, j, k], g[i + 1, j + 1, k],
                             g[i, j + 1, k], g[i, j, k + 1], g[i + 1, j, k + 1],
                             g[i + 1, j + 1, k + 1], g[i, j + 1, k + 1]))
                        elem_patch.append(ip)
                        elem_cell.append((i, j, k))
                        labels.append(p.label)
    conn = np.asarray(conn, dtype=np.int64)
    master_ids = np.unique(conn)
    remap = {int(m): i for i, m in enumerate(master_ids)}
    compact = np.vectorize(remap.__getitem__, otypes=[np.int64])(conn)
    mesh = Mesh(dim, uni.coords[master_ids], compact,
                np.asarray(elem_patch), np.asarray(elem_cell, dtype=np.int64),
                uni.level, uni.patches, role, master_ids, labels)
    _tag_boundary(mesh, role)
    return mesh


def _tag_boundary(mesh, role):
    faces = {}
    face_defs = _QUAD_FACES if mesh.dim == 2 else _HEX_FACES
    for e in range(mesh.n_elements):
        cn = mesh.conn[e]
        for side, nodes in face_defs.items():
            vids = tuple(int(cn[n]) for n in nodes)
            if len(set(vids)) < mesh.dim:      # collapsed (cusp) face
                continue
            key = tuple(sorted(set(vids)))
            faces.setdefault(key, []).append((e, side, vids))
    for key, owners in faces.items():
        if len(owners) != 1:
            continue
        e, side, vids = owners[0]
        patch = mesh.patches[mesh.elem_patch[e]]
        cell = mesh.elem_cell[e]
        shape = tuple((len(b) - 1) * mesh.level for b in patch.breaks)
        if not _cell_on_side(cell, shape, side):
            raise InvalidGeometryError(
                f"boundary face inside patch (role={role}, "
                f"label={patch.label}, side={side}); region labels are "
                f"inconsistent")
        spec = patch.sides.get(side)
        role_key = "ext" if role == "extension" else role
        tag = spec.tags.get(role_key) if spec else None
        if tag is None:
            raise InvalidGeometryError(
                f"untagged boundary face: role={role} label={patch.label} "
                f"side={side} cell={tuple(int(c) for c in cell)}")
        s_range, t_range = _face_param_ranges(patch, cell, side, mesh.level)
        crange = None
        if spec.curve is not None:
            c0, c1 = spec.crange
            crange = (c0 + s_range[0] * (c1 - c0),
                      c0 + s_range[1] * (c1 - c0))
        bf = BoundaryFace(e, side, tuple(int(c) for c in cell), vids,
                          s_range, t_range, spec.curve, crange)
        mesh.face_tags.setdefault(tag, []).append(bf)


def _cell_on_side(cell, shape, side):
    ax = {"u": 0, "v": 1, "w": 2}[side[0]]
    return cell[ax] == 0 if side[1] == "0" else cell[ax] == shape[ax] - 1


def _face_param_ranges(patch, cell, side, level):
    """Side-running parameter interval(s) covered by one face."""
    ax = {"u": 0, "v": 1, "w": 2}[side[0]]
    run_axes = [a for a in range(patch.rdim) if a != ax]

    def rng(a):
        b = patch.breaks[a]
        i = int(cell[a])
        big, sub = divmod(i, level)
        lo = b[big] + (b[big + 1] - b[big]) * sub / level
        hi = b[big] + (b[big + 1] - b[big]) * (sub + 1) / level
        return (float(lo), float(hi))

    s_range = rng(run_axes[0])
    t_range = rng(run_axes[1]) if len(run_axes) > 1 else None
    return s_range, t_range


# --------------------------- quadrature -----------------------------------

def gauss_01(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _ref_coords_on_face(side, s, t=None):
    """Element reference coordinates of face points."""
    n = len(s)
    if t is None:
        out = np.empty((n, 2))
        if side == "v0":
            out[:, 0], out[:, 1] = s, 0.0
        elif side == "v1":
            out[:, 0], out[:, 1] = s, 1.0
        elif side == "u0":
            out[:, 0], out[:, 1] = 0.0, s
        else:
            out[:, 0], out[:, 1] = 1.0, s
        return out
    out = np.empty((n, 3))
    ax = {"u": 0, "v": 1, "w": 2}[side[0]]
    val = 0.0 if side[1] == "0" else 1.0
    run = [a for a in range(3) if a != ax]
    out[:, ax] = val
    out[:, run[0]] = s
    out[:, run[1]] = t
    return out


class BoundaryQuadrature:
    """Quadrature points/weights/normals of one tagged boundary piece."""

    def __init__(self, tag, mesh, points, weights, normals, elems, ref_coords,
                 face_index, faces, face_lengths):
        self.tag = tag
        self.mesh = mesh
        self.points = points
        self.weights = weights
        self.normals = normals
        self.elems = elems
        self.ref_coords = ref_coords
        self.face_index = face_index
        self.faces = faces
        self.face_lengths = face_lengths

    @property
    def measure(self):
        return float(self.weights.sum())


def boundary_quadrature(mesh, tag, order=4):
    """Gauss rule on every face of `tag`; weights sum to the piece measure.

    On sides declared with a parametric curve the rule integrates along the
    exact curve (points, normals and weights are taken from the curve), so
    the weight sum matches the analytic measure of curved pieces.
    """
    if not 2 <= order <= 6:
        raise ValueError("boundary quadrature order must be in 2..6")
    faces = mesh.faces_of(tag)
    gx, gw = gauss_01(order)
    pts, wts, nrm, elems, refs, fidx, flen = [], [], [], [], [], [], []
    for fi, f in enumerate(faces):
        corners = mesh.coords[mesh.conn[f.elem]]
        center = corners.mean(axis=0)
        if mesh.dim == 2:
            s = f.s_range[0] + gx * (f.s_range[1] - f.s_range[0])
            ref = _ref_coords_on_face(f.side, gx)
            if f.curve is not None:
                c = f.c_range[0] + gx * (f.c_range[1] - f.c_range[0])
                p = f.curve.points(c)
                tan = f.curve.tangent(c) * (f.c_range[1] - f.c_range[0])
                w = gw * np.linalg.norm(tan, axis=1)
                n = np.stack([tan[:, 1], -tan[:, 0]], axis=1)
            else:
                a = mesh.coords[f.vertices[0]]
                b = mesh.coords[f.vertices[1]]
                p = a + gx[:, None] * (b - a)
                d = b - a
                w = gw * np.linalg.norm(d)
                n = np.tile([d[1], -d[0]], (order, 1))
            n = n / np.linalg.norm(n, axis=1, keepdims=True)
            mid = p.mean(axis=0)
            if np.dot(n.mean(axis=0), mid - center) < 0:
                n = -n
            nq = order
        else:
            s2, t2 = np.meshgrid(gx, gx, indexing="ij")
            s2, t2 = s2.ravel(), t2.ravel()
            ref = _ref_coords_on_face(f.side, s2, t2)
            w2 = np.outer(gw, gw).ravel()
            p, ju, jv = _face_geometry(mesh, f, s2, t2)
            cr = np.cross(ju, jv)
            area = np.linalg.norm(cr, axis=1)
            n = cr / area[:, None]
            w = w2 * area
            mid = p.mean(axis=0)
            if np.dot(n.mean(axis=0), mid - center) < 0:
                n = -n
            nq = order * order
        pts.append(p)
        wts.append(w)
        nrm.append(n)
        elems.append(np.full(nq, f.elem))
        refs.append(ref)
        fidx.append(np.full(nq, fi))
        flen.append(w.sum())
    return BoundaryQuadrature(
        tag, mesh, np.concatenate(pts), np.concatenate(wts),
        np.concatenate(nrm), np.concatenate(elems), np.concatenate(refs),
        np.concatenate(fidx), faces, np.asarray(flen))


def _face_geometry(mesh, f, s, t):
    """Points and tangents of a 3D element face at face params (s, t)."""
    ref = _ref_coords_on_face(f.side, s, t)
    corners = mesh.coords[mesh.conn[f.elem]]
    from .fem import trilinear_eval_geom
    return trilinear_eval_geom(corners, ref, f.side)


# --------------------------- validation -----------------------------------

def check_positive_jacobians(mesh, order=2):
    from .fem import element_jacobians
    det = element_jacobians(mesh, order)
    if det.min() <= 0:
        bad = int(np.argwhere(det.min(axis=1) <= 0)[0][0]) if det.ndim > 1 else -1
        raise InvalidGeometryError(
            f"non-positive jacobian in mesh role={mesh.role} (element {bad})")


def _max_diameter(mesh, elems):
    if not elems:
        return 0.0
    corners = mesh.element_corners(sorted(elems))
    diff = corners[:, :, None, :] - corners[:, None, :, :]
    return float(np.sqrt((diff ** 2).sum(-1)).max())


def feature_adjacent_diameters(exact_mesh, extension_mesh=None):
    """Largest element diameter touching each feature's boundary."""
    out = {}
    for tag, faces in exact_mesh.face_tags.items():
        if tag.kind in (GAMMA_N, GAMMA_P):
            d = _max_diameter(exact_mesh, {f.elem for f in faces})
            out[tag.feature] = max(out.get(tag.feature, 0.0), d)
    if extension_mesh is not None:
        for tag, faces in extension_mesh.face_tags.items():
            if tag.kind == GAMMA_0P:
                d = _max_diameter(extension_mesh, {f.elem for f in faces})
                out[tag.feature] = max(out.get(tag.feature, 0.0), d)
    return out


# --------------------------- pair generation ------------------------------

class MeshPair:
    """The exact/defeatured/extension meshes extracted from one universe."""

    def __init__(self, domain, universe, exact, defeatured, extension):
        self.domain = domain
        self.universe = universe
        self.exact = exact
        self.defeatured = defeatured
        self.extension = extension

    def __iter__(self):
        return iter((self.exact, self.defeatured, self.extension))

    @property
    def meshes(self):
        out = [self.exact, self.defeatured]
        if self.extension is not None:
            out.append(self.extension)
        return out


def _extract_all(domain, uni):
    choice = domain.extension_choice
    exact = extract_mesh(uni, "exact", choice)
    defeatured = extract_mesh(uni, "defeatured", choice)
    extension = None
    if domain.feature_sign in ("positive", "complex"):
        extension = extract_mesh(uni, "extension", choice)
    pair = MeshPair(domain, uni, exact, defeatured, extension)
    for m in pair.meshes:
        check_positive_jacobians(m)
    return pair


def generate_pair(domain, resolution, grading=None, growth=1.35):
    """Build the conforming exact/defeatured(/extension) meshes.

    Raises MeshResolutionError when the feature-adjacent element diameter
    exceeds a quarter of the feature scale, reporting the resolution that
    would satisfy the bound.
    """
    from .layouts import build_layout
    patches = build_layout(domain, resolution, growth=growth,
                           grading=grading)
    uni = build_universe(patches)
    pair = _extract_all(domain, uni)
    scales = domain.feature_scales()
    diams = feature_adjacent_diameters(pair.exact, pair.extension)
    for feat, diam in diams.items():
        scale = scales.get(feat, max(scales.values()))
        if diam > scale / 4.0 + 1e-12 * scale:
            need = math.ceil(resolution * diam / (scale / 4.0))
            raise MeshResolutionError(
                f"feature-adjacent element diameter {diam:.3g} exceeds "
                f"{scale / 4.0:.3g}; use resolution >= {need}",
                required_resolution=need)
    return pair


def refine_pair(pair, factor):
    """Uniformly refined copy of a mesh pair (factor a power of two)."""
    if factor == 1:
        return pair
    uni = refine_universe(pair.universe, factor)
    return _extract_all(pair.domain, uni)
