"""Low-order Galerkin solver on mapped quad/hex meshes.

Bilinear (2D) / trilinear (3D) isoparametric elements, tensor Gauss
quadrature, elimination of Dirichlet dofs, and the post-processing needed
by the defeaturing estimator: one-sided normal-flux traces and exact
H1-seminorm differences between fields on nested meshes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (GaugeRequiredError, MeshIncompatibilityError,
                     SolverFailure)
from .meshing import boundary_quadrature, gauss_01

_CHUNK = 20000


def _nodes(dim):
    if dim == 2:
        return np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
    return np.array([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
                     (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)], dtype=float)


def shape_functions(ref):
    """Multilinear shape functions at reference points (m, dim) -> (m, nn)."""
    ref = np.atleast_2d(ref)
    dim = ref.shape[1]
    nodes = _nodes(dim)
    vals = np.ones((len(ref), len(nodes)))
    for a in range(dim):
        xa = ref[:, a][:, None]
        na = nodes[:, a][None, :]
        vals *= np.where(na > 0.5, xa, 1.0 - xa)
    return vals


def shape_gradients(ref):
    """Reference-space gradients at points (m, dim) -> (m, nn, dim)."""
    ref = np.atleast_2d(ref)
    dim = ref.shape[1]
    nodes = _nodes(dim)
    m, nn = len(ref), len(nodes)
    grads = np.empty((m, nn, dim))
    for b in range(dim):
        g = np.ones((m, nn))
        for a in range(dim):
            xa = ref[:, a][:, None]
            na = nodes[:, a][None, :]
            if a == b:
                g *= np.where(na > 0.5, 1.0, -1.0)
            else:
                g *= np.where(na > 0.5, xa, 1.0 - xa)
        grads[:, :, b] = g
    return grads


def _inv_det(J):
    """Inverse and determinant of (..., d, d) jacobians, d in {2, 3}."""
    d = J.shape[-1]
    if d == 2:
        a, b = J[..., 0, 0], J[..., 0, 1]
        c, e = J[..., 1, 0], J[..., 1, 1]
        det = a * e - b * c
        inv = np.empty_like(J)
        inv[..., 0, 0], inv[..., 0, 1] = e, -b
        inv[..., 1, 0], inv[..., 1, 1] = -c, a
        return inv / det[..., None, None], det
    det = np.linalg.det(J)
    return np.linalg.inv(J), det


def volume_rule(dim, order):
    x, w = gauss_01(order)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * dim), indexing="ij"), 0),
                  axis=0).ravel()
    return pts, wts


def element_jacobians(mesh, order=2):
    """det(J) at volume Gauss points, shape (ne, nq)."""
    pts, _ = volume_rule(mesh.dim, order)
    dN = shape_gradients(pts)
    out = np.empty((mesh.n_elements, len(pts)))
    for lo in range(0, mesh.n_elements, _CHUNK):
        corners = mesh.coords[mesh.conn[lo:lo + _CHUNK]]
        J = np.einsum("nia,qib->nqab", corners, dN)
        _, det = _inv_det(J)
        out[lo:lo + _CHUNK] = det
    return out


def trilinear_eval_geom(corners, ref, side):
    """Points and the two in-face tangent columns of a hex face."""
    N = shape_functions(ref)
    dN = shape_gradients(ref)
    p = np.einsum("qi,id->qd", N, corners)
    J = np.einsum("ia,qib->qab", corners, dN)
    ax = {"u": 0, "v": 1, "w": 2}[side[0]]
    run = [a for a in range(3) if a != ax]
    return p, J[:, :, run[0]], J[:, :, run[1]]


# --------------------------- fields and data ------------------------------

@dataclass
class ScalarField:
    """FE coefficient vector bound to a mesh (one value per vertex)."""

    mesh: object
    coeffs: np.ndarray
    dirichlet_tags: tuple = ()

    def __post_init__(self):
        if len(self.coeffs) != self.mesh.n_vertices:
            raise ValueError("coefficient count must equal vertex count")


@dataclass
class ProblemData:
    """Data of one defeaturing experiment.

    All entries are callables of the coordinate array (n, dim) -> (n,).
    `neumann` holds data per tag kind; `g0` is used on gamma_0n/gamma_0p,
    `g_tilde` on the extension boundary.  `f` must be defined on the whole
    universe (its values inside F_n / F~_p are the chosen extension).
    """

    f: object
    h: object
    g: object
    g0: object = None
    g_tilde: object = None
    g_rest: object = None       # Neumann data away from the feature
                                # (defaults to g)

    def __post_init__(self):
        zero = lambda x: np.zeros(len(x))
        if self.g0 is None:
            self.g0 = zero
        if self.g_tilde is None:
            self.g_tilde = zero
        if self.g_rest is None:
            self.g_rest = self.g


def evaluate(field, elems, refs):
    """Field values at element-local points."""
    N = shape_functions(refs)
    corners_c = field.coeffs[field.mesh.conn[elems]]
    return np.einsum("qi,qi->q", N, corners_c)


def gradient(field, elems, refs):
    """Physical gradients of the field at element-local points."""
    mesh = field.mesh
    dN = shape_gradients(refs)
    corners = mesh.coords[mesh.conn[elems]]
    J = np.einsum("qia,qib->qab", corners, dN)
    invJ, _ = _inv_det(J)
    gphys = np.einsum("qib,qba->qia", dN, invJ)
    return np.einsum("qi,qia->qa", field.coeffs[mesh.conn[elems]], gphys)


# --------------------------- assembly -------------------------------------

def assemble_stiffness(mesh, order=3):
    pts, wts = volume_rule(mesh.dim, order)
    dN = shape_gradients(pts)
    nn = mesh.conn.shape[1]
    rows, cols, vals = [], [], []
    for lo in range(0, mesh.n_elements, _CHUNK):
        conn = mesh.conn[lo:lo + _CHUNK]
        corners = mesh.coords[conn]
        J = np.einsum("nia,qib->nqab", corners, dN)
        invJ, det = _inv_det(J)
        g = np.einsum("qib,nqba->nqia", dN, invJ)
        Ke = np.einsum("nqia,nqja,q,nq->nij", g, g, wts, det)
        rows.append(np.repeat(conn, nn, axis=1).ravel())
        cols.append(np.tile(conn, (1, nn)).ravel())
        vals.append(Ke.ravel())
    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(mesh.n_vertices, mesh.n_vertices))
    return A.tocsr()


def assemble_load(mesh, f, order=3):
    pts, wts = volume_rule(mesh.dim, order)
    N = shape_functions(pts)
    dN = shape_gradients(pts)
    b = np.zeros(mesh.n_vertices)
    for lo in range(0, mesh.n_elements, _CHUNK):
        conn = mesh.conn[lo:lo + _CHUNK]
        corners = mesh.coords[conn]
        J = np.einsum("nia,qib->nqab", corners, dN)
        _, det = _inv_det(J)
        x = np.einsum("qi,nid->nqd", N, corners)
        fx = f(x.reshape(-1, mesh.dim)).reshape(x.shape[:2])
        be = np.einsum("nq,q,nq,qi->ni", fx, wts, det, N)
        np.add.at(b, conn, be)
    return b


def add_neumann(mesh, b, tag, g, order=4):
    bq = boundary_quadrature(mesh, tag, order)
    gv = g(bq.points) * bq.weights
    N = shape_functions(bq.ref_coords)
    conn = mesh.conn[bq.elems]
    np.add.at(b, conn, gv[:, None] * N)
    return b


def integrate_region(mesh, f, labels=None, order=3):
    """Integral of f over the elements whose label is in `labels`."""
    if labels is None:
        keep = np.arange(mesh.n_elements)
    else:
        keep = np.array([i for i, lab in enumerate(mesh.labels)
                         if lab in labels], dtype=int)
    if len(keep) == 0:
        return 0.0
    pts, wts = volume_rule(mesh.dim, order)
    N = shape_functions(pts)
    dN = shape_gradients(pts)
    total = 0.0
    for lo in range(0, len(keep), _CHUNK):
        conn = mesh.conn[keep[lo:lo + _CHUNK]]
        corners = mesh.coords[conn]
        J = np.einsum("nia,qib->nqab", corners, dN)
        _, det = _inv_det(J)
        x = np.einsum("qi,nid->nqd", N, corners)
        fx = f(x.reshape(-1, mesh.dim)).reshape(x.shape[:2])
        total += float(np.einsum("nq,q,nq->", fx, wts, det))
    return total


def dirichlet_vertices(mesh, tags):
    """Vertex ids on faces of the given tags (corners included)."""
    ids = set()
    for tag in tags:
        for f in mesh.faces_of(tag):
            ids.update(f.vertices)
    return np.array(sorted(ids), dtype=np.int64)


# --------------------------- linear solver --------------------------------

def solve_spd(A, b, tol=1e-10, max_iter=None, method="pcg"):
    """Solve the SPD system; `method` is pcg (Jacobi), amg, direct or auto."""
    n = A.shape[0]
    if method == "auto":
        method = "direct" if n <= 60000 else ("amg" if _has_pyamg() else "pcg")
    if method == "direct":
        return spla.spsolve(A.tocsc(), b)
    if method == "amg":
        import pyamg
        ml = pyamg.smoothed_aggregation_solver(A.tocsr())
        M = ml.aspreconditioner(cycle="V")
    else:
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverFailure("non-positive diagonal; matrix not SPD")
        M = sp.diags(1.0 / d)
    if max_iter is None:
        max_iter = max(2000, 20 * int(np.sqrt(n)))
    try:
        x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=max_iter, M=M)
    except TypeError:  # scipy < 1.12
        x, info = spla.cg(A, b, tol=tol, atol=0.0, maxiter=max_iter, M=M)
    bnorm = np.linalg.norm(b)
    res = np.linalg.norm(b - A @ x) / (bnorm if bnorm > 0 else 1.0)
    if info != 0 or res > 10 * tol:
        raise SolverFailure(f"cg stopped at relative residual {res:.3e}",
                            residual=res)
    return x


def _has_pyamg():
    try:
        import pyamg  # noqa: F401
        return True
    except ImportError:
        return False


# --------------------------- boundary-value solve --------------------------

def solve_poisson(mesh, f, dirichlet, neumann, *, dirichlet_values=None,
                  pure_neumann=False, tol=1e-10, method="auto",
                  volume_order=3, boundary_order=4):
    """Weak Poisson solve: -lap(u) = f, u = h on Dirichlet tags, du/dn = g
    on Neumann tags.

    dirichlet : dict tag -> callable (may be empty)
    neumann   : dict tag -> callable
    dirichlet_values : optional (vertex_ids, values) pair of extra strong
        constraints (used to impose a numeric trace, e.g. the extension
        problem's interface data).
    """
    A = assemble_stiffness(mesh, volume_order)
    b = assemble_load(mesh, f, volume_order)
    for tag, g in neumann.items():
        if tag in mesh.face_tags and mesh.faces_of(tag):
            add_neumann(mesh, b, tag, g, boundary_order)

    fixed = {}
    for tag, h in dirichlet.items():
        if tag not in mesh.face_tags:
            continue
        ids = dirichlet_vertices(mesh, [tag])
        vals = h(mesh.coords[ids])
        for i, v in zip(ids, vals):
            fixed[int(i)] = float(v)
    if dirichlet_values is not None:
        ids, vals = dirichlet_values
        for i, v in zip(ids, vals):
            fixed[int(i)] = float(v)

    u = np.zeros(mesh.n_vertices)
    if fixed:
        fidx = np.fromiter(fixed.keys(), dtype=np.int64)
        fval = np.fromiter(fixed.values(), dtype=float)
        u[fidx] = fval
        free = np.setdiff1d(np.arange(mesh.n_vertices), fidx)
        Aff = A[free][:, free].tocsr()
        rhs = b[free] - A[free][:, fidx] @ fval
        u[free] = solve_spd(Aff, rhs, tol=tol, method=method)
    else:
        if not pure_neumann:
            raise GaugeRequiredError(
                "no Dirichlet data; pass pure_neumann=True for the "
                "mean-zero gauge")
        # mean-zero gauge through a bordered (symmetric indefinite) system
        m = assemble_load(mesh, lambda x: np.ones(len(x)), volume_order)
        K = sp.bmat([[A, m[:, None]], [m[None, :], None]], format="csc")
        sol = spla.spsolve(K, np.concatenate([b, [0.0]]))
        u = sol[:-1]
    tags = tuple(dirichlet.keys())
    return ScalarField(mesh, u, tags)


def flux_trace(field, bq):
    """One-sided normal derivative of the field at boundary quadrature
    points: grad(u) restricted to the adjacent element, dotted with the
    supplied outward normal."""
    if bq.mesh is not field.mesh:
        raise MeshIncompatibilityError(
            "boundary quadrature belongs to a different mesh")
    g = gradient(field, bq.elems, bq.ref_coords)
    return np.einsum("qa,qa->q", g, bq.normals)


# --------------------------- H1 seminorm differences ----------------------

def h1_seminorm(field, labels=None, order=3):
    return h1_seminorm_diff(field, None, labels=labels, order=order)


def h1_seminorm_diff(field_a, field_b, labels=None, order=3):
    """sqrt of the element-wise integral of |grad a - grad b|^2.

    The fields may live on different meshes of the same patch family as
    long as field_a's mesh is a (power-of-two) refinement of field_b's on
    the selected region; corresponding elements are integrated without any
    interpolation between meshes.
    """
    ma = field_a.mesh
    if field_b is not None and field_b.mesh is not ma:
        mb = field_b.mesh
        if mb.patches is not ma.patches:
            raise MeshIncompatibilityError("meshes from different layouts")
        if ma.level % mb.level:
            if mb.level % ma.level == 0:
                return h1_seminorm_diff(field_b, field_a, labels, order)
            raise MeshIncompatibilityError("levels are not nested")
        return _h1_diff_cross(field_a, field_b, labels, order)

    if labels is None:
        keep = np.arange(ma.n_elements)
    else:
        keep = np.array([i for i, lab in enumerate(ma.labels)
                         if lab in labels], dtype=int)
    pts, wts = volume_rule(ma.dim, order)
    dN = shape_gradients(pts)
    total = 0.0
    diff = field_a.coeffs if field_b is None else \
        field_a.coeffs - field_b.coeffs
    for lo in range(0, len(keep), _CHUNK):
        conn = ma.conn[keep[lo:lo + _CHUNK]]
        corners = ma.coords[conn]
        J = np.einsum("nia,qib->nqab", corners, dN)
        invJ, det = _inv_det(J)
        g = np.einsum("qib,nqba->nqia", dN, invJ)
        gd = np.einsum("ni,nqia->nqa", diff[conn], g)
        total += float(np.einsum("nqa,nqa,q,nq->", gd, gd, wts, det))
    return float(np.sqrt(total))


def _h1_diff_cross(field_a, field_b, labels, order):
    ma, mb = field_a.mesh, field_b.mesh
    r = ma.level // mb.level
    lookup = mb.cell_lookup()
    if labels is None:
        keep = np.arange(ma.n_elements)
    else:
        keep = np.array([i for i, lab in enumerate(ma.labels)
                         if lab in labels], dtype=int)
    parents = np.empty(len(keep), dtype=np.int64)
    offsets = np.empty((len(keep), ma.dim), dtype=np.int64)
    for pos, i in enumerate(keep):
        cell = ma.elem_cell[i]
        par = tuple(int(c) // r for c in cell)
        key = (int(ma.elem_patch[i]),) + par
        if key not in lookup:
            raise MeshIncompatibilityError(
                f"no corresponding coarse element for {key}")
        parents[pos] = lookup[key]
        offsets[pos] = [int(c) % r for c in cell]
    pts, wts = volume_rule(ma.dim, order)
    dN = shape_gradients(pts)
    total = 0.0
    # group by child offset so the coarse-side reference points are shared
    for off in {tuple(o) for o in offsets.tolist()}:
        m = np.all(offsets == off, axis=1)
        fine = keep[m]
        coarse = parents[m]
        ref_b = (np.asarray(off, dtype=float) + pts) / r
        dNb = shape_gradients(ref_b)
        corners_a = ma.coords[ma.conn[fine]]
        Ja = np.einsum("nia,qib->nqab", corners_a, dN)
        invJa, detA = _inv_det(Ja)
        ga = np.einsum("qib,nqba->nqia", dN, invJa)
        grad_a = np.einsum("ni,nqia->nqa", field_a.coeffs[ma.conn[fine]], ga)
        corners_b = mb.coords[mb.conn[coarse]]
        Jb = np.einsum("nia,qib->nqab", corners_b, dNb)
        invJb, _ = _inv_det(Jb)
        gb = np.einsum("qib,nqba->nqia", dNb, invJb)
        grad_b = np.einsum("ni,nqia->nqa", field_b.coeffs[mb.conn[coarse]], gb)
        d = grad_a - grad_b
        total += float(np.einsum("nqa,nqa,q,nq->", d, d, wts, detA))
    return float(np.sqrt(total))


def transfer_vertex_values(src, dst_mesh, universe_size):
    """Copy vertex coefficients between meshes sharing a universe."""
    inv = src.mesh.master_inverse(universe_size)
    idx = inv[dst_mesh.master]
    if np.any(idx < 0):
        raise MeshIncompatibilityError("destination mesh has vertices "
                                       "outside the source mesh")
    return src.coeffs[idx]
