"""Geometry families for the defeaturing studies.

Every domain is described by a closed enumeration of parametric families
(holes in a disk, edge features on the unit square, box features on the unit
cube, rounds and fillets).  A family decomposes its feature into a negative
component F_n (material missing from the exact domain) and a positive
component F_p (material added to it), and tags every boundary piece the
estimator needs:

==============  ========================================================
tag kind        meaning
==============  ========================================================
dirichlet       Gamma_D, shared by exact and defeatured domains
neumann_rest    Gamma_N away from the feature, shared by both domains
gamma_n         boundary of F_n exposed on the exact domain
gamma_0n        boundary of F_n closed off on the defeatured domain
gamma_p         boundary of F_p exposed on the exact domain
gamma_0p        interface between F_p and the defeatured domain
gamma_tilde     outer boundary of the feature extension, minus gamma_p
==============  ========================================================

Measures are analytic (exact arc lengths and areas), so they can serve as
references for the quadrature built on meshes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidGeometryError

DIRICHLET = "dirichlet"
NEUMANN_REST = "neumann_rest"
GAMMA_N = "gamma_n"
GAMMA_0N = "gamma_0n"
GAMMA_P = "gamma_p"
GAMMA_0P = "gamma_0p"
GAMMA_TILDE = "gamma_tilde"

#: region labels used by the mesh module
BASE = "base"            # Omega* = Omega \ closure(F_p), shared by both meshes
FEATURE_N = "feature_n"  # F_n, present only in the defeatured mesh
FEATURE_P = "feature_p"  # F_p, present only in the exact/extension meshes
EXT_A = "ext_a"          # first extension shell (F~ \ F_p)
EXT_B = "ext_b"          # second extension shell (bounding box only)

EXTENSION_CHOICES = ("identity", "custom-arc", "bounding-box")


@dataclass(frozen=True)
class Tag:
    """Identity of a boundary piece; `feature` numbers multi-feature domains."""

    kind: str
    feature: int = 0

    def __str__(self):
        if self.feature == 0:
            return self.kind
        return f"{self.kind}@{self.feature}"


# ---------------------------------------------------------------------------
# parametric curves (2D) and flat rectangles (3D)
# ---------------------------------------------------------------------------

class Segment:
    """Straight segment, parametrized linearly on [0, 1]."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def points(self, t):
        t = np.asarray(t, dtype=float)[:, None]
        return (1.0 - t) * self.a + t * self.b

    def tangent(self, t):
        t = np.asarray(t, dtype=float)
        d = self.b - self.a
        return np.broadcast_to(d, (t.size, 2)).copy()

    @property
    def length(self):
        return float(np.linalg.norm(self.b - self.a))

    def sublength(self, t0, t1):
        return (t1 - t0) * self.length

    @property
    def is_flat(self):
        return True


class Arc:
    """Circular arc, angle interpolated linearly on [0, 1]."""

    def __init__(self, center, radius, phi0, phi1):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.phi0 = float(phi0)
        self.phi1 = float(phi1)

    def _phi(self, t):
        return self.phi0 + np.asarray(t, dtype=float) * (self.phi1 - self.phi0)

    def points(self, t):
        phi = self._phi(t)
        return self.center + self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def tangent(self, t):
        phi = self._phi(t)
        dphi = self.phi1 - self.phi0
        return self.radius * dphi * np.stack([-np.sin(phi), np.cos(phi)], axis=-1)

    @property
    def length(self):
        return self.radius * abs(self.phi1 - self.phi0)

    def sublength(self, t0, t1):
        return (t1 - t0) * self.length

    @property
    def is_flat(self):
        return False


class Polyline:
    """Chain of straight segments, parametrized uniformly per segment.

    The per-segment parametrization keeps corner parameters at multiples of
    1/k, so mesh breakpoints can be aligned with the corners exactly.
    """

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or len(self.vertices) < 2:
            raise ValueError("polyline needs at least two vertices")
        self.nseg = len(self.vertices) - 1
        self._lengths = np.linalg.norm(np.diff(self.vertices, axis=0), axis=1)

    def points(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        s = t * self.nseg
        i = np.minimum(s.astype(int), self.nseg - 1)
        loc = (s - i)[:, None]
        return (1.0 - loc) * self.vertices[i] + loc * self.vertices[i + 1]

    def tangent(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        s = t * self.nseg
        i = np.minimum(s.astype(int), self.nseg - 1)
        return (self.vertices[i + 1] - self.vertices[i]) * self.nseg

    @property
    def length(self):
        return float(self._lengths.sum())

    def sublength(self, t0, t1):
        grid = np.cumsum(np.concatenate([[0.0], self._lengths]))

        def arclen(t):
            s = t * self.nseg
            i = min(int(s), self.nseg - 1)
            return grid[i] + (s - i) * self._lengths[i]

        return arclen(t1) - arclen(t0)

    @property
    def is_flat(self):
        return self.nseg == 1


class FlatRect:
    """Axis-aligned flat rectangle in 3D; only its area is needed."""

    def __init__(self, corner, edge_u, edge_v):
        self.corner = np.asarray(corner, dtype=float)
        self.edge_u = np.asarray(edge_u, dtype=float)
        self.edge_v = np.asarray(edge_v, dtype=float)

    @property
    def length(self):
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))

    @property
    def is_flat(self):
        return True


def _diameter(component):
    """Manifold diameter of a single connected component."""
    if isinstance(component, FlatRect):
        return float(np.linalg.norm(component.edge_u + component.edge_v))
    # for a connected curve the geodesic diameter is the arc length
    return component.length


@dataclass
class BoundaryPiece:
    """One tagged boundary piece, possibly with several connected components."""

    tag: Tag
    components: tuple = ()
    measure_override: float | None = None

    @property
    def measure(self):
        if self.measure_override is not None:
            return self.measure_override
        return float(sum(c.length for c in self.components))

    @property
    def is_empty(self):
        return self.measure == 0.0

    def isotropy_ratios(self):
        """diam(c)^k / |c| per component (Definition-style heuristic)."""
        out = []
        for c in self.components:
            if isinstance(c, FlatRect):
                diam2 = float(np.linalg.norm(c.edge_u + c.edge_v)) ** 2
                out.append(diam2 / c.length)
            else:
                out.append(_diameter(c) / c.length)
        return out


@dataclass(frozen=True)
class SigmaSpec:
    """One sigma entering the estimator: mesh tag, role in Sigma, source mesh."""

    tag: Tag
    sigma_kind: str      # "gamma_n" | "gamma_r" | "gamma_0p"
    source: str          # "exact" | "extension"


@dataclass
class DomainDescription:
    """Fully tagged description of one exact/defeatured geometry pair."""

    dim: int
    family: str
    params: dict
    feature_sign: str                    # "negative" | "positive" | "complex"
    extension_choice: str = "identity"
    pieces: dict = field(default_factory=dict)
    features: tuple = (0,)
    sigma: tuple = ()                    # tuple[SigmaSpec]
    region_measures: dict = field(default_factory=dict)
    theory_covered: bool = True

    def piece(self, tag):
        return self.pieces[tag]

    def measure(self, tag):
        return self.pieces[tag].measure if tag in self.pieces else 0.0

    def isotropy_warnings(self, threshold=20.0):
        """Tags whose components violate the isotropy heuristic."""
        bad = []
        for tag, piece in self.pieces.items():
            if tag.kind in (GAMMA_N, GAMMA_0P, GAMMA_P) and not piece.is_empty:
                if any(r > threshold for r in piece.isotropy_ratios()):
                    bad.append(tag)
        return bad


def boundary_measures(domain):
    """Map every tag to its analytic measure (empty pieces report 0)."""
    return {tag: piece.measure for tag, piece in domain.pieces.items()}


# ---------------------------------------------------------------------------
# family builders
# ---------------------------------------------------------------------------

def star_vertices(center, r_inner, branches=10):
    """Vertices of the regular star, outer radius 2*r_inner, closed loop."""
    cx, cy = center
    pts = []
    for j in range(2 * branches):
        rad = 2.0 * r_inner if j % 2 == 0 else r_inner
        ang = math.pi * j / branches
        pts.append((cx + rad * math.cos(ang), cy + rad * math.sin(ang)))
    pts.append(pts[0])
    return np.asarray(pts)


def star_perimeter(r_inner, branches=10):
    edge = r_inner * math.sqrt(5.0 - 4.0 * math.cos(math.pi / branches))
    return 2 * branches * edge


def star_area(r_inner, branches=10):
    return 2 * branches * r_inner**2 * math.sin(math.pi / branches)


def _square_loop(center, half, close=True):
    cx, cy = center
    pts = [(cx + half, cy + half), (cx - half, cy + half),
           (cx - half, cy - half), (cx + half, cy - half)]
    if close:
        pts.append(pts[0])
    return np.asarray(pts)


def _build_disk_hole(params):
    shape = params.get("shape", "circle")
    r = float(params.get("r", 0.0))
    branches = int(params.get("branches", 10))
    if r <= 0.0:
        raise InvalidGeometryError("hole size must be positive (empty feature)")
    outer = {"circle": r, "square": r * math.sqrt(2.0), "star": 2.0 * r}.get(shape)
    if outer is None:
        raise InvalidGeometryError(f"unknown hole shape {shape!r}")
    if outer >= 0.45:
        raise InvalidGeometryError(
            "feature must stay strictly inside the disk core "
            f"(outer radius {outer:.3g} >= 0.45)")

    if shape == "circle":
        gamma = (Arc((0.0, 0.0), r, 0.0, 2.0 * math.pi),)
        area = math.pi * r * r
    elif shape == "square":
        gamma = (Polyline(_square_loop((0.0, 0.0), r)),)
        area = 4.0 * r * r
    else:
        gamma = (Polyline(star_vertices((0.0, 0.0), r, branches)),)
        area = star_area(r, branches)

    pieces = {
        Tag(DIRICHLET): BoundaryPiece(Tag(DIRICHLET),
                                      (Arc((0.0, 0.0), 1.0, 0.0, 2.0 * math.pi),)),
        Tag(NEUMANN_REST): BoundaryPiece(Tag(NEUMANN_REST)),
        Tag(GAMMA_N): BoundaryPiece(Tag(GAMMA_N), gamma),
        Tag(GAMMA_0N): BoundaryPiece(Tag(GAMMA_0N)),
    }
    return DomainDescription(
        dim=2, family="disk_hole", params=dict(params, r=r, shape=shape),
        feature_sign="negative", pieces=pieces,
        sigma=(SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),),
        region_measures={FEATURE_N: area},
    )


def _build_square_two_holes(params):
    holes = params.get("holes")
    if holes is None:
        holes = (((1.1e-3, 1.1e-3), 1.0e-3), ((0.89, 0.89), 1.0e-1))
    pieces = {
        Tag(DIRICHLET): BoundaryPiece(Tag(DIRICHLET), (
            Segment((0.0, 0.0), (1.0, 0.0)), Segment((0.0, 0.0), (0.0, 1.0)))),
        Tag(NEUMANN_REST): BoundaryPiece(Tag(NEUMANN_REST), (
            Segment((0.0, 1.0), (1.0, 1.0)), Segment((1.0, 0.0), (1.0, 1.0)))),
    }
    sigma = []
    region = {}
    feats = []
    for i, (center, r) in enumerate(holes, start=1):
        cx, cy = center
        if r <= 0.0:
            raise InvalidGeometryError("hole radius must be positive")
        if min(cx, cy) - r <= 0.0 and min(cx, cy) - r < 1e-12:
            if min(cx, cy) <= r:
                raise InvalidGeometryError(
                    f"hole {i} touches the Dirichlet boundary")
        if cx + r >= 1.0 or cy + r >= 1.0:
            raise InvalidGeometryError(f"hole {i} exits the unit square")
        tag = Tag(GAMMA_N, i)
        pieces[tag] = BoundaryPiece(tag, (Arc(center, r, 0.0, 2.0 * math.pi),))
        pieces[Tag(GAMMA_0N, i)] = BoundaryPiece(Tag(GAMMA_0N, i))
        sigma.append(SigmaSpec(tag, GAMMA_N, "exact"))
        region[f"{FEATURE_N}@{i}"] = math.pi * r * r
        feats.append(i)
    return DomainDescription(
        dim=2, family="square_two_holes", params=dict(params, holes=tuple(holes)),
        feature_sign="negative", pieces=pieces, features=tuple(feats),
        sigma=tuple(sigma), region_measures=region,
    )


def _build_square_edge(params):
    variant = params["variant"]
    eps = float(params.get("eps", 0.0))
    if eps <= 0.0:
        raise InvalidGeometryError("eps must be positive")
    if variant in ("halfdisk_neg", "halfdisk_pos", "complex_adjacent",
                   "complex_overlap") and eps >= 0.25:
        raise InvalidGeometryError("eps must stay below 0.25 so the feature "
                                   "does not reach a corner of the square")
    if variant in ("corner_square_neg", "corner_square_pos") and eps >= 0.5:
        raise InvalidGeometryError("eps must stay below 0.5 so the feature "
                                   "does not reach the Dirichlet boundary")

    dtag, ntag = Tag(DIRICHLET), Tag(NEUMANN_REST)
    pieces = {dtag: BoundaryPiece(dtag, (Segment((0.0, 0.0), (1.0, 0.0)),))}
    left = Segment((0.0, 0.0), (0.0, 1.0))
    right = Segment((1.0, 0.0), (1.0, 1.0))

    if variant == "halfdisk_neg":
        pieces[ntag] = BoundaryPiece(ntag, (
            left, right, Segment((0.0, 1.0), (0.5 - eps, 1.0)),
            Segment((0.5 + eps, 1.0), (1.0, 1.0))))
        pieces[Tag(GAMMA_N)] = BoundaryPiece(Tag(GAMMA_N), (
            Arc((0.5, 1.0), eps, -math.pi, 0.0),))
        pieces[Tag(GAMMA_0N)] = BoundaryPiece(Tag(GAMMA_0N), (
            Segment((0.5 - eps, 1.0), (0.5 + eps, 1.0)),))
        sign, sigma = "negative", (SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),)
        region = {FEATURE_N: math.pi * eps**2 / 2.0}
    elif variant == "corner_square_neg":
        pieces[ntag] = BoundaryPiece(ntag, (
            left, Segment((1.0, 0.0), (1.0, 1.0 - eps)),
            Segment((0.0, 1.0), (1.0 - eps, 1.0))))
        pieces[Tag(GAMMA_N)] = BoundaryPiece(Tag(GAMMA_N), (
            Polyline([(1.0 - eps, 1.0), (1.0 - eps, 1.0 - eps), (1.0, 1.0 - eps)]),))
        pieces[Tag(GAMMA_0N)] = BoundaryPiece(Tag(GAMMA_0N), (
            Segment((1.0 - eps, 1.0), (1.0, 1.0)),
            Segment((1.0, 1.0 - eps), (1.0, 1.0))))
        sign, sigma = "negative", (SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),)
        region = {FEATURE_N: eps * eps}
    elif variant == "halfdisk_pos":
        pieces[ntag] = BoundaryPiece(ntag, (
            left, right, Segment((0.0, 1.0), (0.5 - eps, 1.0)),
            Segment((0.5 + eps, 1.0), (1.0, 1.0))))
        pieces[Tag(GAMMA_P)] = BoundaryPiece(Tag(GAMMA_P), (
            Arc((0.5, 1.0), eps, math.pi, 0.0),))
        pieces[Tag(GAMMA_0P)] = BoundaryPiece(Tag(GAMMA_0P), (
            Segment((0.5 - eps, 1.0), (0.5 + eps, 1.0)),))
        sign, sigma = "positive", (SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"),)
        region = {FEATURE_P: math.pi * eps**2 / 2.0}
    elif variant == "corner_square_pos":
        pieces[ntag] = BoundaryPiece(ntag, (
            left, right, Segment((0.0, 1.0), (1.0 - eps, 1.0))))
        pieces[Tag(GAMMA_P)] = BoundaryPiece(Tag(GAMMA_P), (
            Polyline([(1.0 - eps, 1.0), (1.0 - eps, 1.0 + eps),
                      (1.0, 1.0 + eps), (1.0, 1.0)]),))
        pieces[Tag(GAMMA_0P)] = BoundaryPiece(Tag(GAMMA_0P), (
            Segment((1.0 - eps, 1.0), (1.0, 1.0)),))
        sign, sigma = "positive", (SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"),)
        region = {FEATURE_P: eps * eps}
    elif variant == "complex_adjacent":
        x0 = 0.5
        pieces[ntag] = BoundaryPiece(ntag, (
            left, right, Segment((0.0, 1.0), (x0 - eps, 1.0)),
            Segment((x0 + eps, 1.0), (1.0, 1.0))))
        pieces[Tag(GAMMA_N)] = BoundaryPiece(Tag(GAMMA_N), (
            Polyline([(x0, 1.0), (x0, 1.0 - eps),
                      (x0 + eps, 1.0 - eps), (x0 + eps, 1.0)]),))
        pieces[Tag(GAMMA_0N)] = BoundaryPiece(Tag(GAMMA_0N), (
            Segment((x0, 1.0), (x0 + eps, 1.0)),))
        pieces[Tag(GAMMA_P)] = BoundaryPiece(Tag(GAMMA_P), (
            Polyline([(x0 - eps, 1.0), (x0 - eps, 1.0 + eps),
                      (x0, 1.0 + eps), (x0, 1.0)]),))
        pieces[Tag(GAMMA_0P)] = BoundaryPiece(Tag(GAMMA_0P), (
            Segment((x0 - eps, 1.0), (x0, 1.0)),))
        sign = "complex"
        sigma = (SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),
                 SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"))
        region = {FEATURE_N: eps * eps, FEATURE_P: eps * eps}
    elif variant == "complex_overlap":
        xp = 0.5 - 0.75 * eps      # left edge of the positive block
        xn = 0.5 - 0.25 * eps      # left edge of the negative block
        pieces[ntag] = BoundaryPiece(ntag, (
            left, right, Segment((0.0, 1.0), (xp, 1.0)),
            Segment((xn + eps, 1.0), (1.0, 1.0))))
        pieces[Tag(GAMMA_N)] = BoundaryPiece(Tag(GAMMA_N), (
            Polyline([(xn, 1.0), (xn, 1.0 - eps),
                      (xn + eps, 1.0 - eps), (xn + eps, 1.0)]),))
        pieces[Tag(GAMMA_0N)] = BoundaryPiece(Tag(GAMMA_0N), (
            Segment((xn, 1.0), (xn + eps, 1.0)),))
        pieces[Tag(GAMMA_P)] = BoundaryPiece(Tag(GAMMA_P), (
            Polyline([(xp, 1.0), (xp, 1.0 + eps),
                      (xp + eps, 1.0 + eps), (xp + eps, 1.0)]),
            Segment((xn, 1.0), (xp + eps, 1.0))))
        pieces[Tag(GAMMA_0P)] = BoundaryPiece(Tag(GAMMA_0P), (
            Segment((xp, 1.0), (xn, 1.0)),))
        sign = "complex"
        sigma = (SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),
                 SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"))
        region = {FEATURE_N: eps * eps, FEATURE_P: eps * eps}
    else:
        raise InvalidGeometryError(f"unknown square_edge variant {variant!r}")

    return DomainDescription(
        dim=2, family="square_edge", params=dict(params, eps=eps),
        feature_sign=sign, pieces=pieces, sigma=sigma, region_measures=region,
    )


def _rect(x0, x1, y0, y1, z0, z1, plane, at):
    """Helper for axis-aligned rectangles of the cube families."""
    if plane == "x":
        return FlatRect((at, y0, z0), (0, y1 - y0, 0), (0, 0, z1 - z0))
    if plane == "y":
        return FlatRect((x0, at, z0), (x1 - x0, 0, 0), (0, 0, z1 - z0))
    return FlatRect((x0, y0, at), (x1 - x0, 0, 0), (0, y1 - y0, 0))


def _build_cube_edge(params):
    variant = params["variant"]
    eps = float(params.get("eps", 0.0))
    if eps <= 0.0:
        raise InvalidGeometryError("eps must be positive")
    if eps >= 0.4:
        raise InvalidGeometryError("eps must stay below 0.4 to keep the box "
                                   "feature away from the Dirichlet face")

    negative = variant in ("box_neg_edge", "box_neg_corner")
    corner = variant in ("box_neg_corner", "box_pos_corner")
    if variant not in ("box_neg_edge", "box_neg_corner",
                       "box_pos_edge", "box_pos_corner"):
        raise InvalidGeometryError(f"unknown cube_edge variant {variant!r}")

    x0 = 1.0 - eps if corner else 0.5 - eps / 2.0
    x1 = x0 + eps
    y0, y1 = (1.0 - eps, 1.0) if negative else (1.0, 1.0 + eps)
    z0, z1 = 0.0, eps

    dtag, ntag = Tag(DIRICHLET), Tag(NEUMANN_REST)
    pieces = {dtag: BoundaryPiece(
        dtag, (FlatRect((0, 0, 0), (1, 0, 0), (0, 0, 1)),))}

    def f(plane, at):
        return _rect(x0, x1, y0, y1, z0, z1, plane, at)

    if negative:
        exposed = [f("x", x0), f("y", y0), f("z", z1)]
        lids = [f("y", 1.0), f("z", 0.0)]
        (lids if corner else exposed).append(f("x", x1))
        pieces[Tag(GAMMA_N)] = BoundaryPiece(Tag(GAMMA_N), tuple(exposed))
        pieces[Tag(GAMMA_0N)] = BoundaryPiece(Tag(GAMMA_0N), tuple(lids))
        rest = 5.0 - len(lids) * eps * eps
        sigma = (SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),)
        sign, region = "negative", {FEATURE_N: eps**3}
    else:
        exposed = [f("x", x0), f("x", x1), f("y", y1), f("z", 0.0), f("z", z1)]
        pieces[Tag(GAMMA_P)] = BoundaryPiece(Tag(GAMMA_P), tuple(exposed))
        pieces[Tag(GAMMA_0P)] = BoundaryPiece(Tag(GAMMA_0P), (f("y", 1.0),))
        rest = 5.0 - eps * eps
        sigma = (SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"),)
        sign, region = "positive", {FEATURE_P: eps**3}

    pieces[ntag] = BoundaryPiece(ntag, (), measure_override=rest)
    return DomainDescription(
        dim=3, family="cube_edge", params=dict(params, eps=eps),
        feature_sign=sign, pieces=pieces, sigma=sigma, region_measures=region,
    )


def _build_round(params):
    R = float(params.get("R", 0.0))
    if not 0.0 < R <= 1.0:
        raise InvalidGeometryError("round radius must lie in (0, 1]")
    pieces = {
        Tag(DIRICHLET): BoundaryPiece(Tag(DIRICHLET), (
            Segment((0.0, 0.0), (1.0, 0.0)), Segment((1.0, 0.0), (1.0, 1.0)))),
        Tag(GAMMA_N): BoundaryPiece(Tag(GAMMA_N), (
            Arc((R, 1.0 - R), R, math.pi, math.pi / 2.0),)),
        Tag(GAMMA_0N): BoundaryPiece(Tag(GAMMA_0N), (
            Segment((0.0, 1.0 - R), (0.0, 1.0)), Segment((0.0, 1.0), (R, 1.0)))),
    }
    rest = []
    if R < 1.0:
        rest = [Segment((0.0, 0.0), (0.0, 1.0 - R)), Segment((R, 1.0), (1.0, 1.0))]
    pieces[Tag(NEUMANN_REST)] = BoundaryPiece(Tag(NEUMANN_REST), tuple(rest))
    return DomainDescription(
        dim=2, family="round", params=dict(params, R=R),
        feature_sign="negative", pieces=pieces,
        sigma=(SigmaSpec(Tag(GAMMA_N), GAMMA_N, "exact"),),
        region_measures={FEATURE_N: (1.0 - math.pi / 4.0) * R * R},
        theory_covered=False,
    )


def _build_fillet(params):
    choice = params.get("extension", "bounding-box")
    if choice not in EXTENSION_CHOICES:
        raise InvalidGeometryError(f"unknown extension choice {choice!r}")
    half, quarter = 0.5, 0.25
    pieces = {
        Tag(DIRICHLET): BoundaryPiece(Tag(DIRICHLET), (
            Segment((0.0, 0.0), (1.0, 0.0)),)),
        Tag(NEUMANN_REST): BoundaryPiece(Tag(NEUMANN_REST), (
            Segment((0.0, 0.0), (0.0, 1.0)),
            Segment((0.0, 1.0), (half, 1.0)),
            Segment((1.0, 0.0), (1.0, half)))),
        Tag(GAMMA_P): BoundaryPiece(Tag(GAMMA_P), (
            Arc((1.0, 1.0), half, math.pi, 1.5 * math.pi),)),
        Tag(GAMMA_0P): BoundaryPiece(Tag(GAMMA_0P), (
            Polyline([(half, 1.0), (half, half), (1.0, half)]),)),
    }
    region = {FEATURE_P: half * half - math.pi * half**2 / 4.0}
    if choice == "bounding-box":
        tilde = (Segment((half, 1.0), (1.0, 1.0)), Segment((1.0, half), (1.0, 1.0)))
        region[EXT_A] = math.pi * (half**2 - quarter**2) / 4.0
        region[EXT_B] = math.pi * quarter**2 / 4.0
        sigma = (SigmaSpec(Tag(GAMMA_P), "gamma_r", "exact"),
                 SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"))
    elif choice == "custom-arc":
        tilde = (Segment((half, 1.0), (0.75, 1.0)),
                 Arc((1.0, 1.0), quarter, math.pi, 1.5 * math.pi),
                 Segment((1.0, half), (1.0, 0.75)))
        region[EXT_A] = math.pi * (half**2 - quarter**2) / 4.0
        sigma = (SigmaSpec(Tag(GAMMA_P), "gamma_r", "exact"),
                 SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"))
    else:
        tilde = ()
        sigma = (SigmaSpec(Tag(GAMMA_0P), GAMMA_0P, "extension"),)
    pieces[Tag(GAMMA_TILDE)] = BoundaryPiece(Tag(GAMMA_TILDE), tilde)
    return DomainDescription(
        dim=2, family="fillet", params=dict(params, extension=choice),
        feature_sign="positive", extension_choice=choice, pieces=pieces,
        sigma=sigma, region_measures=region, theory_covered=False,
    )


_FAMILIES = {
    "disk_hole": _build_disk_hole,
    "square_two_holes": _build_square_two_holes,
    "square_edge": _build_square_edge,
    "cube_edge": _build_cube_edge,
    "round": _build_round,
    "fillet": _build_fillet,
}


def build_domain(family, params=None):
    """Build the tagged domain description of one geometry family.

    Raises InvalidGeometryError when the parameters violate a family
    invariant (empty feature, feature exiting the domain, feature touching
    the Dirichlet boundary).
    """
    if family not in _FAMILIES:
        raise InvalidGeometryError(f"unknown geometry family {family!r}")
    return _FAMILIES[family](dict(params or {}))


def _feature_scales(domain):
    """Characteristic feature radius per feature id."""
    p = domain.params
    if domain.family == "square_two_holes":
        return {i: float(r) for i, (_, r) in enumerate(p["holes"], start=1)}
    if "eps" in p:
        return {0: float(p["eps"])}
    if "r" in p:
        scale = float(p["r"])
        if p.get("shape") == "star":
            scale *= 2.0
        return {0: scale}
    if "R" in p:
        return {0: float(p["R"])}
    if domain.family == "fillet":
        return {0: 0.5}
    raise InvalidGeometryError("no feature scale for this family")


def _feature_scale(domain):
    return min(_feature_scales(domain).values())


DomainDescription.feature_scales = _feature_scales
DomainDescription.feature_scale = property(_feature_scale)
