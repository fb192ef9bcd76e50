"""Per-family multipatch layouts.

Each builder returns the patch list covering the universe
Omega0 + F_p + extension shells.  Conformity across patches is arranged by
sharing break counts (and curve objects) along common sides; the universe
builder then merges coincident vertices.  All patch maps are oriented so
the Jacobian is positive (asserted after extraction).
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidGeometryError
from .geometry import (Arc, Polyline, Segment, Tag, star_vertices,
                       BASE, EXT_A, EXT_B, FEATURE_N, FEATURE_P,
                       DIRICHLET, NEUMANN_REST, GAMMA_N, GAMMA_0N,
                       GAMMA_P, GAMMA_0P, GAMMA_TILDE)
from .meshing import (Patch, SideSpec, auto_orient, bilinear_map,
                      box_map, rect_map, ruled_map, graded_breaks,
                      graded_breaks_rev, uniform_breaks)


def _S(curve=None, crange=(0.0, 1.0), **roles):
    tags = {}
    for role, kind in roles.items():
        if kind is not None:
            tags[role] = kind if isinstance(kind, Tag) else Tag(kind)
    return SideSpec(tags=tags, curve=curve, crange=crange)


def _both(kind, feature=0, curve=None):
    t = Tag(kind, feature)
    return SideSpec(tags={"exact": t, "defeatured": t}, curve=curve)


def _double_graded(length, h_left, h_right, growth):
    bl = graded_breaks(length / 2, h_left, growth) * 0.5
    br = 1.0 - (graded_breaks(length / 2, h_right, growth) * 0.5)[::-1]
    return np.concatenate([bl, br[1:]])


# ---------------------------------------------------------------------------
# square with an edge feature (2D convergence families)
# ---------------------------------------------------------------------------

def _halfdisk_feature(eps, n, positive):
    """Half-disk O-grid at (0.5, 1): core square plus three lofted rings."""
    c = (0.5, 1.0)
    w = 0.5 * eps
    nc, nt = n, max(2, n // 2)
    bc, bt = uniform_breaks(nc), uniform_breaks(nt)
    label = FEATURE_P if positive else FEATURE_N

    if not positive:
        core = Patch(rect_map(0.5 - w, 0.5 + w, 1.0 - w, 1.0), (bc, bc),
                     label, {"v1": _S(defeatured=GAMMA_0N)})
        # rings run clockwise seen from the center: right, bottom, left
        specs = [
            (Segment((0.5 + w, 1.0), (0.5 + w, 1.0 - w)),
             Arc(c, eps, 0.0, -math.pi / 4), "u0"),
            (Segment((0.5 + w, 1.0 - w), (0.5 - w, 1.0 - w)),
             Arc(c, eps, -math.pi / 4, -3 * math.pi / 4), None),
            (Segment((0.5 - w, 1.0 - w), (0.5 - w, 1.0)),
             Arc(c, eps, -3 * math.pi / 4, -math.pi), "u1"),
        ]
        rings = []
        for seg, arc, lid in specs:
            sides = {"v1": _S(curve=arc)}
            if lid:
                sides[lid] = _S(defeatured=GAMMA_0N)
            rings.append(Patch(ruled_map(seg, arc), (bc, bt), label, sides))
    else:
        core = Patch(rect_map(0.5 - w, 0.5 + w, 1.0, 1.0 + w), (bc, bc),
                     label, {"v0": _S(ext=GAMMA_0P)})
        specs = [
            (Segment((0.5 + w, 1.0 + w), (0.5 + w, 1.0)),
             Arc(c, eps, math.pi / 4, 0.0), "u1"),
            (Segment((0.5 - w, 1.0 + w), (0.5 + w, 1.0 + w)),
             Arc(c, eps, 3 * math.pi / 4, math.pi / 4), None),
            (Segment((0.5 - w, 1.0), (0.5 - w, 1.0 + w)),
             Arc(c, eps, math.pi, 3 * math.pi / 4), "u0"),
        ]
        rings = []
        for seg, arc, lid in specs:
            sides = {"v1": _S(curve=arc, exact=GAMMA_P, ext=GAMMA_P)}
            if lid:
                sides[lid] = _S(ext=GAMMA_0P)
            rings.append(Patch(ruled_map(seg, arc), (bc, bt), label, sides))
    return [core] + rings


def _layout_halfdisk_neg(eps, n, growth):
    feature = _halfdisk_feature(eps, n, positive=False)
    arcs = [p.sides["v1"].curve for p in feature[1:]]
    arc_r, arc_b, arc_l = arcs
    b = 2.0 * eps
    nc, nt2 = n, max(3, (2 * n) // 3)
    bc = uniform_breaks(nc)
    bt2 = graded_breaks(1.0, 0.4 / nt2, 1.3)
    frames = [
        Patch(ruled_map(arc_r, Segment((0.5 + b, 1.0), (0.5 + b, 1.0 - b))),
              (bc, bt2), BASE,
              {"v0": _S(curve=arc_r, exact=GAMMA_N),
               "u0": _both(NEUMANN_REST)}),
        Patch(ruled_map(arc_b, Segment((0.5 + b, 1.0 - b), (0.5 - b, 1.0 - b))),
              (bc, bt2), BASE, {"v0": _S(curve=arc_b, exact=GAMMA_N)}),
        Patch(ruled_map(arc_l, Segment((0.5 - b, 1.0 - b), (0.5 - b, 1.0))),
              (bc, bt2), BASE,
              {"v0": _S(curve=arc_l, exact=GAMMA_N),
               "u1": _both(NEUMANN_REST)}),
    ]
    h0 = 2 * b / nc
    bx0 = graded_breaks_rev(0.5 - b, h0, growth)
    bx2 = graded_breaks(0.5 - b, h0, growth)
    by0 = graded_breaks_rev(1.0 - b, h0, growth)
    blocks = [
        Patch(rect_map(0.0, 0.5 - b, 0.0, 1.0 - b), (bx0, by0), BASE,
              {"v0": _both(DIRICHLET), "u0": _both(NEUMANN_REST)}),
        Patch(rect_map(0.5 - b, 0.5 + b, 0.0, 1.0 - b), (bc, by0), BASE,
              {"v0": _both(DIRICHLET)}),
        Patch(rect_map(0.5 + b, 1.0, 0.0, 1.0 - b), (bx2, by0), BASE,
              {"v0": _both(DIRICHLET), "u1": _both(NEUMANN_REST)}),
        Patch(rect_map(0.0, 0.5 - b, 1.0 - b, 1.0), (bx0, bc), BASE,
              {"u0": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST)}),
        Patch(rect_map(0.5 + b, 1.0, 1.0 - b, 1.0), (bx2, bc), BASE,
              {"u1": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST)}),
    ]
    return feature + frames + blocks


def _layout_halfdisk_pos(eps, n, growth):
    feature = _halfdisk_feature(eps, n, positive=True)
    w = 0.5 * eps
    nc, nt = n, max(2, n // 2)
    bc, bt = uniform_breaks(nc), uniform_breaks(nt)
    h0 = eps / nc
    by = graded_breaks_rev(1.0, h0, growth)
    bx0 = graded_breaks_rev(0.5 - eps, h0, growth)
    bx4 = graded_breaks(0.5 - eps, h0, growth)
    cols = [
        (0.0, 0.5 - eps, bx0, _both(NEUMANN_REST), "u0"),
        (0.5 - eps, 0.5 - w, bt, _S(defeatured=GAMMA_0P), None),
        (0.5 - w, 0.5 + w, bc, _S(defeatured=GAMMA_0P), None),
        (0.5 + w, 0.5 + eps, bt, _S(defeatured=GAMMA_0P), None),
        (0.5 + eps, 1.0, bx4, _both(NEUMANN_REST), "u1"),
    ]
    blocks = []
    for x0, x1, bx, top, outer in cols:
        sides = {"v0": _both(DIRICHLET), "v1": top}
        if outer:
            sides[outer] = _both(NEUMANN_REST)
        blocks.append(Patch(rect_map(x0, x1, 0.0, 1.0), (bx, by), BASE, sides))
    return feature + blocks


def _layout_corner_square(eps, n, growth, positive):
    nc = n
    bc = uniform_breaks(nc)
    h0 = eps / nc
    bg = graded_breaks_rev(1.0 - eps, h0, growth)
    blocks = [
        Patch(rect_map(0, 1 - eps, 0, 1 - eps), (bg, bg), BASE,
              {"v0": _both(DIRICHLET), "u0": _both(NEUMANN_REST)}),
    ]
    if positive:
        blocks += [
            Patch(rect_map(1 - eps, 1, 0, 1 - eps), (bc, bg), BASE,
                  {"v0": _both(DIRICHLET), "u1": _both(NEUMANN_REST)}),
            Patch(rect_map(0, 1 - eps, 1 - eps, 1), (bg, bc), BASE,
                  {"u0": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST)}),
            Patch(rect_map(1 - eps, 1, 1 - eps, 1), (bc, bc), BASE,
                  {"u1": _both(NEUMANN_REST),
                   "v1": _S(defeatured=GAMMA_0P)}),
            Patch(rect_map(1 - eps, 1, 1, 1 + eps), (bc, bc), FEATURE_P,
                  {"u0": _S(exact=GAMMA_P, ext=GAMMA_P),
                   "u1": _S(exact=GAMMA_P, ext=GAMMA_P),
                   "v1": _S(exact=GAMMA_P, ext=GAMMA_P),
                   "v0": _S(ext=GAMMA_0P)}),
        ]
    else:
        blocks += [
            Patch(rect_map(1 - eps, 1, 0, 1 - eps), (bc, bg), BASE,
                  {"v0": _both(DIRICHLET), "u1": _both(NEUMANN_REST),
                   "v1": _S(exact=GAMMA_N)}),
            Patch(rect_map(0, 1 - eps, 1 - eps, 1), (bg, bc), BASE,
                  {"u0": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST),
                   "u1": _S(exact=GAMMA_N)}),
            Patch(rect_map(1 - eps, 1, 1 - eps, 1), (bc, bc), FEATURE_N,
                  {"u1": _S(defeatured=GAMMA_0N),
                   "v1": _S(defeatured=GAMMA_0N)}),
        ]
    return blocks


def _layout_complex(eps, n, growth, overlap):
    if overlap:
        xs = [0.5 - 0.75 * eps, 0.5 - 0.25 * eps, 0.5 + 0.25 * eps,
              0.5 + 0.75 * eps]
        nmid = max(2, n // 2)
        pcols, ncols = (0, 1), (1, 2)
    else:
        xs = [0.5 - eps, 0.5, 0.5 + eps]
        nmid = n
        pcols, ncols = (0,), (1,)
    bmid = uniform_breaks(nmid)
    bc = uniform_breaks(n)
    h0 = eps / n
    x_lo, x_hi = xs[0], xs[-1]
    by0 = graded_breaks_rev(1.0 - eps, h0, growth)
    bx_l = graded_breaks_rev(x_lo, h0, growth)
    bx_r = graded_breaks(1.0 - x_hi, h0, growth)

    blocks = [
        Patch(rect_map(0, x_lo, 0, 1 - eps), (bx_l, by0), BASE,
              {"v0": _both(DIRICHLET), "u0": _both(NEUMANN_REST)}),
        Patch(rect_map(x_hi, 1, 0, 1 - eps), (bx_r, by0), BASE,
              {"v0": _both(DIRICHLET), "u1": _both(NEUMANN_REST)}),
        Patch(rect_map(0, x_lo, 1 - eps, 1), (bx_l, bc), BASE,
              {"u0": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST)}),
        Patch(rect_map(x_hi, 1, 1 - eps, 1), (bx_r, bc), BASE,
              {"u1": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST),
               "u0": _S(exact=GAMMA_N)}),
    ]
    for ci in range(len(xs) - 1):
        x0, x1 = xs[ci], xs[ci + 1]
        bottom = Patch(rect_map(x0, x1, 0, 1 - eps), (bmid, by0), BASE,
                       {"v0": _both(DIRICHLET)})
        blocks.append(bottom)
        if ci in ncols:
            bottom.sides["v1"] = _S(exact=GAMMA_N)
            blocks.append(Patch(rect_map(x0, x1, 1 - eps, 1), (bmid, bc),
                                FEATURE_N, {"v1": _S(defeatured=GAMMA_0N)}))
        else:
            mid = Patch(rect_map(x0, x1, 1 - eps, 1), (bmid, bc), BASE, {})
            mid.sides["v1"] = _S(defeatured=GAMMA_0P) if ci in pcols \
                else _both(NEUMANN_REST)
            if (ci + 1) in ncols:
                mid.sides["u1"] = _S(exact=GAMMA_N)
            blocks.append(mid)
        if ci in pcols:
            over_notch = ci in ncols
            sides = {"v1": _S(exact=GAMMA_P, ext=GAMMA_P),
                     "v0": _S(exact=GAMMA_P, ext=GAMMA_P) if over_notch
                     else _S(ext=GAMMA_0P)}
            if ci == pcols[0]:
                sides["u0"] = _S(exact=GAMMA_P, ext=GAMMA_P)
            if ci == pcols[-1]:
                sides["u1"] = _S(exact=GAMMA_P, ext=GAMMA_P)
            blocks.append(Patch(rect_map(x0, x1, 1, 1 + eps), (bmid, bc),
                                FEATURE_P, sides))
    return blocks


def layout_square_edge(domain, n, growth):
    eps = domain.params["eps"]
    variant = domain.params["variant"]
    if variant == "halfdisk_neg":
        return _layout_halfdisk_neg(eps, n, growth)
    if variant == "halfdisk_pos":
        return _layout_halfdisk_pos(eps, n, growth)
    if variant == "corner_square_neg":
        return _layout_corner_square(eps, n, growth, positive=False)
    if variant == "corner_square_pos":
        return _layout_corner_square(eps, n, growth, positive=True)
    if variant == "complex_adjacent":
        return _layout_complex(eps, n, growth, overlap=False)
    if variant == "complex_overlap":
        return _layout_complex(eps, n, growth, overlap=True)
    raise InvalidGeometryError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# disk with a centered hole (feature-shape and Neumann-data studies)
# ---------------------------------------------------------------------------

def layout_disk_hole(domain, n, growth):
    shape = domain.params["shape"]
    r = domain.params["r"]
    if shape == "circle":
        n_loop, w = 4 * n, 0.5 * r
        core = Polyline([(w, 0), (0, w), (-w, 0), (0, -w), (w, 0)])
        loop = Arc((0, 0), r, 0.0, 2 * math.pi)
        scale = r
    elif shape == "square":
        n_loop, w = 4 * n, 0.5 * r
        core = Polyline([(w, w), (-w, w), (-w, -w), (w, -w), (w, w)])
        loop = Polyline([(r, r), (-r, r), (-r, -r), (r, -r), (r, r)])
        scale = r * math.sqrt(2)
    elif shape == "star":
        m = max(1, round(n / 4))
        n_loop, w = 20 * m, 0.35 * r
        core = Polyline([(w, 0), (0, w), (-w, 0), (0, -w), (w, 0)])
        loop = Polyline(star_vertices((0, 0), r,
                                      domain.params.get("branches", 10)))
        scale = 2 * r
    else:
        raise InvalidGeometryError(f"unknown hole shape {shape!r}")

    r_mid = 0.45
    phi0 = math.pi / 4 if shape == "square" else 0.0
    mid = Arc((0, 0), r_mid, phi0, phi0 + 2 * math.pi)
    outer = Arc((0, 0), 1.0, phi0, phi0 + 2 * math.pi)
    bl = uniform_breaks(n_loop)
    bq = uniform_breaks(n_loop // 4)
    h_feat = 0.75 * loop.length / n_loop
    core_corners = core.points(np.array([0.0, 0.25, 0.5, 0.75]))
    return [
        Patch(bilinear_map(*core_corners), (bq, bq), FEATURE_N),
        Patch(ruled_map(core, loop),
              (bl, uniform_breaks(max(2, n // 2))), FEATURE_N,
              {"v1": _S(curve=loop)}),
        Patch(ruled_map(loop, mid),
              (bl, graded_breaks(r_mid - 0.5 * scale, h_feat, growth)), BASE,
              {"v0": _S(curve=loop, exact=GAMMA_N), "v1": _S(curve=mid)}),
        Patch(ruled_map(mid, outer),
              (bl, graded_breaks(1.0 - r_mid, 2 * math.pi * r_mid / n_loop,
                                 growth)), BASE,
              {"v0": _S(curve=mid),
               "v1": _S(curve=outer, exact=Tag(DIRICHLET),
                        defeatured=Tag(DIRICHLET))}),
    ]


# ---------------------------------------------------------------------------
# unit square with circular holes
# ---------------------------------------------------------------------------

def _hole_box_half(center, r):
    half = 1.05 * r
    cx, cy = center
    for c in (cx, cy):
        if c - half < 0.3 * half:
            half = min(half, c)
        if c + half > 1 - 0.3 * half:
            half = min(half, 1 - c)
    if half <= r:
        raise InvalidGeometryError("hole too close to the boundary to mesh")
    return half


def _hole_structure(center, r, half, n, feature, edge_tags):
    """Core + inner ring + four lofted quarters filling the hole's box."""
    cx, cy = center
    w = 0.5 * r
    bq, bl = uniform_breaks(n), uniform_breaks(4 * n)
    core = Polyline([(cx + w, cy + w), (cx - w, cy + w), (cx - w, cy - w),
                     (cx + w, cy - w), (cx + w, cy + w)])
    circle = Arc(center, r, math.pi / 4, math.pi / 4 + 2 * math.pi)
    corners = core.points(np.array([0.0, 0.25, 0.5, 0.75]))
    lab = f"{FEATURE_N}@{feature}"
    patches = [
        Patch(bilinear_map(*corners), (bq, bq), lab),
        Patch(ruled_map(core, circle),
              (bl, uniform_breaks(max(2, n // 2))), lab,
              {"v1": _S(curve=circle)}),
    ]
    box = [(cx + half, cy + half), (cx - half, cy + half),
           (cx - half, cy - half), (cx + half, cy - half),
           (cx + half, cy + half)]
    nt = max(3, n // 2 + 1)
    bt = uniform_breaks(nt)
    for k, name in enumerate(("top", "left", "bottom", "right")):
        arc_k = Arc(center, r, math.pi / 4 + k * math.pi / 2,
                    math.pi / 4 + (k + 1) * math.pi / 2)
        seg_k = Segment(box[k], box[k + 1])
        sides = {"v0": _S(curve=arc_k, exact=Tag(GAMMA_N, feature))}
        if name in edge_tags:
            sides["v1"] = _both(edge_tags[name])
        patches.append(Patch(ruled_map(arc_k, seg_k), (bq, bt), BASE, sides))
    return patches


def layout_square_two_holes(domain, n, growth):
    holes = domain.params["holes"]
    halves = [_hole_box_half(c, r) for c, r in holes]
    patches = []
    boxes = []
    for i, ((c, r), half) in enumerate(zip(holes, halves), start=1):
        edge_tags = {}
        if abs(c[0] - half) < 1e-14:
            edge_tags["left"] = DIRICHLET
        if abs(c[1] - half) < 1e-14:
            edge_tags["bottom"] = DIRICHLET
        if abs(c[0] + half - 1) < 1e-14:
            edge_tags["right"] = NEUMANN_REST
        if abs(c[1] + half - 1) < 1e-14:
            edge_tags["top"] = NEUMANN_REST
        patches += _hole_structure(c, r, half, n, i, edge_tags)
        boxes.append((c[0] - half, c[0] + half, c[1] - half, c[1] + half))

    xs = sorted({0.0, 1.0} | {b[0] for b in boxes} | {b[1] for b in boxes})
    ys = sorted({0.0, 1.0} | {b[2] for b in boxes} | {b[3] for b in boxes})
    xs = [v for v in xs if -1e-14 <= v <= 1 + 1e-14]
    ys = [v for v in ys if -1e-14 <= v <= 1 + 1e-14]

    def in_box(x0, x1, y0, y1):
        cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
        return any(b[0] - 1e-14 <= cx <= b[1] + 1e-14 and
                   b[2] - 1e-14 <= cy <= b[3] + 1e-14 for b in boxes)

    def span_breaks(lo, hi, axis):
        for b in boxes:
            blo, bhi = (b[0], b[1]) if axis == 0 else (b[2], b[3])
            if abs(lo - blo) < 1e-13 and abs(hi - bhi) < 1e-13:
                return uniform_breaks(n)
        L = hi - lo
        t_lo = any(abs(lo - b[k]) < 1e-13 for b in boxes for k in
                   ((0, 1) if axis == 0 else (2, 3)))
        t_hi = any(abs(hi - b[k]) < 1e-13 for b in boxes for k in
                   ((0, 1) if axis == 0 else (2, 3)))

        def h_at(v):
            for b in boxes:
                lo_b, hi_b = (b[0], b[1]) if axis == 0 else (b[2], b[3])
                if abs(v - lo_b) < 1e-13 or abs(v - hi_b) < 1e-13:
                    return (hi_b - lo_b) / n
            return L / 4
        if t_lo and t_hi:
            return _double_graded(L, h_at(lo), h_at(hi), growth)
        if t_lo:
            return graded_breaks(L, h_at(lo), growth)
        if t_hi:
            return graded_breaks_rev(L, h_at(hi), growth)
        return uniform_breaks(max(2, n // 2))

    bx_cache = {i: span_breaks(xs[i], xs[i + 1], 0) for i in range(len(xs) - 1)}
    by_cache = {j: span_breaks(ys[j], ys[j + 1], 1) for j in range(len(ys) - 1)}
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            x0, x1, y0, y1 = xs[i], xs[i + 1], ys[j], ys[j + 1]
            if in_box(x0, x1, y0, y1):
                continue
            sides = {}
            if j == 0:
                sides["v0"] = _both(DIRICHLET)
            if i == 0:
                sides["u0"] = _both(DIRICHLET)
            if i == len(xs) - 2:
                sides["u1"] = _both(NEUMANN_REST)
            if j == len(ys) - 2:
                sides["v1"] = _both(NEUMANN_REST)
            patches.append(Patch(rect_map(x0, x1, y0, y1),
                                 (bx_cache[i], by_cache[j]), BASE, sides))
    return patches


# ---------------------------------------------------------------------------
# round (negative corner feature) and fillet (positive corner feature)
# ---------------------------------------------------------------------------

def layout_round(domain, n, growth):
    R = domain.params["R"]
    c = (R, 1.0 - R)
    w = 0.4 * R
    nf, nt2 = 2 * n, max(2, n // 2 + 1)
    bf, bt2, bk = uniform_breaks(nf), uniform_breaks(nt2), uniform_breaks(n)
    arc = Arc(c, R, math.pi / 2, math.pi)          # (R, 1) -> (0, 1-R)
    kpoly = Polyline([(R, 1 - R + w), (R - w, 1 - R + w), (R - w, 1 - R)])
    lid = Polyline([(R, 1.0), (0.0, 1.0), (0.0, 1 - R)])

    core = Patch(bilinear_map(c, (R, 1 - R + w), (R - w, 1 - R + w),
                              (R - w, 1 - R)), (bk, bk), BASE,
                 {"v0": _both(DIRICHLET), "u0": _both(DIRICHLET)})
    frame = Patch(ruled_map(arc, kpoly), (bf, bt2), BASE,
                  {"v0": _S(curve=arc, exact=GAMMA_N),
                   "u0": _both(DIRICHLET), "u1": _both(DIRICHLET)})
    cusp = Patch(ruled_map(lid, arc), (bf, uniform_breaks(max(2, n // 2))),
                 FEATURE_N,
                 {"v0": _S(defeatured=GAMMA_0N), "v1": _S(curve=arc)})
    patches = [core, frame, cusp]
    if R < 1.0 - 1e-14:
        h0 = min(R / n, (1 - R) / 2)
        bxr = graded_breaks(1.0 - R, h0, growth)
        byb = graded_breaks_rev(1.0 - R, h0, growth)
        patches += [
            Patch(rect_map(0, R - w, 0, 1 - R), (bt2, byb), BASE,
                  {"v0": _both(DIRICHLET), "u0": _both(NEUMANN_REST)}),
            Patch(rect_map(R - w, R, 0, 1 - R), (bk, byb), BASE,
                  {"v0": _both(DIRICHLET)}),
            Patch(rect_map(R, 1, 0, 1 - R), (bxr, byb), BASE,
                  {"v0": _both(DIRICHLET), "u1": _both(DIRICHLET)}),
            Patch(rect_map(R, 1, 1 - R, 1 - R + w), (bxr, bk), BASE,
                  {"u1": _both(DIRICHLET)}),
            Patch(rect_map(R, 1, 1 - R + w, 1), (bxr, bt2), BASE,
                  {"u1": _both(DIRICHLET), "v1": _both(NEUMANN_REST)}),
        ]
    return patches


def layout_fillet(domain, n, growth):
    half, quarter = 0.5, 0.25
    c = (1.0, 1.0)
    nf, nt = 2 * n, max(2, n // 2)
    bf, bt, bn = uniform_breaks(nf), uniform_breaks(nt), uniform_breaks(n)
    arc_half = Arc(c, half, math.pi, 1.5 * math.pi)
    arc_quarter = Arc(c, quarter, math.pi, 1.5 * math.pi)
    gpoly = Polyline([(half, 1.0), (half, half), (1.0, half)])
    wq = 0.4 * quarter
    kpoly = Polyline([(1 - wq, 1.0), (1 - wq, 1 - wq), (1.0, 1 - wq)])

    fillet = Patch(ruled_map(gpoly, arc_half), (bf, bt), FEATURE_P,
                   {"v0": _S(ext=GAMMA_0P),
                    "v1": _S(curve=arc_half, exact=GAMMA_P, ext=GAMMA_P)})
    annulus = Patch(ruled_map(arc_half, arc_quarter), (bf, bt), EXT_A,
                    {"v0": _S(curve=arc_half),
                     "v1": _S(curve=arc_quarter, ext=GAMMA_TILDE),
                     "u0": _S(ext=GAMMA_TILDE), "u1": _S(ext=GAMMA_TILDE)})
    kframe = Patch(ruled_map(arc_quarter, kpoly), (bf, bt), EXT_B,
                   {"v0": _S(curve=arc_quarter),
                    "u0": _S(ext=GAMMA_TILDE), "u1": _S(ext=GAMMA_TILDE)})
    kcore = Patch(bilinear_map(c, (1 - wq, 1.0), (1 - wq, 1 - wq),
                               (1.0, 1 - wq)), (bn, bn), EXT_B,
                  {"v0": _S(ext=GAMMA_TILDE), "u0": _S(ext=GAMMA_TILDE)})

    h0 = half / n
    bg = graded_breaks_rev(half, h0, growth)
    blocks = [
        Patch(rect_map(0, half, 0, half), (bg, bg), BASE,
              {"v0": _both(DIRICHLET), "u0": _both(NEUMANN_REST)}),
        Patch(rect_map(half, 1, 0, half), (bn, bg), BASE,
              {"v0": _both(DIRICHLET), "u1": _both(NEUMANN_REST),
               "v1": _S(defeatured=GAMMA_0P)}),
        Patch(rect_map(0, half, half, 1), (bg, bn), BASE,
              {"u0": _both(NEUMANN_REST), "v1": _both(NEUMANN_REST),
               "u1": _S(defeatured=GAMMA_0P)}),
    ]
    return [fillet, annulus, kframe, kcore] + blocks


# ---------------------------------------------------------------------------
# unit cube with a box feature
# ---------------------------------------------------------------------------

def layout_cube_edge(domain, n, growth, grading=None):
    eps = domain.params["eps"]
    variant = domain.params["variant"]
    negative = variant.startswith("box_neg")
    corner = variant.endswith("corner")
    gfac = growth if grading is None else 1.0 / grading
    bu = uniform_breaks(n)
    h0 = eps / n

    x0 = 1.0 - eps if corner else 0.5 - eps / 2.0
    x1 = x0 + eps
    xcols = [(0.0, x0, graded_breaks_rev(x0, h0, gfac)), (x0, x1, bu)]
    if not corner:
        xcols.append((x1, 1.0, graded_breaks(1.0 - x1, h0, gfac)))
    yrows = [(0.0, 1 - eps, graded_breaks_rev(1 - eps, h0, gfac)),
             (1 - eps, 1.0, bu)]
    zrows = [(0.0, eps, bu), (eps, 1.0, graded_breaks(1.0 - eps, h0, gfac))]
    fi, fj, fk = 1, 1, 0

    patches = []
    for i, (xa, xb, bx) in enumerate(xcols):
        for j, (ya, yb, by) in enumerate(yrows):
            for k, (za, zb, bz) in enumerate(zrows):
                label = FEATURE_N if negative and (i, j, k) == (fi, fj, fk) \
                    else BASE
                sides = {}
                if j == 0:
                    sides["v0"] = _both(DIRICHLET)
                if j == len(yrows) - 1:
                    sides["v1"] = _both(NEUMANN_REST)
                if i == 0:
                    sides["u0"] = _both(NEUMANN_REST)
                if i == len(xcols) - 1:
                    sides["u1"] = _both(NEUMANN_REST)
                if k == 0:
                    sides["w0"] = _both(NEUMANN_REST)
                if k == len(zrows) - 1:
                    sides["w1"] = _both(NEUMANN_REST)
                if negative:
                    if (i, j, k) == (fi, fj, fk):
                        sides["v1"] = _S(defeatured=GAMMA_0N)
                        sides["w0"] = _S(defeatured=GAMMA_0N)
                        if corner:
                            sides["u1"] = _S(defeatured=GAMMA_0N)
                    if (i, j, k) == (fi - 1, fj, fk):
                        sides["u1"] = _S(exact=GAMMA_N)
                    if not corner and (i, j, k) == (fi + 1, fj, fk):
                        sides["u0"] = _S(exact=GAMMA_N)
                    if (i, j, k) == (fi, fj - 1, fk):
                        sides["v1"] = _S(exact=GAMMA_N)
                    if (i, j, k) == (fi, fj, fk + 1):
                        sides["w0"] = _S(exact=GAMMA_N)
                elif (i, j, k) == (fi, fj, fk):
                    sides["v1"] = _S(defeatured=GAMMA_0P)
                patches.append(Patch(box_map(xa, xb, ya, yb, za, zb),
                                     (bx, by, bz), label, sides))
    if not negative:
        gp = _S(exact=GAMMA_P, ext=GAMMA_P)
        xa, xb, bx = xcols[fi]
        patches.append(Patch(
            box_map(xa, xb, 1.0, 1.0 + eps, 0.0, eps), (bx, bu, bu),
            FEATURE_P,
            {"v0": _S(ext=GAMMA_0P), "v1": gp, "w0": gp, "w1": gp,
             "u0": gp, "u1": gp}))
    return patches


# ---------------------------------------------------------------------------

def build_layout(domain, resolution, growth=1.35, grading=None):
    return auto_orient(_build_layout(domain, resolution, growth, grading))


def _build_layout(domain, resolution, growth, grading):
    if resolution < 2:
        raise InvalidGeometryError("resolution must be at least 2 "
                                   "subdivisions per patch")
    fam = domain.family
    if fam == "square_edge":
        return layout_square_edge(domain, resolution, growth)
    if fam == "disk_hole":
        return layout_disk_hole(domain, resolution, growth)
    if fam == "square_two_holes":
        return layout_square_two_holes(domain, resolution, growth)
    if fam == "round":
        return layout_round(domain, resolution, growth)
    if fam == "fillet":
        return layout_fillet(domain, resolution, growth)
    if fam == "cube_edge":
        return layout_cube_edge(domain, resolution, growth, grading)
    raise InvalidGeometryError(f"no layout for family {fam!r}")
