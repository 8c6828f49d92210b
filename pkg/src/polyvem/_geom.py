"""Planar polygon primitives shared by the mesh and quadrature modules."""

import numpy as np


def signed_area(verts):
    """Shoelace signed area of a closed polygon given as an (n, 2) array."""
    x = verts[:, 0]
    y = verts[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def centroid(verts):
    """Centroid of a simple polygon (area-weighted, works for nonconvex)."""
    x = verts[:, 0]
    y = verts[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * np.sum(cross)
    if area == 0.0:
        raise ValueError("degenerate polygon with zero area")
    cx = np.sum((x + xn) * cross) / (6.0 * area)
    cy = np.sum((y + yn) * cross) / (6.0 * area)
    return np.array([cx, cy])


def diameter(verts):
    """Largest vertex-to-vertex distance (the polygon diameter)."""
    d = verts[:, None, :] - verts[None, :, :]
    return float(np.sqrt((d * d).sum(axis=2).max()))


def perimeter(verts):
    e = np.roll(verts, -1, axis=0) - verts
    return float(np.sqrt((e * e).sum(axis=1)).sum())


def edge_lengths(verts):
    e = np.roll(verts, -1, axis=0) - verts
    return np.sqrt((e * e).sum(axis=1))


def is_convex(verts, tol=1e-12):
    """True if every turn of the CCW loop is a left turn (within tol).

    tol is relative to the squared polygon scale, so collinear vertices
    pass but genuinely reflex ones do not.
    """
    a = verts
    b = np.roll(verts, -1, axis=0)
    c = np.roll(verts, -2, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - b[:, 0]
    )
    scale = diameter(verts) ** 2
    return bool(np.all(cross >= -tol * scale))


def fan_triangles(verts, center):
    """Index-free fan triangulation (center, v_i, v_{i+1}).

    Returns an (n, 3, 2) array of triangle vertices; triangles may be
    invalid (nonpositive area) when the polygon is not star-shaped with
    respect to ``center`` -- callers must check.
    """
    n = len(verts)
    tris = np.empty((n, 3, 2))
    tris[:, 0, :] = center
    tris[:, 1, :] = verts
    tris[:, 2, :] = np.roll(verts, -1, axis=0)
    return tris


def triangle_areas(tris):
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    return 0.5 * (
        (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
        - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    )


def ear_clip(verts):
    """Triangulate a simple CCW polygon by ear clipping.

    O(n^2); used only as a fallback when the centroid fan fails, which on
    audited meshes essentially never happens.
    """
    idx = list(range(len(verts)))
    tris = []
    guard = 0
    area_scale = abs(signed_area(verts))
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(verts) ** 2:
            raise ValueError("ear clipping failed; polygon may be non-simple")
        n = len(idx)
        clipped = False
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = verts[i0], verts[i1], verts[i2]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if cross <= 1e-14 * area_scale:
                continue
            ear = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                if _point_in_triangle(verts[j], a, b, c):
                    ear = False
                    break
            if ear:
                tris.append((i0, i1, i2))
                del idx[k]
                clipped = True
                break
        if not clipped:
            raise ValueError("ear clipping failed; polygon may be non-simple")
    tris.append(tuple(idx))
    out = np.empty((len(tris), 3, 2))
    for t, (i0, i1, i2) in enumerate(tris):
        out[t, 0] = verts[i0]
        out[t, 1] = verts[i1]
        out[t, 2] = verts[i2]
    return out


def _point_in_triangle(p, a, b, c):
    d1 = (p[0] - a[0]) * (b[1] - a[1]) - (p[1] - a[1]) * (b[0] - a[0])
    d2 = (p[0] - b[0]) * (c[1] - b[1]) - (p[1] - b[1]) * (c[0] - b[0])
    d3 = (p[0] - c[0]) * (a[1] - c[1]) - (p[1] - c[1]) * (a[0] - c[0])
    neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
    pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
    return not (neg and pos)


def clip_to_box(verts, box):
    """Sutherland-Hodgman clip of a convex or simple polygon to a rectangle.

    box is (x0, y0, x1, y1). Returns an (m, 2) array, possibly empty.
    """
    x0, y0, x1, y1 = box

    def clip_half(poly, inside, intersect):
        out = []
        n = len(poly)
        for i in range(n):
            cur = poly[i]
            prv = poly[i - 1]
            cin = inside(cur)
            pin = inside(prv)
            if cin:
                if not pin:
                    out.append(intersect(prv, cur))
                out.append(cur)
            elif pin:
                out.append(intersect(prv, cur))
        return out

    def ix(p, q, xc):
        t = (xc - p[0]) / (q[0] - p[0])
        return (xc, p[1] + t * (q[1] - p[1]))

    def iy(p, q, yc):
        t = (yc - p[1]) / (q[1] - p[1])
        return (p[0] + t * (q[0] - p[0]), yc)

    poly = [tuple(v) for v in verts]
    poly = clip_half(poly, lambda p: p[0] >= x0, lambda p, q: ix(p, q, x0))
    if poly:
        poly = clip_half(poly, lambda p: p[0] <= x1, lambda p, q: ix(p, q, x1))
    if poly:
        poly = clip_half(poly, lambda p: p[1] >= y0, lambda p, q: iy(p, q, y0))
    if poly:
        poly = clip_half(poly, lambda p: p[1] <= y1, lambda p, q: iy(p, q, y1))
    return np.array(poly).reshape(-1, 2)
