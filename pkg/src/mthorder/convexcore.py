"""Convex bodies in R^n (n <= 3): gauges, supports, facets, volumes, intersections.

Bodies are canonically halfspace-represented (<a_i, x> <= b_i); the vertex list
is derived at construction for polytopes.  Euclidean balls are carried as a
separate kind with closed-form gauge/support/volume; a 1-D "ball" is just an
interval and is stored as a polytope.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .numerics import (
    EstimateWithError,
    default_mc_samples,
    lp_feasible_interior,
    lp_maximize,
    make_rng,
    sphere_sample,
)

_STREAM_VOLUME_MC = 101
_STREAM_BALL_FACETS = 102

_GEOM_TOL = 1e-9


class DegenerateBodyError(ValueError):
    pass


class UnboundedBodyError(ValueError):
    pass


class OriginNotContainedError(ValueError):
    pass


class OriginNotInteriorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ConvexBody:
    dim: int
    kind: str                        # "polytope" | "ball"
    normals: np.ndarray | None       # (F, n) unit rows, polytopes only
    offsets: np.ndarray | None       # (F,)
    vertices: np.ndarray | None      # (V, n), polytopes only
    center: np.ndarray | None = None  # balls only
    radius: float | None = None

    def __repr__(self):
        if self.kind == "ball":
            return f"ConvexBody(ball, dim={self.dim}, r={self.radius}, c={self.center})"
        return (f"ConvexBody(polytope, dim={self.dim}, "
                f"facets={len(self.offsets)}, vertices={len(self.vertices)})")


@dataclass(frozen=True)
class FacetData:
    normals: np.ndarray   # (F, n) unit outer normals
    areas: np.ndarray     # (F,) (n-1)-measures
    points: np.ndarray    # (F, n) representative points

    def __len__(self):
        return len(self.areas)


# ---------------------------------------------------------------------------
# construction


def _dedupe_points(pts, tol):
    out = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= tol for q in out):
            out.append(p)
    return np.array(out)


def _enumerate_vertices(normals, offsets, tol=_GEOM_TOL):
    """Candidate vertices of {A x <= b} via n-subsets of active constraints."""
    m, n = normals.shape
    scale = 1.0 + float(np.max(np.abs(offsets), initial=0.0))
    cands = []
    for idx in itertools.combinations(range(m), n):
        sub = normals[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        v = np.linalg.solve(sub, offsets[list(idx)])
        if np.all(normals @ v <= offsets + tol * scale):
            cands.append(v)
    if not cands:
        return np.empty((0, n))
    return _dedupe_points(cands, 1e-7 * scale)


def _affine_rank(pts):
    if len(pts) < 2:
        return 0
    d = pts[1:] - pts[0]
    return np.linalg.matrix_rank(d, tol=1e-9)


def _canonical_order(normals, offsets):
    key = np.round(np.column_stack([normals, offsets]), 9)
    order = np.lexsort(key.T[::-1])
    return normals[order], offsets[order]


def _irredundant(normals, offsets, vertices, n):
    """Keep halfspaces that support a genuine facet ((n-1)-dimensional face)."""
    scale = 1.0 + float(np.max(np.abs(vertices)))
    keep_n, keep_b = [], []
    for a, b in zip(normals, offsets):
        on = vertices[np.abs(vertices @ a - b) <= 1e-7 * scale]
        if len(on) >= n and _affine_rank(on) >= n - 1:
            dup = any(np.linalg.norm(a - a2) <= 1e-9 and abs(b - b2) <= 1e-9 * scale
                      for a2, b2 in zip(keep_n, keep_b))
            if not dup:
                keep_n.append(a)
                keep_b.append(b)
    return np.array(keep_n), np.array(keep_b)


def from_halfspaces(normals, offsets) -> ConvexBody:
    """Body from <a_i, x> <= b_i (canonicalized, vertices derived)."""
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    offsets = np.asarray(offsets, dtype=float)
    n = normals.shape[1]
    if n not in (1, 2, 3):
        raise DegenerateBodyError("supported dimensions are 1, 2, 3")
    lens = np.linalg.norm(normals, axis=1)
    if np.any(lens < 1e-14):
        raise DegenerateBodyError("zero normal in halfspace list")
    normals = normals / lens[:, None]
    offsets = offsets / lens
    verts = _enumerate_vertices(normals, offsets)
    if len(verts) < n + 1 or _affine_rank(verts) < n:
        raise DegenerateBodyError("halfspace intersection has empty interior")
    # boundedness: every axis direction has a finite maximum
    for u in np.vstack([np.eye(n), -np.eye(n)]):
        if lp_maximize(u, normals, offsets).status == "unbounded":
            raise UnboundedBodyError("halfspace intersection is unbounded")
    normals, offsets = _irredundant(normals, offsets, verts, n)
    normals, offsets = _canonical_order(normals, offsets)
    return ConvexBody(n, "polytope", normals, offsets, verts)


def from_vertices(points) -> ConvexBody:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    if n == 1:
        lo, hi = float(points.min()), float(points.max())
        if hi - lo < 1e-12:
            raise DegenerateBodyError("interval has zero length")
        return from_halfspaces(np.array([[1.0], [-1.0]]), np.array([hi, -lo]))
    if _affine_rank(points) < n:
        raise DegenerateBodyError("vertices do not affinely span the space")
    from scipy.spatial import ConvexHull

    hull = ConvexHull(points)
    # qhull equations: a.x + b <= 0; coplanar simplices share one plane each
    normals = hull.equations[:, :-1]
    offsets = -hull.equations[:, -1]
    return from_halfspaces(normals, offsets)


def simplex(n: int, variant: str = "corner") -> ConvexBody:
    """conv{o, e_1, ..., e_n}, optionally translated to put the centroid at o."""
    normals = np.vstack([-np.eye(n), np.ones((1, n))])
    offsets = np.concatenate([np.zeros(n), [1.0]])
    body = from_halfspaces(normals, offsets)
    if variant == "corner":
        return body
    if variant == "centered":
        centroid = np.full(n, 1.0 / (n + 1))
        return translate(body, -centroid)
    raise ValueError(f"unknown simplex variant {variant!r}")


def cube(n: int, halfwidth: float = 1.0) -> ConvexBody:
    if halfwidth <= 0:
        raise DegenerateBodyError("halfwidth must be positive")
    normals = np.vstack([np.eye(n), -np.eye(n)])
    offsets = np.full(2 * n, float(halfwidth))
    return from_halfspaces(normals, offsets)


def ball(n: int, r: float, center=None) -> ConvexBody:
    if r <= 0:
        raise DegenerateBodyError("radius must be positive")
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    if n == 1:
        return from_halfspaces(np.array([[1.0], [-1.0]]),
                               np.array([c[0] + r, -(c[0] - r)]))
    return ConvexBody(n, "ball", None, None, None, center=c, radius=float(r))


def translate(K: ConvexBody, v) -> ConvexBody:
    v = np.asarray(v, dtype=float)
    if K.kind == "ball":
        return ConvexBody(K.dim, "ball", None, None, None, K.center + v, K.radius)
    return ConvexBody(K.dim, "polytope", K.normals, K.offsets + K.normals @ v,
                      K.vertices + v)


def scale(K: ConvexBody, t: float) -> ConvexBody:
    """Dilation about the origin; negative t reflects then dilates by |t|."""
    if t == 0:
        raise DegenerateBodyError("scale factor must be nonzero")
    if t < 0:
        return scale(reflect(K), -t)
    if K.kind == "ball":
        return ConvexBody(K.dim, "ball", None, None, None, K.center * t, K.radius * t)
    return ConvexBody(K.dim, "polytope", K.normals, K.offsets * t, K.vertices * t)


def reflect(K: ConvexBody) -> ConvexBody:
    if K.kind == "ball":
        return ConvexBody(K.dim, "ball", None, None, None, -K.center, K.radius)
    normals, offsets = _canonical_order(-K.normals, K.offsets.copy())
    return ConvexBody(K.dim, "polytope", normals, offsets, -K.vertices)


def make_body(spec: dict) -> ConvexBody:
    """Body from its JSON description (see the schema in the README)."""
    kind = spec.get("kind")
    n = int(spec.get("dim", 0))
    if kind == "simplex":
        return simplex(n, spec.get("variant", "corner"))
    if kind == "cube":
        return cube(n, float(spec.get("halfwidth", 1.0)))
    if kind == "ball":
        b = ball(n, float(spec.get("radius", 1.0)))
        if "center" in spec:
            b = translate(b, np.asarray(spec["center"], dtype=float))
        return b
    if kind == "vertices":
        return from_vertices(spec["points"])
    if kind == "halfspaces":
        return from_halfspaces(spec["normals"], spec["offsets"])
    raise ValueError(f"unknown body kind {kind!r}")


# ---------------------------------------------------------------------------
# gauges / supports / membership


def gauge(K: ConvexBody, x) -> float:
    """Minkowski functional inf{t > 0 : x in tK}; +inf outside every dilate."""
    x = np.asarray(x, dtype=float)
    if K.kind == "ball":
        c, r = K.center, K.radius
        c2 = float(c @ c)
        if c2 > r * r + _GEOM_TOL:
            raise OriginNotContainedError("gauge needs the origin inside the body")
        xx = float(x @ x)
        if xx == 0.0:
            return 0.0
        xc = float(x @ c)
        a = r * r - c2
        if a <= _GEOM_TOL * r * r:          # origin on the boundary
            if xc <= 0.0:
                return math.inf
            return xx / (2.0 * xc)
        return (math.sqrt(xc * xc + a * xx) - xc) / a
    b = K.offsets
    if np.min(b) < -_GEOM_TOL:
        raise OriginNotContainedError("gauge needs the origin inside the body")
    ax = K.normals @ x
    pos = b > _GEOM_TOL
    if np.any(ax[~pos] > _GEOM_TOL):
        return math.inf
    if not np.any(pos):
        return math.inf
    return max(0.0, float(np.max(ax[pos] / b[pos])))


def gauge_many(K: ConvexBody, X) -> np.ndarray:
    """Vectorized gauge over rows of X (same conventions as gauge)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if K.kind == "ball":
        return np.array([gauge(K, x) for x in X])
    b = K.offsets
    if np.min(b) < -_GEOM_TOL:
        raise OriginNotContainedError("gauge needs the origin inside the body")
    AX = X @ K.normals.T
    pos = b > _GEOM_TOL
    out = np.zeros(len(X))
    if np.any(pos):
        out = np.max(AX[:, pos] / b[pos], axis=1)
    out = np.maximum(out, 0.0)
    if np.any(~pos):
        bad = np.any(AX[:, ~pos] > _GEOM_TOL, axis=1)
        out[bad] = np.inf
    return out


def support(K: ConvexBody, u) -> float:
    u = np.asarray(u, dtype=float)
    if K.kind == "ball":
        return float(K.center @ u) + K.radius * float(np.linalg.norm(u))
    return float(np.max(K.vertices @ u))


def radial(K: ConvexBody, x) -> float:
    """Radial function sup{t > 0 : t x in K}; origin must be interior."""
    if K.kind == "ball":
        if float(K.center @ K.center) >= K.radius ** 2 - _GEOM_TOL:
            raise OriginNotInteriorError("radial needs the origin in the interior")
    elif np.min(K.offsets) <= _GEOM_TOL:
        raise OriginNotInteriorError("radial needs the origin in the interior")
    g = gauge(K, x)
    if g == 0.0:
        return math.inf
    return 1.0 / g


def contains(K: ConvexBody, X, tol: float = _GEOM_TOL) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if K.kind == "ball":
        return np.linalg.norm(X - K.center, axis=1) <= K.radius + tol
    return np.all(X @ K.normals.T <= K.offsets + tol, axis=1)


def bounding_box(K: ConvexBody):
    if K.kind == "ball":
        return K.center - K.radius, K.center + K.radius
    return K.vertices.min(axis=0), K.vertices.max(axis=0)


# ---------------------------------------------------------------------------
# intersections of translates


def _stacked_translate_system(K: ConvexBody, xbar: np.ndarray):
    """Halfspace system of K cap (x_1 + K) cap ... cap (x_m + K)."""
    A = [K.normals]
    b = [K.offsets]
    for xi in xbar:
        A.append(K.normals)
        b.append(K.offsets + K.normals @ xi)
    return np.vstack(A), np.concatenate(b)


def intersect_translates(K: ConvexBody, xbar) -> ConvexBody | None:
    """K cap (x_1+K) cap ... cap (x_m+K); None when empty (margin 1e-10).

    Polytopes come back as a canonicalized stacked-halfspace body.  For a
    Euclidean ball in n >= 2 the intersection is not polyhedral; use
    covariogram helpers for its volume and miniball_radius for emptiness.
    """
    xbar = np.atleast_2d(np.asarray(xbar, dtype=float))
    if K.kind == "ball":
        raise ValueError("intersect_translates needs a polytope; "
                         "ball intersections are handled by the covariogram module")
    A, b = _stacked_translate_system(K, xbar)
    feasible, _ = lp_feasible_interior(A, b, margin=1e-10)
    if not feasible:
        return None
    try:
        return from_halfspaces(A, b)
    except DegenerateBodyError:
        return None          # sliver thinner than the vertex tolerance


def miniball_radius(points) -> float:
    """Radius of the smallest ball enclosing <= 4 points in dimension <= 3 (exact)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k, n = pts.shape
    best_r = math.inf
    for size in range(1, min(k, n + 1) + 1):
        for idx in itertools.combinations(range(k), size):
            sub = pts[list(idx)]
            if size == 1:
                c = sub[0]
            else:
                d = sub[1:] - sub[0]
                rhs = 0.5 * (np.sum(sub[1:] ** 2, axis=1) - np.sum(sub[0] ** 2))
                sol, *_ = np.linalg.lstsq(d, rhs - d @ sub[0], rcond=None)
                c = sub[0] + sol
                if np.max(np.abs(d @ (c - sub[0]) - (rhs - d @ sub[0]))) > 1e-8:
                    continue
            r = float(np.max(np.linalg.norm(pts[list(idx)] - c, axis=1)))
            if float(np.max(np.linalg.norm(pts - c, axis=1))) <= r + 1e-10 and r < best_r:
                best_r = r
    return best_r


# ---------------------------------------------------------------------------
# volume and facets


_UNIT_BALL_VOL = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


def volume(K: ConvexBody, seed: int = 0, samples: int | None = None) -> EstimateWithError:
    """vol_n(K): exact for n <= 2 and balls; seeded Monte Carlo for 3-D polytopes."""
    n = K.dim
    if K.kind == "ball":
        return EstimateWithError(_UNIT_BALL_VOL[n] * K.radius ** n, 0.0, 0)
    V = K.vertices
    if n == 1:
        return EstimateWithError(float(V.max() - V.min()), 0.0, 0)
    if n == 2:
        return EstimateWithError(polygon_area(V), 0.0, 0)
    lo, hi = bounding_box(K)
    box_vol = float(np.prod(hi - lo))
    N = samples or default_mc_samples(n)
    gen = make_rng(seed, _STREAM_VOLUME_MC)
    pts = lo + (hi - lo) * gen.random((N, n))
    hit = contains(K, pts, tol=1e-12)
    p = float(np.mean(hit))
    sigma = box_vol * math.sqrt(max(p * (1.0 - p), 0.0) / N)
    return EstimateWithError(box_vol * p, sigma, N)


def hull_order(points: np.ndarray) -> np.ndarray:
    """2-D points sorted counterclockwise about their centroid."""
    c = points.mean(axis=0)
    ang = np.arctan2(points[:, 1] - c[1], points[:, 0] - c[0])
    return points[np.argsort(ang, kind="stable")]


def polygon_area(points: np.ndarray) -> float:
    P = hull_order(points)
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def facets(K: ConvexBody, ball_nodes: int = 10_000) -> FacetData:
    """Outer normals with (n-1)-measures; balls get a sphere-quadrature surrogate."""
    n = K.dim
    if K.kind == "ball":
        dirs = sphere_sample(n, ball_nodes, seed=0, stream=_STREAM_BALL_FACETS)
        surface = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0) * K.radius ** (n - 1)
        w = np.full(len(dirs), surface / len(dirs))
        return FacetData(dirs, w, K.center + K.radius * dirs)
    V = K.vertices
    if n == 1:
        lo, hi = float(V.min()), float(V.max())
        return FacetData(np.array([[-1.0], [1.0]]), np.array([1.0, 1.0]),
                         np.array([[lo], [hi]]))
    scale_ = 1.0 + float(np.max(np.abs(V)))
    normals, areas, points = [], [], []
    for a, b in zip(K.normals, K.offsets):
        on = V[np.abs(V @ a - b) <= 1e-7 * scale_]
        if n == 2:
            if len(on) < 2:
                continue
            along = on @ _edge_dir(a)
            measure = float(np.linalg.norm(on[np.argmax(along)] - on[np.argmin(along)]))
        else:
            if len(on) < 3:
                continue
            measure = _facet_polygon_area(on, a)
        normals.append(a)
        areas.append(measure)
        points.append(on.mean(axis=0))
    return FacetData(np.array(normals), np.array(areas), np.array(points))


def _edge_dir(normal2d):
    return np.array([-normal2d[1], normal2d[0]])


def _facet_polygon_area(points3d, normal):
    # orthonormal basis of the facet plane, then a 2-D shoelace
    a = normal / np.linalg.norm(normal)
    t = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(a, t)
    u /= np.linalg.norm(u)
    v = np.cross(a, u)
    coords = np.column_stack([points3d @ u, points3d @ v])
    return polygon_area(coords)


def minkowski_sum(K: ConvexBody, L: ConvexBody) -> ConvexBody:
    """Exact Minkowski sum for polytopes in dimension <= 2 (hull of vertex sums)."""
    if K.kind != "polytope" or L.kind != "polytope":
        raise ValueError("minkowski_sum is polytope-only")
    if K.dim > 2:
        raise ValueError("exact Minkowski sum implemented for n <= 2")
    sums = (K.vertices[:, None, :] + L.vertices[None, :, :]).reshape(-1, K.dim)
    return from_vertices(sums)


def chebyshev_center(K: ConvexBody):
    if K.kind == "ball":
        return K.center.copy()
    m, n = K.normals.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    res = lp_maximize(c, np.hstack([K.normals, np.ones((m, 1))]), K.offsets)
    return res.x[:n]
