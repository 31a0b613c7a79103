"""Convex bodies, support functions, and John-type affine normalization.

A body is described by a base shape (ball, ellipsoid, halfspace polytope or
vertex polytope) plus an optional affine transform. The transform is baked
into shape parameters at construction, so every query below runs against a
closed-form "world" shape:

* support values / support points: closed forms for balls and ellipsoids,
  vertex maxima for polytopes. Halfspace polytopes get their vertex set once
  at construction (qhull halfspace intersection seeded by the Chebyshev
  center), which keeps support queries exact and vectorizable; a per-call
  LP would give the same values and survives in the test suite as an oracle.
* membership: halfspace checks, quadratic forms, or an LP feasibility test
  for vertex polytopes.
* ray extents: closed forms everywhere except vertex polytopes, which use a
  small LP.

`john_normalize` computes the minimum-volume enclosing ellipsoid of a
support-point sample by Khachiyan's barycentric-coordinate ascent and maps it
to the ball of radius d, so the normalized body sits between the unit ball
and B(0, d) up to a verified tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import HalfspaceIntersection

from .errors import FlatnessError, InputError, NormalizationError, UnboundedBodyError
from .util import as_vector, ball_volume, canonical_json, check_unit, normalize_rows, rng_for, sha256_hex

_EIG_TOL = 1e-12


@dataclass(frozen=True)
class AffineMap:
    """Nonsingular affine map z -> matrix @ z + shift."""

    matrix: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        sh = as_vector(self.shift, name="shift")
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] != sh.shape[0]:
            raise InputError(f"affine map shape mismatch: {mat.shape} vs {sh.shape}")
        scale = float(np.max(np.abs(mat))) or 1.0
        if abs(np.linalg.det(mat)) <= _EIG_TOL * scale ** mat.shape[0]:
            raise InputError("affine map must be nonsingular")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "shift", sh)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.matrix.T + self.shift

    def inverse(self):
        inv = np.linalg.inv(self.matrix)
        return AffineMap(inv, -inv @ self.shift)

    def compose(self, other: "AffineMap"):
        """Map equal to: first apply `other`, then self."""
        return AffineMap(self.matrix @ other.matrix, self.matrix @ other.shift + self.shift)

    @staticmethod
    def identity(dim):
        return AffineMap(np.eye(dim), np.zeros(dim))

    def to_dict(self):
        return {"matrix": self.matrix.tolist(), "shift": self.shift.tolist()}

    @staticmethod
    def from_dict(d):
        return AffineMap(np.asarray(d["matrix"], dtype=float), np.asarray(d["shift"], dtype=float))


class _Shape:
    """Interface shared by the four base shapes. All arrays are float64."""

    kind = "?"
    dim = 0

    def kink_directions(self):
        """Directions where the support function is not smooth.

        For polytopes the directional terms of the metric have square-root
        kinks exactly at the +-facet normals, so metric evaluators include
        them alongside any direction grid; smooth shapes return none.
        """
        return np.zeros((0, self.dim))

    def support(self, directions):
        raise NotImplementedError

    def support_points(self, directions):
        raise NotImplementedError

    def contains(self, points, tol):
        raise NotImplementedError

    def ray_extents(self, origin, dirs):
        """Largest t >= 0 with origin + t * dirs[i] in the shape, per row.

        dirs rows need not be unit vectors (baking an affine map produces
        non-unit ray directions); extents are in units of the given rows.
        """
        raise NotImplementedError

    def transformed(self, amap: AffineMap):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


class Ball(_Shape):
    kind = "ball"

    def __init__(self, center, radius):
        self.center = as_vector(center, name="center")
        self.radius = float(radius)
        self.dim = self.center.shape[0]
        if self.radius <= 0:
            raise FlatnessError("ball radius must be positive")

    def support(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        return d @ self.center + self.radius * np.linalg.norm(d, axis=1)

    def support_points(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        return self.center + self.radius * normalize_rows(d)

    def contains(self, points, tol):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius + tol

    def ray_extents(self, origin, dirs):
        return _quadratic_ray_extents(origin - self.center, dirs, np.eye(self.dim) / self.radius**2)

    def transformed(self, amap):
        # a general affine image of a ball is an ellipsoid
        axes = self.radius**2 * (amap.matrix @ amap.matrix.T)
        return Ellipsoid(amap.apply(self.center), axes)

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class Ellipsoid(_Shape):
    """{ z : (z - center)^T axes^{-1} (z - center) <= 1 }, axes SPD.

    The support value in direction xi is center.xi + sqrt(xi^T axes xi).
    """

    kind = "ellipsoid"

    def __init__(self, center, axes):
        self.center = as_vector(center, name="center")
        self.axes = np.asarray(axes, dtype=float)
        self.dim = self.center.shape[0]
        if self.axes.shape != (self.dim, self.dim):
            raise InputError("axes matrix has wrong shape")
        if not np.allclose(self.axes, self.axes.T, atol=1e-10 * max(1.0, np.abs(self.axes).max())):
            raise InputError("axes matrix must be symmetric")
        w, v = np.linalg.eigh(0.5 * (self.axes + self.axes.T))
        if w.min() <= _EIG_TOL * max(w.max(), 1.0):
            raise FlatnessError("axes matrix must be positive definite")
        self._eigvals = w
        self._eigvecs = v
        self._inv = v @ np.diag(1.0 / w) @ v.T
        self._min_semiaxis = float(np.sqrt(w.min()))

    def support(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        quad = np.einsum("ij,jk,ik->i", d, self.axes, d)
        return d @ self.center + np.sqrt(np.maximum(quad, 0.0))

    def support_points(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        quad = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", d, self.axes, d), 1e-300))
        return self.center + (d @ self.axes) / quad[:, None]

    def contains(self, points, tol):
        # gauge-based test; tol is converted through the smallest semiaxis so
        # that a ball recovers exact Euclidean dilation
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        gauge = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", pts, self._inv, pts), 0.0))
        return (gauge - 1.0) * self._min_semiaxis <= tol

    def ray_extents(self, origin, dirs):
        return _quadratic_ray_extents(origin - self.center, dirs, self._inv)

    def transformed(self, amap):
        return Ellipsoid(amap.apply(self.center), amap.matrix @ self.axes @ amap.matrix.T)

    def to_dict(self):
        return {"type": "ellipsoid", "center": self.center.tolist(), "axes": self.axes.tolist()}


def _quadratic_ray_extents(rel_origin, dirs, inv_form):
    """Solve (o + t u)^T Q (o + t u) = 1 for the positive root, per row of u."""
    u = np.atleast_2d(np.asarray(dirs, dtype=float))
    o = np.asarray(rel_origin, dtype=float)
    a = np.einsum("ij,jk,ik->i", u, inv_form, u)
    b = u @ (inv_form @ o)
    c = float(o @ inv_form @ o) - 1.0
    if c > 1e-9:
        raise InputError("ray origin lies outside the body")
    disc = np.maximum(b * b - a * np.minimum(c, 0.0), 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (-b + np.sqrt(disc)) / a
    return np.maximum(np.where(np.isfinite(t), t, 0.0), 0.0)


class VPolytope(_Shape):
    kind = "vpolytope"

    def __init__(self, vertices):
        self.vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
        self.dim = self.vertices.shape[1]
        if self.vertices.shape[0] < self.dim + 1:
            raise FlatnessError("vertex polytope needs at least dim+1 vertices")
        centered = self.vertices - self.vertices.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(self.vertices).max())) < self.dim:
            raise FlatnessError("vertex polytope is lower-dimensional")

    def support(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        return (d @ self.vertices.T).max(axis=1)

    def support_points(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        idx = np.argmax(d @ self.vertices.T, axis=1)
        return self.vertices[idx]

    def contains(self, points, tol):
        # LP feasibility: is `z` a convex combination of the vertices, up to a
        # sup-norm slack? Facet enumeration is deliberately avoided.
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        nv = self.vertices.shape[0]
        out = np.zeros(pts.shape[0], dtype=bool)
        for i, z in enumerate(pts):
            out[i] = self._residual(z) <= tol + 1e-12
        return out

    def _residual(self, z):
        nv, d = self.vertices.shape
        # minimize s  s.t.  -s <= (V^T lam - z)_i <= s,  sum lam = 1, lam >= 0
        c = np.zeros(nv + 1)
        c[-1] = 1.0
        a_ub = np.zeros((2 * d, nv + 1))
        a_ub[:d, :nv] = self.vertices.T
        a_ub[:d, -1] = -1.0
        a_ub[d:, :nv] = -self.vertices.T
        a_ub[d:, -1] = -1.0
        b_ub = np.concatenate([z, -z])
        a_eq = np.zeros((1, nv + 1))
        a_eq[0, :nv] = 1.0
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0, None)] * nv + [(0, None)], method="highs")
        if res.status != 0:
            raise InputError(f"membership LP failed with status {res.status}")
        return float(res.fun)

    def kink_directions(self):
        # edge normals; cheap to obtain in the plane, skipped in higher
        # dimensions where it would require facet enumeration
        if self.dim != 2:
            return np.zeros((0, self.dim))
        from scipy.spatial import ConvexHull

        hull = ConvexHull(self.vertices)
        verts = self.vertices[hull.vertices]
        edges = np.roll(verts, -1, axis=0) - verts
        normals = normalize_rows(np.column_stack([edges[:, 1], -edges[:, 0]]))
        return np.vstack([normals, -normals])

    def ray_extents(self, origin, dirs):
        # direct LP: maximize t subject to origin + t u in conv(vertices)
        u = np.atleast_2d(np.asarray(dirs, dtype=float))
        o = np.asarray(origin, dtype=float)
        nv, d = self.vertices.shape
        out = np.zeros(u.shape[0])
        for i, ui in enumerate(u):
            c = np.zeros(nv + 1)
            c[-1] = -1.0
            a_eq = np.zeros((d + 1, nv + 1))
            a_eq[:d, :nv] = self.vertices.T
            a_eq[:d, -1] = -ui
            a_eq[d, :nv] = 1.0
            b_eq = np.concatenate([o, [1.0]])
            res = linprog(c, A_eq=a_eq, b_eq=b_eq,
                          bounds=[(0, None)] * nv + [(0, None)], method="highs")
            if res.status != 0:
                raise InputError("ray origin lies outside the body")
            out[i] = res.x[-1]
        return out

    def transformed(self, amap):
        return VPolytope(amap.apply(self.vertices))

    def to_dict(self):
        return {"type": "vpolytope", "vertices": self.vertices.tolist()}


class HPolytope(_Shape):
    """Intersection of halfspaces a_i . x <= b_i with unit normals a_i."""

    kind = "hpolytope"

    def __init__(self, normals, offsets):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = as_vector(offsets, name="offsets")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms <= 0):
            raise InputError("halfspace normal of zero length")
        self.normals = normals / norms[:, None]
        self.offsets = offsets / norms
        self.dim = normals.shape[1]
        self._chebyshev()
        self._enumerate_vertices()

    def _chebyshev(self):
        m, d = self.normals.shape
        res = linprog(
            c=np.concatenate([np.zeros(d), [-1.0]]),
            A_ub=np.hstack([self.normals, np.ones((m, 1))]),
            b_ub=self.offsets,
            bounds=[(None, None)] * d + [(0, None)],
            method="highs",
        )
        if res.status == 3:
            raise UnboundedBodyError("halfspace polytope is unbounded")
        if res.status != 0 or res.x is None:
            raise FlatnessError("halfspace polytope is empty or degenerate")
        self.interior_point = res.x[:d]
        self.inradius = float(res.x[d])
        if self.inradius <= 1e-10:
            raise FlatnessError("halfspace polytope has empty interior")

    def _enumerate_vertices(self):
        hs = np.hstack([self.normals, -self.offsets[:, None]])
        try:
            inter = HalfspaceIntersection(hs, self.interior_point)
        except Exception as exc:  # qhull signals unboundedness this way too
            raise UnboundedBodyError(f"vertex enumeration failed: {exc}") from exc
        verts = inter.intersections
        if not np.all(np.isfinite(verts)):
            raise UnboundedBodyError("halfspace polytope is unbounded")
        scale = max(1.0, float(np.abs(verts).max()))
        _, idx = np.unique(np.round(verts / scale, 9), axis=0, return_index=True)
        self.vertices = verts[np.sort(idx)]

    def kink_directions(self):
        return np.vstack([self.normals, -self.normals])

    def support(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        return (d @ self.vertices.T).max(axis=1)

    def support_points(self, directions):
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        idx = np.argmax(d @ self.vertices.T, axis=1)
        return self.vertices[idx]

    def support_lp(self, xi):
        """Per-call LP support value; retained as a cross-check oracle."""
        res = linprog(c=-np.asarray(xi, dtype=float), A_ub=self.normals,
                      b_ub=self.offsets, bounds=[(None, None)] * self.dim, method="highs")
        if res.status == 3:
            raise UnboundedBodyError("halfspace polytope is unbounded")
        if res.status != 0:
            raise InputError(f"support LP failed with status {res.status}")
        return -float(res.fun)

    def contains(self, points, tol):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts @ self.normals.T - self.offsets).max(axis=1) <= tol

    def ray_extents(self, origin, dirs):
        u = np.atleast_2d(np.asarray(dirs, dtype=float))
        o = np.asarray(origin, dtype=float)
        slack = self.offsets - self.normals @ o
        if slack.min() < -1e-9:
            raise InputError("ray origin lies outside the body")
        rates = u @ self.normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            bounds = np.maximum(slack, 0.0)[None, :] / rates
        bounds = np.where(rates > 1e-300, bounds, np.inf)
        t = bounds.min(axis=1)
        if np.any(~np.isfinite(t)):
            raise UnboundedBodyError("ray never exits the polytope")
        return t

    def transformed(self, amap):
        inv = np.linalg.inv(amap.matrix)
        new_normals = self.normals @ inv  # rows a_i^T A^{-1}
        new_offsets = self.offsets + new_normals @ amap.shift
        return HPolytope(new_normals, new_offsets)

    def to_dict(self):
        return {
            "type": "hpolytope",
            "halfspaces": [
                {"normal": n.tolist(), "offset": float(b)}
                for n, b in zip(self.normals, self.offsets)
            ],
        }


def _shape_from_dict(d):
    kind = d.get("type")
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind == "ellipsoid":
        return Ellipsoid(d["center"], d["axes"])
    if kind == "vpolytope":
        return VPolytope(d["vertices"])
    if kind == "hpolytope":
        hs = d["halfspaces"]
        return HPolytope([h["normal"] for h in hs], [h["offset"] for h in hs])
    raise InputError(f"unknown shape type {kind!r}")


@dataclass(frozen=True)
class ConvexBody:
    """A convex body: base shape plus optional affine transform.

    The transform is folded into `world`, the shape every geometric query
    uses. The original pieces are kept for serialization.
    """

    dim: int
    shape: _Shape
    transform: AffineMap | None = None
    world: _Shape = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("dimension must be >= 1")
        if self.shape.dim != self.dim:
            raise InputError("shape dimension disagrees with body dimension")
        if self.transform is not None and self.transform.dim != self.dim:
            raise InputError("transform dimension disagrees with body dimension")
        world = self.shape if self.transform is None else self.shape.transformed(self.transform)
        object.__setattr__(self, "world", world)

    def to_dict(self):
        d = {"dim": self.dim, "shape": self.shape.to_dict()}
        if self.transform is not None:
            d["transform"] = self.transform.to_dict()
        return d

    @staticmethod
    def from_dict(d):
        try:
            dim = int(d["dim"])
            shape = _shape_from_dict(d["shape"])
            transform = AffineMap.from_dict(d["transform"]) if d.get("transform") else None
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed body specification: {exc}") from exc
        return ConvexBody(dim=dim, shape=shape, transform=transform)

    def fingerprint(self):
        """Stable hash of the canonical body specification."""
        return sha256_hex(canonical_json(self.to_dict()))


@dataclass(frozen=True)
class NormalizedBody:
    """A body together with the affine map that normalizes it.

    `body` is the already-transformed body; `inner_radius`/`outer_radius` are
    the measured support radii of `body` over a fresh direction sample.
    """

    body: ConvexBody
    to_normalized: AffineMap
    from_normalized: AffineMap
    inner_radius: float
    outer_radius: float

    @property
    def dim(self):
        return self.body.dim

    def to_dict(self):
        return {
            "body": self.body.to_dict(),
            "to_normalized": self.to_normalized.to_dict(),
            "from_normalized": self.from_normalized.to_dict(),
            "inner_radius": self.inner_radius,
            "outer_radius": self.outer_radius,
        }

    @staticmethod
    def from_dict(d):
        return NormalizedBody(
            body=ConvexBody.from_dict(d["body"]),
            to_normalized=AffineMap.from_dict(d["to_normalized"]),
            from_normalized=AffineMap.from_dict(d["from_normalized"]),
            inner_radius=float(d["inner_radius"]),
            outer_radius=float(d["outer_radius"]),
        )

    @staticmethod
    def wrap(body: ConvexBody, directions=None):
        """Identity-map wrapper with measured radii; used when the caller
        already works in a frame of their choosing (e.g. affine-transfer
        experiments on non-normalized bodies)."""
        if directions is None:
            directions = spread_directions(body.dim, 4096, seed=7)
        vals = body.world.support(directions)
        ident = AffineMap.identity(body.dim)
        return NormalizedBody(body, ident, ident, float(vals.min()), float(vals.max()))


# ---------------------------------------------------------------------------
# operations


def support_value(body: ConvexBody, xi):
    """Maximum of z . xi over the body; xi must be a unit vector."""
    xi = check_unit(as_vector(xi, body.dim, "direction"))
    return float(body.world.support(xi[None, :])[0])


def support_point(body: ConvexBody, xi):
    """A point of the body attaining support_value(body, xi)."""
    xi = check_unit(as_vector(xi, body.dim, "direction"))
    return body.world.support_points(xi[None, :])[0]


def contains(body: ConvexBody, z, tol=0.0):
    """Membership in the body dilated by tol."""
    if tol < 0:
        raise InputError("tolerance must be nonnegative")
    z = as_vector(z, body.dim, "point")
    return bool(body.world.contains(z[None, :], tol)[0])


def ray_extent(body: ConvexBody, origin, u):
    """max{t >= 0 : origin + t u in body} for an interior origin and unit u."""
    origin = as_vector(origin, body.dim, "origin")
    u = check_unit(as_vector(u, body.dim, "direction"))
    if not contains(body, origin, 0.0):
        raise InputError("ray origin must lie inside the body")
    return float(body.world.ray_extents(origin, u[None, :])[0])


def spread_directions(dim, count, seed=0):
    """Deterministic, reasonably uniform directions on S^{dim-1}.

    dim 2 uses the exact angular grid; higher dimensions use a seeded
    Gaussian sample augmented with the +-coordinate axes.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    rng = rng_for(seed, dim, count)
    pts = rng.standard_normal((max(count - 2 * dim, 0), dim))
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    return normalize_rows(np.vstack([axes, pts]))[:count]


def _khachiyan_mvee(points, tol, max_iter=200000):
    """Minimum-volume enclosing ellipsoid of a point cloud.

    Returns (center, shape) with E = {z : (z-c)^T shape^{-1} (z-c) <= 1}
    scaled so every input point lies inside. Stops when the barycentric
    optimality gap max_j M_j <= (1 + tol)(d + 1).
    """
    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    q = np.vstack([pts.T, np.ones(n)])
    u = np.full(n, 1.0 / n)
    target = (1.0 + tol) * (d + 1)
    for _ in range(max_iter):
        v = (q * u) @ q.T
        try:
            m = np.einsum("ij,ij->j", q, np.linalg.solve(v, q))
        except np.linalg.LinAlgError as exc:
            raise FlatnessError("support sample is degenerate (flat body)") from exc
        j = int(np.argmax(m))
        maximum = m[j]
        if maximum <= target:
            break
        step = (maximum - d - 1.0) / ((d + 1.0) * (maximum - 1.0))
        u *= 1.0 - step
        u[j] += step
    center = pts.T @ u
    cov = (pts.T * u) @ pts - np.outer(center, center)
    try:
        shape = np.linalg.inv(np.linalg.inv(cov) / d)
    except np.linalg.LinAlgError as exc:
        raise FlatnessError("support sample is degenerate (flat body)") from exc
    # inflate so the sample is enclosed exactly despite the finite tolerance
    rel = pts - center
    gauge = np.einsum("ij,jk,ik->i", rel, np.linalg.inv(shape), rel).max()
    return center, shape * max(gauge, 1.0)


def john_normalize(body: ConvexBody, num_support_samples=None, tol=1e-7, tau_norm=0.02):
    """Affine map T with B(0, 1) in T(body) in B(0, d), up to tau_norm.

    The Loewner ellipsoid of a support-point sample is computed by Khachiyan
    iteration and sent to B(0, d); John's 1/d shrinking property of the
    enclosing ellipsoid supplies the inner inclusion. Both inclusions are
    verified on a fresh direction sample and the measured radii are stored.
    """
    d = body.dim
    if num_support_samples is None:
        num_support_samples = max(2 * d * (d + 1), 128 * d)
    if num_support_samples < 2 * d * (d + 1):
        raise InputError("num_support_samples must be at least 2 d (d+1)")
    dirs = spread_directions(d, num_support_samples, seed=11)
    pts = body.world.support_points(dirs)
    center, shape = _khachiyan_mvee(pts, tol)
    w, v = np.linalg.eigh(shape)
    if w.min() <= _EIG_TOL * max(w.max(), 1.0):
        raise FlatnessError("enclosing ellipsoid is degenerate (flat body)")
    t_mat = d * (v @ np.diag(1.0 / np.sqrt(w)) @ v.T)
    to_norm = AffineMap(t_mat, -t_mat @ center)
    normalized = ConvexBody.from_dict(
        {"dim": d, "shape": body.world.to_dict(), "transform": to_norm.to_dict()}
    )
    check_dirs = spread_directions(d, max(4096 * d, 10000), seed=13)
    vals = normalized.world.support(check_dirs)
    inner, outer = float(vals.min()), float(vals.max())
    if inner < 1.0 - tau_norm or outer > d * (1.0 + tau_norm):
        raise NormalizationError(
            f"normalization certificate failed: inner={inner:.6f}, outer={outer:.6f}",
            inner_radius=inner,
            outer_radius=outer,
        )
    return NormalizedBody(
        body=normalized,
        to_normalized=to_norm,
        from_normalized=to_norm.inverse(),
        inner_radius=inner,
        outer_radius=outer,
    )


def sample_candidates(nb: NormalizedBody, pool_size, boundary_fraction, seed):
    """Deterministic candidate pool in the normalized body.

    floor(pool_size * boundary_fraction) points follow the boundary-clustered
    radial law r = cos(theta/2), theta ~ U[0, pi], along seeded uniform
    directions from the origin; the rest are uniform rejection samples from
    B(0, outer_radius) (radial fallback for vertex polytopes, whose
    membership test is an LP).
    """
    if pool_size < 1:
        raise InputError("pool_size must be >= 1")
    if not 0.0 <= boundary_fraction <= 1.0:
        raise InputError("boundary_fraction must lie in [0, 1]")
    d = nb.dim
    shape = nb.body.world
    rng = rng_for(seed, 0xB0D1)
    n_boundary = int(pool_size * boundary_fraction)
    n_interior = pool_size - n_boundary

    chunks = []
    if n_interior:
        if isinstance(shape, VPolytope):
            u = normalize_rows(rng.standard_normal((n_interior, d)))
            t = shape.ray_extents(np.zeros(d), u)
            r = rng.random(n_interior) ** (1.0 / d)
            chunks.append(r[:, None] * t[:, None] * u)
        else:
            kept = []
            need = n_interior
            while need > 0:
                batch = max(2 * need, 1024)
                z = rng.standard_normal((batch, d))
                z = normalize_rows(z) * nb.outer_radius * rng.random(batch)[:, None] ** (1.0 / d)
                ok = shape.contains(z, 0.0)
                z = z[ok][:need]
                kept.append(z)
                need -= z.shape[0]
            chunks.append(np.vstack(kept))
    if n_boundary:
        u = normalize_rows(rng.standard_normal((n_boundary, d)))
        t = shape.ray_extents(np.zeros(d), u)
        theta = rng.random(n_boundary) * np.pi
        r = np.cos(theta / 2.0)
        chunks.append(r[:, None] * t[:, None] * u)
    return np.vstack(chunks) if chunks else np.zeros((0, d))


def unit_ball_volume(nb: NormalizedBody):
    """Volume of the sampling region B(0, outer_radius)."""
    return ball_volume(nb.dim, nb.outer_radius)
