"""Polynomial machinery: expression trees, Chebyshev evaluation, random
ensembles, sup-norm estimation, resolving polynomials, and fast-decreasing
products.

Polynomials built here are expression trees rather than coefficient tables:
the localized products have structural degrees far beyond feasible dense
storage in several variables, while tree evaluation is linear in tree size
and numerically stable (Chebyshev recurrences are only ever applied to
arguments certified into [-1, 1] by construction).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .dubiner import MetricContext, rho_batch, rho_refined, rho_refined_with_direction, support_min
from .errors import DegreeBudgetError, InputError, RangeViolationError, SeparationError
from .geometry import NormalizedBody, sample_candidates
from .util import as_vector, golden_section_max, rng_for

_CHEB_CLAMP = 1e-9


def cheb_eval(m, t):
    """T_m(t), accurate to ~1e-13 for any m used here.

    On [-1, 1] (after absorbing up to 1e-12 of roundoff overshoot) the trig
    form cos(m arccos t) is used; genuine overshoot falls through to the
    hyperbolic branch, so the value is the honest polynomial everywhere. The
    naive three-term recurrence loses ~m^2 eps near the endpoints, which
    would break the m = 512 identity checks.
    """
    if m < 0:
        raise InputError("Chebyshev degree must be nonnegative")
    t = np.asarray(t, dtype=float)
    if m == 0:
        return np.ones_like(t) if t.shape else 1.0
    inside = np.abs(t) <= 1.0 + 1e-12
    out = np.empty_like(t)
    tc = np.clip(t, -1.0, 1.0)
    out[inside] = np.cos(m * np.arccos(tc[inside]))
    if not np.all(inside):
        far = ~inside
        out[far] = np.sign(t[far]) ** m * np.cosh(m * np.arccosh(np.abs(t[far])))
    return out if out.shape else float(out)


class PolyExpr:
    """Base node. Subclasses are immutable; `degree` is the structural total
    degree maintained by the constructors."""

    degree = 0

    def eval(self, points):
        """Evaluate on an (N, d) array (or a single point), returning (N,)."""
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        vals = self._eval(np.atleast_2d(pts))
        return float(vals[0]) if single else vals

    def _eval(self, pts):
        raise NotImplementedError

    def __call__(self, points):
        return self.eval(points)

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Affine(PolyExpr):
    coeffs: np.ndarray
    constant: float

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "degree", 1 if np.any(c != 0.0) else 0)

    def _eval(self, pts):
        return pts @ self.coeffs + self.constant

    def to_dict(self):
        return {"node": "affine", "coeffs": self.coeffs.tolist(), "constant": self.constant}


@dataclass(frozen=True)
class Cheb(PolyExpr):
    """T_m composed with a child certified to map the body into [-1, 1]."""

    m: int
    child: PolyExpr

    def __post_init__(self):
        if self.m < 0:
            raise InputError("Chebyshev degree must be nonnegative")
        object.__setattr__(self, "degree", self.m * self.child.degree)

    def _eval(self, pts):
        t = self.child._eval(pts)
        over = np.max(np.abs(t)) - 1.0 if t.size else 0.0
        if over > _CHEB_CLAMP:
            raise RangeViolationError(
                f"Chebyshev child exceeded [-1, 1] by {over:.3e}; range certificate broken"
            )
        return cheb_eval(self.m, np.clip(t, -1.0, 1.0))

    def to_dict(self):
        return {"node": "cheb", "m": self.m, "child": self.child.to_dict()}


@dataclass(frozen=True)
class Sum(PolyExpr):
    children: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.children) != len(self.weights):
            raise InputError("Sum needs one weight per child")
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        deg = max((c.degree for c in self.children), default=0)
        object.__setattr__(self, "degree", deg)

    def _eval(self, pts):
        out = np.zeros(pts.shape[0])
        for w, c in zip(self.weights, self.children):
            out += w * c._eval(pts)
        return out

    def to_dict(self):
        return {"node": "sum", "weights": list(self.weights),
                "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True)
class Product(PolyExpr):
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "degree", sum(c.degree for c in self.children))

    def _eval(self, pts):
        out = np.ones(pts.shape[0])
        for c in self.children:
            out *= c._eval(pts)
        return out

    def to_dict(self):
        return {"node": "product", "children": [c.to_dict() for c in self.children]}


@dataclass(frozen=True)
class Power(PolyExpr):
    child: PolyExpr
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InputError("Power exponent must be >= 1")
        object.__setattr__(self, "degree", self.k * self.child.degree)

    def _eval(self, pts):
        return self.child._eval(pts) ** self.k

    def to_dict(self):
        return {"node": "power", "k": self.k, "child": self.child.to_dict()}


@dataclass(frozen=True)
class Scale(PolyExpr):
    child: PolyExpr
    factor: float

    def __post_init__(self):
        object.__setattr__(self, "factor", float(self.factor))
        object.__setattr__(self, "degree", self.child.degree if self.factor != 0.0 else 0)

    def _eval(self, pts):
        return self.factor * self.child._eval(pts)

    def to_dict(self):
        return {"node": "scale", "factor": self.factor, "child": self.child.to_dict()}


@dataclass(frozen=True)
class Shift(PolyExpr):
    child: PolyExpr
    constant: float

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "degree", self.child.degree)

    def _eval(self, pts):
        return self.child._eval(pts) + self.constant

    def to_dict(self):
        return {"node": "shift", "constant": self.constant, "child": self.child.to_dict()}


def constant_poly(dim, value):
    return Affine(np.zeros(dim), value)


def poly_from_dict(d):
    node = d.get("node")
    if node == "affine":
        return Affine(np.asarray(d["coeffs"], dtype=float), d["constant"])
    if node == "cheb":
        return Cheb(int(d["m"]), poly_from_dict(d["child"]))
    if node == "sum":
        return Sum(tuple(poly_from_dict(c) for c in d["children"]), tuple(d["weights"]))
    if node == "product":
        return Product(tuple(poly_from_dict(c) for c in d["children"]))
    if node == "power":
        return Power(poly_from_dict(d["child"]), int(d["k"]))
    if node == "scale":
        return Scale(poly_from_dict(d["child"]), d["factor"])
    if node == "shift":
        return Shift(poly_from_dict(d["child"]), d["constant"])
    raise InputError(f"unknown polynomial node {node!r}")


def compose_affine(p: PolyExpr, matrix, shift):
    """p composed with z -> matrix @ z + shift, by rewriting affine leaves."""
    matrix = np.asarray(matrix, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if isinstance(p, Affine):
        return Affine(matrix.T @ p.coeffs, float(p.coeffs @ shift) + p.constant)
    if isinstance(p, Cheb):
        return Cheb(p.m, compose_affine(p.child, matrix, shift))
    if isinstance(p, Sum):
        return Sum(tuple(compose_affine(c, matrix, shift) for c in p.children), p.weights)
    if isinstance(p, Product):
        return Product(tuple(compose_affine(c, matrix, shift) for c in p.children))
    if isinstance(p, Power):
        return Power(compose_affine(p.child, matrix, shift), p.k)
    if isinstance(p, Scale):
        return Scale(compose_affine(p.child, matrix, shift), p.factor)
    if isinstance(p, Shift):
        return Shift(compose_affine(p.child, matrix, shift), p.constant)
    raise InputError("unknown polynomial node")


# ---------------------------------------------------------------------------
# dense tensor-Chebyshev polynomials


def total_degree_indices(dim, degree):
    """All multi-indices with |alpha| <= degree, in sorted (lexicographic) order."""
    idx = [a for a in itertools.product(range(degree + 1), repeat=dim) if sum(a) <= degree]
    idx.sort()
    return np.asarray(idx, dtype=np.int64)


@dataclass(frozen=True)
class DensePoly:
    """Coefficients over the tensor-Chebyshev basis restricted to total degree.

    Basis element for multi-index alpha: prod_i T_{alpha_i}(scale * z_i).
    The default scale 1/(2 dim) keeps arguments inside [-1, 1] for every
    point of a normalized body, including the relaxed enclosure B(0, 2d).
    """

    dim: int
    degree: int
    indices: np.ndarray
    values: np.ndarray
    scale: float

    def __post_init__(self):
        if self.indices.shape != (self.values.shape[0], self.dim):
            raise InputError("index/value shape mismatch")
        if np.any(self.indices.sum(axis=1) > self.degree):
            raise InputError("multi-index exceeds total degree")

    @property
    def coeffs(self):
        return {tuple(int(v) for v in a): float(c) for a, c in zip(self.indices, self.values)}

    def cheb_tables(self, pts):
        """Per-coordinate tables T_k(scale * z_i), shape (N, degree+1, dim)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n, d = pts.shape
        tab = np.empty((n, self.degree + 1, d))
        t = self.scale * pts
        tab[:, 0, :] = 1.0
        if self.degree >= 1:
            tab[:, 1, :] = t
        for k in range(2, self.degree + 1):
            tab[:, k, :] = 2.0 * t * tab[:, k - 1, :] - tab[:, k - 2, :]
        return tab

    def basis_matrix(self, pts):
        """Vandermonde-style matrix Phi with Phi[i, j] = basis_j(pts[i])."""
        tab = self.cheb_tables(pts)
        out = np.ones((tab.shape[0], self.indices.shape[0]))
        for axis in range(self.dim):
            out *= tab[:, self.indices[:, axis], axis]
        return out

    def eval(self, points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        vals = self.basis_matrix(np.atleast_2d(pts)) @ self.values
        return float(vals[0]) if single else vals

    __call__ = eval

    def to_expr(self):
        """Equivalent expression tree (used by the agreement audit)."""
        children, weights = [], []
        for alpha, c in zip(self.indices, self.values):
            factors = []
            for axis, k in enumerate(alpha):
                if k == 0:
                    continue
                e = np.zeros(self.dim)
                e[axis] = self.scale
                factors.append(Cheb(int(k), Affine(e, 0.0)))
            children.append(Product(tuple(factors)) if factors else constant_poly(self.dim, 1.0))
            weights.append(float(c))
        return Sum(tuple(children), tuple(weights))


def random_poly(dim, degree, seed):
    """Standard-normal coefficients over all multi-indices of total degree
    <= degree, deterministic under the seed."""
    if degree < 0:
        raise InputError("degree must be nonnegative")
    idx = total_degree_indices(dim, degree)
    rng = rng_for(seed, dim, degree, 0x9017)
    vals = rng.standard_normal(idx.shape[0])
    return DensePoly(dim=dim, degree=degree, indices=idx, values=vals, scale=1.0 / (2.0 * dim))


# ---------------------------------------------------------------------------
# sup-norm estimation


def _axis_segment(shape, z, axis, dim):
    e = np.zeros(dim)
    e[axis] = 1.0
    try:
        t_plus = float(shape.ray_extents(z, e[None, :])[0])
        t_minus = float(shape.ray_extents(z, -e[None, :])[0])
    except InputError:
        return None
    return -t_minus, t_plus, e


def sup_norm_estimate(p, nb: NormalizedBody, eval_pool_size=4096, seed=71, polish_top=16):
    """Lower bound of the sup norm over the body.

    Maximum of |p| over a boundary-clustered pool, polished by one pass of
    coordinate descent (golden-section along each axis, clipped to the body)
    from the best pool points.
    """
    if eval_pool_size < 10**3:
        raise InputError("eval_pool_size must be at least 1000")
    pool = sample_candidates(nb, eval_pool_size, 0.8, seed)
    vals = np.abs(p.eval(pool) if isinstance(p, PolyExpr) else p(pool))
    best = float(vals.max())
    shape = nb.body.world
    top = np.argsort(vals)[-polish_top:]
    for i in top:
        z = pool[i].copy()
        for axis in range(nb.dim):
            seg = _axis_segment(shape, z, axis, nb.dim)
            if seg is None:
                continue
            lo, hi, e = seg
            if hi - lo <= 1e-14:
                continue

            def along(t):
                return abs(float(p.eval(z + t * e) if isinstance(p, PolyExpr) else p(z + t * e)))

            t_best, v_best = golden_section_max(along, lo, hi, iters=40)
            if v_best > best:
                best = v_best
            z = z + t_best * e if v_best >= along(0.0) else z
    return best


# ---------------------------------------------------------------------------
# resolving polynomials


def _ordered_resolve(p_affine, p_zero, p_one):
    """Chebyshev composition sending the zero/one levels to cosine nodes.

    Requires p_zero < p_one. Returns (m, ell, u_affine) with
    u(zero) = cos((ell+1) pi / m) and u(one) = cos(ell pi / m).
    """
    theta1 = math.acos(p_zero)
    theta2 = math.acos(p_one)
    gap = theta1 - theta2
    m = max(3, int(math.floor(2.0 * math.pi / gap)) + 1)
    ell = int(math.floor(theta2 * m / math.pi)) + 1
    ell = min(max(ell, 1), m - 1)
    hi_node = math.cos(ell * math.pi / m)
    lo_node = math.cos((ell + 1) * math.pi / m)
    slope = (hi_node - lo_node) / (p_one - p_zero)
    intercept = lo_node - slope * p_zero
    u = Affine(slope * p_affine.coeffs, slope * p_affine.constant + intercept)
    return m, ell, u


def resolving_poly(ctx: MetricContext, x, y, n):
    """Degree-<=n polynomial with P(y) = 1, P(x) = 0 and 0 <= P <= 1 on the body.

    The separating direction is the computed metric argmax, so the distance
    requirement rho(x, y) >= 2 pi sqrt(2d) / (n - 1) is used at full strength.
    """
    x = as_vector(x, ctx.dim, "x")
    y = as_vector(y, ctx.dim, "y")
    d = ctx.dim
    rho_hat, xi = rho_refined_with_direction(ctx, x, y)
    threshold = 2.0 * math.pi * math.sqrt(2.0 * d)
    if n < 2 or rho_hat * (n - 1) < threshold:
        min_n = int(math.ceil(threshold / rho_hat)) + 1 if rho_hat > 0 else None
        raise SeparationError(
            f"points too close for degree {n}; minimum usable degree is {min_n}",
            min_degree=min_n,
        )
    shape = ctx.shape
    b = float(shape.support(xi[None, :])[0])
    a = float(support_min(shape, xi[None, :])[0])
    width = b - a
    p = Affine(2.0 * xi / width, -(a + b) / width)
    px = min(max(float(p.eval(x)), -1.0), 1.0)
    py = min(max(float(p.eval(y)), -1.0), 1.0)
    if px == py:
        raise SeparationError("points are indistinguishable along the separating direction")
    if px < py:
        m, ell, u = _ordered_resolve(p, px, py)
        sign = 1.0 if ell % 2 == 0 else -1.0
    else:
        # mirrored branch: construct with the roles exchanged, then complement
        m, ell, u = _ordered_resolve(p, py, px)
        sign = -1.0 if ell % 2 == 0 else 1.0
    return Shift(Scale(Cheb(m, u), 0.5 * sign), 0.5)


# ---------------------------------------------------------------------------
# fast-decreasing products


def _greedy_separated(ctx, members, sep, dir_stride=16, max_members=2048):
    """Greedy maximal sep-separated subset of `members`, yielded lazily.

    Row-order scan: a member joins when its distance to everything already
    chosen is at least sep. Yielding lets the caller abort (budget burst)
    before the full separation sweep is paid for.
    """
    if members.shape[0] == 0:
        return
    if members.shape[0] > max_members:
        stride = int(math.ceil(members.shape[0] / max_members))
        members = members[::stride]
    dmin = np.full(members.shape[0], np.inf)
    for i in range(members.shape[0]):
        if dmin[i] >= sep:
            yield members[i]
            dist = rho_batch(ctx, members[i][None, :], members,
                             dir_stride=dir_stride, rounds=1)
            dmin = np.minimum(dmin, dist)


def fast_decreasing_poly(ctx: MetricContext, x, n, alpha=0.5, L=4.0,
                         pool=None, pool_size=20000, pool_seed=20250101,
                         pool_dist=None):
    """Product of resolving polynomials peaked at x and decaying in the metric.

    Annuli around x at radii 4^j / n1 (n1 = n / L) are each covered by a
    greedy separated set; every covering point contributes a resolving factor
    equal to 1 at x, raised to the 2^j annulus weight. For n <= L the trivial
    constant 1 satisfies the decay statement and is returned directly. When
    the structural degree of the full product would exceed n, the budget
    error carries the achieved degree so callers can raise L (or accept a
    trivial witness).
    """
    x = as_vector(x, ctx.dim, "x")
    if n < 2:
        raise InputError("degree must be at least 2")
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    if L < 1.0:
        raise InputError("L must be at least 1")
    ctx._check_inside(x)
    d = ctx.dim
    if n <= L:
        return constant_poly(d, 1.0)
    n1 = n / L
    num_annuli = max(1, int(math.floor(math.log(math.sqrt(2.0 * d) * n1, 4.0))) + 1)
    if pool is None:
        pool = sample_candidates(ctx.body, pool_size, 0.5, pool_seed)
    dist = rho_batch(ctx, x[None, :], pool) if pool_dist is None else pool_dist

    # every populated annulus forces at least one factor of degree >= 3 at
    # its 2^j weight; refuse early when even that floor bursts the budget
    floor = sum(3 * 2**j for j in range(1, num_annuli + 1)
                if np.any((dist > 4.0 ** (j - 1) / n1) & (dist <= 4.0**j / n1)))
    if floor > n:
        raise DegreeBudgetError(
            f"fast-decreasing product needs degree >= {floor} > budget {n}; raise L",
            achieved_degree=floor,
            budget=n,
        )

    factors = []
    total_degree = 0
    for j in range(1, num_annuli + 1):
        r_hi = 4.0**j / n1
        r_lo = 4.0 ** (j - 1) / n1
        members = pool[(dist > r_lo) & (dist <= r_hi)]
        sep = alpha * 4.0 ** (j - 1) / n1
        weight = 2**j
        for omega in _greedy_separated(ctx, members, sep):
            rho_xo = rho_refined(ctx, x, omega, validate=False)
            if rho_xo <= 0:
                continue
            budget = max(3, int(math.ceil(11.0 * math.sqrt(d) / rho_xo)))
            factor = resolving_poly(ctx, omega, x, budget)
            factors.append((factor, weight))
            total_degree += weight * factor.degree
            if total_degree > n:
                raise DegreeBudgetError(
                    f"fast-decreasing product needs degree > {total_degree} > budget {n}; raise L",
                    achieved_degree=total_degree,
                    budget=n,
                )
    if not factors:
        return constant_poly(d, 1.0)
    return Product(tuple(Power(f, w) if w > 1 else f for f, w in factors))


def fit_decay_rate(p, ctx: MetricContext, x, n, samples=10000, seed=3, threshold=None):
    """Largest c with log P(z) <= -c sqrt(n rho(x, z)) over a fresh sample.

    Only samples with rho >= threshold participate; the default 4/n matches
    the unresolved core of the product at the reference L = 4 (pass L/n when
    the construction used a larger L). Returns (c_hat, max sampled P).
    """
    x = as_vector(x, ctx.dim, "x")
    if threshold is None:
        threshold = 4.0 / n
    pts = sample_candidates(ctx.body, samples, 0.5, seed)
    dist = rho_batch(ctx, x[None, :], pts)
    vals = p.eval(pts)
    far = dist >= threshold
    if not np.any(far):
        return 0.0, float(vals.max(initial=0.0))
    pv = np.clip(vals[far], 1e-300, None)
    rate = -np.log(pv) / np.sqrt(n * dist[far])
    return float(rate.min()), float(vals.max())


# ---------------------------------------------------------------------------
# one-dimensional Bernstein bound along segments


def bernstein_segment_bound(p, a, b, samples=512, body=None):
    """Certified bound on |d/dt p(mid + t (b-a)/2)| at the segment midpoint.

    The segment sup norm is sampled on Chebyshev nodes and inflated by the
    classical 1/cos factor, which upgrades the sample maximum to a true upper
    bound of the segment norm; the variation bound for the degree then gives
    the derivative estimate in the normalized parameter t in [-1, 1].
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if body is not None:
        inside = body.world.contains(np.vstack([a, b]), 1e-9)
        if not bool(inside.all()):
            raise InputError("segment endpoints must lie inside the body")
    deg = p.degree
    if deg == 0:
        return 0.0
    if samples <= 2 * deg:
        raise InputError("need more than 2 * degree sample nodes")
    k = np.arange(samples)
    t = np.cos((2.0 * k + 1.0) * math.pi / (2.0 * samples))
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid + t[:, None] * half
    vals = np.abs(p.eval(pts) if isinstance(p, PolyExpr) else p(pts))
    inflation = 1.0 / math.cos(deg * math.pi / (2.0 * samples))
    return deg * float(vals.max()) * inflation
