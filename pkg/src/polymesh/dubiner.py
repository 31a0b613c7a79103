"""Dubiner-type metric on a convex body, evaluated over finite direction sets.

For a body O with support minima a_xi = min_{z in O} z . xi, the metric is

    rho(x, y) = sup over unit xi of | sqrt(x.xi - a_xi) - sqrt(y.xi - a_xi) |.

The supremum has no closed form for general bodies, so it is approximated
from below by a finite maximum over a stored direction set, augmented with
the chord direction of each pair and a deterministic local refinement around
the incumbent best direction. Every value produced here is a certified lower
bound of the true metric; consumers that need upper bounds (covering
certificates) carry the measured direction-discretization slack tau_dir.

The module also hosts the Monte-Carlo doubling check for metric balls and the
scalar strip-shrinking inequality that drives it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .geometry import ConvexBody, NormalizedBody, spread_directions
from .util import as_vector, ball_volume, check_unit, normalize_rows, power_iteration_opnorm, rng_for

DEFAULT_REFINEMENT_ROUNDS = 6
DEFAULT_REFINEMENT_FACTOR = 0.5


def angular_grid(count):
    ang = 2.0 * np.pi * np.arange(count) / count
    return np.column_stack([np.cos(ang), np.sin(ang)])


def fibonacci_sphere(count):
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    golden = math.pi * (3.0 - math.sqrt(5.0))
    theta = golden * i
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


@dataclass(frozen=True)
class DirectionSet:
    """Finite subset of the unit sphere, reconstructible from its metadata."""

    dim: int
    directions: np.ndarray
    generator: str
    count: int
    seed: int = 0
    refinement_rounds: int = DEFAULT_REFINEMENT_ROUNDS
    refinement_factor: float = DEFAULT_REFINEMENT_FACTOR

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (self.count, self.dim):
            raise InputError("direction array shape disagrees with metadata")
        norms = np.linalg.norm(d, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise InputError("directions must be unit vectors")
        if not 0.0 < self.refinement_factor < 1.0:
            raise InputError("refinement_factor must lie in (0, 1)")
        if self.refinement_rounds < 0:
            raise InputError("refinement_rounds must be >= 0")
        object.__setattr__(self, "directions", d)

    @property
    def cap0(self):
        """Initial spherical-cap radius for refinement probes (the covering
        radius scale of the generator)."""
        if self.dim == 2:
            return math.pi / self.count
        return math.pi * self.count ** (-1.0 / (self.dim - 1))

    @staticmethod
    def angular(count, rounds=DEFAULT_REFINEMENT_ROUNDS, factor=DEFAULT_REFINEMENT_FACTOR):
        return DirectionSet(2, angular_grid(count), "angular-grid", count,
                            refinement_rounds=rounds, refinement_factor=factor)

    @staticmethod
    def fibonacci(count, rounds=DEFAULT_REFINEMENT_ROUNDS, factor=DEFAULT_REFINEMENT_FACTOR):
        return DirectionSet(3, fibonacci_sphere(count), "fibonacci-sphere", count,
                            refinement_rounds=rounds, refinement_factor=factor)

    @staticmethod
    def random(dim, count, seed, rounds=DEFAULT_REFINEMENT_ROUNDS, factor=DEFAULT_REFINEMENT_FACTOR):
        if dim < 2:
            raise InputError("random direction sets need dim >= 2")
        rng = rng_for(seed, dim, count, 0xD14)
        return DirectionSet(dim, normalize_rows(rng.standard_normal((count, dim))),
                            "random-uniform", count, seed=seed,
                            refinement_rounds=rounds, refinement_factor=factor)

    @staticmethod
    def default_for(dim):
        if dim == 2:
            return DirectionSet.angular(4096)
        if dim == 3:
            return DirectionSet.fibonacci(8192)
        rng = rng_for(0, dim, 4096 * dim, 0xD14)
        return DirectionSet(dim, normalize_rows(rng.standard_normal((4096 * dim, dim))),
                            "random-uniform", 4096 * dim, seed=0)


@dataclass(frozen=True)
class MetricContext:
    """Immutable bundle: normalized body, direction set, warm support cache.

    extra_dirs are the body's support-kink directions (facet normals for
    polytopes); they participate in every finite max regardless of direction
    striding, since grids undersample the square-root kinks there.
    """

    body: NormalizedBody
    base_directions: DirectionSet
    support_a: np.ndarray
    support_b: np.ndarray
    extra_dirs: np.ndarray
    extra_a: np.ndarray
    include_chord: bool = True
    tau_dir: float | None = None

    @staticmethod
    def create(nb: NormalizedBody, directions: DirectionSet | None = None, include_chord=True):
        if directions is None:
            directions = DirectionSet.default_for(nb.dim)
        if directions.dim != nb.dim:
            raise InputError("direction set dimension disagrees with body")
        shape = nb.body.world
        d = directions.directions
        b = shape.support(d)
        a = -shape.support(-d)
        extra = shape.kink_directions()
        extra_a = -shape.support(-extra) if extra.shape[0] else np.zeros(0)
        return MetricContext(nb, directions, a, b, extra, extra_a, include_chord)

    @property
    def dim(self):
        return self.body.dim

    @property
    def shape(self):
        return self.body.body.world

    def with_tau_dir(self, tau):
        return MetricContext(self.body, self.base_directions, self.support_a,
                             self.support_b, self.extra_dirs, self.extra_a,
                             self.include_chord, float(tau))

    def strided_directions(self, stride):
        """Strided base directions with the kink set appended."""
        d = self.base_directions.directions[::stride]
        a = self.support_a[::stride]
        if self.extra_dirs.shape[0]:
            d = np.vstack([d, self.extra_dirs])
            a = np.concatenate([a, self.extra_a])
        return d, a

    def _check_inside(self, *points):
        shape = self.shape
        for p in points:
            if not bool(shape.contains(np.asarray(p, float)[None, :], 1e-9)[0]):
                raise InputError("point lies outside the body beyond tolerance")


def support_min(shape, directions):
    """a_xi = min over the body of z . xi, for each direction row."""
    return -shape.support(-np.atleast_2d(directions))


def rho_directional(ctx: MetricContext, x, y, xi):
    """Single-direction term of the metric, with roundoff clamped at zero."""
    x = as_vector(x, ctx.dim, "x")
    y = as_vector(y, ctx.dim, "y")
    xi = check_unit(as_vector(xi, ctx.dim, "xi"))
    ctx._check_inside(x, y)
    a = float(support_min(ctx.shape, xi[None, :])[0])
    sx = math.sqrt(max(float(x @ xi) - a, 0.0))
    sy = math.sqrt(max(float(y @ xi) - a, 0.0))
    return abs(sx - sy)


def _chord_terms(shape, X, Y):
    """Directional terms for the +-chord directions of each row pair.

    Returns (values, dirs): the better of the two chord signs per row.
    Rows with coincident points contribute zero and a placeholder direction.
    """
    diff = Y - X
    nrm = np.linalg.norm(diff, axis=1)
    ok = nrm > 0
    dirs = np.zeros_like(diff)
    dirs[ok] = diff[ok] / nrm[ok, None]
    vals = np.zeros(X.shape[0])
    best_dirs = dirs.copy()
    if np.any(ok):
        for sign in (1.0, -1.0):
            dd = sign * dirs[ok]
            a = support_min(shape, dd)
            sx = np.sqrt(np.maximum(np.einsum("ij,ij->i", X[ok], dd) - a, 0.0))
            sy = np.sqrt(np.maximum(np.einsum("ij,ij->i", Y[ok], dd) - a, 0.0))
            term = np.abs(sx - sy)
            sel = np.zeros(X.shape[0])
            sel[ok] = term
            better = sel > vals
            vals = np.where(better, sel, vals)
            upd = better & ok
            best_dirs[upd] = sign * dirs[upd]
    return vals, best_dirs


def _probe_directions(v, axis, cap):
    """Rotate incumbent directions v toward +-e_axis by angle cap, per row."""
    e = np.zeros(v.shape[1])
    e[axis] = 1.0
    t = e[None, :] - (v @ e)[:, None] * v
    tn = np.linalg.norm(t, axis=1)
    usable = tn > 1e-12
    t[usable] = t[usable] / tn[usable, None]
    plus = math.cos(cap) * v + math.sin(cap) * t
    minus = math.cos(cap) * v - math.sin(cap) * t
    return normalize_rows(plus), normalize_rows(minus), usable


def _refine(shape, X, Y, best, dirs, rounds, cap0, factor):
    """Local search around per-row incumbent directions; 2d probes per round."""
    d = X.shape[1]
    for r in range(rounds):
        cap = cap0 * factor**r
        for axis in range(d):
            plus, minus, usable = _probe_directions(dirs, axis, cap)
            if not np.any(usable):
                continue
            for cand in (plus, minus):
                a = support_min(shape, cand)
                sx = np.sqrt(np.maximum(np.einsum("ij,ij->i", X, cand) - a, 0.0))
                sy = np.sqrt(np.maximum(np.einsum("ij,ij->i", Y, cand) - a, 0.0))
                term = np.where(usable, np.abs(sx - sy), -1.0)
                better = term > best
                if np.any(better):
                    best = np.where(better, term, best)
                    dirs[better] = cand[better]
    return best, dirs


def rho_batch(ctx: MetricContext, X, Y, rounds=None, dir_stride=1, dtype=np.float64,
              chunk_rows=8192, chunk_dirs=1024, want_dirs=False):
    """Lower-bound metric values for row-aligned point arrays X, Y.

    X may have a single row, in which case it is broadcast against Y. The
    result is independent of chunk sizes; dir_stride subsamples the base
    direction set (construction loops use a coarser stride and recover
    accuracy through the chord term and refinement).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] == 1 and Y.shape[0] > 1:
        X = np.broadcast_to(X, Y.shape)
    if X.shape != Y.shape:
        raise InputError("point arrays must align")
    n = X.shape[0]
    if rounds is None:
        rounds = ctx.base_directions.refinement_rounds
    shape = ctx.shape
    dmat64, avals64 = ctx.strided_directions(dir_stride)
    dmat = dmat64.astype(dtype)
    avals = avals64.astype(dtype)
    m = dmat.shape[0]

    best = np.zeros(n)
    arg = np.zeros(n, dtype=np.int64)
    for lo in range(0, n, chunk_rows):
        hi = min(lo + chunk_rows, n)
        xb = X[lo:hi].astype(dtype)
        yb = Y[lo:hi].astype(dtype)
        row_best = np.zeros(hi - lo, dtype=dtype)
        row_arg = np.zeros(hi - lo, dtype=np.int64)
        for dlo in range(0, m, chunk_dirs):
            dhi = min(dlo + chunk_dirs, m)
            dd = dmat[dlo:dhi]
            aa = avals[dlo:dhi]
            sx = np.sqrt(np.maximum(xb @ dd.T - aa, 0.0))
            sy = np.sqrt(np.maximum(yb @ dd.T - aa, 0.0))
            np.abs(sx - sy, out=sx)
            loc = np.argmax(sx, axis=1)
            val = sx[np.arange(sx.shape[0]), loc]
            better = val > row_best
            row_best = np.where(better, val, row_best)
            row_arg = np.where(better, loc + dlo, row_arg)
        best[lo:hi] = row_best
        arg[lo:hi] = row_arg

    dirs = dmat[arg].astype(float)  # per-row incumbent directions
    if ctx.include_chord:
        cvals, cdirs = _chord_terms(shape, X, Y)
        better = cvals > best
        best = np.where(better, cvals, best)
        dirs[better] = cdirs[better]
    if rounds > 0:
        cap0 = ctx.base_directions.cap0 * dir_stride
        best, dirs = _refine(shape, X, Y, best, dirs, rounds, cap0,
                             ctx.base_directions.refinement_factor)
    if want_dirs:
        return best, dirs
    return best


def rho_lower(ctx: MetricContext, x, y, validate=True):
    """Finite max over base directions plus the pair's chord directions."""
    x = as_vector(x, ctx.dim, "x")
    y = as_vector(y, ctx.dim, "y")
    if validate:
        ctx._check_inside(x, y)
    return float(rho_batch(ctx, x[None, :], y[None, :], rounds=0)[0])


def rho_refined(ctx: MetricContext, x, y, rounds=None, validate=True):
    """rho_lower tightened by multi-start local search over the sphere."""
    val, _ = rho_refined_with_direction(ctx, x, y, rounds=rounds, validate=validate)
    return val


def rho_refined_with_direction(ctx: MetricContext, x, y, rounds=None, validate=True, starts=3):
    """As rho_refined, also returning the direction attaining the value."""
    x = as_vector(x, ctx.dim, "x")
    y = as_vector(y, ctx.dim, "y")
    if validate:
        ctx._check_inside(x, y)
    if rounds is None:
        rounds = ctx.base_directions.refinement_rounds
    shape = ctx.shape
    dmat, avals = ctx.strided_directions(1)
    sx = np.sqrt(np.maximum(dmat @ x - avals, 0.0))
    sy = np.sqrt(np.maximum(dmat @ y - avals, 0.0))
    terms = np.abs(sx - sy)
    k = min(max(int(starts), 1), terms.shape[0])
    top = np.argpartition(terms, -k)[-k:]
    start_dirs = [dmat[i] for i in top]
    start_vals = [float(terms[i]) for i in top]
    if ctx.include_chord:
        cvals, cdirs = _chord_terms(shape, x[None, :], y[None, :])
        if float(cvals[0]) > 0.0:
            start_dirs.append(cdirs[0])
            start_vals.append(float(cvals[0]))
    v0 = np.asarray(start_dirs)
    b0 = np.asarray(start_vals)
    if rounds > 0:
        xs = np.broadcast_to(x, v0.shape).copy()
        ys = np.broadcast_to(y, v0.shape).copy()
        b0, v0 = _refine(shape, xs, ys, b0.copy(), v0.copy(), rounds,
                         ctx.base_directions.cap0, ctx.base_directions.refinement_factor)
    i = int(np.argmax(b0))
    return float(b0[i]), v0[i]


def rho_brute_force(ctx: MetricContext, x, y, num_directions=2**20):
    """Dense angular-grid evaluation (d = 2 only); the oracle for tau_dir.

    The body's kink directions join the grid: at a support kink the
    directional term approaches its maximum with infinite slope, which no
    grid resolves, so the honest oracle samples those directions exactly.
    """
    if ctx.dim != 2:
        raise InputError("brute-force grid oracle is only available in dimension 2")
    x = as_vector(x, 2, "x")
    y = as_vector(y, 2, "y")
    shape = ctx.shape
    best = 0.0
    chunk = 1 << 16
    for lo in range(0, num_directions, chunk):
        hi = min(lo + chunk, num_directions)
        ang = 2.0 * np.pi * np.arange(lo, hi) / num_directions
        dd = np.column_stack([np.cos(ang), np.sin(ang)])
        a = support_min(shape, dd)
        sx = np.sqrt(np.maximum(dd @ x - a, 0.0))
        sy = np.sqrt(np.maximum(dd @ y - a, 0.0))
        best = max(best, float(np.abs(sx - sy).max()))
    if ctx.extra_dirs.shape[0]:
        sx = np.sqrt(np.maximum(ctx.extra_dirs @ x - ctx.extra_a, 0.0))
        sy = np.sqrt(np.maximum(ctx.extra_dirs @ y - ctx.extra_a, 0.0))
        best = max(best, float(np.abs(sx - sy).max()))
    return best


def estimate_tau_dir(ctx: MetricContext, n_pairs=64, seed=101, brute_directions=2**20,
                     dir_stride=1, rounds=None):
    """Measured relative slack of the approximate metric against a dense oracle.

    dir_stride / rounds select which approximation is being audited (pass the
    mesh-construction settings to measure the slack its covering claims
    carry). In dimension 2 the oracle is the 2^20-direction angular grid; in
    higher dimensions it is the same machinery on an 8x denser random set,
    which is a heuristic rather than a certificate and is reported as such.
    """
    from .geometry import sample_candidates

    pool = sample_candidates(ctx.body, 2 * n_pairs, 0.6, seed)
    X, Y = pool[:n_pairs], pool[n_pairs:]
    approx = rho_batch(ctx, X, Y, rounds=rounds, dir_stride=dir_stride)
    worst = 0.0
    if ctx.dim == 2:
        for x, y, ap in zip(X, Y, approx):
            if ap <= 0:
                continue
            brute = rho_brute_force(ctx, x, y, brute_directions)
            worst = max(worst, (brute - ap) / ap)
    else:
        dense = DirectionSet.random(ctx.dim, 8 * ctx.base_directions.count, seed=17)
        dense_ctx = MetricContext.create(ctx.body, dense, include_chord=ctx.include_chord)
        ref = rho_batch(dense_ctx, X, Y)
        for ap, rv in zip(approx, ref):
            if ap > 0:
                worst = max(worst, (rv - ap) / ap)
    return float(max(worst, 0.0))


@dataclass(frozen=True)
class RhoBallSample:
    """Monte-Carlo view of a metric ball B_rho(center, radius_h)."""

    center: np.ndarray
    radius_h: float
    hits: np.ndarray
    volume_estimate: float
    stderr: float
    n_pool: int = 0


def rho_ball_membership(ctx: MetricContext, center, h, pool, reference_volume=None):
    """Classify pool points into B_rho(center, h).

    volume_estimate scales the hit fraction by reference_volume, which
    defaults to the volume of the sampling ball B(0, outer_radius); it is
    meaningful only for uniform pools drawn from that region.
    """
    if h <= 0:
        raise InputError("radius h must be positive")
    center = as_vector(center, ctx.dim, "center")
    pool = np.atleast_2d(np.asarray(pool, dtype=float))
    if reference_volume is None:
        reference_volume = ball_volume(ctx.dim, ctx.body.outer_radius)
    inside = ctx.shape.contains(pool, 1e-9)
    vals = np.full(pool.shape[0], np.inf)
    if np.any(inside):
        vals[inside] = rho_batch(ctx, center[None, :], pool[inside], dtype=np.float32)
    mask = vals <= h
    frac = float(mask.mean()) if pool.shape[0] else 0.0
    stderr = math.sqrt(max(frac * (1.0 - frac), 0.0) / max(pool.shape[0], 1)) * reference_volume
    return RhoBallSample(center=center, radius_h=float(h), hits=pool[mask],
                         volume_estimate=frac * reference_volume, stderr=stderr,
                         n_pool=pool.shape[0])


def _uniform_ball_sample(ctx, samples, seed):
    rng = rng_for(seed, 0xD0B)
    d = ctx.dim
    z = rng.standard_normal((samples, d))
    r = rng.random(samples) ** (1.0 / d)
    return normalize_rows(z) * (ctx.body.outer_radius * r)[:, None]


def doubling_ratio(ctx: MetricContext, center, h, samples, seed):
    """Monte-Carlo volume ratio of B_rho(center, 2h) to B_rho(center, h).

    One shared uniform sample feeds both radii, so the same approximate
    metric classifies numerator and denominator consistently and most of the
    sampling noise cancels in the ratio.
    """
    if samples < 10**4:
        raise InputError("doubling checks need at least 10^4 samples")
    row = doubling_scan(ctx, [center], [h], samples, seed)[0]
    return row[2], row[3]


def doubling_scan(ctx: MetricContext, centers, h_values, samples, seed):
    """doubling_ratio over a grid of centers and radii with one shared sample.

    Returns a list of (center_index, h, ratio, stderr) aligned with the
    cartesian product centers x h_values.
    """
    if min(h_values) <= 0:
        raise InputError("radius h must be positive")
    pool = _uniform_ball_sample(ctx, samples, seed)
    inside = ctx.shape.contains(pool, 0.0)
    pool = pool[inside]
    out = []
    for ci, center in enumerate(centers):
        c = as_vector(center, ctx.dim, "center")
        vals = rho_batch(ctx, c[None, :], pool, dtype=np.float32)
        for h in h_values:
            n_h = int(np.count_nonzero(vals <= h))
            n_2h = int(np.count_nonzero(vals <= 2.0 * h))
            if n_h == 0:
                raise InputError("h too small for the sample density")
            q = n_h / n_2h
            ratio = n_2h / n_h
            stderr = math.sqrt(max(q * (1.0 - q), 0.0) / n_2h) / q**2
            out.append((ci, float(h), float(ratio), float(stderr)))
    return out


def strip_shrink_check(s, t, h):
    """Truth of |sqrt(s) - sqrt(s + (t-s)/4)| <= h for admissible (s, t, h).

    Preconditions: s, t >= 0, h > 0 and |sqrt(s) - sqrt(t)| <= 2h. Under
    them the inequality always holds; the check exists as an executable
    oracle for that fact.
    """
    if s < 0 or t < 0 or h <= 0:
        raise InputError("require s, t >= 0 and h > 0")
    if abs(math.sqrt(s) - math.sqrt(t)) > 2.0 * h:
        raise InputError("require |sqrt(s) - sqrt(t)| <= 2h")
    s_tilde = s + 0.25 * (t - s)
    return abs(math.sqrt(s) - math.sqrt(s_tilde)) <= h + 1e-12


def affine_transfer_bound(ctx: MetricContext, amap, x, y, rounds=None):
    """(lhs, rhs) for the affine transfer inequality of the metric.

    lhs is the refined metric between the mapped points on the mapped body;
    rhs is sqrt(operator norm of the linear part) times the refined metric on
    the original body. The test suite asserts lhs <= rhs * (1 + tau_dir).
    """
    x = as_vector(x, ctx.dim, "x")
    y = as_vector(y, ctx.dim, "y")
    ctx._check_inside(x, y)
    mapped_body = ConvexBody.from_dict(
        {"dim": ctx.dim, "shape": ctx.body.body.world.to_dict(), "transform": amap.to_dict()}
    )
    wrapped = NormalizedBody.wrap(mapped_body,
                                  directions=ctx.base_directions.directions)
    ctx2 = MetricContext.create(wrapped, ctx.base_directions, include_chord=ctx.include_chord)
    lhs = rho_refined(ctx2, amap.apply(x), amap.apply(y), rounds=rounds)
    opnorm = power_iteration_opnorm(amap.matrix)
    rhs = math.sqrt(opnorm) * rho_refined(ctx, x, y, rounds=rounds)
    return lhs, rhs
