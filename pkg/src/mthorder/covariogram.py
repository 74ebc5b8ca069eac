"""m-th order covariograms of bodies and log-concave functions.

The order-m covariogram of a body K is

    g_{K,m}(xbar) = vol_n(K cap (x_1+K) cap ... cap (x_m+K)),

and for a function f it is the integral of min_{0<=i<=m} f(y - x_i) over
R^n, with x_0 = o by convention.  Both are log-concave in
xbar = (x_1, ..., x_m) and reduce to the classical covariogram at m = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import convexcore as cc
from .convexcore import ConvexBody
from .lcfun import LogConcaveFunction, NonIntegrableError
from .numerics import (
    EstimateWithError,
    QuadratureConfig,
    default_mc_samples,
    gauss_panels,
    integrate_1d,
    lp_maximize,
    make_rng,
)

_STREAM_DIRECT_MC = 201
_STREAM_BALL_COV = 202
_NODE_SEED_STRIDE = 100_003  # decorrelates per-node seeds inside quadratures
_MC_SHARDS = 8


# ---------------------------------------------------------------------------
# m-vectors


@dataclass(frozen=True)
class MVector:
    """m translation blocks (x_1, ..., x_m) in R^n; x_0 = o is implicit."""

    blocks: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.blocks, dtype=float))
        if b.ndim != 2 or b.size == 0:
            raise ValueError("blocks must form a nonempty (m, n) array")
        object.__setattr__(self, "blocks", b)

    @property
    def m(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[1]

    @property
    def total_dim(self) -> int:
        return self.blocks.size

    @property
    def flat(self) -> np.ndarray:
        return self.blocks.ravel()

    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks))

    def unit(self) -> "MVector":
        nrm = self.norm()
        if nrm <= 0.0:
            raise ValueError("cannot normalize the zero m-vector")
        return MVector(self.blocks / nrm)

    def scaled(self, t: float) -> "MVector":
        return MVector(self.blocks * float(t))


def as_mvector(x, n: int) -> MVector:
    """Coerce an MVector / (m,n) array / flat length-mn array to block form."""
    if isinstance(x, MVector):
        if x.n != n:
            raise ValueError(f"m-vector has block dimension {x.n}, expected {n}")
        return x
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        if arr.size % n:
            raise ValueError(f"flat m-vector of length {arr.size} does not "
                             f"split into blocks of dimension {n}")
        arr = arr.reshape(-1, n)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise ValueError("expected an (m, n) block array")
    return MVector(arr)


# ---------------------------------------------------------------------------
# body covariograms


def _axis_box(K: ConvexBody):
    """(lo, hi) when K is an axis-aligned box (every facet normal is +-e_j)."""
    if K.kind != "polytope":
        return None
    A = np.abs(K.normals)
    if np.any(np.sum(A > 1e-12, axis=1) != 1) or np.any(np.abs(A.max(axis=1) - 1.0) > 1e-12):
        return None
    return cc.bounding_box(K)


def _box_cov(lo, hi, blocks):
    """Vectorized box covariogram; blocks has shape (N, m, n)."""
    drop = np.minimum(0.0, blocks.min(axis=1))
    rise = np.maximum(0.0, blocks.max(axis=1))
    lengths = (hi - lo) + drop - rise
    return np.prod(np.maximum(lengths, 0.0), axis=1)


def _ball_cov(K: ConvexBody, xb: MVector, seed: int, samples) -> EstimateWithError:
    r = K.radius
    pts = np.vstack([np.zeros(K.dim), xb.blocks])
    pts = np.unique(pts, axis=0)  # only distinct translates matter
    if cc.miniball_radius(pts) > r + 1e-12:
        return EstimateWithError(0.0, 0.0, 0)
    if len(pts) == 1:
        return cc.volume(K)
    if len(pts) == 2:
        d = float(np.linalg.norm(pts[1] - pts[0]))
        if d >= 2.0 * r:
            return EstimateWithError(0.0, 0.0, 0)
        if K.dim == 2:
            area = (2.0 * r * r * math.acos(d / (2.0 * r))
                    - 0.5 * d * math.sqrt(4.0 * r * r - d * d))
            return EstimateWithError(area, 0.0, 0)
        if K.dim == 3:
            return EstimateWithError(
                math.pi * (2.0 * r - d) ** 2 * (4.0 * r + d) / 12.0, 0.0, 0)
    centers = K.center + pts
    lo = centers.max(axis=0) - r
    hi = centers.min(axis=0) + r
    if np.any(hi <= lo):
        return EstimateWithError(0.0, 0.0, 0)
    N = samples or default_mc_samples(K.dim)
    gen = make_rng(seed, _STREAM_BALL_COV)
    Y = lo + gen.random((N, K.dim)) * (hi - lo)
    inside = np.ones(N, dtype=bool)
    for p in centers:
        inside &= np.sum((Y - p) ** 2, axis=1) <= r * r
    frac = float(inside.mean())
    box_vol = float(np.prod(hi - lo))
    sigma = box_vol * math.sqrt(max(frac * (1.0 - frac), 0.0) / N)
    return EstimateWithError(box_vol * frac, sigma, N)


def covariogram_body(K: ConvexBody, xbar, seed: int = 0,
                     samples: int | None = None) -> EstimateWithError:
    """g_{K,m}(xbar); exact for n <= 2 (and ball pairs), seeded MC otherwise."""
    xb = as_mvector(xbar, K.dim)
    if K.kind == "ball":
        return _ball_cov(K, xb, seed, samples)
    box = _axis_box(K)
    if box is not None:
        val = _box_cov(box[0], box[1], xb.blocks[None])
        return EstimateWithError(float(val[0]), 0.0, 0)
    body = cc.intersect_translates(K, xb.blocks)
    if body is None:
        return EstimateWithError(0.0, 0.0, 0)
    return cc.volume(body, seed=seed, samples=samples)


def covariogram_body_many(K: ConvexBody, xbars, seed: int = 0,
                          samples: int | None = None):
    """Batch g_{K,m}; returns (values, std_errors) arrays.

    Axis-aligned boxes (intervals included) go through a fully vectorized
    closed form; everything else loops over covariogram_body.
    """
    B = np.asarray(xbars, dtype=float)
    if B.ndim == 2:
        B = B.reshape(len(B), -1, K.dim)
    if B.ndim != 3 or B.shape[2] != K.dim:
        raise ValueError("expected an (N, m, n) or (N, m*n) batch")
    box = _axis_box(K)
    if box is not None:
        vals = _box_cov(box[0], box[1], B)
        return vals, np.zeros(len(vals))
    vals = np.empty(len(B))
    sigs = np.empty(len(B))
    for j, xb in enumerate(B):
        est = covariogram_body(K, xb, seed=seed, samples=samples)
        vals[j] = est.value
        sigs[j] = est.std_error
    return vals, sigs


# ---------------------------------------------------------------------------
# support of g_{K,m}: the m-th difference construction D^m(K)


def dm_support_membership(K: ConvexBody, xbar) -> bool:
    """Whether xbar lies in D^m(K) = supp g_{K,m}."""
    xb = as_mvector(xbar, K.dim)
    if K.kind == "ball":
        pts = np.vstack([np.zeros(K.dim), xb.blocks])
        return cc.miniball_radius(pts) <= K.radius + 1e-12
    return cc.intersect_translates(K, xb.blocks) is not None


def dm_support_membership_fn(f: LogConcaveFunction, xbar) -> bool:
    """supp g_{f,m} = D^m(supp f); everywhere true when supp f is unbounded."""
    supp = f.support_body()
    if supp is None:
        return True
    return dm_support_membership(supp, as_mvector(xbar, f.dim))


def dm_support_radius(K: ConvexBody, theta) -> float:
    """max{r >= 0 : r*theta in D^m(K)} -- the radial function of D^m(K)."""
    th = as_mvector(theta, K.dim)
    if th.norm() <= 0.0:
        raise ValueError("direction must be nonzero")
    if K.kind == "ball":
        base = cc.miniball_radius(np.vstack([np.zeros(K.dim), th.blocks]))
        return K.radius / base
    A0, b0 = K.normals, K.offsets
    F = len(A0)
    rows = [np.hstack([A0, np.zeros((F, 1))])]
    rhs = [b0]
    for x in th.blocks:
        rows.append(np.hstack([A0, -(A0 @ x)[:, None]]))
        rhs.append(b0)
    c = np.zeros(K.dim + 1)
    c[-1] = 1.0
    res = lp_maximize(c, np.vstack(rows), np.concatenate(rhs))
    if res.status != "optimal":
        raise RuntimeError(f"support-radius LP ended with status {res.status}")
    return float(res.value)


def dm_support_radius_fn(f: LogConcaveFunction, theta) -> float:
    supp = f.support_body()
    if supp is None:
        return math.inf
    return dm_support_radius(supp, as_mvector(theta, f.dim))


def dm_body(K: ConvexBody, m: int) -> ConvexBody:
    """D^m(K) as an explicit body, where a closed form exists.

    Covered: any interval (facets x_i - x_j <= len, +-x_i <= len), any body
    with m = 1 and n <= 2 (K + (-K)), and balls with m = 1.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if K.kind == "ball" and m == 1:
        return cc.ball(K.dim, 2.0 * K.radius)
    if K.dim == 1:
        L = float(K.vertices.max() - K.vertices.min())
        rows, rhs = [], []
        for i in range(m):
            e = np.zeros(m)
            e[i] = 1.0
            rows += [e, -e]
            rhs += [L, L]
            for j in range(i):
                d = np.zeros(m)
                d[i], d[j] = 1.0, -1.0
                rows += [d, -d]
                rhs += [L, L]
        return cc.from_halfspaces(np.array(rows), np.array(rhs))
    if m == 1 and K.kind == "polytope" and K.dim <= 2:
        return cc.minkowski_sum(K, cc.reflect(K))
    raise NotImplementedError("no closed-form D^m body for this (K, m)")


# ---------------------------------------------------------------------------
# function covariograms


def _profile_cut(prof, n: int, scale: float) -> float:
    """Radius beyond which the level-set integrand is negligible."""
    if prof.support_radius < math.inf:
        return prof.support_radius
    if prof.kind == "pfamily":
        a = abs(prof.param)
    elif prof.kind == "gaussian":
        a = 2.0
    else:
        a = 1.0
    eps = 1e-13 / max(1.0, scale * n)
    return prof.truncation_radius(eps, extra_power=n + max(1.0, a) + 2.0)


def _cov_fn_levelset(f: LogConcaveFunction, xb: MVector, seed: int, samples,
                     cfg: QuadratureConfig | None) -> EstimateWithError:
    K, prof, A = f.body, f.profile, f.amplitude
    n, m = f.dim, xb.m
    if prof.kind == "indicator":
        return covariogram_body(K, xb, seed=seed, samples=samples).scaled(A)

    # with {f >= t} = shift + rK and t = A*phi(r) the t-integral becomes
    #   A * int (-phi'(r)) r^n g_{K,m}(xbar / r) dr
    vol_k = cc.volume(K, seed=seed).value
    nrm = xb.norm()
    r_lo = 0.0 if nrm < 1e-300 else nrm / dm_support_radius(K, xb.unit())
    r_hi = _profile_cut(prof, n, A * vol_k)
    if r_hi <= r_lo:
        return EstimateWithError(0.0, 0.0, 0)

    if K.kind == "ball":
        distinct = len(np.unique(np.vstack([np.zeros(n), xb.blocks]), axis=0))
        exact_inner = distinct <= 2  # single lens has a closed form
    else:
        exact_inner = n <= 2
    if exact_inner:
        def integrand(r):
            if r <= 0.0:
                return 0.0
            g = covariogram_body(K, xb.scaled(1.0 / r)).value
            return A * float(prof.neg_derivative(r)) * r ** n * g

        return integrate_1d(integrand, r_lo, r_hi, cfg=cfg)

    # the inner volumes are themselves Monte Carlo: fixed Gauss grid with
    # independent per-node seeds, so adaptivity never chases the noise
    nodes, weights = gauss_panels(r_lo, r_hi, panels=32, order=8)
    budget = samples or default_mc_samples(xb.total_dim)
    per_node = max(1000, budget // len(nodes))
    total = 0.0
    var = 0.0
    for k, (r, w) in enumerate(zip(nodes, weights)):
        est = covariogram_body(K, xb.scaled(1.0 / r),
                               seed=seed + _NODE_SEED_STRIDE * (k + 1),
                               samples=per_node)
        factor = A * float(prof.neg_derivative(r)) * r ** n * w
        total += factor * est.value
        var += (factor * est.std_error) ** 2
    return EstimateWithError(total, math.sqrt(var), len(nodes) * per_node)


def _coercive_box_radius(f: LogConcaveFunction, tol: float) -> float:
    """R with int_{|y|>R} f <= tol/10, from the exponential envelope when
    one exists and from iterated profile truncation otherwise."""
    n = f.dim
    surface = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    shift_norm = float(np.linalg.norm(f.shift))
    try:
        amp, rate = f.coercivity_bound()
    except NonIntegrableError:
        if f.body.kind == "ball":
            r_out = float(np.linalg.norm(f.body.center)) + f.body.radius
        else:
            r_out = float(np.max(np.linalg.norm(f.body.vertices, axis=1)))
        eps = tol / (10.0 * f.amplitude * surface * max(1.0, r_out) ** n)
        return shift_norm + r_out * f.profile.truncation_radius(
            eps, extra_power=n + 1.0)

    def tail(radius):
        return (amp * surface * math.gamma(n)
                * float(special.gammaincc(n, rate * radius)) / rate ** n)

    hi = 1.0 / rate
    while tail(hi) > tol / 10.0 and hi < 1e6:
        hi *= 2.0
    lo = hi / 2.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if tail(mid) > tol / 10.0:
            lo = mid
        else:
            hi = mid
    return hi


def _min_translate(f: LogConcaveFunction, Y: np.ndarray, blocks) -> np.ndarray:
    vals = f.eval_many(Y)
    for x in blocks:
        np.minimum(vals, f.eval_many(Y - x), out=vals)
    return vals


def _box_mc(f, blocks, lo, hi, N, seed, stream, inner=None):
    """MC integral of min_i f(y-x_i) over box [lo,hi] minus the inner box."""
    n = len(lo)
    box_vol = float(np.prod(hi - lo))
    per_shard = max(1, N // _MC_SHARDS)
    total = total_sq = 0.0
    count = 0
    for s in range(_MC_SHARDS):
        gen = make_rng(seed, stream * _MC_SHARDS + s)
        Y = lo + gen.random((per_shard, n)) * (hi - lo)
        vals = _min_translate(f, Y, blocks)
        if inner is not None:
            vals[np.all(np.abs(Y) < inner, axis=1)] = 0.0
        total += float(vals.sum())
        total_sq += float(np.square(vals).sum())
        count += per_shard
    mean = total / count
    var = max(0.0, (total_sq - count * mean * mean) / max(count - 1, 1))
    return box_vol * mean, box_vol * math.sqrt(var / count), count


def _cov_fn_direct(f: LogConcaveFunction, xb: MVector, seed: int,
                   samples) -> EstimateWithError:
    n = f.dim
    shifts = np.vstack([np.zeros(n), xb.blocks])
    N = samples or default_mc_samples(xb.total_dim)
    supp = f.support_body()
    if supp is not None:
        lo0, hi0 = cc.bounding_box(supp)
        lo = (lo0[None, :] + shifts).max(axis=0)
        hi = (hi0[None, :] + shifts).min(axis=0)
        if np.any(hi <= lo):
            return EstimateWithError(0.0, 0.0, 0)
        val, sig, cnt = _box_mc(f, xb.blocks, lo, hi, N, seed,
                                _STREAM_DIRECT_MC)
        return EstimateWithError(val, sig, cnt)

    # Unbounded support: min_i f(y - x_i) <= f(y), so f's own tail bounds the
    # truncation loss.  A single box out to that radius has terrible variance
    # for slowly decaying profiles, so stratify: a core box where f is large,
    # then geometrically growing box shells out to the truncation radius.
    r_total = _coercive_box_radius(f, tol=1e-12)
    shift_norm = float(np.linalg.norm(f.shift))
    if f.body.kind == "ball":
        r_out = float(np.linalg.norm(f.body.center)) + f.body.radius
    else:
        r_out = float(np.max(np.linalg.norm(f.body.vertices, axis=1)))
    r_core = min(r_total, shift_norm + r_out * f.profile.inverse_level(1e-2)
                 + float(np.abs(xb.blocks).max()))
    radii = [r_core]
    while radii[-1] < r_total:
        radii.append(min(2.0 * radii[-1], r_total))
    n_shells = len(radii) - 1
    val, sig, cnt = _box_mc(f, xb.blocks, np.full(n, -r_core),
                            np.full(n, r_core), N // 2, seed,
                            _STREAM_DIRECT_MC)
    sig_sq = sig * sig
    per_shell = max(2000, (N - N // 2) // max(n_shells, 1))
    for a in range(n_shells):
        v, s, c = _box_mc(f, xb.blocks, np.full(n, -radii[a + 1]),
                          np.full(n, radii[a + 1]), per_shell, seed,
                          _STREAM_DIRECT_MC + a + 1, inner=radii[a])
        val += v
        sig_sq += s * s
        cnt += c
    return EstimateWithError(val, math.sqrt(sig_sq), cnt)


def covariogram_fn(f: LogConcaveFunction, xbar, method: str = "levelset",
                   seed: int = 0, samples: int | None = None,
                   cfg: QuadratureConfig | None = None) -> EstimateWithError:
    """g_{f,m}(xbar), by level-set quadrature or direct Monte Carlo.

    The two methods are deliberately independent: "levelset" folds
    covariogram_body through the layer-cake decomposition of f, while
    "direct_mc" integrates min_i f(y - x_i) over a truncation box.
    """
    xb = as_mvector(xbar, f.dim)
    if f.profile.kind == "pfamily" and f.profile.param == 0.0:
        raise NonIntegrableError("the p = 0 profile has infinite mass and "
                                 "no covariogram")
    if method == "levelset":
        return _cov_fn_levelset(f, xb, seed, samples, cfg)
    if method == "direct_mc":
        return _cov_fn_direct(f, xb, seed, samples)
    raise ValueError(f"unknown method {method!r}")


def cov_radial_derivative(f: LogConcaveFunction, m: int, theta, h: float = 1e-3,
                          method: str = "levelset", seed: int = 0) -> float:
    """One-sided slope of r -> g_{f,m}(r*theta) at r = 0+.

    Difference quotients at h and h/10 are combined by Richardson
    extrapolation; as h -> 0 the value tends to minus the polar projection
    gauge of theta.
    """
    if h <= 0.0:
        raise ValueError("invalid step: h must be positive")
    th = as_mvector(theta, f.dim)
    if th.m != m:
        raise ValueError(f"direction has {th.m} blocks, expected m = {m}")
    th = th.unit()
    g0 = f.mass()
    d_h = (covariogram_fn(f, th.scaled(h), method=method, seed=seed).value
           - g0) / h
    d_h10 = (covariogram_fn(f, th.scaled(h / 10.0), method=method,
                            seed=seed).value - g0) / (h / 10.0)
    return (10.0 * d_h10 - d_h) / 9.0
