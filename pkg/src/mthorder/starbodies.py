"""Ball bodies and radial p-th mean bodies, as star-body radial tables.

The radial function of the Ball body of a radial section g (normalized so
g(0) = sup g = 1) is

    rho^p = p * int_0^inf r^{p-1} psi(r) dr                 p > 0
    rho   = exp( int_0^inf (-psi'(r)) log r dr )            p = 0
    rho^p = p * int_0^inf r^{p-1} (psi(r) - 1) dr           -1 < p < 0

Radial mean bodies apply this to covariogram sections r -> g_{.,m}(r*theta),
normalized by vol(K) (bodies) or ||f||_1 (functions).  Sections are either
evaluated directly (cheap closed forms) or tabulated once per direction and
interpolated, so that many p values can reuse one ray.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import convexcore as cc
from . import covariogram as cov
from . import projection as proj
from .convexcore import ConvexBody, UnboundedBodyError
from .lcfun import LogConcaveFunction, NonIntegrableError
from .numerics import (EstimateWithError, QuadratureConfig, combine_sigma,
                       integrate_1d, sphere_sample, sphere_surface)

_STREAM_STAR_DIRS = 401
_ZERO_P_WINDOW = 1e-6


def default_direction_count(d: int) -> int:
    return 64 if d <= 4 else 256


# ---------------------------------------------------------------------------
# radial sections


@dataclass(frozen=True)
class RadialRay:
    """A normalized radial section psi(r) = g(r*theta)/g(0) along one direction.

    psi is a callable accepting scalars or 1-d arrays; support_radius may be
    inf, in which case tail_radius gives a finite horizon beyond which the
    section is negligible.  slope0 is |psi'(0+)| where known exactly (the
    normalized projection-body gauge), sigma an optional pointwise std error.
    """

    psi: Callable
    support_radius: float
    tail_radius: float
    slope0: float | None = None
    sigma: Callable | None = None


def _vectorized(fn_scalar):
    def wrapped(r):
        rr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([fn_scalar(float(v)) for v in rr])
        return out if np.ndim(r) else float(out[0])
    return wrapped


_GAUSS8 = np.polynomial.legendre.leggauss(8)


def _geometric_panels(a: float, b: float, panels: int = 32):
    """Gauss nodes/weights on geometrically graded panels over [a, b], a > 0."""
    x, w = _GAUSS8
    edges = a * (b / a) ** np.linspace(0.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), \
        (half[:, None] * w).ravel()


def _body_section_direct(K: ConvexBody, thb: np.ndarray, vol: float,
                         seed: int, samples: int | None):
    """Vectorized normalized section of a body with cheap exact covariograms."""
    def section(r):
        rr = np.atleast_1d(np.asarray(r, dtype=float))
        vals, _ = cov.covariogram_body_many(
            K, rr[:, None, None] * thb[None, :, :], seed=seed, samples=samples)
        out = np.clip(vals / vol, 0.0, 1.0)
        return out if np.ndim(r) else float(out[0])
    return section


def _interp_section(grid, vals, root_power: float, cutoff: float):
    interp = PchipInterpolator(grid, np.maximum(vals, 0.0) ** (1.0 / root_power))

    def psi(r):
        rr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.where(rr < cutoff,
                       np.maximum(interp(np.minimum(rr, cutoff * (1 - 1e-15))), 0.0)
                       ** root_power,
                       0.0)
        return out if np.ndim(r) else float(out[0])

    return psi


def body_ray(K: ConvexBody, m: int, theta, seed: int = 0,
             samples: int | None = None, nodes: int = 256) -> RadialRay:
    """The normalized covariogram section of a body along one unit direction."""
    th = as_unit(theta, K.dim)
    vol = cc.volume(K, seed=seed)
    R = cov.dm_support_radius(K, th)
    slope0 = proj.ppb_gauge_body(K, m, th) / vol.value
    cheap = (K.kind == "polytope" and cov._axis_box(K) is not None) \
        or (K.kind == "ball" and m == 1)
    if cheap:
        psi = _body_section_direct(K, th.blocks, vol.value, seed, samples)
        return RadialRay(psi, R, R, slope0, None)
    grid = np.linspace(0.0, R, nodes)
    vals, sigs = cov.covariogram_body_many(
        K, grid[:, None, None] * th.blocks[None, :, :], seed=seed, samples=samples)
    vals = np.clip(vals / vol.value, 0.0, 1.0)
    vals[0] = 1.0
    psi = _interp_section(grid, vals, float(K.dim), R)
    sigma = None
    if np.any(sigs > 0.0) or vol.std_error > 0.0:
        sig_vals = np.hypot(sigs / vol.value, vals * vol.std_error / vol.value)
        lin = PchipInterpolator(grid, sig_vals)
        def sigma(r):  # noqa: E306
            rr = np.atleast_1d(np.asarray(r, dtype=float))
            out = np.where(rr < R, np.abs(lin(np.minimum(rr, R))), 0.0)
            return out if np.ndim(r) else float(out[0])
    return RadialRay(psi, R, R, slope0, sigma)


def fn_ray(f: LogConcaveFunction, m: int, theta, seed: int = 0,
           samples: int | None = None, nodes: int = 256) -> RadialRay:
    """The normalized covariogram section of a log-concave function."""
    th = as_unit(theta, f.dim)
    n, prof = f.dim, f.profile
    if prof.kind == "indicator":
        supp = f.support_body()
        return body_ray(supp, m, th, seed=seed, samples=samples, nodes=nodes)
    mass = f.mass()
    slope0 = proj.ppb_gauge_fn(f, m, th) / mass
    K = f.body
    vol = cc.volume(K, seed=seed).value
    scale = f.amplitude * vol / mass
    R_K = cov.dm_support_radius(K, th)
    s_hi = cov._profile_cut(prof, n, f.amplitude * vol)
    support = cov.dm_support_radius_fn(f, th)
    tail = support if math.isfinite(support) else \
        R_K * prof.truncation_radius(1e-12, n + 8)
    cheap = (K.kind == "polytope" and cov._axis_box(K) is not None) \
        or (K.kind == "ball" and m == 1)
    if cheap:
        section = _body_section_direct(K, th.blocks, vol, seed, samples)

        def psi_scalar(r):
            if r <= 0.0:
                return 1.0
            s_lo = r / R_K
            if r >= tail or s_lo >= s_hi:
                return 0.0
            S, W = _geometric_panels(s_lo, s_hi)
            weight = prof.neg_derivative(S) * S ** n
            return min(max(scale * float(W @ (weight * section(r / S))), 0.0), 1.0)

        return RadialRay(_vectorized(psi_scalar), support, tail, slope0, None)

    body = body_ray(K, m, th, seed=seed, samples=samples, nodes=nodes)
    if math.isfinite(support):
        grid = np.linspace(0.0, tail, nodes)
    else:
        grid = tail * np.linspace(0.0, 1.0, nodes) ** 2
    vals = np.empty(nodes)
    sig_vals = np.zeros(nodes)
    vals[0] = 1.0
    for j in range(1, nodes):
        s_lo = grid[j] / R_K
        if s_lo >= s_hi:
            vals[j] = 0.0
            continue
        S, W = _geometric_panels(s_lo, s_hi)
        weight = prof.neg_derivative(S) * S ** n
        vals[j] = scale * float(W @ (weight * body.psi(grid[j] / S)))
        if body.sigma is not None:
            sig_vals[j] = scale * float(W @ (weight * body.sigma(grid[j] / S)))
    vals = np.clip(vals, 0.0, 1.0)
    psi = _interp_section(grid, vals, float(n), grid[-1])
    sigma = None
    if np.any(sig_vals > 0.0):
        lin = PchipInterpolator(grid, sig_vals)
        def sigma(r):  # noqa: E306
            rr = np.atleast_1d(np.asarray(r, dtype=float))
            out = np.where(rr < grid[-1], np.abs(lin(np.minimum(rr, grid[-1]))), 0.0)
            return out if np.ndim(r) else float(out[0])
    return RadialRay(psi, support, tail, slope0, sigma)


def as_unit(theta, n: int) -> cov.MVector:
    th = cov.as_mvector(theta, n)
    if th.norm() <= 0.0:
        raise ValueError("direction must be nonzero")
    return th.unit()


# ---------------------------------------------------------------------------
# the three-branch radial formula


def _level_radius(psi, horizon: float, level: float) -> float:
    """First radius at which the nonincreasing section drops to `level`."""
    if psi(horizon) > level:
        return horizon
    lo, hi = 0.0, horizon
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if psi(mid) > level:
            lo = mid
        else:
            hi = mid
    return hi


def _fd_slope(psi, scale: float) -> float:
    h = 1e-5 * scale
    d1 = (1.0 - psi(h)) / h
    d2 = (1.0 - psi(h / 10.0)) / (h / 10.0)
    return (10.0 * d2 - d1) / 9.0


def ball_body_radial(psi, p: float, *, support_radius: float = math.inf,
                     tail_radius: float | None = None,
                     slope0: float | None = None,
                     cfg: QuadratureConfig | None = None) -> float:
    """Radial value of the Ball body of a normalized section (psi(0) = 1).

    p values within 1e-6 of 0 are routed to the p = 0 branch, evaluated as
    the derivative-weighted log integral after integration by parts (which
    trades the radial derivative for two ordinary integrals).  The p < 0
    branch integrates the subtracted section, with the singular segment
    [0, delta] replaced by its tangent-line model.
    """
    if p <= -1.0:
        raise ValueError("p must exceed -1")
    T = support_radius if math.isfinite(support_radius) else tail_radius
    if T is None or not math.isfinite(T) or T <= 0.0:
        raise NonIntegrableError("section needs a finite integration horizon")
    cfg = cfg or QuadratureConfig()

    if abs(p) <= _ZERO_P_WINDOW:
        r_half = _level_radius(psi, T, 0.5)
        near = integrate_1d(lambda r: (psi(r) - 1.0) / r, 0.0, r_half, cfg=cfg)
        far = integrate_1d(lambda r: psi(r) / r, r_half, T, cfg=cfg)
        return math.exp(near.value + far.value + math.log(r_half))

    if p >= 0.05:
        cfg_pos = cfg if p >= 1.0 else replace(cfg, singular_exponent=p - 1.0)
        inner = integrate_1d(lambda u: float(psi(T * u)) * u ** (p - 1.0),
                             0.0, 1.0, cfg=cfg_pos)
        return T * (p * max(inner.value, 0.0)) ** (1.0 / p)

    if p > 0.0:
        # small positive p: p*int u^{p-1} psi = 1 + p*int u^{p-1}(psi - 1),
        # whose integrand is bounded; the direct form is ill-conditioned here
        inner = integrate_1d(lambda u: (float(psi(T * u)) - 1.0) * u ** (p - 1.0),
                             0.0, 1.0, cfg=cfg)
        return T * max(1.0 + p * inner.value, 0.0) ** (1.0 / p)

    if slope0 is None:
        slope0 = _fd_slope(psi, _level_radius(psi, T, 0.99))
    r99 = _level_radius(psi, T, 0.99)
    delta = 1e-3 * r99
    # quadratic correction to the tangent-line model on [0, delta]
    curv = (float(psi(delta)) - 1.0 + slope0 * delta) / delta ** 2
    seg = -slope0 * delta ** (p + 1.0) / (p + 1.0) \
        + curv * delta ** (p + 2.0) / (p + 2.0)
    mid = integrate_1d(lambda r: r ** (p - 1.0) * (float(psi(r)) - 1.0),
                       delta, T, cfg=cfg)
    val = p * (seg + mid.value) + T ** p
    if val <= 0.0:
        raise ArithmeticError("subtracted moment came out nonpositive")
    return val ** (1.0 / p)


def radial_from_ray(ray: RadialRay, p: float,
                    cfg: QuadratureConfig | None = None) -> EstimateWithError:
    """rho of the Ball body of a ray, with an error bar when the ray is noisy."""
    kw = dict(support_radius=ray.support_radius, tail_radius=ray.tail_radius,
              slope0=ray.slope0, cfg=cfg)
    rho = ball_body_radial(ray.psi, p, **kw)
    if ray.sigma is None:
        return EstimateWithError(rho, 0.0, 0)

    def shifted(sign):
        def env(r):
            return np.clip(ray.psi(r) + sign * ray.sigma(r), 0.0, 1.0)
        return env

    hi = ball_body_radial(shifted(+1.0), p, **kw)
    lo = ball_body_radial(shifted(-1.0), p, **kw)
    return EstimateWithError(rho, 0.5 * abs(hi - lo), 0)


def radial_from_ray_derivative(ray: RadialRay, p: float,
                               nodes: int = 4001) -> float:
    """Independent route: integrate r^p against the finite-difference -psi'."""
    if p <= -1.0:
        raise ValueError("p must exceed -1")
    T = ray.tail_radius
    power = 2.0 if p >= 0.0 else 4.0
    r = T * np.linspace(0.0, 1.0, nodes) ** power
    vals = ray.psi(r)
    neg_slope = -np.gradient(vals, r, edge_order=1)
    if abs(p) <= _ZERO_P_WINDOW:
        integrand = np.where(r > 0.0, np.log(np.maximum(r, 1e-300)), 0.0) * neg_slope
        integrand[0] = 0.0
        return math.exp(float(np.trapezoid(integrand, r)))
    integrand = np.where(r > 0.0, r, 1.0) ** p * neg_slope
    integrand[0] = 0.0
    return float(np.trapezoid(integrand, r)) ** (1.0 / p)


def limit_body_minus1(ray: RadialRay) -> float:
    """rho of the limiting body at p = -1: reciprocal normalized slope at 0+."""
    s0 = ray.slope0
    if s0 is None:
        s0 = _fd_slope(ray.psi, _level_radius(ray.psi, ray.tail_radius, 0.99))
    if s0 <= 0.0:
        return math.inf
    return 1.0 / s0


# ---------------------------------------------------------------------------
# star-body tables


@dataclass(frozen=True)
class StarBodyTable:
    directions: np.ndarray   # (D, d) unit rows
    radii: np.ndarray        # (D,)
    std_errors: np.ndarray   # (D,)
    meta: dict

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.directions, dtype=float))
        object.__setattr__(self, "directions", D)
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float))
        object.__setattr__(self, "std_errors",
                           np.asarray(self.std_errors, dtype=float))
        if len(self.radii) != len(D) or len(self.std_errors) != len(D):
            raise ValueError("table columns disagree in length")
        norms = np.linalg.norm(D, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("directions must be unit vectors")
        finite = self.radii[np.isfinite(self.radii)]
        if np.any(finite < 0.0):
            raise ValueError("radial values must be nonnegative")

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def has_unbounded(self) -> bool:
        return bool(np.any(~np.isfinite(self.radii)))

    def to_csv(self, path) -> None:
        d = self.dim
        header = ",".join([f"theta_{k}" for k in range(d)] + ["rho", "sigma"])
        rows = [f"# {json.dumps(self.meta, sort_keys=True)}", header]
        for k in range(len(self.radii)):
            cells = [f"{v:.17g}" for v in self.directions[k]]
            cells += [f"{self.radii[k]:.17g}", f"{self.std_errors[k]:.17g}"]
            rows.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write("\n".join(rows) + "\n")

    @staticmethod
    def from_csv(path) -> "StarBodyTable":
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ValueError("missing metadata header")
        meta = json.loads(lines[0][1:].strip())
        data = np.array([[float(c) for c in ln.split(",")] for ln in lines[2:]])
        return StarBodyTable(data[:, :-2], data[:, -2], data[:, -1], meta)


def _build_table(rays, dirs, p, meta, cfg=None) -> StarBodyTable:
    radii = np.empty(len(dirs))
    sigs = np.empty(len(dirs))
    cache: dict[int, EstimateWithError] = {}
    for k, ray in enumerate(rays):
        if id(ray) not in cache:
            cache[id(ray)] = radial_from_ray(ray, p, cfg=cfg)
        est = cache[id(ray)]
        radii[k] = est.value
        sigs[k] = est.std_error
    return StarBodyTable(dirs, radii, sigs, meta)


def _rays_for(dirs, make_ray):
    """One ray per distinct direction; duplicates share the same object."""
    cache: dict[bytes, RadialRay] = {}
    rays = []
    for k in range(len(dirs)):
        key = np.round(dirs[k], 15).tobytes()
        if key not in cache:
            cache[key] = make_ray(dirs[k])
        rays.append(cache[key])
    return rays


def radial_mean_body_body(K: ConvexBody, m: int, p: float, directions=None,
                          seed: int = 0, samples: int | None = None,
                          nodes: int = 256) -> StarBodyTable:
    """Radial table of R_p^m K over a sampled (or given) direction set."""
    d = K.dim * m
    dirs = _direction_set(directions, d, seed)
    rays = _rays_for(dirs, lambda th: body_ray(K, m, th, seed=seed,
                                               samples=samples, nodes=nodes))
    meta = {"p": p, "m": m, "kind": "body", "source": _describe(K), "seed": seed}
    return _build_table(rays, dirs, p, meta)


def radial_mean_body_fn(f: LogConcaveFunction, m: int, p: float,
                        directions=None, seed: int = 0,
                        samples: int | None = None,
                        nodes: int = 256) -> StarBodyTable:
    """Radial table of R_p^m f over a sampled (or given) direction set."""
    d = f.dim * m
    dirs = _direction_set(directions, d, seed)
    rays = _rays_for(dirs, lambda th: fn_ray(f, m, th, seed=seed,
                                             samples=samples, nodes=nodes))
    meta = {"p": p, "m": m, "kind": "function",
            "source": f"{f.profile.kind} on {_describe(f.body)}", "seed": seed}
    return _build_table(rays, dirs, p, meta)


def _direction_set(directions, d: int, seed: int) -> np.ndarray:
    if directions is None:
        return sphere_sample(d, default_direction_count(d), seed,
                             stream=_STREAM_STAR_DIRS)
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[1] != d:
        raise ValueError(f"directions must have {d} components")
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _describe(K: ConvexBody) -> str:
    if K.kind == "ball":
        return f"ball(dim={K.dim}, r={K.radius:g})"
    return f"polytope(dim={K.dim}, facets={len(K.offsets)})"


def star_volume(table: StarBodyTable) -> EstimateWithError:
    """(1/d) * surface(S^{d-1}) * mean(rho^d) over the table's directions."""
    if table.has_unbounded:
        raise UnboundedBodyError("table contains unbounded radial entries")
    d = table.dim
    rho_d = table.radii ** d
    surface = sphere_surface(d)
    count = len(rho_d)
    value = surface * float(rho_d.mean()) / d
    sig_mc = surface * float(rho_d.std(ddof=1)) / (d * math.sqrt(count)) \
        if count > 1 else 0.0
    sig_nodes = surface * float(np.mean(d * table.radii ** (d - 1)
                                        * table.std_errors)) / d
    return EstimateWithError(value, combine_sigma(sig_mc, sig_nodes), count)
