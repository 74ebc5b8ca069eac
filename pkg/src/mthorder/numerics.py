"""Shared numeric primitives: seeded streams, quadrature, convex search, small LPs.

Everything here is deterministic given its inputs.  Random draws come from a
counter-based generator keyed by (seed, stream id) so that parallel shards can
use disjoint streams and still reproduce bit-identical results run to run.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate


class InvalidDimensionError(ValueError):
    pass


class ZeroFunctionRegionError(RuntimeError):
    """Raised when no positive value of the objective could be located."""


class QuadratureFailure(RuntimeError):
    """Quadrature did not converge; `.best` carries the last estimate."""

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class EstimateWithError:
    """A numeric value with a one-sigma error bar."""

    value: float
    std_error: float = 0.0
    samples_or_nodes: int = 0

    def __post_init__(self):
        if not math.isfinite(self.std_error) or self.std_error < 0:
            raise ValueError("std_error must be finite and nonnegative")

    def scaled(self, factor: float) -> "EstimateWithError":
        return EstimateWithError(self.value * factor,
                                 self.std_error * abs(factor),
                                 self.samples_or_nodes)


def combine_sigma(*sigmas: float) -> float:
    return math.sqrt(sum(s * s for s in sigmas))


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and endpoint behaviour for integrate_1d.

    singular_exponent e in (-1, 0] declares the integrand behaves like
    (r - a)^e near the left endpoint; it is removed analytically by the
    substitution r = a + u^(1/(1+e)).
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 200
    singular_exponent: float | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.singular_exponent is not None and not (-1 < self.singular_exponent <= 0):
            raise ValueError("singular exponent must lie in (-1, 0]")


# ---------------------------------------------------------------------------
# random streams


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based 64-bit generator for (seed, stream); streams never overlap."""
    key = np.array([seed % 2**64, stream % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sphere_sample(d: int, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """`count` unit vectors in R^d, deterministic in (seed, stream).

    For even `count` the set is antithetic: it contains -v for every v,
    so linear test functions integrate to exactly zero.
    """
    if d < 1:
        raise InvalidDimensionError("sphere dimension must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    gen = make_rng(seed, stream)
    half = (count + 1) // 2
    z = gen.standard_normal((half, d))
    norms = np.linalg.norm(z, axis=1)
    bad = norms < 1e-150
    if np.any(bad):                      # essentially impossible; keep deterministic anyway
        z[bad] = 0.0
        z[bad, 0] = 1.0
        norms = np.linalg.norm(z, axis=1)
    v = z / norms[:, None]
    out = np.empty((2 * half, d))
    out[0::2] = v
    out[1::2] = -v
    return out[:count]


def default_mc_samples(total_dim: int) -> int:
    """Monte Carlo budgets by ambient dimension; keeps suite runtime in minutes."""
    return 200_000 if total_dim <= 4 else 1_000_000


def sphere_surface(d: int) -> float:
    """Surface measure of the unit sphere S^{d-1} in R^d."""
    if d < 1:
        raise InvalidDimensionError("sphere dimension must be >= 1")
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


# ---------------------------------------------------------------------------
# quadrature


def integrate_1d(phi, a: float, b: float, cfg: QuadratureConfig | None = None,
                 tail_bound: tuple[float, float] | None = None) -> EstimateWithError:
    """Integrate phi over [a, b] (b may be +inf) to the configured tolerance.

    An infinite upper limit requires tail_bound = (A, B) with
    phi(t) <= A*exp(-B*t); the integral is truncated where that envelope
    drops below abs_tol/10.  Raises QuadratureFailure (carrying the best
    estimate) if the adaptive rule cannot reach the tolerance.
    """
    cfg = cfg or QuadratureConfig()
    if math.isinf(b):
        if tail_bound is None:
            raise ValueError("infinite upper limit needs an exponential tail_bound (A, B)")
        big_a, big_b = tail_bound
        if big_b <= 0:
            raise ValueError("tail bound decay rate must be positive")
        cut = math.log(max(10.0 * big_a / cfg.abs_tol, 2.0)) / big_b
        b = max(a + 1.0, cut)

    e = cfg.singular_exponent
    if e is not None and e < 0:
        # r = a + u^(1/(1+e)) turns an (r-a)^e singularity into a bounded integrand
        q = 1.0 / (1.0 + e)

        def transformed(u):
            if u <= 0.0:
                return 0.0
            return phi(a + u ** q) * q * u ** (q - 1.0)

        return _quad(transformed, 0.0, (b - a) ** (1.0 + e), cfg)
    return _quad(phi, a, b, cfg)


def _quad(fn, a, b, cfg):
    out = integrate.quad(fn, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                         limit=cfg.max_subdivisions, full_output=1)
    value, err = out[0], out[1]
    nodes = int(out[2].get("neval", 0)) if len(out) > 2 and isinstance(out[2], dict) else 0
    est = EstimateWithError(value, err, nodes)
    if len(out) == 4 and err > 50 * max(cfg.abs_tol, cfg.rel_tol * abs(value)):
        raise QuadratureFailure(f"quadrature did not converge: {out[3]}", est)
    return est


def gauss_panels(a: float, b: float, panels: int, order: int = 16):
    """Composite Gauss-Legendre nodes and weights on [a, b] (fixed grid)."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# derivative-free maximization of log-concave objectives


def _direction_set(d: int) -> np.ndarray:
    dirs = list(np.eye(d)) + list(-np.eye(d))
    if d <= 6:
        for signs in itertools.product((-1.0, 1.0), repeat=d):
            v = np.array(signs) / math.sqrt(d)
            dirs.append(v)
    return np.array(dirs)


def _ring_search(F, x0, dirs, base):
    for k in range(-6, 64):
        r = base * 2.0 ** k
        if r > 1e18:
            break
        for v in dirs:
            y = x0 + r * v
            fy = float(F(y))
            if fy > 0.0:
                return y, fy
    raise ZeroFunctionRegionError("no positive value found by expanding ring search")


def maximize_logconcave(F, x0, tol: float = 1e-9, max_evals: int = 60_000):
    """Locate the supremum of a coercive log-concave F by compass search.

    Derivative-free adaptive coordinate search (axes + diagonals) with one
    restart; deterministic for fixed inputs.  Returns (argmax, value) with
    the value within ~tol (relative) of the supremum for smooth F; plateau
    maxima (indicator-type F) are returned exactly.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    d = x.size
    dirs = _direction_set(d)
    fx = float(F(x))
    evals = 1
    if not fx > 0.0:
        x, fx = _ring_search(F, x, dirs, base=1.0)
    logf = math.log(fx)

    def sweep(x, logf, h, evals):
        moved = True
        while moved and evals < max_evals:
            moved = False
            best_gain, best_x, best_logf = 0.0, None, None
            for v in dirs:
                y = x + h * v
                fy = float(F(y))
                evals += 1
                if fy > 0.0:
                    ly = math.log(fy)
                    if ly - logf > best_gain:
                        best_gain, best_x, best_logf = ly - logf, y, ly
            if best_x is not None and best_gain > 0.0:
                x, logf, moved = best_x, best_logf, True
        return x, logf, evals

    scale = max(1.0, float(np.linalg.norm(x)))
    h_min = math.sqrt(max(tol, 1e-15)) * scale * 0.05
    for start in range(2):                     # restart once with a fresh step
        h = 0.5 * scale if start == 0 else 64.0 * h_min
        while h > h_min and evals < max_evals:
            x, logf, evals = sweep(x, logf, h, evals)
            h *= 0.5
    return x, math.exp(logf)


def minimize_convex(F, x0, tol: float = 1e-9, max_evals: int = 60_000):
    """Compass-search minimizer for a finite convex F (same engine, flipped)."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    shifted = maximize_logconcave(lambda z: math.exp(-max(min(float(F(z)), 700.0), -700.0)),
                                  x, tol=tol, max_evals=max_evals)
    xm = shifted[0]
    return xm, float(F(xm))


# ---------------------------------------------------------------------------
# dense simplex LP (tiny problems; Bland's rule for determinism)


@dataclass(frozen=True)
class LPResult:
    status: str                # optimal | infeasible | unbounded
    x: np.ndarray | None
    value: float


_PIV_TOL = 1e-11


def _bland_pivot(T, basis, ncols):
    """Run simplex pivots on tableau T (last row = reduced costs, minimize)."""
    mrows = T.shape[0] - 1
    while True:
        enter = -1
        for j in range(ncols):
            if T[-1, j] < -1e-9:
                enter = j
                break
        if enter < 0:
            return "optimal"
        best_ratio, leave = None, -1
        for i in range(mrows):
            if T[i, enter] > _PIV_TOL:
                ratio = T[i, -1] / T[i, enter]
                if best_ratio is None or ratio < best_ratio - 1e-12 or (
                        abs(ratio - best_ratio) <= 1e-12 and basis[i] < basis[leave]):
                    best_ratio, leave = ratio, i
        if leave < 0:
            return "unbounded"
        piv = T[leave, enter]
        T[leave] /= piv
        for i in range(T.shape[0]):
            if i != leave and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[leave]
        basis[leave] = enter


def lp_maximize(c, A, b) -> LPResult:
    """Maximize c.x subject to A x <= b, x free.  Two-phase dense simplex."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    # free x -> u - w with u, w >= 0; slacks s >= 0
    Astd = np.hstack([A, -A, np.eye(m)])
    flip = b < 0
    Astd[flip] *= -1.0
    b[flip] *= -1.0
    nvar = 2 * n + m
    need_art = np.where(flip)[0]
    nart = len(need_art)

    T = np.zeros((m + 1, nvar + nart + 1))
    T[:m, :nvar] = Astd
    T[:m, -1] = b
    basis = np.empty(m, dtype=int)
    art_col = {}
    k = 0
    for i in range(m):
        if flip[i]:
            col = nvar + k
            T[i, col] = 1.0
            basis[i] = col
            art_col[i] = col
            k += 1
        else:
            basis[i] = 2 * n + i        # the slack of an unflipped row

    if nart:
        # phase 1: minimize sum of artificials
        for i in need_art:
            T[-1, :] -= T[i, :]
        T[-1, nvar:nvar + nart] = 0.0
        status = _bland_pivot(T, basis, nvar + nart)
        if status != "optimal" or T[-1, -1] < -1e-8:
            return LPResult("infeasible", None, math.nan)
        for i in range(m):              # drive any leftover artificial out of the basis
            if basis[i] >= nvar:
                for j in range(nvar):
                    if abs(T[i, j]) > _PIV_TOL:
                        piv = T[i, j]
                        T[i] /= piv
                        for r in range(m + 1):
                            if r != i and T[r, j] != 0.0:
                                T[r] -= T[r, j] * T[i]
                        basis[i] = j
                        break
        T = np.delete(T, np.s_[nvar:nvar + nart], axis=1)

    # phase 2: minimize -c.x
    T[-1, :] = 0.0
    T[-1, :n] = -c
    T[-1, n:2 * n] = c
    for i in range(m):
        if basis[i] < 2 * n + m and abs(T[-1, basis[i]]) > 0.0:
            T[-1, :] -= T[-1, basis[i]] * T[i, :]
    status = _bland_pivot(T, basis, 2 * n + m)
    if status == "unbounded":
        return LPResult("unbounded", None, math.inf)
    xfull = np.zeros(2 * n + m)
    for i in range(m):
        if basis[i] < 2 * n + m:
            xfull[basis[i]] = T[i, -1]
    x = xfull[:n] - xfull[n:2 * n]
    return LPResult("optimal", x, float(c @ x))


def lp_feasible_interior(A, b, margin: float = 1e-10):
    """Does {x : A x <= b} contain a point with slack >= margin on unit normals?

    Returns (feasible, witness).  A's rows are normalized internally so the
    slack is a true Euclidean interior margin.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 1e-14
    if not np.all(keep):
        if np.any(b[~keep] < 0):
            return False, None
        A, b, norms = A[keep], b[keep], norms[keep]
    if A.shape[0] == 0:
        return True, np.zeros(1)
    An = A / norms[:, None]
    bn = b / norms
    m, n = An.shape
    # maximize t s.t. An x + t <= bn  (Chebyshev radius)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    Aext = np.hstack([An, np.ones((m, 1))])
    res = lp_maximize(c, Aext, bn)
    if res.status == "unbounded":
        return True, None
    if res.status != "optimal":
        return False, None
    if res.value >= margin:
        return True, res.x[:n]
    return False, None
