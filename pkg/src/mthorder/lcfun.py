"""Log-concave model functions f = A * phi(||x - x'||_K).

Only profile-of-gauge functions are first class: exponential, Gaussian,
power (1-t)_+^(1/s), indicator, and the p-family exp(-(n/|p|)(t^|p|-1))
(t^-n at p = 0, admitted for radial-mean-body limit work only).  The form
gives closed-form masses, level sets, q-norms and level-integral weights.

Note the p-family with |p| < 1 is a valid monotone profile but is *not*
log-concave; it participates only in scaling-law computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import convexcore as cc
from .convexcore import ConvexBody

_KINDS = ("exponential", "gaussian", "power", "indicator", "pfamily")


class NonIntegrableError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Nonincreasing profile phi on [0, inf) with phi(0) = max."""

    kind: str
    param: float = 0.0        # s for power, p for pfamily; unused otherwise
    ambient_dim: int = 1      # pfamily couples the profile to the dimension

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.kind == "power" and self.param <= 0:
            raise ValueError("power profile needs s > 0")
        if self.kind == "pfamily" and self.param <= -1:
            raise ValueError("pfamily needs p > -1")

    # -- pointwise data ------------------------------------------------------

    @property
    def phi0(self) -> float:
        if self.kind == "pfamily":
            p = self.param
            return math.inf if p == 0 else math.exp(self.ambient_dim / abs(p))
        return 1.0

    @property
    def support_radius(self) -> float:
        return 1.0 if self.kind in ("power", "indicator") else math.inf

    @property
    def is_log_concave(self) -> bool:
        if self.kind == "pfamily":
            return self.param >= 1
        return True

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            out = np.exp(-t)
        elif self.kind == "gaussian":
            out = np.exp(-0.5 * t * t)
        elif self.kind == "power":
            out = np.maximum(1.0 - t, 0.0) ** (1.0 / self.param)
        elif self.kind == "indicator":
            out = (t <= 1.0).astype(float)
        else:
            n, p = self.ambient_dim, self.param
            if p == 0.0:
                with np.errstate(divide="ignore"):
                    out = np.where(t > 0, t, np.nan) ** (-float(n))
                    out = np.where(t > 0, out, np.inf)
            else:
                a = abs(p)
                out = np.exp(-(n / a) * (np.minimum(t, 1e300) ** a - 1.0))
        out = np.where(np.isinf(t) & (t > 0), 0.0, out)
        return out if out.ndim else float(out)

    def neg_derivative(self, t):
        """-phi'(t); undefined for the indicator kind (a point mass at t=1)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            out = np.exp(-t)
        elif self.kind == "gaussian":
            out = t * np.exp(-0.5 * t * t)
        elif self.kind == "power":
            s = self.param
            inside = t < 1.0
            with np.errstate(divide="ignore"):
                out = np.where(inside, np.maximum(1.0 - t, 1e-300) ** (1.0 / s - 1.0) / s, 0.0)
        elif self.kind == "indicator":
            raise ValueError("indicator profile has no pointwise derivative")
        else:
            n, p = self.ambient_dim, self.param
            tp = np.maximum(t, 1e-300)       # right-limit values at t = 0
            with np.errstate(over="ignore"):
                if p == 0.0:
                    out = n * tp ** (-n - 1.0)
                else:
                    a = abs(p)
                    out = n * tp ** (a - 1.0) * np.exp(-(n / a) * (np.minimum(tp, 1e300) ** a - 1.0))
        return out if out.ndim else float(out)

    def inverse_level(self, u: float) -> float:
        """sup{r >= 0 : phi(r) >= u} for 0 < u <= phi(0)."""
        if u <= 0:
            return math.inf if self.support_radius == math.inf else self.support_radius
        if self.kind == "exponential":
            return -math.log(u) if u <= 1.0 else 0.0
        if self.kind == "gaussian":
            return math.sqrt(-2.0 * math.log(u)) if u <= 1.0 else 0.0
        if self.kind == "power":
            return 1.0 - u ** self.param if u <= 1.0 else 0.0
        if self.kind == "indicator":
            return 1.0 if u <= 1.0 else 0.0
        n, p = self.ambient_dim, self.param
        if p == 0.0:
            return u ** (-1.0 / n)
        a = abs(p)
        inside = 1.0 - (a / n) * math.log(u)
        return max(inside, 0.0) ** (1.0 / a)

    def moment(self, k: float, q: float = 1.0) -> float:
        """Closed-form int_0^inf phi(t)^q t^k dt (k > -1, q > 0)."""
        if k <= -1 or q <= 0:
            raise ValueError("moment requires k > -1, q > 0")
        if self.kind == "exponential":
            return math.exp(special.gammaln(k + 1.0)) / q ** (k + 1.0)
        if self.kind == "gaussian":
            return 0.5 * (2.0 / q) ** ((k + 1.0) / 2.0) * math.exp(special.gammaln((k + 1.0) / 2.0))
        if self.kind == "power":
            return math.exp(special.betaln(k + 1.0, q / self.param + 1.0))
        if self.kind == "indicator":
            return 1.0 / (k + 1.0)
        n, p = self.ambient_dim, self.param
        if p == 0.0:
            raise NonIntegrableError("p=0 family has no finite moments")
        a = abs(p)
        c = q * n / a
        return math.exp(c + special.gammaln((k + 1.0) / a)) * c ** (-(k + 1.0) / a) / a

    def truncation_radius(self, eps: float, extra_power: float = 0.0) -> float:
        """Radius beyond which phi(r) * r^extra_power stays below eps."""
        if self.support_radius < math.inf:
            return self.support_radius
        r = self.inverse_level(min(eps, self.phi0))
        for _ in range(4):
            damp = eps / max(1.0, (2.0 * r) ** extra_power)
            r = max(r, self.inverse_level(damp))
        return r


def profile_from_kind(kind: str, s_or_p: float | None = None, ambient_dim: int = 1) -> Profile:
    if kind in ("power", "pfamily"):
        if s_or_p is None:
            raise ValueError(f"{kind} profile needs its parameter")
        return Profile(kind, float(s_or_p), ambient_dim)
    return Profile(kind, 0.0, ambient_dim)


@dataclass(frozen=True, eq=False)
class LogConcaveFunction:
    profile: Profile
    body: ConvexBody
    shift: np.ndarray
    amplitude: float = 1.0

    def __post_init__(self):
        if self.amplitude <= 0:
            raise ValueError("amplitude must be positive")
        if self.profile.kind == "pfamily" and self.profile.ambient_dim != self.body.dim:
            raise ValueError("pfamily profile bound to a different dimension")
        cc.gauge(self.body, np.zeros(self.body.dim))   # origin-in-body check

    @property
    def dim(self) -> int:
        return self.body.dim

    @property
    def sup_norm(self) -> float:
        return self.amplitude * self.profile.phi0

    def eval(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.amplitude * float(self.profile.value(cc.gauge(self.body, x - self.shift)))

    __call__ = eval

    def eval_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g = cc.gauge_many(self.body, X - self.shift)
        return self.amplitude * np.asarray(self.profile.value(g))

    def mass(self) -> float:
        """||f||_1 = A vol_n(K) n int phi(r) r^(n-1) dr."""
        n = self.dim
        return (self.amplitude * cc.volume(self.body).value
                * n * self.profile.moment(n - 1.0))

    def lp_norm(self, q: float) -> float:
        """(int f^q)^(1/q) for q > 0."""
        n = self.dim
        integral = (self.amplitude ** q * cc.volume(self.body).value
                    * n * self.profile.moment(n - 1.0, q=q))
        return integral ** (1.0 / q)

    def level_set(self, t: float) -> ConvexBody | None:
        """{f >= t} = shift + s*K; None when t exceeds the sup or s degenerates."""
        if t <= 0:
            raise ValueError("level must be positive")
        if t > self.sup_norm:
            return None
        s = self.profile.inverse_level(t / self.amplitude)
        if s <= 1e-15 or not math.isfinite(s):
            return None
        return cc.translate(cc.scale(self.body, s), self.shift)

    def level_scale(self, t: float) -> float:
        """The dilation factor s(t) with {f >= t} = shift + s(t) K (0 if empty)."""
        if t > self.sup_norm:
            return 0.0
        return self.profile.inverse_level(t / self.amplitude)

    def support_body(self) -> ConvexBody | None:
        """Closure of supp f when compact, else None."""
        R = self.profile.support_radius
        if R == math.inf:
            return None
        return cc.translate(cc.scale(self.body, R), self.shift)

    def coercivity_bound(self) -> tuple[float, float]:
        """(A, B) with f(x) <= A exp(-B |x|) everywhere; needs exponential-type decay."""
        kind, par = self.profile.kind, self.profile.param
        if kind == "pfamily" and abs(par) < 1:
            raise NonIntegrableError("p-family decay is subexponential for |p| < 1")
        lo, hi = cc.bounding_box(self.body)
        r_out = float(np.max(np.linalg.norm(np.array([lo, hi]), axis=1)))
        if self.body.kind == "polytope":
            r_out = float(np.max(np.linalg.norm(self.body.vertices, axis=1)))
        b = 1.0 / r_out
        # phi(t) <= C exp(-t) for every kind here (C covers the Gaussian crossover)
        if kind == "gaussian":
            c = math.exp(0.5)
        elif kind == "pfamily":
            n, a = self.profile.ambient_dim, abs(par)
            c = self.profile.phi0 * math.exp(_sup_gap(n, a))
        else:
            c = 1.0
        if kind in ("power", "indicator"):
            # compactly supported: A e^(R - |x|) dominates f inside |x| <= R
            reach = r_out * self.profile.support_radius + float(np.linalg.norm(self.shift))
            return self.amplitude * math.exp(reach), 1.0
        amp = self.amplitude * c * math.exp(b * float(np.linalg.norm(self.shift)))
        return amp, b


def _sup_gap(n: int, a: float) -> float:
    # sup_t [ t - (n/a) t^a ] for a >= 1 (finite; equals the crossover constant)
    if a == 1.0:
        return 0.0 if n >= 1 else math.inf
    t_star = (1.0 / n) ** (1.0 / (a - 1.0))
    return t_star - (n / a) * t_star ** a


def make_function(spec: dict) -> LogConcaveFunction:
    """Function from its JSON description (see the schema in the README)."""
    body = cc.make_body(spec["body"])
    prof = profile_from_kind(spec["profile"], spec.get("s_or_p"), ambient_dim=body.dim)
    shift = np.asarray(spec.get("shift", np.zeros(body.dim)), dtype=float)
    return LogConcaveFunction(prof, body, shift, float(spec.get("amplitude", 1.0)))
