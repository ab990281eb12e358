"""North-South circle maps: evaluation, inversion, orbits, cocycles.

Two families are provided.  Both fix theta=0 (source, multiplier mu>1) and
theta=1/2 (sink, multiplier sigma<1), are degree-one and orientation
preserving, and satisfy the rate sandwich sigma < lambda < 1 < mu < 1/lambda
against the ambient toral contraction rate lambda.

SINE                theta + kappa*sin(2*pi*theta), so mu = 1+2*pi*kappa and
                    sigma = 1-2*pi*kappa.
PIECEWISE_SYMMETRIC affine with slope mu around 0 and slope sigma around 1/2,
                    joined by a monotone cubic Hermite arc on [delta_zero,
                    1/2-delta_half], then reflected so that
                    psi(1-theta) = 1 - psi(theta) exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditionViolated, GeometryInfeasible, NoConvergence, SampleDegenerate
from .linalg import circle_dist

TWO_PI = 2.0 * np.pi

SINE = "SINE"
PIECEWISE_SYMMETRIC = "PIECEWISE_SYMMETRIC"

FORWARD = "FORWARD"
BACKWARD = "BACKWARD"


class MorseSmaleMap:
    """Base class; subclasses provide the lift and its derivative on [0,1]."""

    family = None

    def __init__(self, mu, sigma):
        self.mu = float(mu)
        self.sigma = float(sigma)

    # -- lift interface ----------------------------------------------------
    def _lift_val(self, u):
        raise NotImplementedError

    def _lift_deriv(self, u):
        raise NotImplementedError

    # -- public evaluation -------------------------------------------------
    def eval_array(self, thetas):
        u = np.mod(np.asarray(thetas, dtype=float), 1.0)
        return np.mod(self._lift_val(u), 1.0)

    def deriv_array(self, thetas):
        u = np.mod(np.asarray(thetas, dtype=float), 1.0)
        return self._lift_deriv(u)

    def eval(self, theta):
        return float(self.eval_array(np.float64(theta)))

    def deriv(self, theta):
        return float(self.deriv_array(np.float64(theta)))

    # -- inversion -----------------------------------------------------------
    def invert(self, theta, tol=1e-13):
        """Unique preimage on the circle: bracketed bisection then Newton polish."""
        if tol <= 0:
            raise ValueError("tol must be positive")
        y = float(np.mod(theta, 1.0))
        if y == 0.0:
            return 0.0
        if float(self._lift_val(np.float64(y))) == y:
            # exact fixed point: unique preimage is the point itself
            return y
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-8:
            mid = 0.5 * (lo + hi)
            if float(self._lift_val(np.float64(mid))) < y:
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        for _ in range(12):
            fx = float(self._lift_val(np.float64(x))) - y
            if abs(fx) <= tol:
                return x
            if fx < 0:
                lo = x
            else:
                hi = x
            step = fx / float(self._lift_deriv(np.float64(x)))
            x_new = x - step
            if not (lo <= x_new <= hi):
                x_new = 0.5 * (lo + hi)
            x = x_new
        if abs(float(self._lift_val(np.float64(x))) - y) <= tol:
            return x
        raise NoConvergence(
            "inversion stalled at residual %.3e (target %.1e); map may not be monotone"
            % (abs(float(self._lift_val(np.float64(x))) - y), tol)
        )

    def invert_array(self, thetas):
        """Vectorized preimage; fixed bisection schedule plus Newton polish."""
        y = np.mod(np.asarray(thetas, dtype=float), 1.0)
        lo = np.zeros_like(y)
        hi = np.ones_like(y)
        for _ in range(46):
            mid = 0.5 * (lo + hi)
            below = self._lift_val(mid) < y
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        x = 0.5 * (lo + hi)
        for _ in range(2):
            f = self._lift_val(x) - y
            x = np.clip(x - f / self._lift_deriv(x), lo, hi)
        # exact fixed points invert to themselves; rounding must not seed an
        # orbit escaping the sink
        x = np.where(self._lift_val(y) == y, y, x)
        return np.where(y == 0.0, 0.0, x)

    # -- orbits --------------------------------------------------------------
    def orbit(self, theta, k, direction=FORWARD):
        """Orbit segment with the running derivative cocycle.

        FORWARD:  cocycle[i] = (psi^i)'(theta)
        BACKWARD: cocycle[i] = (psi^{-i})'(theta) = prod_j 1/psi'(points[j]), j=1..i
        """
        if k < 0:
            raise ValueError("orbit length must be nonnegative")
        pts = np.empty(k + 1)
        coc = np.empty(k + 1)
        pts[0] = np.mod(theta, 1.0)
        coc[0] = 1.0
        for i in range(1, k + 1):
            if direction == FORWARD:
                coc[i] = coc[i - 1] * self.deriv(pts[i - 1])
                pts[i] = self.eval(pts[i - 1])
            elif direction == BACKWARD:
                pts[i] = self.invert(pts[i - 1])
                coc[i] = coc[i - 1] / self.deriv(pts[i])
            else:
                raise ValueError("direction must be FORWARD or BACKWARD")
        return OrbitSegment(base=float(pts[0]), direction=direction, length=k,
                            points=pts, cocycle=coc)

    # -- fixed-point local steps (cancellation-free deviations) -------------
    # Deviations from the sink must be tracked in their own float: the sink
    # sits at 1/2 where the absolute resolution is ~5.5e-17, while lam^-k
    # weighted series keep drawing contributions from far smaller scales.
    sink_zone = None  # |s| range where sink_step_array is valid and contracting

    def sink_step(self, s):
        """One forward step of the signed deviation from the sink at 1/2."""
        raise NotImplementedError

    def sink_step_array(self, s):
        """Vectorized sink_step, valid for |s| <= sink_zone."""
        raise NotImplementedError

    def source_backstep(self, s):
        """One backward step of the signed deviation from the source at 0."""
        raise NotImplementedError


@dataclass
class OrbitSegment:
    base: float
    direction: str
    length: int
    points: np.ndarray
    cocycle: np.ndarray


class SineCircleMap(MorseSmaleMap):
    """theta + kappa*sin(2*pi*theta) mod 1."""

    family = SINE

    def __init__(self, kappa):
        self.kappa = float(kappa)
        super().__init__(mu=1.0 + TWO_PI * kappa, sigma=1.0 - TWO_PI * kappa)

    def _lift_val(self, u):
        return u + self.kappa * np.sin(TWO_PI * u)

    def _lift_deriv(self, u):
        return 1.0 + TWO_PI * self.kappa * np.cos(TWO_PI * u)

    sink_zone = 0.25

    def sink_step(self, s):
        # psi(1/2 + s) - 1/2 == s - kappa*sin(2*pi*s), exactly, for all s
        return s - self.kappa * float(np.sin(TWO_PI * s))

    def sink_step_array(self, s):
        return s - self.kappa * np.sin(TWO_PI * s)

    def source_backstep(self, s):
        # solve t + kappa*sin(2*pi*t) = s for t, in deviation coordinates
        t = s / self.mu
        for _ in range(30):
            f = t + self.kappa * float(np.sin(TWO_PI * t)) - s
            t -= f / (1.0 + TWO_PI * self.kappa * float(np.cos(TWO_PI * t)))
            if abs(f) < 1e-17 * (1.0 + abs(s)):
                break
        return t


class SymmetricCircleMap(MorseSmaleMap):
    """Piecewise map, affine at both poles, symmetric about 1/2."""

    family = PIECEWISE_SYMMETRIC

    def __init__(self, sigma, mu, delta_half, delta_zero):
        super().__init__(mu=mu, sigma=sigma)
        self.delta_half = float(delta_half)
        self.delta_zero = float(delta_zero)
        self.p = float(delta_zero)              # end of the slope-mu piece
        self.q = 0.5 - float(delta_half)        # start of the slope-sigma piece
        self.ya = self.mu * self.p
        self.yb = 0.5 - self.sigma * self.delta_half
        self.h = self.q - self.p
        self.slope_mean = (self.yb - self.ya) / self.h

    # cubic Hermite arc joining the affine pieces on [p, q]
    def _hermite_val(self, w):
        s = np.clip((w - self.p) / self.h, 0.0, 1.0)
        s2 = s * s
        s3 = s2 * s
        return (self.ya * (2 * s3 - 3 * s2 + 1)
                + self.h * self.mu * (s3 - 2 * s2 + s)
                + self.yb * (-2 * s3 + 3 * s2)
                + self.h * self.sigma * (s3 - s2))

    def _hermite_deriv(self, w):
        s = np.clip((w - self.p) / self.h, 0.0, 1.0)
        s2 = s * s
        return (6 * s * (1 - s) * self.slope_mean
                + self.mu * (3 * s2 - 4 * s + 1)
                + self.sigma * (3 * s2 - 2 * s))

    def _base_val(self, w):
        # lift restricted to [0, 1/2]
        return np.select(
            [w <= self.p, w >= self.q],
            [self.mu * w, 0.5 + self.sigma * (w - 0.5)],
            default=self._hermite_val(w))

    def _base_deriv(self, w):
        return np.select(
            [w <= self.p, w >= self.q],
            [np.full_like(np.asarray(w, dtype=float), self.mu),
             np.full_like(np.asarray(w, dtype=float), self.sigma)],
            default=self._hermite_deriv(w))

    def _lift_val(self, u):
        u = np.asarray(u, dtype=float)
        w = np.where(u > 0.5, 1.0 - u, u)
        base = self._base_val(w)
        return np.where(u > 0.5, 1.0 - base, base)

    def _lift_deriv(self, u):
        u = np.asarray(u, dtype=float)
        w = np.where(u > 0.5, 1.0 - u, u)
        return self._base_deriv(w)

    @property
    def sink_zone(self):
        return self.delta_half

    def sink_step(self, s):
        if abs(s) <= self.delta_half:
            return self.sigma * s
        pt = self.eval(0.5 + s)
        d = pt - 0.5 if pt >= 0.5 else -(0.5 - pt)
        return d

    def sink_step_array(self, s):
        return self.sigma * s

    def source_backstep(self, s):
        if abs(s) <= self.ya:
            return s / self.mu
        x = self.invert(np.mod(s, 1.0))
        return x if x <= 0.5 else x - 1.0


def _require(cond, message):
    if not cond:
        raise ConditionViolated(message)


def _validate_rates(sigma, mu, lam):
    _require(0.0 < lam < 1.0, "toral contraction rate lambda=%.9g must lie in (0,1)" % lam)
    _require(sigma > 0.0,
             "sink multiplier sigma=%.9g must be positive (map not strictly increasing)" % sigma)
    _require(sigma < lam,
             "sink multiplier sigma=%.9g must contract strictly faster than lambda=%.9g" % (sigma, lam))
    _require(mu > 1.0, "source multiplier mu=%.9g must expand (exceed 1)" % mu)
    _require(mu < 1.0 / lam,
             "source multiplier mu=%.9g must expand strictly slower than 1/lambda=%.9g" % (mu, 1.0 / lam))


def _check_constructed(psi, lam, grid_n=4096):
    """Numerical verification of the North-South invariants after construction."""
    u = np.linspace(0.0, 1.0, grid_n, endpoint=False)
    d = psi.deriv_array(u)
    if not np.all(d > 0):
        raise GeometryInfeasible("derivative is not positive everywhere (min %.3e)" % d.min())
    if abs(psi.eval(0.0)) > 1e-12 or abs(psi.eval(0.5) - 0.5) > 1e-12:
        raise ConditionViolated("fixed points at 0 and 1/2 are not preserved")
    if abs(psi.deriv(0.0) - psi.mu) > 1e-12 or abs(psi.deriv(0.5) - psi.sigma) > 1e-12:
        raise ConditionViolated("multipliers at the poles do not match mu/sigma")
    interior = u[(u > 1e-3) & (u < 0.5 - 1e-3)]
    gap = psi.eval_array(interior) - interior
    if not np.all(gap > 0):
        raise GeometryInfeasible("interior fixed point detected on (0,1/2)")


def make_sine_map(kappa, lam):
    """Sine-family map validated against the rate sandwich for this lambda."""
    kappa = float(kappa)
    _require(kappa > 0.0, "kappa must be positive")
    _require(kappa < 1.0 / TWO_PI,
             "kappa=%.9g >= 1/(2*pi): derivative at the sink would be <= 0 "
             "(map not strictly increasing)" % kappa)
    psi = SineCircleMap(kappa)
    _validate_rates(psi.sigma, psi.mu, float(lam))
    _check_constructed(psi, lam)
    return psi


def make_symmetric_map(sigma, mu, lam, delta_half, delta_zero):
    """Piecewise-symmetric map; raises GeometryInfeasible when pieces cannot join."""
    sigma, mu, lam = float(sigma), float(mu), float(lam)
    _validate_rates(sigma, mu, lam)
    _require(delta_half > 0 and delta_zero > 0, "affine half-widths must be positive")
    if delta_zero >= 0.5 - delta_half:
        raise GeometryInfeasible("affine pieces leave no room for the joining arc")
    psi = SymmetricCircleMap(sigma, mu, delta_half, delta_zero)
    if psi.ya >= psi.yb:
        raise GeometryInfeasible(
            "affine pieces cannot be joined monotonically (values %.6g >= %.6g)"
            % (psi.ya, psi.yb))
    # Fritsch-Carlson screen for the Hermite arc, then a dense grid check
    alpha = psi.mu / psi.slope_mean
    beta = psi.sigma / psi.slope_mean
    if alpha + beta - 2.0 > 0.0:
        phi = alpha - (2 * alpha + beta - 3.0) ** 2 / (3.0 * (alpha + beta - 2.0))
        if phi < 0.0:
            raise GeometryInfeasible("joining arc is not monotone for these slopes")
    _check_constructed(psi, lam)
    # symmetry is exact by construction; verify on a grid anyway
    u = np.linspace(1e-4, 0.5 - 1e-4, 2000)
    sym = psi.eval_array(1.0 - u) + psi.eval_array(u) - 1.0
    if np.max(np.abs(sym)) > 1e-12:
        raise ConditionViolated("symmetry identity psi(1-t)+psi(t)=1 fails")
    return psi


def comparison_constants(psi, eps0, sample_size=40, k_max=60):
    """Empirical two-sided comparison constants near both poles.

    Samples theta within eps0 of the sink (forward orbits, rates against
    sigma^k) and of the source (backward orbits, rates against mu^{-k}), and
    returns (c0_deriv, c0_dist): for each family the infimum of the sampled
    ratios clipped against the reciprocal of their supremum, so that
    c0 <= ratio <= 1/c0 holds on the whole sample.  Orbits are tracked in
    deviation coordinates so the ratios stay meaningful at double precision.
    """
    _require(0.0 < eps0 < 0.25, "eps0=%.6g must lie in (0, 1/4)" % eps0)
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    offsets = np.linspace(eps0 / sample_size, eps0, sample_size)
    dev_floor = 1e-250

    d_lo = d_hi = 1.0   # derivative-ratio envelope
    x_lo = x_hi = 1.0   # distance-ratio envelope

    def fold(lo, hi, r):
        if not np.isfinite(r) or r <= 0.0:
            raise SampleDegenerate("comparison ratio is non-finite")
        return min(lo, r), max(hi, r)

    for s0 in np.concatenate([offsets, -offsets]):
        # sink family: forward orbit of 1/2 + s0
        s = s0
        rd = 1.0
        rx = 1.0
        for _ in range(k_max):
            rd *= psi.deriv(0.5 + s) / psi.sigma
            s_next = psi.sink_step(s)
            d_lo, d_hi = fold(d_lo, d_hi, rd)
            if abs(s_next) > dev_floor and abs(s) > dev_floor:
                rx *= (abs(s_next) / abs(s)) / psi.sigma
                x_lo, x_hi = fold(x_lo, x_hi, rx)
            s = s_next
        # source family: backward orbit of s0 (deviation from 0)
        s = s0
        rd = 1.0
        rx = 1.0
        for _ in range(k_max):
            s_next = psi.source_backstep(s)
            rd *= psi.mu / psi.deriv(s_next)
            d_lo, d_hi = fold(d_lo, d_hi, rd)
            if abs(s_next) > dev_floor and abs(s) > dev_floor:
                rx *= (abs(s_next) / abs(s)) * psi.mu
                x_lo, x_hi = fold(x_lo, x_hi, rx)
            s = s_next

    c0_deriv = min(d_lo, 1.0 / d_hi)
    c0_dist = min(x_lo, 1.0 / x_hi)
    if min(c0_deriv, c0_dist) < 1e-6:
        raise SampleDegenerate(
            "comparison ratios drift (c0 ~ %.3e); eps0 likely spans a non-contracting region"
            % min(c0_deriv, c0_dist))
    return c0_deriv, c0_dist
