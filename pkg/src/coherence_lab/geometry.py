"""Experiment layer: semiconjugacy, curves, witnesses, exponent fits, probes.

Everything here consumes the series layer.  Curves are generated in a lift
(real e_s-displacement against a real theta parameter) and wrapped into the
torus only for export, so divergence statements are well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cohomology as coh
from .bundles import apply_map
from .errors import (ConditionFails, ConditionViolated, InconsistentSigns,
                     SampleDegenerate, TooCloseToSingularity)
from .linalg import Point3, circle_dist

CENTER_FIBER = "CENTER_FIBER"
CENTER_ODE = "CENTER_ODE"
STRONG_STABLE = "STRONG_STABLE"

GAMMA_PRIME_AT_HALF = "GAMMA_PRIME_AT_HALF"
BETA_PRIME_AT_ZERO = "BETA_PRIME_AT_ZERO"

NON_DC_WITNESS = "NON_DYNAMICALLY_COHERENT_WITNESS"
COHERENT_CANDIDATE = "COHERENT_CANDIDATE"


def rho_exponent(lam, sigma):
    """Predicted blow-up rate of the center slope at the sink: 1 - log(lam)/log(sigma)."""
    return 1.0 - math.log(lam) / math.log(sigma)


def a_exponent(lam, mu):
    """Predicted blow-up rate of the stable slope at the source: 1 - log(lam)/log(mu)."""
    return 1.0 - math.log(lam) / math.log(mu)


@dataclass
class CurveSample:
    """Sampled curve on T^3 with its lift data.

    points are wrapped representatives; thetas and s_lift carry the unwrapped
    parametrization (theta parameter, e_s displacement from the base point).
    params records base point, range and the curve resolution `step`, defined
    as the largest ambient gap between consecutive lift points.
    """

    kind: str
    points: list
    thetas: np.ndarray
    s_lift: np.ndarray
    params: dict
    entered_band: bool = False

    def max_gap(self):
        if self.thetas.size < 2:
            return 0.0
        return float(np.max(np.hypot(np.diff(self.thetas), np.diff(self.s_lift))))


def _curve_from_lift(f, base, thetas, s_lift, kind, params, entered_band=False):
    pts = [Point3(base.x1 + s * f.e_s[0], base.x2 + s * f.e_s[1], th)
           for s, th in zip(s_lift, thetas)]
    curve = CurveSample(kind=kind, points=pts, thetas=np.asarray(thetas, dtype=float),
                        s_lift=np.asarray(s_lift, dtype=float), params=dict(params),
                        entered_band=entered_band)
    curve.params["step"] = curve.max_gap()
    return curve


def semiconjugacy(f, p, tol=1e-10):
    """Projection h(x, theta) = x - gamma(theta) e_s onto T^2; h o f = A o h."""
    g = coh.gamma(f.psi, f.v, f.lam, p.theta, tol=tol)
    return np.mod(p.x - g.value * f.e_s, 1.0)


def semiconjugacy_residual(f, p, tol=1e-10):
    """Torus distance between h(f(p)) and A(h(p)); vanishes for an exact h."""
    left = semiconjugacy(f, apply_map(f, p), tol=tol)
    right = np.mod(f.A.matrix @ semiconjugacy(f, p, tol=tol), 1.0)
    return float(np.hypot(circle_dist(left[0], right[0]),
                          circle_dist(left[1], right[1])))


def center_fiber(f, p0, theta_range, n, eta_half=1e-4, tol=1e-10):
    """Fiber of the semiconjugacy through p0: (x0 + (gamma(t)-gamma(t0)) e_s, t).

    Interior sample points must stay outside the eta_half band; the endpoints
    may touch it (the fiber itself extends continuously to the sink torus).
    """
    lo, hi = float(theta_range[0]), float(theta_range[1])
    thetas = np.linspace(lo, hi, int(n))
    inside = circle_dist(thetas, 0.5) < eta_half
    if np.any(inside[1:-1]):
        raise TooCloseToSingularity(
            "fiber range crosses the exclusion band around 1/2")
    g = coh.gamma_many(f.psi, f.v, f.lam, thetas, tol=tol)
    g0 = coh.gamma(f.psi, f.v, f.lam, p0.theta, tol=tol)
    s = g.values - g0.value
    return _curve_from_lift(f, p0, thetas, s, CENTER_FIBER,
                            {"base": (p0.x1, p0.x2, p0.theta),
                             "theta_range": (lo, hi), "n": int(n)})


def integrate_center(f, p0, arclen, step, eta_half=1e-4, tol=1e-10, direction=1):
    """Fourth-order streamline of the unit center field, stopping at the band.

    Returns the sampled curve; entered_band marks the normal termination when
    theta reaches the eta_half band before the arc length budget is used up.
    """
    if circle_dist(p0.theta, 0.5) <= eta_half:
        raise TooCloseToSingularity("start point lies inside the exclusion band")
    sgn = 1.0 if direction >= 0 else -1.0

    def unit_field(theta):
        g = coh.gamma_prime(f.psi, f.v, f.lam, theta, tol=tol, eta_half=eta_half)
        nrm = math.hypot(g.value, 1.0)
        return sgn * g.value / nrm, sgn / nrm

    thetas = [float(p0.theta)]
    s_vals = [0.0]
    traveled = 0.0
    entered = False
    while traveled < arclen:
        h = min(step, arclen - traveled)
        th = thetas[-1]
        try:
            k1s, k1t = unit_field(th)
            k2s, k2t = unit_field(th + 0.5 * h * k1t)
            k3s, k3t = unit_field(th + 0.5 * h * k2t)
            k4s, k4t = unit_field(th + h * k3t)
        except TooCloseToSingularity:
            entered = True
            break
        ds = h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s)
        dt = h / 6.0 * (k1t + 2 * k2t + 2 * k3t + k4t)
        th_new = th + dt
        if circle_dist(th_new, 0.5) <= eta_half:
            entered = True
            break
        thetas.append(th_new)
        s_vals.append(s_vals[-1] + ds)
        traveled += h
    return _curve_from_lift(f, p0, np.array(thetas), np.array(s_vals), CENTER_ODE,
                            {"base": (p0.x1, p0.x2, p0.theta), "arclen": arclen,
                             "step_requested": step}, entered_band=entered)


def fiber_deviation(f, curve, tol=1e-10):
    """Max pointwise e_s distance between an integrated curve and the matching fiber."""
    g = coh.gamma_many(f.psi, f.v, f.lam, curve.thetas, tol=tol)
    g0 = coh.gamma(f.psi, f.v, f.lam, curve.thetas[0], tol=tol)
    fiber_s = g.values - g0.value
    return float(np.max(np.abs(curve.s_lift - fiber_s)))


def strong_stable_curve(f, p0, theta_range, n, eta_zero=1e-4, tol=1e-10):
    """Strong stable curve through p0: (x0 + (beta(t)-beta(t0)) e_s, t).

    The displacement diverges as the range approaches the source circle, so
    every sample (endpoints included) must stay outside the eta_zero band.
    """
    lo, hi = float(theta_range[0]), float(theta_range[1])
    thetas = np.linspace(lo, hi, int(n))
    if np.any(circle_dist(thetas, 0.0) <= eta_zero) or circle_dist(p0.theta, 0.0) <= eta_zero:
        raise TooCloseToSingularity(
            "stable curve range enters the exclusion band around 0")
    b = coh.beta_many(f.psi, f.v, f.lam, thetas, tol=tol, eta=eta_zero)
    b0 = coh.beta(f.psi, f.v, f.lam, p0.theta, tol=tol, eta=eta_zero)
    if not np.all(b.ok):
        raise SampleDegenerate("stable displacement series failed inside the range")
    s = b.values - b0.value
    return _curve_from_lift(f, p0, thetas, s, STRONG_STABLE,
                            {"base": (p0.x1, p0.x2, p0.theta),
                             "theta_range": (lo, hi), "n": int(n)})


@dataclass
class WitnessReport:
    example: str
    sign_lower: int     # sign of gamma' sampled on the (0,1/2) side of the sink
    sign_upper: int     # sign sampled on the (1/2,1) side
    verdict: str
    samples: dict = field(default_factory=dict)

    def to_dict(self):
        return {"example": self.example, "signLower": self.sign_lower,
                "signUpper": self.sign_upper, "verdict": self.verdict,
                "samples": {k: list(map(float, v)) for k, v in self.samples.items()}}


def nonintegrability_witness(f, j_lo=4, j_hi=12, n_random=100, seed=0, tol=1e-10):
    """Sign witness for the center tilt on both sides of the sink circle.

    Samples gamma' at dyadic offsets 1/2 +- 2^-j plus random offsets drawn
    log-uniformly from the same window.  Opposite uniform signs preclude an
    invariant surface through the sink torus; equal uniform signs leave the
    fiber partition a genuine foliation.  Samples with |gamma'| < 1e-12 are
    discarded and redrawn.
    """
    if f.v.sup_abs == 0.0:
        raise InconsistentSigns("perturbation vanishes; center tilt is identically zero")
    rng = np.random.default_rng(seed)
    eta = 2.0 ** (-(j_hi + 4))
    dyadic = 2.0 ** (-np.arange(j_lo, j_hi + 1, dtype=float))

    def sample_side(side):
        vals = _gamma_prime_vals(f, 0.5 + side * dyadic, eta, tol)
        keep = np.abs(vals) >= 1e-12
        offs, vals = dyadic[keep], vals[keep]
        n_kept_random = 0
        for _ in range(5):
            need = n_random - n_kept_random
            if need <= 0:
                break
            draw = np.exp(rng.uniform(math.log(2.0 ** -j_hi), math.log(2.0 ** -j_lo), need))
            new_vals = _gamma_prime_vals(f, 0.5 + side * draw, eta, tol)
            keep = np.abs(new_vals) >= 1e-12
            offs = np.concatenate([offs, draw[keep]])
            vals = np.concatenate([vals, new_vals[keep]])
            n_kept_random += int(np.sum(keep))
        if vals.size == 0:
            raise InconsistentSigns("all samples degenerate on one side of the sink")
        if np.all(vals > 0):
            return 1, offs, vals
        if np.all(vals < 0):
            return -1, offs, vals
        raise InconsistentSigns(
            "center tilt changes sign within one side of the sink "
            "(check the configured profile/map pairing)")

    sign_lower, offs_lo, vals_lo = sample_side(-1.0)
    sign_upper, offs_up, vals_up = sample_side(+1.0)
    verdict = NON_DC_WITNESS if sign_lower != sign_upper else COHERENT_CANDIDATE
    return WitnessReport(example=f.v.family, sign_lower=sign_lower,
                         sign_upper=sign_upper, verdict=verdict,
                         samples={"offsetsLower": offs_lo, "valuesLower": vals_lo,
                                  "offsetsUpper": offs_up, "valuesUpper": vals_up})


def _gamma_prime_vals(f, thetas, eta, tol):
    out = coh.gamma_prime_many(f.psi, f.v, f.lam, thetas, tol=tol, eta_half=eta)
    if not np.all(out.ok):
        raise SampleDegenerate("center tilt series failed during witness sampling")
    return out.values


@dataclass
class ExponentFit:
    which: str
    offsets: np.ndarray
    log_d: np.ndarray
    log_val: np.ndarray
    slope: float
    predicted: float
    rel_deviation: float

    def to_dict(self):
        return {"which": self.which,
                "offsets": [float(x) for x in self.offsets],
                "logD": [float(x) for x in self.log_d],
                "logVal": [float(x) for x in self.log_val],
                "slope": self.slope, "predicted": self.predicted,
                "relDeviation": self.rel_deviation}


def blowup_fit(f, which, j_range=None, tol=1e-8):
    """Least-squares blow-up exponent against the predicted rate.

    Fits log|gamma'| (resp. log|beta'|) against -log d over dyadic offsets
    d = 2^-j; the predicted slopes are rho = 1 - log(lam)/log(sigma) at the
    sink and a = 1 - log(lam)/log(mu) at the source.
    """
    if f.v.family != coh.COS_BUMP:
        raise ConditionViolated(
            "blow-up exponent fits are defined for the cosine-bump profile")
    js = np.asarray(list(j_range if j_range is not None else range(6, 17)), dtype=float)
    if js.size < 8:
        raise ConditionViolated("need at least 8 dyadic offsets for a stable fit")
    d = 2.0 ** (-js)
    eta = 2.0 ** (-(js.max() + 4))
    if which == GAMMA_PRIME_AT_HALF:
        out = coh.gamma_prime_many(f.psi, f.v, f.lam, 0.5 + d, tol=tol, eta_half=eta)
        predicted = rho_exponent(f.lam, f.psi.sigma)
    elif which == BETA_PRIME_AT_ZERO:
        out = coh.beta_prime_many(f.psi, f.v, f.lam, d, tol=tol, eta_zero=eta)
        predicted = a_exponent(f.lam, f.psi.mu)
    else:
        raise ValueError("which must be GAMMA_PRIME_AT_HALF or BETA_PRIME_AT_ZERO")
    if not np.all(out.ok) or np.any(np.abs(out.values) < 1e-300):
        raise SampleDegenerate("blow-up samples vanish or fail to converge")
    x = -np.log(d)
    y = np.log(np.abs(out.values))
    slope = float(np.polyfit(x, y, 1)[0])
    return ExponentFit(which=which, offsets=d, log_d=np.log(d), log_val=y,
                       slope=slope, predicted=float(predicted),
                       rel_deviation=abs(slope - predicted) / abs(predicted))


@dataclass
class PositivityResult:
    lhs: float
    n_used: int
    verdict: bool
    c1: float
    c2: float
    c3: float
    theta0: float
    theta_star: float
    limit: float

    def to_dict(self):
        return {"lhs": self.lhs, "N": self.n_used, "verdict": self.verdict,
                "C1": self.c1, "C2": self.c2, "C3": self.c3,
                "theta0": self.theta0, "thetaStar": self.theta_star,
                "limit": self.limit}


def positivity_lhs(c1, c2, c3, ratio, lam, n):
    """C1*(1-ratio^(N+1))/(1-ratio) - C2*C3/(1-lam) for ratio = sigma/lambda."""
    return c1 * (1.0 - ratio ** (n + 1)) / (1.0 - ratio) - c2 * c3 / (1.0 - lam)


def positivity_condition(psi, v, lam, n_max=1000):
    """Same-sign criterion for the center tilt near the sink (symmetric setup).

    Uses the fundamental domain D = [psi(theta*), theta*] ending at the sign
    change theta* of v' on (1/2, 1): C1 bounds v' from below on [1/2, theta0],
    C2 bounds |v'| on [theta0, 1], C3 bounds psi' on D.  The truncated
    geometric bound must turn positive for some N <= n_max; otherwise
    ConditionFails reports the N -> infinity limit.
    """
    if v.theta_star is None:
        raise ConditionViolated("profile must have a single sign change of v' on (1/2,1)")
    theta_star = float(v.theta_star)
    theta0 = psi.eval(theta_star)
    if not (0.5 < theta0 < theta_star):
        raise ConditionViolated("fundamental domain does not sit inside (1/2, theta*)")
    grid1 = np.linspace(0.5, theta0, 4001)
    grid2 = np.linspace(theta0, 1.0, 4001)
    grid3 = np.linspace(theta0, theta_star, 4001)
    c1 = float(np.min(v.deriv(grid1)))
    c2 = float(np.max(np.abs(v.deriv(grid2))))
    c3 = float(np.max(psi.deriv_array(grid3)))
    if c1 <= 0:
        raise ConditionViolated("v' is not positive on [1/2, theta0]")
    ratio = psi.sigma / lam
    limit = c1 / (1.0 - ratio) - c2 * c3 / (1.0 - lam)
    for n in range(n_max + 1):
        lhs = positivity_lhs(c1, c2, c3, ratio, lam, n)
        if lhs > 0.0:
            return PositivityResult(lhs=lhs, n_used=n, verdict=True, c1=c1, c2=c2,
                                    c3=c3, theta0=theta0, theta_star=theta_star,
                                    limit=limit)
    raise ConditionFails(
        "positivity bound stays negative for N <= %d (limit %.6g); "
        "sigma/lambda is not close enough to 1" % (n_max, limit), limit=limit)


@dataclass
class ProbeRecord:
    theta0: float
    distances: np.ndarray
    first_below: int       # first iterate with distance < 1e-6, or -1
    late_ratio: float      # fitted per-step contraction over the linear regime

    def to_dict(self):
        return {"theta0": self.theta0, "firstBelow": self.first_below,
                "lateRatio": self.late_ratio,
                "distances": [float(x) for x in self.distances]}


def attractor_probe(f, p0, n_iter):
    """Forward orbit record of the circle distance to the sink torus.

    The distance decays geometrically once the orbit enters the linear regime;
    the fitted late-stage ratio approaches psi'(1/2).  Entries below the
    floating-point floor are recorded but excluded from the ratio fit.
    """
    if p0.theta == 0.0:
        raise ConditionViolated("probe start sits on the source torus")
    dist = np.empty(n_iter + 1)
    p = p0
    dist[0] = circle_dist(p.theta, 0.5)
    for k in range(1, n_iter + 1):
        p = apply_map(f, p)
        dist[k] = circle_dist(p.theta, 0.5)
    below = np.flatnonzero(dist < 1e-6)
    first_below = int(below[0]) if below.size else -1
    window = np.flatnonzero((dist > 1e-12) & (dist < 1e-2))
    window = window[-50:]
    if window.size >= 2:
        slope = float(np.polyfit(window.astype(float), np.log(dist[window]), 1)[0])
        late_ratio = math.exp(slope)
    else:
        late_ratio = math.nan
    return ProbeRecord(theta0=p0.theta, distances=dist, first_below=first_below,
                       late_ratio=late_ratio)


def reeb_strip_sample(f, anchor, n_curves, theta_range, n=400, eta_zero=1e-4,
                      spacing=0.02, tol=1e-10):
    """Strong stable curves inside one center-stable leaf.

    The leaf is the e_s x circle cylinder through the anchor; base points are
    spaced along e_s.  Every curve shows the same diverging displacement
    toward the source circle while pairwise e_s gaps stay constant, which is
    the strip picture obstructing a transverse section.
    """
    if n_curves < 1:
        raise ValueError("need at least one curve")
    curves = []
    for i in range(n_curves):
        off = i * spacing
        base = Point3(anchor.x1 + off * f.e_s[0], anchor.x2 + off * f.e_s[1],
                      anchor.theta)
        c = strong_stable_curve(f, base, theta_range, n, eta_zero=eta_zero, tol=tol)
        c.params["base_offset"] = off
        curves.append(c)
    return curves
