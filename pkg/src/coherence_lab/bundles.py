"""Invariant line fields and the finite-horizon splitting certification.

The skew product is f(x, theta) = (A x + v(theta) e_s, psi(theta)).  In the
frame (e_s, e_u, d/dtheta), treated as orthonormal for all norms, the
differential is block triangular: the e_u component is multiplied by 1/lambda
and the (e_s, theta) plane evolves by

    (s, t)  |->  (lambda*s + t*v'(theta), t*psi'(theta)).

The candidate line fields are spanned by (gamma'(theta), 0, 1) for the center
and (beta'(theta), 0, 1) for the stable, with horizontal limits on the two
invariant tori.  Certification pushes one unit vector per bundle along an
orbit for N steps with scalar renormalization and reports geometric-mean
growth factors per point; the verdict demands the strict pointwise ordering
g_s < g_c < g_u together with g_s < 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cohomology as coh
from .errors import CertificationFailed, ConditionViolated, HorizonTooShort, NoDecay
from .linalg import Point3, Tangent3, ToralAutomorphism, circle_dist

FIELD_S = "S"
FIELD_C = "C"
FIELD_U = "U"


@dataclass
class SkewProduct:
    A: ToralAutomorphism
    psi: object
    v: coh.Profile

    def __post_init__(self):
        lam, mu, sigma = self.A.lam, self.psi.mu, self.psi.sigma
        if not (sigma < lam < 1.0 < mu < 1.0 / lam):
            raise ConditionViolated(
                "rates must satisfy sigma < lambda < 1 < mu < 1/lambda, got "
                "sigma=%.9g lambda=%.9g mu=%.9g 1/lambda=%.9g"
                % (sigma, lam, mu, 1.0 / lam))

    @property
    def lam(self):
        return self.A.lam

    @property
    def e_s(self):
        return self.A.e_s

    @property
    def e_u(self):
        return self.A.e_u


def apply_map(f, p):
    """One step of the skew product, wrapped into [0,1)^3."""
    x = f.A.matrix @ p.x + float(f.v(np.float64(p.theta))) * f.e_s
    return Point3(x[0], x[1], f.psi.eval(p.theta))


def differential(f, p, w):
    """Derivative action on a tangent vector at p."""
    vec = (f.A.matrix @ w.v
           + w.t * float(f.v.deriv(np.float64(p.theta))) * f.e_s)
    return Tangent3(vec, w.t * f.psi.deriv(p.theta))


@dataclass(frozen=True)
class LineDirection:
    """Projective direction in the (e_s, e_u, d/theta) frame.

    Stored as a unit vector with canonical sign: theta component positive,
    falling back to the e_s then e_u component when earlier ones vanish.
    """

    s: float
    u: float
    t: float

    def __post_init__(self):
        n = math.hypot(self.s, self.u, self.t)
        if n == 0.0:
            raise ValueError("zero vector cannot span a line")
        s, u, t = self.s / n, self.u / n, self.t / n
        if t < 0 or (t == 0 and (s < 0 or (s == 0 and u < 0))):
            s, u, t = -s, -u, -t
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_cs_pair(cls, p, q):
        return cls(p, 0.0, q)

    @property
    def slope(self):
        """e_s component per unit of circle component; inf for horizontal lines."""
        if self.t == 0.0:
            return math.inf
        return self.s / self.t

    def angle_to(self, other):
        dot = abs(self.s * other.s + self.u * other.u + self.t * other.t)
        return math.acos(min(1.0, dot))

    def as_array(self):
        return np.array([self.s, self.u, self.t])


def center_direction(f, theta, eta_half=1e-4, tol=1e-10):
    """Center line at theta: span(gamma'(theta) e_s, 1), horizontal at the sink torus.

    Inside the eta_half band the proven-continuous limit span(e_s) is used;
    at the exact source torus the closed-form slope v'(0)/(mu-lambda) applies.
    """
    th = float(np.mod(theta, 1.0))
    if th == 0.0:
        return LineDirection.from_cs_pair(
            coh.center_slope_at_source(f.v, f.lam, f.psi.mu), 1.0)
    if th == 0.5 or circle_dist(th, 0.5) <= eta_half:
        return LineDirection.from_cs_pair(1.0, 0.0)
    g = coh.gamma_prime(f.psi, f.v, f.lam, th, tol=tol, eta_half=eta_half)
    return LineDirection.from_cs_pair(g.value, 1.0)


def stable_direction(f, theta, eta_zero=1e-4, tol=1e-10):
    """Stable line at theta: span(beta'(theta) e_s, 1), horizontal at the source torus.

    At the exact sink torus the closed-form slope v'(1/2)/(sigma-lambda) is
    used (zero slope when v'(1/2)=0); inside the eta_zero band the horizontal
    limit span(e_s) applies.
    """
    th = float(np.mod(theta, 1.0))
    if th == 0.5:
        return LineDirection.from_cs_pair(
            coh.stable_slope_at_sink(f.v, f.lam, f.psi.sigma), 1.0)
    if th == 0.0 or circle_dist(th, 0.0) <= eta_zero:
        return LineDirection.from_cs_pair(1.0, 0.0)
    b = coh.beta_prime(f.psi, f.v, f.lam, th, tol=tol, eta_zero=eta_zero)
    return LineDirection.from_cs_pair(b.value, 1.0)


def unstable_direction(f):
    return LineDirection(0.0, 1.0, 0.0)


def _direction_at(f, theta, fld, eta_half, eta_zero, tol):
    if fld == FIELD_S:
        return stable_direction(f, theta, eta_zero=eta_zero, tol=tol)
    if fld == FIELD_C:
        return center_direction(f, theta, eta_half=eta_half, tol=tol)
    if fld == FIELD_U:
        return unstable_direction(f)
    raise ValueError("field must be one of S, C, U")


def check_invariance(f, fld, p, tol=1e-6, eta_half=1e-4, eta_zero=1e-4,
                     series_tol=1e-10):
    """Angle between the pushed-forward line at p and the line at f(p).

    The caller keeps both p and f(p) outside the relevant exclusion band (or
    both on a fixed torus); the returned angle should stay below tol.
    """
    th = float(np.mod(p.theta, 1.0))
    w = _direction_at(f, th, fld, eta_half, eta_zero, series_tol)
    th_next = f.psi.eval(th)
    w_next = _direction_at(f, th_next, fld, eta_half, eta_zero, series_tol)
    vp = float(f.v.deriv(np.float64(th)))
    dp = f.psi.deriv(th)
    pushed = LineDirection(f.lam * w.s + w.t * vp, w.u / f.lam, w.t * dp)
    return pushed.angle_to(w_next)


@dataclass
class GridSpec:
    """Circle grid: n equispaced points minus the exclusion bands, plus the tori."""

    n: int
    eta_half: float = 1e-4
    eta_zero: float = 1e-4
    include_tori: bool = True

    def points(self):
        base = np.arange(self.n, dtype=float) / self.n
        keep = ((circle_dist(base, 0.0) > self.eta_zero)
                & (circle_dist(base, 0.5) > self.eta_half))
        pts = base[keep]
        if self.include_tori:
            pts = np.concatenate([[0.0, 0.5], pts])
        return np.unique(pts)

    def to_dict(self):
        return {"n": self.n, "etaHalf": self.eta_half, "etaZero": self.eta_zero,
                "includeTori": self.include_tori}


@dataclass
class CertificationReport:
    grid: GridSpec
    horizon: int
    thetas: np.ndarray
    g_s: np.ndarray
    g_c: np.ndarray
    g_u: np.ndarray
    margins: dict = field(init=False)
    verdict: bool = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore"):
            self.margins = {
                "center_over_stable": float(np.min(self.g_c / self.g_s)),
                "unstable_over_center": float(np.min(self.g_u / self.g_c)),
                "stable_max": float(np.max(self.g_s)),
            }
        self.verdict = bool(np.all(self.g_c > self.g_s)
                            and np.all(self.g_u > self.g_c)
                            and np.all(self.g_s < 1.0))

    def to_dict(self):
        return {
            "gridSpec": self.grid.to_dict(),
            "N": self.horizon,
            "rows": [{"theta": float(t), "gS": float(a), "gC": float(b), "gU": float(c)}
                     for t, a, b, c in zip(self.thetas, self.g_s, self.g_c, self.g_u)],
            "margins": self.margins,
            "verdict": self.verdict,
        }


def _initial_cs_vectors(f, thetas, eta_half, eta_zero, tol):
    """Unit (s,t) frame components of the stable and center lines at each theta."""
    n = thetas.size
    exact0 = thetas == 0.0
    exact5 = thetas == 0.5
    band5 = (circle_dist(thetas, 0.5) <= eta_half) & ~exact5
    band0 = (circle_dist(thetas, 0.0) <= eta_zero) & ~exact0

    gslope = np.empty(n)
    bslope = np.empty(n)
    generic_c = ~(exact0 | exact5 | band5)
    generic_s = ~(exact0 | exact5 | band0)
    if np.any(generic_c):
        gp = coh.gamma_prime_many(f.psi, f.v, f.lam, thetas[generic_c],
                                  tol=tol, eta_half=0.0)
        if not np.all(gp.ok):
            raise NoDecay("center slope series failed on the grid")
        gslope[generic_c] = gp.values
    if np.any(generic_s):
        bp = coh.beta_prime_many(f.psi, f.v, f.lam, thetas[generic_s],
                                 tol=tol, eta_zero=0.0)
        if not np.all(bp.ok):
            raise NoDecay("stable slope series failed on the grid")
        bslope[generic_s] = bp.values
    gslope[exact0] = coh.center_slope_at_source(f.v, f.lam, f.psi.mu)
    bslope[exact5] = coh.stable_slope_at_sink(f.v, f.lam, f.psi.sigma)

    def unit(sl, horizontal_mask):
        s = np.where(horizontal_mask, 1.0, sl)
        t = np.where(horizontal_mask, 0.0, 1.0)
        nrm = np.hypot(s, t)
        return s / nrm, t / nrm

    c_s, c_t = unit(gslope, exact5 | band5)
    s_s, s_t = unit(bslope, exact0 | band0)
    return (s_s, s_t), (c_s, c_t)


def _growth_logs(f, thetas, n_steps, eta_half, eta_zero, tol):
    """Per-step log growth factors of the stable and center bundles along orbits."""
    (s_s, s_t), (c_s, c_t) = _initial_cs_vectors(f, thetas, eta_half, eta_zero, tol)
    lam = f.lam
    th = thetas.copy()
    logs_s = np.empty((n_steps, thetas.size))
    logs_c = np.empty((n_steps, thetas.size))
    for i in range(n_steps):
        vp = np.asarray(f.v.deriv(th), dtype=float)
        dp = f.psi.deriv_array(th)
        for (vs, vt, logs) in ((s_s, s_t, logs_s), (c_s, c_t, logs_c)):
            ns = lam * vs + vt * vp
            nt = vt * dp
            nrm = np.hypot(ns, nt)
            logs[i] = np.log(nrm)
            vs[:] = ns / nrm
            vt[:] = nt / nrm
        th = f.psi.eval_array(th)
    return logs_s, logs_c


def _report_from_logs(f, grid, thetas, logs_s, logs_c, n):
    g_s = np.exp(logs_s[:n].sum(axis=0) / n)
    g_c = np.exp(logs_c[:n].sum(axis=0) / n)
    g_u = np.full(thetas.size, 1.0 / f.lam)
    return CertificationReport(grid=grid, horizon=n, thetas=thetas,
                               g_s=g_s, g_c=g_c, g_u=g_u)


def _ordering_margin(report):
    return min(report.margins["center_over_stable"],
               report.margins["unstable_over_center"],
               1.0 / report.margins["stable_max"])


def certify_ph(f, grid, n_steps=8, tol=1e-10):
    """Certify the pointwise splitting inequalities at horizon n_steps.

    Returns the report when the verdict holds.  Otherwise raises
    HorizonTooShort when the failure margins still improve with the horizon
    (retry with larger N), or CertificationFailed when they do not.
    """
    if n_steps < 1:
        raise ValueError("horizon must be >= 1")
    thetas = grid.points()
    logs_s, logs_c = _growth_logs(f, thetas, n_steps, grid.eta_half, grid.eta_zero, tol)
    report = _report_from_logs(f, grid, thetas, logs_s, logs_c, n_steps)
    if report.verdict:
        return report
    reference = _report_from_logs(f, grid, thetas, logs_s, logs_c,
                                  max(1, n_steps // 2))
    if _ordering_margin(report) > _ordering_margin(reference):
        raise HorizonTooShort(
            "ordering fails at N=%d but margins improve with the horizon" % n_steps,
            report=report)
    raise CertificationFailed(
        "splitting ordering fails at N=%d (margin %.6g) and does not improve"
        % (n_steps, _ordering_margin(report)), report=report)


def certify_scan(f, grid, n_max=20, tol=1e-10):
    """Smallest horizon N <= n_max whose report certifies; raises otherwise."""
    thetas = grid.points()
    logs_s, logs_c = _growth_logs(f, thetas, n_max, grid.eta_half, grid.eta_zero, tol)
    last = None
    for n in range(1, n_max + 1):
        last = _report_from_logs(f, grid, thetas, logs_s, logs_c, n)
        if last.verdict:
            return last
    reference = _report_from_logs(f, grid, thetas, logs_s, logs_c, max(1, n_max // 2))
    if _ordering_margin(last) > _ordering_margin(reference):
        raise HorizonTooShort(
            "no horizon up to N=%d certifies but margins improve" % n_max, report=last)
    raise CertificationFailed(
        "no horizon up to N=%d certifies (margin %.6g)"
        % (n_max, _ordering_margin(last)), report=last)


@dataclass
class AlphaPrimeReport:
    min_abs: float
    sign_lower: int          # sign of alpha' on (0,1/2): +1, -1, or 0 if mixed
    sign_upper: int          # sign on (1/2,1)
    degenerate: bool
    fe_residual_max: float   # max of |a'(psi t)psi'(t) - lam a'(t)| / (1+|a'(t)|)
    n_points: int

    def to_dict(self):
        return {"minAbs": self.min_abs, "signLower": self.sign_lower,
                "signUpper": self.sign_upper, "degenerate": self.degenerate,
                "feResidualMax": self.fe_residual_max, "nPoints": self.n_points}


def _component_sign(vals):
    if vals.size == 0:
        return 0
    pos = np.all(vals > 0)
    neg = np.all(vals < 0)
    return 1 if pos else (-1 if neg else 0)


def min_alpha_prime(f, grid, tol=1e-10):
    """Minimum of |alpha'| over the admissible grid with per-component signs.

    alpha' = gamma' - beta' measures the angle between the center and stable
    lines; a strictly positive minimum witnesses a genuine splitting.  The
    functional-equation residual alpha'(psi t) psi'(t) - lam alpha'(t) is
    checked on every grid pair whose image is also admissible.
    """
    inner = GridSpec(grid.n, grid.eta_half, grid.eta_zero, include_tori=False)
    thetas = inner.points()
    ap = coh.alpha_prime_many(f.psi, f.v, f.lam, thetas, tol=tol,
                              eta_half=grid.eta_half, eta_zero=grid.eta_zero)
    vals = ap.values[ap.ok]
    ths = thetas[ap.ok]
    if vals.size == 0 or np.all(vals == 0.0):
        return AlphaPrimeReport(0.0, 0, 0, True, 0.0, int(vals.size))

    nxt = f.psi.eval_array(ths)
    adm_next = ((circle_dist(nxt, 0.0) > grid.eta_zero)
                & (circle_dist(nxt, 0.5) > grid.eta_half))
    ap_next = coh.alpha_prime_many(f.psi, f.v, f.lam, nxt[adm_next], tol=tol,
                                   eta_half=grid.eta_half, eta_zero=grid.eta_zero)
    pair_ok = ap_next.ok
    res = np.abs(ap_next.values[pair_ok] * f.psi.deriv_array(ths[adm_next][pair_ok])
                 - f.lam * vals[adm_next][pair_ok])
    scaled = res / (1.0 + np.abs(vals[adm_next][pair_ok]))

    return AlphaPrimeReport(
        min_abs=float(np.min(np.abs(vals))),
        sign_lower=_component_sign(vals[ths < 0.5]),
        sign_upper=_component_sign(vals[ths > 0.5]),
        degenerate=False,
        fe_residual_max=float(np.max(scaled)) if scaled.size else 0.0,
        n_points=int(vals.size))
