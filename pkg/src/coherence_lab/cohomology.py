"""Series solutions of the twisted equation u(psi(theta)) - lambda*u(theta) = v(theta).

Three solutions are computed by summing transfer series along orbits of psi:

    gamma(theta) = (1/lam) * sum_{k>=1} lam^k  v(psi^{-k} theta)   (backward orbit)
    beta(theta)  = -(1/lam) * sum_{k>=0} lam^-k v(psi^k theta)     (forward orbit)
    alpha        = gamma - beta, solving u(psi theta) = lam*u(theta)

gamma converges geometrically for any bounded v and carries an a-priori tail
bound.  beta and the differentiated series have no closed-form tail, so
truncation is controlled by the observed term ratios: once five consecutive
ratios fall below 1 the remaining tail is bounded by a geometric series built
from the largest ratio in that window.  beta blows up at theta=0 and
gamma' at theta=1/2; callers keep an exclusion band around each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoDecay, TooCloseToSingularity
from .linalg import circle_dist

TWO_PI = 2.0 * np.pi

COS_BUMP = "COS_BUMP"
ODD_SINE = "ODD_SINE"
CONSTANT = "CONSTANT"
ZERO = "ZERO"
CUSTOM_TABLE = "CUSTOM_TABLE"

STATUS_OK = 0
STATUS_TOO_CLOSE = 1
STATUS_NO_DECAY = 2

_HUGE = 1e100
_RATIO_WINDOW = 5
K_MAX_DEFAULT = 5000


class Profile:
    """Perturbation profile v with derivative and sign-structure metadata."""

    def __init__(self, family, fn, dfn, sup_abs, v_half_zero, v_zero_zero,
                 dv_signs, theta_star=None, params=None, near_half_fn=None):
        self.family = family
        self._fn = fn
        self._dfn = dfn
        self._near_half_fn = near_half_fn
        self.sup_abs = float(sup_abs)
        self.v_half_zero = bool(v_half_zero)
        self.v_zero_zero = bool(v_zero_zero)
        self.dv_signs = dv_signs            # sign pattern on (0,1/2) and (1/2,1)
        self.theta_star = theta_star        # sign change of v' on (1/2,1), if single
        self.params = params or {}

    def __call__(self, theta):
        u = np.mod(np.asarray(theta, dtype=float), 1.0)
        return self._fn(u)

    def deriv(self, theta):
        u = np.mod(np.asarray(theta, dtype=float), 1.0)
        return self._dfn(u)

    def near_half(self, s):
        """v(1/2 + s) computed from the deviation itself, free of the 1/2 ulp floor."""
        if self._near_half_fn is not None:
            return self._near_half_fn(np.asarray(s, dtype=float))
        return self._fn(np.mod(0.5 + np.asarray(s, dtype=float), 1.0))

    # -- concrete families ---------------------------------------------------
    @classmethod
    def cos_bump(cls):
        """1 + cos(2*pi*theta): positive bump over the source, zero at the sink."""
        def fn(u):
            # 1 + cos(2*pi*u) == 2*cos(pi*u)^2, which avoids cancellation near 1/2;
            # values below 1e-30 are genuine zeros at double precision
            val = 2.0 * np.cos(np.pi * u) ** 2
            return np.where(np.abs(val) < 1e-30, 0.0, val)

        def dfn(u):
            # -2*pi*sin(2*pi*u) == 2*pi*sin(2*pi*(u-1/2)), exact at the sink
            return TWO_PI * np.sin(TWO_PI * (u - 0.5))

        def near_half(s):
            # 1 + cos(2*pi*(1/2+s)) == 2*sin(pi*s)^2
            return 2.0 * np.sin(np.pi * s) ** 2

        return cls(COS_BUMP, fn, dfn, sup_abs=2.0, v_half_zero=True,
                   v_zero_zero=False, dv_signs=("-", "+"), near_half_fn=near_half)

    @classmethod
    def odd_sine(cls):
        """-sin(2*pi*theta): odd about 1/2, vanishing at both poles."""
        def fn(u):
            return np.sin(TWO_PI * (u - 0.5))

        def dfn(u):
            return TWO_PI * np.cos(TWO_PI * (u - 0.5))

        def near_half(s):
            return np.sin(TWO_PI * s)

        return cls(ODD_SINE, fn, dfn, sup_abs=1.0, v_half_zero=True,
                   v_zero_zero=True, dv_signs=("-+", "+-"), theta_star=0.75,
                   near_half_fn=near_half)

    @classmethod
    def constant(cls, c):
        c = float(c)
        def fn(u):
            return np.full_like(np.asarray(u, dtype=float), c)

        def dfn(u):
            return np.zeros_like(np.asarray(u, dtype=float))

        fam = ZERO if c == 0.0 else CONSTANT
        return cls(fam, fn, dfn, sup_abs=abs(c), v_half_zero=(c == 0.0),
                   v_zero_zero=(c == 0.0), dv_signs=("0", "0"),
                   params={"value": c})

    @classmethod
    def zero(cls):
        return cls.constant(0.0)

    @classmethod
    def from_table(cls, values):
        """Periodic cubic Hermite interpolant through values on a uniform grid."""
        y = np.asarray(values, dtype=float)
        m = y.size
        if m < 4:
            raise ValueError("table needs at least 4 samples")
        h = 1.0 / m
        slope = (np.roll(y, -1) - np.roll(y, 1)) / (2.0 * h)

        def locate(u):
            j = np.minimum((u * m).astype(int), m - 1)
            s = u * m - j
            return j, s

        def fn(u):
            j, s = locate(np.atleast_1d(u))
            y0, y1 = y[j], y[(j + 1) % m]
            m0, m1 = slope[j], slope[(j + 1) % m]
            s2, s3 = s * s, s * s * s
            out = (y0 * (2 * s3 - 3 * s2 + 1) + h * m0 * (s3 - 2 * s2 + s)
                   + y1 * (-2 * s3 + 3 * s2) + h * m1 * (s3 - s2))
            return out if np.ndim(u) else float(out[0])

        def dfn(u):
            j, s = locate(np.atleast_1d(u))
            y0, y1 = y[j], y[(j + 1) % m]
            m0, m1 = slope[j], slope[(j + 1) % m]
            s2 = s * s
            out = (6 * s * (1 - s) * (y1 - y0) / h + m0 * (3 * s2 - 4 * s + 1)
                   + m1 * (3 * s2 - 2 * s))
            return out if np.ndim(u) else float(out[0])

        probe = np.linspace(0.0, 1.0, 4096, endpoint=False)
        vals = fn(probe)
        return cls(CUSTOM_TABLE, fn, dfn, sup_abs=float(np.max(np.abs(vals))),
                   v_half_zero=abs(fn(np.float64(0.5))) < 1e-12,
                   v_zero_zero=abs(fn(np.float64(0.0))) < 1e-12,
                   dv_signs=("?", "?"), params={"size": m})


@dataclass
class SeriesResult:
    value: float
    tail_bound: float
    terms_used: int
    converged: bool


@dataclass
class BatchSeries:
    """Vectorized series evaluation; status flags instead of exceptions."""

    values: np.ndarray
    tail_bounds: np.ndarray
    terms: np.ndarray
    status: np.ndarray

    @property
    def ok(self):
        return self.status == STATUS_OK

    def single(self):
        """Unwrap a one-point batch into a SeriesResult, raising on failure."""
        st = int(self.status[0])
        if st == STATUS_TOO_CLOSE:
            raise TooCloseToSingularity("evaluation point inside the exclusion band")
        if st == STATUS_NO_DECAY:
            raise NoDecay("series terms did not enter geometric decay "
                          "(check v at the sink and the rate sandwich)")
        return SeriesResult(float(self.values[0]), float(self.tail_bounds[0]),
                            int(self.terms[0]), True)


class _TailTracker:
    """Per-point adaptive truncation driven by observed term ratios."""

    def __init__(self, n, tol, window=_RATIO_WINDOW):
        self.tol = tol
        self.window = window
        self.value = np.zeros(n)
        self.tail = np.full(n, np.inf)
        self.terms = np.zeros(n, dtype=int)
        self.done = np.zeros(n, dtype=bool)
        self.failed = np.zeros(n, dtype=bool)
        self.ring = np.full((window, n), np.inf)
        self.consec = np.zeros(n, dtype=int)
        self.prev_abs = np.full(n, -1.0)
        self.k = 0

    def feed(self, t):
        active = ~(self.done | self.failed)
        a = np.abs(t)
        bad = active & (~np.isfinite(t) | (a > _HUGE))
        self.failed |= bad
        active &= ~bad

        self.value = np.where(active, self.value + t, self.value)

        have_prev = self.prev_abs >= 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.prev_abs > 0.0, a / self.prev_abs,
                             np.where(a == 0.0, 0.0, np.inf))
        good = ratio < 1.0
        self.consec = np.where(active & have_prev,
                               np.where(good, self.consec + 1, 0), self.consec)
        slot = self.k % self.window
        self.ring[slot] = np.where(active & have_prev, ratio, self.ring[slot])

        ready = active & (self.consec >= self.window)
        if np.any(ready):
            rmax = self.ring.max(axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                est = a * rmax / (1.0 - rmax)
            hit = ready & (est <= self.tol)
            self.tail = np.where(hit, est, self.tail)
            self.terms = np.where(hit, self.k + 1, self.terms)
            self.done |= hit

        self.prev_abs = np.where(active, a, self.prev_abs)
        self.k += 1

    def settled(self):
        return bool(np.all(self.done | self.failed))

    def finish(self):
        self.failed |= ~self.done
        return self


def _empty_batch(th):
    n = th.size
    return BatchSeries(np.zeros(n), np.zeros(n), np.zeros(n, dtype=int),
                       np.zeros(n, dtype=int))


def _finalize(th, tracker, too_close):
    n = th.size
    values = np.full(n, np.nan)
    tails = np.full(n, np.nan)
    terms = np.zeros(n, dtype=int)
    status = np.full(n, STATUS_TOO_CLOSE, dtype=int)
    adm = ~too_close
    idx = np.flatnonzero(adm)
    values[idx] = np.where(tracker.done, tracker.value, np.nan)
    tails[idx] = np.where(tracker.done, tracker.tail, np.nan)
    terms[idx] = tracker.terms
    status[idx] = np.where(tracker.done, STATUS_OK, STATUS_NO_DECAY)
    return BatchSeries(values, tails, terms, status)


def gamma_many(psi, v, lam, thetas, tol=1e-10):
    """Backward transfer series; a-priori geometric tail bound sup|v|*lam^K/((1-lam)*lam)."""
    th = np.atleast_1d(np.mod(np.asarray(thetas, dtype=float), 1.0))
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = v.sup_abs
    if m == 0.0:
        return _empty_batch(th)
    k_trunc = max(1, int(math.ceil(math.log(tol * (1.0 - lam) * lam / m) / math.log(lam))))
    pts = th.copy()
    val = np.zeros_like(th)
    w = 1.0  # (1/lam) * lam^k at k=1
    for _ in range(k_trunc):
        pts = psi.invert_array(pts)
        val += w * v(pts)
        w *= lam
    tail = m * lam ** k_trunc / ((1.0 - lam) * lam)
    n = th.size
    return BatchSeries(val, np.full(n, tail), np.full(n, k_trunc, dtype=int),
                       np.zeros(n, dtype=int))


def beta_many(psi, v, lam, thetas, tol=1e-10, eta=1e-4, k_max=K_MAX_DEFAULT):
    """Forward transfer series; diverges at theta=0, excluded by the eta band.

    Once an orbit enters the sink zone its signed deviation from 1/2 is
    tracked directly and v is evaluated in deviation form: the lam^-k weights
    keep amplifying contributions from deviations far below the absolute
    float resolution at 1/2, so plain coordinates truncate the series wrongly.
    """
    th = np.atleast_1d(np.mod(np.asarray(thetas, dtype=float), 1.0))
    too_close = np.atleast_1d(circle_dist(th, 0.0) <= eta)
    pts = th[~too_close].copy()
    tracker = _TailTracker(pts.size, tol)
    zone = psi.sink_zone
    dev = pts - 0.5
    in_dev = np.abs(dev) <= zone
    pts = np.where(in_dev, 0.5, pts)
    w = -1.0 / lam
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(k_max):
            vals = np.where(in_dev, v.near_half(dev), v(pts))
            tracker.feed(w * vals)
            if tracker.settled():
                break
            dev = np.where(in_dev, psi.sink_step_array(dev), dev)
            pts = psi.eval_array(pts)
            entered = ~in_dev & (np.abs(pts - 0.5) <= zone)
            dev = np.where(entered, pts - 0.5, dev)
            pts = np.where(entered, 0.5, pts)
            in_dev |= entered
            w /= lam
    tracker.finish()
    return _finalize(th, tracker, too_close)


def gamma_prime_many(psi, v, lam, thetas, tol=1e-10, eta_half=1e-4, k_max=K_MAX_DEFAULT):
    """Derivative of gamma via backward-orbit cocycles; blows up at theta=1/2."""
    th = np.atleast_1d(np.mod(np.asarray(thetas, dtype=float), 1.0))
    too_close = np.atleast_1d(circle_dist(th, 0.5) <= eta_half)
    pts = th[~too_close].copy()
    tracker = _TailTracker(pts.size, tol)
    u = np.ones_like(pts)  # lam^k * (psi^{-k})'(theta)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(k_max):
            pts = psi.invert_array(pts)
            u *= lam / psi.deriv_array(pts)
            tracker.feed((1.0 / lam) * u * v.deriv(pts))
            if tracker.settled():
                break
    tracker.finish()
    return _finalize(th, tracker, too_close)


def beta_prime_many(psi, v, lam, thetas, tol=1e-10, eta_zero=1e-4, k_max=K_MAX_DEFAULT):
    """Derivative of beta via forward-orbit cocycles; blows up at theta=0."""
    th = np.atleast_1d(np.mod(np.asarray(thetas, dtype=float), 1.0))
    too_close = np.atleast_1d(circle_dist(th, 0.0) <= eta_zero)
    pts = th[~too_close].copy()
    tracker = _TailTracker(pts.size, tol)
    u = np.ones_like(pts)  # (psi^k)'(theta) / lam^k
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(k_max):
            tracker.feed((-1.0 / lam) * u * v.deriv(pts))
            if tracker.settled():
                break
            u *= psi.deriv_array(pts) / lam
            pts = psi.eval_array(pts)
    tracker.finish()
    return _finalize(th, tracker, too_close)


def _combine(g, b):
    status = np.maximum(g.status, b.status)
    values = g.values - b.values
    return BatchSeries(np.where(status == STATUS_OK, values, np.nan),
                       g.tail_bounds + b.tail_bounds,
                       g.terms + b.terms, status)


def alpha_many(psi, v, lam, thetas, tol=1e-10, eta=1e-4, k_max=K_MAX_DEFAULT):
    g = gamma_many(psi, v, lam, thetas, tol=tol / 2)
    b = beta_many(psi, v, lam, thetas, tol=tol / 2, eta=eta, k_max=k_max)
    return _combine(g, b)


def alpha_prime_many(psi, v, lam, thetas, tol=1e-10, eta_half=1e-4, eta_zero=1e-4,
                     k_max=K_MAX_DEFAULT):
    g = gamma_prime_many(psi, v, lam, thetas, tol=tol / 2, eta_half=eta_half, k_max=k_max)
    b = beta_prime_many(psi, v, lam, thetas, tol=tol / 2, eta_zero=eta_zero, k_max=k_max)
    return _combine(g, b)


# -- scalar surface ----------------------------------------------------------

def gamma(psi, v, lam, theta, tol=1e-10):
    return gamma_many(psi, v, lam, [theta], tol=tol).single()


def beta(psi, v, lam, theta, tol=1e-10, eta=1e-4):
    return beta_many(psi, v, lam, [theta], tol=tol, eta=eta).single()


def alpha(psi, v, lam, theta, tol=1e-10, eta=1e-4):
    return alpha_many(psi, v, lam, [theta], tol=tol, eta=eta).single()


def gamma_prime(psi, v, lam, theta, tol=1e-10, eta_half=1e-4):
    return gamma_prime_many(psi, v, lam, [theta], tol=tol, eta_half=eta_half).single()


def beta_prime(psi, v, lam, theta, tol=1e-10, eta_zero=1e-4):
    return beta_prime_many(psi, v, lam, [theta], tol=tol, eta_zero=eta_zero).single()


def alpha_prime(psi, v, lam, theta, tol=1e-10, eta_half=1e-4, eta_zero=1e-4):
    return alpha_prime_many(psi, v, lam, [theta], tol=tol,
                            eta_half=eta_half, eta_zero=eta_zero).single()


def residual_twisted(u, psi, v, lam, theta):
    """|u(psi theta) - lam*u(theta) - v(theta)| for any evaluator u."""
    th = float(np.mod(theta, 1.0))
    return abs(u(psi.eval(th)) - lam * u(th) - float(v(np.float64(th))))


def stable_slope_at_sink(v, lam, sigma):
    """Closed-form beta'(1/2) = v'(1/2)/(sigma-lambda) from sink invariance."""
    return float(v.deriv(np.float64(0.5))) / (sigma - lam)


def center_slope_at_source(v, lam, mu):
    """Closed-form gamma'(0) = v'(0)/(mu-lambda) from source invariance."""
    return float(v.deriv(np.float64(0.0))) / (mu - lam)
