"""Integration in the open quadrant, Poincare return maps and limit cycles."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .network import VectorField

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = _A[6] + (0.0,)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

SAFETY = 0.9
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA
MIN_FACTOR, MAX_FACTOR = 0.2, 10.0

CONVERGED = "converged-to-equilibrium"
BOUNDARY = "hit-boundary"
TIME_LIMIT = "hit-time-limit"
ESCAPED = "escaped"
EVENT = "event"


class IntegrationError(RuntimeError):
    def __init__(self, message: str, flag: str, point=None):
        super().__init__(message)
        self.flag = flag
        self.point = point


def _stage_fn(vf, sign: float) -> Callable[[float, float], tuple[float, float]]:
    if sign > 0:
        return vf
    return lambda x, y: tuple(-v for v in vf(x, y))


def _dp_step(f, x, y, h, k1):
    """One Dormand-Prince step.  ``None`` if a stage leaves the open quadrant."""
    ks = [k1]
    for i in range(1, 7):
        a = _A[i]
        sx = x + h * sum(a[j] * ks[j][0] for j in range(i))
        sy = y + h * sum(a[j] * ks[j][1] for j in range(i))
        if not (sx > 0 and sy > 0):
            return None
        try:
            k = f(sx, sy)
        except (OverflowError, ZeroDivisionError, ValueError):
            return None
        if not (math.isfinite(k[0]) and math.isfinite(k[1])):
            return None
        ks.append(k)
    # stage 7 is evaluated at the 5th-order solution (FSAL)
    xn, yn = x + h * sum(_B[j] * ks[j][0] for j in range(6)), y + h * sum(_B[j] * ks[j][1] for j in range(6))
    ex = h * sum(_E[j] * ks[j][0] for j in range(7))
    ey = h * sum(_E[j] * ks[j][1] for j in range(7))
    return xn, yn, ex, ey, ks[6]


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    flag: str
    n_rejected: int = 0
    underflow: bool = False

    @property
    def final(self) -> tuple[float, float]:
        return float(self.points[-1, 0]), float(self.points[-1, 1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for t, (x, y) in zip(self.times, self.points):
            w.writerow([f"{t:.15g}", f"{x:.15g}", f"{y:.15g}"])
        return buf.getvalue()


class Stepper:
    """Adaptive Dormand-Prince 5(4) with PI step control.

    Steps whose stages leave the open positive quadrant are rejected and
    the step is halved.
    """

    def __init__(self, vf: VectorField, x0, rtol=1e-9, atol=1e-12, sign=1.0, h0=None,
                 min_step=1e-14):
        if not (x0[0] > 0 and x0[1] > 0):
            raise ValueError("initial point must lie in the open positive quadrant")
        if rtol <= 0 or atol <= 0:
            raise ValueError("rtol and atol must be positive")
        self.f = _stage_fn(vf, sign)
        self.rtol, self.atol = rtol, atol
        self.t = 0.0
        self.x, self.y = float(x0[0]), float(x0[1])
        self.k1 = self.f(self.x, self.y)
        self.err_old = 1e-4
        self.rejected = 0
        self.min_step = min_step
        self.h = h0 if h0 is not None else self._initial_step()

    def _initial_step(self) -> float:
        sx = self.atol + self.rtol * abs(self.x)
        sy = self.atol + self.rtol * abs(self.y)
        d0 = math.hypot(self.x / sx, self.y / sy)
        d1 = math.hypot(self.k1[0] / sx, self.k1[1] / sy)
        h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        return min(h, 1.0)

    def error_norm(self, x, y, xn, yn, ex, ey) -> float:
        sx = self.atol + self.rtol * max(abs(x), abs(xn))
        sy = self.atol + self.rtol * max(abs(y), abs(yn))
        return math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))

    def trial(self, h):
        return _dp_step(self.f, self.x, self.y, h, self.k1)

    def step(self, h_max: float = math.inf):
        """Advance one accepted step; returns the previous state ``(t, x, y, k1)``."""
        while True:
            h = min(self.h, h_max)
            if h < self.min_step * max(1.0, abs(self.t)):
                raise IntegrationError("step size underflow", BOUNDARY, (self.x, self.y))
            res = self.trial(h)
            if res is None:
                self.rejected += 1
                self.h = h / 2
                continue
            xn, yn, ex, ey, k7 = res
            err = self.error_norm(self.x, self.y, xn, yn, ex, ey)
            if err <= 1.0:
                if err == 0.0:
                    fac = MAX_FACTOR
                else:
                    fac = SAFETY * err ** -ALPHA * self.err_old ** BETA
                    fac = min(MAX_FACTOR, max(MIN_FACTOR, fac))
                self.err_old = max(err, 1e-4)
                prev = (self.t, self.x, self.y, self.k1)
                self.t += h
                self.x, self.y, self.k1 = xn, yn, k7
                self.h = h * fac
                return prev
            self.rejected += 1
            self.h = h * max(MIN_FACTOR, SAFETY * err ** -0.2)


def integrate(vf: VectorField, x0, t_end: float, rtol: float = 1e-9, atol: float = 1e-12, *,
              boundary_tol: float = 1e-10, escape: float = 1e10, max_steps: int = 2_000_000,
              equilibrium_tol: float = 1e-12, record: bool = True,
              boundary_reach: float = 1e-4) -> Trajectory:
    """Integrate from ``x0`` over ``[0, |t_end|]`` (backwards in time if ``t_end < 0``).

    Stops early when a coordinate drops below ``boundary_tol`` (``hit-boundary``)
    or exceeds ``escape`` (``escaped``).  A run that reaches ``t_end`` with
    a vanishing field is flagged ``converged-to-equilibrium``.  Step underflow
    within ``boundary_reach`` of an axis is a finite-time arrival at the
    boundary; elsewhere it sets ``underflow``.
    """
    sign = 1.0 if t_end >= 0 else -1.0
    T = abs(t_end)
    st = Stepper(vf, x0, rtol, atol, sign)
    times, pts = [0.0], [(st.x, st.y)]
    flag = TIME_LIMIT
    steps = 0
    underflow = False
    try:
        while st.t < T:
            if steps >= max_steps:
                break
            st.step(T - st.t)
            steps += 1
            if record:
                times.append(sign * st.t)
                pts.append((st.x, st.y))
            if min(st.x, st.y) < boundary_tol:
                flag = BOUNDARY
                break
            if max(st.x, st.y) > escape:
                flag = ESCAPED
                break
    except IntegrationError as exc:
        flag = exc.flag
        underflow = min(st.x, st.y) >= boundary_reach
    if not record:
        times.append(sign * st.t)
        pts.append((st.x, st.y))
    if flag == TIME_LIMIT and st.t >= T:
        fx, fy = vf(st.x, st.y)
        if math.hypot(fx, fy) <= equilibrium_tol * max(1.0, vf.term_scale(st.x, st.y)):
            flag = CONVERGED
    return Trajectory(np.array(times), np.array(pts, dtype=float).reshape(-1, 2), flag,
                      st.rejected, underflow)


# --------------------------------------------------------------------------
# Poincare sections

class NoReturnError(RuntimeError):
    def __init__(self, message: str, flag: str):
        super().__init__(message)
        self.flag = flag


@dataclass(frozen=True)
class PoincareSection:
    base: tuple[float, float]
    direction: tuple[float, float] = (1.0, 0.0)
    s_range: tuple[float, float | None] = (1e-3, None)

    def __post_init__(self):
        dx, dy = self.direction
        n = math.hypot(dx, dy)
        if n == 0:
            raise ValueError("section direction must be nonzero")
        object.__setattr__(self, "direction", (dx / n, dy / n))

    def point(self, s: float) -> tuple[float, float]:
        return (self.base[0] + s * self.direction[0], self.base[1] + s * self.direction[1])

    def offset(self, x: float, y: float) -> float:
        return (x - self.base[0]) * self.direction[0] + (y - self.base[1]) * self.direction[1]

    def crossing(self, x: float, y: float) -> float:
        """Signed distance to the section line (positive to the left of the ray)."""
        return -(x - self.base[0]) * self.direction[1] + (y - self.base[1]) * self.direction[0]

    def max_offset(self) -> float:
        """Largest offset keeping the ray inside the open quadrant."""
        lim = math.inf
        for b, d in zip(self.base, self.direction):
            if d < 0:
                lim = min(lim, -b / d)
        return lim


@dataclass(frozen=True)
class ReturnOptions:
    rtol: float = 1e-11
    atol: float = 1e-13
    t_max: float = 1e4
    max_steps: int = 500_000
    boundary_tol: float = 1e-12
    escape: float = 1e10


def _locate(st: Stepper, section: PoincareSection, h: float):
    """Time and point of the crossing inside the last step (from the saved state)."""
    def phi(tau):
        if tau == 0.0:
            return section.crossing(st.x, st.y)
        res = st.trial(tau)
        if res is None:
            raise NoReturnError("crossing step left the quadrant", BOUNDARY)
        return section.crossing(res[0], res[1])

    tau = brentq(phi, 0.0, h, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = st.trial(tau) if tau > 0 else (st.x, st.y)
    return st.t + tau, res[0], res[1]


def first_return(vf: VectorField, section: PoincareSection, s: float,
                 opts: ReturnOptions = ReturnOptions()) -> tuple[float, float]:
    """Next crossing of the section ray in the starting crossing direction.

    Returns ``(offset, time)``.  The crossing is located by root finding on
    the crossing function over a re-taken partial step.
    """
    x0, y0 = section.point(s)
    if not (x0 > 0 and y0 > 0):
        raise ValueError(f"section point at s={s} is outside the open quadrant")
    fx, fy = vf(x0, y0)
    sense = -fx * section.direction[1] + fy * section.direction[0]
    if sense == 0:
        raise NoReturnError("flow is tangent to the section", EVENT)
    sense = 1.0 if sense > 0 else -1.0
    st = Stepper(vf, (x0, y0), opts.rtol, opts.atol)
    left = False
    steps = 0
    while st.t < opts.t_max:
        if steps > opts.max_steps:
            raise NoReturnError("step budget exhausted", TIME_LIMIT)
        try:
            prev = st.step(opts.t_max - st.t)
        except IntegrationError as exc:
            raise NoReturnError(str(exc), exc.flag) from None
        steps += 1
        if min(st.x, st.y) < opts.boundary_tol:
            raise NoReturnError("orbit reached the boundary", BOUNDARY)
        if max(st.x, st.y) > opts.escape:
            raise NoReturnError("orbit escaped", ESCAPED)
        c_prev = sense * section.crossing(prev[1], prev[2])
        c_new = sense * section.crossing(st.x, st.y)
        if not left:
            if c_new < 0:
                left = True
            continue
        if c_prev < 0 <= c_new:
            h = st.t - prev[0]
            # rewind to the start of the step and bisect inside it
            saved = (st.t, st.x, st.y, st.k1)
            st.t, st.x, st.y, st.k1 = prev
            t_c, xc, yc = _locate(st, section, h)
            st.t, st.x, st.y, st.k1 = saved
            off = section.offset(xc, yc)
            if off > 0:
                return off, t_c
    raise NoReturnError("no return within the time budget", TIME_LIMIT)


def return_map(vf: VectorField, section: PoincareSection, s: float,
               opts: ReturnOptions = ReturnOptions()) -> float:
    return first_return(vf, section, s, opts)[0]


# --------------------------------------------------------------------------
# limit cycles

@dataclass(frozen=True)
class FixedPoint:
    s: float
    multiplier: float
    stability: str          # from the multiplier: stable | unstable | neutral
    orientation: str        # from the displacement sign change: stable | unstable

    def as_dict(self):
        return {"s": self.s, "multiplier": self.multiplier, "stability": self.stability,
                "orientation": self.orientation}


@dataclass
class CycleReport:
    fixed_points: list[FixedPoint]
    displacement_samples: list[tuple[float, float]]
    section: PoincareSection
    s_max: float
    failed_offsets: list[float] = field(default_factory=list)
    noise_floor: float = 0.0    # relative: samples with |d| <= noise_floor * s carry no sign

    @property
    def sign_changes(self) -> int:
        signs = [np.sign(d) for s, d in self.displacement_samples if abs(d) > self.noise_floor * s]
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    def as_dict(self) -> dict:
        return {
            "section": {"base": list(self.section.base), "direction": list(self.section.direction),
                        "s_min": self.section.s_range[0], "s_max": self.s_max},
            "fixed_points": [fp.as_dict() for fp in self.fixed_points],
            "displacement_samples": [[s, d] for s, d in self.displacement_samples],
            "failed_offsets": list(self.failed_offsets),
            "noise_floor": self.noise_floor,
            "max_abs_displacement": max((abs(d) for _, d in self.displacement_samples), default=0.0),
        }


def auto_s_max(vf, section, opts=ReturnOptions(), cap: float | None = None) -> float:
    """Largest offset (doubling from ``s_min``) whose return still exists."""
    s_min = section.s_range[0]
    limit = section.max_offset()
    if cap is None:
        cap = 100.0 * math.hypot(*section.base)
    cap = min(cap, 0.999 * limit)
    s, good = s_min, s_min
    while s <= cap:
        try:
            first_return(vf, section, s, opts)
        except NoReturnError:
            break
        good = s
        s *= 2
    return good


def find_limit_cycles(vf: VectorField, section: PoincareSection, grid_n: int = 200,
                      opts: ReturnOptions = ReturnOptions(), *, root_tol: float = 1e-10,
                      stability_tol: float = 1e-4, s_max: float | None = None,
                      noise: float = 100.0) -> CycleReport:
    """Scan ``d(s) = P(s) - s`` on a log grid and refine every sign change.

    Samples with ``|d| <= noise * rtol * s`` are treated as integration noise:
    they carry no sign, and brackets are formed between the significant
    samples around them.
    """
    s_min = section.s_range[0]
    if s_max is None:
        s_max = section.s_range[1] or auto_s_max(vf, section, opts)
    grid = np.geomspace(s_min, s_max, grid_n) if s_max > s_min else np.array([s_min])
    samples, failed = [], []
    for s in grid:
        try:
            samples.append((float(s), return_map(vf, section, float(s), opts) - float(s)))
        except NoReturnError:
            failed.append(float(s))

    def disp(s):
        return return_map(vf, section, s, opts) - s

    floor = noise * opts.rtol
    signif = [(s, d) for s, d in samples if abs(d) > floor * s]
    fixed = []
    for (s0, d0), (s1, d1) in zip(signif, signif[1:]):
        if d0 * d1 > 0:
            continue
        try:
            root = brentq(disp, s0, s1, xtol=root_tol, rtol=1e-14)
        except (NoReturnError, ValueError):
            continue
        h = 1e-5 * root
        try:
            mult = (return_map(vf, section, root + h, opts) - return_map(vf, section, root - h, opts)) / (2 * h)
        except NoReturnError:
            mult = math.nan
        if mult < 1 - stability_tol:
            stab = "stable"
        elif mult > 1 + stability_tol:
            stab = "unstable"
        else:
            stab = "neutral"
        fixed.append(FixedPoint(float(root), float(mult), stab, "stable" if d0 > 0 else "unstable"))
    return CycleReport(fixed, samples, section, float(s_max), failed, floor)


# --------------------------------------------------------------------------
# perturbation recipes and probes

CHAIN_CRITICAL = (0.25, 15 / 8, 4 / 3)
# staged perturbation that separates three cycles at s ~ 0.03, 0.18, 0.25
CHAIN_3LC_EPS = (0.01, 4.3e-4, 7.9e-8)


def chain_r_on_l1_zero(q: float) -> float:
    return q * (4 * q * q + 16 * q + 7) / (3 * (1 - 2 * q))


def chain_k_on_trace_zero(q: float, r: float) -> float:
    return 2.0 / (r - q * (2 * q + 1))


def quadrangle_k0() -> float:
    """Root of ``3416 K^3 + 1250 K^2 - 29 K - 5`` in ``(0, 1)``."""
    return brentq(lambda k: ((3416 * k + 1250) * k - 29) * k - 5, 0.01, 0.2, xtol=1e-16)


def perturbation_recipe(family: str, eps) -> dict:
    """Staged perturbation away from the degenerate focus.

    ``chain_3lc``: ``q += e1`` keeping ``L1 = 0`` and ``tr = 0``; then
    ``r -= e2`` keeping ``tr = 0``; then ``K += e3``.
    ``quadrangle_3lc``: ``K -= e1`` keeping ``gamma = 16 + 1/K``; then
    ``gamma += e2``.
    """
    eps = list(eps) + [0.0] * (3 - len(eps))
    e1, e2, e3 = (0.0 if e is None else float(e) for e in eps[:3])
    if family in ("chain_3lc", "chain41", "chain"):
        q = CHAIN_CRITICAL[0] + e1
        r = chain_r_on_l1_zero(q)
        r -= e2
        K = chain_k_on_trace_zero(q, r)
        K += e3
        return {"q": q, "r": r, "K": K}
    if family in ("quadrangle_3lc", "quadrangle32", "quadrangle"):
        K = quadrangle_k0() - e1
        gamma = 16 + 1 / K + e2
        return {"K": K, "gamma": gamma}
    raise ValueError(f"unknown recipe family {family!r}")


def reversible_chain_field(p: float, q: float) -> VectorField:
    """``x' = (p-q) + q x^p y^q - p x^q y^p``, ``y' = (q-p) + p x^p y^q - q x^q y^p``."""
    from .network import as_fraction
    P, Q = as_fraction(p), as_fraction(q)
    p, q = float(P), float(Q)
    return VectorField([(p - q, 0, 0), (q, P, Q), (-p, Q, P)],
                       [(q - p, 0, 0), (p, P, Q), (-q, Q, P)])


@dataclass(frozen=True)
class HomoclinicReport:
    start: tuple[float, float]
    crosses_diagonal: bool
    crossing_point: tuple[float, float] | None
    crossing_time: float | None
    min_return_distance: float | None
    returns_to_origin: bool
    tracking_time: float | None
    bound_L: float
    xdot_negative_on_segment: bool
    max_xdot_on_segment: float

    def as_dict(self):
        return self.__dict__.copy()


def homoclinic_probe(p: float, q: float, *, start_x: float = 1e-3, probe_tol: float = 0.05,
                     margin: float = 0.05, t_max: float = 1e3, rtol: float = 1e-11,
                     n_segment: int = 2000, track_tol: float = 1e-6) -> HomoclinicReport:
    """Follow the orbit leaving the origin along ``x^p y^q = (p-q)/p``.

    The orbit is integrated until it crosses ``x = y`` at time ``T``.  By
    reversibility its continuation past the crossing is the mirror image of
    the outgoing leg, traversed backwards; the closest approach of that
    mirrored leg to the origin is reported.  Both legs are transversally
    unstable near the origin, so a direct forward integration only follows
    the mirror for a while: ``tracking_time`` records how long it stays
    within ``track_tol``.

    Also checks ``x' < 0`` on ``x = L, 0 < y < L`` with ``L`` a ``margin``
    above ``(1 - p/q)^(1/(p+q))``.
    """
    if not (p > 0 and q < 0 and p + q > 0):
        raise ValueError("homoclinic probe needs p > 0, q < 0 and p + q > 0")
    vf = reversible_chain_field(p, q)
    x0 = start_x
    y0 = ((p - q) / p / x0 ** p) ** (1.0 / q)
    atol = 1e-3 * min(x0, y0) * rtol
    st = Stepper(vf, (x0, y0), rtol, atol)
    diag = PoincareSection((0.0, 0.0), (1.0, 1.0))
    ts, pts = [0.0], [(x0, y0)]
    crossing = None
    while st.t < t_max:
        try:
            prev = st.step(t_max - st.t)
        except IntegrationError:
            break
        if max(st.x, st.y) > 1e6:
            break
        before, after = prev[2] - prev[1], st.y - st.x
        if before * after <= 0 and before != 0:
            h = st.t - prev[0]
            st.t, st.x, st.y, st.k1 = prev
            crossing = _locate(st, diag, h)
            ts.append(crossing[0])
            pts.append((crossing[1], crossing[2]))
            break
        ts.append(st.t)
        pts.append((st.x, st.y))
    min_dist = tracking = None
    if crossing is not None:
        T, xc, yc = crossing
        leg = np.array(pts)
        # continuation at time T + s is the mirror of the outgoing leg at T - s
        mirror_t = (T - np.array(ts))[::-1]
        mirror = leg[::-1, ::-1]
        min_dist = float(np.min(np.hypot(mirror[:, 0], mirror[:, 1])))
        fwd = integrate(vf, (xc, yc), T, rtol=rtol, atol=atol, boundary_tol=0.0)
        spline = CubicSpline(mirror_t, mirror)
        tracking = 0.0
        for t, (x, y) in zip(fwd.times, fwd.points):
            mx, my = spline(t)
            if math.hypot(x - mx, y - my) > track_tol * max(1.0, math.hypot(x, y)):
                break
            tracking = float(t)
    L = (1 - p / q) ** (1 / (p + q)) * (1 + margin)
    ys = np.linspace(L / n_segment, L * (1 - 1e-9), n_segment)
    xdots = np.array([vf(L, y)[0] for y in ys])
    return HomoclinicReport(
        start=(x0, y0), crosses_diagonal=crossing is not None,
        crossing_point=None if crossing is None else (crossing[1], crossing[2]),
        crossing_time=None if crossing is None else crossing[0],
        min_return_distance=min_dist,
        returns_to_origin=min_dist is not None and min_dist < probe_tol,
        tracking_time=tracking,
        bound_L=L, xdot_negative_on_segment=bool(np.all(xdots < 0)),
        max_xdot_on_segment=float(xdots.max()))
