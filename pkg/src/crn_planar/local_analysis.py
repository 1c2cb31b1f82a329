"""Linearisation, Taylor expansion and focal values at a positive equilibrium.

Focal values follow the return-map convention: with ``u = x - xbar`` and
``v`` chosen so that the linear part becomes a rotation with frequency
``omega = sqrt(det J)``, the displacement of the first return to the ray
``v = 0, u = rho > 0`` is ``L_k rho^(2k+1) + ...`` once ``L_1 .. L_{k-1}``
vanish.  They are computed from the classical Lyapunov-function recursion
and converted with the exact factor ``pi / omega``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp

from .equilibrium import ScaledSystem, TemplateError, match_chain, match_three_reactions
from .network import Complex, VectorField

TRACE_TOL = 1e-9
FOCAL_TOL = 1e-9
MAX_TAYLOR_ORDER = 12


class PreconditionError(ValueError):
    """Focal values requested away from a non-degenerate weak focus."""


# --------------------------------------------------------------------------
# Jacobian

def jacobian_matrix(vf: VectorField, x: float, y: float) -> np.ndarray:
    if not (x > 0 and y > 0):
        raise ValueError("Jacobian requires a point in the open positive quadrant")
    out = np.zeros((2, 2))
    for row, terms in enumerate(vf.terms()):
        for c, e, f in terms:
            e, f = float(e), float(f)
            if e:
                out[row, 0] += c * e * x ** (e - 1) * y ** f
            if f:
                out[row, 1] += c * f * x ** e * y ** (f - 1)
    return out


@dataclass(frozen=True)
class JacobianData:
    entries: np.ndarray
    trace: float
    det: float

    @property
    def discriminant(self) -> float:
        return self.trace ** 2 - 4 * self.det


def jacobian(vf: VectorField, at: tuple[float, float]) -> JacobianData:
    m = jacobian_matrix(vf, *at)
    return JacobianData(m, float(m[0, 0] + m[1, 1]),
                        float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]))


def det_chain(scaled: ScaledSystem) -> float:
    """Closed-form ``det J = (h1+h2+h3)/lam * K * kbar1 kbar2 kbar3``."""
    tpl = match_chain(scaled.network)
    if tpl is None or scaled.lam is None:
        raise TemplateError("not a chain of three reactions")
    h123 = float(tpl.areas.partial_sums[2])
    k1, k2, k3 = scaled.kbar
    return h123 / scaled.lam * scaled.K * k1 * k2 * k3


def det_three_reactions(scaled: ScaledSystem, sources: tuple[Complex, Complex, Complex] | None = None) -> float:
    """Closed form ``(1/lam) K kbar1 kbar2 kbar3 [a1(b2-b3)+a2(b3-b1)+a3(b1-b2)]``."""
    tpl = match_three_reactions(scaled.network)
    if tpl is None or tpl.cross[0] == 0:
        raise TemplateError("not three separate reactions")
    # lambda from this template: a network that is also a chain records the chain's lambda
    lam = scaled.kbar[0] / float(tpl.cross[0])
    if sources is None:
        sources = tpl.sources
    (a1, b1), (a2, b2), (a3, b3) = ((s.a, s.b) for s in sources)
    bracket = float(a1 * (b2 - b3) + a2 * (b3 - b1) + a3 * (b1 - b2))
    k1, k2, k3 = scaled.kbar
    return scaled.K * k1 * k2 * k3 * bracket / lam


# --------------------------------------------------------------------------
# Taylor expansion

def _binom(e: Fraction, m: int) -> Fraction:
    out = Fraction(1)
    for i in range(m):
        out = out * (e - i) / (i + 1)
    return out


@dataclass(frozen=True)
class TaylorField:
    """``c[m, n]`` (resp. ``d``) multiplies ``(x - x0)^m (y - y0)^n`` in ``x'`` (``y'``)."""

    center: tuple[float, float]
    order: int
    c: np.ndarray
    d: np.ndarray

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        u, w = x - self.center[0], y - self.center[1]
        pu = u ** np.arange(self.order + 1)
        pw = w ** np.arange(self.order + 1)
        return float(pu @ self.c @ pw), float(pu @ self.d @ pw)

    @property
    def linear(self) -> np.ndarray:
        return np.array([[self.c[1, 0], self.c[0, 1]], [self.d[1, 0], self.d[0, 1]]])


def taylor_expand(vf: VectorField, at: tuple[float, float], order: int) -> TaylorField:
    """Exact Taylor coefficients of each monomial ``c x^e y^f`` about ``at``.

    Uses ``(x0+u)^e = x0^e sum_m binom(e, m) (u/x0)^m`` with the generalised
    binomial coefficient evaluated in rational arithmetic.
    """
    if not 0 <= order <= MAX_TAYLOR_ORDER:
        raise ValueError(f"order must be in [0, {MAX_TAYLOR_ORDER}]")
    x0, y0 = at
    if not (x0 > 0 and y0 > 0):
        raise ValueError("expansion point must be in the open positive quadrant")
    mats = []
    for terms in vf.terms():
        mat = np.zeros((order + 1, order + 1))
        for c, e, f in terms:
            base = c * x0 ** float(e) * y0 ** float(f)
            bx = np.array([float(_binom(e, m)) * x0 ** -m for m in range(order + 1)])
            by = np.array([float(_binom(f, n)) * y0 ** -n for n in range(order + 1)])
            mat += base * np.outer(bx, by)
        # keep only total degree <= order
        mask = np.add.outer(np.arange(order + 1), np.arange(order + 1)) <= order
        mats.append(np.where(mask, mat, 0.0))
    return TaylorField((float(x0), float(y0)), order, mats[0], mats[1])


# --------------------------------------------------------------------------
# normal-form coordinates

def _poly_mul(p: np.ndarray, q: np.ndarray, deg: int) -> np.ndarray:
    out = np.zeros((deg + 1, deg + 1), dtype=np.result_type(p, q))
    for i, j in zip(*np.nonzero(p)):
        lim_i, lim_j = deg + 1 - i, deg + 1 - j
        out[i:, j:] += p[i, j] * q[:lim_i, :lim_j]
    mask = np.add.outer(np.arange(deg + 1), np.arange(deg + 1)) <= deg
    return np.where(mask, out, 0)


def rotation_coordinates(tf: TaylorField):
    """Rewrite the expansion in ``(u, v)`` with linear part ``tr/2 I + omega R``.

    ``u = x - x0`` and ``v = -(j11' u + j12 w) / omega`` where ``j11'`` is
    the ``(1,1)`` entry of the traceless part of ``J``.  Returns
    ``(U, V, omega, trace)`` where ``U[i, j]`` multiplies ``u^i v^j`` in ``u'``.
    """
    J = tf.linear
    tr = J[0, 0] + J[1, 1]
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    omega2 = det - tr * tr / 4
    if omega2 <= 0 or J[0, 1] == 0:
        raise PreconditionError("equilibrium is not a focus (no complex eigenvalues)")
    omega = math.sqrt(omega2)
    j11, j12 = J[0, 0] - tr / 2, J[0, 1]
    deg = tf.order
    # w = y - y0 = a u + b v
    lin = np.zeros((deg + 1, deg + 1))
    if deg >= 1:
        lin[1, 0], lin[0, 1] = -j11 / j12, -omega / j12
    upow = np.zeros((deg + 1, deg + 1))
    upow[0, 0] = 1.0
    wpow = upow.copy()
    F = np.zeros((deg + 1, deg + 1))
    G = np.zeros((deg + 1, deg + 1))
    wpows = [wpow]
    for _ in range(deg):
        wpows.append(_poly_mul(wpows[-1], lin, deg))
    for m in range(deg + 1):
        for n in range(deg + 1 - m):
            cm, dm = tf.c[m, n], tf.d[m, n]
            if cm == 0 and dm == 0:
                continue
            shifted = np.zeros((deg + 1, deg + 1))
            shifted[m:, :] = wpows[n][:deg + 1 - m, :]
            F += cm * shifted
            G += dm * shifted
    U = F
    V = -(j11 * F + j12 * G) / omega
    return U, V, omega, tr


def _to_complex(U: np.ndarray, V: np.ndarray, deg: int) -> np.ndarray:
    """Coefficients ``g[j, k]`` of ``z' = sum g_jk z^j conj(z)^k``, ``z = u + i v``."""
    zu = np.zeros((deg + 1, deg + 1), dtype=complex)   # u = (z + zb)/2
    zv = np.zeros((deg + 1, deg + 1), dtype=complex)   # v = (z - zb)/(2i)
    if deg >= 1:
        zu[1, 0] = zu[0, 1] = 0.5
        zv[1, 0], zv[0, 1] = -0.5j, 0.5j
    upows = [np.zeros((deg + 1, deg + 1), dtype=complex)]
    upows[0][0, 0] = 1
    vpows = [upows[0].copy()]
    for _ in range(deg):
        upows.append(_poly_mul(upows[-1], zu, deg))
        vpows.append(_poly_mul(vpows[-1], zv, deg))
    g = np.zeros((deg + 1, deg + 1), dtype=complex)
    H = U + 1j * V
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            if H[i, j] != 0:
                g += H[i, j] * _poly_mul(upows[i], vpows[j], deg)
    return g


def lyapunov_quantities(tf: TaylorField, n: int) -> tuple[list[float], float]:
    """``eta_1 .. eta_n`` with ``V' = sum eta_k |z|^(2k+2)`` and ``omega``.

    ``V = |z|^2 + sum V_jk z^j conj(z)^k``; at each degree the
    non-resonant coefficients of ``V'`` are cancelled and the resonant one
    is recorded.  The linear trace part is ignored (weak focus).
    """
    deg = 2 * n + 1
    if tf.order < deg:
        raise ValueError(f"Taylor order {tf.order} too low for {n} focal values")
    U, V, omega, _ = rotation_coordinates(tf)
    # drop the linear part: z' = i omega z + nonlinear
    U, V = U.copy(), V.copy()
    U[1, 0] = U[0, 1] = V[1, 0] = V[0, 1] = 0.0
    g = _to_complex(U, V, deg)
    gbar = np.conj(g)
    size = deg + 2
    Vc = np.zeros((size, size), dtype=complex)
    Vc[1, 1] = 1.0
    etas = []
    for m in range(3, deg + 2):
        W = np.zeros((size, size), dtype=complex)
        # contributions of lower-degree V terms times nonlinear field terms
        for a in range(m):
            for b in range(m - a):
                vab = Vc[a, b]
                if vab == 0 or a + b >= m:
                    continue
                s = m - (a + b) + 1          # degree of the field term needed
                if s < 2 or s > deg:
                    continue
                for j in range(s + 1):
                    k = s - j
                    if a and g[j, k] != 0:
                        W[a - 1 + j, b + k] += a * vab * g[j, k]
                    if b and gbar[j, k] != 0:
                        W[a + k, b - 1 + j] += b * vab * gbar[j, k]
        for j in range(m + 1):
            k = m - j
            if j == k:
                etas.append(W[j, k].real)
            else:
                Vc[j, k] = -W[j, k] / (1j * omega * (j - k))
    return etas[:n], omega


@dataclass(frozen=True)
class FocalValues:
    L: list[float]
    first_nonzero: tuple[int, int] | None
    omega: float
    trace: float = 0.0
    etas: list[float] = field(default_factory=list)


def focal_values(tf: TaylorField, n: int = 3, *, focal_tol: float = FOCAL_TOL,
                 trace_tol: float = TRACE_TOL, raw: bool = False) -> FocalValues:
    """``L_1 .. L_n`` at ``tf.center``.

    With ``raw=False`` values after the first nonzero one are replaced by
    ``nan``; ``raw=True`` returns every value (used for zero-locus scans).
    """
    if not 1 <= n <= 4:
        raise ValueError("n must be between 1 and 4")
    J = tf.linear
    tr = float(J[0, 0] + J[1, 1])
    det = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    if det <= 0:
        raise PreconditionError(f"det J = {det:.3g} <= 0: not a focus")
    if abs(tr) >= trace_tol:
        raise PreconditionError(f"trace {tr:.3g} is not zero: focal values undefined")
    if tf.order < 2 * n + 1:
        raise ValueError(f"Taylor order {tf.order} too low for L{n}")
    etas, omega = lyapunov_quantities(tf, n)
    L = [float(math.pi * e / omega) for e in etas]
    first = None
    for k, val in enumerate(L, start=1):
        if abs(val) > focal_tol:
            first = (k, 1 if val > 0 else -1)
            break
    if not raw and first is not None:
        L = [v if k <= first[0] else math.nan for k, v in enumerate(L, start=1)]
    return FocalValues(L, first, omega, tr, etas)


def field_focal_values(vf: VectorField, at: tuple[float, float], n: int = 3, **kw) -> FocalValues:
    return focal_values(taylor_expand(vf, at, 2 * n + 1), n, **kw)


def displacement_series(tf: TaylorField, order: int | None = None, rtol: float = 1e-13) -> np.ndarray:
    """Power series of ``P(rho) - rho`` on the ray ``v = 0, u = rho > 0``.

    ``out[j]`` multiplies ``rho^j``.  Computed by integrating the series
    coefficients of the orbit ``r(theta)`` in the rotation coordinates over
    one turn; the linear trace part is kept, so ``out[1]`` is
    ``exp(pi tr / omega) - 1``.  Independent of :func:`lyapunov_quantities`.
    """
    N = tf.order if order is None else order
    U, V, omega, tr = rotation_coordinates(tf)
    U, V = U.copy(), V.copy()
    # rotation part removed, trace part kept as degree-1 radial term
    U[0, 1] += omega
    V[1, 0] -= omega
    idx = [(i, j) for i in range(N + 1) for j in range(N + 1 - i) if i + j >= 1]
    deg = np.array([i + j for i, j in idx])
    ui = np.array([U[i, j] for i, j in idx])
    vi = np.array([V[i, j] for i, j in idx])
    pi_ = np.array([i for i, _ in idx])
    pj_ = np.array([j for _, j in idx])

    def series(theta):
        c, s = math.cos(theta), math.sin(theta)
        mon = c ** pi_ * s ** pj_
        A = np.bincount(deg, weights=(ui * c + vi * s) * mon, minlength=N + 1)
        B = np.bincount(deg, weights=(vi * c - ui * s) * mon, minlength=N + 1)
        # dr/dtheta = sum A_n r^n / (omega + sum B_n r^(n-1))
        den = np.zeros(N + 1)
        den[0] = omega + B[1]
        den[1:N] = B[2:N + 1]
        out = np.zeros(N + 1)
        for k in range(1, N + 1):
            out[k] = (A[k] - den[1:k] @ out[k - 1:0:-1]) / den[0]
        return out

    def rhs(theta, u):
        S = series(theta)
        r = np.concatenate(([0.0], u))
        total = np.zeros(N + 1)
        power = r.copy()
        for k in range(1, N + 1):
            if k > 1:
                power = np.convolve(power, r)[:N + 1]
            total += S[k] * power
        return total[1:]

    u0 = np.zeros(N)
    u0[0] = 1.0
    sol = solve_ivp(rhs, (0.0, 2 * math.pi), u0, method="DOP853", rtol=rtol, atol=1e-16)
    out = np.concatenate(([0.0], sol.y[:, -1]))
    out[1] -= 1.0
    return out


# --------------------------------------------------------------------------
# classification

@dataclass(frozen=True)
class HopfReport:
    kind: str                      # stable | unstable | weak-focus | center-candidate
    trace: float
    det: float
    order: int | None = None
    sign: int | None = None
    focal: list[float] = field(default_factory=list)

    @property
    def stable(self) -> bool | None:
        if self.kind == "stable":
            return True
        if self.kind == "unstable":
            return False
        if self.kind == "weak-focus":
            return self.sign < 0
        return None

    def as_dict(self) -> dict:
        return {"kind": self.kind, "trace": self.trace, "det": self.det,
                "order": self.order, "sign": self.sign, "stable": self.stable,
                "focal_values": self.focal}


def classify(vf: VectorField, at: tuple[float, float], depth: int = 4, *,
             trace_tol: float = TRACE_TOL, focal_tol: float = FOCAL_TOL) -> HopfReport:
    jac = jacobian(vf, at)
    if jac.det <= 0:
        raise PreconditionError(f"det J = {jac.det:.3g} <= 0")
    if abs(jac.trace) >= trace_tol:
        return HopfReport("stable" if jac.trace < 0 else "unstable", jac.trace, jac.det)
    fv = field_focal_values(vf, at, depth, focal_tol=focal_tol, trace_tol=trace_tol, raw=True)
    if fv.first_nonzero is None:
        return HopfReport("center-candidate", jac.trace, jac.det, focal=fv.L)
    k, sgn = fv.first_nonzero
    return HopfReport("weak-focus", jac.trace, jac.det, k, sgn, fv.L[:k])


def hopf_classify(scaled: ScaledSystem, depth: int = 4, **kw) -> HopfReport:
    return classify(scaled.field, (1.0, 1.0), depth, **kw)
