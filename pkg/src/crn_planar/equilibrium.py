"""Positive equilibria: existence tests, solvers and rescaling to ``(1, 1)``."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .network import Complex, NetworkError, ReactionNetwork, VectorField, vector_field

SOLVER_TOL = 1e-12
SCALED_TOL = 1e-10
NEWTON_MAX_ITER = 60
NEWTON_STEP_TOL = 1e-8
NEWTON_MAX_COND = 1e10


class NoEquilibriumError(RuntimeError):
    """No positive equilibrium exists or none was found."""


class TemplateError(NetworkError):
    """Network does not match the requested template."""


def _sign(v) -> int:
    return (v > 0) - (v < 0)


def signed_area(pi: Complex, pj: Complex, pk: Complex) -> Fraction:
    """``det(Pj - Pi, Pk - Pi)``: twice the oriented triangle area."""
    u, v = pj - pi, pk - pi
    return u[0] * v[1] - u[1] * v[0]


@dataclass(frozen=True)
class SignedAreas:
    h1: Fraction
    h2: Fraction
    h3: Fraction
    h4: Fraction

    @classmethod
    def of(cls, p1: Complex, p2: Complex, p3: Complex, p4: Complex) -> "SignedAreas":
        return cls(signed_area(p2, p4, p3), signed_area(p1, p3, p4),
                   signed_area(p1, p4, p2), signed_area(p1, p2, p3))

    @property
    def partial_sums(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.h1, self.h1 + self.h2, self.h1 + self.h2 + self.h3)


# --------------------------------------------------------------------------
# template detection

@dataclass(frozen=True)
class ChainTemplate:
    points: tuple[Complex, Complex, Complex, Complex]
    kappas: tuple[float, float, float]

    @property
    def areas(self) -> SignedAreas:
        return SignedAreas.of(*self.points)


@dataclass(frozen=True)
class ThreeReactionTemplate:
    sources: tuple[Complex, Complex, Complex]
    vectors: tuple[tuple[Fraction, Fraction], ...]
    kappas: tuple[float, float, float]

    @property
    def cross(self) -> tuple[Fraction, Fraction, Fraction]:
        (c1, d1), (c2, d2), (c3, d3) = self.vectors
        return (c2 * d3 - c3 * d2, c3 * d1 - c1 * d3, c1 * d2 - c2 * d1)


def match_chain(net: ReactionNetwork) -> ChainTemplate | None:
    """Recognise ``P1 -> P2 -> P3 -> P4`` with four distinct complexes."""
    if len(net.reactions) != 3 or len(net.complexes) != 4:
        return None
    for order in itertools.permutations(net.reactions):
        r1, r2, r3 = order
        if r1.target == r2.source and r2.target == r3.source:
            pts = (r1.source, r2.source, r3.source, r3.target)
            if len(set(pts)) == 4:
                return ChainTemplate(pts, (r1.kappa, r2.kappa, r3.kappa))
    return None


def match_three_reactions(net: ReactionNetwork) -> ThreeReactionTemplate | None:
    """Recognise three reactions with distinct source complexes.

    Targets may coincide with other complexes (the network can share
    complexes between reactions); only the sources enter the field.
    """
    if len(net.reactions) != 3:
        return None
    rs = net.reactions
    if len({r.source for r in rs}) != 3:
        return None
    return ThreeReactionTemplate(tuple(r.source for r in rs), tuple(r.vector for r in rs),
                                 tuple(r.kappa for r in rs))


def _as_chain(net_or_tpl) -> ChainTemplate:
    if isinstance(net_or_tpl, ChainTemplate):
        return net_or_tpl
    tpl = match_chain(net_or_tpl)
    if tpl is None:
        raise TemplateError("network is not a chain of three reactions")
    return tpl


def _as_three(net_or_tpl) -> ThreeReactionTemplate:
    if isinstance(net_or_tpl, ThreeReactionTemplate):
        return net_or_tpl
    tpl = match_three_reactions(net_or_tpl)
    if tpl is None:
        raise TemplateError("network is not three separate reactions")
    return tpl


# --------------------------------------------------------------------------
# existence predicates

def chain_equilibrium_exists(net) -> bool:
    """Common nonzero sign of ``h1``, ``h1+h2``, ``h1+h2+h3``."""
    tpl = _as_chain(net)
    p1, p2, p3, _ = tpl.points
    if signed_area(p1, p2, p3) == 0:
        raise TemplateError("first three complexes of the chain are collinear")
    s = {_sign(v) for v in tpl.areas.partial_sums}
    return len(s) == 1 and 0 not in s


def chain_geometric_exists(p1: Complex, p2: Complex, p3: Complex, p4: Complex) -> bool:
    """P1, P4 strictly on one side of line P2P3 and the turning angles at P2
    and P3 sum to less than 180 degrees.

    Angles are measured with floating trigonometry, so this is an
    independent cross-check of :func:`chain_equilibrium_exists`.
    """
    s1 = _sign(signed_area(p2, p3, p1))
    s4 = _sign(signed_area(p2, p3, p4))
    if s1 == 0 or s1 != s4:
        return False

    def angle(a: Complex, vertex: Complex, c: Complex) -> float:
        u = np.array([float(a.a - vertex.a), float(a.b - vertex.b)])
        w = np.array([float(c.a - vertex.a), float(c.b - vertex.b)])
        cosang = u @ w / (np.linalg.norm(u) * np.linalg.norm(w))
        return math.degrees(math.acos(max(-1.0, min(1.0, cosang))))

    total = angle(p1, p2, p3) + angle(p2, p3, p4)
    return total < 180.0 - 1e-9


def three_reaction_exists(net) -> bool:
    tpl = _as_three(net)
    s1, s2, s3 = tpl.sources
    if signed_area(s1, s2, s3) == 0:
        raise TemplateError("source complexes are collinear")
    if any(c == 0 and d == 0 for c, d in tpl.vectors):
        raise TemplateError("zero reaction vector")
    cross = tpl.cross
    if all(v == 0 for v in cross):
        raise TemplateError("reaction vectors do not span the plane")
    s = {_sign(v) for v in cross}
    return len(s) == 1 and 0 not in s


# --------------------------------------------------------------------------
# solvers

@dataclass(frozen=True)
class Equilibrium:
    x: float
    y: float
    residual: float
    method: str = "newton"

    @property
    def point(self) -> tuple[float, float]:
        return (self.x, self.y)


def relative_residual(vf: VectorField, x: float, y: float) -> float:
    """max |component| divided by max(1, largest term magnitude)."""
    f, g = vf(x, y)
    return max(abs(f), abs(g)) / max(1.0, vf.term_scale(x, y))


def _solve_log_linear(rows, rhs) -> tuple[float, float]:
    """2x2 linear solve in ``(log x, log y)`` with exact rational matrix."""
    (p, q), (r, s) = rows
    det = p * s - q * r
    if det == 0:
        raise NoEquilibriumError("singular binomial system")
    u = (float(s) * rhs[0] - float(q) * rhs[1]) / float(det)
    v = (float(p) * rhs[1] - float(r) * rhs[0]) / float(det)
    return u, v


def _finish(net: ReactionNetwork, u: float, v: float, method: str) -> Equilibrium:
    x, y = math.exp(u), math.exp(v)
    return Equilibrium(x, y, relative_residual(vector_field(net), x, y), method)


def solve_chain(net: ReactionNetwork) -> Equilibrium:
    tpl = _as_chain(net)
    if not chain_equilibrium_exists(tpl):
        raise NoEquilibriumError("chain sign condition fails")
    p1, p2, p3, _ = tpl.points
    k1, k2, k3 = tpl.kappas
    h1, h12, h123 = tpl.areas.partial_sums
    # (h1+h2+h3) k1 m1 = h1 k3 m3  and  (h1+h2) k1 m1 = h1 k2 m2
    rows = ((p3.a - p1.a, p3.b - p1.b), (p2.a - p1.a, p2.b - p1.b))
    rhs = (math.log(float(h123 / h1) * k1 / k3), math.log(float(h12 / h1) * k1 / k2))
    return _finish(net, *_solve_log_linear(rows, rhs), "binomial-chain")


def solve_three_reactions(net: ReactionNetwork) -> Equilibrium:
    tpl = _as_three(net)
    if not three_reaction_exists(tpl):
        raise NoEquilibriumError("three-reaction sign condition fails")
    s1, s2, s3 = tpl.sources
    k1, k2, k3 = tpl.kappas
    e1, e2, e3 = tpl.cross
    # e3 k1 m1 = e1 k3 m3  and  e2 k1 m1 = e1 k2 m2
    rows = ((s3.a - s1.a, s3.b - s1.b), (s2.a - s1.a, s2.b - s1.b))
    rhs = (math.log(float(e3 / e1) * k1 / k3), math.log(float(e2 / e1) * k1 / k2))
    return _finish(net, *_solve_log_linear(rows, rhs), "binomial-three")


def _scaled_residual(vf: VectorField, x: float, y: float) -> float:
    """max |component| relative to the largest term.

    Unlike :func:`relative_residual` this does not flatten towards the
    origin, where every term (and so the field) vanishes.
    """
    f, g = vf(x, y)
    scale = vf.term_scale(x, y)
    return max(abs(f), abs(g)) / scale if scale > 0 else math.inf


def _normalized(vf: VectorField) -> VectorField:
    """Each component divided by the geometric-mean monomial of its own terms.

    Positive monomial factors keep the roots in the open quadrant and make
    the system scale free, so neither the origin nor infinity looks like a
    root.
    """
    def shift(terms):
        if not terms:
            return []
        ea = sum(e for _, e, _ in terms) / len(terms)
        eb = sum(f for _, _, f in terms) / len(terms)
        return [(c, e - ea, f - eb) for c, e, f in terms]

    return VectorField(shift(vf.x_terms), shift(vf.y_terms))


def _newton_log(vf: VectorField, u: float, v: float, tol: float, polish: int = 4):
    """Damped Newton in ``(log x, log y)`` on the normalized system.

    Returns ``(u, v, residual, last_step)`` where ``residual`` is the
    term-relative residual of ``vf`` and ``last_step`` the size of the final
    Newton correction.  The step is halved until ``|H|`` decreases.
    """
    from .local_analysis import jacobian_matrix
    H = _normalized(vf)

    def merit(u, v):
        return float(np.hypot(*H(math.exp(u), math.exp(v))))

    def newton(u, v):
        x, y = math.exp(u), math.exp(v)
        jac = jacobian_matrix(H, x, y) * np.array([x, y])
        try:
            step = np.linalg.solve(jac, -np.array(H(x, y)))
        except np.linalg.LinAlgError:
            return None
        return step if np.all(np.isfinite(step)) else None

    def resid(u, v):
        return _scaled_residual(vf, math.exp(u), math.exp(v))

    m = merit(u, v)
    extra = polish
    for _ in range(NEWTON_MAX_ITER + polish):
        step = newton(u, v)
        if step is None:
            return u, v, resid(u, v), math.inf
        size = float(abs(step).max())
        if resid(u, v) < tol:
            if extra == 0 or size < 1e-15:
                return u, v, resid(u, v), size
            extra -= 1
        # cap the log step so exp() stays finite
        step *= min(1.0, 5.0 / max(size, 1e-300))
        t = 1.0
        while t > 1e-10:
            nu, nv = u + t * step[0], v + t * step[1]
            try:
                nm = merit(nu, nv)
            except (OverflowError, ZeroDivisionError):
                nm = math.inf
            if nm < m:
                break
            t /= 2
        else:
            return u, v, resid(u, v), size
        u, v, m = nu, nv, nm
    step = newton(u, v)
    return u, v, resid(u, v), math.inf if step is None else float(abs(step).max())


def _log_condition(vf: VectorField, x: float, y: float) -> float:
    from .local_analysis import jacobian_matrix
    jac = jacobian_matrix(_normalized(vf), x, y) * np.array([x, y])
    return float(np.linalg.cond(jac))


def solve_newton(net_or_field, tol: float = SOLVER_TOL) -> Equilibrium:
    """Multi-start damped Newton in logarithmic coordinates.

    Starts on the 7x7 grid ``u, v in {-3, ..., 3}``; the first start that
    reaches relative residual below ``tol`` wins.
    """
    vf = net_or_field if isinstance(net_or_field, VectorField) else vector_field(net_or_field)
    starts = sorted(itertools.product(range(-3, 4), repeat=2), key=lambda p: (abs(p[0]) + abs(p[1]), p))
    for u0, v0 in starts:
        u, v, r, last = _newton_log(vf, float(u0), float(v0), tol)
        # a root drifting off to infinity can show a small residual; a genuine
        # root also has a negligible Newton correction in log coordinates
        if r < tol and last < NEWTON_STEP_TOL:
            x, y = math.exp(u), math.exp(v)
            # at a root at infinity the normalized Jacobian degenerates
            if _log_condition(vf, x, y) > NEWTON_MAX_COND:
                continue
            return Equilibrium(x, y, relative_residual(vf, x, y), "newton")
    raise NoEquilibriumError("no positive equilibrium found by multi-start Newton")


def solve_equilibrium(net: ReactionNetwork, method: str = "auto", tol: float = SOLVER_TOL) -> Equilibrium:
    """Unique positive equilibrium.

    ``method`` is ``"auto"`` (binomial route when the network is a chain or
    three separate reactions, Newton otherwise), ``"binomial"`` or ``"newton"``.
    """
    if method not in ("auto", "binomial", "newton"):
        raise ValueError(f"unknown method {method!r}")
    if method != "newton":
        try:
            if match_chain(net) is not None:
                return solve_chain(net)
            if match_three_reactions(net) is not None:
                return solve_three_reactions(net)
        except TemplateError:
            # degenerate template (collinear sources): only Newton can help
            if method == "binomial":
                raise
            return solve_newton(net, tol)
        if method == "binomial":
            raise TemplateError("no binomial template matches this network")
    return solve_newton(net, tol)


# --------------------------------------------------------------------------
# scaling

@dataclass(frozen=True)
class ScaledSystem:
    """Field after ``x -> xbar x, y -> ybar y`` and a time change by ``xbar``.

    ``y' `` carries the factor ``K = xbar / ybar``; ``kbar[i]`` is
    ``kappa_i xbar^a_i ybar^b_i``.  ``lam`` is set for chain and
    three-reaction templates.
    """

    field: VectorField
    kbar: tuple[float, ...]
    K: float
    lam: float | None
    network: ReactionNetwork
    equilibrium: Equilibrium

    @property
    def residual(self) -> float:
        return relative_residual(self.field, 1.0, 1.0)


def scaled_field(net: ReactionNetwork, xbar: float, ybar: float) -> tuple[VectorField, tuple[float, ...], float]:
    K = xbar / ybar
    kbar = tuple(r.kappa * xbar ** float(r.source.a) * ybar ** float(r.source.b)
                 for r in net.reactions)
    xs, ys = [], []
    for r, kb in zip(net.reactions, kbar):
        da, db = r.vector
        if da:
            xs.append((float(da) * kb, r.source.a, r.source.b))
        if db:
            ys.append((K * float(db) * kb, r.source.a, r.source.b))
    return VectorField(xs, ys), kbar, K


def scale_to_unit(net: ReactionNetwork, eq: Equilibrium | None = None) -> ScaledSystem:
    if eq is None:
        eq = solve_equilibrium(net)
    field, kbar, K = scaled_field(net, eq.x, eq.y)
    lam = None
    chain = match_chain(net)
    if chain is not None:
        h1, h12, _ = chain.areas.partial_sums
        if h1 != 0:
            lam = kbar[0] / float(h1)
        elif h12 != 0:
            lam = kbar[1] / float(h12)
    else:
        three = match_three_reactions(net)
        if three is not None and three.cross[0] != 0:
            lam = kbar[0] / float(three.cross[0])
    return ScaledSystem(field, kbar, K, lam, net, eq)


def unscale_kappas(points_sources, kbar, K: float, ybar: float = 1.0) -> tuple[float, ...]:
    """Rate constants whose equilibrium is ``(K ybar, ybar)`` with the given ``kbar``."""
    xbar = K * ybar
    return tuple(kb / (xbar ** float(s.a) * ybar ** float(s.b))
                 for s, kb in zip(points_sources, kbar))
