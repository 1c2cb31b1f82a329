"""Global tests: monomial Dulac functions, reversibility and Lienard centers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .equilibrium import ScaledSystem, TemplateError, match_three_reactions
from .network import Complex, ReactionNetwork, VectorField, as_fraction

INF = math.inf


# --------------------------------------------------------------------------
# Dulac

class DegenerateQuadrangleError(TemplateError):
    pass


def quadrangle_cycle(net: ReactionNetwork) -> tuple[tuple[Complex, ...], tuple[float, ...]]:
    """Vertices ``P1..P4`` in cycle order with the rate of ``P_i -> P_{i+1}``."""
    if len(net.reactions) != 4 or len(net.complexes) != 4:
        raise TemplateError("not a quadrangle: need 4 complexes and 4 reactions")
    out = {}
    for r in net.reactions:
        if r.source in out:
            raise TemplateError("not a quadrangle: complex with two outgoing reactions")
        out[r.source] = r
    start = net.reactions[0].source
    pts, kappas = [], []
    p = start
    for _ in range(4):
        if p not in out:
            raise TemplateError("not a quadrangle: reactions do not form a 4-cycle")
        pts.append(p)
        kappas.append(out[p].kappa)
        p = out[p].target
    if p != start or len(set(pts)) != 4:
        raise TemplateError("not a quadrangle: reactions do not form a 4-cycle")
    return tuple(pts), tuple(kappas)


@dataclass(frozen=True)
class Interval:
    lo: Fraction | float
    hi: Fraction | float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    def witness(self) -> Fraction | None:
        if self.empty:
            return None
        if self.lo == -INF and self.hi == INF:
            return Fraction(0)
        if self.lo == -INF:
            return self.hi - 1
        if self.hi == INF:
            return self.lo + 1
        return (self.lo + self.hi) / 2

    def as_list(self):
        return [_num(self.lo), _num(self.hi)]


def _num(v):
    if isinstance(v, Fraction):
        return float(v)
    return v


def exponent_interval(values) -> Interval:
    """Intersection of ``{t : (t - v_i)(v_i - v_{i+1}) <= 0}`` over the cycle."""
    lo, hi = -INF, INF
    n = len(values)
    for i in range(n):
        v, w = values[i], values[(i + 1) % n]
        if v < w:
            lo = max(lo, v)
        elif v > w:
            hi = min(hi, v)
    return Interval(lo, hi)


@dataclass(frozen=True)
class DulacResult:
    found: bool
    alpha: Fraction | None
    beta: Fraction | None
    alpha_interval: Interval
    beta_interval: Interval
    collisions: int = 0

    def as_dict(self):
        return {"found": self.found,
                "alpha": None if self.alpha is None else float(self.alpha),
                "beta": None if self.beta is None else float(self.beta),
                "alpha_exact": None if self.alpha is None else str(self.alpha),
                "beta_exact": None if self.beta is None else str(self.beta),
                "alpha_interval": self.alpha_interval.as_list(),
                "beta_interval": self.beta_interval.as_list(),
                "collisions": self.collisions}


def dulac_terms(pts, kappas, alpha, beta) -> dict[tuple[Fraction, Fraction], float]:
    """Monomial coefficients of ``div(h f, h g) / h`` for ``h = x^-alpha y^-beta``.

    Colliding monomials are summed.
    """
    terms: dict[tuple[Fraction, Fraction], float] = {}
    n = len(pts)
    for i in range(n):
        p, q = pts[i], pts[(i + 1) % n]
        cx = (alpha - p.a) * (p.a - q.a)
        cy = (beta - p.b) * (p.b - q.b)
        if cx:
            key = (p.a - 1, p.b)
            terms[key] = terms.get(key, 0.0) + float(cx) * kappas[i]
        if cy:
            key = (p.a, p.b - 1)
            terms[key] = terms.get(key, 0.0) + float(cy) * kappas[i]
    return terms


def _collisions(pts) -> int:
    xs = {(p.a - 1, p.b) for p in pts}
    ys = {(p.a, p.b - 1) for p in pts}
    return len(xs & ys)


def dulac_search(net: ReactionNetwork) -> DulacResult:
    """Look for ``h = x^-alpha y^-beta`` making every divergence term non-positive."""
    pts, kappas = quadrangle_cycle(net)
    a = [p.a for p in pts]
    b = [p.b for p in pts]
    if len(set(a)) == 1 or len(set(b)) == 1:
        raise DegenerateQuadrangleError("all complexes share a coordinate")
    ia, ib = exponent_interval(a), exponent_interval(b)
    alpha, beta = ia.witness(), ib.witness()
    found = False
    if alpha is not None and beta is not None:
        coeffs = dulac_terms(pts, kappas, alpha, beta).values()
        found = all(c <= 0 for c in coeffs) and any(c < 0 for c in coeffs)
    return DulacResult(found, alpha if found else None, beta if found else None, ia, ib,
                       _collisions(pts))


def _pattern_holds(v) -> bool:
    """``v_i < v_{i+3} < v_{i+1} < v_{i+2}`` at an index attaining the minimum."""
    m = min(v)
    for i in range(4):
        if v[i] == m and v[i] < v[(i + 3) % 4] < v[(i + 1) % 4] < v[(i + 2) % 4]:
            return True
    return False


def dulac_geometric(net: ReactionNetwork) -> bool:
    """True when both projection patterns are violated (no periodic orbit)."""
    pts, _ = quadrangle_cycle(net)
    return not (_pattern_holds([p.a for p in pts]) or _pattern_holds([p.b for p in pts]))


def dulac_divergence(net: ReactionNetwork, alpha, beta, x: float, y: float) -> float:
    """``div(h f, h g) / h`` evaluated directly from the field (independent of the term table)."""
    from .network import vector_field
    vf = vector_field(net)
    (fx, fy), (gx, gy) = _partials(vf, x, y)
    f, g = vf(x, y)
    return fx + gy - float(alpha) * f / x - float(beta) * g / y


def _partials(vf: VectorField, x, y):
    from .local_analysis import jacobian_matrix
    J = jacobian_matrix(vf, x, y)
    return (J[0, 0], J[0, 1]), (J[1, 0], J[1, 1])


# --------------------------------------------------------------------------
# reversibility

def _field_of(obj) -> VectorField:
    return obj.field if isinstance(obj, ScaledSystem) else obj


def reversibility_check(system, tol: float = 1e-12) -> bool:
    """``x' = f(x, y)`` and ``y' = -f(y, x)``, term by term."""
    vf = _field_of(system)
    scale = max([abs(c) for c, _, _ in vf.x_terms + vf.y_terms], default=1.0)
    xs = {(e, f): c for c, e, f in vf.x_terms}
    ys = {(e, f): c for c, e, f in vf.y_terms}
    if len(xs) != len(ys):
        return False
    for (e, f), c in xs.items():
        other = ys.get((f, e))
        if other is None or abs(other + c) > tol * scale:
            return False
    return True


def _reversible_template(scaled: ScaledSystem):
    tpl = match_three_reactions(scaled.network)
    if tpl is None:
        raise TemplateError("not three separate reactions")
    s1, s2, s3 = tpl.sources
    if not (s1.a == 0 and s1.b == 0 and s2.a == s3.b and s2.b == s3.a and s2 != s3):
        raise TemplateError("sources are not (0,0), (p,q), (q,p)")
    return tpl, s2.a, s2.b


def reversible_center_conditions(scaled: ScaledSystem, tol: float = 1e-12) -> bool:
    tpl, p, q = _reversible_template(scaled)
    (c1, d1), (c2, d2), (c3, d3) = [(float(c), float(d)) for c, d in tpl.vectors]
    k1, k2, k3 = scaled.kbar
    K, lam = scaled.K, scaled.lam
    if lam is None:
        raise TemplateError("lambda unavailable")

    def close(u, v):
        return abs(u - v) <= tol * max(1.0, abs(u), abs(v))

    ok = close(c1, -K * d1) and close(c2 * k2, -K * d3 * k3) and close(c3 * k3, -K * d2 * k2)
    return ok and K * float(p * p - q * q) / lam > 0


@dataclass(frozen=True)
class CenterRates:
    kappa1_free: bool
    ratio: float | None          # required kappa3 / kappa2
    branch: str

    def as_dict(self):
        return self.__dict__.copy()


def rate_constants_for_center(c, d, p, q) -> CenterRates:
    """Rate constants making the reversible three-reaction system a center.

    ``kappa1`` is free.  Normally ``kappa3/kappa2 = -(c2/d3)(-c1/d1)^(p-q-1)``;
    when ``c2 = d3 = 0`` that expression is undetermined and the ratio comes
    from ``c3 kbar3 = -K d2 kbar2`` instead.
    """
    c1, c2, c3 = (float(as_fraction(v)) for v in c)
    d1, d2, d3 = (float(as_fraction(v)) for v in d)
    p, q = float(as_fraction(p)), float(as_fraction(q))
    if d1 == 0 or c1 == 0:
        raise ValueError("c1 and d1 must be nonzero")
    K = -c1 / d1
    if d3 != 0:
        return CenterRates(True, -(c2 / d3) * K ** (p - q - 1), "c2/d3")
    if c2 != 0:
        raise ValueError("sgn c2 = -sgn d3 is violated")
    if c3 == 0:
        raise ValueError("c3 must be nonzero")
    return CenterRates(True, -(d2 / c3) * K ** (p - q + 1), "d2/c3")


# --------------------------------------------------------------------------
# Lienard

LIENARD_SOURCES = (Complex(1, 0), Complex(0, Fraction(-1, 2)), Complex(0, -2))


@dataclass(frozen=True)
class LienardCheck:
    satisfied: bool
    c1k1: float
    Kd2k2: float
    fourKd3k3: float
    phi_alpha: float
    phi_beta: float

    def as_dict(self):
        return self.__dict__.copy()


@dataclass(frozen=True)
class LienardData:
    c: tuple[float, float, float]
    d: tuple[float, float, float]
    kbar: tuple[float, float, float]
    K: float
    lam: float

    @property
    def gscale(self) -> float:
        k1, k2, k3 = self.kbar
        return self.K * k1 * k2 * k3 / self.lam

    def f(self, y):
        (c1, _, _), (_, d2, d3), (k1, k2, k3) = self.c, self.d, self.kbar
        K = self.K
        return -c1 * k1 + 0.5 * K * d2 * k2 * (y + 1) ** -1.5 + 2 * K * d3 * k3 * (y + 1) ** -3

    def g(self, y):
        return self.gscale * ((y + 1) ** -0.5 - (y + 1) ** -2)

    def F(self, x):
        (c1, _, _), (_, d2, d3), (k1, k2, k3) = self.c, self.d, self.kbar
        K = self.K
        return -c1 * k1 * x - K * d2 * k2 * ((x + 1) ** -0.5 - 1) - K * d3 * k3 * ((x + 1) ** -2 - 1)

    def G(self, x):
        return self.gscale * (2 * (x + 1) ** 0.5 + (x + 1) ** -1 - 3)


def lienard_data(scaled: ScaledSystem) -> LienardData:
    tpl = match_three_reactions(scaled.network)
    if tpl is None or tuple(tpl.sources) != LIENARD_SOURCES:
        raise TemplateError("sources are not (1,0), (0,-1/2), (0,-2)")
    if scaled.lam is None:
        raise TemplateError("lambda unavailable")
    c = tuple(float(v[0]) for v in tpl.vectors)
    d = tuple(float(v[1]) for v in tpl.vectors)
    return LienardData(c, d, tuple(scaled.kbar), scaled.K, scaled.lam)


def lienard_center_check(scaled: ScaledSystem, rtol: float = 1e-10) -> LienardCheck:
    data = lienard_data(scaled)
    K, lam = data.K, data.lam
    if not K / lam > 0:
        raise ValueError("Lienard test needs K / lambda > 0")
    c1, d2, d3 = data.c[0], data.d[1], data.d[2]
    k1, k2, k3 = data.kbar
    p1, p2, p3 = c1 * k1, K * d2 * k2, 4 * K * d3 * k3
    scale = max(abs(p1), abs(p2), abs(p3))
    ok = scale > 0 and max(p1, p2, p3) - min(p1, p2, p3) <= rtol * scale and p1 != 0
    prod = K * k1 * k2 * k3
    alpha = -(lam ** 2 / 4) * p1 / prod ** 2
    beta = -(3 * lam / 2) * p1 / prod
    return LienardCheck(bool(ok), p1, p2, p3, alpha, beta)
