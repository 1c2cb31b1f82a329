"""Built-in parameterized networks.

Each family yields the scaled data ``(sources, targets, kbar, K)`` and a
concrete network whose equilibrium is ``(K, 1)``, so that scaling the
network reproduces ``kbar`` and ``K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .equilibrium import unscale_kappas
from .network import Complex, Reaction, ReactionNetwork, VectorField, as_fraction


class FamilyError(ValueError):
    pass


@dataclass(frozen=True)
class FamilyInstance:
    name: str
    params: dict
    sources: tuple[Complex, ...]
    targets: tuple[Complex, ...]
    kbar: tuple[float, ...]
    K: float
    lam: float | None = None
    natural: bool = False   # rate constants given directly, no scaling

    def network(self) -> ReactionNetwork:
        if self.natural:
            kappas = self.kbar
        else:
            kappas = unscale_kappas(self.sources, self.kbar, self.K)
        return ReactionNetwork(tuple(Reaction(s, t, k)
                                     for s, t, k in zip(self.sources, self.targets, kappas)))

    def scaled_field(self) -> VectorField:
        """Field at unit equilibrium: ``x' = sum c_i kbar_i m_i``, ``y' = K sum d_i kbar_i m_i``."""
        K = 1.0 if self.natural else self.K
        xs, ys = [], []
        for s, t, kb in zip(self.sources, self.targets, self.kbar):
            c, d = t - s
            xs.append((float(c) * kb, s.a, s.b))
            ys.append((K * float(d) * kb, s.a, s.b))
        return VectorField(xs, ys)


@dataclass(frozen=True)
class Family:
    name: str
    params: tuple[str, ...]
    defaults: dict
    build: Callable[..., FamilyInstance]
    critical: Callable[[], dict] | None = None
    doc: str = ""

    def instance(self, **params) -> FamilyInstance:
        unknown = set(params) - set(self.params)
        if unknown:
            raise FamilyError(f"unknown parameter(s) for {self.name}: {', '.join(sorted(unknown))}")
        merged = dict(self.defaults)
        merged.update({k: v for k, v in params.items() if v is not None})
        return self.build(**merged)


def _C(a, b) -> Complex:
    return Complex(as_fraction(a), as_fraction(b))


def _three(name, params, sources, vectors, lam, K) -> FamilyInstance:
    (c1, d1), (c2, d2), (c3, d3) = vectors
    cross = (c2 * d3 - c3 * d2, c3 * d1 - c1 * d3, c1 * d2 - c2 * d1)
    kbar = tuple(lam * float(x) for x in cross)
    if not all(k > 0 for k in kbar):
        raise FamilyError(f"{name}: no positive equilibrium for these parameters")
    targets = tuple(s.shifted(c, d) for s, (c, d) in zip(sources, vectors))
    return FamilyInstance(name, params, tuple(sources), targets, kbar, K, lam)


# quadrangles ---------------------------------------------------------------

def _quadrangle31(k1=1.0, k2=1.0, k3=1.0, k4=1.0):
    pts = (_C(0, 1), _C(1, 0), _C(1, 2), _C(0, 3))
    return FamilyInstance("quadrangle31", dict(k1=k1, k2=k2, k3=k3, k4=k4), pts,
                          pts[1:] + pts[:1], (float(k1), float(k2), float(k3), float(k4)),
                          1.0, natural=True)


def quadrangle_trace_zero_gamma(K: float, b4: float = 5) -> float:
    return 1.0 / K + b4 * b4 - 3 * b4 + 6


def _quadrangle32(K=0.0686218411826, gamma=None, b4=5):
    b4f = as_fraction(b4)
    if not b4f > 2:
        raise FamilyError("quadrangle32 needs b4 > 2")
    if gamma is None:
        gamma = quadrangle_trace_zero_gamma(K, float(b4f))
    k3 = (gamma - 3 + float(b4f)) / (float(b4f) - 2)
    if not (K > 0 and gamma > 0 and k3 > 0):
        raise FamilyError("quadrangle32 needs K > 0 and gamma > 0")
    pts = (_C(0, 1), _C(0, 0), _C(1, 2), Complex(Fraction(1), b4f))
    return FamilyInstance("quadrangle32", dict(K=K, gamma=gamma, b4=b4), pts, pts[1:] + pts[:1],
                          (float(gamma), 1.0, k3, 1.0), float(K))


def _quadrangle32_critical():
    from .dynamics import quadrangle_k0
    K0 = quadrangle_k0()
    return {"K": K0, "gamma": 16 + 1 / K0}


# chains --------------------------------------------------------------------

def chain_trace_zero_k(q: float, r: float) -> float:
    return 2.0 / (r - q * (2 * q + 1))


def _chain41(q=0.25, r=1.875, K=None):
    if not (q > 0 and r > 0):
        raise FamilyError("chain41 needs q > 0 and r > 0")
    qf, rf = as_fraction(q), as_fraction(r)
    if K is None:
        if not r > q * (2 * q + 1):
            raise FamilyError("trace cannot vanish unless r > q(2q+1)")
        K = chain_trace_zero_k(q, r)
    pts = (_C(0, 0), Complex(0, -qf), _C(1, Fraction(1, 2)), Complex(0, Fraction(1, 2) + rf))
    kbar = ((float(qf) + float(rf) + 0.5) / float(qf), 1.0, 1.0)
    return FamilyInstance("chain41", dict(q=q, r=r, K=K), pts[:3], pts[1:], kbar, float(K),
                          -1.0 / float(qf))


def _chain42(p=2, q=-1):
    pf, qf = as_fraction(p), as_fraction(q)
    if not (pf * qf < 0 and pf + qf != 0):
        raise FamilyError("chain42 needs pq < 0 and p + q != 0")
    pts = (_C(0, 0), Complex(pf, qf), Complex(qf, pf), Complex(qf - pf, pf + qf * qf / pf))
    p_, q_ = float(pf), float(qf)
    kbar = ((p_ - q_) / p_, -q_ / (p_ - q_), 1.0)
    return FamilyInstance("chain42", dict(p=p, q=q), pts[:3], pts[1:], kbar, -p_ / q_,
                          -1.0 / (p_ * p_ - q_ * q_))


# three separate reactions ----------------------------------------------------

def three51_b_on_l1_zero(a: float, d: float) -> float:
    return (-2 + a * (1 + math.sqrt(1 + 8 * d))) / (2 * d)


def _three51(a=1.0, d=3.0, b=None, K=None):
    if b is None:
        b = three51_b_on_l1_zero(a, d)
    if not (a > 0 and b > -1 and d > 0 and 1 + b * d > 0):
        raise FamilyError("three51 needs a > 0, b > -1, d > 0 and 1 + bd > 0")
    if K is None:
        K = a / (1 + b * d)
    sources = (_C(0, 0), _C(0, -1), _C(a, b))
    vectors = ((Fraction(0), Fraction(-1)), (Fraction(1), Fraction(-1)),
               (Fraction(-1), as_fraction(d)))
    return _three("three51", dict(a=a, b=b, d=d, K=K), sources, vectors, 1.0, float(K))


def _three52(p=2, q=-1, c1=1, c2=-1, c3=-2, d1=-1, d2=2, d3=1, K=None, lam=1.0):
    pf, qf = as_fraction(p), as_fraction(q)
    if abs(pf) == abs(qf):
        raise FamilyError("three52 needs |p| != |q|")
    c = [as_fraction(v) for v in (c1, c2, c3)]
    d = [as_fraction(v) for v in (d1, d2, d3)]
    if K is None:
        K = float(-c[0] / d[0])
    sources = (_C(0, 0), Complex(pf, qf), Complex(qf, pf))
    return _three("three52", dict(p=p, q=q, c1=c1, c2=c2, c3=c3, d1=d1, d2=d2, d3=d3, K=K, lam=lam),
                  sources, tuple(zip(c, d)), float(lam), float(K))


def _three53(c1=1, c2=Fraction(-1, 2), c3=-2, d1=-1, d2=2, d3=Fraction(1, 2), K=1.25, lam=None):
    c = [as_fraction(v) for v in (c1, c2, c3)]
    d = [as_fraction(v) for v in (d1, d2, d3)]
    if lam is None:
        # normalizes c1 * kbar1 to 5 as in the worked example
        lam = 5.0 / float(c[0] * (c[1] * d[2] - c[2] * d[1]))
    sources = (_C(1, 0), _C(0, Fraction(-1, 2)), _C(0, -2))
    return _three("three53", dict(c1=c1, c2=c2, c3=c3, d1=d1, d2=d2, d3=d3, K=K, lam=lam),
                  sources, tuple(zip(c, d)), float(lam), float(K))


# zigzag --------------------------------------------------------------------

def _zigzag(kappa=1.0):
    y3, xy2, y, x = _C(0, 3), _C(1, 2), _C(0, 1), _C(1, 0)
    return FamilyInstance("zigzag", dict(kappa=kappa), (y3, xy2, xy2, y, y), (xy2, y3, y, xy2, x),
                          (1.0, 2.0, 1.0, 1.0, float(kappa)), 1.0, natural=True)


FAMILIES: dict[str, Family] = {f.name: f for f in (
    Family("quadrangle31", ("k1", "k2", "k3", "k4"), {}, _quadrangle31,
           doc="Y -> X -> X+2Y -> 3Y -> Y"),
    Family("quadrangle32", ("K", "gamma", "b4"), {}, _quadrangle32, _quadrangle32_critical,
           doc="Y -> 0 -> X+2Y -> X+b4 Y -> Y, scaled; gamma defaults to the trace-zero value"),
    Family("chain41", ("q", "r", "K"), {}, _chain41,
           lambda: {"q": 0.25, "r": 1.875, "K": 4 / 3},
           doc="0 -> -qY -> X+Y/2 -> (1/2+r)Y; K defaults to the trace-zero value"),
    Family("chain42", ("p", "q"), {}, _chain42, doc="reversible chain"),
    Family("three51", ("a", "b", "d", "K"), {}, _three51,
           lambda: {"a": 1.01282, "d": 3.28862},
           doc="b defaults to the L1 = 0 value and K to the trace-zero value"),
    Family("three52", ("p", "q", "c1", "c2", "c3", "d1", "d2", "d3", "K", "lam"), {}, _three52,
           doc="sources (0,0), (p,q), (q,p)"),
    Family("three53", ("c1", "c2", "c3", "d1", "d2", "d3", "K", "lam"), {}, _three53,
           doc="sources (1,0), (0,-1/2), (0,-2)"),
    Family("zigzag", ("kappa",), {}, _zigzag, lambda: {"kappa": 1.8},
           doc="3Y <-> X+2Y <-> Y -> X with rates 1, 2, 1, 1, kappa"),
)}


def get_family(name: str) -> Family:
    try:
        return FAMILIES[name]
    except KeyError:
        raise FamilyError(f"unknown family {name!r}; choose from {', '.join(FAMILIES)}") from None


def family_instance(name: str, **params) -> FamilyInstance:
    return get_family(name).instance(**params)
