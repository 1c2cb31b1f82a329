"""Planar reaction networks with mass-action kinetics.

Complex coordinates are stored as :class:`fractions.Fraction` so that
deduplication, span checks and exponent arithmetic are exact.  Rate
constants and field coefficients are plain floats.
"""
from __future__ import annotations

import math
import numbers
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import networkx as nx

Number = int | float | str | Fraction


class NetworkError(ValueError):
    """Raised for malformed or degenerate networks."""


class NetworkParseError(NetworkError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def as_fraction(value: Number) -> Fraction:
    """Exact rational from int, Fraction, ``"n/d"``/decimal strings or floats.

    Floats are converted through their shortest repr so that ``0.3`` becomes
    ``3/10`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not coordinates")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        if not math.isfinite(value):
            raise NetworkError(f"non-finite coordinate {value!r}")
        return Fraction(repr(value))
    return Fraction(str(value).strip())


@dataclass(frozen=True, order=True)
class Complex:
    a: Fraction
    b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))

    def __sub__(self, other: "Complex") -> tuple[Fraction, Fraction]:
        return (self.a - other.a, self.b - other.b)

    def shifted(self, alpha: Number, beta: Number) -> "Complex":
        return Complex(self.a + as_fraction(alpha), self.b + as_fraction(beta))

    def __str__(self) -> str:
        return f"({self.a}, {self.b})"


@dataclass(frozen=True)
class Reaction:
    source: Complex
    target: Complex
    kappa: float

    def __post_init__(self):
        if self.source == self.target:
            raise NetworkError(f"self-loop reaction at {self.source}")
        kappa = float(self.kappa)
        if not (kappa > 0 and math.isfinite(kappa)):
            raise NetworkError(f"rate constant must be positive, got {self.kappa!r}")
        object.__setattr__(self, "kappa", kappa)

    @property
    def vector(self) -> tuple[Fraction, Fraction]:
        return self.target - self.source


def _spans_plane(vectors: Iterable[tuple[Fraction, Fraction]]) -> bool:
    vectors = list(vectors)
    for i, (c1, d1) in enumerate(vectors):
        for c2, d2 in vectors[i + 1:]:
            if c1 * d2 - c2 * d1 != 0:
                return True
    return False


@dataclass(frozen=True)
class ReactionNetwork:
    """Directed graph on complexes with a positive rate constant per edge.

    ``complexes`` keeps first-appearance order of the reaction endpoints.
    """

    reactions: tuple[Reaction, ...]
    complexes: tuple[Complex, ...] = field(default=())

    def __post_init__(self):
        reactions = tuple(self.reactions)
        if not reactions:
            raise NetworkError("network has no reactions")
        seen: dict[Complex, None] = dict.fromkeys(self.complexes)
        for r in reactions:
            seen.setdefault(r.source)
            seen.setdefault(r.target)
        object.__setattr__(self, "reactions", reactions)
        object.__setattr__(self, "complexes", tuple(seen))
        if len(self.complexes) < 2:
            raise NetworkError("network needs at least two complexes")
        if not _spans_plane(r.vector for r in reactions):
            raise NetworkError("reaction vectors do not span the plane")

    @classmethod
    def from_edges(cls, edges: Sequence[tuple[Sequence[Number], Sequence[Number], float]]):
        """Build from ``((a, b), (a', b'), kappa)`` triples."""
        return cls(tuple(Reaction(Complex(*s), Complex(*t), k) for s, t, k in edges))

    @property
    def kappas(self) -> tuple[float, ...]:
        return tuple(r.kappa for r in self.reactions)

    def with_kappas(self, kappas: Sequence[float]) -> "ReactionNetwork":
        """Replace rate constants positionally; extra reactions keep their own."""
        if len(kappas) > len(self.reactions):
            raise NetworkError(
                f"{len(kappas)} rate constants given for {len(self.reactions)} reactions")
        new = [Reaction(r.source, r.target, k) for r, k in zip(self.reactions, kappas)]
        new.extend(self.reactions[len(kappas):])
        return ReactionNetwork(tuple(new))

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.complexes)
        g.add_edges_from((r.source, r.target) for r in self.reactions)
        return g

    def __len__(self) -> int:
        return len(self.reactions)


# --------------------------------------------------------------------------
# parsing

_NUM = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(?:/\d+)?"
_LINE = re.compile(
    rf"^\s*({_NUM})\s+({_NUM})\s*->\s*({_NUM})\s+({_NUM})\s*@\s*(\S+)\s*$")


def _parse_number(token: str) -> Fraction:
    if "/" in token:
        num, den = token.split("/", 1)
        den_f = Fraction(den)
        if den_f == 0:
            raise ValueError("zero denominator")
        return Fraction(num) / den_f
    return Fraction(token)


def parse_network(text: str) -> ReactionNetwork:
    """Parse ``<a> <b> -> <a'> <b'> @ <kappa>`` lines into a network.

    ``#`` starts a comment, blank lines are ignored.  Numbers may be
    integers, decimals or ``n/d`` rationals.
    """
    reactions = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if m is None:
            raise NetworkParseError(f"cannot parse reaction {raw.strip()!r}", lineno)
        try:
            a, b, a2, b2 = (_parse_number(t) for t in m.groups()[:4])
            kappa = float(_parse_number(m.group(5)))
        except (ValueError, ZeroDivisionError) as exc:
            raise NetworkParseError(f"bad number ({exc})", lineno) from None
        if not kappa > 0:
            raise NetworkParseError(f"rate constant must be positive, got {m.group(5)}", lineno)
        try:
            reactions.append(Reaction(Complex(a, b), Complex(a2, b2), kappa))
        except NetworkError as exc:
            raise NetworkParseError(str(exc), lineno) from None
    if not reactions:
        raise NetworkParseError("no reactions found")
    try:
        return ReactionNetwork(tuple(reactions))
    except NetworkError as exc:
        raise NetworkParseError(str(exc)) from None


def format_network(net: ReactionNetwork) -> str:
    lines = [f"{r.source.a} {r.source.b} -> {r.target.a} {r.target.b} @ {r.kappa!r}"
             for r in net.reactions]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# structure

def linkage_classes(net: ReactionNetwork) -> list[set[Complex]]:
    return [set(c) for c in nx.weakly_connected_components(net.graph())]


def deficiency(net: ReactionNetwork) -> int:
    """``m - l - 2`` with ``l`` the number of linkage classes."""
    return len(net.complexes) - len(linkage_classes(net)) - 2


@dataclass(frozen=True)
class ReversibilityClass:
    weakly_reversible: bool
    linkage_classes: int
    terminal_classes: int


def reversibility_class(net: ReactionNetwork) -> ReversibilityClass:
    g = net.graph()
    cond = nx.condensation(g)
    # every edge on a directed cycle <=> both endpoints in one strong component
    member = cond.graph["mapping"]
    wr = all(member[r.source] == member[r.target] for r in net.reactions)
    t = sum(1 for n in cond.nodes if cond.out_degree(n) == 0)
    ell = nx.number_weakly_connected_components(g)
    return ReversibilityClass(wr, ell, t)


def translate(net: ReactionNetwork, alpha: Number, beta: Number) -> ReactionNetwork:
    alpha, beta = as_fraction(alpha), as_fraction(beta)
    return ReactionNetwork(tuple(
        Reaction(r.source.shifted(alpha, beta), r.target.shifted(alpha, beta), r.kappa)
        for r in net.reactions))


# --------------------------------------------------------------------------
# vector fields

Term = tuple[float, Fraction, Fraction]


def _merge(terms: Iterable[Term]) -> tuple[Term, ...]:
    acc: dict[tuple[Fraction, Fraction], float] = {}
    for c, e, f in terms:
        key = (as_fraction(e), as_fraction(f))
        acc[key] = acc.get(key, 0.0) + float(c)
    return tuple((c, e, f) for (e, f), c in acc.items() if c != 0.0)


class VectorField:
    """``x' = sum c x^e y^f`` and likewise for ``y'``; exponents are rational."""

    __slots__ = ("x_terms", "y_terms", "_fx", "_fy")

    def __init__(self, x_terms: Iterable[Term], y_terms: Iterable[Term]):
        self.x_terms = _merge(x_terms)
        self.y_terms = _merge(y_terms)
        self._fx = tuple(_compile(t) for t in self.x_terms)
        self._fy = tuple(_compile(t) for t in self.y_terms)

    def __repr__(self):
        return f"VectorField({_fmt_terms(self.x_terms)} ; {_fmt_terms(self.y_terms)})"

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        return (_eval(self._fx, x, y), _eval(self._fy, x, y))

    def terms(self):
        return self.x_terms, self.y_terms

    def scaled(self, cx: float, cy: float) -> "VectorField":
        return VectorField([(cx * c, e, f) for c, e, f in self.x_terms],
                           [(cy * c, e, f) for c, e, f in self.y_terms])

    def times_monomial(self, alpha: Number, beta: Number) -> "VectorField":
        alpha, beta = as_fraction(alpha), as_fraction(beta)
        return VectorField([(c, e + alpha, f + beta) for c, e, f in self.x_terms],
                           [(c, e + alpha, f + beta) for c, e, f in self.y_terms])

    def term_scale(self, x: float, y: float) -> float:
        """Largest absolute term value at ``(x, y)``, used for relative residuals."""
        vals = [abs(c * x ** e * y ** f) for c, e, f in self._fx + self._fy]
        return max(vals, default=0.0)

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return (sorted(self.x_terms, key=_key) == sorted(other.x_terms, key=_key)
                and sorted(self.y_terms, key=_key) == sorted(other.y_terms, key=_key))

    __hash__ = None


def _key(t):
    return (t[1], t[2])


def _fmt_terms(terms):
    return " + ".join(f"{c:g}*x^{e}*y^{f}" for c, e, f in terms) or "0"


def _compile(term: Term):
    c, e, f = term
    e_ = int(e) if e.denominator == 1 else float(e)
    f_ = int(f) if f.denominator == 1 else float(f)
    return (c, e_, f_)


def _eval(compiled, x, y):
    s = 0.0
    for c, e, f in compiled:
        s += c * x ** e * y ** f
    return s


def vector_field(net: ReactionNetwork) -> VectorField:
    """Mass-action field: each reaction contributes its reaction vector times
    ``kappa * x^a * y^b`` of the source complex."""
    xs, ys = [], []
    for r in net.reactions:
        da, db = r.vector
        src = r.source
        if da:
            xs.append((float(da) * r.kappa, src.a, src.b))
        if db:
            ys.append((float(db) * r.kappa, src.a, src.b))
    return VectorField(xs, ys)


def evaluate(vf: VectorField, x: float, y: float) -> tuple[float, float]:
    if not (x > 0 and y > 0):
        raise ValueError(f"field is defined on the open positive quadrant, got ({x}, {y})")
    return vf(x, y)
