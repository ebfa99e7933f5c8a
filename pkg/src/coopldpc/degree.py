"""Degree-distribution polynomials and the quantities derived from them.

A :class:`DegreePoly` maps a node degree ``i`` to a fraction.  For an
edge-perspective distribution ``lambda(x) = sum_i lambda_i x^(i-1)`` the key
is the degree ``i`` (not the exponent).  The same container holds
node-perspective distributions and the "tilde" distributions obtained by
isolating one edge per node.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "DegreePoly",
    "EdgeFractions",
    "Ensemble",
    "node_perspective",
    "isolate_root_edge",
    "starred",
    "node_star",
    "star_node",
    "design_rate",
    "edge_fractions",
    "PRESETS",
    "get_preset",
]

SUM_TOL = 1e-12
# published coefficient tables are often rounded to ~5 digits
RENORMALIZE_TOL = 1e-3


class DegreePoly:
    """Sparse polynomial over node degrees.

    Parameters
    ----------
    coeffs : mapping of int -> real
        Degree ``i`` to fraction.  ``Fraction`` values are kept exact.
    min_degree : int
        Smallest admissible degree (2 for edge-perspective inputs, 1 after
        the tilde transform).
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Mapping[int, Real], min_degree: int = 1):
        items = {}
        for deg, c in coeffs.items():
            deg = int(deg)
            if deg < min_degree:
                raise ValueError(f"degree {deg} below minimum {min_degree}")
            if c < 0 or c > 1 + SUM_TOL:
                raise ValueError(f"coefficient {c} of degree {deg} outside [0, 1]")
            if c != 0:
                items[deg] = items.get(deg, 0) + c
        if not items:
            raise ValueError("empty degree distribution")
        total = sum(items.values())
        err = abs(float(total) - 1.0)
        if err > SUM_TOL:
            if err > RENORMALIZE_TOL:
                raise ValueError(f"coefficients sum to {float(total)!r}, not 1")
            warnings.warn(
                f"degree distribution sums to {float(total):.8f}; renormalizing",
                stacklevel=2,
            )
            items = {d: c / total for d, c in items.items()}
        self._coeffs = dict(sorted(items.items()))

    @classmethod
    def regular(cls, degree: int) -> "DegreePoly":
        return cls({degree: Fraction(1)})

    @classmethod
    def from_text(cls, text: str, min_degree: int = 1) -> "DegreePoly":
        """Parse lines of ``degree coefficient``; ``#`` starts a comment."""
        coeffs: dict[int, Real] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'degree coefficient', got {line!r}")
            deg = int(parts[0])
            coeffs[deg] = coeffs.get(deg, 0) + _parse_number(parts[1])
        return cls(coeffs, min_degree=min_degree)

    def to_text(self) -> str:
        return "".join(f"{d} {c}\n" for d, c in self._coeffs.items())

    # mapping-like access
    def items(self):
        return self._coeffs.items()

    def degrees(self) -> np.ndarray:
        return np.fromiter(self._coeffs, dtype=np.int64)

    def weights(self) -> np.ndarray:
        return np.array([float(c) for c in self._coeffs.values()])

    def __getitem__(self, degree: int):
        return self._coeffs.get(degree, 0)

    def __iter__(self):
        return iter(self._coeffs)

    def __len__(self):
        return len(self._coeffs)

    @property
    def max_degree(self) -> int:
        return max(self._coeffs)

    @property
    def min_degree(self) -> int:
        return min(self._coeffs)

    def inverse_mean(self) -> float:
        """``sum_i p_i / i``; for an edge distribution this is nodes per edge."""
        return float(sum(Fraction(c) / d if isinstance(c, Fraction) else c / d
                         for d, c in self._coeffs.items()))

    def mean(self) -> float:
        return float(sum(c * d for d, c in self._coeffs.items()))

    def is_regular(self) -> bool:
        return len(self._coeffs) == 1

    def __call__(self, x):
        """Evaluate ``sum_i p_i x^(i-1)``."""
        return sum(float(c) * np.asarray(x, dtype=float) ** (d - 1) for d, c in self._coeffs.items())

    def __eq__(self, other):
        if not isinstance(other, DegreePoly):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash(tuple((d, float(c)) for d, c in self._coeffs.items()))

    def allclose(self, other: "DegreePoly", atol: float = 1e-12) -> bool:
        degs = set(self._coeffs) | set(other._coeffs)
        return all(abs(float(self[d]) - float(other[d])) <= atol for d in degs)

    def __repr__(self):
        terms = " + ".join(f"{float(c):.6g}x^{d - 1}" for d, c in self._coeffs.items())
        return f"DegreePoly({terms})"


def _parse_number(token: str) -> Real:
    if "/" in token or token.strip().isdigit():
        return Fraction(token)
    value = float(token)
    if not math.isfinite(value):
        raise ValueError(f"non-finite coefficient {token!r}")
    return value


def _normalized(weights: Mapping[int, Real], min_degree: int) -> DegreePoly:
    total = sum(weights.values())
    return DegreePoly({d: w / total for d, w in weights.items()}, min_degree=min_degree)


def _exact(c):
    return c if isinstance(c, Fraction) else float(c)


def node_perspective(p: DegreePoly) -> DegreePoly:
    """Fraction of nodes of each degree: ``(p_i / i) / sum_j (p_j / j)``."""
    return _normalized({d: _exact(c) / d for d, c in p.items()}, min_degree=1)


def isolate_root_edge(p: DegreePoly) -> DegreePoly:
    """Distribution left after removing one edge from every node.

    Degree ``i`` maps to ``i - 1`` with weight proportional to
    ``p_i (i - 1) / i``.  Degree-1 nodes vanish entirely.
    """
    weights = {d - 1: _exact(c) * (d - 1) / d for d, c in p.items() if d >= 2}
    if not weights or sum(weights.values()) == 0:
        raise ValueError("isolating a root edge needs mass on degrees >= 2")
    return _normalized(weights, min_degree=1)


def starred(p: DegreePoly) -> DegreePoly:
    """Degree shift by one: ``p*(x) = x p(x)``, i.e. the node's own edge is kept."""
    return DegreePoly({d + 1: c for d, c in p.items()}, min_degree=1)


def node_star(p: DegreePoly) -> DegreePoly:
    """Node perspective first, then the star shift (composition used by DE)."""
    return starred(node_perspective(p))


def star_node(p: DegreePoly) -> DegreePoly:
    """Star shift first, then node perspective (the other composition)."""
    return node_perspective(starred(p))


def design_rate(lam: DegreePoly, rho: DegreePoly) -> float:
    """``1 - (sum rho_i/i) / (sum lambda_i/i)``."""
    rate = 1.0 - rho.inverse_mean() / lam.inverse_mean()
    if not 0.0 < rate < 1.0:
        raise ValueError(f"design rate {rate!r} outside (0, 1)")
    return rate


@dataclass(frozen=True)
class EdgeFractions:
    """Mixture weights of the messages entering check classes ``4c`` and ``1c``.

    ``f_1i4c``/``f_1p4c`` split the random (non-root) edges of a ``4c`` check
    between bits ``1i`` and ``1p``; ``f_1i1c``/``f_1p1c``/``f_p1c`` split the
    edges of a ``1c`` check between ``1i``, ``1p`` and ``p1'``.  The 2-side
    values are equal by symmetry.
    """

    f_1i4c: float
    f_1p4c: float
    f_1i1c: float
    f_1p1c: float
    f_p1c: float

    @property
    def f_2i3c(self) -> float:
        return self.f_1i4c

    @property
    def f_2p3c(self) -> float:
        return self.f_1p4c

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.f_1p4c, self.f_1i4c, self.f_1i1c, self.f_1p1c, self.f_p1c)


def edge_fractions(lam1: DegreePoly, rho1: DegreePoly, lam2: DegreePoly, rho2: DegreePoly) -> EdgeFractions:
    # Root part: T_1p ~ 1/sum(lambda2_i/i), T_1i ~ 1/sum(lambda2~_i/i).  Normalizing
    # by their sum (rather than by T from rho2~) keeps the partition exact
    # when the root design rate is only approximately 1/2.
    t_1p = 1.0 / lam2.inverse_mean()
    t_1i = 1.0 / isolate_root_edge(lam2).inverse_mean()
    f_1p4c = t_1p / (t_1p + t_1i)
    f_1i4c = 1.0 - f_1p4c
    # Subcode: 1i, 1p and p1' share lambda1, so edge fractions equal the
    # node fractions R1/2, R1/2, 1 - R1.
    r1 = design_rate(lam1, rho1)
    f_1i1c = f_1p1c = r1 / 2.0
    f_p1c = 1.0 - f_1i1c - f_1p1c
    return EdgeFractions(f_1i4c=f_1i4c, f_1p4c=f_1p4c, f_1i1c=f_1i1c, f_1p1c=f_1p1c, f_p1c=f_p1c)


@dataclass(frozen=True)
class Ensemble:
    """A ``(lambda1, rho1, lambda2, rho2)`` rate-compatible root-LDPC ensemble."""

    lam1: DegreePoly
    rho1: DegreePoly
    lam2: DegreePoly
    rho2: DegreePoly
    name: str = "custom"

    @property
    def subcode_rate(self) -> float:
        return design_rate(self.lam1, self.rho1)

    @property
    def root_rate(self) -> float:
        return design_rate(self.lam2, self.rho2)

    def nominal_subcode_rate(self, max_denominator: int = 100) -> Fraction:
        """Subcode rate snapped to a small-denominator fraction."""
        return Fraction(self.subcode_rate).limit_denominator(max_denominator)

    @property
    def rate(self) -> float:
        return self.subcode_rate / 2.0

    def edge_fractions(self) -> EdgeFractions:
        return edge_fractions(self.lam1, self.rho1, self.lam2, self.rho2)

    def manifest(self) -> dict:
        return {
            "name": self.name,
            "lambda1": _poly_dict(self.lam1),
            "rho1": _poly_dict(self.rho1),
            "lambda2": _poly_dict(self.lam2),
            "rho2": _poly_dict(self.rho2),
        }

    @classmethod
    def from_manifest(cls, data: Mapping) -> "Ensemble":
        def poly(key):
            return DegreePoly({int(d): _parse_number(str(c)) for d, c in data[key].items()}, min_degree=2)

        return cls(poly("lambda1"), poly("rho1"), poly("lambda2"), poly("rho2"), name=data.get("name", "custom"))

    @classmethod
    def from_text(cls, text: str, name: str = "custom") -> "Ensemble":
        """Parse an ensemble file with ``[lambda1]``, ``[rho1]``, ``[lambda2]``, ``[rho2]`` sections."""
        sections: dict[str, list[str]] = {}
        current = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                sections[current] = []
            elif current is None:
                raise ValueError(f"line {lineno}: entry outside of a [section]")
            else:
                sections[current].append(line)
        missing = {"lambda1", "rho1", "lambda2", "rho2"} - set(sections)
        if missing:
            raise ValueError(f"missing sections: {sorted(missing)}")
        polys = {k: DegreePoly.from_text("\n".join(v), min_degree=2) for k, v in sections.items()}
        return cls(polys["lambda1"], polys["rho1"], polys["lambda2"], polys["rho2"], name=name)


def _poly_dict(p: DegreePoly) -> dict[str, str]:
    return {str(d): str(c) for d, c in p.items()}


def _from_exponents(terms: Iterable[tuple[int, float]]) -> DegreePoly:
    # printed as sum_i c x^(i-1); keys here are exponents
    return DegreePoly({e + 1: c for e, c in terms}, min_degree=2)


def _build_presets() -> dict[str, Ensemble]:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scenario1 = Ensemble(
            lam1=_from_exponents([(1, 0.1989), (2, 0.2305), (5, 0.0068), (6, 0.2774),
                                  (19, 0.14267), (20, 0.1335), (21, 0.0102)]),
            rho1=_from_exponents([(12, 1.0)]),
            lam2=_from_exponents([(1, 0.22767), (2, 0.20333), (5, 0.2145), (6, 0.011048), (19, 0.34346)]),
            rho2=_from_exponents([(7, 0.5), (8, 0.5)]),
            name="scenario1",
        )
        scenario2 = Ensemble(
            lam1=_from_exponents([(1, 0.1581), (2, 0.2648), (5, 0.1116), (6, 0.1354), (14, 0.3301)]),
            rho1=_from_exponents([(43, 1.0)]),
            lam2=_from_exponents([(1, 0.234413), (2, 0.21392), (5, 0.123711), (6, 0.125548), (19, 0.30241)]),
            rho2=_from_exponents([(7, 0.71875), (8, 0.28125)]),
            name="scenario2",
        )
    regular = Ensemble(
        lam1=DegreePoly.regular(3), rho1=DegreePoly.regular(9),
        lam2=DegreePoly.regular(3), rho2=DegreePoly.regular(6),
        name="regular3936",
    )
    return {"scenario1": scenario1, "scenario2": scenario2, "regular3936": regular}


PRESETS = _build_presets()


def get_preset(name: str) -> Ensemble:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
