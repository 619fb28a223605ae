"""Model parameters, derived transfer constants, bilayer configurations.

The physical inputs are (k, J, beta) plus a table of emission log-weights
p(observed | hidden).  Everything downstream only sees the derived constants
theta = exp(2*J*beta) and the exponentiated emission differences (a, b, c),
so parameters may also be supplied directly as (k, theta, a, b, c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

from .tree import TreeShape, edges, iter_vertices, Vertex

SPINS = (-1, 1)

# (hidden, observed) spin pairs in canonical order
STATES: Tuple[Tuple[int, int], ...] = ((-1, -1), (-1, 1), (1, -1), (1, 1))


def _check_emission(emission: Mapping[Tuple[int, int], float]) -> Dict[Tuple[int, int], float]:
    table = {}
    for key in STATES:
        if key not in emission:
            raise ValueError("emission table missing entry for %r" % (key,))
        val = float(emission[key])
        if not math.isfinite(val):
            raise ValueError("emission entry %r is not finite" % (key,))
        table[key] = val
    return table


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs: coupling J, inverse temperature beta, emission log-weights.

    ``emission`` maps (hidden spin, observed spin) to the log-weight
    p(observed | hidden).  Entries are raw log-weights; they need not be
    normalized log-probabilities, since only exponentiated differences
    enter the recursion.
    """

    k: int
    J: float
    beta: float
    emission: Mapping[Tuple[int, int], float]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError("beta must be positive and finite")
        if not math.isfinite(self.J):
            raise ValueError("J must be finite")
        object.__setattr__(self, "emission", _check_emission(self.emission))


@dataclass(frozen=True)
class DerivedParams:
    """Transfer constants: theta and the emission weight ratios (a, b, c)."""

    k: int
    theta: float
    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        for name in ("theta", "a", "b", "c"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError("%s must be positive and finite" % name)

    def emission_weight(self, hidden: int, observed: int) -> float:
        """Vertex emission weight E(observed | hidden), gauged so E(-1|-1)=1."""
        return {(-1, -1): 1.0, (-1, 1): self.a, (1, -1): self.b, (1, 1): self.c}[
            (hidden, observed)
        ]


def derive(params: ModelParams) -> DerivedParams:
    """Map physical parameters to the derived transfer constants."""
    beta = params.beta
    p = params.emission
    base = p[(-1, -1)]
    return DerivedParams(
        k=params.k,
        theta=math.exp(2.0 * params.J * beta),
        a=math.exp(beta * (p[(-1, 1)] - base)),
        b=math.exp(beta * (p[(1, -1)] - base)),
        c=math.exp(beta * (p[(1, 1)] - base)),
    )


@dataclass
class BilayerConfig:
    """Paired hidden (s) and observed (sigma) spin assignments on a ball."""

    s: Dict[Vertex, int] = field(default_factory=dict)
    sigma: Dict[Vertex, int] = field(default_factory=dict)

    def check_total(self, shape: TreeShape) -> None:
        for x in iter_vertices(shape):
            if x not in self.s or x not in self.sigma:
                raise ValueError("configuration not total: missing vertex %r" % (x,))
            if self.s[x] not in SPINS or self.sigma[x] not in SPINS:
                raise ValueError("non-spin value at vertex %r" % (x,))


def hamiltonian(cfg: BilayerConfig, shape: TreeShape, params: ModelParams) -> float:
    """Energy of a configuration pair on the ball V_n.

    H = -J * sum_edges (s(x)s(y) - sigma(x)sigma(y)) - sum_x p(sigma(x)|s(x)).
    """
    cfg.check_total(shape)
    pair = sum(
        cfg.s[x] * cfg.s[y] - cfg.sigma[x] * cfg.sigma[y] for x, y in edges(shape)
    )
    site = sum(params.emission[(cfg.s[x], cfg.sigma[x])] for x in iter_vertices(shape))
    return -params.J * pair - site


def energy_loss(cfg: BilayerConfig, shape: TreeShape) -> float:
    """Pairwise mismatch sum_edges (s(x)s(y) - sigma(x)sigma(y))."""
    cfg.check_total(shape)
    return float(
        sum(cfg.s[x] * cfg.s[y] - cfg.sigma[x] * cfg.sigma[y] for x, y in edges(shape))
    )


def flip_spins(cfg: BilayerConfig) -> BilayerConfig:
    """Global spin flip of both layers; edge terms are invariant under it."""
    return BilayerConfig(
        s={x: -v for x, v in cfg.s.items()},
        sigma={x: -v for x, v in cfg.sigma.items()},
    )


def parse_params(doc: Mapping) -> Tuple[ModelParams | None, DerivedParams]:
    """Parse a JSON-style parameter document.

    Exactly one of the key groups {k, J, beta, emission} (physical) or
    {k, theta, a, b, c} (derived) must be present.  The emission table is
    a nested mapping hidden-spin -> observed-spin -> log-weight with
    string spin keys ("-1", "1").
    """
    physical = all(key in doc for key in ("J", "beta", "emission"))
    direct = all(key in doc for key in ("theta", "a", "b", "c"))
    if physical == direct:
        raise ValueError(
            "exactly one of {k,J,beta,emission} or {k,theta,a,b,c} must be given"
        )
    if "k" not in doc:
        raise ValueError("parameter document must contain k")
    k = int(doc["k"])
    if direct:
        return None, DerivedParams(
            k=k,
            theta=float(doc["theta"]),
            a=float(doc["a"]),
            b=float(doc["b"]),
            c=float(doc["c"]),
        )
    emission = {}
    for hid, row in doc["emission"].items():
        for obs, val in row.items():
            emission[(int(hid), int(obs))] = float(val)
    params = ModelParams(k=k, J=float(doc["J"]), beta=float(doc["beta"]), emission=emission)
    return params, derive(params)
