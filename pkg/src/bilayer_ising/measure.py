"""Exact finite-volume measures built from a translation-invariant boundary law.

All probability tables are assembled in log space and normalized by
``logsumexp``; solutions can span several orders of magnitude and theta may
be far from 1, so linear-space products overflow quickly.

The boundary field sits on the outer generation W_n.  For the volume n = 0
the root itself is the outer generation and its field carries the exponent
root_degree / k: the consistency equation at the root is a product over its
root_degree successors while the recursion fixed point balances k-fold
products, so the root's own law is the fixed-point law raised to
root_degree / k.  With a "reduced" root (degree k) the exponent is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .model import BilayerConfig, DerivedParams, STATES
from .solver import FixedPoint3
from .tree import TreeShape, ball, edges, generation, Vertex

CAPACITY_LIMIT = 2**24  # max number of joint (s, sigma) states enumerated

STATE_INDEX = {state: i for i, state in enumerate(STATES)}


class CapacityError(ValueError):
    """Requested exact enumeration exceeds the desk-scale guard."""


@dataclass(frozen=True)
class BoundaryLaw:
    """Translation-invariant boundary law z(hidden, observed), z(-1,-1) = 1."""

    z: Dict[Tuple[int, int], float]

    def __post_init__(self):
        for state in STATES:
            if not self.z.get(state, 0.0) > 0:
                raise ValueError("boundary law entries must be positive")
        if not math.isclose(self.z[(-1, -1)], 1.0, rel_tol=1e-12):
            raise ValueError("boundary law must be gauged to z(-1,-1) = 1")

    @property
    def h(self) -> Dict[Tuple[int, int], float]:
        """Boundary fields h = log z."""
        return {state: math.log(val) for state, val in self.z.items()}

    @classmethod
    def from_fixed_point(cls, point: FixedPoint3, derived: DerivedParams) -> "BoundaryLaw":
        return cls(
            z={
                (-1, -1): 1.0,
                (-1, 1): point.u / derived.a,
                (1, -1): point.v / derived.b,
                (1, 1): point.w / derived.c,
            }
        )

    def fixed_point_values(self, derived: DerivedParams) -> Tuple[float, float, float]:
        """Round-trip back to the (u, v, w) coordinates."""
        return (
            derived.a * self.z[(-1, 1)],
            derived.b * self.z[(1, -1)],
            derived.c * self.z[(1, 1)],
        )


@dataclass(frozen=True)
class VertexWeight:
    """Combined vertex weight W(hidden, observed) = E(observed|hidden) * z."""

    W: Dict[Tuple[int, int], float]

    @classmethod
    def from_law(cls, law: BoundaryLaw, derived: DerivedParams) -> "VertexWeight":
        return cls(
            W={
                (eps, delta): derived.emission_weight(eps, delta) * law.z[(eps, delta)]
                for eps, delta in STATES
            }
        )

    @classmethod
    def from_point(cls, point: FixedPoint3) -> "VertexWeight":
        return cls(W={(-1, -1): 1.0, (-1, 1): point.u, (1, -1): point.v, (1, 1): point.w})

    @classmethod
    def uniform(cls) -> "VertexWeight":
        return cls(W={state: 1.0 for state in STATES})


def _spin_bits(nv: int) -> np.ndarray:
    """(2^nv, nv) array: bit b of row index i as a spin, set bit -> +1."""
    idx = np.arange(2**nv, dtype=np.int64)
    return ((idx[:, None] >> np.arange(nv)) & 1).astype(np.int8) * 2 - 1


def _pauli_decompose(m: Dict[Tuple[int, int], float]) -> Tuple[float, float, float, float]:
    """Write m(eps, delta) = alpha + be*eps + ga*delta + lam*eps*delta."""
    mm, mp, pm, pp = m[(-1, -1)], m[(-1, 1)], m[(1, -1)], m[(1, 1)]
    alpha = 0.25 * (mm + mp + pm + pp)
    be = 0.25 * (-mm - mp + pm + pp)
    ga = 0.25 * (-mm + mp - pm + pp)
    lam = 0.25 * (mm - mp - pm + pp)
    return alpha, be, ga, lam


def boundary_exponent(shape: TreeShape) -> float:
    """Field exponent for the outer generation (root correction at n = 0)."""
    if shape.depth == 0:
        return shape.root_degree / shape.k
    return 1.0


@dataclass
class FiniteVolumeMeasure:
    """Exact normalized probability table over bilayer configurations on V_n."""

    shape: TreeShape
    vertices: Tuple[Vertex, ...]
    probs: np.ndarray  # (2^nv, 2^nv); axis 0 = hidden configs, axis 1 = observed
    log_norm: float

    def _index(self, spins: Dict[Vertex, int]) -> int:
        idx = 0
        for b, x in enumerate(self.vertices):
            if spins[x] == 1:
                idx |= 1 << b
        return idx

    def prob_of(self, cfg: BilayerConfig) -> float:
        return float(self.probs[self._index(cfg.s), self._index(cfg.sigma)])

    def vertex_marginal(self, x: Vertex) -> np.ndarray:
        """Marginal over the bilayer state of one vertex, in STATES order."""
        b = self.vertices.index(x)
        bits = _spin_bits(len(self.vertices))[:, b]
        out = np.empty(4)
        for (eps, delta), i in STATE_INDEX.items():
            rows = bits == eps
            cols = bits == delta
            out[i] = self.probs[np.ix_(rows, cols)].sum()
        return out

    def root_marginal(self) -> np.ndarray:
        return self.vertex_marginal(())

    def pair_marginal(self, x: Vertex, y: Vertex) -> np.ndarray:
        """Joint marginal over two vertices' bilayer states (4 x 4, STATES order)."""
        bx = self.vertices.index(x)
        by = self.vertices.index(y)
        bits = _spin_bits(len(self.vertices))
        out = np.empty((4, 4))
        for (ex, dx), i in STATE_INDEX.items():
            for (ey, dy), j in STATE_INDEX.items():
                rows = (bits[:, bx] == ex) & (bits[:, by] == ey)
                cols = (bits[:, bx] == dx) & (bits[:, by] == dy)
                out[i, j] = self.probs[np.ix_(rows, cols)].sum()
        return out


def finite_volume(
    shape: TreeShape, derived: DerivedParams, law: BoundaryLaw
) -> FiniteVolumeMeasure:
    """Exact joint measure on V_n by full enumeration (desk scale only)."""
    verts = ball(shape)
    nv = len(verts)
    if 4**nv > CAPACITY_LIMIT:
        raise CapacityError("4^%d states exceed the enumeration guard" % nv)
    index = {x: i for i, x in enumerate(verts)}
    bits = _spin_bits(nv).astype(np.float64)
    log_theta = math.log(derived.theta)

    edge_list = edges(shape)
    if edge_list:
        pidx = [index[x] for x, _ in edge_list]
        cidx = [index[y] for _, y in edge_list]
        edge_prod = (bits[:, pidx] * bits[:, cidx]).sum(axis=1)
    else:
        edge_prod = np.zeros(2**nv)

    logw = 0.5 * log_theta * (edge_prod[:, None] - edge_prod[None, :])

    # emission weights on every vertex
    log_e = {
        (eps, delta): math.log(derived.emission_weight(eps, delta))
        for eps, delta in STATES
    }
    alpha, be, ga, lam = _pauli_decompose(log_e)
    s_sum = bits.sum(axis=1)
    logw += nv * alpha + be * s_sum[:, None] + ga * s_sum[None, :]
    if lam != 0.0:
        logw += lam * (bits @ bits.T)

    # boundary fields on the outer generation
    outer = [index[x] for x in generation(shape, shape.depth)]
    expo = boundary_exponent(shape)
    log_z = {state: expo * math.log(val) for state, val in law.z.items()}
    alpha, be, ga, lam = _pauli_decompose(log_z)
    b_sum = bits[:, outer].sum(axis=1)
    logw += len(outer) * alpha + be * b_sum[:, None] + ga * b_sum[None, :]
    if lam != 0.0:
        logw += lam * (bits[:, outer] @ bits[:, outer].T)

    log_norm = float(logsumexp(logw))
    return FiniteVolumeMeasure(
        shape=shape,
        vertices=tuple(verts),
        probs=np.exp(logw - log_norm),
        log_norm=log_norm,
    )


def check_compatibility(
    shape: TreeShape, derived: DerivedParams, law: BoundaryLaw
) -> float:
    """Max defect of the marginalization identity sum_{W_n} mu_n = mu_{n-1}.

    Near zero (< 1e-10) exactly when the law is a fixed point of the
    recursion; this is the executable form of the compatibility criterion.
    """
    if shape.depth < 1:
        raise ValueError("compatibility needs depth >= 1")
    mu_n = finite_volume(shape, derived, law)
    prev_shape = TreeShape(shape.k, shape.depth - 1, shape.root_mode)
    mu_prev = finite_volume(prev_shape, derived, law)
    n_low = len(mu_prev.vertices)
    n_high = len(mu_n.vertices) - n_low
    folded = (
        mu_n.probs.reshape(2**n_high, 2**n_low, 2**n_high, 2**n_low)
        .sum(axis=(0, 2))
    )
    return float(np.max(np.abs(folded - mu_prev.probs)))


def edge_conditional(
    sigma_edge: Tuple[int, int], derived: DerivedParams, weights: VertexWeight
) -> Dict[Tuple[int, int], float]:
    """Posterior of the two hidden spins on an edge given the observed pair.

    P(s_x, s_y | sigma_x, sigma_y) is proportional to
    theta^{(1 + s_x s_y)/2} * W(s_x, sigma_x) * W(s_y, sigma_y); both edge
    endpoints carry the boundary weight.
    """
    sx_obs, sy_obs = sigma_edge
    table = {}
    for sx in (1, -1):
        for sy in (1, -1):
            table[(sx, sy)] = (
                derived.theta ** ((1 + sx * sy) / 2)
                * weights.W[(sx, sx_obs)]
                * weights.W[(sy, sy_obs)]
            )
    norm = sum(table.values())
    return {key: val / norm for key, val in table.items()}


def _mu_branch(theta: float, v: float) -> float:
    return theta * v * v / (theta * v * v + 2.0 * v + theta)


def curve_data(
    theta_grid: Sequence[float],
    k: int,
    a: Optional[float] = None,
    family: str = "fig1",
) -> List[dict]:
    """Edge-conditional curves over a theta grid.

    family "fig1" (a = b = c = 1): columns mu0, mu1, mu2 — the probability of
    an aligned (+1, +1) hidden pair under the symmetric law and the two
    nontrivial I1 laws; the latter exist only above the bifurcation point and
    are emitted as None below it.

    family "fig2" (k = 1, a = b, c = 1): the (+1, +1) hidden-pair conditional
    under the unique law, given observed pairs (+1, +1) and (-1, +1).
    """
    from .solver import (
        ScalarEqParams,
        closed_form_k2,
        solve_k1_symmetric,
        solve_scalar,
    )

    rows = []
    if family == "fig1":
        gamma_c = (k + 1) / (k - 1) if k >= 2 else math.inf
        for theta in theta_grid:
            row = {"theta": theta, "mu0": theta / (2.0 * (1.0 + theta))}
            v_pair = None
            if k == 2 and theta >= 3.0:
                v_pair = closed_form_k2(theta)
            elif k >= 3 and theta >= gamma_c:
                roots = solve_scalar(ScalarEqParams(k=k, gamma=theta))
                v_pair = (roots[0], roots[-1]) if len(roots) == 3 else (1.0, 1.0)
            if v_pair is None:
                row["mu1"] = None
                row["mu2"] = None
            else:
                row["mu1"] = _mu_branch(theta, v_pair[0])
                row["mu2"] = _mu_branch(theta, v_pair[1])
            rows.append(row)
    elif family == "fig2":
        if k != 1:
            raise ValueError("the fig2 family is defined for k = 1")
        if a is None:
            raise ValueError("the fig2 family needs the emission ratio a")
        for theta in theta_grid:
            point = solve_k1_symmetric(theta, a)
            derived = DerivedParams(k=1, theta=theta, a=a, b=a, c=1.0)
            weights = VertexWeight.from_point(point)
            rows.append(
                {
                    "theta": theta,
                    "mu_star_pp_pp": edge_conditional((1, 1), derived, weights)[(1, 1)],
                    "mu_star_pp_mp": edge_conditional((-1, 1), derived, weights)[(1, 1)],
                }
            )
    else:
        raise ValueError("unknown curve family %r" % family)
    return rows


def k1_conditional_variants(theta: float, a: float) -> dict:
    """Two closed-form candidates for the k=1 symmetric edge conditionals.

    The "derived" entries follow the edge-conditional convention used
    throughout this package; the "variant" entries are an alternate closed
    form for the same quantities that does not agree with it.  Both are
    reported so the discrepancy is visible in the verify report.
    """
    from .solver import solve_k1_symmetric

    point = solve_k1_symmetric(theta, a)
    u = point.u
    derived = DerivedParams(k=1, theta=theta, a=a, b=a, c=1.0)
    weights = VertexWeight.from_point(point)
    cond_pp = edge_conditional((1, 1), derived, weights)
    cond_mp = edge_conditional((-1, 1), derived, weights)
    norm_pp = 2.0 * theta + u + u * u
    norm_mp = theta + (1.0 + theta) * u + u * u
    return {
        "derived": {
            "pp_given_pp": cond_pp[(1, 1)],
            "mp_given_pp": cond_pp[(-1, 1)],
            "pm_given_pp": cond_pp[(1, -1)],
            "mm_given_pp": cond_pp[(-1, -1)],
            "pp_given_mp": cond_mp[(1, 1)],
            "mp_given_mp": cond_mp[(-1, 1)],
            "pm_given_mp": cond_mp[(1, -1)],
            "mm_given_mp": cond_mp[(-1, -1)],
        },
        "variant": {
            "pp_given_pp": theta / norm_pp,
            "mp_given_pp": u / norm_pp,
            "pm_given_pp": theta / norm_pp,
            "mm_given_pp": u * u / norm_pp,
            "pp_given_mp": u / norm_mp,
            "mp_given_mp": theta / norm_mp,
            "pm_given_mp": u * u / norm_mp,
            "mm_given_mp": theta * u / norm_mp,
        },
    }


@dataclass(frozen=True)
class BilayerKernel:
    """Row-stochastic parent-to-child kernel over bilayer states, plus root law."""

    K: np.ndarray  # (4, 4) in STATES order
    pi0: np.ndarray  # (4,) root law in STATES order

    def __post_init__(self):
        if not np.allclose(self.K.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("kernel rows must sum to 1")
        if not math.isclose(float(self.pi0.sum()), 1.0, abs_tol=1e-12):
            raise ValueError("root law must sum to 1")


def markov_kernel(
    derived: DerivedParams, law: BoundaryLaw, root_mode: str = "full"
) -> BilayerKernel:
    """Transition kernel of the tree-indexed Markov chain for a fixed-point law.

    K((eps, delta) -> (j, u)) is proportional to
    theta^{(eps*j - delta*u)/2} * E(u|j) * z(j, u); the root law pi0 is the
    exact root marginal of the finite-volume measure at depth 1.
    """
    weights = VertexWeight.from_law(law, derived)
    K = np.empty((4, 4))
    for (eps, delta), i in STATE_INDEX.items():
        for (j, u), jdx in STATE_INDEX.items():
            K[i, jdx] = derived.theta ** ((eps * j - delta * u) / 2.0) * weights.W[(j, u)]
    K /= K.sum(axis=1, keepdims=True)
    shape = TreeShape(derived.k, 1, root_mode)
    pi0 = finite_volume(shape, derived, law).root_marginal()
    return BilayerKernel(K=K, pi0=pi0)


def closed_form_root_law(derived: DerivedParams, law: BoundaryLaw, root_mode: str = "full") -> np.ndarray:
    """Closed-form candidate for the root law, pi(e,d) ~ E(d|e) * z(e,d)^(deg/k).

    Kept as a cross-check against the enumerated root marginal.
    """
    shape = TreeShape(derived.k, 0, root_mode)
    expo = boundary_exponent(shape)
    out = np.array(
        [
            derived.emission_weight(eps, delta) * law.z[(eps, delta)] ** expo
            for eps, delta in STATES
        ]
    )
    return out / out.sum()


def sample_many(
    kernel: BilayerKernel, shape: TreeShape, n_samples: int, seed: int
) -> Tuple[Tuple[Vertex, ...], np.ndarray, np.ndarray]:
    """Draw forward samples of the tree-indexed chain; deterministic in seed.

    Returns (vertices, s, sigma) with spin arrays of shape (n_samples, nv).
    """
    rng = np.random.default_rng(seed)
    verts = tuple(ball(shape))
    index = {x: i for i, x in enumerate(verts)}
    codes = np.empty((n_samples, len(verts)), dtype=np.int8)

    pi_cum = np.cumsum(kernel.pi0)
    codes[:, 0] = np.searchsorted(pi_cum, rng.random(n_samples), side="right")
    k_cum = np.cumsum(kernel.K, axis=1)
    for x, y in edges(shape):
        draws = rng.random(n_samples)
        parent_codes = codes[:, index[x]]
        codes[:, index[y]] = (draws[:, None] > k_cum[parent_codes]).sum(axis=1)

    eps = (codes >> 1).astype(np.int8) * 2 - 1
    delta = (codes & 1).astype(np.int8) * 2 - 1
    return verts, eps, delta


def sample(kernel: BilayerKernel, shape: TreeShape, seed: int) -> BilayerConfig:
    """Draw one bilayer configuration on the ball; deterministic in seed."""
    verts, eps, delta = sample_many(kernel, shape, 1, seed)
    return BilayerConfig(
        s={x: int(eps[0, i]) for i, x in enumerate(verts)},
        sigma={x: int(delta[0, i]) for i, x in enumerate(verts)},
    )
