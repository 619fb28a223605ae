"""Translation-invariant fixed points of the boundary-law recursion.

The unknown is a positive triple t = (u, v, w) and the recursion map is

    F_u(t) = a * ((theta + u + v + w/theta) / D)^k
    F_v(t) = b * ((1/theta + u + v + theta*w) / D)^k
    F_w(t) = c * ((1 + u/theta + theta*v + w) / D)^k

with D = 1 + theta*u + v/theta + w.  Fixed points correspond one-to-one to
translation-invariant splitting measures of the bilayer model.  When
a = b = c = 1 the sets I1 = {u=1, v=w}, I2 = {v=1, u=w}, I3 = {w=1, u=v}
are invariant under F and reduce the system to the scalar equation
x = ((1 + gamma*x)/(gamma + x))^k.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .model import DerivedParams

RESIDUAL_TOL = 1e-9
DEDUP_RTOL = 1e-6


@dataclass(frozen=True)
class FixedPoint3:
    u: float
    v: float
    w: float
    residual: float = math.nan

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.u, self.v, self.w)


@dataclass
class SolutionSet:
    points: List[FixedPoint3]
    labels: List[str]

    @property
    def count(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ScalarEqParams:
    k: int
    gamma: float

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class MultistartConfig:
    grid: Tuple[float, ...] = (1e-2, 1e-1, 1.0, 10.0, 1e2)
    max_iter: int = 200
    residual_tol: float = RESIDUAL_TOL
    dedup_rtol: float = DEDUP_RTOL


def _ratio_rows(derived: DerivedParams):
    th = derived.theta
    ith = 1.0 / th
    # numerator coefficients on (1, u, v, w) for the u, v, w rows, then the
    # shared denominator coefficients
    num = np.array(
        [
            [th, 1.0, 1.0, ith],
            [ith, 1.0, 1.0, th],
            [1.0, ith, th, 1.0],
        ]
    )
    den = np.array([1.0, th, ith, 1.0])
    scale = np.array([derived.a, derived.b, derived.c])
    return num, den, scale


def _apply_map(t: np.ndarray, derived: DerivedParams) -> np.ndarray:
    num, den, scale = _ratio_rows(derived)
    ext = np.concatenate(([1.0], t))
    return scale * (num @ ext / (den @ ext)) ** derived.k


def residual(t: Sequence[float], derived: DerivedParams) -> float:
    """Max absolute defect of the three fixed-point equations at t."""
    arr = np.asarray(t, dtype=float)
    return float(np.max(np.abs(_apply_map(arr, derived) - arr)))


def make_point(u: float, v: float, w: float, derived: DerivedParams) -> FixedPoint3:
    return FixedPoint3(u, v, w, residual((u, v, w), derived))


def apply_F(point: FixedPoint3, derived: DerivedParams) -> FixedPoint3:
    """One application of the recursion map to a positive triple."""
    if min(point.u, point.v, point.w) <= 0:
        raise ValueError("the recursion map is only defined on positive triples")
    out = _apply_map(np.array(point.as_tuple()), derived)
    return make_point(out[0], out[1], out[2], derived)


# ---------------------------------------------------------------------------
# scalar reduction on the invariant sets


def solve_scalar(p: ScalarEqParams) -> List[float]:
    """All positive solutions of x = ((1 + gamma*x)/(gamma + x))^k, sorted.

    Substituting t = x^(1/k) turns the equation into the polynomial
    t^(k+1) - gamma*t^k + gamma*t - 1 = 0, which factors as (t - 1)*q(t)
    with the palindromic q(t) = t^k + (1-gamma)*(t^(k-1) + ... + t) + 1.
    q has either no positive roots or a reciprocal pair (t*, 1/t*), and
    the pair exists exactly when q(1) = 2 + (1-gamma)*(k-1) < 0.
    """
    k, gamma = p.k, p.gamma
    if k == 1:
        return [1.0]
    q_at_1 = 2.0 + (1.0 - gamma) * (k - 1)
    if q_at_1 >= 0.0:
        return [1.0]
    coeffs = np.ones(k + 1)
    coeffs[1:k] = 1.0 - gamma
    qfun = lambda t: float(np.polyval(coeffs, t))
    # q(0) = 1 > 0 > q(1), and q(1 + gamma) > 0 by the Cauchy root bound
    t_lo = brentq(qfun, 1e-16, 1.0, xtol=1e-300, rtol=8.9e-16)
    t_hi = brentq(qfun, 1.0, 1.0 + gamma, xtol=1e-15, rtol=8.9e-16)
    return sorted([t_lo**k, 1.0, t_hi**k])


def scalar_t_polynomial(p: ScalarEqParams) -> np.ndarray:
    """Coefficients of t^(k+1) - gamma*t^k + gamma*t - 1 (highest degree first)."""
    coeffs = np.zeros(p.k + 2)
    coeffs[0] = 1.0
    coeffs[1] = -p.gamma
    coeffs[-2] = p.gamma
    coeffs[-1] = -1.0
    return coeffs


def closed_form_k2(theta: float) -> Tuple[float, float]:
    """The two nontrivial I1 roots for k = 2, defined for theta >= 3."""
    if theta < 3.0:
        raise ValueError("closed form requires theta >= 3")
    disc = (theta - 1.0) * math.sqrt((theta + 1.0) * (theta - 3.0))
    base = theta * theta - 2.0 * theta - 1.0
    return 0.5 * (base - disc), 0.5 * (base + disc)


def classify_tigm_count(k: int, theta: float) -> dict:
    """Phase-region record: lower bound on the number of TI measures."""
    if k < 2:
        raise ValueError("classification requires k >= 2")
    if not theta > 0:
        raise ValueError("theta must be positive")
    theta_c_high = (k + 1) / (k - 1)
    theta_c_low = (k - 1) / (k + 1)
    # strictly beyond the critical values: at theta = theta_c the extra
    # scalar roots coincide with the trivial one
    count = 3 if (theta < theta_c_low or theta > theta_c_high) else 1
    return {
        "count_lower_bound": count,
        "theta_c_high": theta_c_high,
        "theta_c_low": theta_c_low,
    }


def solve_invariant_sets(k: int, theta: float) -> SolutionSet:
    """All fixed points on the invariant sets I1, I2, I3 (a = b = c = 1 only).

    I1 reduces to the scalar equation with gamma = theta (points (1, x, x)),
    I2 to gamma = 1/theta (points (x, 1, x)); on I3 the effective gamma is
    2/(theta + 1/theta) <= 1, so the only fixed point there is (1, 1, 1).
    """
    derived = DerivedParams(k=k, theta=theta, a=1.0, b=1.0, c=1.0)
    points = [make_point(1.0, 1.0, 1.0, derived)]
    labels = ["I1&I2&I3"]
    for x in solve_scalar(ScalarEqParams(k=k, gamma=theta)):
        if not math.isclose(x, 1.0, rel_tol=DEDUP_RTOL):
            points.append(make_point(1.0, x, x, derived))
            labels.append("I1")
    for x in solve_scalar(ScalarEqParams(k=k, gamma=1.0 / theta)):
        if not math.isclose(x, 1.0, rel_tol=DEDUP_RTOL):
            points.append(make_point(x, 1.0, x, derived))
            labels.append("I2")
    return SolutionSet(points=points, labels=labels)


# ---------------------------------------------------------------------------
# symmetric special cases (a = b, c = 1)


def capital_theta(theta: float) -> float:
    return 2.0 / (theta + 1.0 / theta)


def solve_k1_symmetric(theta: float, a: float) -> FixedPoint3:
    """Unique positive fixed point (u1, u1, 1) for k = 1, a = b, c = 1.

    u1 solves u^2 + (1 - a)*Theta*u - a = 0 with Theta = 2/(theta + 1/theta).
    """
    if not (theta > 0 and a > 0):
        raise ValueError("theta and a must be positive")
    big = capital_theta(theta)
    u1 = 0.5 * ((a - 1.0) * big + math.sqrt(((a - 1.0) * big) ** 2 + 4.0 * a))
    derived = DerivedParams(k=1, theta=theta, a=a, b=a, c=1.0)
    return make_point(u1, u1, 1.0, derived)


def solve_symmetric_diagonal(k: int, theta: float, a: float) -> FixedPoint3:
    """Unique fixed point (u, u, 1) of the a = b, c = 1 diagonal reduction.

    Solves u = a*((1 + Theta*u)/(Theta + u))^k by bracketed root finding;
    the right-hand side is decreasing in u (Theta < 1 for theta != 1) while
    the left-hand side increases, so the root is unique.  At theta = 1 the
    right-hand side is constant and the root is u = a.
    """
    if k < 1 or not (theta > 0 and a > 0):
        raise ValueError("need k >= 1 and positive theta, a")
    big = capital_theta(theta)
    if theta == 1.0:
        u = a
    else:
        gfun = lambda u: a * ((1.0 + big * u) / (big + u)) ** k - u
        hi = a * (1.0 / big) ** k + 1.0
        u = brentq(gfun, 1e-300, hi, xtol=1e-15, rtol=8.9e-16)
    derived = DerivedParams(k=k, theta=theta, a=a, b=a, c=1.0)
    return make_point(u, u, 1.0, derived)


def lemma_xy_z1(point: FixedPoint3, derived: DerivedParams, tol: float = 1e-7) -> bool:
    """Check the equivalence u = v <=> w = 1 on a solved point (a = b, c = 1)."""
    if not math.isclose(derived.a, derived.b, rel_tol=1e-12) or not math.isclose(
        derived.c, 1.0, rel_tol=1e-12
    ):
        raise ValueError("the equivalence applies in the a = b, c = 1 regime")
    if residual(point.as_tuple(), derived) >= RESIDUAL_TOL:
        raise ValueError("point is not a solution (residual >= %g)" % RESIDUAL_TOL)
    return (abs(point.u - point.v) < tol) == (abs(point.w - 1.0) < tol)


# ---------------------------------------------------------------------------
# full 3-d multistart solve


def _newton_log(seed: np.ndarray, derived: DerivedParams, cfg: MultistartConfig) -> Optional[np.ndarray]:
    """Damped Newton on xi = log t; returns t on convergence, else None."""
    num, den, scale = _ratio_rows(derived)
    k = derived.k
    log_scale = np.log(scale)
    xi = np.log(seed)

    def defect(xi_vec):
        t = np.exp(xi_vec)
        ext = np.concatenate(([1.0], t))
        n_vals = num @ ext
        d_val = den @ ext
        h = log_scale + k * (np.log(n_vals) - math.log(d_val)) - xi_vec
        return h, t, n_vals, d_val

    h, t, n_vals, d_val = defect(xi)
    for _ in range(cfg.max_iter):
        norm = np.max(np.abs(h))
        if norm < 1e-14:
            break
        jac = k * (num[:, 1:] / n_vals[:, None] - den[1:][None, :] / d_val) * t[None, :]
        jac -= np.eye(3)
        try:
            step = np.linalg.solve(jac, -h)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        for _ in range(60):
            xi_new = np.clip(xi + lam * step, -60.0, 60.0)
            h_new, t_new, n_new, d_new = defect(xi_new)
            if np.max(np.abs(h_new)) < norm:
                xi, h, t, n_vals, d_val = xi_new, h_new, t_new, n_new, d_new
                break
            lam *= 0.5
        else:
            return None
    t = np.exp(xi)
    if residual(t, derived) < cfg.residual_tol:
        return t
    return None


def _same_point(p: Sequence[float], q: Sequence[float], rtol: float) -> bool:
    p = np.asarray(p)
    q = np.asarray(q)
    return bool(np.max(np.abs(p - q) / np.maximum(np.abs(p), np.abs(q))) < rtol)


def classify_point(point: FixedPoint3, derived: DerivedParams, tol: float = 1e-6) -> str:
    """Label a fixed point by invariant-set / diagonal membership."""
    u, v, w = point.as_tuple()
    near = lambda x, y: abs(x - y) <= tol * max(1.0, abs(x), abs(y))
    unit_weights = near(derived.a, 1.0) and near(derived.b, 1.0) and near(derived.c, 1.0)
    if unit_weights:
        tags = []
        if near(u, 1.0) and near(v, w):
            tags.append("I1")
        if near(v, 1.0) and near(u, w):
            tags.append("I2")
        if near(w, 1.0) and near(u, v):
            tags.append("I3")
        if tags:
            return "&".join(tags)
    if near(derived.a, derived.b) and near(derived.c, 1.0) and near(u, v) and near(w, 1.0):
        return "symmetric-diagonal"
    return "off-set"


def _candidate_seeds(derived: DerivedParams, cfg: MultistartConfig) -> List[np.ndarray]:
    seeds = [np.array(t, dtype=float) for t in itertools.product(cfg.grid, repeat=3)]
    near1 = lambda x: math.isclose(x, 1.0, rel_tol=1e-12)
    if near1(derived.a) and near1(derived.b) and near1(derived.c):
        for pt in solve_invariant_sets(derived.k, derived.theta).points:
            seeds.append(np.array(pt.as_tuple()))
    if math.isclose(derived.a, derived.b, rel_tol=1e-12) and near1(derived.c):
        if derived.k == 1:
            seeds.append(np.array(solve_k1_symmetric(derived.theta, derived.a).as_tuple()))
        seeds.append(np.array(solve_symmetric_diagonal(derived.k, derived.theta, derived.a).as_tuple()))
    return seeds


def solve_full_3d(
    derived: DerivedParams,
    cfg: MultistartConfig | None = None,
    extra_seeds: Iterable[Sequence[float]] = (),
) -> SolutionSet:
    """Multistart damped-Newton solve of the full 3-d fixed-point system.

    Seeds are a logarithmic grid plus every invariant-set / closed-form
    candidate applicable to the parameter regime.  Non-converging seeds are
    dropped; converged points are deduplicated at relative tolerance
    ``cfg.dedup_rtol`` and labeled by invariant-set membership.
    """
    cfg = cfg or MultistartConfig()
    seeds = _candidate_seeds(derived, cfg)
    seeds.extend(np.asarray(s, dtype=float) for s in extra_seeds)
    found: List[np.ndarray] = []
    for seed in seeds:
        t = _newton_log(seed, derived, cfg)
        if t is None:
            continue
        if not any(_same_point(t, other, cfg.dedup_rtol) for other in found):
            found.append(t)
    found.sort(key=lambda t: (t[0], t[1], t[2]))
    points = [make_point(t[0], t[1], t[2], derived) for t in found]
    labels = [classify_point(p, derived) for p in points]
    return SolutionSet(points=points, labels=labels)


# ---------------------------------------------------------------------------
# reference rows for the verify report

# Numerical reference rows (k, theta, a, x, y, z) used as reference inputs.
# They are not asserted to be fixed points: the verify report evaluates each
# row's residual under both the raw reading (u, v, w) = (x, y, z) and the
# powered reading (u, v, w) = (x^k, y^k, z^k) and records the outcome.
REFERENCE_ROWS: Tuple[Tuple[int, float, float, float, float, float], ...] = (
    (2, 0.1, 2.0, 1.268048128, 1.268048128, 1.0),
    (2, 0.1, 2.0, 0.2005870619, 1.263964993, 0.6570348177),
    (2, 0.1, 2.0, 192.3741268, 3.052913735, 152.1989357),
    (2, 0.1, 0.5, 0.7886136007, 0.7886136007, 1.0),
    (2, 0.1, 0.5, 0.005198204231, 0.7911611517, 0.1586966909),
    (2, 0.1, 0.5, 49.85366406, 0.3275559308, 63.01328616),
    (2, 0.1, 1.0, 1.0, 1.0, 1.0),
    (2, 0.1, 1.0, 0.1010204092, 1.0, 0.1010204092),
    (2, 0.1, 1.0, 98.98989796, 1.0, 98.98989796),
    (2, 1.3, 1.0, 1.0, 1.0, 1.0),
    (2, 1.3, 0.5, 0.5376526550, 0.5376526550, 1.0),
)


def reference_row_report(tol: float = RESIDUAL_TOL) -> List[dict]:
    """Residuals of the reference rows under both variable readings."""
    report = []
    for k, theta, a, x, y, z in REFERENCE_ROWS:
        derived = DerivedParams(k=k, theta=theta, a=a, b=a, c=1.0)
        res_raw = residual((x, y, z), derived)
        res_pow = residual((x**k, y**k, z**k), derived)
        if res_raw < tol or res_pow < tol:
            classification = "fixed-point"
        else:
            classification = "not-a-fixed-point"
        report.append(
            {
                "inputs": {"k": k, "theta": theta, "a": a, "x": x, "y": y, "z": z},
                "residual_raw": res_raw,
                "residual_powered": res_pow,
                "classification": classification,
            }
        )
    return report
