import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bilayer_ising.model import DerivedParams
from bilayer_ising.solver import (
    FixedPoint3,
    MultistartConfig,
    ScalarEqParams,
    apply_F,
    capital_theta,
    classify_tigm_count,
    closed_form_k2,
    lemma_xy_z1,
    make_point,
    reference_row_report,
    residual,
    scalar_t_polynomial,
    solve_full_3d,
    solve_invariant_sets,
    solve_k1_symmetric,
    solve_scalar,
    solve_symmetric_diagonal,
)


# ---------------------------------------------------------------------------
# scalar equation


def _scalar_roots_oracle(k, gamma):
    """Independent root finder: np.roots on t^(k+1) - g t^k + g t - 1."""
    roots = np.roots(scalar_t_polynomial(ScalarEqParams(k=k, gamma=gamma)))
    out = []
    for r in roots:
        if abs(r.imag) < 1e-9 and r.real > 0:
            x = r.real**k
            if not any(math.isclose(x, y, rel_tol=1e-6) for y in out):
                out.append(x)
    return sorted(out)


# gamma = 3 is excluded: the triple root at t = 1 is ill-conditioned for
# np.roots, so the oracle itself is unreliable exactly at the bifurcation
@pytest.mark.parametrize("gamma", [0.5, 2.9, 3.1, 4.0, 10.0, 50.0])
def test_scalar_matches_polynomial_oracle(gamma):
    roots = solve_scalar(ScalarEqParams(k=2, gamma=gamma))
    oracle = _scalar_roots_oracle(2, gamma)
    assert len(roots) == len(oracle)
    assert_allclose(roots, oracle, rtol=1e-7)


@pytest.mark.parametrize("k,gamma,n", [(2, 2.9, 1), (2, 3.0, 1), (2, 3.1, 3),
                                       (3, 2.0, 1), (3, 2.1, 3), (5, 1.6, 3)])
def test_scalar_root_counts(k, gamma, n):
    assert len(solve_scalar(ScalarEqParams(k=k, gamma=gamma))) == n


def test_scalar_gamma_10_values():
    # frozen oracle: (t-1)(t^2 - 9t + 1) = 0 at k=2, gamma=10
    t_lo = (9.0 - math.sqrt(77.0)) / 2.0
    t_hi = (9.0 + math.sqrt(77.0)) / 2.0
    roots = solve_scalar(ScalarEqParams(k=2, gamma=10.0))
    assert_allclose(roots, [t_lo**2, 1.0, t_hi**2], rtol=1e-12)


def test_scalar_roots_are_reciprocal():
    for gamma in (3.5, 4.0, 8.0, 20.0):
        lo, one, hi = solve_scalar(ScalarEqParams(k=2, gamma=gamma))
        assert one == 1.0
        assert abs(lo * hi - 1.0) < 1e-10


def test_scalar_k1_always_unique():
    assert solve_scalar(ScalarEqParams(k=1, gamma=100.0)) == [1.0]


def test_closed_form_k2():
    v1, v2 = closed_form_k2(4.0)
    assert_allclose(v1, (7.0 - 3.0 * math.sqrt(5.0)) / 2.0, rtol=1e-14)
    assert_allclose(v2, (7.0 + 3.0 * math.sqrt(5.0)) / 2.0, rtol=1e-14)
    with pytest.raises(ValueError):
        closed_form_k2(2.5)


# ---------------------------------------------------------------------------
# region classification and invariant sets


def test_classify_regions():
    rec = classify_tigm_count(2, 4.0)
    assert rec == {"count_lower_bound": 3, "theta_c_high": 3.0,
                   "theta_c_low": 1.0 / 3.0}
    assert classify_tigm_count(2, 0.2)["count_lower_bound"] == 3
    assert classify_tigm_count(2, 0.5)["count_lower_bound"] == 1
    assert classify_tigm_count(2, 2.0)["count_lower_bound"] == 1
    assert classify_tigm_count(3, 2.0)["theta_c_high"] == 2.0
    with pytest.raises(ValueError):
        classify_tigm_count(1, 2.0)


@pytest.mark.parametrize("theta", [0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 10.0])
@pytest.mark.parametrize("k", [2, 3])
def test_invariant_sets_match_classification(k, theta):
    sols = solve_invariant_sets(k, theta)
    assert sols.count == classify_tigm_count(k, theta)["count_lower_bound"]
    for p in sols.points:
        assert p.residual < 1e-9


def test_invariant_set_labels():
    sols = solve_invariant_sets(2, 4.0)
    assert sols.labels[0] == "I1&I2&I3"
    assert sols.labels.count("I1") == 2
    sols_low = solve_invariant_sets(2, 0.2)
    assert sols_low.labels.count("I2") == 2


# ---------------------------------------------------------------------------
# symmetric special cases


def test_k1_symmetric_closed_form():
    pt = solve_k1_symmetric(2.0, 0.3)
    # frozen from the quadratic u^2 + (1-a)*Theta*u - a = 0, Theta = 4/5
    assert_allclose(pt.u, 0.33514225996918795, rtol=1e-12)
    assert pt.v == pt.u and pt.w == 1.0
    big = capital_theta(2.0)
    assert abs(pt.u**2 + (1.0 - 0.3) * big * pt.u - 0.3) < 1e-12
    assert pt.residual < 1e-12


def test_k1_symmetric_a1_gives_trivial():
    for theta in (0.5, 1.0, 3.0):
        assert_allclose(solve_k1_symmetric(theta, 1.0).u, 1.0, rtol=1e-14)


def test_symmetric_diagonal_defining_equation():
    pt = solve_symmetric_diagonal(2, 1.3, 0.5)
    big = capital_theta(1.3)
    assert abs(0.5 * ((1.0 + big * pt.u) / (big + pt.u)) ** 2 - pt.u) < 1e-12
    assert pt.residual < 1e-9


def test_symmetric_diagonal_a1_is_identity():
    for theta in np.linspace(0.1, 5.0, 20):
        pt = solve_symmetric_diagonal(2, float(theta), 1.0)
        assert abs(pt.u - 1.0) < 1e-10
        assert abs(pt.w - 1.0) < 1e-12


def test_symmetric_diagonal_theta1():
    pt = solve_symmetric_diagonal(3, 1.0, 0.7)
    assert pt.u == 0.7


def test_lemma_equivalence_on_solutions():
    d = DerivedParams(k=1, theta=2.0, a=0.3, b=0.3, c=1.0)
    assert lemma_xy_z1(solve_k1_symmetric(2.0, 0.3), d)
    d2 = DerivedParams(k=2, theta=0.1, a=2.0, b=2.0, c=1.0)
    for pt in solve_full_3d(d2).points:
        assert lemma_xy_z1(pt, d2)
    with pytest.raises(ValueError):
        lemma_xy_z1(FixedPoint3(2.0, 3.0, 4.0, 1.0), d2)


# ---------------------------------------------------------------------------
# full 3-d multistart solve


def test_apply_f_and_residual_agree():
    d = DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    pt = make_point(1.0, 1.0, 1.0, d)
    out = apply_F(pt, d)
    assert_allclose(out.as_tuple(), (1.0, 1.0, 1.0), rtol=1e-14)
    assert residual((1.0, 2.0, 3.0), d) > 0.1


def test_full_3d_recovers_invariant_sets():
    for theta in (0.2, 0.5, 2.0, 4.0):
        d = DerivedParams(k=2, theta=theta, a=1.0, b=1.0, c=1.0)
        found = solve_full_3d(d)
        expected = solve_invariant_sets(2, theta)
        assert found.count == expected.count
        for pt in expected.points:
            gaps = [
                max(abs(pt.u - q.u), abs(pt.v - q.v), abs(pt.w - q.w))
                for q in found.points
            ]
            assert min(gaps) < 1e-6 * max(1.0, pt.u, pt.v, pt.w)


def test_full_3d_k1_unique():
    d = DerivedParams(k=1, theta=2.0, a=0.3, b=0.3, c=1.0)
    sols = solve_full_3d(d)
    assert sols.count == 1
    assert_allclose(sols.points[0].as_tuple(), (0.335142, 0.335142, 1.0), atol=1e-6)
    assert sols.labels == ["symmetric-diagonal"]


def test_full_3d_residual_gate():
    for d in (
        DerivedParams(k=2, theta=0.1, a=2.0, b=2.0, c=1.0),
        DerivedParams(k=2, theta=0.5, a=0.7, b=1.4, c=1.2),
        DerivedParams(k=3, theta=5.0, a=1.0, b=1.0, c=1.0),
    ):
        for pt in solve_full_3d(d).points:
            assert pt.residual < 1e-9


def test_full_3d_deterministic():
    d = DerivedParams(k=2, theta=0.1, a=2.0, b=2.0, c=1.0)
    s1 = solve_full_3d(d)
    s2 = solve_full_3d(d)
    assert [p.as_tuple() for p in s1.points] == [p.as_tuple() for p in s2.points]
    assert s1.labels == s2.labels


def test_full_3d_extra_seed_dedup():
    d = DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    base = solve_full_3d(d)
    seeded = solve_full_3d(d, extra_seeds=[(1.0, 1.0, 1.0), (0.99, 1.01, 1.0)])
    assert seeded.count == base.count


def test_multistart_config_custom_grid():
    d = DerivedParams(k=2, theta=4.0, a=1.0, b=1.0, c=1.0)
    cfg = MultistartConfig(grid=(0.1, 1.0, 10.0))
    assert solve_full_3d(d, cfg).count == 3


# ---------------------------------------------------------------------------
# reference rows


def test_reference_rows_reported_not_asserted():
    report = reference_row_report()
    assert len(report) == 11
    for entry in report:
        assert set(entry) == {"inputs", "residual_raw", "residual_powered",
                              "classification"}
        assert entry["residual_raw"] >= 0.0
    # the trivial symmetric rows really are fixed points
    trivial = [e for e in report if e["inputs"]["x"] == e["inputs"]["y"] == 1.0]
    assert trivial and all(e["classification"] == "fixed-point" for e in trivial)
