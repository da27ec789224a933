import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslab.norms import (NormError, ParameterError, SingularPointError, block_norm,
                           check_norm_axioms, cross_restriction, dual_eval, dual_spec,
                           estimate_monotonicity, flux, format_norm, matrix_qnorm, norm_eval,
                           norm_grad, parse_norm, qnorm, scaled_euclidean, split_norm,
                           theta_bounds, value_and_grad)

BLOCK = block_norm(2, (1, 1), (1, 2), (1, 4))
SPLIT3 = split_norm(3, qnorm(3, 1), qnorm(3, 1))
MATRIX = matrix_qnorm(2, [[2, 0], [0, 1]])

FAMILIES = [qnorm(2, 2), qnorm(3, 2), qnorm(1.5, 2), qnorm(4, 3), MATRIX, BLOCK, SPLIT3,
            scaled_euclidean(3, 2), matrix_qnorm(3, [[1, 0.5], [-0.2, 1.5]]),
            split_norm(2, qnorm(2, 1), qnorm(4, 2))]


def fd_grad(fun, z, step=1e-6):
    z = np.asarray(z, float)
    g = np.empty_like(z)
    for i in range(len(z)):
        e = np.zeros_like(z)
        e[i] = step
        g[i] = (fun(z + e) - fun(z - e)) / (2 * step)
    return g


def brute_dual(spec, xi, count=100_000, seed=1):
    """sup <xi, x> / H(x) over random directions, using only norm_eval."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((count, spec.dimension))
    return float(np.max(X @ xi / norm_eval(spec, X)))


# values ---------------------------------------------------------------------

def test_values():
    assert norm_eval(qnorm(2, 2), [3, 4]) == pytest.approx(5, abs=1e-15)
    assert norm_eval(qnorm(1, 3), [1, -1, 1]) == pytest.approx(3, abs=1e-15)
    assert norm_eval(MATRIX, [1, 1]) == pytest.approx(math.sqrt(5), rel=1e-15)
    assert norm_eval(BLOCK, [1, 2]) == pytest.approx(math.sqrt(17), rel=1e-15)
    assert norm_eval(scaled_euclidean(3, 2), [3, 4]) == pytest.approx(15)


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_zero_is_zero(spec):
    assert norm_eval(spec, np.zeros(spec.dimension)) == 0
    assert norm_eval(spec.smoothed(1e-3), np.zeros(spec.dimension)) == 0


def test_dimension_mismatch():
    with pytest.raises(NormError):
        norm_eval(qnorm(2, 2), [1, 2, 3])


def test_invalid_parameters():
    with pytest.raises(NormError):
        qnorm(0.5, 2)
    with pytest.raises(NormError):
        matrix_qnorm(2, [[1, 2], [2, 4]])
    with pytest.raises(NormError):
        block_norm(2, (1, 1), (1, 2), (1, -1))


def test_smoothed_vanishes_at_zero_and_converges():
    spec = qnorm(1, 2)
    z = np.array([0.3, -0.7])
    vals = [norm_eval(spec.smoothed(e), z) for e in (1e-2, 1e-4, 1e-6)]
    errs = [abs(v - 1.0) for v in vals]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-5


# gradients ------------------------------------------------------------------

def test_grad_examples():
    np.testing.assert_allclose(norm_grad(qnorm(2, 2), [3, 4]), [0.6, 0.8], atol=1e-15)
    g = norm_grad(qnorm(4, 2), [1, 1])
    # oracle: central differences of norm_eval
    oracle = fd_grad(lambda z: norm_eval(qnorm(4, 2), z), [1.0, 1.0])
    np.testing.assert_allclose(g, oracle, atol=1e-8)
    np.testing.assert_allclose(g, [2 ** -0.75] * 2, atol=1e-14)


def test_grad_singular_points():
    with pytest.raises(SingularPointError):
        norm_grad(qnorm(2, 2), [0, 0])
    with pytest.raises(SingularPointError):
        norm_grad(qnorm(1, 2), [0, 1])
    # smoothed mode is defined everywhere
    assert np.all(np.isfinite(norm_grad(qnorm(1, 2).smoothed(1e-3), [0, 1])))


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_grad_matches_finite_differences(spec):
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = rng.standard_normal(spec.dimension)
        z *= rng.uniform(0.5, 2) / np.linalg.norm(z)
        g = norm_grad(spec, z)
        oracle = fd_grad(lambda x: norm_eval(spec, x), z)
        np.testing.assert_allclose(g, oracle, atol=1e-6)


@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_grad_bounded_by_c(spec):
    c = theta_bounds(spec).grad_bound_c
    Z = np.random.default_rng(4).standard_normal((500, spec.dimension))
    _, G, sing = value_and_grad(spec, Z)
    assert np.max(np.linalg.norm(G[~sing], axis=1)) <= c * (1 + 1e-12)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(1.2, 6), z=st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_euler_identity(q, z):
    z = np.array(z)
    if np.min(np.abs(z)) < 1e-3:
        return
    spec = qnorm(q, 3)
    assert norm_grad(spec, z) @ z == pytest.approx(norm_eval(spec, z), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(q=st.floats(1, 6), t=st.sampled_from([-2.0, -1.0, 0.5, 3.0]),
       z=st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_homogeneity(q, t, z):
    spec = qnorm(q, 2)
    z = np.array(z)
    h = norm_eval(spec, z)
    assert abs(norm_eval(spec, t * z) - abs(t) * h) <= 1e-10 * max(h, 1e-300) + 1e-300


@settings(max_examples=60, deadline=None)
@given(q=st.floats(1, 6), x=st.lists(st.floats(-10, 10), min_size=2, max_size=2),
       y=st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_triangle_inequality(q, x, y):
    spec = qnorm(q, 2)
    x, y = np.array(x), np.array(y)
    hx, hy = norm_eval(spec, x), norm_eval(spec, y)
    assert norm_eval(spec, x + y) <= hx + hy + 1e-12 * (hx + hy)


# flux -----------------------------------------------------------------------

def test_flux_examples():
    np.testing.assert_allclose(flux(qnorm(2, 2), 2, [3, 4]), [3, 4], atol=1e-14)
    np.testing.assert_allclose(flux(qnorm(3, 2), 3, [1, -2]), [1, -4], atol=1e-14)
    for spec in FAMILIES:
        assert np.all(flux(spec, 2.5, np.zeros(spec.dimension)) == 0)
    with pytest.raises(ParameterError):
        flux(qnorm(2, 2), 1.0, [1, 1])


def test_flux_is_gradient_of_hp_over_p():
    spec, p = qnorm(3, 2), 3.0
    z = np.array([1.0, -2.0])
    oracle = fd_grad(lambda x: norm_eval(spec, x) ** p / p, z)
    np.testing.assert_allclose(flux(spec, p, z), oracle, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(p=st.floats(2, 5), z1=st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       z2=st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_flux_monotone(p, z1, z2):
    z1, z2 = np.array(z1), np.array(z2)
    for spec in (qnorm(2, 2), MATRIX, SPLIT3):
        inner = (flux(spec, p, z1) - flux(spec, p, z2)) @ (z1 - z2)
        assert inner >= -1e-9 * (1 + np.abs(z1).max() + np.abs(z2).max()) ** p


# duals ----------------------------------------------------------------------

def test_dual_examples():
    assert dual_eval(qnorm(2, 2), [3, 4]) == pytest.approx(5)
    assert dual_eval(qnorm(1, 2), [2, -3]) == pytest.approx(3)
    assert dual_eval(MATRIX, [2, 1]) == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize("spec,xi", [
    (qnorm(1, 2), [2.0, -3.0]),
    (MATRIX, [2.0, 1.0]),
    (BLOCK, [0.7, -1.3]),
    (SPLIT3, [1.0, 2.0]),
    (qnorm(4, 2), [1.0, -0.5]),
], ids=str)
def test_dual_matches_brute_force(spec, xi):
    # the brute-force sup only approaches the dual from below
    oracle = brute_dual(spec, np.array(xi))
    val = dual_eval(spec, xi)
    assert oracle <= val * (1 + 1e-12)
    assert val == pytest.approx(oracle, rel=2e-3)


def test_sampled_dual_agrees_with_analytic():
    xi = np.array([[0.4, -1.1], [2.0, 0.3]])
    for spec in (qnorm(3, 2), MATRIX, BLOCK, SPLIT3):
        np.testing.assert_allclose(dual_eval(spec, xi, method="sample"), dual_eval(spec, xi),
                                   rtol=1e-8)


@pytest.mark.parametrize("spec", [qnorm(3, 2), qnorm(1.5, 3), MATRIX], ids=str)
def test_dual_of_dual(spec):
    dd = dual_spec(dual_spec(spec))
    Z = np.random.default_rng(5).standard_normal((50, spec.dimension))
    np.testing.assert_allclose(norm_eval(dd, Z), norm_eval(spec, Z), rtol=1e-8)


def test_restricted_dual_by_sampling():
    r = cross_restriction(MATRIX, 1)
    assert r.dimension == 1
    assert dual_eval(r, [3.0]) == pytest.approx(3.0, rel=1e-8)


# theta bounds ---------------------------------------------------------------

def test_theta_bounds():
    t = theta_bounds(qnorm(2, 4))
    assert (t.theta1, t.theta2) == (1.0, 1.0)
    t = theta_bounds(scaled_euclidean(3, 2))
    assert (t.theta1, t.theta2) == (3.0, 3.0)
    t = theta_bounds(qnorm(1, 2))
    # dense-sampling oracle on the unit circle
    ang = np.linspace(0, 2 * np.pi, 200001)
    vals = np.abs(np.cos(ang)) + np.abs(np.sin(ang))
    assert t.theta1 == pytest.approx(vals.min(), abs=1e-9)
    assert t.theta2 == pytest.approx(vals.max(), abs=1e-9)
    assert t.grad_bound_c >= t.theta2


def test_theta_bounds_sampled_matrix():
    t = theta_bounds(MATRIX)
    assert t.theta1 == pytest.approx(1.0, abs=1e-6)
    assert t.theta2 == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ParameterError):
        theta_bounds(MATRIX, probe_count=3)


# axioms and monotonicity -----------------------------------------------------

@pytest.mark.parametrize("spec", FAMILIES, ids=str)
def test_axioms(spec):
    rep = check_norm_axioms(spec, 1000, seed=0)
    assert rep.max_violation() <= 1e-8, rep.violations()


def test_axioms_need_exact_mode():
    with pytest.raises(ParameterError):
        check_norm_axioms(qnorm(2, 2).smoothed(1e-3))


def test_monotonicity_constants():
    assert estimate_monotonicity(qnorm(2, 2), 2, "A1_pge2").empirical_constant == \
        pytest.approx(1.0, abs=1e-9)
    # sharp constant of <|a|a - |b|b, a - b> >= c |a - b|^3 is 2^(2-p) = 1/2
    c = estimate_monotonicity(qnorm(2, 2), 3, "A1_pge2").empirical_constant
    assert 0.5 <= c <= 0.51
    assert c == pytest.approx(0.5002073128322403, rel=1e-9)  # regression baseline
    c = estimate_monotonicity(qnorm(2, 2), 1.5, "A2").empirical_constant
    assert 0 < c < math.inf
    assert c == pytest.approx(1.4142135510016578, rel=1e-9)  # regression baseline
    c = estimate_monotonicity(SPLIT3, 3, "A3").empirical_constant
    assert 0.5 <= c <= 0.51


def test_monotonicity_reproducible_and_guarded():
    a = estimate_monotonicity(MATRIX, 3, "A1_pge2", 2000, seed=7)
    b = estimate_monotonicity(MATRIX, 3, "A1_pge2", 2000, seed=7)
    assert a.empirical_constant == b.empirical_constant
    with pytest.raises(ParameterError):
        estimate_monotonicity(qnorm(2, 2), 1.5, "A1_pge2")
    with pytest.raises(ParameterError):
        estimate_monotonicity(qnorm(2, 2), 3, "A2")
    with pytest.raises(ParameterError):
        estimate_monotonicity(qnorm(2, 2), 3, "A3")


# descriptors ----------------------------------------------------------------

@pytest.mark.parametrize("desc", ["qnorm(2)", "qnorm(1.5)", "matq(2; 2,0;0,1)",
                                  "block(2; 1,1; 1,2; 1,4)", "split(3; qnorm(3); qnorm(3))",
                                  "eucl(3)"])
def test_descriptor_round_trip(desc):
    spec = parse_norm(desc, 2)
    assert parse_norm(format_norm(spec), 2) == spec


def test_descriptor_errors():
    for bad in ["qnorm", "qnorm(2", "foo(2)", "matq(2; 1,2;3)", "qnorm(x)",
                "block(2; 1; 1,2; 1,4)"]:
        with pytest.raises(NormError):
            parse_norm(bad, 2)
    with pytest.raises(NormError):
        parse_norm("matq(2; 1,0,0;0,1,0;0,0,1)", 2)


def test_cross_restriction():
    assert cross_restriction(SPLIT3, 1) == qnorm(3, 1)
    assert cross_restriction(qnorm(2, 3), 1) == qnorm(2, 2)
    r = cross_restriction(MATRIX, 1)
    assert norm_eval(r, [1.5]) == pytest.approx(norm_eval(MATRIX, [0, 1.5]))
