import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sepergy import gallery, quadrature
from sepergy.energy import (EpsExceedsDomain, affine_fit, branch, critical_exponent_estimate,
                            critical_p, energy_at_eps, energy_sweep, grun_criterion,
                            lipschitz_bound, monotonicity_check)
from sepergy.grid import EnergyParams, GridFunction, Kernel, ProductDomain, sample

from strategies import dyadic, factor_profiles, fields, thetas

UNIT = ProductDomain.square(0.0, 1.0)

# frozen oracle values (independent 1-D quadrature, see quadrature.py)
K_HALF = 0.5393526011883791
ROOF_C1_HALF = 0.1971878386538817
ROOF_C1_THREE_QUARTERS = 0.120483343743618


# --- exponents ---------------------------------------------------------------

@pytest.mark.parametrize("t1,t2,p,reg", [(0.5, 0.5, 2.0, "a"), (1.0, 1.0, 3.0, "b"),
                                         (2.0, 2.0, 6.0, "c"), (0.5, 3.0, 4.5, "b"),
                                         (1.5, 3.0, 6.0, "c")])
def test_critical_p(t1, t2, p, reg):
    assert critical_p(t1, t2) == p
    assert branch(t1, t2) == reg


# --- oracles -----------------------------------------------------------------

def test_kernel_factor_matches_beta_function():
    for t1, t2 in [(0.5, 0.5), (1.0, 1.0), (0.3, 1.7)]:
        assert quadrature.kernel_factor(t1, t2) == pytest.approx(
            quadrature.kernel_factor_closed_form(t1, t2), rel=1e-11)
    assert quadrature.kernel_factor(0.5, 0.5) == pytest.approx(K_HALF, rel=1e-12)
    assert quadrature.kernel_factor(1.0, 1.0) == pytest.approx(1 / math.pi, rel=1e-12)


def test_roof_constant_frozen():
    assert quadrature.roof_c1(0.5, 0.5) == pytest.approx(ROOF_C1_HALF, rel=1e-9)
    assert quadrature.roof_c1(0.75, 0.75) == pytest.approx(ROOF_C1_THREE_QUARTERS, rel=1e-9)
    assert quadrature.hat_energy(0.75, 0.75) == pytest.approx(2 * ROOF_C1_THREE_QUARTERS, rel=1e-9)


def test_roof_constant_brute_force():
    # midpoint rule in (angle, s) on a fine product grid, no breakpoints
    phi = (np.arange(2000) + 0.5) * (2 * math.pi / 2000)
    s = (np.arange(4000) + 0.5) * (2.0 / 4000) - 1.0
    c, d = np.cos(phi)[:, None], np.sin(phi)[:, None]
    ramp = lambda x, a: np.minimum(x + a, 0) - np.minimum(x, 0)
    g = np.abs(ramp(s, c)) ** 0.5 * np.abs(ramp(-s, d)) ** 0.5
    assert g.mean() * 2.0 == pytest.approx(ROOF_C1_HALF, rel=2e-4)


def test_bilinear_limit():
    assert quadrature.bilinear_limit(0.5, 0.5) == pytest.approx(K_HALF * 4 / 9, rel=1e-12)


# --- exact zeros -------------------------------------------------------------

@given(factor_profiles(), thetas, thetas, st.floats(0.5, 4.0), st.floats(0.15, 0.4),
       st.booleans(), st.booleans())
def test_single_factor_fields_have_zero_energy(fg, t1, t2, p, eps, first, periodic):
    f, g = fg
    values = np.repeat(f[:, None], 8, axis=1) if first else np.repeat(g[None, :], 8, axis=0)
    u = GridFunction(ProductDomain.square(0.0, 1.0, periodic), values)
    assert energy_at_eps(u, EnergyParams(t1, t2, p), eps) == 0.0


def test_separable_sweep_report():
    u = gallery.separable("x2").render(32)
    rep = energy_sweep(u, EnergyParams(0.5, 0.5, 2.0), [0.3, 0.2, 0.1])
    assert rep.values == [0.0, 0.0, 0.0]
    assert rep.liminf_estimate == 0.0 and rep.extrapolated == 0.0


# --- invariances -------------------------------------------------------------

@given(fields(elements=dyadic), thetas, thetas, st.floats(0.5, 3.0), dyadic)
def test_constant_shift_and_sign(u, t1, t2, p, c):
    # dyadic samples keep u + c exact; with arbitrary floats a shift can round
    # tiny differences to zero, and |.|**theta for theta < 1 amplifies that
    params = EnergyParams(t1, t2, p)
    e = energy_at_eps(u, params, 0.3)
    assert energy_at_eps(-u, params, 0.3) == e
    assert energy_at_eps(u.with_values(u.values + c), params, 0.3) == e


@given(fields(), thetas, thetas, st.floats(0.5, 3.0),
       st.floats(0.1, 10).flatmap(lambda m: st.sampled_from([m, -m])))
def test_homogeneity(u, t1, t2, p, c):
    params = EnergyParams(t1, t2, p)
    e = energy_at_eps(u, params, 0.3)
    assert energy_at_eps(u * c, params, 0.3) == pytest.approx(abs(c) ** (t1 + t2) * e, rel=1e-9)


@given(fields(), thetas, thetas, st.floats(0.5, 3.0))
def test_transpose_swaps_exponents(u, t1, t2, p):
    a = energy_at_eps(u, EnergyParams(t1, t2, p), 0.3)
    b = energy_at_eps(u.transposed(), EnergyParams(t2, t1, p), 0.3)
    assert b == pytest.approx(a, rel=1e-10, abs=1e-300)


@given(fields(), thetas, thetas, st.floats(0.5, 3.0))
def test_arctan_truncation_decreases_energy(u, t1, t2, p):
    params = EnergyParams(t1, t2, p)
    assert energy_at_eps(u.map(np.arctan), params, 0.3) <= energy_at_eps(u, params, 0.3) * (1 + 1e-12)


# --- inequalities ------------------------------------------------------------

@given(fields(min_side=8), thetas, thetas, st.floats(0.5, 3.0), st.floats(0.1, 2.0),
       st.floats(0.15, 0.3), st.sampled_from(["annulus", "plateau", "cone"]))
def test_monotonicity_exact(u, t1, t2, p, dq, eps, profile):
    lhs, rhs = monotonicity_check(u, t1, t2, p, p + dq, eps, Kernel(profile))
    assert lhs <= rhs


def test_monotonicity_corner_example():
    u = gallery.corner().render(64)
    lhs, rhs = monotonicity_check(u, 0.5, 0.5, 1.0, 2.0, 0.5)
    assert lhs <= rhs
    assert rhs == pytest.approx(0.5 * energy_at_eps(u, EnergyParams(0.5, 0.5, 2.0), 0.5), rel=1e-12)


def test_monotonicity_rejects_bad_order():
    with pytest.raises(ValueError):
        monotonicity_check(gallery.corner().render(16), 0.5, 0.5, 2.0, 2.0, 0.3)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), thetas, thetas,
       st.floats(0.1, 0.4))
def test_lipschitz_bound(a, b, c, t1, t2, eps):
    u = sample(UNIT, 24, lambda x: a * x[..., 0] + b * x[..., 1] + c * x[..., 0] * x[..., 1])
    lip = math.hypot(abs(a) + abs(c), abs(b) + abs(c))
    params = EnergyParams(t1, t2, t1 + t2)
    assert energy_at_eps(u, params, eps) <= lipschitz_bound(u, params, eps, lip) * (1 + 1e-12)


# --- canonical values --------------------------------------------------------

def test_corner_energy_coarse():
    u = gallery.corner().render(128)
    e = energy_at_eps(u, EnergyParams(0.5, 0.5, 2.0), 0.25)
    assert e == pytest.approx(quadrature.CORNER_ENERGY, rel=0.02)


@pytest.mark.parametrize("profile", ["annulus", "plateau", "cone"])
def test_corner_energy_is_kernel_independent(profile):
    u = gallery.corner().render(128)
    e = energy_at_eps(u, EnergyParams(1.0, 1.0, 2.0), 0.3, Kernel(profile))
    assert e == pytest.approx(quadrature.CORNER_ENERGY, rel=0.03)


def test_corner_energy_regression():
    u = gallery.corner().render(16)
    assert energy_at_eps(u, EnergyParams(0.5, 0.5, 2.0), 0.5) == pytest.approx(
        0.0784188034188034, rel=1e-12)


def test_eps_exceeding_domain():
    with pytest.raises(EpsExceedsDomain, match="exceeds domain"):
        energy_at_eps(gallery.roof().render(16), EnergyParams(0.5, 0.5, 2.0), 0.6)


def test_sweep_needs_decreasing_eps():
    with pytest.raises(ValueError, match="decreasing"):
        energy_sweep(gallery.roof().render(16), EnergyParams(0.5, 0.5, 2.0), [0.1, 0.2])


def test_report_serialisation_is_stable():
    u = gallery.roof().render(32)
    rep = energy_sweep(u, EnergyParams(0.5, 0.5, 2.0), [0.25, 0.1875, 0.125])
    again = energy_sweep(u, EnergyParams(0.5, 0.5, 2.0), [0.25, 0.1875, 0.125])
    assert rep.to_json() == again.to_json()
    assert rep.to_csv().splitlines()[0] == "eps,value"
    assert '"theta": 1.0' in rep.to_json()


def test_affine_fit_exact_line():
    a, b, rel = affine_fit([0.3, 0.2, 0.1], [1 - 0.6, 1 - 0.4, 1 - 0.2])
    assert a == pytest.approx(1.0, abs=1e-12) and b == pytest.approx(-2.0, abs=1e-12)
    assert rel < 1e-12


def test_pstar_separable_sentinel():
    u = gallery.separable("x1").render(32)
    est = critical_exponent_estimate(u, 0.5, 0.5, [0.25, 0.1875, 0.15625, 0.125], [1.0, 2.0])
    assert est.separable and math.isinf(est.p_star)


def test_pstar_needs_an_octave():
    with pytest.raises(ValueError, match="octave"):
        critical_exponent_estimate(gallery.roof().render(32), 0.5, 0.5,
                                   [0.2, 0.18, 0.16, 0.14], [2.0])


def test_grun_criterion():
    assert grun_criterion(gallery.separable("x2").render(32), 0.5, 0.5, 2.0, 0.25) == 0.0
    c = grun_criterion(gallery.corner().render(32), 0.5, 0.5, 2.0, 0.5)
    assert 0 < c < math.inf
    roof = [grun_criterion(gallery.roof().render(n), 0.5, 0.5, 3.0, 0.25) for n in (16, 32, 64)]
    assert roof[0] < roof[1] < roof[2]
    assert roof[2] > 2 * roof[1]
