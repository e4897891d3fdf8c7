import math

import numpy as np
import pytest

from sepergy import gallery, quadrature
from sepergy.energy import energy_at_eps
from sepergy.grid import EnergyParams

PROVENANCE = ("analytic", "oracle:", "trivial")


def test_point_values():
    assert gallery.roof()(0.3, 0.7) == 0.3
    assert gallery.corner()(0.5, 0.5) == 1.0
    assert gallery.corner()(-0.5, 0.5) == 0.0
    assert gallery.unit_hat(np.array([0.5, 0.5])) == 0.5


@pytest.mark.parametrize("name", sorted(gallery.REGISTRY))
def test_every_fact_has_provenance(name):
    entry = gallery.get(name)
    assert entry.known_facts
    for fact in entry.known_facts:
        assert fact.provenance.startswith(PROVENANCE), fact


def test_fact_values():
    assert gallery.corner().fact("energy_p2").value == pytest.approx(1 / (4 * math.pi))
    assert gallery.roof().fact("c1").value == pytest.approx(quadrature.roof_c1(0.5, 0.5))
    assert "c1 - c2*eps" in gallery.roof().fact("affine_energy").law
    hat = gallery.hat(2.0, 0.5, theta1=0.75, theta2=0.75)
    assert hat.fact("energy").value == pytest.approx(
        2 ** 1.5 * 0.5 ** -0.5 * quadrature.hat_energy(0.75, 0.75))


def test_unknown_id():
    with pytest.raises(KeyError, match="unknown gallery id"):
        gallery.get("nope")


def test_hat_energy_scaling_is_exact_on_matched_grids():
    # a hat of width 2l rendered with the same number of cells is an exact dilation
    t = 0.75
    a = gallery.hat(1.0, 0.5, theta1=t, theta2=t).render(96)
    b = gallery.hat(2.0, 1.0, theta1=t, theta2=t).render(96)
    pa = EnergyParams(t, t, 1 + 2 * t)
    ea = energy_at_eps(a, pa, 0.1)
    eb = energy_at_eps(b, pa, 0.2)
    assert eb / ea == pytest.approx(2 ** 1.5 * 2 ** -0.5, rel=1e-12)


# --- hat array -------------------------------------------------------------------

def test_sequences():
    h, l = gallery.hat_sequences(4, 1.5)
    k = np.arange(1, 5)
    assert np.allclose(h, k ** (-(4 * 1.5 + 1) / (5 * 1.5)))
    assert np.allclose(l, k ** -0.75 / 2)


def test_sequence_conditions_hold():
    c = gallery.check_sequence_conditions(1.5)
    for key in ("h_decreasing", "l_decreasing", "ratio_decreasing", "l1_at_most_half",
                "tail_term_decreasing", "energy_series_summable", "height_series_divergent"):
        assert c[key], key
    assert c["l_ratio_lower_bound"] > 0.5


@pytest.mark.parametrize("K", [8, 32, 200])
def test_array_geometry(K):
    entry = gallery.hat_array(K, 1.5)
    anchors = np.array(entry.info["anchors"])
    ell = np.array(entry.info["l"])
    width = entry.info["width"]
    for i in range(K):
        for j in range(i + 1, K):
            assert np.linalg.norm(anchors[i] - anchors[j]) >= 2 * max(ell[i], ell[j]) * (1 - 1e-12)
            # distance between the closed support squares
            gap = np.linalg.norm(np.maximum(0, np.maximum(anchors[i] - (anchors[j] + ell[j]),
                                                          anchors[j] - (anchors[i] + ell[i]))))
            assert gap >= (2 - math.sqrt(2)) * ell[j] * (1 - 1e-12)
    assert np.all(anchors >= 0)
    assert np.all(anchors[:, 0] + ell <= width + 1e-12)
    assert np.all(anchors[:, 1] + ell <= 1 + 1e-12)


def test_array_width_stays_bounded():
    widths = [gallery.hat_array(K, 1.5).info["width"] for K in (8, 64, 512)]
    assert widths[0] < widths[1] < widths[2] < 4


def test_array_needs_theta_above_one():
    with pytest.raises(ValueError, match="theta > 1"):
        gallery.hat_array(4, 1.0)


def test_resolution_guard_names_minimal_grid():
    entry = gallery.hat_array(16, 1.5)
    with pytest.raises(ValueError, match=r"minimal grid is \d+x\d+"):
        entry.render(64)
    with pytest.raises(ValueError, match="at least"):
        gallery.hat_array(16, 1.5, grid=10)


def test_pieces_reproduce_the_global_energy():
    entry = gallery.hat_array(4, 1.5)
    res = tuple(int(round(L * 160)) for L in entry.domain.lengths)
    u = entry.render(res)
    pieces = gallery.hat_array_pieces(entry, res, 0.07)
    params = EnergyParams(0.75, 0.75, 2.5)
    whole = energy_at_eps(u, params, 0.03)
    parts = math.fsum(energy_at_eps(q, params, 0.03) for q in pieces)
    assert parts == pytest.approx(whole, rel=1e-12)
    assert sum(np.count_nonzero(q.values) for q in pieces) == np.count_nonzero(u.values)


def test_bump_and_perturbation():
    f = gallery.bump((0.2, 0.3), 0.1)
    assert f(np.array([0.2, 0.3])) == 1.0
    assert f(np.array([0.31, 0.3])) == 0.0
    p = gallery.perturbed(0.5)
    base = gallery.separable("x2")
    assert p(0.5, 0.5) - base(0.5, 0.5) == pytest.approx(0.5)
    assert p(0.1, 0.5) == base(0.1, 0.5)
