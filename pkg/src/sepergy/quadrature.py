"""Continuum reference values computed by polar quadrature.

These never touch the grid or the lattice kernel: they integrate the
limiting expressions directly with adaptive 1-D quadrature. With
``p = theta`` (C^1 fields) or ``p = 1 + theta`` (the roof) the inner
integrands are homogeneous of degree zero in ``z``, so the radial profile
of any unit-mass radial kernel drops out and only an angular mean remains.
"""

from __future__ import annotations

import math
from functools import lru_cache

from scipy import integrate
from scipy.special import beta


def _angular_mean(g) -> float:
    # breakpoints at the axes where |cos| or |sin| vanish
    pts = [k * math.pi / 2 for k in range(5)]
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        val, _ = integrate.quad(g, a, b, limit=200, epsabs=1e-13, epsrel=1e-12)
        total += val
    return total / (2 * math.pi)


@lru_cache(maxsize=None)
def kernel_factor(theta1: float, theta2: float) -> float:
    """Angular mean of ``|cos phi|**theta1 * |sin phi|**theta2`` (planar case)."""
    return _angular_mean(lambda t: abs(math.cos(t)) ** theta1 * abs(math.sin(t)) ** theta2)


def kernel_factor_closed_form(theta1: float, theta2: float) -> float:
    return beta((theta1 + 1) / 2, (theta2 + 1) / 2) / math.pi


def bilinear_limit(theta1: float, theta2: float) -> float:
    """Limit energy of ``u = x1 x2`` on the unit square at ``p = theta``."""
    return kernel_factor(theta1, theta2) / ((theta1 + 1) * (theta2 + 1))


def _ramp_jump(s: float, a: float) -> float:
    # first difference of s -> min(s, 0)
    return min(s + a, 0.0) - min(s, 0.0)


def _roof_profile_integral(phi: float, theta1: float, theta2: float) -> float:
    c, d = math.cos(phi), math.sin(phi)

    def g(s):
        return abs(_ramp_jump(s, c)) ** theta1 * abs(_ramp_jump(-s, d)) ** theta2

    pts = sorted({-1.0, 0.0, 1.0, -c, c, -d, d})
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        if b - a > 1e-12:  # slivers from cos/sin ~ 1e-17 carry no mass
            val, _ = integrate.quad(g, a, b, limit=200, epsabs=1e-12, epsrel=1e-10)
            total += val
    return total


@lru_cache(maxsize=None)
def roof_c1(theta1: float, theta2: float) -> float:
    """Leading constant of the roof energy ``E_{eps,1+theta} = c1 - c2 eps``.

    ``c1`` is the integral over the signed distance ``s = x1 - x2`` of the
    z-averaged integrand of the unit-scale roof ``min(x1, x2)``.
    """
    return _angular_mean(lambda t: _roof_profile_integral(t, theta1, theta2))


def hat_energy(theta1: float, theta2: float) -> float:
    """Limit energy of the unit hat ``min(x1, x2, 1-x1, 1-x2)`` at ``p = 1 + theta``.

    Its four ridge segments have total diagonal parameter length 2, each unit
    of which carries the roof constant.
    """
    return 2.0 * roof_c1(theta1, theta2)


CORNER_ENERGY = 1.0 / (4.0 * math.pi)
