"""The mixed-derivative defect ``mu[u] = grad_1 grad_2 u`` on a grid.

``mu`` is never stored as a density: for a corner it is a Dirac mass and
for the roof a line measure, so only its pairings with test fields and a
total-variation proxy are computed, both from four-point mixed differences

    u(x + a + b) - u(x + a) - u(x + b) + u(x),   a = r e_i,  b = r f_j.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .energy import branch, critical_p, energy_sweep
from .grid import EnergyParams, GridFunction, Kernel, shrunken_index_set


def _steps(u: GridFunction, r: float, axis: int) -> int:
    h = u.spacing[axis]
    k = int(round(r / h))
    if k < 1 or abs(k * h - r) > 1e-9 * max(r, h):
        raise ValueError(f"step r={r:g} is not a positive multiple of the spacing {h:g} on axis {axis}")
    return k


def _in_domain(u: GridFunction, idx: Sequence[int]) -> bool:
    return all(0 <= i < m for i, m in zip(idx, u.resolution))


def _at(u: GridFunction, idx: Sequence[int]) -> float:
    if u.domain.periodic:
        idx = [i % m for i, m in zip(idx, u.resolution)]
    elif not _in_domain(u, idx):
        raise ValueError(f"shifted index {tuple(idx)} leaves the domain")
    return float(u.values[tuple(idx)])


def q_eval(u: GridFunction, x: Sequence[int], z: Sequence[int],
           theta1: float, theta2: float) -> float:
    """Symmetrised difference product at a grid point.

    ``x`` is a cell index and ``z`` an integer lattice step; its first
    ``n1`` entries form ``z1`` and the rest ``z2``.
    """
    x = np.asarray(x, dtype=int)
    z = np.asarray(z, dtype=int)
    n1 = u.domain.n1
    z1 = np.concatenate([z[:n1], np.zeros(u.domain.n2, dtype=int)])
    z2 = z - z1
    a, b, c, d = (_at(u, x), _at(u, x + z1), _at(u, x + z2), _at(u, x + z))
    f1 = abs(d - c) ** theta1 + abs(b - a) ** theta1
    f2 = abs(d - b) ** theta2 + abs(c - a) ** theta2
    return f1 * f2


def _mixed_difference(u: GridFunction, i: int, j: int, ki: int, kj: int) -> np.ndarray:
    """Four-point differences at every base point where they are defined."""
    v = u.values
    if u.domain.periodic:
        vi = np.roll(v, -ki, axis=i)
        vj = np.roll(v, -kj, axis=j)
        vij = np.roll(vi, -kj, axis=j)
        return vij - vi - vj + v

    def cut(si, sj):
        sl = [slice(None)] * v.ndim
        sl[i] = slice(si, v.shape[i] - ki + si)
        sl[j] = slice(sj, v.shape[j] - kj + sj)
        return v[tuple(sl)]

    return cut(ki, kj) - cut(ki, 0) - cut(0, kj) + cut(0, 0)


def _pairs(u: GridFunction):
    n1 = u.domain.n1
    return [(i, n1 + j) for i in range(n1) for j in range(u.domain.n2)]


def second_difference_functional(u: GridFunction, r: float, eps: float,
                                 directions: tuple[int, int] = (0, 0)) -> float:
    """``sum_{x in Omega^eps} |mixed difference| * cellvol / r**2`` for the
    direction pair ``(e_i, f_j)`` (``j`` counted inside the second factor)."""
    i, j = directions[0], u.domain.n1 + directions[1]
    if eps < 2 * r * (1 - 1e-12):
        raise ValueError("need eps >= 2r")
    block = shrunken_index_set(u.domain, u.resolution, eps)
    if block is None:
        raise ValueError(f"eps={eps:g} exceeds domain: shrunken domain is empty")
    ki, kj = _steps(u, r, i), _steps(u, r, j)
    d = _mixed_difference(u, i, j, ki, kj)
    return math.fsum(np.abs(d[block]).ravel().tolist()) * u.cellvol / r ** 2


def defect_total_variation(u: GridFunction, r: float | None = None) -> float:
    """Summed absolute mixed differences over every admissible base point
    and every direction pair; tends to ``|mu|(Omega)`` when ``mu`` is a
    finite measure and blows up otherwise.

    Without ``r`` the steps are one cell on each axis, which also works
    for unequal spacings.
    """
    h = u.spacing
    parts = []
    for i, j in _pairs(u):
        if r is None:
            ki = kj = 1
            area = h[i] * h[j]
        else:
            ki, kj = _steps(u, r, i), _steps(u, r, j)
            area = r ** 2
        d = _mixed_difference(u, i, j, ki, kj)
        parts.append(math.fsum(np.abs(d).ravel().tolist()) * u.cellvol / area)
    return math.fsum(parts)


@dataclass
class DefectPairing:
    value: np.ndarray
    step: float
    test_function: str = "phi"

    def to_dict(self) -> dict:
        n1, n2 = self.value.shape
        return {f"({i},{j})": {"value": float(self.value[i, j]), "r": self.step,
                               "test_function": self.test_function}
                for i in range(n1) for j in range(n2)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _check_support(u: GridFunction, phi: GridFunction, r: float) -> None:
    if u.domain.periodic:
        return
    margin = shrunken_index_set(u.domain, u.resolution, 2 * r)
    mask = np.ones(u.resolution, dtype=bool)
    if margin is not None:
        mask[margin] = False
    bad = np.argwhere(mask & (phi.values != 0))
    if len(bad):
        cells = ", ".join(str(tuple(int(k) for k in c)) for c in bad[:5])
        raise ValueError(f"test field must vanish within 2r of the boundary; "
                         f"{len(bad)} offending cells, e.g. {cells}")


def _shift_zero(v: np.ndarray, axis: int, k: int) -> np.ndarray:
    """``out[x] = v[x - k e_axis]`` with zero fill."""
    out = np.zeros_like(v)
    src = [slice(None)] * v.ndim
    dst = [slice(None)] * v.ndim
    src[axis] = slice(0, v.shape[axis] - k)
    dst[axis] = slice(k, None)
    out[tuple(dst)] = v[tuple(src)]
    return out


def defect_pairing(u: GridFunction, phi: GridFunction, r: float | None = None,
                   name: str = "phi") -> DefectPairing:
    """Discrete ``<mu_ij, phi>`` in adjoint form,

    ``sum_x u(x) [phi(x-a-b) - phi(x-a) - phi(x-b) + phi(x)] cellvol / r**2``.
    """
    if phi.resolution != u.resolution or phi.domain != u.domain:
        raise ValueError("test field must live on the same grid as u")
    r = float(u.spacing.max()) if r is None else r
    _check_support(u, phi, r)
    n1, n2 = u.domain.n1, u.domain.n2
    out = np.zeros((n1, n2))
    p = phi.values
    for i, j in _pairs(u):
        ki, kj = _steps(u, r, i), _steps(u, r, j)
        if u.domain.periodic:
            pi = np.roll(p, ki, axis=i)
            pj = np.roll(p, kj, axis=j)
            pij = np.roll(pi, kj, axis=j)
        else:
            pi = _shift_zero(p, i, ki)
            pj = _shift_zero(p, j, kj)
            pij = _shift_zero(pi, j, kj)
        adj = pij - pi - pj + p
        out[i, j - n1] = math.fsum((u.values * adj).ravel().tolist()) * u.cellvol / r ** 2
    return DefectPairing(out, r, name)


def defect_pairing_direct(u: GridFunction, phi: GridFunction, r: float | None = None) -> np.ndarray:
    """Same pairing written as ``sum_x phi(x) * mixed difference of u at x``."""
    r = float(u.spacing.max()) if r is None else r
    _check_support(u, phi, r)
    n1, n2 = u.domain.n1, u.domain.n2
    out = np.zeros((n1, n2))
    for i, j in _pairs(u):
        ki, kj = _steps(u, r, i), _steps(u, r, j)
        d = _mixed_difference(u, i, j, ki, kj)
        p = phi.values[tuple(slice(0, s) for s in d.shape)]
        out[i, j - n1] = math.fsum((p * d).ravel().tolist()) * u.cellvol / r ** 2
    return out


def sup_norm(phi: GridFunction) -> float:
    return phi.sup_bound


def factor_gradient_l1(phi: GridFunction, factor: int = 1) -> float:
    """Discrete ``||grad_l phi||_1`` by forward differences on the factor's axes."""
    n1 = phi.domain.n1
    axes = range(n1) if factor == 1 else range(n1, phi.domain.ndim)
    sq = np.zeros(phi.resolution)
    for k in axes:
        g = np.zeros(phi.resolution)
        sl = [slice(None)] * phi.domain.ndim
        sl[k] = slice(0, -1)
        g[tuple(sl)] = np.diff(phi.values, axis=k) / phi.spacing[k]
        sq += g ** 2
    return math.fsum(np.sqrt(sq).ravel().tolist()) * phi.cellvol


@dataclass
class PairingBound:
    name: str
    pairing: float
    bound: float
    ratio: float


@dataclass
class PropQuantReport:
    branch: str
    energy: float
    p: float
    entries: list[PairingBound] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def propquant_ratio(u: GridFunction, phi_list: Sequence[tuple[str, GridFunction]],
                    params: EnergyParams, eps_list: Sequence[float],
                    kernel: Kernel | None = None, r: float | None = None) -> PropQuantReport:
    """Pairing magnitudes against the matching right-hand side of the
    defect bounds, evaluated with the liminf proxy of the energy at
    ``p = critical_p``.

    The constants hidden in those bounds are unknown, so the ratios are
    diagnostics: only their stability under refinement is meaningful.
    """
    t1, t2 = params.theta1, params.theta2
    reg = branch(t1, t2)
    theta = t1 + t2
    if reg == "a" and theta < 1 and u.sup_bound > 1:
        raise ValueError(f"sup|u| = {u.sup_bound:g} > 1 with theta < 1: rescale u by 1/sup|u| first")
    crit = EnergyParams(t1, t2, critical_p(t1, t2))
    e = energy_sweep(u, crit, eps_list, kernel).liminf_estimate
    # the bound is stated for the factor with the smaller exponent
    lead = 1 if (reg != "c" and t1 <= 1) or (reg == "c" and t1 <= t2) else 2
    small, big = (t1, t2) if lead == 1 else (t2, t1)
    out = PropQuantReport(reg, e, crit.p)
    for name, phi in phi_list:
        pairing = float(np.max(np.abs(defect_pairing(u, phi, r, name).value)))
        sup = sup_norm(phi)
        if reg == "a":
            bound = e * sup
        else:
            g = factor_gradient_l1(phi, lead)
            if reg == "b":
                bound = e ** (1 / theta) * g ** (1 - 1 / theta) * sup ** (1 / theta)
            else:
                bound = e ** (1 / theta) * g ** (big / theta) * sup ** (small / theta)
        if pairing == 0:
            ratio = 0.0
        elif bound == 0:
            ratio = math.inf
        else:
            ratio = pairing / bound
        out.entries.append(PairingBound(name, pairing, bound, ratio))
    return out
