"""Splitting ``u = u1(x1) + u2(x2) + w(x)`` and distances to separable fields."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .energy import critical_p, energy_sweep
from .grid import EnergyParams, GridFunction, Kernel


@dataclass(frozen=True)
class FactorFunction:
    """Samples of a function of one factor's variables only."""

    box: tuple[tuple[float, float], ...]
    values: np.ndarray

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(b - a) / m for (a, b), m in zip(self.box, self.values.shape)])

    @property
    def cellvol(self) -> float:
        return float(np.prod(self.spacing))

    def to_csv(self) -> str:
        lines = [",".join([f"i{k}" for k in range(self.values.ndim)] + ["value"])]
        for idx in np.ndindex(*self.values.shape):
            lines.append(",".join([str(i) for i in idx] + [repr(float(self.values[idx]))]))
        return "\n".join(lines) + "\n"


def _factor_axes(u: GridFunction):
    n1 = u.domain.n1
    return tuple(range(n1)), tuple(range(n1, u.domain.ndim))


def _expand(u: GridFunction, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    n1, n2 = u.domain.n1, u.domain.n2
    return f1.reshape(f1.shape + (1,) * n2) + f2.reshape((1,) * n1 + f2.shape)


@dataclass
class Decomposition:
    u1: FactorFunction
    u2: FactorFunction
    w: GridFunction
    norms: dict

    def to_dict(self) -> dict:
        return {"norms": self.norms,
                "u1": self.u1.values.tolist(), "u2": self.u2.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def lstar_exponent(u: GridFunction) -> float:
    """``n/(n-1)`` for ``n = max(n1, n2)``; infinite when both factors are 1-D."""
    n = max(u.domain.n1, u.domain.n2)
    return math.inf if n == 1 else n / (n - 1)


def lp_norm(u: GridFunction, q: float) -> float:
    if math.isinf(q):
        return u.sup_bound
    return math.fsum((np.abs(u.values) ** q).ravel().tolist()) ** (1 / q) * u.cellvol ** (1 / q)


def bv_norm(v: GridFunction | FactorFunction) -> float:
    """Anisotropic discrete total variation ``sum_axes sum |forward diff| * cellvol / h``."""
    h = v.spacing
    parts = []
    for k in range(v.values.ndim):
        parts.append(math.fsum(np.abs(np.diff(v.values, axis=k)).ravel().tolist())
                     * v.cellvol / h[k])
    return math.fsum(parts)


def split(u: GridFunction) -> Decomposition:
    """Factor-wise averaging split.

    ``u1`` is the mean over the second factor minus half the global mean,
    ``u2`` symmetrically, and ``w`` the remainder; every slice average of
    ``w`` vanishes.
    """
    ax1, ax2 = _factor_axes(u)
    m = float(np.mean(u.values))
    mean2 = u.values.mean(axis=ax2)  # function of x1
    mean1 = u.values.mean(axis=ax1)  # function of x2
    f1 = mean2 - 0.5 * m
    f2 = mean1 - 0.5 * m
    w = u.with_values(u.values - _expand(u, f1, f2))
    d = u.domain
    norms = {"sup_w": w.sup_bound, "tv_w": bv_norm(w), "l_star_w": lp_norm(w, lstar_exponent(u)),
             "sup_u1": float(np.max(np.abs(f1))), "sup_u2": float(np.max(np.abs(f2)))}
    return Decomposition(FactorFunction(d.box1, f1), FactorFunction(d.box2, f2), w, norms)


def reconstruct(u: GridFunction, dec: Decomposition) -> np.ndarray:
    return _expand(u, dec.u1.values, dec.u2.values) + dec.w.values


def measure_primitive_2d(u: GridFunction) -> GridFunction:
    """Cumulative double sum of the unit-step mixed differences from the
    bottom-left cell: the grid analogue of ``mu((0, x1] x (0, x2])``."""
    if u.domain.n1 != 1 or u.domain.n2 != 1:
        raise ValueError("measure primitive is defined for n1 = n2 = 1 only")
    v = u.values
    d = v[1:, 1:] - v[1:, :-1] - v[:-1, 1:] + v[:-1, :-1]
    w = np.zeros_like(v)
    w[1:, 1:] = np.cumsum(np.cumsum(d, axis=0), axis=1)
    return u.with_values(w)


@dataclass
class SeparableCandidate:
    which_factor: int
    profile: FactorFunction
    constant_shift: float
    distance_sup: float
    distance_tv: float
    distance_lstar: float
    governing: str

    @property
    def distance(self) -> float:
        if self.governing == "sup+tv":
            return self.distance_sup + self.distance_tv
        return self.distance_lstar

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"] = self.profile.values.tolist()
        d["distance"] = self.distance
        return d


def _candidate(u: GridFunction, which: int, dec: Decomposition, governing: str) -> SeparableCandidate:
    n1, n2 = u.domain.n1, u.domain.n2
    if which == 1:
        prof, shift = dec.u1, float(np.mean(dec.u2.values))
        field = prof.values.reshape(prof.values.shape + (1,) * n2)
    else:
        prof, shift = dec.u2, float(np.mean(dec.u1.values))
        field = prof.values.reshape((1,) * n1 + prof.values.shape)
    diff = u.with_values(u.values - (field + shift))
    return SeparableCandidate(which, prof, shift, diff.sup_bound, bv_norm(diff),
                              lp_norm(diff, lstar_exponent(u)), governing)


def nearest_separable(u: GridFunction, params: EnergyParams | None = None) -> SeparableCandidate:
    """Better of the two averaged separable candidates.

    The comparison uses ``sup + TV`` when both factors are one-dimensional
    and the ``L^{n/(n-1)}`` norm otherwise. Ties go to the first factor.
    """
    dec = split(u)
    governing = "sup+tv" if u.domain.n1 == u.domain.n2 == 1 else "lstar"
    c1 = _candidate(u, 1, dec, governing)
    c2 = _candidate(u, 2, dec, governing)
    return c2 if c2.distance < c1.distance else c1


def distance_report(u: GridFunction, params: EnergyParams, eps_list: Sequence[float],
                    kernel: Kernel | None = None) -> dict:
    """Energy estimate, split norms and candidate distances in one record."""
    t1, t2 = params.theta1, params.theta2
    if t1 + t2 > 1:
        raise ValueError(f"theta1 + theta2 = {t1 + t2:g} > 1: distance control needs theta <= 1")
    scale = 1.0 / u.sup_bound if u.sup_bound > 1 else 1.0
    us = u * scale
    crit = EnergyParams(t1, t2, critical_p(t1, t2))
    rep = energy_sweep(us, crit, eps_list, kernel)
    e = rep.liminf_estimate
    cand = nearest_separable(us)
    dec = split(us)
    dist = cand.distance
    if dist <= 1e-12 * (1 + us.sup_bound):
        dist = 0.0  # rounding residue of the slice averages
    denom = e + math.sqrt(e)
    if dist == 0:
        ratio = 0.0
    elif denom == 0:
        ratio = math.inf
    else:
        ratio = dist / denom
    return {
        "scale": scale,
        "params": {"theta1": t1, "theta2": t2, "p": crit.p},
        "eps_list": rep.eps_list,
        "energy_values": rep.values,
        "energy": e,
        "decomposition": dec.norms,
        "candidate": {k: v for k, v in cand.to_dict().items() if k != "profile"},
        "distance": dist,
        "ratio": ratio,
    }
