"""Canonical fields with known energies and defect measures.

Each entry carries ``known_facts``: values or laws together with where
they come from. Provenance is one of ``analytic`` (closed form from the
construction), ``oracle:<name>`` (an independent quadrature in
:mod:`sepergy.quadrature`) or ``trivial``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import quadrature
from .grid import GridFunction, ProductDomain, sample

MIN_CELLS_PER_HAT = 8


@dataclass(frozen=True)
class Fact:
    id: str
    value: float | None
    law: str
    provenance: str


@dataclass
class GalleryEntry:
    id: str
    field: Callable[[np.ndarray], np.ndarray]
    domain: ProductDomain
    known_facts: list[Fact] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def __call__(self, *point: float) -> float:
        return float(self.field(np.array(point, dtype=float)))

    def fact(self, fid: str) -> Fact:
        for f in self.known_facts:
            if f.id == fid:
                return f
        raise KeyError(fid)

    def render(self, resolution) -> GridFunction:
        check_resolution(self, resolution)
        return sample(self.domain, resolution, self.field)


def check_resolution(entry: GalleryEntry, resolution) -> None:
    """Hats must span at least ``MIN_CELLS_PER_HAT`` cells along every axis."""
    if "l" not in entry.info:
        return
    lengths = entry.domain.lengths
    res = np.broadcast_to(np.asarray(resolution, dtype=int), lengths.shape)
    smallest = float(np.min(entry.info["l"]))
    cells = float(np.min(smallest * res / lengths))
    if cells < MIN_CELLS_PER_HAT:
        need = [math.ceil(MIN_CELLS_PER_HAT * L / smallest) for L in lengths]
        raise ValueError(f"resolution guard: smallest hat spans {cells:.1f} cells; "
                         f"minimal grid is {need[0]}x{need[1]}")


def _x(p):
    return p[..., 0], p[..., 1]


def roof(theta1: float = 0.5, theta2: float = 0.5) -> GalleryEntry:
    def f(p):
        a, b = _x(p)
        return np.minimum(a, b)

    theta = theta1 + theta2
    c1 = quadrature.roof_c1(theta1, theta2)
    return GalleryEntry("roof", f, ProductDomain.square(0.0, 1.0), [
        Fact("affine_energy", None, f"E_eps at p={1 + theta:g} equals c1 - c2*eps for eps < 1/3",
             "analytic: dilation of the unit-scale roof"),
        Fact("c1", c1, "limit energy at p = 1 + theta", "oracle:roof_c1"),
        Fact("p_star", 1 + theta, "critical exponent", "analytic"),
        Fact("defect", 1 / math.sqrt(2), "mu = density 1/sqrt(2) times length on the diagonal",
             "analytic"),
    ], {"theta1": theta1, "theta2": theta2})


def corner() -> GalleryEntry:
    def f(p):
        a, b = _x(p)
        return ((a > 0) & (b > 0)).astype(float)

    return GalleryEntry("corner", f, ProductDomain.square(-1.0, 1.0), [
        Fact("energy_p2", quadrature.CORNER_ENERGY, "E_eps at p=2 for every eps < 1",
             "analytic: quadrant area times angular mean of |cos sin|"),
        Fact("defect", 1.0, "mu = Dirac mass at the origin: <mu, phi> = phi(0)", "analytic"),
        Fact("p_star", 2.0, "critical exponent", "analytic"),
    ])


def unit_hat(p):
    a, b = _x(p)
    v = np.minimum(np.minimum(a, b), np.minimum(1 - a, 1 - b))
    return np.clip(v, 0.0, None)


def hat(h: float = 1.0, l: float = 1.0, anchor=(0.0, 0.0), theta1: float = 0.5,
        theta2: float = 0.5, domain: ProductDomain | None = None) -> GalleryEntry:
    """``h * w((x - anchor) / l)`` with ``w`` the unit hat on ``(0, 1)^2``."""
    ax, ay = anchor

    def f(p):
        a, b = _x(p)
        return h * unit_hat(np.stack([(a - ax) / l, (b - ay) / l], axis=-1))

    if domain is None:
        m = 0.25 * l
        domain = ProductDomain(((ax - m, ax + l + m),), ((ay - m, ay + l + m),))
    theta = theta1 + theta2
    e_w = quadrature.hat_energy(theta1, theta2)
    return GalleryEntry("hat", f, domain, [
        Fact("energy", h ** theta * l ** (1 - theta) * e_w,
             f"E at p={1 + theta:g} scales as h^theta l^(1-theta)", "oracle:hat_energy"),
        Fact("defect_tv", 2 * h, "|mu| = 2h, independent of l", "analytic"),
        Fact("bv", h * l, "anisotropic total variation h*l", "analytic"),
    ], {"h": h, "l": l, "anchor": (ax, ay)})


# --- hat array ------------------------------------------------------------

def hat_sequences(K: int, theta: float) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, K + 1, dtype=float)
    return k ** (-(4 * theta + 1) / (5 * theta)), k ** (-0.75) / 2


def hat_anchors(ell: np.ndarray) -> tuple[np.ndarray, float]:
    """Greedy column packing: hat k (side ``ell[k]``) reserves a ``2 ell[k]``
    slot; a column of width twice its first hat is filled bottom-up until the
    next slot would overflow height 1. Returns anchors and the total width."""
    anchors = np.zeros((len(ell), 2))
    col_x, y, col_w = 0.0, 0.0, 2 * ell[0]
    for k, lk in enumerate(ell):
        if k > 0 and y + 2 * lk > 1.0:
            col_x += col_w
            col_w, y = 2 * lk, 0.0
        anchors[k] = (col_x, y)
        y += 2 * lk
    return anchors, col_x + col_w


def check_sequence_conditions(theta: float, kmax: int = 10_000) -> dict:
    """Numerical check of the monotonicity, ratio and summability conditions
    the hat sizes must satisfy, over ``k <= kmax``."""
    h, l = hat_sequences(kmax, theta)
    ratio = h / l
    sum_exp = (4 * theta + 1) / 5 + 0.75 * (1 - theta)
    # tail of sum l_j^2 = sum j^{-3/2}/4, closed by an integral bound beyond kmax
    sq = l ** 2
    tail = np.cumsum(sq[::-1])[::-1] + 0.25 * 2 * kmax ** -0.5
    decay = h ** theta / l ** (1 + theta) * tail
    return {
        "h_decreasing": bool(np.all(np.diff(h) < 0)),
        "l_decreasing": bool(np.all(np.diff(l) < 0)),
        "ratio_decreasing": bool(np.all(np.diff(ratio) < 0)),
        "l_ratio_lower_bound": float(np.min(l[1:] / l[:-1])),
        "l1_at_most_half": bool(l[0] <= 0.5),
        "tail_term_decreasing": bool(np.all(np.diff(decay[100:]) < 0)),
        "tail_term_last": float(decay[-1]),
        "energy_series_exponent": sum_exp,
        "energy_series_summable": sum_exp > 1,
        "height_series_exponent": (4 * theta + 1) / (5 * theta),
        "height_series_divergent": (4 * theta + 1) / (5 * theta) <= 1,
    }


def hat_array(K: int, theta: float = 1.5, grid: int | None = None,
              margin: float = 0.05) -> GalleryEntry:
    """``K`` disjoint scaled hats packed in columns of height one.

    ``grid`` (cells per unit length) enables the resolution guard: the
    smallest hat must span at least ``MIN_CELLS_PER_HAT`` cells.
    """
    if not theta > 1:
        raise ValueError("hat_array needs theta > 1")
    if K < 1:
        raise ValueError("K must be a positive integer")
    hs, ls = hat_sequences(K, theta)
    anchors, width = hat_anchors(ls)
    if grid is not None and ls[-1] * grid < MIN_CELLS_PER_HAT:
        need = math.ceil(MIN_CELLS_PER_HAT / ls[-1])
        raise ValueError(f"resolution guard: smallest hat spans {ls[-1] * grid:.1f} cells; "
                         f"use at least {need} cells per unit length")

    def f(p):
        a, b = _x(p)
        out = np.zeros(np.broadcast(a, b).shape)
        for hk, lk, (ax, ay) in zip(hs, ls, anchors):
            inside = (a >= ax) & (a <= ax + lk) & (b >= ay) & (b <= ay + lk)
            if np.any(inside):
                loc = np.stack([(a[inside] - ax) / lk, (b[inside] - ay) / lk], axis=-1)
                out[inside] = hk * unit_hat(loc)
        return out

    domain = ProductDomain(((-margin, width + margin),), ((-margin, 1 + margin),))
    t1 = t2 = theta / 2
    e_w = quadrature.hat_energy(t1, t2)
    partial = float(np.sum(hs ** theta * ls ** (1 - theta)))
    return GalleryEntry("hat_array", f, domain, [
        Fact("energy", e_w * partial, "E(w) * sum_k h_k^theta l_k^(1-theta)", "oracle:hat_energy"),
        Fact("height_sum", float(np.sum(hs)), "defect TV proportional to sum_k h_k", "analytic"),
        Fact("gap", None, "supports at distance >= (2 - sqrt 2) l_k", "analytic"),
    ], {"K": K, "theta": theta, "h": hs.tolist(), "l": ls.tolist(),
        "anchors": anchors.tolist(), "width": width})


def hat_array_pieces(entry: GalleryEntry, resolution: tuple[int, int],
                     pad: float) -> list[GridFunction]:
    """Each hat of ``entry`` sampled on its own sub-block of the global grid.

    A block covers the hat support plus ``pad`` on every side, snapped
    outwards to whole cells, so its cell centres coincide with those of
    ``entry.render(resolution)``. When neighbouring supports are more than
    the interaction range apart the energy is additive over the pieces.
    """
    (a1, b1), (a2, b2) = entry.domain.bounds
    n = np.asarray(resolution)
    h = np.array([(b1 - a1) / n[0], (b2 - a2) / n[1]])
    lo = np.array([a1, a2])
    t = entry.info["theta"] / 2
    pieces = []
    for hk, lk, anc in zip(entry.info["h"], entry.info["l"], entry.info["anchors"]):
        anc = np.asarray(anc)
        i0 = np.maximum(np.floor((anc - pad - lo) / h).astype(int), 0)
        i1 = np.minimum(np.ceil((anc + lk + pad - lo) / h).astype(int), n)
        box = tuple((float(lo[k] + i0[k] * h[k]), float(lo[k] + i1[k] * h[k])) for k in range(2))
        sub = ProductDomain((box[0],), (box[1],))
        piece = hat(hk, lk, tuple(anc), t, t, domain=sub)
        pieces.append(piece.render(tuple(int(v) for v in i1 - i0)))
    return pieces


# --- separable and smooth fixtures ----------------------------------------

def separable(which: str = "x1") -> GalleryEntry:
    """``which`` in {'x1', 'x2', 'sum'} on the unit square."""
    if which == "x1":
        def f(p):
            return np.sin(2 * np.pi * p[..., 0]) + p[..., 0] ** 2
        facts = [Fact("energy", 0.0, "E_eps,p = 0 for all eps, p", "trivial")]
    elif which == "x2":
        def f(p):
            return np.cos(3 * p[..., 1]) - np.abs(p[..., 1] - 0.4)
        facts = [Fact("energy", 0.0, "E_eps,p = 0 for all eps, p", "trivial")]
    elif which == "sum":
        def f(p):
            return np.sin(2 * np.pi * p[..., 0]) + np.cos(3 * p[..., 1])
        facts = [Fact("defect", 0.0, "all mu pairings vanish", "trivial"),
                 Fact("energy_positive", None, "E_eps,p > 0", "oracle:direct evaluation")]
    else:
        raise ValueError(f"unknown separable variant {which!r}")
    return GalleryEntry(f"separable_{which}", f, ProductDomain.square(0.0, 1.0), facts,
                        {"which": which})


def bilinear(theta1: float = 0.5, theta2: float = 0.5) -> GalleryEntry:
    def f(p):
        return p[..., 0] * p[..., 1]

    return GalleryEntry("bilinear", f, ProductDomain.square(0.0, 1.0), [
        Fact("energy_theta", quadrature.bilinear_limit(theta1, theta2),
             "K / ((theta1 + 1)(theta2 + 1)) at p = theta", "oracle:kernel_factor"),
        Fact("p_star", theta1 + theta2, "critical exponent", "analytic"),
    ], {"theta1": theta1, "theta2": theta2})


def bump(center=(0.0, 0.0), radius: float = 0.5) -> Callable[[np.ndarray], np.ndarray]:
    """Smooth compactly supported test field with value 1 at ``center``."""
    cx, cy = center

    def f(p):
        s = ((p[..., 0] - cx) ** 2 + (p[..., 1] - cy) ** 2) / radius ** 2
        out = np.zeros(s.shape)
        inside = s < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out

    return f


def perturbed(delta: float = 1e-2, base: GalleryEntry | None = None,
              center=(0.5, 0.5), radius: float = 0.3) -> GalleryEntry:
    """Separable base plus ``delta`` times a product of 1-D bumps."""
    base = base or separable("x2")
    cx, cy = center

    def b1(t, c):
        s = ((t - c) / radius) ** 2
        return np.where(s < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)

    def f(p):
        return base.field(p) + delta * b1(p[..., 0], cx) * b1(p[..., 1], cy)

    return GalleryEntry("perturbed", f, base.domain, [
        Fact("distance", None, "distance to separable fields is O(delta)", "oracle:direct norms"),
    ], {"delta": delta, "base": base.id})


REGISTRY: dict[str, Callable[[], GalleryEntry]] = {
    "roof": roof,
    "corner": corner,
    "hat": hat,
    "hat_array": lambda: hat_array(8),
    "separable_x1": lambda: separable("x1"),
    "separable_x2": lambda: separable("x2"),
    "separable_sum": lambda: separable("sum"),
    "bilinear": bilinear,
    "perturbed": perturbed,
}


def get(entry_id: str) -> GalleryEntry:
    try:
        return REGISTRY[entry_id]()
    except KeyError:
        raise KeyError(f"unknown gallery id {entry_id!r}; known: {', '.join(sorted(REGISTRY))}") from None
