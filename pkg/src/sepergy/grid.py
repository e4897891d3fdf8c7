"""Product domains, cell-centred grid functions and radial lattice kernels.

Every numerical routine in the package works on a :class:`GridFunction`:
samples of a scalar field at the cell centres of a uniform grid laid over
a box ``Omega = Omega_1 x Omega_2``. The first ``n1`` array axes belong to
the first factor, the remaining ``n2`` axes to the second.
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

PROFILES = ("annulus", "cone", "plateau")


@dataclass(frozen=True)
class ProductDomain:
    """Axis-aligned box split into two factors, optionally periodic."""

    box1: tuple[tuple[float, float], ...]
    box2: tuple[tuple[float, float], ...]
    periodic: bool = False

    def __post_init__(self):
        box1 = tuple((float(a), float(b)) for a, b in self.box1)
        box2 = tuple((float(a), float(b)) for a, b in self.box2)
        if not box1 or not box2:
            raise ValueError("both factors need at least one axis")
        for a, b in box1 + box2:
            if not (np.isfinite(a) and np.isfinite(b) and b > a):
                raise ValueError(f"interval ({a}, {b}) must have positive length")
        object.__setattr__(self, "box1", box1)
        object.__setattr__(self, "box2", box2)

    @classmethod
    def square(cls, lo: float = 0.0, hi: float = 1.0, periodic: bool = False) -> "ProductDomain":
        return cls(((lo, hi),), ((lo, hi),), periodic)

    @property
    def n1(self) -> int:
        return len(self.box1)

    @property
    def n2(self) -> int:
        return len(self.box2)

    @property
    def ndim(self) -> int:
        return self.n1 + self.n2

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return self.box1 + self.box2

    @property
    def lengths(self) -> np.ndarray:
        return np.array([b - a for a, b in self.bounds])

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def transposed(self) -> "ProductDomain":
        return ProductDomain(self.box2, self.box1, self.periodic)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GridFunction:
    """Cell-centre samples of ``u: Omega -> R``.

    ``values`` has shape ``resolution``; it is stored read-only so that a
    GridFunction can be shared freely between threads.
    """

    domain: ProductDomain
    values: np.ndarray
    sup_bound: float = field(init=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != self.domain.ndim:
            raise ValueError(
                f"values have {values.ndim} axes, domain has {self.domain.ndim}")
        if min(values.shape) < 1:
            raise ValueError("every axis needs at least one cell")
        bad = np.argwhere(~np.isfinite(values))
        if len(bad):
            raise ValueError(f"non-finite sample at cell {tuple(int(i) for i in bad[0])}")
        object.__setattr__(self, "values", _freeze(values))
        sup = float(np.max(np.abs(values))) if values.size else 0.0
        object.__setattr__(self, "sup_bound", sup)

    @property
    def resolution(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return self.domain.lengths / np.array(self.resolution)

    @property
    def cellvol(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self, axis: int) -> np.ndarray:
        a, _ = self.domain.bounds[axis]
        h = self.spacing[axis]
        return a + (np.arange(self.resolution[axis]) + 0.5) * h

    def point(self, index: Sequence[int]) -> np.ndarray:
        return np.array([self.centers(k)[i] for k, i in enumerate(index)])

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.domain, values)

    # arithmetic used by invariance checks and the decomposition
    def __add__(self, other):
        if isinstance(other, GridFunction):
            other = other.values
        return self.with_values(self.values + other)

    def __mul__(self, c: float):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def map(self, f: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return self.with_values(f(self.values))

    def transposed(self) -> "GridFunction":
        """Swap the roles of the two factors."""
        n1 = self.domain.n1
        order = list(range(n1, self.domain.ndim)) + list(range(n1))
        return GridFunction(self.domain.transposed(), np.transpose(self.values, order))


def cell_centers(domain: ProductDomain, resolution: Sequence[int]) -> np.ndarray:
    """Array of shape ``(*resolution, n)`` holding every cell centre."""
    axes = []
    for (a, b), m in zip(domain.bounds, resolution):
        h = (b - a) / m
        axes.append(a + (np.arange(m) + 0.5) * h)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def sample(domain: ProductDomain, resolution: Sequence[int] | int,
           f: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    """Evaluate ``f`` at every cell centre.

    ``f`` receives an array of points with the coordinates on the last axis
    and must return the field values with the leading shape.
    """
    if np.isscalar(resolution):
        resolution = (int(resolution),) * domain.ndim
    resolution = tuple(int(m) for m in resolution)
    if len(resolution) != domain.ndim:
        raise ValueError(f"expected {domain.ndim} resolutions, got {len(resolution)}")
    if min(resolution) < 1:
        raise ValueError("resolution must be positive on every axis")
    x = cell_centers(domain, resolution)
    values = np.broadcast_to(np.asarray(f(x), dtype=np.float64), resolution)
    return GridFunction(domain, np.array(values))


def shrunken_index_set(domain: ProductDomain, resolution: Sequence[int],
                       eps: float) -> tuple[slice, ...] | None:
    """Index block of the cell centres lying in the eps-shrunken domain.

    Returns one slice per axis, or ``None`` when no centre survives.
    Periodic domains are never shrunk.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if domain.periodic:
        return tuple(slice(0, m) for m in resolution)
    block = []
    for (a, b), m in zip(domain.bounds, resolution):
        h = (b - a) / m
        c = a + (np.arange(m) + 0.5) * h
        keep = np.flatnonzero(np.minimum(c - a, b - c) > eps)
        if keep.size == 0:
            return None
        block.append(slice(int(keep[0]), int(keep[-1]) + 1))
    return tuple(block)


@dataclass(frozen=True)
class LatticeOffsets:
    """Grid-lattice displacements with their normalised kernel weights."""

    steps: np.ndarray    # (m, n) integer multiples of the spacing
    z: np.ndarray        # (m, n) physical displacements
    norms: np.ndarray    # (m,) |z|
    weights: np.ndarray  # (m,) sum to one
    discrete_norm: float  # raw weight mass before normalisation


@dataclass(frozen=True)
class Kernel:
    """Radial profile supported in the closed unit ball."""

    profile: str = "annulus"

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown kernel profile {self.profile!r}; choose from {PROFILES}")

    def radial(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        tol = 1e-12  # lattice radii hitting 1/2 or 1 exactly must not flip on rounding
        if self.profile == "annulus":
            return ((r > 0.5 + tol) & (r <= 1.0 + tol)).astype(np.float64)
        if self.profile == "plateau":
            return (r <= 1.0 + tol).astype(np.float64)
        return np.clip(1.0 - r, 0.0, None)

    def offsets(self, eps: float, spacing: Sequence[float]) -> LatticeOffsets:
        return lattice_offsets(eps, spacing, self)


def _ball_steps(radius: float, spacing: np.ndarray) -> np.ndarray:
    reach = np.floor(radius / spacing + 1e-9).astype(int)
    ranges = [np.arange(-k, k + 1) for k in reach]
    steps = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, len(spacing))
    norms = np.sqrt(((steps * spacing) ** 2).sum(axis=1))
    return steps[norms <= radius * (1 + 1e-12)]


def lattice_offsets(eps: float, spacing: Sequence[float],
                    kernel: Kernel | None = None) -> LatticeOffsets:
    """Discretise ``rho_eps`` on the lattice ``h * Z^n`` restricted to ``|z| <= eps``.

    Weights are normalised so that they sum to one; offsets with zero
    weight are dropped.
    """
    kernel = kernel or Kernel()
    spacing = np.asarray(spacing, dtype=np.float64)
    if eps <= 0:
        raise ValueError("eps must be positive")
    steps = _ball_steps(eps, spacing)
    z = steps * spacing
    norms = np.sqrt((z ** 2).sum(axis=1))
    raw = kernel.radial(norms / eps)
    keep = raw > 0
    # the origin never carries mass in the energy; keep it only where the profile says so
    if not np.any(keep & (norms > 0)):
        raise ValueError(
            f"no lattice offset with positive weight inside |z| <= {eps:g}: "
            f"use a larger eps or a finer grid (spacing {spacing.max():g})")
    steps, z, norms, raw = steps[keep], z[keep], norms[keep], raw[keep]
    mass = float(raw.sum())
    return LatticeOffsets(steps, z, norms, raw / mass, mass)


@dataclass(frozen=True)
class EnergyParams:
    theta1: float
    theta2: float
    p: float

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0 and self.p > 0):
            raise ValueError("theta1, theta2 and p must all be positive")

    @property
    def theta(self) -> float:
        return self.theta1 + self.theta2


# --- serialisation ---------------------------------------------------------

def grid_to_bytes(u: GridFunction) -> bytes:
    """Flat little-endian layout.

    Header: int64 n1, int64 n2, int64 periodic, int64 resolution[n],
    float64 bounds[n][2]. Payload: row-major float64 samples.
    """
    d = u.domain
    head = struct.pack("<3q", d.n1, d.n2, int(d.periodic))
    head += struct.pack(f"<{d.ndim}q", *u.resolution)
    head += struct.pack(f"<{2 * d.ndim}d", *[v for ab in d.bounds for v in ab])
    return head + u.values.astype("<f8").tobytes(order="C")


def grid_from_bytes(data: bytes) -> GridFunction:
    try:
        n1, n2, periodic = struct.unpack_from("<3q", data, 0)
        n = n1 + n2
        if n1 < 1 or n2 < 1 or n > 16:
            raise ValueError(f"bad factor dimensions ({n1}, {n2})")
        off = 24
        res = struct.unpack_from(f"<{n}q", data, off)
        off += 8 * n
        flat = struct.unpack_from(f"<{2 * n}d", data, off)
        off += 16 * n
    except struct.error as exc:
        raise ValueError(f"truncated grid header: {exc}") from None
    count = int(np.prod(res))
    if len(data) - off != 8 * count:
        raise ValueError(f"payload holds {(len(data) - off) // 8} samples, header says {count}")
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(res).astype(np.float64)
    bounds = [(flat[2 * k], flat[2 * k + 1]) for k in range(n)]
    domain = ProductDomain(tuple(bounds[:n1]), tuple(bounds[n1:]), bool(periodic))
    return GridFunction(domain, values)


def grid_to_csv(u: GridFunction) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = u.domain.ndim
    w.writerow([f"i{k}" for k in range(n)] + ["value"])
    for idx in np.ndindex(*u.resolution):
        w.writerow(list(idx) + [repr(float(u.values[idx]))])
    return buf.getvalue()


def grid_from_csv(text: str, domain: ProductDomain) -> GridFunction:
    rows = list(csv.reader(io.StringIO(text)))
    n = domain.ndim
    if not rows or len(rows[0]) != n + 1:
        raise ValueError("CSV header must list one index column per axis plus 'value'")
    idx = np.array([[int(c) for c in r[:n]] for r in rows[1:]], dtype=int)
    res = tuple(int(m) + 1 for m in idx.max(axis=0))
    values = np.full(res, np.nan)
    values[tuple(idx.T)] = [float(r[n]) for r in rows[1:]]
    return GridFunction(domain, values)


def atomic_write(path: str | os.PathLike, data: bytes | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_grid(u: GridFunction, path: str | os.PathLike) -> None:
    path = Path(path)
    if path.suffix == ".csv":
        atomic_write(path, grid_to_csv(u))
    else:
        atomic_write(path, grid_to_bytes(u))


def load_grid(path: str | os.PathLike) -> GridFunction:
    return grid_from_bytes(Path(path).read_bytes())
