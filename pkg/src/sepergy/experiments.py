"""The verification suite: one experiment per acceptance criterion.

Every experiment returns a :class:`VerifyResult` whose JSON form depends only
on the configuration, so two runs give byte-identical reports.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import gallery, quadrature
from .decompose import distance_report, reconstruct, split
from .defect import defect_pairing, defect_total_variation
from .energy import (critical_exponent_estimate, energy_at_eps, energy_sweep,
                     monotonicity_check, summarize)
from .grid import EnergyParams, GridFunction, Kernel, sample


# --- eps schedules ---------------------------------------------------------

@dataclass(frozen=True)
class EpsSchedule:
    """``start:stop:geometric:count``, largest eps first after snapping."""

    start: float
    stop: float
    count: int
    kind: str = "geometric"

    @classmethod
    def parse(cls, text: str) -> "EpsSchedule":
        parts = text.split(":")
        if len(parts) != 4:
            raise ValueError(f"eps schedule {text!r} is not start:stop:geometric:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[3])
        except ValueError:
            raise ValueError(f"eps schedule {text!r} has non-numeric fields") from None
        if parts[2] != "geometric":
            raise ValueError(f"eps schedule kind {parts[2]!r} unsupported; use geometric")
        if not (0 < start < stop) or count < 2:
            raise ValueError(f"eps schedule {text!r} needs 0 < start < stop and count >= 2")
        return cls(start, stop, count)

    def requested(self) -> list[float]:
        return [float(e) for e in np.geomspace(self.stop, self.start, self.count)]

    def snap(self, spacing: float) -> dict:
        """Round each eps to the nearest positive multiple of ``spacing``;
        duplicates created by rounding are dropped."""
        steps = sorted({max(1, int(round(e / spacing))) for e in self.requested()}, reverse=True)
        return {"requested": self.requested(), "spacing": float(spacing),
                "steps": steps, "eps": [k * float(spacing) for k in steps]}


def _snap(start: float, stop: float, count: int, spacing: float) -> list[float]:
    return EpsSchedule(start, stop, count).snap(spacing)["eps"]


def _octave(spacing: float, m: int, count: int = 5) -> list[float]:
    """``count`` distinct grid multiples from ``2m`` down to ``m`` cells."""
    steps = sorted({int(round(x)) for x in np.geomspace(m, 2 * m, count)}, reverse=True)
    return [k * spacing for k in steps]


# --- results ---------------------------------------------------------------

@dataclass
class VerifyResult:
    id: str
    criterion: int
    passed: bool
    measured: dict
    tolerance: str
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True) + "\n"

    def line(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        meas = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.measured.items()))
        return f"{head} [{self.criterion:2d}] {self.id}: {meas} (tolerance: {self.tolerance})"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


# --- 1: corner -------------------------------------------------------------

def corner_energy() -> VerifyResult:
    u = gallery.corner().render(256)
    params = EnergyParams(0.5, 0.5, 2.0)
    eps = _snap(0.05, 0.4, 6, float(u.spacing[0]))
    rep = energy_sweep(u, params, eps, Kernel("annulus"))
    target = quadrature.CORNER_ENERGY
    spread = max(rep.values) / min(rep.values) - 1
    ext = rep.extrapolated
    err = math.inf if ext is None else _rel(ext, target)
    return VerifyResult("corner-energy", 1, err < 0.02 and spread < 0.03,
                        {"extrapolated": ext, "rel_error": err, "spread": spread},
                        "rel_error < 0.02, spread < 0.03",
                        {"target": target, "eps": rep.eps_list, "values": rep.values})


# --- 2: roof ---------------------------------------------------------------

def roof_affine() -> VerifyResult:
    u = gallery.roof().render(256)
    params = EnergyParams(0.5, 0.5, 2.0)
    eps = _snap(0.1, 0.3, 6, float(u.spacing[0]))
    rep = energy_sweep(u, params, eps)
    c1, c2 = rep.extrapolated, -rep.fit_slope
    oracle = quadrature.roof_c1(0.5, 0.5)
    err = math.inf if c1 is None else _rel(c1, oracle)
    ok = rep.fit_residual < 0.05 and c1 is not None and c1 > 0 and c2 > 0 and err < 0.05
    return VerifyResult("roof-affine", 2, ok,
                        {"c1": c1, "c2": c2, "residual": rep.fit_residual, "rel_error": err},
                        "residual < 0.05, c1 > 0, c2 > 0, |c1/oracle - 1| < 0.05",
                        {"oracle_c1": oracle, "eps": rep.eps_list, "values": rep.values})


# --- 3, 4: exact inequalities and zeros ------------------------------------

def _gallery_fields() -> list[tuple[str, GridFunction]]:
    out = []
    for name in sorted(gallery.REGISTRY):
        entry = gallery.get(name)
        lengths = entry.domain.lengths
        smallest = float(np.min(entry.info.get("l", 1.0)))
        cells = max(64, math.ceil(gallery.MIN_CELLS_PER_HAT / smallest))
        res = tuple(int(math.ceil(cells * L)) for L in lengths)
        out.append((name, entry.render(res)))
    return out


def monotonicity() -> VerifyResult:
    pairs = [(1.0, 2.0), (1.5, 2.0), (2.0, 3.0)]
    worst, checked, failures = -math.inf, 0, []
    for name, u in _gallery_fields():
        for eps in (0.1, 0.2):
            for p, q in pairs:
                lhs, rhs = monotonicity_check(u, 0.5, 0.5, p, q, eps)
                checked += 1
                if rhs > 0:
                    worst = max(worst, lhs / rhs)
                if not lhs <= rhs:
                    failures.append([name, eps, p, q, lhs, rhs])
    return VerifyResult("monotonicity", 3, not failures,
                        {"checked": checked, "violations": len(failures), "max_ratio": worst},
                        "lhs <= rhs exactly", {"failures": failures})


def separable_zero() -> VerifyResult:
    thetas = [(0.5, 0.5), (1.0, 1.0), (0.3, 1.2)]
    vals = []
    for name in ("separable_x1", "separable_x2"):
        u = gallery.get(name).render(64)
        for t1, t2 in thetas:
            for p in (1.0, 2.0, 3.0):
                for eps in (0.1, 0.2):
                    vals.append(energy_at_eps(u, EnergyParams(t1, t2, p), eps))
    worst = max(abs(v) for v in vals)
    return VerifyResult("separable-zero", 4, worst == 0.0,
                        {"evaluations": len(vals), "max_abs": worst}, "exactly 0", {})


# --- 5: hat scaling --------------------------------------------------------

def _hat_limit(h: float, l: float, theta: float, spacing: float) -> dict:
    t = theta / 2
    entry = gallery.hat(h, l, (0.0, 0.0), t, t)
    res = int(round(1.5 * l / spacing))
    u = entry.render(res)
    eps = [e * l for e in _octave(0.125 / 16, 16)]  # eps / l from 1/8 to 1/4
    eps = [round(e / spacing) * spacing for e in eps]
    rep = energy_sweep(u, EnergyParams(t, t, 1 + theta), eps)
    return {"extrapolated": rep.extrapolated, "eps": rep.eps_list, "values": rep.values}


def hat_scaling() -> VerifyResult:
    spacing = 1 / 1024
    measured, details, ok = {}, {}, True
    for theta in (1.0, 1.5):
        base = _hat_limit(1.0, 0.25, theta, spacing)
        tall = _hat_limit(2.0, 0.25, theta, spacing)
        wide = _hat_limit(1.0, 0.5, theta, spacing)
        r_h = tall["extrapolated"] / base["extrapolated"]
        r_l = wide["extrapolated"] / base["extrapolated"]
        e_h, e_l = _rel(r_h, 2 ** theta), _rel(r_l, 2 ** (1 - theta))
        ok = ok and e_h < 0.03 and e_l < 0.03
        measured[f"theta{theta:g}_height_ratio"] = r_h
        measured[f"theta{theta:g}_width_ratio"] = r_l
        details[f"theta{theta:g}"] = {"base": base, "tall": tall, "wide": wide,
                                      "height_err": e_h, "width_err": e_l}
    return VerifyResult("hat-scaling", 5, ok, measured,
                        "ratios within 3% of 2^theta and 2^(1-theta)", details)


# --- 6: critical exponents -------------------------------------------------

def critical_exponents() -> VerifyResult:
    cases = [("roof", gallery.roof(), 2.0, [1.5, 2.0, 2.5]),
             ("corner", gallery.corner(), 2.0, [1.5, 2.0, 2.5]),
             ("bilinear", gallery.bilinear(), 1.0, [0.5, 1.0, 1.5])]
    measured, details, ok = {}, {}, True
    for name, entry, expected, probes in cases:
        u = entry.render(256)
        est = critical_exponent_estimate(u, 0.5, 0.5, _octave(float(u.spacing[0]), 6), probes)
        measured[name] = est.p_star
        details[name] = {"expected": expected, **est.to_dict()}
        ok = ok and abs(est.p_star - expected) <= 0.15
    return VerifyResult("critical-exponents", 6, ok, measured, "|p* - expected| <= 0.15", details)


# --- 7: defect pairings ----------------------------------------------------

def defect_pairings() -> VerifyResult:
    corner = gallery.corner()
    u = corner.render(256)
    phi_f = gallery.bump((0.0, 0.0), 0.5)
    phi = sample(u.domain, u.resolution, phi_f)
    pc = float(defect_pairing(u, phi).value[0, 0])
    target_c = float(phi_f(np.zeros(2)))
    err_c = _rel(pc, target_c)

    roof = gallery.roof()
    v = roof.render(256)
    psi_f = gallery.bump((0.5, 0.5), 0.3)
    pr = float(defect_pairing(v, sample(v.domain, v.resolution, psi_f)).value[0, 0])
    target_r, _ = integrate.quad(lambda t: float(psi_f(np.array([t, t]))), 0.2, 0.8,
                                 epsabs=1e-13, epsrel=1e-12)
    err_r = _rel(pr, target_r)
    return VerifyResult("defect-pairing", 7, err_c < 0.03 and err_r < 0.03,
                        {"corner": pc, "corner_err": err_c, "roof": pr, "roof_err": err_r},
                        "each within 3% of its oracle",
                        {"corner_target": target_c, "roof_target": target_r})


# --- 8: hat array ----------------------------------------------------------

def hat_array_energy(K: int, theta: float = 1.5, cells_per_smallest: int = 128,
                     m: int = 16) -> dict:
    """Extrapolated energy of the ``K``-hat array, evaluated hat by hat on
    blocks of one global grid (exact because supports are further apart
    than the largest eps)."""
    entry = gallery.hat_array(K, theta)
    ell = entry.info["l"]
    res = tuple(int(round(L * cells_per_smallest / ell[-1])) for L in entry.domain.lengths)
    spacing = entry.domain.lengths[0] / res[0]
    eps = _octave(spacing, m)
    gap = (2 - math.sqrt(2)) * ell[-1]
    if eps[0] >= gap:
        raise ValueError("eps reaches the gap between hats; additivity would fail")
    pieces = gallery.hat_array_pieces(entry, res, 2 * eps[0] + 2 * spacing)
    params = EnergyParams(theta / 2, theta / 2, 1 + theta)
    values = [math.fsum(energy_at_eps(q, params, e) for q in pieces) for e in eps]
    rep = summarize(params, eps, values, Kernel())
    return {"K": K, "resolution": list(res), "eps": eps, "values": values,
            "extrapolated": rep.extrapolated, "oracle": entry.fact("energy").value,
            "height_sum": entry.fact("height_sum").value}


def hat_array_tv(K: int, theta: float = 1.5, cells_per_smallest: int = 16) -> float:
    entry = gallery.hat_array(K, theta)
    ell = entry.info["l"]
    res = tuple(int(round(L * cells_per_smallest / ell[-1])) for L in entry.domain.lengths)
    spacing = entry.domain.lengths[0] / res[0]
    pieces = gallery.hat_array_pieces(entry, res, 2 * spacing)
    return math.fsum(defect_total_variation(q) for q in pieces)


def hat_array() -> VerifyResult:
    measured, details, ok = {}, {}, True
    tv_ratios = []
    for K in (8, 16, 32):
        rec = hat_array_energy(K)
        err = math.inf if rec["extrapolated"] is None else _rel(rec["extrapolated"], rec["oracle"])
        tv = hat_array_tv(K)
        tv_ratios.append(tv / rec["height_sum"])
        ok = ok and err < 0.05
        measured[f"K{K}_energy_err"] = err
        details[f"K{K}"] = {**rec, "energy_err": err, "tv": tv}
    spread = max(tv_ratios) / min(tv_ratios) - 1
    measured["tv_over_height_sum"] = tv_ratios
    measured["tv_spread"] = spread
    return VerifyResult("hat-array", 8, ok and spread < 0.10, measured,
                        "energy within 5% of oracle; TV / sum h_k constant within 10%", details)


# --- 9: decomposition ------------------------------------------------------

def decomposition() -> VerifyResult:
    worst_rec = worst_avg = 0.0
    worst_w = worst_ul = 0.0
    for name, u in _gallery_fields():
        dec = split(u)
        scale = max(u.sup_bound, 1e-300)
        worst_rec = max(worst_rec, float(np.max(np.abs(reconstruct(u, dec) - u.values))) / scale)
        w = dec.w.values
        worst_avg = max(worst_avg, float(np.max(np.abs(w.mean(axis=0)))) / scale,
                        float(np.max(np.abs(w.mean(axis=1)))) / scale)
        worst_w = max(worst_w, dec.norms["sup_w"] / scale)
        worst_ul = max(worst_ul, dec.norms["sup_u1"] / scale, dec.norms["sup_u2"] / scale)
    ok = worst_rec <= 1e-12 and worst_avg <= 1e-12 and worst_w <= 4 and worst_ul <= 1.5
    return VerifyResult("decomposition", 9, ok,
                        {"reconstruction": worst_rec, "averages": worst_avg,
                         "sup_w_ratio": worst_w, "sup_ul_ratio": worst_ul},
                        "identities to 1e-12 relative; |w| <= 4|u|, |u_l| <= 1.5|u|", {})


# --- 10: distance control --------------------------------------------------

def distance_stability() -> VerifyResult:
    params = EnergyParams(0.5, 0.5, 2.0)
    cases = [("corner", gallery.corner(), 0.25)]
    cases += [(f"perturbed_{d:g}", gallery.perturbed(d), 0.125) for d in (0.01, 0.1)]
    measured, details, ok = {}, {}, True
    for name, entry, top in cases:
        ratios = []
        for n in (64, 128, 256):
            u = entry.render(n)
            eps = [top, top * 0.75, top * 0.5]
            ratios.append(distance_report(u, params, eps)["ratio"])
        spread = max(ratios) / min(ratios)
        ok = ok and spread < 2
        measured[name] = spread
        details[name] = {"ratios": ratios, "eps_top": top}
    return VerifyResult("distance-stability", 10, ok, measured,
                        "max/min ratio over grids 64,128,256 < 2", details)


# --- 11: C^1 formula -------------------------------------------------------

def bilinear_c1() -> VerifyResult:
    u = gallery.bilinear().render(512)
    params = EnergyParams(0.5, 0.5, 1.0)
    rep = energy_sweep(u, params, _snap(0.04, 0.12, 6, float(u.spacing[0])))
    target = quadrature.bilinear_limit(0.5, 0.5)
    err = math.inf if rep.extrapolated is None else _rel(rep.extrapolated, target)
    return VerifyResult("bilinear-c1", 11, err < 0.03,
                        {"extrapolated": rep.extrapolated, "rel_error": err},
                        "within 3% of K * 4/9",
                        {"target": target, "eps": rep.eps_list, "values": rep.values})


# --- 12: determinism -------------------------------------------------------

def digest(result: VerifyResult) -> str:
    return hashlib.sha256(result.to_json().encode()).hexdigest()


def determinism(previous: dict[str, str] | None = None) -> VerifyResult:
    """Re-run every other experiment and compare report digests, either
    against ``previous`` (id -> digest) or against a fresh first run."""
    ids = [k for k in EXPERIMENTS if k != "determinism"]
    if previous is None:
        previous = {k: digest(EXPERIMENTS[k]()) for k in ids}
    mismatched = [k for k in ids if digest(EXPERIMENTS[k]()) != previous.get(k)]
    return VerifyResult("determinism", 12, not mismatched,
                        {"compared": len(ids), "mismatched": len(mismatched)},
                        "byte-identical reports", {"mismatched": mismatched})


EXPERIMENTS: dict[str, Callable[[], VerifyResult]] = {
    "corner-energy": corner_energy,
    "roof-affine": roof_affine,
    "monotonicity": monotonicity,
    "separable-zero": separable_zero,
    "hat-scaling": hat_scaling,
    "critical-exponents": critical_exponents,
    "defect-pairing": defect_pairings,
    "hat-array": hat_array,
    "decomposition": decomposition,
    "distance-stability": distance_stability,
    "bilinear-c1": bilinear_c1,
    "determinism": determinism,
}


def run(exp_id: str) -> VerifyResult:
    if exp_id not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {exp_id!r}; choose from {', '.join(EXPERIMENTS)}")
    return EXPERIMENTS[exp_id]()
