"""Verification suites: exact identities, norm oracles, inequality ensembles
and heat-flow smoothing.  Each suite returns a summary with a pass flag and
per-sample rows; every random draw is keyed by ``(seed, sample_id)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import cosine_mode, interior_band, random_field, random_velocity
from .heat import (
    Trajectory,
    caloric_norm,
    duhamel_solve,
    equivalence_check,
    heat_evolve,
    verify_heat_smoothing,
)
from .littlewood_paley import besov_norm, build_partition
from .navier_stokes import transport_rewrite_residual
from .paraproduct import LemmaParams, bony_residual, lemma21_ratios, product_ratio
from .spectral import (
    ScalarField,
    VelocityField,
    leray_project,
    make_lattice,
)

__all__ = [
    "SuiteResult",
    "SUITES",
    "run_suite",
    "bony_suite",
    "identities_suite",
    "norms_suite",
    "lemmas_suite",
    "heat_suite",
]

BONY_TOL = 1e-8
HEAT_MODE_TOL = 1e-12
LERAY_TOL = 1e-12
REWRITE_TOL = 1e-9
CALORIC_TOL = 5e-3
B0_TOL = 1e-6
EQUIV_BRACKET = (0.1, 10.0)
STABILITY_FACTOR = 2.0
SMOOTHING_TOL = 1.1


@dataclass
class SuiteResult:
    name: str
    summary: dict
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed", False))


def bony_suite(n: int = 64, samples: int = 100, seed: int = 0) -> SuiteResult:
    """Bony reconstruction residual on random pairs band-limited so that the
    factors and their product stay inside the usable block range."""
    lat = make_lattice(n)
    P = build_partition(lat)
    kmin, kmax = interior_band(lat)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for i in range(samples):
            f = random_field(lat, seed, 2 * i, kmin=kmin, kmax=kmax)
            g = random_field(lat, seed, 2 * i + 1, kmin=kmin, kmax=kmax)
            rows.append({"sample_id": i, "residual": bony_residual(f, g, P)})
    worst = max(r["residual"] for r in rows) if rows else 0.0
    summary = {"n": n, "samples": samples, "seed": seed, "band": [kmin, kmax],
               "max_residual": worst, "tolerance": BONY_TOL, "passed": worst <= BONY_TOL}
    return SuiteResult("bony", summary, rows)


def identities_suite(n: int = 32, samples: int = 100, seed: int = 0) -> SuiteResult:
    """Heat multiplier on a single mode, Leray idempotence and the transport
    rewrite, with a compressible negative control for the rewrite."""
    lat = make_lattice(n)
    k = np.array([3.0, 1.0, 2.0])
    f = cosine_mode(lat, tuple(int(m) for m in k))
    t = 0.05
    exact = math.exp(-float(k @ k) * t) * f.physical
    heat_err = float(np.abs(heat_evolve(f, t).physical - exact).max())

    rows = []
    for i in range(samples):
        raw = VelocityField.from_components([random_field(lat, seed, 3 * i + a) for a in range(3)])
        once = leray_project(raw)
        twice = leray_project(once)
        scale = float(np.abs(once.spectral).max())
        idem = float(np.abs(twice.spectral - once.spectral).max()) / scale if scale > 0 else 0.0
        U = random_velocity(lat, seed, samples + i)
        rows.append({"sample_id": i, "leray_idempotence": idem,
                     "rewrite_residual": transport_rewrite_residual(U)})
    x1 = lat.grid()[0]
    control = VelocityField.from_components([
        ScalarField.from_physical(lat, np.sin(2 * np.pi / lat.lengths[0] * x1)),
        ScalarField.zeros(lat), ScalarField.zeros(lat),
    ])
    control_res = transport_rewrite_residual(control)
    leray_worst = max(r["leray_idempotence"] for r in rows)
    rewrite_worst = max(r["rewrite_residual"] for r in rows)
    summary = {
        "n": n, "samples": samples, "seed": seed,
        "heat_mode_error": heat_err, "heat_tolerance": HEAT_MODE_TOL,
        "leray_max": leray_worst, "leray_tolerance": LERAY_TOL,
        "rewrite_max": rewrite_worst, "rewrite_tolerance": REWRITE_TOL,
        "negative_control_residual": control_res,
        "passed": (heat_err <= HEAT_MODE_TOL and leray_worst <= LERAY_TOL
                   and rewrite_worst <= REWRITE_TOL and control_res > 1e-3),
    }
    return SuiteResult("identities", summary, rows)


def norms_suite(n: int = 64, samples: int = 16, seed: int = 0) -> SuiteResult:
    """Single-mode oracles and dyadic/caloric equivalence on a random ensemble."""
    lat = make_lattice(32)
    f = cosine_mode(lat, (4, 0, 0))
    b0 = besov_norm(f, (0.0, np.inf, 1))
    mode = cosine_mode(lat, (3, 0, 4))
    k2 = 25.0
    sup_exact = (2 * math.e * k2) ** -0.5
    l2_exact = (2 * k2) ** -0.5
    sup_err = abs(caloric_norm(mode, np.inf) / sup_exact - 1)
    l2_err = abs(caloric_norm(mode, 2) / l2_exact - 1)

    lat = make_lattice(n)
    rows = []
    for i in range(samples):
        rep = equivalence_check(random_field(lat, seed, i), bracket=EQUIV_BRACKET)
        rows.append({"sample_id": i, **{k: v for k, v in rep.items() if k != "bracket"}})
    ratios = [r[key] for r in rows for key in ("ratio_2", "ratio_inf")]
    summary = {
        "b0_inf_1_cos4": b0, "b0_tolerance": B0_TOL,
        "caloric_inf_rel_error": sup_err, "caloric_2_rel_error": l2_err,
        "caloric_tolerance": CALORIC_TOL,
        "n": n, "samples": samples, "seed": seed,
        "ratio_min": min(ratios), "ratio_max": max(ratios), "bracket": list(EQUIV_BRACKET),
        "passed": (abs(b0 - 1) <= B0_TOL and sup_err <= CALORIC_TOL and l2_err <= CALORIC_TOL
                   and all(EQUIV_BRACKET[0] <= x <= EQUIV_BRACKET[1] for x in ratios)),
    }
    return SuiteResult("norms", summary, rows)


LEMMA_CASES = {
    "paraproduct_lp": lambda f, g, P, i: lemma21_ratios(f, g, 1, LemmaParams(), P, i),
    "paraproduct_negative": lambda f, g, P, i: lemma21_ratios(f, g, 2, LemmaParams(), P, i),
    "remainder": lambda f, g, P, i: lemma21_ratios(f, g, 3, LemmaParams(), P, i),
    "product": lambda f, g, P, i: product_ratio(f, g, -0.25, 0.75, 4.0, P, i),
}


def lemmas_suite(n: int = 32, samples: int = 100, seed: int = 0) -> SuiteResult:
    """Ratio ensembles for the paraproduct, remainder and product estimates at
    ``n`` and ``2n``; the max ratio must agree within a factor of 2."""
    rows = []
    worst = {}
    for size in (n, 2 * n):
        lat = make_lattice(size)
        P = build_partition(lat)
        for i in range(samples):
            f = random_field(lat, seed, 2 * i)
            g = random_field(lat, seed, 2 * i + 1)
            for name, case in LEMMA_CASES.items():
                rep = case(f, g, P, i)
                rows.append({"n": size, "case": name, "sample_id": i, "lhs": rep.lhs,
                             "rhs_factor": rep.rhs_factor, "ratio": rep.ratio})
                key = (name, size)
                worst[key] = max(worst.get(key, 0.0), rep.ratio)
    cases = {}
    ok = True
    for name in LEMMA_CASES:
        a, b = worst[(name, n)], worst[(name, 2 * n)]
        factor = max(a, b) / min(a, b) if min(a, b) > 0 else math.inf
        stable = factor <= STABILITY_FACTOR
        ok &= stable
        cases[name] = {f"max_ratio_n{n}": a, f"max_ratio_n{2 * n}": b,
                       "factor": factor, "stable": stable}
    summary = {"n": [n, 2 * n], "samples": samples, "seed": seed, "cases": cases,
               "stability_factor": STABILITY_FACTOR, "passed": ok}
    return SuiteResult("lemmas", summary, rows)


def heat_suite(n: int = 32, samples: int = 20, seed: int = 0) -> SuiteResult:
    """Maximal-regularity ratio with zero forcing (must not exceed 1.1) and a
    closed-form forced single mode."""
    lat = make_lattice(n)
    P = build_partition(lat)
    rows = []
    for i in range(samples):
        u0 = random_field(lat, seed, i)
        rep = verify_heat_smoothing(u0, None, -0.5, 2.0, 1.0, 1.0, np.inf, T=1.0, P=P)
        rows.append({"sample_id": i, "lhs": rep.lhs, "rhs_factor": rep.rhs_factor, "ratio": rep.ratio})
    worst = max(r["ratio"] for r in rows)

    # u0 = 0, G = cos(k.x) constant: u(T) = (1 - exp(-|k|^2 T)) / |k|^2 * G.
    mode = (2, 1, 0)
    k2 = float(sum(m * m for m in mode))
    G = cosine_mode(lat, mode)
    T = 0.5
    times = np.linspace(0.0, T, 33)
    forcing = Trajectory.constant(G, times)
    traj = duhamel_solve(ScalarField.zeros(lat), forcing, times)
    exact = (1 - math.exp(-k2 * T)) / k2 * G.physical
    forced_err = float(np.abs(traj.snapshots[-1].physical - exact).max())
    forced = verify_heat_smoothing(ScalarField.zeros(lat), forcing, -0.5, 2.0, 1.0, 1.0, np.inf, P=P)
    summary = {
        "n": n, "samples": samples, "seed": seed,
        "zero_forcing_max_ratio": worst, "tolerance": SMOOTHING_TOL,
        "forced_mode_error": forced_err, "forced_ratio": forced.ratio,
        "passed": worst <= SMOOTHING_TOL and forced_err <= 1e-12 and math.isfinite(forced.ratio),
    }
    return SuiteResult("heat", summary, rows)


SUITES = {
    "bony": bony_suite,
    "identities": identities_suite,
    "norms": norms_suite,
    "lemmas": lemmas_suite,
    "heat": heat_suite,
}


def run_suite(name: str, **kwargs) -> SuiteResult:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](**{k: v for k, v in kwargs.items() if v is not None})
