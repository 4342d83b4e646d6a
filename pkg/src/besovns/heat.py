"""Heat semigroup, caloric norms, Chemin-Lerner norms and forced heat solves.

Caloric norms of a mean-zero field ``f``:

    r = inf :  sup_t  t^{1/2} ||e^{t Lap} f||_inf
    r = 2   :  ( int_0^inf ||e^{t Lap} f||_inf^2 dt )^{1/2}
    r = 1   :  sum_j 2^{-j} ||Delta_j f||_inf       (dyadic proxy)

The first two are sampled on a geometric time grid ``t_m = t_min rho^m``
with ``t_min = (8/3 2^{j_max})^{-2} / 10`` and ``rho = 1.1``.  Vector fields
are measured component by component and summed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import minimize_scalar

from .littlewood_paley import (
    OUTER,
    SUPPORT_TOL,
    BesovIndex,
    DyadicPartition,
    _partition,
    besov_norm,
    dyadic_spectra,
)
from .paraproduct import InequalityReport
from .spectral import ScalarField, VelocityField, _inverse, lp_norm

__all__ = [
    "QuadratureError",
    "TimeGrid",
    "HeatProfile",
    "heat_evolve",
    "heat_profile",
    "caloric_norm",
    "caloric_norms",
    "caloric_time_integral",
    "equivalence_check",
    "Trajectory",
    "chemin_lerner_norm",
    "duhamel_solve",
    "verify_heat_smoothing",
    "phi1",
    "phi2",
]

Field = Union[ScalarField, VelocityField]


class QuadratureError(RuntimeError):
    """The time integral did not converge within the allowed grid."""


def heat_evolve(f: Field, t: float) -> Field:
    """``e^{t Lap} f`` via the exact multiplier ``exp(-|k|^2 t)``."""
    if not (t >= 0):
        raise ValueError(f"time must be nonnegative, got {t!r}")
    if t == 0:
        return f
    return type(f)(f.lattice, f.spectral * np.exp(-t * f.lattice.k2))


# -- caloric norms --------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Geometric sampling ``t_min * rho^m``; ``t_min=None`` derives it from the
    partition.  Sampling stops once the remaining tail is below ``tail_tol``
    of the accumulated value."""

    rho: float = 1.1
    t_min: float | None = None
    tail_tol: float = 1e-3
    fail_tol: float = 1e-2
    max_points: int = 4000

    def start(self, P: DyadicPartition) -> float:
        if self.t_min is not None:
            return self.t_min
        return (OUTER * 2.0 ** P.j_max) ** -2 / 10.0

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.rho ** (1.0 / factor), self.t_min, self.tail_tol, self.fail_tol,
                        self.max_points * factor)


def _require_mean_zero(f: ScalarField):
    c = f.spectral
    peak = float(np.abs(c).max()) if c.size else 0.0
    if peak > 0 and abs(c[0, 0, 0]) > 1e-12 * peak:
        raise ValueError("caloric norms need a mean-zero field (the time integral diverges otherwise)")


@dataclass
class HeatProfile:
    """Samples of ``g(t) = ||e^{t Lap} f||_inf`` on a geometric grid.

    ``lam2`` is the smallest ``|k|^2`` carrying content, ``l1_tail`` the
    coefficient bound ``sum |c| e^{-|k|^2 t_M} / N`` at the last sample,
    and ``g0`` the value at ``t = 0``.
    """

    times: np.ndarray
    values: np.ndarray
    g0: float
    lam2: float
    l1_tail: float
    f: ScalarField = field(repr=False)

    def sup_weighted(self, refine: bool = True) -> float:
        """``sup_t t^{1/2} g(t)``, refined around the best sample."""
        if self.times.size == 0:
            return 0.0
        w = np.sqrt(self.times) * self.values
        m = int(np.argmax(w))
        best = float(w[m])
        if not refine:
            return best
        lo = math.log(self.times[max(m - 1, 0)])
        hi = math.log(self.times[min(m + 1, self.times.size - 1)])
        if hi <= lo:
            return best
        f = self.f

        def neg(logt):
            t = math.exp(logt)
            return -math.sqrt(t) * float(np.abs(_heat_values(f, t)).max())

        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-6})
        return max(best, -float(res.fun))

    def square_integral(self) -> tuple[float, float]:
        """``int_0^inf g^2 dt`` and the tail estimate included in it."""
        t, g = self.times, self.values
        if t.size == 0:
            return 0.0, 0.0
        head = 0.5 * t[0] * (self.g0 ** 2 + g[0] ** 2)
        # Trapezoid in log t: int g^2 dt = int g^2 t dlog t.
        body = float(trapezoid(g ** 2 * t, np.log(t))) if t.size > 1 else 0.0
        tail = _square_tail(g[-1], self.lam2)
        return head + body + tail, tail


def _square_tail(g_last: float, lam2: float) -> float:
    # ||e^{t Lap} f||_inf decays at least like exp(-lam2 (t - t_M)) at late times.
    return g_last ** 2 / (2.0 * lam2) if lam2 > 0 else math.inf


def _heat_values(f: ScalarField, t: float) -> np.ndarray:
    return _inverse(f.lattice, f.spectral * np.exp(-t * f.lattice.k2))


def _content(f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Magnitudes (with Hermitian multiplicity) and ``|k|^2`` of nonzero coefficients."""
    lat = f.lattice
    a = np.abs(f.spectral)
    peak = float(a.max()) if a.size else 0.0
    mask = (a > SUPPORT_TOL * peak) & (lat.k2 > 0)
    w = np.broadcast_to(lat.hermitian_weight, a.shape)[mask]
    return a[mask] * w / lat.size, lat.k2[mask]


def heat_profile(f: ScalarField, grid: TimeGrid | None = None,
                 P: DyadicPartition | None = None, need_sup: bool = True,
                 need_square: bool = True) -> HeatProfile:
    """Sample ``||e^{t Lap} f||_inf`` until both caloric quantities have converged."""
    _require_mean_zero(f)
    grid = grid or TimeGrid()
    P = _partition(f.lattice, P)
    coeff, k2 = _content(f)
    if coeff.size == 0:
        return HeatProfile(np.zeros(0), np.zeros(0), 0.0, 0.0, 0.0, f)
    lam2 = float(k2.min())
    g0 = float(np.abs(f.physical).max())
    t = grid.start(P)
    times, values = [], []
    sq_acc = 0.5 * t * g0 ** 2
    sup_acc = 0.0
    l1 = float(np.sum(coeff))
    for _ in range(grid.max_points):
        g = float(np.abs(_heat_values(f, t)).max())
        if times:
            sq_acc += 0.5 * (values[-1] ** 2 * times[-1] + g ** 2 * t) * math.log(t / times[-1])
        else:
            sq_acc += 0.5 * t * g ** 2
        times.append(t)
        values.append(g)
        sup_acc = max(sup_acc, math.sqrt(t) * g)
        l1 = float(np.sum(coeff * np.exp(-k2 * t)))
        sq_done = (not need_square) or _square_tail(g, lam2) < grid.tail_tol * sq_acc
        # For t >= 1/(2 lam2), t^{1/2} * l1(t) bounds every later weighted sample.
        sup_done = (not need_sup) or (t >= 0.5 / lam2 and math.sqrt(t) * l1 <= sup_acc)
        if sq_done and sup_done:
            break
        t *= grid.rho
    else:
        tail = _square_tail(values[-1], lam2)
        if need_square and tail > grid.fail_tol * sq_acc:
            raise QuadratureError(
                f"caloric time integral not converged after {grid.max_points} samples "
                f"(tail estimate {tail / sq_acc:.2%} of total)"
            )
    return HeatProfile(np.array(times), np.array(values), g0, lam2, l1, f)


def _components(f: Field) -> Sequence[ScalarField]:
    return f.components if isinstance(f, VelocityField) else (f,)


def caloric_norms(f: Field, rs: Sequence[float] = (1, 2, np.inf), grid: TimeGrid | None = None,
                  P: DyadicPartition | None = None) -> dict:
    """Caloric norms for several ``r`` sharing one time profile per component."""
    for r in rs:
        if r not in (1, 2, np.inf):
            raise ValueError(f"caloric norms are defined for r in {{1, 2, inf}}, got {r!r}")
    P = _partition(f.lattice, P)
    out = {r: 0.0 for r in rs}
    timed = [r for r in rs if r != 1]
    for c in _components(f):
        if c.is_zero():
            continue
        _require_mean_zero(c)
        if 1 in rs:
            out[1] += besov_norm(c, (-1.0, np.inf, 1.0), P)
        if timed:
            prof = heat_profile(c, grid, P, need_sup=np.inf in rs, need_square=2 in rs)
            if np.inf in rs:
                out[np.inf] += prof.sup_weighted()
            if 2 in rs:
                out[2] += math.sqrt(prof.square_integral()[0])
    return out


def caloric_norm(f: Field, r: float, grid: TimeGrid | None = None,
                 P: DyadicPartition | None = None) -> float:
    """Caloric ``B^{-1}_{inf,r}`` norm for ``r`` in ``{1, 2, inf}``."""
    return caloric_norms(f, (r,), grid, P)[r]


def caloric_time_integral(f: Field, grid: TimeGrid | None = None,
                          P: DyadicPartition | None = None) -> float:
    """``int_0^inf t^{-1/2} ||e^{t Lap} f||_inf dt``: a time-quadrature
    counterpart of the ``r = 1`` proxy (equals ``sqrt(pi)/|k|`` on a single mode).
    """
    grid = grid or TimeGrid()
    P = _partition(f.lattice, P)
    total = 0.0
    for c in _components(f):
        if c.is_zero():
            continue
        prof = heat_profile(c, grid, P, need_sup=False, need_square=True)
        t, g = prof.times, prof.values
        head = 2.0 * math.sqrt(t[0]) * 0.5 * (prof.g0 + g[0])
        body = float(trapezoid(np.sqrt(t) * g, np.log(t))) if t.size > 1 else 0.0
        # int_{t_M}^inf t^{-1/2} g e^{-lam2 (t - t_M)} dt <= t_M^{-1/2} g / lam2
        tail = g[-1] / (math.sqrt(t[-1]) * prof.lam2)
        total += head + body + tail
    return total


def equivalence_check(f: Field, P: DyadicPartition | None = None, grid: TimeGrid | None = None,
                      bracket: tuple[float, float] = (0.1, 10.0)) -> dict:
    """Dyadic ``B^{-1}_{inf,r}`` against caloric values for ``r = 2, inf``,
    plus the ``r = 1`` proxy against its time-quadrature counterpart."""
    P = _partition(f.lattice, P)
    cal = caloric_norms(f, (1, 2, np.inf), grid, P)
    report = {"bracket": list(bracket)}
    ok = True
    for r in (2, np.inf):
        dy = sum(besov_norm(c, (-1.0, np.inf, r), P) for c in _components(f))
        ratio = dy / cal[r] if cal[r] > 0 else (0.0 if dy == 0 else math.inf)
        key = "inf" if r == np.inf else str(r)
        report[f"dyadic_{key}"] = dy
        report[f"caloric_{key}"] = cal[r]
        report[f"ratio_{key}"] = ratio
        if dy > 0 or cal[r] > 0:
            ok &= bracket[0] <= ratio <= bracket[1]
    quad = caloric_time_integral(f, grid, P)
    report["proxy_1"] = cal[1]
    report["quadrature_1"] = quad
    report["ratio_1"] = cal[1] / quad if quad > 0 else (0.0 if cal[1] == 0 else math.inf)
    report["within_bracket"] = bool(ok)
    return report


# -- trajectories and Chemin-Lerner norms ---------------------------------------

@dataclass
class Trajectory:
    """Snapshots of a field at increasing times on one lattice."""

    times: np.ndarray
    snapshots: list

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.snapshots) != self.times.size:
            raise ValueError("times and snapshots must have matching length")
        if self.times.size == 0:
            raise ValueError("trajectory is empty")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        lat = self.snapshots[0].lattice
        if any(s.lattice != lat for s in self.snapshots):
            raise ValueError("all snapshots must share one lattice")

    @property
    def lattice(self):
        return self.snapshots[0].lattice

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @classmethod
    def constant(cls, f: Field, times) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        return cls(times, [f] * times.size)

    def monitor_csv(self, idx, path=None) -> str:
        """CSV of ``t``, the Besov norm ``idx`` and the ``L^2`` norm per snapshot."""
        idx = BesovIndex.coerce(idx)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "besov_norm", "l2_norm"])
        for t, s in zip(self.times, self.snapshots):
            comps = _components(s)
            w.writerow([repr(float(t)),
                        repr(sum(besov_norm(c, idx) for c in comps)),
                        repr(math.sqrt(sum(lp_norm(c, 2) ** 2 for c in comps)))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _block_series(traj: Trajectory, p: float, P: DyadicPartition, component: int | None):
    series: dict[int, np.ndarray] = {}
    for m, snap in enumerate(traj.snapshots):
        f = snap if component is None else snap[component]
        for j, v in dyadic_spectra(f, [p], P)[p].entries:
            series.setdefault(j, np.zeros(traj.times.size))[m] = v
    return series


def chemin_lerner_norm(traj: Trajectory, q: float, idx, P: DyadicPartition | None = None) -> float:
    """``|| 2^{js} ||Delta_j u||_{L^q_T L^p} ||_{l^r}``, trapezoid rule in time
    (``q = inf`` takes the max over snapshots)."""
    idx = BesovIndex.coerce(idx)
    if not (q >= 1):
        raise ValueError(f"time exponent q={q!r} must lie in [1, inf]")
    P = _partition(traj.lattice, P)
    comps = [None] if isinstance(traj.snapshots[0], ScalarField) else [0, 1, 2]
    total = 0.0
    for c in comps:
        series = _block_series(traj, idx.p, P, c)
        vals = []
        for j, s in sorted(series.items()):
            if q == np.inf:
                tn = float(s.max())
            elif traj.times.size == 1:
                tn = 0.0
            else:
                tn = float(trapezoid(s ** q, traj.times)) ** (1.0 / q)
            vals.append(2.0 ** (j * idx.s) * tn)
        if not vals:
            continue
        vals = np.array(vals)
        if idx.r == np.inf:
            total += float(vals.max())
        else:
            total += float(np.sum(vals ** idx.r) ** (1.0 / idx.r))
    return total


# -- forced heat equation ---------------------------------------------------------

def phi1(lam: np.ndarray, h: float) -> np.ndarray:
    """``int_0^h e^{-lam s} ds = (1 - e^{-lam h}) / lam`` (``h`` at ``lam = 0``)."""
    x = lam * h
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, -np.expm1(-x) / np.where(x > 0, x, 1.0), 1.0)
    return h * out


def phi2(lam: np.ndarray, h: float) -> np.ndarray:
    """``(lam h + e^{-lam h} - 1) / (lam^2 h)``: weight of a linear ramp in the
    forcing (``h/2`` at ``lam = 0``); a series is used for small ``lam h``."""
    x = np.asarray(lam * h, dtype=float)
    small = x < 1e-2
    series = 0.5 - x / 6 + x ** 2 / 24 - x ** 3 / 120 + x ** 4 / 720 - x ** 5 / 5040
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.where(small, 1.0, x)
        exact = (xs + np.expm1(-xs)) / xs ** 2
    return h * np.where(small, series, exact)


def duhamel_solve(u0: Field, forcing: Trajectory | None, times=None) -> Trajectory:
    """Solve ``u' - Lap u = G`` exactly per mode with ``G`` linear between its
    snapshots.  Output times are the forcing times, or ``times`` when
    ``forcing`` is None."""
    lat = u0.lattice
    if forcing is None:
        if times is None:
            raise ValueError("output times are required when there is no forcing")
        times = np.asarray(times, dtype=float)
        snaps = [heat_evolve(u0, float(t - times[0])) for t in times]
        return Trajectory(times, snaps)
    if forcing.lattice != lat:
        raise ValueError("forcing and initial data live on different lattices")
    times = forcing.times
    lam = lat.k2
    u = u0.spectral.copy()
    snaps = [u0]
    for n in range(times.size - 1):
        h = float(times[n + 1] - times[n])
        g0 = forcing.snapshots[n].spectral
        g1 = forcing.snapshots[n + 1].spectral
        u = np.exp(-lam * h) * u + phi1(lam, h) * g0 + phi2(lam, h) * (g1 - g0)
        snaps.append(type(u0)(lat, u.copy()))
    return Trajectory(times, snaps)


def verify_heat_smoothing(u0: Field, forcing: Trajectory | None, s: float, p: float, r: float,
                          q1: float, q2: float, T: float | None = None, times=None,
                          P: DyadicPartition | None = None) -> InequalityReport:
    """Both sides of the maximal-regularity estimate for ``u' - Lap u = G``:

        ||u||_{L~^{q2}_T(B^{s+2/q2}_{p,r})}  vs
        ||u0||_{B^s_{p,r}} + ||G||_{L~^{q1}_T(B^{s+2/q1-2}_{p,r})}
    """
    if not (1 <= q1 <= q2):
        raise ValueError("time exponents must satisfy 1 <= q1 <= q2 <= inf")
    if forcing is None and times is None:
        if T is None:
            raise ValueError("give a horizon T or output times when there is no forcing")
        times = np.linspace(0.0, T, 65)
    traj = duhamel_solve(u0, forcing, times)
    P = _partition(u0.lattice, P)
    inv = lambda q: 0.0 if q == np.inf else 1.0 / q
    lhs = chemin_lerner_norm(traj, q2, (s + 2 * inv(q2), p, r), P)
    init = sum(besov_norm(c, (s, p, r), P) for c in _components(u0))
    force = 0.0 if forcing is None else chemin_lerner_norm(forcing, q1, (s + 2 * inv(q1) - 2, p, r), P)
    params = {"s": s, "p": p, "r": r, "q1": q1, "q2": q2, "T": traj.horizon,
              "init_norm": init, "forcing_norm": force}
    return InequalityReport(lhs, init + force, None, params)
