"""Smallness functional for initial data, rescaling, and epsilon sweeps.

For ``u0 = (u1, u2, u3)`` and ``3 < p < 6`` with ``s = -1 + 3/p``:

    lhs = ||u1+u2, u3||_{B^s_{p,1}} * ||u1, u2||_{B^s_{p,1}}
          * exp(C (||u0||^2_{B^{-1}_{inf,2}} + ||u0||_{B^{-1}_{inf,1}}))

Lists of components are normed by summing.  The ``r = 2`` factor is the
caloric time integral, the ``r = 1`` factor the dyadic sum, and the
reported ``largeness`` is the dyadic ``B^{-1}_{inf,inf}`` norm.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .data import Example1Params, example1_data, example2_data, example2_potential
from .heat import TimeGrid, caloric_norms
from .littlewood_paley import DyadicPartition, _partition, build_partition, dyadic_spectra
from .spectral import (
    ScalarField,
    VelocityField,
    divergence_residual,
    fourier_lp_norm,
    make_lattice,
)

__all__ = [
    "CriterionInput",
    "CriterionReport",
    "criterion_lhs",
    "scale_to_lhs",
    "assemble_lhs",
    "rescale",
    "rescale_box",
    "ScalingSeries",
    "scaling_fit",
    "SweepPoint",
    "example_point",
    "example_sweep",
    "sweep_to_csv",
    "sweep_fits",
    "SWEEP_COLUMNS",
]

DIV_TOL = 1e-10


@dataclass
class CriterionInput:
    u0: VelocityField
    p: float = 4.0
    C_const: float = 1.0
    delta: float = 1.0
    check_divergence: bool = True

    def validate(self):
        if not (3 < self.p < 6):
            raise ValueError(f"p must lie in (3, 6), got {self.p!r}")
        if not (self.C_const > 0):
            raise ValueError("C_const must be positive")
        if not (self.delta > 0):
            raise ValueError("delta must be positive")
        if self.check_divergence:
            res = divergence_residual(self.u0)
            if res > DIV_TOL:
                raise ValueError(f"initial data is not divergence-free (relative residual {res:.3e})")


@dataclass
class CriterionReport:
    norm_sum_comp: float
    norm_first_two: float
    caloric_2: float
    caloric_1: float
    lhs: float
    largeness: float
    p: float
    C_const: float
    delta: float
    exp_factor: float
    below_delta: bool
    lattice: dict = field(default_factory=dict)
    partition: dict = field(default_factory=dict)

    @property
    def largeness_over_caloric_1(self) -> float:
        return self.largeness / self.caloric_1 if self.caloric_1 > 0 else math.nan

    def as_dict(self) -> dict:
        out = asdict(self)
        out["largeness_over_caloric_1"] = self.largeness_over_caloric_1
        return out


def assemble_lhs(norm_sum_comp: float, norm_first_two: float, caloric_2: float,
                 caloric_1: float, C_const: float = 1.0) -> float:
    return norm_sum_comp * norm_first_two * math.exp(C_const * (caloric_2 ** 2 + caloric_1))


class _Norms:
    """Block spectra of each distinct component, computed once."""

    def __init__(self, p: float, P: DyadicPartition):
        self.p, self.P = p, P
        self._cache: dict[int, dict] = {}

    def spectra(self, f: ScalarField) -> dict:
        key = id(f)
        if key not in self._cache:
            if f.is_zero():
                self._cache[key] = None
            else:
                self._cache[key] = dyadic_spectra(f, [self.p, np.inf], self.P)
        return self._cache[key]

    def besov(self, f: ScalarField, s: float, p: float, r: float) -> float:
        sp = self.spectra(f)
        return 0.0 if sp is None else sp[p].besov(s, r)


def criterion_lhs(inp: CriterionInput, P: DyadicPartition | None = None,
                  grid: TimeGrid | None = None) -> CriterionReport:
    """Evaluate every factor of the smallness functional and assemble it.

    The comparison with ``delta`` is recorded only; ``C`` and ``delta`` are
    user-chosen, so the report is a measurement, not a certificate.
    """
    inp.validate()
    u = inp.u0
    P = _partition(u.lattice, P)
    p, s = inp.p, -1.0 + 3.0 / inp.p
    u1, u2, u3 = u.components
    if u1.is_zero():
        w = u2
    elif u2.is_zero():
        w = u1
    else:
        w = u1 + u2
    norms = _Norms(p, P)
    sum_comp = norms.besov(w, s, p, 1) + norms.besov(u3, s, p, 1)
    first_two = norms.besov(u1, s, p, 1) + norms.besov(u2, s, p, 1)
    cal1 = sum(norms.besov(c, -1.0, np.inf, 1) for c in (u1, u2, u3))
    large = sum(norms.besov(c, -1.0, np.inf, np.inf) for c in (u1, u2, u3))
    cal2 = caloric_norms(u, (2,), grid, P)[2]
    expf = math.exp(inp.C_const * (cal2 ** 2 + cal1))
    lhs = sum_comp * first_two * expf
    return CriterionReport(
        norm_sum_comp=sum_comp,
        norm_first_two=first_two,
        caloric_2=cal2,
        caloric_1=cal1,
        lhs=lhs,
        largeness=large,
        p=p,
        C_const=inp.C_const,
        delta=inp.delta,
        exp_factor=expf,
        below_delta=bool(lhs <= inp.delta),
        lattice=u.lattice.describe(),
        partition=P.describe(),
    )


def scale_to_lhs(u0: VelocityField, target: float, p: float = 4.0, C_const: float = 1.0,
                 P: DyadicPartition | None = None) -> tuple[VelocityField, CriterionReport]:
    """Rescale the amplitude of ``u0`` so that its lhs equals ``target``.

    Every factor is homogeneous of degree one in the amplitude, so the norms
    are computed once and the scalar equation is solved by root bracketing.
    """
    if not (target > 0):
        raise ValueError("target must be positive")
    base = criterion_lhs(CriterionInput(u0, p=p, C_const=C_const), P)
    if base.lhs == 0:
        raise ValueError("field has a vanishing lhs; no amplitude reaches the target")

    def log_gap(a):
        return math.log(assemble_lhs(a * base.norm_sum_comp, a * base.norm_first_two,
                                     a * base.caloric_2, a * base.caloric_1, C_const) / target)

    hi = 1.0
    while log_gap(hi) < 0:
        hi *= 2.0
    lo = hi
    while log_gap(lo) > 0:
        lo *= 0.5
    amp = optimize.brentq(log_gap, lo, hi, xtol=1e-15, rtol=1e-13)
    scaled = u0 * amp
    return scaled, criterion_lhs(CriterionInput(scaled, p=p, C_const=C_const), P)


# -- scaling ------------------------------------------------------------------------

def _check_dilation(lam) -> int:
    if isinstance(lam, (bool, np.bool_)) or not float(lam).is_integer():
        raise ValueError(f"dilation factor must be a positive power of two, got {lam!r}")
    lam = int(lam)
    if lam < 1 or lam & (lam - 1):
        raise ValueError(f"dilation factor must be a positive power of two, got {lam!r}")
    return lam


def rescale(u: VelocityField, lam) -> VelocityField:
    """``lam * u(lam x)`` on the same box: mode ``m`` moves to ``lam m``.

    Raises if content would land beyond the representable modes.
    """
    lam = _check_dilation(lam)
    if lam == 1:
        return u
    lat = u.lattice
    src = u.spectral
    out = np.zeros_like(src)
    sel_src, sel_dst = [], []
    for a in range(3):
        m = lat.modes[a]
        n = lat.shape[a]
        target = lam * m
        ok = (target > -n // 2) & (target < n // 2) if a < 2 else target < n // 2
        sel_src.append(np.nonzero(ok)[0])
        sel_dst.append(target[ok] % n if a < 2 else target[ok])
    kept = np.zeros(src.shape, dtype=bool)
    kept[(Ellipsis,) + np.ix_(*sel_src)] = True
    lost = np.abs(src[~kept]).max(initial=0.0)
    if lost > 1e-12 * np.abs(src).max(initial=0.0):
        raise ValueError("dilated field does not fit on the lattice")
    out[(Ellipsis,) + np.ix_(*sel_dst)] = lam * src[(Ellipsis,) + np.ix_(*sel_src)]
    return VelocityField.from_spectral(lat, out)


def rescale_box(u: VelocityField, lam) -> VelocityField:
    """``lam * u(lam x)`` on the box shrunk by ``lam``: same grid samples,
    periods divided by ``lam``."""
    lam = _check_dilation(lam)
    lat = u.lattice
    small = make_lattice(lat.shape, tuple(L / lam for L in lat.lengths))
    return VelocityField(small, lam * u.spectral)


@dataclass
class ScalingSeries:
    """Observations ``y(eps)`` with known factors to divide out before fitting.

    ``log_correction`` is the exponent of ``log(1/eps)`` (or of
    ``log log (1/eps)`` when ``log_kind == "loglog"``); ``divisors`` are any
    further per-point factors (for instance a measured exponential).
    """

    eps_values: Sequence[float]
    observations: Sequence[float]
    log_correction: float = 0.0
    log_kind: str = "log"
    divisors: Sequence[float] | None = None

    def __post_init__(self):
        e = np.asarray(self.eps_values, dtype=float)
        y = np.asarray(self.observations, dtype=float)
        if e.shape != y.shape:
            raise ValueError("eps_values and observations differ in length")
        if np.any((e <= 0) | (e >= 1)):
            raise ValueError("every eps must lie in (0, 1)")
        if np.any(y <= 0):
            raise ValueError("observations must be positive")
        if self.log_kind not in ("log", "loglog"):
            raise ValueError("log_kind must be 'log' or 'loglog'")

    def corrected(self) -> np.ndarray:
        e = np.asarray(self.eps_values, dtype=float)
        y = np.asarray(self.observations, dtype=float)
        base = np.log(1.0 / e)
        if self.log_kind == "loglog":
            base = np.log(base)
        y = y / base ** self.log_correction
        if self.divisors is not None:
            y = y / np.asarray(self.divisors, dtype=float)
        return y


def scaling_fit(series: ScalingSeries) -> tuple[float, float]:
    """Least-squares slope of ``log(corrected y)`` against ``log eps``, and ``r^2``."""
    e = np.asarray(series.eps_values, dtype=float)
    if e.size < 4:
        raise ValueError("a scaling fit needs at least 4 eps values")
    if e.max() / e.min() < 4 * (1 - 1e-12):
        raise ValueError("eps values must span at least two octaves")
    fit = stats.linregress(np.log(e), np.log(series.corrected()))
    return float(fit.slope), float(fit.rvalue ** 2)


# -- example sweeps -----------------------------------------------------------------

SWEEP_COLUMNS = ("eps", "alpha", "p", "norm_sum_comp", "norm_first_two", "caloric_2",
                 "caloric_1", "lhs", "largeness")


@dataclass
class SweepPoint:
    eps: float
    alpha: float | None
    p: float
    report: CriterionReport
    symbol_norm: float | None = None

    def row(self) -> dict:
        r = self.report
        return {
            "eps": self.eps,
            "alpha": "" if self.alpha is None else self.alpha,
            "p": self.p,
            "norm_sum_comp": r.norm_sum_comp,
            "norm_first_two": r.norm_first_two,
            "caloric_2": r.caloric_2,
            "caloric_1": r.caloric_1,
            "lhs": r.lhs,
            "largeness": r.largeness,
        }


def example_point(example: int, eps: float, p: float, alpha: float = 0.9,
                  C_const: float = 1.0, delta: float = 1.0) -> SweepPoint:
    """Generate one member of an example family and evaluate the functional."""
    if example == 1:
        u = example1_data(Example1Params(eps, alpha, p))
        rep = criterion_lhs(CriterionInput(u, p, C_const, delta))
        return SweepPoint(eps, alpha, p, rep)
    if example == 2:
        a = example2_potential(eps)
        u = example2_data(eps, a.lattice)
        rep = criterion_lhs(CriterionInput(u, p, C_const, delta))
        return SweepPoint(eps, None, p, rep, fourier_lp_norm(a, p / (p - 1)))
    raise ValueError("example must be 1 or 2")


def _point_args(args):
    return example_point(*args)


def example_sweep(example: int, eps_values: Sequence[float], p: float, alpha: float = 0.9,
                  C_const: float = 1.0, delta: float = 1.0, jobs: int = 1) -> list[SweepPoint]:
    """Evaluate the family at each ``eps``; ``jobs > 1`` fans out over processes.

    Results come back in the order of ``eps_values`` regardless of ``jobs``.
    """
    args = [(example, float(e), p, alpha, C_const, delta) for e in eps_values]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_point_args, args))
    return [example_point(*a) for a in args]


def sweep_to_csv(points: Sequence[SweepPoint], path=None, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header)
    w = csv.DictWriter(buf, fieldnames=list(SWEEP_COLUMNS), lineterminator="\n")
    w.writeheader()
    for pt in points:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in pt.row().items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _strictly_monotone(values, increasing: bool) -> bool:
    d = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(d > 0) if increasing else np.all(d < 0))


def sweep_fits(example: int, points: Sequence[SweepPoint]) -> dict:
    """Scaling diagnostics for a sweep, ordered by decreasing ``eps``.

    Example 1: slope of ``lhs / (exp factor * (log 1/eps)^{2/5})`` against the
    predicted ``alpha - 6/p + 2 alpha/p``, and the spread of
    ``largeness / (log 1/eps)^{1/5}`` (max over min).
    Example 2: monotonicity of ``lhs`` (decreasing) and ``largeness``
    (increasing) as ``eps`` shrinks, and the slope of the symbol norm
    ``||a_hat||_{L^{p/(p-1)}} / (log log 1/eps)^{1/2}`` against ``-1/p``.
    """
    pts = sorted(points, key=lambda q: -q.eps)
    eps = [q.eps for q in pts]
    lhs = [q.report.lhs for q in pts]
    large = [q.report.largeness for q in pts]
    p = pts[0].p
    out: dict = {"example": example, "eps": eps}
    if example == 1:
        alpha = pts[0].alpha
        series = ScalingSeries(eps, lhs, 0.4, "log", [q.report.exp_factor for q in pts])
        slope, r2 = scaling_fit(series)
        target = alpha - 6.0 / p + 2.0 * alpha / p
        band = np.asarray(large) / np.log(1.0 / np.asarray(eps)) ** 0.2
        out.update(lhs_slope=slope, lhs_r2=r2, lhs_target=target,
                   largeness_over_log=band.tolist(),
                   largeness_band=float(band.max() / band.min()))
    elif example == 2:
        out.update(lhs_decreasing=_strictly_monotone(lhs, increasing=False),
                   largeness_increasing=_strictly_monotone(large, increasing=True))
        norms = [q.symbol_norm for q in pts]
        if len(pts) >= 4 and all(x is not None for x in norms):
            slope, r2 = scaling_fit(ScalingSeries(eps, norms, 0.5, "loglog"))
            out.update(symbol_slope=slope, symbol_r2=r2, symbol_target=-1.0 / p)
    else:
        raise ValueError("example must be 1 or 2")
    return out
