"""Perturbation-form Navier-Stokes on the periodic box (viscosity 1).

With ``U = e^{t Lap} u0`` and ``u = U + v`` the perturbation obeys

    dv/dt - Lap v = -P(v.grad v + v.grad U + U.grad v + U.grad U),   v(0) = 0,

where ``P`` is the Leray projector.  ``U`` is advanced exactly by its
multiplier and ``v`` by integrating-factor RK4.  Inside the stepper the four
bilinear terms are evaluated together as ``P(w x curl w)`` with ``w = U + v``,
which equals ``-P((w.grad) w)`` once gradients are projected out; with ``w``
inside the 2/3 cube the truncated products carry no aliasing, so both forms
agree to round-off.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .heat import TimeGrid
from .littlewood_paley import build_partition, dyadic_spectra
from .spectral import (
    CubeTransform,
    FrequencyLattice,
    ScalarField,
    VelocityField,
    _forward,
    _inverse,
    _leray_hat,
    derivative,
)

__all__ = [
    "SolveConfig",
    "SolveTrace",
    "STATUSES",
    "transport_rewrite_residual",
    "nonlinear_rhs",
    "rotational_rhs",
    "solve",
    "apriori_balance",
    "heat_transport_integral",
    "static_transport_bound",
]

STATUSES = ("completed", "bootstrap-exit", "blowup-suspect", "cfl-violation")


# -- algebraic identities ----------------------------------------------------------

def _grad_values(f: ScalarField) -> list[np.ndarray]:
    return [derivative(f, a).physical for a in (1, 2, 3)]


def transport_rewrite_residual(U: VelocityField, relative: bool = True) -> float:
    """Max-norm gap between ``U.grad U`` and its rewriting through ``U1 + U2``.

    The rewritten components are

        (U1+U2) d1U1 + U2 d2(U1+U2) + U2 d3U3 + U3 d3U1
        (U1+U2) d2U2 + U1 d1(U1+U2) + U1 d3U3 + U3 d3U2
        U1 d1U3 + U2 d2U3 - U3 (d1U1 + d2U2)

    and differ from ``U.grad U`` by ``(U2, U1, -U3) div U``.  Relative mode
    divides by ``max|U| * max|grad U|``.
    """
    u = [c.physical for c in U.components]
    g = [_grad_values(c) for c in U.components]  # g[i][j] = d_j U^i
    direct = [u[0] * g[i][0] + u[1] * g[i][1] + u[2] * g[i][2] for i in range(3)]
    s12 = u[0] + u[1]
    rewritten = [
        s12 * g[0][0] + u[1] * (g[0][1] + g[1][1]) + u[1] * g[2][2] + u[2] * g[0][2],
        s12 * g[1][1] + u[0] * (g[0][0] + g[1][0]) + u[0] * g[2][2] + u[2] * g[1][2],
        u[0] * g[2][0] + u[1] * g[2][1] - u[2] * (g[0][0] + g[1][1]),
    ]
    err = max(float(np.abs(a - b).max()) for a, b in zip(direct, rewritten))
    if not relative:
        return err
    scale = max(float(np.abs(x).max()) for x in u) * max(float(np.abs(x).max()) for row in g for x in row)
    return err / scale if scale > 0 else err


def _advect_values(a: list[np.ndarray], grads: list[list[np.ndarray]]) -> list[np.ndarray]:
    return [a[0] * grads[i][0] + a[1] * grads[i][1] + a[2] * grads[i][2] for i in range(3)]


def nonlinear_rhs(v: VelocityField, U: VelocityField) -> VelocityField:
    """``-P(v.grad v + v.grad U + U.grad v + U.grad U)`` with each term formed
    on the grid and 2/3-truncated."""
    if v.lattice != U.lattice:
        raise ValueError("v and U live on different lattices")
    lat = v.lattice
    vv = [c.physical for c in v.components]
    uu = [c.physical for c in U.components]
    gv = [_grad_values(c) for c in v.components]
    gu = [_grad_values(c) for c in U.components]
    total = [np.zeros(lat.shape) for _ in range(3)]
    for a, grads in ((vv, gv), (vv, gu), (uu, gv), (uu, gu)):
        for i, term in enumerate(_advect_values(a, grads)):
            total[i] += term
    spec = _forward(lat, np.stack(total)) * lat.dealias_mask
    return VelocityField(lat, -_leray_hat(lat, spec))


def _curl_hat(lat: FrequencyLattice, wh: np.ndarray) -> np.ndarray:
    k1, k2, k3 = lat.k
    return 1j * np.stack([
        k2 * wh[2] - k3 * wh[1],
        k3 * wh[0] - k1 * wh[2],
        k1 * wh[1] - k2 * wh[0],
    ])


def _rotational_hat(lat: FrequencyLattice, wh: np.ndarray) -> tuple[np.ndarray, float]:
    """``P(w x curl w)`` truncated to the 2/3 cube, and ``max|w|``."""
    w = _inverse(lat, wh)
    om = _inverse(lat, _curl_hat(lat, wh))
    cross = np.stack([
        w[1] * om[2] - w[2] * om[1],
        w[2] * om[0] - w[0] * om[2],
        w[0] * om[1] - w[1] * om[0],
    ])
    out = _forward(lat, cross)
    out *= lat.dealias_mask
    return _leray_hat(lat, out), float(np.abs(w).max())


def rotational_rhs(v: VelocityField, U: VelocityField) -> VelocityField:
    """Same quantity as :func:`nonlinear_rhs`, evaluated as ``P(w x curl w)``."""
    if v.lattice != U.lattice:
        raise ValueError("v and U live on different lattices")
    return VelocityField(v.lattice, _rotational_hat(v.lattice, v.spectral + U.spectral)[0])


class _CompactKernel:
    """``P(w x curl w)`` on compact 2/3-cube coefficients (see
    :class:`CubeTransform`); used by the time stepper."""

    def __init__(self, lat: FrequencyLattice):
        self.cube = CubeTransform(lat)
        self.k = self.cube.k
        k2 = self.cube.k2.copy()
        k2[0, 0, 0] = 1.0
        self.inv_k2 = 1.0 / k2

    def leray(self, a: np.ndarray) -> np.ndarray:
        k1, k2, k3 = self.k
        q = (k1 * a[0] + k2 * a[1] + k3 * a[2]) * self.inv_k2
        return np.stack([a[0] - k1 * q, a[1] - k2 * q, a[2] - k3 * q])

    def __call__(self, wh: np.ndarray, peak: bool = False) -> tuple[np.ndarray, float]:
        k1, k2, k3 = self.k
        both = np.empty((6,) + wh.shape[1:], dtype=complex)
        both[:3] = wh
        both[3] = 1j * (k2 * wh[2] - k3 * wh[1])
        both[4] = 1j * (k3 * wh[0] - k1 * wh[2])
        both[5] = 1j * (k1 * wh[1] - k2 * wh[0])
        x = self.cube.to_physical(both)
        w, om = x[:3], x[3:]
        cross = np.stack([
            w[1] * om[2] - w[2] * om[1],
            w[2] * om[0] - w[0] * om[2],
            w[0] * om[1] - w[1] * om[0],
        ])
        wmax = float(np.abs(w).max()) if peak else math.nan
        return self.leray(self.cube.to_spectral(cross)), wmax


# -- configuration and trace ---------------------------------------------------------

@dataclass
class SolveConfig:
    """Time step, horizon and monitor settings; the scheme is always
    integrating-factor RK4.  ``n``/``L`` default to the lattice of the data."""

    dt: float = 1e-3
    T: float = 1.0
    n: int | None = None
    L: float | None = None
    p: float = 4.0
    eta: float = 0.1
    monitor_every: int = 10
    track_balance: bool = False
    cfl_limit: float = 0.5
    scheme: str = "ifrk4"

    def validate(self):
        if not (self.dt > 0) or not (self.T > 0):
            raise ValueError("dt and T must be positive")
        if not (1 <= self.p <= math.inf):
            raise ValueError("monitor exponent p must lie in [1, inf]")
        if not (self.eta > 0):
            raise ValueError("eta must be positive")
        if int(self.monitor_every) < 1:
            raise ValueError("monitor_every must be a positive integer")
        if self.scheme != "ifrk4":
            raise ValueError("only the integrating-factor RK4 scheme is available")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolveTrace:
    times: list = field(default_factory=list)
    monitor_inf: list = field(default_factory=list)
    monitor_l1: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    div_residual: list = field(default_factory=list)
    gamma_hit: float | None = None
    status: str = "completed"
    steps: int = 0
    config: dict = field(default_factory=dict)
    message: str = ""
    balance: dict | None = None
    final_v: VelocityField | None = field(default=None, repr=False)

    @property
    def max_monitor(self) -> float:
        return max(self.monitor_inf) if self.monitor_inf else 0.0

    def header(self) -> str:
        cfg = json.dumps(self.config, sort_keys=True, default=float)
        digest = hashlib.sha256(cfg.encode()).hexdigest()
        return f"# config: {cfg}\n# config_sha256: {digest}\n"

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(self.header())
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "monitor_inf", "monitor_l1", "energy", "div_residual"])
        for row in zip(self.times, self.monitor_inf, self.monitor_l1, self.energy, self.div_residual):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _energy(lat: FrequencyLattice, uh: np.ndarray) -> float:
    power = np.sum(lat.hermitian_weight * (uh.real ** 2 + uh.imag ** 2))
    return 0.5 * float(power) * lat.cell_volume / lat.size


def _div_residual_l2(lat: FrequencyLattice, uh: np.ndarray) -> float:
    k1, k2, k3 = lat.k
    w = lat.hermitian_weight
    div = np.sum(w * np.abs(k1 * uh[0] + k2 * uh[1] + k3 * uh[2]) ** 2)
    grad = np.sum(w * lat.k2 * np.sum(np.abs(uh) ** 2, axis=0))
    return float(math.sqrt(div / grad)) if grad > 0 else 0.0


class _Monitor:
    """Block spectra of ``v`` at exponent ``p`` give both monitor norms."""

    def __init__(self, lat: FrequencyLattice, p: float):
        self.lat, self.p = lat, p
        self.P = build_partition(lat)
        self.s = -1.0 + (0.0 if p == math.inf else 3.0 / p)

    def norms(self, vh: np.ndarray) -> tuple[float, float]:
        lo = hi = 0.0
        for i in range(3):
            f = ScalarField(self.lat, vh[i].copy())
            if f.is_zero():
                continue
            sp = dyadic_spectra(f, [self.p], self.P)[self.p]
            lo += sp.besov(self.s, 1)
            hi += sp.besov(self.s + 2.0, 1)
        return lo, hi

    def besov(self, vh: np.ndarray, s: float) -> float:
        total = 0.0
        for i in range(3):
            f = ScalarField(self.lat, vh[i].copy())
            if not f.is_zero():
                total += dyadic_spectra(f, [self.p], self.P)[self.p].besov(s, 1)
        return total


def _advect_hat(lat: FrequencyLattice, ah: np.ndarray, bh: np.ndarray) -> np.ndarray:
    """Spectrum of ``(a.grad) b``, 2/3-truncated."""
    a = _inverse(lat, ah)
    k = lat.k
    out = np.empty((3,) + lat.shape)
    for i in range(3):
        out[i] = sum(a[j] * _inverse(lat, 1j * k[j] * bh[i]) for j in range(3))
    res = _forward(lat, out)
    res *= lat.dealias_mask
    return res


def _balance_rates(mon: _Monitor, lat: FrequencyLattice, vh: np.ndarray, Uh: np.ndarray) -> dict:
    s = mon.s
    vv = _advect_hat(lat, vh, vh)
    uu = _advect_hat(lat, Uh, Uh)
    cross = _advect_hat(lat, vh, Uh) + _advect_hat(lat, Uh, vh)
    U = _inverse(lat, Uh)
    linf = float(sum(np.abs(c).max() for c in U))
    b1 = 0.0
    for i in range(3):
        f = ScalarField(lat, Uh[i].copy())
        if not f.is_zero():
            b1 += dyadic_spectra(f, [math.inf], mon.P)[math.inf].besov(1.0, math.inf)
    return {
        "I1": mon.besov(vv, s),
        "I2": mon.besov(uu, s),
        "I3": mon.besov(cross, s),
        "gronwall": linf ** 2 + b1,
    }


def _max_wavenumber(lat: FrequencyLattice) -> float:
    return float(lat.kabs[lat.dealias_mask & lat.nyquist_free].max())


def solve(u0: VelocityField, cfg: SolveConfig | None = None) -> SolveTrace:
    """Advance ``v`` from zero to ``cfg.T`` and record the monitor norms.

    The run stops early with status ``bootstrap-exit`` when ``monitor_inf``
    exceeds ``eta``, ``blowup-suspect`` on non-finite values, and
    ``cfl-violation`` when the advective step limit is exceeded.
    """
    cfg = cfg or SolveConfig()
    cfg.validate()
    lat = u0.lattice
    if cfg.n is not None and tuple(lat.shape) != (cfg.n,) * 3:
        raise ValueError(f"data lattice {lat.shape} does not match n={cfg.n}")
    if cfg.L is not None and not np.allclose(lat.lengths, cfg.L):
        raise ValueError(f"data periods {lat.lengths} do not match L={cfg.L}")
    u0h = u0.spectral
    peak = float(np.abs(u0h).max(initial=0.0))
    if peak > 0 and np.abs(u0h[:, 0, 0, 0]).max() > 1e-12 * peak:
        raise ValueError("initial data must have zero mean")
    if _div_residual_l2(lat, u0h) > 1e-10:
        raise ValueError("initial data is not divergence-free")
    if peak > 0 and np.abs(u0h * ~lat.dealias_mask).max() > 1e-12 * peak:
        raise ValueError("initial data must lie inside the 2/3-truncated cube")
    kmax = _max_wavenumber(lat)
    umax0 = float(np.abs(u0.physical).max()) if peak > 0 else 0.0
    if cfg.dt * kmax * umax0 > cfg.cfl_limit:
        raise ValueError(
            f"time step violates the advective limit: dt*kmax*max|u| = {cfg.dt * kmax * umax0:.3f} > {cfg.cfl_limit}"
        )

    dt = cfg.dt
    nsteps = int(round(cfg.T / dt))
    if abs(nsteps * dt - cfg.T) > 1e-9 * cfg.T:
        raise ValueError("T must be an integer multiple of dt")
    kernel = _CompactKernel(lat)
    cube = kernel.cube
    E = np.exp(-cube.k2 * dt)
    E2 = np.exp(-cube.k2 * (0.5 * dt))
    mon = _Monitor(lat, cfg.p)
    trace = SolveTrace(config={**cfg.as_dict(), "lattice": lat.describe()})
    if cfg.track_balance:
        trace.balance = {"times": [], "I1": [], "I2": [], "I3": [], "gronwall": []}

    # State lives on compact cube coefficients; U is advanced multiplicatively.
    Uc = cube.compact(u0h)
    vc = np.zeros_like(Uc)
    l1_acc = 0.0
    last_hi = 0.0
    last_t = 0.0

    def record(t: float, vcomp: np.ndarray, Ucomp: np.ndarray) -> bool:
        nonlocal l1_acc, last_hi, last_t
        v = cube.expand(vcomp)
        Uh = cube.expand(Ucomp)
        lo, hi = mon.norms(v)
        if trace.times:
            l1_acc += 0.5 * (last_hi + hi) * (t - last_t)
        last_hi, last_t = hi, t
        trace.times.append(t)
        trace.monitor_inf.append(lo)
        trace.monitor_l1.append(l1_acc)
        trace.energy.append(_energy(lat, Uh + v))
        trace.div_residual.append(_div_residual_l2(lat, Uh + v))
        if trace.balance is not None:
            rates = _balance_rates(mon, lat, v, Uh)
            trace.balance["times"].append(t)
            for key, val in rates.items():
                trace.balance[key].append(val)
        if not math.isfinite(lo) or not math.isfinite(hi):
            trace.status = "blowup-suspect"
            trace.message = f"non-finite monitor at t={t:g}"
            return False
        if lo > cfg.eta and trace.gamma_hit is None:
            trace.gamma_hit = t
            trace.status = "bootstrap-exit"
            trace.message = f"monitor exceeded eta={cfg.eta:g} at t={t:g}"
            return False
        return True

    record(0.0, vc, Uc)
    for step in range(1, nsteps + 1):
        t = (step - 1) * dt
        U_half = E2 * Uc
        U_full = E * Uc
        k1, wmax = kernel(Uc + vc, peak=True)
        if dt * kmax * wmax > cfg.cfl_limit:
            trace.status = "cfl-violation"
            trace.message = f"dt*kmax*max|u| = {dt * kmax * wmax:.3f} at t={t:g}"
            break
        k2_, _ = kernel(U_half + E2 * (vc + 0.5 * dt * k1))
        k3, _ = kernel(U_half + E2 * vc + 0.5 * dt * k2_)
        k4, _ = kernel(U_full + E * vc + dt * (E2 * k3))
        vc = E * vc + (dt / 6.0) * (E * k1 + 2.0 * E2 * (k2_ + k3) + k4)
        Uc = U_full
        trace.steps = step
        if not np.all(np.isfinite(vc)):
            trace.status = "blowup-suspect"
            trace.message = f"non-finite state at t={step * dt:g}"
            break
        if step % cfg.monitor_every == 0 or step == nsteps:
            if not record(step * dt, vc, Uc):
                break
    vh = cube.expand(vc)
    trace.final_v = VelocityField(lat, vh)
    return trace


# -- a priori balance ------------------------------------------------------------------

def static_transport_bound(u0: VelocityField, p: float) -> float:
    """``||u1+u2, u3||_{B^{3/p-1}_{p,1}} * ||u1, u2||_{B^{3/p-1}_{p,1}}``."""
    P = build_partition(u0.lattice)
    s = -1.0 + 3.0 / p
    u1, u2, u3 = u0.components

    def b(f):
        return 0.0 if f.is_zero() else dyadic_spectra(f, [p], P)[p].besov(s, 1)

    return (b(u1 + u2) + b(u3)) * (b(u1) + b(u2))


def apriori_balance(trace: SolveTrace, u0: VelocityField, p: float | None = None) -> dict:
    """Compare ``sup_t ||v||_{B^{-1+3/p}} + int ||v||_{B^{1+3/p}}`` with the
    running integrals ``I1`` (v.grad v), ``I2`` (U.grad U), ``I3`` (cross terms)
    and the static bound times ``exp`` of the Gronwall weight
    ``int ||U||_inf^2 + ||U||_{B^1_{inf,inf}}``.

    ``ratio_direct = lhs / (I1+I2+I3)`` and
    ``ratio = lhs / (I1+I2+I3 + static * exp(weight))`` are returned per
    monitor time.  The report is flagged degenerate when both ``lhs`` and the
    direct integrals vanish to round-off (the direct ratio is then 0/0).
    """
    if trace.balance is None or not trace.balance["times"]:
        raise ValueError("trace carries no balance data; run solve with track_balance=True")
    if trace.status != "completed":
        raise ValueError(f"trace is incomplete (status {trace.status!r})")
    p = p if p is not None else trace.config.get("p", 4.0)
    b = trace.balance
    t = np.asarray(b["times"])

    def running(vals):
        vals = np.asarray(vals, dtype=float)
        out = np.zeros_like(vals)
        if vals.size > 1:
            out[1:] = np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))
        return out

    I1, I2, I3, W = (running(b[k]) for k in ("I1", "I2", "I3", "gronwall"))
    lhs = np.maximum.accumulate(np.asarray(trace.monitor_inf)) + np.asarray(trace.monitor_l1)
    static = static_transport_bound(u0, p)
    direct = I1 + I2 + I3
    assembled = direct + static * np.exp(W)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_direct = np.where(direct > 0, lhs / np.where(direct > 0, direct, 1.0), np.nan)
        ratio = np.where(assembled > 0, lhs / np.where(assembled > 0, assembled, 1.0), np.nan)
    # 0/0 in the direct ratio: no transport and no perturbation beyond round-off.
    tiny = 1e-12 * max(1.0, float(np.max(assembled, initial=0.0)))
    degenerate = bool(np.max(direct, initial=0.0) <= tiny and np.max(lhs, initial=0.0) <= tiny)
    finite = ratio[np.isfinite(ratio)]
    return {
        "times": t.tolist(),
        "lhs": lhs.tolist(),
        "I1": I1.tolist(),
        "I2": I2.tolist(),
        "I3": I3.tolist(),
        "gronwall_weight": W.tolist(),
        "static_bound": static,
        "ratio_direct": ratio_direct.tolist(),
        "ratio": ratio.tolist(),
        "max_ratio": float(finite.max()) if finite.size else math.nan,
        "degenerate": degenerate,
    }


def heat_transport_integral(u0: VelocityField, p: float, grid: TimeGrid | None = None) -> float:
    """``int_0^inf ||U.grad U||_{B^{3/p-1}_{p,1}} dt`` for ``U = e^{t Lap} u0``,
    on a geometric time grid (trapezoid in ``log t``)."""
    lat = u0.lattice
    grid = grid or TimeGrid()
    P = build_partition(lat)
    mon = _Monitor(lat, p)
    u0h = u0.spectral
    if np.abs(u0h).max(initial=0.0) == 0:
        return 0.0
    k2 = lat.k2
    lam2 = float(k2[(np.abs(u0h).max(axis=0) > 0) & (k2 > 0)].min())
    t = grid.start(P)
    times, vals = [], []
    acc = 0.0
    rate0 = mon.besov(_advect_hat(lat, u0h, u0h), mon.s)
    for _ in range(grid.max_points):
        Uh = u0h * np.exp(-k2 * t)
        r = mon.besov(_advect_hat(lat, Uh, Uh), mon.s)
        if times:
            acc += 0.5 * (vals[-1] * times[-1] + r * t) * math.log(t / times[-1])
        else:
            acc += 0.5 * t * (rate0 + r)
        times.append(t)
        vals.append(r)
        # The quadratic term decays at least like exp(-2 lam2 t).
        if r / (2 * lam2) < grid.tail_tol * acc:
            break
        t *= grid.rho
    return acc + vals[-1] / (2 * lam2)
