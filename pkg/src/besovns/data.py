"""Field generators: single modes, shear flow, random ensembles and the two
large-data families (an oscillating anisotropic bump and a curl field whose
spectrum sits on a thin diagonal slab).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .littlewood_paley import build_partition, bump, smooth_step
from .spectral import (
    FrequencyLattice,
    ScalarField,
    VelocityField,
    _hermitian_repair,
    _leray_hat,
    make_lattice,
)

__all__ = [
    "cosine_mode",
    "shear_flow",
    "random_field",
    "random_velocity",
    "interior_band",
    "Example1Params",
    "example1_lattice",
    "example1_data",
    "example2_lattice",
    "example2_potential",
    "example2_data",
    "next_pow2_above",
]

_TWO_PI = 2.0 * np.pi


def next_pow2_above(x: float, minimum: int = 8) -> int:
    n = minimum
    while n <= x:
        n *= 2
    return n


def cosine_mode(lattice: FrequencyLattice, mode=(4, 0, 0), amplitude: float = 1.0) -> ScalarField:
    """``amplitude * cos(k . x)`` for the integer mode ``m`` (``k = 2 pi m / L``),
    set directly on its two coefficients so no other mode picks up round-off."""
    m = [int(x) for x in mode]
    if any(2 * abs(x) >= n for x, n in zip(m, lattice.shape)):
        raise ValueError(f"mode {tuple(m)} is not below the Nyquist index of {lattice.shape}")
    if m[2] < 0:
        m = [-x for x in m]
    coeffs = np.zeros(lattice.spectral_shape, dtype=complex)
    n1, n2, _ = lattice.shape
    if not any(m):
        coeffs[0, 0, 0] = amplitude * lattice.size
        return ScalarField(lattice, coeffs)
    half = 0.5 * amplitude * lattice.size
    coeffs[m[0] % n1, m[1] % n2, m[2]] += half
    if m[2] == 0:
        coeffs[-m[0] % n1, -m[1] % n2, 0] += half
    return ScalarField(lattice, coeffs)


def shear_flow(lattice: FrequencyLattice, amplitude: float = 1.0, mode: int = 1) -> VelocityField:
    """``(A sin(k x2), 0, 0)``: divergence-free with a vanishing nonlinearity."""
    _, x2, _ = lattice.grid()
    k = _TWO_PI * mode / lattice.lengths[1]
    u1 = ScalarField.from_physical(lattice, amplitude * np.sin(k * x2))
    zero = ScalarField.zeros(lattice)
    return VelocityField.from_components([u1, zero, zero])


def interior_band(lattice: FrequencyLattice, margin: int = 1) -> tuple[float, float]:
    """Radial band ``(kmin, kmax)`` keeping data, and its pairwise products,
    away from the first and last ``margin`` usable blocks."""
    P = build_partition(lattice)
    kmin = 2.0 ** (P.j_min + margin - 1) * 8.0 / 3.0
    kmax = 0.5 * 2.0 ** (P.j_max - margin + 1) * 3.0 / 4.0
    return kmin, kmax


def _rng(seed, sample_id) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(sample_id)])


def _random_spectrum(lattice: FrequencyLattice, rng: np.random.Generator, gamma: float,
                     kmin: float | None, kmax: float | None, lead=()) -> np.ndarray:
    shape = tuple(lead) + lattice.spectral_shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    P = build_partition(lattice)
    kabs = lattice.kabs
    weight = np.zeros(lattice.spectral_shape)
    for j in P.js:
        weight += bump(kabs * 2.0 ** (-j)) * 2.0 ** (-gamma * j)
    weight = weight * lattice.dealias_mask * lattice.nyquist_free
    if kmin is not None:
        weight = weight * (kabs >= kmin)
    if kmax is not None:
        weight = weight * (kabs <= kmax)
    weight[0, 0, 0] = 0.0
    coeffs *= weight
    return _hermitian_repair(lattice, coeffs)


def random_field(lattice: FrequencyLattice, seed: int = 0, sample_id: int = 0,
                 gamma: float | None = None, kmin: float | None = None,
                 kmax: float | None = None) -> ScalarField:
    """Mean-zero real field with Gaussian coefficients weighted ``2^{-gamma j}``
    on block ``j``, inside the 2/3 cube and the optional radial band.

    ``gamma`` defaults to a draw from ``[0.5, 2.5]``; the result is scaled
    to unit max norm.  The stream is fixed by ``(seed, sample_id)``.
    """
    rng = _rng(seed, sample_id)
    if gamma is None:
        gamma = rng.uniform(0.5, 2.5)
    f = ScalarField(lattice, _random_spectrum(lattice, rng, gamma, kmin, kmax))
    peak = float(np.abs(f.physical).max())
    return f * (1.0 / peak) if peak > 0 else f


def random_velocity(lattice: FrequencyLattice, seed: int = 0, sample_id: int = 0,
                    gamma: float | None = None, kmin: float | None = None,
                    kmax: float | None = None, amplitude: float = 1.0) -> VelocityField:
    """Divergence-free random field (Leray-projected), largest component
    max norm equal to ``amplitude``."""
    rng = _rng(seed, sample_id)
    if gamma is None:
        gamma = rng.uniform(0.5, 2.5)
    spec = _random_spectrum(lattice, rng, gamma, kmin, kmax, lead=(3,))
    u = VelocityField(lattice, _leray_hat(lattice, spec))
    peak = float(np.abs(u.physical).max())
    return u * (amplitude / peak) if peak > 0 else u


# -- oscillating anisotropic bump ----------------------------------------------

@dataclass(frozen=True)
class Example1Params:
    eps: float
    alpha: float = 0.9
    p: float = 5.0
    sigma: float = np.pi

    def validate(self):
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0, 1)")
        m = -math.log2(self.eps)
        if abs(m - round(m)) > 1e-12:
            raise ValueError("eps must be a power of two so that cos(x1/eps) is a lattice mode")
        if not (5 <= self.p < 6):
            raise ValueError("p must lie in [5, 6)")
        if not (6.0 / (self.p + 2) < self.alpha < 1):
            raise ValueError(f"alpha must lie in (6/(p+2), 1) = ({6 / (self.p + 2):.4f}, 1)")

    @property
    def amplitude(self) -> float:
        return math.log(1.0 / self.eps) ** 0.2 / self.eps


# Box half-width in units of sigma; the Gaussian falls to exp(-32) at the edge.
_BOX_SIGMAS = 16.0
# |k| sigma beyond which a unit Gaussian's spectrum is below 1e-16.
_GAUSS_CUT = 8.6


def example1_lattice(params: Example1Params) -> FrequencyLattice:
    """Box ``16 sigma x 16 sigma eps^alpha x 16 sigma``; ``cos(x1/eps)`` is the
    integer mode ``16 sigma / (2 pi eps)`` along ``x1``."""
    params.validate()
    s = params.sigma
    L = (_BOX_SIGMAS * s, _BOX_SIGMAS * s * params.eps ** params.alpha, _BOX_SIGMAS * s)
    tail = _GAUSS_CUT / s * L[0] / _TWO_PI
    carrier = L[0] / (_TWO_PI * params.eps)
    n1 = next_pow2_above(2 * (carrier + tail))
    n_side = next_pow2_above(2 * _GAUSS_CUT / s * L[2] / _TWO_PI)
    return make_lattice((n1, n_side, n_side), L)


def _gaussian_line(n: int, L: float, width: float) -> np.ndarray:
    x = np.arange(n) * (L / n)
    return np.exp(-((x - 0.5 * L) ** 2) / (2 * width ** 2))


def example1_data(params: Example1Params, lattice: FrequencyLattice | None = None) -> VelocityField:
    """``A cos(x1/eps) eps^alpha (0, -d3 psi, d2 psi)`` with
    ``psi = phi(x1, x2/eps^alpha, x3)`` for a centred Gaussian ``phi`` of
    width ``sigma`` and ``A = (log 1/eps)^{1/5} / eps``.

    The potential factorises, so its spectrum is an outer product of 1D
    transforms; the velocity is formed spectrally and is exactly
    divergence-free.
    """
    params.validate()
    lat = lattice or example1_lattice(params)
    carrier = lat.lengths[0] / (_TWO_PI * params.eps)
    if abs(carrier - round(carrier)) > 1e-9 or round(carrier) >= lat.shape[0] // 2:
        raise ValueError("cos(x1/eps) is not a resolved mode of this lattice")
    (n1, n2, n3), (L1, L2, L3) = lat.shape, lat.lengths
    s, ea = params.sigma, params.eps ** params.alpha
    x1 = np.arange(n1) * (L1 / n1)
    line1 = np.cos(x1 / params.eps) * _gaussian_line(n1, L1, s)
    line2 = _gaussian_line(n2, L2, s * ea)
    line3 = _gaussian_line(n3, L3, s)
    h1 = sfft.fft(line1)
    h2 = sfft.fft(line2)
    h3 = sfft.rfft(line3)
    psi = params.amplitude * (h1[:, None, None] * h2[None, :, None] * h3[None, None, :])
    psi *= lat.nyquist_free
    _, k2, k3 = lat.k
    spec = np.stack([np.zeros_like(psi), -1j * ea * k3 * psi, 1j * ea * k2 * psi])
    return VelocityField(lat, spec)


# -- diagonal-slab curl field ---------------------------------------------------

_H_IN, _H_OUT = 8.0 / 9.0, 9.0 / 8.0
_H_PLATEAU = (17.0 / 18.0, 17.0 / 16.0)
_V_IN, _V_OUT = 8.0 / 9.0, 9.0 / 8.0            # squares of 2 sqrt2/3 and 3 sqrt2/4
_V_PLATEAU = (34.0 / 36.0, 17.0 / 16.0)          # squares of sqrt34/6 and sqrt17/4


def _ramp_window(q, outer, plateau):
    """Smooth window in ``q``: 0 outside ``outer``, 1 on ``plateau``."""
    lo, hi = outer
    plo, phi_ = plateau
    return smooth_step((q - lo) / (plo - lo)) * smooth_step((hi - q) / (hi - phi_))


def example2_lattice(eps: float, L3: float = _TWO_PI, n3: int = 8) -> FrequencyLattice:
    """Horizontal frequency spacing ``eps/4``; the vertical axis keeps only
    ``xi3 = +-1`` (inside the plateau of the vertical symbol)."""
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0, 1)")
    Lh = 8.0 * np.pi / eps
    nh = next_pow2_above(2 * (math.sqrt(_H_OUT) * 4.0 / eps + 1))
    return make_lattice((nh, nh, n3), (Lh, Lh, L3))


def example2_symbols(eps: float, lattice: FrequencyLattice) -> np.ndarray:
    """``chi_hat(xi1, xi2) * phi_hat(xi3)`` on the spectral array."""
    k1, k2, k3 = lattice.k
    d = np.abs(k1 - k2)
    q = k1 ** 2 + k2 ** 2
    chi = (
        smooth_step((eps - d) / (eps - eps / 2))
        * _ramp_window(q, (_H_IN, _H_OUT), _H_PLATEAU)
    )
    phi = _ramp_window(k3 ** 2, (_V_IN, _V_OUT), _V_PLATEAU)
    return chi * phi


def example2_potential(eps: float, lattice: FrequencyLattice | None = None) -> ScalarField:
    """``a = eps^{-1} (log log 1/eps)^{1/2} chi(x1,x2) phi(x3)`` built from its
    Fourier symbols; continuous-transform values are divided by the cell
    volume to give lattice coefficients."""
    if not (0 < eps < math.exp(-1)):
        raise ValueError("eps must lie in (0, 1/e) so that log log 1/eps is defined and positive")
    lat = lattice or example2_lattice(eps)
    spacing = min(_TWO_PI / L for L in lat.lengths[:2])
    if spacing > eps / 4 * (1 + 1e-12):
        raise ValueError(f"horizontal frequency spacing {spacing:g} exceeds eps/4 = {eps / 4:g}")
    amp = math.sqrt(math.log(math.log(1.0 / eps))) / eps
    coeffs = amp * example2_symbols(eps, lat) / lat.cell_volume
    return ScalarField.from_spectral(lat, coeffs)


def example2_data(eps: float, lattice: FrequencyLattice | None = None) -> VelocityField:
    """``(d2 a, -d1 a, 0)``."""
    a = example2_potential(eps, lattice)
    k1, k2, _ = a.lattice.k
    ah = a.spectral
    spec = np.stack([1j * k2 * ah, -1j * k1 * ah, np.zeros_like(ah)])
    return VelocityField(a.lattice, spec)
