"""Periodic 3D grid, real-field FFTs, spectral calculus and the Leray projector.

Fields are stored by their half-spectrum (``rfftn`` layout along the last
axis), unnormalised as returned by :func:`scipy.fft.rfftn`.  The physical
view is materialised lazily and cached.  Modes on the asymmetric Nyquist
planes are zeroed at construction so that every spectral multiplier odd in
``k`` maps real fields to real fields.

Axes are numbered 1, 2, 3 in the public API (``x1, x2, x3``).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "FrequencyLattice",
    "ScalarField",
    "VelocityField",
    "make_lattice",
    "derivative",
    "gradient",
    "divergence",
    "divergence_residual",
    "leray_project",
    "lp_norm",
    "dealias",
    "multiply",
    "spectral_l2_norm",
    "fourier_lp_norm",
    "resample",
    "CubeTransform",
]

_TWO_PI = 2.0 * np.pi
_AXES = (-3, -2, -1)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FrequencyLattice:
    """Grid geometry of the box ``[0,L1) x [0,L2) x [0,L3)``.

    ``shape`` holds the number of points per axis (each a power of two,
    at least 8) and ``lengths`` the periods.  Wavenumbers along axis ``a``
    are ``2*pi*m/L_a`` for integer ``m`` in ``[-n_a/2, n_a/2)``; the
    last axis only stores ``m >= 0``.
    """

    shape: tuple[int, int, int]
    lengths: tuple[float, float, float]

    def __post_init__(self):
        if len(self.shape) != 3 or len(self.lengths) != 3:
            raise ValueError("lattice needs three axes")
        for n in self.shape:
            if int(n) != n or not _is_power_of_two(int(n)) or n < 8:
                raise ValueError(f"grid size {n!r} must be a power of two >= 8")
        for L in self.lengths:
            if not np.isfinite(L) or L <= 0:
                raise ValueError(f"period {L!r} must be positive")
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))

    @property
    def n(self) -> int:
        """Points per axis of a cubic lattice."""
        if len(set(self.shape)) != 1:
            raise AttributeError("lattice is not cubic; use .shape")
        return self.shape[0]

    @property
    def L(self) -> float:
        if len(set(self.lengths)) != 1:
            raise AttributeError("lattice is not isotropic; use .lengths")
        return self.lengths[0]

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        n1, n2, n3 = self.shape
        return (n1, n2, n3 // 2 + 1)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def cell_volume(self) -> float:
        return self.volume / self.size

    @cached_property
    def modes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer mode numbers per axis, in storage order."""
        n1, n2, n3 = self.shape
        return (
            np.fft.fftfreq(n1, 1.0 / n1).astype(np.int64),
            np.fft.fftfreq(n2, 1.0 / n2).astype(np.int64),
            np.arange(n3 // 2 + 1, dtype=np.int64),
        )

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical wavenumbers ``2*pi*m/L`` per axis, in storage order."""
        return tuple(_TWO_PI * m / L for m, L in zip(self.modes, self.lengths))

    def axis_wavenumbers(self, axis: int) -> np.ndarray:
        """All wavenumbers ``2*pi*m/L`` of one axis (1, 2 or 3), ``m`` running
        over ``[-n/2, n/2)`` in increasing order, Nyquist index included."""
        if axis not in (1, 2, 3):
            raise ValueError("axis must be 1, 2 or 3")
        n, L = self.shape[axis - 1], self.lengths[axis - 1]
        return _TWO_PI * np.arange(-(n // 2), n // 2) / L

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers reshaped for broadcasting against spectral arrays."""
        k1, k2, k3 = self.wavenumbers
        return (k1[:, None, None], k2[None, :, None], k3[None, None, :])

    @cached_property
    def k2(self) -> np.ndarray:
        """``|k|^2`` on the spectral array."""
        k1, k2, k3 = self.k
        out = k1 ** 2 + k2 ** 2 + k3 ** 2
        out.setflags(write=False)
        return out

    @cached_property
    def kabs(self) -> np.ndarray:
        out = np.sqrt(self.k2)
        out.setflags(write=False)
        return out

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """Boolean mask, False on every Nyquist plane."""
        n1, n2, n3 = self.shape
        m1, m2, m3 = self.modes
        return (
            (m1 != -n1 // 2)[:, None, None]
            & (m2 != -n2 // 2)[None, :, None]
            & (m3 != n3 // 2)[None, None, :]
        )

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with ``|m_a| <= n_a/3`` on every axis."""
        m1, m2, m3 = self.modes
        n1, n2, n3 = self.shape
        return (
            (3 * np.abs(m1) <= n1)[:, None, None]
            & (3 * np.abs(m2) <= n2)[None, :, None]
            & (3 * np.abs(m3) <= n3)[None, None, :]
        )

    @cached_property
    def hermitian_weight(self) -> np.ndarray:
        """Multiplicity of each stored mode in the full spectrum (1 or 2)."""
        n3 = self.shape[2]
        w = np.full(n3 // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w[None, None, :]

    @property
    def min_wavenumber(self) -> float:
        """Smallest nonzero ``|k|`` on the lattice."""
        return min(_TWO_PI / L for L in self.lengths)

    @property
    def max_wavenumber(self) -> float:
        """Largest ``|k|`` among non-Nyquist modes."""
        return float(
            np.sqrt(sum((_TWO_PI * (n // 2 - 1) / L) ** 2 for n, L in zip(self.shape, self.lengths)))
        )

    def grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical coordinates, broadcastable to ``shape``."""
        n1, n2, n3 = self.shape
        L1, L2, L3 = self.lengths
        return (
            (np.arange(n1) * (L1 / n1))[:, None, None],
            (np.arange(n2) * (L2 / n2))[None, :, None],
            (np.arange(n3) * (L3 / n3))[None, None, :],
        )

    def describe(self) -> dict:
        return {"shape": list(self.shape), "lengths": list(self.lengths)}


def make_lattice(n: Union[int, Sequence[int]], L: Union[float, Sequence[float]] = _TWO_PI) -> FrequencyLattice:
    """Build a lattice; scalars give a cube, 3-sequences an anisotropic box.

    >>> make_lattice(8).wavenumbers[0].tolist()
    [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]
    """
    shape = (n,) * 3 if np.isscalar(n) else tuple(n)
    lengths = (L,) * 3 if np.isscalar(L) else tuple(L)
    return FrequencyLattice(shape, lengths)


# -- transforms ---------------------------------------------------------------

def _forward(lattice: FrequencyLattice, values: np.ndarray) -> np.ndarray:
    out = sfft.rfftn(values, axes=_AXES)
    out *= lattice.nyquist_free
    return out


def _inverse(lattice: FrequencyLattice, coeffs: np.ndarray) -> np.ndarray:
    return sfft.irfftn(coeffs, s=lattice.shape, axes=_AXES)


def _hermitian_repair(lattice: FrequencyLattice, coeffs: np.ndarray) -> np.ndarray:
    # Only the m3 = 0 plane stores both +m and -m; symmetrise it in place.
    n1, n2, _ = lattice.shape
    plane = coeffs[..., 0]
    i1 = (-np.arange(n1)) % n1
    i2 = (-np.arange(n2)) % n2
    mirrored = np.conj(plane[..., i1, :][..., :, i2])
    coeffs[..., 0] = 0.5 * (plane + mirrored)
    return coeffs


class ScalarField:
    """Real scalar field on a lattice, held by its half-spectrum.

    Treat instances as immutable: operations return new fields and the
    cached arrays are flagged read-only.
    """

    __slots__ = ("lattice", "_spectral", "_physical")

    def __init__(self, lattice: FrequencyLattice, spectral: np.ndarray):
        if spectral.shape != lattice.spectral_shape:
            raise ValueError(f"spectral shape {spectral.shape} != {lattice.spectral_shape}")
        spectral.setflags(write=False)
        self.lattice = lattice
        self._spectral = spectral
        self._physical = None

    @classmethod
    def from_physical(cls, lattice: FrequencyLattice, values) -> "ScalarField":
        values = np.asarray(values, dtype=float)
        values = np.broadcast_to(values, lattice.shape)
        return cls(lattice, _forward(lattice, values))

    @classmethod
    def from_spectral(cls, lattice: FrequencyLattice, coeffs, repair: bool = True) -> "ScalarField":
        coeffs = np.array(coeffs, dtype=complex)
        coeffs *= lattice.nyquist_free
        if repair:
            _hermitian_repair(lattice, coeffs)
        return cls(lattice, coeffs)

    @classmethod
    def zeros(cls, lattice: FrequencyLattice) -> "ScalarField":
        return cls(lattice, np.zeros(lattice.spectral_shape, dtype=complex))

    @property
    def spectral(self) -> np.ndarray:
        return self._spectral

    @property
    def physical(self) -> np.ndarray:
        if self._physical is None:
            values = _inverse(self.lattice, self._spectral)
            values.setflags(write=False)
            self._physical = values
        return self._physical

    @property
    def mean(self) -> float:
        return float(self._spectral[0, 0, 0].real) / self.lattice.size

    def is_zero(self) -> bool:
        return not np.any(self._spectral)

    def _check(self, other: "ScalarField"):
        if other.lattice != self.lattice:
            raise ValueError("fields live on different lattices")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return ScalarField(self.lattice, self._spectral + other._spectral)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return ScalarField(self.lattice, self._spectral - other._spectral)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.lattice, self._spectral * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.lattice, -self._spectral)

    def __repr__(self):
        return f"ScalarField(shape={self.lattice.shape}, lengths={self.lattice.lengths})"


class VelocityField:
    """Three scalar components on one lattice, stored as a stacked spectrum."""

    __slots__ = ("lattice", "_spectral", "_physical", "_components")

    def __init__(self, lattice: FrequencyLattice, spectral: np.ndarray):
        if spectral.shape != (3,) + lattice.spectral_shape:
            raise ValueError("velocity spectrum must have shape (3, *spectral_shape)")
        spectral.setflags(write=False)
        self.lattice = lattice
        self._spectral = spectral
        self._physical = None
        self._components = None

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VelocityField":
        if len(components) != 3:
            raise ValueError("need exactly three components")
        lattice = components[0].lattice
        if any(c.lattice != lattice for c in components):
            raise ValueError("components live on different lattices")
        return cls(lattice, np.stack([c.spectral for c in components]))

    @classmethod
    def from_physical(cls, lattice: FrequencyLattice, values) -> "VelocityField":
        values = np.broadcast_to(np.asarray(values, dtype=float), (3,) + lattice.shape)
        return cls(lattice, _forward(lattice, values))

    @classmethod
    def from_spectral(cls, lattice: FrequencyLattice, coeffs, repair: bool = True) -> "VelocityField":
        coeffs = np.array(coeffs, dtype=complex)
        coeffs *= lattice.nyquist_free
        if repair:
            _hermitian_repair(lattice, coeffs)
        return cls(lattice, coeffs)

    @classmethod
    def zeros(cls, lattice: FrequencyLattice) -> "VelocityField":
        return cls(lattice, np.zeros((3,) + lattice.spectral_shape, dtype=complex))

    @property
    def spectral(self) -> np.ndarray:
        return self._spectral

    @property
    def physical(self) -> np.ndarray:
        if self._physical is None:
            values = _inverse(self.lattice, self._spectral)
            values.setflags(write=False)
            self._physical = values
        return self._physical

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        if self._components is None:
            self._components = tuple(ScalarField(self.lattice, self._spectral[i]) for i in range(3))
        return self._components

    def __getitem__(self, i: int) -> ScalarField:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def is_zero(self) -> bool:
        return not np.any(self._spectral)

    def __add__(self, other: "VelocityField") -> "VelocityField":
        if other.lattice != self.lattice:
            raise ValueError("fields live on different lattices")
        return VelocityField(self.lattice, self._spectral + other._spectral)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        if other.lattice != self.lattice:
            raise ValueError("fields live on different lattices")
        return VelocityField(self.lattice, self._spectral - other._spectral)

    def __mul__(self, scalar: float) -> "VelocityField":
        return VelocityField(self.lattice, self._spectral * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "VelocityField":
        return VelocityField(self.lattice, -self._spectral)

    def __repr__(self):
        return f"VelocityField(shape={self.lattice.shape}, lengths={self.lattice.lengths})"


Field = Union[ScalarField, VelocityField]


def _like(f: Field, spectral: np.ndarray) -> Field:
    return type(f)(f.lattice, spectral)


# -- calculus -----------------------------------------------------------------

def derivative(f: ScalarField, axis: int) -> ScalarField:
    """Spectral partial derivative along ``axis`` (1, 2 or 3)."""
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    k = f.lattice.k[axis - 1]
    return ScalarField(f.lattice, 1j * k * f.spectral)


def gradient(f: ScalarField) -> VelocityField:
    k1, k2, k3 = f.lattice.k
    fh = f.spectral
    return VelocityField(f.lattice, np.stack([1j * k1 * fh, 1j * k2 * fh, 1j * k3 * fh]))


def _divergence_hat(lattice: FrequencyLattice, uh: np.ndarray) -> np.ndarray:
    k1, k2, k3 = lattice.k
    return 1j * (k1 * uh[0] + k2 * uh[1] + k3 * uh[2])


def divergence(u: VelocityField) -> ScalarField:
    return ScalarField(u.lattice, _divergence_hat(u.lattice, u.spectral))


def divergence_residual(u: VelocityField) -> float:
    """``max|div u| / max|grad u|`` on the grid (0 for the zero field)."""
    lat = u.lattice
    div = _inverse(lat, _divergence_hat(lat, u.spectral))
    k1, k2, k3 = lat.k
    grad_max = 0.0
    for kk in (k1, k2, k3):
        grad_max = max(grad_max, float(np.abs(_inverse(lat, 1j * kk * u.spectral)).max()))
    if grad_max == 0.0:
        return 0.0
    return float(np.abs(div).max()) / grad_max


def _leray_hat(lattice: FrequencyLattice, uh: np.ndarray) -> np.ndarray:
    k1, k2, k3 = lattice.k
    k2sum = lattice.k2
    with np.errstate(invalid="ignore", divide="ignore"):
        inv = np.where(k2sum > 0, 1.0 / np.where(k2sum > 0, k2sum, 1.0), 0.0)
    kdotu = (k1 * uh[0] + k2 * uh[1] + k3 * uh[2]) * inv
    return np.stack([uh[0] - k1 * kdotu, uh[1] - k2 * kdotu, uh[2] - k3 * kdotu])


def leray_project(u: VelocityField) -> VelocityField:
    """Project onto divergence-free fields: ``u_hat - k (k . u_hat) / |k|^2``.

    The mean (zero mode) passes through untouched.
    """
    return VelocityField(u.lattice, _leray_hat(u.lattice, u.spectral))


# -- norms ----------------------------------------------------------------------

def _lp_of_array(values: np.ndarray, p: float, cell_volume: float) -> float:
    if p == np.inf:
        return float(np.abs(values).max()) if values.size else 0.0
    if p == 2:
        return float(np.sqrt(np.vdot(values, values).real * cell_volume))
    a = np.abs(values)
    peak = a.max()
    if peak == 0.0:
        return 0.0
    # Scale by the peak so large p cannot overflow.
    return float(peak * (np.sum((a / peak) ** p) * cell_volume) ** (1.0 / p))


def _check_p(p: float):
    if not (p >= 1):
        raise ValueError(f"Lebesgue exponent p={p!r} must satisfy p >= 1")


def lp_norm(f: ScalarField, p: float) -> float:
    """Rectangle-rule ``L^p`` norm over the box (``p = inf`` gives the grid max)."""
    _check_p(p)
    if f.is_zero():
        return 0.0
    return _lp_of_array(f.physical, p, f.lattice.cell_volume)


def spectral_l2_norm(f: ScalarField) -> float:
    """``L^2`` norm from the coefficients (Parseval), no inverse transform."""
    lat = f.lattice
    power = np.sum(lat.hermitian_weight * np.abs(f.spectral) ** 2)
    return float(np.sqrt(power * lat.cell_volume / lat.size))


def fourier_lp_norm(f: ScalarField, q: float) -> float:
    """``L^q`` norm of the Fourier transform, as a Riemann sum over the lattice.

    Coefficients are converted to the continuous-transform convention
    ``f_hat(k) ~ dx^3 * rfftn(f)`` and integrated with the frequency cell
    volume ``(2*pi)^3 / V``.
    """
    _check_p(q)
    lat = f.lattice
    fhat = np.abs(f.spectral) * lat.cell_volume
    if q == np.inf:
        return float(fhat.max())
    dxi = _TWO_PI ** 3 / lat.volume
    return float((np.sum(lat.hermitian_weight * fhat ** q) * dxi) ** (1.0 / q))


# -- filtering and products -----------------------------------------------------

def dealias(f: Field) -> Field:
    """Zero every mode with ``|m_a| > n_a/3`` on some axis."""
    return _like(f, f.spectral * f.lattice.dealias_mask)


def multiply(f: ScalarField, g: ScalarField, dealiased: bool = True) -> ScalarField:
    """Pointwise product formed on the grid, optionally 2/3-truncated."""
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    out = _forward(f.lattice, f.physical * g.physical)
    if dealiased:
        out *= f.lattice.dealias_mask
    return ScalarField(f.lattice, out)


def resample(f: Field, lattice: FrequencyLattice) -> Field:
    """Move a field to another lattice with the same periods by zero-padding
    or truncating its spectrum."""
    src = f.lattice
    if not np.allclose(src.lengths, lattice.lengths, rtol=1e-14, atol=0):
        raise ValueError("resampling requires equal periods")
    lead = f.spectral.shape[:-3]
    out = np.zeros(lead + lattice.spectral_shape, dtype=complex)
    idx_src, idx_dst = [], []
    for a in range(3):
        m_src = src.modes[a]
        n_dst = lattice.shape[a]
        keep = (m_src > -n_dst // 2) & (m_src < n_dst // 2) if a < 2 else m_src < n_dst // 2
        idx_src.append(np.nonzero(keep)[0])
        idx_dst.append(m_src[keep] % n_dst if a < 2 else m_src[keep])
    scale = lattice.size / src.size
    out[(Ellipsis,) + np.ix_(*idx_dst)] = f.spectral[(Ellipsis,) + np.ix_(*idx_src)] * scale
    out *= lattice.nyquist_free
    return type(f)(lattice, out)


class CubeTransform:
    """Transforms between grid values and the coefficients inside the 2/3
    cube ``|m_a| <= n_a/3``, stored compactly.

    Axes 1 and 2 keep ``m = 0..K, -K..-1`` (``2K+1`` entries) and axis 3
    keeps ``m = 0..K``.  Planes known to be zero are skipped by the inverse
    transform; all elementwise work on compact arrays touches about 30% of
    the full half-spectrum.
    """

    def __init__(self, lattice: FrequencyLattice):
        self.lattice = lattice
        self.cut = tuple(n // 3 for n in lattice.shape)
        self.index = tuple(
            np.r_[0:K + 1, n - K:n] if a < 2 else np.arange(K + 1)
            for a, (n, K) in enumerate(zip(lattice.shape, self.cut))
        )
        w = lattice.wavenumbers
        self.k = (
            w[0][self.index[0]][:, None, None],
            w[1][self.index[1]][None, :, None],
            w[2][self.index[2]][None, None, :],
        )
        self.k2 = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        hw = np.full(self.cut[2] + 1, 2.0)
        hw[0] = 1.0
        self.hermitian_weight = hw[None, None, :]
        self.shape = (2 * self.cut[0] + 1, 2 * self.cut[1] + 1, self.cut[2] + 1)

    def compact(self, full: np.ndarray) -> np.ndarray:
        i0, i1, i2 = self.index
        return full[..., i0, :, :][..., :, i1, :][..., :, :, i2]

    def expand(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros(c.shape[:-3] + self.lattice.spectral_shape, dtype=complex)
        i0, i1, i2 = self.index
        out[(Ellipsis,) + np.ix_(i0, i1, i2)] = c
        return out

    def to_physical(self, c: np.ndarray) -> np.ndarray:
        n1, n2, n3 = self.lattice.shape
        K1, K2, _ = self.cut
        lead = c.shape[:-3]
        x = np.zeros(lead + (n1,) + c.shape[-2:], dtype=complex)
        x[..., :K1 + 1, :, :] = c[..., :K1 + 1, :, :]
        x[..., n1 - K1:, :, :] = c[..., K1 + 1:, :, :]
        x = sfft.ifft(x, axis=-3, overwrite_x=True)
        y = np.zeros(lead + (n1, n2, c.shape[-1]), dtype=complex)
        y[..., :, :K2 + 1, :] = x[..., :, :K2 + 1, :]
        y[..., :, n2 - K2:, :] = x[..., :, K2 + 1:, :]
        y = sfft.ifft(y, axis=-2, overwrite_x=True)
        return sfft.irfft(y, n=n3, axis=-1)

    def to_spectral(self, x: np.ndarray) -> np.ndarray:
        n1, n2, _ = self.lattice.shape
        K1, K2, K3 = self.cut
        a = sfft.rfft(x, axis=-1)[..., :K3 + 1]
        a = sfft.fft(a, axis=-2, overwrite_x=True)
        a = np.concatenate([a[..., :, :K2 + 1, :], a[..., :, n2 - K2:, :]], axis=-2)
        a = sfft.fft(a, axis=-3, overwrite_x=True)
        return np.concatenate([a[..., :K1 + 1, :, :], a[..., n1 - K1:, :, :]], axis=-3)
