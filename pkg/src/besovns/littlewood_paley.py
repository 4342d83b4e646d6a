"""Dyadic partition of unity, frequency blocks and homogeneous Besov norms.

The radial bump is built from the smooth step ``T(t) = h(t)/(h(t)+h(1-t))``
with ``h(t) = exp(-1/t)`` for ``t > 0``.  The cutoff ``chi`` equals 1 on
``|xi| <= 3/4`` and vanishes for ``|xi| >= 4/3``; the annular bump is
``phi(xi) = chi(xi/2) - chi(xi)``, supported in ``3/4 <= |xi| <= 8/3``, and
``sum_j phi(2^-j xi)`` telescopes to 1 away from the origin.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .spectral import (
    FrequencyLattice,
    ScalarField,
    VelocityField,
    _inverse,
    _lp_of_array,
)

__all__ = [
    "smooth_step",
    "cutoff",
    "bump",
    "BesovIndex",
    "DyadicPartition",
    "DyadicSpectrum",
    "build_partition",
    "block",
    "low_pass",
    "active_blocks",
    "block_fields",
    "dyadic_spectrum",
    "dyadic_spectra",
    "besov_norm",
    "vector_besov_norm",
]

INNER = 3.0 / 4.0
OUTER = 8.0 / 3.0
_CHI_EDGE = 4.0 / 3.0

# Coefficients below this fraction of the peak are treated as absent when
# deciding which blocks carry content.
SUPPORT_TOL = 1e-15

# Multipliers are cached per partition only below this many spectral entries.
_CACHE_LIMIT = 1 << 21


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
        out = a / (a + b)
    return np.where(t >= 1, 1.0, np.where(t <= 0, 0.0, out))


def cutoff(r) -> np.ndarray:
    """Radial low-pass ``chi``: 1 on ``[0, 3/4]``, 0 on ``[4/3, inf)``."""
    return smooth_step((_CHI_EDGE - np.asarray(r, dtype=float)) / (_CHI_EDGE - INNER))


def bump(r) -> np.ndarray:
    """Annular bump ``phi(r) = chi(r/2) - chi(r)``."""
    r = np.asarray(r, dtype=float)
    return cutoff(0.5 * r) - cutoff(r)


def _ell(p: float) -> float:
    return 0.0 if p == np.inf else 1.0 / p


@dataclass(frozen=True)
class BesovIndex:
    """Regularity ``s``, Lebesgue exponent ``p`` and summability ``r``."""

    s: float
    p: float
    r: float

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (v >= 1):
                raise ValueError(f"Besov index {name}={v!r} must lie in [1, inf]")
        if not math.isfinite(self.s):
            raise ValueError("regularity s must be finite")

    @classmethod
    def coerce(cls, idx) -> "BesovIndex":
        if isinstance(idx, BesovIndex):
            return idx
        s, p, r = idx
        return cls(float(s), float(p), float(r))


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Usable blocks ``j_min..j_max`` of the partition on one lattice.

    ``j`` is usable when the annulus ``2^j [3/4, 8/3]`` contains a nonzero
    lattice frequency, so the bumps sum to 1 at every nonzero mode.
    """

    lattice: FrequencyLattice
    j_min: int
    j_max: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def js(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def _cached(self, key, build):
        if key in self._cache:
            return self._cache[key]
        value = build()
        if self.lattice.size <= _CACHE_LIMIT:
            value.setflags(write=False)
            self._cache[key] = value
        return value

    def bump(self, j: int) -> np.ndarray:
        """``phi(2^-j |xi|)`` on the spectral array (zeros outside the range)."""
        if j < self.j_min or j > self.j_max:
            return np.zeros(self.lattice.spectral_shape)
        return self._cached(("bump", j), lambda: bump(self.lattice.kabs * 2.0 ** (-j)))

    def low(self, j: int) -> np.ndarray:
        """Multiplier of ``S_j``: the blocks ``k <= j-1`` plus the zero mode."""
        top = min(j - 1, self.j_max)
        if top < self.j_min:
            out = np.zeros(self.lattice.spectral_shape)
            out[0, 0, 0] = 1.0
            return out
        # Telescoped sum; chi(2^-j_min xi) vanishes at every nonzero mode.
        def build():
            m = cutoff(self.lattice.kabs * 2.0 ** (-(top + 1)))
            m[0, 0, 0] = 1.0
            return m

        return self._cached(("low", top), build)

    def partition_sum(self) -> np.ndarray:
        """``sum_j phi(2^-j xi)`` over the usable range (diagnostic)."""
        total = np.zeros(self.lattice.spectral_shape)
        for j in self.js:
            total += self.bump(j)
        return total

    def describe(self) -> dict:
        return {
            "j_min": self.j_min,
            "j_max": self.j_max,
            "bump": "phi(xi)=chi(xi/2)-chi(xi), chi=T((4/3-|xi|)/(4/3-3/4)), T(t)=h(t)/(h(t)+h(1-t)), h=exp(-1/t)",
        }


@lru_cache(maxsize=16)
def build_partition(lattice: FrequencyLattice) -> DyadicPartition:
    kmin = lattice.min_wavenumber
    kmax = float(lattice.kabs.max())
    j_min = math.ceil(math.log2(kmin / OUTER) - 1e-12)
    j_max = math.floor(math.log2(kmax / INNER) + 1e-12)
    return DyadicPartition(lattice, j_min, j_max)


def _partition(lattice: FrequencyLattice, P: DyadicPartition | None) -> DyadicPartition:
    if P is None:
        return build_partition(lattice)
    if P.lattice != lattice:
        raise ValueError("partition was built for another lattice")
    return P


def active_blocks(f: ScalarField, P: DyadicPartition | None = None) -> list[int]:
    """Block indices whose annulus meets the spectral support of ``f``."""
    P = _partition(f.lattice, P)
    a = np.abs(f.spectral)
    peak = a.max() if a.size else 0.0
    if peak == 0.0:
        return []
    radii = f.lattice.kabs[a > SUPPORT_TOL * peak]
    radii = radii[radii > 0]
    if radii.size == 0:
        return []
    rmin, rmax = float(radii.min()), float(radii.max())
    return [j for j in P.js if 2.0 ** j * INNER < rmax and 2.0 ** j * OUTER > rmin]


def block(f: ScalarField, j: int, P: DyadicPartition | None = None) -> ScalarField:
    """``Delta_j f``; indices outside the usable range give the zero field."""
    P = _partition(f.lattice, P)
    return ScalarField(f.lattice, f.spectral * P.bump(j))


def low_pass(f: ScalarField, j: int, P: DyadicPartition | None = None) -> ScalarField:
    """``S_j f``: blocks below ``j`` plus the mean."""
    P = _partition(f.lattice, P)
    return ScalarField(f.lattice, f.spectral * P.low(j))


def block_fields(f: ScalarField, P: DyadicPartition | None = None,
                 js: Iterable[int] | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(j, physical Delta_j f)`` for the active (or requested) blocks."""
    P = _partition(f.lattice, P)
    for j in (active_blocks(f, P) if js is None else js):
        yield j, _inverse(f.lattice, f.spectral * P.bump(j))


@dataclass
class DyadicSpectrum:
    """Block norms ``(j, ||Delta_j f||_p)``; absent blocks count as zero."""

    entries: list[tuple[int, float]]
    p: float
    warnings: list[str] = field(default_factory=list)

    def besov(self, s: float, r: float) -> float:
        if not (r >= 1):
            raise ValueError(f"summability r={r!r} must lie in [1, inf]")
        if not self.entries:
            return 0.0
        vals = np.array([2.0 ** (j * s) * v for j, v in self.entries])
        if r == np.inf:
            return float(vals.max())
        peak = vals.max()
        if peak == 0.0:
            return 0.0
        return float(peak * np.sum((vals / peak) ** r) ** (1.0 / r))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "block_norm"])
        for j, v in self.entries:
            w.writerow([j, repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _boundary_warnings(f: ScalarField, P: DyadicPartition) -> list[str]:
    lat = f.lattice
    power = lat.hermitian_weight * np.abs(f.spectral) ** 2
    total = float(power.sum() - power[0, 0, 0])
    if total == 0.0:
        return []
    kmin, kmax = lat.min_wavenumber, lat.max_wavenumber
    notes = []
    for j in P.js:
        partial_low = 2.0 ** j * INNER < kmin
        partial_high = 2.0 ** j * OUTER > kmax
        if not (partial_low or partial_high):
            continue
        mass = float(np.sum(power * P.bump(j) ** 2))
        if mass > 1e-6 * total:
            side = "low" if partial_low else "high"
            notes.append(
                f"block j={j} only partly represented on the lattice ({side} end) "
                f"holds {mass / total:.3e} of the spectral mass"
            )
    return notes


def dyadic_spectra(f: ScalarField, ps: Sequence[float], P: DyadicPartition | None = None,
                   check_boundary: bool = False) -> dict[float, DyadicSpectrum]:
    """Block norms of ``f`` for several exponents from one pass over the blocks."""
    P = _partition(f.lattice, P)
    for p in ps:
        if not (p >= 1):
            raise ValueError(f"Lebesgue exponent p={p!r} must satisfy p >= 1")
    dv = f.lattice.cell_volume
    entries: dict[float, list] = {p: [] for p in ps}
    for j, values in block_fields(f, P):
        for p in ps:
            entries[p].append((j, _lp_of_array(values, p, dv)))
    notes = _boundary_warnings(f, P) if check_boundary else []
    return {p: DyadicSpectrum(entries[p], p, list(notes)) for p in ps}


def dyadic_spectrum(f: ScalarField, p: float, P: DyadicPartition | None = None,
                    check_boundary: bool = True) -> DyadicSpectrum:
    return dyadic_spectra(f, [p], P, check_boundary)[p]


def besov_norm(f: ScalarField, idx, P: DyadicPartition | None = None) -> float:
    """Homogeneous ``B^s_{p,r}`` norm: ``l^r`` over ``j`` of ``2^{js} ||Delta_j f||_p``.

    The zero mode never enters, so the mean of ``f`` is ignored.
    """
    idx = BesovIndex.coerce(idx)
    return dyadic_spectra(f, [idx.p], P)[idx.p].besov(idx.s, idx.r)


def vector_besov_norm(u: VelocityField, idx, P: DyadicPartition | None = None) -> float:
    """Sum of the component norms."""
    return sum(besov_norm(c, idx, P) for c in u.components)


Field = Union[ScalarField, VelocityField]
