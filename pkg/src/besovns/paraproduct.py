"""Bony decomposition and empirical checks of paraproduct / product estimates.

For ``f, g`` on a lattice:

    T_f g  = sum_j S_{j-1} f * Delta_j g
    R(f,g) = sum_j Delta_j f * (Delta_{j-1} + Delta_j + Delta_{j+1}) g

Pointwise products are taken on the grid and 2/3-truncated.  Both the
aliasing and the truncation are linear in each factor, so
``fg = T_f g + T_g f + R(f,g) + mean(f) mean(g)`` holds to round-off on the
lattice; the last term is the product of the two zero modes, which the
homogeneous blocks never see.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .littlewood_paley import (
    DyadicPartition,
    _partition,
    active_blocks,
    besov_norm,
    block_fields,
)
from .spectral import ScalarField, _forward, lp_norm

__all__ = [
    "BlockRangeWarning",
    "InequalityReport",
    "LemmaParams",
    "bony_decomposition",
    "paraproduct",
    "remainder",
    "bony_residual",
    "lemma21_ratios",
    "product_ratio",
    "reports_to_csv",
]

SPACE_DIM = 3


class BlockRangeWarning(UserWarning):
    """Spectral content reaches the first or last usable block."""


def _finish(f: ScalarField, values: np.ndarray) -> ScalarField:
    out = _forward(f.lattice, values)
    out *= f.lattice.dealias_mask
    return ScalarField(f.lattice, out)


def _blocks(f: ScalarField, P: DyadicPartition) -> dict[int, np.ndarray]:
    return dict(block_fields(f, P))


def _paraproduct_values(f_mean: float, fb: dict, gb: dict, shape) -> np.ndarray:
    """Grid values of ``sum_j S_{j-1}f Delta_j g`` from precomputed blocks."""
    out = np.zeros(shape)
    low = np.full(shape, f_mean) if f_mean != 0.0 else None
    f_js = sorted(fb)
    i = 0
    for j in sorted(gb):
        # Fold in f-blocks k <= j-2 (S_{j-1} sums k <= j-2).
        while i < len(f_js) and f_js[i] <= j - 2:
            low = fb[f_js[i]].copy() if low is None else low + fb[f_js[i]]
            i += 1
        if low is not None:
            out += low * gb[j]
    return out


def _remainder_values(fb: dict, gb: dict, shape) -> np.ndarray:
    out = np.zeros(shape)
    for j, fj in fb.items():
        near = [gb[k] for k in (j - 1, j, j + 1) if k in gb]
        if near:
            out += fj * sum(near)
    return out


def bony_decomposition(f: ScalarField, g: ScalarField, P: DyadicPartition | None = None
                       ) -> tuple[ScalarField, ScalarField, ScalarField]:
    """``(T_f g, T_g f, R(f,g))`` sharing one set of block transforms."""
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    P = _partition(f.lattice, P)
    fb, gb = _blocks(f, P), _blocks(g, P)
    shape = f.lattice.shape
    return (
        _finish(f, _paraproduct_values(f.mean, fb, gb, shape)),
        _finish(f, _paraproduct_values(g.mean, gb, fb, shape)),
        _finish(f, _remainder_values(fb, gb, shape)),
    )


def paraproduct(f: ScalarField, g: ScalarField, P: DyadicPartition | None = None) -> ScalarField:
    """``T_f g``: low frequencies of ``f`` against each block of ``g``."""
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    P = _partition(f.lattice, P)
    values = _paraproduct_values(f.mean, _blocks(f, P), _blocks(g, P), f.lattice.shape)
    return _finish(f, values)


def remainder(f: ScalarField, g: ScalarField, P: DyadicPartition | None = None) -> ScalarField:
    """``R(f,g)``: products of blocks whose indices differ by at most one."""
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    P = _partition(f.lattice, P)
    return _finish(f, _remainder_values(_blocks(f, P), _blocks(g, P), f.lattice.shape))


def _touches_boundary(f: ScalarField, P: DyadicPartition) -> bool:
    js = active_blocks(f, P)
    return bool(js) and (js[0] <= P.j_min or js[-1] >= P.j_max)


def bony_residual(f: ScalarField, g: ScalarField, P: DyadicPartition | None = None,
                  relative: bool = True) -> float:
    """Max-norm gap between ``fg`` and ``T_f g + T_g f + R(f,g)`` (plus the
    product of means).

    With ``relative=True`` the gap is divided by ``||f||_inf ||g||_inf``.
    Emits :class:`BlockRangeWarning` when ``f`` or ``g`` reaches the first
    or last usable block.
    """
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    P = _partition(f.lattice, P)
    if f.is_zero() or g.is_zero():
        return 0.0
    if _touches_boundary(f, P) or _touches_boundary(g, P):
        warnings.warn(
            f"spectral content reaches block {P.j_min} or {P.j_max}; "
            "the block sums may not cover it",
            BlockRangeWarning,
            stacklevel=2,
        )
    fb, gb = _blocks(f, P), _blocks(g, P)
    shape = f.lattice.shape
    pieces = (
        _paraproduct_values(f.mean, fb, gb, shape)
        + _paraproduct_values(g.mean, gb, fb, shape)
        + _remainder_values(fb, gb, shape)
        + f.mean * g.mean
    )
    gap = _finish(f, f.physical * g.physical - pieces)
    err = float(np.abs(gap.physical).max())
    if not relative:
        return err
    scale = float(np.abs(f.physical).max() * np.abs(g.physical).max())
    return err / scale if scale > 0 else 0.0


# -- inequality reports ---------------------------------------------------------

@dataclass
class InequalityReport:
    """One evaluation of an estimate ``lhs <= C * rhs_factor``."""

    lhs: float
    rhs_factor: float
    sample_id: int | None = None
    parameters: dict = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return not (self.rhs_factor > 0)

    @property
    def ratio(self) -> float:
        if self.degenerate:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs_factor

    def row(self) -> dict:
        out = {"sample_id": self.sample_id}
        out.update(self.parameters)
        out.update(lhs=self.lhs, rhs_factor=self.rhs_factor, ratio=self.ratio,
                   degenerate=self.degenerate)
        return out


def _inv(x: float) -> float:
    return 0.0 if x == np.inf else 1.0 / x


@dataclass(frozen=True)
class LemmaParams:
    """Indices for the paraproduct and remainder estimates.

    ``p, p1, p2`` must satisfy ``1/p = 1/p1 + 1/p2``; ``r, r1, r2`` satisfy
    ``1/r = 1/r1 + 1/r2`` where the split is used; ``t = t1 + t2``.
    """

    s: float = 0.5
    t: float = 1.0
    t1: float = 0.5
    t2: float = 0.5
    p: float = 2.0
    p1: float = np.inf
    p2: float = 2.0
    r: float = 1.0
    r1: float = np.inf
    r2: float = 1.0

    def validate(self, variant: int):
        if variant not in (1, 2, 3):
            raise ValueError("variant must be 1, 2 or 3")
        for name in ("p", "p1", "p2", "r", "r1", "r2"):
            v = getattr(self, name)
            if not (v >= 1):
                raise ValueError(f"{name}={v!r} must lie in [1, inf]")
        if not math.isclose(_inv(self.p), _inv(self.p1) + _inv(self.p2), abs_tol=1e-12):
            raise ValueError("indices must satisfy 1/p = 1/p1 + 1/p2")
        if variant in (2, 3) and not math.isclose(_inv(self.r), _inv(self.r1) + _inv(self.r2),
                                                  abs_tol=1e-12):
            raise ValueError("indices must satisfy 1/r = 1/r1 + 1/r2")
        if variant == 2 and not self.t > 0:
            raise ValueError("the low-frequency regularity loss t must be positive")
        if variant == 3 and not (self.t1 + self.t2 > 0):
            raise ValueError("the remainder estimate needs t1 + t2 > 0")
        if variant == 3 and not math.isclose(self.t, self.t1 + self.t2, abs_tol=1e-12):
            raise ValueError("indices must satisfy t = t1 + t2")

    def as_dict(self, variant: int) -> dict:
        keys = {
            1: ("s", "p", "p1", "p2", "r"),
            2: ("s", "t", "p", "p1", "p2", "r", "r1", "r2"),
            3: ("t", "t1", "t2", "p", "p1", "p2", "r", "r1", "r2"),
        }[variant]
        return {k: getattr(self, k) for k in keys}


def lemma21_ratios(f: ScalarField, g: ScalarField, variant: int,
                   params: LemmaParams | None = None, P: DyadicPartition | None = None,
                   sample_id: int | None = None) -> InequalityReport:
    """Both sides of one of the three paraproduct/remainder estimates.

    variant 1: ``||T_f g||_{B^s_{p,r}}``  vs  ``||f||_{L^p1} ||g||_{B^s_{p2,r}}``
    variant 2: ``||T_f g||_{B^{s-t}_{p,r}}``  vs  ``||f||_{B^{-t}_{p1,r1}} ||g||_{B^s_{p2,r2}}``
    variant 3: ``||R(f,g)||_{B^t_{p,r}}``  vs  ``||f||_{B^t1_{p1,r1}} ||g||_{B^t2_{p2,r2}}``
    """
    q = params or LemmaParams()
    q.validate(variant)
    P = _partition(f.lattice, P)
    if variant == 1:
        lhs = besov_norm(paraproduct(f, g, P), (q.s, q.p, q.r), P)
        rhs = lp_norm(f, q.p1) * besov_norm(g, (q.s, q.p2, q.r), P)
    elif variant == 2:
        lhs = besov_norm(paraproduct(f, g, P), (q.s - q.t, q.p, q.r), P)
        rhs = besov_norm(f, (-q.t, q.p1, q.r1), P) * besov_norm(g, (q.s, q.p2, q.r2), P)
    else:
        lhs = besov_norm(remainder(f, g, P), (q.t, q.p, q.r), P)
        rhs = besov_norm(f, (q.t1, q.p1, q.r1), P) * besov_norm(g, (q.t2, q.p2, q.r2), P)
    return InequalityReport(lhs, rhs, sample_id, {"variant": variant, **q.as_dict(variant)})


def check_product_indices(s1: float, s2: float, p: float, d: int = SPACE_DIM):
    if not (2 <= p):
        raise ValueError(f"product estimate needs 2 <= p <= inf, got p={p!r}")
    crit = d * _inv(p)
    if s1 > crit + 1e-12 or s2 > crit + 1e-12:
        raise ValueError(f"product estimate needs s1, s2 <= d/p = {crit:g}; got s1={s1:g}, s2={s2:g}")
    if not (s1 + s2 > d * max(0.0, 2 * _inv(p) - 1)):
        raise ValueError("product estimate needs s1 + s2 > d*max(0, 2/p - 1)")


def product_ratio(f: ScalarField, g: ScalarField, s1: float, s2: float, p: float,
                  P: DyadicPartition | None = None, sample_id: int | None = None
                  ) -> InequalityReport:
    """``||fg||_{B^{s1+s2-3/p}_{p,1}}`` against ``||f||_{B^s1_{p,1}} ||g||_{B^s2_{p,1}}``."""
    check_product_indices(s1, s2, p)
    if f.lattice != g.lattice:
        raise ValueError("fields live on different lattices")
    P = _partition(f.lattice, P)
    fg = _finish(f, f.physical * g.physical)
    lhs = besov_norm(fg, (s1 + s2 - SPACE_DIM * _inv(p), p, 1), P)
    rhs = besov_norm(f, (s1, p, 1), P) * besov_norm(g, (s2, p, 1), P)
    return InequalityReport(lhs, rhs, sample_id, {"s1": s1, "s2": s2, "p": p})


def reports_to_csv(reports: Iterable[InequalityReport], path=None, header: str | None = None) -> str:
    """CSV with ``sample_id``, parameters, ``lhs``, ``rhs_factor``, ``ratio``."""
    rows = [r.row() for r in reports]
    buf = io.StringIO()
    if header:
        buf.write(header)
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def run_ensemble(evaluate: Callable[[int], InequalityReport], samples: Sequence[int]) -> list[InequalityReport]:
    """Evaluate ``evaluate(sample_id)`` for each id, in order."""
    return [evaluate(i) for i in samples]
