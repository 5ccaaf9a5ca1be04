"""Potential theory on the parabolic space: Hardy-Littlewood maximal
functions (parabolic and anisotropic) and Riesz potentials.

The parabolic metric is rho((t,x),(s,y)) = sqrt|t-s| + |x-y| with periodic
(nearest-image) distances; balls in this metric have measure proportional
to radius^Q with Q = d + 2.  Maximal functions take the pointwise sup of
ball/box averages over a sampled radius ladder, so a larger ladder never
produces a smaller output.  Riesz potentials are periodic convolutions with
the kernel rho^-(Q - alpha), tabulated once in physical space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .field import SpaceTimeField, magnitude
from .normbank import (
    SupSamplingPlan,
    _cached_kernel_fft,
    _index_distances,
    _parabolic_ball_stencil,
)
from .spectral import _WORKERS

__all__ = [
    "AnisotropyVector",
    "RieszOrder",
    "parabolic_maximal",
    "anisotropic_maximal",
    "riesz_potential",
    "parabolic_distance_grid",
]


@dataclass(frozen=True)
class AnisotropyVector:
    """Per-axis dilation exponents a_i >= 1 for anisotropic boxes, with the
    mixed-norm exponent vector used in boundedness studies."""

    a: tuple
    p: tuple = ()

    def __post_init__(self):
        if not self.a or any(ai < 1 for ai in self.a):
            raise ValueError("anisotropy exponents must all be >= 1")
        if self.p and len(self.p) != len(self.a):
            raise ValueError("exponent vector length must match anisotropy vector")
        if any(pi <= 1 for pi in self.p):
            raise ValueError("mixed-norm exponents must be > 1")


@dataclass(frozen=True)
class RieszOrder:
    """Fractional integration order alpha in (0, Q)."""

    alpha: float
    Q: int

    def __post_init__(self):
        if not (0 < self.alpha < self.Q):
            raise ValueError(f"alpha must lie in (0, {self.Q}), got {self.alpha}")


def parabolic_maximal(field, plan=None):
    """Pointwise max over sampled radii of parabolic-ball averages of |f|.

    constant fields are fixed points; the output is a scalar field."""
    g = field.grid
    plan = (plan or SupSamplingPlan.default(g)).validate(g)
    a = magnitude(field)
    axes = tuple(range(1 + g.d))
    ahat = sfft.rfftn(a, axes=axes, workers=_WORKERS)
    out = np.zeros(g.shape)
    for rho in plan.radii:
        key = ("pball", g.Nt, g.Nx, g.d, g.dt, g.dx, rho)
        khat, count = _cached_kernel_fft(key, lambda: _parabolic_ball_stencil(g, rho))
        avg = sfft.irfftn(ahat * khat, s=g.shape, axes=axes, workers=_WORKERS) / count
        np.maximum(out, avg, out=out)
    np.clip(out, 0.0, None, out=out)
    return SpaceTimeField(g, "scalar", out)


def _axis_box_kernel_fft(n, spacing, half_width):
    dist = _index_distances(n, spacing)
    kern = (dist < half_width).astype(float)
    return sfft.rfft(kern), float(kern.sum())


def anisotropic_maximal(values, a, radii, spacings=None):
    """Anisotropic maximal function on a flattened n-axis field: pointwise
    sup over sampled r of box averages with per-axis half-widths r^a_i.

    values may be a SpaceTimeField (axes t, x1..xd with their grid spacings)
    or a plain ndarray with explicit spacings.  Box averages factor into
    1-D periodic convolutions, one per axis."""
    if isinstance(values, SpaceTimeField):
        g = values.grid
        arr = magnitude(values)
        spacings = (g.dt,) + (g.dx,) * g.d
    else:
        arr = np.abs(np.asarray(values, dtype=float))
        if spacings is None:
            raise ValueError("spacings required for bare arrays")
    a = tuple(a)
    if len(a) != arr.ndim or len(spacings) != arr.ndim:
        raise ValueError("anisotropy vector must have one exponent per axis")
    AnisotropyVector(a=a)
    out = np.zeros_like(arr)
    for r in radii:
        avg = arr
        for ax in range(arr.ndim):
            khat, count = _axis_box_kernel_fft(arr.shape[ax], spacings[ax], r ** a[ax])
            ahat = sfft.rfft(avg, axis=ax, workers=_WORKERS)
            shape = [1] * arr.ndim
            shape[ax] = khat.size
            avg = sfft.irfft(
                ahat * khat.reshape(shape), n=arr.shape[ax], axis=ax, workers=_WORKERS
            )
            avg /= count
        np.maximum(out, avg, out=out)
    np.clip(out, 0.0, None, out=out)
    if isinstance(values, SpaceTimeField):
        return SpaceTimeField(values.grid, "scalar", out)
    return out


def parabolic_distance_grid(grid):
    """Nearest-image parabolic distance from the origin cell, shape
    (Nt,) + (Nx,)*d; the origin entry is 0."""
    tdist = np.sqrt(_index_distances(grid.Nt, grid.dt)).reshape(
        (grid.Nt,) + (1,) * grid.d
    )
    r2 = np.zeros((1,) * (1 + grid.d))
    for ax in range(grid.d):
        dist = _index_distances(grid.Nx, grid.dx)
        shape = [1] * (1 + grid.d)
        shape[1 + ax] = grid.Nx
        r2 = r2 + dist.reshape(shape) ** 2
    return tdist + np.sqrt(r2)


def _riesz_kernel(grid, alpha, subsamples=4):
    """Kernel rho^-(Q - alpha) on the lattice.  The singular origin cell is
    replaced by the cell average from subsampled quadrature (subsamples
    points per axis), preserving positivity and first-order accuracy."""
    Q = grid.Q
    rho = parabolic_distance_grid(grid)
    with np.errstate(divide="ignore"):
        kern = np.where(rho > 0, rho, 1.0) ** (alpha - Q)
    # cell-averaged value at the origin: midpoint subsampling of the cell
    offs_t = (np.arange(subsamples) + 0.5) / subsamples - 0.5
    offs_x = offs_t.copy()
    tt = (offs_t * grid.dt).reshape((subsamples,) + (1,) * grid.d)
    r2 = np.zeros((1,) * (1 + grid.d))
    for ax in range(grid.d):
        xx = offs_x * grid.dx
        shape = [1] * (1 + grid.d)
        shape[1 + ax] = subsamples
        r2 = r2 + xx.reshape(shape) ** 2
    rho_cell = np.sqrt(np.abs(tt)) + np.sqrt(r2)
    kern.flat[0] = float(np.mean(rho_cell ** (alpha - Q)))
    return kern


def riesz_potential(field, alpha, subsamples=4):
    """Fractional integral: periodic convolution of a real field with the
    parabolic kernel rho^-(Q - alpha), cell measure included."""
    g = field.grid
    RieszOrder(alpha=float(alpha), Q=g.Q)
    if np.iscomplexobj(field.samples):
        raise ValueError("riesz potential defined for real fields")
    if field.rank != "scalar":
        raise ValueError("riesz potential defined for scalar fields")
    axes = tuple(range(1 + g.d))
    key = ("riesz", g.Nt, g.Nx, g.d, g.dt, g.dx, float(alpha), subsamples)
    khat, _ = _cached_kernel_fft(key, lambda: _riesz_kernel(g, alpha, subsamples))
    ahat = sfft.rfftn(field.samples, axes=axes, workers=_WORKERS)
    out = sfft.irfftn(ahat * khat, s=g.shape, axes=axes, workers=_WORKERS) * g.cell
    return SpaceTimeField(g, "scalar", out)
