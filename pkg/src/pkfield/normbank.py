"""Norm bank: mixed Lebesgue, Krylov E/F, parabolic Morrey and parabolic
Besov norms, and the regularizing-flow decay profile.

The sup over (radius, center) in the localized norms is discretized by a
dyadic-radius, strided-center sampling plan.  All local sums use the lattice
cell measure dt * dx^d and run in a fixed ascending-index order, so every
norm here is a deterministic (plan-dependent) lower bound of its continuum
counterpart: enlarging the plan never decreases the value.

Localized norms are evaluated for every lattice center at once through
periodic FFT convolution with the ball/window stencils, then maximized over
the plan's strided centers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .field import SpaceTimeField, magnitude
from .spectral import gauss_flow, parabolic_frequency, _WORKERS

__all__ = [
    "ExponentTriple",
    "CylinderSpec",
    "SupSamplingPlan",
    "NormResult",
    "DecayProfile",
    "mixed_norm",
    "iterated_norm",
    "krylov_norm",
    "local_cylinder_value",
    "morrey_norm",
    "besov_heat_norm",
    "besov_lp_norm",
    "default_theta_plan",
    "parabolic_cutoff",
    "decay_profile",
    "fit_decay_exponent",
    "region_mask",
]


@dataclass(frozen=True)
class ExponentTriple:
    """Integrability/smoothness exponents (p, q, beta) with p, q > 1 and
    0 < beta <= 2/p + d/q.

    The admissible range is closed at the top end: the boundary value
    beta = 2/p + d/q (weight exponent zero) is accepted and corresponds to
    the plain mixed-norm case.
    """

    p: float
    q: float
    beta: float

    def __post_init__(self):
        if not (self.p > 1 and self.q > 1):
            raise ValueError(f"exponents must satisfy p, q > 1, got ({self.p}, {self.q})")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    def check_admissible(self, d):
        limit = 2.0 / self.p + d / self.q
        if self.beta > limit + 1e-12:
            raise ValueError(
                f"inadmissible triple: beta={self.beta} > 2/p + d/q = {limit:.6g} (d={d})"
            )
        return self

    def weight_exponent(self, d):
        return self.beta - 2.0 / self.p - d / self.q

    def scaled(self, factor, beta_shift):
        """Derived triple (p/factor, q/factor, beta + beta_shift)."""
        return ExponentTriple(self.p / factor, self.q / factor, self.beta + beta_shift)

    def as_tuple(self):
        return (self.p, self.q, self.beta)


def _as_triple(triple):
    if isinstance(triple, ExponentTriple):
        return triple
    return ExponentTriple(*triple)


@dataclass(frozen=True)
class CylinderSpec:
    """A localization region: parabolic ball B_rho or cylinder C_rho around a
    lattice center (time index, spatial index tuple)."""

    center: tuple
    radius: float
    kind: str = "cylinder"  # "ball" | "cylinder"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("region radius must be positive")
        if self.kind not in ("ball", "cylinder"):
            raise ValueError(f"unknown region kind {self.kind!r}")


@dataclass(frozen=True)
class SupSamplingPlan:
    """Dyadic radii and a center stride discretizing the sup over
    (rho, t, x)."""

    radii: tuple
    stride: int = 1

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ValueError("plan needs positive radii")

    @classmethod
    def default(cls, grid, rho_min=None, rho_max=None, stride=None):
        """Dyadic radii from 2*dx up to L/4, centers every Nx/16 points."""
        lo = 2.0 * grid.dx if rho_min is None else float(rho_min)
        hi = grid.L / 4.0 if rho_max is None else float(rho_max)
        if hi > grid.L / 4.0 + 1e-12:
            raise ValueError(f"rho_max {hi} exceeds L/4 = {grid.L / 4.0}")
        radii = []
        r = lo
        while r <= hi * (1 + 1e-12):
            radii.append(r)
            r *= 2.0
        if not radii:
            raise ValueError("empty radius ladder; check rho_min <= rho_max")
        s = max(1, grid.Nx // 16) if stride is None else int(stride)
        return cls(radii=tuple(radii), stride=s)

    def validate(self, grid):
        if max(self.radii) > grid.L / 4.0 + 1e-12:
            raise ValueError("plan radius exceeds L/4")
        return self


@dataclass(frozen=True)
class NormResult:
    """Value of a localized norm together with the cylinder attaining it."""

    value: float
    kind: str
    exponents: tuple
    argmax: CylinderSpec
    plan: SupSamplingPlan

    def __float__(self):
        return float(self.value)

    def to_json(self):
        return json.dumps(
            {
                "norm_kind": self.kind,
                "exponents": list(self.exponents),
                "value": self.value,
                "argmax_center": [int(self.argmax.center[0])]
                + [int(i) for i in self.argmax.center[1]],
                "argmax_radius": self.argmax.radius,
                "plan": {"radii": list(self.plan.radii), "stride": self.plan.stride},
            }
        )


# ---------------------------------------------------------------------------
# Stencils and periodic convolution


def _index_distances(n, spacing):
    j = np.arange(n)
    return np.minimum(j, n - j) * spacing


def _spatial_ball_stencil(grid, rho):
    """Indicator of |x| < rho on the periodic spatial lattice (origin cell
    included), shape (Nx,)*d."""
    r2 = np.zeros((1,) * grid.d)
    for ax in range(grid.d):
        dist = _index_distances(grid.Nx, grid.dx)
        shape = [1] * grid.d
        shape[ax] = grid.Nx
        r2 = r2 + dist.reshape(shape) ** 2
    return (np.sqrt(r2) < rho).astype(float)


def _time_window_stencil(grid, rho):
    """Indicator of |t| < rho^2 on the periodic time circle, shape (Nt,)."""
    dist = _index_distances(grid.Nt, grid.dt)
    return (dist < rho * rho).astype(float)


def _parabolic_ball_stencil(grid, rho):
    """Indicator of sqrt|t| + |x| < rho, shape (Nt,) + (Nx,)*d."""
    tdist = np.sqrt(_index_distances(grid.Nt, grid.dt)).reshape(
        (grid.Nt,) + (1,) * grid.d
    )
    r2 = np.zeros((1,) * (1 + grid.d))
    for ax in range(grid.d):
        dist = _index_distances(grid.Nx, grid.dx)
        shape = [1] * (1 + grid.d)
        shape[1 + ax] = grid.Nx
        r2 = r2 + dist.reshape(shape) ** 2
    return (tdist + np.sqrt(r2) < rho).astype(float)


_KERNEL_CACHE = {}
_KERNEL_CACHE_MAX_ELEMS = 2**21  # skip caching transforms of very large kernels


def _cached_kernel_fft(key, builder):
    """FFT of a stencil kernel (over all its axes), with the cell count.

    Small transforms are memoized; very large ones are recomputed to cap
    memory."""
    if key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]
    kern = builder()
    khat = sfft.rfftn(kern, workers=_WORKERS)
    count = float(kern.sum())
    if kern.size <= _KERNEL_CACHE_MAX_ELEMS:
        if len(_KERNEL_CACHE) > 64:
            _KERNEL_CACHE.clear()
        _KERNEL_CACHE[key] = (khat, count)
    return khat, count


def _circ_conv_space(a, grid, rho):
    """Periodic convolution of a real nonnegative array (Nt, Nx..) with the
    spatial ball stencil; clipped at zero against FFT noise."""
    axes = tuple(range(1, 1 + grid.d))
    key = ("ball", grid.Nx, grid.d, grid.dx, rho)
    khat, _ = _cached_kernel_fft(key, lambda: _spatial_ball_stencil(grid, rho))
    ahat = sfft.rfftn(a, axes=axes, workers=_WORKERS)
    out = sfft.irfftn(ahat * khat, s=(grid.Nx,) * grid.d, axes=axes, workers=_WORKERS)
    return np.clip(out, 0.0, None)


def _circ_conv_time(a, grid, rho):
    key = ("window", grid.Nt, grid.dt, rho)
    khat, _ = _cached_kernel_fft(key, lambda: _time_window_stencil(grid, rho))
    ahat = sfft.rfft(a, axis=0, workers=_WORKERS)
    # khat has shape (Nt//2+1,); broadcast along trailing axes
    khat_b = khat.reshape((-1,) + (1,) * (a.ndim - 1))
    out = sfft.irfft(ahat * khat_b, n=grid.Nt, axis=0, workers=_WORKERS)
    return np.clip(out, 0.0, None)


def _circ_conv_spacetime(a, grid, rho):
    axes = tuple(range(1 + grid.d))
    key = ("pball", grid.Nt, grid.Nx, grid.d, grid.dt, grid.dx, rho)
    khat, count = _cached_kernel_fft(key, lambda: _parabolic_ball_stencil(grid, rho))
    ahat = sfft.rfftn(a, axes=axes, workers=_WORKERS)
    out = sfft.irfftn(ahat * khat, s=grid.shape, axes=axes, workers=_WORKERS)
    return np.clip(out, 0.0, None), count


def _strided_max(values, grid, stride):
    """Max over strided centers; returns (value, center index tuple)."""
    sl = (slice(None, None, stride),) * (1 + grid.d)
    sub = values[sl]
    flat = int(np.argmax(sub))
    idx = np.unravel_index(flat, sub.shape)
    center = tuple(int(i * stride) for i in idx)
    return float(sub[idx]), center


# ---------------------------------------------------------------------------
# Mixed / iterated norms


def region_mask(grid, region):
    """Boolean lattice mask for a CylinderSpec."""
    it, ix = region.center[0], tuple(region.center[1])
    if region.kind == "ball":
        stencil = _parabolic_ball_stencil(grid, region.radius) > 0
    else:
        st = _time_window_stencil(grid, region.radius) > 0
        sx = _spatial_ball_stencil(grid, region.radius) > 0
        stencil = st.reshape((grid.Nt,) + (1,) * grid.d) & sx[None, ...]
    return np.roll(stencil, (it,) + ix, axis=tuple(range(1 + grid.d)))


def mixed_norm(field, p, q, order="time_outer", region=None):
    """Iterated Lebesgue norm with cell-weighted rectangle quadrature.

    time_outer gives the L^p_t L^q_x norm, space_outer the L^q_x L^p_t norm.
    An optional CylinderSpec restricts the sums to that region (a direct
    masked summation, independent of the FFT-convolution code path used by
    the localized sup norms)."""
    if not (p > 1 and q > 1):
        raise ValueError("mixed norm needs p, q > 1")
    if order not in ("time_outer", "space_outer"):
        raise ValueError(f"unknown order {order!r}")
    g = field.grid
    a = magnitude(field)
    if region is not None:
        mask = region_mask(g, region)
        if not mask.any():
            raise ValueError("empty region")
        a = np.where(mask, a, 0.0)
    sp_axes = tuple(range(1, 1 + g.d))
    if order == "time_outer":
        inner = np.sum(a**q, axis=sp_axes) * g.dx**g.d
        outer = np.sum(inner ** (p / q)) * g.dt
        return float(outer ** (1.0 / p))
    inner = np.sum(a**p, axis=0) * g.dt
    outer = np.sum(inner ** (q / p)) * g.dx**g.d
    return float(outer ** (1.0 / q))


def iterated_norm(values, spacings, exponents):
    """General n-axis iterated norm, innermost axis first: integrate axis 0
    with exponent p1, then axis 1 with p2, ...  Used for the anisotropic
    mixed-norm checks on flattened fields."""
    a = np.abs(np.asarray(values, dtype=float))
    if a.ndim != len(spacings) or a.ndim != len(exponents):
        raise ValueError("spacings/exponents must match array rank")
    for p, h in zip(exponents, spacings):
        if p <= 1:
            raise ValueError("iterated norm needs exponents > 1")
        a = (np.sum(a**p, axis=0) * h) ** (1.0 / p)
    return float(a)


# ---------------------------------------------------------------------------
# Krylov (mixed-norm parabolic Morrey) norms


def krylov_norm(field, triple, kind="E", plan=None):
    """Localized mixed-norm sup over parabolic cylinders.

    kind "E" iterates time outside space over each cylinder, kind "F" swaps
    the iteration order; both carry the weight rho^(beta - 2/p - d/q).
    Returns a NormResult reporting the arg-max cylinder."""
    t = _as_triple(triple)
    g = field.grid
    t.check_admissible(g.d)
    if kind not in ("E", "F"):
        raise ValueError(f"unknown Krylov norm kind {kind!r}")
    plan = (plan or SupSamplingPlan.default(g)).validate(g)
    a = magnitude(field)
    p, q = t.p, t.q
    w = t.weight_exponent(g.d)
    best = (-1.0, None, None)
    for rho in plan.radii:
        if kind == "E":
            inner = _circ_conv_space(a**q, g, rho) * g.dx**g.d
            outer = _circ_conv_time(inner ** (p / q), g, rho) * g.dt
            vals = rho**w * outer ** (1.0 / p)
        else:
            inner = _circ_conv_time(a**p, g, rho) * g.dt
            outer = _circ_conv_space(inner ** (q / p), g, rho) * g.dx**g.d
            vals = rho**w * outer ** (1.0 / q)
        v, center = _strided_max(vals, g, plan.stride)
        if v > best[0]:
            best = (v, center, rho)
    value, center, rho = best
    argmax = CylinderSpec(center=(center[0], center[1:]), radius=rho, kind="cylinder")
    return NormResult(
        value=value, kind=kind, exponents=t.as_tuple(), argmax=argmax, plan=plan
    )


def local_cylinder_value(field, triple, kind, cylinder):
    """Re-evaluate the weighted local norm on one cylinder by direct masked
    summation (the independent check for reported arg-max values)."""
    t = _as_triple(triple)
    g = field.grid
    w = t.weight_exponent(g.d)
    order = "time_outer" if kind == "E" else "space_outer"
    return cylinder.radius**w * mixed_norm(field, t.p, t.q, order, region=cylinder)


def morrey_norm(field, p, r, plan=None):
    """Parabolic Morrey norm: sup over parabolic balls of
    mu(B)^(1/r - 1/p) * (local L^p norm), with mu the measured (discrete)
    ball volume."""
    if not (1 < p <= r):
        raise ValueError(f"morrey norm needs 1 < p <= r, got p={p}, r={r}")
    g = field.grid
    plan = (plan or SupSamplingPlan.default(g)).validate(g)
    a = magnitude(field)
    best = (-1.0, None, None)
    for rho in plan.radii:
        local, count = _circ_conv_spacetime(a**p, g, rho)
        mu = count * g.cell
        vals = mu ** (1.0 / r - 1.0 / p) * (local * g.cell) ** (1.0 / p)
        v, center = _strided_max(vals, g, plan.stride)
        if v > best[0]:
            best = (v, center, rho)
    value, center, rho = best
    argmax = CylinderSpec(center=(center[0], center[1:]), radius=rho, kind="ball")
    return NormResult(
        value=value, kind="morrey", exponents=(p, r), argmax=argmax, plan=plan
    )


# ---------------------------------------------------------------------------
# Parabolic Besov norms


def default_theta_plan(grid, count=32):
    """Geometric ladder of flow times spanning [dt, T]."""
    return tuple(np.geomspace(grid.dt, grid.T, count))


def besov_heat_norm(field, delta, theta_plan=None):
    """Negative-smoothness Besov norm through the regularizing flow:
    max over sampled theta of theta^(delta/2) * sup-norm of the flowed field."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    thetas = default_theta_plan(field.grid) if theta_plan is None else tuple(theta_plan)
    best = 0.0
    for theta in thetas:
        v = theta ** (delta / 2.0) * float(np.max(magnitude(gauss_flow(field, theta))))
        if v > best:
            best = v
    return best


def _mollifier_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.maximum(x, 1e-300)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.maximum(1.0 - x, 1e-300)), 0.0)
    return a / (a + b)


def parabolic_cutoff(gauge):
    """Smooth low-pass profile in the parabolic gauge sqrt|tau| + |xi|:
    identically 1 below 1, identically 0 above 2."""
    return _mollifier_step(2.0 - np.asarray(gauge, dtype=float))


def besov_lp_norm(field, delta, cutoff=None):
    """Littlewood-Paley form of the negative-smoothness Besov norm:
    sup over resolvable j of 2^(-j*delta) * sup-norm of the low-pass block
    S_j f (cutoff at parabolic frequency 2^j).

    The block weight is 2^(-j*delta): the low-pass block at scale 2^j of a
    mode with parabolic frequency ~2^j0 first appears at j ~ j0, giving
    2^(-j0*delta) * amplitude, matching the heat-flow characterization."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    phi = parabolic_cutoff if cutoff is None else cutoff
    g = field.grid
    gauge = parabolic_frequency(g)
    nz = gauge[gauge > 0]
    if nz.size == 0:
        raise ValueError("no resolvable blocks on this grid")
    j_lo = int(math.floor(math.log2(float(nz.min()))))
    j_hi = int(math.ceil(math.log2(float(nz.max()))))
    axes = tuple(range(1 + g.d))
    rnd = field.samples.ndim - 1 - g.d
    fhat = sfft.fftn(field.samples, axes=axes, workers=_WORKERS)
    gauge_b = gauge.reshape(gauge.shape + (1,) * rnd)
    best = 0.0
    for j in range(j_lo, j_hi + 1):
        mask = phi(gauge_b / 2.0**j)
        block = sfft.ifftn(fhat * mask, axes=axes, workers=_WORKERS)
        sup = float(np.max(np.abs(block)))
        v = 2.0 ** (-j * delta) * sup
        if v > best:
            best = v
    return best


# ---------------------------------------------------------------------------
# Decay profile


@dataclass(frozen=True)
class DecayProfile:
    """Sup-norm of the regularizing flow along a theta ladder, with the
    zero-at-infinity verdict: the tail must decay monotonically below
    decay_factor times the profile peak."""

    thetas: tuple
    values: tuple
    zero_at_infinity: bool

    @property
    def points(self):
        return list(zip(self.thetas, self.values))


def decay_profile(field, thetas, decay_factor=0.5):
    """Evaluate theta -> sup |flowed field| on an ascending theta ladder."""
    thetas = tuple(float(t) for t in thetas)
    if any(t <= 0 for t in thetas) or any(
        b <= a for a, b in zip(thetas, thetas[1:])
    ):
        raise ValueError("theta values must be positive and ascending")
    values = tuple(
        float(np.max(magnitude(gauss_flow(field, th)))) for th in thetas
    )
    peak = max(values) if values else 0.0
    tail = values[len(values) // 2 :]
    slack = 1e-12 * (peak if peak > 0 else 1.0)
    monotone = all(b <= a + slack for a, b in zip(tail, tail[1:]))
    verdict = monotone and (tail[-1] <= decay_factor * peak if values else True)
    return DecayProfile(thetas=thetas, values=values, zero_at_infinity=verdict)


def fit_decay_exponent(profile, theta_lo=None, theta_hi=None):
    """Least-squares slope of log value against log theta over a window;
    returns the decay exponent s in value ~ theta^(-s)."""
    th = np.asarray(profile.thetas)
    va = np.asarray(profile.values)
    lo = th[0] if theta_lo is None else theta_lo
    hi = th[-1] if theta_hi is None else theta_hi
    sel = (th >= lo * (1 - 1e-12)) & (th <= hi * (1 + 1e-12)) & (va > 0)
    if sel.sum() < 2:
        raise ValueError("need at least two positive profile points in window")
    slope = np.polyfit(np.log(th[sel]), np.log(va[sel]), 1)[0]
    return -float(slope)
