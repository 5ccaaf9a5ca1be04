"""Sampled space-time fields on a periodic box.

The lattice discretizes a periodic truncation of the space-time plane:
time covers the centered interval (-T/2, T/2) with Nt points (so "t < 0"
means the first Nt/2 time indices), space covers [0, L)^d with Nx points
per axis.  Sample arrays are indexed (t, x1, .., xd, components...) with
components innermost.  Fields are immutable after construction and all
operations on them are pure.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GridSpec",
    "SpaceTimeField",
    "SnapshotError",
    "Zero",
    "Constant",
    "Mode",
    "Gaussian",
    "ParabolicIndicator",
    "RandomBandlimited",
    "build_grid",
    "sample_preset",
    "causal_extend",
    "parabolic_dilate",
    "write_snapshot",
    "read_snapshot",
    "magnitude",
]

class SnapshotError(ValueError):
    """Raised for malformed snapshot files (bad header, shape, payload)."""


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic space-time lattice: d spatial dimensions, Nx points per
    spatial axis over period L, Nt time points over extent T."""

    d: int = 3
    Nx: int = 16
    Nt: int = 16
    L: float = 2.0 * np.pi
    T: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {self.d}")
        for name, n in (("Nx", self.Nx), ("Nt", self.Nt)):
            if n < 8 or not _is_pow2(n):
                raise ValueError(f"resolution {name}={n} must be a power of two >= 8")
        if not (self.L > 0 and self.T > 0):
            raise ValueError(f"extents must be positive, got L={self.L}, T={self.T}")

    @property
    def dx(self):
        return self.L / self.Nx

    @property
    def dt(self):
        return self.T / self.Nt

    @property
    def Q(self):
        """Homogeneous dimension of the parabolic metric, d + 2."""
        return self.d + 2

    @property
    def shape(self):
        return (self.Nt,) + (self.Nx,) * self.d

    @property
    def cell(self):
        """Space-time cell measure dt * dx^d."""
        return self.dt * self.dx**self.d

    def rank_shape(self, rank):
        if rank == "scalar":
            return ()
        if rank == "vector":
            return (self.d,)
        if rank == "tensor":
            return (self.d, self.d)
        raise ValueError(f"unknown rank {rank!r}")

    def times(self):
        """Physical time coordinates, centered: t_i = (i - Nt/2) * dt."""
        return (np.arange(self.Nt) - self.Nt // 2) * self.dt

    def coords(self, axis):
        """Physical coordinates along one spatial axis: x_j = j * dx."""
        return np.arange(self.Nx) * self.dx


def build_grid(d, Nx, Nt, L, T):
    """Validated GridSpec factory."""
    return GridSpec(d=d, Nx=Nx, Nt=Nt, L=float(L), T=float(T))


@dataclass(frozen=True)
class SpaceTimeField:
    """A sampled scalar/vector/tensor function on a GridSpec lattice.

    support is "causal" when every sample at t < 0 is exactly zero,
    "full" otherwise.  The sample array is frozen read-only.
    """

    grid: GridSpec
    rank: str
    samples: np.ndarray
    support: str = "full"

    def __post_init__(self):
        expected = self.grid.shape + self.grid.rank_shape(self.rank)
        if self.samples.shape != expected:
            raise ValueError(
                f"sample shape {self.samples.shape} does not match grid/rank {expected}"
            )
        if self.support not in ("full", "causal"):
            raise ValueError(f"unknown support flag {self.support!r}")
        if self.support == "causal":
            neg = self.samples[: self.grid.Nt // 2]
            if neg.size and np.any(neg != 0):
                raise ValueError("causal field has nonzero samples at t < 0")
        self.samples.flags.writeable = False

    def with_samples(self, samples, support=None):
        return SpaceTimeField(
            grid=self.grid,
            rank=self.rank,
            samples=np.ascontiguousarray(samples),
            support=self.support if support is None else support,
        )

    @property
    def is_real(self):
        return not np.iscomplexobj(self.samples)

    def __add__(self, other):
        if isinstance(other, SpaceTimeField):
            if other.grid != self.grid or other.rank != self.rank:
                raise ValueError("field mismatch in addition")
            sup = "causal" if self.support == other.support == "causal" else "full"
            return self.with_samples(self.samples + other.samples, support=sup)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpaceTimeField):
            if other.grid != self.grid or other.rank != self.rank:
                raise ValueError("field mismatch in subtraction")
            sup = "causal" if self.support == other.support == "causal" else "full"
            return self.with_samples(self.samples - other.samples, support=sup)
        return NotImplemented

    def __mul__(self, a):
        if np.isscalar(a):
            return self.with_samples(self.samples * a)
        return NotImplemented

    __rmul__ = __mul__


def magnitude(field):
    """Pointwise Euclidean magnitude over the component axes (identity for
    scalars).  Returns a plain real array of lattice shape."""
    a = field.samples
    comp_axes = tuple(range(1 + field.grid.d, a.ndim))
    if comp_axes:
        return np.sqrt(np.sum(np.abs(a) ** 2, axis=comp_axes))
    return np.abs(a)


def _periodic_delta(coords, center, period):
    """Nearest-image displacement of coords from center on a circle."""
    delta = (coords - center + period / 2.0) % period - period / 2.0
    return delta


# ---------------------------------------------------------------------------
# Presets


@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class Constant:
    value: complex = 1.0


@dataclass(frozen=True)
class Mode:
    """Pure oscillation exp(i(2*pi*omega*t/T + 2*pi*k.x/L))."""

    omega: int = 0
    k: tuple = (1, 0, 0)


@dataclass(frozen=True)
class Gaussian:
    """Separable bump exp(-(dt/wt)^2 - sum (dxi/wxi)^2), nearest-image."""

    center: tuple = (0.0, (0.0, 0.0, 0.0))
    widths: tuple = (0.1, (0.5, 0.5, 0.5))


@dataclass(frozen=True)
class ParabolicIndicator:
    """Indicator of the parabolic ball sqrt|t-t0| + |x-x0| < r."""

    center: tuple = (0.0, (0.0, 0.0, 0.0))
    r: float = 0.5


@dataclass(frozen=True)
class RandomBandlimited:
    """Real random field with spectral support |omega|,|k_i| <= max_mode,
    reproducible from the seed, scaled so max|f| = amplitude."""

    seed: int = 0
    max_mode: int = 4
    amplitude: float = 1.0


def _sample_mode(preset, grid):
    if abs(preset.omega) > grid.Nt // 2:
        raise ValueError(f"time mode {preset.omega} beyond Nyquist {grid.Nt // 2}")
    k = tuple(preset.k)
    if len(k) != grid.d:
        raise ValueError(f"wave vector length {len(k)} != d={grid.d}")
    if any(abs(ki) > grid.Nx // 2 for ki in k):
        raise ValueError(f"wave vector {k} beyond Nyquist {grid.Nx // 2}")
    t = grid.times().reshape((grid.Nt,) + (1,) * grid.d)
    phase = (2.0 * np.pi * preset.omega / grid.T) * t
    for ax, ki in enumerate(k):
        x = grid.coords(ax).reshape((1,) * (1 + ax) + (grid.Nx,) + (1,) * (grid.d - 1 - ax))
        phase = phase + (2.0 * np.pi * ki / grid.L) * x
    return np.exp(1j * phase)


def _sample_gaussian(preset, grid):
    t0, x0 = preset.center
    wt, wx = preset.widths
    wx = (wx,) * grid.d if np.isscalar(wx) else tuple(wx)
    if len(wx) != grid.d or any(w <= 0 for w in wx) or wt <= 0:
        raise ValueError("gaussian widths must be positive, one per axis")
    dt_ = _periodic_delta(grid.times(), t0, grid.T).reshape((grid.Nt,) + (1,) * grid.d)
    expo = -((dt_ / wt) ** 2)
    x0 = (x0,) * grid.d if np.isscalar(x0) else tuple(x0)
    for ax in range(grid.d):
        dxi = _periodic_delta(grid.coords(ax), x0[ax], grid.L)
        dxi = dxi.reshape((1,) * (1 + ax) + (grid.Nx,) + (1,) * (grid.d - 1 - ax))
        expo = expo - (dxi / wx[ax]) ** 2
    return np.exp(expo)


def parabolic_ball_mask(grid, center, r):
    """Boolean lattice mask of the parabolic ball around a physical center."""
    t0, x0 = center
    x0 = (x0,) * grid.d if np.isscalar(x0) else tuple(x0)
    dt_ = np.abs(_periodic_delta(grid.times(), t0, grid.T))
    rho = np.sqrt(dt_).reshape((grid.Nt,) + (1,) * grid.d)
    r2 = np.zeros((1,) * (1 + grid.d))
    for ax in range(grid.d):
        dxi = _periodic_delta(grid.coords(ax), x0[ax], grid.L)
        dxi = dxi.reshape((1,) * (1 + ax) + (grid.Nx,) + (1,) * (grid.d - 1 - ax))
        r2 = r2 + dxi**2
    return (rho + np.sqrt(r2)) < r


def _sample_indicator(preset, grid):
    if preset.r <= 0:
        raise ValueError("indicator radius must be positive")
    if preset.r > grid.L / 2 or preset.r**2 > grid.T / 2:
        raise ValueError(
            f"indicator radius {preset.r} exceeds half-period (L/2={grid.L / 2}, sqrt(T/2)={np.sqrt(grid.T / 2):.4g})"
        )
    return parabolic_ball_mask(grid, preset.center, preset.r).astype(float)


def _sample_random_bandlimited(preset, grid):
    m = preset.max_mode
    if m < 0 or m > min(grid.Nx, grid.Nt) // 2 - 1:
        raise ValueError(f"max_mode {m} beyond Nyquist for grid")
    rng = np.random.default_rng(preset.seed)
    coeffs = np.zeros(grid.shape, dtype=complex)
    # Fixed iteration order over the band keeps the draw sequence (and hence
    # the continuum field) independent of Nx and Nt.
    for omega in range(-m, m + 1):
        for flat in range((2 * m + 1) ** grid.d):
            k = []
            f = flat
            for _ in range(grid.d):
                k.append(f % (2 * m + 1) - m)
                f //= 2 * m + 1
            c = rng.normal() + 1j * rng.normal()
            idx = (omega % grid.Nt,) + tuple(ki % grid.Nx for ki in k)
            coeffs[idx] = c
    f = np.fft.ifftn(coeffs).real
    peak = np.max(np.abs(f))
    if peak > 0:
        f = f * (preset.amplitude / peak)
    return f


def sample_preset(preset, grid):
    """Evaluate a preset on the lattice.  Deterministic: identical arguments
    produce bit-identical fields."""
    if isinstance(preset, Zero):
        samples = np.zeros(grid.shape)
    elif isinstance(preset, Constant):
        samples = np.full(grid.shape, preset.value)
        if not np.iscomplexobj(samples):
            samples = samples.astype(float)
    elif isinstance(preset, Mode):
        samples = _sample_mode(preset, grid)
    elif isinstance(preset, Gaussian):
        samples = _sample_gaussian(preset, grid)
    elif isinstance(preset, ParabolicIndicator):
        samples = _sample_indicator(preset, grid)
    elif isinstance(preset, RandomBandlimited):
        samples = _sample_random_bandlimited(preset, grid)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    return SpaceTimeField(grid=grid, rank="scalar", samples=samples)


def causal_extend(field):
    """Zero the negative-time half of the lattice and mark the field causal.

    Idempotent; samples at t >= 0 are untouched."""
    samples = np.array(field.samples)
    samples[: field.grid.Nt // 2] = 0
    return SpaceTimeField(field.grid, field.rank, samples, support="causal")


def parabolic_dilate(field, lam):
    """Index realization of u(lam^2 t, lam x) on the periodic lattice.

    lam must be a positive integer; time indices dilate around the centered
    origin, spatial indices around x = 0."""
    if int(lam) != lam or lam < 1:
        raise ValueError("dilation factor must be a positive integer")
    lam = int(lam)
    g = field.grid
    H = g.Nt // 2
    t_idx = (lam * lam * (np.arange(g.Nt) - H) + H) % g.Nt
    x_idx = (lam * np.arange(g.Nx)) % g.Nx
    out = field.samples[np.ix_(t_idx, *([x_idx] * g.d))]
    return field.with_samples(out, support="full")


# ---------------------------------------------------------------------------
# Snapshot I/O
#
# Layout (all little-endian): 8-byte magic "PKFLD001", then
#   u32 d, u32 Nx, u32 Nt, u8 rank-code, u8 dtype-code, f64 L, f64 T,
#   u64 seed-or-0,
# then samples row-major (t outermost, components innermost) as f64, or
# interleaved f64 (re, im) pairs for complex data.

MAGIC = b"PKFLD001"
_HEADER = struct.Struct("<IIIBBddQ")
_RANK_CODES = {"scalar": 0, "vector": 1, "tensor": 2}
_RANK_NAMES = {v: k for k, v in _RANK_CODES.items()}


def write_snapshot(field, path, seed=0):
    """Write a field snapshot; write-then-read reproduces samples bit-exactly."""
    dtype_code = 1 if np.iscomplexobj(field.samples) else 0
    g = field.grid
    header = _HEADER.pack(
        g.d, g.Nx, g.Nt, _RANK_CODES[field.rank], dtype_code, g.L, g.T, int(seed)
    )
    dt = "<c16" if dtype_code else "<f8"
    payload = np.ascontiguousarray(field.samples).astype(dt, copy=False)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header)
        fh.write(payload.tobytes())
    return path


def read_snapshot(path):
    """Read a snapshot written by write_snapshot; raises SnapshotError on a
    bad magic, a header/payload shape mismatch, or a truncated payload."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise SnapshotError(f"bad header magic {magic!r}")
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise SnapshotError("truncated header")
        d, Nx, Nt, rank_code, dtype_code, L, T, _seed = _HEADER.unpack(raw)
        if rank_code not in _RANK_NAMES or dtype_code not in (0, 1):
            raise SnapshotError(f"unknown rank/dtype codes ({rank_code}, {dtype_code})")
        try:
            grid = GridSpec(d=d, Nx=Nx, Nt=Nt, L=L, T=T)
        except ValueError as exc:
            raise SnapshotError(f"invalid grid in header: {exc}") from exc
        rank = _RANK_NAMES[rank_code]
        shape = grid.shape + grid.rank_shape(rank)
        count = int(np.prod(shape))
        itemsize = 16 if dtype_code else 8
        payload = fh.read()
        if len(payload) < count * itemsize:
            raise SnapshotError(
                f"truncated payload: expected {count * itemsize} bytes, got {len(payload)}"
            )
        if len(payload) > count * itemsize:
            raise SnapshotError("shape mismatch: payload larger than header declares")
        dt = "<c16" if dtype_code else "<f8"
        samples = np.frombuffer(payload, dtype=dt).reshape(shape).copy()
    support = "causal" if not np.any(samples[: Nt // 2]) else "full"
    return SpaceTimeField(grid=grid, rank=rank, samples=samples, support=support)
