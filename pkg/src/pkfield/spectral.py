"""Fourier-side engine for space-time fields on the periodic box.

Frequency convention: integer modes (omega, k) correspond to the continuum
frequencies tau = 2*pi*omega/T and xi = 2*pi*k/L, the exact torus symbols.
The forward transform is taken about the centered time origin, so a
coefficient at (omega, k) is the amplitude of exp(i(tau*t + xi.x)) with t
the centered physical time.  The normalization weight is fixed so that
sum |f|^2 dt dx^d = sum |f_hat|^2 (discrete Parseval).

Zero-frequency conventions: degree-0 multipliers sigma(D) send the zero
spatial mode to zero by default; the Leray projection leaves it unchanged
(a constant vector field is divergence-free).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .field import GridSpec, SpaceTimeField

__all__ = [
    "SpectralField",
    "MultiplierSymbol",
    "forward_transform",
    "inverse_transform",
    "heat_propagate",
    "gauss_flow",
    "leray_project",
    "apply_sigma",
    "get_symbol",
    "SYMBOL_REGISTRY",
    "time_derivative",
    "spatial_gradient",
    "spatial_divergence",
    "laplacian",
    "hessian",
    "dealias",
    "tau_grid",
    "xi_grid",
    "xi_norm_sq",
    "parabolic_frequency",
]

_WORKERS = -1  # scipy.fft thread pool; deterministic output


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a SpaceTimeField, indexed by integer (omega, k)
    in FFT order along the first 1 + d axes."""

    grid: GridSpec
    rank: str
    coefficients: np.ndarray

    def __post_init__(self):
        expected = self.grid.shape + self.grid.rank_shape(self.rank)
        if self.coefficients.shape != expected:
            raise ValueError(
                f"coefficient shape {self.coefficients.shape} != {expected}"
            )
        self.coefficients.flags.writeable = False

    def coefficient(self, omega, k):
        """Coefficient of the mode exp(i(2 pi omega t/T + 2 pi k.x/L))."""
        idx = (omega % self.grid.Nt,) + tuple(ki % self.grid.Nx for ki in k)
        return self.coefficients[idx]


# ---------------------------------------------------------------------------
# Frequency grids


def _st_axes(grid):
    return tuple(range(1 + grid.d))


def tau_grid(grid, rank_ndim=0):
    """Time frequencies 2*pi*omega/T, broadcastable over the full array."""
    omega = np.fft.fftfreq(grid.Nt, d=1.0 / grid.Nt)
    tau = 2.0 * np.pi * omega / grid.T
    return tau.reshape((grid.Nt,) + (1,) * (grid.d + rank_ndim))

def xi_grid(grid, axis, rank_ndim=0):
    """Spatial frequency 2*pi*k/L along one axis, broadcastable."""
    k = np.fft.fftfreq(grid.Nx, d=1.0 / grid.Nx)
    xi = 2.0 * np.pi * k / grid.L
    shape = [1] * (1 + grid.d + rank_ndim)
    shape[1 + axis] = grid.Nx
    return xi.reshape(shape)


def xi_norm_sq(grid, rank_ndim=0):
    """|xi|^2 on the spatial frequency lattice, broadcastable."""
    out = np.zeros((1,) * (1 + grid.d + rank_ndim))
    for ax in range(grid.d):
        out = out + xi_grid(grid, ax, rank_ndim) ** 2
    return out


def parabolic_frequency(grid):
    """Parabolic gauge sqrt|tau| + |xi| on the full frequency lattice."""
    return np.sqrt(np.abs(tau_grid(grid))) + np.sqrt(xi_norm_sq(grid))


# ---------------------------------------------------------------------------
# Transforms

def _norm_weight(grid):
    # sum |f|^2 dt dx^d == sum |f_hat|^2 under this weight.
    n_total = grid.Nt * grid.Nx**grid.d
    return np.sqrt(grid.cell / n_total)


def forward_transform(field):
    """SpaceTimeField -> SpectralField (exact inverse of inverse_transform)."""
    g = field.grid
    rolled = np.roll(field.samples, -(g.Nt // 2), axis=0)
    coeffs = sfft.fftn(rolled, axes=_st_axes(g), workers=_WORKERS) * _norm_weight(g)
    return SpectralField(grid=g, rank=field.rank, coefficients=coeffs)


def inverse_transform(spec, support=None):
    """SpectralField -> SpaceTimeField."""
    g = spec.grid
    samples = sfft.ifftn(
        spec.coefficients / _norm_weight(g), axes=_st_axes(g), workers=_WORKERS
    )
    samples = np.roll(samples, g.Nt // 2, axis=0)
    return SpaceTimeField(
        grid=g, rank=spec.rank, samples=samples, support=support or "full"
    )


def _rank_ndim(field):
    return len(field.grid.rank_shape(field.rank))


def _apply_spacetime_symbol(field, symbol):
    """Multiply the space-time spectrum by a diagonal symbol array.

    The time-origin phase cancels between fft and ifft, so no roll is
    needed for pure multipliers."""
    g = field.grid
    axes = _st_axes(g)
    fhat = sfft.fftn(field.samples, axes=axes, workers=_WORKERS)
    fhat *= symbol
    out = sfft.ifftn(fhat, axes=axes, workers=_WORKERS)
    return out


def _spatial_fft(a, grid, inverse=False):
    """FFT over the d spatial axes of an array shaped (..., Nx, .., Nx, comps)
    where the spatial axes start right after the time axis."""
    axes = tuple(range(1, 1 + grid.d))
    fn = sfft.ifftn if inverse else sfft.fftn
    return fn(a, axes=axes, workers=_WORKERS)


# ---------------------------------------------------------------------------
# Named operators


def heat_propagate(obj, t, grid=None):
    """Heat semigroup e^{t Laplacian}: spatial coefficients scaled by
    exp(-|xi|^2 t).

    Accepts a SpaceTimeField (applied to every time slice) or a bare spatial
    array with an explicit grid.  t must be nonnegative."""
    if t < 0:
        raise ValueError(f"heat propagation time must be >= 0, got {t}")
    if isinstance(obj, SpaceTimeField):
        g = obj.grid
        rnd = _rank_ndim(obj)
        decay = np.exp(-xi_norm_sq(g, rnd)[0] * t)  # drop time axis
        ahat = _spatial_fft(obj.samples, g)
        out = _spatial_fft(ahat * decay, g, inverse=True)
        if obj.is_real:
            out = out.real
        return obj.with_samples(out)
    if grid is None:
        raise ValueError("grid required when propagating a bare spatial slice")
    a = np.asarray(obj)
    rank_ndim = a.ndim - grid.d
    xi2 = np.zeros((1,) * a.ndim)
    for ax in range(grid.d):
        shape = [1] * a.ndim
        shape[ax] = grid.Nx
        k = np.fft.fftfreq(grid.Nx, d=1.0 / grid.Nx).reshape(shape)
        xi2 = xi2 + (2.0 * np.pi * k / grid.L) ** 2
    axes = tuple(range(grid.d))
    ahat = sfft.fftn(a, axes=axes, workers=_WORKERS) * np.exp(-xi2 * t)
    out = sfft.ifftn(ahat, axes=axes, workers=_WORKERS)
    if not np.iscomplexobj(a):
        out = out.real
    return out


def gauss_flow(field, theta):
    """Space-time regularizing flow with symbol
    exp(-theta^2 tau^2 - theta^2 |xi|^4)."""
    if theta < 0:
        raise ValueError(f"flow parameter must be >= 0, got {theta}")
    g = field.grid
    rnd = _rank_ndim(field)
    symbol = np.exp(
        -(theta**2) * tau_grid(g, rnd) ** 2 - (theta**2) * xi_norm_sq(g, rnd) ** 2
    )
    out = _apply_spacetime_symbol(field, symbol)
    if field.is_real:
        out = out.real
    return field.with_samples(out)


def leray_project(field):
    """Projection onto divergence-free vector fields: per spatial frequency,
    v_hat -> v_hat - xi (xi . v_hat)/|xi|^2.  The zero spatial mode is left
    unchanged."""
    if field.rank != "vector":
        raise ValueError(f"Leray projection needs a vector field, got {field.rank}")
    g = field.grid
    vhat = _spatial_fft(field.samples, g)
    xi = [xi_grid(g, ax, 1)[0] for ax in range(g.d)]  # drop time axis, keep comp axis
    xi2 = xi_norm_sq(g, 1)[0]
    inv = np.where(xi2 > 0, 1.0 / np.where(xi2 > 0, xi2, 1.0), 0.0)
    dot = np.zeros_like(vhat[..., 0])
    for ax in range(g.d):
        dot = dot + xi[ax][..., 0] * vhat[..., ax]
    for ax in range(g.d):
        vhat[..., ax] -= xi[ax][..., 0] * dot * inv[..., 0]
    out = _spatial_fft(vhat, g, inverse=True)
    if field.is_real:
        out = out.real
    return field.with_samples(out)


@dataclass(frozen=True)
class MultiplierSymbol:
    """A Fourier-side multiplier: a function of (tau, xi), of xi alone, or a
    degree-0 symbol sigma0 evaluated on xi/|xi|."""

    kind: str  # "spacetime" | "spatial" | "homogeneous0"
    fn: object
    zero_mode_value: complex = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("spacetime", "spatial", "homogeneous0"):
            raise ValueError(f"unknown symbol kind {self.kind!r}")
        if not np.isfinite(self.zero_mode_value):
            raise ValueError("zero-mode value must be finite")

    def spatial_array(self, grid, rank_ndim=0):
        """Evaluate on the spatial frequency lattice (zero mode handled)."""
        if self.kind == "spacetime":
            raise ValueError("space-time symbol has no purely spatial array")
        xi = [xi_grid(grid, ax, rank_ndim)[0] for ax in range(grid.d)]
        xi2 = xi_norm_sq(grid, rank_ndim)[0]
        if self.kind == "spatial":
            arr = np.asarray(self.fn(xi)) + np.zeros_like(xi2, dtype=complex)
        else:
            norm = np.sqrt(np.where(xi2 > 0, xi2, 1.0))
            unit = [x / norm for x in xi]
            arr = np.asarray(self.fn(unit)) + np.zeros_like(xi2, dtype=complex)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"symbol {self.name!r} undefined on sphere sample")
        arr = np.where(xi2 > 0, arr, self.zero_mode_value)
        return arr

    def spacetime_array(self, grid, rank_ndim=0):
        if self.kind == "spacetime":
            tau = tau_grid(grid, rank_ndim)
            xi = [xi_grid(grid, ax, rank_ndim) for ax in range(grid.d)]
            return np.asarray(self.fn(tau, xi)) + np.zeros(
                grid.shape + (1,) * rank_ndim, dtype=complex
            )
        return self.spatial_array(grid, rank_ndim)[None, ...]


def apply_sigma(field, sigma0, zero_mode_value=0.0):
    """Apply the degree-0 spatial multiplier sigma(xi) = sigma0(xi/|xi|).

    sigma0 may be a callable on unit-vector component lists, a registry name
    ("riesz_1", .., "sigma0_const"), or a MultiplierSymbol.  The zero spatial
    mode is multiplied by zero_mode_value (default 0)."""
    g = field.grid
    if isinstance(sigma0, str):
        sym = get_symbol(sigma0, d=g.d)
        if zero_mode_value != sym.zero_mode_value:
            sym = MultiplierSymbol(sym.kind, sym.fn, zero_mode_value, sym.name)
    elif isinstance(sigma0, MultiplierSymbol):
        sym = sigma0
    else:
        sym = MultiplierSymbol("homogeneous0", sigma0, zero_mode_value, "<callable>")
    rnd = _rank_ndim(field)
    arr = sym.spatial_array(g, rnd)
    ahat = _spatial_fft(field.samples, g)
    out = _spatial_fft(ahat * arr, g, inverse=True)
    return field.with_samples(out)


def _registry():
    reg = {}

    def heat(t):
        return MultiplierSymbol(
            "spatial",
            lambda xi: np.exp(-sum(x**2 for x in xi) * t),
            zero_mode_value=1.0,
            name="heat",
        )

    def gauss(theta):
        return MultiplierSymbol(
            "spacetime",
            lambda tau, xi: np.exp(
                -(theta**2) * tau**2 - (theta**2) * sum(x**2 for x in xi) ** 2
            ),
            zero_mode_value=1.0,
            name="gauss",
        )

    def riesz(j):
        return MultiplierSymbol(
            "homogeneous0",
            lambda unit: 1j * unit[j - 1],
            zero_mode_value=0.0,
            name=f"riesz_{j}",
        )

    def sigma0_const():
        return MultiplierSymbol(
            "homogeneous0", lambda unit: np.ones_like(unit[0]), 0.0, "sigma0_const"
        )

    reg["heat"] = heat
    reg["gauss"] = gauss
    reg["riesz_j"] = riesz
    reg["sigma0_const"] = sigma0_const
    reg["leray"] = lambda: leray_project
    return reg


SYMBOL_REGISTRY = _registry()


def get_symbol(name, d=None, **params):
    """Look up a named symbol.  "riesz_<j>" resolves through the riesz_j
    factory; "leray" returns the projection operator itself."""
    if name in SYMBOL_REGISTRY:
        return SYMBOL_REGISTRY[name](**params)
    if name.startswith("riesz_"):
        j = int(name.split("_", 1)[1])
        if d is not None and not (1 <= j <= d):
            raise ValueError(f"riesz index {j} out of range for d={d}")
        return SYMBOL_REGISTRY["riesz_j"](j)
    raise KeyError(f"unknown symbol {name!r}")


# ---------------------------------------------------------------------------
# Spectral calculus (periodic derivatives)


def time_derivative(field):
    """Spectral d/dt (multiplier i*tau)."""
    g = field.grid
    out = _apply_spacetime_symbol(field, 1j * tau_grid(g, _rank_ndim(field)))
    if field.is_real:
        out = out.real
    return field.with_samples(out, support="full")


def _spatial_derivative_array(samples, grid, axis):
    ahat = _spatial_fft(samples, grid)
    rank_ndim = samples.ndim - 1 - grid.d
    ahat *= 1j * xi_grid(grid, axis, rank_ndim)
    return _spatial_fft(ahat, grid, inverse=True)


def spatial_gradient(field):
    """Spectral spatial gradient; scalar -> vector, vector -> tensor with the
    derivative index first: out[..., i, j] = d_i u_j."""
    g = field.grid
    if field.rank == "scalar":
        parts = [
            _spatial_derivative_array(field.samples, g, ax) for ax in range(g.d)
        ]
        out = np.stack(parts, axis=-1)
        rank = "vector"
    elif field.rank == "vector":
        parts = [
            _spatial_derivative_array(field.samples, g, ax) for ax in range(g.d)
        ]
        out = np.stack(parts, axis=-2)
        rank = "tensor"
    else:
        raise ValueError("gradient defined for scalar and vector fields")
    if field.is_real:
        out = out.real
    return SpaceTimeField(g, rank, out, support=field.support)


def spatial_divergence(field):
    """Spectral divergence; vector -> scalar, tensor -> vector with
    (Div F)_i = sum_j d_j F_ij."""
    g = field.grid
    if field.rank == "vector":
        out = sum(
            _spatial_derivative_array(field.samples[..., ax], g, ax)
            for ax in range(g.d)
        )
        rank = "scalar"
    elif field.rank == "tensor":
        comps = [
            sum(
                _spatial_derivative_array(field.samples[..., i, j], g, j)
                for j in range(g.d)
            )
            for i in range(g.d)
        ]
        out = np.stack(comps, axis=-1)
        rank = "vector"
    else:
        raise ValueError("divergence defined for vector and tensor fields")
    if field.is_real:
        out = out.real
    return SpaceTimeField(g, rank, out, support=field.support)


def laplacian(field):
    """Spectral spatial Laplacian (multiplier -|xi|^2)."""
    g = field.grid
    rnd = _rank_ndim(field)
    ahat = _spatial_fft(field.samples, g)
    ahat = ahat * (-xi_norm_sq(g, rnd))
    out = _spatial_fft(ahat, g, inverse=True)
    if field.is_real:
        out = out.real
    return field.with_samples(out, support=field.support)


def hessian(field):
    """Spatial Hessian of a scalar field: tensor with H[..., i, j] = d_i d_j u."""
    if field.rank != "scalar":
        raise ValueError("hessian defined for scalar fields")
    g = field.grid
    ahat = _spatial_fft(field.samples, g)
    comps = []
    for i in range(g.d):
        row = []
        for j in range(g.d):
            sym = -xi_grid(g, i) * xi_grid(g, j)
            row.append(_spatial_fft(ahat * sym, g, inverse=True))
        comps.append(np.stack(row, axis=-1))
    out = np.stack(comps, axis=-2)
    if field.is_real:
        out = out.real
    return SpaceTimeField(g, "tensor", out, support=field.support)


def dealias(field, fraction=2.0 / 3.0):
    """Zero spatial modes with any |k_i| above fraction * Nyquist (2/3 rule)."""
    g = field.grid
    rnd = _rank_ndim(field)
    keep = np.ones((1,) * (1 + g.d + rnd), dtype=bool)
    cut = fraction * (g.Nx // 2)
    for ax in range(g.d):
        k = np.abs(np.fft.fftfreq(g.Nx, d=1.0 / g.Nx))
        shape = [1] * (1 + g.d + rnd)
        shape[1 + ax] = g.Nx
        keep = keep & (k.reshape(shape) <= cut)
    ahat = _spatial_fft(field.samples, g)
    out = _spatial_fft(np.where(keep, ahat, 0.0), g, inverse=True)
    if field.is_real:
        out = out.real
    return field.with_samples(out)
