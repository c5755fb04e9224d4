"""One-dimensional grid wavefunctions on a periodic box.

Position cells and discrete momentum modes both act as atomic spectral
measures.  Free evolution is exact in the Fourier basis; evolution in a
potential uses Strang splitting.  Gaussian packet helpers include the
closed-form free evolution used as an oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidInputError, ResolutionError
from .spaces import as_mask

EDGE_CELLS = 10
EDGE_DENSITY = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid; cell ``j`` sits at ``origin + (j - n/2) dx``."""

    n_cells: int
    box_length: float
    origin_offset: float = 0.0

    def __post_init__(self):
        n = int(self.n_cells)
        if n < 16 or n & (n - 1):
            raise InvalidInputError(f"n_cells must be a power of two >= 16, got {self.n_cells}")
        if not (np.isfinite(self.box_length) and self.box_length > 0):
            raise InvalidInputError("box_length must be positive and finite")
        object.__setattr__(self, "n_cells", n)

    @property
    def dx(self) -> float:
        return self.box_length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return self.origin_offset + (np.arange(self.n_cells) - self.n_cells // 2) * self.dx

    @property
    def x_first(self) -> float:
        return self.origin_offset - (self.n_cells // 2) * self.dx

    def momenta(self, hbar: float = 1.0) -> np.ndarray:
        """Momentum of each Fourier mode, in FFT order."""
        return 2 * np.pi * hbar * np.fft.fftfreq(self.n_cells, self.dx)

    def dp(self, hbar: float = 1.0) -> float:
        return 2 * np.pi * hbar / self.box_length


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    """Samples of ``psi(x)`` (units length**-1/2) on a :class:`GridSpec`."""

    grid: GridSpec
    samples: np.ndarray = field(repr=False)
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex).reshape(-1)
        if s.size != self.grid.n_cells:
            raise InvalidInputError(
                f"expected {self.grid.n_cells} samples, got {s.size}")
        if not np.all(np.isfinite(s)):
            raise InvalidInputError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def data(self) -> np.ndarray:
        return self.samples

    @property
    def weight(self) -> float:
        return self.grid.dx

    def with_data(self, data) -> "GridWavefunction":
        return GridWavefunction(self.grid, data, self.mass, self.hbar)

    def density(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def norm2(self) -> float:
        return float(self.density().sum() * self.grid.dx)

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def inner(self, other: "GridWavefunction") -> complex:
        return complex(np.vdot(self.samples, other.samples) * self.grid.dx)

    def __add__(self, other):
        return self.with_data(self.samples + other.samples)

    def __sub__(self, other):
        return self.with_data(self.samples - other.samples)

    def __mul__(self, scalar):
        return self.with_data(self.samples * scalar)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        """Write columns ``x, re, im, density``."""
        table = np.column_stack([self.grid.x, self.samples.real, self.samples.imag,
                                 self.density()])
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header="x,re,im,density",
                   comments="")

    def __repr__(self):
        return f"GridWavefunction(n={self.grid.n_cells}, norm={self.norm():.6g})"


@dataclass(frozen=True)
class GaussianPacketParams:
    p0: float
    sigma_p: float
    x0: float = 0.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.sigma_p > 0:
            raise InvalidInputError("sigma_p must be positive")
        if not (self.mass > 0 and self.hbar > 0):
            raise InvalidInputError("mass and hbar must be positive")

    @property
    def sigma_x(self) -> float:
        return self.hbar / self.sigma_p

    @property
    def ratio(self) -> float:
        """Separation parameter ``p0 / sigma_p``."""
        return self.p0 / self.sigma_p

    def centre(self, t, sign: int = 1):
        return self.x0 + sign * np.asarray(t) * self.p0 / self.mass

    def width(self, t):
        """Width ``sigma(t)`` of the freely evolved position density."""
        t = np.asarray(t, dtype=float)
        sx = self.sigma_x
        return np.sqrt(sx ** 2 + (self.hbar * t / (self.mass * sx)) ** 2)


def check_resolution(params: GaussianPacketParams, grid: GridSpec) -> None:
    """Raise :class:`ResolutionError` when ``grid`` cannot hold the packet."""
    sx, dx = params.sigma_x, grid.dx
    problems = []
    if dx > sx / 8:
        problems.append(f"cell width {dx:.4g} exceeds sigma_x/8 = {sx / 8:.4g}; "
                        f"use at least {int(np.ceil(8 * grid.box_length / sx))} cells")
    if grid.box_length < 20 * sx:
        problems.append(f"box length {grid.box_length:.4g} is below 20 sigma_x = {20 * sx:.4g}")
    p_nyquist = np.pi * params.hbar / dx
    if abs(params.p0) + 8 * params.sigma_p > p_nyquist:
        problems.append(f"|p0| + 8 sigma_p = {abs(params.p0) + 8 * params.sigma_p:.4g} "
                        f"exceeds the grid's Nyquist momentum {p_nyquist:.4g}")
    if abs(params.x0 - grid.origin_offset) + 8 * sx > grid.box_length / 2:
        problems.append("packet centre lies within 8 sigma_x of the box edge")
    if problems:
        raise ResolutionError("; ".join(problems))


def make_gaussian(params: GaussianPacketParams, sign: int, grid: GridSpec
                  ) -> GridWavefunction:
    """Gaussian packet at ``x0`` with mean momentum ``sign * p0``."""
    if sign not in (1, -1):
        raise InvalidInputError("sign must be +1 or -1")
    check_resolution(params, grid)
    sx = params.sigma_x
    y = grid.x - params.x0
    amp = (math.sqrt(math.pi) * sx) ** -0.5 * np.exp(-y ** 2 / (2 * sx ** 2))
    phase = np.exp(1j * sign * params.p0 * y / params.hbar)
    return GridWavefunction(grid, amp * phase, params.mass, params.hbar)


def gaussian_density(params: GaussianPacketParams, sign: int, t: float, x) -> np.ndarray:
    """Closed-form free-evolved position density of :func:`make_gaussian`."""
    s = params.width(t)
    return np.exp(-(np.asarray(x) - params.centre(t, sign)) ** 2 / s ** 2) / (math.sqrt(math.pi) * s)


def gaussian_momentum_density(params: GaussianPacketParams, sign: int, p) -> np.ndarray:
    sp = params.sigma_p
    return np.exp(-(np.asarray(p) - sign * params.p0) ** 2 / sp ** 2) / (math.sqrt(math.pi) * sp)


def gaussian_f(params: GaussianPacketParams, t):
    """Half-separation over width, ``x(t)/sigma(t)``, for the two-packet state."""
    t = np.asarray(t, dtype=float)
    m, hb, sp = params.mass, params.hbar, params.sigma_p
    return params.ratio * t / np.sqrt((m * hb / sp ** 2) ** 2 + t ** 2)


def log_sqrt_erfc(x):
    """``log(sqrt(erfc(x)))`` without underflow for large positive ``x``."""
    x = np.asarray(x, dtype=float)
    pos = np.maximum(x, 0.0)
    out = np.where(x > 0, np.log(special.erfcx(pos)) - pos ** 2,
                   np.log(special.erfc(np.minimum(x, 0.0))))
    return 0.5 * out


def analytic_gaussian_wE(params: GaussianPacketParams, t):
    """Spatial w of the freely evolved two-packet decomposition at time ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInputError("t must be nonnegative")
    val = np.exp(log_sqrt_erfc(gaussian_f(params, t)))
    return float(val) if val.ndim == 0 else val


def analytic_gaussian_wF(params: GaussianPacketParams) -> tuple[float, float]:
    """Momentum w of the two-packet decomposition as ``(value, log value)``."""
    log_w = float(log_sqrt_erfc(abs(params.ratio)))
    return math.exp(log_w), log_w


# ---------------------------------------------------------------- momentum space

def momentum_amplitudes(psi: GridWavefunction) -> np.ndarray:
    """``phi(p_k)`` on the FFT momentum grid, normalised so sum |phi|^2 dp = norm^2."""
    g = psi.grid
    p = g.momenta(psi.hbar)
    phase = np.exp(-1j * p * g.x_first / psi.hbar)
    return np.fft.fft(psi.samples) * g.dx / math.sqrt(2 * math.pi * psi.hbar) * phase


def momentum_amplitude_at(psi: GridWavefunction, p: float) -> complex:
    """Direct quadrature of the Fourier integral at a single momentum."""
    x = psi.grid.x
    integrand = np.exp(-1j * p * x / psi.hbar) * psi.samples
    return complex(integrand.sum() * psi.grid.dx / math.sqrt(2 * math.pi * psi.hbar))


def _kinetic_phase(psi: GridWavefunction, dt: float) -> np.ndarray:
    p = psi.grid.momenta(psi.hbar)
    return np.exp(-1j * p ** 2 * dt / (2 * psi.mass * psi.hbar))


def propagate_free(psi: GridWavefunction, dt: float) -> GridWavefunction:
    """Exact free evolution on the grid (any sign of ``dt``)."""
    if not np.isfinite(dt):
        raise InvalidInputError("dt must be finite")
    if dt == 0:
        return psi
    return psi.with_data(np.fft.ifft(_kinetic_phase(psi, dt) * np.fft.fft(psi.samples)))


def _check_potential(psi: GridWavefunction, V) -> np.ndarray:
    V = np.asarray(V, dtype=float).reshape(-1)
    if V.size != psi.grid.n_cells:
        raise InvalidInputError("potential must have one value per cell")
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("potential contains NaN or Inf")
    return V


def propagate_potential(psi: GridWavefunction, V, dt: float, n_steps: int
                        ) -> GridWavefunction:
    """Strang split-step evolution over ``n_steps`` steps of size ``dt``."""
    if n_steps < 1:
        raise InvalidInputError("n_steps must be at least 1")
    V = _check_potential(psi, V)
    half = np.exp(-0.5j * V * dt / psi.hbar)
    full = half * half
    kin = _kinetic_phase(psi, dt)
    fft, ifft = np.fft.fft, np.fft.ifft
    a = half * psi.samples
    for step in range(n_steps):
        a = ifft(kin * fft(a))
        a = (full if step < n_steps - 1 else half) * a
    return psi.with_data(a)


class SplitStepPropagator:
    """Callable ``(state, t) -> U(t) state``; exact when ``potential`` is None.

    With a potential the interval is cut into ``ceil(|t| / max_dt)`` Strang
    steps.
    """

    def __init__(self, potential=None, max_dt: float = 0.05):
        if max_dt <= 0:
            raise InvalidInputError("max_dt must be positive")
        self.potential = None if potential is None else np.asarray(potential, dtype=float)
        self.max_dt = max_dt

    @property
    def is_free(self) -> bool:
        return self.potential is None

    def __call__(self, psi: GridWavefunction, t: float) -> GridWavefunction:
        if t == 0:
            return psi
        if self.potential is None:
            return propagate_free(psi, t)
        n = max(1, int(math.ceil(abs(t) / self.max_dt - 1e-9)))
        return propagate_potential(psi, self.potential, t / n, n)


# ---------------------------------------------------------------- measures

def position_project(psi: GridWavefunction, mask) -> GridWavefunction:
    """Zero the samples outside ``mask`` (a cell mask or a :class:`Region`)."""
    m = as_mask(mask, psi.grid.x)
    return psi.with_data(np.where(m, psi.samples, 0))


def momentum_project(psi: GridWavefunction, mask) -> GridWavefunction:
    """Zero the Fourier modes outside ``mask`` (FFT order, or a momentum Region)."""
    m = as_mask(mask, psi.grid.momenta(psi.hbar))
    return psi.with_data(np.fft.ifft(np.where(m, np.fft.fft(psi.samples), 0)))


class PositionMeasure:
    """Spatial spectral measure: one atom per grid cell."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.points = grid.x[:, None]

    @property
    def n_atoms(self) -> int:
        return self.grid.n_cells

    def coefficients(self, data):
        return np.atleast_2d(data) * math.sqrt(self.grid.dx)

    def reduce_atoms(self, sq):
        return sq

    def project(self, psi, atom_mask):
        return position_project(psi, atom_mask)

    def densities(self, states) -> np.ndarray:
        return np.stack([s.density() for s in states])


class MomentumMeasure:
    """Momentum spectral measure over discrete Fourier modes.

    With ``velocity=True`` atom points are ``p / mass``, which is the
    asymptotic-velocity measure of free motion.
    """

    def __init__(self, grid: GridSpec, hbar: float = 1.0, mass: float = 1.0,
                 velocity: bool = False):
        self.grid, self.hbar, self.mass = grid, hbar, mass
        p = grid.momenta(hbar)
        self.points = (p / mass if velocity else p)[:, None]

    @property
    def n_atoms(self) -> int:
        return self.grid.n_cells

    def coefficients(self, data):
        n = self.grid.n_cells
        return np.fft.fft(np.atleast_2d(data), axis=-1) * math.sqrt(self.grid.dx / n)

    def reduce_atoms(self, sq):
        return sq

    def project(self, psi, atom_mask):
        return psi.with_data(np.fft.ifft(np.where(atom_mask, np.fft.fft(psi.samples), 0)))

    def densities(self, states) -> np.ndarray:
        return np.abs(self.coefficients(np.stack([s.data for s in states]))) ** 2 \
            / self.grid.dp(self.hbar)


def edge_density(psi: GridWavefunction, cells: int = EDGE_CELLS) -> float:
    d = psi.density()
    return float(max(d[:cells].max(), d[-cells:].max()))


def wrap_warning(psi: GridWavefunction, cells: int = EDGE_CELLS,
                 threshold: float = EDGE_DENSITY) -> bool:
    """True when density near the periodic boundary suggests wrap-around."""
    return edge_density(psi, cells) > threshold
