"""Asymptotic-velocity channels of a one-dimensional particle.

For free motion the asymptotic velocity is ``P / m`` and its spectral
measure is a momentum mask.  With a short-range potential the bound
subspace (from a fourth-order finite-difference eigensolve) is its own
channel; continuum velocity regions are approximated by momentum masks
sandwiched between continuum projections, which is exact only for the
region covering all velocities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh, splu

from .decomposition import Decomposition, evolve_along, w_general
from .errors import InvalidInputError, NumericalError, ResourceLimitError
from .spaces import Region, Whole, as_mask, cover_check
from .wavegrid import (GridSpec, GridWavefunction, MomentumMeasure, PositionMeasure,
                       SplitStepPropagator, edge_density, wrap_warning)

BOUND = "bound"
EIGEN_RESIDUAL = 1e-8
REFINE_RESIDUAL = 1e-10
BOUNDARY_WARN = 1e-3
MONOTONE_JITTER = 1e-3


def fd4_hamiltonian(grid: GridSpec, potential, mass: float = 1.0, hbar: float = 1.0):
    """Periodic fourth-order finite-difference Hamiltonian as a sparse matrix."""
    n, dx = grid.n_cells, grid.dx
    c = -hbar ** 2 / (2 * mass) / (12 * dx ** 2)
    stencil = {0: -30.0, 1: 16.0, -1: 16.0, 2: -1.0, -2: -1.0}
    diags, offsets = [], []
    for off, coef in stencil.items():
        diags.append(np.full(n - abs(off), c * coef))
        offsets.append(off)
        if off:
            diags.append(np.full(abs(off), c * coef))
            offsets.append(-np.sign(off) * (n - abs(off)))
    H = sparse.diags(diags, offsets, shape=(n, n), format="csc")
    return (H + sparse.diags(np.asarray(potential, dtype=float))).tocsc()


def spectral_hamiltonian(grid: GridSpec, potential, mass: float = 1.0, hbar: float = 1.0):
    """Matrix-free Hamiltonian with the exact Fourier kinetic term used by the propagators."""
    V = np.asarray(potential, dtype=float)
    kinetic = grid.momenta(hbar) ** 2 / (2 * mass)

    def apply(v):
        """``H v`` for a vector or for the columns of a matrix."""
        shape = (-1,) + (1,) * (v.ndim - 1)
        k, pot = kinetic.reshape(shape), V.reshape(shape)
        return np.fft.ifft(k * np.fft.fft(v, axis=0), axis=0) + pot * v

    return apply


def _refine(apply_h, H4, vals, vecs, tol, max_iter=30):
    """Davidson refinement of finite-difference eigenpairs against ``apply_h``.

    Each state's correction is preconditioned by the finite-difference
    operator shifted just below that state's energy, with Olsen's
    projection so the correction does not collapse back onto the state.
    """
    n, k = H4.shape[0], len(vals)
    eye = sparse.identity(n, format="csc")
    gap = 1e-3 * max(1.0, float(np.ptp(vals)) if k > 1 else 1.0)
    lus = [splu((H4 - (v - gap) * eye).astype(complex).tocsc()) for v in vals]
    basis = vecs.astype(complex)
    for _ in range(max_iter):
        Q, _ = np.linalg.qr(basis)
        HQ = apply_h(Q)
        ritz_vals, U = np.linalg.eigh(Q.conj().T @ HQ)
        ritz_vals, U = ritz_vals[:k], U[:, :k]
        ritz = Q @ U
        res = HQ @ U - ritz * ritz_vals
        norms = np.linalg.norm(res, axis=0)
        if norms.max() <= tol:
            return ritz_vals, ritz, norms
        fresh = []
        for j in np.flatnonzero(norms > tol):
            mr, mu = lus[j].solve(res[:, j]), lus[j].solve(ritz[:, j])
            fresh.append(mr - np.vdot(ritz[:, j], mr) / np.vdot(ritz[:, j], mu) * mu)
        keep = Q if Q.shape[1] + len(fresh) <= 8 * k else ritz
        basis = np.column_stack([keep, *fresh])
    raise NumericalError(f"bound-state refinement stalled at residual {norms.max():.3g}")


def count_below(H, energy: float) -> int:
    """Number of eigenvalues of the sparse Hermitian ``H`` below ``energy``.

    Sylvester inertia: the negative pivots of an unpivoted LU of ``H - energy``.
    """
    n = H.shape[0]
    lu = splu((H - energy * sparse.identity(n, format="csc")).tocsc(), permc_spec="NATURAL",
              diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    return int((lu.U.diagonal().real < 0).sum())


def bound_states(grid: GridSpec, potential, mass: float = 1.0, hbar: float = 1.0,
                 max_states: int = 16, residual_tol: float = EIGEN_RESIDUAL,
                 refine: bool = True, threshold: float | None = None):
    """Eigenpairs below ``threshold`` as ``(energies, states (B, n))``, grid-normalised.

    The count comes from the inertia of the fourth-order finite-difference
    Hamiltonian; shift-invert Lanczos then finds exactly that many states.
    ``threshold`` defaults to ``-1e-4 * max(1, |min V|)`` so that states at
    the continuum edge, which Lanczos cannot separate from the box modes, are
    left out.  With ``refine`` the states are polished into eigenvectors of
    the Fourier-kinetic Hamiltonian that the split-step propagator
    integrates, so they are stationary under propagation up to time-step
    error.
    """
    V = np.asarray(potential, dtype=float)
    if not np.all(np.isfinite(V)):
        raise InvalidInputError("potential contains NaN or Inf")
    H = fd4_hamiltonian(grid, V, mass, hbar)
    scale = max(1.0, abs(float(V.min())))
    if threshold is None:
        threshold = -1e-4 * scale
    k = count_below(H, threshold)
    if k > max_states:
        raise ResourceLimitError(f"{k} bound states exceed max_states={max_states}")
    if k == 0:
        return np.zeros(0), np.zeros((0, grid.n_cells), dtype=complex)
    shift = float(V.min()) - 0.1 * scale
    # fixed start vector: ARPACK's default is random and breaks rerun determinism
    v0 = np.random.default_rng(0).standard_normal(grid.n_cells)
    vals, vecs = eigsh(H, k=k, sigma=shift, which="LM", v0=v0)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    res = np.linalg.norm(H @ vecs - vecs * vals, axis=0)
    if np.any(res > residual_tol * scale):
        raise NumericalError(f"eigenvector residual {res.max():.3g} exceeds {residual_tol}")
    if refine:
        vals, vecs, _ = _refine(spectral_hamiltonian(grid, V, mass, hbar), H, vals, vecs,
                                REFINE_RESIDUAL)
    return vals, (vecs.T / math.sqrt(grid.dx)).astype(complex)


class AsymptoticVelocityMeasure:
    """Spectral measure of the asymptotic velocity on a grid.

    ``potential=None`` gives free motion.  Otherwise bound states are
    computed once at construction.
    """

    def __init__(self, grid: GridSpec, mass: float = 1.0, hbar: float = 1.0,
                 potential=None, max_bound: int = 16):
        self.grid, self.mass, self.hbar = grid, mass, hbar
        self.velocities = grid.momenta(hbar) / mass
        self.potential = None if potential is None else np.asarray(potential, dtype=float)
        if self.potential is None:
            self.kind = "free"
            self.energies = np.zeros(0)
            self.bound = np.zeros((0, grid.n_cells), dtype=complex)
        else:
            self.kind = "short-range"
            self.energies, self.bound = bound_states(grid, self.potential, mass, hbar, max_bound)

    def propagator(self, max_dt: float = 0.05) -> SplitStepPropagator:
        return SplitStepPropagator(self.potential, max_dt)

    def velocity_mask(self, region) -> np.ndarray:
        return as_mask(region, self.velocities)

    def _bound_part(self, samples):
        if not len(self.bound):
            return np.zeros_like(samples)
        amps = self.bound.conj() @ samples * self.grid.dx
        return amps @ self.bound

    def project(self, psi: GridWavefunction, region) -> GridWavefunction:
        """``F_+(region) psi``; ``region`` is a velocity Region/mask or :data:`BOUND`."""
        if isinstance(region, str):
            if region != BOUND:
                raise InvalidInputError(f"unknown channel {region!r}")
            return psi.with_data(self._bound_part(psi.samples))
        mask = self.velocity_mask(region)
        cont = psi.samples - self._bound_part(psi.samples)
        filtered = np.fft.ifft(np.where(mask, np.fft.fft(cont), 0))
        return psi.with_data(filtered - self._bound_part(filtered))

    def scalar_weights(self, psi: GridWavefunction) -> np.ndarray:
        """Continuum mass per velocity mode (bound mass excluded)."""
        cont = psi.samples - self._bound_part(psi.samples)
        return np.abs(np.fft.fft(cont)) ** 2 * psi.grid.dx / psi.grid.n_cells


def f_plus_project(F: AsymptoticVelocityMeasure, region, psi: GridWavefunction
                   ) -> GridWavefunction:
    return F.project(psi, region)


def smoothed_velocity_filter(F: AsymptoticVelocityMeasure, region, psi: GridWavefunction,
                             edge_cells: int = 4) -> GridWavefunction:
    """Momentum filter with a raised-cosine edge over ``edge_cells`` modes.

    Not a projection; trades exactness for faster spatial decay of the
    filtered component.  Free motion only.
    """
    mask = F.velocity_mask(region).astype(float)
    order = np.argsort(F.velocities, kind="stable")
    m = mask[order]
    ramp = 0.5 - 0.5 * np.cos(np.pi * (np.arange(1, edge_cells + 1) / (edge_cells + 1)))
    smooth = m.copy()
    for k in np.flatnonzero(np.diff(m)):
        rising = m[k + 1] > m[k]
        lo = max(0, k + 1 - edge_cells // 2)
        seg = ramp if rising else ramp[::-1]
        seg = seg[:min(edge_cells, len(m) - lo)]
        smooth[lo:lo + len(seg)] = seg
    filt = np.empty_like(smooth)
    filt[order] = smooth
    return psi.with_data(np.fft.ifft(filt * np.fft.fft(psi.samples)))


@dataclass(frozen=True)
class ChannelPartition:
    """Named channels: velocity regions, optionally plus the bound channel."""

    channels: tuple

    def __post_init__(self):
        ch = tuple((str(name), region) for name, region in self.channels)
        if not ch:
            raise InvalidInputError("a channel partition needs at least one channel")
        object.__setattr__(self, "channels", ch)

    @classmethod
    def velocity_sign(cls, with_bound: bool = False) -> "ChannelPartition":
        from .spaces import interval

        parts = [("v<0", interval(hi=0.0, closed_hi=False)), ("v>=0", interval(lo=0.0))]
        return cls(tuple(([(BOUND, BOUND)] if with_bound else []) + parts))

    @classmethod
    def bound_vs_continuum(cls) -> "ChannelPartition":
        return cls(((BOUND, BOUND), ("continuum", Whole())))

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.channels]

    def check(self, F: AsymptoticVelocityMeasure) -> tuple[bool, bool]:
        """(disjoint, covering) over the velocity grid and bound channel."""
        masks = [F.velocity_mask(r) for _, r in self.channels if not isinstance(r, str)]
        has_bound = any(isinstance(r, str) for _, r in self.channels)
        if not masks:
            return True, has_bound and F.kind == "free"
        disjoint, covering = cover_check(masks)
        if F.kind == "short-range" and not has_bound and len(F.bound):
            covering = False
        return disjoint, covering


@dataclass
class FTResult:
    state: GridWavefunction
    wrapped: bool


def f_t_project(region, psi: GridWavefunction, t: float, propagator=None) -> FTResult:
    """``U(-t) E(t region) U(t) psi``, with a flag for density at the box edge."""
    if not t > 0:
        raise InvalidInputError("t must be positive")
    prop = propagator or SplitStepPropagator()
    moved = prop(psi, t)
    scaled = as_mask(region, psi.grid.x / t)
    out = prop(moved.with_data(np.where(scaled, moved.samples, 0)), -t)
    return FTResult(out, wrap_warning(moved))


def boundary_mass(F: AsymptoticVelocityMeasure, psi: GridWavefunction, region) -> float:
    """Fraction of continuum mass on velocity modes adjacent to the region's edge."""
    if isinstance(region, str):
        return 0.0
    w = F.scalar_weights(psi)
    order = np.argsort(F.velocities, kind="stable")
    m = F.velocity_mask(region)[order]
    edge = np.zeros(len(m), dtype=bool)
    flips = np.flatnonzero(np.diff(m))
    edge[flips] = True
    edge[flips + 1] = True
    total = w.sum()
    return float(w[order][edge].sum() / total) if total > 0 else 0.0


@dataclass
class DecayCurve:
    times: np.ndarray
    errors: np.ndarray
    boundary_mass: np.ndarray
    wrapped: np.ndarray
    warnings: list = field(default_factory=list)


def convergence_diagnostic(F: AsymptoticVelocityMeasure, psi: GridWavefunction,
                           regions: Sequence, time_grid, propagator=None) -> DecayCurve:
    """``e(t) = ||F_t(region) psi - F_+(region) psi||`` per region and time (t > 0)."""
    times = np.asarray(time_grid, dtype=float)
    if np.any(times <= 0):
        raise InvalidInputError("diagnostic times must be positive")
    prop = propagator or F.propagator()
    targets = [F.project(psi, r) for r in regions]
    errors = np.zeros((len(times), len(regions)))
    wrapped = np.zeros(len(times), dtype=bool)
    for i, t in enumerate(times):
        moved = prop(psi, t)
        wrapped[i] = wrap_warning(moved)
        for j, r in enumerate(regions):
            cut = moved.with_data(np.where(as_mask(r, psi.grid.x / t), moved.samples, 0))
            back = prop(cut, -t)
            errors[i, j] = (back - targets[j]).norm()
    bmass = np.array([boundary_mass(F, psi, r) for r in regions])
    warnings = [f"region {j} has {b:.3g} of the mass on its velocity boundary; "
                "expect slow convergence" for j, b in enumerate(bmass) if b > BOUNDARY_WARN]
    if wrapped.any():
        warnings.append(f"density reached the box edge at {int(wrapped.sum())} sample times")
    return DecayCurve(times, errors, bmass, wrapped, warnings)


def transient_end(values, jitter: float = MONOTONE_JITTER) -> int:
    """First index after which the series never rises by more than ``jitter``."""
    v = np.asarray(values, dtype=float)
    rises = np.flatnonzero(np.diff(v) > jitter)
    return 0 if rises.size == 0 else int(rises[-1] + 1)


def tail_slope(times, values) -> float:
    """Log-log slope fitted over the second half of the positive samples."""
    t, v = np.asarray(times, float), np.asarray(values, float)
    ok = (t > 0) & (v > 0)
    t, v = t[ok], v[ok]
    if len(t) < 4:
        return float("nan")
    half = len(t) // 2
    return float(np.polyfit(np.log(t[half:]), np.log(v[half:]), 1)[0])


@dataclass
class ChannelSeparationResult:
    times: np.ndarray
    w_position: np.ndarray
    w_momentum: Optional[np.ndarray]
    channel_names: list
    norms2: np.ndarray
    transient_index: int
    tail_slope: float
    edge_density: np.ndarray
    certified: bool
    warnings: list = field(default_factory=list)

    @property
    def transient_time(self) -> float:
        return float(self.times[self.transient_index])


def channel_separation_curve(F: AsymptoticVelocityMeasure, psi: GridWavefunction,
                   partition: ChannelPartition, time_grid, propagator=None,
                   min_fraction: float = 1e-6) -> ChannelSeparationResult:
    """Spatial w of the evolved channel decomposition over time.

    Channels carrying less than ``min_fraction`` of the norm are dropped
    with a warning.  For free motion the momentum-representation w of the
    same decomposition is returned too; it must stay constant.
    """
    warnings = []
    total = psi.norm2()
    elements, names = [], []
    for name, region in partition.channels:
        part = F.project(psi, region)
        if part.norm2() < min_fraction * total:
            warnings.append(f"channel {name!r} carries {part.norm2() / total:.3g} "
                            "of the norm and was dropped")
            continue
        elements.append(part)
        names.append(name)
    if len(elements) < 2:
        raise InvalidInputError("at least two channels must carry weight")
    D = Decomposition(elements)
    times = np.asarray(time_grid, dtype=float)
    prop = propagator or F.propagator()
    pos, mom = PositionMeasure(psi.grid), MomentumMeasure(psi.grid, psi.hbar, psi.mass)
    w_pos, w_mom, edges = [], [], []
    certified = True
    for _, Dt in evolve_along(D, prop, times):
        r = w_general(pos, Dt)
        certified &= r.certified
        w_pos.append(r.value)
        if F.kind == "free":
            w_mom.append(w_general(mom, Dt).value)
        edges.append(max(edge_density(e) for e in Dt))
    w_pos = np.asarray(w_pos)
    edges = np.asarray(edges)
    if np.any(edges > 1e-8):
        warnings.append(f"edge density up to {edges.max():.3g}; periodic wrap may bias the tail")
    return ChannelSeparationResult(times, w_pos, np.asarray(w_mom) if w_mom else None, names,
                          D.norms2(), transient_end(w_pos), tail_slope(times, w_pos),
                          edges, certified, warnings)
