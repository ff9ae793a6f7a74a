"""Observables of the outcoupled beam.

The two classical mode functions plus the number moments of the input optical
state determine every detector quantity: densities, the detector atom number
and its variance, the normalized variance v, and the Fock-input figure of
merit v_fock = 1 - N_g.

Closed-form optical moments are validated against a truncated Fock-basis
oracle (matrix exponentials of the displacement and squeeze generators).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar as HBAR
from scipy.linalg import expm

from .model import ComplexField, CoupledModeModel, DetectorSpec
from .dynamics import ModePairState


class TruncationError(ValueError):
    """Fock-basis truncation too small for the requested state."""


class VacuumInputError(ValueError):
    """Normalized variances are undefined for a vacuum (n_bar = 0) input."""


class TransferFractionWarning(UserWarning):
    """Detector fraction exceeded 1 beyond the transient tolerance."""


@dataclass(frozen=True)
class FockState:
    n: int

    def __post_init__(self):
        if self.n < 0 or self.n != int(self.n):
            raise ValueError(f"Fock occupation must be a nonnegative integer, got {self.n!r}")


@dataclass(frozen=True)
class CoherentState:
    alpha: complex


@dataclass(frozen=True)
class SqueezedCoherentState:
    """Displaced squeezed state D(alpha) S(r e^{i theta}) |0>."""

    alpha: complex
    r: float
    theta: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"squeeze magnitude must be >= 0, got {self.r!r}")


@dataclass(frozen=True)
class DirectMoments:
    n_bar: float
    bdag2b2: float

    def __post_init__(self):
        if self.n_bar < 0:
            raise ValueError(f"n_bar must be >= 0, got {self.n_bar!r}")
        bound = max(0.0, self.n_bar**2 - self.n_bar)
        if self.bdag2b2 < bound:
            raise ValueError(
                f"bdag2b2={self.bdag2b2!r} violates the n_bar^2 - n_bar >= {bound!r} sanity bound")


OpticalStateSpec = FockState | CoherentState | SqueezedCoherentState | DirectMoments


@dataclass(frozen=True)
class OpticalMoments:
    """Number moments <b^dag b> and <b^dag b^dag b b> of the input mode."""

    n_bar: float
    bdag2b2: float

    def __post_init__(self):
        if self.n_bar < 0 or self.bdag2b2 < 0:
            raise ValueError("moments must be nonnegative")


def optical_moments(spec: OpticalStateSpec) -> OpticalMoments:
    """Closed-form number moments for the supported input states."""
    if isinstance(spec, FockState):
        return OpticalMoments(float(spec.n), float(spec.n * (spec.n - 1)))
    if isinstance(spec, CoherentState):
        n = abs(spec.alpha) ** 2
        return OpticalMoments(n, n**2)
    if isinstance(spec, SqueezedCoherentState):
        sh, ch = math.sinh(spec.r), math.cosh(spec.r)
        ns = sh**2
        mm = -np.exp(1j * spec.theta) * sh * ch      # <db db> of the squeezed vacuum
        a2 = spec.alpha**2
        n_bar = abs(spec.alpha) ** 2 + ns
        b2 = (abs(spec.alpha) ** 4 + 4 * abs(spec.alpha) ** 2 * ns
              + 2 * (np.conj(a2) * mm).real + 2 * ns**2 + abs(mm) ** 2)
        return OpticalMoments(float(n_bar), float(b2))
    if isinstance(spec, DirectMoments):
        return OpticalMoments(spec.n_bar, spec.bdag2b2)
    raise TypeError(f"unsupported optical state spec {spec!r}")


def optical_moments_fock_basis(spec: OpticalStateSpec, dim: int = 60) -> OpticalMoments:
    """Oracle: build the state in a truncated Fock basis and take expectations.

    Raises TruncationError when the occupation left in the top tenth of the
    basis exceeds 1e-10.
    """
    if isinstance(spec, DirectMoments):
        raise TypeError("DirectMoments has no state-vector form to validate")
    a = np.diag(np.sqrt(np.arange(1, dim)), k=1)
    adag = a.T.conj()
    psi = np.zeros(dim, dtype=complex)
    if isinstance(spec, FockState):
        if spec.n >= dim:
            raise TruncationError(f"Fock state n={spec.n} needs dim > {spec.n}")
        psi[spec.n] = 1.0
    else:
        psi[0] = 1.0
        if isinstance(spec, SqueezedCoherentState):
            xi = spec.r * np.exp(1j * spec.theta)
            squeeze = expm(0.5 * (np.conj(xi) * (a @ a) - xi * (adag @ adag)))
            psi = squeeze @ psi
            alpha = spec.alpha
        else:
            alpha = spec.alpha
        displace = expm(alpha * adag - np.conj(alpha) * a)
        psi = displace @ psi
    tail = float(np.sum(np.abs(psi[-max(1, dim // 10):]) ** 2))
    if tail > 1e-10:
        raise TruncationError(f"tail probability {tail:.3e} exceeds 1e-10 at dim={dim}")
    apsi = a @ psi
    aapsi = a @ apsi
    return OpticalMoments(float(np.vdot(apsi, apsi).real),
                          float(np.vdot(aapsi, aapsi).real))


def fano(moments: OpticalMoments) -> float:
    """Normalized input number variance v(N0) = (<b+b+bb> - n^2)/n + 1.

    Zero for Fock states, one for coherent states.
    """
    if moments.n_bar == 0:
        raise VacuumInputError("v(N0) is undefined for n_bar = 0")
    return (moments.bdag2b2 - moments.n_bar**2) / moments.n_bar + 1.0


def densities(state: ModePairState, moments: OpticalMoments) -> tuple[np.ndarray, np.ndarray]:
    """Mean atom and photon densities, |g|^2 <b+b> and |p|^2 <b+b>."""
    return (state.g_tilde.density() * moments.n_bar,
            state.p_tilde.density() * moments.n_bar)


def _integrate_density(field: ComplexField, a: float, b: float) -> float:
    """Trapezoid integral of |field|^2 over [a, b] with fractional endpoints.

    The density between grid points is the linear interpolant; the last cell
    wraps periodically (the grid covers [x_min, x_max) with x_max = x_0 + L).
    Summation is local to [a, b], so the result is nonnegative by construction.
    """
    grid = field.grid
    d = field.density()
    dx = grid.dx
    n = grid.n_x
    dpad = np.concatenate([d, d[:1]])        # wrapped cell to reach x_max

    def partial(j: int, t0: float, t1: float) -> float:
        lo, hi = dpad[j], dpad[j + 1]
        return dx * (lo * (t1 - t0) + 0.5 * (hi - lo) * (t1**2 - t0**2))

    sa = (a - grid.x_min) / dx
    sb = (b - grid.x_min) / dx
    ja = min(int(math.floor(sa)), n - 1)
    jb = min(int(math.floor(sb)), n - 1)
    ta, tb = sa - ja, sb - jb
    if ja == jb:
        return partial(ja, ta, tb)
    total = partial(ja, ta, 1.0) + partial(jb, 0.0, tb)
    if jb > ja + 1:
        inner = dpad[ja + 1:jb + 1]          # full cells between the end cells
        total += dx * float(np.sum(0.5 * (inner[:-1] + inner[1:])))
    return total


def detector_fraction(state: ModePairState, detector: DetectorSpec) -> float:
    """Detector atom fraction N_g = integral of |g|^2 over [x1, x2]."""
    grid = state.g_tilde.grid
    if not (grid.x_min <= detector.x1 and detector.x2 <= grid.x_max):
        raise ValueError("detector window must lie inside the grid")
    n_g = _integrate_density(state.g_tilde, detector.x1, detector.x2)
    if n_g > 1 + 1e-3:
        warnings.warn(f"detector fraction N_g = {n_g:.6f} exceeds 1 + 1e-3; the"
                      " steady-window normalization is being outrun",
                      TransferFractionWarning, stacklevel=2)
    return n_g


@dataclass(frozen=True)
class BeamStatistics:
    """Detector-number statistics of the atom beam for one input state."""

    N_g: float
    mean_N: float
    var_N: float
    v: float
    v_fock: float


def beam_statistics(n_g: float, moments: OpticalMoments) -> BeamStatistics:
    """Variance bookkeeping: V(N) = N_g^2 (<b+b+bb> - n^2) + N_g n and the
    normalized variance via v = N_g v(N0) + (1 - N_g)."""
    if n_g < 0:
        raise ValueError(f"N_g must be >= 0, got {n_g!r}")
    var = n_g**2 * (moments.bdag2b2 - moments.n_bar**2) + n_g * moments.n_bar
    return BeamStatistics(
        N_g=n_g,
        mean_N=n_g * moments.n_bar,
        var_N=var,
        v=n_g * fano(moments) + (1.0 - n_g),
        v_fock=1.0 - n_g,
    )


ATTENUATION_CAP = 1e12


def attenuation_factor(state: ModePairState) -> float:
    """Probe intensity ratio |p(x_min)|^2 / |p(x_max)|^2, capped at 1e12."""
    top = abs(state.p_tilde.values[0]) ** 2
    bottom = abs(state.p_tilde.values[-1]) ** 2
    if bottom <= top / ATTENUATION_CAP:
        return ATTENUATION_CAP
    return top / bottom


@dataclass(frozen=True)
class CommutatorResidual:
    """Diagonal weight left to the vacuum-correction operators.

    Both fields are 1 at t=0 for the atoms (all vacuum) and near 1 - N_g
    locally under steady transfer; values below -1e-8 indicate the two-mode
    bookkeeping has gone unphysical.
    """

    atomic: np.ndarray
    probe: np.ndarray

    @property
    def min_residual(self) -> float:
        return float(min(self.atomic.min(), self.probe.min()))


def commutator_residual(state: ModePairState, model: CoupledModeModel) -> CommutatorResidual:
    window = model.detector.x2 - model.detector.x1
    probe_window = model.detector.probe_window
    stretch = model.params.m * model.params.c / (HBAR * model.k)
    return CommutatorResidual(
        atomic=1.0 - state.g_tilde.density() * window,
        probe=1.0 - state.p_tilde.density() * stretch * probe_window,
    )
