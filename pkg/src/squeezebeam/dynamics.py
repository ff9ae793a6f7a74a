"""Coupled-mode integrator: RK4 in time for the atomic mode function with a
cross-propagation (boundary-value in x) solve of the probe envelope at every
Runge-Kutta stage.

The probe envelope obeys a linear first-order ODE in x and is integrated with
an exact integrating factor for its diagonal coefficient plus a 4th-order
(cubic, 4-point) quadrature of the source term, so each in-x step is a single
one-step map with local O(dx^5) error.  The recurrence is a prefix sum of
unit-modulus factors, which keeps it unconditionally stable and vectorizable.

Gauge handling: `evolve` always integrates in the drive frame (gauge constant
equal to the two-photon detuning), where the constant probe inflow represents
a monochromatic drive and the slow-envelope reduction is self-consistent.  The
configured gauge constant only attaches a position-independent phase
exp(-i (delta - C) t) to the reported fields, so every modulus-based
observable is exactly gauge-invariant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import hbar as HBAR
from scipy.special import erf

from .model import ComplexField, CoupledModeModel

GAUGE_TOKENS = ("light_shift", "zero", "delta0", "drive")


class NonFiniteFieldError(RuntimeError):
    """A field stopped being finite during integration."""


class BoundaryContactWarning(UserWarning):
    """Atomic density has reached the edge of the periodic grid."""


class ProbeStepWarning(UserWarning):
    """In-x probe integration error estimate exceeds tolerance."""


@dataclass(frozen=True)
class ModePairState:
    """Atomic and probe mode functions at one instant."""

    t: float
    g_tilde: ComplexField
    p_tilde: ComplexField

    def __post_init__(self):
        if self.g_tilde.grid != self.p_tilde.grid:
            raise ValueError("g_tilde and p_tilde must share one grid")


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 1e-7
    t_final: float = 7.2e-3
    gauge_constant: float | str = "light_shift"
    snapshot_stride: int | None = None
    derivative_scheme: str = "spectral"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_final < self.dt:
            raise ValueError("t_final must be >= dt")
        if self.t_final / self.dt > 1e8:
            raise ValueError("t_final/dt exceeds the 1e8 step guard")
        if isinstance(self.gauge_constant, str) and self.gauge_constant not in GAUGE_TOKENS:
            raise ValueError(f"gauge_constant must be a number or one of {GAUGE_TOKENS}")
        if isinstance(self.gauge_constant, float) and not math.isfinite(self.gauge_constant):
            raise ValueError("gauge_constant must be finite")
        if self.snapshot_stride is not None and self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.derivative_scheme not in ("spectral", "finite-difference-4"):
            raise ValueError("derivative_scheme must be 'spectral' or 'finite-difference-4'")

    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def stride(self) -> int:
        if self.snapshot_stride is not None:
            return self.snapshot_stride
        return max(1, -(-self.n_steps() // 200))   # ceil division, <= 200 snapshots


@dataclass
class Trajectory:
    """Snapshots plus the per-step scalar log of one evolution."""

    states: list[ModePairState]
    times: np.ndarray
    log_t: np.ndarray
    log_norm: np.ndarray          # integral |g|^2 dx at every step
    log_p_left2: np.ndarray       # |p(x_min)|^2
    log_p_right2: np.ndarray      # |p(x_max)|^2
    flux_residual: np.ndarray     # centered-difference balance residual, interior steps
    gauge_constant: float
    boundary_contact: bool = False
    error: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValueError("times and states disagree")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def final(self) -> ModePairState:
        return self.states[-1]

    @property
    def max_flux_residual(self) -> float:
        return float(self.flux_residual.max()) if self.flux_residual.size else 0.0


def resolve_gauge(gauge: float | str, model: CoupledModeModel) -> float:
    """Map a gauge token to its numeric constant for this model."""
    if isinstance(gauge, str):
        p = model.params
        if gauge == "light_shift":
            return -abs(p.Omega23) ** 2 / p.Delta
        if gauge == "zero":
            return 0.0
        if gauge == "delta0":
            return model.detuning.total
        if gauge == "drive":
            return model.delta
        raise ValueError(f"unknown gauge token {gauge!r}")
    return float(gauge)


class _Workspace:
    """Precomputed arrays for one (model, gauge, scheme) combination."""

    def __init__(self, model: CoupledModeModel, gauge: float, scheme: str):
        p = model.params
        grid = model.grid
        self.model = model
        self.gauge = gauge
        self.scheme = scheme
        self.n = grid.n_x
        self.dx = grid.dx
        self.x = grid.x()
        self.c = p.c
        self.p_in = model.p_in
        self.omc = model.omega_c.values
        self.omc_conj = np.conj(self.omc)
        # atomic bracket constant hbar k^2/2m - |Omega23|^2/Delta - omega_t - C,
        # assembled from the cancellation-free drive-frame value so the ~1e3
        # rad/s physics is not polluted by rounding of the ~1e13 light shift
        self.bracket = model.drive_frame_bracket + (model.delta - gauge)
        if scheme == "spectral":
            q = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
            self.Kq = HBAR * q**2 / (2 * p.m) + HBAR * model.k * q / p.m
        else:
            self.h1 = HBAR * model.k / (p.m * 12 * self.dx)
            self.h2 = HBAR / (2 * p.m * 12 * self.dx**2)
        # probe integrating factor M(x) = [ (delta - C)(x - x_min) - Vbar * Phi(x) ] / c
        # Phi is the running integral of |phi0|^2, exact for the Gaussian profile.
        sigma = model.sigma
        dens = model.phi0.density()
        jpk = int(np.argmax(dens))
        amp2 = dens[jpk] * math.exp((self.x[jpk] / sigma) ** 2)
        vbar = p.g13**2 * p.N / p.Delta
        phi_int = amp2 * 0.5 * math.sqrt(math.pi) * sigma * (
            erf(self.x / sigma) - erf(grid.x_min / sigma))
        self.M = ((model.delta - gauge) * (self.x - grid.x_min) - vbar * phi_int) / self.c
        self.eiM = np.exp(1j * self.M)
        self.emiM = np.exp(-1j * self.M)

    def kinetic(self, g: np.ndarray) -> np.ndarray:
        """Apply the shifted kinetic operator -(hbar/2m) dxx - i (hbar k/m) dx."""
        if self.scheme == "spectral":
            return np.fft.ifft(self.Kq * np.fft.fft(g))
        d1 = (np.roll(g, 2) - 8 * np.roll(g, 1) + 8 * np.roll(g, -1) - np.roll(g, -2)) * self.h1
        d2 = (-np.roll(g, 2) + 16 * np.roll(g, 1) - 30 * g
              + 16 * np.roll(g, -1) - np.roll(g, -2)) * self.h2
        return -d2 - 1j * d1

    def probe(self, g: np.ndarray) -> np.ndarray:
        """Integrate the probe envelope left to right for the given atomic field."""
        n = self.n
        F = self.eiM * ((1j / self.c) * self.omc_conj * g)
        w = self.dx / 24.0
        Q = np.empty(n - 1, dtype=complex)
        Q[1:n - 2] = w * (-F[0:n - 3] + 13 * F[1:n - 2] + 13 * F[2:n - 1] - F[3:n])
        Q[0] = w * (9 * F[0] + 19 * F[1] - 5 * F[2] + F[3])
        Q[n - 2] = w * (F[n - 4] - 5 * F[n - 3] + 19 * F[n - 2] + 9 * F[n - 1])
        G = np.empty(n, dtype=complex)
        G[0] = self.p_in
        np.cumsum(Q, out=G[1:])
        G[1:] += self.p_in
        return self.emiM * G

    def probe_error_estimate(self, g: np.ndarray) -> float:
        """Compare against a trapezoid-source solve; the difference bounds the
        in-x discretization error of the 4th-order scheme from above."""
        F = self.eiM * ((1j / self.c) * self.omc_conj * g)
        Q2 = 0.5 * self.dx * (F[:-1] + F[1:])
        G = np.empty(self.n, dtype=complex)
        G[0] = self.p_in
        np.cumsum(Q2, out=G[1:])
        G[1:] += self.p_in
        p2 = self.emiM * G
        return float(np.max(np.abs(p2 - self.probe(g))))

    def rhs(self, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = self.probe(g)
        return -1j * (self.kinetic(g) + self.bracket * g - self.omc * p), p

    def rk4(self, g: np.ndarray, dt: float) -> np.ndarray:
        k1, _ = self.rhs(g)
        k2, _ = self.rhs(g + 0.5 * dt * k1)
        k3, _ = self.rhs(g + 0.5 * dt * k2)
        k4, _ = self.rhs(g + dt * k3)
        return g + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def atomic_rhs(state: ModePairState, model: CoupledModeModel, gauge: float | str,
               scheme: str = "spectral") -> ComplexField:
    """Time derivative of the atomic mode function, d g_tilde / dt."""
    ws = _Workspace(model, resolve_gauge(gauge, model), scheme)
    out = -1j * (ws.kinetic(state.g_tilde.values)
                 + ws.bracket * state.g_tilde.values
                 - ws.omc * state.p_tilde.values)
    if not np.all(np.isfinite(out)):
        raise NonFiniteFieldError("atomic_rhs produced non-finite values")
    return ComplexField(model.grid, out)


def solve_probe_envelope(g_tilde: ComplexField, model: CoupledModeModel,
                         gauge: float | str, check_error: bool = True) -> ComplexField:
    """Probe envelope consistent with the given atomic field.

    Integrates ic dp/dx = (delta - C - V_p(x)) p - Omega_C^*(x) g(x) from the
    left boundary value p(x_min) = p_in.
    """
    ws = _Workspace(model, resolve_gauge(gauge, model), scheme="spectral")
    p = ws.probe(g_tilde.values)
    if check_error:
        est = ws.probe_error_estimate(g_tilde.values)
        scale = float(np.max(np.abs(p)))
        if scale > 0 and est > 1e-6 * scale:
            warnings.warn(
                f"probe in-x integration error estimate {est:.2e} exceeds 1e-6 of"
                f" the envelope scale {scale:.2e}; refine the grid",
                ProbeStepWarning, stacklevel=2)
    return ComplexField(model.grid, p)


def initial_state(model: CoupledModeModel) -> ModePairState:
    """No outcoupled atoms; probe at its plane-wave inflow amplitude everywhere."""
    zeros = np.zeros(model.grid.n_x, dtype=complex)
    flat = np.full(model.grid.n_x, model.p_in, dtype=complex)
    return ModePairState(0.0, ComplexField(model.grid, zeros), ComplexField(model.grid, flat))


def rk4_time_step(state: ModePairState, model: CoupledModeModel,
                  config: EvolutionConfig) -> ModePairState:
    """Advance one RK4 step of size config.dt in the configured gauge.

    Every stage recomputes the probe envelope from that stage's atomic field;
    the returned probe is the envelope consistent with the returned g_tilde.
    """
    ws = _Workspace(model, resolve_gauge(config.gauge_constant, model),
                    config.derivative_scheme)
    g_new = ws.rk4(state.g_tilde.values, config.dt)
    if not np.all(np.isfinite(g_new)):
        raise NonFiniteFieldError(f"non-finite atomic field after step at t={state.t!r}")
    return ModePairState(state.t + config.dt,
                         ComplexField(model.grid, g_new),
                         ComplexField(model.grid, ws.probe(g_new)))


def evolve(model: CoupledModeModel, config: EvolutionConfig) -> Trajectory:
    """Integrate from the no-atoms initial condition to t_final.

    Integration runs in the drive frame; the configured gauge constant is
    applied to the recorded snapshots as a position-independent phase.  On a
    non-finite field the partial trajectory is returned with `error` set.
    """
    gauge_out = resolve_gauge(config.gauge_constant, model)
    ws = _Workspace(model, model.delta, config.derivative_scheme)
    n_steps = config.n_steps()
    dt = config.dt
    stride = config.stride()

    est = ws.probe_error_estimate(np.full(ws.n, ws.p_in, dtype=complex))
    if est > 1e-6 * ws.p_in:
        warnings.warn("probe in-x integration error estimate exceeds tolerance on"
                      " this grid; refine n_x", ProbeStepWarning, stacklevel=2)

    g = np.zeros(ws.n, dtype=complex)
    p = ws.probe(g)
    log_t = np.empty(n_steps + 1)
    log_norm = np.empty(n_steps + 1)
    log_pl = np.empty(n_steps + 1)
    log_pr = np.empty(n_steps + 1)
    log_t[0] = 0.0
    log_norm[0] = 0.0
    log_pl[0] = abs(p[0]) ** 2
    log_pr[0] = abs(p[-1]) ** 2

    def snapshot(step: int, gv: np.ndarray, pv: np.ndarray) -> ModePairState:
        t = step * dt
        phase = np.exp(-1j * (model.delta - gauge_out) * t)
        return ModePairState(t, ComplexField(model.grid, gv * phase),
                             ComplexField(model.grid, pv * phase))

    states = [snapshot(0, g, p)]
    times = [0.0]
    error = None
    contact = False
    peak_seen = 0.0
    last = 0

    for step in range(1, n_steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):   # blow-up is caught below
            g = ws.rk4(g, dt)
            if not np.all(np.isfinite(g)):
                error = f"non-finite atomic field at step {step} (t={step * dt:.6e} s)"
                break
            p = ws.probe(g)
            last = step
            log_t[step] = step * dt
            log_norm[step] = float(np.sum(np.abs(g) ** 2)) * ws.dx
            log_pl[step] = abs(p[0]) ** 2
            log_pr[step] = abs(p[-1]) ** 2
        if step % stride == 0 or step == n_steps:
            dens = np.abs(g) ** 2
            peak_seen = max(peak_seen, float(dens.max()))
            if not contact and peak_seen > 0:
                if max(dens[:5].max(), dens[-5:].max()) > 1e-6 * peak_seen:
                    contact = True
                    warnings.warn("atomic density reached the grid boundary; the"
                                  " periodic domain is too small for this t_final",
                                  BoundaryContactWarning, stacklevel=2)
            states.append(snapshot(step, g, p))
            times.append(step * dt)

    n = last
    # residual of d/dt int|g|^2 dx = c (|p(x_min)|^2 - |p(x_max)|^2), centered in t
    if n >= 2:
        with np.errstate(invalid="ignore", over="ignore"):   # blow-up logs hold inf
            lhs = 0.5 * (log_norm[2:n + 1] - log_norm[0:n - 1])
            rhs = dt * ws.c * (log_pl[1:n] - log_pr[1:n])
            residual = np.abs(lhs - rhs) / (log_norm[1:n] + ws.c * dt * ws.p_in**2)
    else:
        residual = np.zeros(0)

    return Trajectory(
        states=states,
        times=np.asarray(times),
        log_t=log_t[:n + 1],
        log_norm=log_norm[:n + 1],
        log_p_left2=log_pl[:n + 1],
        log_p_right2=log_pr[:n + 1],
        flux_residual=residual,
        gauge_constant=gauge_out,
        boundary_contact=contact,
        error=error,
        diagnostics={"probe_error_estimate": est, "n_steps": n_steps,
                     "completed_steps": last},
    )
