"""Scenario runner and parameter sweeps.

A Scenario bundles everything one evolution needs; `sweep` fans scenarios out
over a process pool and reduces each to its minimum-over-time v_fock.  Sweep
results are gathered in input order, so they are identical for any worker
count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import DetectorSpec, Grid, PhysicalParams, build_model
from .dynamics import EvolutionConfig, Trajectory, evolve
from .observables import (BeamStatistics, FockState, OpticalStateSpec, attenuation_factor,
                          beam_statistics, densities, detector_fraction, optical_moments)


class ScenarioError(RuntimeError):
    """Evolution failed; carries the scenario label and partial trajectory."""

    def __init__(self, label: str, message: str, trajectory: Trajectory | None = None):
        super().__init__(f"[{label}] {message}")
        self.label = label
        self.trajectory = trajectory


@dataclass(frozen=True)
class Scenario:
    params: PhysicalParams
    grid: Grid
    detector: DetectorSpec
    evolution: EvolutionConfig
    optical_state: OpticalStateSpec
    label: str


@dataclass(frozen=True)
class ScenarioResult:
    label: str
    trajectory: Trajectory
    times: np.ndarray                 # snapshot times
    stats: list[BeamStatistics]       # one per snapshot
    attenuation: np.ndarray           # one per snapshot
    final_atom_density: np.ndarray
    final_photon_density: np.ndarray
    condensate_density: np.ndarray
    diagnostics: dict

    @property
    def v_fock(self) -> np.ndarray:
        return np.array([s.v_fock for s in self.stats])

    @property
    def final_N_g(self) -> float:
        return self.stats[-1].N_g


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Evolve one scenario and compute beam statistics at every snapshot."""
    model = build_model(scenario.params, scenario.grid, scenario.detector)
    moments = optical_moments(scenario.optical_state)
    trajectory = evolve(model, scenario.evolution)
    if trajectory.error is not None:
        raise ScenarioError(scenario.label, trajectory.error, trajectory)
    stats, atts = [], []
    for state in trajectory.states:
        stats.append(beam_statistics(detector_fraction(state, scenario.detector), moments))
        atts.append(attenuation_factor(state))
    atom_d, photon_d = densities(trajectory.final, moments)
    return ScenarioResult(
        label=scenario.label,
        trajectory=trajectory,
        times=trajectory.times,
        stats=stats,
        attenuation=np.asarray(atts),
        final_atom_density=atom_d,
        final_photon_density=photon_d,
        condensate_density=model.phi0.density(),
        diagnostics={
            "max_flux_residual": trajectory.max_flux_residual,
            "boundary_contact": trajectory.boundary_contact,
            "t_leave": model.t_leave,
            "delta0": model.detuning.total,
            "delta": model.delta,
            "kappa": model.kappa_value,
            **trajectory.diagnostics,
        },
    )


def min_vfock_over_time(times: np.ndarray, vfock: np.ndarray,
                        exclude_before: float = 0.0) -> tuple[float, float]:
    """Minimum of the v_fock series after the transient-exclusion window.

    Ties resolve to the earliest time.  Raises on an empty series (also when
    the exclusion window swallows every sample).
    """
    times = np.asarray(times, float)
    vfock = np.asarray(vfock, float)
    if times.size == 0:
        raise ValueError("empty v_fock series")
    mask = times >= exclude_before
    if not mask.any():
        raise ValueError(f"no samples at or after t = {exclude_before!r}")
    sub_t, sub_v = times[mask], vfock[mask]
    i = int(np.argmin(sub_v))
    return float(sub_v[i]), float(sub_t[i])


SWEEP_PARAMETERS = ("delta-offset", "Omega23")


@dataclass(frozen=True)
class SweepSpec:
    base: Scenario
    parameter: str                    # "delta-offset" | "Omega23"
    values: tuple[float, ...]
    transient_exclusion: float | None = None   # default: t_leave / 2

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"swept parameter must be one of {SWEEP_PARAMETERS}")
        if len(self.values) == 0:
            raise ValueError("sweep value grid must be nonempty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")


@dataclass(frozen=True)
class SweepRecord:
    value: float
    min_vfock: float
    t_min: float
    final_N_g: float
    attenuation: float
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    records: tuple[SweepRecord, ...]
    argmin_index: int | None

    @property
    def argmin(self) -> SweepRecord | None:
        return None if self.argmin_index is None else self.records[self.argmin_index]


def scenario_with_value(base: Scenario, parameter: str, value: float) -> Scenario:
    if parameter == "delta-offset":
        params = replace(base.params, delta_offset=value, delta_absolute=None)
    else:
        params = replace(base.params, Omega23=value)
    return replace(base, params=params, label=f"{base.label}[{parameter}={value:g}]")


def _sweep_point(spec: SweepSpec, value: float) -> SweepRecord:
    try:
        scenario = scenario_with_value(spec.base, spec.parameter, value)
        result = run_scenario(scenario)
        exclude = spec.transient_exclusion
        if exclude is None:
            exclude = result.diagnostics["t_leave"] / 2
        mv, tmin = min_vfock_over_time(result.times, result.v_fock, exclude)
        return SweepRecord(value, mv, tmin, result.final_N_g, float(result.attenuation[-1]))
    except Exception as exc:  # per-point failures are recorded, the batch continues
        return SweepRecord(value, math.nan, math.nan, math.nan, math.nan,
                           error=f"{type(exc).__name__}: {exc}")


def sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    """Run every sweep point and reduce to min-over-time v_fock per value.

    Points execute concurrently when workers > 1; records are gathered in
    input order, so the result is independent of scheduling.
    """
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_point, [spec] * len(spec.values), spec.values))
    else:
        records = [_sweep_point(spec, v) for v in spec.values]
    best = None
    for i, rec in enumerate(records):
        if rec.error is None and (best is None or rec.min_vfock < records[best].min_vfock):
            best = i
    return SweepResult(spec.parameter, tuple(records), best)


# Reference experiments: the three outcoupling regimes and the two sweeps.

REFERENCE_CASES = {
    "a": dict(Omega23=2.1e12, delta_offset=0.0),
    "b": dict(Omega23=3.2e12, delta_offset=0.0),
    "c": dict(Omega23=2.0e12, delta_offset=4e3),
}


def reference_scenario(case: str, delta_offset: float | None = None,
                       optical_state: OpticalStateSpec | None = None,
                       evolution: EvolutionConfig | None = None,
                       grid: Grid | None = None,
                       detector: DetectorSpec | None = None) -> Scenario:
    """One of the three reference outcoupling regimes (labels "a", "b", "c")."""
    if case not in REFERENCE_CASES:
        raise ValueError(f"case must be one of {sorted(REFERENCE_CASES)}")
    kw = dict(REFERENCE_CASES[case])
    if delta_offset is not None:
        kw["delta_offset"] = delta_offset
    return Scenario(
        params=PhysicalParams(**kw),
        grid=grid or Grid(),
        detector=detector or DetectorSpec(),
        evolution=evolution or EvolutionConfig(),
        optical_state=optical_state if optical_state is not None else FockState(1),
        label=f"regime-{case}",
    )
