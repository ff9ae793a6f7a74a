import numpy as np
import pytest

from squeezebeam import (
    DetectorSpec,
    EvolutionConfig,
    FockState,
    Grid,
    PhysicalParams,
    Scenario,
    ScenarioError,
    SweepSpec,
    min_vfock_over_time,
    reference_scenario,
    run_scenario,
    scenario_with_value,
    sweep,
)
import squeezebeam.experiment as experiment


def tiny_scenario(label="tiny", omega23=2.1e12, delta_offset=800.0, dt=4e-7,
                  t_final=2e-4, n_x=256):
    return Scenario(
        params=PhysicalParams(Omega23=omega23, delta_offset=delta_offset),
        grid=Grid(n_x=n_x),
        detector=DetectorSpec(),
        evolution=EvolutionConfig(dt=dt, t_final=t_final),
        optical_state=FockState(1),
        label=label,
    )


class TestRunScenario:
    def test_zero_coupling_gives_unit_vfock(self):
        result = run_scenario(tiny_scenario(omega23=0.0))
        assert np.all(result.v_fock == 1.0)
        assert np.all(result.attenuation == pytest.approx(1.0, rel=1e-12))

    def test_stats_at_every_snapshot(self):
        result = run_scenario(tiny_scenario())
        assert len(result.stats) == len(result.times)
        assert len(result.attenuation) == len(result.times)
        assert result.final_atom_density.shape == (256,)
        assert {"max_flux_residual", "boundary_contact", "t_leave"} <= set(result.diagnostics)

    def test_error_carries_label(self):
        bad = tiny_scenario(label="explode", dt=1e-3, t_final=0.1)
        with pytest.raises(ScenarioError, match=r"\[explode\]"):
            run_scenario(bad)

    def test_reference_scenario_factory(self):
        for case in "abc":
            s = reference_scenario(case)
            assert s.label == f"regime-{case}"
        assert reference_scenario("a").params.Omega23 == 2.1e12
        assert reference_scenario("b").params.Omega23 == 3.2e12
        assert reference_scenario("c").params.delta_offset == 4e3
        with pytest.raises(ValueError):
            reference_scenario("d")


class TestMinVfock:
    def test_interior_minimum(self):
        t = np.array([0.0, 1.0, 2.0, 3.0])
        v = np.array([0.9, 1.0, 0.3, 0.5])
        assert min_vfock_over_time(t, v) == (0.3, 2.0)

    def test_monotone_series_picks_final(self):
        t = np.linspace(0, 1, 5)
        v = np.linspace(1.0, 0.2, 5)
        value, when = min_vfock_over_time(t, v)
        assert (value, when) == (0.2, 1.0)

    def test_transient_exclusion(self):
        t = np.array([0.0, 1.0, 2.0])
        v = np.array([0.01, 0.5, 0.4])
        assert min_vfock_over_time(t, v, exclude_before=0.5) == (0.4, 2.0)

    def test_tie_breaks_earliest(self):
        t = np.array([0.0, 1.0, 2.0])
        v = np.array([0.5, 0.2, 0.2])
        assert min_vfock_over_time(t, v) == (0.2, 1.0)

    def test_empty_series_errors(self):
        with pytest.raises(ValueError, match="empty"):
            min_vfock_over_time(np.array([]), np.array([]))
        with pytest.raises(ValueError, match="no samples"):
            min_vfock_over_time(np.array([0.0]), np.array([1.0]), exclude_before=1.0)


class TestSweep:
    def test_spec_validation(self):
        base = tiny_scenario()
        with pytest.raises(ValueError, match="strictly increasing"):
            SweepSpec(base, "delta-offset", (1.0, 1.0))
        with pytest.raises(ValueError, match="nonempty"):
            SweepSpec(base, "delta-offset", ())
        with pytest.raises(ValueError, match="swept parameter"):
            SweepSpec(base, "detuning", (1.0,))

    def test_single_point_matches_run_scenario(self):
        base = tiny_scenario()
        spec = SweepSpec(base, "delta-offset", (640.0,), transient_exclusion=1e-4)
        result = sweep(spec)
        record = result.records[0]
        standalone = run_scenario(scenario_with_value(base, "delta-offset", 640.0))
        mv, tmin = min_vfock_over_time(standalone.times, standalone.v_fock, 1e-4)
        assert record.min_vfock == mv
        assert record.t_min == tmin
        assert record.final_N_g == standalone.final_N_g
        assert record.attenuation == standalone.attenuation[-1]
        assert result.argmin_index == 0

    def test_worker_count_does_not_change_records(self):
        spec = SweepSpec(tiny_scenario(), "Omega23", (1.8e12, 2.1e12, 2.4e12),
                         transient_exclusion=1e-4)
        serial = sweep(spec, workers=1)
        parallel = sweep(spec, workers=3)
        assert serial == parallel

    def test_scenario_with_value_sets_parameter(self):
        base = tiny_scenario()
        s = scenario_with_value(base, "Omega23", 2.5e12)
        assert s.params.Omega23 == 2.5e12
        s = scenario_with_value(base, "delta-offset", -100.0)
        assert s.params.delta_offset == -100.0
        assert "delta-offset=-100" in s.label

    def test_point_failure_recorded_and_batch_continues(self, monkeypatch):
        calls = {}
        real = experiment.run_scenario

        def flaky(scenario):
            calls[scenario.params.delta_offset] = True
            if scenario.params.delta_offset == 100.0:
                raise RuntimeError("synthetic failure")
            return real(scenario)

        monkeypatch.setattr(experiment, "run_scenario", flaky)
        spec = SweepSpec(tiny_scenario(), "delta-offset", (0.0, 100.0, 200.0),
                         transient_exclusion=1e-4)
        result = sweep(spec)
        assert len(result.records) == 3
        failed = result.records[1]
        assert failed.error is not None and "synthetic failure" in failed.error
        assert np.isnan(failed.min_vfock)
        assert result.argmin_index in (0, 2)
        assert len(calls) == 3

    def test_argmin_tie_breaks_smallest_value(self, monkeypatch):
        from squeezebeam.experiment import SweepRecord

        def fake(spec, value):
            return SweepRecord(value, 0.25, 1.0, 0.75, 10.0)

        monkeypatch.setattr(experiment, "_sweep_point", fake)
        spec = SweepSpec(tiny_scenario(), "delta-offset", (1.0, 2.0, 3.0))
        result = experiment.sweep(spec)
        assert result.argmin.value == 1.0
