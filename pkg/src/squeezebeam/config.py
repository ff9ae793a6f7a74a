"""JSON configuration: parsing, validation, defaults, serialization.

All quantities are plain numbers in SI units (angular frequencies in rad/s);
there are no unit strings.  Unknown keys are rejected with a suggestion,
invariant violations are collected and reported together, and
parse_config(serialize(doc)) is the identity on valid documents.
"""

from __future__ import annotations

import difflib
import re
import json
from dataclasses import asdict, dataclass, field, fields

from .model import DetectorSpec, Grid, PhysicalParams
from .dynamics import EvolutionConfig
from .experiment import (Scenario, SweepSpec, SWEEP_PARAMETERS)
from .observables import (CoherentState, DirectMoments, FockState, OpticalStateSpec,
                          SqueezedCoherentState)

SCHEMA_MAJOR = 1


class ConfigError(ValueError):
    """Invalid configuration; .problems lists every offending field."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.problems))


_PHYSICAL_KEYS = {
    "m": "m", "omega_t": "omega_t", "g13": "g13", "N": "N", "Delta": "Delta",
    "Omega23": "Omega23", "delta_offset": "delta_offset",
    "delta_absolute": "delta_absolute", "lambda": "wavelength",
    "lambda_pump": "wavelength_pump", "geometry": "geometry", "kappa": "kappa",
    "c": "c", "rabi_balance_mode": "rabi_balance_mode",
}
_GRID_KEYS = {"x_min", "x_max", "n_x"}
_DETECTOR_KEYS = {"x1", "x2", "probe_window"}
_EVOLUTION_KEYS = {"dt", "t_final", "gauge_constant", "snapshot_stride", "derivative_scheme"}
_OPTICAL_KEYS = {"variant", "n", "alpha_re", "alpha_im", "r", "theta", "n_bar", "bdag2b2"}
_EXPERIMENT_KEYS = {"mode", "sweep", "transient_exclusion", "label"}
_SWEEP_KEYS = {"values", "start", "stop", "count"}
_OUTPUT_KEYS = {"directory", "formats"}
_TOP_KEYS = {"schema_version", "physical", "grid", "detector", "evolution",
             "optical_state", "experiment", "output"}

EXPERIMENT_MODES = ("run", "sweep-delta", "sweep-rabi")


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    sweep_values: tuple[float, ...] = ()
    transient_exclusion: float | None = None
    label: str = "run"


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class ConfigDocument:
    schema_version: int
    physical: PhysicalParams
    grid: Grid
    detector: DetectorSpec
    evolution: EvolutionConfig
    optical_state: OpticalStateSpec
    experiment: ExperimentSpec
    output: OutputSpec = field(default_factory=OutputSpec)


def _suggest(key: str, known) -> str:
    candidates = sorted(known)
    close = difflib.get_close_matches(key, candidates, n=1, cutoff=0.5)
    if not close:
        low = key.lower()
        prefix = [k for k in candidates if low.startswith(k.lower()) or k.lower().startswith(low)]
        close = prefix[:1]
    return f" (did you mean {close[0]!r}?)" if close else ""


def _check_keys(section: str, obj: dict, known, problems: list[str]):
    for key in obj:
        if key not in known:
            problems.append(f"unknown key {section}.{key}{_suggest(key, known)}")


def _number(section, key, obj, problems, default=None, allow_none=False):
    if key not in obj or obj[key] is None:
        if key in obj and allow_none:
            return None
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{section}.{key} must be a number, got {v!r}")
        return default
    return float(v)


def _build_optical(obj: dict, problems: list[str]) -> OpticalStateSpec:
    _check_keys("optical_state", obj, _OPTICAL_KEYS, problems)
    variant = obj.get("variant", "fock")
    try:
        if variant == "fock":
            return FockState(obj.get("n", 1))   # FockState rejects non-integers
        if variant == "coherent":
            return CoherentState(complex(obj.get("alpha_re", 1.0), obj.get("alpha_im", 0.0)))
        if variant == "squeezed_coherent":
            return SqueezedCoherentState(
                alpha=complex(obj.get("alpha_re", 0.0), obj.get("alpha_im", 0.0)),
                r=float(obj.get("r", 0.0)), theta=float(obj.get("theta", 0.0)))
        if variant == "direct":
            return DirectMoments(float(obj.get("n_bar", 1.0)), float(obj.get("bdag2b2", 0.0)))
        problems.append(f"optical_state.variant must be one of fock/coherent/"
                        f"squeezed_coherent/direct, got {variant!r}")
    except (ValueError, TypeError) as exc:
        problems.append(f"optical_state: {exc}")
    return FockState(1)


def _build_section(cls, section: str, obj: dict, keymap: dict, problems: list[str]):
    kwargs = {}
    for json_key, attr in keymap.items():
        if json_key in obj and obj[json_key] is not None:
            kwargs[attr] = obj[json_key]
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        bad = str(exc)
        lead = bad.split()[0] if bad else ""
        named = [k for k, a in keymap.items() if a == lead]
        if not named:
            named = [k for k, a in keymap.items()
                     if re.search(rf"\b{re.escape(a)}\b", bad)]
        where = f"{section}.{named[0]}" if named else section
        problems.append(f"{where}: {exc}")
        return cls()


def parse_config(text: str) -> ConfigDocument:
    """Parse and fully validate a JSON configuration, applying defaults.

    Raises ConfigError listing every offending field; JSON syntax errors are
    reported with line and column.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])

    problems: list[str] = []
    _check_keys("<top>", raw, _TOP_KEYS, problems)

    version = raw.get("schema_version", SCHEMA_MAJOR)
    if version != SCHEMA_MAJOR:
        problems.append(f"schema_version {version!r} does not match tool major {SCHEMA_MAJOR}")

    for section in ("physical", "grid", "detector", "evolution", "optical_state",
                    "experiment", "output"):
        if section in raw and not isinstance(raw[section], dict):
            problems.append(f"{section} must be an object")
            raw[section] = {}

    phys_raw = dict(raw.get("physical", {}))
    _check_keys("physical", phys_raw, _PHYSICAL_KEYS, problems)
    physical = _build_section(PhysicalParams, "physical", phys_raw, _PHYSICAL_KEYS, problems)

    grid_raw = dict(raw.get("grid", {}))
    _check_keys("grid", grid_raw, _GRID_KEYS, problems)
    grid = _build_section(Grid, "grid", grid_raw, {k: k for k in _GRID_KEYS}, problems)

    det_raw = dict(raw.get("detector", {}))
    _check_keys("detector", det_raw, _DETECTOR_KEYS, problems)
    detector = _build_section(DetectorSpec, "detector", det_raw,
                              {k: k for k in _DETECTOR_KEYS}, problems)

    evo_raw = dict(raw.get("evolution", {}))
    _check_keys("evolution", evo_raw, _EVOLUTION_KEYS, problems)
    evolution = _build_section(EvolutionConfig, "evolution", evo_raw,
                               {k: k for k in _EVOLUTION_KEYS}, problems)

    optical = _build_optical(dict(raw.get("optical_state", {})), problems)

    if "experiment" not in raw:
        problems.append("experiment block is required (at least {\"mode\": ...})")
        experiment = ExperimentSpec(mode="run")
    else:
        exp_raw = dict(raw["experiment"])
        _check_keys("experiment", exp_raw, _EXPERIMENT_KEYS, problems)
        mode = exp_raw.get("mode")
        if mode not in EXPERIMENT_MODES:
            problems.append(f"experiment.mode must be one of {EXPERIMENT_MODES}, got {mode!r}")
            mode = "run"
        values: tuple[float, ...] = ()
        if mode != "run":
            sweep_raw = exp_raw.get("sweep")
            if not isinstance(sweep_raw, dict):
                problems.append("experiment.sweep object is required for sweep modes")
            else:
                _check_keys("experiment.sweep", sweep_raw, _SWEEP_KEYS, problems)
                if "values" in sweep_raw:
                    try:
                        values = tuple(float(v) for v in sweep_raw["values"])
                    except (TypeError, ValueError):
                        problems.append("experiment.sweep.values must be a list of numbers")
                else:
                    start = _number("experiment.sweep", "start", sweep_raw, problems)
                    stop = _number("experiment.sweep", "stop", sweep_raw, problems)
                    count = sweep_raw.get("count")
                    if start is None or stop is None or not isinstance(count, int) or count < 1:
                        problems.append("experiment.sweep needs values, or start/stop/count")
                    elif count == 1:
                        values = (start,)
                    else:
                        step = (stop - start) / (count - 1)
                        values = tuple(start + i * step for i in range(count))
                if values and any(b <= a for a, b in zip(values, values[1:])):
                    problems.append("experiment.sweep values must be strictly increasing")
        excl = _number("experiment", "transient_exclusion", exp_raw, problems, allow_none=True)
        experiment = ExperimentSpec(mode=mode, sweep_values=values,
                                    transient_exclusion=excl,
                                    label=str(exp_raw.get("label", mode)))

    out_raw = dict(raw.get("output", {}))
    _check_keys("output", out_raw, _OUTPUT_KEYS, problems)
    formats = out_raw.get("formats", ["csv"])
    if (not isinstance(formats, list) or
            any(f not in ("csv", "svg") for f in formats)):
        problems.append("output.formats must be a list drawn from ['csv', 'svg']")
        formats = ["csv"]
    output = OutputSpec(directory=str(out_raw.get("directory", "out")),
                        formats=tuple(formats))

    if problems:
        raise ConfigError(problems)
    return ConfigDocument(schema_version=SCHEMA_MAJOR, physical=physical, grid=grid,
                          detector=detector, evolution=evolution, optical_state=optical,
                          experiment=experiment, output=output)


def parse_optical_state(text: str) -> OpticalStateSpec:
    """Parse a standalone optical-state JSON object (the `moments` CLI input)."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["optical state spec must be a JSON object"])
    problems: list[str] = []
    spec = _build_optical(raw, problems)
    if problems:
        raise ConfigError(problems)
    return spec


def _optical_to_json(spec: OpticalStateSpec) -> dict:
    if isinstance(spec, FockState):
        return {"variant": "fock", "n": spec.n}
    if isinstance(spec, CoherentState):
        return {"variant": "coherent", "alpha_re": spec.alpha.real, "alpha_im": spec.alpha.imag}
    if isinstance(spec, SqueezedCoherentState):
        return {"variant": "squeezed_coherent", "alpha_re": spec.alpha.real,
                "alpha_im": spec.alpha.imag, "r": spec.r, "theta": spec.theta}
    return {"variant": "direct", "n_bar": spec.n_bar, "bdag2b2": spec.bdag2b2}


def serialize(doc: ConfigDocument) -> str:
    """Canonical JSON for a document; parse_config(serialize(doc)) == doc."""
    phys = {}
    attr_to_key = {attr: key for key, attr in _PHYSICAL_KEYS.items()}
    for f in fields(doc.physical):
        phys[attr_to_key[f.name]] = getattr(doc.physical, f.name)
    body = {
        "schema_version": doc.schema_version,
        "physical": phys,
        "grid": asdict(doc.grid),
        "detector": asdict(doc.detector),
        "evolution": asdict(doc.evolution),
        "optical_state": _optical_to_json(doc.optical_state),
        "experiment": {
            "mode": doc.experiment.mode,
            "sweep": {"values": list(doc.experiment.sweep_values)},
            "transient_exclusion": doc.experiment.transient_exclusion,
            "label": doc.experiment.label,
        },
        "output": {"directory": doc.output.directory, "formats": list(doc.output.formats)},
    }
    if doc.experiment.mode == "run":
        body["experiment"].pop("sweep")
    return json.dumps(body, indent=2)


def to_scenario(doc: ConfigDocument) -> Scenario:
    return Scenario(params=doc.physical, grid=doc.grid, detector=doc.detector,
                    evolution=doc.evolution, optical_state=doc.optical_state,
                    label=doc.experiment.label)


def to_sweep_spec(doc: ConfigDocument) -> SweepSpec:
    if doc.experiment.mode == "run":
        raise ConfigError(["experiment.mode is 'run'; no sweep is defined"])
    parameter = "delta-offset" if doc.experiment.mode == "sweep-delta" else "Omega23"
    assert parameter in SWEEP_PARAMETERS
    return SweepSpec(base=to_scenario(doc), parameter=parameter,
                     values=doc.experiment.sweep_values,
                     transient_exclusion=doc.experiment.transient_exclusion)
