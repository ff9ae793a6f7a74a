"""Result persistence: CSV data tables and the run manifest.

Floats are written with 17 significant digits ('%.17g'), '.' as the decimal
separator and '\n' line endings, so identical inputs produce byte-identical
files.  The manifest is written even for failed runs, with an error record.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Table:
    name: str                     # file stem, e.g. "densities"
    headers: tuple[str, ...]
    columns: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.headers) != len(self.columns):
            raise ValueError("header/column count mismatch")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0


@dataclass
class ResultBundle:
    manifest: dict
    tables: list[Table] = field(default_factory=list)
    plots: dict[str, str] = field(default_factory=dict)   # name -> svg text


def _format_value(x) -> str:
    return f"{float(x):.17g}"


def write_csv(table: Table, path: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(table.headers) + "\n")
            cols = [np.asarray(c) for c in table.columns]
            for row in range(table.n_rows):
                fh.write(",".join(_format_value(c[row]) for c in cols) + "\n")
    except OSError:
        if os.path.exists(path):
            os.unlink(path)           # do not leave partial files behind
        raise


def write_manifest(manifest: dict, directory: str) -> str:
    path = os.path.join(directory, "manifest.json")
    with open(path, "w", newline="") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return path


def write_tables(bundle: ResultBundle, directory: str) -> list[str]:
    """Write every table (and plot) plus the manifest; returns written paths.

    The manifest is written even when a data file fails, with the failure
    recorded in its error field.
    """
    os.makedirs(directory, exist_ok=True)
    written = []
    manifest = dict(bundle.manifest)
    try:
        for table in bundle.tables:
            path = os.path.join(directory, f"{table.name}.csv")
            write_csv(table, path)
            written.append(path)
        for name, svg in bundle.plots.items():
            path = os.path.join(directory, f"{name}.svg")
            try:
                with open(path, "w", newline="") as fh:
                    fh.write(svg)
            except OSError:
                if os.path.exists(path):
                    os.unlink(path)
                raise
            written.append(path)
    except OSError as exc:
        manifest.setdefault("error", None)
        manifest["error"] = manifest["error"] or f"output write failed: {exc}"
        raise
    finally:
        written.append(write_manifest(manifest, directory))
    return written


def densities_table(x, atom_density, photon_density, condensate_density) -> Table:
    return Table("densities", ("x_m", "atom_density", "photon_density", "condensate_density"),
                 (np.asarray(x), np.asarray(atom_density), np.asarray(photon_density),
                  np.asarray(condensate_density)))


def timeseries_table(t, n_g, v_fock, v, attenuation, flux_residual) -> Table:
    return Table("timeseries", ("t_s", "N_g", "v_fock", "v", "attenuation", "flux_residual"),
                 tuple(np.asarray(c) for c in (t, n_g, v_fock, v, attenuation, flux_residual)))


def sweep_table(values, min_vfock, t_min, final_n_g, attenuation) -> Table:
    return Table("sweep", ("param_value", "min_vfock", "t_min_s", "final_N_g", "attenuation"),
                 tuple(np.asarray(c) for c in (values, min_vfock, t_min, final_n_g, attenuation)))
