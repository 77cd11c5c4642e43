"""Run configuration: YAML parsing, validation, and canonical echo.

A run is described by one YAML document with sections ``gap``, ``thermal``,
``materials``, ``grating1``, ``grating2``, ``quadrature``, ``truncation``,
``sweep``, ``spectrum`` and ``output``.  :func:`parse_config` turns the text
into a :class:`RunConfig`; :meth:`RunConfig.echo` renders a canonical document
that reparses to an identical configuration.  The CLI embeds that echo in CSV
headers so any output file doubles as a rerunnable configuration.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass
from pathlib import Path

import yaml

from .geometry import GratingGeometry
from .materials import (
    BUILTIN_MATERIALS,
    MaterialError,
    OscillatorModel,
    get_material,
    load_table,
)
from .neqforce import ThermalState
from .results import QuadratureSpec


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


SWEEP_AXES = ("d", "t1", "t2", "tenv", "tb", "f", "D", "h")

# Accepted spellings for each sweep axis (case-sensitive: "d" is the gap,
# "D" the grating period).
_AXIS_ALIASES = {
    "d": "d",
    "t1": "t1",
    "T1": "t1",
    "T₁": "t1",
    "t2": "t2",
    "T2": "t2",
    "T₂": "t2",
    "tenv": "tenv",
    "te": "tenv",
    "Te": "tenv",
    "T_e": "tenv",
    "tb": "tb",
    "Tb": "tb",
    "T_b": "tb",
    "f": "f",
    "filling": "f",
    "D": "D",
    "period": "D",
    "h": "h",
    "depth": "h",
}


@dataclass(frozen=True)
class TruncationConfig:
    """Fourier-order policy: scan for (M, mbar) or pin them."""

    mode: str = "auto"
    M: int | None = None
    mbar: int | None = None
    accuracy: float = 1e-2

    def __post_init__(self):
        if self.mode not in ("auto", "fixed"):
            raise ConfigError(f"truncation.mode must be 'auto' or 'fixed', got {self.mode!r}")
        if self.mode == "fixed":
            if self.M is None or self.mbar is None:
                raise ConfigError("truncation.mode 'fixed' requires both M and mbar")
        if self.M is not None:
            if self.M < 0:
                raise ConfigError(f"truncation.M must be >= 0, got {self.M}")
            if self.mbar is not None and not 0 <= self.mbar <= self.M:
                raise ConfigError(f"truncation.mbar must lie in [0, M], got {self.mbar}")
        if not self.accuracy > 0:
            raise ConfigError(f"truncation.accuracy must be > 0, got {self.accuracy}")


@dataclass(frozen=True)
class SweepConfig:
    """One-parameter sweep: which knob to turn and the sample grid."""

    axis: str
    start: float
    stop: float
    points: int
    spacing: str = "linear"

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        if self.points < 1:
            raise ConfigError(f"sweep.points must be >= 1, got {self.points}")
        if self.spacing not in ("linear", "log"):
            raise ConfigError(f"sweep.spacing must be 'linear' or 'log', got {self.spacing!r}")
        if self.spacing == "log" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError("log spacing needs strictly positive start/stop")

    def values(self):
        import numpy as np

        if self.points == 1:
            return np.array([self.start])
        if self.spacing == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class SpectrumConfig:
    """Frequency grid for the spectral-density dump."""

    omega_start: float = 1.0e12
    omega_stop: float = 4.0e14
    points: int = 60
    spacing: str = "log"

    def __post_init__(self):
        if not 0 < self.omega_start < self.omega_stop:
            raise ConfigError("spectrum requires 0 < omega_start < omega_stop")
        if self.points < 2:
            raise ConfigError(f"spectrum.points must be >= 2, got {self.points}")
        if self.spacing not in ("linear", "log"):
            raise ConfigError(f"spectrum.spacing must be 'linear' or 'log', got {self.spacing!r}")

    def values(self):
        import numpy as np

        if self.spacing == "log":
            return np.geomspace(self.omega_start, self.omega_stop, self.points)
        return np.linspace(self.omega_start, self.omega_stop, self.points)


@dataclass(frozen=True)
class OutputConfig:
    """Where results go and how they are formatted."""

    path: str | None = None
    precision: int = 12
    figures: bool = True

    def __post_init__(self):
        if not 1 <= self.precision <= 17:
            raise ConfigError(f"output.precision must be in [1, 17], got {self.precision}")


@dataclass(frozen=True)
class RunConfig:
    """A fully validated run: geometry pair, temperatures, numerical policy."""

    gap: float
    thermal: ThermalState
    geometry1: GratingGeometry
    geometry2: GratingGeometry
    quadrature: QuadratureSpec
    truncation: TruncationConfig
    sweep: SweepConfig | None
    spectrum: SpectrumConfig
    output: OutputConfig
    material_specs: dict
    material_names: dict

    def echo(self):
        """Render the canonical YAML document; reparsing it reproduces self."""
        doc = {
            "gap": float(self.gap),
            "thermal": {
                "t1": float(self.thermal.t1),
                "t2": float(self.thermal.t2),
                "tenv": float(self.thermal.tenv),
            },
        }
        if self.material_specs:
            doc["materials"] = {k: dict(v) for k, v in self.material_specs.items()}
        doc["grating1"] = self._echo_geometry(self.geometry1)
        doc["grating2"] = self._echo_geometry(self.geometry2)
        doc["quadrature"] = {
            f.name: getattr(self.quadrature, f.name) for f in dataclasses.fields(QuadratureSpec)
        }
        trunc = {"mode": self.truncation.mode, "accuracy": float(self.truncation.accuracy)}
        if self.truncation.M is not None:
            trunc["M"] = int(self.truncation.M)
        if self.truncation.mbar is not None:
            trunc["mbar"] = int(self.truncation.mbar)
        doc["truncation"] = trunc
        if self.sweep is not None:
            doc["sweep"] = {
                "axis": self.sweep.axis,
                "start": float(self.sweep.start),
                "stop": float(self.sweep.stop),
                "points": int(self.sweep.points),
                "spacing": self.sweep.spacing,
            }
        doc["spectrum"] = {
            "omega_start": float(self.spectrum.omega_start),
            "omega_stop": float(self.spectrum.omega_stop),
            "points": int(self.spectrum.points),
            "spacing": self.spectrum.spacing,
        }
        out = {"precision": int(self.output.precision), "figures": bool(self.output.figures)}
        if self.output.path is not None:
            out["path"] = self.output.path
        doc["output"] = out
        buf = io.StringIO()
        yaml.safe_dump(doc, buf, sort_keys=False, default_flow_style=False)
        return buf.getvalue()

    def _echo_geometry(self, geo):
        sec = {
            "period": float(geo.period),
            "depth": float(geo.depth),
            "thickness": None if geo.thickness is None else float(geo.thickness),
            "filling": float(geo.filling),
            "ridge": self.material_names[id(geo.ridge)],
            "groove": self.material_names[id(geo.groove)],
            "backing": self.material_names[id(geo.backing)],
        }
        if not geo.semi_infinite:
            sec["beyond"] = self.material_names[id(geo.beyond)]
        if geo.shift:
            sec["shift"] = float(geo.shift)
        return sec

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)


def _require_map(value, where):
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(value).__name__}")
    return value


_MISSING = object()


def _take(section, key, where, default=_MISSING):
    if key in section:
        return section.pop(key)
    if default is _MISSING:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return default


def _reject_extras(section, where):
    if section:
        raise ConfigError(f"{where}: unknown keys {sorted(section)}")


def _as_float(value, where, minimum=None, positive=False):
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(x):
        raise ConfigError(f"{where}: must be finite, got {x}")
    if positive and x <= 0:
        raise ConfigError(f"{where}: must be > 0, got {x}")
    if minimum is not None and x < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {x}")
    return x


def _as_int(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _build_material(name, spec, base_dir):
    spec = dict(_require_map(spec, f"materials.{name}"))
    kind = _take(spec, "type", f"materials.{name}")
    if kind == "vacuum":
        _reject_extras(spec, f"materials.{name}")
        return get_material("vacuum")
    if kind == "oscillator":
        eps_inf = _as_float(_take(spec, "eps_inf", f"materials.{name}", 1.0), f"materials.{name}.eps_inf")
        raw = _take(spec, "oscillators", f"materials.{name}", [])
        if not isinstance(raw, list):
            raise ConfigError(f"materials.{name}.oscillators must be a list of [strength, omega0, gamma]")
        oscillators = []
        for i, row in enumerate(raw):
            if not isinstance(row, (list, tuple)) or len(row) != 3:
                raise ConfigError(
                    f"materials.{name}.oscillators[{i}] must be [strength, omega0, gamma]"
                )
            oscillators.append(tuple(_as_float(v, f"materials.{name}.oscillators[{i}]") for v in row))
        _reject_extras(spec, f"materials.{name}")
        try:
            return OscillatorModel(name=name, eps_inf=eps_inf, oscillators=tuple(oscillators))
        except MaterialError as exc:
            raise ConfigError(f"materials.{name}: {exc}") from exc
    if kind == "table":
        rel = _take(spec, "path", f"materials.{name}")
        unit = _take(spec, "unit", f"materials.{name}", "rad/s")
        extend = bool(_take(spec, "extend", f"materials.{name}", False))
        _reject_extras(spec, f"materials.{name}")
        path = Path(rel)
        if not path.is_absolute():
            path = Path(base_dir) / path
        try:
            return load_table(path, name=name, unit=unit, extend=extend)
        except (OSError, MaterialError) as exc:
            raise ConfigError(f"materials.{name}: {exc}") from exc
    raise ConfigError(f"materials.{name}.type must be 'vacuum', 'oscillator' or 'table', got {kind!r}")


def _build_geometry(section, where, materials, names):
    section = dict(_require_map(section, where))

    def material(key, default=None):
        if key not in section and default is not None:
            return default
        label = _take(section, key, where)
        if not isinstance(label, str):
            raise ConfigError(f"{where}.{key} must be a material name, got {label!r}")
        if label in materials:
            return materials[label]
        if label in BUILTIN_MATERIALS:
            m = get_material(label)
            names.setdefault(id(m), label)
            return m
        raise ConfigError(f"{where}.{key}: unknown material {label!r}")

    period = _as_float(_take(section, "period", where), f"{where}.period", positive=True)
    depth = _as_float(_take(section, "depth", where), f"{where}.depth", minimum=0.0)
    raw_thick = _take(section, "thickness", where)
    thickness = None if raw_thick is None else _as_float(raw_thick, f"{where}.thickness", minimum=0.0)
    filling = _as_float(_take(section, "filling", where), f"{where}.filling")
    vacuum = get_material("vacuum")
    names.setdefault(id(vacuum), "vacuum")
    ridge = material("ridge")
    groove = material("groove", vacuum)
    backing = material("backing", ridge)
    beyond = material("beyond", backing if thickness is None else vacuum)
    shift = _as_float(_take(section, "shift", where, 0.0), f"{where}.shift")
    _reject_extras(section, where)
    try:
        geo = GratingGeometry(
            period=period,
            depth=depth,
            thickness=thickness,
            filling=filling,
            ridge=ridge,
            shift=shift,
            groove=groove,
            backing=backing,
            beyond=beyond,
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc
    for m, key in ((geo.ridge, "ridge"), (geo.groove, "groove"), (geo.backing, "backing"), (geo.beyond, "beyond")):
        if id(m) not in names:
            raise ConfigError(f"{where}.{key}: material has no name for echoing")
    return geo


def parse_config(text, base_dir="."):
    """Parse a YAML run description into a validated RunConfig.

    ``base_dir`` anchors relative table paths (use the directory of the file
    the text came from).
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"not valid YAML: {exc}") from exc
    doc = dict(_require_map(doc, "config"))

    gap = _as_float(_take(doc, "gap", "config"), "gap", positive=True)

    thermal_sec = dict(_require_map(_take(doc, "thermal", "config"), "thermal"))
    try:
        thermal = ThermalState(
            t1=_as_float(_take(thermal_sec, "t1", "thermal"), "thermal.t1", minimum=0.0),
            t2=_as_float(_take(thermal_sec, "t2", "thermal"), "thermal.t2", minimum=0.0),
            tenv=_as_float(_take(thermal_sec, "tenv", "thermal"), "thermal.tenv", minimum=0.0),
        )
    except ValueError as exc:
        raise ConfigError(f"thermal: {exc}") from exc
    _reject_extras(thermal_sec, "thermal")

    mat_sec = _require_map(doc.pop("materials", None), "materials")
    material_specs = {}
    materials = {}
    names = {}
    for name, spec in mat_sec.items():
        if not isinstance(name, str) or not name:
            raise ConfigError(f"materials: names must be non-empty strings, got {name!r}")
        if name in BUILTIN_MATERIALS:
            raise ConfigError(f"materials.{name}: shadows a built-in material name")
        m = _build_material(name, spec, base_dir)
        materials[name] = m
        names[id(m)] = name
        material_specs[name] = dict(_require_map(spec, f"materials.{name}"))

    geometry1 = _build_geometry(_take(doc, "grating1", "config"), "grating1", materials, names)
    geometry2 = _build_geometry(_take(doc, "grating2", "config"), "grating2", materials, names)

    quad_sec = dict(_require_map(doc.pop("quadrature", None), "quadrature"))
    quad_kwargs = {}
    valid = {f.name: f.type for f in dataclasses.fields(QuadratureSpec)}
    for key, value in quad_sec.items():
        if key not in valid:
            raise ConfigError(f"quadrature: unknown key {key!r}")
        if key in ("omega_panels", "max_refine", "kx_panels", "kx_nodes", "ky_nodes",
                   "matsubara_max_terms", "origin_levels", "workers"):
            quad_kwargs[key] = _as_int(value, f"quadrature.{key}", minimum=1)
        else:
            quad_kwargs[key] = _as_float(value, f"quadrature.{key}", positive=True)
    try:
        quadrature = QuadratureSpec(**quad_kwargs)
    except ValueError as exc:
        raise ConfigError(f"quadrature: {exc}") from exc

    trunc_sec = dict(_require_map(doc.pop("truncation", None), "truncation"))
    trunc_kwargs = {"mode": _take(trunc_sec, "mode", "truncation", "auto")}
    if "M" in trunc_sec:
        trunc_kwargs["M"] = _as_int(trunc_sec.pop("M"), "truncation.M", minimum=0)
    if "mbar" in trunc_sec:
        trunc_kwargs["mbar"] = _as_int(trunc_sec.pop("mbar"), "truncation.mbar", minimum=0)
    if "accuracy" in trunc_sec:
        trunc_kwargs["accuracy"] = _as_float(trunc_sec.pop("accuracy"), "truncation.accuracy", positive=True)
    _reject_extras(trunc_sec, "truncation")
    truncation = TruncationConfig(**trunc_kwargs)

    sweep = None
    if "sweep" in doc:
        sweep_sec = dict(_require_map(doc.pop("sweep"), "sweep"))
        raw_axis = _take(sweep_sec, "axis", "sweep")
        axis = _AXIS_ALIASES.get(str(raw_axis))
        if axis is None:
            raise ConfigError(f"sweep.axis: unknown axis {raw_axis!r} (use one of {SWEEP_AXES})")
        sweep = SweepConfig(
            axis=axis,
            start=_as_float(_take(sweep_sec, "start", "sweep"), "sweep.start"),
            stop=_as_float(_take(sweep_sec, "stop", "sweep"), "sweep.stop"),
            points=_as_int(_take(sweep_sec, "points", "sweep"), "sweep.points", minimum=1),
            spacing=_take(sweep_sec, "spacing", "sweep", "linear"),
        )
        _reject_extras(sweep_sec, "sweep")

    spec_sec = dict(_require_map(doc.pop("spectrum", None), "spectrum"))
    spec_kwargs = {}
    if "omega_start" in spec_sec:
        spec_kwargs["omega_start"] = _as_float(spec_sec.pop("omega_start"), "spectrum.omega_start", positive=True)
    if "omega_stop" in spec_sec:
        spec_kwargs["omega_stop"] = _as_float(spec_sec.pop("omega_stop"), "spectrum.omega_stop", positive=True)
    if "points" in spec_sec:
        spec_kwargs["points"] = _as_int(spec_sec.pop("points"), "spectrum.points", minimum=2)
    if "spacing" in spec_sec:
        spec_kwargs["spacing"] = spec_sec.pop("spacing")
    _reject_extras(spec_sec, "spectrum")
    spectrum = SpectrumConfig(**spec_kwargs)

    out_sec = dict(_require_map(doc.pop("output", None), "output"))
    out_kwargs = {}
    if "path" in out_sec:
        p = out_sec.pop("path")
        if p is not None and not isinstance(p, str):
            raise ConfigError(f"output.path must be a string, got {p!r}")
        out_kwargs["path"] = p
    if "precision" in out_sec:
        out_kwargs["precision"] = _as_int(out_sec.pop("precision"), "output.precision", minimum=1)
    if "figures" in out_sec:
        fig = out_sec.pop("figures")
        if not isinstance(fig, bool):
            raise ConfigError(f"output.figures must be true/false, got {fig!r}")
        out_kwargs["figures"] = fig
    _reject_extras(out_sec, "output")
    output = OutputConfig(**out_kwargs)

    _reject_extras(doc, "config")

    if geometry1.period != geometry2.period:
        raise ConfigError(
            f"grating periods must match, got {geometry1.period} and {geometry2.period}"
        )
    if geometry1.semi_infinite:
        raise ConfigError("grating1 must have finite thickness (it is the mirrored body)")

    return RunConfig(
        gap=gap,
        thermal=thermal,
        geometry1=geometry1,
        geometry2=geometry2,
        quadrature=quadrature,
        truncation=truncation,
        sweep=sweep,
        spectrum=spectrum,
        output=output,
        material_specs=material_specs,
        material_names=names,
    )


def load_config(path):
    """Read and parse a YAML run file; relative table paths resolve beside it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)
