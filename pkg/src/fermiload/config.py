"""Strict run-configuration parsing (ini-style key=value with sections).

Every key is validated against a schema; unknown sections or keys, malformed
numbers, and violated invariants are reported by name with nonzero exit from
the CLI.  Figure presets ship as data files in the same format and a user
config may start from one (`preset = <name>` in [run]) and override keys.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources

from .cooling import DissipationSpec
from .model import (FERMI_K, IntegrationSpec, LatticeSpec, ModelSpec,
                    ReservoirSpec, omega_from_density_a0,
                    spacing_from_density_per_site, spacing_from_recoil_ratio)
from .schedule import DriveSchedule, PiecewiseLinear


class ConfigError(ValueError):
    """Invalid configuration text; message names the key and constraint."""


_SCHEMA = {
    "run": {"preset", "label", "samples", "notes"},
    "reservoir": {"particles", "mode_count"},
    "lattice": {"sites", "omega", "density_a0", "spacing", "density_per_site",
                "recoil_ratio", "offsets"},
    "drive": {"duration", "rabi", "rabi_max", "rabi_reach", "rabi_off_start",
              "epsilon_start", "epsilon_end"},
    "dissipation": {"gamma", "offdiag", "envelope_ratio"},
    "integration": {"method", "dt_cap", "dt_scale"},
    "scan": None,  # free-form dotted parameter paths
}

_REQUIRED = {
    "reservoir": ("particles", "mode_count"),
    "lattice": ("sites",),
    "drive": ("duration", "epsilon_start", "epsilon_end"),
}


@dataclass
class RunConfig:
    """Validated run request: resolved model plus optional scan axes."""

    label: str
    model: ModelSpec
    raw: dict                      # resolved section -> key -> string
    scan: list = field(default_factory=list)   # [(dotted_key, [values])]
    notes: str = ""

    @property
    def is_scan(self) -> bool:
        return bool(self.scan)


def _read_sections(text: str) -> dict:
    if text.strip() and not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"malformed config: {err}") from err
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _validate_keys(sections: dict):
    for section, items in sections.items():
        if section not in _SCHEMA:
            known = ", ".join(sorted(_SCHEMA))
            raise ConfigError(
                f"unknown section [{section}]; known sections: {known}")
        allowed = _SCHEMA[section]
        if allowed is None:
            continue
        for key in items:
            if key not in allowed:
                raise ConfigError(
                    f"unknown key '{key}' in [{section}]; allowed: "
                    f"{', '.join(sorted(allowed))}")


def _merge(base: dict, override: dict) -> dict:
    out = {s: dict(kv) for s, kv in base.items()}
    for section, items in override.items():
        out.setdefault(section, {})
        out[section].update(items)
    return out


def _get(sections, section, key, conv, required=False, default=None):
    items = sections.get(section, {})
    if key not in items:
        if required:
            raise ConfigError(f"missing required key '{key}' in [{section}]")
        return default
    raw = items[key]
    try:
        return conv(raw)
    except (TypeError, ValueError) as err:
        raise ConfigError(
            f"invalid value for [{section}] {key} = {raw!r}: {err}") from err


def _float_list(raw: str):
    return tuple(float(v) for v in raw.replace(",", " ").split())


def preset_names() -> list:
    with resources.as_file(resources.files("fermiload") / "presets") as path:
        return sorted(p.stem for p in path.glob("*.ini"))


def load_preset_text(name: str) -> str:
    ref = resources.files("fermiload") / "presets" / f"{name}.ini"
    if not ref.is_file():
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return ref.read_text(encoding="utf-8")


def _resolve_preset(sections: dict) -> dict:
    name = sections.get("run", {}).get("preset")
    if not name:
        return sections
    base = _read_sections(load_preset_text(name))
    _validate_keys(base)
    merged = _merge(base, sections)
    merged.setdefault("run", {}).setdefault("label", name)
    return merged


def _build_lattice(sections: dict) -> LatticeSpec:
    sites = _get(sections, "lattice", "sites", int, required=True)
    omega = _get(sections, "lattice", "omega", float)
    density_a0 = _get(sections, "lattice", "density_a0", float)
    if (omega is None) == (density_a0 is None):
        raise ConfigError(
            "[lattice] needs exactly one of 'omega' or 'density_a0'")
    if omega is None:
        omega = omega_from_density_a0(density_a0)
    if omega <= 0:
        raise ConfigError("[lattice] omega must be positive")
    spacing = _get(sections, "lattice", "spacing", float)
    density_per_site = _get(sections, "lattice", "density_per_site", float)
    recoil_ratio = _get(sections, "lattice", "recoil_ratio", float)
    given = [v is not None for v in (spacing, density_per_site, recoil_ratio)]
    if sum(given) != 1:
        raise ConfigError("[lattice] needs exactly one of 'spacing', "
                          "'density_per_site' or 'recoil_ratio'")
    if density_per_site is not None:
        spacing = spacing_from_density_per_site(density_per_site)
    elif recoil_ratio is not None:
        spacing = spacing_from_recoil_ratio(omega, recoil_ratio)
    offsets = _get(sections, "lattice", "offsets", _float_list, default=())
    try:
        return LatticeSpec(sites=sites, spacing=spacing, omega=omega,
                           site_offsets=offsets)
    except ValueError as err:
        raise ConfigError(f"[lattice]: {err}") from err


def _build_drive(sections: dict) -> DriveSchedule:
    duration = _get(sections, "drive", "duration", float, required=True)
    if duration <= 0:
        raise ConfigError("[drive] duration must be positive")
    rabi_const = _get(sections, "drive", "rabi", float)
    rabi_max = _get(sections, "drive", "rabi_max", float)
    rabi_reach = _get(sections, "drive", "rabi_reach", float)
    if (rabi_const is None) == (rabi_max is None):
        raise ConfigError(
            "[drive] needs exactly one of 'rabi' or 'rabi_max'+'rabi_reach'")
    if rabi_const is not None:
        if rabi_const < 0:
            raise ConfigError("[drive] rabi must be non-negative")
        rabi = PiecewiseLinear.constant(rabi_const, duration)
    else:
        if rabi_reach is None:
            raise ConfigError("[drive] rabi_max requires rabi_reach")
        if not 0 < rabi_reach < duration:
            raise ConfigError(
                "[drive] rabi_reach must fall strictly inside the run")
        rabi = PiecewiseLinear.ramp_hold(rabi_max, rabi_reach, duration)
    off_start = _get(sections, "drive", "rabi_off_start", float)
    if off_start is not None:
        if not 0 < off_start < duration:
            raise ConfigError(
                "[drive] rabi_off_start must fall strictly inside the run")
        rabi = rabi.with_switch_off(off_start)
    eps0 = _get(sections, "drive", "epsilon_start", float, required=True)
    eps1 = _get(sections, "drive", "epsilon_end", float, required=True)
    epsilon = PiecewiseLinear.linear(eps0, eps1, duration)
    try:
        return DriveSchedule(rabi=rabi, epsilon=epsilon)
    except ValueError as err:
        raise ConfigError(f"[drive]: {err}") from err


def build_model(sections: dict) -> ModelSpec:
    for section, keys in _REQUIRED.items():
        for key in keys:
            _get(sections, section, key, str, required=True)
    particles = _get(sections, "reservoir", "particles", int, required=True)
    mode_count = _get(sections, "reservoir", "mode_count", int, required=True)
    try:
        reservoir = ReservoirSpec(particles=particles, mode_count=mode_count)
    except ValueError as err:
        raise ConfigError(f"[reservoir]: {err}") from err
    lattice = _build_lattice(sections)
    drive = _build_drive(sections)

    dissipation = None
    if "dissipation" in sections:
        gamma = _get(sections, "dissipation", "gamma", float, required=True)
        mode = _get(sections, "dissipation", "offdiag", str,
                    default="diagonal")
        ratio = _get(sections, "dissipation", "envelope_ratio", float)
        try:
            dissipation = DissipationSpec(gamma=gamma, offdiag_mode=mode,
                                          envelope_ratio=ratio)
        except ValueError as err:
            raise ConfigError(f"[dissipation]: {err}") from err

    method = _get(sections, "integration", "method", str, default="rk4")
    dt_cap = _get(sections, "integration", "dt_cap", float, default=0.25)
    dt_scale = _get(sections, "integration", "dt_scale", float, default=1.0)
    samples = _get(sections, "run", "samples", int, default=400)
    try:
        integration = IntegrationSpec(method=method, dt_cap=dt_cap,
                                      dt_scale=dt_scale, samples=samples)
        return ModelSpec(reservoir=reservoir, lattice=lattice, drive=drive,
                         dissipation=dissipation, integration=integration)
    except ValueError as err:
        raise ConfigError(str(err)) from err


def _parse_scan(sections: dict) -> list:
    axes = []
    for dotted, raw in sections.get("scan", {}).items():
        if "." not in dotted:
            raise ConfigError(
                f"scan key {dotted!r} must be 'section.key'")
        section, key = dotted.split(".", 1)
        if section not in _SCHEMA or section == "scan":
            raise ConfigError(f"scan section {section!r} unknown")
        if _SCHEMA[section] is not None and key not in _SCHEMA[section]:
            raise ConfigError(f"scan key {dotted!r} unknown")
        values = [v for v in raw.replace(",", " ").split()]
        if not values:
            raise ConfigError(f"scan axis {dotted!r} has no values")
        axes.append((dotted, values))
    return axes


def apply_scan_value(sections: dict, dotted: str, value: str) -> dict:
    section, key = dotted.split(".", 1)
    out = {s: dict(kv) for s, kv in sections.items() if s != "scan"}
    out.setdefault(section, {})[key] = value
    return out


def parse_config(text: str) -> RunConfig:
    """Parse, resolve presets, validate, and build the run request."""
    sections = _read_sections(text)
    if not sections:
        required = "; ".join(
            f"[{s}] {', '.join(keys)}" for s, keys in _REQUIRED.items())
        raise ConfigError(f"empty config; required keys: {required}")
    _validate_keys(sections)
    sections = _resolve_preset(sections)
    scan = _parse_scan(sections)
    model_sections = {s: kv for s, kv in sections.items() if s != "scan"}
    model = build_model(model_sections)
    label = sections.get("run", {}).get("label", "run")
    notes = sections.get("run", {}).get("notes", "")
    return RunConfig(label=label, model=model, raw=sections, scan=scan,
                     notes=notes)


def resolved_items(config: RunConfig) -> list:
    """Fully resolved parameters for the metadata sidecar (no hidden defaults)."""
    model = config.model
    res, lat = model.reservoir, model.lattice
    drive = model.drive
    items = [
        ("run", "label", config.label),
        ("run", "samples", str(model.integration.samples)),
        ("reservoir", "particles", str(res.particles)),
        ("reservoir", "mode_count", str(res.mode_count)),
        ("reservoir", "box_length", repr(res.box_length)),
        ("reservoir", "density", repr(res.density)),
        ("reservoir", "fermi_k", repr(FERMI_K)),
        ("lattice", "sites", str(lat.sites)),
        ("lattice", "spacing", repr(lat.spacing)),
        ("lattice", "omega", repr(lat.omega)),
        ("lattice", "oscillator_length", repr(lat.oscillator_length)),
        ("lattice", "recoil", repr(lat.recoil)),
        ("lattice", "density_per_site", repr(lat.density_per_site)),
        ("lattice", "density_a0", repr(lat.density_a0)),
        ("lattice", "offsets", ",".join(repr(v) for v in lat.site_offsets)),
        ("drive", "duration", repr(drive.duration)),
        ("drive", "rabi_knot_times", ",".join(repr(v) for v in drive.rabi.times)),
        ("drive", "rabi_knot_values",
         ",".join(repr(v) for v in drive.rabi.values)),
        ("drive", "epsilon_knot_times",
         ",".join(repr(v) for v in drive.epsilon.times)),
        ("drive", "epsilon_knot_values",
         ",".join(repr(v) for v in drive.epsilon.values)),
        ("dissipation", "gamma", repr(model.gamma)),
        ("integration", "method", model.integration.method),
        ("integration", "dt_cap", repr(model.integration.dt_cap)),
        ("integration", "dt_scale", repr(model.integration.dt_scale)),
    ]
    if config.notes:
        items.insert(1, ("run", "notes", config.notes))
    return items
