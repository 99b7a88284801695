"""INI-style run configuration.

Sections mirror the parameter dataclasses::

    [filters]
    base_radius = 8
    base_eps = 0.001

    [extraction]
    kappa_percentile = 0.85
    gate_v_center = 0.65
    gate_v_slope = 12
    t_clamp = 0, 1

    [restore]
    alpha = 0.6

    [synth]
    seed = 7

Sigmoid gates are flattened into ``gate_<name>_center`` and
``gate_<name>_slope`` keys. Unknown sections or keys are errors so that a typo
never silently falls back to a default.
"""

import configparser
import dataclasses
from pathlib import Path

from .extract import ExtractionConfig, SigmoidGate
from .filters import FilterParams
from .restore import RestoreConfig
from .scattering import SynthConfig

SECTIONS = {
    "filters": FilterParams,
    "extraction": ExtractionConfig,
    "restore": RestoreConfig,
    "synth": SynthConfig,
}
GATES = ("gate_v", "gate_s", "gate_g")


class ConfigError(ValueError):
    pass


def _coerce(cls, key, text):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kind = type(getattr(cls(), key))
    text = text.strip()
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if kind is tuple:
        return tuple(float(v) for v in text.split(","))
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if key in fields:
        return text
    raise ConfigError(f"unknown key {key!r}")


def _build(cls, values):
    kwargs = {}
    gates = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for key, text in values.items():
        try:
            if cls is ExtractionConfig and key.startswith(GATES) and key.rsplit("_", 1)[-1] in ("center", "slope"):
                gate, part = key.rsplit("_", 1)
                gates.setdefault(gate, {})[part] = float(text)
                continue
            if key not in names:
                raise ConfigError(f"unknown key {key!r}")
            kwargs[key] = _coerce(cls, key, text)
        except ValueError as exc:
            raise ConfigError(f"{cls.__name__}.{key}: {exc}") from exc
    if gates:
        defaults = cls()
        for gate, parts in gates.items():
            base = getattr(defaults, gate)
            kwargs[gate] = SigmoidGate(parts.get("center", base.center), parts.get("slope", base.slope))
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def parse_config(text="", overrides=()):
    """Parse INI text plus ``section.key=value`` overrides into config objects.

    Returns a dict keyed by section name holding one dataclass per section.
    """
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {name: dict(parser[name]) if parser.has_section(name) else {} for name in SECTIONS}
    for extra in parser.sections():
        if extra not in SECTIONS:
            raise ConfigError(f"unknown section [{extra}]")
    for item in overrides:
        key, sep, val = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or section not in SECTIONS:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        values[section][name.strip()] = val
    return {name: _build(cls, values[name]) for name, cls in SECTIONS.items()}


def load_config(path=None, overrides=()):
    text = Path(path).read_text() if path else ""
    return parse_config(text, overrides)


def _format(value):
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(configs, sections=("filters", "extraction", "restore")):
    """Render config objects back to INI text (round-trips through :func:`parse_config`)."""
    lines = []
    for name in sections:
        obj = configs[name]
        lines.append(f"[{name}]")
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if isinstance(value, SigmoidGate):
                lines.append(f"{f.name}_center = {_format(value.center)}")
                lines.append(f"{f.name}_slope = {_format(value.slope)}")
            else:
                lines.append(f"{f.name} = {_format(value)}")
        lines.append("")
    return "\n".join(lines)
