"""INI-like run configuration: parsing, validation and echo.

Format (UTF-8)::

    # full-line comments start with '#'
    [run]
    command = afc
    seed = 42

    [eye]
    pre_retinal_transmission = 0.1

    [afc]
    trials = 10000

Keys before the first section header belong to ``[run]``. Unknown sections
or keys, duplicate keys and out-of-range values are errors reported with
their line numbers. :func:`echo_config` writes the fully resolved
configuration back out; parsing an echo reproduces the same run.
"""

from dataclasses import dataclass, field, fields
import math
import os
import re
from typing import Any, Callable, Optional

from .observer import EyeParams, check_rating_criteria
from .source import (
    PUBLISHED_G2,
    PUBLISHED_HERALD_RATE,
    SourceParams,
    calibrate_source,
)

COMMANDS = ("source-stats", "hecht", "afc", "superposition", "bell", "fit", "power")
SIMULATION_COMMANDS = ("source-stats", "hecht", "afc", "superposition", "bell")
U64_MAX = 2**64 - 1

COMMAND_SECTIONS = {
    "source-stats": ("source", "source-stats"),
    "hecht": ("eye", "hecht"),
    "afc": ("source", "eye", "afc"),
    "superposition": ("source", "eye", "superposition"),
    "bell": ("eye", "bell"),
    "fit": ("fit",),
    "power": ("power",),
}


class ConfigError(ValueError):
    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


# -- value parsers -----------------------------------------------------------

def _int(text):
    if not re.fullmatch(r"[+-]?\d+", text.replace("_", "")):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(text.replace("_", ""))


def _float(text):
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _float_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of numbers")
    return [_float(t) for t in items]


def _int_list(text):
    return [_int(t.strip()) for t in text.split(",") if t.strip()]


def _str(text):
    return text


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _probability(v):
    if not 0.0 <= v <= 1.0:
        return "must be in [0,1]"


def _open_probability(v):
    if not 0.0 < v < 1.0:
        return "must be in (0,1)"


def _nonneg(v):
    if v < 0:
        return "must be >= 0"


def _positive(v):
    if v <= 0:
        return "must be > 0"


def _at_least_one(v):
    if v < 1:
        return "must be >= 1"


def _u64(v):
    if not 0 <= v <= U64_MAX:
        return "must be an unsigned 64-bit integer"


def _choice(*options):
    def check(v):
        if v not in options:
            return f"must be one of {', '.join(options)}"
    return check


def _nonempty_nonneg_list(v):
    if any(x < 0 for x in v):
        return "values must be >= 0"


def _epsilon(v):
    if abs(v) > 0.5:
        return "must satisfy |epsilon| <= 0.5"


def _ratings(v):
    try:
        check_rating_criteria(v)
    except ValueError as exc:
        return str(exc)


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = None
    check: Optional[Callable[[Any], Optional[str]]] = None
    required: bool = False
    optional: bool = False  # None allowed and echoed as empty


_EYE_DEFAULTS = EyeParams()
_SRC_DEFAULTS = SourceParams()

SCHEMA = {
    "run": {
        "command": Key(_str, None, _choice(*COMMANDS), optional=True),
        "seed": Key(_int, None, _u64, optional=True),
        "output_dir": Key(_str, "photon-sight-out"),
    },
    "source": {
        "calibrate": Key(_bool, True),
        "target_g2": Key(_float, PUBLISHED_G2, _open_probability),
        "target_herald_rate": Key(_float, PUBLISHED_HERALD_RATE, _positive),
        "rep_rate": Key(_float, _SRC_DEFAULTS.rep_rate, _positive),
        "mean_pairs_per_pulse": Key(_float, _SRC_DEFAULTS.mean_pairs_per_pulse, _nonneg),
        "herald_detection_efficiency": Key(_float, _SRC_DEFAULTS.herald_detection_efficiency, _probability),
        "signal_path_transmission": Key(_float, _SRC_DEFAULTS.signal_path_transmission, _probability),
        "background_prob_per_pulse": Key(_float, 0.0, _probability),
        "pockels_extinction": Key(_float, 0.0, _probability),
        "single_pair": Key(_bool, False),
    },
    "eye": {
        "pre_retinal_transmission": Key(_float, _EYE_DEFAULTS.pre_retinal_transmission, _probability),
        "rod_quantum_efficiency": Key(_float, _EYE_DEFAULTS.rod_quantum_efficiency, _probability),
        "dark_event_rate": Key(_float, 0.0, _nonneg),
        "integration_window": Key(_float, _EYE_DEFAULTS.integration_window, _positive),
        "threshold_n": Key(_int, 1, _at_least_one),
        "guess_bias_right": Key(_float, 0.5, _probability),
        "left_gain": Key(_float, 1.0, _nonneg),
        "right_gain": Key(_float, 1.0, _nonneg),
    },
    "source-stats": {
        "stop": Key(_str, "pulses", _choice("pulses", "heralds")),
        "count": Key(_int, 10_000_000, _at_least_one),
        "max_pulses": Key(_int, 1_000_000_000, _at_least_one),
    },
    "hecht": {
        "intensities": Key(_float_list, [50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 350.0, 400.0],
                           _nonempty_nonneg_list),
        "trials_per_intensity": Key(_int, 300, _at_least_one),
        "rating_criteria": Key(_int_list, None, _ratings, optional=True),
    },
    "afc": {
        "trials": Key(_int, 10_000, _at_least_one),
        "control_fraction": Key(_float, 0.5, _probability),
        "temporal": Key(_bool, False),
    },
    "superposition": {
        "trials": Key(_int, 10_000, _at_least_one),
        "anomaly_epsilon": Key(_float, 0.0, _epsilon),
    },
    "bell": {
        "trials": Key(_int, 100_000, _at_least_one),
        "control_prob": Key(_float, None, _probability, optional=True),
        "observer_end_to_end": Key(_float, None, _probability, optional=True),
        "detector_efficiency": Key(_float, 1.0, _probability),
        "threshold_mode": Key(_str, "paper", _choice("paper", "derived")),
        "alpha": Key(_float, 0.05, _open_probability),
    },
    "fit": {
        "input": Key(_str, None, required=True),
        "n_min": Key(_int, 1, _at_least_one),
        "n_max": Key(_int, 20, _at_least_one),
    },
    "power": {
        "p0": Key(_float, 0.5, _open_probability),
        "p1": Key(_float, 0.53, _open_probability),
        "alpha": Key(_float, 0.05, _open_probability),
        "power": Key(_float, 0.9, _open_probability),
    },
}


@dataclass
class RunConfig:
    command: str
    seed: Optional[int]
    output_dir: str
    source: Optional[SourceParams] = None
    eye: Optional[EyeParams] = None
    protocol: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict, repr=False)


def _lex(text):
    """Yield ``(lineno, section, key, raw_value)`` and collect syntax errors."""
    errors = []
    entries = []
    headers = {}
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z0-9_-]+)\s*\]", line)
        if m:
            section = m.group(1).lower()
            if section in headers:
                errors.append(f"line {lineno}: section [{section}] repeated (first at line {headers[section]})")
            headers.setdefault(section, lineno)
            continue
        if line.startswith("["):
            errors.append(f"line {lineno}: malformed section header {line!r}")
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
            errors.append(f"line {lineno}: invalid key {key!r}")
            continue
        entries.append((lineno, section, key.lower(), value))
    return entries, headers, errors


def parse_config(text, command=None, *, base_dir=None, seed=None, output_dir=None):
    """Parse and validate ``text`` into a :class:`RunConfig`.

    ``command`` (from the command line) must agree with ``[run] command`` when
    both are given. ``seed`` and ``output_dir`` replace the file's values, as
    the command-line overrides do. Raises :class:`ConfigError` listing every
    problem.
    """
    entries, headers, errors = _lex(text)
    seen = {}
    values = {name: {} for name in SCHEMA}
    for lineno, section, key, raw in entries:
        if section not in SCHEMA:
            if (section, None) not in seen:
                errors.append(f"line {headers.get(section, lineno)}: unknown section [{section}]")
                seen[(section, None)] = lineno
            continue
        spec = SCHEMA[section].get(key)
        if spec is None:
            errors.append(f"line {lineno}: unknown key {section}.{key}")
            continue
        if (section, key) in seen:
            errors.append(
                f"line {lineno}: duplicate key {section}.{key} (lines {seen[(section, key)]} and {lineno})"
            )
            continue
        seen[(section, key)] = lineno
        if raw == "" and spec.optional:
            values[section][key] = None
            continue
        try:
            value = spec.parse(raw)
        except ValueError as exc:
            errors.append(f"line {lineno}: {section}.{key}: {exc}")
            continue
        problem = spec.check(value) if spec.check else None
        if problem:
            errors.append(f"line {lineno}: {section}.{key} {problem}, got {raw}")
            continue
        values[section][key] = value

    if seed is not None:
        problem = _u64(seed)
        if problem:
            errors.append(f"--seed {problem}, got {seed}")
        else:
            values["run"]["seed"] = seed
    if output_dir is not None:
        values["run"]["output_dir"] = output_dir

    file_command = values["run"].get("command")
    if command is None:
        command = file_command
    elif command not in COMMANDS:
        errors.append(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")
    elif file_command is not None and file_command != command:
        errors.append(
            f"line {seen[('run', 'command')]}: run.command = {file_command} conflicts with "
            f"command-line command {command}"
        )
    if command is None:
        errors.append("no command given (command line or run.command)")

    # defaults and required keys
    resolved = {}
    for section, keys in SCHEMA.items():
        resolved[section] = {}
        for key, spec in keys.items():
            if key in values[section]:
                resolved[section][key] = values[section][key]
            elif spec.required and command in COMMANDS and section in COMMAND_SECTIONS[command]:
                errors.append(f"missing required key {section}.{key}")
            else:
                resolved[section][key] = spec.default
    if errors:
        raise ConfigError(errors)

    resolved["run"]["command"] = command
    if command in SIMULATION_COMMANDS and resolved["run"]["seed"] is None:
        errors.append(f"run.seed is required for the {command} command (no implicit seeding)")

    def line_of(section, key):
        where = seen.get((section, key))
        return f"line {where}: " if where else ""

    cfg = RunConfig(command=command, seed=resolved["run"]["seed"], output_dir=resolved["run"]["output_dir"])
    needed = COMMAND_SECTIONS[command]
    if "source" in needed:
        src = resolved["source"]
        if src["calibrate"]:
            for key in ("mean_pairs_per_pulse", "herald_detection_efficiency"):
                if key in values["source"]:
                    errors.append(
                        f"{line_of('source', key)}source.{key} is set by calibration; "
                        "use calibrate = false to give it directly"
                    )
        try:
            params = SourceParams(**{f.name: src[f.name] for f in fields(SourceParams)})
            if src["calibrate"] and not errors:
                params = calibrate_source(src["target_g2"], src["target_herald_rate"], params)
                src.update(mean_pairs_per_pulse=params.mean_pairs_per_pulse,
                           herald_detection_efficiency=params.herald_detection_efficiency)
            cfg.source = params
        except (ValueError, TypeError) as exc:
            errors.append(f"source: {exc}")
    if "eye" in needed:
        try:
            cfg.eye = EyeParams(**resolved["eye"])
        except (ValueError, TypeError) as exc:
            errors.append(str(exc))
    if command == "fit":
        fit = resolved["fit"]
        if fit["n_max"] < fit["n_min"]:
            errors.append(f"{line_of('fit', 'n_max')}fit.n_max must be >= fit.n_min")
        path = fit["input"]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        fit["input"] = os.path.abspath(path)
    if command == "power" and not resolved["power"]["p0"] < resolved["power"]["p1"]:
        errors.append(f"{line_of('power', 'p1')}power.p1 must be greater than power.p0")
    if errors:
        raise ConfigError(errors)
    cfg.protocol = dict(resolved[command]) if command in resolved else {}
    cfg.sections = {name: resolved[name] for name in ("run",) + needed}
    return cfg


def resolved_dict(cfg, include_output=True):
    """Resolved configuration as nested dicts (what the echo contains)."""
    out = {name: dict(values) for name, values in cfg.sections.items()}
    if "source" in out:
        out["source"]["calibrate"] = False
    if not include_output:
        out["run"].pop("output_dir", None)
    return out


def echo_config(cfg):
    """Config text that reproduces ``cfg`` exactly when parsed."""
    lines = ["# photon-sight resolved configuration"]
    for name, values in resolved_dict(cfg).items():
        lines.append("")
        lines.append(f"[{name}]")
        if name == "source":
            lines.append("# mean_pairs_per_pulse and herald_detection_efficiency are final values")
        for key, value in values.items():
            lines.append(f"{key} = {'' if value is None else _fmt(value)}")
    return "\n".join(lines) + "\n"
