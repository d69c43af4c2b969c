"""Structured-text (YAML) configuration with explicit unit suffixes.

All physical quantities carry units in the file ("10 GHz", "30 dBm",
"0.06 m"); dBm values are converted to watts exactly once, here at parse
time. Validation collects every violation before failing.
"""

from dataclasses import dataclass, field, asdict

import yaml

from .waveform import dbm_to_watts, watts_to_dbm


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.violations))


_FREQ_UNITS = {"Hz": 1.0, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}
_LENGTH_UNITS = {"m": 1.0, "cm": 1e-2, "mm": 1e-3}


def parse_quantity(text, kind):
    """'10 GHz' -> 1e10 (Hz); '0.06 m' -> 0.06; '30 dBm' -> 1.0 (watts)."""
    parts = str(text).split()
    if len(parts) != 2:
        raise ValueError(f"expected '<value> <unit>', got {text!r}")
    value = float(parts[0])
    unit = parts[1]
    if kind == "frequency":
        if unit not in _FREQ_UNITS:
            raise ValueError(f"unknown frequency unit {unit!r}")
        return value * _FREQ_UNITS[unit]
    if kind == "length":
        if unit not in _LENGTH_UNITS:
            raise ValueError(f"unknown length unit {unit!r}")
        return value * _LENGTH_UNITS[unit]
    if kind == "power":
        if unit != "dBm":
            raise ValueError(f"power must be given in dBm, got {unit!r}")
        return dbm_to_watts(value)
    raise ValueError(f"unknown quantity kind {kind!r}")


def format_quantity(value, kind):
    if kind == "frequency":
        for unit in ("GHz", "MHz", "kHz", "Hz"):
            if value >= _FREQ_UNITS[unit] or unit == "Hz":
                return f"{value / _FREQ_UNITS[unit]:.12g} {unit}"
    if kind == "length":
        return f"{value:.12g} m"
    if kind == "power":
        return f"{watts_to_dbm(value):.12g} dBm"
    raise ValueError(f"unknown quantity kind {kind!r}")


@dataclass(frozen=True)
class Config:
    # scene
    scene_kind: str = "star"  # star | rectangle | point | voxel-demo
    scene_size: float = 2.0  # diameter / width (m)
    pixel_size: float = 0.03  # (m)
    # arrays
    array_kind: str = "boundary"  # full | boundary | distributed-boundary | sar
    m_l: int = 60
    m_w: int = 4
    tau: float = 0.5
    spacing: float = 0.06  # (m)
    # subcarriers
    f_c: float = 10e9  # (Hz)
    bandwidth: float = 0.0  # (Hz)
    n_subcarriers: int = 1
    # schedule
    slots: int = 4
    schedule_kind: str = "round-robin"  # round-robin | single-view
    power: float = 1.0  # (W)
    sigma2: float = 1e-8  # (W)
    # solver
    solver: str = "rma"  # rma | sbl | ls | omp | ista | lasso
    k_atoms: int = 5
    lam: float = 2e-4
    max_iters: int = 200
    eps: float = 1e-4
    # experiment
    depths: tuple = (10.0,)  # (m)
    powers: tuple = (1.0,)  # (W)
    seeds: tuple = (0,)
    voxel_grid: tuple = (10, 10, 10)
    out_dir: str = "runs"


_SCHEMA = {
    "scene": {"kind": ("scene_kind", "str"), "size": ("scene_size", "length"),
              "pixel_size": ("pixel_size", "length")},
    "arrays": {"kind": ("array_kind", "str"), "m_l": ("m_l", "int"),
               "m_w": ("m_w", "int"), "tau": ("tau", "float"),
               "spacing": ("spacing", "length")},
    "subcarriers": {"f_c": ("f_c", "frequency"), "bandwidth": ("bandwidth", "frequency"),
                    "n": ("n_subcarriers", "int")},
    "schedule": {"slots": ("slots", "int"), "kind": ("schedule_kind", "str"),
                 "power": ("power", "power"), "sigma2": ("sigma2", "power")},
    "solver": {"name": ("solver", "str"), "k": ("k_atoms", "int"),
               "lambda": ("lam", "float"), "max_iters": ("max_iters", "int"),
               "eps": ("eps", "float")},
    "experiment": {"depths": ("depths", "length_list"), "powers": ("powers", "power_list"),
                   "seeds": ("seeds", "int_list"), "voxel_grid": ("voxel_grid", "int_list"),
                   "out_dir": ("out_dir", "str")},
}

_POSITIVE = {"scene_size", "pixel_size", "m_l", "m_w", "spacing", "f_c",
             "n_subcarriers", "slots", "power", "sigma2", "k_atoms", "lam",
             "max_iters", "eps"}
_CHOICES = {
    "scene_kind": ("star", "rectangle", "point", "voxel-demo"),
    "array_kind": ("full", "boundary", "distributed-boundary", "sar"),
    "schedule_kind": ("round-robin", "single-view"),
    "solver": ("rma", "sbl", "ls", "omp", "ista", "lasso"),
}


def _coerce(raw, kind, errors, where):
    try:
        if kind == "str":
            return str(raw)
        if kind == "int":
            if isinstance(raw, float) and raw != int(raw):
                raise ValueError("expected an integer")
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind in ("frequency", "length", "power"):
            return parse_quantity(raw, kind)
        if kind.endswith("_list"):
            base = kind[:-5]
            items = raw if isinstance(raw, (list, tuple)) else [raw]
            return tuple(_coerce(x, base, errors, where) for x in items)
    except (ValueError, TypeError) as exc:
        errors.append(f"{where}: {exc}")
        return None
    raise AssertionError(kind)


def from_mapping(doc: dict) -> Config:
    errors = []
    values = {}
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a mapping of sections"])
    for section, body in doc.items():
        if section not in _SCHEMA:
            errors.append(f"unknown section {section!r}")
            continue
        if not isinstance(body, dict):
            errors.append(f"section {section!r} must be a mapping")
            continue
        for key, raw in body.items():
            if key not in _SCHEMA[section]:
                errors.append(f"unknown key {section}.{key}")
                continue
            attr, kind = _SCHEMA[section][key]
            got = _coerce(raw, kind, errors, f"{section}.{key}")
            if got is not None:
                values[attr] = got
    cfg = Config(**values)
    for attr in _POSITIVE:
        v = getattr(cfg, attr)
        if not v > 0:
            errors.append(f"{attr} must be positive, got {v}")
    for attr, choices in _CHOICES.items():
        if getattr(cfg, attr) not in choices:
            errors.append(f"{attr} must be one of {choices}, got {getattr(cfg, attr)!r}")
    if not cfg.seeds:
        errors.append("experiment.seeds must contain at least one seed")
    if cfg.n_subcarriers > 1 and not cfg.bandwidth > 0:
        errors.append("subcarriers.bandwidth must be positive when n > 1")
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_config(path) -> Config:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"])
    except yaml.YAMLError as exc:
        raise ConfigError([f"malformed YAML in {path}: {exc}"])
    return from_mapping(doc or {})


def to_mapping(cfg: Config) -> dict:
    out = {}
    for section, keys in _SCHEMA.items():
        body = {}
        for key, (attr, kind) in keys.items():
            v = getattr(cfg, attr)
            if kind in ("frequency", "length", "power"):
                body[key] = format_quantity(v, kind)
            elif kind.endswith("_list"):
                base = kind[:-5]
                if base in ("frequency", "length", "power"):
                    body[key] = [format_quantity(x, base) for x in v]
                else:
                    body[key] = list(v)
            else:
                body[key] = v
        out[section] = body
    return out


def serialize_config(cfg: Config, path):
    with open(path, "w") as fh:
        yaml.safe_dump(to_mapping(cfg), fh, sort_keys=False)
