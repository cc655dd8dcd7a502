"""INI experiment configuration for the command-line tool.

Every key has a default, so an empty file is a valid configuration that
reproduces the reference setup. Unknown sections or keys are rejected.
"""

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import SystemGeometry
from .units import noise_sigma


class ConfigError(ValueError):
    """Invalid experiment configuration."""


POWER_UNITS = ("dBm", "dBW", "W")
NOISE_CONVENTIONS = ("per_dimension", "total")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _placements(text):
    out = []
    for item in text.replace(",", " ").split():
        out.append("optimized" if item == "optimized" else float(item))
    return tuple(out)


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _optional_float(text):
    return None if text.strip() in ("", "auto") else float(text)


# section -> key -> (parser, default text)
SCHEMA = {
    "geometry": {
        "L": (float, "20"),
        "d": (float, "3"),
        "ue1_x": (float, "3"),
        "ue1_y": (float, "-1"),
        "ue2_x": (float, "18"),
        "ue2_y": (float, "3"),
        "f_c": (float, "28e9"),
        "kappa": (float, "0.1"),
        "n_eff": (float, "1.4"),
    },
    "noise": {
        "noise_dBm": (float, "-90"),
        "convention": (_choice(NOISE_CONVENTIONS), "per_dimension"),
    },
    "ul": {
        "powers": (_floats, "-20, -15, -10, -5, 0, 5, 10"),
        "power_unit": (_choice(POWER_UNITS), "dBm"),
        "placements": (_placements, "optimized, 10.5, 3"),
        "swap": (_bool, "false"),
    },
    "dl": {
        "powers": (_floats, "0, 5, 10, 15, 20, 25, 30"),
        "power_unit": (_choice(POWER_UNITS), "dBm"),
        "alpha": (float, "0.9"),
        "M1": (int, "4"),
        "M2": (int, "16"),
        "baseline_x": (float, "10"),
        "baseline_alpha": (float, "0.9"),
        "equal_alpha": (float, "0.5"),
        "surface_power": (float, "10"),
        "surface_nx": (int, "201"),
        "surface_nalpha": (int, "101"),
    },
    "sim": {
        "n_symbols": (int, "1000000"),
        "seed": (int, "1"),
        "chunk": (int, "65536"),
        "threads": (int, "1"),
        "scenario": (_choice(("ul", "dl")), "ul"),
        "power": (float, "0"),
        "x": (float, "10.5"),
        "alpha": (float, "0.9"),
    },
    "optimize": {
        "T": (float, "0.01"),
        "window": (int, "10"),
        "N": (int, "200"),
        "delta": (_optional_float, "auto"),
        "n_starts": (int, "5"),
        "restarts": (int, "16"),
    },
    "output": {
        "path": (str, "out.csv"),
    },
}


def to_watt(value, unit):
    if unit == "W":
        return float(value)
    offset = 30.0 if unit == "dBm" else 0.0
    return 10.0 ** ((float(value) - offset) / 10.0)


def to_dbm(value, unit):
    if unit == "dBm":
        return float(value)
    if unit == "dBW":
        return float(value) + 30.0
    return 10.0 * math.log10(float(value)) + 30.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed configuration: ``values[section][key]`` with typed entries."""

    values: dict
    source: str = "<defaults>"

    def __getitem__(self, section):
        return self.values[section]

    def geometry(self):
        g = self["geometry"]
        return SystemGeometry(
            L=g["L"], d=g["d"],
            ue=((g["ue1_x"], g["ue1_y"]), (g["ue2_x"], g["ue2_y"])),
            f_c=g["f_c"], kappa=g["kappa"], n_eff=g["n_eff"],
        )

    def ul_geometry(self):
        """Geometry as seen by the uplink, with the UEs exchanged when ``swap`` is set."""
        geom = self.geometry()
        if self["ul"]["swap"]:
            geom = replace(geom, ue=(geom.ue[1], geom.ue[0]))
        return geom

    @property
    def sigma(self):
        n = self["noise"]
        return noise_sigma(n["noise_dBm"], total=n["convention"] == "total")

    def override(self, section, key, value):
        values = {s: dict(kv) for s, kv in self.values.items()}
        values[section][key] = value
        return replace(self, values=values)

    def digest(self):
        """SHA-256 of the fully resolved configuration."""
        blob = json.dumps(self.values, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


def _validate(cfg):
    try:
        cfg.geometry()
    except ValueError as exc:
        raise ConfigError(f"[geometry] {exc}") from None
    for section in ("ul", "dl"):
        powers = cfg[section]["powers"]
        if not powers:
            raise ConfigError(f"[{section}] powers: at least one power is required")
        if cfg[section]["power_unit"] == "W" and min(powers) < 0:
            raise ConfigError(f"[{section}] powers: negative power in watts")
        if not all(np.isfinite(powers)):
            raise ConfigError(f"[{section}] powers: values must be finite")
    for x in cfg["ul"]["placements"]:
        if x != "optimized" and not 0 <= x <= cfg["geometry"]["L"]:
            raise ConfigError(f"[ul] placements: {x} lies outside [0, L]")
    dl = cfg["dl"]
    for key in ("alpha", "baseline_alpha", "equal_alpha"):
        if not 0 <= dl[key] <= 1:
            raise ConfigError(f"[dl] {key}: must lie in [0, 1], got {dl[key]}")
    for key in ("M1", "M2"):
        side = math.isqrt(max(dl[key], 0))
        if dl[key] < 4 or side * side != dl[key] or side & (side - 1):
            raise ConfigError(f"[dl] {key}: must be a square power of two >= 4, got {dl[key]}")
    if not 0 <= dl["baseline_x"] <= cfg["geometry"]["L"]:
        raise ConfigError("[dl] baseline_x: must lie in [0, L]")
    for key in ("surface_nx", "surface_nalpha"):
        if dl[key] < 2:
            raise ConfigError(f"[dl] {key}: must be >= 2")
    sim = cfg["sim"]
    for key in ("n_symbols", "chunk", "threads"):
        if sim[key] < 1:
            raise ConfigError(f"[sim] {key}: must be >= 1, got {sim[key]}")
    if not 0 <= sim["seed"] < 2**64:
        raise ConfigError("[sim] seed: must be a 64-bit unsigned integer")
    if not 0 <= sim["x"] <= cfg["geometry"]["L"]:
        raise ConfigError("[sim] x: must lie in [0, L]")
    if not 0 <= sim["alpha"] <= 1:
        raise ConfigError("[sim] alpha: must lie in [0, 1]")
    opt = cfg["optimize"]
    lam = cfg.geometry().wavelength
    if not 0 < opt["T"] < lam:
        raise ConfigError(f"[optimize] T: must lie in (0, lambda = {lam:.6g} m)")
    if 2 * opt["window"] * opt["T"] < 5 * lam:
        raise ConfigError("[optimize] window: the window must span at least 5 wavelengths")
    if opt["N"] < 1 or opt["n_starts"] < 1 or opt["restarts"] < 0:
        raise ConfigError("[optimize] N and n_starts must be >= 1, restarts >= 0")
    if opt["delta"] is not None and not 0 < opt["delta"] <= lam / 10:
        raise ConfigError(f"[optimize] delta: must lie in (0, lambda/10 = {lam / 10:.6g} m]")


def load_config(path=None, text=None):
    """Parse an INI file (or string) over the defaults and validate it.

    Raises
    ------
    ConfigError
        On unknown sections or keys, unparsable values or violated
        physical constraints; the message names the offending key.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    source = "<defaults>"
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
            source = str(path)
        elif text is not None:
            parser.read_string(text)
            source = "<string>"
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None

    values = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (parse, default) in keys.items():
            raw = parser.get(section, key, fallback=default)
            try:
                values[section][key] = parse(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"[{section}] {key}: unknown key")
    cfg = ExperimentConfig(values, source)
    _validate(cfg)
    return cfg


def default_config_text():
    """The full default configuration as INI text."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        lines += [f"{key} = {default}" for key, (_, default) in keys.items()]
        lines.append("")
    return "\n".join(lines)
