"""Experiment configuration: a flat ``key = value`` file with typed keys.

A config file holds one ``[experiment]`` section (the header may be
omitted)::

    kind = collide
    a1 = 1.0
    ratio = 3.125
    n = 8000

Lists are comma separated. Keys not given take the defaults of the
experiment kind; command-line flags override file values.
"""

import configparser
import math
from dataclasses import dataclass, field

from .errors import ConfigError

KINDS = ("converge", "evolve", "resolve", "collide", "analytics", "stability")
SECTION = "experiment"


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


# key -> parser; every key is optional and validated per kind
_PARSERS = {
    "kind": str,
    "L": float,
    "n": int,
    "n_list": _ints,
    "order": int,
    "courant": float,
    "k": float,
    "tfinal": float,
    "problem": str,
    "c": float,
    "x0": float,
    "a": float,
    "b": float,
    "a1": float,
    "ratio": float,
    "x1": float,
    "x2": float,
    "speeds": _floats,
    "courant_list": _floats,
    "projection": str,
    "snapshot_stride": int,
    "snapshot_times": _floats,
    "track_stride": int,
    "scan_spacing": float,
    "min_height": float,
    "report_time": float,
    "window": float,
    "profile_points": int,
    "profile_halfwidth": float,
}

_DEFAULTS = {
    "converge": dict(L=150.0, n_list=[600, 1200, 2400], order=4, courant=0.1, tfinal=100.0, c=1.2, x0=-100.0, projection="l2"),
    "evolve": dict(
        L=150.0, n=600, order=4, courant=0.1, tfinal=100.0, problem="solitary", c=1.2, x0=-100.0, projection="l2"
    ),
    "resolve": dict(L=300.0, n=6000, order=4, courant=0.1, tfinal=200.0, a=0.5, b=0.05),
    "collide": dict(
        L=400.0, n=8000, order=4, courant=0.1, tfinal=450.0, a1=1.0, ratio=2.5, x1=-30.0, x2=30.0,
        track_stride=5, scan_spacing=0.1, window=40.0,
    ),
    "analytics": dict(speeds=[1.1, 1.2], profile_points=401, profile_halfwidth=30.0),
    "stability": dict(L=150.0, n=600, order=4, tfinal=20.0, c=1.2, x0=-100.0, courant_list=[0.1, 0.5, 1.0, 3.0]),
}


@dataclass
class ExperimentConfig:
    """Parameters of one experiment; ``values`` maps keys to typed values."""

    kind: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in _PARSERS:
            return values.get(name)
        raise AttributeError(name)

    def resolved(self):
        """Copy with the kind's defaults filled in, validated."""
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        vals = dict(_DEFAULTS[self.kind])
        vals.update({k: v for k, v in self.values.items() if v is not None})
        cfg = ExperimentConfig(self.kind, vals)
        cfg.validate()
        return cfg

    def validate(self):
        v = self.values

        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for key, val in v.items():
            if isinstance(val, float):
                need(math.isfinite(val), f"{key} must be finite")
        if "L" in v:
            need(v["L"] > 0, "L must be positive")
        if "order" in v:
            need(3 <= v["order"] <= 6, "order must be between 3 and 6")
        if "tfinal" in v:
            need(v["tfinal"] >= 0, "tfinal must be non-negative")
        if "courant" in v:
            need(v["courant"] > 0, "courant must be positive")
        if v.get("k") is not None:
            need(v["k"] > 0, "k must be positive")
        if "n" in v:
            need(v["n"] >= 2 * v.get("order", 4), "n must be at least twice the order")
        if self.kind == "converge":
            ns = v["n_list"]
            need(len(ns) >= 1, "n_list must not be empty")
            need(all(b > a for a, b in zip(ns, ns[1:])), "n_list must be strictly increasing")
            need(min(ns) >= 2 * v["order"], "every n must be at least twice the order")
        if self.kind in ("converge", "evolve", "stability") and v.get("problem", "solitary") == "solitary":
            need(v["c"] > 1.0, "solitary-wave speed c must exceed 1")
        if self.kind == "evolve":
            need(v["problem"] in ("solitary", "gaussian"), "problem must be 'solitary' or 'gaussian'")
            if v["problem"] == "gaussian":
                need(v.get("a") is not None and v.get("b") is not None, "gaussian problem needs a and b")
        if self.kind in ("converge", "evolve"):
            need(v["projection"] in ("l2", "elliptic"), "projection must be 'l2' or 'elliptic'")
        if self.kind in ("resolve",) or (self.kind == "evolve" and v.get("problem") == "gaussian"):
            need(v["a"] > -1.0, "Gaussian amplitude a must exceed -1")
            need(v["b"] > 0.0, "Gaussian width parameter b must be positive")
        if self.kind == "collide":
            need(v["a1"] > 0, "a1 must be positive")
            need(v["ratio"] > 1.0, "ratio a1/a2 must exceed 1 (a2 < a1)")
            need(v["track_stride"] >= 1, "track_stride must be at least 1")
            need(v["window"] > 0, "window must be positive")
        if self.kind == "analytics":
            need(len(v["speeds"]) >= 1, "speeds must not be empty")
            need(all(c > 1.0 for c in v["speeds"]), "every speed must exceed 1")
        if self.kind == "stability":
            need(len(v["courant_list"]) >= 1 and all(c > 0 for c in v["courant_list"]), "courant_list must be positive")
        if v.get("snapshot_times"):
            need(all(0 <= t <= v.get("tfinal", math.inf) for t in v["snapshot_times"]), "snapshot_times outside [0, tfinal]")

    # -- serialization ------------------------------------------------------

    def to_text(self):
        lines = [f"[{SECTION}]", f"kind = {self.kind}"]
        for key in _PARSERS:
            if key == "kind" or self.values.get(key) is None:
                continue
            val = self.values[key]
            if isinstance(val, list):
                text = ", ".join(repr(x) for x in val)
            elif isinstance(val, float):
                text = repr(val)
            else:
                text = str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def as_dict(self):
        return {"kind": self.kind, **{k: self.values[k] for k in _PARSERS if k in self.values}}


def parse_config_text(text, source="<string>"):
    """Parse ``key = value`` text into an :class:`ExperimentConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = f"[{SECTION}]\n" + text
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not parser.has_section(SECTION):
        raise ConfigError(f"{source}: missing [{SECTION}] section")
    values = {}
    for key, raw in parser.items(SECTION):
        if key not in _PARSERS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](raw.strip())
        except ValueError:
            raise ConfigError(f"{source}: bad value for {key!r}: {raw!r}") from None
    kind = values.pop("kind", None)
    if kind is None:
        raise ConfigError(f"{source}: missing 'kind'")
    return ExperimentConfig(kind, values)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def config_keys():
    return list(_PARSERS)


__all__ = ["KINDS", "ExperimentConfig", "parse_config_text", "load_config", "config_keys"]
