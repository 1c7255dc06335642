"""
Experiment configuration: the sweep grid, the scalars shared by both
engines, and their JSON representation.

Link speeds are given in bits/s and converted to packets/s with
``packet_size``; buffers are in packets and times in seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .distributions import ExponentialLaw, HalfNormalLaw, TruncatedNormalParams
from .errors import ParseError, ValidationError
from .fluid import OFF_LAWS, KamsConfig, bps_to_pps
from .packet import PacketSimConfig

PRESETS = ("paper", "desk")
RTT_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


@dataclass(frozen=True)
class AmsSpec:
    """Exponential on-off system and abscissae for ``ams curve``."""

    n_sources: int = 50
    peak_rate: float = 1.0
    service_rate: float = 30.0
    mean_on: float = 1.0
    mean_off: float = 2.0
    x_max: float = 60.0
    n_points: int = 121


@dataclass(frozen=True)
class BaseParams:
    """Scalars shared by every grid point."""

    n_sources: int = 100
    service_rate_bps: float = 100e6
    access_rate_bps: float = 10e6
    sim_duration: float = 600.0
    warmup_fraction: float = 0.2
    packet_size: int = 1500
    ai_increment: float = 1.0
    md_factor: float = 0.5
    cwnd_cap: Optional[float] = None
    ack_clocked: bool = True
    jitter: float = 0.0
    sample_phase: float = 0.0
    off_law: str = "constant"

    @property
    def service_rate(self):
        return bps_to_pps(self.service_rate_bps, self.packet_size)

    @property
    def peak_rate(self):
        return bps_to_pps(self.access_rate_bps, self.packet_size)


@dataclass(frozen=True)
class SweepSpec:
    buffer_values: tuple
    rtt_values: tuple
    base: BaseParams = field(default_factory=BaseParams)
    replications: int = 1
    scale_label: str = "desk"
    seed: int = 0
    workers: int = 1
    cwnd_law: Optional[dict] = None
    ams: AmsSpec = field(default_factory=AmsSpec)

    @property
    def grid_size(self):
        return len(self.buffer_values) * len(self.rtt_values)

    def grid(self):
        """``(i_buffer, i_rtt, buffer, rtt)`` in row-major order."""
        for ib, b in enumerate(self.buffer_values):
            for ir, r in enumerate(self.rtt_values):
                yield ib, ir, b, r

    def with_(self, **changes):
        return replace(self, **changes)

    def packet_config(self, buffer_size, rtt, seed):
        b = self.base
        return PacketSimConfig(
            n_flows=b.n_sources, bottleneck_rate=b.service_rate, access_rate=b.peak_rate,
            buffer_size=int(buffer_size), rtt=float(rtt), sim_duration=b.sim_duration,
            seed=int(seed), warmup_fraction=b.warmup_fraction, ai_increment=b.ai_increment,
            md_factor=b.md_factor, cwnd_cap=b.cwnd_cap, sample_phase=b.sample_phase,
            ack_clocked=b.ack_clocked, jitter=b.jitter, packet_size=b.packet_size)

    def kams_config(self, buffer_size, rtt, law, seed, off_law=None):
        b = self.base
        return KamsConfig(
            n_sources=b.n_sources, service_rate=b.service_rate, peak_rate=b.peak_rate,
            buffer_size=float(buffer_size), rtt=float(rtt), cwnd_law=law,
            sim_duration=b.sim_duration, off_law=off_law or b.off_law,
            warmup_fraction=b.warmup_fraction, seed=int(seed), packet_size=b.packet_size)

    def fixed_law(self):
        """The configured burst-size law, or ``None`` to fit one per point."""
        return law_from_dict(self.cwnd_law)

    def to_dict(self):
        d = asdict(self)
        d["buffer_values"] = list(self.buffer_values)
        d["rtt_values"] = list(self.rtt_values)
        return d


def preset(name):
    """Grid and scalars of a named scale.

    ``paper`` is the full-size experiment (1000 flows, 1 Gbps bottleneck,
    100 Mbps access links); ``desk`` keeps the ratios ``nu/C = 0.1`` and
    ``N nu / C = 10`` with 100 flows on a 100 Mbps bottleneck.
    """
    if name == "paper":
        return SweepSpec(buffer_values=(50, 100, 150, 200, 250, 300), rtt_values=RTT_GRID,
                         base=BaseParams(n_sources=1000, service_rate_bps=1e9, access_rate_bps=100e6),
                         scale_label="paper")
    if name == "desk":
        return SweepSpec(buffer_values=(10, 20, 30, 40, 50, 60), rtt_values=RTT_GRID,
                         base=BaseParams(), scale_label="desk")
    raise ValidationError([f"preset must be one of {PRESETS}, got {name!r}"])


# -- burst-size laws ----------------------------------------------------------

def law_from_dict(d):
    if d is None or d.get("kind") == "fit":
        return None
    kind = d.get("kind")
    if kind == "truncated_normal":
        return TruncatedNormalParams(float(d["mu"]), float(d["sigma"]))
    if kind == "exponential":
        return ExponentialLaw(float(d["mean"]))
    if kind == "half_normal":
        return HalfNormalLaw(float(d["sigma"]))
    raise ValueError(f"unknown cwnd_law kind {kind!r}")


def _law_problems(d):
    if d is None:
        return []
    if not isinstance(d, dict):
        return [f"cwnd_law must be an object, got {d!r}"]
    need = {"fit": (), "truncated_normal": ("mu", "sigma"), "exponential": ("mean",),
            "half_normal": ("sigma",)}
    kind = d.get("kind")
    if kind not in need:
        return [f"cwnd_law.kind must be one of {sorted(need)}, got {kind!r}"]
    out = [f"cwnd_law.{k} is required for kind {kind!r}" for k in need[kind] if k not in d]
    if not out:
        try:
            law_from_dict(d)
        except (ValueError, TypeError) as exc:
            out.append(f"cwnd_law: {exc}")
    return out


# -- validation ---------------------------------------------------------------

def _positive(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) and v > 0


def _is_int(v):
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def validate(spec):
    """Every violated invariant of ``spec``, as a list of messages."""
    out = []
    for name, vals, check, what in (
        ("buffer_values", spec.buffer_values, lambda v: _is_int(v) and v >= 1, "integers >= 1"),
        ("rtt_values", spec.rtt_values, _positive, "positive numbers"),
    ):
        if not isinstance(vals, (list, tuple)) or not vals:
            out.append(f"{name} must be a non-empty list")
        elif not all(check(v) for v in vals):
            out.append(f"{name} must contain {what}, got {list(vals)!r}")
        elif len(set(vals)) != len(vals):
            out.append(f"{name} contains duplicates")
    if not (_is_int(spec.replications) and spec.replications >= 1):
        out.append(f"replications must be a positive integer, got {spec.replications!r}")
    if not (_is_int(spec.workers) and spec.workers >= 1):
        out.append(f"workers must be a positive integer, got {spec.workers!r}")
    if not (_is_int(spec.seed) and 0 <= spec.seed < 2**64):
        out.append(f"seed must be an integer in [0, 2^64), got {spec.seed!r}")
    if not isinstance(spec.scale_label, str):
        out.append(f"scale_label must be a string, got {spec.scale_label!r}")

    b = spec.base
    if not (_is_int(b.n_sources) and b.n_sources >= 1):
        out.append(f"base.n_sources must be a positive integer, got {b.n_sources!r}")
    for name in ("service_rate_bps", "access_rate_bps", "sim_duration", "ai_increment"):
        if not _positive(getattr(b, name)):
            out.append(f"base.{name} must be > 0, got {getattr(b, name)!r}")
    if not (_is_int(b.packet_size) and b.packet_size >= 1):
        out.append(f"base.packet_size must be a positive integer, got {b.packet_size!r}")
    if not (isinstance(b.warmup_fraction, (int, float)) and 0 <= b.warmup_fraction < 1):
        out.append(f"base.warmup_fraction must lie in [0, 1), got {b.warmup_fraction!r}")
    if not (isinstance(b.md_factor, (int, float)) and 0 < b.md_factor < 1):
        out.append(f"base.md_factor must lie in (0, 1), got {b.md_factor!r}")
    if b.cwnd_cap is not None and not (_positive(b.cwnd_cap) and b.cwnd_cap >= 1):
        out.append(f"base.cwnd_cap must be >= 1 or null, got {b.cwnd_cap!r}")
    if not isinstance(b.ack_clocked, bool):
        out.append(f"base.ack_clocked must be true or false, got {b.ack_clocked!r}")
    if not (isinstance(b.jitter, (int, float)) and math.isfinite(b.jitter) and b.jitter >= 0):
        out.append(f"base.jitter must be >= 0, got {b.jitter!r}")
    if b.off_law not in OFF_LAWS:
        out.append(f"base.off_law must be one of {OFF_LAWS}, got {b.off_law!r}")
    if not (isinstance(b.sample_phase, (int, float)) and b.sample_phase >= 0):
        out.append(f"base.sample_phase must be >= 0, got {b.sample_phase!r}")
    elif isinstance(spec.rtt_values, (list, tuple)) and spec.rtt_values and all(
            _positive(r) for r in spec.rtt_values) and b.sample_phase >= min(spec.rtt_values):
        out.append(f"base.sample_phase must be below every rtt, got {b.sample_phase!r}")

    out += _law_problems(spec.cwnd_law)

    a = spec.ams
    if not (_is_int(a.n_sources) and a.n_sources >= 1):
        out.append(f"ams.n_sources must be a positive integer, got {a.n_sources!r}")
    for name in ("peak_rate", "service_rate", "mean_on", "mean_off", "x_max"):
        if not _positive(getattr(a, name)):
            out.append(f"ams.{name} must be > 0, got {getattr(a, name)!r}")
    if not (_is_int(a.n_points) and a.n_points >= 2):
        out.append(f"ams.n_points must be an integer >= 2, got {a.n_points!r}")
    return out


# -- JSON ---------------------------------------------------------------------

_SECTIONS = {"base": BaseParams, "ams": AmsSpec}
_TOP = {f.name for f in fields(SweepSpec)} | {"preset"}


def _locate(text, key):
    """1-based line of the first ``"key"`` in ``text``, if any."""
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def spec_from_dict(data, preset_name=None, text=""):
    """Overlay ``data`` on a preset (``data["preset"]``, else ``preset_name``)
    and validate the result.  With no preset at all, the grid fields are
    required and the remaining scalars take the desk values."""
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", line=1)
    unknown = sorted(set(data) - _TOP)
    problems = [f"unknown field {k!r}" for k in unknown]
    name = data.get("preset", preset_name)
    if name is None:
        # without a preset the grid must be spelled out
        problems += [f"missing required field {k!r}" for k in ("buffer_values", "rtt_values")
                     if k not in data]
        name = "desk"
    if name not in PRESETS:
        raise ValidationError(problems + [f"preset must be one of {PRESETS}, got {name!r}"])
    spec = preset(name)

    changes = {}
    for key, value in data.items():
        if key in unknown or key == "preset":
            continue
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ParseError(f"{key} must be an object", line=_locate(text, key), field=key)
            cls = _SECTIONS[key]
            names = {f.name for f in fields(cls)}
            bad = sorted(set(value) - names)
            problems += [f"unknown field '{key}.{k}'" for k in bad]
            sub = {k: v for k, v in value.items() if k in names}
            changes[key] = replace(getattr(spec, key), **sub)
        elif key in ("buffer_values", "rtt_values"):
            changes[key] = tuple(value) if isinstance(value, list) else value
        else:
            changes[key] = value
    spec = replace(spec, **changes)
    problems += validate(spec)
    if problems:
        raise ValidationError(problems)
    return spec


def parse_config(path, preset_name=None):
    """Read and validate a JSON sweep configuration.

    Fields not given keep the values of the preset named in the file (or
    by ``preset_name``); without a preset ``buffer_values`` and
    ``rtt_values`` are required.  ``warmup_fraction`` 0.2, ``packet_size`` 1500 and
    ``md_factor`` 0.5 are the defaults of every preset.

    Raises
    ------
    ParseError
        The file is not valid JSON or a section has the wrong shape.
    ValidationError
        Any field is missing, unknown or out of range; all problems are
        reported together.
    """
    with open(path) as fh:
        text = fh.read()
    return parse_config_text(text, preset_name)


def parse_config_text(text, preset_name=None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    return spec_from_dict(data, preset_name, text)


def emit_config(spec):
    """Canonical JSON text; ``parse_config_text(emit_config(s)) == s``."""
    return json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n"


def provenance_header(spec, **extra):
    """Single comment line with the fully resolved configuration."""
    d = spec.to_dict()
    d.update(extra)
    return "config " + json.dumps(d, sort_keys=True, separators=(",", ":"))
