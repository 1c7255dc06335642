import json
import math
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kams.config import (
    BaseParams,
    SweepSpec,
    emit_config,
    parse_config,
    parse_config_text,
    preset,
    provenance_header,
)
from kams.distributions import TruncatedNormalParams
from kams.errors import ParseError, ValidationError


def test_missing_grid_field_is_named():
    with pytest.raises(ValidationError) as exc:
        parse_config_text('{"buffer_values": [10, 20]}')
    assert any("rtt_values" in p for p in exc.value.problems)


def test_every_problem_is_listed():
    text = json.dumps({"buffer_values": [0, 10], "rtt_values": [0.1, -1],
                       "base": {"md_factor": 1.5, "warmup_fraction": 1.0, "bogus": 1},
                       "replications": 0})
    with pytest.raises(ValidationError) as exc:
        parse_config_text(text)
    msgs = " | ".join(exc.value.problems)
    for needle in ("buffer_values", "rtt_values", "md_factor", "warmup_fraction", "base.bogus", "replications"):
        assert needle in msgs
    assert len(exc.value.problems) >= 6


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as exc:
        parse_config_text('{\n  "buffer_values": [10,\n  "rtt_values": [0.1]\n}')
    assert exc.value.line == 3


def test_section_of_wrong_shape():
    with pytest.raises(ParseError) as exc:
        parse_config_text('{"preset": "desk",\n "base": 3}')
    assert exc.value.field == "base" and exc.value.line == 2


def test_full_scale_preset():
    s = parse_config_text('{"preset": "paper"}')
    assert s.base.n_sources == 1000
    assert s.base.service_rate_bps == 1e9 and s.base.access_rate_bps == 100e6
    assert s.buffer_values == (50, 100, 150, 200, 250, 300)
    assert s.rtt_values == (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
    assert s.grid_size == 36
    assert s.base.sim_duration == 600.0


def test_desk_preset_keeps_ratios():
    d, p = preset("desk").base, preset("paper").base
    assert d.access_rate_bps / d.service_rate_bps == p.access_rate_bps / p.service_rate_bps == 0.1
    assert d.n_sources * d.peak_rate / d.service_rate == pytest.approx(10.0)
    assert preset("desk").buffer_values == (10, 20, 30, 40, 50, 60)


def test_defaults():
    s = parse_config_text('{"buffer_values": [10], "rtt_values": [0.1]}')
    assert s.base.warmup_fraction == 0.2
    assert s.base.packet_size == 1500
    assert s.base.md_factor == 0.5


def test_preset_argument_and_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"base": {"n_sources": 7}}')
    s = parse_config(path, preset_name="paper")
    assert s.base.n_sources == 7 and s.base.service_rate_bps == 1e9


@given(st.lists(st.integers(1, 500), min_size=1, max_size=6, unique=True),
       st.lists(st.floats(0.001, 2.0, allow_nan=False), min_size=1, max_size=6, unique=True),
       st.integers(0, 2**63), st.integers(1, 5), st.booleans(),
       st.sampled_from([None, {"kind": "fit"}, {"kind": "truncated_normal", "mu": 13.0, "sigma": 4.0},
                        {"kind": "exponential", "mean": 9.5}]))
def test_canonical_round_trip(buffers, rtts, seed, reps, ack, law):
    spec = replace(preset("desk"), buffer_values=tuple(buffers), rtt_values=tuple(rtts), seed=seed,
                   replications=reps, cwnd_law=law, base=replace(BaseParams(), ack_clocked=ack))
    text = emit_config(spec)
    again = parse_config_text(text)
    assert again == spec
    assert emit_config(again) == text


def test_provenance_header_is_one_line():
    h = provenance_header(preset("desk"), command="x")
    assert "\n" not in h and h.startswith("config {")
    assert json.loads(h[len("config "):])["command"] == "x"


def test_engine_configs():
    s = preset("desk")
    p = s.packet_config(30, 0.2, seed=3)
    assert p.bottleneck_rate == pytest.approx(100e6 / 12000) and p.buffer_size == 30
    k = s.kams_config(30, 0.2, TruncatedNormalParams(13, 4), seed=4)
    assert k.peak_rate == pytest.approx(10e6 / 12000) and k.off_law == "constant"
    assert math.isclose(k.rtt, 0.2)
