import numpy as np
import pytest

from kams.errors import InvalidParameter
from kams.packet import PacketSimConfig, initial_state, run_packet_sim


def cfg(**kw):
    base = dict(n_flows=30, bottleneck_rate=2000.0, access_rate=200.0, buffer_size=20, rtt=0.1,
                sim_duration=60.0, seed=5)
    base.update(kw)
    return PacketSimConfig(**base)


@pytest.fixture(scope="module")
def result():
    return run_packet_sim(cfg(), record_flow=3, record_arrivals=True)


def test_config_problems_are_all_reported():
    with pytest.raises(InvalidParameter) as exc:
        cfg(n_flows=0, md_factor=1.0, buffer_size=2.5)
    msg = str(exc.value)
    assert "n_flows" in msg and "md_factor" in msg and "buffer_size" in msg


def test_default_cap_is_access_rate_times_rtt():
    assert cfg().effective_cwnd_cap == pytest.approx(20.0)
    assert cfg(cwnd_cap=7).effective_cwnd_cap == 7


def test_packet_conservation(result):
    assert result.sent == result.delivered + result.dropped + result.queue_at_end
    assert result.dropped > 0


def test_queue_bounded_and_sampled_once_per_rtt(result):
    tr = result.trace
    assert np.all((tr.levels >= 0) & (tr.levels <= 20))
    np.testing.assert_allclose(np.diff(tr.times), 0.1, atol=1e-9)
    assert tr.times[0] == 0.0
    assert tr.kind == "packet"


def test_burst_spacing_is_one_over_access_rate(result):
    arr = result.arrivals
    gap = 1 / 200.0
    for f in range(30):
        t = arr[arr[:, 1] == f, 0]
        d = np.diff(t)
        within = np.isclose(d, gap, rtol=0, atol=1e-9)
        # anything not back-to-back is a gap between bursts, longer than one spacing
        assert np.all(d[~within] > gap + 1e-9)
        # burst lengths recover the window histogram's support
        bursts = np.diff(np.flatnonzero(np.r_[True, ~within, True]))
        assert bursts.min() >= 1 and bursts.max() <= 20


def test_aimd_steps(result):
    w = result.flow_cwnd[:, 1]
    step = np.diff(w)
    up = np.isclose(step, 1.0) | np.isclose(w[1:], 20.0)
    down = np.isclose(w[1:], np.maximum(1.0, 0.5 * w[:-1]))
    assert np.all(up | down)
    assert down.sum() > 0 and up.sum() > 0


def test_loss_series_counts_window_drops(result):
    assert result.losses.bins.sum() == result.dropped_window
    assert result.losses.bin_width == pytest.approx(0.1)
    assert len(result.losses) == 480
    assert 0 < result.loss_rate < 1


def test_cwnd_histogram(result):
    pmf = result.cwnd_pmf
    assert min(pmf.counts) >= 1 and max(pmf.counts) <= 20
    assert pmf.total > 0


def test_replay_is_bit_identical():
    a = run_packet_sim(cfg(sim_duration=20.0))
    b = run_packet_sim(cfg(sim_duration=20.0))
    np.testing.assert_array_equal(a.trace.levels, b.trace.levels)
    np.testing.assert_array_equal(a.drop_times, b.drop_times)
    assert a.cwnd_pmf == b.cwnd_pmf


def test_unpacks_as_trace_and_losses():
    trace, losses = run_packet_sim(cfg(sim_duration=5.0))
    assert trace.kind == "packet" and losses.bins.dtype.kind == "i"


def test_initial_phases_uniform():
    phases, cwnd0 = initial_state(cfg(n_flows=5000))
    assert phases.min() >= 0 and phases.max() < 0.1
    assert abs(phases.mean() - 0.05) < 0.002
    assert cwnd0.min() >= 1


@pytest.mark.parametrize("kw", [dict(ack_clocked=False), dict(jitter=0.01), dict(sample_phase=0.05)])
def test_variants_conserve_packets(kw):
    r = run_packet_sim(cfg(sim_duration=20.0, **kw))
    assert r.sent == r.delivered + r.dropped + r.queue_at_end


def test_uncongested_link_loses_nothing():
    r = run_packet_sim(cfg(n_flows=5))
    assert r.dropped == 0
    assert set(r.cwnd_pmf.counts) == {20}
