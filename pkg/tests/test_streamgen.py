import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cgscale.errors import InputError
from cgscale.streamgen import InitMode, StreamConfig, generate_stream, scaled


def test_zero_delta_is_constant():
    s = generate_stream(StreamConfig(8, 20, 0.0, seed=1))
    assert (s.speeds == s.speeds[0]).all()


def test_all_zero_init_zero_delta():
    s = generate_stream(StreamConfig(4, 5, 0.0, init_mode=InitMode.ZERO))
    assert not s.speeds.any()


@pytest.mark.parametrize("mode,value", [("half", 0.5), ("full", 1.0), ("zero", 0.0)])
def test_fixed_init_modes(mode, value):
    s = generate_stream(StreamConfig(3, 2, 5.0, capacity=2.0, init_mode=mode))
    assert (s.speeds[0] == value * 2.0).all()


def test_reference_stream_family():
    streams = [generate_stream(StreamConfig(32, 500, d, seed=0)) for d in (0, 5, 10, 15, 20, 25)]
    assert all(s.speeds.shape == (500, 32) for s in streams)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(1, 30), st.floats(0, 100), st.floats(0.1, 1e6),
       st.sampled_from(list(InitMode)), st.integers(0, 2**32))
def test_bounds_and_step_size(p, n, delta, cap, mode, seed):
    s = generate_stream(StreamConfig(p, n, delta, cap, mode, seed))
    assert (s.speeds >= 0).all() and (s.speeds <= cap).all()
    steps = np.abs(np.diff(s.speeds, axis=0))
    assert (steps <= delta / 100 * cap * (1 + 1e-12) + 1e-12).all()


def test_same_seed_bitwise_identical():
    cfg = StreamConfig(16, 100, 25.0, seed=9)
    assert generate_stream(cfg).speeds.tobytes() == generate_stream(cfg).speeds.tobytes()
    other = generate_stream(StreamConfig(16, 100, 25.0, seed=10))
    assert not np.array_equal(generate_stream(cfg).speeds, other.speeds)


def test_draw_order_partition_major():
    cfg = StreamConfig(3, 3, 20.0, seed=42)
    rng = np.random.Generator(np.random.PCG64(42))
    first = rng.uniform(0, 1.0, size=3)
    step = rng.uniform(-20, 20, size=3)
    s = generate_stream(cfg)
    assert np.array_equal(s.speeds[0], first)
    assert np.allclose(s.speeds[1], np.clip(first + step / 100, 0, 1))


def test_clamp_count_recorded():
    s = generate_stream(StreamConfig(4, 200, 50.0, init_mode="full", seed=3))
    assert s.clamp_count > 0


@pytest.mark.parametrize("kwargs", [dict(partitions=0), dict(iterations=0), dict(delta=-1),
                                    dict(delta=101), dict(capacity=0)])
def test_invalid_config(kwargs):
    base = dict(partitions=2, iterations=2, delta=5.0)
    base.update(kwargs)
    with pytest.raises(InputError):
        StreamConfig(**base)


def test_measurement_is_one_based():
    s = generate_stream(StreamConfig(2, 3, 5.0, seed=1))
    assert s.measurement(1).iteration == 1
    assert np.array_equal(s.measurement(3).speeds, s.speeds[2])
    with pytest.raises(IndexError):
        s.measurement(0)


def test_scaled():
    s = generate_stream(StreamConfig(2, 3, 5.0, seed=1))
    t = scaled(s, 1000.0)
    assert t.capacity == 1000.0 and np.allclose(t.speeds, s.speeds * 1000)
