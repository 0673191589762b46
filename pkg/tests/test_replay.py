import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentrl.replay import ReplayBuffer, StateError, Transition


def make_transition(i: float, cont_dim: int = 2, z_disc=None) -> Transition:
    return Transition(
        s=np.full(3, i), a=np.full(2, -i), s_next=np.full(3, i + 1),
        r=float(i), done=False, z_cont=np.full(cont_dim, 0.5 * i),
        z_disc=z_disc)


def test_push_then_gather_roundtrip():
    buf = ReplayBuffer(8, state_dim=3, action_dim=2, cont_dim=2)
    buf.push(make_transition(1.0, z_disc=3))
    batch = buf.gather(np.array([0]))
    np.testing.assert_array_equal(batch.s[0], [1, 1, 1])
    np.testing.assert_array_equal(batch.a[0], [-1, -1])
    np.testing.assert_array_equal(batch.s_next[0], [2, 2, 2])
    assert batch.r[0] == 1.0
    assert batch.done[0] == 0.0
    np.testing.assert_array_equal(batch.z_cont[0], [0.5, 0.5])
    assert batch.z_disc[0] == 3


def test_missing_discrete_latent_stored_as_minus_one():
    buf = ReplayBuffer(4, 3, 2, 2)
    buf.push(make_transition(0.0, z_disc=None))
    assert buf.gather(np.array([0])).z_disc[0] == -1


def test_zero_cont_dim_yields_empty_columns():
    buf = ReplayBuffer(4, 3, 2, 0)
    buf.push(make_transition(0.0, cont_dim=0, z_disc=1))
    batch = buf.gather(np.array([0]))
    assert batch.z_cont.shape == (1, 0)


def test_fifo_overwrite_on_overflow():
    buf = ReplayBuffer(3, 3, 2, 2)
    for i in range(5):
        buf.push(make_transition(float(i)))
    assert buf.size == 3
    # Oldest two (0, 1) are gone; slots now hold 3, 4, 2.
    stored = sorted(buf._r[:3].tolist())
    assert stored == [2.0, 3.0, 4.0]


def test_sample_empty_raises():
    buf = ReplayBuffer(8, 3, 2, 2)
    with pytest.raises(StateError):
        buf.sample_uniform(2, np.random.default_rng(0))


def test_sample_more_than_size_repeats_with_replacement():
    buf = ReplayBuffer(8, 3, 2, 2)
    buf.push(make_transition(7.0))
    batch = buf.sample_uniform(3, np.random.default_rng(0))
    np.testing.assert_array_equal(batch.r, [7.0, 7.0, 7.0])


def test_million_pushes_amortized_constant_time():
    import time
    buf = ReplayBuffer(1_000_000, 3, 2, 2)
    t = make_transition(1.0)
    t0 = time.monotonic()
    for _ in range(1_000_000):
        buf.push(t)
    assert time.monotonic() - t0 < 30.0
    assert buf.size == 1_000_000


def test_sample_uniform_is_seeded_and_with_replacement():
    buf = ReplayBuffer(8, 3, 2, 2)
    for i in range(8):
        buf.push(make_transition(float(i)))
    b1 = buf.sample_uniform(8, np.random.default_rng(0))
    b2 = buf.sample_uniform(8, np.random.default_rng(0))
    np.testing.assert_array_equal(b1.r, b2.r)
    # With replacement, repeated draws of 8-from-8 eventually collide.
    rng = np.random.default_rng(1)
    assert any(len(set(buf.sample_uniform(8, rng).r.tolist())) < 8
               for _ in range(20))


def test_sample_frequencies_roughly_uniform():
    buf = ReplayBuffer(8, 3, 2, 2)
    for i in range(4):
        buf.push(make_transition(float(i)))
    rng = np.random.default_rng(1)
    draws = np.concatenate(
        [buf.sample_uniform(4, rng).r for _ in range(10_000)])
    counts = np.bincount(draws.astype(int), minlength=4) / 40_000
    np.testing.assert_allclose(counts, 0.25, atol=0.02)


def test_recent_returns_newest_first_ordered_oldest_to_newest():
    buf = ReplayBuffer(4, 3, 2, 2)
    for i in range(6):  # wraps: holds 2,3,4,5
        buf.push(make_transition(float(i)))
    batch = buf.recent(3)
    np.testing.assert_array_equal(batch.r, [3.0, 4.0, 5.0])


def test_recent_caps_at_size():
    buf = ReplayBuffer(8, 3, 2, 2)
    buf.push(make_transition(7.0))
    batch = buf.recent(5)
    assert batch.r.shape == (1,)


def test_nonfinite_reward_rejected():
    buf = ReplayBuffer(4, 3, 2, 2)
    t = make_transition(0.0)
    t.r = float("inf")
    with pytest.raises(ValueError):
        buf.push(t)


def test_invalid_capacity_rejected():
    with pytest.raises(ValueError):
        ReplayBuffer(0, 3, 2, 2)


@given(st.integers(1, 30), st.integers(1, 12))
@settings(max_examples=100, deadline=None)
def test_size_never_exceeds_capacity(n_pushes, capacity):
    buf = ReplayBuffer(capacity, 2, 1, 1)
    for i in range(n_pushes):
        buf.push(Transition(np.zeros(2), np.zeros(1), np.zeros(2), float(i),
                            i % 2 == 0, np.zeros(1)))
    assert buf.size == min(n_pushes, capacity)
    batch = buf.recent(buf.size)
    expected = [float(i) for i in range(max(0, n_pushes - capacity), n_pushes)]
    np.testing.assert_array_equal(batch.r, expected)
