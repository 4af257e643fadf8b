import numpy as np
import pytest

from rarevisit.walk import (
    CapacityError,
    MAX_RECORDED_STEPS,
    WalkState,
    escape_frequency,
    first_return_times,
    hit_two_sided,
    hit_upper_batch,
    simulate_dd,
    simulate_path,
)


def test_path_is_deterministic_and_unit_step():
    a = simulate_path(1000, 3)
    b = simulate_path(1000, 3)
    assert np.array_equal(a.steps, b.steps)
    pos = a.positions()
    assert pos[0] == 0 and pos.shape == (1001,)
    assert set(np.unique(np.diff(pos))) <= {-1, 1}
    assert a.end == pos[-1]


def test_start_offset():
    p = simulate_path(10, 1, start=5).positions()
    assert p[0] == 5


def test_streaming_state_matches_recorded_path():
    path = simulate_path(500, 11, stream=2).positions()
    ws = WalkState(11, 2)
    for n in range(1, 301):
        ws.step()
        assert ws.position == path[n] and ws.time == n
    ws.advance(200)
    assert ws.position == path[500]


def test_zero_steps_and_errors():
    assert simulate_path(0, 1).positions().tolist() == [0]
    with pytest.raises(ValueError):
        simulate_path(-1, 1)
    with pytest.raises(CapacityError):
        simulate_path(MAX_RECORDED_STEPS + 1, 1)
    with pytest.raises(ValueError):
        simulate_dd(4, 10, 1)


@pytest.mark.parametrize("dim", [2, 3])
def test_dd_steps_are_unit_vectors(dim):
    pos = simulate_dd(dim, 2000, 5).positions()
    d = np.abs(np.diff(pos, axis=0)).sum(axis=1)
    assert pos.shape == (2001, dim) and np.all(d == 1)


def test_hit_two_sided_exits_at_boundary():
    out = hit_two_sided(3, 0, 10, seed=1)
    assert out.hit_point in (0, 10) and out.hit_time >= 3
    with pytest.raises(ValueError):
        hit_two_sided(0, 0, 10, seed=1)


def test_hit_upper_batch_matches_ruin():
    hits = hit_upper_batch(3, 0, 10, 20000, seed=2)
    p = hits.mean()
    assert abs(p - 0.3) <= 3 * np.sqrt(0.21 / 20000)


def test_one_dimensional_walk_returns():
    t = first_return_times(1, 10**4, 500, seed=3)
    assert np.all(t[t > 0] % 2 == 0)
    assert (t < 0).mean() < 0.05


def test_escape_frequency_three_d():
    p, se = escape_frequency(3, 20000, 800, seed=4)
    # finite horizon biases upward slightly; gamma_3 is about 0.66
    assert 0.6 < p < 0.75 and se > 0
