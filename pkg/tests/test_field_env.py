import numpy as np
import pytest

from coopmap.field_env import (
    ScalarField,
    band_lawnmowers,
    gaussian_mixture_field,
    lawnmower,
    linear_sweep,
    read_grid_csv,
    read_trajectory_csv,
    robot_rng,
    sample,
    toy_field,
    write_grid_csv,
    write_trajectory_csv,
)


def test_toy_field_hand_values():
    assert toy_field(0.0) == pytest.approx(1.5)
    x = np.pi / 4
    assert toy_field(x) == pytest.approx(1.0 + np.cos(1.5 * np.pi) + 0.5)


def test_mixture_hand_values():
    bumps = [(0.0, 0.0, 2.0, 1.0), (3.0, 0.0, 1.0, 0.5)]
    assert gaussian_mixture_field([0.0, 0.0], bumps) == pytest.approx(2.0 + np.exp(-36.0))
    assert gaussian_mixture_field([1.0, 0.0], bumps) == pytest.approx(2 * np.exp(-1) + np.exp(-16))
    with pytest.raises(ValueError):
        gaussian_mixture_field([0.0, 0.0], [(0.0, 0.0, 1.0, 0.0)])


def test_field_bounds_hold():
    xs = np.linspace(-5, 5, 2001)
    assert np.abs(ScalarField.toy()(xs)).max() <= ScalarField.toy().bound()
    f = ScalarField.mixture()
    g = np.random.default_rng(0).uniform([0, 0], [7.5, 5], size=(2000, 2))
    assert np.abs(f(g)).max() <= f.bound()


def test_grid_csv_round_trip_and_bilinear(tmp_path):
    xs, ys = np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0])
    vals = np.array([[0.0, 2.0], [1.0, 3.0], [2.0, 4.0]])  # value = x + y
    path = tmp_path / "g.csv"
    write_grid_csv(path, xs, ys, vals)
    rx, ry, rv = read_grid_csv(path)
    np.testing.assert_array_equal(rx, xs)
    np.testing.assert_array_equal(ry, ys)
    np.testing.assert_array_equal(rv, vals)
    f = ScalarField.from_csv(path)
    # a linear field is reproduced exactly by bilinear interpolation
    np.testing.assert_allclose(f([[0.5, 1.0], [1.7, 0.3]]), [1.5, 2.0])
    assert f.bound() == 4.0


def test_grid_csv_rejects_bad_input(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_grid_csv(p)
    p.write_text("x,y,value\n0,0,1\n1,0,1\n0,1,1\n")
    with pytest.raises(ValueError, match="full"):
        read_grid_csv(p)


def test_linear_sweep_endpoints():
    t = linear_sweep([3.0], [0.0], 301)
    assert len(t) == 301
    assert t.start[0] == 3.0 and t.end[0] == 0.0
    np.testing.assert_allclose(np.diff(t.positions[:, 0]), -0.01)


def test_lawnmower_single_row_is_midline():
    t = lawnmower(((0, 0), (4, 2)), 1, 5)
    np.testing.assert_allclose(t.positions, [[0, 1], [1, 1], [2, 1], [3, 1], [4, 1]])


def test_lawnmower_even_arc_length():
    t = lawnmower(((0, 0), (4, 2)), 2, 41)
    # path: 4 across, 1 up, 4 back = 9 long, so step k sits at arc length 0.225 k
    np.testing.assert_allclose(t.positions[10], [2.25, 0.5])
    np.testing.assert_allclose(t.positions[20], [4.0, 1.0])
    np.testing.assert_allclose(t.positions[30], [2.25, 1.5])
    np.testing.assert_allclose(t.positions[0], [0, 0.5])
    np.testing.assert_allclose(t.positions[-1], [0, 1.5])


def test_band_lawnmowers_stay_in_bands():
    trajs = band_lawnmowers(((0, 0), (7.5, 5)), 5, 3, 120)
    for i, t in enumerate(trajs):
        assert np.all(t.positions[:, 1] >= i) and np.all(t.positions[:, 1] <= i + 1)


def test_trajectory_csv_round_trip(tmp_path):
    t = band_lawnmowers(((0, 0), (2, 1)), 1, 2, 10)[0]
    write_trajectory_csv(tmp_path / "t.csv", t)
    back = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.positions, t.positions)


def test_robot_rng_streams():
    a = robot_rng(42, 0).standard_normal(5)
    b = robot_rng(42, 1).standard_normal(5)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, robot_rng(42, 0).standard_normal(5))
    # seed XOR id: (43, 1) collides with (42, 0) by construction
    np.testing.assert_array_equal(a, robot_rng(43, 1).standard_normal(5))
    ref = np.random.Generator(np.random.PCG64(42 ^ 3)).standard_normal(3)
    np.testing.assert_array_equal(robot_rng(42, 3).standard_normal(3), ref)


def test_sample_noise_and_metadata():
    f = ScalarField.toy()
    obs = sample(f, 1.0, 0.0, robot_rng(0, 0), robot_id=2, step_index=7)
    assert obs.value == pytest.approx(toy_field(1.0))
    assert (obs.robot_id, obs.step_index) == (2, 7)
    rng = robot_rng(0, 0)
    noisy = [sample(f, 1.0, 0.3, rng).value - toy_field(1.0) for _ in range(4000)]
    assert np.std(noisy) == pytest.approx(0.3, rel=0.05)
