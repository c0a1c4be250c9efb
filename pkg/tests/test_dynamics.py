import numpy as np
import pytest
from numpy.testing import assert_allclose

import aoc
from aoc.dynamics import (State, Trajectory, energy_drift, simulate,
                          write_trajectory_csv, zero_control, zoh_control,
                          zoh_rollout)
from aoc.groups import orthogonality_defect


def test_ep_rhs_abelian(abelian3):
    ydot, xdir = aoc.euler_poincare_rhs(abelian3, [0.1, 0.2, 0.3], [1.0, -1.0])
    assert_allclose(ydot, [1.0, -1.0, 0.0])
    assert_allclose(xdir, [0.1, 0.2, 0.3])


def test_ep_rhs_principal_axis_equilibrium(so3_j123):
    ydot, _ = aoc.euler_poincare_rhs(so3_j123, [1.0, 0.0, 0.0], np.zeros(3))
    assert_allclose(ydot, 0.0, atol=1e-15)


def test_ep_rhs_bias_value(so3_j123):
    ydot, _ = aoc.euler_poincare_rhs(so3_j123, [1.0, 1.0, 0.0], np.zeros(3))
    assert_allclose(ydot, [0.0, 0.0, -1.0 / 3.0])


def test_simulate_abelian_straight_line(abelian3):
    gm = aoc.abelian_group(abelian3)
    y0 = np.array([0.5, -0.25, 1.0])
    traj = simulate(abelian3, gm, State(np.eye(4), y0), zero_control(abelian3), 2.0, 50)
    assert_allclose(traj.ys, np.tile(y0, (51, 1)), atol=1e-15)
    assert_allclose(traj.xs[-1][:3, 3], 2.0 * y0, atol=1e-13)


def test_simulate_steady_rotation(so3_j123, so3_j123_group):
    traj = simulate(so3_j123, so3_j123_group, State(np.eye(3), np.array([1.0, 0, 0])),
                    zero_control(so3_j123), 3.0, 300)
    assert_allclose(traj.ys[-1], [1.0, 0, 0], atol=1e-13)
    assert_allclose(traj.xs[-1], aoc.exp_map(so3_j123_group, [1.0, 0, 0], 3.0), atol=1e-12)


def test_free_rigid_body_energy_conserved(so3_j123, so3_j123_group):
    s0 = State(np.eye(3), np.array([0.3, -0.4, 0.5]))
    traj = simulate(so3_j123, so3_j123_group, s0, zero_control(so3_j123), 5.0, 5000)
    assert energy_drift(so3_j123, traj) < 1e-8
    assert orthogonality_defect(traj.xs[-1]) < 1e-9


def test_covariant_acceleration_identities(so3_j123, rng):
    y = rng.standard_normal(3)
    # geodesic: ydot equals the drift
    assert_allclose(aoc.covariant_acceleration(so3_j123, y, aoc.bias(so3_j123, y)),
                    0.0, atol=1e-15)
    u = rng.standard_normal(3)
    ydot, _ = aoc.euler_poincare_rhs(so3_j123, y, u)
    assert_allclose(aoc.covariant_acceleration(so3_j123, y, ydot), u, atol=1e-15)


def test_covariant_acceleration_abelian_is_ydot(abelian3, rng):
    ydot = rng.standard_normal(3)
    assert_allclose(aoc.covariant_acceleration(abelian3, rng.standard_normal(3), ydot), ydot)


def test_covariant_acceleration_along_simulated_grid(so3_j123, so3_j123_group):
    u_fn = lambda t: np.array([0.2 * np.sin(t), -0.1 * t, 0.3 * np.cos(2 * t)])
    T, steps = 2.0, 400
    traj = simulate(so3_j123, so3_j123_group, State(np.eye(3), np.array([0.1, 0.2, -0.3])),
                    u_fn, T, steps)
    h = T / steps
    # fourth order stencil for ydot on interior points
    ydot = (traj.ys[:-4] - 8 * traj.ys[1:-3] + 8 * traj.ys[3:-1] - traj.ys[4:]) / (12 * h)
    acc = aoc.covariant_acceleration(so3_j123, traj.ys[2:-2], ydot)
    embedded = np.stack([aoc.embed_control(so3_j123, u_fn(t)) for t in traj.times[2:-2]])
    assert np.abs(acc - embedded).max() < 1e-8


def test_trajectory_invariants():
    times = np.array([0.0, 1.0, 2.0])
    xs = np.zeros((3, 2, 2))
    ys = np.zeros((3, 1))
    us = np.zeros((3, 1))
    with pytest.raises(aoc.DimensionMismatch):
        Trajectory(times=times, xs=xs[:2], ys=ys, us=us)
    with pytest.raises(ValueError):
        Trajectory(times=np.array([0.0, 0.0, 1.0]), xs=xs, ys=ys, us=us)


def test_nonfinite_reports_step_index(abelian3):
    gm = aoc.abelian_group(abelian3)

    def u(t):
        return np.array([np.nan, 0.0]) if t > 0.5 else np.zeros(2)

    with pytest.raises(aoc.NonFinite) as err:
        simulate(abelian3, gm, State(np.eye(4), np.zeros(3)), u, 1.0, 10)
    assert err.value.step_index > 0


def test_csv_roundtrip(tmp_path, so3_j123, so3_j123_group):
    traj = simulate(so3_j123, so3_j123_group, State(np.eye(3), np.array([0.1, 0.2, 0.3])),
                    zero_control(so3_j123), 1.0, 10)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path, so3_j123, so3_j123_group)
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header[0] == "t"
    assert len(header) == 1 + 9 + 3 + 3
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (11, 16)
    assert_allclose(data[:, 0], traj.times, atol=1e-16)
    assert_allclose(data[-1, 1:10], traj.xs[-1].reshape(-1), atol=1e-16)


def test_zoh_rollout_exact_abelian():
    ab = aoc.abelian_model(1)
    gm = aoc.abelian_group(ab)
    U = np.array([[3.0], [1.0], [-1.0], [-3.0]])
    _, xs, ys = zoh_rollout(ab, gm, np.eye(2), np.zeros(1), U, 1.0, steps_per_segment=2)
    # exact ZOH integration: y piecewise linear, x its exact integral
    assert_allclose(ys[-1], 0.0, atol=1e-15)
    assert_allclose(xs[-1][0, 1], 0.625, atol=1e-15)


def test_zoh_rollout_batch_matches_loop(so3_j123, so3_j123_group, rng):
    U = rng.standard_normal((5, 8, 3))
    _, xs, ys = zoh_rollout(so3_j123, so3_j123_group, np.eye(3), np.array([0.1, 0, 0]),
                            U, 1.0)
    for b in range(5):
        _, xs1, ys1 = zoh_rollout(so3_j123, so3_j123_group, np.eye(3),
                                  np.array([0.1, 0, 0]), U[b], 1.0)
        assert_allclose(xs[-1][b], xs1[-1], atol=0.0)
        assert_allclose(ys[-1][b], ys1[-1], atol=0.0)


def test_zoh_control_boundary_convention(abelian3):
    U = np.arange(8.0).reshape(4, 2)
    u = zoh_control(abelian3, U, 2.0)
    assert_allclose(u(0.0), U[0])
    assert_allclose(u(0.5), U[0])   # boundary belongs to the left segment
    assert_allclose(u(0.51), U[1])
    assert_allclose(u(2.0), U[3])


def test_simulate_single_segment_matches_rollout(so3_j123, so3_j123_group):
    # with one control segment there are no interior jumps, paths agree exactly
    U = np.array([[0.3, -0.2, 0.1]])
    traj = simulate(so3_j123, so3_j123_group, State(np.eye(3), np.zeros(3)),
                    zoh_control(so3_j123, U, 1.0), 1.0, 2)
    _, xs, ys = zoh_rollout(so3_j123, so3_j123_group, np.eye(3), np.zeros(3), U, 1.0,
                            steps_per_segment=2)
    assert_allclose(traj.xs[-1], xs[-1], atol=0.0)
    assert_allclose(traj.ys[-1], ys[-1], atol=0.0)
