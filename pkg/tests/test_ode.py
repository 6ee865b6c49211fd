import csv

import numpy as np
import pytest

import sirlyap as sl
from sirlyap import model, ode
from sirlyap.errors import NonFiniteState, NotConverged


def test_sample_input_examples():
    assert sl.sample_input(ode.Constant(3.0), 10.0) == 3.0
    step = ode.Step(5.0, 3.0, 17.0)
    assert sl.sample_input(step, 4.9) == 3.0
    assert sl.sample_input(step, 5.0) == 17.0
    sin = ode.Sinusoid(1.0, 2.0, 1.0)
    assert sl.sample_input(sin, 3.0 * np.pi / 2.0) == 0.0
    pw = ode.Piecewise(((0.0, 1.0), (2.0, 5.0), (4.0, 0.5)))
    assert sl.sample_input(pw, 1.99) == 1.0
    assert sl.sample_input(pw, 2.0) == 5.0
    assert sl.sample_input(pw, 100.0) == 0.5


def test_signal_validation_and_json():
    with pytest.raises(ValueError):
        ode.Constant(-1.0)
    with pytest.raises(ValueError):
        ode.Piecewise(((1.0, 2.0), (0.5, 3.0)))
    for sig in (ode.Constant(3.0), ode.Step(5.0, 3.0, 17.0),
                ode.Piecewise(((0.0, 1.0), (2.0, 5.0))), ode.Sinusoid(3.0, 1.0, 0.1)):
        assert ode.signal_from_dict(ode.signal_to_dict(sig)) == sig
    with pytest.raises(ValueError):
        ode.signal_from_dict({"kind": "sawtooth"})


def test_equilibrium_is_fixed_point(p_df):
    q = sl.disease_free_eq(p_df).point
    traj = sl.integrate(p_df, q, ode.Constant(p_df.b_hat), 100.0, dt=0.05)
    assert np.abs(traj.states - q.as_array()).max() <= 1e-9 * max(1.0, q.n)


def test_long_horizon_convergence_df(p_df):
    traj = sl.integrate(p_df, sl.State(100.0, 50.0, 0.0), ode.Constant(3.0),
                        5000.0, dt=0.05, record_every=100)
    assert np.abs(traj.final_state.as_array() - [200.0, 0.0, 0.0]).sum() < 1e-3


def test_long_horizon_convergence_endemic(p_en):
    q = sl.endemic_eq(p_en).point
    traj = sl.integrate(p_en, sl.State(400.0, 100.0, 100.0), ode.Constant(17.0),
                        5000.0, dt=0.05, record_every=100)
    assert np.abs(traj.final_state.as_array() - q.as_array()).sum() < 1e-2


def test_population_bound_and_exact_n(p_df):
    x0 = sl.State(100.0, 50.0, 0.0)
    traj = sl.integrate(p_df, x0, ode.Constant(3.0), 400.0, dt=0.05, record_every=10)
    n_traj = traj.states.sum(axis=1)
    n_exact = model.total_population_exact(x0, 3.0, p_df, traj.times)
    assert np.abs(n_traj - n_exact).max() <= 1e-6 * np.abs(n_exact).max()
    bound = np.array([sl.total_population_bound(x0, 3.0, p_df, t) for t in traj.times])
    assert np.all(n_traj <= bound * (1.0 + 1e-6))


def test_rk4_order(p_df):
    x0 = sl.State(150.0, 30.0, 10.0)
    sig = ode.Sinusoid(3.0, 1.0, 0.05)
    ref = sl.integrate(p_df, x0, sig, 50.0, dt=0.0625).final_state.as_array()
    e1 = np.abs(sl.integrate(p_df, x0, sig, 50.0, dt=0.5).final_state.as_array() - ref).sum()
    e2 = np.abs(sl.integrate(p_df, x0, sig, 50.0, dt=0.25).final_state.as_array() - ref).sum()
    assert 8.0 <= e1 / e2 <= 32.0


def test_nonnegativity_preserved(p_en):
    rng = np.random.default_rng(11)
    for _ in range(5):
        x0 = sl.State(*rng.uniform(0.0, 50.0, 3))
        traj = sl.integrate(p_en, x0, ode.Step(10.0, 0.0, 17.0), 200.0, dt=0.05,
                            record_every=10)
        assert traj.states.min() >= 0.0


def test_nonfinite_detection(p_en):
    # an absurd step size blows the quadratic term up
    with pytest.raises(NonFiniteState):
        sl.integrate(p_en, sl.State(1e5, 1e5, 0.0), ode.Constant(17.0), 4000.0, dt=2000.0)


def test_step_alignment_preserves_order(p_df):
    x0 = sl.State(100.0, 5.0, 0.0)
    sig = ode.Step(2.5, 3.0, 8.0)
    tr = sl.integrate(p_df, x0, sig, 10.0, dt=1.0)
    assert 2.5 in tr.times
    # with the grid aligned to the switch, fourth order survives the jump
    ref = sl.integrate(p_df, x0, sig, 50.0, dt=0.03125).final_state.as_array()
    e1 = np.abs(sl.integrate(p_df, x0, sig, 50.0, dt=0.5).final_state.as_array() - ref).sum()
    e2 = np.abs(sl.integrate(p_df, x0, sig, 50.0, dt=0.25).final_state.as_array() - ref).sum()
    assert 8.0 <= e1 / e2 <= 32.0


def test_steady_state_cases(p_df, p_en):
    q = sl.endemic_eq(p_en).point
    ss = sl.steady_state(p_en, 17.0, sl.State(300.0, 250.0, 500.0), tol=1e-8,
                         t_max=3e4, dt=0.25)
    assert np.abs(ss.as_array() - q.as_array()).sum() < 5e-2
    ss0 = sl.steady_state(p_en, 0.0, sl.State(100.0, 10.0, 10.0), tol=1e-10,
                          t_max=3e4, dt=0.25)
    assert ss0.n < 1e-6
    ss_df = sl.steady_state(p_en, 3.0, sl.State(100.0, 10.0, 10.0), tol=1e-8,
                            t_max=3e4, dt=0.25)
    assert np.abs(ss_df.as_array() - [200.0, 0.0, 0.0]).sum() < 5e-2
    with pytest.raises(NotConverged):
        sl.steady_state(p_en, 17.0, sl.State(300.0, 250.0, 500.0), tol=1e-8, t_max=5.0)


def test_trajectory_csv(tmp_path, p_df):
    traj = sl.integrate(p_df, sl.State(100.0, 50.0, 0.0), ode.Constant(3.0), 5.0, dt=0.1)
    path = tmp_path / "traj.csv"
    traj.to_csv(path, thin=5)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "S", "I", "R", "B"]
    assert float(rows[1][0]) == 0.0
    assert float(rows[-1][0]) == 5.0
    idx = list(range(0, len(traj.times), 5))
    expected = len(idx) + (0 if idx[-1] == len(traj.times) - 1 else 1)
    assert len(rows) - 1 == expected


def test_trajectory_validation():
    with pytest.raises(ValueError):
        ode.Trajectory(np.array([0.0, 0.0]), np.zeros((2, 3)), np.zeros(2))
    with pytest.raises(ValueError):
        ode.Trajectory(np.array([0.0, 1.0]), np.zeros((3, 3)), np.zeros(2))
