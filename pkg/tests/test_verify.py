import json

import numpy as np
import pytest

import sirlyap as sl
from sirlyap import lyap_en, ode, verify
from sirlyap.errors import MismatchedEquilibrium, RangeError
from sirlyap.model import EquilibriumKind


def test_dini_constant_at_equilibrium(p_df, ly_df):
    q = sl.disease_free_eq(p_df).point
    traj = sl.integrate(p_df, q, ode.Constant(p_df.b_hat), 50.0, dt=0.1)
    res = verify.check_dini_along_trajectory(ly_df, traj)
    assert res.passed
    assert res.details["v_final"] == pytest.approx(0.0, abs=1e-9)


def test_dini_mismatch_raises(ly_df, p_df):
    traj = sl.integrate(p_df, sl.State(100.0, 10.0, 0.0), ode.Constant(3.0), 5.0, dt=0.1)
    traj.anchor = EquilibriumKind.ENDEMIC
    with pytest.raises(MismatchedEquilibrium):
        verify.check_dini_along_trajectory(ly_df, traj)


def test_dini_decrease_df(p_df, ly_df):
    traj = sl.integrate(p_df, sl.State(80.0, 120.0, 40.0), ode.Constant(p_df.b_hat),
                        800.0, dt=0.05)
    res = verify.check_dini_along_trajectory(ly_df, traj, v_stop=1e-6)
    assert res.passed


def test_dini_decrease_endemic_boundary_crossing(p_en, ly_en):
    # a spiral start crosses several region boundaries on its way in
    q = sl.endemic_eq(p_en).point
    traj = sl.integrate(p_en, sl.State(q.s + 150.0, q.i - 120.0, q.r - 50.0),
                        ode.Constant(p_en.b_hat), 800.0, dt=0.05)
    res = verify.check_dini_along_trajectory(ly_en, traj, v_stop=1e-6)
    assert res.passed


def test_iss_bound_zero_input(ly_df, p_df):
    res = verify.check_iss_bound(ly_df, ode.Constant(p_df.b_hat), dt=0.25,
                                 x0=sl.State(180.0, 20.0, 5.0))
    assert res.passed
    assert res.details["limsup_v"] <= 1e-6


def test_iss_bound_range_error(ly_en, p_en):
    lo, hi = ly_en.admissible_u()
    with pytest.raises(RangeError):
        verify.check_iss_bound(ly_en, ode.Constant(p_en.b_hat + hi + 0.5), t_end=100.0)
    with pytest.raises(RangeError):
        verify.iss_step_suite(ly_en, [hi + 0.1], t_end=100.0)


def test_reproducible_margins(p_en, lp_en):
    a = verify.check_en_sample_decrease(p_en, lp_en, n=3000, seed=123)
    b = verify.check_en_sample_decrease(p_en, lp_en, n=3000, seed=123)
    assert a.worst_margin == b.worst_margin
    assert a.worst_location == b.worst_location


def test_bifurcation_small_grid(p_df):
    c_star = p_df.mu * (p_df.gamma + p_df.mu) / p_df.beta
    res = verify.check_bifurcation_continuity(
        p_df, c_values=np.linspace(0.8 * c_star, 1.25 * c_star, 5))
    assert res.passed
    assert res.details["limit_gap_at_threshold"] <= 1e-3
    assert np.isfinite(res.details["lipschitz_estimate"])


def test_nesting_small(p_en, lp_en):
    res = verify.check_sublevel_nesting(p_en, lp_en, n=2000)
    assert res.passed
    assert res.worst_margin == 0.0


def test_w_region(p_en, lp_en):
    res = verify.check_w_region(p_en, lp_en, n_starts=6, seed=2)
    assert res.passed
    assert res.details["all_entered"]
    assert np.isfinite(res.details["max_entry_time"])


def test_separability_demo(p_en):
    res = verify.separability_obstruction_demo(p_en)
    assert res.passed
    assert res.details["required_sign_upper"] == 1
    assert res.details["required_sign_lower"] == -1
    assert abs(res.details["dx2dt_on_plane"]) < 1e-12
    assert res.details["anti_parallel_vanishes_at_x2hat"]


def test_prohibited_region_demo(p_en):
    res = verify.prohibited_region_demo(p_en, l_bars=(340.0, 1000.0), t_end=2500.0)
    assert res.passed
    assert res.details["excluded_for_all_l_bars"]
    assert res.details["min_distance_to_disease_free"] < 550.0


def test_grid_csv_emission(p_df, lp_df, tmp_path):
    path = tmp_path / "grid.csv"
    res = verify.check_df_grid_iss(lp_df, p_df, n=8, csv_path=path)
    assert res.passed
    lines = path.read_text().splitlines()
    assert lines[0] == "x1t,x2t,x3t,region,V,slack"
    assert len(lines) > 100
    assert all(line.split(",")[3] in ("A", "B", "C") for line in lines[1:])


def test_en_iss_pointwise(p_en, lp_en):
    res = verify.check_en_iss_pointwise(p_en, lp_en, n=4000, seed=1)
    assert res.passed
    assert res.samples > 0


def test_run_certification_df_small(p_df, lp_df):
    rep = verify.run_certification(p_df, EquilibriumKind.DISEASE_FREE, lp_df,
                                   grid_n=15, n_traj=6)
    assert rep.passed
    names = [c.name for c in rep.checks]
    assert "df_grid_iss" in names and names.count("iss_bound") == 3


def test_report_json_and_table(p_df, lp_df, tmp_path):
    rep = verify.VerificationReport()
    rep.add(verify.check_df_continuity(lp_df, p_df, n=100))
    rep.add(verify.check_df_positive_definite(lp_df, p_df, n=100))
    assert rep.passed
    path = tmp_path / "report.json"
    rep.save_json(path)
    loaded = json.loads(path.read_text())
    assert loaded["passed"] is True
    assert len(loaded["checks"]) == 2
    table = rep.format_table()
    assert "df_continuity" in table and "True" in table
