import numpy as np
import pytest

import sirlyap as sl
from sirlyap import lyap_df, model
from sirlyap.errors import DomainError, InfeasibleOverride, OnBoundary, RegimeError
from sirlyap.model import Deviation


def test_select_defaults(p_df, lp_df):
    r0 = sl.r0_hat(p_df)
    assert lp_df.eps == pytest.approx(0.5 * (1.0 - r0))  # lower interval end is 0 here
    assert lp_df.mu0 == pytest.approx(0.99 * p_df.mu)
    assert 0.0 < lp_df.gamma0 < p_df.gamma
    assert lp_df.lambda3 == pytest.approx(1.0 - lp_df.gamma0 / p_df.gamma)
    assert lp_df.delta == 0.5


def test_select_reference_overrides(p_df, lp_df_ref):
    r0 = sl.r0_hat(p_df)
    g0 = (p_df.gamma + p_df.mu) * (r0 + 0.0745) - p_df.mu
    assert lp_df_ref.gamma0 == pytest.approx(g0, rel=1e-12)
    assert lp_df_ref.lambda3 == pytest.approx(1.0 - g0 / p_df.gamma, rel=1e-12)
    # the alternate quoted mu0 also satisfies the open interval
    lyap_df.select_df_params(p_df, mu0=0.0149)


def test_select_rejects_bad_overrides(p_df, p_en):
    r0 = sl.r0_hat(p_df)
    with pytest.raises(InfeasibleOverride):
        lyap_df.select_df_params(p_df, eps=1.0 - r0)  # open interval end
    with pytest.raises(InfeasibleOverride):
        lyap_df.select_df_params(p_df, mu0=p_df.mu)
    with pytest.raises(InfeasibleOverride):
        lyap_df.select_df_params(p_df, delta=1.0)
    with pytest.raises(RegimeError):
        lyap_df.select_df_params(p_en)  # R0 > 1
    with pytest.raises(RegimeError):
        lyap_df.select_df_params(sl.ModelParams(0.0002, 0.032, 0.015, 0.0))


def test_region_examples(p_df, lp_df_ref):
    lp = lp_df_ref
    assert lyap_df.df_region(lp, p_df, Deviation(1.0, 5.0, 5.0)) is lyap_df.DfRegion.A
    assert lyap_df.df_region(lp, p_df, Deviation(-1.0, 0.0, 0.0)) is lyap_df.DfRegion.C
    # threshold -(0.0002*200/0.0148)*5 = -13.51... < -1
    assert lyap_df.df_region(lp, p_df, Deviation(-1.0, 5.0, 0.0)) is lyap_df.DfRegion.B
    assert lyap_df.df_region(lp, p_df, Deviation(0.0, 5.0, 0.0)) is lyap_df.DfRegion.A
    with pytest.raises(DomainError):
        lyap_df.df_region(lp, p_df, Deviation(1.0, -1.0, 0.0))


def test_value_examples(p_df, lp_df):
    assert lyap_df.df_value(lp_df, p_df, Deviation(0.0, 0.0, 0.0)) == 0.0
    expect = 1.0 + 2.0 + 3.0 * lp_df.lambda3
    assert lyap_df.df_value(lp_df, p_df, Deviation(1.0, 2.0, 3.0)) == pytest.approx(expect)


def test_boundary_continuity(p_df, lp_df):
    rng = np.random.default_rng(5)
    c = p_df.beta * 200.0 / lp_df.mu0
    for _ in range(1000):
        x2, x3 = rng.uniform(0.0, 600.0, 2)
        lin = x2 + lp_df.lambda3 * x3
        va = lyap_df.df_value(lp_df, p_df, Deviation(0.0, x2, x3))
        assert va == pytest.approx(lin, rel=1e-9)
        thr = -c * lin
        vb = lin
        vc = -lp_df.mu0 * thr / (p_df.beta * 200.0)
        assert vc == pytest.approx(vb, rel=1e-9)


def test_gradient(p_df, lp_df):
    g = lyap_df.df_gradient(lp_df, p_df, Deviation(5.0, 5.0, 5.0))
    assert g == (1.0, 1.0, lp_df.lambda3)
    gc = lyap_df.df_gradient(lp_df, p_df, Deviation(-500.0, 1.0, 1.0))
    assert gc == (-lp_df.mu0 / (p_df.beta * 200.0), 0.0, 0.0)
    with pytest.raises(OnBoundary):
        lyap_df.df_gradient(lp_df, p_df, Deviation(0.0, 5.0, 5.0))


def test_gradient_matches_finite_differences(p_df, lp_df):
    rng = np.random.default_rng(6)
    checked = 0
    while checked < 100:
        d = Deviation(float(rng.uniform(-600.0, 600.0)),
                      float(rng.uniform(0.1, 600.0)), float(rng.uniform(0.1, 600.0)))
        try:
            g = lyap_df.df_gradient(lp_df, p_df, d)
        except OnBoundary:
            continue
        h = 1e-6 * (1.0 + d.norm1())
        fd = []
        base = d.as_array()
        ok = True
        for i in range(3):
            hi, lo = base.copy(), base.copy()
            hi[i] += h
            lo[i] -= h
            if lo[1] < 0.0 or lo[2] < 0.0:
                ok = False
                break
            fd.append((lyap_df.df_value(lp_df, p_df, Deviation(*hi))
                       - lyap_df.df_value(lp_df, p_df, Deviation(*lo))) / (2.0 * h))
        if not ok:
            continue
        assert np.abs(np.array(fd) - np.array(g)).max() < 1e-6
        checked += 1


def test_chi(p_df, lp_df_ref):
    assert lyap_df.df_chi(lp_df_ref, p_df, 0.0) == 0.0
    # delta = 0.5 and mu - mu0 = 0.0002
    assert lyap_df.df_chi(lp_df_ref, p_df, 1.0) == pytest.approx(10000.0, rel=1e-9)
    u = 0.37
    assert lyap_df.df_chi(lp_df_ref, p_df, 2 * u) == pytest.approx(
        2 * lyap_df.df_chi(lp_df_ref, p_df, u), rel=1e-12)


def test_decrease_slack(p_df, lp_df):
    assert lyap_df.df_decrease_slack(lp_df, p_df, Deviation(0.0, 0.0, 0.0), 0.0) \
        == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(7)
    eps_lo = min(lp_df.eps * (lp_df.gamma0 + p_df.mu), p_df.mu)
    for _ in range(200):
        d = Deviation(float(rng.uniform(-200.0, 600.0)),
                      float(rng.uniform(0.0, 600.0)), float(rng.uniform(0.0, 600.0)))
        try:
            reg = lyap_df.df_region(lp_df, p_df, d)
            slack = lyap_df.df_decrease_slack(lp_df, p_df, d, 0.0)
        except OnBoundary:
            continue
        assert slack >= -1e-12
        if reg is lyap_df.DfRegion.B:
            # sharper per-region rate in the middle region
            gf = lyap_df.df_grad_dot_f(lp_df, p_df, d, 0.0)
            v = lyap_df.df_value(lp_df, p_df, d)
            assert gf <= -eps_lo * v + 1e-12
    with pytest.raises(DomainError):
        lyap_df.df_decrease_slack(lp_df, p_df, Deviation(1.0, 1.0, 1.0), -p_df.b_hat - 1.0)


def test_positive_definite_and_radially_unbounded(p_df, lp_df):
    rng = np.random.default_rng(8)
    X = np.column_stack([rng.uniform(-1000.0, 1000.0, 1000),
                         rng.uniform(0.0, 1000.0, 1000),
                         rng.uniform(0.0, 1000.0, 1000)])
    v, _ = lyap_df.df_value_region_arrays(lp_df, p_df, X)
    assert np.all(v > 0.0)
    for d in (Deviation(3.0, 1.0, 2.0), Deviation(-4.0, 0.5, 0.0)):
        vals = [lyap_df.df_value(lp_df, p_df,
                                 Deviation(s * d.x1t, s * d.x2t, s * d.x3t))
                for s in (1.0, 10.0, 100.0, 1000.0)]
        ratios = np.diff(np.log(vals))
        assert np.all(vals[:-1] < vals[1:])
        assert np.allclose(ratios, np.log(10.0), rtol=1e-6)  # linear growth


def test_json_round_trip(lp_df):
    assert lyap_df.DfLyapParams.from_dict(lp_df.as_dict()) == lp_df
