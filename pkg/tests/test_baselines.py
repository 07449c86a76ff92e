import numpy as np
import numpy.linalg as nla
import pytest

from radcom.baselines import comm_first, disjoint, non_interfering, radar_first
from radcom.errors import PowerBudgetError
from radcom.metrics import max_feasible_rho, mutual_information
from radcom.model import strip_interference, with_thresholds
from radcom.solver import (SolverOptions, alternating_maximization,
                           update_filters, update_radar_power)

from common import tiny_scenario


# ------------------------------------------------------- non-interfering bound

def test_non_interfering_ignores_thresholds():
    s = tiny_scenario(seed=3)
    a = non_interfering(s)
    b = non_interfering(with_thresholds(s, 0.9 * min(s.radar.rho.values())))
    assert a.mi_bits == b.mi_bits
    assert a.min_sdr_db == b.min_sdr_db
    np.testing.assert_array_equal(a.variables.C, b.variables.C)


def test_non_interfering_rate_matches_general_evaluator():
    # the closed-form sum over spatial modes must agree with the full
    # whitened log-det evaluated on kron(Q, I) in an interference-free band
    for seed in range(4):
        s = tiny_scenario(seed=seed)
        bl = non_interfering(s)
        mi = mutual_information(bl.variables.C, s.radar.P_r_max,
                                strip_interference(s))
        assert bl.mi_bits == pytest.approx(mi, rel=1e-12)


def test_non_interfering_spends_budget_on_low_rank_kron():
    s = tiny_scenario(seed=4, K=1)
    bl = non_interfering(s)
    C = bl.variables.C
    N = s.radar.N
    assert np.trace(C).real / N == pytest.approx(s.comm.P_c_max, rel=1e-12)
    # one receive antenna -> one spatial mode -> rank N, not MN
    assert nla.matrix_rank(C, tol=1e-9 * nla.norm(C, 2)) == N


def test_non_interfering_sdr_is_the_feasibility_bound():
    for seed in (0, 5):
        s = tiny_scenario(seed=seed)
        bl = non_interfering(s)
        bounds = max_feasible_rho(s)
        assert bl.min_sdr_db == pytest.approx(min(bounds.values()), abs=1e-9)


# ------------------------------------------------------------------- disjoint

def test_disjoint_reuses_selfish_design_and_reports_achievable_rho():
    s = tiny_scenario(seed=3)
    ni = non_interfering(s)
    dj = disjoint(s)
    np.testing.assert_array_equal(dj.variables.C, ni.variables.C)
    assert dj.variables.P_r == s.radar.P_r_max
    assert dj.info["achievable_rho_db"] == dj.min_sdr_db
    # mutual interference can only hurt both metrics
    assert dj.mi_bits <= ni.mi_bits + 1e-9
    assert dj.min_sdr_db <= ni.min_sdr_db + 1e-9


def test_disjoint_equals_bound_without_cross_terms():
    s = strip_interference(tiny_scenario(seed=6))
    ni = non_interfering(s)
    dj = disjoint(s)
    assert dj.mi_bits == pytest.approx(ni.mi_bits, rel=1e-12)
    assert dj.min_sdr_db == pytest.approx(ni.min_sdr_db, abs=1e-12)


# ----------------------------------------------------------------- comm-first

def test_comm_first_reaches_a_fixed_point_meeting_thresholds():
    s = tiny_scenario(seed=3)
    bl = comm_first(s)
    C, P_r = bl.variables.C, bl.variables.P_r
    w = update_filters(C, P_r, s)
    assert update_radar_power(C, w, s) == pytest.approx(P_r, rel=1e-7)
    assert bl.mi_bits == pytest.approx(mutual_information(C, P_r, s), rel=1e-12)
    rho_db = 10.0 * np.log10(min(s.radar.rho.values()))
    assert bl.min_sdr_db >= rho_db - 1e-9


def test_comm_first_needs_more_power_under_interference():
    for seed in (3, 7):
        s = tiny_scenario(seed=seed)
        hot = comm_first(s).variables.P_r
        cold = comm_first(strip_interference(s)).variables.P_r
        assert hot >= cold - 1e-12


def test_comm_first_raises_when_the_budget_cannot_cover_the_comm():
    s = tiny_scenario(seed=3)
    bound = min(max_feasible_rho(s).values())
    hot = with_thresholds(s, 0.98 * 10.0 ** (bound / 10.0))
    with pytest.raises(PowerBudgetError):
        comm_first(hot)


# ---------------------------------------------------------------- radar-first

@pytest.mark.parametrize("method", ["gradient", "dual"])
def test_radar_first_waterfills_when_the_radar_is_silent_to_the_comm(method):
    s = strip_interference(tiny_scenario(seed=3))
    bl = radar_first(s, SolverOptions(codebook_method=method))
    assert bl.variables.P_r == s.radar.P_r_max
    assert bl.mi_bits == pytest.approx(non_interfering(s).mi_bits, rel=1e-6)
    assert bl.info["inner_iterations"] >= 1


def test_radar_first_never_beats_the_joint_design():
    # the joint solver's first outer pass computes exactly the radar-first
    # design, so the final joint rate can only be at least as large
    s = tiny_scenario(seed=3)
    for method in ("gradient", "dual"):
        opts = SolverOptions(codebook_method=method)
        rf = radar_first(s, opts)
        _, tr = alternating_maximization(s, opts)
        assert tr.mi_bits[-1] >= rf.mi_bits - 1e-9


def test_baseline_rate_ordering():
    for seed in (3, 8):
        s = tiny_scenario(seed=seed)
        ni = non_interfering(s)
        rf = radar_first(s)
        _, tr = alternating_maximization(s)
        assert rf.mi_bits - 1e-9 <= tr.mi_bits[-1] <= ni.mi_bits + 1e-9
