import json

import numpy as np
import pytest

from radcom.errors import ScenarioError
from radcom.model import (
    default_scenario,
    load_scenario,
    protected_cell_grid,
    random_scenario,
    restrict_cells,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    selection_matrices,
    shifted_code,
    strip_interference,
    validate_scenario,
    with_thresholds,
)

from common import tiny_scenario


def test_shifted_code_places_and_wraps():
    q = np.array([1.0 + 1.0j, 2.0, 3.0])
    out = shifted_code(q, 2, 6)
    np.testing.assert_allclose(out, [0, 0, 1 + 1j, 2, 3, 0])
    # circular wrap past the end of the window
    out = shifted_code(q, 5, 6)
    np.testing.assert_allclose(out, [2, 3, 0, 0, 0, 1 + 1j])
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(q))


def test_selection_matrices_reassemble_a_delayed_stream():
    """A picks the head of the current codeword, B the spill-over of the
    adjacent one; together they are exactly a circular shift of antenna m's
    symbols."""
    N, M = 6, 2
    x = np.arange(1, M * N + 1, dtype=float)
    for m in range(M):
        for i in (0, 2, 5):
            for nu in (0, 1, 4):
                A, B = selection_matrices(m, i, nu, N, M)
                d = (i + nu) % N
                np.testing.assert_allclose(
                    A @ x + B @ x, np.roll(x[m * N:(m + 1) * N], d))
                # 0/1 entries, disjoint supports
                assert set(np.unique(A)) <= {0.0, 1.0}
                assert set(np.unique(B)) <= {0.0, 1.0}
                assert np.all((A != 0).sum(axis=1) + (B != 0).sum(axis=1) == 1)
                assert not np.any((A != 0) & (B != 0))


def test_protected_cell_grid():
    cells = protected_cell_grid(10, 3, 2)
    assert len(cells) == (10 - 3 + 1) * 2
    assert cells[0] == (0, 0) and cells[-1] == (7, 1)
    assert len(set(cells)) == len(cells)


def test_validate_rejects_bad_code_norm():
    s = tiny_scenario()
    r = s.radar
    with pytest.raises(ScenarioError):
        validate_scenario(s.__class__(
            radar=r.__class__(q=2.0 * r.q, N=r.N, P_r_max=r.P_r_max, P_u=r.P_u,
                              J=r.J, sigma2_g=r.sigma2_g,
                              sigma2_gamma=r.sigma2_gamma, cells=r.cells,
                              rho=r.rho),
            comm=s.comm, cross=s.cross, nu=s.nu))


def test_validate_renormalizes_small_code_drift():
    s = tiny_scenario()
    r = s.radar
    drifted = r.q * (1.0 + 2e-3)
    out = validate_scenario(s.__class__(
        radar=r.__class__(q=drifted, N=r.N, P_r_max=r.P_r_max, P_u=r.P_u,
                          J=r.J, sigma2_g=r.sigma2_g,
                          sigma2_gamma=r.sigma2_gamma, cells=r.cells,
                          rho=r.rho),
        comm=s.comm, cross=s.cross, nu=s.nu))
    assert np.linalg.norm(out.radar.q) ** 2 == pytest.approx(r.N, rel=1e-12)


def test_validate_rejects_cell_outside_grid():
    s = tiny_scenario()
    r = s.radar
    bad_cells = r.cells + ((r.N, 0),)
    with pytest.raises(ScenarioError):
        validate_scenario(s.__class__(
            radar=r.__class__(q=r.q, N=r.N, P_r_max=r.P_r_max, P_u=r.P_u,
                              J=r.J, sigma2_g=r.sigma2_g,
                              sigma2_gamma=r.sigma2_gamma, cells=bad_cells,
                              rho=r.rho),
            comm=s.comm, cross=s.cross, nu=s.nu))


def test_validate_rejects_rho_key_mismatch():
    s = tiny_scenario()
    r = s.radar
    rho = dict(r.rho)
    rho.pop(r.cells[0])
    with pytest.raises(ScenarioError):
        validate_scenario(s.__class__(
            radar=r.__class__(q=r.q, N=r.N, P_r_max=r.P_r_max, P_u=r.P_u,
                              J=r.J, sigma2_g=r.sigma2_g,
                              sigma2_gamma=r.sigma2_gamma, cells=r.cells,
                              rho=rho),
            comm=s.comm, cross=s.cross, nu=s.nu))


def test_validate_rejects_non_psd_interference():
    s = tiny_scenario()
    alpha = dict(s.comm.sigma2_alpha)
    alpha[0] = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    comm = s.comm.__class__(H=s.comm.H, P_c_max=s.comm.P_c_max, P_v=s.comm.P_v,
                            sigma2_alpha=alpha, sigma2_h=s.comm.sigma2_h)
    with pytest.raises(ScenarioError):
        validate_scenario(s.__class__(radar=s.radar, comm=comm,
                                      cross=s.cross, nu=s.nu))


def test_random_scenario_draw_counts_and_strength():
    base = tiny_scenario(N=12, L=3, J=2, n_alpha=0, n_beta=0)
    delta, sigma2 = 0.25, 0.05
    s = random_scenario(base, delta, sigma2, seed=9)
    want = int(np.ceil(delta * base.radar.N))
    assert len(s.comm.sigma2_alpha) == want
    for j in range(base.radar.J):
        assert sum(1 for (_, jj) in s.cross.sigma2_beta if jj == j) == want
    for T in s.comm.sigma2_alpha.values():
        np.testing.assert_allclose(T, sigma2 * np.eye(base.comm.K))
    for S in s.cross.sigma2_beta.values():
        np.testing.assert_allclose(S, sigma2 * np.eye(base.comm.M))
    # shifts lie in range and are distinct per path
    assert all(0 <= i < base.radar.N for i in s.comm.sigma2_alpha)
    # deterministic given the seed; template untouched
    s2 = random_scenario(base, delta, sigma2, seed=9)
    assert set(s2.comm.sigma2_alpha) == set(s.comm.sigma2_alpha)
    assert set(s2.cross.sigma2_beta) == set(s.cross.sigma2_beta)
    assert not base.comm.sigma2_alpha and not base.cross.sigma2_beta


def test_random_scenario_distinct_seeds_differ():
    base = tiny_scenario(N=12, L=3, n_alpha=0, n_beta=0)
    a = random_scenario(base, 0.5, 1.0, seed=1)
    b = random_scenario(base, 0.5, 1.0, seed=2)
    assert (set(a.comm.sigma2_alpha) != set(b.comm.sigma2_alpha)
            or set(a.cross.sigma2_beta) != set(b.cross.sigma2_beta))


def test_random_scenario_draws_channel_when_requested():
    base = default_scenario()
    assert base.comm.sigma2_h == 3e-10
    s = random_scenario(base, 0.1, 1.2e-13, seed=4)
    assert np.linalg.norm(s.comm.H) > 0.0
    s2 = random_scenario(base, 0.1, 1.2e-13, seed=4)
    np.testing.assert_array_equal(s.comm.H, s2.comm.H)


def test_restrict_and_rethreshold_and_strip():
    s = tiny_scenario()
    keep = s.radar.cells[:3]
    r = restrict_cells(s, keep)
    assert r.radar.cells == tuple(sorted(keep))
    assert set(r.radar.rho) == set(keep) and set(r.radar.sigma2_g) == set(keep)

    t = with_thresholds(s, 0.25)
    assert all(v == 0.25 for v in t.radar.rho.values())
    assert s.radar.rho[s.radar.cells[0]] == 0.8  # original untouched

    bare = strip_interference(s)
    assert not bare.comm.sigma2_alpha and not bare.cross.sigma2_beta
    np.testing.assert_array_equal(bare.comm.H, s.comm.H)


def test_scenario_json_round_trip(tmp_path):
    s = tiny_scenario(seed=3)
    path = tmp_path / "scen.json"
    save_scenario(s, path)
    t = load_scenario(path)
    np.testing.assert_allclose(t.radar.q, s.radar.q)
    np.testing.assert_allclose(t.comm.H, s.comm.H)
    assert t.radar.cells == s.radar.cells
    assert t.radar.rho == s.radar.rho
    assert t.nu == s.nu
    assert set(t.comm.sigma2_alpha) == set(s.comm.sigma2_alpha)
    for k in s.comm.sigma2_alpha:
        np.testing.assert_allclose(t.comm.sigma2_alpha[k], s.comm.sigma2_alpha[k])
    for k in s.cross.sigma2_beta:
        np.testing.assert_allclose(t.cross.sigma2_beta[k], s.cross.sigma2_beta[k])
    np.testing.assert_allclose(t.radar.sigma2_gamma, s.radar.sigma2_gamma)
    blob = json.loads(path.read_text())
    assert blob["schema"] == "radcom.scenario/1"


def test_dict_round_trip_identity():
    s = tiny_scenario(seed=5)
    t = scenario_from_dict(scenario_to_dict(s))
    np.testing.assert_allclose(t.radar.q, s.radar.q)
    assert t.radar.rho == s.radar.rho


def test_default_scenario_reference_numbers():
    s = default_scenario(0.0)
    assert s.radar.N == 100 and s.radar.J == 3
    assert len(s.radar.q) == 5
    assert np.linalg.norm(s.radar.q) ** 2 == pytest.approx(100.0)
    # Barker sign pattern survives the power scaling
    np.testing.assert_allclose(np.sign(s.radar.q.real),
                               [1.0, 1.0, 1.0, -1.0, 1.0])
    assert s.radar.P_r_max == 25.0
    assert s.radar.P_u == pytest.approx(2.39e-14)
    assert s.comm.P_v == pytest.approx(2.39e-14)
    assert s.comm.P_c_max == pytest.approx(0.01)
    assert s.comm.sigma2_h == pytest.approx(3e-10)
    assert all(v == pytest.approx(4.8e-16) for v in s.radar.sigma2_g.values())
    assert np.all(s.radar.sigma2_gamma == 4.8e-17)
    assert len(s.radar.cells) == 96 * 3
    assert s.comm.K == 2 and s.comm.M == 2


def test_clutter_gram_is_cached_and_beam_indexed():
    s = tiny_scenario()
    G0 = s.clutter_gram(0)
    assert s.clutter_gram(0) is G0  # cached
    assert G0.shape == (s.radar.N, s.radar.N)
    assert np.allclose(G0, G0.conj().T)
