"""Shared builders and dense reference constructions for the test suite.

Everything here is deliberately written against the public model API only
(``shifted_code`` / ``selection_matrices``), building full dense matrices the
slow, obvious way.  The library modules are then tested against these
independent constructions.
"""

from __future__ import annotations

import numpy as np
import numpy.linalg as nla

from radcom.model import (
    CommParams,
    CrossInterference,
    RadarParams,
    Scenario,
    protected_cell_grid,
    selection_matrices,
    shifted_code,
    validate_scenario,
)


def random_hpsd(k, rng, scale=1.0):
    """Random Hermitian PSD matrix of size k with O(scale) entries."""
    A = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return scale * (A @ A.conj().T) / k


def tiny_scenario(seed=0, N=8, L=3, M=2, K=2, J=2, rho=0.8, nu=1,
                  n_alpha=2, n_beta=2, P_r_max=4.0, P_u=0.5, P_c_max=1.5,
                  P_v=0.3, sigma2_g=2.0, sigma2_gamma=0.1, scale=1.0):
    """Small O(1)-conditioned scenario for fast, well-posed unit tests.

    ``scale`` multiplies the interference covariances; ``n_alpha``/``n_beta``
    count the scatterer taps on the comm->comm and comm->radar paths.
    """
    rng = np.random.default_rng(seed)
    q = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, L)) * np.sqrt(N / L)
    H = (rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))) / np.sqrt(2.0)
    cells = protected_cell_grid(N, L, J)
    radar = RadarParams(
        q=q, N=N, P_r_max=P_r_max, P_u=P_u, J=J,
        sigma2_g={c: sigma2_g for c in cells},
        sigma2_gamma=np.full((N, J), sigma2_gamma),
        cells=cells,
        rho={c: rho for c in cells},
    )
    alpha = {int(i): random_hpsd(K, rng, scale)
             for i in rng.choice(N, size=n_alpha, replace=False)}
    beta = {}
    for j in range(J):
        for i in rng.choice(N, size=n_beta, replace=False):
            beta[(int(i), j)] = random_hpsd(M, rng, scale)
    comm = CommParams(H=H, P_c_max=P_c_max, P_v=P_v,
                      sigma2_alpha=alpha, sigma2_h=0.0)
    return validate_scenario(Scenario(
        radar=radar, comm=comm,
        cross=CrossInterference(sigma2_beta=beta), nu=nu,
    ))


def dense_clutter(j, s):
    """sum_i sigma2_gamma[i, j] q_i q_i^H built one shift at a time."""
    N = s.radar.N
    G = np.zeros((N, N), dtype=complex)
    for i in range(N):
        qi = shifted_code(s.radar.q, i, N)
        G += s.radar.sigma2_gamma[i, j] * np.outer(qi, qi.conj())
    return G


def dense_beam_cov(j, C, s):
    """Codeword interference covariance seen by radar beam j, via the 0/1
    selection matrices."""
    N, M = s.radar.N, s.comm.M
    R = np.zeros((N, N), dtype=complex)
    for (d, jj), S in s.cross.sigma2_beta.items():
        if jj != j:
            continue
        for m in range(M):
            Am, Bm = selection_matrices(m, d, s.nu, N, M)
            for mp in range(M):
                Ap, Bp = selection_matrices(mp, d, s.nu, N, M)
                R += S[m, mp] * (Am @ C @ Ap.conj().T + Bm @ C @ Bp.conj().T)
    return R


def dense_constraint_matrix(w, j, s):
    """MN x MN matrix E with trace(E C) = w^H R_j(C) w for every C."""
    N, M = s.radar.N, s.comm.M
    E = np.zeros((M * N, M * N), dtype=complex)
    P = np.outer(w, w.conj())
    for (d, jj), S in s.cross.sigma2_beta.items():
        if jj != j:
            continue
        for m in range(M):
            Am, Bm = selection_matrices(m, d, s.nu, N, M)
            for mp in range(M):
                Ap, Bp = selection_matrices(mp, d, s.nu, N, M)
                E += S[m, mp] * (Ap.conj().T @ P @ Am + Bp.conj().T @ P @ Bm)
    return E


def dense_comm_interference(P_r, s):
    """KN x KN radar-pulse interference covariance at the comm receiver."""
    N, K = s.radar.N, s.comm.K
    Sig = np.zeros((K * N, K * N), dtype=complex)
    for d, T in s.comm.sigma2_alpha.items():
        sd = shifted_code(s.radar.q, d, N)
        Sig += P_r * np.kron(T, np.outer(sd, sd.conj()))
    return Sig


def dense_whitened_channel(P_r, s):
    """(Sigma + P_v I)^{-1/2} (H kron I_N) by brute-force eigendecomposition."""
    N, K = s.radar.N, s.comm.K
    Sig = dense_comm_interference(P_r, s) + s.comm.P_v * np.eye(K * N)
    evals, vecs = nla.eigh(Sig)
    W = (vecs / np.sqrt(evals)) @ vecs.conj().T
    return W @ np.kron(s.comm.H, np.eye(N))


def dense_sdr(n, j, C, P_r, w, s):
    qn = shifted_code(s.radar.q, n, s.radar.N)
    num = P_r * s.radar.sigma2_g[(n, j)] * abs(np.vdot(w, qn)) ** 2
    D = (P_r * dense_clutter(j, s) + dense_beam_cov(j, C, s)
         + s.radar.P_u * np.eye(s.radar.N))
    return num / float(np.real(np.vdot(w, D @ w)))


def random_covariance(MN, rng, rank=None, power=1.0):
    """Random PSD codeword covariance with trace MN * power."""
    r = rank if rank is not None else MN
    X = rng.standard_normal((MN, r)) + 1j * rng.standard_normal((MN, r))
    C = X @ X.conj().T
    return C * (MN * power / np.trace(C).real)
