"""Problem data: radar/comm scenario containers, code shifts, and serialization.

A :class:`Scenario` bundles everything that defines one coexistence instance:
the radar pulse parameters and protected range/beam cells, the MIMO link, and
the sparse cross-interference second-order statistics.  All powers and
variances are linear-scale watts; dB conversion belongs to the CLI.

Conventions
-----------
* Codewords stack antennas block-wise: entry ``m*N + t`` is antenna ``m``,
  chip ``t``.  Kronecker products follow the same ordering.
* A protected cell is a pair ``(n, j)`` with delay index ``0 <= n <= N-L``
  and beam index ``0 <= j < J``.
* ``sigma2_alpha`` / ``sigma2_beta`` are sparse dicts; missing keys mean a
  zero matrix.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import ScenarioError
from .numerics import herm, is_hermitian

Cell = tuple[int, int]

SCENARIO_SCHEMA = "radcom.scenario/1"

#: allowed relative deviation of ||q||^2 from N before validation refuses to fix it
_CODE_NORM_SLACK = 0.01


def shifted_code(q: np.ndarray, i: int, N: int) -> np.ndarray:
    """Length-``N`` circularly shifted, zero-padded copy of the code ``q``.

    The code occupies chips ``i .. i+L-1`` (mod ``N``); shift ``i=0`` is the
    zero-padded code itself.
    """
    q = np.asarray(q, dtype=complex).ravel()
    if q.size > N:
        raise ScenarioError(f"code length {q.size} exceeds N={N}")
    padded = np.concatenate([q, np.zeros(N - q.size, dtype=complex)])
    return np.roll(padded, i % N)


def selection_matrices(m: int, i: int, nu: int, N: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """0/1 matrices extracting the two codeword segments that a shifted pulse straddles.

    For shift ``l = (nu + i) mod N``, returns ``(A, B)`` of shape ``(N, M*N)``:
    ``A`` carries an identity on the first ``N - l`` chips of antenna-``m``'s
    block into rows ``l..N-1``; ``B`` carries the last ``l`` chips into rows
    ``0..l-1``.  ``A @ x`` and ``B @ x`` together reassemble the portion of the
    previous/current codeword seen inside one pulse repetition interval.
    """
    if not (0 <= m < M):
        raise ScenarioError(f"antenna index m={m} outside [0, {M})")
    l = (nu + i) % N
    A = np.zeros((N, M * N))
    B = np.zeros((N, M * N))
    if l < N:
        A[l:, m * N : m * N + (N - l)] = np.eye(N - l)
    if l > 0:
        B[:l, (m + 1) * N - l : (m + 1) * N] = np.eye(l)
    return A, B


@dataclass(eq=False)
class RadarParams:
    """Pulsed radar side of the scenario.

    ``q`` is the transmit code (length ``L <= N``, normalized so that
    ``||q||^2 = N``); ``N`` is the pulse repetition interval in chips.
    ``sigma2_g`` and ``rho`` map each protected cell to its target-gain
    variance and SDR threshold (linear).  ``sigma2_gamma`` is the dense
    ``(N, J)`` clutter-gain variance table.
    """

    q: np.ndarray
    N: int
    P_r_max: float
    P_u: float
    J: int
    sigma2_g: dict[Cell, float]
    sigma2_gamma: np.ndarray
    cells: tuple[Cell, ...]
    rho: dict[Cell, float]

    @property
    def L(self) -> int:
        return int(np.asarray(self.q).size)


@dataclass(eq=False)
class CommParams:
    """MIMO communication side: channel, power budget, noise, radar-into-comm stats.

    ``sigma2_alpha[i]`` is the K x K covariance of the radar interference gains
    arriving at the comm receiver with chip shift ``i`` (sparse; missing = 0).
    ``sigma2_h`` is the per-entry channel variance used when a scenario is
    redrawn; it is not consulted by any metric.
    """

    H: np.ndarray
    P_c_max: float
    P_v: float
    sigma2_alpha: dict[int, np.ndarray]
    sigma2_h: float | None = None

    @property
    def K(self) -> int:
        return int(self.H.shape[0])

    @property
    def M(self) -> int:
        return int(self.H.shape[1])


@dataclass(eq=False)
class CrossInterference:
    """Comm-into-radar second-order statistics.

    ``sigma2_beta[(i, j)]`` is the M x M Hermitian PSD covariance of the comm
    interference gains hitting beam ``j`` with chip shift ``i`` (sparse).
    """

    sigma2_beta: dict[tuple[int, int], np.ndarray]


@dataclass(eq=False)
class Scenario:
    """One complete coexistence instance (validated via :func:`validate_scenario`)."""

    radar: RadarParams
    comm: CommParams
    cross: CrossInterference
    nu: int = 0

    _shifts: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)
    _clutter: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def shifted_codes(self) -> np.ndarray:
        """``(N, N)`` matrix whose column ``i`` is the shifted code ``q_i`` (cached)."""
        if self._shifts is None:
            q0 = shifted_code(self.radar.q, 0, self.radar.N)
            self._shifts = la.circulant(q0)
        return self._shifts

    def clutter_gram(self, j: int) -> np.ndarray:
        """Unit-power clutter covariance ``sum_i sigma2_gamma[i,j] q_i q_i^H`` (cached)."""
        if j not in self._clutter:
            Q = self.shifted_codes()
            w = self.radar.sigma2_gamma[:, j]
            self._clutter[j] = herm((Q * w) @ Q.conj().T)
        return self._clutter[j]

    def beams(self) -> tuple[int, ...]:
        """Beam indices that contain at least one protected cell."""
        return tuple(sorted({j for _, j in self.radar.cells}))

    def cells_in_beam(self, j: int) -> tuple[Cell, ...]:
        return tuple(c for c in self.radar.cells if c[1] == j)

    def beta_entries(self, j: int) -> tuple[tuple[int, np.ndarray], ...]:
        """Sorted ``(i, slice)`` pairs of non-zero sigma2_beta entries for beam ``j``."""
        items = [(i, m) for (i, jj), m in self.cross.sigma2_beta.items() if jj == j]
        return tuple(sorted(items, key=lambda t: t[0]))


@dataclass(eq=False)
class DesignVariables:
    """A transceiver design: codeword covariance, radar power, receive filters."""

    C: np.ndarray
    P_r: float
    filters: dict[Cell, np.ndarray]


def protected_cell_grid(N: int, L: int, J: int) -> tuple[Cell, ...]:
    """All ``(N - L + 1) * J`` cells the radar can protect without code wrap-around."""
    return tuple((n, j) for n in range(N - L + 1) for j in range(J))


def _check_psd_slice(mat: np.ndarray, shape: tuple[int, int], what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != shape:
        raise ScenarioError(f"{what}: expected shape {shape}, got {mat.shape}")
    if not np.all(np.isfinite(mat.view(float))):
        raise ScenarioError(f"{what}: non-finite entries")
    if not is_hermitian(mat):
        raise ScenarioError(f"{what}: not Hermitian")
    mat = herm(mat)
    lam = np.linalg.eigvalsh(mat)
    if lam[0] < -1e-10 * max(lam[-1], np.finfo(float).tiny):
        raise ScenarioError(f"{what}: not positive semidefinite (min eig {lam[0]:.3e})")
    return mat


def validate_scenario(s: Scenario) -> Scenario:
    """Check every structural invariant and return a normalized copy.

    * the code is renormalized exactly to ``||q||^2 = N`` if within 1%, and
      rejected otherwise;
    * cells are de-duplicated, bounds-checked against the ``(N-L+1) x J`` grid,
      and sorted; per-cell maps must cover exactly the cell set;
    * sparse covariance slices are checked Hermitian PSD and symmetrized;
    * ``nu`` is reduced modulo ``N``.
    """
    r, c, x = s.radar, s.comm, s.cross

    q = np.asarray(r.q, dtype=complex).ravel()
    N, J = int(r.N), int(r.J)
    if N < 1 or J < 1:
        raise ScenarioError("N and J must be positive")
    if not (1 <= q.size <= N):
        raise ScenarioError(f"code length {q.size} outside [1, N={N}]")
    if not np.all(np.isfinite(q.view(float))):
        raise ScenarioError("code has non-finite entries")
    energy = float(np.real(q.conj() @ q))
    if energy <= 0.0:
        raise ScenarioError("code has zero energy")
    if abs(energy - N) > _CODE_NORM_SLACK * N:
        raise ScenarioError(
            f"||q||^2 = {energy:.6g} is more than 1% away from N = {N}; "
            "rescale the code explicitly"
        )
    q = q * math.sqrt(N / energy)

    for name, val in [("P_r_max", r.P_r_max), ("P_u", r.P_u),
                      ("P_c_max", c.P_c_max), ("P_v", c.P_v)]:
        if not (np.isfinite(val) and val > 0):
            raise ScenarioError(f"{name} must be positive and finite, got {val!r}")

    gamma = np.asarray(r.sigma2_gamma, dtype=float)
    if gamma.shape != (N, J):
        raise ScenarioError(f"sigma2_gamma: expected shape {(N, J)}, got {gamma.shape}")
    if not np.all(np.isfinite(gamma)) or np.any(gamma < 0):
        raise ScenarioError("sigma2_gamma entries must be finite and >= 0")

    cells = tuple(sorted({(int(n), int(j)) for n, j in r.cells}))
    if not cells:
        raise ScenarioError("at least one protected cell is required")
    n_max = N - q.size
    for n, j in cells:
        if not (0 <= n <= n_max and 0 <= j < J):
            raise ScenarioError(f"cell {(n, j)} outside the (N-L+1) x J grid")
    for name, table in [("sigma2_g", r.sigma2_g), ("rho", r.rho)]:
        keys = {(int(n), int(j)) for n, j in table}
        if keys != set(cells):
            raise ScenarioError(f"{name} keys must match the protected cell set exactly")
        for v in table.values():
            if not (np.isfinite(v) and v > 0):
                raise ScenarioError(f"{name} values must be positive and finite")

    H = np.asarray(c.H, dtype=complex)
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] < 1:
        raise ScenarioError(f"H must be a K x M matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H.view(float))):
        raise ScenarioError("H has non-finite entries")
    K, M = H.shape

    alpha = {}
    for i, mat in c.sigma2_alpha.items():
        i = int(i)
        if not (0 <= i < N):
            raise ScenarioError(f"sigma2_alpha index {i} outside [0, N)")
        alpha[i] = _check_psd_slice(mat, (K, K), f"sigma2_alpha[{i}]")

    beta = {}
    for (i, j), mat in x.sigma2_beta.items():
        i, j = int(i), int(j)
        if not (0 <= i < N and 0 <= j < J):
            raise ScenarioError(f"sigma2_beta index {(i, j)} outside the N x J grid")
        beta[(i, j)] = _check_psd_slice(mat, (M, M), f"sigma2_beta[{(i, j)}]")

    sigma2_h = None if c.sigma2_h is None else float(c.sigma2_h)
    if sigma2_h is not None and not (np.isfinite(sigma2_h) and sigma2_h >= 0):
        raise ScenarioError("sigma2_h must be >= 0")

    radar = RadarParams(
        q=q, N=N, P_r_max=float(r.P_r_max), P_u=float(r.P_u), J=J,
        sigma2_g={(int(n), int(j)): float(v) for (n, j), v in r.sigma2_g.items()},
        sigma2_gamma=gamma, cells=cells,
        rho={(int(n), int(j)): float(v) for (n, j), v in r.rho.items()},
    )
    comm = CommParams(H=H, P_c_max=float(c.P_c_max), P_v=float(c.P_v),
                      sigma2_alpha=alpha, sigma2_h=sigma2_h)
    return Scenario(radar=radar, comm=comm, cross=CrossInterference(beta),
                    nu=int(s.nu) % N)


def random_scenario(template: Scenario, delta: float, sigma2: float, seed) -> Scenario:
    """Draw one Monte-Carlo instance from ``template``.

    ``ceil(delta * N)`` chip shifts are drawn uniformly without replacement for
    the radar-into-comm statistics (``sigma2_alpha[i] = sigma2 * I_K``), and an
    *independent* subset per beam for the comm-into-radar statistics
    (``sigma2_beta[(i, j)] = sigma2 * I_M``).  ``H`` is redrawn circularly
    symmetric complex Gaussian with per-entry variance ``sigma2_h`` when the
    template provides one.  Deterministic given ``seed``.
    """
    if not (0.0 <= delta <= 1.0):
        raise ScenarioError(f"delta must lie in [0, 1], got {delta}")
    if sigma2 < 0:
        raise ScenarioError(f"sigma2 must be >= 0, got {sigma2}")
    rng = np.random.default_rng(seed)
    r, c = template.radar, template.comm
    N, J, K, M = r.N, r.J, c.K, c.M
    n_draw = math.ceil(delta * N)

    alpha: dict[int, np.ndarray] = {}
    beta: dict[tuple[int, int], np.ndarray] = {}
    if sigma2 > 0 and n_draw > 0:
        for i in np.sort(rng.choice(N, size=n_draw, replace=False)):
            alpha[int(i)] = sigma2 * np.eye(K, dtype=complex)
        for j in range(J):
            for i in np.sort(rng.choice(N, size=n_draw, replace=False)):
                beta[(int(i), j)] = sigma2 * np.eye(M, dtype=complex)

    H = c.H
    if c.sigma2_h is not None and c.sigma2_h > 0:
        H = math.sqrt(c.sigma2_h / 2.0) * (
            rng.standard_normal((K, M)) + 1j * rng.standard_normal((K, M))
        )

    out = Scenario(
        radar=dataclasses.replace(r),
        comm=CommParams(H=H, P_c_max=c.P_c_max, P_v=c.P_v,
                        sigma2_alpha=alpha, sigma2_h=c.sigma2_h),
        cross=CrossInterference(beta),
        nu=template.nu,
    )
    return validate_scenario(out)


def restrict_cells(s: Scenario, cells) -> Scenario:
    """Copy of ``s`` protecting only ``cells`` (which must already be protected)."""
    cells = tuple(sorted({(int(n), int(j)) for n, j in cells}))
    missing = [c for c in cells if c not in s.radar.sigma2_g]
    if missing:
        raise ScenarioError(f"cells {missing} are not in the scenario")
    radar = dataclasses.replace(
        s.radar, cells=cells,
        sigma2_g={c: s.radar.sigma2_g[c] for c in cells},
        rho={c: s.radar.rho[c] for c in cells},
    )
    return Scenario(radar=radar, comm=s.comm, cross=s.cross, nu=s.nu)


def with_thresholds(s: Scenario, rho: float) -> Scenario:
    """Copy of ``s`` with a uniform linear SDR threshold on every protected cell."""
    if not (np.isfinite(rho) and rho > 0):
        raise ScenarioError(f"rho must be positive, got {rho}")
    radar = dataclasses.replace(s.radar, rho={c: float(rho) for c in s.radar.cells})
    return Scenario(radar=radar, comm=s.comm, cross=s.cross, nu=s.nu)


def strip_interference(s: Scenario) -> Scenario:
    """Copy of ``s`` with all cross-system statistics zeroed (isolated systems)."""
    comm = dataclasses.replace(s.comm, sigma2_alpha={})
    return Scenario(radar=s.radar, comm=comm, cross=CrossInterference({}), nu=s.nu)


def default_scenario(rho_db: float = 0.0) -> Scenario:
    """Built-in reference scenario: a Barker-coded surveillance radar plus a 2x2 link.

    100-chip pulse repetition interval carrying a length-5 Barker code scaled to
    ``||q||^2 = N``; 3 beams with every one of the 96 x 3 cells protected at a
    common threshold ``rho_db``; 25 W peak radar power against -136.2 dBW noise
    floors; clutter 10 dB below the target-gain variance (7 dB clutter-to-noise
    ratio at full power); a 10 mW, 2x2 Rayleigh link whose per-entry channel
    variance gives 21 dB mean SNR.  Cross-interference statistics start empty:
    draw them with :func:`random_scenario`.
    """
    N, J, M, K = 100, 3, 2, 2
    barker = np.array([1.0, 1.0, 1.0, -1.0, 1.0], dtype=complex)
    q = math.sqrt(N / barker.size) * barker
    cells = protected_cell_grid(N, barker.size, J)
    rho = 10.0 ** (rho_db / 10.0)
    radar = RadarParams(
        q=q, N=N, P_r_max=25.0, P_u=2.39e-14, J=J,
        sigma2_g={cell: 4.8e-16 for cell in cells},
        sigma2_gamma=np.full((N, J), 4.8e-17),
        cells=cells,
        rho={cell: rho for cell in cells},
    )
    comm = CommParams(
        H=np.zeros((K, M), dtype=complex),
        P_c_max=0.01, P_v=2.39e-14,
        sigma2_alpha={}, sigma2_h=3e-10,
    )
    return validate_scenario(
        Scenario(radar=radar, comm=comm, cross=CrossInterference({}), nu=0)
    )


# ---------------------------------------------------------------------------
# JSON serialization.  Complex numbers are [re, im] pairs at the innermost
# nesting level; sparse covariance tables are lists of {index..., "matrix"}.
# ---------------------------------------------------------------------------

def _c2l(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _l2c(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != 2:
        raise ScenarioError("complex arrays must be nested [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def scenario_to_dict(s: Scenario) -> dict:
    r, c, x = s.radar, s.comm, s.cross
    cells = [list(cell) for cell in r.cells]
    return {
        "schema": SCENARIO_SCHEMA,
        "nu": int(s.nu),
        "radar": {
            "q": _c2l(r.q),
            "N": int(r.N),
            "P_r_max": r.P_r_max,
            "P_u": r.P_u,
            "J": int(r.J),
            "cells": cells,
            "sigma2_g": [r.sigma2_g[cell] for cell in r.cells],
            "rho": [r.rho[cell] for cell in r.cells],
            "sigma2_gamma": np.asarray(r.sigma2_gamma, dtype=float).tolist(),
        },
        "comm": {
            "H": _c2l(c.H),
            "P_c_max": c.P_c_max,
            "P_v": c.P_v,
            "sigma2_h": c.sigma2_h,
            "sigma2_alpha": [
                {"i": int(i), "matrix": _c2l(c.sigma2_alpha[i])}
                for i in sorted(c.sigma2_alpha)
            ],
        },
        "cross": {
            "sigma2_beta": [
                {"i": int(i), "j": int(j), "matrix": _c2l(x.sigma2_beta[(i, j)])}
                for (i, j) in sorted(x.sigma2_beta)
            ],
        },
    }


def scenario_from_dict(d: dict) -> Scenario:
    if not isinstance(d, dict) or d.get("schema") != SCENARIO_SCHEMA:
        raise ScenarioError(
            f"missing or unsupported schema field (expected {SCENARIO_SCHEMA!r}, "
            f"got {d.get('schema') if isinstance(d, dict) else type(d).__name__!r})"
        )
    try:
        rd, cd, xd = d["radar"], d["comm"], d["cross"]
        cells = tuple((int(n), int(j)) for n, j in rd["cells"])
        radar = RadarParams(
            q=_l2c(rd["q"]),
            N=int(rd["N"]),
            P_r_max=float(rd["P_r_max"]),
            P_u=float(rd["P_u"]),
            J=int(rd["J"]),
            sigma2_g=dict(zip(cells, map(float, rd["sigma2_g"]))),
            sigma2_gamma=np.asarray(rd["sigma2_gamma"], dtype=float),
            cells=cells,
            rho=dict(zip(cells, map(float, rd["rho"]))),
        )
        comm = CommParams(
            H=_l2c(cd["H"]),
            P_c_max=float(cd["P_c_max"]),
            P_v=float(cd["P_v"]),
            sigma2_alpha={int(e["i"]): _l2c(e["matrix"]) for e in cd["sigma2_alpha"]},
            sigma2_h=None if cd.get("sigma2_h") is None else float(cd["sigma2_h"]),
        )
        cross = CrossInterference(
            {(int(e["i"]), int(e["j"])): _l2c(e["matrix"]) for e in xd["sigma2_beta"]}
        )
        nu = int(d["nu"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from exc
    return validate_scenario(Scenario(radar=radar, comm=comm, cross=cross, nu=nu))


def scenario_to_json(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=2, sort_keys=True)


def save_scenario(s: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(scenario_to_json(s))
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
