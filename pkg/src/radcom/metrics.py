"""Design metrics: mutual information, per-cell SDR, and linearized constraints.

The two central objects are :class:`WhitenedChannel` (the comm channel seen
through the inverse square root of the radar-plus-noise disturbance, so the
rate is ``log det(I + F C F^H)``) and :class:`ConstraintSet` (the per-cell SDR
requirements written as ``trace(E_l C) <= a_l`` for a fixed filter bank and
radar power, plus the total-power row).

``ConstraintSet`` keeps a compact factor form of every ``E_l`` -- the shifted
filter pieces and the M x M interference slice per active chip shift -- so
trace evaluations and ``E_l @ X`` products cost far less than dense
``MN x MN`` algebra.  Dense matrices are materialized only on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import InfeasibleError
from .model import Cell, Scenario
from .numerics import herm, logdet_hpd

__all__ = [
    "WhitenedChannel",
    "ConstraintSet",
    "whitened_channel",
    "mutual_information",
    "data_interference",
    "disturbance_matrix",
    "sdr",
    "sdr_map",
    "constraint_coefficients",
    "max_feasible_rho",
]

_LN2 = math.log(2.0)


# ---------------------------------------------------------------------------
# whitened channel and mutual information
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class WhitenedChannel:
    """Comm channel after whitening by the radar-interference-plus-noise covariance.

    ``F`` is ``(K*N, M*N)``; ``gram = F^H F`` is cached because every codebook
    iteration consumes it.  ``N`` is kept for the per-chip rate normalization.
    """

    F: np.ndarray
    gram: np.ndarray
    P_r: float
    N: int

    @property
    def MN(self) -> int:
        return int(self.F.shape[1])

    def mutual_information(self, C: np.ndarray) -> float:
        """``log2 det(I + F C F^H) / N``, bits per channel use."""
        KN = self.F.shape[0]
        FC = self.F @ np.asarray(C, dtype=complex)
        inner = herm(np.eye(KN) + FC @ self.F.conj().T)
        return logdet_hpd(inner) / (self.N * _LN2)


def whitened_channel(P_r: float, s: Scenario) -> WhitenedChannel:
    """Whitener applied to the block channel ``H (x) I_N``.

    The disturbance covariance is ``P_r * sum_i Sigma_alpha[i] (x) q_i q_i^H
    + P_v I``, assembled over the non-zero ``sigma2_alpha`` slices only.  The
    interference part alone is eigendecomposed and the noise power added to
    its (clipped-at-zero) eigenvalues afterwards: the interference may sit
    fifteen-plus orders of magnitude above the noise floor, and whitening the
    summed matrix directly would destroy exactly the quiet modes that end up
    carrying the communication rate.
    """
    r, c = s.radar, s.comm
    N, K = r.N, c.K
    Q = s.shifted_codes()
    KN = K * N
    if P_r > 0 and c.sigma2_alpha:
        W = np.zeros((KN, KN), dtype=complex)
        for i in sorted(c.sigma2_alpha):
            qi = Q[:, i]
            W += P_r * np.kron(c.sigma2_alpha[i], np.outer(qi, qi.conj()))
        lam, vec = np.linalg.eigh(herm(W))
        lam[lam < KN * np.finfo(float).eps * max(lam[-1], 0.0)] = 0.0
        root = herm((vec / np.sqrt(lam + c.P_v)) @ vec.conj().T)
    else:
        root = (1.0 / math.sqrt(c.P_v)) * np.eye(KN)
    F = root @ np.kron(c.H, np.eye(N))
    gram = herm(F.conj().T @ F)
    return WhitenedChannel(F=F, gram=gram, P_r=float(P_r), N=N)


def mutual_information(C: np.ndarray, P_r: float, s: Scenario) -> float:
    """Average mutual information of the comm link under radar interference, bits/use.

    One-shot convenience wrapper; loops should build :func:`whitened_channel`
    once and call its method.
    """
    return whitened_channel(P_r, s).mutual_information(C)


# ---------------------------------------------------------------------------
# radar-side disturbance and SDR
# ---------------------------------------------------------------------------

def _weighted_block_sum(C: np.ndarray, S: np.ndarray, N: int, M: int) -> np.ndarray:
    """``sum_{m,m'} S[m, m'] C[m, m']`` over the N x N blocks of ``C``."""
    out = np.zeros((N, N), dtype=complex)
    for m in range(M):
        for mp in range(M):
            w = S[m, mp]
            if w != 0:
                out += w * C[m * N:(m + 1) * N, mp * N:(mp + 1) * N]
    return out


def _block_diag_sum(C: np.ndarray, N: int, M: int) -> np.ndarray:
    """``sum_m C[m, m]`` over the diagonal N x N blocks of ``C``."""
    out = np.zeros((N, N), dtype=complex)
    for m in range(M):
        out += C[m * N:(m + 1) * N, m * N:(m + 1) * N]
    return out


def _iso_weight(S: np.ndarray) -> float | None:
    """The scalar ``s`` if ``S == s * I`` exactly, else None."""
    d = np.diag(S)
    if np.all(S == np.diag(d)) and np.all(d == d[0]) and d[0].imag == 0.0:
        return float(d[0].real)
    return None


def _shift_entries(entries, nu: int, N: int):
    """Normalize per-beam slices to ``(l, iso_weight_or_None, S)`` tuples."""
    return tuple((int((nu + i) % N), _iso_weight(S), S) for i, S in entries)


def _beam_interference(shift_entries, Csum: np.ndarray, C: np.ndarray | None,
                       N: int, M: int) -> np.ndarray:
    """Interference covariance of one beam from the codeword covariance blocks.

    Each active shift ``l`` contributes a two-block diagonal: the last ``l``
    chips of the previous codeword and the first ``N - l`` of the current one.
    Identity-weighted slices only need ``Csum = sum_m C[m, m]``; general slices
    need the full ``C``.
    """
    T = np.zeros((N, N), dtype=complex)
    for l, iso, S in shift_entries:
        Cw = iso * Csum if iso is not None else _weighted_block_sum(C, S, N, M)
        T[:l, :l] += Cw[N - l:, N - l:]
        T[l:, l:] += Cw[:N - l, :N - l]
    return T


def data_interference(j: int, C: np.ndarray, s: Scenario) -> np.ndarray:
    """Comm-codeword interference covariance at beam ``j`` for codeword covariance ``C``."""
    N, M = s.radar.N, s.comm.M
    entries = s.beta_entries(j)
    if not entries:
        return np.zeros((N, N), dtype=complex)
    C = np.asarray(C, dtype=complex)
    Csum = _block_diag_sum(C, N, M)
    return herm(_beam_interference(_shift_entries(entries, s.nu, N), Csum, C, N, M))


def disturbance_matrix(j: int, C: np.ndarray, P_r: float, s: Scenario) -> np.ndarray:
    """Total disturbance at beam ``j``: clutter at power ``P_r``, comm codewords, noise."""
    N = s.radar.N
    D = P_r * s.clutter_gram(j) + data_interference(j, C, s)
    D[np.diag_indices(N)] += s.radar.P_u
    return herm(D)


def sdr(n: int, j: int, C: np.ndarray, P_r: float, w: np.ndarray, s: Scenario) -> float:
    """Signal-to-disturbance ratio at cell ``(n, j)`` under receive filter ``w``."""
    qn = s.shifted_codes()[:, n]
    D = disturbance_matrix(j, C, P_r, s)
    num = P_r * s.radar.sigma2_g[(n, j)] * abs(np.vdot(w, qn)) ** 2
    den = float(np.real(np.vdot(w, D @ w)))
    return num / den


def sdr_map(C: np.ndarray, P_r: float, filters: dict[Cell, np.ndarray],
            s: Scenario) -> dict[Cell, float]:
    """SDR at every protected cell; builds each beam's disturbance matrix once."""
    Q = s.shifted_codes()
    out: dict[Cell, float] = {}
    for j in s.beams():
        D = disturbance_matrix(j, C, P_r, s)
        for cell in s.cells_in_beam(j):
            w = filters[cell]
            num = P_r * s.radar.sigma2_g[cell] * abs(np.vdot(w, Q[:, cell[0]])) ** 2
            den = float(np.real(np.vdot(w, D @ w)))
            out[cell] = num / den
    return out


# ---------------------------------------------------------------------------
# linearized SDR constraints:  trace(E_l C) <= a_l
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class _CellFactor:
    """Compact form of one cell's constraint matrix.

    ``E = sum_i kron(S_i^T, u_i u_i^H + v_i v_i^H)`` where ``u_i``/``v_i`` are
    the filter pieces aligned with the current/previous codeword at shift
    ``l_i``: ``u_i = (w[l:], 0)``, ``v_i = (0, w[:l])``.  ``iso`` holds the
    scalar weights when every slice is a multiple of the identity (the common
    case), enabling evaluations through ``sum_m C[m, m]`` alone.
    """

    slices: np.ndarray          # (n_i, M, M)
    cols_a: np.ndarray          # (N, n_i)
    cols_b: np.ndarray          # (N, n_i)
    iso: np.ndarray | None      # (n_i,) scalar weights, or None
    N: int
    M: int

    def trace_e(self) -> float:
        """``trace(E) = sum_i trace(S_i) * (||u_i||^2 + ||v_i||^2)``."""
        tr_s = np.trace(self.slices, axis1=1, axis2=2).real
        norms = (np.abs(self.cols_a) ** 2).sum(0) + (np.abs(self.cols_b) ** 2).sum(0)
        return float(tr_s @ norms)

    def trace_c(self, C: np.ndarray | None, Csum: np.ndarray) -> float:
        """``trace(E C)`` given full ``C`` (general slices) or its block-diagonal sum."""
        if self.iso is not None:
            qa = np.einsum("ni,ni->i", self.cols_a.conj(), Csum @ self.cols_a).real
            qb = np.einsum("ni,ni->i", self.cols_b.conj(), Csum @ self.cols_b).real
            return float(self.iso @ (qa + qb))
        N, M = self.N, self.M
        total = 0.0
        for m in range(M):
            for mp in range(M):
                Cb = C[m * N:(m + 1) * N, mp * N:(mp + 1) * N]
                da = np.einsum("ni,ni->i", self.cols_a.conj(), Cb @ self.cols_a)
                db = np.einsum("ni,ni->i", self.cols_b.conj(), Cb @ self.cols_b)
                total += float(np.real(self.slices[:, m, mp] @ (da + db)))
        return total

    def apply(self, X: np.ndarray, out: np.ndarray, scale: float) -> None:
        """Accumulate ``scale * E @ X`` into ``out``."""
        N, M = self.N, self.M
        ta = [self.cols_a.conj().T @ X[c * N:(c + 1) * N] for c in range(M)]
        tb = [self.cols_b.conj().T @ X[c * N:(c + 1) * N] for c in range(M)]
        for r in range(M):
            if self.iso is not None:
                wa = self.iso[:, None] * ta[r]
                wb = self.iso[:, None] * tb[r]
            else:
                wa = sum(self.slices[:, c, r][:, None] * ta[c] for c in range(M))
                wb = sum(self.slices[:, c, r][:, None] * tb[c] for c in range(M))
            out[r * N:(r + 1) * N] += scale * (self.cols_a @ wa + self.cols_b @ wb)

    def quad_forms(self, V: np.ndarray) -> np.ndarray:
        """``diag(V^H E V)`` (real, length D) for an ``MN x D`` matrix ``V``."""
        N, M = self.N, self.M
        ta = np.stack([self.cols_a.conj().T @ V[c * N:(c + 1) * N] for c in range(M)])
        tb = np.stack([self.cols_b.conj().T @ V[c * N:(c + 1) * N] for c in range(M)])
        if self.iso is not None:
            return np.einsum("i,cid->d", self.iso,
                             np.abs(ta) ** 2 + np.abs(tb) ** 2)
        va = np.einsum("icr,cid,rid->d", self.slices, ta, ta.conj())
        vb = np.einsum("icr,cid,rid->d", self.slices, tb, tb.conj())
        return np.real(va + vb)

    def matrix(self) -> np.ndarray:
        """Dense ``MN x MN`` constraint matrix (small scenarios / tests only)."""
        MN = self.M * self.N
        E = np.zeros((MN, MN), dtype=complex)
        for idx in range(self.slices.shape[0]):
            ua = self.cols_a[:, idx]
            ub = self.cols_b[:, idx]
            Y = np.outer(ua, ua.conj()) + np.outer(ub, ub.conj())
            E += np.kron(self.slices[idx].T, Y)
        return herm(E)


def _build_factor(w: np.ndarray, entries, nu: int, N: int, M: int) -> _CellFactor:
    n_i = len(entries)
    slices = np.zeros((n_i, M, M), dtype=complex)
    cols_a = np.zeros((N, n_i), dtype=complex)
    cols_b = np.zeros((N, n_i), dtype=complex)
    iso = np.zeros(n_i)
    all_iso = True
    for idx, (i, S) in enumerate(entries):
        l = (nu + i) % N
        cols_a[:N - l, idx] = w[l:]
        cols_b[N - l:, idx] = w[:l]
        slices[idx] = S
        weight = _iso_weight(S)
        if weight is None:
            all_iso = False
        else:
            iso[idx] = weight
    return _CellFactor(slices=slices, cols_a=cols_a, cols_b=cols_b,
                       iso=iso if all_iso else None, N=N, M=M)


@dataclass(eq=False)
class ConstraintSet:
    """Linear-in-``C`` form of the SDR constraints plus the total-power row.

    Row ``l < U-1`` belongs to ``cells[l]``; the final row is the power budget
    ``trace(C) <= N * P_c_max`` with ``E = I``.  ``a`` is guaranteed
    non-negative (``C = 0`` is always feasible).

    Trace evaluations route through per-beam interference matrices --
    ``trace(E_l C) = w_l^H T_j(C) w_l`` with ``T_j`` shared by every cell of
    beam ``j`` -- which is what keeps the inner solver loops affordable when
    hundreds of cells are protected.
    """

    a: np.ndarray
    cells: tuple[Cell | None, ...]
    factors: tuple[_CellFactor | None, ...]
    row_w: tuple[np.ndarray | None, ...]
    row_beam: tuple[int | None, ...]
    beam_entries: dict[int, tuple]
    N: int
    M: int

    _dense: list | None = field(default=None, init=False, repr=False, compare=False)
    _ycache: dict | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def U(self) -> int:
        return len(self.a)

    @property
    def MN(self) -> int:
        return self.N * self.M

    def traces(self) -> np.ndarray:
        """``trace(E_l)`` for every row."""
        return np.array([self.MN if f is None else f.trace_e() for f in self.factors])

    def _beam_maps(self, Csum: np.ndarray, C: np.ndarray | None) -> dict[int, np.ndarray]:
        return {j: _beam_interference(se, Csum, C, self.N, self.M)
                for j, se in self.beam_entries.items()}

    def _row_values(self, Csum: np.ndarray, C: np.ndarray | None,
                    power_value: float) -> np.ndarray:
        tmap = self._beam_maps(Csum, C)
        out = np.empty(self.U)
        for l in range(self.U):
            w = self.row_w[l]
            if w is None:
                out[l] = power_value
            else:
                out[l] = float(np.real(np.vdot(w, tmap[self.row_beam[l]] @ w)))
        return out

    def trace_values(self, C: np.ndarray) -> np.ndarray:
        """``trace(E_l C)`` for every row, given Hermitian ``C``."""
        C = np.asarray(C, dtype=complex)
        Csum = _block_diag_sum(C, self.N, self.M)
        need_full = any(iso is None for se in self.beam_entries.values()
                        for _, iso, _ in se)
        return self._row_values(Csum, C if need_full else None,
                                float(np.trace(Csum).real))

    def trace_values_factor(self, X: np.ndarray) -> np.ndarray:
        """``trace(X^H E_l X)`` for every row, avoiding full ``C`` when possible."""
        N, M = self.N, self.M
        flat = X.reshape(M, N, -1).transpose(1, 0, 2).reshape(N, -1)
        Csum = flat @ flat.conj().T
        need_full = any(iso is None for se in self.beam_entries.values()
                        for _, iso, _ in se)
        C = X @ X.conj().T if need_full else None
        return self._row_values(Csum, C, float(np.sum(np.abs(X) ** 2)))

    def _row_y(self, l: int) -> np.ndarray:
        """Dense ``N x N`` core of an identity-weighted row: ``E_l = I_M (x) Y_l``."""
        if self._ycache is None:
            self._ycache = {}
        y = self._ycache.get(l)
        if y is None:
            N = self.N
            w = self.row_w[l]
            y = np.zeros((N, N), dtype=complex)
            for lshift, iso, _s in self.beam_entries[self.row_beam[l]]:
                u = w[lshift:]
                y[:N - lshift, :N - lshift] += iso * np.outer(u, u.conj())
                if lshift:
                    v = w[:lshift]
                    y[N - lshift:, N - lshift:] += iso * np.outer(v, v.conj())
            self._ycache[l] = y
        return y

    def apply_rows(self, X: np.ndarray, rows, scales) -> np.ndarray:
        """``sum_l scales[l] * E_l @ X`` over the selected rows.

        Identity-weighted rows are merged into a single ``N x N`` core before
        touching ``X``, so the cost is one block multiply however many rows
        are selected.
        """
        out = np.zeros_like(X)
        ysum = None
        for l, scale in zip(rows, scales):
            f = self.factors[l]
            if f is None:
                out += scale * X
            elif f.iso is not None:
                y = self._row_y(l)
                ysum = scale * y if ysum is None else ysum + scale * y
            else:
                f.apply(X, out, scale)
        if ysum is not None:
            Xr = X.reshape(self.M, self.N, -1)
            out += np.matmul(ysum, Xr).reshape(X.shape)
        return out

    def quad_forms(self, V: np.ndarray) -> np.ndarray:
        """``(U, D)`` array of ``diag(V^H E_l V)`` values (real, non-negative)."""
        out = np.empty((self.U, V.shape[1]))
        for l, f in enumerate(self.factors):
            if f is None:
                out[l] = np.sum(np.abs(V) ** 2, axis=0)
            else:
                out[l] = f.quad_forms(V)
        return np.maximum(out, 0.0)

    def matrix(self, l: int) -> np.ndarray:
        """Dense ``E_l``; materialized on demand."""
        f = self.factors[l]
        if f is None:
            return np.eye(self.MN, dtype=complex)
        return f.matrix()

    @property
    def E(self) -> list:
        """All dense constraint matrices (cached; intended for small instances)."""
        if self._dense is None:
            self._dense = [self.matrix(l) for l in range(self.U)]
        return self._dense


def constraint_coefficients(filters: dict[Cell, np.ndarray], P_r: float,
                            s: Scenario) -> ConstraintSet:
    """Freeze the SDR constraints at a filter bank and radar power.

    For cell ``(n, j)`` with filter ``w``::

        a = (P_r * sigma2_g / rho) |w^H q_n|^2
            - P_r * sum_i sigma2_gamma[i, j] |w^H q_i|^2 - P_u ||w||^2

    and ``E`` collects the codeword-interference quadratic form, so that
    ``trace(E C) <= a``  iff  ``SDR(n, j) >= rho`` at this ``(w, P_r)``.
    A final row encodes ``trace(C) <= N * P_c_max``.  Raises
    :class:`InfeasibleError` if some ``a`` is negative beyond round-off
    (the filters cannot meet the threshold even with ``C = 0``).
    """
    r = s.radar
    N, M = r.N, s.comm.M
    Q = s.shifted_codes()
    beam_entries = {j: _shift_entries(s.beta_entries(j), s.nu, N) for j in s.beams()}
    a_rows: list[float] = []
    cells: list[Cell | None] = []
    factors: list[_CellFactor | None] = []
    row_w: list[np.ndarray | None] = []
    row_beam: list[int | None] = []
    for cell in r.cells:
        n, j = cell
        w = np.asarray(filters[cell], dtype=complex)
        rho = r.rho[cell]
        match = abs(np.vdot(w, Q[:, n])) ** 2
        resp = np.abs(Q.conj().T @ w) ** 2
        clutter = float(resp @ r.sigma2_gamma[:, j])
        norm2 = float(np.real(np.vdot(w, w)))
        gain = P_r * r.sigma2_g[cell] * match / rho
        a_val = gain - P_r * clutter - r.P_u * norm2
        scale = gain + P_r * clutter + r.P_u * norm2
        if a_val < 0.0:
            if a_val >= -1e-9 * scale:
                a_val = 0.0
            else:
                raise InfeasibleError(
                    f"filters cannot reach the SDR threshold at cell {cell} "
                    f"(margin {a_val:.3e} W)", cell=cell)
        a_rows.append(a_val)
        cells.append(cell)
        factors.append(_build_factor(w, s.beta_entries(j), s.nu, N, M))
        row_w.append(w)
        row_beam.append(j)
    a_rows.append(N * s.comm.P_c_max)
    cells.append(None)
    factors.append(None)
    row_w.append(None)
    row_beam.append(None)
    return ConstraintSet(a=np.array(a_rows), cells=tuple(cells),
                         factors=tuple(factors), row_w=tuple(row_w),
                         row_beam=tuple(row_beam), beam_entries=beam_entries,
                         N=N, M=M)


def max_feasible_rho(s: Scenario) -> dict[Cell, float]:
    """Largest supportable SDR threshold per protected cell, in dB.

    At full radar power with no comm transmission the best filter is the
    whitened matched filter against clutter plus noise; the attainable SDR is
    ``P_r_max * sigma2_g * q_n^H (P_r_max * clutter + P_u I)^{-1} q_n``.
    The joint design is feasible at thresholds ``rho`` iff ``rho`` is below
    this bound at every cell (the comm system can always fall silent).
    """
    r = s.radar
    Q = s.shifted_codes()
    out: dict[Cell, float] = {}
    for j in s.beams():
        B = r.P_r_max * s.clutter_gram(j)
        B[np.diag_indices(r.N)] += r.P_u
        cf = la.cho_factor(B)
        for cell in s.cells_in_beam(j):
            qn = Q[:, cell[0]]
            val = r.P_r_max * r.sigma2_g[cell] * float(np.real(np.vdot(qn, la.cho_solve(cf, qn))))
            out[cell] = 10.0 * math.log10(val)
    return out
