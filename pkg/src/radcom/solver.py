"""Joint transceiver optimization by block coordinate ascent.

The outer loop of :func:`alternating_maximization` cycles through the three
variable blocks -- receive filter bank, radar transmit power, comm codeword
covariance -- each step solving its subproblem exactly (filters, power) or by
a first-order method (covariance).  Two covariance sub-solvers are provided:

* :func:`optimize_codebook_gradient` -- projected-free ascent on a square
  factor ``C = X X^H``, stepping along the rate gradient while feasible and
  along the negated violated-constraint gradients otherwise, keeping the best
  feasible iterate;
* :func:`optimize_codebook_dual` -- projected subgradient ascent on the dual
  of the exact convex restriction to the whitened channel's right singular
  basis, which degenerates to classical water-filling when only the power
  constraint is active.

Both use the diminishing step ``alpha_k = a / (b + k)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import CodesignError, DefinitenessError, InfeasibleError, PowerBudgetError
from .metrics import (ConstraintSet, WhitenedChannel, constraint_coefficients,
                      data_interference, disturbance_matrix, max_feasible_rho,
                      sdr_map, whitened_channel)
from .model import Cell, DesignVariables, Scenario, validate_scenario
from .numerics import herm, svd_complex

__all__ = [
    "SolverOptions",
    "SolveTrace",
    "rate_gradient",
    "water_filling",
    "update_filters",
    "update_radar_power",
    "optimize_codebook_gradient",
    "optimize_codebook_dual",
    "alternating_maximization",
]

_LN2 = math.log(2.0)


@dataclass
class SolverOptions:
    """Knobs shared by the outer loop and the codebook sub-solvers.

    ``step_schedule = (a, b)`` gives the diminishing step ``a / (b + k)``;
    ``inner_stall`` stops a sub-solver once that many iterations pass without
    a material improvement of its best objective; ``rank_cut`` is the relative
    singular-value threshold used by the dual solver; ``psd_clip_tol`` bounds
    how negative an eigenvalue of a returned covariance may be before it is an
    error rather than round-off.
    """

    codebook_method: str = "gradient"
    outer_max_iters: int = 100
    outer_rel_tol: float = 1e-6
    inner_max_iters: int = 1500
    inner_rel_tol: float = 1e-8
    inner_stall: int = 50
    step_schedule: tuple[float, float] = (1.0, 0.0)
    psd_clip_tol: float = 1e-10
    rank_cut: float = 1e-12


@dataclass
class SolveTrace:
    """Per-outer-iteration progress of :func:`alternating_maximization`."""

    mi_bits: list[float] = field(default_factory=list)
    P_r: list[float] = field(default_factory=list)
    min_sdr_margin: list[float] = field(default_factory=list)
    comm_power: list[float] = field(default_factory=list)
    inner_iters: list[int] = field(default_factory=list)
    wall_time: list[float] = field(default_factory=list)
    converged: bool = False
    method: str = ""

    @property
    def outer_iters(self) -> int:
        return len(self.mi_bits)

    def rows(self) -> list[dict]:
        """One dict per outer iteration, ready for CSV/JSON dumping."""
        return [
            {
                "iteration": i + 1,
                "mi_bits": self.mi_bits[i],
                "P_r": self.P_r[i],
                "min_sdr_margin": self.min_sdr_margin[i],
                "comm_power": self.comm_power[i],
                "inner_iters": self.inner_iters[i],
                "wall_time": self.wall_time[i],
            }
            for i in range(len(self.mi_bits))
        ]


def _logdet_chol(a: np.ndarray) -> float:
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise DefinitenessError(f"objective matrix lost definiteness ({exc})") from exc
    return float(2.0 * np.sum(np.log(np.real(np.diag(chol)))))


def rate_gradient(gram: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Ascent direction of ``log det(I + X^H gram X)``: the conjugate-coordinate
    (Wirtinger) gradient ``gram X (I + X^H gram X)^{-1}``."""
    Y = gram @ X
    Sm = herm(np.eye(X.shape[1]) + X.conj().T @ Y)
    return la.solve(Sm, Y.conj().T, assume_a="pos").conj().T


def water_filling(noise: np.ndarray, budget: float) -> tuple[np.ndarray, float]:
    """Classical water-filling: maximize ``sum log(1 + p_i / noise_i)``.

    Returns ``(p, level)`` with ``p_i = max(level - noise_i, 0)`` and
    ``sum(p) = budget`` (all of a positive budget is always spent).
    """
    noise = np.asarray(noise, dtype=float)
    if np.any(noise <= 0):
        raise ValueError("water_filling: noise levels must be positive")
    if budget < 0:
        raise ValueError("water_filling: budget must be >= 0")
    if noise.size == 0 or budget == 0.0:
        return np.zeros_like(noise), float(noise.min()) if noise.size else 0.0
    srt = np.sort(noise)
    levels = (budget + np.cumsum(srt)) / np.arange(1, srt.size + 1)
    k = int(np.max(np.nonzero(levels > srt)[0])) + 1
    level = float(levels[k - 1])
    return np.maximum(level - noise, 0.0), level


def update_filters(C: np.ndarray, P_r: float, s: Scenario) -> dict[Cell, np.ndarray]:
    """SDR-optimal receive filters for every protected cell, normalized to unit norm.

    The SDR is a generalized Rayleigh quotient, so per cell the maximizer is
    ``D_j^{-1} q_n`` with ``D_j`` the beam's disturbance covariance; one
    Cholesky factorization per beam serves all of its cells.
    """
    Q = s.shifted_codes()
    filters: dict[Cell, np.ndarray] = {}
    for j in s.beams():
        cf = la.cho_factor(disturbance_matrix(j, C, P_r, s))
        for cell in s.cells_in_beam(j):
            w = la.cho_solve(cf, Q[:, cell[0]])
            filters[cell] = w / np.linalg.norm(w)
    return filters


def update_radar_power(C: np.ndarray, filters: dict[Cell, np.ndarray],
                       s: Scenario) -> float:
    """Smallest radar power meeting every SDR threshold at the given filters.

    Per cell the SDR is increasing in ``P_r``, so the requirement inverts to
    ``P_r >= rho * (codeword interference + noise) / (target - rho * clutter)``
    and the binding cell sets the power.  Raises :class:`InfeasibleError` if a
    cell's denominator is non-positive (no power can help) and
    :class:`PowerBudgetError` if the required power exceeds the budget.
    """
    r = s.radar
    Q = s.shifted_codes()
    required, worst = 0.0, None
    for j in s.beams():
        T = data_interference(j, C, s)
        for cell in s.cells_in_beam(j):
            w = filters[cell]
            rho = r.rho[cell]
            resp = np.abs(Q.conj().T @ w) ** 2
            num = rho * (float(np.real(np.vdot(w, T @ w)))
                         + r.P_u * float(np.real(np.vdot(w, w))))
            den = r.sigma2_g[cell] * resp[cell[0]] - rho * float(resp @ r.sigma2_gamma[:, j])
            if den <= 0.0:
                raise InfeasibleError(
                    f"cell {cell}: threshold unreachable at any radar power "
                    f"with the current filters", cell=cell)
            if num / den > required:
                required, worst = num / den, cell
    if required > r.P_r_max * (1.0 + 1e-9):
        raise PowerBudgetError(
            f"cell {worst}: meeting the SDR thresholds needs "
            f"{required:.6g} W > P_r_max = {r.P_r_max:.6g} W", cell=worst)
    return min(required, r.P_r_max)


def _shrink_into_feasibility(X: np.ndarray, cons: ConstraintSet) -> np.ndarray:
    """Uniformly scale a factor down until every positive-budget row holds.

    Rows with ``a == 0`` are subspace constraints: scaling cannot fix them, so
    they are the caller's business (the gradient solver projects them out).
    """
    tv = cons.trace_values_factor(X)
    pos = cons.a > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratios = np.where(tv[pos] > cons.a[pos],
                          cons.a[pos] / np.maximum(tv[pos], np.finfo(float).tiny), 1.0)
    s2 = float(np.min(ratios, initial=1.0))
    if s2 >= 1.0:
        return X
    return X * math.sqrt(max(s2, 0.0) * (1.0 - 1e-12))


def optimize_codebook_gradient(wc: WhitenedChannel, cons: ConstraintSet,
                               opts: SolverOptions | None = None,
                               X0: np.ndarray | None = None) -> tuple[np.ndarray, dict]:
    """Maximize ``log det(I + F C F^H)`` over feasible ``C = X X^H`` by factor ascent.

    While the iterate is feasible, step along the rate gradient
    ``G = F^H F X (I + X^H F^H F X)^{-1}``; otherwise step against the violated
    constraints' gradients ``E_l X``.  The best feasible iterate (earliest on
    ties) is returned.  Both phases are scale-free so one step schedule serves
    problems whose raw row magnitudes differ by many orders: ascent moves by a
    fraction ``alpha_k = a / (b + k)`` of the iterate's own norm along ``G``,
    and violations are removed by a Polyak step (exact first-order restoring
    length, no tuning constant), falling back to a uniform radial shrink when
    the iterate has overshot deep past a boundary.  Whenever a step lowers the
    objective the iterate restarts from the incumbent with the step fraction
    halved, so the walk length decays geometrically near the optimum instead
    of flooring at the schedule's tail.

    Returns ``(C, info)`` where ``info`` carries the iteration count, the best
    objective in nats, the returned factor (for warm starts), and flags
    ``converged`` / ``no_progress``.
    """
    opts = opts or SolverOptions()
    MN = cons.MN
    a = cons.a
    a_budget = float(a[-1])
    gram = wc.gram
    traces = cons.traces()

    # Rows with a == 0 and a PSD matrix pin the optimum to a subspace
    # (trace(E X X^H) <= 0 iff E X = 0): restrict the iteration to the joint
    # null space once instead of chasing the boundary with penalty steps.
    proj = None
    zero_rows = [l for l in np.nonzero(a <= 0)[0] if l != cons.U - 1]
    if zero_rows:
        pinned = sum(cons.matrix(l) for l in zero_rows)
        lam, vec = np.linalg.eigh(herm(pinned))
        null = lam <= MN * np.finfo(float).eps * max(float(lam[-1]), 0.0)
        if not null.any():
            Z = np.zeros((MN, MN), dtype=complex)
            return Z, {"iterations": 0, "objective_nats": 0.0, "X": Z,
                       "converged": True, "no_progress": False}
        basis = vec[:, null]
        proj = basis @ basis.conj().T
        gram = herm(proj @ gram @ proj)
    if a_budget <= 0:
        Z = np.zeros((MN, MN), dtype=complex)
        return Z, {"iterations": 0, "objective_nats": 0.0, "X": Z,
                   "converged": True, "no_progress": False}

    pos = a > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        caps = np.where(traces[pos] > 0,
                        a[pos] / np.maximum(traces[pos], np.finfo(float).tiny),
                        np.inf)
    eps = 0.9 * math.sqrt(float(np.min(caps)))
    if X0 is not None:
        X = np.array(X0, dtype=complex)
        if proj is not None:
            X = proj @ X
        X = _shrink_into_feasibility(X, cons)
        if float(np.sum(np.abs(X) ** 2)) <= MN * np.finfo(float).tiny:
            X = eps * (proj if proj is not None else np.eye(MN, dtype=complex))
    else:
        X = eps * (proj if proj is not None else np.eye(MN, dtype=complex))

    step_a, step_b = opts.step_schedule
    eye = np.eye(X.shape[1])
    tiny = np.finfo(float).tiny

    best_obj = -np.inf
    X_best: np.ndarray | None = None
    prev_obj: float | None = None
    damp = 1.0
    converged = False
    k_used = opts.inner_max_iters
    k_gain = 0

    for k in range(1, opts.inner_max_iters + 1):
        if X_best is not None and k - k_gain > opts.inner_stall:
            converged = True
            k_used = k
            break
        alpha = step_a / (step_b + k)
        tv = cons.trace_values_factor(X)
        nX2 = float(np.sum(np.abs(X) ** 2))
        # Row tolerance: relative play on the budget plus the round-off floor
        # of evaluating trace(E_l X X^H) itself (keeps zero-budget rows from
        # oscillating on projection drift).
        slack = 1e-12 * a + (np.finfo(float).eps * traces) * nX2
        violated = tv > a + slack
        if not violated.any():
            Y = gram @ X
            Sm = herm(eye + X.conj().T @ Y)
            cf = la.cho_factor(Sm, lower=True)
            obj = float(2.0 * np.sum(np.log(np.real(np.diag(cf[0])))))
            if obj > best_obj:
                if obj > best_obj + opts.inner_rel_tol * max(1.0, abs(best_obj)):
                    k_gain = k
                best_obj = obj
                X_best = X.copy()
            elif obj < best_obj:
                # overshot the ridge: restart from the best point with half
                # the step scale, so the walk length decays geometrically
                # instead of flooring at alpha_k
                damp *= 0.5
                X = X_best.copy()
                nX2 = float(np.sum(np.abs(X) ** 2))
                Y = gram @ X
                Sm = herm(eye + X.conj().T @ Y)
                cf = la.cho_factor(Sm, lower=True)
                obj = best_obj
                prev_obj = None
            if prev_obj is not None and abs(obj - prev_obj) <= opts.inner_rel_tol * max(1.0, abs(prev_obj)):
                converged = True
                k_used = k
                break
            prev_obj = obj
            G = la.cho_solve(cf, Y.conj().T).conj().T
            nG = float(np.linalg.norm(G))
            if nG <= tiny:
                converged = True
                k_used = k
                break
            # Slide along near-tight rows: project the ascent direction onto
            # their tangent space so boundary iterates stop ping-ponging
            # between an outward step and its restoration (net progress of
            # that cycle decays like alpha_k and stalls the tail).  Rows
            # whose least-squares multiplier comes out negative are released;
            # all multipliers nonnegative with a vanishing residual is the
            # first-order optimality certificate.
            act = list(np.nonzero((a > 0) & (tv >= a - slack - 1e-6 * np.abs(a)))[0])
            if act and len(act) <= 32:
                S_rows = [cons.apply_rows(X, np.array([l]), np.ones(1)) for l in act]
                while act:
                    gm = np.array([[np.real(np.vdot(Si, Sj)) for Sj in S_rows]
                                   for Si in S_rows])
                    rhs = np.array([np.real(np.vdot(Si, G)) for Si in S_rows])
                    ridge = 1e-12 * np.trace(gm) / len(act)
                    try:
                        coef = np.linalg.solve(gm + ridge * np.eye(len(act)), rhs)
                    except np.linalg.LinAlgError:
                        break
                    if coef.min() >= 0.0:
                        for c, Si in zip(coef, S_rows):
                            G = G - c * Si
                        break
                    drop = int(np.argmin(coef))
                    act.pop(drop)
                    S_rows.pop(drop)
                nGt = float(np.linalg.norm(G))
                if nGt <= 1e-10 * nG:
                    converged = True
                    k_used = k
                    break
                nG = nGt
            X = X + (damp * alpha * math.sqrt(nX2) / nG) * G
        else:
            prev_obj = None
            rows = np.nonzero(violated)[0]
            pos_rows = rows[a[rows] > 0]
            deep = pos_rows.size and float(np.max(tv[pos_rows] / a[pos_rows])) > 4.0
            if deep:
                X = _shrink_into_feasibility(X, cons)
            else:
                S = cons.apply_rows(X, rows, np.ones(rows.size))
                nS2 = float(np.sum(np.abs(S) ** 2))
                excess = float(np.sum(tv[rows] - a[rows]))
                if nS2 > tiny:
                    X = X - (excess / (2.0 * nS2)) * S
                else:
                    X = _shrink_into_feasibility(X, cons)
            if proj is not None:
                X = proj @ X

    if X_best is None:
        Z = np.zeros((MN, MN), dtype=complex)
        return Z, {"iterations": k_used, "objective_nats": 0.0, "X": Z,
                   "converged": False, "no_progress": True}
    C = herm(X_best @ X_best.conj().T)
    return C, {"iterations": k_used, "objective_nats": best_obj, "X": X_best,
               "converged": converged, "no_progress": False}


def optimize_codebook_dual(wc: WhitenedChannel, cons: ConstraintSet,
                           opts: SolverOptions | None = None) -> tuple[np.ndarray, dict]:
    """Codebook design restricted to the whitened channel's right singular basis.

    With ``F = U Xi V^H`` and ``C = V diag(p) V^H`` the rate separates into
    ``sum_i log(1 + p_i / sig2_i)``, ``sig2_i = 1 / Xi_i^2``, and every
    constraint becomes linear in ``p``.  The Lagrange dual is minimized by
    projected subgradient descent with Polyak steps (duality gap over squared
    subgradient norm, the gap estimated against the best repaired primal); the
    primal is recovered as ``p_i = (1 / (e_i' mu) - sig2_i)^+``, scaled down
    uniformly if round-off leaves a small violation.  The best repaired primal
    across iterations is returned.  With only the power row active the first
    iterate already equals classical water-filling.
    """
    opts = opts or SolverOptions()
    MN = cons.MN
    u_, sv, v = svd_complex(wc.F)
    rank = int(np.sum(sv > opts.rank_cut * sv[0])) if sv.size and sv[0] > 0 else 0
    zero_c = np.zeros((MN, MN), dtype=complex)
    if rank == 0:
        return zero_c, {"iterations": 0, "rank": 0, "objective_nats": 0.0,
                        "converged": True, "p": np.zeros(0), "mu": np.zeros(cons.U),
                        "e": np.zeros((cons.U, 0)), "sig2": np.zeros(0)}
    V = v[:, :rank]
    sig2 = 1.0 / sv[:rank] ** 2
    e = cons.quad_forms(V)                      # (U, rank)
    a = cons.a
    a_budget = float(a[-1])

    # rows with a == 0 admit no energy on the modes they touch
    active = np.ones(rank, dtype=bool)
    for l in np.nonzero(a <= 0)[0]:
        active &= ~(e[l] > 1e-15 * max(1.0, float(e[l].max(initial=0.0))))
    if a_budget <= 0 or not active.any():
        return zero_c, {"iterations": 0, "rank": rank, "objective_nats": 0.0,
                        "converged": True, "p": np.zeros(rank), "mu": np.zeros(cons.U),
                        "e": e, "sig2": sig2}

    rows = np.nonzero(a > 0)[0]
    e_act = e[np.ix_(rows, np.nonzero(active)[0])]
    a_act = a[rows]
    e_hat = e_act / a_act[:, None]
    sig2_act = sig2[active]
    n_rows = rows.size

    def repair(p: np.ndarray) -> np.ndarray:
        load = float(np.max(e_hat @ p, initial=0.0))
        return p if load <= 1.0 else p * ((1.0 - 1e-15) / load)

    def primal(p: np.ndarray) -> float:
        return float(np.sum(np.log1p(p / sig2_act)))

    p0, level = water_filling(sig2_act, a_budget)
    p0 = repair(p0)
    best_p, best_val = p0.copy(), primal(p0)

    mu = np.zeros(n_rows)
    power_pos = int(np.nonzero(rows == cons.U - 1)[0][0])
    mu[power_pos] = a_budget / level

    def inner_max(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Lagrangian maximizer, constraint violations, and d(m)."""
        dots = np.maximum(m @ e_hat, np.finfo(float).tiny)
        q = np.clip(1.0 / dots - sig2_act, 0.0, a_budget)
        g = e_hat @ q - 1.0
        return q, g, primal(q) - float(m @ g)

    # The inner maximizer is unique (strictly concave objective), so the dual
    # d(mu) is convex and C^1 with gradient -(e_hat p(mu) - 1): plain projected
    # gradient descent with Armijo backtracking needs no step schedule.  The
    # duality gap against the best repaired primal gives a one-shot optimality
    # certificate for the stop test (Slater holds since p = 0 is strictly
    # feasible and every a > 0 here).
    p, grad, dval = inner_max(mu)
    step = 1.0
    small_steps = 0
    converged = False
    k_used = opts.inner_max_iters
    for k in range(1, opts.inner_max_iters + 1):
        fixed = repair(p)
        val = primal(fixed)
        if val > best_val:
            best_val, best_p = val, fixed.copy()
        gap = dval - best_val
        if gap <= opts.inner_rel_tol * max(1.0, abs(best_val)):
            converged = True
            k_used = k
            break
        accepted = False
        for _ in range(40):
            mu_next = np.maximum(mu + step * grad, 0.0)
            move2 = float(np.sum((mu_next - mu) ** 2))
            if move2 == 0.0:
                break
            p_next, grad_next, dval_next = inner_max(mu_next)
            if dval_next <= dval - 1e-4 * move2 / step:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            small_steps += 1
            if small_steps >= 25:
                converged = True
                k_used = k
                break
            continue
        small_steps = 0
        mu, p, grad, dval = mu_next, p_next, grad_next, dval_next
        step = min(step * 2.0, 1e9)

    p_full = np.zeros(rank)
    p_full[active] = best_p
    p_last = np.zeros(rank)
    p_last[active] = repair(p)
    mu_full = np.zeros(cons.U)
    mu_full[rows] = mu / a_act
    C = herm((V * p_full) @ V.conj().T)
    return C, {"iterations": k_used, "rank": rank, "objective_nats": best_val,
               "converged": converged, "p": p_full, "p_last": p_last,
               "mu": mu_full, "e": e, "sig2": sig2}


def alternating_maximization(s: Scenario, opts: SolverOptions | None = None
                             ) -> tuple[DesignVariables, SolveTrace]:
    """Joint filter/power/codebook design maximizing the comm rate under SDR floors.

    Starts from the silent comm system (``C = 0``) at full radar power, checks
    feasibility against the per-cell SDR bounds, then cycles
    filters -> power -> codebook until the rate gain falls below
    ``outer_rel_tol`` in two consecutive cycles.  Two are required because a
    single flat cycle can be transient: right after the power drops, the
    interference budgets are derived from filters matched to the old power
    level and can pin the codebook in place for one round; the stall only
    counts as convergence if it survives the next filter refresh.  The
    previous covariance is kept whenever a sub-solve fails to improve on it
    (it remains feasible after the filter and power updates), which makes the
    recorded rate non-decreasing.

    Returns the final :class:`~radcom.model.DesignVariables` and the
    :class:`SolveTrace`.
    """
    opts = opts or SolverOptions()
    if opts.codebook_method not in ("gradient", "dual"):
        raise ValueError(f"unknown codebook method {opts.codebook_method!r}")
    s = validate_scenario(s)
    r = s.radar

    bounds_db = max_feasible_rho(s)
    worst_cell = min(r.cells,
                     key=lambda c: bounds_db[c] - 10.0 * math.log10(r.rho[c]))
    worst_gap = bounds_db[worst_cell] - 10.0 * math.log10(r.rho[worst_cell])
    if worst_gap < -1e-9:
        raise InfeasibleError(
            f"cell {worst_cell}: threshold "
            f"{10.0 * math.log10(r.rho[worst_cell]):.2f} dB exceeds the "
            f"attainable SDR bound {bounds_db[worst_cell]:.2f} dB", cell=worst_cell)

    MN = s.comm.M * r.N
    C = np.zeros((MN, MN), dtype=complex)
    P_r = r.P_r_max
    X_of_C: np.ndarray | None = None
    filters: dict[Cell, np.ndarray] = {}
    trace = SolveTrace(method=opts.codebook_method)
    prev_mi = 0.0
    stalls = 0

    for _t in range(1, opts.outer_max_iters + 1):
        t0 = time.perf_counter()
        filters = update_filters(C, P_r, s)
        if _t > 1:
            # Minimizing the power against the silent initial codebook would
            # leave the binding cell zero interference budget and pin the
            # codebook to silence; the first codebook step therefore runs at
            # the initial full power, and the exact minimal-power update takes
            # over once C is non-zero.
            P_r = update_radar_power(C, filters, s)
        wc = whitened_channel(P_r, s)
        cons = constraint_coefficients(filters, P_r, s)

        if opts.codebook_method == "gradient":
            C_new, info = optimize_codebook_gradient(wc, cons, opts, X0=X_of_C)
        else:
            C_new, info = optimize_codebook_dual(wc, cons, opts)

        mi_keep = wc.mutual_information(C)
        mi_new = wc.mutual_information(C_new)
        if mi_new >= mi_keep:
            C = C_new
            mi_now = mi_new
            if opts.codebook_method == "gradient":
                X_of_C = info["X"]
        else:
            mi_now = mi_keep

        sdrs = sdr_map(C, P_r, filters, s)
        margin = min(sdrs[cell] / r.rho[cell] for cell in r.cells) - 1.0
        trace.mi_bits.append(mi_now)
        trace.P_r.append(P_r)
        trace.min_sdr_margin.append(margin)
        trace.comm_power.append(float(np.trace(C).real) / r.N)
        trace.inner_iters.append(int(info["iterations"]))
        trace.wall_time.append(time.perf_counter() - t0)

        if abs(mi_now - prev_mi) <= opts.outer_rel_tol * max(prev_mi, 1e-12):
            stalls += 1
            if stalls >= 2:
                trace.converged = True
                break
        else:
            stalls = 0
        prev_mi = mi_now

    if trace.min_sdr_margin[-1] < -1e-6:
        raise CodesignError(
            f"internal error: returned design violates an SDR floor "
            f"(margin {trace.min_sdr_margin[-1]:.3e})")
    if trace.comm_power[-1] > s.comm.P_c_max * (1.0 + 1e-9):
        raise CodesignError("internal error: returned design violates the power budget")
    return DesignVariables(C=C, P_r=P_r, filters=filters), trace
