"""Reference designs the joint optimizer is measured against.

All four share the same ingredients: the comm-only codebook is classical
water-filling over the channel's spatial modes (white in fast time), and the
radar-only receiver is the clutter-plus-noise-whitening filter bank at full
transmit power.  They differ in who gets to see whom:

* ``non_interfering``  -- each system alone in the band (upper bounds both);
* ``disjoint``         -- both selfish designs dropped into the shared band;
* ``comm_first``       -- comm fixed and selfish, radar adapts to it;
* ``radar_first``      -- radar fixed and selfish, comm adapts to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import mutual_information, sdr_map, whitened_channel, constraint_coefficients
from .model import DesignVariables, Scenario, validate_scenario
from .numerics import herm, svd_complex
from .solver import (SolverOptions, optimize_codebook_dual,
                     optimize_codebook_gradient, update_filters,
                     update_radar_power, water_filling)

__all__ = ["BaselineResult", "non_interfering", "disjoint", "comm_first", "radar_first"]


@dataclass
class BaselineResult:
    """Outcome of a baseline design: the variables plus headline metrics."""

    name: str
    mi_bits: float
    min_sdr_db: float
    variables: DesignVariables
    info: dict = field(default_factory=dict)


def _waterfilled_covariance(s: Scenario) -> tuple[np.ndarray, float]:
    """Comm covariance ignoring the radar: water-fill the spatial modes.

    Returns ``(C, mi_bits)`` where ``C = kron(Q, I_N)`` spends the full
    per-codeword budget and ``mi_bits`` is the interference-free rate
    ``log2 det(I + H Q H^H / P_v)``.
    """
    c = s.comm
    _u, sv, v = svd_complex(c.H)
    gains = sv ** 2
    pos = gains > 0
    p = np.zeros_like(gains)
    if pos.any():
        p[pos], _ = water_filling(c.P_v / gains[pos], c.P_c_max)
    Q = herm((v[:, : sv.size] * p) @ v[:, : sv.size].conj().T)
    mi = float(np.sum(np.log2(1.0 + p[pos] * gains[pos] / c.P_v))) if pos.any() else 0.0
    return np.kron(Q, np.eye(s.radar.N)), mi


def _min_sdr_db(C: np.ndarray, P_r: float, filters, s: Scenario) -> float:
    sdrs = sdr_map(C, P_r, filters, s)
    return float(10.0 * np.log10(min(sdrs.values())))


def non_interfering(s: Scenario, opts: SolverOptions | None = None) -> BaselineResult:
    """Each system alone in the band: unconstrained water-filling for the comm
    link and full-power clutter-whitening filters for the radar, with the
    cross terms stripped from both metrics.  Upper-bounds every coexistence
    design on both axes at once, so it brackets the price of sharing."""
    s = validate_scenario(s)
    C, mi = _waterfilled_covariance(s)
    P_r = s.radar.P_r_max
    silent = np.zeros_like(C)
    filters = update_filters(silent, P_r, s)
    return BaselineResult(
        name="non_interfering", mi_bits=mi,
        min_sdr_db=_min_sdr_db(silent, P_r, filters, s),
        variables=DesignVariables(C=C, P_r=P_r, filters=filters))


def disjoint(s: Scenario, opts: SolverOptions | None = None) -> BaselineResult:
    """Both selfish designs dropped into the shared band.

    Takes the exact variables of :func:`non_interfering` but evaluates them
    under the true mutual interference.  The radar side reports the largest
    threshold this design could have honored, i.e. the worst-cell achieved
    SDR, in ``info["achievable_rho_db"]``.
    """
    s = validate_scenario(s)
    C, _ = _waterfilled_covariance(s)
    P_r = s.radar.P_r_max
    filters = update_filters(np.zeros_like(C), P_r, s)
    mi = mutual_information(C, P_r, s)
    min_sdr = _min_sdr_db(C, P_r, filters, s)
    return BaselineResult(
        name="disjoint", mi_bits=mi, min_sdr_db=min_sdr,
        variables=DesignVariables(C=C, P_r=P_r, filters=filters),
        info={"achievable_rho_db": min_sdr})


def comm_first(s: Scenario, opts: SolverOptions | None = None) -> BaselineResult:
    """Comm transmits its selfish codebook; the radar adapts around it.

    Alternates the filter and power updates against the fixed comm covariance
    to their fixed point.  Raises :class:`~radcom.errors.PowerBudgetError`
    (via the power update) if no power within budget meets the thresholds.
    """
    s = validate_scenario(s)
    C, _ = _waterfilled_covariance(s)
    P_r = s.radar.P_r_max
    P_prev = None
    filters = {}
    for _ in range(50):
        filters = update_filters(C, P_r, s)
        P_r = update_radar_power(C, filters, s)
        if P_prev is not None and abs(P_r - P_prev) <= 1e-8 * max(1.0, P_r):
            break
        P_prev = P_r
    return BaselineResult(
        name="comm_first", mi_bits=mutual_information(C, P_r, s),
        min_sdr_db=_min_sdr_db(C, P_r, filters, s),
        variables=DesignVariables(C=C, P_r=P_r, filters=filters))


def radar_first(s: Scenario, opts: SolverOptions | None = None) -> BaselineResult:
    """Radar runs selfishly at full power; the comm codebook adapts to it."""
    s = validate_scenario(s)
    opts = opts or SolverOptions()
    P_r = s.radar.P_r_max
    filters = update_filters(np.zeros((s.comm.M * s.radar.N,) * 2, dtype=complex), P_r, s)
    wc = whitened_channel(P_r, s)
    cons = constraint_coefficients(filters, P_r, s)
    if opts.codebook_method == "dual":
        C, info = optimize_codebook_dual(wc, cons, opts)
    else:
        C, info = optimize_codebook_gradient(wc, cons, opts)
    return BaselineResult(
        name="radar_first", mi_bits=wc.mutual_information(C),
        min_sdr_db=_min_sdr_db(C, P_r, filters, s),
        variables=DesignVariables(C=C, P_r=P_r, filters=filters),
        info={"inner_iterations": int(info["iterations"])})
