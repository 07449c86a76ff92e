"""Co-design of a pulsed radar and an in-band MIMO communication link.

The library designs the radar receive filter bank, the radar transmit power,
and the communication codeword covariance jointly, maximizing the link's
mutual information while every protected range/azimuth cell keeps its
signal-to-disturbance ratio above threshold.  See :mod:`radcom.solver` for
the optimizer, :mod:`radcom.baselines` for the reference designs it is
compared against, and :mod:`radcom.experiments` for Monte-Carlo sweeps.
"""

from .errors import (CodesignError, DefinitenessError, InfeasibleError,
                     PowerBudgetError, ScenarioError)
from .model import (CommParams, CrossInterference, DesignVariables, RadarParams,
                    Scenario, default_scenario, load_scenario, protected_cell_grid,
                    random_scenario, restrict_cells, save_scenario,
                    scenario_from_dict, scenario_to_dict, shifted_code,
                    strip_interference, validate_scenario, with_thresholds)
from .metrics import (ConstraintSet, WhitenedChannel, constraint_coefficients,
                      data_interference, disturbance_matrix, max_feasible_rho,
                      mutual_information, sdr, sdr_map, whitened_channel)
from .solver import (SolveTrace, SolverOptions, alternating_maximization,
                     optimize_codebook_dual, optimize_codebook_gradient,
                     update_filters, update_radar_power, water_filling)
from .baselines import (BaselineResult, comm_first, disjoint, non_interfering,
                        radar_first)
from .experiments import (SweepRecord, SweepSpec, convergence_trace, derive_seed,
                          read_records, run_point, run_sweep, write_records)

__version__ = "0.1.0"

__all__ = [
    "CodesignError", "ScenarioError", "InfeasibleError", "PowerBudgetError",
    "DefinitenessError",
    "RadarParams", "CommParams", "CrossInterference", "Scenario",
    "DesignVariables", "default_scenario", "random_scenario", "validate_scenario",
    "protected_cell_grid", "restrict_cells", "with_thresholds",
    "strip_interference", "shifted_code", "save_scenario", "load_scenario",
    "scenario_to_dict", "scenario_from_dict",
    "WhitenedChannel", "whitened_channel", "mutual_information",
    "data_interference", "disturbance_matrix", "sdr", "sdr_map",
    "ConstraintSet", "constraint_coefficients", "max_feasible_rho",
    "SolverOptions", "SolveTrace", "water_filling", "update_filters",
    "update_radar_power", "optimize_codebook_gradient", "optimize_codebook_dual",
    "alternating_maximization",
    "BaselineResult", "non_interfering", "disjoint", "comm_first", "radar_first",
    "SweepSpec", "SweepRecord", "derive_seed", "run_point", "run_sweep",
    "convergence_trace", "write_records", "read_records",
]
