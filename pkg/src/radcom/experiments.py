"""Monte-Carlo sweeps over interference density, strength, and SDR thresholds.

A :class:`SweepSpec` is a grid of scenario coordinates plus a trial count and
a list of design methods.  Every (coordinate, trial) pair gets its own penal
scenario draw, seeded by hashing the coordinate *indices* and the trial number
-- the method name is deliberately left out of the hash so that competing
methods face identical draws and their curves are paired sample by sample.

Records are plain rows (one per method per draw) that round-trip through CSV
or JSON-lines; ``write_records`` also emits a manifest sidecar with a content
digest over everything except wall-clock times, so two runs of the same spec
can be checked for bit-identical results.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import math
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as _baselines
from .errors import CodesignError, InfeasibleError, PowerBudgetError
from .metrics import max_feasible_rho, sdr_map
from .model import (Scenario, random_scenario, restrict_cells, scenario_to_json,
                    with_thresholds)
from .solver import SolverOptions, SolveTrace, alternating_maximization

try:  # keep worker processes from oversubscribing the BLAS thread pool
    from threadpoolctl import threadpool_limits
except ImportError:  # pragma: no cover - optional dependency
    threadpool_limits = None

__all__ = [
    "SweepSpec",
    "SweepRecord",
    "derive_seed",
    "run_point",
    "run_sweep",
    "convergence_trace",
    "write_records",
    "read_records",
]

JOINT_METHODS = ("gradient", "dual")
BASELINE_METHODS = ("non_interfering", "disjoint", "comm_first", "radar_first")


@dataclass
class SweepSpec:
    """Grid of scenario coordinates to sweep, one draw per (coordinate, trial).

    ``n_cells`` entries of ``None`` keep every protected cell of the template;
    an integer ``n`` protects a uniformly random ``n``-subset, redrawn per
    trial.  Interference strengths default to the weak reference value.
    """

    template: Scenario
    methods: tuple[str, ...] = ("gradient",)
    rho_db: tuple[float, ...] = (0.0,)
    delta: tuple[float, ...] = (0.5,)
    sigma2: tuple[float, ...] = (1.2e-13,)
    n_cells: tuple[int | None, ...] = (None,)
    trials: int = 1
    base_seed: int = 0
    options: SolverOptions = field(default_factory=SolverOptions)

    def coordinate_count(self) -> int:
        return (len(self.rho_db) * len(self.delta) * len(self.sigma2)
                * len(self.n_cells) * self.trials)


@dataclass
class SweepRecord:
    """One method's outcome on one scenario draw.

    ``min_sdr_margin`` is ``min_cell SDR/rho - 1`` (negative means the design
    violates a threshold, which baselines legitimately may); ``min_sdr_db`` is
    the worst-cell SDR itself, i.e. the largest threshold the design could
    have honored; ``rho_bound_db`` is the scenario's feasibility bound.
    """

    method: str
    rho_db: float
    delta: float
    sigma2: float
    n_cells: int
    trial: int
    seed: int
    status: str
    mi_bits: float
    P_r: float
    comm_power: float
    min_sdr_margin: float
    min_sdr_db: float
    rho_bound_db: float
    outer_iters: int
    converged: bool
    wall_time: float


_RECORD_FIELDS = [f.name for f in dataclasses.fields(SweepRecord)]
_SORT_KEY = ("rho_db", "delta", "sigma2", "n_cells", "trial", "method")


def derive_seed(base_seed: int, *indices: int) -> int:
    """Stable 64-bit seed from the sweep's base seed and coordinate indices."""
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<q", int(base_seed)))
    h.update(struct.pack(f"<{len(indices)}i", *indices))
    return int.from_bytes(h.digest(), "little")


def _draw(spec: SweepSpec, coord: tuple[int, int, int, int, int]) -> tuple[Scenario, int]:
    irho, idel, isig, icel, trial = coord
    seed = derive_seed(spec.base_seed, irho, idel, isig, icel, trial)
    rng = np.random.default_rng(seed)
    scen = with_thresholds(spec.template, 10.0 ** (spec.rho_db[irho] / 10.0))
    n = spec.n_cells[icel]
    if n is not None and int(n) < len(scen.radar.cells):
        # uniform random protected subset, redrawn per trial
        idx = rng.choice(len(scen.radar.cells), size=int(n), replace=False)
        scen = restrict_cells(scen, [scen.radar.cells[k] for k in idx])
    return random_scenario(scen, spec.delta[idel], spec.sigma2[isig], rng), seed


def _summarize(dv, scen: Scenario) -> tuple[float, float, float]:
    sdrs = sdr_map(dv.C, dv.P_r, dv.filters, scen)
    margin = min(sdrs[c] / scen.radar.rho[c] for c in scen.radar.cells) - 1.0
    comm_power = float(np.trace(dv.C).real) / scen.radar.N
    return comm_power, margin, 10.0 * math.log10(min(sdrs.values()))


def _run_method(method: str, scen: Scenario, options: SolverOptions
                ) -> tuple[float, float, float, float, float, int, bool]:
    if method in JOINT_METHODS:
        opts = dataclasses.replace(options, codebook_method=method)
        dv, tr = alternating_maximization(scen, opts)
        comm_power, margin, sdr_db = _summarize(dv, scen)
        return (tr.mi_bits[-1], dv.P_r, comm_power, margin, sdr_db,
                tr.outer_iters, tr.converged)
    if method in BASELINE_METHODS:
        res = getattr(_baselines, method)(scen, options)
        comm_power, margin, sdr_db = _summarize(res.variables, scen)
        return res.mi_bits, res.variables.P_r, comm_power, margin, sdr_db, 0, True
    raise ValueError(f"unknown method {method!r}")


def run_point(spec: SweepSpec, coord: tuple[int, int, int, int, int],
              limit_threads: bool = False) -> list[SweepRecord]:
    """All methods of ``spec`` on the single draw indexed by ``coord``."""
    ctx = (threadpool_limits(limits=1) if limit_threads and threadpool_limits
           else None)
    try:
        scen, seed = _draw(spec, coord)
        bound_db = min(max_feasible_rho(scen).values())
        irho, idel, isig, icel, trial = coord
        out = []
        for method in spec.methods:
            t0 = time.perf_counter()
            try:
                (mi, p_r, comm_power, margin, sdr_db,
                 outer, conv) = _run_method(method, scen, spec.options)
                status = "ok"
            except PowerBudgetError:
                mi = p_r = comm_power = margin = sdr_db = math.nan
                outer, conv, status = 0, False, "power_budget"
            except InfeasibleError:
                mi = p_r = comm_power = margin = sdr_db = math.nan
                outer, conv, status = 0, False, "infeasible"
            except (CodesignError, np.linalg.LinAlgError) as exc:
                mi = p_r = comm_power = margin = sdr_db = math.nan
                outer, conv, status = 0, False, f"error:{type(exc).__name__}"
            out.append(SweepRecord(
                method=method, rho_db=spec.rho_db[irho], delta=spec.delta[idel],
                sigma2=spec.sigma2[isig], n_cells=len(scen.radar.cells),
                trial=trial, seed=seed, status=status, mi_bits=mi, P_r=p_r,
                comm_power=comm_power, min_sdr_margin=margin,
                min_sdr_db=sdr_db, rho_bound_db=bound_db, outer_iters=outer,
                converged=conv, wall_time=time.perf_counter() - t0))
        return out
    finally:
        if ctx is not None:
            ctx.__exit__(None, None, None)


def _worker(args):  # module-level for pickling into the process pool
    spec, coord = args
    return run_point(spec, coord, limit_threads=True)


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[SweepRecord]:
    """Run the full grid; deterministic record list for a given spec.

    Worker count: the ``workers`` argument, else the ``RADCOM_WORKERS``
    environment variable, else one process per CPU.  Records come back
    sorted by coordinates and method regardless of completion order.
    """
    if workers is None:
        workers = int(os.environ.get("RADCOM_WORKERS", 0)) or (os.cpu_count() or 1)
    coords = list(itertools.product(
        range(len(spec.rho_db)), range(len(spec.delta)), range(len(spec.sigma2)),
        range(len(spec.n_cells)), range(spec.trials)))
    if workers > 1 and len(coords) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_worker, [(spec, c) for c in coords]))
    else:
        chunks = [run_point(spec, c) for c in coords]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: tuple(getattr(r, k) for k in _SORT_KEY))
    return records


def convergence_trace(s: Scenario, opts: SolverOptions | None = None) -> SolveTrace:
    """Per-outer-iteration progress of the joint design on one scenario."""
    _dv, trace = alternating_maximization(s, opts)
    return trace


# ---------------------------------------------------------------------------
# Record I/O.  Formats: "csv" and "jsonl" (one JSON object per line).
# ---------------------------------------------------------------------------

_INT_FIELDS = {"n_cells", "trial", "seed", "outer_iters"}
_STR_FIELDS = {"method", "status"}
_BOOL_FIELDS = {"converged"}


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = {".csv": "csv", ".jsonl": "jsonl"}.get(path.suffix.lower(), "csv")
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unknown record format {fmt!r}")
    return fmt


def records_digest(records: list[SweepRecord]) -> str:
    """Content hash of the records with wall-clock times masked out."""
    rows = []
    for r in records:
        d = dataclasses.asdict(r)
        d.pop("wall_time")
        rows.append(d)
    blob = json.dumps(rows, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.blake2b(blob.encode(), digest_size=16).hexdigest()


def write_records(records: list[SweepRecord], path, fmt: str | None = None,
                  spec: SweepSpec | None = None) -> Path:
    """Write records plus a ``<path>.manifest.json`` sidecar; returns the path."""
    if not records:
        raise ValueError("write_records: record list is empty")
    path = Path(path)
    fmt = _infer_format(path, fmt)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_RECORD_FIELDS)
            writer.writeheader()
            for r in records:
                writer.writerow(dataclasses.asdict(r))
    else:
        with open(path, "w") as fh:
            for r in records:
                fh.write(json.dumps(dataclasses.asdict(r), sort_keys=True) + "\n")

    manifest = {
        "schema": "radcom.sweep/1",
        "format": fmt,
        "fields": _RECORD_FIELDS,
        "record_count": len(records),
        "status_counts": {
            st: sum(1 for r in records if r.status == st)
            for st in sorted({r.status for r in records})
        },
        "content_digest": records_digest(records),
    }
    if spec is not None:
        manifest["spec"] = {
            "methods": list(spec.methods),
            "rho_db": list(spec.rho_db),
            "delta": list(spec.delta),
            "sigma2": list(spec.sigma2),
            "n_cells": [None if n is None else int(n) for n in spec.n_cells],
            "trials": spec.trials,
            "base_seed": spec.base_seed,
            "template_digest": hashlib.blake2b(
                scenario_to_json(spec.template).encode(), digest_size=16).hexdigest(),
        }
    with open(str(path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _cast(name: str, value):
    if name in _STR_FIELDS:
        return value
    if name in _BOOL_FIELDS:
        return value if isinstance(value, bool) else value == "True"
    if name in _INT_FIELDS:
        return int(value)
    return float(value)


def read_records(path, fmt: str | None = None) -> list[SweepRecord]:
    path = Path(path)
    fmt = _infer_format(path, fmt)
    records = []
    if fmt == "csv":
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(SweepRecord(**{k: _cast(k, row[k]) for k in _RECORD_FIELDS}))
    else:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    records.append(SweepRecord(**{k: _cast(k, d[k]) for k in _RECORD_FIELDS}))
    return records
