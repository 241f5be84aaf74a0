"""Monte Carlo sampling of forecast scenarios and the cost-of-error dataset.

Each scenario perturbs the reference day hour by hour, commits a day-ahead
schedule against the perturbed profile, and then pays for balancing against
the reference day.  The resulting (error, cost-increase) pairs per hour are
the raw material the loss-fitting stage works from.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .dispatch import DispatchEngine, ReserveConfig
from .errors import ParseError, ValidationError
from .grid_model import LoadProfile, Network

__all__ = [
    "LossDataset",
    "generate_scenarios",
    "build_loss_dataset",
]


def generate_scenarios(loads: LoadProfile, n_scenarios: int, seed: int,
                       band: float = 0.1) -> np.ndarray:
    """Sample forecast profiles uniformly within ``band`` of the reference.

    Returns an (n_scenarios, n_hours) array of forecast MW where each entry
    is drawn independently from [(1-band)*y, (1+band)*y].
    """
    if n_scenarios < 1:
        raise ValidationError("n_scenarios must be >= 1")
    if not 0.0 <= band < 1.0:
        raise ValidationError("band must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    y = loads.system_load
    factors = rng.uniform(1.0 - band, 1.0 + band, size=(n_scenarios, y.size))
    return factors * y[None, :]


@dataclass(frozen=True)
class LossDataset:
    """Sampled forecast errors and their realized cost increases.

    All arrays are (n_scenarios, n_hours).  ``fep`` is the relative error
    (forecast - actual) / actual, ``fepc`` the percentage cost increase of
    the hour, and ``shed`` marks hours where the balancing stage had to use
    the emergency slack (their costs carry the slack penalty and are
    normally excluded from curve fitting).
    """

    fep: np.ndarray
    fepc: np.ndarray
    shed: np.ndarray

    def __post_init__(self):
        if not (self.fep.shape == self.fepc.shape == self.shed.shape):
            raise ValidationError("loss dataset arrays must share one shape")
        if self.fep.ndim != 2:
            raise ValidationError("loss dataset arrays must be 2-d")

    @property
    def n_scenarios(self) -> int:
        return self.fep.shape[0]

    @property
    def n_hours(self) -> int:
        return self.fep.shape[1]

    def hour_points(self, hour: int, include_shed: bool = False):
        """(fep, fepc) samples for a 1-based hour, flagged rows dropped."""
        if not 1 <= hour <= self.n_hours:
            raise ValidationError(f"hour must lie in 1..{self.n_hours}")
        i = hour - 1
        keep = np.ones(self.n_scenarios, dtype=bool) if include_shed else ~self.shed[:, i]
        return self.fep[keep, i], self.fepc[keep, i]

    def pooled_points(self, include_shed: bool = False):
        """(fep, fepc) samples across every hour of the day."""
        keep = np.ones_like(self.shed, dtype=bool) if include_shed else ~self.shed
        return self.fep[keep], self.fepc[keep]

    def to_frame(self) -> pd.DataFrame:
        s, h = np.meshgrid(np.arange(1, self.n_scenarios + 1),
                           np.arange(1, self.n_hours + 1), indexing="ij")
        return pd.DataFrame({
            "scenario": s.reshape(-1),
            "hour": h.reshape(-1),
            "fep": self.fep.reshape(-1),
            "fepc": self.fepc.reshape(-1),
            "shed_flag": self.shed.reshape(-1).astype(int),
        })

    def save_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g")

    @classmethod
    def load_csv(cls, path) -> "LossDataset":
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError) as exc:
            raise ParseError(f"cannot read loss dataset {path}: {exc}") from exc
        needed = {"scenario", "hour", "fep", "fepc", "shed_flag"}
        missing = needed - set(frame.columns)
        if missing:
            raise ParseError(f"{path}: missing columns {sorted(missing)}")
        scenarios = np.sort(frame["scenario"].unique())
        hours = np.sort(frame["hour"].unique())
        if len(frame) != len(scenarios) * len(hours):
            raise ParseError(f"{path}: expected one row per scenario and hour")
        frame = frame.sort_values(["scenario", "hour"])
        shape = (len(scenarios), len(hours))
        return cls(
            fep=frame["fep"].to_numpy(dtype=float).reshape(shape),
            fepc=frame["fepc"].to_numpy(dtype=float).reshape(shape),
            shed=frame["shed_flag"].to_numpy().reshape(shape).astype(bool),
        )


# Worker-side state for parallel dataset builds.  Each process builds its
# own engine once; forked children inherit nothing mutable from the parent.
_worker: dict = {}


def _init_worker(network, reserve, actual_load, ideal_hourly):
    _worker["engine"] = DispatchEngine(network, reserve=reserve,
                                       n_hours=actual_load.size)
    _worker["actual"] = LoadProfile(actual_load)
    _worker["ideal_hourly"] = ideal_hourly


def _solve_scenario(args):
    index, forecast_row = args
    engine: DispatchEngine = _worker["engine"]
    actual: LoadProfile = _worker["actual"]
    ideal_hourly: np.ndarray = _worker["ideal_hourly"]
    da = engine.solve_daed(LoadProfile(forecast_row))
    ib = engine.solve_ipb(da, actual, forecast_system=forecast_row)
    fepc_row = (ib.hourly_costs - ideal_hourly) / ideal_hourly * 100.0
    return index, fepc_row, ib.shed_flags.copy()


def build_loss_dataset(network: Network, actual: LoadProfile,
                       n_scenarios: int = 500, seed: int = 0,
                       reserve: ReserveConfig | None = None,
                       band: float = 0.1, jobs: int = 1) -> LossDataset:
    """Simulate ``n_scenarios`` forecast days and collect their hourly costs.

    ``jobs`` > 1 spreads the scenario solves over worker processes; results
    are assembled in scenario order either way, so the output is identical.
    """
    if jobs < 1:
        raise ValidationError("jobs must be >= 1")
    forecasts = generate_scenarios(actual, n_scenarios, seed, band=band)
    engine = DispatchEngine(network, reserve=reserve, n_hours=actual.n_hours)
    ideal = engine.solve_daed(actual)
    if np.any(ideal.hourly_costs <= 0.0):
        raise ValidationError("reference dispatch cost must be positive in every hour")

    fep = (forecasts - actual.system_load[None, :]) / actual.system_load[None, :]
    fepc = np.empty_like(fep)
    shed = np.zeros(fep.shape, dtype=bool)

    if jobs == 1:
        _init_worker(network, engine.reserve, actual.system_load,
                     ideal.hourly_costs)
        try:
            for s in range(n_scenarios):
                _, fepc_row, shed_row = _solve_scenario((s, forecasts[s]))
                fepc[s] = fepc_row
                shed[s] = shed_row
        finally:
            _worker.clear()
        return LossDataset(fep=fep, fepc=fepc, shed=shed)

    jobs = min(jobs, n_scenarios, os.cpu_count() or 1)
    with ProcessPoolExecutor(
        max_workers=jobs,
        initializer=_init_worker,
        initargs=(network, engine.reserve, actual.system_load,
                  ideal.hourly_costs),
    ) as pool:
        for s, fepc_row, shed_row in pool.map(
            _solve_scenario,
            ((s, forecasts[s]) for s in range(n_scenarios)),
            chunksize=max(1, n_scenarios // (4 * jobs)),
        ):
            fepc[s] = fepc_row
            shed[s] = shed_row
    return LossDataset(fep=fep, fepc=fepc, shed=shed)
