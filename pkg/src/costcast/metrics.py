"""Forecast evaluation: error statistics and dispatch-based cost scores.

Statistical metrics (MAPE, over/under-forecast shares) are pure array
functions.  The cost score re-runs the day-ahead and balancing dispatch
for every test day to price its forecast errors, per hour, then averages
across days.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .dispatch import DispatchEngine, ReserveConfig
from .errors import InfeasibleError, ValidationError
from .grid_model import LoadProfile, Network

HOURS = 24


def _check_pair(y_hat, y):
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y_hat.size != y.size:
        raise ValidationError("prediction and actual lengths differ")
    if y_hat.size == 0:
        raise ValidationError("empty input")
    if np.any(y <= 0.0):
        raise ValidationError("actuals must be strictly positive")
    return y_hat, y


def mape(y_hat, y) -> float:
    """Mean absolute relative error, in percent."""
    y_hat, y = _check_pair(y_hat, y)
    return float(np.mean(np.abs((y_hat - y) / y)) * 100.0)


def ofp_ufp(y_hat, y) -> tuple:
    """Shares of strictly positive and strictly negative errors, percent.

    Exact-zero errors belong to neither share, so the pair sums to 100
    only when none occur; see ``zero_error_share``.
    """
    y_hat, y = _check_pair(y_hat, y)
    err = y_hat - y
    n = err.size
    return (float(np.sum(err > 0.0) / n * 100.0),
            float(np.sum(err < 0.0) / n * 100.0))


def zero_error_share(y_hat, y) -> float:
    y_hat, y = _check_pair(y_hat, y)
    return float(np.sum(y_hat == y) / y.size * 100.0)


# ----------------------------------------------- dispatch-based scoring


_worker: dict = {}


def _init_day_worker(network, reserve):
    _worker["engine"] = DispatchEngine(network, reserve=reserve)


def _solve_day(args):
    index, forecast_row, actual_row = args
    engine: DispatchEngine = _worker["engine"]
    try:
        vals, ipb = engine.fepc_profile(LoadProfile(forecast_row),
                                        LoadProfile(actual_row))
    except InfeasibleError as exc:
        raise InfeasibleError(
            f"dispatch infeasible on test day {index}: {exc}",
            detail={"day": index, "hours": exc.detail}) from exc
    return index, vals, ipb.shed_flags.copy()


def fepc_by_day(network: Network, reserve: ReserveConfig | None,
                forecasts, actuals, jobs: int = 1):
    """Hourly cost-of-error matrix over test days.

    ``forecasts`` and ``actuals`` are (days, 24) system loads.  Returns
    (values, shed) both (days, 24): percent extra balancing cost, and the
    hours where balancing had to shed or spill energy.  Output is
    independent of ``jobs``.
    """
    forecasts = np.asarray(forecasts, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if forecasts.shape != actuals.shape:
        raise ValidationError("forecast and actual shapes differ")
    if forecasts.ndim != 2 or forecasts.shape[1] != HOURS:
        raise ValidationError(f"day matrices must be (days, {HOURS})")
    if jobs < 1:
        raise ValidationError("jobs must be >= 1")
    n_days = forecasts.shape[0]
    values = np.empty((n_days, HOURS))
    shed = np.zeros((n_days, HOURS), dtype=bool)

    if jobs == 1:
        _init_day_worker(network, reserve)
        try:
            for d in range(n_days):
                _, vals, flags = _solve_day((d, forecasts[d], actuals[d]))
                values[d] = vals
                shed[d] = flags
        finally:
            _worker.clear()
        return values, shed

    jobs = min(jobs, n_days, os.cpu_count() or 1)
    with ProcessPoolExecutor(
        max_workers=jobs,
        initializer=_init_day_worker,
        initargs=(network, reserve),
    ) as pool:
        for d, vals, flags in pool.map(
            _solve_day,
            ((d, forecasts[d], actuals[d]) for d in range(n_days)),
            chunksize=max(1, n_days // (4 * jobs)),
        ):
            values[d] = vals
            shed[d] = flags
    return values, shed


def mfepc(network: Network, reserve: ReserveConfig | None,
          forecasts, actuals, hour: int, jobs: int = 1) -> float:
    """Mean cost of forecast errors at one hour, over feasible test days.

    Days where balancing shed or spilled energy in any hour are excluded
    from the mean.
    """
    if not 1 <= hour <= HOURS:
        raise ValidationError("hour must lie in 1..24")
    values, shed = fepc_by_day(network, reserve, forecasts, actuals,
                               jobs=jobs)
    keep = ~shed.any(axis=1)
    if not keep.any():
        raise ValidationError("every test day was shed-flagged")
    return float(values[keep, hour - 1].mean())


# --------------------------------------------------------------- report


@dataclass(frozen=True)
class EvaluationReport:
    """Per-hour and daily-average scores for one model on one test split.

    ``hour_n`` counts the days contributing to each hour's cost score
    after dropping shed-flagged days; the error statistics use all days.
    """

    hour_mfepc: np.ndarray
    hour_mape: np.ndarray
    hour_ofp: np.ndarray
    hour_ufp: np.ndarray
    hour_n: np.ndarray
    excluded_days: int
    zero_share: float

    def __post_init__(self):
        for name in ("hour_mfepc", "hour_mape", "hour_ofp", "hour_ufp",
                     "hour_n"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (HOURS,):
                raise ValidationError(f"{name} must have {HOURS} entries")
            object.__setattr__(self, name, arr)
        if not (np.all(np.isfinite(self.hour_mfepc))
                and np.all(np.isfinite(self.hour_mape))):
            raise ValidationError("report entries must be finite")

    @property
    def daily_mfepc(self) -> float:
        return float(self.hour_mfepc.mean())

    @property
    def daily_mape(self) -> float:
        return float(self.hour_mape.mean())

    @property
    def daily_ofp(self) -> float:
        return float(self.hour_ofp.mean())

    @property
    def daily_ufp(self) -> float:
        return float(self.hour_ufp.mean())

    def to_frame(self) -> pd.DataFrame:
        rows = pd.DataFrame({
            "hour": [str(h) for h in range(1, HOURS + 1)],
            "mfepc": self.hour_mfepc,
            "mape": self.hour_mape,
            "ofp": self.hour_ofp,
            "ufp": self.hour_ufp,
            "n": self.hour_n,
        })
        daily = pd.DataFrame({
            "hour": ["daily"], "mfepc": [self.daily_mfepc],
            "mape": [self.daily_mape], "ofp": [self.daily_ofp],
            "ufp": [self.daily_ufp], "n": [int(self.hour_n.sum())],
        })
        return pd.concat([rows, daily], ignore_index=True)

    def save_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.10g",
                               lineterminator="\n")


def build_report(forecasts, actuals, fepc_values, shed) -> EvaluationReport:
    """Assemble the per-hour score table from day matrices.

    All four inputs are (days, 24).  Cost scores drop days with any shed
    flag; error statistics keep every day.
    """
    forecasts = np.asarray(forecasts, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    fepc_values = np.asarray(fepc_values, dtype=float)
    shed = np.asarray(shed, dtype=bool)
    for name, arr in (("forecasts", forecasts), ("actuals", actuals),
                      ("fepc_values", fepc_values), ("shed", shed)):
        if arr.shape != forecasts.shape:
            raise ValidationError(f"{name} shape differs")
    if forecasts.ndim != 2 or forecasts.shape[1] != HOURS:
        raise ValidationError(f"day matrices must be (days, {HOURS})")

    keep = ~shed.any(axis=1)
    if not keep.any():
        raise ValidationError("every test day was shed-flagged")
    hour_mfepc = fepc_values[keep].mean(axis=0)
    hour_n = np.full(HOURS, int(keep.sum()))
    hour_mape = np.empty(HOURS)
    hour_ofp = np.empty(HOURS)
    hour_ufp = np.empty(HOURS)
    for h in range(HOURS):
        hour_mape[h] = mape(forecasts[:, h], actuals[:, h])
        hour_ofp[h], hour_ufp[h] = ofp_ufp(forecasts[:, h], actuals[:, h])
    return EvaluationReport(
        hour_mfepc=hour_mfepc, hour_mape=hour_mape, hour_ofp=hour_ofp,
        hour_ufp=hour_ufp, hour_n=hour_n,
        excluded_days=int(np.sum(~keep)),
        zero_share=zero_error_share(forecasts.reshape(-1),
                                    actuals.reshape(-1)))
