"""Network data model and DC power flow.

A network is a bus/line graph with generators and battery storage attached
to buses, plus a fixed per-bus split of the system load.  Line flows follow
the DC approximation: the MW flow on a line is proportional to the voltage
angle difference across it, with the proportionality constant given by the
line susceptance (per unit) scaled by the system MVA base.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

TWO_PI = 2.0 * math.pi


def _require(cond, message):
    if not cond:
        raise ValidationError(message)


@dataclass(frozen=True)
class Generator:
    """Thermal unit with quadratic cost a*p^2 + b*p + c ($/h, p in MW)."""

    id: str
    bus: int
    cost_a: float
    cost_b: float
    cost_c: float
    p_max: float
    ramp_up: float
    ramp_down: float
    p_initial: float

    def __post_init__(self):
        _require(self.id, "generator id must be non-empty")
        _require(self.cost_a >= 0.0, f"generator {self.id}: cost_a must be >= 0")
        _require(self.p_max > 0.0, f"generator {self.id}: p_max must be > 0")
        _require(self.ramp_up > 0.0, f"generator {self.id}: ramp_up must be > 0")
        _require(self.ramp_down > 0.0, f"generator {self.id}: ramp_down must be > 0")
        _require(
            0.0 <= self.p_initial <= self.p_max,
            f"generator {self.id}: p_initial must lie in [0, p_max]",
        )


@dataclass(frozen=True)
class Line:
    """Transmission line between two buses."""

    from_bus: int
    to_bus: int
    susceptance: float  # per unit
    f_max: float  # MW

    def __post_init__(self):
        _require(
            self.from_bus != self.to_bus,
            f"line {self.from_bus}->{self.to_bus}: from_bus and to_bus must differ",
        )
        _require(
            self.susceptance > 0.0,
            f"line {self.from_bus}->{self.to_bus}: susceptance must be > 0",
        )
        _require(
            self.f_max > 0.0,
            f"line {self.from_bus}->{self.to_bus}: f_max must be > 0",
        )


@dataclass(frozen=True)
class Bess:
    """Battery energy storage system.

    Discharge appears on the grid side as an injection priced at
    ``price_discharge`` $/MWh; charge as a withdrawal priced at
    ``price_charge`` $/MWh.  The stored energy is tracked hourly between 0
    and ``energy_max``.
    """

    id: str
    bus: int
    price_discharge: float
    price_charge: float
    discharge_max: float  # MW
    charge_max: float  # MW
    energy_max: float  # MWh
    energy_initial: float  # MWh

    def __post_init__(self):
        _require(self.id, "bess id must be non-empty")
        _require(self.price_discharge > 0.0, f"bess {self.id}: price_discharge must be > 0")
        _require(self.price_charge > 0.0, f"bess {self.id}: price_charge must be > 0")
        _require(self.discharge_max > 0.0, f"bess {self.id}: discharge_max must be > 0")
        _require(self.charge_max > 0.0, f"bess {self.id}: charge_max must be > 0")
        _require(self.energy_max > 0.0, f"bess {self.id}: energy_max must be > 0")
        _require(
            0.0 <= self.energy_initial <= self.energy_max,
            f"bess {self.id}: energy_initial must lie in [0, energy_max]",
        )


@dataclass(frozen=True)
class Network:
    """Immutable bus/line system with attached units and a load split.

    ``load_fractions[k]`` is the share of the system load served at bus k;
    the fractions are non-negative and sum to 1.
    """

    n_buses: int
    reference_bus: int
    mva_base: float
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    bess: tuple[Bess, ...]
    load_fractions: np.ndarray
    name: str = "network"

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "bess", tuple(self.bess))
        fr = np.asarray(self.load_fractions, dtype=float)
        fr.setflags(write=False)
        object.__setattr__(self, "load_fractions", fr)

        k = self.n_buses
        _require(k >= 1, "n_buses must be >= 1")
        _require(self.mva_base > 0.0, "mva_base must be > 0")
        _require(0 <= self.reference_bus < k, "reference_bus out of range")
        _require(fr.ndim == 1 and fr.size == k, "load_fractions must have one entry per bus")
        _require(np.all(fr >= 0.0), "load_fractions must be non-negative")
        _require(
            abs(float(fr.sum()) - 1.0) <= 1e-9,
            f"load_fractions must sum to 1 (got {float(fr.sum()):.12g})",
        )
        for ln in self.lines:
            _require(
                0 <= ln.from_bus < k and 0 <= ln.to_bus < k,
                f"line {ln.from_bus}->{ln.to_bus}: bus index out of range",
            )
        seen = set()
        for g in self.generators:
            _require(0 <= g.bus < k, f"generator {g.id}: bus index out of range")
            _require(g.id not in seen, f"duplicate unit id {g.id!r}")
            seen.add(g.id)
        for b in self.bess:
            _require(0 <= b.bus < k, f"bess {b.id}: bus index out of range")
            _require(b.id not in seen, f"duplicate unit id {b.id!r}")
            seen.add(b.id)
        _require(len(self.generators) >= 1, "network needs at least one generator")
        if k > 1:
            self._check_connected()

    def _check_connected(self):
        adj = [[] for _ in range(self.n_buses)]
        for ln in self.lines:
            adj[ln.from_bus].append(ln.to_bus)
            adj[ln.to_bus].append(ln.from_bus)
        seen = {self.reference_bus}
        stack = [self.reference_bus]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != self.n_buses:
            missing = sorted(set(range(self.n_buses)) - seen)
            raise ValidationError(f"network is not connected; unreachable buses {missing}")

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def n_generators(self):
        return len(self.generators)

    @property
    def n_bess(self):
        return len(self.bess)

    def generators_at(self, bus):
        """Indices into ``generators`` of the units at the given bus."""
        return tuple(j for j, g in enumerate(self.generators) if g.bus == bus)

    def bess_at(self, bus):
        return tuple(j for j, b in enumerate(self.bess) if b.bus == bus)

    def max_marginal_cost(self):
        """Largest generator marginal cost 2*a*p_max + b over all units."""
        return max(2.0 * g.cost_a * g.p_max + g.cost_b for g in self.generators)


@dataclass(frozen=True)
class LoadProfile:
    """Hourly system load in MW."""

    system_load: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.system_load, dtype=float)
        y.setflags(write=False)
        object.__setattr__(self, "system_load", y)
        _require(y.ndim == 1 and y.size >= 1, "system_load must be a non-empty 1-D array")
        _require(np.all(np.isfinite(y)), "system_load must be finite")
        _require(np.all(y > 0.0), "system_load must be positive")

    @property
    def n_hours(self):
        return int(self.system_load.size)

    def per_bus(self, network: Network) -> np.ndarray:
        """(n_buses, n_hours) bus-level loads using the network's split."""
        return np.outer(network.load_fractions, self.system_load)

    def scaled(self, factors) -> "LoadProfile":
        """New profile with each hour multiplied by the matching factor."""
        f = np.asarray(factors, dtype=float)
        if f.shape != self.system_load.shape:
            raise ValidationError("scaling factors must match the number of hours")
        return LoadProfile(self.system_load * f)


# ---------------------------------------------------------------------------
# JSON / CSV loading


def _get(obj, key, kind, where):
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ParseError(f"{where}: field {key!r} must be a number")
        return float(val)
    if kind is int:
        if not isinstance(val, int) or isinstance(val, bool):
            raise ParseError(f"{where}: field {key!r} must be an integer")
        return val
    if kind is str:
        if not isinstance(val, str):
            raise ParseError(f"{where}: field {key!r} must be a string")
        return val
    if kind is list:
        if not isinstance(val, list):
            raise ParseError(f"{where}: field {key!r} must be a list")
        return val
    raise AssertionError(kind)


def load_network(path) -> Network:
    """Read a network description from a JSON file.

    Expected top-level keys: ``buses`` (count), ``reference_bus``,
    ``mva_base``, ``lines``, ``generators``, ``bess``, ``load_fractions``.
    Bus indices are 0-based.  Raises :class:`ParseError` for malformed input
    and :class:`ValidationError` for structurally invalid networks.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read network file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"network file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError(f"network file {path}: top level must be an object")

    where = str(path)
    n_buses = _get(raw, "buses", int, where)
    ref = _get(raw, "reference_bus", int, where)
    mva = _get(raw, "mva_base", float, where)

    lines = []
    for i, item in enumerate(_get(raw, "lines", list, where)):
        w = f"{where}: lines[{i}]"
        lines.append(
            Line(
                from_bus=_get(item, "from_bus", int, w),
                to_bus=_get(item, "to_bus", int, w),
                susceptance=_get(item, "susceptance", float, w),
                f_max=_get(item, "f_max", float, w),
            )
        )
    gens = []
    for i, item in enumerate(_get(raw, "generators", list, where)):
        w = f"{where}: generators[{i}]"
        gens.append(
            Generator(
                id=_get(item, "id", str, w),
                bus=_get(item, "bus", int, w),
                cost_a=_get(item, "cost_a", float, w),
                cost_b=_get(item, "cost_b", float, w),
                cost_c=_get(item, "cost_c", float, w),
                p_max=_get(item, "p_max", float, w),
                ramp_up=_get(item, "ramp_up", float, w),
                ramp_down=_get(item, "ramp_down", float, w),
                p_initial=_get(item, "p_initial", float, w),
            )
        )
    bess = []
    for i, item in enumerate(raw.get("bess", [])):
        w = f"{where}: bess[{i}]"
        bess.append(
            Bess(
                id=_get(item, "id", str, w),
                bus=_get(item, "bus", int, w),
                price_discharge=_get(item, "price_discharge", float, w),
                price_charge=_get(item, "price_charge", float, w),
                discharge_max=_get(item, "discharge_max", float, w),
                charge_max=_get(item, "charge_max", float, w),
                energy_max=_get(item, "energy_max", float, w),
                energy_initial=_get(item, "energy_initial", float, w),
            )
        )
    fractions = _get(raw, "load_fractions", list, where)
    name = raw.get("name", "network")
    return Network(
        n_buses=n_buses,
        reference_bus=ref,
        mva_base=mva,
        lines=tuple(lines),
        generators=tuple(gens),
        bess=tuple(bess),
        load_fractions=np.asarray(fractions, dtype=float),
        name=str(name),
    )


def load_profile_from_csv(path) -> LoadProfile:
    """Read an hourly load profile from a ``hour,system_load_mw`` CSV."""
    rows = []
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "system_load_mw" not in reader.fieldnames:
                raise ParseError(f"{path}: expected columns 'hour,system_load_mw'")
            for rec in reader:
                try:
                    rows.append((int(rec["hour"]), float(rec["system_load_mw"])))
                except (TypeError, KeyError, ValueError) as exc:
                    raise ParseError(f"{path}: bad row {rec!r}") from exc
    except OSError as exc:
        raise ParseError(f"cannot read load file {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no data rows")
    rows.sort(key=lambda t: t[0])
    hours = [h for h, _ in rows]
    if hours != list(range(1, len(rows) + 1)):
        raise ParseError(f"{path}: hour column must run 1..{len(rows)} without gaps")
    return LoadProfile(np.array([v for _, v in rows]))


# ---------------------------------------------------------------------------
# DC power flow


@dataclass(frozen=True)
class FlowModel:
    """Linear flow/angle relations for a network under the DC approximation.

    ``incidence`` is the (n_lines, n_buses) matrix with +1 at each line's
    from-bus and -1 at its to-bus.  ``flow_matrix`` maps bus angles (rad) to
    line flows (MW): ``flows = flow_matrix @ angles``.
    """

    network: Network
    incidence: np.ndarray = field(init=False)
    flow_matrix: np.ndarray = field(init=False)

    def __post_init__(self):
        net = self.network
        inc = np.zeros((net.n_lines, net.n_buses))
        for idx, ln in enumerate(net.lines):
            inc[idx, ln.from_bus] = 1.0
            inc[idx, ln.to_bus] = -1.0
        coeff = np.array([ln.susceptance * net.mva_base for ln in net.lines])
        fm = coeff[:, None] * inc
        inc.setflags(write=False)
        fm.setflags(write=False)
        object.__setattr__(self, "incidence", inc)
        object.__setattr__(self, "flow_matrix", fm)

    @property
    def line_coefficients(self):
        """MW per radian of angle difference for each line."""
        return np.array([ln.susceptance * self.network.mva_base for ln in self.network.lines])

    def solve_injections(self, injections):
        """Angles and flows produced by the given net bus injections (MW).

        ``injections`` has shape (n_buses,) or (n_buses, n_hours) and must
        sum to ~0 per hour (power balance).  Returns ``(angles, flows)`` with
        the reference bus pinned at angle 0.
        """
        inj = np.asarray(injections, dtype=float)
        single = inj.ndim == 1
        if single:
            inj = inj[:, None]
        if inj.shape[0] != self.network.n_buses:
            raise ValidationError("injections must have one row per bus")
        scale = max(1.0, float(np.abs(inj).sum(axis=0).max()))
        imbalance = float(np.abs(inj.sum(axis=0)).max())
        if imbalance > 1e-6 * scale:
            raise ValidationError(
                f"injections must sum to zero per hour (worst imbalance {imbalance:.6g} MW)"
            )
        # Weighted graph Laplacian, grounded at the reference bus.
        lap = self.incidence.T @ self.flow_matrix
        keep = [k for k in range(self.network.n_buses) if k != self.network.reference_bus]
        theta = np.zeros_like(inj)
        theta[keep] = np.linalg.solve(lap[np.ix_(keep, keep)], inj[keep])
        flows = self.flow_matrix @ theta
        if single:
            return theta[:, 0], flows[:, 0]
        return theta, flows
