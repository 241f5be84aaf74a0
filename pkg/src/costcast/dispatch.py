"""Day-ahead dispatch, intraday balancing, and forecast-error cost.

The day-ahead problem (``solve_daed``) schedules generators over the horizon
against a load forecast: quadratic generation cost, per-bus power balance on
the DC network, capacity, ramping (including from the pre-horizon operating
point), flow and angle limits.

The intraday problem (``solve_ipb``) takes the day-ahead schedule as given
and serves the realized load: generators may deviate from schedule only
within a reserve band, battery storage can inject (discharge) or absorb
(charge) at premium balancing prices with charge/discharge exclusivity
enforced by binary pairs, and a last-resort slack can shed or spill load at
a value-of-lost-load price so extreme scenarios stay solvable.

``fepc`` combines the two: the extra cost of serving the realized load
through the day-ahead schedule built on a forecast, relative to the cost of
the dispatch that knew the realized load all along, expressed in percent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CostcastError, InfeasibleError, ValidationError
from .grid_model import TWO_PI, FlowModel, LoadProfile, Network
from .optimizer import (
    MixedBinaryQp,
    QuadraticProgram,
    SolverCache,
    solve_mixed_binary,
    solve_qp,
)

SHED_FLAG_MW = 1e-6  # slack use above this marks a scenario as shed/spill


@dataclass(frozen=True)
class ReserveConfig:
    """Intraday balancing settings.

    Generators may deviate from their day-ahead schedule by at most
    ``up_fraction`` (resp. ``down_fraction``) of their capacity in each
    hour.  ``voll`` prices the shed/spill slack in $/MWh; when None it
    defaults to 10x the highest balancing (battery) price, or 10x the
    highest generator marginal cost if the network has no storage.
    """

    up_fraction: float = 0.2
    down_fraction: float = 0.2
    voll: float | None = None

    def __post_init__(self):
        if not (0.0 < self.up_fraction <= 1.0):
            raise ValidationError("up_fraction must lie in (0, 1]")
        if not (0.0 < self.down_fraction <= 1.0):
            raise ValidationError("down_fraction must lie in (0, 1]")
        if self.voll is not None and self.voll <= 0.0:
            raise ValidationError("voll must be > 0")

    def voll_price(self, network: Network) -> float:
        if self.voll is not None:
            return self.voll
        if network.n_bess:
            return 10.0 * max(
                max(b.price_discharge, b.price_charge) for b in network.bess
            )
        return 10.0 * network.max_marginal_cost()


@dataclass(frozen=True)
class DaedSolution:
    """Day-ahead schedule.  Arrays are (units, hours); hours are 0-based."""

    p: np.ndarray
    flows: np.ndarray
    angles: np.ndarray
    hourly_costs: np.ndarray
    total_cost: float

    def cost_at(self, hour: int) -> float:
        """Cost of the schedule in the given 1-based hour."""
        return float(self.hourly_costs[hour - 1])


@dataclass(frozen=True)
class IpbSolution:
    """Intraday balancing outcome against a fixed day-ahead schedule."""

    p_adjusted: np.ndarray  # (gens, hours)
    flows: np.ndarray
    angles: np.ndarray
    bess_discharge: np.ndarray  # (bess, hours) MW
    bess_charge: np.ndarray  # (bess, hours) MW
    discharge_enabled: np.ndarray  # (bess, hours) in {0, 1}
    energy: np.ndarray  # (bess, hours) MWh at end of each hour
    shed: np.ndarray  # (hours,) MW of load dropped
    spill: np.ndarray  # (hours,) MW of surplus dumped
    shed_flags: np.ndarray  # (hours,) True where slack absorbed the imbalance
    hourly_costs: np.ndarray
    total_cost: float

    @property
    def shed_flag(self) -> bool:
        return bool(self.shed_flags.any())

    def cost_at(self, hour: int) -> float:
        return float(self.hourly_costs[hour - 1])


class _Layout:
    """Flat variable indexing for the dispatch QPs.

    Variables are grouped in blocks, each stored hour-major within the
    block: index(block, unit, hour) = offset + unit * n_hours + hour.
    """

    def __init__(self, network: Network, n_hours: int, balancing: bool):
        J, L, K, X = (network.n_generators, network.n_lines,
                      network.n_buses, network.n_bess)
        N = n_hours
        self.N = N
        off = 0
        self.p = off; off += J * N
        self.f = off; off += L * N
        self.d = off; off += K * N
        if balancing:
            self.u_pos = off; off += X * N
            self.u_neg = off; off += X * N
            self.e = off; off += X * N
            self.v_pos = off; off += X * N
            self.v_neg = off; off += X * N
            self.shed = off; off += N
            self.spill = off; off += N
        self.n = off

    def idx(self, base, unit, hour):
        return base + unit * self.N + hour

    def block(self, base, count):
        """(count, n_hours) index grid for a whole block."""
        return base + np.arange(count * self.N).reshape(count, self.N)


def _network_rows(net: Network, lay: _Layout, n_hours: int):
    """Equality rows shared by both problems: per-bus balance, the line
    flow/angle relation, and the pinned reference angle.

    Returns (a_eq, balance_row_of[k, i]) with balance rows first, so the
    right-hand side can be filled with bus loads per solve.
    """
    fm = FlowModel(net)
    N = n_hours
    K, L = net.n_buses, net.n_lines
    rows = []
    # balance: sum of generation at bus - outgoing flows (+ balancing terms,
    # added by the caller) == bus load
    for k in range(K):
        gens = net.generators_at(k)
        for i in range(N):
            r = np.zeros(lay.n)
            for j in gens:
                r[lay.idx(lay.p, j, i)] = 1.0
            for ell, ln in enumerate(net.lines):
                a = fm.incidence[ell, k]
                if a:
                    r[lay.idx(lay.f, ell, i)] = -a
            rows.append(r)
    # flow definition: f - coeff * (angle_from - angle_to) == 0
    coeff = fm.line_coefficients
    for ell, ln in enumerate(net.lines):
        for i in range(N):
            r = np.zeros(lay.n)
            r[lay.idx(lay.f, ell, i)] = 1.0
            r[lay.idx(lay.d, ln.from_bus, i)] = -coeff[ell]
            r[lay.idx(lay.d, ln.to_bus, i)] = coeff[ell]
            rows.append(r)
    # reference angle
    for i in range(N):
        r = np.zeros(lay.n)
        r[lay.idx(lay.d, net.reference_bus, i)] = 1.0
        rows.append(r)
    return np.array(rows)


def _ramp_rows(net: Network, lay: _Layout):
    """Generator ramp limits as a_ub rows plus their right-hand side.

    Hour 0 ramps from each generator's pre-horizon operating point.
    """
    N = lay.N
    rows, rhs, tags = [], [], []
    for j, g in enumerate(net.generators):
        for i in range(N):
            up = np.zeros(lay.n)
            up[lay.idx(lay.p, j, i)] = 1.0
            if i > 0:
                up[lay.idx(lay.p, j, i - 1)] = -1.0
                rhs.append(g.ramp_up)
            else:
                rhs.append(g.ramp_up + g.p_initial)
            rows.append(up)
            tags.append(("ramp_up", j, i))
            dn = np.zeros(lay.n)
            dn[lay.idx(lay.p, j, i)] = -1.0
            if i > 0:
                dn[lay.idx(lay.p, j, i - 1)] = 1.0
                rhs.append(g.ramp_down)
            else:
                rhs.append(g.ramp_down - g.p_initial)
            rows.append(dn)
            tags.append(("ramp_down", j, i))
    return np.array(rows), np.array(rhs), tags


def _base_bounds(net: Network, lay: _Layout):
    lb = np.full(lay.n, -np.inf)
    ub = np.full(lay.n, np.inf)
    for j, g in enumerate(net.generators):
        sl = slice(lay.idx(lay.p, j, 0), lay.idx(lay.p, j, 0) + lay.N)
        lb[sl] = 0.0
        ub[sl] = g.p_max
    for ell, ln in enumerate(net.lines):
        sl = slice(lay.idx(lay.f, ell, 0), lay.idx(lay.f, ell, 0) + lay.N)
        lb[sl] = -ln.f_max
        ub[sl] = ln.f_max
    lb[lay.d:lay.d + net.n_buses * lay.N] = -TWO_PI
    ub[lay.d:lay.d + net.n_buses * lay.N] = TWO_PI
    return lb, ub


class DispatchEngine:
    """Prebuilt problem structure for repeated dispatch on one network.

    Building the constraint matrices and factorizing them dominates a
    single solve; an engine amortizes that over many scenarios.  All the
    module-level entry points accept an optional ``engine=``.
    """

    def __init__(self, network: Network, reserve: ReserveConfig | None = None,
                 n_hours: int = 24):
        self.network = network
        self.reserve = reserve or ReserveConfig()
        self.n_hours = n_hours
        self.cache = SolverCache()
        self._build_daed()
        self._build_ipb()

    # -- day-ahead ---------------------------------------------------------

    def _build_daed(self):
        net, N = self.network, self.n_hours
        lay = _Layout(net, N, balancing=False)
        a_eq = _network_rows(net, lay, N)
        a_ub, b_ub, ramp_tags = _ramp_rows(net, lay)
        lb, ub = _base_bounds(net, lay)
        Qd = np.zeros(lay.n)
        q = np.zeros(lay.n)
        for j, g in enumerate(net.generators):
            sl = slice(lay.idx(lay.p, j, 0), lay.idx(lay.p, j, 0) + N)
            Qd[sl] = 2.0 * g.cost_a
            q[sl] = g.cost_b
        self._da = {
            "lay": lay, "Q": np.diag(Qd), "q": q, "a_eq": a_eq,
            "a_ub": a_ub, "b_ub": b_ub, "lb": lb, "ub": ub,
            "ramp_tags": ramp_tags,
        }

    def _daed_start(self, bus_loads):
        """Feasible-balance start: dispatch proportional to capacity, with
        flows and angles solved from the resulting injections."""
        net, N = self.network, self.n_hours
        lay = self._da["lay"]
        caps = np.array([g.p_max for g in net.generators])
        share = caps / caps.sum()
        system = bus_loads.sum(axis=0)
        p0 = np.outer(share, system)
        inj = -bus_loads.copy()
        for j, g in enumerate(net.generators):
            inj[g.bus] += p0[j]
        theta, flows = FlowModel(net).solve_injections(inj)
        x0 = np.zeros(lay.n)
        x0[lay.block(lay.p, net.n_generators)] = p0
        x0[lay.block(lay.f, net.n_lines)] = flows
        x0[lay.block(lay.d, net.n_buses)] = theta
        return x0

    def solve_daed(self, loads: LoadProfile) -> DaedSolution:
        net, N = self.network, self.n_hours
        if loads.n_hours != N:
            raise ValidationError(f"load profile has {loads.n_hours} hours, engine expects {N}")
        da = self._da
        lay = da["lay"]
        bus_loads = loads.per_bus(net)
        b_eq = np.zeros(da["a_eq"].shape[0])
        b_eq[: net.n_buses * N] = bus_loads.reshape(-1)
        qp = QuadraticProgram(da["Q"], da["q"], da["a_eq"], b_eq,
                              da["a_ub"], da["b_ub"], da["lb"], da["ub"])
        sol = solve_qp(qp, x0=self._daed_start(bus_loads),
                       cache=self.cache, cache_key="daed")
        if sol.status == "infeasible":
            hours = _certificate_hours(sol, lay, da["ramp_tags"])
            raise InfeasibleError(
                f"day-ahead dispatch infeasible (load exceeds deliverable "
                f"capacity around hours {hours})", detail=hours)
        if sol.status != "optimal":
            raise CostcastError(f"day-ahead dispatch solve ended with status {sol.status}")
        p = sol.x[lay.block(lay.p, net.n_generators)]
        flows = sol.x[lay.block(lay.f, net.n_lines)]
        angles = sol.x[lay.block(lay.d, net.n_buses)]
        a = np.array([g.cost_a for g in net.generators])
        b = np.array([g.cost_b for g in net.generators])
        c = np.array([g.cost_c for g in net.generators])
        hourly = (a[:, None] * p ** 2 + b[:, None] * p + c[:, None]).sum(axis=0)
        return DaedSolution(p=p, flows=flows, angles=angles, hourly_costs=hourly,
                            total_cost=float(hourly.sum()))

    # -- intraday ----------------------------------------------------------

    def _build_ipb(self):
        net, N = self.network, self.n_hours
        lay = _Layout(net, N, balancing=True)
        a_eq = _network_rows(net, lay, N)
        n_net_rows = a_eq.shape[0]
        # balancing terms enter the balance rows: battery net injection and
        # the shed/spill slack, the latter split across buses like the load
        for k in range(net.n_buses):
            frac = net.load_fractions[k]
            for i in range(N):
                r = a_eq[k * N + i]
                for xb in net.bess_at(k):
                    r[lay.idx(lay.u_pos, xb, i)] = 1.0
                    r[lay.idx(lay.u_neg, xb, i)] = -1.0
                if frac:
                    r[lay.idx(lay.shed, 0, i)] = frac
                    r[lay.idx(lay.spill, 0, i)] = -frac
        # stored-energy bookkeeping: e_i - e_{i-1} - u_pos_i + u_neg_i == 0,
        # with e_0 fixed at the initial fill (moved to the right-hand side)
        energy_rows = []
        for xb in range(net.n_bess):
            for i in range(N):
                r = np.zeros(lay.n)
                r[lay.idx(lay.e, xb, i)] = 1.0
                if i > 0:
                    r[lay.idx(lay.e, xb, i - 1)] = -1.0
                r[lay.idx(lay.u_pos, xb, i)] = -1.0
                r[lay.idx(lay.u_neg, xb, i)] = 1.0
                energy_rows.append(r)
        if energy_rows:
            a_eq = np.vstack([a_eq, np.array(energy_rows)])

        a_ub, b_ub, ramp_tags = _ramp_rows(net, lay)
        link_rows, link_tags = [], []
        for xb, bat in enumerate(net.bess):
            for i in range(N):
                r = np.zeros(lay.n)
                r[lay.idx(lay.u_pos, xb, i)] = 1.0
                r[lay.idx(lay.v_pos, xb, i)] = -bat.discharge_max
                link_rows.append(r)
                link_tags.append(("link_discharge", xb, i))
                r = np.zeros(lay.n)
                r[lay.idx(lay.u_neg, xb, i)] = 1.0
                r[lay.idx(lay.v_neg, xb, i)] = -bat.charge_max
                link_rows.append(r)
                link_tags.append(("link_charge", xb, i))
        if link_rows:
            a_ub = np.vstack([a_ub, np.array(link_rows)])
            b_ub = np.concatenate([b_ub, np.zeros(len(link_rows))])

        lb, ub = _base_bounds(net, lay)
        for xb, bat in enumerate(net.bess):
            # the linking rows already cap u_pos/u_neg via the binaries, and
            # the pairing equality pins v_neg to the boxed v_pos; adding
            # explicit bounds for those would duplicate constraints and
            # leave every vertex of the problem degenerate
            for base in (lay.u_pos, lay.u_neg):
                sl = slice(lay.idx(base, xb, 0), lay.idx(base, xb, 0) + N)
                lb[sl] = 0.0
            sl = slice(lay.idx(lay.e, xb, 0), lay.idx(lay.e, xb, 0) + N)
            lb[sl] = 0.0
            ub[sl] = bat.energy_max
            sl = slice(lay.idx(lay.v_pos, xb, 0), lay.idx(lay.v_pos, xb, 0) + N)
            lb[sl] = 0.0
            ub[sl] = 1.0
        lb[lay.shed:lay.shed + 2 * N] = 0.0  # shed and spill are adjacent blocks

        voll = self.reserve.voll_price(net)
        Qd = np.zeros(lay.n)
        q = np.zeros(lay.n)
        for j, g in enumerate(net.generators):
            sl = slice(lay.idx(lay.p, j, 0), lay.idx(lay.p, j, 0) + N)
            Qd[sl] = 2.0 * g.cost_a
            q[sl] = g.cost_b
        for xb, bat in enumerate(net.bess):
            q[lay.idx(lay.u_pos, xb, 0):lay.idx(lay.u_pos, xb, 0) + N] = bat.price_discharge
            q[lay.idx(lay.u_neg, xb, 0):lay.idx(lay.u_neg, xb, 0) + N] = bat.price_charge
        q[lay.shed:lay.shed + 2 * N] = voll

        pairs = tuple(
            (lay.idx(lay.v_pos, xb, i), lay.idx(lay.v_neg, xb, i))
            for xb in range(net.n_bess) for i in range(N)
        )
        self._ib = {
            "lay": lay, "Q": np.diag(Qd), "q": q, "a_eq": a_eq,
            "n_net_rows": n_net_rows, "a_ub": a_ub, "b_ub": b_ub,
            "lb": lb, "ub": ub, "pairs": pairs, "voll": voll,
            "ramp_tags": ramp_tags, "link_tags": link_tags,
        }

    def _ipb_start(self, daed: DaedSolution, actual_system, forecast_system):
        """Feasible start: keep the day-ahead schedule and absorb the whole
        forecast miss with the shed/spill slack."""
        net, N = self.network, self.n_hours
        lay = self._ib["lay"]
        x0 = np.zeros(lay.n)
        x0[lay.block(lay.p, net.n_generators)] = daed.p
        x0[lay.block(lay.f, net.n_lines)] = daed.flows
        x0[lay.block(lay.d, net.n_buses)] = daed.angles
        for xb, bat in enumerate(net.bess):
            sl = slice(lay.idx(lay.e, xb, 0), lay.idx(lay.e, xb, 0) + N)
            x0[sl] = bat.energy_initial
            x0[lay.idx(lay.v_pos, xb, 0):lay.idx(lay.v_pos, xb, 0) + N] = 1.0
        miss = actual_system - forecast_system
        x0[lay.shed:lay.shed + N] = np.maximum(miss, 0.0)
        x0[lay.spill:lay.spill + N] = np.maximum(-miss, 0.0)
        return x0

    def solve_ipb(self, daed: DaedSolution, actual: LoadProfile,
                  forecast_system=None) -> IpbSolution:
        net, N = self.network, self.n_hours
        if actual.n_hours != N:
            raise ValidationError(f"load profile has {actual.n_hours} hours, engine expects {N}")
        ib = self._ib
        lay = ib["lay"]
        bus_loads = actual.per_bus(net)
        b_eq = np.zeros(ib["a_eq"].shape[0])
        b_eq[: net.n_buses * N] = bus_loads.reshape(-1)
        for xb, bat in enumerate(net.bess):
            # hour-0 row of the energy bookkeeping carries the initial fill
            b_eq[ib["n_net_rows"] + xb * N] = bat.energy_initial

        lb, ub = ib["lb"].copy(), ib["ub"].copy()
        ru = self.reserve.up_fraction
        rd = self.reserve.down_fraction
        for j, g in enumerate(net.generators):
            sl = slice(lay.idx(lay.p, j, 0), lay.idx(lay.p, j, 0) + N)
            lb[sl] = np.maximum(0.0, daed.p[j] - rd * g.p_max)
            ub[sl] = np.minimum(g.p_max, daed.p[j] + ru * g.p_max)

        if forecast_system is None:
            # reconstruct the system forecast the schedule was built for
            forecast_system = daed.p.sum(axis=0)
        base = QuadraticProgram(ib["Q"], ib["q"], ib["a_eq"], b_eq,
                                ib["a_ub"], ib["b_ub"], lb, ub)
        x0 = self._ipb_start(daed, actual.system_load, forecast_system)
        if ib["pairs"]:
            sol = solve_mixed_binary(MixedBinaryQp(base, ib["pairs"]), x0=x0,
                                     cache=self.cache, cache_key="ipb")
        else:
            sol = solve_qp(base, x0=x0, cache=self.cache, cache_key="ipb")
        if sol.status == "infeasible":
            hours = _certificate_hours(sol, lay, ib["ramp_tags"] + ib["link_tags"])
            raise InfeasibleError(
                f"intraday balancing infeasible around hours {hours}", detail=hours)
        if sol.status != "optimal":
            raise CostcastError(f"intraday balancing solve ended with status {sol.status}")

        p = sol.x[lay.block(lay.p, net.n_generators)]
        flows = sol.x[lay.block(lay.f, net.n_lines)]
        angles = sol.x[lay.block(lay.d, net.n_buses)]
        if net.n_bess:
            u_pos = sol.x[lay.block(lay.u_pos, net.n_bess)]
            u_neg = sol.x[lay.block(lay.u_neg, net.n_bess)]
            energy = sol.x[lay.block(lay.e, net.n_bess)]
            v_pos = np.rint(sol.x[lay.block(lay.v_pos, net.n_bess)]).astype(int)
        else:
            u_pos = u_neg = energy = np.zeros((0, N))
            v_pos = np.zeros((0, N), dtype=int)
        shed = sol.x[lay.shed:lay.shed + N].copy()
        spill = sol.x[lay.spill:lay.spill + N].copy()

        a = np.array([g.cost_a for g in net.generators])
        b = np.array([g.cost_b for g in net.generators])
        c = np.array([g.cost_c for g in net.generators])
        hourly = (a[:, None] * p ** 2 + b[:, None] * p + c[:, None]).sum(axis=0)
        if net.n_bess:
            cp = np.array([bat.price_discharge for bat in net.bess])
            cm = np.array([bat.price_charge for bat in net.bess])
            hourly = hourly + (cp[:, None] * u_pos + cm[:, None] * u_neg).sum(axis=0)
        hourly = hourly + ib["voll"] * (shed + spill)
        flags = (shed + spill) > SHED_FLAG_MW
        return IpbSolution(
            p_adjusted=p, flows=flows, angles=angles,
            bess_discharge=u_pos, bess_charge=u_neg,
            discharge_enabled=v_pos, energy=energy,
            shed=shed, spill=spill, shed_flags=flags,
            hourly_costs=hourly, total_cost=float(hourly.sum()),
        )

    def fepc_profile(self, forecast: LoadProfile, actual: LoadProfile,
                     daed_forecast: DaedSolution | None = None):
        """Cost-increase percentages for every hour, plus the balancing run.

        Returns ``(fepc, ipb)`` with ``fepc`` of shape (hours,).
        """
        if daed_forecast is None:
            daed_forecast = self.solve_daed(forecast)
        ipb = self.solve_ipb(daed_forecast, actual,
                             forecast_system=forecast.system_load)
        ideal = self.solve_daed(actual)
        denom = ideal.hourly_costs
        if np.any(denom <= 0.0):
            raise ValidationError("ideal dispatch cost must be positive in every hour")
        vals = (ipb.hourly_costs - denom) / denom * 100.0
        return vals, ipb


def _certificate_hours(sol, lay, a_ub_tags):
    """Map the rows named in an infeasibility certificate to 1-based hours.

    Bound rows carry a flat variable index; every variable block is laid
    out hour-minor with an offset that is a multiple of the horizon, so the
    index modulo the horizon is the hour.  Rows of a_ub carry their own
    (kind, unit, hour) tag.
    """
    hours = set()
    for tag in sol.info.get("certificate_rows", []):
        kind, idx = tag
        if kind in ("lb", "ub"):
            hours.add(idx % lay.N + 1)
        else:
            hours.add(a_ub_tags[idx][2] + 1)
    return sorted(hours)


# ---------------------------------------------------------------------------
# module-level entry points


def solve_daed(network: Network, loads: LoadProfile, engine: DispatchEngine | None = None,
               n_hours: int | None = None) -> DaedSolution:
    """Day-ahead dispatch of the network against an hourly load profile."""
    if engine is None:
        engine = DispatchEngine(network, n_hours=n_hours or loads.n_hours)
    return engine.solve_daed(loads)


def solve_ipb(network: Network, daed: DaedSolution, actual: LoadProfile,
              reserve: ReserveConfig | None = None,
              engine: DispatchEngine | None = None) -> IpbSolution:
    """Intraday balancing of the realized load against a day-ahead schedule."""
    if engine is None:
        engine = DispatchEngine(network, reserve=reserve, n_hours=actual.n_hours)
    return engine.solve_ipb(daed, actual)


def fepc(network: Network, forecast: LoadProfile, actual: LoadProfile, hour: int,
         reserve: ReserveConfig | None = None,
         engine: DispatchEngine | None = None) -> float:
    """Forecast-error percentage cost at a 1-based hour.

    The percentage increase of the hour's realized operating cost (intraday
    balancing against the schedule built from ``forecast``) over the hour's
    cost under the dispatch that knew ``actual`` in advance.
    """
    if engine is None:
        engine = DispatchEngine(network, reserve=reserve, n_hours=actual.n_hours)
    if not (1 <= hour <= engine.n_hours):
        raise ValidationError(f"hour must lie in 1..{engine.n_hours}")
    vals, _ = engine.fepc_profile(forecast, actual)
    return float(vals[hour - 1])


def fep(forecast, actual):
    """Forecast error percentage (forecast - actual) / actual, elementwise."""
    forecast = np.asarray(forecast, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if np.any(actual <= 0.0):
        raise ValidationError("actual load must be positive")
    return (forecast - actual) / actual
