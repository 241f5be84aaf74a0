import numpy as np
import pytest
from importlib import resources

from costcast.dispatch import (
    DispatchEngine,
    ReserveConfig,
    fep,
    fepc,
    solve_daed,
    solve_ipb,
)
from costcast.errors import InfeasibleError, ValidationError
from costcast.grid_model import LoadProfile, load_network, load_profile_from_csv

DATA = resources.files("costcast") / "data"


@pytest.fixture(scope="module")
def net6():
    return load_network(DATA / "example_6bus.json")


@pytest.fixture(scope="module")
def day6():
    return load_profile_from_csv(DATA / "typical_day_6bus.csv")


@pytest.fixture(scope="module")
def engine6(net6):
    return DispatchEngine(net6, reserve=ReserveConfig(up_fraction=0.06,
                                                      down_fraction=0.30))


def test_flat_load_merit_order(net6):
    # At a flat 200 MW the network never binds, so the dispatch follows the
    # classic equal-marginal-cost split: 0.036*p1 + 16 = 0.060*p2 + 20 with
    # p1 + p2 = 200 gives the price 22, p1 = 500/3, p2 = 100/3.  The third
    # unit stays off because its floor price 24 is above 22.  Per-hour cost:
    # 0.018*p1^2 + 16*p1 + 120 + 0.030*p2^2 + 20*p2 + 90 + 60 = 12410/3.
    eng = DispatchEngine(net6)
    sol = eng.solve_daed(LoadProfile(np.full(24, 200.0)))
    for i in range(24):
        assert np.allclose(sol.p[:, i], [500.0 / 3.0, 100.0 / 3.0, 0.0], atol=1e-5)
    assert abs(sol.cost_at(1) - 12410.0 / 3.0) < 1e-3
    assert abs(sol.total_cost - 24 * 12410.0 / 3.0) < 1e-2


def test_peak_hour_hits_capacity(net6, day6):
    # Bundled day peaks at 320 MW in hour 20.  The cheap unit saturates at
    # 200 MW; the remaining 120 MW splits at equal marginal cost between
    # G2 and G3: 0.060*p2 + 20 = 0.090*p3 + 24 with p2 + p3 = 120.
    eng = DispatchEngine(net6)
    sol = eng.solve_daed(day6)
    assert np.allclose(sol.p[:, 19], [200.0, 98.666667, 21.333333], atol=1e-4)


def test_daed_respects_limits(net6, day6):
    eng = DispatchEngine(net6)
    sol = eng.solve_daed(day6)
    for j, g in enumerate(net6.generators):
        assert np.all(sol.p[j] >= -1e-7)
        assert np.all(sol.p[j] <= g.p_max + 1e-7)
        deltas = np.diff(np.concatenate([[g.p_initial], sol.p[j]]))
        assert np.all(deltas <= g.ramp_up + 1e-6)
        assert np.all(-deltas <= g.ramp_down + 1e-6)
    for l, line in enumerate(net6.lines):
        assert np.all(np.abs(sol.flows[l]) <= line.f_max + 1e-6)


def test_daed_infeasible_reports_hours(net6):
    # 500 MW exceeds the 400 MW of installed capacity everywhere
    eng = DispatchEngine(net6)
    with pytest.raises(InfeasibleError) as exc:
        eng.solve_daed(LoadProfile(np.full(24, 500.0)))
    assert exc.value.detail  # at least one binding hour identified


def test_zero_deviation_costs_nothing(engine6, day6):
    da = engine6.solve_daed(day6)
    ib = engine6.solve_ipb(da, day6)
    assert abs(ib.total_cost - da.total_cost) <= 1e-6 * da.total_cost
    assert not ib.shed_flag
    assert float(ib.bess_discharge.sum() + ib.bess_charge.sum()) < 1e-6


def test_balancing_obeys_reserve_band(engine6, net6, day6):
    rng = np.random.default_rng(5)
    forecast = LoadProfile(day6.system_load * rng.uniform(0.9, 1.1, 24))
    da = engine6.solve_daed(forecast)
    ib = engine6.solve_ipb(da, day6)
    res = engine6.reserve
    for j, g in enumerate(net6.generators):
        lo = np.maximum(0.0, da.p[j] - res.down_fraction * g.p_max)
        hi = np.minimum(g.p_max, da.p[j] + res.up_fraction * g.p_max)
        assert np.all(ib.p_adjusted[j] >= lo - 1e-7)
        assert np.all(ib.p_adjusted[j] <= hi + 1e-7)


def test_battery_bookkeeping(engine6, net6, day6):
    rng = np.random.default_rng(8)
    forecast = LoadProfile(day6.system_load * rng.uniform(0.9, 1.1, 24))
    da = engine6.solve_daed(forecast)
    ib = engine6.solve_ipb(da, day6)
    for x, bat in enumerate(net6.bess):
        e = ib.energy[x]
        u_pos, u_neg = ib.bess_discharge[x], ib.bess_charge[x]
        prev = np.concatenate([[bat.energy_initial], e[:-1]])
        # stored-energy ledger holds exactly, hour over hour
        assert np.max(np.abs(e - prev - u_pos + u_neg)) < 1e-8
        assert np.all((e >= -1e-9) & (e <= bat.energy_max + 1e-9))
        # each hour commits to one side of the battery
        assert np.max(u_pos * u_neg) < 1e-8
        assert set(np.unique(ib.discharge_enabled[x])) <= {0, 1}
        assert np.all(u_pos <= bat.discharge_max * ib.discharge_enabled[x] + 1e-8)
        assert np.all(u_neg <= bat.charge_max * (1 - ib.discharge_enabled[x]) + 1e-8)


def test_cost_increase_never_negative(engine6, day6):
    rng = np.random.default_rng(21)
    for _ in range(5):
        forecast = LoadProfile(day6.system_load * rng.uniform(0.9, 1.1, 24))
        vals, ib = engine6.fepc_profile(forecast, day6)
        assert vals.min() >= -1e-6
        assert not ib.shed_flags.any()


def test_gross_underforecast_sheds(engine6, day6):
    # A 45% under-forecast leaves the schedule so low that neither the
    # reserve band nor the battery can cover the gap; the slack absorbs the
    # remainder and its hours get flagged.
    forecast = LoadProfile(day6.system_load * 0.55)
    da = engine6.solve_daed(forecast)
    ib = engine6.solve_ipb(da, day6)
    assert ib.shed_flags.any()
    assert ib.shed.max() > 1.0
    assert ib.shed_flag


def test_overforecast_cheaper_than_underforecast(engine6, day6):
    # Balancing down is cheap (back off generators); balancing up runs
    # through the battery at a premium.  The asymmetry is the whole point
    # of a cost-aware forecaster.
    over = LoadProfile(day6.system_load * 1.05)
    under = LoadProfile(day6.system_load * 0.95)
    vals_over, _ = engine6.fepc_profile(over, day6)
    vals_under, _ = engine6.fepc_profile(under, day6)
    assert vals_under.mean() > vals_over.mean()


def test_module_level_wrappers(net6, day6):
    da = solve_daed(net6, day6)
    ib = solve_ipb(net6, da, day6)
    assert abs(ib.total_cost - da.total_cost) <= 1e-6 * da.total_cost
    val = fepc(net6, day6, day6, hour=12)
    assert abs(val) < 1e-6
    with pytest.raises(ValidationError):
        fepc(net6, day6, day6, hour=0)


def test_fep_sign_convention():
    out = fep(np.array([110.0, 90.0]), np.array([100.0, 100.0]))
    assert np.allclose(out, [0.1, -0.1])
    with pytest.raises(ValidationError):
        fep(np.array([1.0]), np.array([0.0]))


def test_reserve_config_validation(net6):
    with pytest.raises(ValidationError):
        ReserveConfig(up_fraction=-0.1)
    with pytest.raises(ValidationError):
        ReserveConfig(voll=0.0)
    # default slack price: ten times the steepest unit price in the system
    assert ReserveConfig().voll_price(net6) == pytest.approx(680.0)


def test_voll_price_without_battery(net6):
    bare = load_network(DATA / "example_6bus.json")
    no_bess = type(bare)(
        n_buses=bare.n_buses, reference_bus=bare.reference_bus,
        mva_base=bare.mva_base, lines=bare.lines, generators=bare.generators,
        bess=(), load_fractions=bare.load_fractions, name=bare.name,
    )
    assert ReserveConfig().voll_price(no_bess) == pytest.approx(312.0)


def test_thirty_bus_day_solves():
    net = load_network(DATA / "example_30bus.json")
    day = load_profile_from_csv(DATA / "typical_day_30bus.csv")
    eng = DispatchEngine(net, reserve=ReserveConfig(up_fraction=0.06,
                                                    down_fraction=0.30))
    da = eng.solve_daed(day)
    ib = eng.solve_ipb(da, day)
    assert abs(ib.total_cost - da.total_cost) <= 1e-6 * da.total_cost
    assert not ib.shed_flags.any()
