import json

import numpy as np
import pytest
from importlib import resources

from costcast.errors import ParseError, ValidationError
from costcast.grid_model import (
    Bess,
    FlowModel,
    Generator,
    Line,
    LoadProfile,
    Network,
    load_network,
    load_profile_from_csv,
)

DATA = resources.files("costcast") / "data"


def two_bus():
    return Network(
        n_buses=2,
        reference_bus=0,
        mva_base=1.0,
        lines=(Line(from_bus=0, to_bus=1, susceptance=10.0, f_max=50.0),),
        generators=(Generator(id="G", bus=0, cost_a=0.01, cost_b=10.0, cost_c=0.0,
                              p_max=100.0, ramp_up=100.0, ramp_down=100.0,
                              p_initial=0.0),),
        bess=(),
        load_fractions=np.array([0.0, 1.0]),
    )


def test_two_bus_flow_solves_by_hand():
    # Injections (+5, -5) across a single line with susceptance 10 and unit
    # MVA base: the line equation f = 10 * (d0 - d1) and the bus balance
    # force f = 5, so d1 = -0.5 with the reference angle pinned at zero.
    fm = FlowModel(two_bus())
    angles, flows = fm.solve_injections(np.array([5.0, -5.0]))
    assert angles[0] == 0.0
    assert abs(angles[1] - (-0.5)) < 1e-12
    assert abs(flows[0] - 5.0) < 1e-12


def test_flow_model_rejects_imbalanced_injections():
    fm = FlowModel(two_bus())
    with pytest.raises(ValidationError):
        fm.solve_injections(np.array([5.0, -4.0]))


def test_flow_conservation_on_mesh():
    net = load_network(DATA / "example_6bus.json")
    fm = FlowModel(net)
    rng = np.random.default_rng(3)
    inj = rng.normal(size=net.n_buses) * 40.0
    inj -= inj.mean()  # lossless network needs balanced injections
    angles, flows = fm.solve_injections(inj)
    # every bus: net outflow over incident lines equals the injection
    out = np.zeros(net.n_buses)
    for l, line in enumerate(net.lines):
        out[line.from_bus] += flows[l]
        out[line.to_bus] -= flows[l]
    assert np.allclose(out, inj, atol=1e-9)
    assert angles[net.reference_bus] == 0.0


def test_bundled_6bus_network():
    net = load_network(DATA / "example_6bus.json")
    assert net.n_buses == 6
    assert len(net.lines) == 7
    assert len(net.generators) == 3
    assert len(net.bess) == 1
    assert abs(net.load_fractions.sum() - 1.0) < 1e-12
    # steepest unit is G3: 2 * 0.045 * 80 + 24 = 31.2
    assert abs(net.max_marginal_cost() - 31.2) < 1e-12


def test_bundled_30bus_network():
    net = load_network(DATA / "example_30bus.json")
    assert net.n_buses == 30
    assert len(net.lines) == 41
    assert len(net.generators) == 6
    assert len(net.bess) == 3
    assert int(np.count_nonzero(net.load_fractions)) == 21
    assert abs(net.load_fractions.sum() - 1.0) < 1e-12


def test_load_profile_per_bus_is_outer_product():
    net = load_network(DATA / "example_6bus.json")
    prof = LoadProfile(np.array([100.0, 200.0]))
    per_bus = prof.per_bus(net)
    assert per_bus.shape == (6, 2)
    assert np.allclose(per_bus[:, 0], net.load_fractions * 100.0)
    assert np.allclose(per_bus[:, 1], net.load_fractions * 200.0)
    assert abs(per_bus.sum() - 300.0) < 1e-9


def test_load_profile_scaling():
    prof = LoadProfile(np.array([100.0, 200.0, 300.0]))
    scaled = prof.scaled(np.array([1.1, 0.9, 1.0]))
    assert np.allclose(scaled.system_load, [110.0, 180.0, 300.0])
    # original untouched
    assert np.allclose(prof.system_load, [100.0, 200.0, 300.0])


def test_load_profile_rejects_nonpositive():
    with pytest.raises(ValidationError):
        LoadProfile(np.array([100.0, 0.0]))
    with pytest.raises(ValidationError):
        LoadProfile(np.array([100.0, -5.0]))
    with pytest.raises(ValidationError):
        LoadProfile(np.array([100.0, np.nan]))


def test_typical_day_profiles_load():
    for name in ("typical_day_6bus.csv", "typical_day_30bus.csv"):
        prof = load_profile_from_csv(DATA / name)
        assert prof.n_hours == 24
        assert prof.system_load.min() > 0


def test_profile_csv_requires_contiguous_hours(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("hour,system_load_mw\n1,100\n3,120\n")
    with pytest.raises(ParseError):
        load_profile_from_csv(p)


def test_network_json_missing_field(tmp_path):
    raw = json.loads((DATA / "example_6bus.json").read_text())
    del raw["generators"][0]["p_max"]
    p = tmp_path / "net.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ParseError, match="p_max"):
        load_network(p)


def test_network_json_bad_type(tmp_path):
    raw = json.loads((DATA / "example_6bus.json").read_text())
    raw["lines"][0]["susceptance"] = "six"
    p = tmp_path / "net.json"
    p.write_text(json.dumps(raw))
    with pytest.raises(ParseError, match="susceptance"):
        load_network(p)


def test_network_rejects_disconnected_bus():
    with pytest.raises(ValidationError, match="unreachable"):
        Network(
            n_buses=3,
            reference_bus=0,
            mva_base=1.0,
            lines=(Line(from_bus=0, to_bus=1, susceptance=5.0, f_max=10.0),),
            generators=(Generator(id="G", bus=0, cost_a=0.01, cost_b=1.0,
                                  cost_c=0.0, p_max=10.0, ramp_up=10.0,
                                  ramp_down=10.0, p_initial=0.0),),
            bess=(),
            load_fractions=np.array([0.0, 0.5, 0.5]),
        )


def test_network_rejects_bad_fractions():
    base = dict(
        n_buses=2, reference_bus=0, mva_base=1.0,
        lines=(Line(from_bus=0, to_bus=1, susceptance=5.0, f_max=10.0),),
        generators=(Generator(id="G", bus=0, cost_a=0.01, cost_b=1.0, cost_c=0.0,
                              p_max=10.0, ramp_up=10.0, ramp_down=10.0,
                              p_initial=0.0),),
        bess=(),
    )
    with pytest.raises(ValidationError):
        Network(load_fractions=np.array([0.4, 0.4]), **base)
    with pytest.raises(ValidationError):
        Network(load_fractions=np.array([-0.2, 1.2]), **base)


def test_network_rejects_duplicate_unit_ids():
    gen = Generator(id="G", bus=0, cost_a=0.01, cost_b=1.0, cost_c=0.0,
                    p_max=10.0, ramp_up=10.0, ramp_down=10.0, p_initial=0.0)
    with pytest.raises(ValidationError):
        Network(
            n_buses=2, reference_bus=0, mva_base=1.0,
            lines=(Line(from_bus=0, to_bus=1, susceptance=5.0, f_max=10.0),),
            generators=(gen, gen),
            bess=(),
            load_fractions=np.array([0.5, 0.5]),
        )


def test_unit_validation():
    with pytest.raises(ValidationError):
        Generator(id="G", bus=0, cost_a=-0.01, cost_b=1.0, cost_c=0.0,
                  p_max=10.0, ramp_up=10.0, ramp_down=10.0, p_initial=0.0)
    with pytest.raises(ValidationError):
        Line(from_bus=0, to_bus=0, susceptance=5.0, f_max=10.0)
    with pytest.raises(ValidationError):
        Bess(id="B", bus=0, price_discharge=10.0, price_charge=5.0,
             discharge_max=10.0, charge_max=10.0, energy_max=20.0,
             energy_initial=25.0)


def test_units_located_by_bus():
    net = load_network(DATA / "example_6bus.json")
    assert net.generators_at(0) == (0,)
    assert net.generators_at(3) == ()
    assert net.bess_at(3) == (0,)
