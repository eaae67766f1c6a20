import json
import math

import numpy as np
import pytest

from cvmdi.errors import NoKeyError, ValidationError
from cvmdi.experiments import (
    GridSpec,
    ScenarioConfig,
    SweepSpec,
    config_from_dict,
    excess_noise_curve,
    grid_sweep,
    key_positive,
    load_config,
    max_distance,
    rows_to_csv_text,
    sweep_distance,
)
from cvmdi.keyrate import asymptotic_key_rate
from cvmdi.protocol import ChannelParams, ModeMatchingSet, ProtocolParams
from cvmdi.temporal import gaussian_mode, save_waveform_csv

# width ratio r of two Gaussian envelopes with 2r / (1 + r^2) = 0.95
R95 = (1 + math.sqrt(1 - 0.95**2)) / 0.95


def cfg(topology="charlie-at-bob", eta_A=1.0, eta_B=1.0, **kw):
    return ScenarioConfig(topology=topology, matching=ModeMatchingSet.symmetric(eta_A, eta_B), **kw)


class TestTopology:
    @pytest.mark.parametrize("topo,expected", [
        ("symmetric", (5.0, 5.0)), ("charlie-at-alice", (0.0, 10.0)), ("charlie-at-bob", (10.0, 0.0)),
    ])
    def test_split(self, topo, expected):
        assert cfg(topo).split(10.0) == expected

    def test_explicit_proportional(self):
        c = ScenarioConfig("explicit", channel=ChannelParams(L_AC=3.0, L_BC=1.0))
        assert c.split(8.0) == pytest.approx((6.0, 2.0))

    def test_explicit_needs_position(self):
        with pytest.raises(ValidationError):
            ScenarioConfig("explicit")

    def test_unknown(self):
        with pytest.raises(ValidationError):
            ScenarioConfig("ring")


class TestSweep:
    def test_values(self):
        v = SweepSpec(start=0.0, stop=1.0, step=0.1).values()
        assert len(v) == 11 and v[3] == 0.3 and v[-1] == 1.0

    def test_invalid(self):
        with pytest.raises(ValidationError):
            SweepSpec(variable="V_A")
        with pytest.raises(ValidationError):
            SweepSpec(step=0.0)

    def test_case3_mismatch_crossing(self):
        c = cfg(eta_A=0.95, eta_B=0.95, sweep=SweepSpec(start=17.0, stop=17.5, step=0.5))
        rows = sweep_distance(c)
        assert rows[0]["K"] > 0 and rows[1]["K"] == 0

    def test_case1_crossing(self):
        c = cfg("symmetric", sweep=SweepSpec(start=7.0, stop=7.1, step=0.1))
        rows = sweep_distance(c)
        assert rows[0]["K"] > 0 and rows[1]["K"] == 0

    def test_zero_distance_positive(self):
        assert key_positive(cfg("symmetric"), 0.0)

    def test_columns_and_finite(self):
        c = cfg(sweep=SweepSpec(stop=80.0, step=20.0))
        rows = sweep_distance(c, finite_size=True)
        assert list(rows[0]) == ["L_km", "L_AC", "L_BC", "K", "I_AB", "chi_BE", "eps_x", "eps_p",
                                 "K_finite", "chi_BE_finite"]
        assert all(r["K_finite"] <= r["K"] for r in rows)
        assert rows[-1]["K_finite"] == 0.0 < rows[-1]["K"]

    def test_workers_deterministic(self):
        c = cfg(sweep=SweepSpec(stop=20.0, step=0.5))
        assert sweep_distance(c) == sweep_distance(c, workers=4)


class TestMaxDistance:
    def test_bracketing(self):
        c = cfg(eta_B=0.95)
        L = max_distance(c)
        assert key_positive(c, L - 0.005) and not key_positive(c, L + 0.005)

    def test_case2(self):
        assert max_distance(cfg("charlie-at-alice")) == pytest.approx(5.43, abs=0.05)
        assert max_distance(cfg("charlie-at-alice", 0.95, 0.95)) == pytest.approx(3.49, abs=0.05)

    def test_finite_shorter(self):
        c = cfg("symmetric")
        assert max_distance(c, finite_size=True) < max_distance(c)

    def test_no_key(self):
        c = ScenarioConfig(channel=ChannelParams(eps_A=0.5, eps_B=0.5))
        with pytest.raises(NoKeyError):
            max_distance(c)


class TestGrid:
    def test_consistent_with_sweep(self):
        c = cfg(grid=GridSpec(eta_A=(0.9, 1.0), eta_B=(0.9, 1.0), points=3, L=15.0),
                sweep=SweepSpec(start=15.0, stop=15.0))
        rows = grid_sweep(c)
        corner = [r for r in rows if r["eta_A"] == 1.0 and r["eta_B"] == 1.0]
        assert corner[0]["K"] == sweep_distance(c)[0]["K"]
        assert len(rows) == 9

    def test_drops(self):
        c = cfg(grid=GridSpec(eta_A=(0.95, 1.0), eta_B=(0.95, 1.0), points=2, L=15.0))
        k = {(r["eta_A"], r["eta_B"]): r["K"] for r in grid_sweep(c)}
        assert k[(0.95, 1.0)] / k[(1.0, 1.0)] == pytest.approx(0.924, abs=0.01)
        assert k[(1.0, 0.95)] / k[(1.0, 1.0)] == pytest.approx(0.162, abs=0.01)

    def test_bounds(self):
        with pytest.raises(ValidationError):
            GridSpec(eta_A=(0.8, 1.0))

    def test_fixed_distance(self):
        c = cfg(grid=GridSpec(points=2))
        assert grid_sweep(c, 0.0)[0]["K"] > grid_sweep(c, 30.0)[0]["K"]


class TestExcessNoise:
    def test_lossless_point(self):
        c = cfg(sweep=SweepSpec(stop=0.0), eta_B_curves=(1.0,))
        assert excess_noise_curve(c)[0]["eps_etaB=1"] == pytest.approx(0.004, rel=1e-12)

    def test_difference_and_growth(self):
        c = cfg(sweep=SweepSpec(stop=50.0, step=5.0))
        rows = excess_noise_curve(c)
        for r in rows:
            eta_A = 10 ** (-0.2 * r["L_km"] / 10)
            assert r["eps_etaB=0.95"] - r["eps_etaB=1"] == pytest.approx(0.1 / eta_A, rel=1e-10)
        col = [r["eps_etaB=0.97"] for r in rows]
        assert all(a < b for a, b in zip(col, col[1:]))


class TestConfig:
    def test_shorthand_and_sections(self):
        c = config_from_dict({
            "topology": "symmetric",
            "channel": {"eps_A": 0.003},
            "protocol": {"V_A": 30, "V_B": 30},
            "matching": {"eta_A": 0.97, "eta_B2": 0.9},
            "finite_size": {"N": 1e9},
            "sweep": {"start": 0, "stop": 5, "step": 1},
            "grid": {"eta_A": [0.95, 1.0], "points": 5},
            "excess_noise": {"eta_B": [1.0, 0.9]},
        })
        assert c.matching == ModeMatchingSet(0.97, 0.97, 1.0, 0.9)
        assert c.protocol == ProtocolParams(30, 30)
        assert c.finite_size.m == 5e8
        assert c.grid.eta_A == (0.95, 1.0)
        assert c.eta_B_curves == (1.0, 0.9)

    def test_explicit_topology_object(self):
        c = config_from_dict({"topology": {"type": "explicit", "L_AC": 2, "L_BC": 6}})
        assert c.split(4.0) == pytest.approx((1.0, 3.0))

    @pytest.mark.parametrize("raw,msg", [
        ({"chanel": {}}, "unknown section"),
        ({"channel": {"alpha": -1}}, "channel"),
        ({"channel": {"beta": 1}}, "channel.beta"),
        ({"matching": {"eta_A1": 1.5}}, "matching"),
        ({"matching": {"eta_A1": "x"}}, "matching.eta_A1"),
        ({"matching": {"eta_A1": {"signal": "a.csv"}}}, "matching.eta_A1"),
        ({"sweep": {"variable": "V"}}, "sweep"),
        ({"excess_noise": {"eta_B": [1.2]}}, "excess_noise"),
    ])
    def test_errors(self, raw, msg):
        with pytest.raises(ValidationError, match=msg):
            config_from_dict(raw)

    def test_json_error_position(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{\n  "topology": "symmetric",\n}')
        with pytest.raises(ValidationError, match=r"bad.json:3:1"):
            load_config(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_config(tmp_path / "nope.json")

    def test_digest_stable(self):
        a, b = cfg(eta_B=0.95), cfg(eta_B=0.95)
        assert a.digest() == b.digest() != cfg().digest()

    def test_waveform_driven(self, tmp_path):
        save_waveform_csv(gaussian_mode(1.0, span=40.0 * R95, n=8001), tmp_path / "sig.csv")
        save_waveform_csv(gaussian_mode(R95, span=40.0 * R95, n=8001), tmp_path / "lo.csv")
        (tmp_path / "c.json").write_text(json.dumps({
            "matching": {"eta_B": {"signal": "sig.csv", "detector": "lo.csv"}},
        }))
        c = load_config(tmp_path / "c.json")
        assert c.matching.eta_B1 == pytest.approx(0.95, abs=1e-12)
        k_wave = asymptotic_key_rate(c.scenario_at(10.0)).K
        k_num = asymptotic_key_rate(cfg(eta_B=0.95).scenario_at(10.0)).K
        assert k_wave == pytest.approx(k_num, rel=1e-6)


def test_csv_header_and_determinism():
    c = cfg(sweep=SweepSpec(stop=2.0, step=1.0))
    a = rows_to_csv_text(sweep_distance(c), c, "sweep-distance")
    b = rows_to_csv_text(sweep_distance(c), c, "sweep-distance")
    assert a == b
    first, header = a.splitlines()[:2]
    assert first == f"# cvmdi sweep-distance config_sha256={c.digest()}"
    assert header.startswith("L_km,L_AC,L_BC,K")
    assert np.isclose(float(a.splitlines()[2].split(",")[0]), 0.0)
