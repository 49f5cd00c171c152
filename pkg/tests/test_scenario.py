"""Scenario parsing strictness and validation diagnostics."""

import pytest

from smshome.codec import DeviceKind
from smshome.controller import FailureMode
from smshome.scenario import InvalidScenario, Scenario, demo_scenario


class TestValidation:
    def test_defaults_are_valid(self):
        assert Scenario().problems() == []

    def test_empty_devices_rejected(self):
        scenario = Scenario(devices=[])
        with pytest.raises(InvalidScenario, match="devices"):
            scenario.validated()

    def test_duplicate_devices_rejected(self):
        scenario = Scenario(devices=[
            (DeviceKind.LIGHT, 1, FailureMode("NONE")),
            (DeviceKind.LIGHT, 1, FailureMode("STUCK")),
        ])
        assert any("duplicate" in p for p in scenario.problems())

    def test_decreasing_script_rejected(self):
        scenario = Scenario(script=[(10.0, "Light On"), (5.0, "Light Off")])
        assert any("decrease" in p for p in scenario.problems())

    def test_bad_run_mode_rejected(self):
        assert Scenario(run_mode="fast").problems()

    def test_seed_bounds(self):
        assert Scenario(seed=-1).problems()
        assert Scenario(seed=2**64).problems()
        assert Scenario(seed=2**64 - 1).problems() == []

    def test_nested_config_problems_are_prefixed(self):
        scenario = Scenario()
        scenario.sms.loss_prob = 3.0
        assert any(p.startswith("sms.") for p in scenario.problems())


class TestFromDict:
    def test_empty_object_gives_defaults(self):
        scenario = Scenario.from_dict({})
        assert scenario.seed == 42
        assert len(scenario.devices) == 3

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(InvalidScenario, match="unknown key bogus"):
            Scenario.from_dict({"bogus": 1})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(InvalidScenario, match="sms.latency"):
            Scenario.from_dict({"sms": {"latency": 5}})

    def test_bad_device_entry_reported_with_index(self):
        with pytest.raises(InvalidScenario, match=r"devices\[1\]"):
            Scenario.from_dict({"devices": [{"device": "LIGHT1"},
                                            {"device": "TOASTER1"}]})

    def test_bad_script_entry_reported_with_index(self):
        with pytest.raises(InvalidScenario, match=r"script\[0\].at_s"):
            Scenario.from_dict({"script": [{"at_s": "soon", "utterance": "Light On"}]})

    def test_devices_parse_failure_modes(self):
        scenario = Scenario.from_dict({
            "devices": [{"device": "FAN2", "failure": "flaky:0.5"}],
        })
        assert scenario.devices == [(DeviceKind.FAN, 2, FailureMode("FLAKY", 0.5))]

    def test_round_trip_is_identity(self):
        original = demo_scenario()
        original.devices[2] = (DeviceKind.FAN, 1, FailureMode("FLAKY", 0.25))
        again = Scenario.from_dict(original.to_dict())
        assert again == original
        assert again.to_dict() == original.to_dict()

    def test_multiple_problems_collected(self):
        try:
            Scenario.from_dict({"run_mode": "fast", "speed": -1, "devices": []})
        except InvalidScenario as exc:
            assert len(exc.problems) >= 3
        else:
            pytest.fail("expected InvalidScenario")


class TestDemo:
    def test_demo_is_valid_and_scripted(self):
        scenario = demo_scenario()
        scenario.validated()
        assert scenario.seed == 42
        assert [at for at, _ in scenario.script] == [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
        assert len(scenario.script) == 6
