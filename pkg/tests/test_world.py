"""World assembly: intake logging, snapshots, injection re-application."""

import pytest

from smshome.codec import DeviceKind, UnrecognizedUtterance
from smshome.controller import FailureMode
from smshome.scenario import Scenario
from smshome.world import HomeWorld


def fresh_world(**kwargs):
    return HomeWorld(Scenario(**kwargs))


class TestConstruction:
    def test_run_start_is_first_record_and_carries_scenario(self):
        world = fresh_world(seed=7)
        first = world.records[0]
        assert first["kind"] == "RUN_START"
        assert first["seq"] == 0
        assert first["payload"]["scenario"]["seed"] == 7

    def test_boot_enters_discovery_immediately(self):
        world = fresh_world()
        assert world.records[1]["kind"] == "PHASE"
        assert world.records[1]["payload"]["phase"] == "BT_DISCOVERY"

    def test_scenario_failure_modes_applied(self):
        world = HomeWorld(Scenario.from_dict({
            "devices": [{"device": "LIGHT1", "failure": "stuck"}],
        }))
        device = world.controller.devices[(DeviceKind.LIGHT, 1)]
        assert device.failure_mode == FailureMode("STUCK")


class TestIntake:
    def test_submit_logs_command_before_ticket(self):
        world = fresh_world()
        world.step(0.0)
        world.submit("Light On")
        kinds = [r["kind"] for r in world.records]
        assert kinds.index("COMMAND") < kinds.index("TICKET")

    def test_bad_utterance_leaves_no_record(self):
        world = fresh_world()
        before = len(world.records)
        with pytest.raises(UnrecognizedUtterance):
            world.submit("warp drive on")
        assert len(world.records) == before

    def test_set_channel_logs_config_and_applies(self):
        world = fresh_world()
        world.set_channel({"loss_prob": 0.5})
        configs = [r for r in world.records if r["kind"] == "CONFIG"]
        assert configs[0]["payload"]["sms"]["loss_prob"] == 0.5
        assert world.sim.sms.loss_prob == 0.5
        # Unspecified fields reset to defaults, full replacement semantics.
        assert world.sim.sms.base_delay_s == 2.0

    def test_bad_channel_field_rejected_without_record(self):
        world = fresh_world()
        before = len(world.records)
        with pytest.raises(ValueError, match="unknown channel fields"):
            world.set_channel({"warp": 9})
        with pytest.raises(ValueError, match="loss_prob"):
            world.set_channel({"loss_prob": 7})
        assert len(world.records) == before

    def test_set_failure_logs_fault(self):
        world = fresh_world()
        world.set_failure(DeviceKind.FAN, 1, FailureMode("FLAKY", 0.5))
        faults = [r for r in world.records if r["kind"] == "FAULT"]
        assert faults[0]["payload"] == {
            "device": "FAN1", "failure": {"mode": "FLAKY", "p": 0.5},
        }

    def test_set_failure_unknown_device_leaves_no_record(self):
        world = fresh_world()
        before = len(world.records)
        with pytest.raises(Exception):
            world.set_failure(DeviceKind.FAN, 9, FailureMode("STUCK"))
        assert len(world.records) == before


class TestInjectionReplayHooks:
    def test_each_injection_kind_reapplies(self):
        world = fresh_world()
        world.step(0.0)
        world.submit("Light On")
        world.set_channel({"dup_prob": 0.25})
        world.set_failure(DeviceKind.FAN, 1, FailureMode("STUCK"))
        injections = [r for r in world.records
                      if r["kind"] in ("COMMAND", "CONFIG", "FAULT")]

        other = fresh_world()
        other.step(0.0)
        for record in injections:
            other.apply_injection(record)
        assert other.sim.sms.dup_prob == 0.25
        fan = other.controller.devices[(DeviceKind.FAN, 1)]
        assert fan.failure_mode == FailureMode("STUCK")
        assert len(other.phone.tickets()) == 1

    def test_non_injection_record_rejected(self):
        world = fresh_world()
        with pytest.raises(ValueError, match="not an injection"):
            world.apply_injection({"kind": "PHASE", "payload": {}})


class TestSnapshot:
    def test_snapshot_shape(self):
        world = fresh_world()
        world.step(0.0)
        snap = world.snapshot()
        assert snap["phase"] == "IDLE"
        assert snap["now"] == 0.0
        assert snap["supply_on"] is False
        assert [d["kind"] for d in snap["devices"]] == ["SUPPLY", "LIGHT", "FAN"]
        assert snap["tickets"] == []

    def test_phone_absent_world_stays_in_discovery(self):
        world = HomeWorld(Scenario(phone_available_at=None))
        world.step(42.0)
        assert world.snapshot()["phase"] == "BT_DISCOVERY"

    def test_phone_late_world_pairs_late(self):
        world = HomeWorld(Scenario(phone_available_at=12.0))
        world.step(10.0)
        assert world.snapshot()["phase"] == "BT_DISCOVERY"
        world.step(5.0)
        assert world.snapshot()["phase"] == "IDLE"
