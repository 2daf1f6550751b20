"""Closed-loop episode execution and the on-disk episode log format.

Simulation.step advances every vehicle one dt: controllers emit commands,
lane-change requests start a smoothstep lateral blend, the tracking law
produces steering, and the bicycle model integrates. Termination is checked
in a fixed order: collision, then ego goal, then horizon timeout. Events
(collision, lane_change, emergency_brake) are emitted once per transition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from ..errors import DataError
from .controllers import (
    Command,
    IdmRuntime,
    ScriptedRuntime,
    policy_command,
)
from .dynamics import (
    LANE_CHANGE_DURATION,
    LaneChangeState,
    VehicleState,
    integrate,
    lane_change_reference,
    tracking_steer,
    vehicles_collide,
)
from .program import IdmSpec, PolicySpec, ScenarioProgram, ScriptedSpec, goal_reached

PolicyFn = Callable[["Simulation", str, np.random.Generator], int]


@dataclass(frozen=True)
class SimEvent:
    step: int
    kind: str  # collision | lane_change | emergency_brake
    vehicles: tuple[str, ...]

    def to_json(self) -> dict:
        return {"step": self.step, "kind": self.kind, "vehicles": list(self.vehicles)}

    @classmethod
    def from_json(cls, data: dict) -> "SimEvent":
        return cls(step=int(data["step"]), kind=str(data["kind"]), vehicles=tuple(data["vehicles"]))


class Simulation:
    """Mutable world state for one scenario program."""

    def __init__(self, program: ScenarioProgram) -> None:
        self.program = program
        self.reset()

    def reset(self) -> None:
        self.vehicles: dict[str, VehicleState] = {}
        self._runtimes: dict[str, ScriptedRuntime | IdmRuntime] = {}
        self._policy_slots: list[str] = []
        for spec in self.program.vehicles:
            state = VehicleState(
                vehicle_id=spec.vehicle_id,
                role=spec.role,
                x=spec.x,
                y=spec.y,
                heading=spec.heading,
                speed=spec.speed,
                lane_id=spec.lane_id,
                length=spec.length,
                width=spec.width,
                cruise_speed=spec.speed,
            )
            self.vehicles[spec.vehicle_id] = state
            controller = spec.controller
            if isinstance(controller, ScriptedSpec):
                self._runtimes[spec.vehicle_id] = ScriptedRuntime(
                    spec.vehicle_id, controller.schedule, controller.anchor_id
                )
            elif isinstance(controller, IdmSpec):
                self._runtimes[spec.vehicle_id] = IdmRuntime(spec.vehicle_id, controller.desired_speed)
            else:
                assert isinstance(controller, PolicySpec)
                self._policy_slots.append(controller.slot)
        self.step_index = 0
        self.events: list[SimEvent] = []
        self.termination: str | None = None

    @property
    def time(self) -> float:
        return self.step_index * self.program.dt

    @property
    def done(self) -> bool:
        return self.termination is not None

    def policy_slots(self) -> list[str]:
        return list(self._policy_slots)

    def step(self, policy_actions: dict[str, int] | None = None) -> list[SimEvent]:
        """Advance one dt. Returns the events emitted during this step."""
        if self.termination is not None:
            raise DataError("cannot step a terminated simulation")
        actions = policy_actions or {}
        program = self.program
        lane_map = program.lane_map
        now = self.time
        new_events: list[SimEvent] = []

        commands: dict[str, Command] = {}
        for spec in program.vehicles:
            vid = spec.vehicle_id
            me = self.vehicles[vid]
            if vid in self._runtimes:
                commands[vid] = self._runtimes[vid].act(self.vehicles, me, lane_map, now)
            else:
                action = actions.get(vid, 1)
                commands[vid] = policy_command(lane_map, me, action)
                me.prev_action = action

        for spec in program.vehicles:
            vid = spec.vehicle_id
            me = self.vehicles[vid]
            cmd = commands[vid]
            if cmd.emergency:
                new_events.append(SimEvent(self.step_index, "emergency_brake", (vid,)))
            if cmd.lane_request is not None and me.lane_change is None and cmd.lane_request != me.lane_id:
                target = lane_map.lane(cmd.lane_request)
                arc, lateral, _ = target.project(me.x, me.y)
                me.lane_change = LaneChangeState(
                    from_lane=me.lane_id,
                    to_lane=cmd.lane_request,
                    start_time=now,
                    start_lateral=lateral,
                )
                new_events.append(SimEvent(self.step_index, "lane_change", (vid,)))

        for spec in program.vehicles:
            me = self.vehicles[spec.vehicle_id]
            if me.lane_change is not None:
                ref_lane = lane_map.lane(me.lane_change.to_lane)
                ref_lateral = lane_change_reference(me.lane_change, now)
            else:
                ref_lane = lane_map.lane(me.lane_id)
                ref_lateral = 0.0
            steer = tracking_steer(me, ref_lane, ref_lateral)
            integrate(me, commands[spec.vehicle_id].accel, steer, program.dt)

        after = now + program.dt
        for me in self.vehicles.values():
            change = me.lane_change
            if change is not None and after - change.start_time >= LANE_CHANGE_DURATION - 1e-9:
                me.lane_id = change.to_lane
                me.lane_change = None

        ego = self.vehicles[program.ego_id]
        route = program.ego_route
        if route and ego.route_pos + 1 < len(route) and ego.lane_id == route[ego.route_pos]:
            lane = lane_map.lane(route[ego.route_pos])
            arc, _, _ = lane.project(ego.x, ego.y)
            if arc >= lane.length - 0.5:
                ego.route_pos += 1
                if ego.lane_change is None:
                    ego.lane_id = route[ego.route_pos]

        order = [spec.vehicle_id for spec in program.vehicles]
        for i, vid_a in enumerate(order):
            for vid_b in order[i + 1 :]:
                if vehicles_collide(self.vehicles[vid_a], self.vehicles[vid_b]):
                    new_events.append(SimEvent(self.step_index, "collision", (vid_a, vid_b)))

        self.step_index += 1
        if any(e.kind == "collision" for e in new_events):
            self.termination = "collision"
        elif goal_reached(program, ego.x, ego.y):
            self.termination = "goal"
        elif self.step_index >= program.horizon:
            self.termination = "timeout"

        self.events.extend(new_events)
        return new_events


@dataclass
class EpisodeLog:
    """Replayable record of one episode: per-step poses plus events."""

    scenario: str
    label: str
    seed: int
    dt: float
    vehicle_ids: list[str]
    termination: str
    steps: int
    events: list[SimEvent] = field(default_factory=list)
    frames: list[list[list[float]]] = field(default_factory=list)  # [step][vehicle][x, y, heading, speed]

    def has_event(self, kind: str, vehicle_id: str | None = None) -> bool:
        for event in self.events:
            if event.kind != kind:
                continue
            if vehicle_id is None or vehicle_id in event.vehicles:
                return True
        return False

    def collision_pairs(self) -> list[tuple[str, ...]]:
        return [e.vehicles for e in self.events if e.kind == "collision"]

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "label": self.label,
            "seed": self.seed,
            "dt": self.dt,
            "vehicle_ids": list(self.vehicle_ids),
            "termination": self.termination,
            "steps": self.steps,
            "events": [e.to_json() for e in self.events],
            "frames": self.frames,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EpisodeLog":
        try:
            return cls(
                scenario=str(data["scenario"]),
                label=str(data["label"]),
                seed=int(data["seed"]),
                dt=float(data["dt"]),
                vehicle_ids=[str(v) for v in data["vehicle_ids"]],
                termination=str(data["termination"]),
                steps=int(data["steps"]),
                events=[SimEvent.from_json(e) for e in data["events"]],
                frames=[[list(map(float, veh)) for veh in frame] for frame in data["frames"]],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed episode log: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeLog":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"episode log {path} is not valid JSON: {exc}") from exc
        return cls.from_json(data)


def _snapshot(sim: Simulation, order: list[str]) -> list[list[float]]:
    frame = []
    for vid in order:
        state = sim.vehicles[vid]
        frame.append([state.x, state.y, state.heading, state.speed])
    return frame


def run_episode(
    program: ScenarioProgram,
    policies: dict[str, PolicyFn] | None = None,
    seed: int = 0,
    horizon: int | None = None,
) -> EpisodeLog:
    """Run one full episode and return its log. Policy slots without an entry
    in `policies` hold IDLE."""
    policies = policies or {}
    sim = Simulation(program)
    limit = horizon if horizon is not None else program.horizon
    rng = np.random.default_rng(seed)
    order = [spec.vehicle_id for spec in program.vehicles]
    frames = [_snapshot(sim, order)]
    while sim.termination is None and sim.step_index < limit:
        actions: dict[str, int] = {}
        for slot in sim.policy_slots():
            fn = policies.get(slot)
            if fn is not None:
                actions[slot] = int(fn(sim, slot, rng))
        sim.step(actions)
        frames.append(_snapshot(sim, order))
    termination = sim.termination if sim.termination is not None else "timeout"
    return EpisodeLog(
        scenario=program.name,
        label=program.label,
        seed=seed,
        dt=program.dt,
        vehicle_ids=order,
        termination=termination,
        steps=sim.step_index,
        events=list(sim.events),
        frames=frames,
    )
