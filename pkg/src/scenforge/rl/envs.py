"""Learning-agent view of the simulator: observations and phase rewards.

AgentEnv exposes one policy slot of a scenario program as a discrete-action
environment. Phase I trains the adversarial vehicle (collisions with the
ego are rewarded); Phase II trains the ego against frozen or scripted
adversaries (collisions penalized, reaching the route goal rewarded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..ingest import match_lane
from ..sim import ScenarioProgram, Simulation
from .ppo import PolicyParams, policy_logits

K_NEAREST = 4
PHASES = ("I", "II")


@dataclass
class RewardConfig:
    # Phase I (adversarial learner)
    collision_bonus: float = 1.0
    brake_bonus: float = 0.2
    violation_penalty: float = 0.5
    # Phase II (ego learner)
    collision_penalty: float = 1.0
    goal_bonus: float = 1.0
    emergency_penalty: float = 0.1
    smoothness_coef: float = 0.05
    # shared
    step_cost: float = 0.01
    speed_limit: float = 15.0  # m/s; beyond this counts as a kinematic violation
    offroad_lateral: float = 3.0  # m; no lane within this -> off-road violation


def observation_dim(program: ScenarioProgram, k: int = K_NEAREST) -> int:
    return 4 + 4 * k + len(program.lane_map.lanes)


def build_observation(sim: Simulation, vehicle_id: str, k: int = K_NEAREST) -> np.ndarray:
    """Self kinematics, the k nearest vehicles' relative motion, and a lane
    one-hot; absent neighbor slots are zero."""
    me = sim.vehicles[vehicle_id]
    features = [me.x / 100.0, me.y / 100.0, me.heading / math.pi, me.speed / 10.0]
    mvx, mvy = me.velocity()
    others = []
    for other in sim.vehicles.values():
        if other.vehicle_id == vehicle_id:
            continue
        dx, dy = other.x - me.x, other.y - me.y
        ovx, ovy = other.velocity()
        others.append((dx * dx + dy * dy, dx, dy, ovx - mvx, ovy - mvy))
    others.sort(key=lambda item: item[0])
    for slot in range(k):
        if slot < len(others):
            _, dx, dy, dvx, dvy = others[slot]
            features.extend([dx / 50.0, dy / 50.0, dvx / 10.0, dvy / 10.0])
        else:
            features.extend([0.0, 0.0, 0.0, 0.0])
    for lane_id in sim.program.lane_map.sorted_ids():
        features.append(1.0 if me.lane_id == lane_id else 0.0)
    return np.asarray(features, dtype=float)


def terminal_reward(phase: str, termination: str | None, cfg: RewardConfig, collided_with_learner: bool) -> float:
    """Episode-end contribution, factored out so the reward algebra is
    testable without running episodes."""
    if phase == "I":
        return cfg.collision_bonus if collided_with_learner else 0.0
    reward = 0.0
    if collided_with_learner:
        reward -= cfg.collision_penalty
    if termination == "goal":
        reward += cfg.goal_bonus
    return reward


class AgentEnv:
    """One learning slot of a compiled scenario program."""

    def __init__(
        self,
        program: ScenarioProgram,
        slot: str,
        phase: str,
        reward: RewardConfig | None = None,
        frozen: dict[str, PolicyParams] | None = None,
        k: int = K_NEAREST,
    ) -> None:
        if phase not in PHASES:
            raise ConfigError(f"phase must be one of {PHASES}, got {phase!r}")
        if slot not in program.policy_slots():
            raise ConfigError(f"vehicle {slot!r} is not a policy slot of {program.name!r}")
        self.program = program
        self.slot = slot
        self.phase = phase
        self.reward_cfg = reward or RewardConfig()
        self.frozen = frozen or {}
        for other in program.policy_slots():
            if other != slot and other not in self.frozen:
                raise ConfigError(f"policy slot {other!r} has no frozen params and is not the learner")
        self.k = k
        self.sim = Simulation(program)
        self._prev_action: int | None = None

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.program, self.k)

    def reset(self) -> np.ndarray:
        self.sim.reset()
        self._prev_action = None
        return build_observation(self.sim, self.slot, self.k)

    def _violates_limits(self) -> bool:
        me = self.sim.vehicles[self.slot]
        if me.speed > self.reward_cfg.speed_limit:
            return True
        return match_lane(me.x, me.y, self.program.lane_map, self.reward_cfg.offroad_lateral) is None

    def step(self, action: int) -> tuple[np.ndarray, float, bool, dict]:
        cfg = self.reward_cfg
        actions = {self.slot: action}
        for other, params in self.frozen.items():
            obs_other = build_observation(self.sim, other, self.k)
            actions[other] = int(np.argmax(policy_logits(params, obs_other)))
        events = self.sim.step(actions)

        ego_id = self.program.ego_id
        collided = False
        for event in events:
            if event.kind == "collision" and self.slot in event.vehicles:
                if self.phase == "II" or ego_id in event.vehicles:
                    collided = True

        reward = -cfg.step_cost
        if self.phase == "I":
            if any(e.kind == "emergency_brake" and e.vehicles == (ego_id,) for e in events):
                reward += cfg.brake_bonus
            if self._violates_limits():
                reward -= cfg.violation_penalty
        else:
            if any(e.kind == "emergency_brake" and e.vehicles == (self.slot,) for e in events):
                reward -= cfg.emergency_penalty
            if self._prev_action is not None:
                reward -= cfg.smoothness_coef * abs(action - self._prev_action)
        reward += terminal_reward(self.phase, self.sim.termination, cfg, collided)

        self._prev_action = action
        done = self.sim.done
        obs = build_observation(self.sim, self.slot, self.k)
        info = {"termination": self.sim.termination, "events": events, "collided": collided}
        return obs, reward, done, info
