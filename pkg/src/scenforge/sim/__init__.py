"""Built-in 2D traffic simulator: program compilation, dynamics, episodes."""

from .controllers import (
    ACTIONS,
    ACTION_EMERGENCY_BRAKE,
    ACTION_FASTER,
    ACTION_IDLE,
    ACTION_LANE_LEFT,
    ACTION_LANE_RIGHT,
    ACTION_SLOWER,
    Command,
    IdmRuntime,
    ScriptedRuntime,
    adjacent_on_side,
    find_leader,
    idm_accel,
    policy_command,
)
from .dynamics import (
    ACCEL_MAX,
    BRAKE_MAX,
    LANE_CHANGE_DURATION,
    SPEED_MAX,
    STEER_MAX,
    WHEELBASE,
    LaneChangeState,
    VehicleState,
    integrate,
    rect_corners,
    rects_collide,
    smoothstep,
    tracking_steer,
    vehicles_collide,
    wrap_angle,
)
from .episode import EpisodeLog, PolicyFn, SimEvent, Simulation, run_episode
from .program import (
    CompiledVehicle,
    ControllerSpec,
    IdmSpec,
    PolicySpec,
    ScenarioProgram,
    ScriptedSpec,
    behavior_label,
    compile_program,
    goal_reached,
)

__all__ = [
    "ACTIONS",
    "ACTION_EMERGENCY_BRAKE",
    "ACTION_FASTER",
    "ACTION_IDLE",
    "ACTION_LANE_LEFT",
    "ACTION_LANE_RIGHT",
    "ACTION_SLOWER",
    "ACCEL_MAX",
    "BRAKE_MAX",
    "Command",
    "CompiledVehicle",
    "ControllerSpec",
    "EpisodeLog",
    "IdmRuntime",
    "IdmSpec",
    "LANE_CHANGE_DURATION",
    "LaneChangeState",
    "PolicyFn",
    "PolicySpec",
    "ScenarioProgram",
    "ScriptedRuntime",
    "ScriptedSpec",
    "SimEvent",
    "Simulation",
    "SPEED_MAX",
    "STEER_MAX",
    "VehicleState",
    "WHEELBASE",
    "adjacent_on_side",
    "behavior_label",
    "compile_program",
    "find_leader",
    "goal_reached",
    "idm_accel",
    "integrate",
    "policy_command",
    "rect_corners",
    "rects_collide",
    "run_episode",
    "smoothstep",
    "tracking_steer",
    "vehicles_collide",
    "wrap_angle",
]
