"""Canonical text form for scenario documents.

One fixed layout: two-space indentation, one pair or schedule per line,
geometry keys ordered (map, ego_route, source, then the rest sorted),
vehicle fields in declaration-schema order, action arguments sorted with
duration always last. Numbers print in their shortest round-trip form,
so parse(print(doc)) == doc and printing is a fixed point.
"""

from __future__ import annotations

from .model import (
    AbsolutePlacement,
    Action,
    DslDocument,
    Schedule,
    Symbol,
    Value,
    VehicleDecl,
)

_GEOMETRY_FIRST = ("map", "ego_route", "source")


def format_value(value: Value) -> str:
    if isinstance(value, bool):  # bool is an int subclass; reject explicitly
        raise TypeError("boolean is not a DSL value")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Symbol):
        return value.name
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    raise TypeError(f"cannot print value of type {type(value).__name__}")


def _geometry_keys(geometry: dict[str, Value]) -> list[str]:
    head = [k for k in _GEOMETRY_FIRST if k in geometry]
    tail = sorted(k for k in geometry if k not in _GEOMETRY_FIRST)
    return head + tail


def _geometry_lines(geometry: dict[str, Value], indent: str) -> list[str]:
    lines = [f"{indent}geometry {{"]
    for key in _geometry_keys(geometry):
        lines.append(f"{indent}  {key}: {format_value(geometry[key])};")
    lines.append(f"{indent}}}")
    return lines


def _vehicle_lines(vehicle: VehicleDecl, indent: str) -> list[str]:
    lines = [f"{indent}vehicle {vehicle.vehicle_id} {{"]
    lines.append(f"{indent}  role: {vehicle.role};")
    p = vehicle.placement
    if isinstance(p, AbsolutePlacement):
        lines.append(f"{indent}  lane: {format_value(p.lane)};")
        lines.append(f"{indent}  arc_s: {format_value(float(p.arc_s))};")
    else:
        lines.append(f"{indent}  anchor: {p.anchor};")
        lines.append(f"{indent}  relation: {p.relation};")
        lines.append(f"{indent}  offset: {format_value(float(p.offset))};")
    lines.append(f"{indent}  speed: {format_value(float(vehicle.speed))};")
    lines.append(f"{indent}  length: {format_value(float(vehicle.length))};")
    lines.append(f"{indent}  width: {format_value(float(vehicle.width))};")
    lines.append(f"{indent}}}")
    return lines


def _spawn_lines(spawn: list[VehicleDecl], indent: str) -> list[str]:
    lines = [f"{indent}spawn {{"]
    for vehicle in spawn:
        lines.extend(_vehicle_lines(vehicle, indent + "  "))
    lines.append(f"{indent}}}")
    return lines


def format_action(action: Action) -> str:
    parts = [f"{name}={format_value(action.args[name])}" for name in sorted(action.args)]
    if action.duration is not None:
        parts.append(f"duration={format_value(float(action.duration))}")
    if parts:
        return f"{action.verb}({', '.join(parts)})"
    return action.verb


def _schedule_line(schedule: Schedule, indent: str) -> str:
    chain = " -> ".join(format_action(a) for a in schedule.actions)
    return f"{indent}{schedule.target}: {chain};"


def _behavior_lines(behavior: list[Schedule], indent: str) -> list[str]:
    lines = [f"{indent}behavior {{"]
    for schedule in behavior:
        lines.append(_schedule_line(schedule, indent + "  "))
    lines.append(f"{indent}}}")
    return lines


def print_dsl(doc: DslDocument) -> str:
    """Render a document in canonical form (trailing newline included)."""
    lines = [f"scenario {format_value(doc.name)} {{"]
    lines.extend(_geometry_lines(doc.geometry, "  "))
    lines.extend(_spawn_lines(doc.spawn, "  "))
    lines.extend(_behavior_lines(doc.behavior, "  "))
    lines.append("}")
    return "\n".join(lines) + "\n"


def print_section(doc: DslDocument, kind: str) -> str:
    """Render one section as a standalone snippet (for corpus records)."""
    if kind == "geometry":
        lines = _geometry_lines(doc.geometry, "")
    elif kind == "spawn":
        lines = _spawn_lines(doc.spawn, "")
    elif kind == "behavior":
        lines = _behavior_lines(doc.behavior, "")
    else:
        raise ValueError(f"unknown section kind {kind!r}")
    return "\n".join(lines) + "\n"
