"""Recursive-descent parser for the scenario DSL.

Grammar (sections must appear in the order geometry, spawn, behavior):

    document := "scenario" STRING "{" geometry spawn behavior "}"
    geometry := "geometry" "{" pair* "}"
    spawn    := "spawn" "{" vehicle+ "}"
    vehicle  := "vehicle" IDENT "{" pair* "}"
    behavior := "behavior" "{" schedule* "}"
    schedule := IDENT ":" action ("->" action)* ";"
    action   := IDENT [ "(" arg ("," arg)* ")" ]
    arg      := IDENT "=" value
    pair     := IDENT ":" value ";"
    value    := NUMBER | STRING | IDENT | "[" value ("," value)* "]"

Errors:
  * DslSyntaxError: token-level failures, with line/column and the set of
    tokens that would have been accepted.
  * DslStructureError: missing sections, bad vehicle fields, bad durations.
  * DslReferenceError: duplicate vehicle ids, anchors or schedule targets
    that do not name a previously declared vehicle.
"""

from __future__ import annotations

from ..errors import DslReferenceError, DslStructureError, DslSyntaxError
from .lexer import Token, tokenize
from .model import (
    RELATIONS,
    ROLES,
    AbsolutePlacement,
    Action,
    DslDocument,
    RelativePlacement,
    Schedule,
    Symbol,
    Value,
    VehicleDecl,
)

_SECTIONS = ("geometry", "spawn", "behavior")
_VEHICLE_KEYS = (
    "role",
    "lane",
    "arc_s",
    "anchor",
    "relation",
    "offset",
    "speed",
    "length",
    "width",
)


class _Parser:
    def __init__(self, tokens: list[Token], check_references: bool = True):
        self.tokens = tokens
        self.pos = 0
        self.check_references = check_references

    # --- token helpers ---

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.current
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.current
        if tok.kind not in kinds:
            expected = ", ".join(repr(k) for k in sorted(kinds))
            raise DslSyntaxError(
                f"expected one of [{expected}], got {tok.describe()}",
                tok.line,
                tok.column,
            )
        return self.advance()

    def expect_keyword(self, word: str) -> Token:
        tok = self.current
        if tok.kind == "IDENT" and tok.value == word:
            return self.advance()
        if word in _SECTIONS:
            # A '}' or a later section keyword here means the section was
            # skipped, which is a structural problem, not a typo.
            if tok.kind == "}" or (tok.kind == "IDENT" and tok.value in _SECTIONS):
                raise DslStructureError(f"{word} section absent", tok.line, tok.column)
        raise DslSyntaxError(
            f"expected keyword {word!r}, got {tok.describe()}", tok.line, tok.column
        )

    # --- values ---

    def parse_value(self) -> Value:
        tok = self.current
        if tok.kind == "NUMBER":
            self.advance()
            return tok.value  # int or float
        if tok.kind == "STRING":
            self.advance()
            return str(tok.value)
        if tok.kind == "IDENT":
            self.advance()
            return Symbol(str(tok.value))
        if tok.kind == "[":
            self.advance()
            items = [self.parse_value()]
            while self.current.kind == ",":
                self.advance()
                items.append(self.parse_value())
            self.expect("]")
            return tuple(items)
        raise DslSyntaxError(
            f"expected one of [IDENT, NUMBER, STRING, [], got {tok.describe()}",
            tok.line,
            tok.column,
        )

    def parse_pairs(self) -> dict[str, tuple[Value, Token]]:
        pairs: dict[str, tuple[Value, Token]] = {}
        while self.current.kind == "IDENT":
            key_tok = self.advance()
            key = str(key_tok.value)
            if key in pairs:
                raise DslStructureError(f"duplicate key {key!r}", key_tok.line, key_tok.column)
            self.expect(":")
            value = self.parse_value()
            self.expect(";")
            pairs[key] = (value, key_tok)
        return pairs

    # --- sections ---

    def parse_document(self) -> DslDocument:
        self.expect_keyword("scenario")
        name = str(self.expect("STRING").value)
        self.expect("{")
        self.expect_keyword("geometry")
        geometry = self.parse_geometry_body()
        self.expect_keyword("spawn")
        spawn = self.parse_spawn_body()
        self.expect_keyword("behavior")
        behavior = self.parse_behavior_body({v.vehicle_id for v in spawn})
        self.expect("}")
        self.expect("EOF")
        return DslDocument(name=name, geometry=geometry, spawn=spawn, behavior=behavior)

    def parse_geometry_body(self) -> dict[str, Value]:
        self.expect("{")
        pairs = self.parse_pairs()
        self.expect("}")
        return {key: value for key, (value, _) in pairs.items()}

    def parse_spawn_body(self) -> list[VehicleDecl]:
        self.expect("{")
        vehicles: list[VehicleDecl] = []
        seen: set[str] = set()
        while True:
            tok = self.current
            if tok.kind == "IDENT" and tok.value == "vehicle":
                self.advance()
                vehicles.append(self.parse_vehicle(seen))
                continue
            break
        self.expect("}")
        if not vehicles:
            tok = self.current
            raise DslStructureError("spawn section declares no vehicles", tok.line, tok.column)
        return vehicles

    def parse_vehicle(self, seen: set[str]) -> VehicleDecl:
        id_tok = self.expect("IDENT")
        vehicle_id = str(id_tok.value)
        if vehicle_id in seen:
            raise DslReferenceError(
                f"duplicate vehicle id {vehicle_id!r}", id_tok.line, id_tok.column
            )
        self.expect("{")
        pairs = self.parse_pairs()
        self.expect("}")

        def fail(message: str, tok: Token = id_tok):
            raise DslStructureError(f"vehicle {vehicle_id}: {message}", tok.line, tok.column)

        for key, (_, key_tok) in pairs.items():
            if key not in _VEHICLE_KEYS:
                fail(f"unknown field {key!r}", key_tok)

        def take_number(key: str) -> float | None:
            if key not in pairs:
                return None
            value, tok = pairs[key]
            if not isinstance(value, (int, float)):
                fail(f"field {key!r} must be a number", tok)
            return float(value)

        def take_symbol(key: str) -> str | None:
            if key not in pairs:
                return None
            value, tok = pairs[key]
            if not isinstance(value, Symbol):
                fail(f"field {key!r} must be a bare identifier", tok)
            return value.name

        def take_string(key: str) -> str | None:
            if key not in pairs:
                return None
            value, tok = pairs[key]
            if not isinstance(value, str):
                fail(f"field {key!r} must be a quoted string", tok)
            return value

        role = take_symbol("role")
        if role is None:
            fail("role is required")
        if role not in ROLES:
            fail(f"role must be one of {list(ROLES)}, got {role!r}", pairs["role"][1])

        lane = take_string("lane")
        arc_s = take_number("arc_s")
        anchor = take_symbol("anchor")
        relation = take_symbol("relation")
        offset = take_number("offset")
        absolute = [k for k in ("lane", "arc_s") if k in pairs]
        relative = [k for k in ("anchor", "relation", "offset") if k in pairs]
        if absolute and relative:
            fail("mixes absolute (lane/arc_s) and relative (anchor/relation/offset) placement")
        if len(absolute) == 2:
            if arc_s < 0:
                fail("arc_s must be >= 0", pairs["arc_s"][1])
            placement: AbsolutePlacement | RelativePlacement = AbsolutePlacement(lane, arc_s)
        elif len(relative) == 3:
            if relation not in RELATIONS:
                fail(f"relation must be one of {list(RELATIONS)}", pairs["relation"][1])
            if offset <= 0:
                fail("offset must be > 0", pairs["offset"][1])
            if anchor not in seen:
                raise DslReferenceError(
                    f"vehicle {vehicle_id}: anchor {anchor!r} not declared earlier",
                    pairs["anchor"][1].line,
                    pairs["anchor"][1].column,
                )
            placement = RelativePlacement(anchor, relation, offset)
        else:
            fail(
                "placement incomplete: need lane + arc_s, or anchor + relation + offset"
            )

        speed = take_number("speed")
        length = take_number("length")
        width = take_number("width")
        decl = VehicleDecl(
            vehicle_id=vehicle_id,
            role=role,
            placement=placement,
            speed=0.0 if speed is None else speed,
            length=4.5 if length is None else length,
            width=2.0 if width is None else width,
        )
        if decl.speed < 0:
            fail("speed must be >= 0", pairs["speed"][1])
        if decl.length <= 0 or decl.width <= 0:
            fail("length and width must be > 0")
        seen.add(vehicle_id)
        return decl

    def parse_behavior_body(self, declared: set[str]) -> list[Schedule]:
        self.expect("{")
        schedules: list[Schedule] = []
        targets: set[str] = set()
        while self.current.kind == "IDENT":
            target_tok = self.advance()
            target = str(target_tok.value)
            if self.check_references and target not in declared:
                raise DslReferenceError(
                    f"schedule target {target!r} not declared in spawn",
                    target_tok.line,
                    target_tok.column,
                )
            if target in targets:
                raise DslReferenceError(
                    f"duplicate schedule for {target!r}", target_tok.line, target_tok.column
                )
            targets.add(target)
            self.expect(":")
            actions = [self.parse_action()]
            while self.current.kind == "ARROW":
                self.advance()
                actions.append(self.parse_action())
            self.expect(";")
            schedules.append(Schedule(target=target, actions=actions))
        self.expect("}")
        return schedules

    def parse_action(self) -> Action:
        verb_tok = self.expect("IDENT")
        args: dict[str, Value] = {}
        duration: float | None = None
        if self.current.kind == "(":
            self.advance()
            while True:
                name_tok = self.expect("IDENT")
                name = str(name_tok.value)
                self.expect("=")
                value = self.parse_value()
                if name == "duration":
                    if not isinstance(value, (int, float)) or value <= 0:
                        raise DslStructureError(
                            "duration must be a positive number",
                            name_tok.line,
                            name_tok.column,
                        )
                    duration = float(value)
                elif name in args:
                    raise DslStructureError(
                        f"duplicate argument {name!r}", name_tok.line, name_tok.column
                    )
                else:
                    args[name] = value
                if self.current.kind == ",":
                    self.advance()
                    continue
                break
            self.expect(")")
        return Action(verb=str(verb_tok.value), args=args, duration=duration)


def parse_dsl(text: str) -> DslDocument:
    """Parse a full scenario document."""
    return _Parser(tokenize(text)).parse_document()


def parse_section(text: str, kind: str):
    """Parse a single standalone section snippet, e.g. 'spawn { ... }'.

    Reference checks that need the other sections (schedule targets) are
    skipped; anchor ordering inside a spawn snippet is still enforced.
    """
    parser = _Parser(tokenize(text), check_references=False)
    parser.expect_keyword(kind)
    if kind == "geometry":
        result = parser.parse_geometry_body()
    elif kind == "spawn":
        result = parser.parse_spawn_body()
    elif kind == "behavior":
        result = parser.parse_behavior_body(set())
    else:
        raise ValueError(f"unknown section kind {kind!r}")
    parser.expect("EOF")
    return result
