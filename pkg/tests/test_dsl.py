"""Parser / printer round-trips, canonical form, and the error surface."""

from __future__ import annotations

import math

import numpy as np
import pytest

from scenforge.dsl import (
    AbsolutePlacement,
    Action,
    DslDocument,
    RelativePlacement,
    Schedule,
    Symbol,
    VehicleDecl,
    check_dictionary,
    field_paths,
    parse_dsl,
    parse_section,
    print_dsl,
    print_section,
    set_field,
    validate_structure,
)
from scenforge.errors import (
    DslReferenceError,
    DslStructureError,
    DslSyntaxError,
)
from .conftest import GOLDEN_DSL


def test_parse_golden_document(golden_doc):
    assert golden_doc.name == "brake_trap"
    assert golden_doc.geometry["map"] == "straight_two_lane"
    assert golden_doc.geometry["ego_route"] == ("L1",)
    assert [v.vehicle_id for v in golden_doc.spawn] == ["ego1", "adv1"]
    ego = golden_doc.vehicle("ego1")
    assert ego.role == "ego"
    assert ego.placement == AbsolutePlacement("L1", 20.0)
    adv = golden_doc.vehicle("adv1")
    assert adv.placement == RelativePlacement("ego1", "front", 12.0)
    chain = golden_doc.schedule_for("adv1").actions
    assert [a.verb for a in chain] == ["go_straight", "sudden_brake", "go_straight"]
    assert chain[1].args == {"decel": 6.0}
    assert chain[1].duration == 2.0


def test_parse_print_round_trip(golden_doc):
    text = print_dsl(golden_doc)
    assert parse_dsl(text) == golden_doc
    # printing is a fixed point
    assert print_dsl(parse_dsl(text)) == text


def test_semantically_equal_docs_print_identically(golden_doc):
    messy = GOLDEN_DSL.replace("\n", " ").replace("  ", " ")
    messy_doc = parse_dsl(messy)
    assert print_dsl(messy_doc) == print_dsl(golden_doc)

    reordered_keys = GOLDEN_DSL.replace(
        'map: "straight_two_lane";\n    ego_route: ["L1"];',
        'ego_route: ["L1"];\n    map: "straight_two_lane";',
    )
    assert print_dsl(parse_dsl(reordered_keys)) == print_dsl(golden_doc)


def test_comments_and_escapes():
    text = """
    scenario "a \\"quoted\\" name" {  # trailing comment
      geometry { map: "m"; }  # another
      spawn { vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; } }
      behavior { v1: idle; }
    }
    """
    doc = parse_dsl(text)
    assert doc.name == 'a "quoted" name'
    assert parse_dsl(print_dsl(doc)) == doc


def test_numbers_round_trip_in_shortest_form():
    text = (
        'scenario "n" { geometry { map: "m"; a: 10; b: 10.0; c: 0.5; d: 1e-06; e: -3.25; }'
        ' spawn { vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; } }'
        " behavior { v1: idle; } }"
    )
    doc = parse_dsl(text)
    assert doc.geometry["a"] == 10 and isinstance(doc.geometry["a"], int)
    assert doc.geometry["b"] == 10.0 and isinstance(doc.geometry["b"], float)
    printed = print_dsl(doc)
    assert "a: 10;" in printed
    assert "b: 10.0;" in printed
    assert "c: 0.5;" in printed
    assert "d: 1e-06;" in printed
    assert parse_dsl(printed) == doc


def test_missing_semicolon_reports_position_and_expected():
    bad = GOLDEN_DSL.replace('map: "straight_two_lane";', 'map: "straight_two_lane"', 1)
    with pytest.raises(DslSyntaxError) as err:
        parse_dsl(bad)
    assert "expected" in str(err.value) and "';'" in str(err.value)
    assert err.value.line is not None and err.value.column is not None


def test_missing_behavior_section_is_structural():
    truncated = (
        'scenario "x" { geometry { map: "m"; } '
        'spawn { vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; } } }'
    )
    with pytest.raises(DslStructureError, match="behavior section absent"):
        parse_dsl(truncated)


def test_missing_spawn_section_is_structural():
    truncated = 'scenario "x" { geometry { map: "m"; } behavior { } }'
    with pytest.raises(DslStructureError, match="spawn section absent"):
        parse_dsl(truncated)


def test_duplicate_vehicle_id_rejected():
    text = (
        'scenario "x" { geometry { map: "m"; } spawn {'
        ' vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; }'
        ' vehicle v1 { role: background; lane: "L"; arc_s: 5.0; } }'
        " behavior { v1: idle; } }"
    )
    with pytest.raises(DslReferenceError, match="duplicate vehicle id"):
        parse_dsl(text)


def test_undeclared_schedule_target_rejected():
    text = (
        'scenario "x" { geometry { map: "m"; } spawn {'
        ' vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; } }'
        " behavior { ghost: idle; } }"
    )
    with pytest.raises(DslReferenceError, match="ghost"):
        parse_dsl(text)


def test_anchor_must_be_declared_earlier():
    text = (
        'scenario "x" { geometry { map: "m"; } spawn {'
        " vehicle v1 { role: ego; anchor: v2; relation: rear; offset: 5.0; }"
        ' vehicle v2 { role: background; lane: "L"; arc_s: 0.0; } }'
        " behavior { v1: idle; } }"
    )
    with pytest.raises(DslReferenceError, match="anchor"):
        parse_dsl(text)


def test_offset_must_be_positive():
    text = (
        'scenario "x" { geometry { map: "m"; } spawn {'
        ' vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; }'
        " vehicle v2 { role: background; anchor: v1; relation: rear; offset: 0.0; } }"
        " behavior { v1: idle; } }"
    )
    with pytest.raises(DslStructureError, match="offset"):
        parse_dsl(text)


def test_mixed_placement_rejected():
    text = (
        'scenario "x" { geometry { map: "m"; } spawn {'
        ' vehicle v1 { role: ego; lane: "L"; arc_s: 0.0; relation: rear; } }'
        " behavior { v1: idle; } }"
    )
    with pytest.raises(DslStructureError, match="placement"):
        parse_dsl(text)


# --- structure validation on constructed documents ---


def build_doc(roles=("ego",), verbs=("idle",), with_map=True):
    geometry = {"map": "m"} if with_map else {}
    spawn = [
        VehicleDecl(f"v{i}", role, AbsolutePlacement("L", float(i * 10)))
        for i, role in enumerate(roles)
    ]
    behavior = [Schedule("v0", [Action(verb) for verb in verbs])]
    return DslDocument("t", geometry, spawn, behavior)


def test_validate_structure_all_pass(golden_doc):
    report = validate_structure(golden_doc)
    assert report.passed
    assert report.passed_fraction == 1.0
    assert [f.check for f in report.findings] == [
        "sections",
        "unique_ego",
        "targets_declared",
        "required_args",
    ]


def test_validate_detects_multiple_egos():
    report = validate_structure(build_doc(roles=("ego", "ego")))
    assert not report.finding("unique_ego").passed
    assert "multiple" in report.finding("unique_ego").detail


def test_validate_detects_missing_required_args():
    report = validate_structure(build_doc(verbs=("brake",)))
    finding = report.finding("required_args")
    assert not finding.passed
    assert "decel" in finding.detail
    # sudden_brake needs decel and a duration
    doc = build_doc()
    doc.behavior[0].actions = [Action("sudden_brake", {"decel": 4.0})]
    finding = validate_structure(doc).finding("required_args")
    assert not finding.passed and "duration" in finding.detail


def test_validate_detects_undeclared_target():
    doc = build_doc()
    doc.behavior.append(Schedule("nobody", [Action("idle")]))
    assert not validate_structure(doc).finding("targets_declared").passed


def test_dictionary_flags_custom_verbs(golden_doc):
    doc = golden_doc.clone()
    doc.behavior[1].actions[0].verb = "zigzag"
    report = check_dictionary(doc)
    custom = report.custom
    assert [e.verb for e in custom] == ["zigzag"]
    assert custom[0].known is False
    assert report.known_fraction == pytest.approx(3 / 4)
    # near-miss verbs get a suggestion
    doc.behavior[1].actions[0].verb = "sudden_brakes"
    report = check_dictionary(doc)
    assert report.custom[0].suggestion == "sudden_brake"


def test_section_snippets_round_trip(golden_doc):
    geom = print_section(golden_doc, "geometry")
    spawn = print_section(golden_doc, "spawn")
    behavior = print_section(golden_doc, "behavior")
    assert parse_section(geom, "geometry") == golden_doc.geometry
    assert parse_section(spawn, "spawn") == golden_doc.spawn
    assert parse_section(behavior, "behavior") == golden_doc.behavior


def test_field_paths_and_set_field(golden_doc):
    paths = field_paths(golden_doc)
    assert paths[("spawn", "ego1", "lane")] == "L1"
    assert paths[("behavior", "adv1", 1, "verb")] == "sudden_brake"
    assert paths[("behavior", "adv1", 1, "arg", "decel")] == 6.0
    doc = golden_doc.clone()
    assert set_field(doc, ("spawn", "ego1", "speed"), 9.0)
    assert doc.vehicle("ego1").speed == 9.0
    assert not set_field(doc, ("spawn", "ghost", "speed"), 9.0)
    assert set_field(doc, ("behavior", "adv1", 1, "arg", "decel"), 5.0)
    assert doc.schedule_for("adv1").actions[1].args["decel"] == 5.0


# --- randomized round-trip fuzz (generator shared with the acceptance suite) ---


def random_document(rng: np.random.Generator) -> DslDocument:
    """A random well-formed document touching every construct."""
    lanes = ["L1", "L2", "L3"]
    geometry = {
        "map": rng.choice(["straight_two_lane", "tee", "cross"]).item(),
        "ego_route": tuple(rng.choice(lanes, size=rng.integers(1, 3)).tolist()),
        "source": rng.choice(["SYNTH", "INTERACTION"]).item(),
    }
    if rng.random() < 0.5:
        geometry["weather"] = Symbol(rng.choice(["clear", "rain"]).item())
    if rng.random() < 0.5:
        geometry["scale"] = round(float(rng.uniform(0.5, 2.0)), 3)
    n_vehicles = int(rng.integers(1, 5))
    spawn = []
    for i in range(n_vehicles):
        vid = f"v{i}"
        role = "ego" if i == 0 else rng.choice(["adversarial", "background"]).item()
        if i > 0 and rng.random() < 0.5:
            placement = RelativePlacement(
                anchor=f"v{int(rng.integers(0, i))}",
                relation=rng.choice(["rear", "front", "left", "right"]).item(),
                offset=round(float(rng.uniform(0.5, 30.0)), 2),
            )
        else:
            placement = AbsolutePlacement(
                lane=rng.choice(lanes).item(), arc_s=round(float(rng.uniform(0, 200)), 2)
            )
        spawn.append(
            VehicleDecl(
                vid,
                role,
                placement,
                speed=round(float(rng.uniform(0, 15)), 2),
                length=round(float(rng.uniform(3.5, 12.0)), 2),
                width=round(float(rng.uniform(1.5, 2.6)), 2),
            )
        )
    verbs = [
        ("go_straight", {}),
        ("idle", {}),
        ("brake", {"decel": round(float(rng.uniform(1, 6)), 2)}),
        ("lane_change", {"direction": Symbol(rng.choice(["left", "right"]).item())}),
        ("sudden_brake", {"decel": round(float(rng.uniform(2, 8)), 2)}),
        ("tailgate", {"gap": round(float(rng.uniform(0.3, 3.0)), 2)}),
        ("speeding", {"factor": round(float(rng.uniform(1.1, 2.0)), 2)}),
        ("cut_in", {"side": Symbol("left"), "lateral": 1.2}),
    ]
    behavior = []
    for v in spawn:
        if rng.random() < 0.85:
            actions = []
            for _ in range(int(rng.integers(1, 4))):
                verb, args = verbs[int(rng.integers(0, len(verbs)))]
                duration = None
                if verb == "sudden_brake" or rng.random() < 0.4:
                    duration = round(float(rng.uniform(0.5, 5.0)), 2)
                actions.append(Action(verb, dict(args), duration))
            behavior.append(Schedule(v.vehicle_id, actions))
    if not behavior:
        behavior = [Schedule(spawn[0].vehicle_id, [Action("idle")])]
    name = f"fuzz_{rng.integers(0, 10**9)}"
    return DslDocument(name, geometry, spawn, behavior)


def test_fuzz_round_trip_100_docs():
    rng = np.random.default_rng(123)
    for _ in range(100):
        doc = random_document(rng)
        text = print_dsl(doc)
        again = parse_dsl(text)
        assert again == doc
        assert print_dsl(again) == text
