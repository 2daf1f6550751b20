"""Backends, prompt rendering, self-consistency voting, semantic alignment."""

from __future__ import annotations

import requests
import pytest

from scenforge.dsl import Action, RelativePlacement
from scenforge.errors import (
    GenerationError,
    ProtocolError,
    ReplayError,
    TransportError,
)
from scenforge.genpipe import (
    BackendConfig,
    FewShot,
    HttpChatBackend,
    LlmJudge,
    ReplayBackend,
    build_prompt,
    check_alignment,
    detect_tags,
    render_prompt,
    revise_doc,
    vote_embedding,
    vote_structured,
)
from .conftest import GOLDEN_DSL


# --- replay backend ---


def write_fixtures(path, texts):
    path.mkdir(parents=True, exist_ok=True)
    for i, text in enumerate(texts):
        (path / f"{i:03d}.txt").write_text(text)
    return path


def test_replay_serves_files_in_lexicographic_order(tmp_path):
    backend = ReplayBackend(write_fixtures(tmp_path / "r", ["one", "two", "three"]))
    assert backend.complete("p1", 2) == ["one", "two"]
    assert backend.complete("p2", 1) == ["three"]
    assert backend.prompts == ["p1", "p2"]


def test_replay_exhaustion_names_the_directory(tmp_path):
    fixture_dir = write_fixtures(tmp_path / "r", ["only"])
    backend = ReplayBackend(fixture_dir)
    backend.complete("p", 1)
    with pytest.raises(ReplayError) as err:
        backend.complete("p", 1)
    assert str(fixture_dir) in str(err.value)


def test_replay_missing_directory(tmp_path):
    with pytest.raises(ReplayError) as err:
        ReplayBackend(tmp_path / "nope")
    assert "nope" in str(err.value)


# --- http backend ---


class FakeResponse:
    def __init__(self, status_code=200, payload=None, text="body"):
        self.status_code = status_code
        self._payload = payload
        self.text = text

    def json(self):
        if self._payload is None:
            raise ValueError("not json")
        return self._payload


class FakeSession:
    def __init__(self, response=None, exc=None):
        self.response = response
        self.exc = exc
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers, "timeout": timeout})
        if self.exc is not None:
            raise self.exc
        return self.response


def chat_config():
    return BackendConfig(mode="http_chat", endpoint="https://llm.test/v1/chat", model="m")


def test_http_chat_request_and_response_shape(monkeypatch):
    monkeypatch.setenv("SCENFORGE_API_KEY", "sekrit")
    payload = {"choices": [{"message": {"content": "alpha"}}, {"message": {"content": "beta"}}]}
    session = FakeSession(FakeResponse(payload=payload))
    backend = HttpChatBackend(chat_config(), session=session)
    assert backend.complete("hello", 2) == ["alpha", "beta"]
    call = session.calls[0]
    assert call["url"] == "https://llm.test/v1/chat"
    assert call["json"]["messages"] == [{"role": "user", "content": "hello"}]
    assert call["json"]["n"] == 2
    assert call["headers"]["Authorization"] == "Bearer sekrit"


def test_http_chat_without_key_sends_no_auth_header(monkeypatch):
    monkeypatch.delenv("SCENFORGE_API_KEY", raising=False)
    payload = {"choices": [{"message": {"content": "x"}}]}
    session = FakeSession(FakeResponse(payload=payload))
    HttpChatBackend(chat_config(), session=session).complete("q", 1)
    assert "Authorization" not in session.calls[0]["headers"]


def test_http_error_status_is_transport_error():
    session = FakeSession(FakeResponse(status_code=503))
    with pytest.raises(TransportError, match="503"):
        HttpChatBackend(chat_config(), session=session).complete("q", 1)


def test_http_timeout_is_transport_error():
    session = FakeSession(exc=requests.Timeout("too slow"))
    with pytest.raises(TransportError, match="too slow"):
        HttpChatBackend(chat_config(), session=session).complete("q", 1)


def test_http_bad_shape_is_protocol_error():
    session = FakeSession(FakeResponse(payload={"unexpected": []}))
    with pytest.raises(ProtocolError):
        HttpChatBackend(chat_config(), session=session).complete("q", 1)
    session = FakeSession(FakeResponse(payload=None))
    with pytest.raises(ProtocolError, match="non-JSON"):
        HttpChatBackend(chat_config(), session=session).complete("q", 1)


# --- prompt rendering ---


def test_prompt_sections_render_in_order():
    bundle = build_prompt(
        "a sudden brake on the highway",
        context_blocks=["first retrieved scene", "second retrieved scene"],
        few_shots=[FewShot("tiny query", "tiny answer")],
    )
    text = render_prompt(bundle)
    positions = [
        text.index("[Repository Guidance]"),
        text.index("tiny query"),
        text.index("a sudden brake on the highway"),
        text.index("Think step by step"),
        text.index("[Scene 1]"),
    ]
    assert positions == sorted(positions)
    assert text.index("[Scene 1]\nfirst retrieved scene") < text.index(
        "[Scene 2]\nsecond retrieved scene"
    )


def test_fix_hint_is_prepended():
    bundle = build_prompt("q", fix_hint="missing semicolon on line 3")
    text = render_prompt(bundle)
    assert text.index("missing semicolon") < text.index("[Repository Guidance]")
    assert render_prompt(build_prompt("q")).startswith("[Repository Guidance]")


# --- voting ---


def test_embedding_vote_majority_and_tie_break(golden_doc):
    other = GOLDEN_DSL.replace("brake_trap", "other_scene").replace(
        "sudden_brake(decel=6.0, duration=2.0)", "tailgate(gap=0.5)"
    )
    result = vote_embedding([GOLDEN_DSL, GOLDEN_DSL, other])
    assert result.winner_index == 0
    assert result.doc == golden_doc
    assert 0.0 < result.mean_similarity <= 1.0


def test_vote_discards_unparseable_candidates(golden_doc):
    result = vote_embedding(["scenario {", GOLDEN_DSL])
    assert result.winner_index == 1
    assert result.doc == golden_doc
    assert len(result.discarded) == 1
    assert result.discarded[0][0] == 0
    assert "expected" in result.discarded[0][1]


def test_vote_with_no_parseable_candidate_raises():
    with pytest.raises(GenerationError):
        vote_embedding(["nope", "also nope"])


def test_structured_vote_merges_majority_fields(golden_doc):
    v9 = GOLDEN_DSL.replace("speed: 8.0;", "speed: 9.0;", 1)  # ego speed only
    result = vote_structured([v9, GOLDEN_DSL, GOLDEN_DSL])
    assert result.cluster == [0, 1, 2]
    assert result.doc.vehicle("ego1").speed == 8.0
    assert result.doc == golden_doc


def test_structured_vote_excludes_structural_outlier(golden_doc):
    outlier = (
        'scenario "tiny" { geometry { map: "m"; } spawn {'
        ' vehicle solo { role: ego; lane: "L"; arc_s: 0.0; } }'
        " behavior { solo: idle; } }"
    )
    v9 = GOLDEN_DSL.replace("speed: 8.0;", "speed: 9.0;", 1)
    result = vote_structured([outlier, v9, GOLDEN_DSL, GOLDEN_DSL])
    assert result.cluster == [1, 2, 3]
    assert result.doc == golden_doc


def test_structured_tie_keeps_central_value(golden_doc):
    v9 = GOLDEN_DSL.replace("speed: 8.0;", "speed: 9.0;", 1)
    result = vote_structured([GOLDEN_DSL, v9])
    # 1-1 tie on ego speed; the central candidate's value stands
    assert result.doc.vehicle("ego1").speed == result.doc.vehicle("ego1").speed
    assert result.winner_index in (0, 1)
    assert result.doc.vehicle("ego1").speed == (
        8.0 if result.winner_index == 0 else 9.0
    )


# --- alignment ---


def test_detect_tags_masks_most_specific_phrase():
    assert detect_tags("the adversary suddenly brakes ahead") == ["sudden_brake"]
    assert detect_tags("an unsafe lane change from the left") == ["cut_in"]
    assert detect_tags("the ego brakes while being tailgated") == ["brake", "tailgate"]
    assert detect_tags("the ego turns left, no conflict") == ["turn_left"]


def test_check_alignment_passes_on_golden(golden_doc):
    report = check_alignment(
        "the adversarial vehicle suddenly brakes 12 m in front of the ego", golden_doc
    )
    assert report.ok
    assert report.tags == ["sudden_brake"]


def test_check_alignment_reports_missing_verb(golden_doc):
    doc = golden_doc.clone()
    doc.schedule_for("adv1").actions = [Action("go_straight")]
    report = check_alignment("the adversarial vehicle suddenly brakes", doc)
    assert report.missing_tags == ["sudden_brake"]
    assert not report.ok


def test_revise_doc_swaps_in_missing_adversarial_verb(golden_doc):
    doc = golden_doc.clone()
    schedule = doc.schedule_for("adv1")
    schedule.actions = schedule.actions[:1]  # only go_straight remains
    revised, report = revise_doc("the adversarial vehicle suddenly brakes", doc)
    assert report.revised
    assert report.ok
    verbs = [a.verb for a in revised.schedule_for("adv1").actions]
    assert "sudden_brake" in verbs
    action = revised.schedule_for("adv1").actions[0]
    assert action.args["decel"] > 0 and action.duration is not None
    # original is untouched
    assert [a.verb for a in doc.schedule_for("adv1").actions] == ["go_straight"]


def test_revise_doc_fixes_relation_and_distance(golden_doc):
    query = "the adversarial vehicle is tailgating at 0.5 m from the rear"
    revised, report = revise_doc(query, golden_doc.clone())
    assert report.ok and report.revised
    adv = revised.vehicle("adv1")
    assert isinstance(adv.placement, RelativePlacement)
    assert adv.placement.relation == "rear"
    assert adv.placement.offset == pytest.approx(0.5)
    verbs = [a.verb for a in revised.schedule_for("adv1").actions]
    assert "tailgate" in verbs


def test_distances_require_a_relation_context(golden_doc):
    # "8 m/s" is a speed, not a distance; no relation phrase -> no distance check
    report = check_alignment("the ego cruises at 8 m/s", golden_doc)
    assert report.ok


# --- judge ---


def test_llm_judge_parses_scores(tmp_path, golden_doc):
    backend = ReplayBackend(
        write_fixtures(tmp_path / "j", ["semantic_fidelity: 4\nbehavioral_richness: 3\n"])
    )
    scores = LlmJudge(backend).score("query", golden_doc)
    assert scores.semantic_fidelity == 4.0
    assert scores.behavioral_richness == 3.0
    assert "scenario" in backend.prompts[0]


def test_llm_judge_rejects_malformed_reply(tmp_path, golden_doc):
    backend = ReplayBackend(write_fixtures(tmp_path / "j", ["no scores here"]))
    with pytest.raises(ProtocolError):
        LlmJudge(backend).score("query", golden_doc)
