"""End-to-end tests for the command-line driver.

These call main(argv) in-process so exit codes and stdout are asserted
directly; fixtures under tests/fixtures keep every run offline."""

import json
from pathlib import Path

import pytest

from scenforge import cli
from scenforge.corpus import load_corpus
from scenforge.dsl import parse_dsl, print_dsl
from scenforge.errors import TrainingError
from scenforge.ingest import parse_tracks, serialize_tracks
from scenforge.retrieval import RetrievalIndex
from scenforge.rl import load_checkpoint
from scenforge.sim import EpisodeLog

from .conftest import make_trajectory

FIXTURES = Path(__file__).parent / "fixtures"
MAPS = str(FIXTURES / "maps")
BRAKE_CHECK = str(FIXTURES / "scenarios" / "brake_check.scn")
ADV_POLICY = str(FIXTURES / "scenarios" / "adv_policy.scn")
IDENTITY_REPLAY = str(FIXTURES / "replay" / "identity")
LOOP_REPLAY = str(FIXTURES / "replay" / "loop_success")
EPISODES = str(FIXTURES / "episodes")

COVERED_QUERY = "adversarial vehicle suddenly brakes in front of the ego"


def write_tracks(path: Path) -> Path:
    """A lead that brakes hard for 8 samples with a follower 14 m behind."""
    dt = 0.1
    accels = [0.0] * 10 + [-4.0] * 8 + [0.0] * 10
    speeds = [15.0]
    for a in accels:
        speeds.append(max(speeds[-1] + a * dt, 0.5))
    xs = [30.0]
    for v in speeds[:-1]:
        xs.append(xs[-1] + v * dt)
    lead = make_trajectory("101", xs, vxs=speeds, dt=dt)
    follower = make_trajectory("102", [x - 14.0 for x in xs], vxs=speeds, dt=dt)
    serialize_tracks([lead, follower], path)
    return path


def loop_config(tmp_path: Path, rounds: int = 1) -> Path:
    cfg = tmp_path / "loop.yaml"
    cfg.write_text(
        f"""\
seed: 0
paths:
  lane_maps: {MAPS}
  corpus: {tmp_path / 'corpus.jsonl'}
  index: {tmp_path / 'index.json'}
  reports: {tmp_path / 'reports'}
backend:
  mode: replay
  replay_dir: {LOOP_REPLAY}
training:
  adv_steps: 0
  ego_steps: 0
loop:
  rounds: {rounds}
  n_episodes: 4
  queries:
    - adversarial car tailgates the ego closely
""",
        encoding="utf-8",
    )
    return cfg


# --- parser level -----------------------------------------------------------------


def test_version_flag_exits_zero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0


def test_unknown_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["compile"])
    assert exc.value.code == 2


def test_rounds_flag_must_be_positive():
    rc = cli.main(["compile", "--scenario", BRAKE_CHECK, "--lane-maps", MAPS, "--rounds", "0"])
    assert rc == 2


# --- compile / score / simulate ------------------------------------------------------


def test_compile_prints_program_summary(capsys):
    rc = cli.main(["compile", "--scenario", BRAKE_CHECK, "--lane-maps", MAPS])
    out = capsys.readouterr().out
    assert rc == 0
    assert "compiled brake_check" in out
    assert "policy_slots=ego1" in out


def test_compile_missing_scenario_is_config_error(capsys):
    rc = cli.main(["compile", "--scenario", "/no/such.scn", "--lane-maps", MAPS])
    assert rc == 2
    assert "does not exist" in capsys.readouterr().err


def test_compile_malformed_scenario_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text('scenario "broken" {\n  geometry { map: "x" }\n')
    rc = cli.main(["compile", "--scenario", str(bad), "--lane-maps", MAPS])
    assert rc == 3
    assert "data error" in capsys.readouterr().err


def test_score_emits_rubric_json(capsys):
    rc = cli.main(
        ["score", "--scenario", BRAKE_CHECK, "--lane-maps", MAPS, "--query", COVERED_QUERY]
    )
    assert rc == 0
    score = json.loads(capsys.readouterr().out)
    assert set(score) == {
        "semantic_fidelity",
        "executable_validity",
        "structural_completeness",
        "modularity",
        "behavioral_richness",
        "voting_centrality",
        "total",
    }
    assert score["executable_validity"] == 5.0
    assert 0.0 <= score["total"] <= 100.0


def test_simulate_writes_episode_log(tmp_path, capsys):
    out = tmp_path / "ep.json"
    rc = cli.main(
        ["simulate", "--scenario", BRAKE_CHECK, "--lane-maps", MAPS, "--seed", "7", "--out", str(out)]
    )
    assert rc == 0
    log = EpisodeLog.load(out)
    assert log.scenario == "brake_check"
    assert log.termination in {"collision", "goal", "timeout", "horizon"}
    assert f"termination={log.termination}" in capsys.readouterr().out


# --- generate ----------------------------------------------------------------------


def test_generate_replay_prints_canonical_dsl(tmp_path, capsys):
    out = tmp_path / "gen.scn"
    rc = cli.main(
        ["generate", "--replay", IDENTITY_REPLAY, "--query", COVERED_QUERY, "--out", str(out)]
    )
    assert rc == 0
    printed = capsys.readouterr().out
    text = out.read_text()
    assert printed == text
    assert text.startswith('scenario "brake_trap"')
    # output is canonical: printing the parse of it reproduces it byte for byte
    assert print_dsl(parse_dsl(text)) == text


def test_generate_is_byte_deterministic(tmp_path):
    outs = []
    for name in ("a.scn", "b.scn"):
        out = tmp_path / name
        rc = cli.main(
            ["generate", "--replay", IDENTITY_REPLAY, "--query", COVERED_QUERY, "--out", str(out)]
        )
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_generate_exhausted_replay_is_backend_error(tmp_path, capsys):
    short = tmp_path / "short"
    short.mkdir()
    for i in range(2):
        (short / f"{i:03d}.txt").write_text((Path(IDENTITY_REPLAY) / "000.txt").read_text())
    rc = cli.main(["generate", "--replay", str(short), "--query", COVERED_QUERY])
    assert rc == 4
    assert "backend error" in capsys.readouterr().err


def test_generate_dry_run_writes_nothing(tmp_path, capsys):
    out = tmp_path / "never.scn"
    rc = cli.main(
        [
            "generate",
            "--replay",
            IDENTITY_REPLAY,
            "--query",
            COVERED_QUERY,
            "--out",
            str(out),
            "--dry-run",
        ]
    )
    assert rc == 0
    assert not out.exists()
    assert "dry-run ok" in capsys.readouterr().out


# --- data pipeline -----------------------------------------------------------------


def test_ingest_summary_and_normalized_out(tmp_path, capsys):
    tracks = write_tracks(tmp_path / "tracks.csv")
    out = tmp_path / "normalized.csv"
    rc = cli.main(["ingest", "--tracks", str(tracks), "--lane-maps", MAPS, "--out", str(out)])
    assert rc == 0
    assert "tracks: 2 agents" in capsys.readouterr().out
    reparsed = parse_tracks(out)
    assert len(reparsed.trajectories) == 2
    assert reparsed.dropped_rows == 0


def test_extract_corpus_index_chain(tmp_path, capsys):
    tracks = write_tracks(tmp_path / "tracks.csv")
    segments = tmp_path / "segments.jsonl"
    corpus = tmp_path / "corpus.jsonl"
    index = tmp_path / "index.json"

    rc = cli.main(
        [
            "extract",
            "--tracks",
            str(tracks),
            "--lane-maps",
            MAPS,
            "--map",
            "straight_two_lane",
            "--out",
            str(segments),
        ]
    )
    assert rc == 0
    assert "braking=" in capsys.readouterr().out

    rc = cli.main(
        [
            "corpus-build",
            "--segments",
            str(segments),
            "--lane-maps",
            MAPS,
            "--map",
            "straight_two_lane",
            "--seed",
            "3",
            "--out",
            str(corpus),
        ]
    )
    assert rc == 0
    records = load_corpus(corpus)
    assert records
    for record in records:
        record.validate()  # raises DataError on a malformed record

    rc = cli.main(["index", "--corpus", str(corpus), "--out", str(index)])
    assert rc == 0
    assert len(RetrievalIndex.load(index)) == len(records)


def test_extract_unknown_map_is_config_error(tmp_path, capsys):
    tracks = write_tracks(tmp_path / "tracks.csv")
    rc = cli.main(
        ["extract", "--tracks", str(tracks), "--lane-maps", MAPS, "--map", "nowhere"]
    )
    assert rc == 2
    assert "nowhere" in capsys.readouterr().err


def test_smooth_reports_and_exports(tmp_path, capsys):
    tracks = write_tracks(tmp_path / "tracks.csv")
    out = tmp_path / "smoothed.csv"
    rc = cli.main(["smooth", "--tracks", str(tracks), "--out", str(out)])
    assert rc == 0
    assert "sse=" in capsys.readouterr().out
    assert len(parse_tracks(out).trajectories) == 2


# --- training ----------------------------------------------------------------------


def test_train_adv_writes_checkpoint_and_stats(tmp_path, capsys):
    rc = cli.main(
        [
            "train-adv",
            "--scenario",
            ADV_POLICY,
            "--lane-maps",
            MAPS,
            "--steps",
            "512",
            "--seed",
            "1",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == 0
    params = load_checkpoint(tmp_path / "adv_policy.json")
    assert params.obs_dim > 0
    stats = (tmp_path / "adv_stats.csv").read_text().splitlines()
    assert stats[0].startswith("step,")
    assert "phase I" in capsys.readouterr().out


def test_train_adv_without_adversarial_slot_is_config_error(tmp_path, capsys):
    rc = cli.main(
        [
            "train-adv",
            "--scenario",
            BRAKE_CHECK,
            "--lane-maps",
            MAPS,
            "--steps",
            "64",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == 2
    assert "adversarial policy slot" in capsys.readouterr().err


def test_training_error_maps_to_exit_5(monkeypatch, capsys):
    def boom(args, cfg):
        raise TrainingError("loss diverged")

    monkeypatch.setitem(cli.HANDLERS, "compile", boom)
    rc = cli.main(["compile", "--scenario", BRAKE_CHECK, "--lane-maps", MAPS])
    assert rc == 5
    assert "training error" in capsys.readouterr().err


# --- evaluate ----------------------------------------------------------------------


def test_evaluate_logs_reports_exact_rate(tmp_path, capsys):
    rc = cli.main(["evaluate", "--logs", EPISODES, "--out", str(tmp_path)])
    assert rc == 0
    assert "collision_rate=0.7000" in capsys.readouterr().out
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert rows[0] == "behavior,episodes,collisions,collision_rate,timeouts,goals"
    assert rows[1] == "sudden_brake,10,7,0.7,0,3"
    assert rows[2] == "TOTAL,10,7,0.7,0,3"
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["collision_rate"] == 0.7
    assert "config" in report


def test_evaluate_needs_exactly_one_input_mode(tmp_path):
    assert cli.main(["evaluate", "--out", str(tmp_path)]) == 2
    assert (
        cli.main(
            [
                "evaluate",
                "--logs",
                EPISODES,
                "--scenario",
                BRAKE_CHECK,
                "--out",
                str(tmp_path),
            ]
        )
        == 2
    )


def test_evaluate_empty_log_dir_is_data_error(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["evaluate", "--logs", str(empty), "--out", str(tmp_path)]) == 3


def test_evaluate_rollouts_embed_seed(tmp_path):
    rc = cli.main(
        [
            "evaluate",
            "--scenario",
            BRAKE_CHECK,
            "--lane-maps",
            MAPS,
            "--seed",
            "5",
            "--out",
            str(tmp_path),
        ]
    )
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["seed"] == 5
    assert report["episodes"] == 10


# --- loop --------------------------------------------------------------------------


def test_loop_appends_once_then_is_idempotent(tmp_path, capsys):
    cfg = loop_config(tmp_path)
    rc = cli.main(["loop", "--config", str(cfg)])
    first = capsys.readouterr().out
    assert rc == 0
    assert "appended=1" in first
    assert len(load_corpus(tmp_path / "corpus.jsonl")) == 1

    rc = cli.main(["loop", "--config", str(cfg)])
    second = capsys.readouterr().out
    assert rc == 0
    assert "appended=0" in second
    assert len(load_corpus(tmp_path / "corpus.jsonl")) == 1
    assert (tmp_path / "reports" / "round_0.csv").exists()
    assert (tmp_path / "reports" / "round_0.json").exists()


def test_loop_dry_run_touches_nothing(tmp_path, capsys):
    cfg = loop_config(tmp_path)
    rc = cli.main(["loop", "--config", str(cfg), "--dry-run"])
    assert rc == 0
    assert "dry-run ok" in capsys.readouterr().out
    assert not (tmp_path / "corpus.jsonl").exists()
    assert not (tmp_path / "reports").exists()


def test_loop_without_queries_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "bare.yaml"
    cfg.write_text(
        f"paths:\n  lane_maps: {MAPS}\n  corpus: {tmp_path / 'c.jsonl'}\n"
        f"backend:\n  mode: replay\n  replay_dir: {LOOP_REPLAY}\n",
        encoding="utf-8",
    )
    rc = cli.main(["loop", "--config", str(cfg)])
    assert rc == 2
    assert "queries" in capsys.readouterr().err
