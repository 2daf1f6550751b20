"""Command-line driver for the full pipeline.

Every subcommand accepts the shared flags (--config, --seed, --replay,
--backend, --voting, --rounds, --out, --dry-run) plus its own input
flags; flag values override the config file. --dry-run resolves the
configuration and checks the command's inputs, then stops before any
side effect.

Exit codes: 0 success, 2 usage or configuration, 3 bad data, 4 backend
or generation failure, 5 training failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, load_lane_maps, resolved
from .corpus import CorpusStore, build_record, load_corpus, save_corpus
from .dsl import parse_dsl, print_dsl
from .errors import (
    BackendError,
    CompileError,
    ConfigError,
    DataError,
    GenerationError,
    TrainingError,
)
from .evalloop import (
    evaluate_batch,
    report_from_logs,
    run_loop,
    score_dsl,
    write_report_csv,
    write_report_json,
)
from .extract import extract_segments, load_segments, save_segments
from .genpipe import generate_scenario, make_backend
from .ingest import parse_tracks, serialize_tracks
from .retrieval import RetrievalIndex, build_index
from .rl import (
    load_checkpoint,
    make_policy_fn,
    save_checkpoint,
    save_stats,
    train_adversarial,
    train_ego,
)
from .sim import EpisodeLog, compile_program, run_episode
from .smooth import export_smoothed, heading_stats, smooth_trajectory

COMMANDS = (
    "ingest",
    "extract",
    "corpus-build",
    "index",
    "generate",
    "compile",
    "simulate",
    "train-adv",
    "train-ego",
    "smooth",
    "score",
    "evaluate",
    "loop",
)


def _say(message: str) -> None:
    print(message)


def _input_path(value: str | Path | None, what: str) -> Path:
    """Resolve a required input path (flag value or config) and check it."""
    if not value:
        raise ConfigError(f"{what} is not set (pass a flag or set it in the config)")
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"{what}: {path} does not exist")
    return path


def _out_dir(args, cfg_value: str, default: str = ".") -> Path:
    path = Path(args.out) if args.out else Path(cfg_value or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _maps(args, cfg: RunConfig) -> dict:
    path = _input_path(getattr(args, "lane_maps", None) or cfg.paths.lane_maps, "lane maps")
    return load_lane_maps(path)


def _backend(cfg: RunConfig):
    if cfg.backend.mode == "replay":
        _input_path(cfg.backend.replay_dir, "replay fixture directory")
    return make_backend(cfg.backend)


def _load_index(cfg: RunConfig) -> RetrievalIndex | None:
    if cfg.paths.index and Path(cfg.paths.index).exists():
        return RetrievalIndex.load(cfg.paths.index)
    return None


def _compile_scenarios(paths: list[str], lane_maps: dict):
    programs = []
    for entry in paths:
        text = _input_path(entry, "scenario").read_text(encoding="utf-8")
        programs.append(compile_program(parse_dsl(text), lane_maps))
    return programs


def _dry_run_stop(args, command: str) -> bool:
    if args.dry_run:
        _say(f"dry-run ok: {command}")
        return True
    return False


# --- subcommands ----------------------------------------------------------------


def cmd_ingest(args, cfg: RunConfig) -> int:
    tracks = _input_path(args.tracks or cfg.paths.tracks, "tracks file")
    maps_value = args.lane_maps or cfg.paths.lane_maps
    if _dry_run_stop(args, "ingest"):
        return 0
    result = parse_tracks(tracks)
    frames = sum(len(t) for t in result.trajectories)
    _say(
        f"tracks: {len(result.trajectories)} agents, {frames} frames "
        f"(dropped {result.dropped_rows} rows, {result.dropped_agents} agents)"
    )
    if maps_value:
        maps = load_lane_maps(_input_path(maps_value, "lane maps"))
        for name, lane_map in sorted(maps.items()):
            _say(f"lane map {name}: {len(lane_map.lanes)} lanes")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        serialize_tracks(result.trajectories, args.out)
        _say(f"normalized tracks written to {args.out}")
    return 0


def cmd_extract(args, cfg: RunConfig) -> int:
    tracks = _input_path(args.tracks or cfg.paths.tracks, "tracks file")
    lane_maps = _maps(args, cfg)
    map_name = args.map or cfg.corpus.map_name
    if map_name not in lane_maps:
        raise ConfigError(f"map {map_name!r} not among lane maps {sorted(lane_maps)}")
    out = args.out or cfg.paths.segments
    if _dry_run_stop(args, "extract"):
        return 0
    segments = extract_segments(parse_tracks(tracks), lane_maps[map_name], cfg.extraction)
    by_type: dict[str, int] = {}
    for segment in segments:
        by_type[segment.scene_type] = by_type.get(segment.scene_type, 0) + 1
    _say(f"extracted {len(segments)} segments: " + ", ".join(f"{k}={v}" for k, v in sorted(by_type.items())))
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        save_segments(segments, out)
        _say(f"segments written to {out}")
    return 0


def cmd_corpus_build(args, cfg: RunConfig) -> int:
    segments_path = _input_path(args.segments or cfg.paths.segments, "segments file")
    lane_maps = _maps(args, cfg)
    map_name = args.map or cfg.corpus.map_name
    if map_name not in lane_maps:
        raise ConfigError(f"map {map_name!r} not among lane maps {sorted(lane_maps)}")
    out = args.out or cfg.paths.corpus
    if not out:
        raise ConfigError("corpus output path is not set (pass --out or set paths.corpus)")
    if _dry_run_stop(args, "corpus-build"):
        return 0
    segments = load_segments(segments_path)
    rng = np.random.default_rng(cfg.seed)
    records = [
        build_record(
            segment,
            lane_maps[map_name],
            map_name,
            rng,
            source=str(segments_path.name),
            dataset=cfg.corpus.dataset,
            dt=cfg.corpus.dt,
            ego_lane=cfg.corpus.ego_lane,
        )
        for segment in segments
    ]
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_corpus(records, out)
    _say(f"corpus: {len(records)} records written to {out}")
    return 0


def cmd_index(args, cfg: RunConfig) -> int:
    corpus_path = _input_path(args.corpus or cfg.paths.corpus, "corpus file")
    out = args.out or cfg.paths.index
    if not out:
        raise ConfigError("index output path is not set (pass --out or set paths.index)")
    if _dry_run_stop(args, "index"):
        return 0
    records = load_corpus(corpus_path)
    index = build_index([record.prompt_block() for record in records])
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    index.save(out)
    _say(f"index: {len(index)} entries written to {out}")
    return 0


def cmd_generate(args, cfg: RunConfig) -> int:
    backend = _backend(cfg)
    index = _load_index(cfg)
    if _dry_run_stop(args, "generate"):
        return 0
    doc, report = generate_scenario(
        args.query,
        backend,
        index,
        k=cfg.retrieval.k,
        m=cfg.generation.candidates,
        voting_mode=cfg.generation.voting,
    )
    text = print_dsl(doc)
    _say(text.rstrip("\n"))
    if not report.alignment.ok:
        _say(f"# alignment issues: {report.alignment.missing_tags + report.alignment.relation_issues}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_compile(args, cfg: RunConfig) -> int:
    lane_maps = _maps(args, cfg)
    scenario = _input_path(args.scenario, "scenario")
    if _dry_run_stop(args, "compile"):
        return 0
    program = compile_program(parse_dsl(scenario.read_text(encoding="utf-8")), lane_maps)
    slots = ", ".join(program.policy_slots()) or "none"
    _say(
        f"compiled {program.name}: map={program.map_key} vehicles={len(program.vehicles)} "
        f"policy_slots={slots} horizon={program.horizon} dt={program.dt}"
    )
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    lane_maps = _maps(args, cfg)
    scenario = _input_path(args.scenario, "scenario")
    checkpoint = Path(args.checkpoint) if args.checkpoint else None
    if checkpoint is not None:
        _input_path(checkpoint, "checkpoint")
    if _dry_run_stop(args, "simulate"):
        return 0
    program = compile_program(parse_dsl(scenario.read_text(encoding="utf-8")), lane_maps)
    policies = {}
    if checkpoint is not None:
        params = load_checkpoint(checkpoint)
        policies = {slot: make_policy_fn(params) for slot in program.policy_slots()}
    log = run_episode(program, policies, seed=cfg.seed)
    _say(
        f"episode {program.name}: termination={log.termination} steps={log.steps} "
        f"events={len(log.events)}"
    )
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        log.save(args.out)
        _say(f"episode log written to {args.out}")
    return 0


def _train(args, cfg: RunConfig, phase: str) -> int:
    lane_maps = _maps(args, cfg)
    programs = _compile_scenarios(args.scenario, lane_maps)
    steps = args.steps if args.steps is not None else (
        cfg.training.adv_steps if phase == "I" else cfg.training.ego_steps
    )
    frozen = None
    if phase == "II" and args.frozen:
        frozen = load_checkpoint(_input_path(args.frozen, "frozen checkpoint"))
    if _dry_run_stop(args, "train-adv" if phase == "I" else "train-ego"):
        return 0
    if phase == "I":
        params, stats = train_adversarial(
            programs, steps, cfg=cfg.training.ppo, reward=cfg.training.reward, seed=cfg.seed
        )
        stem = "adv"
    else:
        params, stats = train_ego(
            programs,
            steps,
            frozen_adversarial=frozen,
            cfg=cfg.training.ppo,
            reward=cfg.training.reward,
            seed=cfg.seed,
        )
        stem = "ego"
    out = _out_dir(args, cfg.paths.checkpoints)
    checkpoint_path = out / f"{stem}_policy.json"
    save_checkpoint(
        params, checkpoint_path, meta={"phase": phase, "steps": steps, "seed": cfg.seed}
    )
    save_stats(stats, out / f"{stem}_stats.csv")
    last = stats[-1] if stats else {"step": 0, "mean_reward": 0.0, "collision_rate": 0.0}
    _say(
        f"phase {phase}: {last['step']} steps, mean_reward={last['mean_reward']:.3f} "
        f"collision_rate={last['collision_rate']:.3f}; checkpoint {checkpoint_path}"
    )
    return 0


def cmd_train_adv(args, cfg: RunConfig) -> int:
    return _train(args, cfg, "I")


def cmd_train_ego(args, cfg: RunConfig) -> int:
    return _train(args, cfg, "II")


def cmd_smooth(args, cfg: RunConfig) -> int:
    tracks = _input_path(args.tracks or cfg.paths.tracks, "tracks file")
    if not args.out:
        raise ConfigError("smooth needs --out for the smoothed CSV")
    if _dry_run_stop(args, "smooth"):
        return 0
    parsed = parse_tracks(tracks)
    smoothed = []
    for traj in parsed.trajectories:
        fitted, fit = smooth_trajectory(traj, degree=cfg.smooth.degree)
        smoothed.append(fitted)
        before = heading_stats(traj.positions())["max_abs_heading_change_per_step"]
        after = heading_stats(fitted.positions())["max_abs_heading_change_per_step"]
        _say(
            f"{traj.track_id}: sse={fit.sse:.4f} max_heading_step {before:.4f} -> {after:.4f} rad"
        )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    export_smoothed(smoothed, args.out)
    _say(f"smoothed tracks written to {args.out}")
    return 0


def cmd_score(args, cfg: RunConfig) -> int:
    lane_maps = _maps(args, cfg)
    scenario = _input_path(args.scenario, "scenario")
    if _dry_run_stop(args, "score"):
        return 0
    doc = parse_dsl(scenario.read_text(encoding="utf-8"))
    try:
        program = compile_program(doc, lane_maps)
    except CompileError as exc:
        _say(f"# compile failed: {exc}")
        program = None
    score = score_dsl(doc, program, query=args.query or "")
    _say(json.dumps(score.to_json(), indent=2))
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    if bool(args.logs) == bool(args.scenario):
        raise ConfigError("evaluate needs exactly one of --logs or --scenario")
    if args.logs:
        logs_dir = _input_path(args.logs, "episode log directory")
        if _dry_run_stop(args, "evaluate"):
            return 0
        files = sorted(logs_dir.glob("*.json"))
        if not files:
            raise DataError(f"no *.json episode logs in {logs_dir}")
        logs = [EpisodeLog.load(f) for f in files]
        report = report_from_logs(
            logs,
            cfg.evaluation.phase,
            ttc_bins=cfg.evaluation.ttc_bins,
            pet_bins=cfg.evaluation.pet_bins,
        )
    else:
        lane_maps = _maps(args, cfg)
        programs = _compile_scenarios(args.scenario, lane_maps)
        policies = {}
        if args.checkpoint:
            params = load_checkpoint(_input_path(args.checkpoint, "checkpoint"))
            for program in programs:
                for slot in program.policy_slots():
                    policies[slot] = make_policy_fn(params)
        if _dry_run_stop(args, "evaluate"):
            return 0
        report = evaluate_batch(
            programs,
            policies,
            cfg.evaluation.n_episodes,
            seeds=cfg.seed,
            phase=cfg.evaluation.phase,
            ttc_bins=cfg.evaluation.ttc_bins,
            pet_bins=cfg.evaluation.pet_bins,
            workers=cfg.evaluation.workers,
        )
    out = _out_dir(args, cfg.paths.reports)
    write_report_csv(report, out / "report.csv")
    write_report_json(report, out / "report.json", config=resolved(cfg))
    _say(
        f"episodes={report.episodes} collision_rate={report.collision_rate:.4f} "
        f"timeouts={report.timeout_count}; report in {out}"
    )
    return 0


def cmd_loop(args, cfg: RunConfig) -> int:
    queries = list(args.query) if args.query else list(cfg.loop.queries)
    if not queries:
        raise ConfigError("loop needs queries (pass --query or set loop.queries)")
    lane_maps = _maps(args, cfg)
    backend = _backend(cfg)
    if not cfg.paths.corpus:
        raise ConfigError("loop needs paths.corpus for the growing corpus")
    if _dry_run_stop(args, "loop"):
        return 0
    store = CorpusStore(cfg.paths.corpus, max_records=cfg.corpus.max_records)
    Path(cfg.paths.corpus).parent.mkdir(parents=True, exist_ok=True)
    rounds = run_loop(
        queries,
        backend,
        lane_maps,
        store,
        rounds=cfg.loop.rounds,
        index=_load_index(cfg),
        adv_steps=cfg.training.adv_steps,
        ego_steps=cfg.training.ego_steps,
        n_episodes=cfg.loop.n_episodes,
        seed=cfg.seed,
        voting_mode=cfg.generation.voting,
        k=cfg.retrieval.k,
        m=cfg.generation.candidates,
        cfg=cfg.training.ppo,
        reward=cfg.training.reward,
        index_path=cfg.paths.index or None,
        workers=cfg.evaluation.workers,
    )
    out = _out_dir(args, cfg.paths.reports) if (args.out or cfg.paths.reports) else None
    for round_result in rounds:
        report = round_result.report
        _say(
            f"round {round_result.round_index}: scenario={round_result.scenario} "
            f"rubric={round_result.rubric.total:.1f} episodes={report.episodes} "
            f"collision_rate={report.collision_rate:.4f} appended={round_result.appended} "
            f"corpus={round_result.corpus_size}"
        )
        if out is not None:
            stem = f"round_{round_result.round_index}"
            write_report_csv(report, out / f"{stem}.csv")
            payload = report.to_json()
            payload["rubric"] = round_result.rubric.to_json()
            payload["appended"] = round_result.appended
            payload["corpus_size"] = round_result.corpus_size
            payload["config"] = resolved(cfg)
            (out / f"{stem}.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


HANDLERS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "corpus-build": cmd_corpus_build,
    "index": cmd_index,
    "generate": cmd_generate,
    "compile": cmd_compile,
    "simulate": cmd_simulate,
    "train-adv": cmd_train_adv,
    "train-ego": cmd_train_ego,
    "smooth": cmd_smooth,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "loop": cmd_loop,
}


# --- argument parsing --------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML run configuration file")
    common.add_argument("--seed", type=int, default=None, help="master seed override")
    common.add_argument(
        "--replay", default=None, help="replay fixture directory (forces the replay backend)"
    )
    common.add_argument(
        "--backend", choices=("http", "replay"), default=None, help="backend mode override"
    )
    common.add_argument(
        "--voting", choices=("embedding", "structured"), default=None, help="voting mode override"
    )
    common.add_argument("--rounds", type=int, default=None, help="loop rounds override")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument(
        "--dry-run", action="store_true", help="validate config and inputs, then stop"
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenforge",
        description="Mine risky scenes from driving logs, regenerate them as executable scenarios, and close the adversarial training loop.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_parser()

    p = sub.add_parser("ingest", parents=[common], help="parse and summarize a track CSV")
    p.add_argument("--tracks", default=None, help="track CSV file")
    p.add_argument("--lane-maps", dest="lane_maps", default=None, help="lane map file or directory")

    p = sub.add_parser("extract", parents=[common], help="mine scenario segments from tracks")
    p.add_argument("--tracks", default=None)
    p.add_argument("--lane-maps", dest="lane_maps", default=None)
    p.add_argument("--map", default=None, help="lane map name the tracks belong to")

    p = sub.add_parser("corpus-build", parents=[common], help="turn segments into corpus records")
    p.add_argument("--segments", default=None, help="segments JSONL file")
    p.add_argument("--lane-maps", dest="lane_maps", default=None)
    p.add_argument("--map", default=None)

    p = sub.add_parser("index", parents=[common], help="build the retrieval index from the corpus")
    p.add_argument("--corpus", default=None, help="corpus JSONL file")

    p = sub.add_parser("generate", parents=[common], help="generate a scenario document from a query")
    p.add_argument("--query", required=True, help="natural-language scenario request")

    p = sub.add_parser("compile", parents=[common], help="compile a scenario document")
    p.add_argument("--scenario", required=True, help="scenario DSL file")
    p.add_argument("--lane-maps", dest="lane_maps", default=None)

    p = sub.add_parser("simulate", parents=[common], help="run one episode of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--lane-maps", dest="lane_maps", default=None)
    p.add_argument("--checkpoint", default=None, help="policy checkpoint for policy slots")

    for name in ("train-adv", "train-ego"):
        p = sub.add_parser(
            name,
            parents=[common],
            help=("train the adversarial policy" if name == "train-adv" else "train the ego policy"),
        )
        p.add_argument(
            "--scenario", action="append", required=True, help="scenario DSL file (repeatable)"
        )
        p.add_argument("--lane-maps", dest="lane_maps", default=None)
        p.add_argument("--steps", type=int, default=None, help="environment step budget override")
        if name == "train-ego":
            p.add_argument("--frozen", default=None, help="frozen adversarial checkpoint")

    p = sub.add_parser("smooth", parents=[common], help="fit smoothing curves to tracks")
    p.add_argument("--tracks", default=None)

    p = sub.add_parser("score", parents=[common], help="rubric-score a scenario document")
    p.add_argument("--scenario", required=True)
    p.add_argument("--lane-maps", dest="lane_maps", default=None)
    p.add_argument("--query", default="", help="the request the document should satisfy")

    p = sub.add_parser("evaluate", parents=[common], help="aggregate episode statistics")
    p.add_argument("--logs", default=None, help="directory of episode log JSON files")
    p.add_argument("--scenario", action="append", default=None, help="scenario to roll out (repeatable)")
    p.add_argument("--lane-maps", dest="lane_maps", default=None)
    p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("loop", parents=[common], help="run generate-compile-train-evaluate-augment rounds")
    p.add_argument("--query", action="append", default=None, help="loop query (repeatable)")
    p.add_argument("--lane-maps", dest="lane_maps", default=None)

    return parser


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.backend is not None:
        cfg.backend.mode = "http_chat" if args.backend == "http" else "replay"
    if args.replay is not None:
        cfg.backend.mode = "replay"
        cfg.backend.replay_dir = str(args.replay)
    if args.voting is not None:
        cfg.generation.voting = args.voting
    if args.rounds is not None:
        if args.rounds < 1:
            raise ConfigError(f"--rounds must be >= 1, got {args.rounds}")
        cfg.loop.rounds = args.rounds
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"scenforge: config error: {exc}", file=sys.stderr)
        return 2
    except TrainingError as exc:
        print(f"scenforge: training error: {exc}", file=sys.stderr)
        return 5
    except (BackendError, GenerationError) as exc:
        print(f"scenforge: backend error: {exc}", file=sys.stderr)
        return 4
    except (DataError, CompileError) as exc:
        print(f"scenforge: data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
