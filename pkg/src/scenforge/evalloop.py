"""Scenario quality scoring, batch evaluation, and closed-loop corpus growth.

score_dsl grades one generated document on six sub-scores (each 0-5) and
combines them with fixed weights into a 100-point total. Two sub-scores
come from a judge; the built-in HeuristicJudge keeps the pipeline fully
offline, while a backend judge can be swapped in and averaged over runs.

evaluate_batch rolls compiled programs out under seed-indexed episodes
and folds the logs, in episode order, into per-behavior collision and
timeout counts plus min-TTC and PET histograms. Rates are single
divisions of integer counts.

augment_corpus converts successful episodes (goal reached, adversarial
behavior executed, no collision) into new corpus records, deduplicated by
content hash. run_loop chains generate -> compile -> train -> evaluate ->
augment for a number of rounds, rebuilding the retrieval index whenever
the corpus grew.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    BEHAVIOR_VERBS,
    AdversarialCondition,
    CorpusStore,
    Provenance,
    ScenarioRecord,
    assemble_description,
    describe_road,
    render_adversarial,
)
from .dsl import (
    AbsolutePlacement,
    DslDocument,
    RelativePlacement,
    VehicleDecl,
    print_section,
    validate_structure,
)
from .dsl.dictionary import DEFAULT_DICTIONARY
from .dsl.validate import Finding
from .errors import ConfigError
from .genpipe import LlmBackend, generate_scenario, repair_compile
from .genpipe.alignment import DEFAULT_ARGS, detect_tags
from .genpipe.judge import JudgeScores
from .ingest import LaneMap, TrackFrame, Trajectory
from .retrieval import RetrievalIndex, build_index
from .rl import PolicyParams, PpoConfig, RewardConfig, episode_seed
from .rl.training import make_policy_fn, train_adversarial, train_ego
from .safety import RiskMetrics, min_ttc, pet, ttc_series, yaw_change
from .sim import EpisodeLog, PolicyFn, ScenarioProgram, Simulation, run_episode

RUBRIC_WEIGHTS: dict[str, float] = {
    "semantic_fidelity": 0.25,
    "executable_validity": 0.20,
    "structural_completeness": 0.15,
    "modularity": 0.15,
    "behavioral_richness": 0.20,
    "voting_centrality": 0.05,
}

SCORE_MAX = 5.0

# histogram bin edges, overridable from the config file
DEFAULT_TTC_BINS = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)
DEFAULT_PET_BINS = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)

# fallback footprint for logs evaluated without their program
DEFAULT_DIMS = (4.5, 2.0)

REPORT_COLUMNS = ("behavior", "episodes", "collisions", "collision_rate", "timeouts", "goals")

# corpus behavior names keyed by DSL verb (inverse of BEHAVIOR_VERBS)
VERB_BEHAVIORS = {verb: name for name, verb in BEHAVIOR_VERBS.items()}


# --- rubric -------------------------------------------------------------------


@dataclass(frozen=True)
class RubricScore:
    semantic_fidelity: float
    executable_validity: float
    structural_completeness: float
    modularity: float
    behavioral_richness: float
    voting_centrality: float

    def __post_init__(self) -> None:
        for name in RUBRIC_WEIGHTS:
            value = getattr(self, name)
            if not 0.0 <= value <= SCORE_MAX:
                raise ValueError(f"sub-score {name} must be in [0, {SCORE_MAX}], got {value}")

    @property
    def total(self) -> float:
        """Weighted sum normalized to a 100-point scale."""
        weighted = sum(w * getattr(self, name) for name, w in RUBRIC_WEIGHTS.items())
        return 100.0 * weighted / SCORE_MAX

    def to_json(self) -> dict:
        payload = {name: getattr(self, name) for name in RUBRIC_WEIGHTS}
        payload["total"] = self.total
        return payload


class HeuristicJudge:
    """Deterministic stand-in for a backend judge, so scoring runs offline.

    semantic_fidelity is keyword coverage: the fraction of behavior tags
    detected in the query that appear among the document's schedule verbs
    (5 when the query names none). behavioral_richness counts distinct
    parameterized verbs, saturating at three.
    """

    def score(self, query: str, doc: DslDocument) -> JudgeScores:
        tags = detect_tags(query)
        verbs = {action.verb for schedule in doc.behavior for action in schedule.actions}
        if tags:
            semantic = SCORE_MAX * sum(1 for t in tags if t in verbs) / len(tags)
        else:
            semantic = SCORE_MAX
        parameterized = {
            action.verb
            for schedule in doc.behavior
            for action in schedule.actions
            if action.args or action.duration is not None
        }
        richness = min(SCORE_MAX, SCORE_MAX * len(parameterized) / 3.0)
        return JudgeScores(semantic_fidelity=semantic, behavioral_richness=richness)


MODULARITY_CHECKS = ("role_prefixed_ids", "no_repeated_literals")

# a role's vehicles must carry its short prefix; background ids are free
_ROLE_PREFIXES = {"ego": "ego", "adversarial": "adv"}
_MAX_LITERAL_REPEATS = 2


def modularity_findings(doc: DslDocument) -> list[Finding]:
    """Static reuse checks: naming convention and copy-pasted literals."""
    bad_names = []
    for vehicle in doc.spawn:
        prefix = _ROLE_PREFIXES.get(vehicle.role)
        if prefix is None:
            continue
        rest = vehicle.vehicle_id[len(prefix) :]
        if not (vehicle.vehicle_id.startswith(prefix) and rest.isdigit()):
            bad_names.append(f"{vehicle.vehicle_id} ({vehicle.role})")
    findings = [
        Finding(
            "role_prefixed_ids",
            not bad_names,
            "; ".join(bad_names),
        )
    ]

    counts: dict[float, int] = {}
    for schedule in doc.behavior:
        for action in schedule.actions:
            literals = [v for v in action.args.values() if isinstance(v, (int, float))]
            if action.duration is not None:
                literals.append(action.duration)
            for value in literals:
                counts[float(value)] = counts.get(float(value), 0) + 1
    repeated = sorted(v for v, n in counts.items() if n > _MAX_LITERAL_REPEATS)
    findings.append(
        Finding(
            "no_repeated_literals",
            not repeated,
            ", ".join(f"{v:g} repeats" for v in repeated),
        )
    )
    return findings


def dry_run(program: ScenarioProgram) -> str | None:
    """Advance a fresh simulation one step; returns a diagnostic or None."""
    try:
        Simulation(program).step()
    except Exception as exc:  # any runtime fault downgrades the score
        return f"{type(exc).__name__}: {exc}"
    return None


def _centrality(vote_stats: object) -> float:
    """Mean cosine of the voting winner to the other candidates, in [0, 1].

    Accepts a VoteResult, a GenerationReport, a bare float, or None (no
    vote took place: a lone candidate agrees with itself)."""
    if vote_stats is None:
        return 1.0
    if isinstance(vote_stats, (int, float)):
        value = float(vote_stats)
    else:
        value = float(getattr(vote_stats, "mean_similarity"))
    return min(max(value, 0.0), 1.0)


def score_dsl(
    doc: DslDocument,
    compile_result: object | None,
    vote_stats: object | None = None,
    judge: object | None = None,
    *,
    query: str = "",
    judge_runs: int = 1,
) -> RubricScore:
    """Grade a parsed document.

    compile_result is the compiled program (or a RepairResult wrapping
    one), or None when compilation failed. Backend judges should be
    averaged over several runs (judge_runs=5); the heuristic default is
    deterministic so one run suffices.
    """
    program = getattr(compile_result, "program", compile_result)
    if program is None:
        executable = 0.0
    elif dry_run(program) is None:
        executable = 5.0
    else:
        executable = 3.0

    structural = SCORE_MAX * validate_structure(doc).passed_fraction

    mod_findings = modularity_findings(doc)
    modularity = SCORE_MAX * sum(1 for f in mod_findings if f.passed) / len(mod_findings)

    judge = judge if judge is not None else HeuristicJudge()
    runs = [judge.score(query, doc) for _ in range(max(1, judge_runs))]
    semantic = sum(r.semantic_fidelity for r in runs) / len(runs)
    richness = sum(r.behavioral_richness for r in runs) / len(runs)

    return RubricScore(
        semantic_fidelity=semantic,
        executable_validity=executable,
        structural_completeness=structural,
        modularity=modularity,
        behavioral_richness=richness,
        voting_centrality=SCORE_MAX * _centrality(vote_stats),
    )


# --- batch evaluation -----------------------------------------------------------


@dataclass(frozen=True)
class MetricHistogram:
    name: str
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    values: tuple[float, ...]  # defined per-episode values, binned or not
    undefined: int = 0  # episodes where the metric had no value

    @classmethod
    def from_values(
        cls, name: str, values: Sequence[float | None], bin_edges: Sequence[float]
    ) -> "MetricHistogram":
        edges = tuple(float(e) for e in bin_edges)
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError(f"{name}: bin edges must be strictly increasing, got {edges}")
        defined = [float(v) for v in values if v is not None]
        counts, _ = np.histogram(defined, bins=np.asarray(edges))
        return cls(
            name=name,
            bin_edges=edges,
            counts=tuple(int(c) for c in counts),
            values=tuple(defined),
            undefined=sum(1 for v in values if v is None),
        )

    @property
    def mean(self) -> float | None:
        return float(np.mean(self.values)) if self.values else None

    @property
    def empty(self) -> bool:
        return not self.values and self.undefined == 0

    def to_json(self) -> dict:
        return {
            "bin_edges": list(self.bin_edges),
            "counts": list(self.counts),
            "mean": self.mean,
            "undefined": self.undefined,
            "empty": self.empty,
        }


@dataclass
class BehaviorStats:
    episodes: int = 0
    collisions: int = 0
    timeouts: int = 0
    goals: int = 0

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.episodes if self.episodes else 0.0

    def to_json(self) -> dict:
        return {
            "episodes": self.episodes,
            "collisions": self.collisions,
            "collision_rate": self.collision_rate,
            "timeouts": self.timeouts,
            "goals": self.goals,
        }


@dataclass
class BatchReport:
    phase: str  # "I" or "II"
    behaviors: dict[str, BehaviorStats]
    ttc: MetricHistogram
    pet: MetricHistogram

    @property
    def episodes(self) -> int:
        return sum(b.episodes for b in self.behaviors.values())

    @property
    def collisions(self) -> int:
        return sum(b.collisions for b in self.behaviors.values())

    @property
    def timeout_count(self) -> int:
        return sum(b.timeouts for b in self.behaviors.values())

    @property
    def collision_rate(self) -> float:
        return self.collisions / self.episodes if self.episodes else 0.0

    @property
    def empty(self) -> bool:
        return self.episodes == 0

    def to_json(self) -> dict:
        return {
            "phase": self.phase,
            "episodes": self.episodes,
            "collisions": self.collisions,
            "collision_rate": self.collision_rate,
            "timeout_count": self.timeout_count,
            "empty": self.empty,
            "behaviors": {label: stats.to_json() for label, stats in sorted(self.behaviors.items())},
            "min_ttc": self.ttc.to_json(),
            "pet": self.pet.to_json(),
        }


def episode_trajectories(
    log: EpisodeLog, dims: Mapping[str, tuple[float, float]] | None = None
) -> list[Trajectory]:
    """Rebuild per-vehicle trajectories from a log's pose frames.

    dims maps vehicle id to (length, width); vehicles without an entry get
    the default car footprint. Velocity is reconstructed from heading and
    speed."""
    if len(log.frames) < 2:
        return []
    dims = dims or {}
    out = []
    for v_idx, vid in enumerate(log.vehicle_ids):
        length, width = dims.get(vid, DEFAULT_DIMS)
        frames = []
        for i, frame in enumerate(log.frames):
            x, y, heading, speed = frame[v_idx]
            frames.append(
                TrackFrame(
                    frame_index=i,
                    timestamp=i * log.dt,
                    x=x,
                    y=y,
                    vx=speed * math.cos(heading),
                    vy=speed * math.sin(heading),
                    psi=heading,
                )
            )
        out.append(Trajectory(vid, "car", length, width, frames))
    return out


def episode_risk(log: EpisodeLog, dims: Mapping[str, tuple[float, float]] | None = None) -> RiskMetrics:
    """Pairwise min-TTC / PET and max yaw change realized in one episode."""
    trajectories = episode_trajectories(log, dims)
    ttcs: list[float] = []
    pets: list[float] = []
    for a, b in combinations(trajectories, 2):
        forward = min_ttc(ttc_series(a, b))
        if forward is not None:
            ttcs.append(forward)
        gap = pet(a, b)
        if gap is not None:
            pets.append(gap)
    yaw = max((abs(yaw_change(t.headings())) for t in trajectories), default=0.0)
    return RiskMetrics(
        min_ttc=min(ttcs) if ttcs else None,
        min_pet=min(pets) if pets else None,
        max_yaw_change=float(yaw),
        collision=log.termination == "collision",
    )


def program_dims(program: ScenarioProgram) -> dict[str, tuple[float, float]]:
    return {v.vehicle_id: (v.length, v.width) for v in program.vehicles}


def report_from_logs(
    logs: Sequence[EpisodeLog],
    phase: str = "II",
    *,
    ttc_bins: Sequence[float] = DEFAULT_TTC_BINS,
    pet_bins: Sequence[float] = DEFAULT_PET_BINS,
    dims_by_scenario: Mapping[str, Mapping[str, tuple[float, float]]] | None = None,
) -> BatchReport:
    """Deterministic fold of episode logs into a report, in given order."""
    if phase not in ("I", "II"):
        raise ValueError(f"phase must be 'I' or 'II', got {phase!r}")
    behaviors: dict[str, BehaviorStats] = {}
    ttc_values: list[float | None] = []
    pet_values: list[float | None] = []
    for log in logs:
        stats = behaviors.setdefault(log.label, BehaviorStats())
        stats.episodes += 1
        if log.termination == "collision":
            stats.collisions += 1
        elif log.termination == "timeout":
            stats.timeouts += 1
        elif log.termination == "goal":
            stats.goals += 1
        dims = (dims_by_scenario or {}).get(log.scenario)
        risk = episode_risk(log, dims)
        ttc_values.append(risk.min_ttc)
        pet_values.append(risk.min_pet)
    return BatchReport(
        phase=phase,
        behaviors=behaviors,
        ttc=MetricHistogram.from_values("min_ttc", ttc_values, ttc_bins),
        pet=MetricHistogram.from_values("pet", pet_values, pet_bins),
    )


def run_batch_episodes(
    programs: Sequence[ScenarioProgram],
    policies: Mapping[str, PolicyFn] | None,
    n_episodes: int,
    seeds: int | Sequence[int] = (0,),
    workers: int = 1,
) -> list[EpisodeLog]:
    """Seed-indexed episode fan-out; the returned order is fixed by
    (seed, program, episode) regardless of worker scheduling."""
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1, got {n_episodes}")
    if isinstance(seeds, (int, np.integer)):
        seeds = (int(seeds),)
    policies = dict(policies or {})
    tasks = [
        (program, episode_seed(master, p_idx, e_idx))
        for master in seeds
        for p_idx, program in enumerate(programs)
        for e_idx in range(n_episodes)
    ]

    def run_one(task: tuple[ScenarioProgram, int]) -> EpisodeLog:
        program, seed_value = task
        return run_episode(program, policies, seed=seed_value)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_one, tasks))
    return [run_one(task) for task in tasks]


def evaluate_batch(
    programs: Sequence[ScenarioProgram],
    policies: Mapping[str, PolicyFn] | None,
    n_episodes: int,
    seeds: int | Sequence[int] = (0,),
    *,
    phase: str = "II",
    ttc_bins: Sequence[float] = DEFAULT_TTC_BINS,
    pet_bins: Sequence[float] = DEFAULT_PET_BINS,
    workers: int = 1,
) -> BatchReport:
    """Roll out every program n_episodes times per seed and aggregate."""
    logs = run_batch_episodes(programs, policies, n_episodes, seeds, workers)
    dims = {p.name: program_dims(p) for p in programs}
    return report_from_logs(logs, phase, ttc_bins=ttc_bins, pet_bins=pet_bins, dims_by_scenario=dims)


def compare_distributions(report_a: BatchReport, report_b: BatchReport) -> dict:
    """Side-by-side histogram tables and means; no significance testing."""
    summary: dict = {
        "phase": [report_a.phase, report_b.phase],
        "episodes": [report_a.episodes, report_b.episodes],
        "collision_rate": {
            "a": report_a.collision_rate,
            "b": report_b.collision_rate,
            "diff": report_b.collision_rate - report_a.collision_rate,
        },
        "flags": [],
    }
    for name in ("ttc", "pet"):
        hist_a: MetricHistogram = getattr(report_a, name)
        hist_b: MetricHistogram = getattr(report_b, name)
        if hist_a.bin_edges != hist_b.bin_edges:
            raise ValueError(
                f"{name} histograms use different bins: {hist_a.bin_edges} vs {hist_b.bin_edges}"
            )
        mean_a, mean_b = hist_a.mean, hist_b.mean
        summary[name] = {
            "bin_edges": list(hist_a.bin_edges),
            "counts_a": list(hist_a.counts),
            "counts_b": list(hist_b.counts),
            "mean_a": mean_a,
            "mean_b": mean_b,
            "mean_diff": None if mean_a is None or mean_b is None else mean_b - mean_a,
        }
        if hist_a.empty or hist_b.empty:
            summary["flags"].append(f"{name}: empty episode set")
    return summary


def write_report_csv(report: BatchReport, path: str | Path) -> None:
    """One row per behavior label, plus a total row."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for label in sorted(report.behaviors):
            stats = report.behaviors[label]
            writer.writerow(
                [label, stats.episodes, stats.collisions, repr(stats.collision_rate), stats.timeouts, stats.goals]
            )
        writer.writerow(
            [
                "TOTAL",
                report.episodes,
                report.collisions,
                repr(report.collision_rate),
                report.timeout_count,
                sum(b.goals for b in report.behaviors.values()),
            ]
        )


def write_report_json(report: BatchReport, path: str | Path, config: dict | None = None) -> None:
    """JSON summary; the resolved run configuration rides along when given."""
    payload = report.to_json()
    if config is not None:
        payload["config"] = config
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


# --- corpus augmentation ----------------------------------------------------------


def adversarial_schedule_verbs(program: ScenarioProgram) -> list[tuple[str, object]]:
    """(vehicle id, action) pairs for adversarial-verb actions scheduled on
    adversarial-role vehicles, in document order."""
    doc = program.doc
    if doc is None:
        return []
    pairs = []
    for vehicle in doc.spawn:
        if vehicle.role != "adversarial":
            continue
        schedule = doc.schedule_for(vehicle.vehicle_id)
        if schedule is None:
            continue
        for action in schedule.actions:
            if DEFAULT_DICTIONARY.level(action.verb) == "adversarial":
                pairs.append((vehicle.vehicle_id, action))
    return pairs


def _realized_relation(log: EpisodeLog, ego_id: str, adv_id: str) -> tuple[str, float]:
    """Initial relation and center distance of the adversary seen from the ego."""
    first = log.frames[0]
    ego = first[log.vehicle_ids.index(ego_id)]
    adv = first[log.vehicle_ids.index(adv_id)]
    dx, dy = adv[0] - ego[0], adv[1] - ego[1]
    heading = ego[2]
    along = dx * math.cos(heading) + dy * math.sin(heading)
    lateral = -dx * math.sin(heading) + dy * math.cos(heading)
    if abs(lateral) > abs(along):
        relation = "left" if lateral > 0 else "right"
    else:
        relation = "front" if along >= 0 else "rear"
    return relation, math.hypot(dx, dy)


def _condition_params(action) -> dict:
    """Realized adversarial parameters, with dictionary defaults filled in."""
    defaults = DEFAULT_ARGS.get(action.verb, {})
    if action.verb == "sudden_brake":
        return {
            "decel": float(action.args.get("decel", defaults.get("decel", 6.0))),
            "duration": float(
                action.duration if action.duration is not None else defaults.get("duration", 2.0)
            ),
        }
    if action.verb == "tailgate":
        return {"gap": float(action.args.get("gap", defaults.get("gap", 0.5)))}
    if action.verb == "cut_in":
        return {
            "side": str(action.args.get("side", defaults.get("side", "left"))),
            "lateral": float(action.args.get("lateral", defaults.get("lateral", 1.2))),
        }
    return {"factor": float(action.args.get("factor", defaults.get("factor", 1.5)))}


def _realized_spawn(program: ScenarioProgram) -> list[VehicleDecl]:
    """Spawn declarations rebuilt from compiled initial states, so snippets
    carry the concrete lane positions and speeds the episode actually used."""
    decls = []
    for vehicle in program.vehicles:
        lane = program.lane_map.lane(vehicle.lane_id)
        arc, _, _ = lane.project(vehicle.x, vehicle.y)
        decls.append(
            VehicleDecl(
                vehicle.vehicle_id,
                vehicle.role,
                AbsolutePlacement(vehicle.lane_id, round(arc, 2)),
                speed=round(vehicle.speed, 2),
                length=vehicle.length,
                width=vehicle.width,
            )
        )
    return decls


def episode_record(log: EpisodeLog, program: ScenarioProgram) -> ScenarioRecord | None:
    """Corpus record for one successful episode, or None when filtered.

    Kept episodes reached the goal (hence no collision) with at least one
    adversarial behavior scheduled on an adversarial vehicle."""
    if log.termination != "goal":
        return None
    adv_actions = adversarial_schedule_verbs(program)
    if not adv_actions or program.doc is None:
        return None
    adv_id, action = adv_actions[0]

    dims = program_dims(program)
    risk = episode_risk(log, dims)

    doc = program.doc
    decl = doc.vehicle(adv_id)
    if decl is not None and isinstance(decl.placement, RelativePlacement):
        relation = decl.placement.relation
        distance = float(decl.placement.offset)
    else:
        relation, distance = _realized_relation(log, program.ego_id, adv_id)
        distance = round(distance, 1)
    condition = AdversarialCondition(
        behavior=VERB_BEHAVIORS[action.verb],
        relation=relation,
        distance=distance,
        params=_condition_params(action),
    )

    duration = log.steps * log.dt
    summary = f"The ego vehicle reaches its goal in {duration:.1f} s under adversarial pressure"
    if risk.min_ttc is not None:
        summary += f" with a minimum TTC of {risk.min_ttc:.1f} s"
    summary += "."
    road = describe_road(program.lane_map)
    provenance = Provenance(
        source=f"sim:{log.scenario}", frame_range=(0, log.steps), dataset="SIM"
    )
    description = assemble_description(summary, road, render_adversarial(condition), provenance)

    realized = DslDocument(doc.name, dict(doc.geometry), _realized_spawn(program), doc.behavior)
    record = ScenarioRecord(
        scene_type=log.label,
        behavior_summary=summary,
        road_description=road,
        adversarial=condition,
        description=description,
        geometry_snippet=print_section(realized, "geometry"),
        spawn_snippet=print_section(realized, "spawn"),
        behavior_snippet=print_section(realized, "behavior"),
        provenance=provenance,
        risk=risk,
    )
    record.validate()
    return record


def augment_corpus(
    episodes: Sequence[EpisodeLog],
    programs: Sequence[ScenarioProgram] | Mapping[str, ScenarioProgram],
    corpus: CorpusStore,
    index_path: str | Path | None = None,
) -> list[ScenarioRecord]:
    """Append records for successful episodes; returns what was added.

    Deduplication is by content hash against both the stored corpus and
    the current batch, so re-running on the same logs appends nothing.
    When index_path is given the retrieval index is rebuilt over the full
    corpus and saved there."""
    if not isinstance(programs, Mapping):
        programs = {p.name: p for p in programs}
    existing = {r.content_hash for r in corpus.load()}
    fresh: list[ScenarioRecord] = []
    for log in episodes:
        program = programs.get(log.scenario)
        if program is None:
            continue
        record = episode_record(log, program)
        if record is None or record.content_hash in existing:
            continue
        existing.add(record.content_hash)
        fresh.append(record)
    if fresh:
        corpus.append(fresh)
    if index_path is not None:
        rebuild_index(corpus).save(index_path)
    return fresh


def rebuild_index(corpus: CorpusStore) -> RetrievalIndex:
    return build_index([record.prompt_block() for record in corpus.load()])


# --- closed loop ------------------------------------------------------------------


@dataclass
class LoopRound:
    round_index: int
    query: str
    scenario: str
    rubric: RubricScore
    attempts_used: int
    trained_phases: list[str]
    report: BatchReport
    appended: int
    corpus_size: int


def run_loop(
    queries: Sequence[str],
    backend: LlmBackend,
    lane_maps: dict[str, LaneMap],
    corpus: CorpusStore,
    *,
    rounds: int = 1,
    index: RetrievalIndex | None = None,
    adv_steps: int = 0,
    ego_steps: int = 0,
    n_episodes: int = 5,
    seed: int = 0,
    voting_mode: str = "structured",
    k: int = 4,
    m: int = 5,
    cfg: PpoConfig | None = None,
    reward: RewardConfig | None = None,
    index_path: str | Path | None = None,
    workers: int = 1,
) -> list[LoopRound]:
    """Generate -> compile -> train -> evaluate -> augment, round-robin over
    the queries. Training phases run only when the compiled program exposes
    a policy slot of the matching role and the step budget is positive."""
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    if not queries:
        raise ConfigError("run_loop needs at least one query")
    results: list[LoopRound] = []
    for round_index in range(rounds):
        query = queries[round_index % len(queries)]
        doc, gen_report = generate_scenario(
            query, backend, index, k=k, m=m, voting_mode=voting_mode
        )
        repair = repair_compile(
            query, backend, lane_maps, index=index, initial_doc=doc
        )
        program: ScenarioProgram = repair.program
        rubric = score_dsl(repair.doc, repair, gen_report, query=query)

        roles = {program.vehicle(slot).role for slot in program.policy_slots()}
        trained: list[str] = []
        adv_params: PolicyParams | None = None
        policies: dict[str, PolicyFn] = {}
        round_seed = seed + round_index
        if adv_steps > 0 and "adversarial" in roles:
            adv_params, _ = train_adversarial(
                [program], adv_steps, cfg=cfg, reward=reward, seed=round_seed
            )
            for slot in program.policy_slots():
                if program.vehicle(slot).role == "adversarial":
                    policies[slot] = make_policy_fn(adv_params)
            trained.append("I")
        if ego_steps > 0 and "ego" in roles:
            ego_params, _ = train_ego(
                [program],
                ego_steps,
                frozen_adversarial=adv_params,
                cfg=cfg,
                reward=reward,
                seed=round_seed,
            )
            for slot in program.policy_slots():
                if program.vehicle(slot).role == "ego":
                    policies[slot] = make_policy_fn(ego_params)
            trained.append("II")

        phase = "I" if trained == ["I"] else "II"
        logs = run_batch_episodes([program], policies, n_episodes, round_seed, workers)
        report = report_from_logs(
            logs, phase, dims_by_scenario={program.name: program_dims(program)}
        )
        appended = augment_corpus(logs, [program], corpus, index_path=index_path)
        if appended:
            index = rebuild_index(corpus)
        results.append(
            LoopRound(
                round_index=round_index,
                query=query,
                scenario=program.name,
                rubric=rubric,
                attempts_used=repair.attempts_used,
                trained_phases=trained,
                report=report,
                appended=len(appended),
                corpus_size=len(corpus.load()),
            )
        )
    return results
