"""Experiment runner: the full MAPE-K cycle per episode for every (method, seed).

Each (method, seed) pair is independent and writes its own knowledge store.
The merged CSVs are assembled in canonical order afterwards, so running
pairs in parallel never changes an output byte.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ExperimentConfig, load_config
from .env import NoFeasibleNode, TraceWriter, observe, reset, step, with_reward_config
from .knowledge import EpisodeRecord, KnowledgeStore, TrajectoryRecord, top_k
from .learner import AdaptiveLearner, EpisodeKpi
from .orchestrator import PlannerChoice, RewardConfig, advisor_propose, select_planner
from .perceiver import analyze, monitor, render_summary
from .scenario import build_scenario

log = logging.getLogger(__name__)

ALL_METHODS = tuple(PlannerChoice)
SUMMARY_WINDOW = 100
CONVERGENCE_HEADER = ("episode", "method", "seed", "episode_reward")
SUMMARY_HEADER = ("method", "mean_latency_ms", "mean_uav_energy_norm")
MAPE_PHASES = ("monitor", "analyze", "plan", "execute", "knowledge")


@dataclass
class ExperimentPlan:
    methods: Sequence[PlannerChoice] = ALL_METHODS
    episodes: int = 1000
    seeds: Sequence[int] = (0, 1, 2, 3, 4)
    config_path: str | None = None
    out_dir: str = "results"
    jobs: int = 1
    trace: bool = False

    def __post_init__(self) -> None:
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        self.methods = tuple(
            PlannerChoice.parse(m) if isinstance(m, str) else m for m in self.methods
        )
        self.seeds = tuple(int(s) for s in self.seeds)


@dataclass
class PairResult:
    """Per-episode KPIs of one (method, seed) pair.

    ``rewards``, ``latencies`` and ``energy_norms`` come from the noise-free
    evaluation rollout and feed the CSVs. The ``behavior_*`` lists hold the
    same KPIs for the exploring rollout the agent trained on.
    """

    method: PlannerChoice
    seed: int
    rewards: list[float] = field(default_factory=list)
    latencies: list[float] = field(default_factory=list)
    energy_norms: list[float] = field(default_factory=list)
    behavior_rewards: list[float] = field(default_factory=list)
    behavior_latencies: list[float] = field(default_factory=list)
    behavior_energy_norms: list[float] = field(default_factory=list)


def episode_seed(seed: int, episode: int) -> int:
    """Task-sampling seed; every method sees the same tasks for a (seed, episode)."""
    return seed * 1_000_003 + episode


def evaluate_episode(env, agent, semantic, lam_ref: float, e_ref: float) -> tuple[float, float, float]:
    """Noise-free rollout from ``env`` without learning.

    Returns the reward under ``lam_ref``, mean latency in ms and the mean
    normalized UAV energy per task.
    """
    reward = latency_total = energy_total = 0.0
    obs = observe(env, semantic) if agent.needs_obs else None
    while not env.done:
        try:
            decision, _ = agent.decide(env, obs, False)
        except NoFeasibleNode:
            break
        env, out = step(env, decision)
        ln, en, _ = out.reward_terms
        reward -= ln + lam_ref * en
        latency_total += out.latency
        energy_total += out.uav_energy_spent
        if obs is not None:
            obs = observe(env, semantic)
    n = max(env.step_index, 1)
    return reward, latency_total / n, energy_total / n / e_ref


def run_pair(
    method: PlannerChoice,
    seed: int,
    episodes: int,
    config: ExperimentConfig,
    out_dir: Path,
    trace: bool = False,
) -> PairResult:
    world = build_scenario(config.scenario)
    sc = config.scenario
    pair_dir = out_dir / "knowledge" / f"{method.value}-seed{seed}"
    if pair_dir.exists():
        shutil.rmtree(pair_dir)
    store = KnowledgeStore(pair_dir)
    planner = select_planner(
        method, table=config.shaping, world=world, agent_config=config.agent, seed=seed
    )
    agent = planner.agent
    learner = AdaptiveLearner(config.intent, config.shaping, store=store)
    lam_ref = config.shaping.lam_base
    result = PairResult(method, seed)
    is_d3pg = method in (PlannerChoice.LLM_SHAPED_D3PG, PlannerChoice.FIXED_D3PG)
    trajectories: list[TrajectoryRecord] = []
    mape_fh = open(pair_dir / "mape_trace.jsonl", "w")
    step_fh = open(pair_dir / "steps.jsonl", "w") if trace else None
    tracer = TraceWriter(step_fh) if step_fh else None
    last_lam = None
    history: list[dict[str, float]] = []

    try:
        for ep in range(episodes):
            phases: list[str] = []
            env = reset(world, episode_seed(seed, ep), RewardConfig(l_ref=sc.l_ref, e_ref=sc.e_ref))

            telemetry = monitor(env, history[-1]["mean_latency"] if history else 0.0)
            phases.append("monitor")

            semantic = analyze(telemetry, config.thresholds, world)
            summary = render_summary(semantic)
            phases.append("analyze")

            advice = advisor_propose(semantic, config.intent, history[-20:], learner.table)
            if advice.adopted:
                learner.table = advice.table
                store.append({"kind": "advisor", "method": method.value, "seed": seed,
                              "episode": ep, "reason": advice.reason})
            rc = planner.reward_config(
                semantic, config.intent, learner.table, episode=ep, l_ref=sc.l_ref, e_ref=sc.e_ref
            )
            if rc.lam != last_lam:
                store.append({"kind": "lambda", "method": method.value, "seed": seed,
                              "episode": ep, "lam": rc.lam, "provenance": list(rc.provenance)})
                last_lam = rc.lam
            env = with_reward_config(env, rc)
            start = env
            phases.append("plan")

            agent.begin_episode(ep)
            shaped_total = ref_total = latency_total = energy_total = 0.0
            met = 0
            obs_list, act_list = [], []
            obs = observe(env, semantic) if agent.needs_obs else None
            while not env.done:
                try:
                    decision, action = agent.decide(env, obs, True)
                except NoFeasibleNode as exc:
                    log.error("%s seed %d episode %d aborted at step %d: %s",
                              method.value, seed, ep, env.step_index, exc)
                    store.append({"kind": "abort", "method": method.value, "seed": seed,
                                  "episode": ep, "step": env.step_index, "reason": str(exc)})
                    break
                step_index = env.step_index
                env, out = step(env, decision)
                if tracer:
                    tracer.write(ep, step_index, decision, out)
                ln, en, _ = out.reward_terms
                shaped_total += out.reward
                ref_total -= ln + lam_ref * en
                latency_total += out.latency
                energy_total += out.uav_energy_spent
                met += out.deadline_met
                if obs is not None:
                    next_obs = observe(env, semantic)
                    agent.remember(obs, action, out.reward, next_obs, env.done)
                    if is_d3pg:
                        obs_list.append(obs)
                        act_list.append(action)
                    if step_index % config.agent.train_every == 0:
                        agent.train_step()
                    obs = next_obs
            phases.append("execute")

            n = max(env.step_index, 1)
            record = EpisodeRecord(
                episode=ep, method=method.value, seed=seed, summary=summary, lam=rc.lam,
                episode_reward=ref_total, mean_latency_ms=latency_total / n,
                total_uav_energy=energy_total, deadline_met=int(met), shaped_reward=shaped_total,
            )
            store.append(record)
            if is_d3pg and obs_list:
                traj = TrajectoryRecord.from_arrays(
                    obs_list, act_list, shaped_total, method=method.value, seed=seed, episode=ep
                )
                store.append(traj)
                trajectories.append(traj)
                del trajectories[: -store.trajectory_cap]
            kpi = EpisodeKpi(ep, latency_total / n, min(env.energies, default=1.0), shaped_total / n)
            history.append({"mean_latency": kpi.mean_latency, "min_end_energy": kpi.min_end_energy,
                            "mean_reward": kpi.mean_reward})
            if planner.shaping == "semantic":
                learner.observe(kpi, method.value, seed)
            if is_d3pg and (ep + 1) % config.agent.pretrain_every == 0:
                # Warm-start the denoiser from the best stored trajectories.
                agent.pretrain(top_k(trajectories, config.agent.pretrain_top_k))
            phases.append("knowledge")
            mape_fh.write(json.dumps({"episode": ep, "phases": phases}) + "\n")

            behavior = (ref_total, latency_total / n, energy_total / n / sc.e_ref)
            if agent.needs_obs:
                evaluated = evaluate_episode(start, agent, semantic, lam_ref, sc.e_ref)
            else:
                evaluated = behavior  # greedy is deterministic and does not learn
            result.behavior_rewards.append(behavior[0])
            result.behavior_latencies.append(behavior[1])
            result.behavior_energy_norms.append(behavior[2])
            result.rewards.append(evaluated[0])
            result.latencies.append(evaluated[1])
            result.energy_norms.append(evaluated[2])
    finally:
        mape_fh.close()
        if step_fh:
            step_fh.close()

    if agent.needs_obs:
        agent.save(out_dir / "agents" / f"{method.value}-seed{seed}")
    return result


def _run_pair_job(args) -> PairResult:
    method, seed, episodes, config, out_dir, trace = args
    return run_pair(method, seed, episodes, config, out_dir, trace)


def format_float(x: float) -> str:
    return repr(float(x))


def convergence_rows(results: Sequence[PairResult]) -> list[tuple]:
    rows = []
    for r in results:
        for ep, reward in enumerate(r.rewards):
            rows.append((ep, r.method.value, r.seed, format_float(reward)))
    return rows


def summary_rows(results: Sequence[PairResult], methods: Sequence[PlannerChoice]) -> list[tuple]:
    rows = []
    for m in methods:
        lat: list[float] = []
        en: list[float] = []
        for r in results:
            if r.method is m:
                lat.extend(r.latencies[-SUMMARY_WINDOW:])
                en.extend(r.energy_norms[-SUMMARY_WINDOW:])
        rows.append((m.value, format_float(np.mean(lat)), format_float(np.mean(en))))
    return rows


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def run(plan: ExperimentPlan, config: ExperimentConfig | None = None) -> dict[str, Path]:
    """Run every (method, seed) pair and write convergence.csv and summary.csv."""
    if config is None:
        config = load_config(plan.config_path) if plan.config_path else ExperimentConfig()
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write-test"
    probe.write_text("")
    probe.unlink()

    jobs = [
        (m, s, plan.episodes, config, out_dir, plan.trace)
        for m in plan.methods
        for s in plan.seeds
    ]
    if plan.jobs > 1:
        with ProcessPoolExecutor(max_workers=plan.jobs) as pool:
            results = list(pool.map(_run_pair_job, jobs))
    else:
        results = [_run_pair_job(j) for j in jobs]

    paths = {
        "convergence": out_dir / "convergence.csv",
        "summary": out_dir / "summary.csv",
        "manifest": out_dir / "manifest.json",
    }
    _write_csv(paths["convergence"], CONVERGENCE_HEADER, convergence_rows(results))
    _write_csv(paths["summary"], SUMMARY_HEADER, summary_rows(results, plan.methods))
    world = build_scenario(config.scenario)
    manifest = {
        "methods": [m.value for m in plan.methods],
        "episodes": plan.episodes,
        "seeds": list(plan.seeds),
        "nodes": {
            "uav": len(world.uav_ids),
            "leo_satellite": len(world.sat_ids),
            "ground_base_station": len(world.ground_ids),
        },
        "uav_initial_energies": list(config.scenario.uav_energies),
        "tasks_per_episode": config.scenario.task_count,
        "scenario": asdict(config.scenario),
        "intent": asdict(config.intent),
        "shaping": asdict(config.shaping),
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths


# -- compare ----------------------------------------------------------------------

@dataclass
class Comparison:
    ranking: list[tuple[str, float]]  # (method, mean latency) ascending
    energy: dict[str, float]
    energy_reduction_pct: float

    def render(self) -> str:
        lines = ["latency ranking (ms, lower is better):"]
        for i, (m, lat) in enumerate(self.ranking, start=1):
            lines.append(f"  {i}. {m:<14} {lat:10.2f}   energy_norm {self.energy[m]:.4f}")
        lines.append(
            f"{PlannerChoice.LLM_SHAPED_D3PG.value} energy vs {PlannerChoice.FIXED_D3PG.value}: "
            f"{self.energy_reduction_pct:.1f}% reduction (reference figure: 14%)"
        )
        return "\n".join(lines)


def compare(summary_path: str | Path) -> Comparison:
    with open(summary_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    latency = {r["method"]: float(r["mean_latency_ms"]) for r in rows}
    energy = {r["method"]: float(r["mean_uav_energy_norm"]) for r in rows}
    missing = [m.value for m in PlannerChoice if m.value not in latency]
    if missing:
        raise ValueError(f"summary is missing methods: {', '.join(missing)}")
    ranking = sorted(latency.items(), key=lambda kv: (kv[1], kv[0]))
    shaped = energy[PlannerChoice.LLM_SHAPED_D3PG.value]
    fixed = energy[PlannerChoice.FIXED_D3PG.value]
    reduction = (1.0 - shaped / fixed) * 100.0 if fixed > 0 else 0.0
    return Comparison(ranking, energy, reduction)
