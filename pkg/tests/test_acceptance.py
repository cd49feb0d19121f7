"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 1, 2, 3, 4 and 7 need the default 5 methods x 5 seeds x 1000
episodes run. It is executed twice (once per determinism copy), so this
module takes roughly twice the single-run wall time.
"""
import csv
import dataclasses
import json
import time

import numpy as np
import pytest

from agentic_sagin.agents.greedy import greedy_select
from agentic_sagin.allocator import DemandSet, allocate
from agentic_sagin.config import ExperimentConfig, ScenarioConfig, Thresholds
from agentic_sagin.env import (
    NoFeasibleNode,
    PlacementDecision,
    decode_continuous,
    entry_feasible,
    latency,
    reset,
    resolve_entry,
    step,
)
from agentic_sagin.harness import ExperimentPlan, run
from agentic_sagin.orchestrator import PlannerChoice, RewardConfig
from agentic_sagin.perceiver import (
    EnergyLevel,
    GroundCongestion,
    SatelliteBackup,
    SemanticState,
    analyze,
    monitor,
    render_summary,
)
from agentic_sagin.scenario import Task, build_scenario, enumerate_discrete_actions

from conftest import record_criterion
from gradcheck import TOL, check_chain, check_mlp

RUNTIME_BUDGET_S = 30 * 60
REFERENCE_REDUCTION_PCT = 14.0
MA_WINDOW = 50
SHAPED = PlannerChoice.LLM_SHAPED_D3PG.value
FIXED = PlannerChoice.FIXED_D3PG.value
GREEDY = PlannerChoice.GREEDY.value


def report(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({name}): {detail}"
    print(line)
    record_criterion(line)
    assert ok, line


@pytest.fixture(scope="session")
def full_runs(tmp_path_factory):
    """Two independent default runs; the first one is timed."""
    dirs, elapsed = [], []
    for name in ("run_a", "run_b"):
        out = tmp_path_factory.mktemp(name)
        t0 = time.perf_counter()
        run(ExperimentPlan(out_dir=str(out)))
        elapsed.append(time.perf_counter() - t0)
        dirs.append(out)
    return dirs, elapsed


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _summary(run_dir):
    return {r["method"]: r for r in _read_csv(run_dir / "summary.csv")}


def _rewards(run_dir):
    """{(method, seed): episode rewards in episode order}."""
    out: dict[tuple[str, int], list[float]] = {}
    for r in _read_csv(run_dir / "convergence.csv"):
        out.setdefault((r["method"], int(r["seed"])), []).append(float(r["episode_reward"]))
    return out


def _ma(x, end):
    """Mean of the MA_WINDOW values ending at index ``end`` inclusive."""
    return float(np.mean(x[end - MA_WINDOW + 1 : end + 1]))


# -- criterion 1 ---------------------------------------------------------------

def test_criterion_1_scenario_fidelity(full_runs):
    (run_dir, _), _ = full_runs
    manifest = json.loads((run_dir / "manifest.json").read_text())
    cfg = ExperimentConfig().scenario
    world = build_scenario(cfg)
    rewards = _rewards(run_dir)
    episode_counts = set()
    for pair_dir in sorted((run_dir / "knowledge").iterdir()):
        lines = (pair_dir / "episodes.jsonl").read_text().splitlines()
        episode_counts.add(len(lines))
        assert json.loads(lines[-1])["episode"] == 999
    task = reset(world, 0, RewardConfig())
    checks = {
        "config 3/5/2 nodes": (len(world.sat_ids), len(world.uav_ids), len(world.ground_ids)) == (3, 5, 2),
        "manifest nodes": manifest["nodes"] == {"uav": 5, "leo_satellite": 3, "ground_base_station": 2},
        "energies include 0.25 and 0.80": {0.25, 0.80} <= set(manifest["uav_initial_energies"]),
        "50 tasks per episode": manifest["tasks_per_episode"] == 50 and len(task.tasks) == 50,
        "1000 episodes in manifest": manifest["episodes"] == 1000,
        "1000 episodes per pair in convergence.csv": len(rewards) == 25
        and all(len(v) == 1000 for v in rewards.values()),
        "1000 episodes per pair in the episode logs": episode_counts == {1000},
    }
    failed = [k for k, v in checks.items() if not v]
    report(1, "scenario fidelity", not failed, "all checks hold" if not failed else f"failed: {failed}")


# -- criterion 2 ---------------------------------------------------------------

def test_criterion_2_energy_reduction_and_runtime(full_runs):
    (run_dir, _), (elapsed, _) = full_runs
    summary = _summary(run_dir)
    shaped = float(summary[SHAPED]["mean_uav_energy_norm"])
    fixed = float(summary[FIXED]["mean_uav_energy_norm"])
    reduction = (1.0 - shaped / fixed) * 100.0 if fixed > 0 else float("nan")
    energy_ok = shaped <= 0.95 * fixed
    time_ok = elapsed <= RUNTIME_BUDGET_S
    report(
        2, "energy reduction and runtime", energy_ok and time_ok,
        f"{SHAPED} energy {shaped:.4f} vs {FIXED} {fixed:.4f}: {reduction:.1f}% reduction "
        f"(need >= 5%, reference figure {REFERENCE_REDUCTION_PCT:.0f}%); "
        f"full run {elapsed / 60:.1f} min (budget 30 min)",
    )


# -- criterion 3 ---------------------------------------------------------------

def test_criterion_3_lowest_latency(full_runs):
    (run_dir, _), _ = full_runs
    lat = {m: float(r["mean_latency_ms"]) for m, r in _summary(run_dir).items()}
    best = min(lat, key=lat.get)
    ok = best == SHAPED and lat[GREEDY] > lat[SHAPED]
    ranking = ", ".join(f"{m} {v:.1f}" for m, v in sorted(lat.items(), key=lambda kv: kv[1]))
    report(3, "lowest latency", ok, f"mean latency ms: {ranking}")


# -- criterion 4 ---------------------------------------------------------------

def test_criterion_4_convergence(full_runs):
    (run_dir, _), _ = full_runs
    rewards = _rewards(run_dir)
    methods = sorted({m for m, _ in rewards})
    seeds = sorted({s for _, s in rewards})
    wins, notes = 0, []
    for s in seeds:
        early = _ma(rewards[(SHAPED, s)], 300) >= _ma(rewards[(FIXED, s)], 300)
        final = {m: _ma(rewards[(m, s)], 999) for m in methods}
        top = max(final, key=final.get)
        won = early and final[SHAPED] >= final[top]
        wins += won
        notes.append(f"seed {s}: ep300 {'ok' if early else 'behind'}, final best {top}")
    report(4, "convergence", wins >= 3, f"{wins}/5 seeds satisfy both parts ({'; '.join(notes)})")


# -- criterion 5 ---------------------------------------------------------------

def test_criterion_5_gradient_suite():
    # Probes that flip a rectifier or clamp straddle a kink and are excluded
    # from the comparison; the count is reported.
    worst = {"critic": 0.0, "actor": 0.0, "chain": 0.0}
    skipped = dict.fromkeys(worst, 0)
    for seed in range(100):
        p, x, n = check_mlp([34, 64, 64, 1], "identity", seed, with_skipped=True)
        worst["critic"] = max(worst["critic"], p, x)
        skipped["critic"] += n
        p, x, n = check_mlp([22, 64, 64, 12], "tanh", 1000 + seed, with_skipped=True)
        worst["actor"] = max(worst["actor"], p, x)
        skipped["actor"] += n
        err, n = check_chain(2000 + seed, with_skipped=True)
        worst["chain"] = max(worst["chain"], err)
        skipped["chain"] += n
    ok = all(v <= TOL for v in worst.values())
    detail = ", ".join(f"{k} max rel err {v:.2e} ({skipped[k]} kink probes skipped)" for k, v in worst.items())
    report(5, "gradient suite", ok, f"100 instances each; {detail}; tol {TOL:g}")


# -- criterion 6 ---------------------------------------------------------------

def _greedy_oracle_mismatches() -> int:
    world = build_scenario()
    catalogue = enumerate_discrete_actions(world)
    mismatches = 0
    for seed in range(10):
        env = reset(world, seed, RewardConfig())
        while not env.done:
            chosen = greedy_select(env, catalogue)
            best, best_l = None, np.inf
            for entry in catalogue:
                if entry_feasible(entry, env):
                    d = resolve_entry(entry, env)
                    value = latency(world, env.backlogs, env.current_task, d)
                    if value < best_l:
                        best, best_l = d, value
            mismatches += chosen != best
            env, _ = step(env, chosen)
    return mismatches


def _conservation_worst() -> float:
    world = build_scenario()
    rng = np.random.default_rng(6)
    link_keys = [(0, ("user", "uav")), (3, ("user", "uav")), (8, ("user", "ground")), (6, ("access", "satellite"))]
    worst = 0.0
    for _ in range(1000):
        links = {}
        for i in rng.permutation(len(link_keys))[: rng.integers(1, 5)]:
            links[link_keys[i]] = [(t, float(v)) for t, v in enumerate(rng.uniform(0.01, 100, rng.integers(1, 9)))]
        nodes = {}
        for node in rng.permutation(10)[: rng.integers(1, 6)]:
            nodes[int(node)] = [(t, float(v)) for t, v in enumerate(rng.uniform(0.01, 100, rng.integers(1, 9)))]
        alloc = allocate(DemandSet(links, nodes), world)
        for key, rates in alloc.link_rates.items():
            cap = alloc.link_capacity(key)
            worst = max(worst, abs(sum(rates.values()) - cap) / cap)
        for node, rates in alloc.compute_rates.items():
            cap = alloc.node_capacity(node)
            worst = max(worst, abs(sum(rates.values()) - cap) / cap)
    return worst


def _reward_identity_and_monotonicity() -> tuple[float, int]:
    world = build_scenario()
    rng = np.random.default_rng(7)
    worst, violations, done = 0.0, 0, 0
    while done < 1000:
        lam_a, lam_b = np.sort(rng.uniform(0.0, 8.0, 2))
        env = reset(world, int(rng.integers(0, 10_000)), RewardConfig(lam=lam_a))
        env = dataclasses.replace(
            env,
            energies=tuple(rng.uniform(0.0, 1.0, 5)),
            backlogs=tuple(rng.uniform(0.0, 50.0, 10)),
        )
        try:
            d = decode_continuous(rng.uniform(-1, 1, 12), env)
        except NoFeasibleNode:
            continue
        _, out_a = step(env, d)
        _, out_b = step(dataclasses.replace(env, reward_config=RewardConfig(lam=lam_b)), d)
        for out in (out_a, out_b):
            ln, en, lam = out.reward_terms
            worst = max(worst, abs(out.reward + ln + lam * en))
        if out_a.uav_energy_spent > 0 and out_b.reward > out_a.reward:
            violations += 1
        done += 1
    return worst, violations


def _crossover_flip_holds() -> bool:
    # one UAV, one satellite relayed by it: L 1002 vs 1132 ms, E 0.006 vs 0.0045
    world = build_scenario(ScenarioConfig(n_uav=1, n_sat=1, n_ground=0, uav_energies=(0.9,), task_count=1))
    task = Task(0, 5.0, 2.0, 25.0, 2000.0)
    lam_star = ((1132.0 - 1002.0) / 1000.0) / ((0.006 - 0.0045) / 0.01)
    ok = True
    for factor, expected in ((0.5, "uav"), (0.99, "uav"), (1.01, "sat"), (2.0, "sat")):
        env = dataclasses.replace(reset(world, 0, RewardConfig(lam=lam_star * factor)), tasks=(task,))
        r_uav = step(env, PlacementDecision(0, 0, 1.0))[1].reward
        r_sat = step(env, PlacementDecision(1, 0, 1.0))[1].reward
        ok &= ("uav" if r_uav > r_sat else "sat") == expected
    return ok


def test_criterion_6_oracle_suites():
    greedy_bad = _greedy_oracle_mismatches()
    conservation = _conservation_worst()
    identity, monotone_bad = _reward_identity_and_monotonicity()
    flip = _crossover_flip_holds()
    ok = greedy_bad == 0 and conservation <= 1e-12 and identity <= 1e-12 and monotone_bad == 0 and flip
    report(
        6, "oracle suites", ok,
        f"greedy mismatches {greedy_bad}/500 steps; conservation max rel gap {conservation:.1e} "
        f"over 1000 sets; reward identity max residual {identity:.1e} and "
        f"{monotone_bad} monotonicity violations over 1000 steps; crossover flip {'holds' if flip else 'broken'}",
    )


# -- criterion 7 ---------------------------------------------------------------

def test_criterion_7_determinism(full_runs):
    (a, b), _ = full_runs
    same = {
        name: (a / name).read_bytes() == (b / name).read_bytes()
        for name in ("convergence.csv", "summary.csv")
    }
    report(7, "determinism", all(same.values()), f"byte-identical: {same}")


# -- criterion 8 ---------------------------------------------------------------

def test_criterion_8_semantic_fidelity():
    world = build_scenario()
    env = reset(world, 0, RewardConfig())
    label = analyze(monitor(env), Thresholds(), world).uav_energy_level
    sentence = render_summary(
        SemanticState(EnergyLevel.CONSTRAINED, SatelliteBackup.AVAILABLE_HIGH_LATENCY, GroundCongestion.LOW)
    )
    expected = "UAV cluster energy-constrained with satellite backup available but high latency"
    ok = min(env.energies) == 0.25 and label is EnergyLevel.CRITICAL and sentence == expected
    report(8, "semantic fidelity", ok, f"min energy 0.25 -> {label.name}; sentence {sentence!r}")
