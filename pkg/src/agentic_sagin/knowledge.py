"""Append-only JSON Lines knowledge store.

Three streams live under one directory:

``episodes.jsonl``
    one :class:`EpisodeRecord` per finished episode.
``provenance.jsonl``
    coefficient choices, deviations, rule-table changes and advisor events.
``trajectories-NNNN.jsonl``
    (observation, action) pairs per episode for denoiser pretraining, written
    in fixed-size segments. Only the newest ``trajectory_cap`` episodes are
    visible to readers; whole segments older than that are removed.

Every line carries ``"schema": SCHEMA_VERSION``. Floats are written with
``repr`` precision, so a load returns bit-identical numbers.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterator, Sequence

SCHEMA_VERSION = "sagin-ks/1"
SEGMENT_EPISODES = 50


class KnowledgeStoreError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    method: str
    seed: int
    summary: str
    lam: float
    episode_reward: float
    mean_latency_ms: float
    total_uav_energy: float
    deadline_met: int
    shaped_reward: float | None = None

    def __post_init__(self) -> None:
        for name in ("lam", "episode_reward", "mean_latency_ms", "total_uav_energy"):
            if not math.isfinite(getattr(self, name)):
                raise KnowledgeStoreError(f"{name} must be finite")


@dataclass(frozen=True)
class TrajectoryRecord:
    pairs: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    episode_reward: float
    method: str = ""
    seed: int = 0
    episode: int = 0
    obs_dim: int = 22
    action_dim: int = 12

    def __post_init__(self) -> None:
        for obs, action in self.pairs:
            if len(obs) != self.obs_dim or len(action) != self.action_dim:
                raise KnowledgeStoreError(
                    f"trajectory pair has dimensions ({len(obs)}, {len(action)}), "
                    f"expected ({self.obs_dim}, {self.action_dim})"
                )

    @classmethod
    def from_arrays(cls, observations, actions, episode_reward: float, **kw) -> TrajectoryRecord:
        pairs = tuple(
            (tuple(float(x) for x in o), tuple(float(x) for x in a))
            for o, a in zip(observations, actions)
        )
        if pairs:
            kw.setdefault("obs_dim", len(pairs[0][0]))
            kw.setdefault("action_dim", len(pairs[0][1]))
        return cls(pairs, float(episode_reward), **kw)


def _encode(kind: str, payload: dict[str, Any]) -> str:
    return json.dumps({"schema": SCHEMA_VERSION, "kind": kind, **payload}, allow_nan=False)


def _read_lines(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    if not path.exists():
        return
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise KnowledgeStoreError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or obj.get("schema") != SCHEMA_VERSION:
                raise KnowledgeStoreError(f"{path}:{lineno}: missing or unknown schema version")
            yield lineno, obj


class KnowledgeStore:
    def __init__(self, root: str | Path, trajectory_cap: int = 200):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.trajectory_cap = trajectory_cap
        self._segment_count = self._count_existing_trajectories()

    @property
    def episodes_path(self) -> Path:
        return self.root / "episodes.jsonl"

    @property
    def provenance_path(self) -> Path:
        return self.root / "provenance.jsonl"

    def _segments(self) -> list[Path]:
        return sorted(self.root.glob("trajectories-*.jsonl"))

    def _count_existing_trajectories(self) -> int:
        segments = self._segments()
        if not segments:
            return 0
        last_index = int(segments[-1].stem.split("-")[1])
        with open(segments[-1]) as fh:
            in_last = sum(1 for line in fh if line.strip())
        return last_index * SEGMENT_EPISODES + in_last

    # -- writing -------------------------------------------------------------

    def _append_line(self, path: Path, line: str) -> None:
        with open(path, "a") as fh:
            fh.write(line + "\n")

    def append(self, record: EpisodeRecord | TrajectoryRecord | dict[str, Any]) -> None:
        if isinstance(record, EpisodeRecord):
            self._append_line(self.episodes_path, _encode("episode", asdict(record)))
        elif isinstance(record, TrajectoryRecord):
            self._append_trajectory(record)
        elif isinstance(record, dict):
            kind = record.get("kind", "event")
            payload = {k: v for k, v in record.items() if k != "kind"}
            self._append_line(self.provenance_path, _encode(kind, payload))
        else:
            raise TypeError(f"cannot store {type(record).__name__}")

    def _append_trajectory(self, record: TrajectoryRecord) -> None:
        index = self._segment_count // SEGMENT_EPISODES
        path = self.root / f"trajectories-{index:04d}.jsonl"
        # built by hand: asdict would deep-copy every float of every pair
        payload = {f.name: getattr(record, f.name) for f in fields(record)}
        payload["pairs"] = [[list(o), list(a)] for o, a in record.pairs]
        self._append_line(path, _encode("trajectory", payload))
        self._segment_count += 1
        # Drop whole segments that lie entirely outside the visible ring.
        keep_from = max(0, self._segment_count - self.trajectory_cap) // SEGMENT_EPISODES
        for seg in self._segments():
            if int(seg.stem.split("-")[1]) < keep_from:
                seg.unlink()

    # -- reading -------------------------------------------------------------

    def load(
        self,
        method: str | None = None,
        seed: int | None = None,
        episodes: range | None = None,
    ) -> list[EpisodeRecord]:
        out = []
        for _, obj in _read_lines(self.episodes_path):
            obj.pop("schema")
            obj.pop("kind", None)
            rec = EpisodeRecord(**obj)
            if method is not None and rec.method != method:
                continue
            if seed is not None and rec.seed != seed:
                continue
            if episodes is not None and rec.episode not in episodes:
                continue
            out.append(rec)
        return out

    def load_provenance(self, kind: str | None = None) -> list[dict[str, Any]]:
        out = []
        for _, obj in _read_lines(self.provenance_path):
            obj.pop("schema")
            if kind is None or obj.get("kind") == kind:
                out.append(obj)
        return out

    def load_trajectories(self) -> list[TrajectoryRecord]:
        out = []
        for seg in self._segments():
            for _, obj in _read_lines(seg):
                obj.pop("schema")
                obj.pop("kind", None)
                obj["pairs"] = tuple((tuple(o), tuple(a)) for o, a in obj["pairs"])
                out.append(TrajectoryRecord(**obj))
        return out[-self.trajectory_cap :] if self.trajectory_cap else out

    def top_trajectories(self, k: int) -> list[TrajectoryRecord]:
        """The ``k`` highest-reward trajectories; ties keep append order."""
        if k <= 0:
            return []
        records = self.load_trajectories()
        order = sorted(range(len(records)), key=lambda i: (-records[i].episode_reward, i))
        return [records[i] for i in order[:k]]


def top_k(records: Sequence[TrajectoryRecord], k: int) -> list[TrajectoryRecord]:
    """In-memory variant of :meth:`KnowledgeStore.top_trajectories`."""
    if k <= 0:
        return []
    order = sorted(range(len(records)), key=lambda i: (-records[i].episode_reward, i))
    return [records[i] for i in order[:k]]

