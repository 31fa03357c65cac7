"""Simulated social connectors and the append-only event log.

Connectors assign dense, strictly increasing post ids under a lock and
enforce per-platform length limits (280 for the short-form analog, 1024
elsewhere). Engagement is a pure seeded function of content length and
distinct-1 token diversity, monotone in diversity at fixed length, which
lets the feedback loop reward diverse output end to end.

The event log is the remote-logging analog: a local file of dense-offset
entries (`offset<TAB>kind<TAB>timestamp<TAB>json payload`). Replaying a
session's log reproduces the live run's final state hash.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import agent as agent_mod
from .clock import SimClock
from .errors import (
    ConnectorDownError,
    CorruptLogError,
    IoFailureError,
    TooLongError,
    UnknownPostError,
)

LOG_KINDS = ("observation", "plan", "gate", "dispatch", "receipt", "error", "feedback")
SHORT_FORM_LIMIT = 280
DEFAULT_LIMIT = 1024


@dataclass(frozen=True)
class PostReceipt:
    post_id: int
    platform: str
    timestamp: int
    content_hash: str


@dataclass(frozen=True)
class EngagementMetrics:
    post_id: int
    likes: int
    shares: int
    comments: int


@dataclass(frozen=True)
class LogEntry:
    offset: int
    kind: str
    timestamp: int
    payload: dict


def _distinct_1(content: str) -> float:
    tokens = content.split()
    if not tokens:
        return 0.0
    return len(set(tokens)) / len(tokens)


class SimulatedConnector:
    """One platform: stores posts, hands out dense ids, simulates engagement.

    `outages` is a deterministic fault schedule: half-open [start, end)
    intervals of post-attempt indices during which every post raises
    ConnectorDownError. set_down() overrides it manually.
    """

    def __init__(
        self,
        platform: str,
        char_limit: int = DEFAULT_LIMIT,
        seed: int = 0,
        clock: Callable[[], int] | None = None,
        outages: tuple[tuple[int, int], ...] = (),
    ):
        self.platform = platform
        self.char_limit = char_limit
        self.seed = seed
        self.outages = tuple(outages)
        self._clock = clock or SimClock()
        self._posts: dict[int, str] = {}
        self._next_id = 0
        self._attempts = 0
        self._down = False
        self._lock = threading.Lock()

    @property
    def post_count(self) -> int:
        return len(self._posts)

    @property
    def last_post_id(self) -> int:
        return self._next_id - 1

    def set_down(self, down: bool) -> None:
        """Fault injection: while down, every post raises ConnectorDownError."""
        self._down = down

    def post(self, content: str) -> PostReceipt:
        with self._lock:
            attempt = self._attempts
            self._attempts += 1
            if self._down or any(start <= attempt < end for start, end in self.outages):
                raise ConnectorDownError(f"{self.platform} is down")
            if not content:
                raise TooLongError(f"{self.platform}: content must be non-empty")
            if len(content) > self.char_limit:
                raise TooLongError(
                    f"{self.platform}: {len(content)} chars exceeds limit {self.char_limit}"
                )
            post_id = self._next_id
            self._next_id += 1
            self._posts[post_id] = content
        return PostReceipt(
            post_id=post_id,
            platform=self.platform,
            timestamp=self._clock(),
            content_hash=hashlib.sha256(content.encode("utf-8")).hexdigest(),
        )

    def get_post(self, post_id: int) -> str:
        try:
            return self._posts[post_id]
        except KeyError:
            raise UnknownPostError(f"{self.platform}: no post {post_id}") from None

    def fetch_engagement(self, post_id: int) -> EngagementMetrics:
        """Seeded engagement, monotone in distinct-1 diversity at fixed length."""
        content = self.get_post(post_id)
        length = len(content)
        diversity = _distinct_1(content)
        digest = hashlib.blake2b(
            f"{self.seed}:{length}".encode("ascii"), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        u = rng.uniform(0.5, 1.5, size=3)
        score = math.sqrt(length) * (0.25 + 0.75 * diversity)
        return EngagementMetrics(
            post_id=post_id,
            likes=int(score * u[0] * 2.0),
            shares=int(score * u[1] * 0.6),
            comments=int(score * u[2] * 0.4),
        )


def make_default_connectors(
    seed: int = 0, clock: Callable[[], int] | None = None
) -> dict[str, SimulatedConnector]:
    clock = clock or SimClock()
    return {
        "twitter": SimulatedConnector("twitter", SHORT_FORM_LIMIT, seed, clock),
        "warpcast": SimulatedConnector("warpcast", DEFAULT_LIMIT, seed + 1, clock),
        "telegram": SimulatedConnector("telegram", DEFAULT_LIMIT, seed + 2, clock),
    }


def load_connector_config(
    path, clock: Callable[[], int] | None = None
) -> dict[str, SimulatedConnector]:
    """Build connectors from a config file.

    One platform per line:
        platform=twitter limit=280 seed=3 outage=5:8,20:22
    `limit` defaults to 1024, `seed` to 0; `outage` lists half-open
    post-attempt intervals during which the connector is down.
    """
    clock = clock or SimClock()
    connectors: dict[str, SimulatedConnector] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailureError(f"cannot read connector config {path}: {exc}") from exc
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = dict(part.split("=", 1) for part in line.split())
        if "platform" not in fields:
            raise ValueError(f"connector config line {raw!r} lacks platform=")
        outages = []
        for span in fields.get("outage", "").split(","):
            if span:
                start, end = span.split(":")
                outages.append((int(start), int(end)))
        name = fields["platform"]
        connectors[name] = SimulatedConnector(
            name,
            char_limit=int(fields.get("limit", DEFAULT_LIMIT)),
            seed=int(fields.get("seed", 0)),
            clock=clock,
            outages=tuple(outages),
        )
    return connectors


# --- event log --------------------------------------------------------------------


class EventLog:
    """Append-only log file with dense offsets. One writer at a time."""

    def __init__(self, path, clock: Callable[[], int] | None = None):
        self.path = path
        self._clock = clock or SimClock()
        self._lock = threading.Lock()
        try:
            # resume dense offsets when appending to an existing log
            with open(path, "a+", encoding="utf-8", newline="\n") as probe:
                probe.seek(0)
                self._offset = sum(1 for _ in probe)
            self._fh = open(path, "a", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise IoFailureError(f"cannot open log {path}: {exc}") from exc

    def append(self, kind: str, payload: dict) -> int:
        if kind not in LOG_KINDS:
            raise ValueError(f"unknown log kind {kind!r}")
        with self._lock:
            offset = self._offset
            line = f"{offset}\t{kind}\t{self._clock()}\t{json.dumps(payload, sort_keys=True)}\n"
            try:
                self._fh.write(line)
                self._fh.flush()
            except OSError as exc:
                raise IoFailureError(f"cannot append to log {self.path}: {exc}") from exc
            self._offset += 1
        return offset

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def read_log(path) -> list[LogEntry]:
    """Parse and validate a log file; offsets must be dense from 0."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailureError(f"cannot read log {path}: {exc}") from exc
    entries: list[LogEntry] = []
    for expected, line in enumerate(lines):
        parts = line.split("\t", 3)
        if len(parts) != 4:
            raise CorruptLogError(f"{path}: malformed line at offset {expected}")
        try:
            offset = int(parts[0])
            timestamp = int(parts[2])
            payload = json.loads(parts[3])
        except ValueError as exc:
            raise CorruptLogError(f"{path}: unparseable line at offset {expected}: {exc}") from exc
        if offset != expected:
            raise CorruptLogError(f"{path}: offset gap, expected {expected} found {offset}")
        if parts[1] not in LOG_KINDS:
            raise CorruptLogError(f"{path}: unknown kind {parts[1]!r} at offset {offset}")
        entries.append(LogEntry(offset=offset, kind=parts[1], timestamp=timestamp, payload=payload))
    return entries


def replay_log(
    path,
    *,
    initial_weights: dict[str, float] | None = None,
    sentiment_threshold: float = 0.0,
    persona_seed: int = 0,
) -> str:
    """Rebuild the agent state purely from the log and return its hash.

    The session's starting condition (weights, threshold, seed) is not an
    event, so it is supplied here; runs recorded with run_session defaults
    replay with the defaults.
    """
    state = agent_mod.initial_state(
        persona_seed,
        initial_weights if initial_weights is not None else dict(agent_mod.DEFAULT_WEIGHTS),
        sentiment_threshold,
    )
    memory_items: list[tuple[str, str]] = []
    post_counters: dict[str, tuple[int, int]] = {}
    plan_contents: dict[int, str | dict] = {}
    turns = 0

    for entry in read_log(path):
        p = entry.payload
        if entry.kind == "observation":
            turns += 1
            memory_items.append((p["id"], p["text"]))
        elif entry.kind == "plan":
            plan_contents = {i: r["content"] for i, r in enumerate(p["requests"])}
        elif entry.kind == "receipt":
            if p["kind"] != "post_text":
                continue
            platform = p["target"]
            count, _ = post_counters.get(platform, (0, -1))
            post_counters[platform] = (count + 1, p["post_id"])
            memory_items.append((p["memory_id"], plan_contents[p["index"]]))
        elif entry.kind == "feedback":
            engagements = [
                EngagementMetrics(
                    post_id=e["post_id"], likes=e["likes"],
                    shares=e["shares"], comments=e["comments"],
                )
                for e in p["engagements"]
            ]
            kinds = [e["kind"] for e in p["engagements"]]
            state = agent_mod.integrate_feedback(state, engagements, kinds=kinds, eta=p["eta"])

    return agent_mod.state_hash(turns, state.strategy_weights, memory_items, post_counters)
