"""Recorded co-creation sessions: data model, JSONL persistence, training instances.

A session is an initial level plus an ordered list of turns.  Each turn is a
ChangeSet made by either the human or the agent; human turns additionally
carry keep/delete decisions about agent additions made earlier in the same
session.  The on-disk format is one JSON record per line with a schema header
on line 1; grids are stored as glyph-string rows via the default legend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import tilegrid
from .errors import IoFailure, LevelTraceError, NoAgentTurns, SchemaViolation
from .tilegrid import Change, ChangeSet, TileGrid

HUMAN = "HUMAN"
AGENT = "AGENT"
KEEP = "KEEP"
DELETE = "DELETE"

FORMAT_NAME = "cocreate-sessions"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Decision:
    """A human verdict about one agent-placed tile."""

    x: int
    y: int
    tile: int
    verdict: str  # KEEP or DELETE


@dataclass
class Turn:
    actor: str  # HUMAN or AGENT
    changes: ChangeSet
    decisions: list[Decision] = field(default_factory=list)


@dataclass
class Session:
    session_id: str
    initial: TileGrid
    turns: list[Turn]
    final_level: TileGrid

    def replay(self) -> TileGrid:
        """Fold the initial level through every turn's ChangeSet."""
        level = self.initial
        for turn in self.turns:
            level = tilegrid.apply(level, turn.changes)
        return level

    def states(self) -> list[TileGrid]:
        """Level snapshots: states()[k] is the level before turn k.

        The list has len(turns) + 1 entries; the last one equals final_level
        for a consistent session.
        """
        out = [self.initial]
        level = self.initial
        for turn in self.turns:
            level = tilegrid.apply(level, turn.changes)
            out.append(level)
        return out


@dataclass
class TrainingInstance:
    """One (state, target) pair derived from a single agent turn."""

    instance_id: int
    session_id: str
    state: np.ndarray  # (W, H, 34) one-hot
    target_q: np.ndarray  # (W, H, 32), 1.0 at cells the agent added


def validate_session(session: Session) -> None:
    """Check replay consistency and that decisions reference agent additions."""
    if session.replay() != session.final_level:
        raise SchemaViolation(0, f"session {session.session_id}: replay != final_level")
    added: set[tuple[int, int, int]] = set()
    for idx, turn in enumerate(session.turns):
        if turn.actor == AGENT:
            if turn.decisions:
                raise SchemaViolation(0, f"agent turn {idx} carries decisions")
            for ch in turn.changes:
                if ch.after != tilegrid.EMPTY and not tilegrid.is_action_tile(ch.after):
                    raise SchemaViolation(
                        0, f"agent turn {idx} places non-action tile {ch.after}"
                    )
                if ch.before == tilegrid.EMPTY:
                    added.add((ch.x, ch.y, ch.after))
        else:
            for dec in turn.decisions:
                if (dec.x, dec.y, dec.tile) not in added:
                    raise SchemaViolation(
                        0,
                        f"decision on ({dec.x}, {dec.y}) does not match any "
                        f"earlier agent addition",
                    )
                if dec.verdict not in (KEEP, DELETE):
                    raise SchemaViolation(0, f"bad verdict {dec.verdict!r}")


# --- serialization ----------------------------------------------------------


def _grid_to_rows(grid: TileGrid) -> list[str]:
    return tilegrid.render_text_level(grid).splitlines()


def _grid_from_rows(rows: list[str], line: int) -> TileGrid:
    try:
        return tilegrid.parse_text_level("\n".join(rows))
    except LevelTraceError as exc:
        raise SchemaViolation(line, str(exc)) from exc


def session_to_record(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "initial": _grid_to_rows(session.initial),
        "turns": [
            {
                "actor": t.actor,
                "changes": [[c.x, c.y, c.before, c.after] for c in t.changes],
                "decisions": [[d.x, d.y, d.tile, d.verdict] for d in t.decisions],
            }
            for t in session.turns
        ],
        "final_level": _grid_to_rows(session.final_level),
    }


def session_from_record(rec: dict, line: int = 0) -> Session:
    try:
        turns = [
            Turn(
                actor=str(t["actor"]),
                changes=[Change(*map(int, c)) for c in t["changes"]],
                decisions=[
                    Decision(int(d[0]), int(d[1]), int(d[2]), str(d[3]))
                    for d in t.get("decisions", [])
                ],
            )
            for t in rec["turns"]
        ]
        session = Session(
            session_id=str(rec["session_id"]),
            initial=_grid_from_rows(rec["initial"], line),
            turns=turns,
            final_level=_grid_from_rows(rec["final_level"], line),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolation(line, repr(exc)) from exc
    for turn in session.turns:
        if turn.actor not in (HUMAN, AGENT):
            raise SchemaViolation(line, f"bad actor {turn.actor!r}")
    return session


def save_sessions(sessions: Iterable[Session], path) -> None:
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for session in sessions:
                fh.write(
                    json.dumps(session_to_record(session), sort_keys=True) + "\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_sessions(path) -> list[Session]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise SchemaViolation(1, "missing header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise SchemaViolation(1, "header is not JSON") from exc
    if header.get("format") != FORMAT_NAME or header.get("version") != FORMAT_VERSION:
        raise SchemaViolation(1, f"unsupported header {header!r}")
    sessions = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaViolation(lineno, "record is not JSON") from exc
        session = session_from_record(rec, lineno)
        try:
            validate_session(session)
        except SchemaViolation as exc:
            raise SchemaViolation(lineno, exc.reason) from exc
        sessions.append(session)
    return sessions


def sessions_to_text(sessions: Iterable[Session]) -> str:
    """The exact byte content save_sessions would write (for digests)."""
    header = {"format": FORMAT_NAME, "version": FORMAT_VERSION}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(session_to_record(s), sort_keys=True) for s in sessions]
    return "\n".join(lines) + "\n"


# --- training set -----------------------------------------------------------


def build_training_set(sessions: list[Session]) -> list[TrainingInstance]:
    """One instance per agent turn, in corpus order with dense IDs from 0.

    The state is the one-hot level before the turn; the target is 1.0 on the
    action channel of every tile the turn added (entries with before == EMPTY)
    and 0.0 elsewhere.
    """
    instances: list[TrainingInstance] = []
    for session in sessions:
        level = session.initial
        for turn in session.turns:
            if turn.actor == AGENT:
                state = tilegrid.to_state_tensor(level)
                target = np.zeros(
                    (level.width, level.height, tilegrid.N_ACTION_TILES),
                    dtype=np.float64,
                )
                for ch in tilegrid.added_entries(turn.changes):
                    if ch.after != tilegrid.EMPTY:
                        target[ch.x, ch.y, ch.after] = 1.0
                instances.append(
                    TrainingInstance(
                        instance_id=len(instances),
                        session_id=session.session_id,
                        state=state,
                        target_q=target,
                    )
                )
            level = tilegrid.apply(level, turn.changes)
    if not instances:
        raise NoAgentTurns("corpus contains no agent turns")
    return instances
