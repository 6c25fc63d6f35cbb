"""Suggestion/explanation service for the companion editor.

A CoCreateService wraps trained artifacts (model, responsibility arrays,
training corpus) plus a live session store, and a small stdlib HTTP server
exposes it as JSON endpoints.  Grids travel as arrays of glyph strings, one
per row, matching the text level format.

Endpoints (all JSON, schema field "leveltrace-api-v1"):
    GET  /health            server and artifact status
    GET  /legend            tile table (id, name, glyph)
    POST /suggest           {"level": rows} -> scored additions
    POST /explain           {"level": rows, "layer"?} -> responsible level
    POST /session/append-turn   record one editor turn (creates on first use)
    GET  /session/get?id=...    fetch a recorded session

Suggest and explain are pure functions of the request while the artifacts
stand still, so identical payloads yield identical responses (including the
suggestion_id, which is a hash of request and result).  Session appends are
serialized behind one lock and rewritten to the store file as a whole.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from . import sessionlog, tilegrid
from .attribution import MrinArrays, explain
from .errors import (
    BadParams,
    DimensionMismatch,
    FingerprintMismatch,
    IoFailure,
    LevelTraceError,
    NumericFailure,
    SchemaViolation,
)
from .neuralnet import NetworkParams, predict
from .sessionlog import Session, Turn
from .tilegrid import Change, TileGrid

SCHEMA = "leveltrace-api-v1"

DEFAULT_TAU = 0.5
DEFAULT_TOP_K = 16


@dataclass(frozen=True)
class SuggestionItem:
    x: int
    y: int
    tile: int
    q: float


@dataclass(frozen=True)
class Suggestion:
    items: list[SuggestionItem]
    suggestion_id: str

    def to_changes(self) -> list[Change]:
        return [Change(it.x, it.y, tilegrid.EMPTY, it.tile) for it in self.items]


def suggest(
    params: NetworkParams,
    grid: TileGrid,
    tau: float = DEFAULT_TAU,
    top_k: int = DEFAULT_TOP_K,
) -> Suggestion:
    """Decode the score volume into tile additions.

    Per cell, take the best-scoring of the 32 placeable channels; keep it if
    the cell is currently empty, the winner is not the empty channel, and the
    score clears `tau`.  The result is capped at `top_k` additions, ordered
    by descending score (ties by x then y), and is always legal to apply to
    the request grid.
    """
    cfg = params.config
    if (grid.width, grid.height) != (cfg.width, cfg.height):
        raise DimensionMismatch(
            f"grid is {grid.width}x{grid.height}, model wants "
            f"{cfg.width}x{cfg.height}"
        )
    q = predict(params, tilegrid.to_state_tensor(grid))
    best_tile = np.argmax(q, axis=2)
    best_q = np.max(q, axis=2)
    picks = []
    for x in range(cfg.width):
        for y in range(cfg.height):
            tile = int(best_tile[x, y])
            score = float(best_q[x, y])
            if tile == tilegrid.EMPTY or not np.isfinite(score) or score < tau:
                continue
            if grid.cell(x, y) != tilegrid.EMPTY:
                continue
            picks.append(SuggestionItem(x, y, tile, score))
    picks.sort(key=lambda it: (-it.q, it.x, it.y))
    picks = picks[:top_k]
    digest = hashlib.sha256(
        json.dumps(
            {
                "level": tilegrid.render_text_level(grid).splitlines(),
                "picks": [[it.x, it.y, it.tile, it.q] for it in picks],
            },
            sort_keys=True,
        ).encode("utf-8")
    ).hexdigest()
    return Suggestion(items=picks, suggestion_id=digest[:16])


def _rows(grid: TileGrid) -> list[str]:
    return tilegrid.render_text_level(grid).splitlines()


def _grid_from_rows(rows) -> TileGrid:
    if not isinstance(rows, list) or not all(isinstance(r, str) for r in rows):
        raise BadParams("level must be an array of glyph strings")
    return tilegrid.parse_text_level("\n".join(rows) + "\n")


class CoCreateService:
    """Library-level service facade shared by the HTTP layer and tests."""

    def __init__(
        self,
        params: NetworkParams,
        mrin: MrinArrays,
        train_sessions: list[Session],
        live_path: str | None = None,
        tau: float = DEFAULT_TAU,
        top_k: int = DEFAULT_TOP_K,
    ):
        self.params = params
        self.mrin = mrin
        self.train_sessions = train_sessions
        self.live_path = live_path
        self.tau = tau
        self.top_k = top_k
        self._lock = threading.Lock()
        self.live: dict[str, Session] = {}
        if live_path and os.path.exists(live_path):
            for s in sessionlog.load_sessions(live_path):
                self.live[s.session_id] = s

    # -- read-only operations

    def health(self) -> dict:
        return {
            "schema": SCHEMA,
            "status": "ok",
            "fingerprint": self.params.fingerprint,
            "width": self.params.config.width,
            "height": self.params.config.height,
            "train_sessions": len(self.train_sessions),
            "live_sessions": len(self.live),
        }

    def legend(self) -> dict:
        return {
            "schema": SCHEMA,
            "tiles": [
                {"id": t.tile_id, "name": t.name, "glyph": t.glyph}
                for t in tilegrid.TILES
            ],
        }

    def suggest_payload(self, payload: dict) -> dict:
        grid = _grid_from_rows(payload.get("level"))
        s = suggest(self.params, grid, self.tau, self.top_k)
        return {
            "schema": SCHEMA,
            "suggestion_id": s.suggestion_id,
            "additions": [
                {
                    "x": it.x,
                    "y": it.y,
                    "tile": it.tile,
                    "glyph": tilegrid.ID_TO_GLYPH[it.tile],
                    "q": it.q,
                }
                for it in s.items
            ],
        }

    def explain_payload(self, payload: dict) -> dict:
        grid = _grid_from_rows(payload.get("level"))
        layer = payload.get("layer", 1)
        if not isinstance(layer, int):
            raise BadParams("layer must be an integer")
        expl = explain(self.params, self.mrin, self.train_sessions, grid, layer=layer)
        return {
            "schema": SCHEMA,
            "instance_id": expl.instance_id,
            "session_id": expl.session_id,
            "filter_index": expl.filter_index,
            "modal_count": expl.modal_count,
            "layer": expl.layer,
            "responsible_level": _rows(expl.responsible_level),
        }

    # -- session recording

    def append_turn(self, payload: dict) -> dict:
        session_id = payload.get("session_id")
        if not isinstance(session_id, str) or not session_id:
            raise BadParams("session_id must be a non-empty string")
        actor = payload.get("actor")
        if actor not in (sessionlog.HUMAN, sessionlog.AGENT):
            raise BadParams(f"actor must be HUMAN or AGENT, got {actor!r}")
        changes = [
            Change(int(c[0]), int(c[1]), int(c[2]), int(c[3]))
            for c in payload.get("changes", [])
        ]
        decisions = [
            sessionlog.Decision(int(d[0]), int(d[1]), int(d[2]), str(d[3]))
            for d in payload.get("decisions", [])
        ]
        with self._lock:
            session = self.live.get(session_id)
            if session is None:
                if "initial" not in payload:
                    raise SchemaViolation(
                        0, f"unknown session {session_id!r} and no initial level given"
                    )
                initial = _grid_from_rows(payload["initial"])
                session = Session(
                    session_id=session_id,
                    initial=initial,
                    turns=[],
                    final_level=initial,
                )
            turn = Turn(actor=actor, changes=changes, decisions=decisions)
            new_turns = session.turns + [turn]
            level = session.final_level
            level = tilegrid.apply(level, changes)
            updated = Session(
                session_id=session_id,
                initial=session.initial,
                turns=new_turns,
                final_level=level,
            )
            sessionlog.validate_session(updated)
            self.live[session_id] = updated
            if self.live_path:
                sessionlog.save_sessions(
                    [self.live[k] for k in sorted(self.live)], self.live_path
                )
        return {"schema": SCHEMA, "session": sessionlog.session_to_record(updated)}

    def get_session(self, session_id: str) -> dict:
        with self._lock:
            session = self.live.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return {"schema": SCHEMA, "session": sessionlog.session_to_record(session)}


# --- HTTP layer ---------------------------------------------------------------


def _error_code(exc: Exception) -> str:
    name = type(exc).__name__
    out = []
    for i, ch in enumerate(name):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _status_for(exc: Exception) -> int:
    if isinstance(exc, (FingerprintMismatch, IoFailure, NumericFailure)):
        return 500
    if isinstance(exc, KeyError):
        return 404
    if isinstance(exc, LevelTraceError):
        return 400
    return 500


class _Handler(BaseHTTPRequestHandler):
    server_version = "leveltrace"

    @property
    def service(self) -> CoCreateService:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        if os.environ.get("LEVELTRACE_HTTP_LOG"):
            super().log_message(fmt, *args)

    def _send(self, status: int, body: dict) -> None:
        raw = json.dumps(body, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(raw)

    def _fail(self, exc: Exception) -> None:
        if isinstance(exc, KeyError):
            msg = f"unknown session {exc.args[0]!r}"
            code = "unknown_session"
        else:
            msg = str(exc)
            code = _error_code(exc)
        self._send(_status_for(exc), {"schema": SCHEMA, "code": code, "message": msg})

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadParams(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise BadParams("request body must be a JSON object")
        return payload

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()

    def do_GET(self):
        url = urlparse(self.path)
        try:
            if url.path == "/health":
                self._send(200, self.service.health())
            elif url.path == "/legend":
                self._send(200, self.service.legend())
            elif url.path == "/session/get":
                qs = parse_qs(url.query)
                ids = qs.get("id") or []
                if not ids:
                    raise BadParams("missing query parameter id")
                self._send(200, self.service.get_session(ids[0]))
            else:
                self._send(
                    404,
                    {"schema": SCHEMA, "code": "not_found", "message": self.path},
                )
        except Exception as exc:  # noqa: BLE001 - every error becomes JSON
            self._fail(exc)

    def do_POST(self):
        url = urlparse(self.path)
        try:
            payload = self._read_json()
            if url.path == "/suggest":
                self._send(200, self.service.suggest_payload(payload))
            elif url.path == "/explain":
                self._send(200, self.service.explain_payload(payload))
            elif url.path == "/session/append-turn":
                self._send(200, self.service.append_turn(payload))
            else:
                self._send(
                    404,
                    {"schema": SCHEMA, "code": "not_found", "message": self.path},
                )
        except Exception as exc:  # noqa: BLE001
            self._fail(exc)


def make_server(service: CoCreateService, host: str, port: int) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), _Handler)
    server.service = service  # type: ignore[attr-defined]
    return server
