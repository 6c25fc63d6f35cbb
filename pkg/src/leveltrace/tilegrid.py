"""Tile vocabulary, level grids, text parsing, one-hot encoding, patches, diffs.

A level is a rectangular grid of tile IDs addressed by (x, y) with x counting
columns from the left and y counting rows from the top, matching how tile
editors address the screen.  The vocabulary is fixed at 34 tile IDs: ID 0 is
EMPTY (sky), IDs 32 and 33 are the player and the goal flag.  The player and
flag can appear in a level but are never placed by an agent action, so action
grids are restricted to IDs 0..31.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import (
    DimensionMismatch,
    GridTooSmall,
    OutOfRange,
    RaggedLines,
    StaleChange,
    UnknownGlyph,
)

N_STATE_TILES = 34
N_ACTION_TILES = 32
EMPTY = 0
PLAYER = 32
FLAG = 33

class TileDef(NamedTuple):
    tile_id: int
    name: str
    glyph: str


# All 34 tiles.  The identities beyond EMPTY/PLAYER/FLAG are a fixed house
# vocabulary; the encoding only needs them to be stable.
TILES: tuple[TileDef, ...] = tuple(TileDef(*t) for t in (
    (0, "empty", "-"),
    (1, "ground", "X"),
    (2, "brick", "S"),
    (3, "question", "?"),
    (4, "used_block", "Q"),
    (5, "coin", "o"),
    (6, "goomba", "E"),
    (7, "koopa", "k"),
    (8, "red_koopa", "r"),
    (9, "spiky", "y"),
    (10, "piranha", "p"),
    (11, "pipe_top_left", "<"),
    (12, "pipe_top_right", ">"),
    (13, "pipe_left", "["),
    (14, "pipe_right", "]"),
    (15, "bullet_head", "B"),
    (16, "bullet_body", "b"),
    (17, "cannon", "c"),
    (18, "platform", "="),
    (19, "tree_top", "t"),
    (20, "tree_trunk", "T"),
    (21, "mushroom_cap", "m"),
    (22, "mushroom_stem", "M"),
    (23, "vine", "v"),
    (24, "spring", "s"),
    (25, "hard_block", "#"),
    (26, "coin_block", "C"),
    (27, "cloud", "w"),
    (28, "bush", "u"),
    (29, "fence", "f"),
    (30, "lava", "L"),
    (31, "water", "~"),
    (32, "player", "P"),
    (33, "flag", "F"),
))

assert len(TILES) == N_STATE_TILES
assert [t[0] for t in TILES] == list(range(N_STATE_TILES))
assert len({t[2] for t in TILES}) == N_STATE_TILES, "glyphs must be unique"

GLYPH_TO_ID: dict[str, int] = {glyph: tid for tid, _, glyph in TILES}
ID_TO_GLYPH: dict[int, str] = {tid: glyph for tid, _, glyph in TILES}
NAME_TO_ID: dict[str, int] = {name: tid for tid, name, _ in TILES}

# Default glyph legend used by the text level format and the session log.
DEFAULT_LEGEND: dict[str, int] = dict(GLYPH_TO_ID)


def is_action_tile(tile_id: int) -> bool:
    """True for the 32 IDs an agent action may place (everything but player/flag)."""
    return 0 <= tile_id < N_ACTION_TILES


@dataclass(frozen=True, eq=False)
class TileGrid:
    """A width x height grid of tile IDs, at least 3x3.

    ``cells`` is stored as an array of shape (height, width) so that
    ``cells[y, x]`` addresses column x of row y.  Instances are immutable
    value objects: the backing array is copied in and marked read-only.
    """

    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.int16, copy=True)
        if cells.ndim != 2:
            raise DimensionMismatch(f"cells must be 2-D, got shape {cells.shape}")
        if cells.shape[0] < 3 or cells.shape[1] < 3:
            raise GridTooSmall(f"grid must be at least 3x3, got {cells.shape[1]}x{cells.shape[0]}")
        if cells.min() < 0 or cells.max() >= N_STATE_TILES:
            raise OutOfRange("cell values must be valid tile IDs in [0, 33]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def cell(self, x: int, y: int) -> int:
        if not (0 <= x < self.width and 0 <= y < self.height):
            raise OutOfRange(f"({x}, {y}) outside {self.width}x{self.height} grid")
        return int(self.cells[y, x])

    def __eq__(self, other) -> bool:
        if not isinstance(other, TileGrid):
            return NotImplemented
        return self.cells.shape == other.cells.shape and bool(
            np.array_equal(self.cells, other.cells)
        )

    __hash__ = None  # mutable-array semantics: not hashable

    def __repr__(self) -> str:
        return f"TileGrid({self.width}x{self.height})"


def empty_grid(width: int, height: int) -> TileGrid:
    return TileGrid(np.zeros((height, width), dtype=np.int16))


# A 3x3 patch as a flat row-major tuple of 9 tile IDs (top row first).
Patch3 = tuple


class Change(NamedTuple):
    """One cell edit: the tile at (x, y) goes from ``before`` to ``after``."""

    x: int
    y: int
    before: int
    after: int


ChangeSet = list  # list[Change]


# --- text format ------------------------------------------------------------


def parse_text_level(text: str, legend: Mapping[str, int] | None = None) -> TileGrid:
    """Parse a character grid (one glyph per tile, newline-separated rows).

    Raises RaggedLines if rows differ in length (1-based line number) and
    UnknownGlyph for characters missing from the legend (1-based line/column).
    """
    legend = DEFAULT_LEGEND if legend is None else legend
    lines = text.splitlines()
    while lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GridTooSmall("empty level text")
    width = len(lines[0])
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if len(line) != width:
            raise RaggedLines(lineno)
        row = []
        for colno, glyph in enumerate(line, start=1):
            if glyph not in legend:
                raise UnknownGlyph(glyph, lineno, colno)
            row.append(legend[glyph])
        rows.append(row)
    return TileGrid(np.array(rows, dtype=np.int16))


def render_text_level(grid: TileGrid, legend: Mapping[str, int] | None = None) -> str:
    """Inverse of parse_text_level; one line per row, trailing newline included."""
    legend = DEFAULT_LEGEND if legend is None else legend
    id_to_glyph = {tid: glyph for glyph, tid in legend.items()}
    lines = "\n".join(
        "".join(id_to_glyph[int(t)] for t in row) for row in grid.cells
    )
    return lines + "\n"


def legend_to_text(legend: Mapping[str, int] | None = None) -> str:
    """Serialize a legend as ``name = <id> <glyph>`` lines.

    Names come from the built-in tile table.  Lines starting with '#' are
    comments; blank lines are ignored on parse.
    """
    legend = DEFAULT_LEGEND if legend is None else legend
    lines = ["# tile legend: name = <id> <glyph>"]
    for glyph, tid in sorted(legend.items(), key=lambda kv: kv[1]):
        name = TILES[tid][1] if 0 <= tid < N_STATE_TILES else f"tile{tid}"
        lines.append(f"{name} = {tid} {glyph}")
    return "\n".join(lines) + "\n"


def legend_from_text(text: str) -> dict[str, int]:
    """Parse the legend format written by legend_to_text (glyph -> id map)."""
    legend: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            _, rhs = line.split("=", 1)
            tid_s, glyph = rhs.split()
            tid = int(tid_s)
        except ValueError as exc:
            raise RaggedLines(lineno) from exc
        if len(glyph) != 1 or not (0 <= tid < N_STATE_TILES):
            raise UnknownGlyph(glyph, lineno, 1)
        legend[glyph] = tid
    return legend


# --- encoding ---------------------------------------------------------------


def to_state_tensor(grid: TileGrid) -> np.ndarray:
    """One-hot encode a grid as a float64 tensor of shape (width, height, 34)."""
    eye = np.eye(N_STATE_TILES, dtype=np.float64)
    return eye[grid.cells].transpose(1, 0, 2)


def grid_from_state_tensor(tensor: np.ndarray) -> TileGrid:
    """Inverse of to_state_tensor via per-cell channel argmax."""
    if tensor.ndim != 3 or tensor.shape[2] != N_STATE_TILES:
        raise DimensionMismatch(f"expected (W, H, 34) tensor, got {tensor.shape}")
    return TileGrid(np.argmax(tensor, axis=2).T.astype(np.int16))


# --- patches ----------------------------------------------------------------


def extract_patches(grid: TileGrid) -> list[Patch3]:
    """All 3x3 windows (stride 1) that contain at least one non-EMPTY cell.

    Returns a multiset as a list: duplicate patches are preserved.  Each patch
    is a flat row-major tuple of 9 tile IDs.
    """
    if grid.width < 3 or grid.height < 3:
        raise GridTooSmall("patch extraction needs at least a 3x3 grid")
    windows = np.lib.stride_tricks.sliding_window_view(grid.cells, (3, 3))
    flat = windows.reshape(-1, 9)
    keep = flat.any(axis=1)
    return [tuple(row) for row in flat[keep].tolist()]


# --- diff / apply -----------------------------------------------------------


def diff(a: TileGrid, b: TileGrid) -> ChangeSet:
    """Cell-level difference such that apply(a, diff(a, b)) == b.

    Entries are ordered row-major (top-to-bottom, left-to-right).
    """
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )
    ys, xs = np.nonzero(a.cells != b.cells)
    return [
        Change(int(x), int(y), int(a.cells[y, x]), int(b.cells[y, x]))
        for y, x in zip(ys, xs)
    ]


def apply(grid: TileGrid, cs: ChangeSet) -> TileGrid:
    """Apply a ChangeSet, checking every ``before`` against the current grid."""
    cells = np.array(grid.cells, copy=True)
    seen = set()
    for ch in cs:
        if not (0 <= ch.x < grid.width and 0 <= ch.y < grid.height):
            raise OutOfRange(f"({ch.x}, {ch.y}) outside grid")
        if (ch.x, ch.y) in seen:
            raise StaleChange(ch.x, ch.y)
        seen.add((ch.x, ch.y))
        if int(cells[ch.y, ch.x]) != ch.before:
            raise StaleChange(ch.x, ch.y)
        cells[ch.y, ch.x] = ch.after
    return TileGrid(cells)


def changeset_to_grid(cs: ChangeSet, width: int, height: int) -> TileGrid:
    """Render a ChangeSet's ``after`` values on an all-EMPTY canvas."""
    cells = np.zeros((height, width), dtype=np.int16)
    for ch in cs:
        if not (0 <= ch.x < width and 0 <= ch.y < height):
            raise OutOfRange(f"({ch.x}, {ch.y}) outside {width}x{height}")
        cells[ch.y, ch.x] = ch.after
    return TileGrid(cells)


def added_entries(cs: ChangeSet) -> ChangeSet:
    """The additions in a ChangeSet: entries whose ``before`` is EMPTY."""
    return [ch for ch in cs if ch.before == EMPTY]
