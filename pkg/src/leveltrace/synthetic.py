"""Synthetic co-creation corpora with per-session motifs and labeled edit errors.

Real recorded sessions are not available, so experiments run on generated
ones.  Levels are built from small 2x2 motif stamps placed in fixed row slots
with empty gaps around them.  The gaps matter: they make the 3x3 patch
vocabulary of a stamp independent of where it sits, so two levels that use the
same stamps genuinely overlap under the patch metric and levels from different
families do not.

Each session grows band by band (one column band per agent round) and the
scripted human keeps or deletes each addition.  Most sessions repeat a single
motif family.  The first ``mixer_sessions`` sessions instead interleave every
family in the palette; their agent turns span two bands at once, which makes
them both the largest training targets and the broadest vocabulary levels in
the corpus.

Two kinds of contradictory edits are injected at configurable rates and
reported as ground truth:

* keep-then-delete: an addition is kept, then removed in a later turn and
  never restored (a false-positive decision),
* delete-then-re-add: an addition is deleted on the spot, then restored in a
  later turn and never removed again (a false-negative decision).

Every touched cell is touched by at most one scripted storyline, so the
injected set is exactly the set of contradictions recoverable from the log.

Motif families own disjoint tile-ID groups covering all 30 decorative IDs;
together with the ground floor, the player/flag markers and sky this exercises
every one of the 34 state channels once the corpus has at least one session
per family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tilegrid
from .errors import BadParams
from .sessionlog import AGENT, DELETE, HUMAN, KEEP, Decision, Session, Turn
from .tilegrid import Change, TileGrid

FALSE_POSITIVE = "FALSE_POSITIVE"
FALSE_NEGATIVE = "FALSE_NEGATIVE"

# family name -> the tile IDs the family may place (disjoint across families)
FAMILY_TILES: dict[str, tuple[int, ...]] = {
    "enemy_row": (6, 7, 8),
    "pipe_field": (11, 12, 13, 14),
    "staircase": (25, 9, 24),
    "coin_arch": (5, 3, 26),
    "tree_line": (19, 20, 23),
    "brick_ridge": (2, 4, 18),
    "bullet_towers": (15, 16, 17),
    "mushroom_grove": (21, 22, 27),
    "water_pool": (30, 31, 10),
    "hedge_row": (28, 29),
}

# family name -> three 2x2 stamps (top-left, top-right, bottom-left,
# bottom-right).  Stamp 0 of each family uses every tile the family owns, so a
# single stamp-0 placement covers the family's state channels.
FAMILY_SHAPES: dict[str, tuple[tuple[int, int, int, int], ...]] = {
    "enemy_row": ((6, 7, 8, 6), (7, 7, 6, 6), (8, 8, 7, 7)),
    "pipe_field": ((11, 12, 13, 14), (13, 14, 13, 14), (11, 12, 11, 12)),
    "staircase": ((9, 25, 25, 24), (25, 25, 25, 25), (24, 9, 25, 25)),
    "coin_arch": ((5, 5, 3, 26), (5, 3, 5, 3), (26, 26, 5, 5)),
    "tree_line": ((19, 23, 20, 20), (19, 19, 20, 20), (23, 19, 20, 23)),
    "brick_ridge": ((4, 18, 2, 2), (2, 2, 4, 4), (18, 4, 18, 2)),
    "bullet_towers": ((15, 17, 16, 16), (15, 15, 16, 16), (17, 16, 17, 16)),
    "mushroom_grove": ((21, 27, 22, 22), (21, 21, 22, 22), (27, 21, 27, 22)),
    "water_pool": ((10, 30, 31, 31), (30, 30, 31, 31), (31, 10, 31, 30)),
    "hedge_row": ((28, 29, 29, 28), (28, 28, 29, 29), (29, 29, 28, 28)),
}

DEFAULT_PALETTE: tuple[str, ...] = tuple(FAMILY_TILES)


@dataclass(frozen=True)
class SyntheticParams:
    n_sessions: int = 30
    width: int = 12
    height: int = 11
    fp_rate: float = 0.1
    fn_rate: float = 0.05
    motif_palette: tuple[str, ...] = DEFAULT_PALETTE
    rounds: int = 4  # column bands == agent turns for single-family sessions
    min_tiles_per_turn: int = 12
    max_tiles_per_turn: int = 24
    # sessions 0..mixer_sessions-1 interleave all palette families
    mixer_sessions: int = 2
    mixer_bands_per_turn: int = 2


@dataclass(frozen=True)
class InjectedError:
    """Ground truth for one scripted contradiction."""

    kind: str  # FALSE_POSITIVE or FALSE_NEGATIVE
    session_id: str
    x: int
    y: int
    tile: int


@dataclass
class SyntheticCorpus:
    sessions: list[Session]
    injected: list[InjectedError]
    seed: int
    params: SyntheticParams


def _validate(params: SyntheticParams) -> None:
    p = params
    if p.n_sessions < 1:
        raise BadParams("n_sessions must be >= 1")
    if not (0.0 <= p.fp_rate <= 1.0 and 0.0 <= p.fn_rate <= 1.0):
        raise BadParams("rates must lie in [0, 1]")
    if p.fp_rate + p.fn_rate > 1.0:
        raise BadParams("fp_rate + fn_rate must not exceed 1")
    if p.rounds < 2:
        raise BadParams("need at least 2 rounds to script contradictions")
    if p.width < 2 * p.rounds:
        raise BadParams("width too small for the number of rounds")
    if p.height < 7:
        raise BadParams("height must be >= 7")
    if not p.motif_palette:
        raise BadParams("motif palette is empty")
    for name in p.motif_palette:
        if name not in FAMILY_SHAPES:
            raise BadParams(f"unknown motif family {name!r}")
    if p.mixer_sessions < 0:
        raise BadParams("mixer_sessions must be >= 0")
    if p.mixer_bands_per_turn < 1:
        raise BadParams("mixer_bands_per_turn must be >= 1")


def _band(params: SyntheticParams, r: int) -> list[int]:
    w, n = params.width, params.rounds
    return list(range(r * w // n, (r + 1) * w // n))


def _slot_rows(height: int) -> list[int]:
    """Top rows of the 2x2 stamp slots, one empty gap row between slots.

    Slots start at row 1 so every stamp has an empty row above as well as
    below; a stamp's 3x3 windows then look the same whichever slot holds it.
    """
    rows = []
    y = 1
    while y + 1 <= height - 3:
        rows.append(y)
        y += 3
    return rows


def _stamp(band: list[int], y0: int, shape: tuple[int, int, int, int]):
    # pinned to the band's left edge: with 3-wide bands this leaves an empty
    # spacer column between stamps, so their 3x3 patches stay context-free
    x0 = band[0]
    tl, tr, bl, br = shape
    return [(x0, y0, tl), (x0 + 1, y0, tr), (x0, y0 + 1, bl), (x0 + 1, y0 + 1, br)]


def gen_synthetic(seed: int, params: SyntheticParams | None = None) -> SyntheticCorpus:
    """Generate a deterministic corpus plus ground-truth contradiction labels.

    Session i >= mixer_sessions repeats motif family palette[i % len(palette)]
    with a per-session stamp rotation, so sessions sharing a family still end
    in different levels.  Sessions below mixer_sessions interleave the whole
    palette with double-width agent turns.
    When fp_rate > 0 the corpus contains at least one keep-then-delete event
    and when fn_rate > 0 at least one delete-then-re-add event (both forced
    into session 0 if sampling alone produced none).
    """
    params = params or SyntheticParams()
    _validate(params)
    rng = np.random.default_rng(seed)
    h, w = params.height, params.width
    slots = _slot_rows(h)
    palette = params.motif_palette
    sessions: list[Session] = []
    injected: list[InjectedError] = []

    for si in range(params.n_sessions):
        is_mixer = si < params.mixer_sessions
        family = palette[si % len(palette)]
        session_id = f"synth-{seed}-{si:03d}"

        # per-band, per-slot stamp plan: (family, shape index).  Mixers devote
        # each band to one palette family in canonical stamp order, so every
        # family's stack vocabulary appears somewhere in the mixer's level.
        plan: dict[tuple[int, int], tuple[str, int]] = {}
        if is_mixer:
            for b in range(params.rounds):
                fam = palette[(b + si) % len(palette)]
                for s in range(len(slots)):
                    plan[(b, s)] = (fam, s % 3)
        else:
            rot = rng.permutation(3)
            for b in range(params.rounds):
                for s in range(len(slots)):
                    plan[(b, s)] = (family, int(rot[s % 3]))

        cells = np.zeros((h, w), dtype=np.int16)
        cells[h - 1, :] = 1  # ground floor
        cells[h - 2, 0] = tilegrid.PLAYER
        cells[h - 2, w - 1] = tilegrid.FLAG
        initial = TileGrid(cells)
        used = {(x, y) for y in range(h) for x in range(w) if cells[y, x] != 0}

        level = initial
        turns: list[Turn] = []
        pending: dict[int, list[tuple[str, int, int, int]]] = {}
        # guaranteed contradictions land in the first single-family session
        force_at = min(params.mixer_sessions, params.n_sessions - 1)
        force_fn = params.fn_rate > 0 and si == force_at
        force_fp = params.fp_rate > 0 and si == force_at

        # mixers keep at least two agent turns so contradictions can resolve
        bands_per_turn = 1
        if is_mixer:
            bands_per_turn = max(1, min(params.mixer_bands_per_turn, params.rounds - 1))
        n_agent_turns = -(-params.rounds // bands_per_turn)

        for r in range(n_agent_turns):
            bands = range(r * bands_per_turn, min((r + 1) * bands_per_turn, params.rounds))
            pattern: list[tuple[int, int, int]] = []
            turn_cols: list[int] = []
            for b in bands:
                cols = _band(params, b)
                turn_cols.extend(cols)
                for s, y0 in enumerate(slots):
                    fam, shape_idx = plan[(b, s)]
                    shape = FAMILY_SHAPES[fam][shape_idx]
                    for x, y, tile in _stamp(cols, y0, shape):
                        if (x, y) not in used:
                            pattern.append((x, y, tile))
            # top the turn up so every agent action is a substantial edit
            if len(pattern) < params.min_tiles_per_turn:
                seen = {(x, y) for x, y, _ in pattern}
                fill = FAMILY_TILES[family][0]
                for y in range(h - 2, 0, -1):
                    for x in turn_cols:
                        if (x, y) not in used and (x, y) not in seen:
                            pattern.append((x, y, fill))
                            seen.add((x, y))
                        if len(pattern) >= params.min_tiles_per_turn:
                            break
                    if len(pattern) >= params.min_tiles_per_turn:
                        break
            pattern = pattern[: params.max_tiles_per_turn]

            agent_changes = [Change(x, y, tilegrid.EMPTY, t) for x, y, t in pattern]
            for x, y, _ in pattern:
                used.add((x, y))
            level = tilegrid.apply(level, agent_changes)
            turns.append(Turn(AGENT, agent_changes))

            human_changes: list[Change] = []
            decisions: list[Decision] = []
            for kind, x, y, tile in pending.pop(r, []):
                if kind == FALSE_POSITIVE:
                    human_changes.append(Change(x, y, tile, tilegrid.EMPTY))
                else:
                    human_changes.append(Change(x, y, tilegrid.EMPTY, tile))

            last_round = r == n_agent_turns - 1
            for idx, ch in enumerate(agent_changes):
                kind = None
                if not last_round:
                    if force_fn and idx == 0 and r == 0:
                        kind = FALSE_NEGATIVE
                    elif force_fp and idx == 1 and r == 0:
                        kind = FALSE_POSITIVE
                    else:
                        u = float(rng.random())
                        if u < params.fn_rate:
                            kind = FALSE_NEGATIVE
                        elif u < params.fn_rate + params.fp_rate:
                            kind = FALSE_POSITIVE
                # contradictions resolve on the next round, keeping the
                # decision-to-contradiction window to a couple of turns
                due = r + 1
                if kind == FALSE_NEGATIVE:
                    decisions.append(Decision(ch.x, ch.y, ch.after, DELETE))
                    human_changes.append(Change(ch.x, ch.y, ch.after, tilegrid.EMPTY))
                    pending.setdefault(due, []).append(
                        (FALSE_NEGATIVE, ch.x, ch.y, ch.after)
                    )
                    injected.append(
                        InjectedError(FALSE_NEGATIVE, session_id, ch.x, ch.y, ch.after)
                    )
                elif kind == FALSE_POSITIVE:
                    decisions.append(Decision(ch.x, ch.y, ch.after, KEEP))
                    pending.setdefault(due, []).append(
                        (FALSE_POSITIVE, ch.x, ch.y, ch.after)
                    )
                    injected.append(
                        InjectedError(FALSE_POSITIVE, session_id, ch.x, ch.y, ch.after)
                    )
                else:
                    decisions.append(Decision(ch.x, ch.y, ch.after, KEEP))

            # one human embellishment per turn keeps D-states multi-author;
            # the spacer column at the marker row is the spot that least
            # disturbs the stamp windows
            ext_fam = plan[(r * bands_per_turn, 0)][0]
            ext_tiles = FAMILY_TILES[ext_fam]
            ext_tile = ext_tiles[min(1, len(ext_tiles) - 1)]
            spacers = [_band(params, b)[-1] for b in bands]
            spots = [(x, h - 2) for x in spacers if (x, h - 2) not in used]
            spots += [(x, h - 2) for x in turn_cols if (x, h - 2) not in used]
            if not spots:
                spots = [
                    (x, y)
                    for y in range(h - 3, -1, -1)
                    for x in turn_cols
                    if (x, y) not in used
                ]
            if spots:
                ex, ey = spots[0]
                human_changes.append(Change(ex, ey, tilegrid.EMPTY, ext_tile))
                used.add((ex, ey))

            level = tilegrid.apply(level, human_changes)
            turns.append(Turn(HUMAN, human_changes, decisions))

        assert not pending, "scheduled events must all be due within the session"
        sessions.append(
            Session(
                session_id=session_id,
                initial=initial,
                turns=turns,
                final_level=level,
            )
        )

    return SyntheticCorpus(sessions=sessions, injected=injected, seed=seed, params=params)
