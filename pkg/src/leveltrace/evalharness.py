"""Evaluations: does the responsible level actually resemble what happened next?

Two experiments, both scored with the 3x3-patch overlap ratio against a
baseline of randomly drawn training levels:

* explainability: for every agent turn in a test session that added more than
  `min_added` tiles, compare the responsible level (queried at the state the
  agent saw) against that action.
* labeling errors: find contradictory human decisions (kept-then-deleted,
  deleted-then-restored), reconstruct the intro/contradiction window, and
  compare the responsible level (queried at the intro state) against the
  window's diff.

A per-example RNG substream keyed on (seed, example index) makes the random
baselines independent of evaluation order.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import tilegrid
from .attribution import MrinArrays, explain
from .errors import (
    EmptyAction,
    InconsistentExample,
    NoEligibleInstances,
    NoExamplesFound,
    NotEnoughTrainingLevels,
)
from .neuralnet import NetworkParams
from .overlap import local_overlap_ratio
from .sessionlog import AGENT, DELETE, HUMAN, KEEP, Session
from .tilegrid import ChangeSet, TileGrid
from .training import corpus_digest

FALSE_POSITIVE = "FALSE_POSITIVE"
FALSE_NEGATIVE = "FALSE_NEGATIVE"


@dataclass
class LabelErrorExample:
    kind: str
    session_id: str
    addition: tuple[int, int, int]  # (x, y, tile)
    decision_turn: int
    intro_turn: int
    contradiction_turn: int
    i_state: TileGrid
    c_state: TileGrid
    d_state: ChangeSet


def _intro_turn(session: Session, before_turn: int, x: int, y: int, tile: int) -> int:
    """Latest agent turn before `before_turn` that placed this addition."""
    for k in range(before_turn - 1, -1, -1):
        turn = session.turns[k]
        if turn.actor != AGENT:
            continue
        for ch in turn.changes:
            if ch.x == x and ch.y == y and ch.after == tile:
                return k
    raise InconsistentExample(
        f"no agent turn placed tile {tile} at ({x}, {y}) before turn {before_turn}"
    )


def _contradiction_turn(session: Session, kind: str, x: int, y: int, tile: int) -> int:
    """Last turn that removed (FP) or restored (FN) the judged addition."""
    for k in range(len(session.turns) - 1, -1, -1):
        for ch in session.turns[k].changes:
            if ch.x != x or ch.y != y:
                continue
            if kind == FALSE_POSITIVE and ch.before == tile:
                return k
            if kind == FALSE_NEGATIVE and ch.after == tile:
                return k
    raise InconsistentExample(
        f"no turn contradicts tile {tile} at ({x}, {y}) for {kind}"
    )


def _icd(
    session: Session, states: list[TileGrid], kind: str, decision_turn: int,
    x: int, y: int, tile: int,
) -> tuple[int, int, TileGrid, TileGrid, ChangeSet]:
    intro = _intro_turn(session, decision_turn, x, y, tile)
    contra = _contradiction_turn(session, kind, x, y, tile)
    i_state = states[intro]
    c_state = states[contra + 1]
    return intro, contra, i_state, c_state, tilegrid.diff(i_state, c_state)


def detect_label_errors(session: Session) -> list[LabelErrorExample]:
    """Scan human decisions for ones the final level contradicts.

    A KEEP whose tile is gone from the final level is a false positive of the
    decision; a DELETE whose tile is back is a false negative.  Each example
    carries the intro-state (level before the agent turn that placed the
    tile), the contradiction-state (level right after the last turn that
    undid or restored it) and their diff.
    """
    final = session.final_level
    states = session.states()
    out: list[LabelErrorExample] = []
    for k, turn in enumerate(session.turns):
        if turn.actor != HUMAN:
            continue
        for d in turn.decisions:
            kind = None
            if d.verdict == KEEP and final.cell(d.x, d.y) != d.tile:
                kind = FALSE_POSITIVE
            elif d.verdict == DELETE and final.cell(d.x, d.y) == d.tile:
                kind = FALSE_NEGATIVE
            if kind is None:
                continue
            intro, contra, i_state, c_state, d_state = _icd(
                session, states, kind, k, d.x, d.y, d.tile
            )
            out.append(
                LabelErrorExample(
                    kind=kind,
                    session_id=session.session_id,
                    addition=(d.x, d.y, d.tile),
                    decision_turn=k,
                    intro_turn=intro,
                    contradiction_turn=contra,
                    i_state=i_state,
                    c_state=c_state,
                    d_state=d_state,
                )
            )
    return out


def build_icd(
    session: Session, example: LabelErrorExample
) -> tuple[TileGrid, TileGrid, ChangeSet]:
    """Recompute the intro/contradiction window for an example of this session."""
    if example.session_id != session.session_id:
        raise InconsistentExample(
            f"example belongs to {example.session_id!r}, not {session.session_id!r}"
        )
    x, y, tile = example.addition
    if not (0 <= example.decision_turn < len(session.turns)):
        raise InconsistentExample("decision turn out of range")
    states = session.states()
    _, _, i_state, c_state, d_state = _icd(
        session, states, example.kind, example.decision_turn, x, y, tile
    )
    return i_state, c_state, d_state


# --- reports -----------------------------------------------------------------


@dataclass
class EvalReport:
    kind: str  # "explainability" or "label-errors"
    eligible_count: int
    win_count: int
    win_rate: float
    mean_responsible_ratio: float
    mean_random_ratio: float
    n_random: int
    seed: int
    model_fingerprint: str | None
    train_digest: str
    test_digest: str
    per_example: list[dict] = field(default_factory=list)
    fp_count: int = 0
    fn_count: int = 0
    fp_wins: int = 0
    fn_wins: int = 0
    skipped_count: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eligible_count": self.eligible_count,
            "win_count": self.win_count,
            "win_rate": self.win_rate,
            "mean_responsible_ratio": self.mean_responsible_ratio,
            "mean_random_ratio": self.mean_random_ratio,
            "n_random": self.n_random,
            "seed": self.seed,
            "model_fingerprint": self.model_fingerprint,
            "train_digest": self.train_digest,
            "test_digest": self.test_digest,
            "fp_count": self.fp_count,
            "fn_count": self.fn_count,
            "fp_wins": self.fp_wins,
            "fn_wins": self.fn_wins,
            "skipped_count": self.skipped_count,
            "per_example": self.per_example,
        }


def report_table(report: EvalReport) -> str:
    """Small fixed-width summary, one row per level source."""
    lines = [
        f"evaluation: {report.kind}",
        f"examples:   {report.eligible_count} evaluated"
        + (f", {report.skipped_count} skipped" if report.skipped_count else ""),
        "",
        f"{'level source':<24}{'mean overlap':>14}",
        f"{'most responsible':<24}{report.mean_responsible_ratio:>14.4f}",
        f"{'random (n=%d)' % report.n_random:<24}{report.mean_random_ratio:>14.4f}",
        "",
        f"win rate: {report.win_rate:.4f} ({report.win_count}/{report.eligible_count})",
    ]
    if report.kind == "label-errors":
        lines.append(
            f"false positives: {report.fp_count} ({report.fp_wins} wins), "
            f"false negatives: {report.fn_count} ({report.fn_wins} wins)"
        )
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, out_dir: str, prefix: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, prefix + ".json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, prefix + ".txt"), "w", encoding="utf-8") as fh:
        fh.write(report_table(report))


# --- the two experiments -----------------------------------------------------


def _random_baseline(
    action_grid: TileGrid,
    train: list[Session],
    exclude_session: str,
    n_random: int,
    seed: int,
    example_index: int,
) -> list[float]:
    candidates = [s for s in train if s.session_id != exclude_session]
    if len(candidates) < n_random:
        raise NotEnoughTrainingLevels(
            f"need {n_random} training levels besides the responsible one, "
            f"have {len(candidates)}"
        )
    rng = np.random.default_rng([seed, example_index])
    picks = rng.choice(len(candidates), size=n_random, replace=False)
    return [
        local_overlap_ratio(candidates[i].final_level, action_grid).ratio
        for i in picks
    ]


def explainability_eval(
    model: NetworkParams,
    mrin: MrinArrays,
    sessions_train: list[Session],
    sessions_test: list[Session],
    n_random: int = 20,
    min_added: int = 10,
    seed: int = 0,
) -> EvalReport:
    """Score responsible levels against each substantial agent action.

    One example per agent turn: the query is the level the agent saw, the
    action is the set of tiles it added, kept only when strictly more than
    `min_added` tiles were added.
    """
    if len(sessions_train) - 1 < n_random:
        raise NotEnoughTrainingLevels(
            f"need {n_random} training levels besides the responsible one, "
            f"have {len(sessions_train) - 1}"
        )
    w = sessions_train[0].initial.width
    h = sessions_train[0].initial.height

    traces: list[dict] = []
    resp_sum = rand_sum = 0.0
    wins = evaluated = 0
    example_index = 0
    for session in sessions_test:
        states = session.states()
        for k, turn in enumerate(session.turns):
            if turn.actor != AGENT:
                continue
            additions = tilegrid.added_entries(turn.changes)
            if len(additions) <= min_added:
                continue
            action_grid = tilegrid.changeset_to_grid(additions, w, h)
            expl = explain(model, mrin, sessions_train, states[k])
            r = local_overlap_ratio(expl.responsible_level, action_grid).ratio
            randoms = _random_baseline(
                action_grid, sessions_train, expl.session_id,
                n_random, seed, example_index,
            )
            rand_mean = float(np.mean(randoms))
            win = r > rand_mean
            traces.append(
                {
                    "test_session": session.session_id,
                    "turn": k,
                    "added": len(additions),
                    "responsible_session": expl.session_id,
                    "instance_id": expl.instance_id,
                    "filter_index": expl.filter_index,
                    "responsible_ratio": r,
                    "random_mean": rand_mean,
                    "win": bool(win),
                }
            )
            resp_sum += r
            rand_sum += rand_mean
            wins += int(win)
            evaluated += 1
            example_index += 1
    if evaluated == 0:
        raise NoEligibleInstances(
            f"no agent turn added more than {min_added} tiles"
        )
    return EvalReport(
        kind="explainability",
        eligible_count=evaluated,
        win_count=wins,
        win_rate=wins / evaluated,
        mean_responsible_ratio=resp_sum / evaluated,
        mean_random_ratio=rand_sum / evaluated,
        n_random=n_random,
        seed=seed,
        model_fingerprint=model.fingerprint,
        train_digest=corpus_digest(sessions_train),
        test_digest=corpus_digest(sessions_test),
        per_example=traces,
    )


def labeling_error_eval(
    model: NetworkParams,
    mrin: MrinArrays,
    sessions_train: list[Session],
    sessions_test: list[Session],
    n_random: int = 20,
    seed: int = 0,
) -> EvalReport:
    """Score responsible levels against each contradiction window's diff.

    Examples whose window diff is empty cannot be scored by the patch metric;
    they are skipped and counted, never treated as losses.
    """
    if len(sessions_train) - 1 < n_random:
        raise NotEnoughTrainingLevels(
            f"need {n_random} training levels besides the responsible one, "
            f"have {len(sessions_train) - 1}"
        )
    examples: list[tuple[Session, LabelErrorExample]] = []
    for session in sessions_test:
        for ex in detect_label_errors(session):
            examples.append((session, ex))
    if not examples:
        raise NoExamplesFound("no contradictory decisions in the test corpus")

    w = sessions_train[0].initial.width
    h = sessions_train[0].initial.height
    traces: list[dict] = []
    resp_sum = rand_sum = 0.0
    wins = evaluated = skipped = 0
    fp_count = fn_count = fp_wins = fn_wins = 0
    for example_index, (session, ex) in enumerate(examples):
        base = {
            "test_session": ex.session_id,
            "kind": ex.kind,
            "addition": list(ex.addition),
            "decision_turn": ex.decision_turn,
        }
        try:
            d_grid = tilegrid.changeset_to_grid(ex.d_state, w, h)
            expl = explain(model, mrin, sessions_train, ex.i_state)
            r_result = local_overlap_ratio(expl.responsible_level, d_grid).ratio
        except EmptyAction:
            skipped += 1
            traces.append({**base, "skipped": True})
            continue
        randoms = _random_baseline(
            d_grid, sessions_train, expl.session_id, n_random, seed, example_index
        )
        rand_mean = float(np.mean(randoms))
        win = r_result > rand_mean
        traces.append(
            {
                **base,
                "responsible_session": expl.session_id,
                "responsible_ratio": r_result,
                "random_mean": rand_mean,
                "win": bool(win),
            }
        )
        resp_sum += r_result
        rand_sum += rand_mean
        wins += int(win)
        evaluated += 1
        if ex.kind == FALSE_POSITIVE:
            fp_count += 1
            fp_wins += int(win)
        else:
            fn_count += 1
            fn_wins += int(win)
    if evaluated == 0:
        raise NoExamplesFound("every contradiction window had an empty diff")
    return EvalReport(
        kind="label-errors",
        eligible_count=evaluated,
        win_count=wins,
        win_rate=wins / evaluated,
        mean_responsible_ratio=resp_sum / evaluated,
        mean_random_ratio=rand_sum / evaluated,
        n_random=n_random,
        seed=seed,
        model_fingerprint=model.fingerprint,
        train_digest=corpus_digest(sessions_train),
        test_digest=corpus_digest(sessions_test),
        per_example=traces,
        fp_count=fp_count,
        fn_count=fn_count,
        fp_wins=fp_wins,
        fn_wins=fn_wins,
        skipped_count=skipped,
    )
