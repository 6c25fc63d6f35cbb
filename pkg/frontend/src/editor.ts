/**
 * Editor state machine, free of DOM concerns.
 *
 * The core owns four pieces of state: the working grid (glyph rows, the same
 * shape the service speaks), the buffer of uncommitted human edits, the
 * pending suggestion with one KEEP/DELETE verdict per addition, and the
 * explanation panel.  Session history lives on the server; the core mirrors
 * the turn list the service returns from each append and never rewrites it.
 *
 * Turn protocol: human edits accumulate locally and become one HUMAN turn on
 * commit.  A suggestion stays a visual overlay until it is resolved; resolving
 * logs the agent's additions as one AGENT turn, then logs the human verdicts
 * (plus the physical removal of every DELETE) as one HUMAN turn, so each
 * suggested addition ends up with exactly one decision record.  Service
 * failures roll the optimistic grid update back and keep the suggestion
 * pending; a successful retry does not re-log the AGENT turn.
 */

import { LevelService, RawResponse } from "./client.js";
import {
  applyChanges,
  cellId,
  changesCanvas,
  coalesceChanges,
  emptyRows,
  gridSize,
  Legend,
  matchPatches,
  PatchWindow,
  rowsToIds,
} from "./grid.js";
import {
  ChangeTuple,
  DecisionTuple,
  EMPTY_TILE,
  ExplainResponse,
  SuggestedAddition,
  SuggestResponse,
  TurnRecord,
  Verdict,
} from "./protocol.js";

export class EditorStateError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "EditorStateError";
  }
}

export interface PendingItem {
  addition: SuggestedAddition;
  verdict: Verdict;
}

export interface PendingSuggestion {
  suggestionId: string;
  /** The grid the suggestion was computed on (the agent's input). */
  baseLevel: string[];
  items: PendingItem[];
  /** True once the AGENT turn reached the server, so retries do not re-log it. */
  agentTurnLogged: boolean;
}

export interface ExplanationPanel {
  /** The service response, byte for byte. */
  rawText: string;
  response: ExplainResponse;
  /** The level the explanation was requested for. */
  probeLevel: string[];
  /** Windows of the responsible level matching the suggested additions. */
  matches: PatchWindow[];
  matchedCount: number;
  additionPatchCount: number;
}

export interface EditorOptions {
  sessionId: string;
  legend: Legend;
  width: number;
  height: number;
  initial?: string[];
}

export class EditorCore {
  readonly sessionId: string;
  readonly legend: Legend;
  readonly width: number;
  readonly height: number;
  readonly initial: string[];

  private gridRows: string[];
  private edits: ChangeTuple[] = [];
  private turns: TurnRecord[] = [];
  private serverHasSession = false;
  private pending: PendingSuggestion | null = null;
  private lastSuggestion: { baseLevel: string[]; additions: SuggestedAddition[] } | null = null;
  private explanation: ExplanationPanel | null = null;

  constructor(
    private readonly client: LevelService,
    options: EditorOptions,
  ) {
    this.sessionId = options.sessionId;
    this.legend = options.legend;
    this.width = options.width;
    this.height = options.height;
    this.initial = options.initial
      ? options.initial.slice()
      : emptyRows(options.width, options.height, options.legend);
    const { width, height } = gridSize(this.initial);
    if (width !== options.width || height !== options.height) {
      throw new EditorStateError(
        `initial level is ${width}x${height}, editor wants ${options.width}x${options.height}`,
      );
    }
    this.gridRows = this.initial.slice();
  }

  get grid(): string[] {
    return this.gridRows.slice();
  }

  get suggestion(): PendingSuggestion | null {
    return this.pending;
  }

  get panel(): ExplanationPanel | null {
    return this.explanation;
  }

  get loggedTurns(): TurnRecord[] {
    return this.turns.slice();
  }

  get uncommittedEdits(): ChangeTuple[] {
    return coalesceChanges(this.edits);
  }

  tileAt(x: number, y: number): number {
    return cellId(this.gridRows, this.legend, x, y);
  }

  /** Place a tile (or erase with the empty tile).  Purely local until commit. */
  editTile(x: number, y: number, tile: number): void {
    if (this.pending) {
      throw new EditorStateError("resolve the pending suggestion before editing");
    }
    if (!this.legend.idToGlyph.has(tile)) {
      throw new EditorStateError(`unknown tile id ${tile}`);
    }
    const before = cellId(this.gridRows, this.legend, x, y);
    if (before === tile) {
      return;
    }
    const change: ChangeTuple = [x, y, before, tile];
    this.gridRows = applyChanges(this.gridRows, this.legend, [change]);
    this.edits.push(change);
  }

  /** Post buffered edits as one HUMAN turn.  No-op when the buffer is empty. */
  async commitTurn(): Promise<void> {
    const changes = coalesceChanges(this.edits);
    if (changes.length === 0) {
      this.edits = [];
      return;
    }
    await this.appendTurn("HUMAN", changes, []);
    this.edits = [];
  }

  /** Commit pending edits, then ask the agent for additions to the grid. */
  async requestSuggestion(): Promise<SuggestResponse> {
    if (this.pending) {
      throw new EditorStateError("a suggestion is already pending");
    }
    await this.commitTurn();
    const raw: RawResponse<SuggestResponse> = await this.client.suggest(this.gridRows);
    const additions = raw.body.additions;
    this.lastSuggestion = { baseLevel: this.gridRows.slice(), additions: additions.slice() };
    if (additions.length > 0) {
      this.pending = {
        suggestionId: raw.body.suggestion_id,
        baseLevel: this.gridRows.slice(),
        items: additions.map((a) => ({ addition: a, verdict: "KEEP" as Verdict })),
        agentTurnLogged: false,
      };
    }
    return raw.body;
  }

  setVerdict(index: number, verdict: Verdict): void {
    if (!this.pending) {
      throw new EditorStateError("no suggestion is pending");
    }
    const item = this.pending.items[index];
    if (!item) {
      throw new EditorStateError(`no suggestion item ${index}`);
    }
    item.verdict = verdict;
  }

  /**
   * Commit the verdicts: log the AGENT turn, then one HUMAN turn carrying a
   * decision per item and the removal of every DELETE.  KEEPs stay on the
   * grid; the grid update is optimistic and rolls back if either append
   * fails (the suggestion then stays pending for a retry).
   */
  async resolveSuggestion(): Promise<void> {
    const pending = this.pending;
    if (!pending) {
      throw new EditorStateError("no suggestion is pending");
    }
    const additionChanges: ChangeTuple[] = pending.items.map(({ addition }) => [
      addition.x,
      addition.y,
      EMPTY_TILE,
      addition.tile,
    ]);
    const deletionChanges: ChangeTuple[] = pending.items
      .filter((it) => it.verdict === "DELETE")
      .map(({ addition }): ChangeTuple => [addition.x, addition.y, addition.tile, EMPTY_TILE]);
    const decisions: DecisionTuple[] = pending.items.map(({ addition, verdict }) => [
      addition.x,
      addition.y,
      addition.tile,
      verdict,
    ]);
    const snapshot = this.gridRows;
    const withAdditions = applyChanges(this.gridRows, this.legend, additionChanges);
    this.gridRows = applyChanges(withAdditions, this.legend, deletionChanges);
    try {
      if (!pending.agentTurnLogged) {
        await this.appendTurn("AGENT", additionChanges, []);
        pending.agentTurnLogged = true;
      }
      await this.appendTurn("HUMAN", deletionChanges, decisions);
    } catch (err) {
      this.gridRows = snapshot;
      throw err;
    }
    this.pending = null;
  }

  /** Reject the whole suggestion: every item gets a DELETE verdict. */
  async dismissSuggestion(): Promise<void> {
    if (!this.pending) {
      throw new EditorStateError("no suggestion is pending");
    }
    for (const item of this.pending.items) {
      item.verdict = "DELETE";
    }
    await this.resolveSuggestion();
  }

  /**
   * Explain the agent's latest action: ask the service which training level
   * is most responsible for what the model does on the level the agent last
   * saw (the pre-suggestion state; the working grid if the agent was never
   * asked), and mark every 3x3 window of that level matching a patch of the
   * suggested additions.
   */
  async requestExplanation(layer?: number): Promise<ExplanationPanel> {
    const probe = this.pending?.baseLevel ?? this.lastSuggestion?.baseLevel ?? this.gridRows.slice();
    const additions = this.pending?.items.map((it) => it.addition) ?? this.lastSuggestion?.additions ?? [];
    const raw = await this.client.explain(probe, layer);
    const level = raw.body.responsible_level;
    const additionChanges: ChangeTuple[] = additions.map((a) => [a.x, a.y, EMPTY_TILE, a.tile]);
    let matches: PatchWindow[] = [];
    let matchedCount = 0;
    let additionPatchCount = 0;
    if (additionChanges.length > 0) {
      const result = matchPatches(
        rowsToIds(level, this.legend),
        changesCanvas(additionChanges, this.width, this.height),
      );
      matches = result.windows;
      matchedCount = result.matched;
      additionPatchCount = result.actionPatchCount;
    }
    this.explanation = {
      rawText: raw.text,
      response: raw.body,
      probeLevel: probe,
      matches,
      matchedCount,
      additionPatchCount,
    };
    return this.explanation;
  }

  /** The grid the server-side log reconstructs, plus local uncommitted edits. */
  replayLocal(): string[] {
    let rows = this.initial.slice();
    for (const turn of this.turns) {
      rows = applyChanges(rows, this.legend, turn.changes);
    }
    return applyChanges(rows, this.legend, coalesceChanges(this.edits));
  }

  private async appendTurn(
    actor: "HUMAN" | "AGENT",
    changes: ChangeTuple[],
    decisions: DecisionTuple[],
  ): Promise<void> {
    const envelope = await this.client.appendTurn({
      session_id: this.sessionId,
      actor,
      changes,
      decisions,
      ...(this.serverHasSession ? {} : { initial: this.initial }),
    });
    this.serverHasSession = true;
    this.turns = envelope.session.turns;
  }
}
