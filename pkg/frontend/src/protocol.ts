/**
 * Wire types for the level service JSON endpoints.
 *
 * Every response carries a `schema` field naming the protocol revision, and
 * levels always travel as arrays of glyph strings, one string per row.  Tile
 * IDs appear in changes, decisions and suggestion items; the glyph for each
 * ID comes from the legend endpoint.  ID 0 is the empty cell everywhere in
 * the protocol: a change whose `before` is 0 is an addition, and suggested
 * additions only ever target cells that are currently 0.
 */

export const SCHEMA = "leveltrace-api-v1";

export const EMPTY_TILE = 0;

export type Actor = "HUMAN" | "AGENT";
export type Verdict = "KEEP" | "DELETE";

/** One cell edit: [x, y, tileBefore, tileAfter]. */
export type ChangeTuple = [number, number, number, number];

/** One verdict about an agent-placed tile: [x, y, tile, verdict]. */
export type DecisionTuple = [number, number, number, Verdict];

export interface HealthResponse {
  schema: string;
  status: string;
  fingerprint: string;
  width: number;
  height: number;
  train_sessions: number;
  live_sessions: number;
}

export interface TileInfo {
  id: number;
  name: string;
  glyph: string;
}

export interface LegendResponse {
  schema: string;
  tiles: TileInfo[];
}

export interface SuggestedAddition {
  x: number;
  y: number;
  tile: number;
  glyph: string;
  q: number;
}

export interface SuggestResponse {
  schema: string;
  suggestion_id: string;
  additions: SuggestedAddition[];
}

export interface ExplainResponse {
  schema: string;
  instance_id: number;
  session_id: string;
  filter_index: number;
  modal_count: number;
  layer: number;
  responsible_level: string[];
}

export interface TurnRecord {
  actor: Actor;
  changes: ChangeTuple[];
  decisions: DecisionTuple[];
}

export interface SessionRecord {
  session_id: string;
  initial: string[];
  turns: TurnRecord[];
  final_level: string[];
}

export interface SessionEnvelope {
  schema: string;
  session: SessionRecord;
}

export interface AppendTurnRequest {
  session_id: string;
  actor: Actor;
  changes: ChangeTuple[];
  decisions: DecisionTuple[];
  /** Required on the first append of a new session, ignored afterwards. */
  initial?: string[];
}

export interface ErrorBody {
  schema: string;
  code: string;
  message: string;
}
