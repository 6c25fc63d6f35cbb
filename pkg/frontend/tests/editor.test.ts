import { beforeEach, describe, expect, it } from "vitest";

import { EditorCore, EditorStateError } from "../src/editor.js";
import { buildLegend } from "../src/grid.js";
import { DecisionTuple, SuggestedAddition } from "../src/protocol.js";
import { addition, FAKE_TILES, FakeService } from "./fakeservice.js";

const WIDTH = 8;
const HEIGHT = 7;
const LEGEND = buildLegend(FAKE_TILES);

function newEditor(service: FakeService, sessionId = "s-1"): EditorCore {
  return new EditorCore(service, {
    sessionId,
    legend: LEGEND,
    width: WIDTH,
    height: HEIGHT,
  });
}

describe("local editing", () => {
  let service: FakeService;
  let core: EditorCore;

  beforeEach(() => {
    service = new FakeService(FAKE_TILES, WIDTH, HEIGHT);
    core = newEditor(service);
  });

  it("starts from an all-empty grid", () => {
    expect(core.grid).toEqual(Array.from({ length: HEIGHT }, () => "-".repeat(WIDTH)));
  });

  it("places, erases and buffers edits until commit", async () => {
    core.editTile(2, 3, 2);
    core.editTile(2, 3, 3);
    core.editTile(5, 1, 1);
    core.editTile(5, 1, 0);
    expect(core.grid[3]).toBe("--o-----");
    expect(core.uncommittedEdits).toEqual([[2, 3, 0, 3]]);
    expect(service.appends).toHaveLength(0);
    await core.commitTurn();
    expect(service.appends).toHaveLength(1);
    expect(service.appends[0]).toMatchObject({
      actor: "HUMAN",
      changes: [[2, 3, 0, 3]],
      decisions: [],
      initial: core.initial,
    });
  });

  it("rejects unknown tiles and out-of-bounds cells", () => {
    expect(() => core.editTile(0, 0, 42)).toThrow(EditorStateError);
    expect(() => core.editTile(WIDTH, 0, 1)).toThrow(/outside/);
  });

  it("skips a committed turn when every edit was undone", async () => {
    core.editTile(1, 1, 2);
    core.editTile(1, 1, 0);
    await core.commitTurn();
    expect(service.appends).toHaveLength(0);
  });

  it("sends the initial level only on the first append", async () => {
    core.editTile(0, 0, 1);
    await core.commitTurn();
    core.editTile(1, 0, 1);
    await core.commitTurn();
    expect(service.appends[0]!.initial).toBeDefined();
    expect(service.appends[1]!.initial).toBeUndefined();
  });

  it("keeps failed commits in the buffer for a retry", async () => {
    core.editTile(0, 0, 1);
    service.failNext("appendTurn", "store offline");
    await expect(core.commitTurn()).rejects.toThrow("store offline");
    expect(core.uncommittedEdits).toEqual([[0, 0, 0, 1]]);
    expect(core.grid[0]).toBe("X-------");
    await core.commitTurn();
    expect(service.appends).toHaveLength(1);
    expect(core.replayLocal()).toEqual(core.grid);
  });
});

describe("suggestions", () => {
  let service: FakeService;
  let core: EditorCore;
  const plan: SuggestedAddition[] = [
    addition(0, 2, 2, "S", 1.01),
    addition(1, 1, 3, "o", 0.99),
    addition(0, 1, 3, "o", 0.97),
  ];

  beforeEach(() => {
    service = new FakeService(FAKE_TILES, WIDTH, HEIGHT);
    core = newEditor(service);
    service.suggestPlan = [plan.map((a) => ({ ...a }))];
  });

  async function placeFloorAndSuggest(): Promise<void> {
    for (let x = 0; x < WIDTH; x++) {
      core.editTile(x, HEIGHT - 1, 1);
    }
    await core.requestSuggestion();
  }

  it("auto-commits buffered edits before asking the agent", async () => {
    await placeFloorAndSuggest();
    expect(service.appends).toHaveLength(1);
    expect(service.appends[0]!.actor).toBe("HUMAN");
    expect(service.appends[0]!.changes).toHaveLength(WIDTH);
  });

  it("stages additions as an overlay with KEEP defaults", async () => {
    await placeFloorAndSuggest();
    const pending = core.suggestion!;
    expect(pending.suggestionId).toBe("fake-sug-1");
    expect(pending.items.map((it) => it.verdict)).toEqual(["KEEP", "KEEP", "KEEP"]);
    // the overlay is not part of the committed grid
    expect(core.grid[2]).toBe("-".repeat(WIDTH));
    expect(core.replayLocal()).toEqual(core.grid);
  });

  it("blocks editing and re-requesting while one is pending", async () => {
    await placeFloorAndSuggest();
    expect(() => core.editTile(0, 0, 1)).toThrow(/pending suggestion/);
    await expect(core.requestSuggestion()).rejects.toThrow(/already pending/);
  });

  it("leaves nothing pending when the agent has no additions", async () => {
    service.suggestPlan = [[]];
    core.editTile(0, 0, 1);
    const response = await core.requestSuggestion();
    expect(response.additions).toEqual([]);
    expect(core.suggestion).toBeNull();
    core.editTile(1, 0, 1);
  });

  it("resolves keeps into the grid and logs one decision per item", async () => {
    await placeFloorAndSuggest();
    core.setVerdict(2, "DELETE");
    await core.resolveSuggestion();

    expect(core.suggestion).toBeNull();
    expect(core.grid[2]).toBe("S-------");
    expect(core.grid[1]).toBe("-o------");

    expect(service.appends.map((a) => a.actor)).toEqual(["HUMAN", "AGENT", "HUMAN"]);
    const agent = service.appends[1]!;
    expect(agent.changes).toEqual([
      [0, 2, 0, 2],
      [1, 1, 0, 3],
      [0, 1, 0, 3],
    ]);
    expect(agent.decisions).toEqual([]);
    const verdicts = service.appends[2]!;
    expect(verdicts.changes).toEqual([[0, 1, 3, 0]]);
    expect(verdicts.decisions).toEqual([
      [0, 2, 2, "KEEP"],
      [1, 1, 3, "KEEP"],
      [0, 1, 3, "DELETE"],
    ] satisfies DecisionTuple[]);

    const record = service.sessionRecord("s-1");
    expect(record.final_level).toEqual(core.grid);
    expect(core.replayLocal()).toEqual(core.grid);
  });

  it("dismiss deletes every addition and still records the verdicts", async () => {
    await placeFloorAndSuggest();
    const before = core.grid;
    await core.dismissSuggestion();
    expect(core.grid).toEqual(before);
    const verdicts = service.appends.at(-1)!;
    expect(verdicts.decisions.map((d) => d[3])).toEqual(["DELETE", "DELETE", "DELETE"]);
    expect(verdicts.changes).toHaveLength(3);
    expect(service.sessionRecord("s-1").final_level).toEqual(core.grid);
  });

  it("rolls back and retries cleanly when the agent append fails", async () => {
    await placeFloorAndSuggest();
    const before = core.grid;
    service.failNext("appendTurn", "agent append down");
    await expect(core.resolveSuggestion()).rejects.toThrow("agent append down");
    expect(core.grid).toEqual(before);
    expect(core.suggestion).not.toBeNull();
    expect(core.suggestion!.agentTurnLogged).toBe(false);
    expect(service.agentAppendCount()).toBe(0);

    await core.resolveSuggestion();
    expect(service.agentAppendCount()).toBe(1);
    expect(core.suggestion).toBeNull();
    expect(service.sessionRecord("s-1").final_level).toEqual(core.grid);
  });

  it("does not re-log the agent turn when only the verdict append failed", async () => {
    await placeFloorAndSuggest();
    const before = core.grid;
    service.passNext("appendTurn");
    service.failNext("appendTurn", "verdict append down");
    await expect(core.resolveSuggestion()).rejects.toThrow("verdict append down");
    expect(core.grid).toEqual(before);
    expect(core.suggestion).not.toBeNull();
    expect(core.suggestion!.agentTurnLogged).toBe(true);
    expect(service.agentAppendCount()).toBe(1);

    await core.resolveSuggestion();
    expect(service.agentAppendCount()).toBe(1);
    expect(core.suggestion).toBeNull();
    expect(core.replayLocal()).toEqual(core.grid);
    expect(service.sessionRecord("s-1").final_level).toEqual(core.grid);
  });
});

describe("explanations", () => {
  let service: FakeService;
  let core: EditorCore;

  beforeEach(() => {
    service = new FakeService(FAKE_TILES, WIDTH, HEIGHT);
    core = newEditor(service);
  });

  it("keeps the service bytes untouched", async () => {
    service.explainText = '{   "spacing": "preserved",\n  "schema": "x"}';
    const panel = await core.requestExplanation();
    expect(panel.rawText).toBe('{   "spacing": "preserved",\n  "schema": "x"}');
  });

  it("probes the pre-suggestion state, also after resolving", async () => {
    for (let x = 0; x < WIDTH; x++) {
      core.editTile(x, HEIGHT - 1, 1);
    }
    service.suggestPlan = [[addition(0, 2, 2, "S"), addition(1, 2, 2, "S")]];
    await core.requestSuggestion();
    const probe = core.suggestion!.baseLevel;
    core.setVerdict(1, "DELETE");
    await core.resolveSuggestion();
    const panel = await core.requestExplanation();
    expect(panel.probeLevel).toEqual(probe);
    expect(panel.probeLevel[2]).toBe("-".repeat(WIDTH));
  });

  it("highlights responsible-level windows that match addition patches", async () => {
    service.suggestPlan = [[addition(1, 1, 2, "S")]];
    service.explainLevel = ["--------", "-S------", "--------", "----S---", "--------", "--------", "--------"];
    await core.requestSuggestion();
    const panel = await core.requestExplanation();
    // A lone brick at (1, 1) yields four action patches (one per window that
    // reaches the cell).  The level's own brick at (1, 1) matches all four,
    // row-major; the second brick's windows find the budget already spent.
    expect(panel.additionPatchCount).toBe(4);
    expect(panel.matchedCount).toBe(4);
    expect(panel.matches.map((w) => [w.x, w.y])).toEqual([
      [0, 0],
      [1, 0],
      [0, 1],
      [1, 1],
    ]);
  });

  it("reports no matches without any suggestion", async () => {
    core.editTile(3, 3, 2);
    const panel = await core.requestExplanation();
    expect(panel.matches).toEqual([]);
    expect(panel.additionPatchCount).toBe(0);
    expect(panel.probeLevel).toEqual(core.grid);
  });
});

describe("replay invariant under random operation sequences", () => {
  function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
      a = (a + 0x6d2b79f5) >>> 0;
      let t = a;
      t = Math.imul(t ^ (t >>> 15), t | 1);
      t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
      return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
  }

  it("grid equals logged replay plus the local buffer after every op", async () => {
    for (const seed of [7, 19, 23]) {
      const rand = mulberry32(seed);
      const service = new FakeService(FAKE_TILES, WIDTH, HEIGHT);
      const core = newEditor(service, `soak-${seed}`);
      let resolvedAdditions = 0;
      for (let step = 0; step < 160; step++) {
        const roll = rand();
        if (core.suggestion) {
          for (const [i] of core.suggestion.items.entries()) {
            core.setVerdict(i, rand() < 0.5 ? "KEEP" : "DELETE");
          }
          resolvedAdditions += core.suggestion.items.length;
          if (roll < 0.5) {
            await core.resolveSuggestion();
          } else {
            await core.dismissSuggestion();
          }
        } else if (roll < 0.55) {
          const x = Math.floor(rand() * WIDTH);
          const y = Math.floor(rand() * HEIGHT);
          const tile = Math.floor(rand() * FAKE_TILES.length);
          core.editTile(x, y, tile);
        } else if (roll < 0.75) {
          await core.commitTurn();
        } else {
          const empties: [number, number][] = [];
          const rows = core.grid;
          for (let y = 0; y < HEIGHT; y++) {
            for (let x = 0; x < WIDTH; x++) {
              if (rows[y]!.charAt(x) === "-" && !core.uncommittedEdits.some(([ex, ey]) => ex === x && ey === y)) {
                empties.push([x, y]);
              }
            }
          }
          const n = Math.min(empties.length, Math.floor(rand() * 4));
          const additions: SuggestedAddition[] = [];
          for (let i = 0; i < n; i++) {
            const at = Math.floor(rand() * empties.length);
            const [x, y] = empties.splice(at, 1)[0]!;
            const tile = 1 + Math.floor(rand() * (FAKE_TILES.length - 1));
            additions.push(addition(x, y, tile, FAKE_TILES[tile]!.glyph, rand()));
          }
          service.suggestPlan = [additions];
          await core.requestSuggestion();
        }
        expect(core.replayLocal()).toEqual(core.grid);
      }
      if (core.suggestion) {
        resolvedAdditions += core.suggestion.items.length;
        await core.dismissSuggestion();
      }
      await core.commitTurn();
      if (service.appends.length > 0) {
        expect(service.sessionRecord(`soak-${seed}`).final_level).toEqual(core.grid);
      }
      const decisionsLogged = service.appends.reduce((n, a) => n + a.decisions.length, 0);
      expect(decisionsLogged).toBe(resolvedAdditions);
    }
  });
});
