/**
 * DOM layer: builds the editor page skeleton, renders EditorCore state into
 * it, and wires pointer events back to core operations.
 *
 * The view is a full-redraw renderer: every operation ends with render(),
 * which rebuilds the working grid, the suggestion list, and the explanation
 * panel from core state.  Async operations funnel through one gate that
 * disables the toolbar while a service call is in flight and reports
 * failures in the status line; tests await idle() to observe the settled
 * state.  The raw explanation text is rendered with textContent so the page
 * shows exactly the bytes the service sent.
 */

import { EditorCore } from "./editor.js";
import { TileInfo, Verdict } from "./protocol.js";

const SHELL_HTML = `
  <header class="topbar">
    <span class="title">level editor</span>
    <span id="status" class="status"></span>
  </header>
  <div class="toolbar">
    <button id="btn-commit" type="button">end turn</button>
    <button id="btn-suggest" type="button">suggest</button>
    <button id="btn-apply" type="button">apply verdicts</button>
    <button id="btn-dismiss" type="button">dismiss</button>
    <button id="btn-explain" type="button">explain</button>
  </div>
  <div id="palette" class="palette"></div>
  <main class="workspace">
    <section class="board">
      <h2>working level</h2>
      <div id="grid" class="grid"></div>
      <ul id="suggestion" class="suggestion-list"></ul>
    </section>
    <section class="board">
      <h2>most responsible level</h2>
      <div id="explanation-meta" class="explanation-meta"></div>
      <div id="explanation-grid" class="grid mini"></div>
      <pre id="explanation-raw" class="explanation-raw"></pre>
    </section>
  </main>
`;

export function renderShell(root: HTMLElement): void {
  root.innerHTML = SHELL_HTML;
}

function mustFind<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const el = root.querySelector(selector);
  if (!el) {
    throw new Error(`shell is missing ${selector}`);
  }
  return el as T;
}

export class EditorView {
  private readonly statusEl: HTMLElement;
  private readonly paletteEl: HTMLElement;
  private readonly gridEl: HTMLElement;
  private readonly suggestionEl: HTMLElement;
  private readonly explainMetaEl: HTMLElement;
  private readonly explainGridEl: HTMLElement;
  private readonly explainRawEl: HTMLElement;
  private readonly buttons: Record<string, HTMLButtonElement>;

  private selectedTile: number;
  private busy = 0;
  private opChain: Promise<void> = Promise.resolve();

  constructor(
    root: HTMLElement,
    private readonly core: EditorCore,
    tiles: TileInfo[],
  ) {
    this.statusEl = mustFind(root, "#status");
    this.paletteEl = mustFind(root, "#palette");
    this.gridEl = mustFind(root, "#grid");
    this.suggestionEl = mustFind(root, "#suggestion");
    this.explainMetaEl = mustFind(root, "#explanation-meta");
    this.explainGridEl = mustFind(root, "#explanation-grid");
    this.explainRawEl = mustFind(root, "#explanation-raw");
    this.buttons = {
      commit: mustFind(root, "#btn-commit"),
      suggest: mustFind(root, "#btn-suggest"),
      apply: mustFind(root, "#btn-apply"),
      dismiss: mustFind(root, "#btn-dismiss"),
      explain: mustFind(root, "#btn-explain"),
    };
    this.selectedTile = tiles[0]?.id ?? 0;
    this.buildPalette(tiles);
    this.wireToolbar();
    this.gridEl.addEventListener("click", (e) => this.onGridClick(e));
    this.suggestionEl.addEventListener("click", (e) => this.onSuggestionClick(e));
    this.render();
  }

  /** Resolves once every operation started so far has settled. */
  idle(): Promise<void> {
    return this.opChain;
  }

  get paletteSelection(): number {
    return this.selectedTile;
  }

  private buildPalette(tiles: TileInfo[]): void {
    for (const tile of tiles) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = `swatch t-${tile.id}`;
      btn.dataset.tile = String(tile.id);
      btn.title = tile.name;
      btn.textContent = tile.glyph;
      btn.addEventListener("click", () => {
        this.selectedTile = tile.id;
        this.render();
      });
      this.paletteEl.appendChild(btn);
    }
  }

  private wireToolbar(): void {
    this.buttons.commit!.addEventListener("click", () => this.runOp("end turn", () => this.core.commitTurn()));
    this.buttons.suggest!.addEventListener("click", () =>
      this.runOp("suggest", async () => {
        const response = await this.core.requestSuggestion();
        if (response.additions.length === 0) {
          this.setStatus("the agent has nothing to add");
        }
      }),
    );
    this.buttons.apply!.addEventListener("click", () => this.runOp("apply", () => this.core.resolveSuggestion()));
    this.buttons.dismiss!.addEventListener("click", () => this.runOp("dismiss", () => this.core.dismissSuggestion()));
    this.buttons.explain!.addEventListener("click", () =>
      this.runOp("explain", async () => {
        await this.core.requestExplanation();
      }),
    );
  }

  private runOp(name: string, op: () => Promise<void>): Promise<void> {
    const run = async () => {
      this.busy += 1;
      this.setStatus(`${name}...`);
      this.render();
      try {
        await op();
        if (this.statusEl.textContent === `${name}...`) {
          this.setStatus("");
        }
      } catch (err) {
        this.setStatus(err instanceof Error ? err.message : String(err));
      } finally {
        this.busy -= 1;
        this.render();
      }
    };
    this.opChain = this.opChain.then(run);
    return this.opChain;
  }

  private setStatus(text: string): void {
    this.statusEl.textContent = text;
  }

  private onGridClick(e: Event): void {
    const cell = (e.target as HTMLElement).closest<HTMLElement>(".cell");
    if (!cell || this.busy > 0) {
      return;
    }
    const x = Number(cell.dataset.x);
    const y = Number(cell.dataset.y);
    const pending = this.core.suggestion;
    if (pending) {
      const index = pending.items.findIndex(({ addition }) => addition.x === x && addition.y === y);
      if (index >= 0) {
        this.toggleVerdict(index);
      }
      return;
    }
    try {
      this.core.editTile(x, y, this.selectedTile);
      this.setStatus("");
    } catch (err) {
      this.setStatus(err instanceof Error ? err.message : String(err));
    }
    this.render();
  }

  private onSuggestionClick(e: Event): void {
    const item = (e.target as HTMLElement).closest<HTMLElement>("[data-index]");
    if (!item || this.busy > 0 || !this.core.suggestion) {
      return;
    }
    this.toggleVerdict(Number(item.dataset.index));
  }

  private toggleVerdict(index: number): void {
    const pending = this.core.suggestion;
    if (!pending) {
      return;
    }
    const verdict: Verdict = pending.items[index]?.verdict === "KEEP" ? "DELETE" : "KEEP";
    this.core.setVerdict(index, verdict);
    this.render();
  }

  render(): void {
    this.renderGrid();
    this.renderSuggestionList();
    this.renderExplanation();
    const pending = this.core.suggestion !== null;
    const disabled = this.busy > 0;
    this.buttons.commit!.disabled = disabled || pending;
    this.buttons.suggest!.disabled = disabled || pending;
    this.buttons.apply!.disabled = disabled || !pending;
    this.buttons.dismiss!.disabled = disabled || !pending;
    this.buttons.explain!.disabled = disabled;
    for (const swatch of this.paletteEl.querySelectorAll<HTMLElement>(".swatch")) {
      swatch.classList.toggle("selected", Number(swatch.dataset.tile) === this.selectedTile);
    }
  }

  private renderGrid(): void {
    const rows = this.core.grid;
    const overlay = new Map<string, { glyph: string; verdict: Verdict }>();
    for (const { addition, verdict } of this.core.suggestion?.items ?? []) {
      overlay.set(`${addition.x},${addition.y}`, { glyph: addition.glyph, verdict });
    }
    this.gridEl.style.setProperty("--columns", String(this.core.width));
    this.gridEl.innerHTML = "";
    for (let y = 0; y < this.core.height; y++) {
      for (let x = 0; x < this.core.width; x++) {
        const cell = document.createElement("div");
        const suggested = overlay.get(`${x},${y}`);
        if (suggested) {
          cell.className = `cell suggested ${suggested.verdict.toLowerCase()} t-${this.core.tileAt(x, y)}`;
          cell.textContent = suggested.glyph;
        } else {
          const id = this.core.tileAt(x, y);
          cell.className = `cell t-${id}`;
          cell.textContent = rows[y]!.charAt(x);
        }
        cell.dataset.x = String(x);
        cell.dataset.y = String(y);
        this.gridEl.appendChild(cell);
      }
    }
  }

  private renderSuggestionList(): void {
    this.suggestionEl.innerHTML = "";
    const pending = this.core.suggestion;
    if (!pending) {
      return;
    }
    pending.items.forEach(({ addition, verdict }, index) => {
      const li = document.createElement("li");
      li.dataset.index = String(index);
      li.className = `suggestion-item ${verdict.toLowerCase()}`;
      li.textContent =
        `${verdict} ${addition.glyph} at (${addition.x}, ${addition.y}) q=${addition.q.toFixed(3)}`;
      this.suggestionEl.appendChild(li);
    });
  }

  private renderExplanation(): void {
    const panel = this.core.panel;
    this.explainMetaEl.textContent = "";
    this.explainGridEl.innerHTML = "";
    this.explainRawEl.textContent = "";
    if (!panel) {
      return;
    }
    const r = panel.response;
    this.explainMetaEl.textContent =
      `session ${r.session_id} / instance ${r.instance_id} / ` +
      `filter ${r.filter_index} (layer ${r.layer}, modal count ${r.modal_count}) / ` +
      `matched ${panel.matchedCount} of ${panel.additionPatchCount} addition patches`;
    const level = r.responsible_level;
    const width = level[0]?.length ?? 0;
    const matched = new Set<string>();
    for (const w of panel.matches) {
      for (let dy = 0; dy < 3; dy++) {
        for (let dx = 0; dx < 3; dx++) {
          matched.add(`${w.x + dx},${w.y + dy}`);
        }
      }
    }
    this.explainGridEl.style.setProperty("--columns", String(width));
    for (let y = 0; y < level.length; y++) {
      for (let x = 0; x < width; x++) {
        const glyph = level[y]!.charAt(x);
        const id = this.core.legend.glyphToId.get(glyph);
        const cell = document.createElement("div");
        cell.className = `cell t-${id ?? 0}` + (matched.has(`${x},${y}`) ? " match" : "");
        cell.textContent = glyph;
        this.explainGridEl.appendChild(cell);
      }
    }
    this.explainRawEl.textContent = panel.rawText;
  }
}
