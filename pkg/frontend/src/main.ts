/**
 * Page bootstrap: read the service address, fetch grid dimensions and the
 * tile legend, and mount the editor.
 *
 * The service address comes from the `service` query parameter and falls
 * back to the level service's default local bind.  A fresh page load starts
 * a fresh co-creation session; the session id ties together every turn the
 * page logs.
 */

import { ServiceClient } from "./client.js";
import { EditorCore } from "./editor.js";
import { buildLegend } from "./grid.js";
import { EditorView, renderShell } from "./ui.js";

const DEFAULT_SERVICE = "http://127.0.0.1:8642";

function newSessionId(): string {
  const stamp = typeof crypto.randomUUID === "function"
    ? crypto.randomUUID()
    : `${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
  return `editor-${stamp}`;
}

async function boot(root: HTMLElement): Promise<void> {
  const serviceUrl = new URLSearchParams(location.search).get("service") ?? DEFAULT_SERVICE;
  const client = new ServiceClient(serviceUrl);
  const health = await client.health();
  const legendResponse = await client.legend();
  const core = new EditorCore(client, {
    sessionId: newSessionId(),
    legend: buildLegend(legendResponse.tiles),
    width: health.width,
    height: health.height,
  });
  renderShell(root);
  new EditorView(root, core, legendResponse.tiles);
  const status = root.querySelector("#status");
  if (status) {
    status.textContent = `connected to ${serviceUrl} (${health.width}x${health.height}, ` +
      `${health.train_sessions} training sessions)`;
  }
}

const appRoot = document.getElementById("app");
if (appRoot) {
  boot(appRoot).catch((err) => {
    appRoot.textContent = `cannot reach the level service: ${err instanceof Error ? err.message : String(err)}`;
  });
}
