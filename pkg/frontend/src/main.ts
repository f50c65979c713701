// Bootstrap: create (or join) a session, wire the query view, and poll the
// embedding snapshot between answers. Polling keeps the moving scatter in
// sync with single-annotator cadence without push machinery.

import { ApiClient } from "./api.js";
import { SessionController } from "./controller.js";
import { QueryView, SnapshotView } from "./view.js";

const SNAPSHOT_POLL_MS = 2000;

async function start(): Promise<void> {
  const base = new URLSearchParams(window.location.search).get("api") ?? "";
  const api = new ApiClient(base);

  const params = new URLSearchParams(window.location.search);
  let sessionId = params.get("session");
  if (!sessionId) {
    const nItems = Number(params.get("items") ?? 12);
    const created = await api.createSession({
      config: { dim: 2, query_length: 3, cycles: 60, burn_in: 10 },
      n_items: nItems,
    });
    sessionId = created.session_id;
  }

  const controller = new SessionController(api, sessionId);
  new QueryView(document.getElementById("query")!, controller);
  const snapshotView = new SnapshotView(document.getElementById("snapshot")!);

  const poll = async () => {
    try {
      snapshotView.render(await api.snapshot(sessionId!));
    } catch {
      // the next poll retries; the query view surfaces real errors
    }
  };
  controller.onChange((e) => {
    if (e.phase === "idle") {
      void poll();
    }
  });
  window.setInterval(poll, SNAPSHOT_POLL_MS);

  await controller.loadNext();
  await poll();
}

void start();
