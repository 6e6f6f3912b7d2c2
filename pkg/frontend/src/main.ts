/* Entry point: wire the client to the service and mount the review screen.
 * The service origin comes from ?api=... or defaults to the page origin. */

import { ReviewApi } from "./api.js";
import { ReviewApp } from "./app.js";
import { ReviewController } from "./controller.js";

function apiBase(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  return fromQuery ?? window.location.origin;
}

async function boot(): Promise<void> {
  const api = new ReviewApi(apiBase());
  const controller = new ReviewController(api);
  const root = document.getElementById("review");
  if (!root) throw new Error("missing #review mount point");
  new ReviewApp(root, controller);

  await controller.loadManuscripts();
  const ids = controller.manuscripts.map((m) => m.id);
  if (ids.length >= 2) {
    await controller.selectQuery([ids[0], ids[1]], 0);
  }

  const nav = document.getElementById("query-nav");
  if (nav) {
    nav.addEventListener("click", (event) => {
      const target = event.target as HTMLElement;
      const step = target.dataset.step;
      const state = controller.state;
      if (!step || !state.pair || state.query === null) return;
      const next = state.query + (step === "next" ? 1 : -1);
      if (next >= 0) void controller.selectQuery(state.pair, next);
    });
  }
}

void boot();
