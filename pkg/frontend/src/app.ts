/* DOM layer: renders ReviewState and forwards clicks to the controller.
 * Candidates appear in exactly the order the server returned them. */

import type { ReviewController } from "./controller.js";
import type { ReviewState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class ReviewApp {
  private readonly banner: HTMLElement;
  private readonly header: HTMLElement;
  private readonly listNode: HTMLOListElement;
  private readonly footer: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly controller: ReviewController,
  ) {
    this.banner = el("div", "banner offline", "service unreachable; showing the last loaded data");
    this.banner.hidden = true;
    this.header = el("header", "review-header");
    this.listNode = el("ol", "candidates");
    this.footer = el("footer", "review-footer");
    root.replaceChildren(this.banner, this.header, this.listNode, this.footer);
    controller.subscribe((state) => this.render(state));
  }

  private render(state: ReviewState): void {
    this.banner.hidden = !state.offline;
    this.renderHeader(state);
    this.renderCandidates(state);
    this.renderFooter(state);
  }

  private renderHeader(state: ReviewState): void {
    this.header.replaceChildren();
    const pairLabel = state.pair ? `${state.pair[0]} vs ${state.pair[1]}` : "no pair selected";
    this.header.append(el("span", "pair-label", pairLabel));
    if (state.query !== null) {
      const queryId = state.pair ? this.controller.illustrationId(state.pair[0], state.query) : null;
      this.header.append(el("span", "query-label", `query ${queryId ?? `#${state.query}`}`));
    }
    if (state.stale) {
      const badge = el("span", "badge stale", "stale: project advanced, refresh");
      badge.dataset.testid = "stale-badge";
      this.header.append(badge);
    }
    if (state.run === "running") {
      this.header.append(el("span", "badge running", "pipeline running"));
    }
  }

  private renderCandidates(state: ReviewState): void {
    this.listNode.replaceChildren();
    if (!state.list) {
      const li = el("li", "placeholder", state.lastError ?? "no candidates loaded");
      this.listNode.append(li);
      return;
    }
    const [, b] = state.list.pair;
    for (const candidate of state.list.candidates) {
      const li = el("li", "candidate");
      li.dataset.j = String(candidate.j);
      if (candidate.status === "confirmed") li.classList.add("confirmed");
      if (candidate.status === "rejected") li.classList.add("rejected");

      const targetId = this.controller.illustrationId(b, candidate.j);
      if (targetId !== null) {
        const img = el("img", "thumb");
        img.src = this.controller.api.imageUrl(targetId);
        img.alt = targetId;
        li.append(img);
      }
      li.append(el("span", "cand-id", targetId ?? `#${candidate.j}`));
      li.append(el("span", "score", candidate.score.toFixed(3)));

      li.append(
        this.actionButton(state, "confirm", () => this.controller.annotate("confirm", candidate.j)),
        this.actionButton(state, "reject", () => this.controller.annotate("reject", candidate.j)),
        this.actionButton(state, "confirm + repropagate", () => {
          if (state.query !== null) void this.controller.confirmAndRepropagate(state.query, candidate.j);
        }),
      );
      this.listNode.append(li);
    }
  }

  private actionButton(state: ReviewState, label: string, onClick: () => void): HTMLButtonElement {
    const button = el("button", `action ${label.split(" ")[0]}`, label);
    button.disabled = state.busy || state.offline;
    button.addEventListener("click", onClick);
    return button;
  }

  private renderFooter(state: ReviewState): void {
    this.footer.replaceChildren();
    if (state.list) {
      this.footer.append(el("span", "provenance", `ranking: ${state.list.provenance}`));
      this.footer.append(el("span", "revision", `revision ${state.listRevision}`));
    }
    if (state.lastError && state.list) {
      this.footer.append(el("span", "error", state.lastError));
    }
  }
}
