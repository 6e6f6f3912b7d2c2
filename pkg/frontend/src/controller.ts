/* Orchestrates the review workflow against the service.
 *
 * Mutations are never reflected locally before the server answers: a confirm
 * or reject round-trips to the server and then refetches the candidate list,
 * so the screen always shows a server-produced ranking. */

import { ApiError, OfflineError, ReviewApi } from "./api.js";
import type { CandidateList, ManuscriptListing, RunStatus } from "./api.js";
import {
  ReviewState,
  clearList,
  initialState,
  observeRevision,
  withBusy,
  withCandidates,
  withError,
  withOffline,
  withRunState,
} from "./state.js";

export interface ControllerOptions {
  /** Delay between status polls, milliseconds. */
  pollMs: number;
  /** Give up polling after this many attempts. */
  pollLimit: number;
  k: number;
}

const DEFAULTS: ControllerOptions = { pollMs: 250, pollLimit: 240, k: 5 };

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ReviewController {
  state: ReviewState = initialState();
  manuscripts: ManuscriptListing["manuscripts"] = [];
  private readonly opts: ControllerOptions;
  private readonly listeners: ((state: ReviewState) => void)[] = [];

  constructor(
    readonly api: ReviewApi,
    options: Partial<ControllerOptions> = {},
  ) {
    this.opts = { ...DEFAULTS, ...options };
  }

  subscribe(listener: (state: ReviewState) => void): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private set(state: ReviewState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  private fail(error: unknown): void {
    if (error instanceof OfflineError) {
      this.set(withOffline(this.state, true));
      return;
    }
    if (error instanceof ApiError) {
      this.set(withError(withOffline(this.state, false), error.message));
      return;
    }
    throw error;
  }

  async loadManuscripts(): Promise<void> {
    try {
      const listing = await this.api.manuscripts();
      this.manuscripts = listing.manuscripts;
      this.set(observeRevision(withOffline(this.state, false), listing.revision));
    } catch (error) {
      this.fail(error);
    }
  }

  illustrationId(manuscript: string, index: number): string | null {
    const entry = this.manuscripts.find((m) => m.id === manuscript);
    return entry && index >= 0 && index < entry.illustrations.length ? entry.illustrations[index] : null;
  }

  /** Fetch (or refetch) the candidate list for one query illustration. */
  async selectQuery(pair: [string, string], query: number): Promise<void> {
    try {
      const list: CandidateList = await this.api.candidates(pair[0], pair[1], query, this.opts.k);
      this.set(withCandidates(this.state, list));
    } catch (error) {
      if (error instanceof ApiError) this.set(clearList(this.state));
      this.fail(error);
    }
  }

  async refresh(): Promise<void> {
    if (this.state.pair && this.state.query !== null) {
      await this.selectQuery(this.state.pair, this.state.query);
    }
  }

  /** Annotate, then refetch the list so the ranking stays server-made. */
  async annotate(kind: "confirm" | "reject", j: number): Promise<void> {
    if (!this.state.pair || this.state.query === null || this.state.busy) return;
    const [a, b] = this.state.pair;
    this.set(withBusy(this.state, true));
    try {
      const out =
        kind === "confirm"
          ? await this.api.confirm(a, b, this.state.query, j)
          : await this.api.reject(a, b, this.state.query, j);
      this.set(observeRevision(this.state, out.revision));
      await this.refresh();
    } catch (error) {
      this.fail(error);
    } finally {
      this.set(withBusy(this.state, false));
    }
  }

  /** Confirm one pair, re-run propagation and matching, refetch candidates.
   *
   * The sequence is: POST confirm, POST run {propagate, match}, poll the
   * status endpoint until the run settles, then refetch. The intermediate
   * statuses are surfaced so the screen can show the run in flight. */
  async confirmAndRepropagate(i: number, j: number): Promise<void> {
    if (!this.state.pair || this.state.busy) return;
    const [a, b] = this.state.pair;
    this.set(withBusy(this.state, true));
    try {
      const confirmed = await this.api.confirm(a, b, i, j);
      this.set(observeRevision(this.state, confirmed.revision));
      const accepted = await this.api.run(a, b, ["propagate", "match"]);
      this.set(withRunState(observeRevision(this.state, accepted.revision), accepted.state, null));
      const settled = await this.pollUntilSettled(a, b);
      if (settled.state === "error") {
        this.set(withError(this.state, settled.error ?? "pipeline run failed"));
      }
      await this.refresh();
    } catch (error) {
      this.fail(error);
    } finally {
      this.set(withBusy(this.state, false));
    }
  }

  private async pollUntilSettled(a: string, b: string): Promise<RunStatus> {
    for (let attempt = 0; attempt < this.opts.pollLimit; attempt++) {
      const status = await this.api.status(a, b);
      this.set(withRunState(observeRevision(this.state, status.revision), status.state, status.error));
      if (status.state === "done" || status.state === "error" || status.state === "idle") {
        return status;
      }
      await sleep(this.opts.pollMs);
    }
    throw new OfflineError(new Error("run status never settled"));
  }
}
