/* Review-screen state and its pure transitions.
 *
 * The candidate list is kept exactly as the server sent it, stamped with the
 * revision it was fetched at. Whenever any later response reveals a higher
 * project revision the list is flagged stale rather than patched locally;
 * only a refetch clears the flag. Nothing here reorders candidates or
 * recomputes scores. */

import type { CandidateList, RunStateName } from "./api.js";

export interface ReviewState {
  pair: [string, string] | null;
  query: number | null;
  list: CandidateList | null;
  /** Revision the list was fetched at; null when no list is loaded. */
  listRevision: number | null;
  /** Highest revision seen in any server response so far. */
  knownRevision: number;
  /** True when the loaded list predates knownRevision. */
  stale: boolean;
  run: RunStateName;
  runError: string | null;
  offline: boolean;
  /** True while a confirm/reject/repropagate round trip is in flight. */
  busy: boolean;
  lastError: string | null;
}

export function initialState(): ReviewState {
  return {
    pair: null,
    query: null,
    list: null,
    listRevision: null,
    knownRevision: 0,
    stale: false,
    run: "idle",
    runError: null,
    offline: false,
    busy: false,
    lastError: null,
  };
}

function recomputeStale(state: ReviewState): ReviewState {
  const stale = state.listRevision !== null && state.listRevision < state.knownRevision;
  return state.stale === stale ? state : { ...state, stale };
}

/** Fold a revision from any response into the state; may raise the stale flag. */
export function observeRevision(state: ReviewState, revision: number): ReviewState {
  if (revision <= state.knownRevision) return recomputeStale(state);
  return recomputeStale({ ...state, knownRevision: revision, offline: false });
}

/** Install a freshly fetched candidate list; clears staleness for it. */
export function withCandidates(state: ReviewState, list: CandidateList): ReviewState {
  const next: ReviewState = {
    ...state,
    pair: list.pair,
    query: list.query,
    list,
    listRevision: list.revision,
    knownRevision: Math.max(state.knownRevision, list.revision),
    offline: false,
    lastError: null,
  };
  return recomputeStale(next);
}

export function withRunState(state: ReviewState, run: RunStateName, error: string | null): ReviewState {
  return { ...state, run, runError: error };
}

export function withOffline(state: ReviewState, offline: boolean): ReviewState {
  return offline === state.offline ? state : { ...state, offline };
}

export function withBusy(state: ReviewState, busy: boolean): ReviewState {
  return busy === state.busy ? state : { ...state, busy };
}

export function withError(state: ReviewState, message: string | null): ReviewState {
  return { ...state, lastError: message };
}

export function clearList(state: ReviewState): ReviewState {
  return { ...state, list: null, listRevision: null, stale: false };
}
