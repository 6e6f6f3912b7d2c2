import { describe, expect, it } from "vitest";

import type { CandidateList } from "../src/api.js";
import {
  clearList,
  initialState,
  observeRevision,
  withCandidates,
  withOffline,
  withRunState,
} from "../src/state.js";

function list(revision: number): CandidateList {
  return {
    revision,
    pair: ["a", "b"],
    query: 2,
    provenance: "propagated",
    candidates: [
      { j: 6, score: 2.9, status: "none" },
      { j: 1, score: 2.7, status: "none" },
    ],
  };
}

describe("initial state", () => {
  it("starts empty, online, not stale", () => {
    const s = initialState();
    expect(s.list).toBeNull();
    expect(s.stale).toBe(false);
    expect(s.offline).toBe(false);
    expect(s.knownRevision).toBe(0);
    expect(s.busy).toBe(false);
  });
});

describe("staleness", () => {
  it("a list is fresh at its own revision", () => {
    const s = withCandidates(initialState(), list(4));
    expect(s.listRevision).toBe(4);
    expect(s.knownRevision).toBe(4);
    expect(s.stale).toBe(false);
  });

  it("a later revision from any response flags the list stale", () => {
    let s = withCandidates(initialState(), list(4));
    s = observeRevision(s, 5);
    expect(s.stale).toBe(true);
    expect(s.knownRevision).toBe(5);
  });

  it("observing an equal or older revision does not flag", () => {
    let s = withCandidates(initialState(), list(4));
    s = observeRevision(s, 4);
    expect(s.stale).toBe(false);
    s = observeRevision(s, 3);
    expect(s.stale).toBe(false);
    expect(s.knownRevision).toBe(4);
  });

  it("refetching at the newer revision clears the flag", () => {
    let s = withCandidates(initialState(), list(4));
    s = observeRevision(s, 7);
    expect(s.stale).toBe(true);
    s = withCandidates(s, list(7));
    expect(s.stale).toBe(false);
    expect(s.listRevision).toBe(7);
  });

  it("a refetch that still trails the known revision stays stale", () => {
    let s = withCandidates(initialState(), list(4));
    s = observeRevision(s, 9);
    s = withCandidates(s, list(7));
    expect(s.stale).toBe(true);
    expect(s.knownRevision).toBe(9);
  });

  it("known revision never decreases", () => {
    let s = observeRevision(initialState(), 6);
    s = observeRevision(s, 2);
    expect(s.knownRevision).toBe(6);
  });
});

describe("candidate list handling", () => {
  it("stores the server ordering untouched", () => {
    const fetched = list(4);
    const s = withCandidates(initialState(), fetched);
    expect(s.list).toBe(fetched);
    expect(s.list!.candidates.map((c) => c.j)).toEqual([6, 1]);
  });

  it("clearList drops the list and its staleness", () => {
    let s = withCandidates(initialState(), list(4));
    s = observeRevision(s, 8);
    s = clearList(s);
    expect(s.list).toBeNull();
    expect(s.listRevision).toBeNull();
    expect(s.stale).toBe(false);
  });
});

describe("connectivity and runs", () => {
  it("offline toggles and a served revision clears it", () => {
    let s = withOffline(initialState(), true);
    expect(s.offline).toBe(true);
    s = observeRevision(s, 1);
    expect(s.offline).toBe(false);
  });

  it("run state carries the error text", () => {
    const s = withRunState(initialState(), "error", "normalize before propagating");
    expect(s.run).toBe("error");
    expect(s.runError).toMatch("normalize");
  });
});
