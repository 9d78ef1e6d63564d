import { describe, expect, it } from "vitest";

import type { ViewState } from "../src/api.js";
import { displayState, sparklineBars, toCard } from "../src/cards.js";

function state(partial: Partial<ViewState>): ViewState {
  return {
    id: "q01",
    kind: "result",
    version: 1,
    stale: false,
    payload: "q01@v1",
    ...partial,
  };
}

describe("displayState", () => {
  it("is invisible exactly when the poll returned under-computation", () => {
    expect(displayState(state({ kind: "uc", payload: null }))).toBe("invisible");
    // even a uc flagged stale stays invisible: no client-side inference
    expect(displayState(state({ kind: "uc", stale: true, payload: null }))).toBe(
      "invisible",
    );
  });

  it("shows the server's stale flag on results", () => {
    expect(displayState(state({ stale: true }))).toBe("stale");
    expect(displayState(state({ stale: false }))).toBe("fresh");
  });
});

describe("toCard", () => {
  it("labels the returned version and keeps the payload token", () => {
    const card = toCard(state({ version: 3, payload: "q01@v3" }));
    expect(card.versionLabel).toBe("v3");
    expect(card.payload).toBe("q01@v3");
    expect(card.display).toBe("fresh");
  });

  it("drops the payload for invisible cards", () => {
    const card = toCard(state({ kind: "uc", payload: null }));
    expect(card.payload).toBeNull();
  });
});

describe("sparklineBars", () => {
  it("is deterministic per (id, version) and changes across versions", () => {
    expect(sparklineBars("q05", 2)).toEqual(sparklineBars("q05", 2));
    expect(sparklineBars("q05", 2)).not.toEqual(sparklineBars("q05", 3));
    expect(sparklineBars("q05", 2)).not.toEqual(sparklineBars("q06", 2));
  });

  it("emits the requested number of bounded heights", () => {
    const bars = sparklineBars("q01", 1, 7);
    expect(bars).toHaveLength(7);
    for (const h of bars) {
      expect(h).toBeGreaterThanOrEqual(20);
      expect(h).toBeLessThanOrEqual(100);
    }
  });
});
