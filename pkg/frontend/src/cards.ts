// Card display logic. A card's state derives solely from the latest poll
// response: under-computation means invisible (grey overlay + spinner),
// the server's stale flag means a "stale" badge, anything else is fresh.
// No client-side freshness inference.

import type { ViewState } from "./api.js";

export type DisplayState = "fresh" | "stale" | "invisible";

export interface ViewCard {
  id: string;
  display: DisplayState;
  versionLabel: string;
  payload: string | null;
}

export function displayState(state: ViewState): DisplayState {
  if (state.kind === "uc") {
    return "invisible";
  }
  return state.stale ? "stale" : "fresh";
}

export function toCard(state: ViewState): ViewCard {
  return {
    id: state.id,
    display: displayState(state),
    versionLabel: `v${state.version}`,
    payload: state.kind === "result" ? state.payload : null,
  };
}

// Deterministic mock sparkline heights (the demo renders no real charts):
// version-seeded so a card visibly changes when its result version does.
export function sparklineBars(id: string, version: number, bars = 12): number[] {
  let seed = version * 2654435761;
  for (const ch of id) {
    seed = (seed * 31 + ch.charCodeAt(0)) >>> 0;
  }
  const heights: number[] = [];
  for (let i = 0; i < bars; i++) {
    seed = (seed * 1103515245 + 12345) >>> 0;
    heights.push(20 + (seed % 80));
  }
  return heights;
}
