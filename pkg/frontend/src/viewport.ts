// Viewport math: which cards are inside the scroll window. The poll loop
// reports exactly this set to the server, so the engine's dwell tracking
// and lens decisions see what the user sees.

export interface GridGeometry {
  rowHeightPx: number;
  perRow: number;
  totalCards: number;
}

export function visibleCardRange(
  scrollTop: number,
  viewportHeightPx: number,
  grid: GridGeometry,
): { start: number; end: number } {
  const { rowHeightPx, perRow, totalCards } = grid;
  const totalRows = Math.ceil(totalCards / perRow);
  const firstRow = Math.min(
    totalRows - 1,
    Math.max(0, Math.floor(scrollTop / rowHeightPx)),
  );
  // A row counts as visible while any part of it is inside the window.
  const lastRow = Math.min(
    totalRows - 1,
    Math.ceil((scrollTop + viewportHeightPx) / rowHeightPx) - 1,
  );
  const start = firstRow * perRow;
  const end = Math.min(totalCards, (lastRow + 1) * perRow);
  return { start, end };
}

export function visibleNodes(
  layout: string[],
  scrollTop: number,
  viewportHeightPx: number,
  grid: GridGeometry,
): string[] {
  const { start, end } = visibleCardRange(scrollTop, viewportHeightPx, grid);
  return layout.slice(start, end);
}
