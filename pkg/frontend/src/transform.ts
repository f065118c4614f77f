// Canvas <-> table mapping. Table coordinates are meters with the origin at the
// table center and +y pointing up-table; the canvas draws +y upward (screen -y).

export interface ViewTransform {
  canvasWidth: number;
  canvasHeight: number;
  halfWidth: number;   // table half extent, m (x)
  halfLength: number;  // table half extent, m (y)
  scale: number;       // px per m
  originX: number;     // px of table (0, 0)
  originY: number;
}

/** Fit the full table into the canvas, aspect preserved, with a margin on every side. */
export function makeViewTransform(
  canvasWidth: number,
  canvasHeight: number,
  halfWidth: number,
  halfLength: number,
  margin = 0.05,
): ViewTransform {
  if (canvasWidth <= 0 || canvasHeight <= 0) throw new Error("empty canvas");
  const usableW = canvasWidth * (1 - 2 * margin);
  const usableH = canvasHeight * (1 - 2 * margin);
  const scale = Math.min(usableW / (2 * halfWidth), usableH / (2 * halfLength));
  if (scale <= 0) throw new Error("degenerate view transform");
  return {
    canvasWidth,
    canvasHeight,
    halfWidth,
    halfLength,
    scale,
    originX: canvasWidth / 2,
    originY: canvasHeight / 2,
  };
}

/** Table meters -> canvas pixels. */
export function tableToPixel(x: number, y: number, view: ViewTransform): [number, number] {
  return [view.originX + x * view.scale, view.originY - y * view.scale];
}

const clamp = (v: number) => Math.max(-1, Math.min(1, v));

/** Canvas pixels -> normalized table coords in [-1, 1]^2 (clamped at the edges). */
export function pointerToTable(px: number, py: number, view: ViewTransform): [number, number] {
  const x = (px - view.originX) / view.scale;
  const y = (view.originY - py) / view.scale;
  return [clamp(x / view.halfWidth), clamp(y / view.halfLength)];
}

/** Normalized table coords -> canvas pixels (inverse of pointerToTable inside bounds). */
export function normalizedToPixel(xn: number, yn: number, view: ViewTransform): [number, number] {
  return tableToPixel(xn * view.halfWidth, yn * view.halfLength, view);
}
