import { describe, expect, it } from "vitest";

import {
  makeViewTransform,
  normalizedToPixel,
  pointerToTable,
  tableToPixel,
} from "../src/transform.js";

const HALF_W = 0.3048;
const HALF_L = 0.8382;

describe("makeViewTransform", () => {
  it("keeps the full table visible with at least a 5% margin", () => {
    const view = makeViewTransform(640, 900, HALF_W, HALF_L);
    const [left, top] = tableToPixel(-HALF_W, HALF_L, view);
    const [right, bottom] = tableToPixel(HALF_W, -HALF_L, view);
    expect(left).toBeGreaterThanOrEqual(0.05 * 640 - 1e-9);
    expect(right).toBeLessThanOrEqual(0.95 * 640 + 1e-9);
    expect(top).toBeGreaterThanOrEqual(0.05 * 900 - 1e-9);
    expect(bottom).toBeLessThanOrEqual(0.95 * 900 + 1e-9);
  });

  it("preserves the aspect ratio (one scale for both axes)", () => {
    const view = makeViewTransform(1000, 300, HALF_W, HALF_L);
    const [x0] = tableToPixel(0, 0, view);
    const [x1] = tableToPixel(0.1, 0, view);
    const [, y0] = tableToPixel(0, 0, view);
    const [, y1] = tableToPixel(0, 0.1, view);
    expect(Math.abs(x1 - x0)).toBeCloseTo(Math.abs(y1 - y0), 12);
  });

  it("rejects an empty canvas", () => {
    expect(() => makeViewTransform(0, 100, HALF_W, HALF_L)).toThrow();
  });
});

describe("pointerToTable", () => {
  const view = makeViewTransform(640, 900, HALF_W, HALF_L);

  it("maps the drawn table center to (0, 0)", () => {
    const [cx, cy] = tableToPixel(0, 0, view);
    expect(pointerToTable(cx, cy, view)).toEqual([0, 0]);
  });

  it("maps the drawn right edge midline to (1, 0)", () => {
    const [px, py] = tableToPixel(HALF_W, 0, view);
    const [xn, yn] = pointerToTable(px, py, view);
    expect(xn).toBeCloseTo(1, 9);
    expect(yn).toBeCloseTo(0, 9);
  });

  it("maps up-table to positive normalized y (screen y flip)", () => {
    const [px, py] = tableToPixel(0, 0.5, view);
    const [, yn] = pointerToTable(px, py, view);
    expect(yn).toBeGreaterThan(0);
  });

  it("clamps pointers outside the canvas to the nearest coordinate", () => {
    const [xn, yn] = pointerToTable(-50, 10_000, view);
    expect(xn).toBe(-1);
    expect(yn).toBe(-1);
  });

  it("round-trips table -> pixel -> table below 1e-6 normalized units", () => {
    let worst = 0;
    for (let i = 0; i <= 20; i++) {
      for (let k = 0; k <= 20; k++) {
        const xn = -1 + (2 * i) / 20;
        const yn = -1 + (2 * k) / 20;
        const [px, py] = normalizedToPixel(xn, yn, view);
        const [xb, yb] = pointerToTable(px, py, view);
        worst = Math.max(worst, Math.abs(xb - xn), Math.abs(yb - yn));
      }
    }
    expect(worst).toBeLessThan(1e-6);
  });
});
