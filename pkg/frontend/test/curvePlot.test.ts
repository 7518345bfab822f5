import { describe, expect, it } from "vitest";

import {
  buildOverlay,
  clamp01,
  curvePoints,
  expectedCurve,
  overlaySvg,
  polylinePath,
} from "../src/curvePlot.js";

describe("curve overlay", () => {
  it("lays out two 11-point curves with values clamped to [0, 1]", () => {
    const predicted = [
      -0.2, 0.1, 0.4, 0.8, 1.3, 0.9, 0.5, 0.2, 0.05, 0.01, 1.0,
    ];
    const overlay = buildOverlay(predicted, 4);
    expect(overlay.predicted).toHaveLength(11);
    expect(overlay.expected).toHaveLength(11);
    for (const p of [...overlay.predicted, ...overlay.expected!]) {
      expect(p.value).toBeGreaterThanOrEqual(0);
      expect(p.value).toBeLessThanOrEqual(1);
    }
    expect(overlay.predicted[0].value).toBe(0); // clamped from -0.2
    expect(overlay.predicted[4].value).toBe(1); // clamped from 1.3
  });

  it("peak badge equals the max of the payload curve", () => {
    const curve = [0.1, 0.2, 0.3, 0.62, 0.4, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1];
    expect(buildOverlay(curve, undefined).peakHeight).toBe(0.62);
  });

  it("expected bell peaks at the annotated score", () => {
    const bell = expectedCurve(5);
    expect(bell).toHaveLength(11);
    expect(bell[5]).toBe(1);
    expect(bell[4]).toBeCloseTo(Math.exp(-0.25), 12);
    expect(bell[6]).toBeCloseTo(Math.exp(-0.25), 12);
    expect(() => expectedCurve(11)).toThrow();
    expect(() => expectedCurve(2.5)).toThrow();
  });

  it("rejects curves that are not 11 points", () => {
    expect(() => curvePoints([0.5, 0.5], 400, 200)).toThrow(/11/);
  });

  it("higher values sit higher on the plot", () => {
    const pts = curvePoints(
      [0, 0.25, 0.5, 0.75, 1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5], 400, 200,
    );
    expect(pts[4].y).toBeLessThan(pts[0].y);
    expect(pts[1].x).toBeGreaterThan(pts[0].x);
  });

  it("emits svg with both curve classes when an annotation exists", () => {
    const overlay = buildOverlay(expectedCurve(3), 3);
    const svg = overlaySvg(overlay);
    expect(svg).toContain('class="curve predicted"');
    expect(svg).toContain('class="curve expected"');
    expect(polylinePath(overlay.predicted).startsWith("M")).toBe(true);
  });

  it("clamp01 is the identity inside the unit interval", () => {
    expect(clamp01(0.3)).toBe(0.3);
    expect(clamp01(-1)).toBe(0);
    expect(clamp01(7)).toBe(1);
  });
});
