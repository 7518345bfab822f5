// Predicted-vs-expected activation curve overlay. Pure layout: the curves
// become polylines in plot coordinates, values clamped to [0, 1]; the SVG
// layer is a thin formatter on top.

export const CURVE_POINTS = 11;

export interface PlotPoint {
  x: number;
  y: number;
  value: number; // clamped source value
}

export interface CurveOverlay {
  predicted: PlotPoint[];
  expected?: PlotPoint[];
  peakHeight: number; // max of the predicted payload curve
  width: number;
  height: number;
}

export function clamp01(v: number): number {
  return Math.min(1, Math.max(0, v));
}

/** Bell curve an integer answer encodes to; used to overlay the expected
 * response when the model has an annotation. */
export function expectedCurve(score: number, width = 0.5): number[] {
  if (!Number.isInteger(score) || score < 0 || score > 10) {
    throw new Error(`score must be an integer in 0..10, got ${score}`);
  }
  const out: number[] = [];
  for (let i = 0; i < CURVE_POINTS; i++) {
    const arg = width * (score - i);
    out.push(Math.exp(-(arg * arg)));
  }
  return out;
}

export function curvePoints(
  values: number[],
  width: number,
  height: number,
  pad = 12,
): PlotPoint[] {
  if (values.length !== CURVE_POINTS) {
    throw new Error(`curve needs ${CURVE_POINTS} values, got ${values.length}`);
  }
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  return values.map((raw, i) => {
    const v = clamp01(raw);
    return {
      x: pad + (i / (CURVE_POINTS - 1)) * innerW,
      y: pad + (1 - v) * innerH,
      value: v,
    };
  });
}

export function buildOverlay(
  predicted: number[],
  expectedScore: number | undefined,
  width = 420,
  height = 220,
): CurveOverlay {
  const pred = curvePoints(predicted, width, height);
  const overlay: CurveOverlay = {
    predicted: pred,
    peakHeight: Math.max(...predicted),
    width,
    height,
  };
  if (expectedScore !== undefined) {
    overlay.expected = curvePoints(expectedCurve(expectedScore), width, height);
  }
  return overlay;
}

export function polylinePath(points: PlotPoint[]): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${p.x.toFixed(1)},${p.y.toFixed(1)}`)
    .join(" ");
}

export function overlaySvg(overlay: CurveOverlay): string {
  const axis =
    `<line x1="12" y1="${overlay.height - 12}" x2="${overlay.width - 12}" ` +
    `y2="${overlay.height - 12}" class="axis"/>`;
  const pred = `<path d="${polylinePath(overlay.predicted)}" class="curve predicted"/>`;
  const exp = overlay.expected
    ? `<path d="${polylinePath(overlay.expected)}" class="curve expected"/>`
    : "";
  return (
    `<svg viewBox="0 0 ${overlay.width} ${overlay.height}" role="img" ` +
    `aria-label="predicted versus expected activation curves">${axis}${exp}${pred}</svg>`
  );
}
