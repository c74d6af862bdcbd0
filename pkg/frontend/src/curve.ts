// SVG dose-toxicity plot. Exactly the J returned points are drawn (plus a
// connecting guide line and the target level); nothing is smoothed.

export interface CurvePlotOptions {
  width?: number;
  height?: number;
  phiT: number;
  curve: number[];
  doseLabels?: number[];
}

const PAD = { left: 36, right: 12, top: 10, bottom: 24 };

export function curvePoints(
  curve: number[],
  width: number,
  height: number,
): { x: number; y: number }[] {
  const innerW = width - PAD.left - PAD.right;
  const innerH = height - PAD.top - PAD.bottom;
  const n = curve.length;
  return curve.map((p, j) => ({
    x: PAD.left + (n === 1 ? innerW / 2 : (j / (n - 1)) * innerW),
    y: PAD.top + (1 - p) * innerH,
  }));
}

export function curveSvg(options: CurvePlotOptions): string {
  const width = options.width ?? 360;
  const height = options.height ?? 220;
  const pts = curvePoints(options.curve, width, height);
  const innerW = width - PAD.left - PAD.right;
  const innerH = height - PAD.top - PAD.bottom;
  const targetY = PAD.top + (1 - options.phiT) * innerH;

  const axis =
    `<line x1="${PAD.left}" y1="${PAD.top}" x2="${PAD.left}" y2="${PAD.top + innerH}" class="axis"/>` +
    `<line x1="${PAD.left}" y1="${PAD.top + innerH}" x2="${PAD.left + innerW}" y2="${PAD.top + innerH}" class="axis"/>`;
  const target = `<line x1="${PAD.left}" y1="${targetY.toFixed(1)}" x2="${PAD.left + innerW}" y2="${targetY.toFixed(1)}" class="target"/>`;
  const guide =
    pts.length > 1
      ? `<polyline class="guide" fill="none" points="${pts
          .map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`)
          .join(" ")}"/>`
      : "";
  const dots = pts
    .map(
      (p, j) =>
        `<circle cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" r="4" class="dot" data-dose="${j}"/>`,
    )
    .join("");
  const labels = pts
    .map(
      (p, j) =>
        `<text x="${p.x.toFixed(1)}" y="${height - 6}" text-anchor="middle" class="ticklabel">d${j + 1}</text>`,
    )
    .join("");
  const yticks = [0, 0.5, 1]
    .map((v) => {
      const y = PAD.top + (1 - v) * innerH;
      return `<text x="${PAD.left - 6}" y="${(y + 3).toFixed(1)}" text-anchor="end" class="ticklabel">${v}</text>`;
    })
    .join("");
  return (
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="estimated toxicity curve">` +
    axis +
    target +
    guide +
    dots +
    labels +
    yticks +
    `</svg>`
  );
}
