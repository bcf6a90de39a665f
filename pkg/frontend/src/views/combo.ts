/** Two-agent view: posterior-mean toxicity by line dose and, when the
 * service supplies one, the estimated target-contour polyline. */

import { escapeXml, showValue } from "../format.js";
import type { PosteriorSummary } from "../types.js";

const W = 420;
const H = 380;
const PAD = 40;

export function renderComboView(summary: PosteriorSummary): string {
  const rows = summary.doses ?? [];
  const contourPoints = (summary["contour"] as number[][] | undefined) ?? [];
  const parts: string[] = [];
  const sx = (v: number) => PAD + v * (W - 2 * PAD);
  const sy = (v: number) => H - PAD - v * (H - 2 * PAD);
  parts.push(
    `<rect x="${PAD}" y="${PAD}" width="${W - 2 * PAD}" height="${H - 2 * PAD}" fill="none" stroke="#999"/>`,
  );
  if (Array.isArray(contourPoints) && contourPoints.length > 0 && Array.isArray(contourPoints[0])) {
    const attr = contourPoints
      .map((v) => `${sx(v[0]!).toFixed(1)},${sy(v[1]!).toFixed(1)}`)
      .join(" ");
    parts.push(
      `<polyline fill="none" stroke="#cc3344" stroke-width="2" data-role="target-contour" points="${attr}"/>`,
    );
  }
  for (const row of rows) {
    const pair = row.pair;
    if (!pair) {
      continue;
    }
    parts.push(
      `<circle cx="${sx(pair[0]!).toFixed(1)}" cy="${sy(pair[1]!).toFixed(1)}" r="5" fill="#5588cc" data-dose="${escapeXml(row.treatment)}"/>`,
    );
    parts.push(
      `<text x="${(sx(pair[0]!) + 7).toFixed(1)}" y="${(sy(pair[1]!) - 5).toFixed(1)}" font-size="9" data-role="mean-tox" data-dose="${escapeXml(row.treatment)}">${escapeXml(showValue(row["mean_tox"] as number | undefined))}</text>`,
    );
  }
  parts.push(
    `<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="11">agent 1 (standardized)</text>`,
  );
  parts.push(
    `<text x="12" y="${H / 2}" font-size="11" transform="rotate(-90 12 ${H / 2})">agent 2 (standardized)</text>`,
  );
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}">${parts.join("")}</svg>`;
}
