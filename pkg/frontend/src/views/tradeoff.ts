/** Trade-off view: the target contour, its desirability level sets, and the
 * per-dose posterior-mean points.  Solid markers are acceptable doses, open
 * markers unacceptable; each point is labelled with the service's
 * desirability value verbatim. */

import { escapeXml, showValue } from "../format.js";
import type { PosteriorSummary } from "../types.js";

const W = 420;
const H = 380;
const PAD = 40;

function sx(p: number): number {
  return PAD + p * (W - 2 * PAD);
}

function sy(p: number): number {
  return H - PAD - p * (H - 2 * PAD);
}

function polyline(points: number[][], style: string): string {
  if (points.length === 0) {
    return "";
  }
  const attr = points.map(([pe, pt]) => `${sx(pe!).toFixed(1)},${sy(pt!).toFixed(1)}`).join(" ");
  return `<polyline fill="none" ${style} points="${attr}"/>`;
}

export function renderTradeoffView(summary: PosteriorSummary): string {
  const contour = summary.contour;
  if (!contour || !summary.doses) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}"><text x="10" y="20">trade-off view applies to efficacy-toxicity designs only</text></svg>`;
  }
  const parts: string[] = [];
  parts.push(
    `<rect x="${PAD}" y="${PAD}" width="${W - 2 * PAD}" height="${H - 2 * PAD}" fill="none" stroke="#999"/>`,
  );
  for (const [name, pts] of Object.entries(contour.levels)) {
    parts.push(polyline(pts, `stroke="#bbb" stroke-dasharray="4 3" data-level="${escapeXml(name)}"`));
  }
  parts.push(polyline(contour.curve, `stroke="#2255cc" stroke-width="2" data-role="target-contour"`));
  for (const [pe, pt] of contour.pairs) {
    parts.push(
      `<text x="${sx(pe!).toFixed(1)}" y="${sy(pt!).toFixed(1)}" text-anchor="middle" font-size="12" data-role="elicited">x</text>`,
    );
  }
  for (const row of summary.doses) {
    const pe = row.mean_eff;
    const pt = row.mean_tox;
    if (pe === undefined || pt === undefined) {
      continue;
    }
    const fill = row.acceptable ? "#cc3344" : "none";
    parts.push(
      `<circle cx="${sx(pe).toFixed(1)}" cy="${sy(pt).toFixed(1)}" r="5" fill="${fill}" stroke="#cc3344" data-dose="${escapeXml(row.treatment)}" data-acceptable="${row.acceptable ? "1" : "0"}"/>`,
    );
    parts.push(
      `<text x="${(sx(pe) + 8).toFixed(1)}" y="${(sy(pt) - 6).toFixed(1)}" font-size="10" data-role="delta" data-dose="${escapeXml(row.treatment)}">${escapeXml(`${row.treatment}: δ=${showValue(row.desirability)}`)}</text>`,
    );
  }
  parts.push(
    `<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="11">probability of efficacy</text>`,
  );
  parts.push(
    `<text x="12" y="${H / 2}" font-size="11" transform="rotate(-90 12 ${H / 2})">probability of toxicity</text>`,
  );
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}">${parts.join("")}</svg>`;
}
