/** Expected-burden view: a bar per dose with the elicited target line; all
 * values are service-provided. */

import { escapeXml, showValue } from "../format.js";
import type { PosteriorSummary } from "../types.js";

const W = 420;
const H = 260;
const PAD = 36;

export function renderBurdenView(summary: PosteriorSummary): string {
  const rows = summary.doses ?? [];
  const target = summary.target;
  const taus = rows.map((r) => r.expected_burden ?? 0);
  if (rows.length === 0 || rows[0]?.expected_burden === undefined) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}"><text x="10" y="20">burden view applies to ordinal-toxicity designs only</text></svg>`;
  }
  const ymax = Math.max(...taus, target ?? 0) * 1.15 || 1;
  const bw = (W - 2 * PAD) / rows.length;
  const parts: string[] = [];
  rows.forEach((row, i) => {
    const tau = row.expected_burden ?? 0;
    const h = (tau / ymax) * (H - 2 * PAD);
    const x = PAD + i * bw + 4;
    parts.push(
      `<rect x="${x.toFixed(1)}" y="${(H - PAD - h).toFixed(1)}" width="${(bw - 8).toFixed(1)}" height="${h.toFixed(1)}" fill="#5588cc" data-dose="${escapeXml(row.treatment)}"/>`,
    );
    parts.push(
      `<text x="${(x + bw / 2 - 4).toFixed(1)}" y="${(H - PAD - h - 4).toFixed(1)}" text-anchor="middle" font-size="9" data-role="tau" data-dose="${escapeXml(row.treatment)}">${escapeXml(showValue(row.expected_burden))}</text>`,
    );
    parts.push(
      `<text x="${(x + bw / 2 - 4).toFixed(1)}" y="${H - PAD + 12}" text-anchor="middle" font-size="9">${escapeXml(row.treatment)}</text>`,
    );
  });
  if (target !== undefined) {
    const y = H - PAD - (target / ymax) * (H - 2 * PAD);
    parts.push(
      `<line x1="${PAD}" y1="${y.toFixed(1)}" x2="${W - PAD}" y2="${y.toFixed(1)}" stroke="#cc3344" stroke-dasharray="5 3" data-role="target"/>`,
    );
    parts.push(
      `<text x="${W - PAD}" y="${(y - 4).toFixed(1)}" text-anchor="end" font-size="10" data-role="target-label">${escapeXml(`target ${showValue(target)}`)}</text>`,
    );
  }
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}">${parts.join("")}</svg>`;
}
