/** Schedule-dose view: a K x J heatmap of the posterior mean toxicity
 * probability by the horizon, with unacceptable pairs masked. */

import { escapeXml, showValue } from "../format.js";
import type { PosteriorSummary } from "../types.js";

const CELL = 86;
const PAD = 52;

function shade(value: number): string {
  const t = Math.max(0, Math.min(1, value));
  const r = Math.round(255 * t);
  const g = Math.round(200 * (1 - t) + 30);
  return `rgb(${r},${g},90)`;
}

export function renderScheduleView(summary: PosteriorSummary): string {
  const meanF = summary.mean_f;
  if (!meanF) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="300" height="60"><text x="10" y="20">schedule view applies to schedule-dose designs only</text></svg>`;
  }
  const acceptable = new Set((summary.acceptable ?? []).map(([k, j]) => `${k},${j}`));
  const K = meanF.length;
  const J = meanF[0]?.length ?? 0;
  const w = PAD * 2 + J * CELL;
  const h = PAD * 2 + K * CELL;
  const parts: string[] = [];
  for (let k = 0; k < K; k += 1) {
    for (let j = 0; j < J; j += 1) {
      const value = meanF[k]?.[j] ?? 0;
      const ok = acceptable.has(`${k},${j}`);
      const x = PAD + j * CELL;
      const y = PAD + k * CELL;
      parts.push(
        `<rect x="${x}" y="${y}" width="${CELL - 4}" height="${CELL - 4}" fill="${shade(value)}" opacity="${ok ? 1 : 0.25}" data-pair="${k},${j}" data-acceptable="${ok ? "1" : "0"}"/>`,
      );
      parts.push(
        `<text x="${x + CELL / 2 - 2}" y="${y + CELL / 2}" text-anchor="middle" font-size="10" data-role="mean-f" data-pair="${k},${j}">${escapeXml(showValue(value))}</text>`,
      );
      if (!ok) {
        parts.push(
          `<text x="${x + CELL / 2 - 2}" y="${y + CELL / 2 + 14}" text-anchor="middle" font-size="10">unacceptable</text>`,
        );
      }
    }
  }
  for (let j = 0; j < J; j += 1) {
    parts.push(
      `<text x="${PAD + j * CELL + CELL / 2}" y="${PAD - 10}" text-anchor="middle" font-size="10">dose ${j + 1}</text>`,
    );
  }
  for (let k = 0; k < K; k += 1) {
    parts.push(
      `<text x="${PAD - 8}" y="${PAD + k * CELL + CELL / 2}" text-anchor="end" font-size="10">sched ${k + 1}</text>`,
    );
  }
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${w}" height="${h}">${parts.join("")}</svg>`;
}
