/** Outcome-entry form model: field definitions and validation per design
 * family, producing the exact POST body the service expects. */

import type { DesignKind, OutcomeEntry } from "./types.js";

export interface FieldSpec {
  name: string;
  label: string;
  kind: "binary" | "trinary" | "levels" | "number";
  levels?: number[];
}

export function outcomeFields(designKind: DesignKind, nLevels?: number[]): FieldSpec[] {
  switch (designKind) {
    case "combo":
      return [{ name: "tox", label: "toxicity", kind: "binary" }];
    case "efftox":
    case "covariate-efftox":
      return [
        { name: "eff", label: "efficacy", kind: "binary" },
        { name: "tox", label: "toxicity", kind: "binary" },
      ];
    case "ttb":
      return [
        {
          name: "levels",
          label: "severity level per toxicity type",
          kind: "levels",
          levels: nLevels ?? [],
        },
      ];
    case "schedule":
      return [
        { name: "tox", label: "toxicity", kind: "binary" },
        { name: "time", label: "observed time (days)", kind: "number" },
      ];
  }
}

export interface ValidationIssue {
  patient: number;
  field: string;
  message: string;
}

export function validateOutcomes(
  designKind: DesignKind,
  entries: OutcomeEntry[],
  pendingPatients: number[],
  nLevels?: number[],
): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  const seen = new Set<number>();
  for (const entry of entries) {
    const p = entry.patient;
    if (seen.has(p)) {
      issues.push({ patient: p, field: "patient", message: "duplicate patient" });
    }
    seen.add(p);
    if (!pendingPatients.includes(p)) {
      issues.push({ patient: p, field: "patient", message: "not an assigned, un-evaluated patient" });
    }
    for (const field of outcomeFields(designKind, nLevels)) {
      const value = entry[field.name];
      if (value === undefined) {
        issues.push({ patient: p, field: field.name, message: "required" });
        continue;
      }
      if (field.kind === "binary" && value !== 0 && value !== 1) {
        issues.push({ patient: p, field: field.name, message: "must be 0 or 1" });
      }
      if (field.kind === "trinary" && value !== "N" && value !== "E" && value !== "T") {
        issues.push({ patient: p, field: field.name, message: "must be N, E or T" });
      }
      if (field.kind === "number" && (typeof value !== "number" || !(value >= 0))) {
        issues.push({ patient: p, field: field.name, message: "must be a nonnegative number" });
      }
      if (field.kind === "levels") {
        const levels = value as number[];
        const bounds = field.levels ?? [];
        if (!Array.isArray(levels) || levels.length !== bounds.length) {
          issues.push({ patient: p, field: field.name, message: "one level per toxicity type" });
        } else {
          levels.forEach((k, j) => {
            if (!(Number.isInteger(k) && k >= 0 && k < (bounds[j] ?? 0))) {
              issues.push({ patient: p, field: `${field.name}[${j}]`, message: "severity out of range" });
            }
          });
        }
      }
    }
  }
  for (const p of pendingPatients) {
    if (!seen.has(p)) {
      issues.push({ patient: p, field: "patient", message: "outcome missing for pending patient" });
    }
  }
  return issues;
}

/** Trinary designs post {y}; everything else posts its field set directly. */
export function buildOutcomeBody(entries: OutcomeEntry[]): { outcomes: OutcomeEntry[] } {
  return { outcomes: entries };
}
