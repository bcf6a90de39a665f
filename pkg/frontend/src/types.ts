/** JSON payload shapes of the trial-conduct service. */

export type DesignKind =
  | "combo"
  | "efftox"
  | "covariate-efftox"
  | "ttb"
  | "schedule";

export interface Treatment {
  dose_index?: number;
  pair?: number[];
  line_index?: number | null;
  stage?: number;
  [key: string]: unknown;
}

export interface Recommendation {
  action: "treat" | "stop" | "off-protocol";
  treatment: Treatment | null;
  reason: string | null;
  posterior: Record<string, unknown>;
  n_outcomes: number;
  label?: string;
  preview?: boolean;
}

export interface TrialSnapshot {
  id: string;
  status: "active" | "suspended" | "stopped" | "completed";
  version: number;
  design_kind: DesignKind;
  recommendation: Recommendation;
  config?: Record<string, unknown>;
}

export interface DoseSummaryRow {
  treatment: string;
  dose?: number;
  mean_eff?: number;
  mean_tox?: number;
  pr_low_eff?: number;
  pr_high_tox?: number;
  acceptable?: boolean;
  desirability?: number;
  expected_burden?: number;
  pair?: number[];
  mean_tox_pair?: number;
}

export interface ContourTrace {
  curve: number[][];
  levels: Record<string, number[][]>;
  pairs: number[][];
}

export interface PosteriorSummary {
  doses?: DoseSummaryRow[];
  contour?: ContourTrace;
  target?: number;
  mean_f?: number[][];
  acceptable?: number[][];
  f_max?: number;
  limits?: Record<string, number>;
  n_outcomes: number;
  version?: number;
  recommendation: Recommendation;
  [key: string]: unknown;
}

export interface EventRecord {
  type: string;
  time: number;
  patient?: number;
  data?: Record<string, unknown>;
}

export interface EventLog {
  version: number;
  events: EventRecord[];
}

export interface OutcomeEntry {
  patient: number;
  [field: string]: number | string | number[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}
