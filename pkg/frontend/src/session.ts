/** Console session state for one active trial.
 *
 * Tracks the expected log version so a concurrent writer can never be
 * silently overwritten: submissions go out with the cached version, a
 * conflict surfaces as a banner and a forced refresh, and the operator
 * resubmits against fresh state if still appropriate.
 */

import { ApiError, ConductClient } from "./api.js";
import type {
  OutcomeEntry,
  PosteriorSummary,
  Recommendation,
  TrialSnapshot,
} from "./types.js";

export interface SessionState {
  trialId: string | null;
  status: string;
  version: number;
  recommendation: Recommendation | null;
  posterior: PosteriorSummary | null;
  conflict: boolean;
  lastError: string | null;
}

export class ConsoleSession {
  private state: SessionState = {
    trialId: null,
    status: "idle",
    version: -1,
    recommendation: null,
    posterior: null,
    conflict: false,
    lastError: null,
  };

  constructor(private readonly client: ConductClient) {}

  snapshot(): SessionState {
    return { ...this.state };
  }

  private absorb(snap: TrialSnapshot): void {
    this.state.trialId = snap.id;
    this.state.status = snap.status;
    this.state.version = snap.version;
    this.state.recommendation = snap.recommendation;
  }

  async open(trialId: string): Promise<SessionState> {
    const snap = await this.client.getTrial(trialId);
    this.absorb(snap);
    this.state.posterior = await this.client.getPosterior(trialId);
    this.state.conflict = false;
    this.state.lastError = null;
    return this.snapshot();
  }

  async refresh(): Promise<SessionState> {
    if (this.state.trialId === null) {
      throw new Error("no trial open");
    }
    return this.open(this.state.trialId);
  }

  /** Submit the pending cohort's outcomes at the cached version.
   *
   * On a version conflict the session marks the conflict, refreshes to the
   * server's state, and reports failure; nothing is retried implicitly.
   */
  async submitOutcomes(
    outcomes: OutcomeEntry[],
    nextCovariates?: number[],
  ): Promise<{ ok: boolean; state: SessionState }> {
    if (this.state.trialId === null) {
      throw new Error("no trial open");
    }
    try {
      const snap = await this.client.postOutcomes(
        this.state.trialId,
        this.state.version,
        outcomes,
        nextCovariates,
      );
      this.absorb(snap);
      this.state.posterior = await this.client.getPosterior(this.state.trialId);
      this.state.conflict = false;
      this.state.lastError = null;
      return { ok: true, state: this.snapshot() };
    } catch (err) {
      if (err instanceof ApiError && err.isVersionConflict) {
        this.state.conflict = true;
        this.state.lastError = err.body.message;
        await this.refresh();
        this.state.conflict = true;
        return { ok: false, state: this.snapshot() };
      }
      if (err instanceof ApiError) {
        this.state.lastError = err.body.message;
        return { ok: false, state: this.snapshot() };
      }
      throw err;
    }
  }

  /** Evaluate a hypothetical cohort; clearly non-binding, never persisted. */
  async whatIf(
    outcomes: OutcomeEntry[],
    nextCovariates?: number[],
  ): Promise<Recommendation> {
    if (this.state.trialId === null) {
      throw new Error("no trial open");
    }
    const before = this.state.version;
    const rec = await this.client.preview(this.state.trialId, outcomes, nextCovariates);
    if (this.state.version !== before) {
      throw new Error("preview must not change session state");
    }
    return rec;
  }
}
