/** Typed client for the trial-conduct service.
 *
 * The console performs no statistical computation: every number it renders
 * comes out of these responses untouched.  Outcome submissions carry the
 * expected log version in `If-Match`; a 409 means another writer got there
 * first and the caller must refresh before retrying.
 */

import type {
  ApiErrorBody,
  EventLog,
  OutcomeEntry,
  PosteriorSummary,
  Recommendation,
  TrialSnapshot,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: {
    method?: string;
    headers?: Record<string, string>;
    body?: string;
  },
) => Promise<{ status: number; json(): Promise<unknown>; text(): Promise<string> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }

  get isVersionConflict(): boolean {
    return this.status === 409 && this.body.code === "version-conflict";
  }
}

export interface CreateTrialRequest {
  design: Record<string, unknown>;
  prior?: unknown[];
  mcmc?: Record<string, unknown>;
  next_covariates?: number[];
}

export class ConductClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(
    path: string,
    init?: { method?: string; headers?: Record<string, string>; body?: string },
  ): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const payload = (await response.json()) as unknown;
    if (response.status >= 400) {
      throw new ApiError(response.status, payload as ApiErrorBody);
    }
    return payload as T;
  }

  createTrial(body: CreateTrialRequest): Promise<TrialSnapshot> {
    return this.request("/trials", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getTrial(trialId: string): Promise<TrialSnapshot> {
    return this.request(`/trials/${trialId}`);
  }

  getRecommendation(trialId: string): Promise<TrialSnapshot> {
    return this.request(`/trials/${trialId}/recommendation`);
  }

  getPosterior(trialId: string): Promise<PosteriorSummary> {
    return this.request(`/trials/${trialId}/posterior`);
  }

  getEvents(trialId: string): Promise<EventLog> {
    return this.request(`/trials/${trialId}/events`);
  }

  /** Append cohort outcomes at the expected log version. */
  postOutcomes(
    trialId: string,
    expectedVersion: number,
    outcomes: OutcomeEntry[],
    nextCovariates?: number[],
  ): Promise<TrialSnapshot> {
    const body: Record<string, unknown> = { outcomes };
    if (nextCovariates !== undefined) {
      body.next_covariates = nextCovariates;
    }
    return this.request(`/trials/${trialId}/outcomes`, {
      method: "POST",
      headers: {
        "Content-Type": "application/json",
        "If-Match": String(expectedVersion),
      },
      body: JSON.stringify(body),
    });
  }

  /** Non-binding what-if evaluation; never mutates the log. */
  preview(
    trialId: string,
    outcomes: OutcomeEntry[],
    nextCovariates?: number[],
  ): Promise<Recommendation> {
    const body: Record<string, unknown> = { outcomes };
    if (nextCovariates !== undefined) {
      body.next_covariates = nextCovariates;
    }
    return this.request(`/trials/${trialId}/preview`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }
}
