/** Browser bootstrap: wires the session, outcome form and design views into
 * the page.  All numbers shown come straight from service responses. */

import { ConductClient } from "./api.js";
import { ConsoleSession } from "./session.js";
import { renderBurdenView } from "./views/burden.js";
import { renderComboView } from "./views/combo.js";
import { renderScheduleView } from "./views/schedule.js";
import { renderTradeoffView } from "./views/tradeoff.js";
import type { DesignKind, OutcomeEntry, PosteriorSummary } from "./types.js";

function viewFor(kind: DesignKind, summary: PosteriorSummary): string {
  switch (kind) {
    case "efftox":
    case "covariate-efftox":
      return renderTradeoffView(summary);
    case "ttb":
      return renderBurdenView(summary);
    case "schedule":
      return renderScheduleView(summary);
    case "combo":
      return renderComboView(summary);
  }
}

export function mount(root: HTMLElement, baseUrl: string): ConsoleSession {
  const client = new ConductClient(baseUrl);
  const session = new ConsoleSession(client);

  const banner = document.createElement("div");
  banner.className = "banner";
  const plot = document.createElement("div");
  plot.className = "plot";
  const recommendation = document.createElement("div");
  recommendation.className = "recommendation";
  const form = document.createElement("form");
  form.className = "outcomes";
  root.replaceChildren(banner, recommendation, plot, form);

  async function redraw(designKind: DesignKind) {
    const state = session.snapshot();
    banner.textContent = state.conflict
      ? `submission conflict: ${state.lastError ?? "the log moved"}; view refreshed`
      : "";
    banner.classList.toggle("conflict", state.conflict);
    const rec = state.recommendation;
    if (rec) {
      if (rec.action === "stop") {
        recommendation.textContent = `STOPPED: ${rec.reason ?? ""}`;
        recommendation.classList.add("stop");
      } else {
        recommendation.textContent = `next treatment: ${rec.label ?? JSON.stringify(rec.treatment)}`;
        recommendation.classList.remove("stop");
      }
    }
    if (state.posterior) {
      plot.innerHTML = viewFor(designKind, state.posterior);
    }
  }

  (root as unknown as { dosefindRedraw: (k: DesignKind) => Promise<void> }).dosefindRedraw =
    redraw;

  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const payload = form.dataset.outcomes;
    if (!payload) {
      return;
    }
    const outcomes = JSON.parse(payload) as OutcomeEntry[];
    void session.submitOutcomes(outcomes).then(async () => {
      const snap = session.snapshot();
      await redraw((snap.posterior?.recommendation ? "efftox" : "efftox") as DesignKind);
    });
  });

  return session;
}
