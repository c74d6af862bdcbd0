// Pure view-model builders: SessionView JSON in, display strings/HTML out.
// No dose logic lives here; every number shown is taken from the response.

import type { SessionView } from "./types.js";

export function doseName(index: number | null | undefined): string {
  return index === null || index === undefined ? "-" : `d${index + 1}`;
}

export function bannerFor(view: SessionView): { kind: string; text: string } {
  if (view.stopping.stopped) {
    const p = view.stopping.posterior;
    const posterior = p === null ? "" : ` (posterior ${p.toFixed(3)})`;
    return {
      kind: "stop",
      text: `Trial stopped for toxicity at the lowest dose${posterior}`,
    };
  }
  if (view.finished) {
    return {
      kind: "done",
      text: `Trial complete. Recommended dose: ${doseName(view.recommendation)}`,
    };
  }
  const last = view.history[view.history.length - 1];
  if (!last || last.nextDose === null) {
    return { kind: "next", text: `Administer ${doseName(view.currentDose)} to cohort ${view.nextCohortIndex + 1}` };
  }
  const verb =
    last.nextDose > last.dose
      ? "Escalate to"
      : last.nextDose < last.dose
        ? "De-escalate to"
        : "Stay at";
  return {
    kind: "next",
    text: `${verb} ${doseName(last.nextDose)} for cohort ${view.nextCohortIndex + 1}`,
  };
}

export function stageLabel(view: SessionView): string {
  switch (view.stage) {
    case "initial":
      return `Stage 1 (rule-based), gate: at least ${view.design.initial_rule} toxicity/non-toxicity each`;
    case "modeling":
      return "Stage 2 (model-guided)";
    case "stopped_toxic":
      return "Stopped for toxicity";
    case "completed":
      return "Completed";
    default:
      return view.stage;
  }
}

export function flagBadges(view: SessionView): string[] {
  if (!view.flags) return [];
  const badges: string[] = [];
  if (view.flags.separation) badges.push("separation");
  if (view.flags.equalProbability) badges.push("equal probabilities");
  if (view.flags.boundaryParameter) badges.push("boundary estimate");
  if (!view.flags.converged) badges.push("fit not converged");
  return badges;
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function historyRowsHtml(view: SessionView): string {
  return view.history
    .map((c) => {
      const outcomes = c.outcomes.join(" ");
      return (
        `<tr><td>${c.cohortIndex + 1}</td><td>${escapeHtml(c.stage)}</td>` +
        `<td>${doseName(c.dose)}</td><td>${outcomes}</td>` +
        `<td>${doseName(c.nextDose)}</td></tr>`
      );
    })
    .join("");
}

export function curveTableHtml(view: SessionView): string {
  if (!view.curve) return "<p>No model fit yet (stage 1).</p>";
  const header = view.curve.map((_, j) => `<th>${doseName(j)}</th>`).join("");
  const cells = view.curve.map((p) => `<td>${p.toFixed(3)}</td>`).join("");
  return `<table class="curve"><tr><th></th>${header}</tr><tr><th>&pi;&#770;</th>${cells}</tr></table>`;
}

export function summaryHtml(view: SessionView): string {
  const design = view.design;
  return (
    `<dl><dt>Method</dt><dd>${escapeHtml(design.method)}</dd>` +
    `<dt>Target &phi;<sub>T</sub></dt><dd>${design.phi_t}</dd>` +
    `<dt>Cohorts</dt><dd>${view.history.length} of ${design.max_cohorts}` +
    ` (stage 1: ${view.initialCohorts})</dd>` +
    `<dt>Stage</dt><dd>${escapeHtml(stageLabel(view))}</dd></dl>`
  );
}
