// DOM wiring for the single-page conduct companion. The page has three
// regions: session setup, cohort entry, and the live session view. State
// beyond the session id lives on the server; a refresh rebuilds everything
// from GET /sessions/{id}.

import { ApiError, ConductClient } from "./api.js";
import { curveSvg } from "./curve.js";
import type { SessionView } from "./types.js";
import { biomarkerCountFor, validateCohortForm } from "./validate.js";
import {
  bannerFor,
  curveTableHtml,
  doseName,
  flagBadges,
  historyRowsHtml,
  summaryHtml,
} from "./view.js";

const POLL_MS = 15_000; // cohorts arrive on a weeks timescale; polling is plenty

const client = new ConductClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let currentSession: string | null = null;
let pollTimer: number | undefined;

function renderView(view: SessionView): void {
  currentSession = view.sessionId;
  el("session-id").textContent = view.sessionId;
  el("summary").innerHTML = summaryHtml(view);
  const banner = bannerFor(view);
  const bannerNode = el("banner");
  bannerNode.className = `banner banner-${banner.kind}`;
  bannerNode.textContent = banner.text;
  el("history-body").innerHTML = historyRowsHtml(view);
  el("curve-table").innerHTML = curveTableHtml(view);
  el("curve-plot").innerHTML = view.curve
    ? curveSvg({ curve: view.curve, phiT: view.design.phi_t })
    : "";
  el("flags").innerHTML = flagBadges(view)
    .map((b) => `<span class="flag">${b}</span>`)
    .join(" ");
  const stopping = view.stopping;
  el("stopping").textContent = stopping.stopped
    ? `Stopped: ${stopping.rule}`
    : `Stopping rule: ${stopping.rule} — lowest dose ${stopping.lowestDoseToxicities}/${stopping.lowestDosePatients} toxic` +
      (stopping.posterior !== null ? `, posterior ${stopping.posterior.toFixed(3)}` : "");
  const transcript = el<HTMLAnchorElement>("transcript-link");
  transcript.href = client.transcriptUrl(view.sessionId);
  transcript.style.display = "inline";

  renderCohortForm(view);
}

function renderCohortForm(view: SessionView): void {
  const form = el("cohort-form");
  if (view.finished) {
    form.innerHTML = "<p>The trial is finished; no further cohorts.</p>";
    return;
  }
  const size = view.design.cohort_size;
  const need = biomarkerCountFor(view.design.method);
  const rows: string[] = [];
  rows.push(
    `<p>Cohort ${view.nextCohortIndex + 1} at <strong>${doseName(view.currentDose)}</strong></p>`,
  );
  for (let i = 0; i < size; i++) {
    const bio =
      need > 0
        ? `<input type="text" id="bio-${i}" placeholder="${
            need === 8 ? "8 weekly values, comma-separated" : "week-8 value"
          }" size="34">`
        : "";
    rows.push(
      `<div class="patient-row"><span>Patient ${i + 1}</span>` +
        `<label><input type="radio" name="out-${i}" value="0" checked> no DLT</label>` +
        `<label><input type="radio" name="out-${i}" value="1"> DLT</label>` +
        bio +
        `</div>`,
    );
  }
  rows.push(`<button id="submit-cohort">Submit cohort</button>`);
  rows.push(`<div id="form-errors" class="errors"></div>`);
  form.innerHTML = rows.join("\n");
  el("submit-cohort").addEventListener("click", () => submitCohort(view));
}

async function submitCohort(view: SessionView): Promise<void> {
  const size = view.design.cohort_size;
  const outcomes: (number | null)[] = [];
  for (let i = 0; i < size; i++) {
    const checked = document.querySelector<HTMLInputElement>(
      `input[name="out-${i}"]:checked`,
    );
    outcomes.push(checked ? Number(checked.value) : null);
  }
  const biomarkers: string[] = [];
  if (biomarkerCountFor(view.design.method) > 0) {
    for (let i = 0; i < size; i++) {
      biomarkers.push(el<HTMLInputElement>(`bio-${i}`).value);
    }
  }
  const validated = validateCohortForm({
    method: view.design.method,
    cohortSize: size,
    outcomes,
    biomarkers,
  });
  const errors = el("form-errors");
  if (!validated.ok) {
    errors.innerHTML = validated.errors.map((e) => `<p>${e}</p>`).join("");
    return; // no request is made on a malformed form
  }
  errors.innerHTML = "";
  try {
    const updated = await client.submitCohort(view.sessionId, {
      cohort_index: view.nextCohortIndex,
      outcomes: validated.value.outcomes,
      ...(validated.value.biomarkers ? { biomarkers: validated.value.biomarkers } : {}),
    });
    renderView(updated);
  } catch (err) {
    if (err instanceof ApiError) {
      errors.innerHTML = `<p>server rejected the cohort (${err.status}): ${err.message}</p>`;
      if (err.status === 409) void refresh();
    } else {
      errors.innerHTML = `<p>request failed: ${String(err)}</p>`;
    }
  }
}

async function refresh(): Promise<void> {
  if (!currentSession) return;
  try {
    renderView(await client.getSession(currentSession));
  } catch {
    // transient; the next poll retries
  }
}

function startPolling(): void {
  if (pollTimer !== undefined) window.clearInterval(pollTimer);
  pollTimer = window.setInterval(() => void refresh(), POLL_MS);
}

async function createSession(): Promise<void> {
  const method = el<HTMLSelectElement>("new-method").value;
  const skeleton = el<HTMLInputElement>("new-skeleton")
    .value.split(",")
    .map((s) => Number(s.trim()));
  const design = {
    method,
    skeleton,
    phi_t: Number(el<HTMLInputElement>("new-phi").value),
    initial_rule: Number(el<HTMLInputElement>("new-initial").value),
    cohort_size: Number(el<HTMLInputElement>("new-cohort-size").value),
    max_cohorts: Number(el<HTMLInputElement>("new-max-cohorts").value),
  };
  const errors = el("create-errors");
  try {
    const view = await client.createSession(design);
    errors.textContent = "";
    renderView(view);
    startPolling();
  } catch (err) {
    errors.textContent = err instanceof ApiError ? `rejected: ${err.message}` : String(err);
  }
}

async function loadSession(): Promise<void> {
  const id = el<HTMLInputElement>("load-id").value.trim();
  const errors = el("create-errors");
  try {
    const view = await client.getSession(id);
    errors.textContent = "";
    renderView(view);
    startPolling();
  } catch (err) {
    errors.textContent = err instanceof ApiError ? `not found: ${err.message}` : String(err);
  }
}

export function init(): void {
  el("create-session").addEventListener("click", () => void createSession());
  el("load-session").addEventListener("click", () => void loadSession());
}

if (typeof document !== "undefined" && document.getElementById("create-session")) {
  init();
}
