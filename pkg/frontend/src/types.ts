// JSON shapes returned by the conduct service. The UI renders these verbatim:
// every dose decision comes from the server.

export interface DesignInfo {
  name: string;
  method: string;
  skeleton: number[];
  phi_t: number;
  initial_rule: number;
  cohort_size: number;
  max_cohorts: number;
  a0: number;
  labels?: number[];
}

export interface CohortEntry {
  cohortIndex: number;
  stage: string;
  dose: number;
  outcomes: number[];
  nextDose: number | null;
}

export interface FitFlags {
  separation: boolean;
  equalProbability: boolean;
  boundaryParameter: boolean;
  converged: boolean;
}

export interface StoppingStatus {
  stopped: boolean;
  rule: string;
  lowestDoseToxicities: number;
  lowestDosePatients: number;
  posterior: number | null;
}

export interface SessionView {
  sessionId: string;
  design: DesignInfo;
  doseLabels: number[];
  stage: string;
  currentDose: number;
  nextCohortIndex: number;
  initialCohorts: number;
  recommendation: number | null;
  finished: boolean;
  history: CohortEntry[];
  curve: number[] | null;
  flags: FitFlags | null;
  stopping: StoppingStatus;
  fitSummary?: unknown;
  nextDose?: number | null;
}

export interface CohortPayload {
  cohort_index: number;
  outcomes: number[];
  biomarkers?: number[][];
}
