// Client-side form validation. Catches malformed entries before any request
// is made; the server remains authoritative for everything else.

export interface CohortFormInput {
  method: string;
  cohortSize: number;
  outcomes: (number | null)[];
  biomarkers: string[]; // one comma-separated line per patient
}

export interface ValidatedCohort {
  outcomes: number[];
  biomarkers?: number[][];
}

export type ValidationResult =
  | { ok: true; value: ValidatedCohort }
  | { ok: false; errors: string[] };

export function biomarkerCountFor(method: string): number {
  if (method === "joint9d") return 8;
  if (method === "joint2d") return 1;
  return 0;
}

export function parseBiomarkerLine(line: string): number[] | null {
  const parts = line
    .split(",")
    .map((p) => p.trim())
    .filter((p) => p.length > 0);
  const values = parts.map(Number);
  if (values.length === 0 || values.some((v) => !Number.isFinite(v))) return null;
  return values;
}

export function validateCohortForm(input: CohortFormInput): ValidationResult {
  const errors: string[] = [];
  if (input.outcomes.length !== input.cohortSize) {
    errors.push(`expected ${input.cohortSize} outcome entries`);
  }
  input.outcomes.forEach((v, i) => {
    if (v !== 0 && v !== 1) {
      errors.push(`patient ${i + 1}: toxicity outcome must be 0 or 1`);
    }
  });

  const need = biomarkerCountFor(input.method);
  let biomarkers: number[][] | undefined;
  if (need > 0) {
    biomarkers = [];
    if (input.biomarkers.length !== input.cohortSize) {
      errors.push(`expected one biomarker line per patient (${input.cohortSize})`);
    }
    input.biomarkers.forEach((line, i) => {
      const values = parseBiomarkerLine(line);
      if (values === null) {
        errors.push(`patient ${i + 1}: biomarker values must be numbers`);
        return;
      }
      if (input.method === "joint9d" && values.length !== 8) {
        errors.push(`patient ${i + 1}: all 8 weekly values are required`);
      } else if (input.method === "joint2d" && values.length !== 1 && values.length !== 8) {
        errors.push(`patient ${i + 1}: give the week-8 value (or all 8)`);
      } else {
        biomarkers!.push(values);
      }
    });
  }

  if (errors.length > 0) return { ok: false, errors };
  return {
    ok: true,
    value: {
      outcomes: input.outcomes.map((v) => v as number),
      ...(need > 0 ? { biomarkers } : {}),
    },
  };
}
