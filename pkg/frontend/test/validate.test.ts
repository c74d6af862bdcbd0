import { describe, expect, it } from "vitest";

import { biomarkerCountFor, parseBiomarkerLine, validateCohortForm } from "../src/validate.js";

describe("biomarker requirements per method", () => {
  it("joint9d needs all eight weekly values", () => {
    expect(biomarkerCountFor("joint9d")).toBe(8);
  });
  it("joint2d needs the week-8 value", () => {
    expect(biomarkerCountFor("joint2d")).toBe(1);
  });
  it("binary-only methods need none", () => {
    expect(biomarkerCountFor("probit")).toBe(0);
    expect(biomarkerCountFor("empiric")).toBe(0);
  });
});

describe("parseBiomarkerLine", () => {
  it("parses comma-separated numbers", () => {
    expect(parseBiomarkerLine("12.5, 11, 10.2")).toEqual([12.5, 11, 10.2]);
  });
  it("rejects non-numeric entries", () => {
    expect(parseBiomarkerLine("12, abc")).toBeNull();
    expect(parseBiomarkerLine("")).toBeNull();
  });
});

describe("validateCohortForm", () => {
  const base = { method: "probit", cohortSize: 3, biomarkers: [] as string[] };

  it("accepts a complete binary cohort", () => {
    const result = validateCohortForm({ ...base, outcomes: [0, 1, 0] });
    expect(result.ok).toBe(true);
    if (result.ok) expect(result.value.outcomes).toEqual([0, 1, 0]);
  });

  it("rejects missing outcome picks", () => {
    const result = validateCohortForm({ ...base, outcomes: [0, null, 1] });
    expect(result.ok).toBe(false);
  });

  it("rejects a malformed biomarker count for joint9d without building a payload", () => {
    const result = validateCohortForm({
      method: "joint9d",
      cohortSize: 2,
      outcomes: [0, 0],
      biomarkers: ["1,2,3,4,5,6,7,8", "1,2,3"],
    });
    expect(result.ok).toBe(false);
    if (!result.ok) {
      expect(result.errors.join(" ")).toContain("8 weekly values");
    }
  });

  it("accepts week-8-only entry for joint2d", () => {
    const result = validateCohortForm({
      method: "joint2d",
      cohortSize: 2,
      outcomes: [1, 0],
      biomarkers: ["11.5", "12.25"],
    });
    expect(result.ok).toBe(true);
    if (result.ok) expect(result.value.biomarkers).toEqual([[11.5], [12.25]]);
  });
});
