import { describe, expect, it } from "vitest";

import type { ExplanationPayload } from "../src/types.js";
import { renderExplanation } from "../src/views/explain.js";
import explanationJson from "./recorded/explanation.json";

const expl = explanationJson as unknown as ExplanationPayload;

describe("explanation drawer", () => {
  it("renders all four levels from the payload", () => {
    const mount = document.createElement("div");
    renderExplanation(mount, expl);

    const execLines = [...mount.querySelectorAll('[data-role="explanation-executive"] li')];
    expect(execLines.map((li) => li.textContent)).toEqual(expl.executive_summary);

    for (const [feature, phi] of Object.entries(expl.shap.attributions)) {
      const row = mount.querySelector(`[data-feature="${feature}"]`);
      expect(row, `attribution row for ${feature}`).not.toBeNull();
      expect(row!.textContent).toContain(phi.toFixed(4));
    }

    const comparative = mount.querySelector('[data-role="explanation-comparative"]')!;
    for (const alternative of Object.keys(expl.comparative)) {
      expect(comparative.textContent).toContain(alternative);
    }

    const cf = mount.querySelector('[data-role="explanation-counterfactual"]')!;
    expect(cf.textContent).toContain(String(expl.counterfactual.target_rank));
    expect(cf.querySelectorAll("ol li").length).toBe(expl.counterfactual.edits.length);
  });
});
