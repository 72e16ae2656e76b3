import { el, fixed } from "../dom.js";
import type { ExplanationPayload } from "../types.js";

// Four levels, in reading order: executive summary, per-signal attributions,
// comparison against the alternatives, and the counterfactual path.
export function renderExplanation(mount: HTMLElement, expl: ExplanationPayload): void {
  const box = el("section", { class: "explanation", "data-role": "explanation" });
  box.appendChild(el("h2", {}, `why ${expl.candidate_id} -> ${expl.role_id}`));

  const exec = el("ul", { "data-role": "explanation-executive" });
  for (const line of expl.executive_summary) {
    exec.appendChild(el("li", {}, line));
  }
  box.appendChild(exec);

  const detail = el("table", { class: "metrics", "data-role": "explanation-detail" });
  const header = el("tr");
  header.appendChild(el("th", {}, "signal"));
  header.appendChild(el("th", {}, "contribution"));
  detail.appendChild(header);
  const rows = Object.entries(expl.shap.attributions).sort(
    (a, b) => Math.abs(b[1]) - Math.abs(a[1]),
  );
  for (const [name, phi] of rows) {
    const row = el("tr", { "data-feature": name });
    row.appendChild(el("td", {}, name));
    row.appendChild(el("td", {}, fixed(phi)));
    detail.appendChild(row);
  }
  box.appendChild(detail);
  box.appendChild(
    el(
      "p",
      {},
      `baseline ${fixed(expl.shap.baseline)}, score ${fixed(expl.shap.score)}`,
    ),
  );

  const comparative = el("div", { "data-role": "explanation-comparative" });
  comparative.appendChild(el("h3", {}, "versus alternatives"));
  for (const [alternative, rows] of Object.entries(expl.comparative)) {
    comparative.appendChild(el("h4", {}, alternative));
    const list = el("ul");
    for (const { feature, delta_phi } of rows) {
      list.appendChild(el("li", {}, `${feature}: ${fixed(delta_phi)}`));
    }
    comparative.appendChild(list);
  }
  box.appendChild(comparative);

  const cf = el("div", { "data-role": "explanation-counterfactual" });
  cf.appendChild(el("h3", {}, "what would change the outcome"));
  cf.appendChild(
    el(
      "p",
      {},
      expl.counterfactual.achievable
        ? `target rank ${expl.counterfactual.target_rank} is reachable:`
        : `target rank ${expl.counterfactual.target_rank} is out of reach with the allowed edits`,
    ),
  );
  const edits = el("ol");
  for (const edit of expl.counterfactual.edits) {
    edits.appendChild(el("li", {}, `${edit.kind}: ${edit.detail} (rank ${edit.resulting_rank})`));
  }
  cf.appendChild(edits);
  box.appendChild(cf);

  mount.replaceChildren(box);
}
