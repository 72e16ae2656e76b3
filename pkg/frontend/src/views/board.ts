import { el, fixed } from "../dom.js";
import type { FairnessPayload, OverrideBody, SelectionPayload } from "../types.js";

export interface BoardHandlers {
  onOpenOverride(candidateId: string): void;
  onCloseOverride(): void;
  onOverride(body: OverrideBody): void;
  onExplain(candidateId: string, roleId: string): void;
}

function objectivesBlock(selection: SelectionPayload): HTMLElement {
  const dl = el("dl", { class: "objectives" });
  const rows: [string, string, string][] = [
    ["epoch", "selection-epoch", String(selection.selection_epoch)],
    ["merit", "objective-merit", fixed(selection.objectives.merit)],
    ["diversity", "objective-diversity", fixed(selection.objectives.diversity)],
    ["preference", "objective-preference", fixed(selection.objectives.preference)],
    ["overrides", "overrides-applied", String(selection.overrides_applied)],
  ];
  for (const [label, role, value] of rows) {
    dl.appendChild(el("dt", {}, label));
    dl.appendChild(el("dd", { "data-role": role }, value));
  }
  return dl;
}

function fairnessBlock(fairness: FairnessPayload): HTMLElement {
  const box = el("section", { class: "fairness" });
  const head = el("p", {}, "fairness composite ");
  head.appendChild(el("strong", { "data-role": "fairness-composite" }, fixed(fairness.composite)));
  box.appendChild(head);

  const table = el("table", { class: "metrics" });
  const header = el("tr");
  for (const name of ["category", "parity gap", "opportunity gap", "calibration gap"]) {
    header.appendChild(el("th", {}, name));
  }
  table.appendChild(header);

  const overall = el("tr");
  overall.appendChild(el("td", {}, "overall"));
  overall.appendChild(
    el("td", { "data-role": "fairness-overall-demographic_parity" }, fixed(fairness.demographic_parity)),
  );
  overall.appendChild(
    el("td", { "data-role": "fairness-overall-equalized_opportunity" }, fixed(fairness.equalized_opportunity)),
  );
  overall.appendChild(el("td", { "data-role": "fairness-overall-calibration" }, fixed(fairness.calibration)));
  table.appendChild(overall);

  for (const [category, metrics] of Object.entries(fairness.per_category)) {
    const row = el("tr");
    row.appendChild(el("td", {}, category));
    for (const metric of ["demographic_parity", "equalized_opportunity", "calibration"]) {
      row.appendChild(
        el("td", { "data-role": `fairness-${category}-${metric}` }, fixed(metrics[metric] ?? 0)),
      );
    }
    table.appendChild(row);
  }
  box.appendChild(table);
  return box;
}

function overrideDialog(candidateId: string, handlers: BoardHandlers): HTMLElement {
  const dialog = el("div", { class: "override-dialog", "data-role": "override-dialog" });
  const intro = el("p", {}, "move ");
  intro.appendChild(el("strong", { "data-role": "override-candidate" }, candidateId));
  intro.appendChild(document.createTextNode(" to:"));
  dialog.appendChild(intro);

  const target = el("input", {
    "data-role": "override-target",
    placeholder: "role id, leave empty to unassign",
  }) as HTMLInputElement;
  const reason = el("input", {
    "data-role": "override-reason",
    value: "unspecified",
  }) as HTMLInputElement;
  const justification = el("textarea", {
    "data-role": "override-justification",
    placeholder: "justification (required)",
  }) as HTMLTextAreaElement;
  const submit = el("button", { type: "button", "data-role": "override-submit" }, "apply") as HTMLButtonElement;
  const cancel = el("button", { type: "button", "data-role": "override-cancel" }, "cancel") as HTMLButtonElement;

  // Submission stays disabled until the justification has substance; the
  // server enforces the same rule, this just keeps honest requests honest.
  submit.disabled = true;
  justification.addEventListener("input", () => {
    submit.disabled = justification.value.trim() === "";
  });
  submit.addEventListener("click", () => {
    if (submit.disabled || justification.value.trim() === "") return;
    const to = target.value.trim();
    handlers.onOverride({
      candidate_id: candidateId,
      to_role: to === "" ? null : to,
      justification: justification.value,
      reason: reason.value.trim() === "" ? "unspecified" : reason.value.trim(),
      actor: "console",
    });
  });
  cancel.addEventListener("click", () => handlers.onCloseOverride());

  dialog.appendChild(el("label", {}, "target role"));
  dialog.appendChild(target);
  dialog.appendChild(el("label", {}, "reason"));
  dialog.appendChild(reason);
  dialog.appendChild(el("label", {}, "justification"));
  dialog.appendChild(justification);
  dialog.appendChild(submit);
  dialog.appendChild(cancel);
  return dialog;
}

export function renderBoard(
  mount: HTMLElement,
  selection: SelectionPayload,
  fairness: FairnessPayload,
  overrideFor: string | null,
  handlers: BoardHandlers,
): void {
  const board = el("section", { class: "board" });
  board.appendChild(el("h2", {}, "selected plan"));
  board.appendChild(objectivesBlock(selection));

  if (selection.violations.length > 0) {
    const list = el("ul", { class: "violations" });
    for (const [constraint, amount] of selection.violations) {
      list.appendChild(el("li", {}, `${constraint}: ${fixed(amount, 2)}`));
    }
    board.appendChild(list);
  }

  board.appendChild(fairnessBlock(fairness));

  const table = el("table", { class: "assignments" });
  const header = el("tr");
  for (const name of ["candidate", "role", ""]) header.appendChild(el("th", {}, name));
  table.appendChild(header);
  for (const [candidateId, roleId] of Object.entries(selection.assignments).sort()) {
    const row = el("tr");
    row.appendChild(el("td", {}, candidateId));
    row.appendChild(el("td", {}, roleId));
    const actions = el("td");
    const explain = el(
      "button",
      { type: "button", "data-role": "explain-open", "data-candidate": candidateId, "data-target-role": roleId },
      "explain",
    );
    explain.addEventListener("click", () => handlers.onExplain(candidateId, roleId));
    const override = el(
      "button",
      { type: "button", "data-role": "override-open", "data-candidate": candidateId },
      "override",
    );
    override.addEventListener("click", () => handlers.onOpenOverride(candidateId));
    actions.appendChild(explain);
    actions.appendChild(override);
    row.appendChild(actions);
    table.appendChild(row);
  }
  board.appendChild(table);

  if (overrideFor !== null) {
    board.appendChild(overrideDialog(overrideFor, handlers));
  }

  mount.replaceChildren(board);
}
