import { describe, expect, it } from "vitest";

import type { FairnessPayload, OverrideBody, SelectionPayload } from "../src/types.js";
import { renderBoard } from "../src/views/board.js";
import fairnessBefore from "./recorded/fairness_before.json";
import selectionBefore from "./recorded/selection_before.json";

const selection = selectionBefore as unknown as SelectionPayload;
const fairness = fairnessBefore as unknown as FairnessPayload;

function boardWithDialog(): { mount: HTMLElement; submitted: OverrideBody[] } {
  const mount = document.createElement("div");
  const submitted: OverrideBody[] = [];
  const candidate = Object.keys(selection.assignments).sort()[0];
  renderBoard(mount, selection, fairness, candidate, {
    onOpenOverride: () => {},
    onCloseOverride: () => {},
    onOverride: (body) => submitted.push(body),
    onExplain: () => {},
  });
  return { mount, submitted };
}

describe("override justification gate", () => {
  it("blocks submission until the justification has substance", () => {
    const { mount, submitted } = boardWithDialog();
    const justification = mount.querySelector<HTMLTextAreaElement>(
      '[data-role="override-justification"]',
    )!;
    const submit = mount.querySelector<HTMLButtonElement>('[data-role="override-submit"]')!;

    expect(submit.disabled).toBe(true);
    submit.click();
    expect(submitted).toEqual([]);

    justification.value = "   ";
    justification.dispatchEvent(new Event("input", { bubbles: true }));
    expect(submit.disabled).toBe(true);
    submit.click();
    expect(submitted).toEqual([]);

    justification.value = "capacity shuffle approved by the panel";
    justification.dispatchEvent(new Event("input", { bubbles: true }));
    expect(submit.disabled).toBe(false);

    justification.value = "";
    justification.dispatchEvent(new Event("input", { bubbles: true }));
    expect(submit.disabled).toBe(true);
    submit.click();
    expect(submitted).toEqual([]);
  });

  it("passes the justification through once it is non-empty", () => {
    const { mount, submitted } = boardWithDialog();
    const justification = mount.querySelector<HTMLTextAreaElement>(
      '[data-role="override-justification"]',
    )!;
    const submit = mount.querySelector<HTMLButtonElement>('[data-role="override-submit"]')!;

    justification.value = "documented exception, see ticket 118";
    justification.dispatchEvent(new Event("input", { bubbles: true }));
    submit.click();

    expect(submitted.length).toBe(1);
    expect(submitted[0].justification).toBe("documented exception, see ticket 118");
    expect(submitted[0].to_role).toBeNull();
  });
});
