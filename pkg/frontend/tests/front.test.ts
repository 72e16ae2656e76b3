import { describe, expect, it } from "vitest";

import { autoFocusIndex } from "../src/app.js";
import type { FrontPayload } from "../src/types.js";
import { renderFront } from "../src/views/front.js";
import frontJson from "./recorded/front.json";

const front = frontJson as unknown as FrontPayload;

describe("front view", () => {
  it("renders exactly the payload members, one point each", () => {
    const mount = document.createElement("div");
    renderFront(mount, front, null, () => {});

    const points = [...mount.querySelectorAll(".front-point")];
    expect(points.length).toBe(front.members.length);
    const indexes = points.map((p) => Number(p.getAttribute("data-index")));
    expect(new Set(indexes).size).toBe(front.members.length);

    for (const member of front.members) {
      const point = mount.querySelector(`.front-point[data-index="${member.index}"]`);
      expect(point, `point for member ${member.index}`).not.toBeNull();
      const tip = point!.querySelector("title")?.textContent ?? "";
      expect(tip).toContain(`merit ${member.objectives.merit.toFixed(4)}`);
      expect(tip).toContain(`diversity ${member.objectives.diversity.toFixed(4)}`);
      expect(tip).toContain(`preference ${member.objectives.preference.toFixed(4)}`);
      expect(tip).toContain(`${Object.keys(member.assignments).length} assigned`);
    }
  });

  it("reports the clicked member's index", () => {
    const mount = document.createElement("div");
    const picked: number[] = [];
    renderFront(mount, front, null, (index) => picked.push(index));

    const member = front.members[3];
    const point = mount.querySelector(`.front-point[data-index="${member.index}"]`);
    (point as SVGElement).dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(picked).toEqual([member.index]);
  });

  it("highlights the picked member and only it", () => {
    const mount = document.createElement("div");
    const member = front.members[2];
    renderFront(mount, front, member.index, () => {});

    const selected = [...mount.querySelectorAll(".front-point.selected")];
    expect(selected.length).toBe(1);
    expect(selected[0].getAttribute("data-index")).toBe(String(member.index));
  });

  it("auto-focuses only a single-member front", () => {
    expect(autoFocusIndex(front)).toBeNull();
    const solo = { ...front, members: [front.members[0]] };
    expect(autoFocusIndex(solo)).toBe(front.members[0].index);
  });
});
