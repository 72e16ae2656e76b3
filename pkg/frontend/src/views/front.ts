import { el, fixed, svgEl } from "../dom.js";
import type { FrontMember, FrontPayload } from "../types.js";

const WIDTH = 680;
const HEIGHT = 420;
const PAD = 42;

// Plot coordinates only; the numbers shown to the user are payload values.
function scaleOf(values: number[], lo: number, hi: number): (v: number) => number {
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  return (v) => lo + ((v - min) / (max - min)) * (hi - lo);
}

export function tooltipFor(member: FrontMember): string {
  const o = member.objectives;
  const parts = [
    `plan ${member.index}: merit ${fixed(o.merit)}`,
    `diversity ${fixed(o.diversity)}`,
    `preference ${fixed(o.preference)}`,
    `${Object.keys(member.assignments).length} assigned`,
  ];
  if (!member.feasible) parts.push(`${member.violations.length} violations`);
  return parts.join(", ");
}

export function renderFront(
  mount: HTMLElement,
  front: FrontPayload,
  picked: number | null,
  onPick: (index: number) => void,
): void {
  const sx = scaleOf(
    front.members.map((m) => m.objectives.merit),
    PAD,
    WIDTH - PAD,
  );
  const sy = scaleOf(
    front.members.map((m) => m.objectives.diversity),
    HEIGHT - PAD,
    PAD,
  );

  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "front-plot",
    role: "img",
  });
  svg.appendChild(
    svgEl("line", {
      x1: String(PAD), y1: String(HEIGHT - PAD),
      x2: String(WIDTH - PAD), y2: String(HEIGHT - PAD),
      class: "axis",
    }),
  );
  svg.appendChild(
    svgEl("line", {
      x1: String(PAD), y1: String(PAD),
      x2: String(PAD), y2: String(HEIGHT - PAD),
      class: "axis",
    }),
  );

  for (const member of front.members) {
    const o = member.objectives;
    const classes = ["front-point"];
    if (member.index === picked) classes.push("selected");
    if (!member.feasible) classes.push("infeasible");
    const point = svgEl("circle", {
      class: classes.join(" "),
      "data-index": String(member.index),
      cx: fixed(sx(o.merit), 1),
      cy: fixed(sy(o.diversity), 1),
      // preference shows as point size
      r: fixed(4 + o.preference * 6, 1),
    });
    const tip = svgEl("title");
    tip.textContent = tooltipFor(member);
    point.appendChild(tip);
    point.addEventListener("click", () => onPick(member.index));
    svg.appendChild(point);
  }

  const caption = el(
    "p",
    { class: "front-caption" },
    `${front.members.length} plans on the front, ` +
      `diversity weight ${fixed(front.diversity_weight, 3)}, ` +
      `${front.escalations.length} escalations. ` +
      "x merit, y diversity, size preference. Click a point to review it.",
  );

  mount.replaceChildren(svg, caption);
}
