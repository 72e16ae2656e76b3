import { ApiClient, ApiError } from "./api.js";
import { el } from "./dom.js";
import type {
  ExplanationPayload,
  FairnessPayload,
  FrontPayload,
  OverrideBody,
  SelectionPayload,
} from "./types.js";
import { renderBoard } from "./views/board.js";
import { renderExplanation } from "./views/explain.js";
import { renderFront } from "./views/front.js";

export function autoFocusIndex(front: FrontPayload): number | null {
  return front.members.length === 1 ? front.members[0].index : null;
}

// Which front member the server-side selection corresponds to, by comparing
// assignment maps. After overrides the selection matches no member; that is
// fine, nothing gets highlighted.
export function matchSelection(
  front: FrontPayload,
  selection: SelectionPayload,
): number | null {
  const wanted = selection.assignments;
  const wantedKeys = Object.keys(wanted);
  for (const member of front.members) {
    const keys = Object.keys(member.assignments);
    if (keys.length !== wantedKeys.length) continue;
    if (keys.every((k) => member.assignments[k] === wanted[k])) return member.index;
  }
  return null;
}

interface AppState {
  jobId: string | null;
  front: FrontPayload | null;
  selection: SelectionPayload | null;
  fairness: FairnessPayload | null;
  explanation: ExplanationPayload | null;
  picked: number | null;
  overrideFor: string | null;
  weights: [number, number, number];
  error: string | null;
  note: string | null;
}

export class App {
  readonly state: AppState = {
    jobId: null,
    front: null,
    selection: null,
    fairness: null,
    explanation: null,
    picked: null,
    overrideFor: null,
    weights: [0.45, 0.35, 0.2],
    error: null,
    note: null,
  };

  private pending: Promise<void> = Promise.resolve();
  private retryFn: (() => void) | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly mount: HTMLElement,
  ) {}

  // Actions are serialized; await this to know the DOM is settled.
  idle(): Promise<void> {
    return this.pending;
  }

  private run(fn: () => Promise<void>): Promise<void> {
    const step = async () => {
      this.state.error = null;
      this.retryFn = null;
      try {
        await fn();
      } catch (err) {
        this.state.error = err instanceof ApiError ? err.detail : String(err);
        this.retryFn = () => void this.run(fn);
      }
      this.state.note = null;
      this.render();
    };
    this.pending = this.pending.then(step);
    return this.pending;
  }

  private async loadJob(jobId: string): Promise<void> {
    this.state.jobId = jobId;
    this.state.front = await this.api.front(jobId);
    this.state.selection = await this.api.selection(jobId);
    this.state.fairness = await this.api.fairness(jobId);
    this.state.weights = this.state.selection.policy_weights;
    this.state.picked =
      autoFocusIndex(this.state.front) ??
      matchSelection(this.state.front, this.state.selection);
    this.state.explanation = null;
    this.state.overrideFor = null;
  }

  attachJob(jobId: string): Promise<void> {
    return this.run(() => this.loadJob(jobId));
  }

  startReview(
    datasetId: string,
    generatorSpec: Record<string, unknown> | null,
    allocation: Record<string, unknown>,
  ): Promise<void> {
    return this.run(async () => {
      if (generatorSpec !== null) {
        await this.api.generateDataset(datasetId, generatorSpec);
      }
      this.state.note = "optimizing...";
      this.render();
      const { job_id } = await this.api.submitAllocation({
        dataset_id: datasetId,
        ...allocation,
      });
      await this.api.pollJob(job_id);
      await this.loadJob(job_id);
    });
  }

  pick(index: number): Promise<void> {
    return this.run(async () => {
      this.state.picked = index;
    });
  }

  selectByWeights(): Promise<void> {
    return this.run(async () => {
      const jobId = this.requireJob();
      this.state.selection = await this.api.select(jobId, this.state.weights);
      this.state.fairness = await this.api.fairness(jobId);
      if (this.state.front !== null) {
        this.state.picked = matchSelection(this.state.front, this.state.selection);
      }
      this.state.explanation = null;
      this.state.overrideFor = null;
    });
  }

  applyOverride(body: OverrideBody): Promise<void> {
    return this.run(async () => {
      const jobId = this.requireJob();
      // No optimistic update: state changes only from the server's ack.
      const ack = await this.api.override(jobId, body);
      this.state.selection = ack.selection;
      this.state.fairness = await this.api.fairness(jobId);
      this.state.overrideFor = null;
      this.state.explanation = null;
      if (this.state.front !== null) {
        this.state.picked = matchSelection(this.state.front, this.state.selection);
      }
    });
  }

  explain(candidateId: string, roleId: string): Promise<void> {
    return this.run(async () => {
      const jobId = this.requireJob();
      this.state.explanation = await this.api.explanation(jobId, candidateId, roleId);
    });
  }

  sendFeedback(): Promise<void> {
    return this.run(async () => {
      const payload = await this.api.sendFeedback(this.state.weights);
      this.state.weights = payload.weights;
    });
  }

  private requireJob(): string {
    if (this.state.jobId === null) throw new Error("no job attached");
    return this.state.jobId;
  }

  render(): void {
    const root = el("div", { class: "layout" });

    if (this.state.error !== null) {
      const banner = el("div", { class: "error", "data-role": "error" });
      banner.appendChild(el("span", { "data-role": "error-detail" }, this.state.error));
      const retry = el("button", { type: "button", "data-role": "retry" }, "retry");
      retry.addEventListener("click", () => this.retryFn?.());
      banner.appendChild(retry);
      root.appendChild(banner);
    }
    if (this.state.note !== null) {
      root.appendChild(el("p", { class: "note", "data-role": "note" }, this.state.note));
    }

    if (this.state.front !== null) {
      root.appendChild(this.weightsPanel());
      const frontPanel = el("section", { "data-role": "front-panel" });
      renderFront(frontPanel, this.state.front, this.state.picked, (index) => {
        void this.pick(index);
      });
      root.appendChild(frontPanel);
    }

    if (this.state.selection !== null && this.state.fairness !== null) {
      const boardPanel = el("section", { "data-role": "board-panel" });
      renderBoard(boardPanel, this.state.selection, this.state.fairness, this.state.overrideFor, {
        onOpenOverride: (candidateId) => {
          void this.run(async () => {
            this.state.overrideFor = candidateId;
          });
        },
        onCloseOverride: () => {
          void this.run(async () => {
            this.state.overrideFor = null;
          });
        },
        onOverride: (body) => void this.applyOverride(body),
        onExplain: (candidateId, roleId) => void this.explain(candidateId, roleId),
      });
      root.appendChild(boardPanel);
    }

    if (this.state.explanation !== null) {
      const explPanel = el("section", { "data-role": "explanation-panel" });
      renderExplanation(explPanel, this.state.explanation);
      root.appendChild(explPanel);
    }

    this.mount.replaceChildren(root);
  }

  private weightsPanel(): HTMLElement {
    const panel = el("section", { class: "weights" });
    const names = ["merit", "diversity", "preference"] as const;
    names.forEach((name, i) => {
      const label = el("label", {}, name);
      const input = el("input", {
        type: "number",
        min: "0",
        max: "1",
        step: "0.05",
        value: String(this.state.weights[i]),
        "data-role": `weight-${name}`,
      }) as HTMLInputElement;
      input.addEventListener("change", () => {
        const parsed = Number(input.value);
        if (Number.isFinite(parsed) && parsed >= 0) this.state.weights[i] = parsed;
      });
      label.appendChild(input);
      panel.appendChild(label);
    });
    const select = el("button", { type: "button", "data-role": "select-plan" }, "select plan");
    select.addEventListener("click", () => void this.selectByWeights());
    const feedback = el(
      "button",
      { type: "button", "data-role": "send-feedback" },
      "save as default weights",
    );
    feedback.addEventListener("click", () => void this.sendFeedback());
    panel.appendChild(select);
    panel.appendChild(feedback);
    return panel;
  }
}
