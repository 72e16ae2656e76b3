import { ApiClient, FetchHttp } from "./api.js";
import { App } from "./app.js";
import { el } from "./dom.js";

const DEFAULT_SPEC = {
  candidates: 200,
  roles: 20,
  skills: 30,
  bias_strength: 0.3,
  seed: 13,
};

function renderLauncher(mount: HTMLElement, app: App): void {
  const form = el("section", { class: "launcher" });
  form.appendChild(el("h2", {}, "start a review"));

  const datasetId = el("input", { value: "demo" }) as HTMLInputElement;
  const spec = el("textarea", { rows: "6" }) as HTMLTextAreaElement;
  spec.value = JSON.stringify(DEFAULT_SPEC, null, 2);
  const generate = el("input", { type: "checkbox", checked: "" }) as HTMLInputElement;
  const population = el("input", { type: "number", value: "40" }) as HTMLInputElement;
  const generations = el("input", { type: "number", value: "30" }) as HTMLInputElement;
  const seed = el("input", { type: "number", value: "5" }) as HTMLInputElement;

  const start = el("button", { type: "button" }, "generate and optimize");
  start.addEventListener("click", () => {
    let parsed: Record<string, unknown> | null = null;
    if (generate.checked) {
      try {
        parsed = JSON.parse(spec.value) as Record<string, unknown>;
      } catch (err) {
        window.alert(`generator spec is not valid JSON: ${String(err)}`);
        return;
      }
    }
    void app.startReview(datasetId.value.trim(), parsed, {
      population: Number(population.value),
      max_generations: Number(generations.value),
      seed: Number(seed.value),
    });
  });

  const field = (label: string, node: HTMLElement) => {
    const wrap = el("label", {}, label);
    wrap.appendChild(node);
    form.appendChild(wrap);
  };
  field("dataset id", datasetId);
  field("generate dataset first", generate);
  field("generator spec", spec);
  field("population", population);
  field("generations", generations);
  field("seed", seed);
  form.appendChild(start);
  mount.replaceChildren(form);
}

function boot(): void {
  const mount = document.getElementById("app");
  if (mount === null) return;
  const params = new URLSearchParams(window.location.search);
  const api = new ApiClient(new FetchHttp(params.get("api") ?? ""));
  const app = new App(api, mount);
  const job = params.get("job");
  if (job !== null) {
    void app.attachJob(job);
  } else {
    renderLauncher(mount, app);
  }
}

boot();
