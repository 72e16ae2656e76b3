import { ApiError, detailOf, type Http } from "../src/api.js";

export interface Scripted {
  status?: number;
  body: unknown;
}

// Replays recorded service payloads in order; throws on anything the test
// did not script, so an unexpected request fails loudly.
export class FakeHttp implements Http {
  readonly calls: { method: string; path: string; body?: unknown }[] = [];

  constructor(private readonly script: Record<string, Scripted[]>) {}

  async request(method: string, path: string, body?: unknown): Promise<unknown> {
    this.calls.push({ method, path, body });
    const key = `${method} ${path}`;
    const queue = this.script[key];
    const next = queue?.shift();
    if (next === undefined) {
      throw new Error(`unscripted request: ${key}`);
    }
    if (next.status !== undefined && next.status >= 400) {
      throw new ApiError(next.status, detailOf(next.body, next.status));
    }
    return structuredClone(next.body);
  }

  posts(): { path: string; body?: unknown }[] {
    return this.calls.filter((c) => c.method === "POST");
  }
}

export function text(root: ParentNode, selector: string): string {
  const node = root.querySelector(selector);
  if (node === null) throw new Error(`missing element: ${selector}`);
  return node.textContent ?? "";
}
