/** Shared fakes: a scripted fetch and a manual scheduler. */

import { ApiClient } from "../src/api.js";

export type Route = (method: string, path: string, body: string | undefined)
  => { status: number; body: unknown } | undefined;

export function fakeFetch(route: Route) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const hit = route(method, url, init?.body as string | undefined);
    if (!hit) {
      return new Response(
        JSON.stringify({ error: { code: 404, message: `no stub for ${method} ${url}` } }),
        { status: 404, headers: { "content-type": "application/json" } });
    }
    return new Response(JSON.stringify(hit.body), {
      status: hit.status,
      headers: { "content-type": "application/json" },
    });
  };
}

export function clientWith(route: Route): ApiClient {
  return new ApiClient("", fakeFetch(route));
}

export class ManualScheduler {
  pending: Array<{ fn: () => void; ms: number; id: number }> = [];
  private next = 1;

  set = (fn: () => void, ms: number): unknown => {
    const id = this.next++;
    this.pending.push({ fn, ms, id });
    return id;
  };

  clear = (handle: unknown): void => {
    this.pending = this.pending.filter((p) => p.id !== handle);
  };

  /** fire everything currently queued */
  flush(): void {
    const batch = this.pending;
    this.pending = [];
    batch.forEach((p) => p.fn());
  }
}

/** Resolvable gate for ordering async responses in tests. */
export function gate<T>(): { promise: Promise<T>; open: (value: T) => void } {
  let open!: (value: T) => void;
  const promise = new Promise<T>((resolve) => (open = resolve));
  return { promise, open };
}
