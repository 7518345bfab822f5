// Stubbed service: a fetch-compatible function driven by a route table,
// recording every request for assertions.

import type { FetchLike } from "../src/api.js";

export interface RecordedRequest {
  url: string;
  method: string;
  body?: unknown;
  headers: Record<string, string>;
}

export type Route = (req: RecordedRequest) => { status: number; body: unknown };

export function stubService(routes: Record<string, Route>) {
  const requests: RecordedRequest[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const req: RecordedRequest = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(init.body as string) : undefined,
      headers: (init?.headers as Record<string, string>) ?? {},
    };
    requests.push(req);
    const key = `${req.method} ${url.split("?")[0]}`;
    const route =
      routes[key] ??
      Object.entries(routes).find(([pattern]) => {
        const [method, path] = pattern.split(" ");
        return (
          method === req.method &&
          path.includes("*") &&
          new RegExp("^" + path.replace(/\*/g, "[^/]+") + "$").test(url.split("?")[0])
        );
      })?.[1];
    if (!route) {
      return new Response(JSON.stringify({ detail: `no stub for ${key}` }), {
        status: 500,
        headers: { "Content-Type": "application/json" },
      });
    }
    const out = route(req);
    return new Response(JSON.stringify(out.body), {
      status: out.status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchFn, requests };
}

export function offlineFetch(): FetchLike {
  return async () => {
    throw new TypeError("NetworkError: failed to fetch");
  };
}
