/**
 * Typed fetch wrapper for the level service.
 *
 * Responses that feed the explanation panel keep their raw body text next to
 * the parsed object, because the panel promises to show the service's answer
 * byte for byte.  Failures of any kind surface as ServiceError: HTTP error
 * bodies contribute their code and message, transport problems get the code
 * "unreachable".
 */

import {
  AppendTurnRequest,
  ErrorBody,
  ExplainResponse,
  HealthResponse,
  LegendResponse,
  SessionEnvelope,
  SuggestResponse,
} from "./protocol.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly code: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export interface RawResponse<T> {
  body: T;
  /** The exact response body text, unreformatted. */
  text: string;
}

/** What the editor needs from the service; ServiceClient is the HTTP one. */
export interface LevelService {
  health(): Promise<HealthResponse>;
  legend(): Promise<LegendResponse>;
  suggest(level: string[]): Promise<RawResponse<SuggestResponse>>;
  explain(level: string[], layer?: number): Promise<RawResponse<ExplainResponse>>;
  appendTurn(request: AppendTurnRequest): Promise<SessionEnvelope>;
  getSession(sessionId: string): Promise<SessionEnvelope>;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient implements LevelService {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(method: "GET" | "POST", path: string, payload?: unknown): Promise<RawResponse<unknown>> {
    const init: RequestInit = { method };
    if (payload !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(payload);
    }
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`, 0, "unreachable");
    }
    const text = await response.text();
    let body: unknown;
    try {
      body = JSON.parse(text);
    } catch {
      throw new ServiceError(`service sent non-JSON (status ${response.status})`, response.status, "bad_body");
    }
    if (!response.ok) {
      const err = body as Partial<ErrorBody>;
      throw new ServiceError(
        err.message ?? `request failed with status ${response.status}`,
        response.status,
        err.code ?? "error",
      );
    }
    return { body, text };
  }

  async health(): Promise<HealthResponse> {
    return (await this.request("GET", "/health")).body as HealthResponse;
  }

  async legend(): Promise<LegendResponse> {
    return (await this.request("GET", "/legend")).body as LegendResponse;
  }

  async suggest(level: string[]): Promise<RawResponse<SuggestResponse>> {
    const raw = await this.request("POST", "/suggest", { level });
    return { body: raw.body as SuggestResponse, text: raw.text };
  }

  async explain(level: string[], layer?: number): Promise<RawResponse<ExplainResponse>> {
    const payload = layer === undefined ? { level } : { level, layer };
    const raw = await this.request("POST", "/explain", payload);
    return { body: raw.body as ExplainResponse, text: raw.text };
  }

  async appendTurn(request: AppendTurnRequest): Promise<SessionEnvelope> {
    return (await this.request("POST", "/session/append-turn", request)).body as SessionEnvelope;
  }

  async getSession(sessionId: string): Promise<SessionEnvelope> {
    const query = encodeURIComponent(sessionId);
    return (await this.request("GET", `/session/get?id=${query}`)).body as SessionEnvelope;
  }
}
