/** Typed client for the pidcopilot session service. */

export interface TurnInfo {
  prompt: string;
  plan: string[];
  diagnostics: string[];
}

export interface SessionPayload {
  id: string;
  xml: string;
  svg: string;
  description: string;
  dsl: string;
  turns: TurnInfo[];
  diagnostics?: string[];
}

export class ApiError extends Error {
  readonly code: string;
  readonly details: string[];

  constructor(code: string, message: string, details: string[] = []) {
    super(message);
    this.code = code;
    this.details = details;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(reply: Response): Promise<void> {
  if (reply.ok) return;
  let code = `http_${reply.status}`;
  let message = reply.statusText || `HTTP ${reply.status}`;
  let details: string[] = [];
  try {
    const body = await reply.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
      details = Array.isArray(body.details) ? body.details : [];
    }
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  throw new ApiError(code, message, details);
}

export class SessionApi {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const reply = await this.fetchFn(this.baseUrl + path, init);
    await raiseForStatus(reply);
    return (await reply.json()) as T;
  }

  private async text(path: string): Promise<string> {
    const reply = await this.fetchFn(this.baseUrl + path);
    await raiseForStatus(reply);
    return reply.text();
  }

  createSession(): Promise<SessionPayload> {
    return this.json("/sessions", { method: "POST" });
  }

  getSession(id: string): Promise<SessionPayload> {
    return this.json(`/sessions/${id}`);
  }

  runTurn(id: string, prompt: string): Promise<SessionPayload> {
    return this.json(`/sessions/${id}/turns`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ prompt }),
    });
  }

  importXml(xml: string): Promise<SessionPayload> {
    return this.json("/sessions/import", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ xml }),
    });
  }

  /** Raw resource downloads; byte-identical to what the state carries. */
  fetchXml(id: string): Promise<string> {
    return this.text(`/sessions/${id}/pid.xml`);
  }

  fetchSvg(id: string): Promise<string> {
    return this.text(`/sessions/${id}/pid.svg`);
  }

  fetchDescription(id: string): Promise<string> {
    return this.text(`/sessions/${id}/description`);
  }

  async deleteSession(id: string): Promise<void> {
    const reply = await this.fetchFn(`${this.baseUrl}/sessions/${id}`, {
      method: "DELETE",
    });
    await raiseForStatus(reply);
  }
}
