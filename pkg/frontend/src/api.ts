/** Typed fetch client for the participant HTTP API. */

import type {
  AssignmentDoc,
  AnswerValue,
  ReceiptDoc,
  SnapshotDoc,
  StudyDoc,
  ValidationFailure,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    public readonly status: number,
    public readonly detail: string,
    public readonly failures: ValidationFailure[] = [],
  ) {
    super(`${code}: ${detail}`);
  }
}

/** Network-level failure (server unreachable, connection dropped). */
export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`network failure: ${String(cause)}`);
  }
}

interface ErrorBody {
  error?: string;
  detail?: string;
  failures?: ValidationFailure[];
}

export class CaseletClient {
  token: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly locale?: string,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, {
        method,
        headers,
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) {
      let parsed: ErrorBody = {};
      try {
        parsed = (await response.json()) as ErrorBody;
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(
        parsed.error ?? `HTTP${response.status}`,
        response.status,
        parsed.detail ?? response.statusText,
        parsed.failures ?? [],
      );
    }
    return (await response.json()) as T;
  }

  private withLocale(path: string): string {
    if (!this.locale) return path;
    const sep = path.includes("?") ? "&" : "?";
    return `${path}${sep}locale=${encodeURIComponent(this.locale)}`;
  }

  async signup(email: string, password: string): Promise<string> {
    const out = await this.request<{ token: string }>("POST", "/v1/auth/signup", {
      email,
      password,
    });
    this.token = out.token;
    return out.token;
  }

  async login(email: string, password: string, otp?: string): Promise<string> {
    const out = await this.request<{ token: string }>("POST", "/v1/auth/login", {
      email,
      password,
      ...(otp ? { otp } : {}),
    });
    this.token = out.token;
    return out.token;
  }

  async studies(): Promise<StudyDoc[]> {
    const out = await this.request<{ studies: StudyDoc[] }>("GET", "/v1/studies");
    return out.studies;
  }

  async enter(studyKey: string, consentVersion: string): Promise<AssignmentDoc[]> {
    const out = await this.request<{ assignments: AssignmentDoc[] }>(
      "POST",
      `/v1/studies/${encodeURIComponent(studyKey)}/enter`,
      { consentVersion },
    );
    return out.assignments;
  }

  async assignments(studyKey: string): Promise<AssignmentDoc[]> {
    const out = await this.request<{ assignments: AssignmentDoc[] }>(
      "GET",
      `/v1/studies/${encodeURIComponent(studyKey)}/assignments`,
    );
    return out.assignments;
  }

  async openSession(
    studyKey: string,
    surveyKey: string,
  ): Promise<{ sessionId: string; snapshot: SnapshotDoc }> {
    return this.request(
      "POST",
      this.withLocale(
        `/v1/studies/${encodeURIComponent(studyKey)}/surveys/${encodeURIComponent(surveyKey)}/sessions`,
      ),
      {},
    );
  }

  async answer(
    sessionId: string,
    itemKey: string,
    slotKey: string,
    value: AnswerValue,
  ): Promise<SnapshotDoc> {
    const out = await this.request<{ snapshot: SnapshotDoc }>(
      "POST",
      this.withLocale(`/v1/sessions/${encodeURIComponent(sessionId)}/answers`),
      { itemKey, slotKey, value },
    );
    return out.snapshot;
  }

  async move(sessionId: string, direction: "next" | "prev"): Promise<SnapshotDoc> {
    const out = await this.request<{ snapshot: SnapshotDoc }>(
      "POST",
      this.withLocale(`/v1/sessions/${encodeURIComponent(sessionId)}/move`),
      { direction },
    );
    return out.snapshot;
  }

  async submit(sessionId: string): Promise<ReceiptDoc> {
    const out = await this.request<{ receipt: ReceiptDoc }>(
      "POST",
      `/v1/sessions/${encodeURIComponent(sessionId)}/submit`,
    );
    return out.receipt;
  }
}
