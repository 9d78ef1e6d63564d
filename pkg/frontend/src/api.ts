// Typed client for the dashboard server's JSON endpoints. Every response
// carries a meta triple (t_c, t_s, c_uc); errors surface as ApiError with
// the HTTP status so the UI can render 409s inline.

export interface Meta {
  t_c: number;
  t_s: number;
  c_uc: number;
}

export interface ViewState {
  id: string;
  kind: "result" | "uc";
  version: number;
  stale: boolean;
  payload: string | null;
}

export interface ReadResponse {
  states: ViewState[];
  lens: string;
  k: number;
  chosen_version: number | null;
  meta: Meta;
  metrics: { invisibility_ms: number; staleness_ms: number };
}

export interface DashboardInfo {
  layout: string[];
  per_row: number;
  base_nodes: string[];
  config: SessionConfig;
  meta: Meta;
}

export interface SessionConfig {
  lens: string;
  k: number;
  policy: string;
  periodic_interval_ms: number | null;
}

export interface RefreshResponse {
  version: number;
  meta: Meta;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const message =
      typeof body === "object" && body && "error" in body
        ? String((body as { error: unknown }).error)
        : `HTTP ${response.status}`;
    throw new ApiError(response.status, message);
  }
  return body as T;
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  dashboard(): Promise<DashboardInfo> {
    return fetch(`${this.base}/dashboard`).then((r) => asJson<DashboardInfo>(r));
  }

  read(nodes: string[]): Promise<ReadResponse> {
    const query = encodeURIComponent(nodes.join(","));
    return fetch(`${this.base}/read?nodes=${query}`).then((r) =>
      asJson<ReadResponse>(r),
    );
  }

  refresh(writeSet?: string[]): Promise<RefreshResponse> {
    return fetch(`${this.base}/refresh`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(writeSet ? { write_set: writeSet } : {}),
    }).then((r) => asJson<RefreshResponse>(r));
  }

  configure(change: Partial<SessionConfig>): Promise<SessionConfig & { meta: Meta }> {
    return fetch(`${this.base}/configure`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(change),
    }).then((r) => asJson<SessionConfig & { meta: Meta }>(r));
  }
}
