/** Thin typed client for the session service.  Every mutation the
 * console performs goes through one of these calls. */

import type {
  DelegateResponse,
  EventsResponse,
  FeedbackKind,
  FeedbackResponse,
  GroupView,
  SessionSnapshot,
  UpdateRow,
} from "./types.js";

/** A non-2xx answer from the service, with the status and the server's
 * explanation preserved for the UI. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** The request never reached the service (network down, server gone). */
export class ConnectionLost extends Error {
  constructor(cause: unknown) {
    super("connection lost");
    this.name = "ConnectionLost";
    this.cause = cause;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ConnectionLost(err);
  }
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (typeof body.detail === "string") detail = body.detail;
    } catch {
      /* keep the status text */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(readonly base: string = "") {}

  session(): Promise<SessionSnapshot> {
    return request(`${this.base}/api/session`);
  }

  async groups(): Promise<GroupView[]> {
    const body = await request<{ groups: GroupView[] }>(
      `${this.base}/api/groups`,
    );
    return body.groups;
  }

  async select(gid: string): Promise<UpdateRow[]> {
    const body = await request<{ selected: string; updates: UpdateRow[] }>(
      `${this.base}/api/groups/${gid}/select`,
      { method: "POST" },
    );
    return body.updates;
  }

  async updates(gid: string): Promise<UpdateRow[]> {
    const body = await request<{ group: string; updates: UpdateRow[] }>(
      `${this.base}/api/groups/${gid}/updates`,
    );
    return body.updates;
  }

  feedback(
    updateId: string,
    kind: FeedbackKind,
    newValue?: string,
  ): Promise<FeedbackResponse> {
    const body: Record<string, string> = { update_id: updateId, kind };
    if (newValue !== undefined) body.new_value = newValue;
    return request(`${this.base}/api/feedback`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  delegate(gid: string): Promise<DelegateResponse> {
    return request(`${this.base}/api/groups/${gid}/delegate`, {
      method: "POST",
    });
  }

  events(since: number): Promise<EventsResponse> {
    return request(`${this.base}/api/events?since=${since}`);
  }
}
