/** Unit tests for the console against an in-memory fake service.
 * The fake answers through a stubbed global fetch, so the typed client
 * and its error mapping are exercised too. */

import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import {
  curveFromLog,
  groupKey,
  progressFromLog,
  type RowStatus,
} from "../src/store.js";
import { mount } from "../src/view.js";
import type {
  FeedbackEvent,
  GroupView,
  Metrics,
  SessionSnapshot,
  UpdateRow,
} from "../src/types.js";

const METRICS: Metrics = {
  initial_loss: 3,
  loss: 3,
  improvement: 0,
  violations: 4,
  dirty_tuples: 3,
  pending: 6,
  user_labels: 0,
  events: 0,
};

function makeSession(over: Partial<SessionSnapshot> = {}): SessionSnapshot {
  return {
    version: 1,
    config: {
      strategy: "gdr",
      budget: null,
      batch_size: 2,
      seed: 0,
      threshold: 0,
      k_reveal: 3,
    },
    attributes: ["CT", "STT", "ZIP"],
    tuples: 8,
    initial: { dirty_tuples: 3, violations: 4, pending: 6 },
    trained_attributes: [],
    selected_group: null,
    metrics: { ...METRICS },
    ...over,
  };
}

function makeGroup(
  id: string,
  attribute: string,
  value: string,
  over: Partial<GroupView> = {},
): GroupView {
  return {
    id,
    rank: 1,
    attribute,
    value,
    size: 1,
    gain: 0.5,
    budget: 1,
    selected: false,
    ...over,
  };
}

function makeRow(updateId: string, over: Partial<UpdateRow> = {}): UpdateRow {
  const [tupleId = "t?", attribute = "CT"] = updateId.split(":");
  return {
    update_id: updateId,
    tuple_id: tupleId,
    attribute,
    current_value: "OLD",
    suggested_value: "NEW",
    score: 0.5,
    scenario: 1,
    rules: ["r1"],
    tuple: {
      id: tupleId,
      weight: 1,
      cells: { CT: "OLD", STT: "IN", ZIP: "46391" },
    },
    prediction: null,
    ...over,
  };
}

function makeEvent(
  index: number,
  over: Partial<FeedbackEvent> = {},
): FeedbackEvent {
  return {
    index,
    kind: "confirm",
    source: "user",
    tuple_id: "t1",
    attribute: "CT",
    suggested_value: "NEW",
    new_value: null,
    old_value: "OLD",
    update_id: "t1:CT:0",
    wire_id: "t1:CT:0",
    feedback_count: index + 1,
    improvement: 0.1 * (index + 1),
    loss: 3,
    writes: [],
    discarded: [],
    created: [],
    ...over,
  };
}

interface Route {
  status: number;
  body: unknown;
}

/** In-memory stand-in for the session service, mounted on fetch. */
class FakeService {
  session = makeSession();
  groups: GroupView[] = [];
  rows: Record<string, UpdateRow[]> = {};
  log: FeedbackEvent[] = [];
  offline = false;
  calls: { method: string; path: string; body?: unknown }[] = [];
  onFeedback: (body: {
    update_id: string;
    kind: string;
    new_value?: string;
  }) => Route = () => ({ status: 400, body: { detail: "unexpected" } });
  onDelegate: (gid: string) => Route = () => ({
    status: 409,
    body: { detail: "unexpected" },
  });

  install(): void {
    vi.stubGlobal("fetch", (input: unknown, init?: RequestInit) =>
      this.handle(String(input), init),
    );
  }

  private async handle(
    rawUrl: string,
    init?: RequestInit,
  ): Promise<{
    ok: boolean;
    status: number;
    statusText: string;
    json: () => Promise<unknown>;
  }> {
    if (this.offline) throw new TypeError("fetch failed");
    const url = new URL(rawUrl, "http://fake");
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;
    this.calls.push({ method, path: url.pathname + url.search, body });
    const route = this.route(method, url, body);
    return {
      ok: route.status >= 200 && route.status < 300,
      status: route.status,
      statusText: String(route.status),
      json: async () => route.body,
    };
  }

  private route(method: string, url: URL, body: unknown): Route {
    const path = url.pathname;
    if (path === "/api/session") return { status: 200, body: this.session };
    if (path === "/api/groups" && method === "GET") {
      return { status: 200, body: { groups: this.groups } };
    }
    const select = path.match(/^\/api\/groups\/([^/]+)\/select$/);
    if (select) {
      const gid = select[1] ?? "";
      if (!this.groups.some((g) => g.id === gid)) {
        return { status: 404, body: { detail: "unknown group" } };
      }
      for (const g of this.groups) g.selected = g.id === gid;
      this.session.selected_group = gid;
      return {
        status: 200,
        body: { selected: gid, updates: this.rows[gid] ?? [] },
      };
    }
    const updates = path.match(/^\/api\/groups\/([^/]+)\/updates$/);
    if (updates) {
      return {
        status: 200,
        body: { group: updates[1], updates: this.rows[updates[1] ?? ""] ?? [] },
      };
    }
    const delegate = path.match(/^\/api\/groups\/([^/]+)\/delegate$/);
    if (delegate) return this.onDelegate(delegate[1] ?? "");
    if (path === "/api/feedback") {
      return this.onFeedback(
        body as { update_id: string; kind: string; new_value?: string },
      );
    }
    if (path === "/api/events") {
      const since = Number(url.searchParams.get("since") ?? "0");
      return {
        status: 200,
        body: { cursor: this.log.length, events: this.log.slice(since) },
      };
    }
    return { status: 404, body: { detail: `no route ${method} ${path}` } };
  }
}

function setup(configure: (fake: FakeService) => void) {
  const fake = new FakeService();
  configure(fake);
  fake.install();
  const container = document.createElement("div");
  document.body.appendChild(container);
  const store = mount(container, new ApiClient(""), {});
  return { fake, container, store };
}

function key(container: HTMLElement, name: string): void {
  container.dispatchEvent(
    new KeyboardEvent("keydown", { key: name, bubbles: true }),
  );
}

afterEach(() => {
  vi.unstubAllGlobals();
  document.body.innerHTML = "";
});

describe("derived views of the event log", () => {
  it("places one curve point per finished batch and per model run", () => {
    const log = [
      makeEvent(0, { feedback_count: 1, improvement: 0.1 }),
      makeEvent(1, { feedback_count: 2, improvement: 0.2 }),
      makeEvent(2, { feedback_count: 3, improvement: 0.3 }),
      makeEvent(3, { source: "model", feedback_count: 3, improvement: 0.4 }),
      makeEvent(4, { source: "model", feedback_count: 3, improvement: 0.5 }),
      makeEvent(5, { feedback_count: 4, improvement: 0.6 }),
    ];
    expect(curveFromLog(log, 2)).toEqual([
      { events: 2, improvement: 0.2 },
      { events: 5, improvement: 0.5 },
      { events: 6, improvement: 0.6 },
    ]);
  });

  it("tallies labeled and delegated decisions per group", () => {
    const log = [
      makeEvent(0, { attribute: "CT", suggested_value: "NEW" }),
      makeEvent(1, { attribute: "CT", suggested_value: "NEW" }),
      makeEvent(2, {
        attribute: "CT",
        suggested_value: "NEW",
        source: "model",
      }),
      makeEvent(3, { attribute: "ZIP", suggested_value: "46825" }),
    ];
    expect(progressFromLog(log)).toEqual({
      [groupKey("CT", "NEW")]: { labeled: 2, delegated: 1 },
      [groupKey("ZIP", "46825")]: { labeled: 1, delegated: 0 },
    });
  });
});

describe("console store", () => {
  it("shows an explicit message when nothing is pending", async () => {
    const { container, store } = setup((fake) => {
      fake.groups = [];
    });
    await store.lastOp;
    expect(store.state.phase).toBe("ready");
    expect(container.textContent).toContain("no pending updates");
  });

  it("keeps the selection when the ranking changes", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [
        makeGroup("g1", "CT", "FT WAYNE", { rank: 1 }),
        makeGroup("g2", "ZIP", "46391", { rank: 2 }),
      ];
      f.rows.g2 = [makeRow("t2:ZIP:0", { attribute: "ZIP" })];
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g2"]')!.click();
    await store.lastOp;
    expect(store.state.selectedGid).toBe("g2");

    fake.groups = [
      makeGroup("g2", "ZIP", "46391", { rank: 1, selected: true }),
      makeGroup("g3", "CT", "WESTVILLE", { rank: 2 }),
      makeGroup("g1", "CT", "FT WAYNE", { rank: 3 }),
    ];
    fake.log.push(makeEvent(0));
    await store.poll();

    expect(store.state.selectedGid).toBe("g2");
    expect(store.selectedGroup()?.rank).toBe(1);
    const selected = container.querySelector(".group.selected");
    expect(selected?.getAttribute("data-gid")).toBe("g2");
  });

  it("goes read-only on connection loss and recovers on retry", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "FT WAYNE")];
    });
    await store.lastOp;

    fake.offline = true;
    await store.poll();
    expect(store.state.phase).toBe("offline");
    expect(container.textContent).toContain("connection lost");

    fake.offline = false;
    container.querySelector<HTMLElement>(".retry")!.click();
    await store.lastOp;
    expect(store.state.phase).toBe("ready");
    expect(container.querySelector(".banner")).toBeNull();
  });

  it("marks a stale row on 409 and reconciles with the server", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "FT WAYNE", { size: 1 })];
      f.rows.g1 = [makeRow("t6:CT:0")];
      f.onFeedback = () => ({
        status: 409,
        body: { detail: "update is stale" },
      });
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;

    const seenStatuses: (RowStatus | undefined)[] = [];
    store.subscribe(() => {
      seenStatuses.push(store.state.rowStatus["t6:CT:0"]);
    });
    fake.rows.g1 = [makeRow("t6:CT:1")];
    key(container, "c");
    await store.lastOp;

    expect(seenStatuses).toContain("stale");
    expect(store.state.notice).toBe("update is stale");
    expect(store.state.rows.map((r) => r.update_id)).toEqual(["t6:CT:1"]);
    expect(container.textContent).toContain("update is stale");
  });

  it("applies a decision and redraws discarded and regenerated rows", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "MICHIGAN CITY", { size: 2 })];
      f.rows.g1 = [makeRow("t2:CT:0"), makeRow("t3:CT:0")];
      f.onFeedback = (body) => {
        const event = makeEvent(f.log.length, {
          update_id: body.update_id,
          kind: body.kind,
          discarded: ["t3:CT:0"],
          created: ["t3:CT:1"],
        });
        f.log.push(event);
        f.rows.g1 = [makeRow("t3:CT:1", { suggested_value: "REGENERATED" })];
        f.session.metrics.user_labels += 1;
        f.session.metrics.events += 1;
        return {
          status: 200,
          body: {
            event,
            discarded: event.discarded,
            created: event.created,
            metrics: f.session.metrics,
          },
        };
      };
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;

    key(container, "c");
    await store.lastOp;

    const posted = fake.calls.filter((c) => c.path === "/api/feedback");
    expect(posted).toHaveLength(1);
    expect(posted[0]?.method).toBe("POST");
    expect(store.state.rows.map((r) => r.update_id)).toEqual(["t3:CT:1"]);
    expect(store.state.log).toHaveLength(1);
    expect(container.textContent).toContain("REGENERATED");
  });

  it("counts labels toward the current batch", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "FT WAYNE")];
      f.rows.g1 = [makeRow("t6:CT:0")];
      f.session.metrics.user_labels = 3;
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;
    expect(container.querySelector(".batch")?.textContent).toContain(
      "1 of 2 in batch",
    );
    expect(fake.session.config.batch_size).toBe(2);
  });

  it("explains a refused delegation instead of changing anything", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "FT WAYNE")];
      f.rows.g1 = [makeRow("t6:CT:0")];
      f.onDelegate = () => ({
        status: 409,
        body: { detail: "no trained model for attribute CT" },
      });
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;

    container.querySelector<HTMLElement>(".delegate")!.click();
    expect(container.textContent).toContain("remaining");
    container.querySelector<HTMLElement>(".delegate-yes")!.click();
    await store.lastOp;

    expect(store.state.notice).toBe("no trained model for attribute CT");
    expect(container.textContent).toContain("no trained model");
    expect(
      fake.calls.filter((c) => c.path.endsWith("/delegate")),
    ).toHaveLength(1);
    expect(store.state.rows).toHaveLength(1);
  });

  it("cancels a delegation at the confirmation step", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "FT WAYNE")];
      f.rows.g1 = [makeRow("t6:CT:0")];
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;

    container.querySelector<HTMLElement>(".delegate")!.click();
    container.querySelector<HTMLElement>(".delegate-no")!.click();
    expect(store.state.delegatePrompt).toBe(false);
    expect(fake.calls.filter((c) => c.path.endsWith("/delegate"))).toHaveLength(
      0,
    );
  });

  it("maps review keys to the documented feedback calls", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "MICHIGAN CITY", { size: 2 })];
      f.rows.g1 = [makeRow("t2:CT:0"), makeRow("t4:CT:0")];
      f.onFeedback = (body) => {
        const event = makeEvent(f.log.length, {
          update_id: body.update_id,
          kind: body.kind,
          new_value: body.new_value ?? null,
        });
        f.log.push(event);
        return {
          status: 200,
          body: {
            event,
            discarded: [],
            created: [],
            metrics: f.session.metrics,
          },
        };
      };
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;

    key(container, "c");
    await store.lastOp;
    key(container, "ArrowDown");
    key(container, "x");
    await store.lastOp;
    key(container, "t");
    await store.lastOp;
    key(container, "r");
    const input = container.querySelector<HTMLInputElement>(".replace-input")!;
    expect(input.getAttribute("data-uid")).toBe("t4:CT:0");
    input.value = "46774";
    key(container, "Enter");
    await store.lastOp;

    const posts = fake.calls
      .filter((c) => c.path === "/api/feedback")
      .map((c) => c.body);
    expect(posts).toEqual([
      { update_id: "t2:CT:0", kind: "confirm" },
      { update_id: "t4:CT:0", kind: "reject" },
      { update_id: "t4:CT:0", kind: "retain" },
      { update_id: "t4:CT:0", kind: "replace", new_value: "46774" },
    ]);
    expect(store.state.replaceFor).toBeNull();
  });

  it("closes the replace editor on escape without posting", async () => {
    const { fake, container, store } = setup((f) => {
      f.groups = [makeGroup("g1", "CT", "FT WAYNE")];
      f.rows.g1 = [makeRow("t6:CT:0")];
    });
    await store.lastOp;
    container.querySelector<HTMLElement>('.group[data-gid="g1"]')!.click();
    await store.lastOp;

    key(container, "r");
    expect(container.querySelector(".replace-input")).not.toBeNull();
    key(container, "Escape");
    expect(container.querySelector(".replace-input")).toBeNull();
    expect(fake.calls.filter((c) => c.path === "/api/feedback")).toHaveLength(
      0,
    );
  });
});
