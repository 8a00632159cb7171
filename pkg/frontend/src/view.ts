/** DOM rendering and input wiring.
 *
 * The whole console redraws from the store on every change.  Numbers
 * that come from the service (gains, uncertainties, metrics) are
 * printed verbatim, never recomputed.  Review is keyboard-first:
 * arrows move between updates, single keys answer.
 */

import type { ApiClient } from "./api.js";
import { ConsoleStore, groupKey } from "./store.js";
import type { GroupView, UpdateRow } from "./types.js";

const KEY_ACTIONS: Record<string, "confirm" | "reject" | "retain"> = {
  c: "confirm",
  x: "reject",
  t: "retain",
};

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function groupItem(store: ConsoleStore, group: GroupView): string {
  const progress = store.state.progress[groupKey(group.attribute, group.value)];
  const labeled = progress?.labeled ?? 0;
  const delegated = progress?.delegated ?? 0;
  const classes = ["group", group.selected ? "selected" : ""]
    .filter(Boolean)
    .join(" ");
  return `<li class="${classes}" data-gid="${esc(group.id)}">
    <span class="rank">#${group.rank}</span>
    <span class="key">(${esc(group.attribute)}, ${esc(group.value)})</span>
    <span class="size">${group.size} updates</span>
    <span class="gain">gain ${String(group.gain)}</span>
    <span class="budget">budget ${String(group.budget)}</span>
    <span class="progress">${labeled} labeled, ${delegated} delegated</span>
  </li>`;
}

function updateRow(
  store: ConsoleStore,
  row: UpdateRow,
  index: number,
  attributes: string[],
): string {
  const status = store.state.rowStatus[row.update_id] ?? "pending";
  const focused = index === store.state.focus;
  const classes = ["update", focused ? "focused" : ""].filter(Boolean).join(" ");
  const cells = attributes
    .map((attr) => {
      const target = attr === row.attribute ? ' class="target"' : "";
      return `<td data-attr="${esc(attr)}"${target}>${esc(
        row.tuple.cells[attr] ?? "",
      )}</td>`;
    })
    .join("");
  const prediction = row.prediction
    ? `${esc(row.prediction.label)} p=${String(
        row.prediction.confirm_prob,
      )} u=${String(row.prediction.uncertainty)}`
    : "no prediction";
  const editor =
    store.state.replaceFor === row.update_id
      ? `<input class="replace-input" data-uid="${esc(
          row.update_id,
        )}" placeholder="replacement value">`
      : "";
  return `<tr class="${classes}" data-uid="${esc(row.update_id)}"
      data-index="${index}" data-status="${status}">
    ${cells}
    <td class="suggested">${esc(row.suggested_value)}${editor}</td>
    <td class="prediction">${prediction}</td>
    <td class="status">${status}</td>
  </tr>`;
}

function render(store: ConsoleStore, container: HTMLElement): void {
  const s = store.state;
  if (s.phase === "loading") {
    container.innerHTML = `<p class="loading">loading session...</p>`;
    return;
  }
  const banner =
    s.phase === "offline"
      ? `<div class="banner">connection lost, showing the last known state
         <button class="retry">retry</button></div>`
      : "";
  const notice = s.notice ? `<div class="notice">${esc(s.notice)}</div>` : "";
  const session = s.session;
  const metrics = session
    ? Object.entries(session.metrics)
        .map(
          ([key, value]) =>
            `<dt>${esc(key)}</dt><dd data-metric="${esc(key)}">${String(
              value,
            )}</dd>`,
        )
        .join("")
    : "";
  const trained = session
    ? session.trained_attributes.map(esc).join(", ") || "none"
    : "";
  const batchSize = session?.config.batch_size ?? 1;
  const labeled = session?.metrics.user_labels ?? 0;
  const batchCounter = `${labeled % batchSize} of ${batchSize} in batch`;

  const groupsHtml =
    s.groups.length === 0
      ? `<p class="empty">no pending updates</p>`
      : `<ol class="group-list">${s.groups
          .map((g) => groupItem(store, g))
          .join("")}</ol>`;

  const selected = store.selectedGroup();
  const attributes = session ? session.attributes : [];
  let detail = `<p class="hint">select a group to review its updates</p>`;
  if (selected) {
    const trainedAttr = session
      ? session.trained_attributes.includes(selected.attribute)
      : false;
    const delegateControls = s.delegatePrompt
      ? `<span class="delegate-confirm">delegate ${s.rows.length} remaining
           update(s) to the model?
           <button class="delegate-yes">yes</button>
           <button class="delegate-no">no</button></span>`
      : `<button class="delegate ${trainedAttr ? "trained" : "untrained"}">
           delegate to model</button>`;
    const head = attributes
      .map((attr) => `<th>${esc(attr)}</th>`)
      .join("");
    const body = s.rows
      .map((row, i) => updateRow(store, row, i, attributes))
      .join("");
    detail = `
      <div class="toolbar">
        <span class="reviewing">(${esc(selected.attribute)}, ${esc(
          selected.value,
        )})</span>
        <span class="batch">${batchCounter}</span>
        ${delegateControls}
      </div>
      <table class="updates">
        <thead><tr>${head}<th>suggested</th><th>prediction</th><th>status</th></tr></thead>
        <tbody>${body}</tbody>
      </table>
      <p class="keys">arrows move, c confirm, x reject, t retain, r replace</p>`;
  }

  const curve = s.curve
    .map(
      (p) =>
        `<li data-events="${p.events}">after ${p.events} events: ${String(
          p.improvement,
        )}</li>`,
    )
    .join("");
  const recent = s.recent
    .map(
      (e) => `<li><span class="badge ${esc(e.source)}">${esc(
        e.source,
      )}</span> ${esc(e.kind)} ${esc(e.tuple_id)}.${esc(e.attribute)}
        (${esc(e.suggested_value)})</li>`,
    )
    .join("");

  container.innerHTML = `
    ${banner}
    ${notice}
    <header class="status-bar">
      <dl class="metrics">${metrics}</dl>
      <span class="trained">trained: ${trained}</span>
    </header>
    <main class="layout">
      <section class="groups">${groupsHtml}</section>
      <section class="detail">${detail}</section>
      <aside class="panels">
        <h3>quality curve</h3>
        <ol class="curve">${curve}</ol>
        <h3>recent decisions</h3>
        <ol class="recent">${recent}</ol>
      </aside>
    </main>`;
  const input = container.querySelector<HTMLInputElement>(".replace-input");
  if (input) input.focus();
}

/** Attach the console to a container.  Returns the store so callers
 * (and tests) can await in-flight operations or drive polling. */
export function mount(
  container: HTMLElement,
  api: ApiClient,
  options: { pollMs?: number } = {},
): ConsoleStore {
  const store = new ConsoleStore(api);
  store.subscribe(() => render(store, container));

  container.addEventListener("click", (raw) => {
    const target = raw.target as HTMLElement;
    if (target.closest(".retry")) {
      store.lastOp = store.load();
      return;
    }
    if (target.closest(".delegate-yes")) {
      store.lastOp = store.confirmDelegate();
      return;
    }
    if (target.closest(".delegate-no")) {
      store.cancelDelegate();
      return;
    }
    if (target.closest(".delegate")) {
      store.requestDelegate();
      return;
    }
    const groupItem = target.closest<HTMLElement>(".group");
    if (groupItem?.dataset.gid) {
      store.lastOp = store.selectGroup(groupItem.dataset.gid);
      return;
    }
    const row = target.closest<HTMLElement>(".update");
    if (row?.dataset.index) {
      store.moveFocus(Number(row.dataset.index) - store.state.focus);
    }
  });

  container.addEventListener("keydown", (raw) => {
    const event = raw as KeyboardEvent;
    const editing = (event.target as HTMLElement).classList?.contains(
      "replace-input",
    );
    if (editing || store.state.replaceFor !== null) {
      if (event.key === "Enter") {
        const input = container.querySelector<HTMLInputElement>(
          ".replace-input",
        );
        store.lastOp = store.feedback("replace", input ? input.value : "");
      } else if (event.key === "Escape") {
        store.cancelReplace();
      }
      return;
    }
    if (event.key === "ArrowDown" || event.key === "n") {
      store.moveFocus(1);
    } else if (event.key === "ArrowUp" || event.key === "p") {
      store.moveFocus(-1);
    } else if (event.key === "r") {
      store.openReplace();
    } else {
      const action = KEY_ACTIONS[event.key];
      if (action) store.lastOp = store.feedback(action);
    }
  });

  store.lastOp = store.load();
  if (options.pollMs && options.pollMs > 0) {
    setInterval(() => {
      void store.poll();
    }, options.pollMs);
  }
  return store;
}
