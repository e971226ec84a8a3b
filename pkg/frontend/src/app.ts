// DOM glue: render() paints a UiSessionView into the fixed page skeleton and
// mount() wires inputs and the document-level key handler to a controller.
// Everything shown comes from the view, which in turn comes from the server.

import { SessionController } from "./controller";
import type { Transport } from "./transport";
import { sessionLive, typedLine, type UiSessionView } from "./view";

function el<T extends HTMLElement>(doc: Document, id: string): T {
  const node = doc.getElementById(id);
  if (!node) throw new Error(`page is missing element #${id}`);
  return node as T;
}

function fmt(value: number | null | undefined, digits: number): string {
  return value === null || value === undefined ? "—" : value.toFixed(digits);
}

export function render(view: UiSessionView, doc: Document): void {
  const live = sessionLive(view);

  const conn = el(doc, "conn");
  conn.className = `dot ${view.connection}`;
  conn.title = view.connection === "open" ? "connected" : "disconnected";

  const banner = el(doc, "banner");
  banner.textContent = view.banner ?? "";
  banner.classList.toggle("hidden", view.banner === null);

  el(doc, "prompt-line").textContent = view.prompt;

  const typed = el(doc, "typed-line");
  typed.replaceChildren();
  for (const seg of typedLine(view)) {
    const span = doc.createElement("span");
    if (seg.kind === "word") {
      span.className = "word";
      span.textContent = seg.text;
    } else {
      span.className = `key ${seg.state}`;
      span.textContent = seg.label;
    }
    typed.appendChild(span);
  }
  typed.classList.toggle("frozen", view.connection === "closed");

  const list = el(doc, "candidates");
  list.replaceChildren();
  for (const cand of view.candidates) {
    const li = doc.createElement("li");
    li.classList.toggle("queued", cand.queued);
    li.classList.toggle("pending", cand.pending);
    const rank = doc.createElement("span");
    rank.className = "rank";
    rank.textContent = String(cand.rank);
    const text = doc.createElement("span");
    text.className = "text";
    text.textContent = cand.text;
    li.append(rank, text);
    list.appendChild(li);
  }

  el(doc, "m-wpm").textContent = fmt(view.metrics?.wpm_wallclock, 1);
  el(doc, "m-gpc").textContent = fmt(view.metrics?.gpc_error_corrected, 2);
  el(doc, "m-gestures").textContent = String(view.metrics?.gestures_total ?? view.gestures);
  el(doc, "m-chars").textContent = String(view.metrics?.characters ?? view.committed.length);

  const finished = el(doc, "finished");
  if (view.finished) {
    finished.textContent = `session closed (${view.finished.reason}): "${view.finished.committed}"`;
    finished.classList.remove("hidden");
  } else {
    finished.textContent = "";
    finished.classList.add("hidden");
  }

  // conditions are session-scoped: lock every setup control while live
  for (const id of ["layout", "prompt", "context", "toggle-context", "toggle-completion", "toggle-d1", "start"]) {
    el<HTMLInputElement>(doc, id).disabled = live || view.connection === "closed";
  }
  el<HTMLButtonElement>(doc, "end").disabled = !live;
}

export interface MountOptions {
  makeTransport: () => Transport;
}

export function mount(doc: Document, opts: MountOptions): SessionController {
  const controller = new SessionController(opts.makeTransport(), (v) => render(v, doc));
  render(controller.view, doc);

  el<HTMLButtonElement>(doc, "start").addEventListener("click", () => {
    void controller.start({
      layout: el<HTMLSelectElement>(doc, "layout").value,
      prompt: el<HTMLInputElement>(doc, "prompt").value,
      context: el<HTMLInputElement>(doc, "context").value,
      config: {
        context_enabled: el<HTMLInputElement>(doc, "toggle-context").checked,
        completion_enabled: el<HTMLInputElement>(doc, "toggle-completion").checked,
        d1_enabled: el<HTMLInputElement>(doc, "toggle-d1").checked,
      },
    });
  });

  el<HTMLButtonElement>(doc, "end").addEventListener("click", () => {
    void controller.finish();
  });

  doc.addEventListener("keydown", (ev: KeyboardEvent) => {
    const target = ev.target as HTMLElement | null;
    if (target && ["INPUT", "SELECT", "TEXTAREA"].includes(target.tagName)) return;
    if (!sessionLive(controller.view)) return;
    if (ev.key === " " || ev.key === "Tab" || ev.key === "Backspace") ev.preventDefault();
    void controller.press(ev.key);
  });

  return controller;
}
