// The whole view is a fold over server replies: nothing here decodes keys or
// ranks candidates, it only records what the service said and derives display
// segments from that record.

import type { CandidateRow, Reply, SessionMetrics } from "./protocol";

export type Connection = "open" | "closed";

export interface UiSessionView {
  connection: Connection;
  banner: string | null;
  session: string | null;
  layout: string | null;
  keys: string[];
  prompt: string;
  context: string;
  committed: string;
  buffer: string[];
  echo: (boolean | null)[] | null;
  selection: number;
  candidates: CandidateRow[];
  metrics: SessionMetrics | null;
  gestures: number;
  finished: { committed: string; reason: string } | null;
}

export function emptyView(): UiSessionView {
  return {
    connection: "open",
    banner: null,
    session: null,
    layout: null,
    keys: [],
    prompt: "",
    context: "",
    committed: "",
    buffer: [],
    echo: null,
    selection: 0,
    candidates: [],
    metrics: null,
    gestures: 0,
    finished: null,
  };
}

export function applyReply(view: UiSessionView, reply: Reply): UiSessionView {
  switch (reply.tag) {
    case "health":
      return view;
    case "created":
      return {
        ...emptyView(),
        connection: view.connection,
        session: reply.session,
        layout: reply.layout,
        keys: reply.keys,
        prompt: reply.prompt,
        context: reply.context,
        committed: reply.committed,
        gestures: reply.gestures,
      };
    case "step": {
      if (reply.session !== view.session) return view;
      const s = reply.step;
      return {
        ...view,
        committed: s.committed,
        buffer: s.buffer,
        echo: s.echo,
        selection: s.selection,
        candidates: s.candidates,
      };
    }
    case "session_state": {
      if (reply.session !== view.session) return view;
      const s = reply.step;
      return {
        ...view,
        layout: reply.layout,
        keys: reply.keys,
        prompt: reply.prompt,
        context: reply.context,
        gestures: reply.gestures,
        metrics: reply.metrics,
        committed: s.committed,
        buffer: s.buffer,
        echo: s.echo,
        selection: s.selection,
        candidates: s.candidates,
      };
    }
    case "closed": {
      if (reply.session !== view.session) return view;
      return {
        ...view,
        committed: reply.committed,
        buffer: [],
        echo: null,
        selection: 0,
        candidates: [],
        metrics: reply.metrics,
        finished: { committed: reply.committed, reason: reply.reason },
      };
    }
    case "server_error":
      return { ...view, banner: reply.error };
  }
}

// Losing the server must freeze the screen, not blank it: keep every field
// and only flip the connection flag.
export function applyDisconnect(view: UiSessionView): UiSessionView {
  return { ...view, connection: "closed", banner: "connection to the service was lost" };
}

export function applyProtocolError(view: UiSessionView, message: string): UiSessionView {
  return { ...view, banner: `protocol error: ${message}` };
}

export function sessionLive(view: UiSessionView): boolean {
  return view.connection === "open" && view.session !== null && view.finished === null;
}

export type TypedSegment =
  | { kind: "word"; text: string }
  | { kind: "key"; label: string; state: "ok" | "bad" | "neutral" };

// Committed words render as text; the in-progress word stays a run of key
// numerals, coloured by the per-position echo flags.
export function typedLine(view: UiSessionView): TypedSegment[] {
  const out: TypedSegment[] = [];
  for (const word of view.committed.split(" ")) {
    if (word) out.push({ kind: "word", text: word });
  }
  view.buffer.forEach((label, i) => {
    const flag = view.echo === null ? null : (view.echo[i] ?? null);
    out.push({
      kind: "key",
      label,
      state: flag === null ? "neutral" : flag ? "ok" : "bad",
    });
  });
  return out;
}
