// Wire protocol for the decoding service: newline-delimited JSON, one reply
// per request, in order. This module owns the schema checks so everything
// downstream works with typed replies and a malformed line surfaces as a
// single ProtocolError for the banner.

export class ProtocolError extends Error {}

export interface CandidateRow {
  rank: number;
  text: string;
  queued: boolean;
  pending: boolean;
  score: number;
}

export interface SessionMetrics {
  gestures_total: number;
  gestures_undo: number;
  characters: number;
  gpc: number | null;
  gpc_error_corrected: number | null;
  duration_s: number;
  wpm_wallclock: number | null;
}

// Fields shared by every reply that carries decoder output.
export interface StepFields {
  seq: number;
  candidates: CandidateRow[];
  committed: string;
  buffer: string[];
  selection: number;
  echo: (boolean | null)[] | null;
}

// The wire uses kind "state" for three different shapes (health, create ack,
// session snapshot), so parsed replies get their own discriminant.
export type Reply =
  | { tag: "health"; status: string; sessions: number; uptime_s: number }
  | {
      tag: "created";
      session: string;
      layout: string;
      keys: string[];
      config: Record<string, unknown>;
      context: string;
      prompt: string;
      committed: string;
      gestures: number;
    }
  | {
      tag: "session_state";
      session: string;
      layout: string;
      keys: string[];
      prompt: string;
      context: string;
      gestures: number;
      metrics: SessionMetrics;
      step: StepFields;
    }
  | { tag: "step"; session: string; step: StepFields; latency_ms: number; t: number }
  | {
      tag: "closed";
      session: string;
      committed: string;
      payload_sha256: string;
      metrics: SessionMetrics;
      reason: string;
    }
  | { tag: "server_error"; error: string };

function fail(msg: string): never {
  throw new ProtocolError(msg);
}

function rec(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(`${what} is not an object`);
  }
  return value as Record<string, unknown>;
}

function str(o: Record<string, unknown>, key: string): string {
  const v = o[key];
  if (typeof v !== "string") fail(`field ${key} is not a string`);
  return v;
}

function num(o: Record<string, unknown>, key: string): number {
  const v = o[key];
  if (typeof v !== "number" || !Number.isFinite(v)) fail(`field ${key} is not a number`);
  return v;
}

function numOrNull(o: Record<string, unknown>, key: string): number | null {
  const v = o[key];
  if (v === null) return null;
  if (typeof v !== "number" || !Number.isFinite(v)) fail(`field ${key} is not a number or null`);
  return v;
}

function bool(o: Record<string, unknown>, key: string): boolean {
  const v = o[key];
  if (typeof v !== "boolean") fail(`field ${key} is not a boolean`);
  return v;
}

function strList(o: Record<string, unknown>, key: string): string[] {
  const v = o[key];
  if (!Array.isArray(v) || v.some((x) => typeof x !== "string")) {
    fail(`field ${key} is not a list of strings`);
  }
  return v as string[];
}

function candidateList(o: Record<string, unknown>): CandidateRow[] {
  const v = o["candidates"];
  if (!Array.isArray(v)) fail("field candidates is not a list");
  return v.map((raw, i) => {
    const c = rec(raw, `candidate ${i}`);
    return {
      rank: num(c, "rank"),
      text: str(c, "text"),
      queued: bool(c, "queued"),
      pending: bool(c, "pending"),
      score: num(c, "score"),
    };
  });
}

function echoList(o: Record<string, unknown>): (boolean | null)[] | null {
  const v = o["echo"];
  if (v === null || v === undefined) return null;
  if (!Array.isArray(v) || v.some((x) => x !== null && typeof x !== "boolean")) {
    fail("field echo is not a list of booleans/nulls");
  }
  return v as (boolean | null)[];
}

function stepFields(o: Record<string, unknown>): StepFields {
  return {
    seq: num(o, "seq"),
    candidates: candidateList(o),
    committed: str(o, "committed"),
    buffer: strList(o, "buffer"),
    selection: num(o, "selection"),
    echo: echoList(o),
  };
}

function metricsFields(o: Record<string, unknown>, key: string): SessionMetrics {
  const m = rec(o[key], key);
  return {
    gestures_total: num(m, "gestures_total"),
    gestures_undo: num(m, "gestures_undo"),
    characters: num(m, "characters"),
    gpc: numOrNull(m, "gpc"),
    gpc_error_corrected: numOrNull(m, "gpc_error_corrected"),
    duration_s: num(m, "duration_s"),
    wpm_wallclock: numOrNull(m, "wpm_wallclock"),
  };
}

export function parseReply(line: string): Reply {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    fail("reply is not valid JSON");
  }
  const o = rec(raw, "reply");
  const kind = str(o, "kind");
  if (kind === "error") {
    return { tag: "server_error", error: str(o, "error") };
  }
  if (kind === "candidates") {
    return {
      tag: "step",
      session: str(o, "session"),
      step: stepFields(o),
      latency_ms: num(o, "latency_ms"),
      t: num(o, "t"),
    };
  }
  if (kind === "metrics") {
    return {
      tag: "closed",
      session: str(o, "session"),
      committed: str(o, "committed"),
      payload_sha256: str(o, "payload_sha256"),
      metrics: metricsFields(o, "metrics"),
      reason: str(o, "reason"),
    };
  }
  if (kind === "state") {
    if ("status" in o) {
      return { tag: "health", status: str(o, "status"), sessions: num(o, "sessions"), uptime_s: num(o, "uptime_s") };
    }
    if ("seq" in o) {
      return {
        tag: "session_state",
        session: str(o, "session"),
        layout: str(o, "layout"),
        keys: strList(o, "keys"),
        prompt: str(o, "prompt"),
        context: str(o, "context"),
        gestures: num(o, "gestures"),
        metrics: metricsFields(o, "metrics"),
        step: stepFields(o),
      };
    }
    return {
      tag: "created",
      session: str(o, "session"),
      layout: str(o, "layout"),
      keys: strList(o, "keys"),
      config: rec(o["config"], "config"),
      context: str(o, "context"),
      prompt: str(o, "prompt"),
      committed: str(o, "committed"),
      gestures: num(o, "gestures"),
    };
  }
  fail(`unknown reply kind ${JSON.stringify(kind)}`);
}

// -- requests --

export type UiKeyAction =
  | { event: "char"; label: string }
  | { event: "space" }
  | { event: "select" }
  | { event: "undo" };

export interface CreateOptions {
  layout: string;
  prompt?: string;
  context?: string;
  config?: Record<string, unknown>;
}

export function createRequest(opts: CreateOptions): object {
  const msg: Record<string, unknown> = { kind: "create", layout: opts.layout };
  if (opts.prompt !== undefined) msg["prompt"] = opts.prompt;
  if (opts.context !== undefined) msg["context"] = opts.context;
  if (opts.config !== undefined) msg["config"] = opts.config;
  return msg;
}

export function keyRequest(session: string, action: UiKeyAction): object {
  if (action.event === "char") {
    return { kind: "key", session, event: "char", label: action.label };
  }
  return { kind: "key", session, event: action.event };
}

export function stateRequest(session?: string): object {
  return session === undefined ? { kind: "state" } : { kind: "state", session };
}

export function closeRequest(session: string): object {
  return { kind: "metrics", session };
}
