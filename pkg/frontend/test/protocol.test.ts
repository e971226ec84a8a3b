import { describe, expect, it } from "vitest";
import {
  closeRequest,
  createRequest,
  keyRequest,
  parseReply,
  stateRequest,
  ProtocolError,
} from "../src/protocol";

const METRICS = {
  gestures_total: 5,
  gestures_undo: 0,
  characters: 2,
  gpc: 2.5,
  gpc_error_corrected: 2.5,
  duration_s: 12.0,
  wpm_wallclock: 2.0,
};

describe("parseReply", () => {
  it("parses a create acknowledgement", () => {
    const r = parseReply(
      JSON.stringify({
        kind: "state",
        session: "s000001",
        layout: "4-optimized",
        keys: ["1", "2", "4", "5"],
        config: { beam_width: 30 },
        context: "",
        prompt: "the dog",
        committed: "",
        gestures: 0,
      }),
    );
    expect(r.tag).toBe("created");
    if (r.tag === "created") {
      expect(r.session).toBe("s000001");
      expect(r.keys).toEqual(["1", "2", "4", "5"]);
      expect(r.prompt).toBe("the dog");
    }
  });

  it("parses a key reply with candidates and echo", () => {
    const r = parseReply(
      JSON.stringify({
        kind: "candidates",
        session: "s000001",
        seq: 3,
        candidates: [
          { rank: 1, text: "the", queued: false, pending: false, score: -1.5 },
          { rank: 2, text: "but", queued: true, pending: true, score: -2.5 },
        ],
        committed: "",
        buffer: ["4", "5"],
        selection: 2,
        echo: [true, false],
        latency_ms: 0.4,
        t: 1000.0,
      }),
    );
    expect(r.tag).toBe("step");
    if (r.tag === "step") {
      expect(r.step.candidates[1]).toEqual({
        rank: 2,
        text: "but",
        queued: true,
        pending: true,
        score: -2.5,
      });
      expect(r.step.echo).toEqual([true, false]);
      expect(r.step.buffer).toEqual(["4", "5"]);
    }
  });

  it("parses a session snapshot with live metrics", () => {
    const r = parseReply(
      JSON.stringify({
        kind: "state",
        session: "s000001",
        layout: "4-optimized",
        keys: ["1", "2", "4", "5"],
        config: { beam_width: 30 },
        context: "",
        prompt: "",
        gestures: 5,
        metrics: METRICS,
        seq: 5,
        candidates: [],
        committed: "an",
        buffer: [],
        selection: 0,
        echo: null,
      }),
    );
    expect(r.tag).toBe("session_state");
    if (r.tag === "session_state") {
      expect(r.metrics.wpm_wallclock).toBe(2.0);
      expect(r.step.committed).toBe("an");
    }
  });

  it("parses the health probe", () => {
    const r = parseReply(JSON.stringify({ kind: "state", status: "ok", sessions: 1, uptime_s: 2.5 }));
    expect(r).toEqual({ tag: "health", status: "ok", sessions: 1, uptime_s: 2.5 });
  });

  it("parses the closing metrics reply", () => {
    const r = parseReply(
      JSON.stringify({
        kind: "metrics",
        session: "s000001",
        committed: "an",
        payload_sha256: "ab".repeat(32),
        metrics: METRICS,
        reason: "client",
      }),
    );
    expect(r.tag).toBe("closed");
    if (r.tag === "closed") {
      expect(r.committed).toBe("an");
      expect(r.metrics.characters).toBe(2);
    }
  });

  it("parses server errors", () => {
    const r = parseReply(JSON.stringify({ kind: "error", error: "unknown key label" }));
    expect(r).toEqual({ tag: "server_error", error: "unknown key label" });
  });

  it("rejects non-JSON lines", () => {
    expect(() => parseReply("not json")).toThrow(ProtocolError);
  });

  it("rejects unknown kinds", () => {
    expect(() => parseReply(JSON.stringify({ kind: "surprise" }))).toThrow(ProtocolError);
  });

  it("rejects replies missing required fields", () => {
    expect(() => parseReply(JSON.stringify({ kind: "candidates", session: "s1" }))).toThrow(
      ProtocolError,
    );
  });

  it("rejects malformed candidate rows", () => {
    expect(() =>
      parseReply(
        JSON.stringify({
          kind: "candidates",
          session: "s1",
          seq: 1,
          candidates: [{ rank: "first", text: "the", queued: false, pending: false, score: 0 }],
          committed: "",
          buffer: [],
          selection: 0,
          echo: null,
          latency_ms: 0.1,
          t: 0,
        }),
      ),
    ).toThrow(ProtocolError);
  });

  it("rejects echo entries that are not booleans or null", () => {
    expect(() =>
      parseReply(
        JSON.stringify({
          kind: "candidates",
          session: "s1",
          seq: 1,
          candidates: [],
          committed: "",
          buffer: ["1"],
          selection: 0,
          echo: ["yes"],
          latency_ms: 0.1,
          t: 0,
        }),
      ),
    ).toThrow(ProtocolError);
  });
});

describe("requests", () => {
  it("builds create requests with only the provided fields", () => {
    expect(createRequest({ layout: "4-optimized" })).toEqual({
      kind: "create",
      layout: "4-optimized",
    });
    expect(
      createRequest({ layout: "4-optimized", prompt: "hi", context: "", config: { d1_enabled: false } }),
    ).toEqual({
      kind: "create",
      layout: "4-optimized",
      prompt: "hi",
      context: "",
      config: { d1_enabled: false },
    });
  });

  it("builds key requests with labels only for char events", () => {
    expect(keyRequest("s1", { event: "char", label: "4" })).toEqual({
      kind: "key",
      session: "s1",
      event: "char",
      label: "4",
    });
    expect(keyRequest("s1", { event: "select" })).toEqual({
      kind: "key",
      session: "s1",
      event: "select",
    });
  });

  it("builds state and close requests", () => {
    expect(stateRequest()).toEqual({ kind: "state" });
    expect(stateRequest("s1")).toEqual({ kind: "state", session: "s1" });
    expect(closeRequest("s1")).toEqual({ kind: "metrics", session: "s1" });
  });
});
