import { describe, expect, it } from "vitest";
import { parseReply, type Reply } from "../src/protocol";
import {
  applyDisconnect,
  applyProtocolError,
  applyReply,
  emptyView,
  sessionLive,
  typedLine,
  type UiSessionView,
} from "../src/view";

function created(session = "s000001"): Reply {
  return parseReply(
    JSON.stringify({
      kind: "state",
      session,
      layout: "4-optimized",
      keys: ["1", "2", "4", "5"],
      config: {},
      context: "",
      prompt: "the dog",
      committed: "",
      gestures: 0,
    }),
  );
}

function step(
  session: string,
  fields: Partial<{
    committed: string;
    buffer: string[];
    echo: (boolean | null)[] | null;
    candidates: object[];
    selection: number;
  }>,
): Reply {
  return parseReply(
    JSON.stringify({
      kind: "candidates",
      session,
      seq: 1,
      candidates: fields.candidates ?? [],
      committed: fields.committed ?? "",
      buffer: fields.buffer ?? [],
      selection: fields.selection ?? 0,
      echo: fields.echo ?? null,
      latency_ms: 0.1,
      t: 1.0,
    }),
  );
}

function freshSession(): UiSessionView {
  return applyReply(emptyView(), created());
}

describe("applyReply", () => {
  it("starts a session from the create acknowledgement", () => {
    const v = freshSession();
    expect(v.session).toBe("s000001");
    expect(v.prompt).toBe("the dog");
    expect(v.keys).toEqual(["1", "2", "4", "5"]);
    expect(sessionLive(v)).toBe(true);
  });

  it("records candidates, buffer and echo from key replies", () => {
    const v = applyReply(
      freshSession(),
      step("s000001", {
        buffer: ["4", "5"],
        echo: [true, false],
        candidates: [{ rank: 1, text: "the", queued: true, pending: false, score: -1.0 }],
      }),
    );
    expect(v.buffer).toEqual(["4", "5"]);
    expect(v.echo).toEqual([true, false]);
    expect(v.candidates[0]?.queued).toBe(true);
  });

  it("ignores replies for a different session", () => {
    const v = freshSession();
    const other = applyReply(v, step("s999999", { committed: "hijacked" }));
    expect(other.committed).toBe("");
  });

  it("keeps the final committed text and metrics after close", () => {
    let v = freshSession();
    v = applyReply(v, step("s000001", { committed: "the", buffer: ["1"] }));
    v = applyReply(
      v,
      parseReply(
        JSON.stringify({
          kind: "metrics",
          session: "s000001",
          committed: "the dog",
          payload_sha256: "0".repeat(64),
          metrics: {
            gestures_total: 10,
            gestures_undo: 0,
            characters: 7,
            gpc: 10 / 7,
            gpc_error_corrected: 10 / 7,
            duration_s: 4.0,
            wpm_wallclock: 21.0,
          },
          reason: "client",
        }),
      ),
    );
    expect(v.finished).toEqual({ committed: "the dog", reason: "client" });
    expect(v.committed).toBe("the dog");
    expect(v.buffer).toEqual([]);
    expect(v.metrics?.wpm_wallclock).toBe(21.0);
    expect(sessionLive(v)).toBe(false);
  });

  it("turns server errors into the banner without touching the session", () => {
    let v = freshSession();
    v = applyReply(v, step("s000001", { buffer: ["4"] }));
    const after = applyReply(v, parseReply(JSON.stringify({ kind: "error", error: "bad label" })));
    expect(after.banner).toBe("bad label");
    expect(after.buffer).toEqual(["4"]);
    expect(after.session).toBe("s000001");
  });
});

describe("typedLine", () => {
  it("styles echo mismatches as errors", () => {
    const v = applyReply(freshSession(), step("s000001", { buffer: ["4", "1"], echo: [true, false] }));
    expect(typedLine(v)).toEqual([
      { kind: "key", label: "4", state: "ok" },
      { kind: "key", label: "1", state: "bad" },
    ]);
  });

  it("renders numerals neutrally without a prompt", () => {
    const v = applyReply(freshSession(), step("s000001", { buffer: ["4", "1"], echo: null }));
    expect(typedLine(v)).toEqual([
      { kind: "key", label: "4", state: "neutral" },
      { kind: "key", label: "1", state: "neutral" },
    ]);
  });

  it("collapses numerals into words once text commits", () => {
    let v = applyReply(freshSession(), step("s000001", { buffer: ["4", "5", "4"], echo: [true, true, true] }));
    expect(typedLine(v)).toHaveLength(3);
    v = applyReply(v, step("s000001", { committed: "the", buffer: [], echo: [] }));
    expect(typedLine(v)).toEqual([{ kind: "word", text: "the" }]);
  });

  it("shows committed words followed by the next word's numerals", () => {
    const v = applyReply(
      freshSession(),
      step("s000001", { committed: "the dog", buffer: ["1"], echo: [true] }),
    );
    expect(typedLine(v)).toEqual([
      { kind: "word", text: "the" },
      { kind: "word", text: "dog" },
      { kind: "key", label: "1", state: "ok" },
    ]);
  });
});

describe("failure handling", () => {
  it("freezes the view on disconnect without clearing it", () => {
    let v = applyReply(
      freshSession(),
      step("s000001", {
        committed: "the",
        buffer: ["1"],
        candidates: [{ rank: 1, text: "the a", queued: false, pending: true, score: -2.0 }],
      }),
    );
    v = applyDisconnect(v);
    expect(v.connection).toBe("closed");
    expect(v.banner).toContain("lost");
    expect(v.committed).toBe("the");
    expect(v.buffer).toEqual(["1"]);
    expect(v.candidates).toHaveLength(1);
    expect(sessionLive(v)).toBe(false);
  });

  it("surfaces schema mismatches as a banner", () => {
    const v = applyProtocolError(freshSession(), "field seq is not a number");
    expect(v.banner).toBe("protocol error: field seq is not a number");
  });
});
