"""Live typing service: decoder sessions behind a newline-delimited JSON wire.

The core keeps decoding sessions keyed by id, answers exactly one reply per
request, and appends everything needed for bit-exact replay to a per-session
transcript file. The TCP layer is a thin shell around ServiceCore.handle so
tests and the replay tool can drive the protocol in-process.

Wire messages are JSON objects, one per line. Request kinds:

  {"kind": "create", "layout": "4-optimized", "context": "...",
   "prompt": "...", "config": {"beam_width": 30, ...}}
  {"kind": "key", "session": "s000001", "event": "char", "label": "4"}
  {"kind": "key", "session": "s000001", "event": "space" | "select" | "undo"}
  {"kind": "state"}                      server health
  {"kind": "state", "session": id}       session snapshot, no gesture
  {"kind": "metrics", "session": id}     close the session, persist, report

Replies are "state", "candidates", "metrics", or "error". A "candidates"
reply carries the ranked top-10 list, the committed text, the key buffer, and
a per-position correctness echo against the session's prompt. Fields that
vary run to run (wall-clock time, latency) live outside the replayable
payload; everything else is deterministic for a fixed event script.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from keybeam.decoder import KeyEvent, Session, SessionConfig
from keybeam.keymap import KeyLayout, LayoutError, load_layout
from keybeam.lexicon import Lexicon, build_lexicon, load_dictionary
from keybeam.lm import load_arpa, tokenize

ENV_DATA_DIR = "KEYBEAM_DATA_DIR"
DEFAULT_TTL = 900.0
DEFAULT_ROTATE_BYTES = 4 * 1024 * 1024
SHOWN_CANDIDATES = 10

# wire fields excluded from the deterministic payload (and from its hash)
TELEMETRY_FIELDS = ("latency_ms", "t", "kind", "session")

# session options a client may set per create request
_CONFIG_FIELDS = (
    "beam_width",
    "context_enabled",
    "completion_enabled",
    "d1_enabled",
    "space_selects_top",
    "prediction_words",
    "prefix_limit",
)


class ServiceError(RuntimeError):
    pass


def canonical_bytes(obj: dict) -> bytes:
    """Stable serialization used for payload hashing and comparisons."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def payload_view(reply: dict) -> dict:
    """The deterministic part of a wire reply."""
    return {k: v for k, v in reply.items() if k not in TELEMETRY_FIELDS}


def _expected_keys(layout: KeyLayout, prompt: str) -> list[tuple[str, ...] | None]:
    """Per-word key sequences for the practice prompt; None where unmappable."""
    out: list[tuple[str, ...] | None] = []
    for word in tokenize(prompt):
        try:
            out.append(layout.map_word(word))
        except LayoutError:
            out.append(None)
    return out


def _word_progress(sess: Session, cands) -> int:
    """Index of the word the key buffer belongs to, derived from decoder state.

    The top hypothesis already counts the word in progress, so subtract it
    while the buffer is non-empty. Falls back to the committed count when
    nothing is displayed.
    """
    if cands:
        return len(cands[0].words) - (1 if sess.key_buffer else 0)
    return len(sess.committed_words)


def step_payload(sess: Session, seq: int, cands, expected) -> dict:
    """Deterministic reply body for one gesture; shared with replay."""
    shown = [
        {"rank": c.rank, "text": c.text, "queued": c.queued, "pending": c.pending, "score": c.total}
        for c in cands[:SHOWN_CANDIDATES]
    ]
    echo = None
    if expected is not None:
        word = _word_progress(sess, cands)
        exp = expected[word] if 0 <= word < len(expected) else None
        echo = []
        for j, label in enumerate(sess.key_buffer):
            if exp is None or j >= len(exp):
                echo.append(None)
            else:
                echo.append(label == exp[j])
    return {
        "seq": seq,
        "candidates": shown,
        "committed": sess.committed_text,
        "buffer": list(sess.key_buffer),
        "selection": sess.selection_index,
        "echo": echo,
    }


def parse_wire_event(msg: dict) -> KeyEvent:
    kind = msg.get("event")
    if kind == "char":
        label = msg.get("label")
        if not isinstance(label, str) or not label:
            raise ServiceError("char event needs a key label")
        return KeyEvent.char(label)
    if kind == "space":
        return KeyEvent("space")
    if kind == "select":
        return KeyEvent("select")
    if kind == "undo":
        return KeyEvent("undo")
    raise ServiceError(f"unknown event kind: {kind!r}")


# -- transcripts --------------------------------------------------------------


class TranscriptStore:
    """One append-only JSONL file per session, rotated by size.

    Rotation renames the active file to `<id>.jsonl.N` (N counts up, so part
    1 is the oldest) and starts a fresh file. Readers stitch the parts back
    together in order. All writes go through a single lock.
    """

    def __init__(self, root: str | Path, max_bytes: int = DEFAULT_ROTATE_BYTES):
        if max_bytes < 1024:
            raise ServiceError("transcript rotation threshold must be >= 1 KiB")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.max_bytes = max_bytes
        self._lock = threading.Lock()

    def path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def _parts(self, session_id: str) -> list[Path]:
        main = self.path(session_id)
        rotated = sorted(
            self.root.glob(f"{session_id}.jsonl.*"),
            key=lambda p: int(p.suffix[1:]),
        )
        return rotated + ([main] if main.exists() else [])

    def append(self, session_id: str, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
        with self._lock:
            main = self.path(session_id)
            if main.exists() and main.stat().st_size + len(line) > self.max_bytes:
                n = len(list(self.root.glob(f"{session_id}.jsonl.*"))) + 1
                main.rename(self.root / f"{session_id}.jsonl.{n}")
            with open(main, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()

    def read(self, session_id: str) -> list[dict]:
        parts = self._parts(session_id)
        if not parts:
            raise ServiceError(f"no transcript for session {session_id!r}")
        out = []
        for part in parts:
            with open(part, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        out.append(json.loads(line))
        return out

    def session_ids(self) -> list[str]:
        ids = {p.name.split(".jsonl")[0] for p in self.root.glob("*.jsonl*")}
        return sorted(ids)


@dataclass(frozen=True)
class SessionRecord:
    """A finished session as persisted: enough to replay it bit for bit."""

    session_id: str
    layout: str
    config: dict
    context: str
    prompt: str
    created_t: float
    events: tuple[dict, ...]
    committed: str
    payload_sha256: str
    metrics: dict
    reason: str


def record_from_lines(lines: list[dict]) -> SessionRecord:
    if not lines or lines[0].get("rec") != "header":
        raise ServiceError("transcript does not start with a header record")
    header = lines[0]
    closing = lines[-1]
    if closing.get("rec") != "close":
        raise ServiceError("transcript has no close record; session never finished")
    events = tuple(ln for ln in lines[1:-1] if ln.get("rec") == "event")
    return SessionRecord(
        session_id=header["session"],
        layout=header["layout"],
        config=dict(header["config"]),
        context=header.get("context", ""),
        prompt=header.get("prompt", ""),
        created_t=header["created_t"],
        events=events,
        committed=closing["committed"],
        payload_sha256=closing["payload_sha256"],
        metrics=dict(closing["metrics"]),
        reason=closing.get("reason", "client"),
    )


def load_record(store: TranscriptStore, session_id: str) -> SessionRecord:
    return record_from_lines(store.read(session_id))


def load_record_file(path: str | Path) -> SessionRecord:
    """Read a record straight from transcript files (follows rotated parts)."""
    path = Path(path)
    base = path.name
    while not base.endswith(".jsonl"):
        stem, _, suffix = base.rpartition(".")
        if not suffix.isdigit():
            raise ServiceError(f"not a transcript file: {path}")
        base = stem
    store = TranscriptStore(path.parent, max_bytes=DEFAULT_ROTATE_BYTES)
    return load_record(store, base[: -len(".jsonl")])


# -- resources ----------------------------------------------------------------


class Resources:
    """Layouts, per-layout lexicons, and the shared language model."""

    def __init__(self, layouts: dict[str, KeyLayout], entries, lm):
        if not layouts:
            raise ServiceError("no layouts configured")
        self.layouts = dict(layouts)
        self.entries = list(entries)
        self.lm = lm
        self._lexicons: dict[str, Lexicon] = {}

    def layout(self, name: str) -> KeyLayout:
        if name not in self.layouts:
            known = ", ".join(sorted(self.layouts))
            raise ServiceError(f"unknown layout: {name!r} (have: {known})")
        return self.layouts[name]

    def lexicon(self, name: str) -> Lexicon:
        if name not in self._lexicons:
            self._lexicons[name] = build_lexicon(self.entries, self.layout(name))
        return self._lexicons[name]


def load_resources(layout_specs, dictionary_path, lm) -> Resources:
    """Build service resources from layout names/paths and a dictionary file."""
    layouts = {}
    for spec in layout_specs:
        lay = load_layout(spec)
        layouts[lay.name] = lay
    entries = load_dictionary(dictionary_path)
    return Resources(layouts, entries, lm)


# -- the service core ----------------------------------------------------------


class _Live:
    __slots__ = (
        "session_id",
        "sess",
        "layout_name",
        "config_view",
        "context",
        "prompt",
        "expected",
        "seq",
        "sha",
        "created_t",
        "first_t",
        "last_t",
        "last_active",
    )

    def __init__(self, session_id, sess, layout_name, config_view, context, prompt, expected, now):
        self.session_id = session_id
        self.sess = sess
        self.layout_name = layout_name
        self.config_view = config_view
        self.context = context
        self.prompt = prompt
        self.expected = expected
        self.seq = 0
        self.sha = hashlib.sha256()
        self.created_t = now
        self.first_t: float | None = None
        self.last_t: float | None = None
        self.last_active = now


def _config_view(cfg: SessionConfig) -> dict:
    return {name: getattr(cfg, name) for name in _CONFIG_FIELDS}


def session_metrics(
    gestures_total: int,
    gestures_undo: int,
    committed: str,
    duration_s: float,
) -> dict:
    """Wall-clock metrics for a finished session; zeros stay zeros."""
    characters = len(committed)
    gpc = gestures_total / characters if characters else None
    corrected = (gestures_total - 2 * gestures_undo) / characters if characters else None
    wpm = None
    if duration_s > 0 and characters:
        wpm = 0.2 * characters / (duration_s / 60.0)
    return {
        "gestures_total": gestures_total,
        "gestures_undo": gestures_undo,
        "characters": characters,
        "gpc": gpc,
        "gpc_error_corrected": corrected,
        "duration_s": duration_s,
        "wpm_wallclock": wpm,
    }


class ServiceCore:
    """Protocol handler. One lock serializes everything, which both keeps
    per-session ordering trivial and makes the transcript store single-writer.
    """

    def __init__(
        self,
        resources: Resources,
        store: TranscriptStore,
        defaults: SessionConfig | None = None,
        session_ttl: float = DEFAULT_TTL,
        clock=time.time,
    ):
        self.resources = resources
        self.store = store
        self.defaults = defaults or SessionConfig()
        self.session_ttl = session_ttl
        self.clock = clock
        self.started_t = clock()
        self._lock = threading.RLock()
        self._live: dict[str, _Live] = {}
        self._counter = 0

    # -- public entry ----------------------------------------------------

    def handle(self, msg: dict) -> dict:
        """Answer one wire message. Every input gets exactly one reply."""
        if not isinstance(msg, dict):
            return {"kind": "error", "error": "message must be a JSON object"}
        kind = msg.get("kind")
        try:
            with self._lock:
                self._sweep()
                if kind == "create":
                    return self._create(msg)
                if kind == "key":
                    return self._key(msg)
                if kind == "state":
                    return self._state(msg)
                if kind == "metrics":
                    return self._close(msg, reason="client")
                raise ServiceError(f"unknown message kind: {kind!r}")
        except ServiceError as exc:
            reply = {"kind": "error", "error": str(exc)}
            if isinstance(msg, dict) and "session" in msg:
                reply["session"] = msg["session"]
            return reply
        except Exception as exc:  # keep the connection alive on bugs too
            return {"kind": "error", "error": f"{type(exc).__name__}: {exc}"}

    # -- handlers ---------------------------------------------------------

    def _create(self, msg: dict) -> dict:
        layout_name = msg.get("layout")
        if not isinstance(layout_name, str):
            raise ServiceError("create needs a layout name")
        layout = self.resources.layout(layout_name)
        overrides = msg.get("config") or {}
        if not isinstance(overrides, dict):
            raise ServiceError("config must be an object")
        unknown = set(overrides) - set(_CONFIG_FIELDS)
        if unknown:
            raise ServiceError(f"unknown config fields: {', '.join(sorted(unknown))}")
        merged = {name: getattr(self.defaults, name) for name in _CONFIG_FIELDS}
        merged.update(overrides)
        cfg = SessionConfig(
            **merged,
            d1_penalty=self.defaults.d1_penalty,
            d1_start_multiplier=self.defaults.d1_start_multiplier,
            undo_depth=self.defaults.undo_depth,
            substitution_only_d1=self.defaults.substitution_only_d1,
        )
        context = msg.get("context", "")
        prompt = msg.get("prompt", "")
        if not isinstance(context, str) or not isinstance(prompt, str):
            raise ServiceError("context and prompt must be strings")

        self._counter += 1
        session_id = f"s{self._counter:06d}"
        sess = Session(layout, self.resources.lexicon(layout_name), self.resources.lm, cfg, context)
        expected = _expected_keys(layout, prompt) if prompt else None
        now = self.clock()
        live = _Live(session_id, sess, layout_name, _config_view(cfg), context, prompt, expected, now)
        self._live[session_id] = live
        # the header keeps the FULL effective config so replay rebuilds the
        # exact session even when server defaults differ from class defaults
        self.store.append(
            session_id,
            {
                "rec": "header",
                "session": session_id,
                "created_t": now,
                "layout": layout_name,
                "config": dataclasses.asdict(cfg),
                "context": context,
                "prompt": prompt,
            },
        )
        return {
            "kind": "state",
            "session": session_id,
            "layout": layout_name,
            # clients build their key bindings from the label list, so they
            # never need the layout files themselves
            "keys": list(layout.alpha_labels),
            "config": live.config_view,
            "context": context,
            "prompt": prompt,
            "committed": "",
            "gestures": 0,
        }

    def _get_live(self, msg: dict) -> _Live:
        session_id = msg.get("session")
        live = self._live.get(session_id)
        if live is None:
            raise ServiceError(f"unknown session: {session_id!r}")
        live.last_active = self.clock()
        return live

    def _key(self, msg: dict) -> dict:
        live = self._get_live(msg)
        event = parse_wire_event(msg)
        if event.kind == "char" and event.label not in live.sess.layout.alpha_labels:
            # reject before step() so a bad label leaves the session untouched
            raise ServiceError(
                f"unknown key label {event.label!r} for layout {live.layout_name!r}"
            )
        now = self.clock()
        t0 = time.perf_counter()
        cands = live.sess.step(event)
        live.seq += 1
        payload = step_payload(live.sess, live.seq, cands, live.expected)
        live.sha.update(canonical_bytes(payload))
        latency_ms = (time.perf_counter() - t0) * 1000.0
        if live.first_t is None:
            live.first_t = now
        live.last_t = now
        self.store.append(
            live.session_id,
            {"rec": "event", "t": now, "event": event.kind, "label": event.label},
        )
        reply = {"kind": "candidates", "session": live.session_id}
        reply.update(payload)
        reply["latency_ms"] = round(latency_ms, 3)
        reply["t"] = now
        return reply

    def _state(self, msg: dict) -> dict:
        if "session" not in msg:
            return {
                "kind": "state",
                "status": "ok",
                "sessions": len(self._live),
                "uptime_s": round(self.clock() - self.started_t, 3),
            }
        live = self._get_live(msg)
        cands = live.sess.candidates()
        # duration so far, so clients can show a server-computed wpm readout
        duration = (live.last_t - live.first_t) if live.first_t is not None else 0.0
        reply = {
            "kind": "state",
            "session": live.session_id,
            "layout": live.layout_name,
            "keys": list(live.sess.layout.alpha_labels),
            "config": live.config_view,
            "context": live.context,
            "prompt": live.prompt,
            "gestures": live.sess.gestures_total,
            "metrics": session_metrics(
                live.sess.gestures_total,
                live.sess.gestures_undo,
                live.sess.committed_text,
                duration,
            ),
        }
        reply.update(step_payload(live.sess, live.seq, cands, live.expected))
        return reply

    def _close(self, msg: dict, reason: str) -> dict:
        live = self._get_live(msg)
        return self._finalize(live, reason)

    def _finalize(self, live: _Live, reason: str) -> dict:
        committed = live.sess.close()
        duration = 0.0
        if live.first_t is not None and live.last_t is not None:
            duration = max(0.0, live.last_t - live.first_t)
        metrics = session_metrics(
            live.sess.gestures_total, live.sess.gestures_undo, committed, duration
        )
        digest = live.sha.hexdigest()
        self.store.append(
            live.session_id,
            {
                "rec": "close",
                "closed_t": self.clock(),
                "reason": reason,
                "committed": committed,
                "payload_sha256": digest,
                "metrics": metrics,
            },
        )
        del self._live[live.session_id]
        return {
            "kind": "metrics",
            "session": live.session_id,
            "committed": committed,
            "payload_sha256": digest,
            "metrics": metrics,
            "reason": reason,
        }

    def _sweep(self) -> None:
        if self.session_ttl <= 0:
            return
        now = self.clock()
        for sid in [s for s, lv in self._live.items() if now - lv.last_active > self.session_ttl]:
            self._finalize(self._live[sid], reason="timeout")

    def close_all(self) -> None:
        with self._lock:
            for sid in list(self._live):
                self._finalize(self._live[sid], reason="shutdown")


# -- replay ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReplayResult:
    ok: bool
    committed: str
    expected_committed: str
    hash_ok: bool
    replayed_events: int

    @property
    def text_ok(self) -> bool:
        return self.committed == self.expected_committed


def replay_record(record: SessionRecord, resources: Resources) -> ReplayResult:
    """Re-run a persisted session and check committed text and payload hash.

    The hash covers every intermediate candidate payload, so a pass means the
    decoder showed byte-identical candidate lists at every step.
    """
    layout = resources.layout(record.layout)
    cfg = SessionConfig(**record.config)
    sess = Session(layout, resources.lexicon(record.layout), resources.lm, cfg, record.context)
    expected = _expected_keys(layout, record.prompt) if record.prompt else None
    sha = hashlib.sha256()
    seq = 0
    for ev in record.events:
        event = KeyEvent(ev["event"], ev.get("label"))
        cands = sess.step(event)
        seq += 1
        sha.update(canonical_bytes(step_payload(sess, seq, cands, expected)))
    committed = sess.close()
    hash_ok = sha.hexdigest() == record.payload_sha256
    return ReplayResult(
        ok=(committed == record.committed) and hash_ok,
        committed=committed,
        expected_committed=record.committed,
        hash_ok=hash_ok,
        replayed_events=seq,
    )


# -- TCP shell --------------------------------------------------------------------


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        core: ServiceCore = self.server.core  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline()
            if not line:
                return
            text = line.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            try:
                msg = json.loads(text)
            except json.JSONDecodeError:
                reply = {"kind": "error", "error": "request is not valid JSON"}
            else:
                reply = core.handle(msg)
            data = json.dumps(reply, separators=(",", ":")) + "\n"
            try:
                self.wfile.write(data.encode("utf-8"))
                self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                return


class TcpService(socketserver.ThreadingTCPServer):
    """Sessions outlive connections: a client may reconnect and continue by id."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], core: ServiceCore):
        super().__init__(address, _Handler)
        self.core = core


def serve_forever(core: ServiceCore, host: str, port: int) -> TcpService:
    """Start the TCP service on a background thread; returns the server."""
    server = TcpService((host, port), core)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


class WireClient:
    """Blocking newline-JSON client for tests and the command line."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self.sock.makefile("rwb")

    def request(self, msg: dict) -> dict:
        self._file.write(json.dumps(msg, separators=(",", ":")).encode("utf-8") + b"\n")
        self._file.flush()
        line = self._file.readline()
        if not line:
            raise ServiceError("server closed the connection")
        return json.loads(line.decode("utf-8"))

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# -- configuration -----------------------------------------------------------------


@dataclass
class ServeSettings:
    """Resolved serve configuration: config file values overridden by flags."""

    layouts: list[str] = field(default_factory=lambda: ["4-optimized"])
    dictionary: str | None = None
    arpa: str | None = None
    adapter: list[str] | None = None
    beam_width: int = 30
    data_dir: str | None = None
    session_ttl: float = DEFAULT_TTL
    max_transcript_bytes: int = DEFAULT_ROTATE_BYTES
    host: str = "127.0.0.1"
    port: int = 8765


def load_settings(config_path: str | None, overrides: dict) -> ServeSettings:
    """Config file first, then flag overrides, then the data-dir env var."""
    settings = ServeSettings()
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ServiceError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ServiceError("config file must hold a JSON object")
        for key, value in raw.items():
            if not hasattr(settings, key):
                raise ServiceError(f"unknown config key: {key!r}")
            setattr(settings, key, value)
    for key, value in overrides.items():
        if value is not None:
            setattr(settings, key, value)
    if settings.data_dir is None:
        settings.data_dir = os.environ.get(ENV_DATA_DIR)
    return settings
