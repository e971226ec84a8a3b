"""Wire service and command line tests.

The service core is driven in-process (the TCP shell is exercised separately)
so determinism and persistence checks stay fast and free of socket timing.
"""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from keybeam import cli
from keybeam.decoder import SessionConfig
from keybeam.keymap import load_layout
from keybeam.lexicon import build_lexicon, load_dictionary
from keybeam.lm import load_arpa, tokenize, train_arpa_file
from keybeam.service import (
    Resources,
    ServiceCore,
    TranscriptStore,
    WireClient,
    canonical_bytes,
    load_record,
    load_record_file,
    payload_view,
    replay_record,
    serve_forever,
)

CORPUS_TEXT = """the cat sat on the mat.
the dog sat on the mat.
a cat and a dog sat.
the cat saw the dog.
an ant sat on the hat.
the dog saw an ant.
"""

# bundled 4-alphabetical: a-g=1, h-o=2, p-t=4, u-z.?!=5
LAYOUT = "4-alphabetical"


@pytest.fixture(scope="module")
def fixture_paths(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    corpus = root / "corpus.txt"
    corpus.write_text(CORPUS_TEXT)
    arpa = root / "2gram.arpa"
    train_arpa_file([str(corpus)], 2, str(arpa))
    counts = {}
    for w in tokenize(CORPUS_TEXT):
        counts[w] = counts.get(w, 0) + 1
    dict_tsv = root / "dict.tsv"
    dict_tsv.write_text("".join(f"{w}\t{c + 1}\n" for w, c in sorted(counts.items())))
    passage = root / "passage.txt"
    passage.write_text("the cat sat on the mat.\n\nthe dog sat on the hat.\n")
    return {"corpus": corpus, "arpa": arpa, "dict": dict_tsv, "passage": passage}


@pytest.fixture()
def resources(fixture_paths):
    return Resources(
        {LAYOUT: load_layout(LAYOUT)},
        load_dictionary(str(fixture_paths["dict"])),
        load_arpa(str(fixture_paths["arpa"])),
    )


class Clock:
    def __init__(self, t=1000.0):
        self.t = t

    def __call__(self):
        return self.t


def make_core(resources, tmp_path, **kw):
    store = TranscriptStore(tmp_path / "data", max_bytes=kw.pop("max_bytes", 1 << 20))
    return ServiceCore(resources, store, **kw)


def key(core, sid, event, label=None):
    msg = {"kind": "key", "session": sid, "event": event}
    if label is not None:
        msg["label"] = label
    return core.handle(msg)


def type_word_commit(core, sid, labels):
    for lab in labels:
        r = key(core, sid, "char", lab)
        assert r["kind"] == "candidates", r
    key(core, sid, "space")
    key(core, sid, "select")
    return key(core, sid, "space")


# -- session lifecycle ---------------------------------------------------------


def test_create_names_unknown_layout(resources, tmp_path):
    core = make_core(resources, tmp_path)
    reply = core.handle({"kind": "create", "layout": "9-sideways"})
    assert reply["kind"] == "error"
    assert "9-sideways" in reply["error"]


def test_create_echoes_config(resources, tmp_path):
    core = make_core(resources, tmp_path)
    reply = core.handle(
        {
            "kind": "create",
            "layout": LAYOUT,
            "config": {"beam_width": 7, "completion_enabled": False},
        }
    )
    assert reply["kind"] == "state"
    assert reply["config"]["beam_width"] == 7
    assert reply["config"]["completion_enabled"] is False
    assert reply["config"]["d1_enabled"] is True
    assert reply["committed"] == ""
    assert reply["keys"] == ["1", "2", "4", "5"]

    bad = core.handle({"kind": "create", "layout": LAYOUT, "config": {"beam": 7}})
    assert bad["kind"] == "error"
    assert "beam" in bad["error"]


def test_word_commit_flow(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    reply = type_word_commit(core, sid, ["1", "2"])  # a=1, n=2
    assert reply["committed"] == "an"

    done = core.handle({"kind": "metrics", "session": sid})
    assert done["kind"] == "metrics"
    assert done["committed"] == "an"
    m = done["metrics"]
    assert m["gestures_total"] == 5
    assert m["gestures_undo"] == 0
    assert m["characters"] == 2
    assert m["gpc"] == pytest.approx(2.5)


def test_candidates_reply_shape(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    r1 = key(core, sid, "char", "4")
    assert r1["kind"] == "candidates"
    assert r1["seq"] == 1
    assert 1 <= len(r1["candidates"]) <= 10
    assert [c["rank"] for c in r1["candidates"]] == list(range(1, len(r1["candidates"]) + 1))
    for c in r1["candidates"]:
        assert isinstance(c["text"], str) and isinstance(c["queued"], bool)
    assert r1["buffer"] == ["4"]
    assert r1["selection"] == 0
    assert isinstance(r1["latency_ms"], float) and r1["latency_ms"] >= 0
    r2 = key(core, sid, "char", "2")
    assert r2["seq"] == 2


def test_echo_tracks_prompt(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT, "prompt": "an ant"})["session"]

    assert key(core, sid, "char", "1")["echo"] == [True]
    assert key(core, sid, "char", "5")["echo"] == [True, False]  # n maps to 2, not 5
    assert key(core, sid, "undo")["echo"] == [True]
    assert key(core, sid, "char", "2")["echo"] == [True, True]
    boundary = key(core, sid, "space")
    assert boundary["echo"] == []
    # second word starts; echo now compares against the prompt's "ant"
    assert key(core, sid, "char", "1")["echo"] == [True]
    assert key(core, sid, "char", "2")["echo"] == [True, True]
    assert key(core, sid, "char", "4")["echo"] == [True, True, True]


def test_echo_absent_without_prompt(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    assert key(core, sid, "char", "1")["echo"] is None


def test_undo_on_fresh_session_is_safe(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    reply = key(core, sid, "undo")
    assert reply["kind"] == "candidates"
    assert reply["candidates"] == []
    assert type_word_commit(core, sid, ["1", "2"])["committed"] == "an"


def test_invalid_key_label_leaves_session_untouched(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    bad = key(core, sid, "char", "9")
    assert bad["kind"] == "error"
    assert "9" in bad["error"] and LAYOUT in bad["error"]
    state = core.handle({"kind": "state", "session": sid})
    assert state["gestures"] == 0
    assert state["seq"] == 0


def test_unknown_session_and_kind(resources, tmp_path):
    core = make_core(resources, tmp_path)
    r = key(core, "s999999", "space")
    assert r["kind"] == "error" and "s999999" in r["error"]
    r = core.handle({"kind": "destroy"})
    assert r["kind"] == "error"
    r = core.handle({"kind": "key", "session": None, "event": "bogus"})
    assert r["kind"] == "error"


def test_health_state(resources, tmp_path):
    core = make_core(resources, tmp_path)
    r = core.handle({"kind": "state"})
    assert r["kind"] == "state" and r["status"] == "ok" and r["sessions"] == 0
    core.handle({"kind": "create", "layout": LAYOUT})
    assert core.handle({"kind": "state"})["sessions"] == 1


def test_state_snapshot_is_gesture_free(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    first = key(core, sid, "char", "4")
    snap = core.handle({"kind": "state", "session": sid})
    assert snap["kind"] == "state"
    assert snap["gestures"] == 1
    assert snap["seq"] == first["seq"]
    assert snap["candidates"] == first["candidates"]


def test_state_snapshot_reports_live_metrics(resources, tmp_path):
    clock = Clock()
    core = make_core(resources, tmp_path, clock=clock)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    snap = core.handle({"kind": "state", "session": sid})
    assert snap["metrics"]["gestures_total"] == 0
    assert snap["metrics"]["wpm_wallclock"] is None
    for i, (event, label) in enumerate(
        [("char", "1"), ("char", "2"), ("space", None), ("select", None), ("space", None)]
    ):
        clock.t = 1000.0 + i * 3.0
        key(core, sid, event, label)
    snap = core.handle({"kind": "state", "session": sid})
    m = snap["metrics"]
    assert m["gestures_total"] == 5
    assert m["characters"] == 2  # committed "an"
    assert m["gpc"] == pytest.approx(2.5)
    assert m["duration_s"] == pytest.approx(12.0)
    assert m["wpm_wallclock"] == pytest.approx(0.2 * 2 / (12.0 / 60.0))


# -- metrics and persistence -----------------------------------------------------


def test_close_uses_wall_clock_for_wpm(resources, tmp_path):
    clock = Clock()
    core = make_core(resources, tmp_path, clock=clock)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    for i, (event, label) in enumerate(
        [("char", "1"), ("char", "2"), ("space", None), ("select", None), ("space", None)]
    ):
        clock.t = 1000.0 + i * 3.0  # 3 s per gesture, 12 s first to last
        key(core, sid, event, label)
    done = core.handle({"kind": "metrics", "session": sid})
    m = done["metrics"]
    assert m["duration_s"] == pytest.approx(12.0)
    # 2 characters in 12 s of typing: 0.2 * 2 / 0.2 min
    assert m["wpm_wallclock"] == pytest.approx(0.2 * 2 / (12.0 / 60.0))

    record = load_record(core.store, sid)
    assert record.committed == "an"
    assert record.metrics["wpm_wallclock"] == pytest.approx(m["wpm_wallclock"])
    assert [e["event"] for e in record.events] == ["char", "char", "space", "select", "space"]


def test_zero_event_record(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    done = core.handle({"kind": "metrics", "session": sid})
    m = done["metrics"]
    assert done["committed"] == ""
    assert m["gestures_total"] == 0
    assert m["characters"] == 0
    assert m["gpc"] is None and m["wpm_wallclock"] is None

    record = load_record(core.store, sid)
    assert record.events == ()
    assert replay_record(record, resources).ok


def test_persistence_roundtrip_replay(resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT, "prompt": "an ant"})["session"]
    type_word_commit(core, sid, ["1", "2"])
    type_word_commit(core, sid, ["1", "2", "4"])
    done = core.handle({"kind": "metrics", "session": sid})
    assert done["committed"] == "an ant"

    record = load_record(core.store, sid)
    result = replay_record(record, resources)
    assert result.ok and result.hash_ok
    assert result.committed == "an ant"
    assert result.replayed_events == 11

    # a tampered hash must fail the bit-exactness check
    import dataclasses as dc

    forged = dc.replace(record, payload_sha256="0" * 64)
    assert not replay_record(forged, resources).ok


def test_replay_detects_config_drift(resources, tmp_path):
    core = make_core(resources, tmp_path, defaults=SessionConfig(beam_width=3))
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    type_word_commit(core, sid, ["4", "2", "1"])
    core.handle({"kind": "metrics", "session": sid})
    record = load_record(core.store, sid)
    assert record.config["beam_width"] == 3
    assert replay_record(record, resources).ok  # full config rides the header


def test_transcript_rotation(resources, tmp_path):
    core = make_core(resources, tmp_path, max_bytes=1024)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    for _ in range(4):
        type_word_commit(core, sid, ["4", "2", "1"])  # "the"
    core.handle({"kind": "metrics", "session": sid})

    parts = list(core.store.root.glob(f"{sid}.jsonl.*"))
    assert parts, "expected at least one rotated part"
    record = load_record(core.store, sid)
    assert len(record.events) == 4 * 6
    assert replay_record(record, resources).ok


def test_session_timeout_sweep(resources, tmp_path):
    clock = Clock()
    core = make_core(resources, tmp_path, session_ttl=5.0, clock=clock)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    key(core, sid, "char", "1")

    clock.t += 3.0
    assert key(core, sid, "char", "2")["kind"] == "candidates"  # still alive

    clock.t += 6.0
    reply = key(core, sid, "space")
    assert reply["kind"] == "error" and sid in reply["error"]
    record = load_record(core.store, sid)
    assert record.reason == "timeout"
    assert len(record.events) == 2


def test_concurrent_sessions_stay_isolated(resources, tmp_path):
    core = make_core(resources, tmp_path)
    a = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    b = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    assert a != b
    # interleave gestures: a types "an", b types "the"
    key(core, a, "char", "1")
    key(core, b, "char", "4")
    key(core, b, "char", "2")
    key(core, a, "char", "2")
    key(core, b, "char", "1")
    key(core, a, "space")
    key(core, b, "space")
    key(core, a, "select")
    key(core, b, "select")
    ra = key(core, a, "space")
    rb = key(core, b, "space")
    assert ra["committed"] == "an" and ra["seq"] == 5
    assert rb["committed"] == "the" and rb["seq"] == 6


# -- determinism -------------------------------------------------------------------


SCRIPT = [
    ("char", "4"), ("char", "2"), ("char", "1"), ("space", None), ("select", None),
    ("space", None), ("char", "1"), ("char", "1"), ("char", "4"), ("undo", None),
    ("char", "4"), ("space", None), ("select", None), ("select", None), ("space", None),
    ("char", "5"), ("undo", None), ("char", "5"), ("space", None), ("select", None),
]


def _run_script(resources, tmp_path, tag):
    core = make_core(resources, tmp_path / tag)
    sid = core.handle({"kind": "create", "layout": LAYOUT, "prompt": "the cat sat"})["session"]
    stream = []
    for event, label in SCRIPT:
        stream.append(key(core, sid, event, label))
    done = core.handle({"kind": "metrics", "session": sid})
    return stream, done


def test_wire_determinism_across_restarts(resources, tmp_path):
    first, done1 = _run_script(resources, tmp_path, "run1")
    second, done2 = _run_script(resources, tmp_path, "run2")
    assert len(first) == len(second) == 20
    for r1, r2 in zip(first, second):
        assert canonical_bytes(payload_view(r1)) == canonical_bytes(payload_view(r2))
    assert done1["payload_sha256"] == done2["payload_sha256"]
    assert done1["committed"] == done2["committed"]


# -- TCP shell ---------------------------------------------------------------------


def test_tcp_round_trip_and_reconnect(resources, tmp_path):
    core = make_core(resources, tmp_path)
    server = serve_forever(core, "127.0.0.1", 0)
    port = server.server_address[1]
    try:
        with WireClient("127.0.0.1", port) as client:
            health = client.request({"kind": "state"})
            assert health["status"] == "ok"
            sid = client.request({"kind": "create", "layout": LAYOUT})["session"]
            r = client.request({"kind": "key", "session": sid, "event": "char", "label": "1"})
            assert r["kind"] == "candidates" and r["latency_ms"] >= 0.0

            # garbage must get an error reply and leave the connection usable
            client._file.write(b"this is not json\n")
            client._file.flush()
            err = json.loads(client._file.readline())
            assert err["kind"] == "error"
            r = client.request({"kind": "key", "session": sid, "event": "char", "label": "2"})
            assert r["buffer"] == ["1", "2"]

        # sessions outlive connections: continue the same id on a new socket
        with WireClient("127.0.0.1", port) as client:
            client.request({"kind": "key", "session": sid, "event": "space"})
            client.request({"kind": "key", "session": sid, "event": "select"})
            r = client.request({"kind": "key", "session": sid, "event": "space"})
            assert r["committed"] == "an"
            done = client.request({"kind": "metrics", "session": sid})
            assert done["metrics"]["gestures_total"] == 5
    finally:
        server.shutdown()
        server.server_close()


# -- command line -------------------------------------------------------------------


def run_cli(args):
    return cli.main([str(a) for a in args])


def test_cli_simulate_rank_cdf_report(fixture_paths, tmp_path):
    out = tmp_path / "report"
    code = run_cli(
        ["simulate", "--metric", "rank-cdf", "--layout", LAYOUT,
         "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"],
         "--out", out, fixture_paths["passage"]]
    )
    assert code == 0
    rows = (out / "rank_cdf.csv").read_text().strip().splitlines()
    assert rows[0] == "rank,count,cumulative_fraction"
    assert float(rows[-1].split(",")[2]) == pytest.approx(1.0)
    assert (out / "summary.txt").read_text().startswith("metric: rank-cdf")
    png = (out / "rank_cdf.png").read_bytes()
    assert png[:8] == b"\x89PNG\r\n\x1a\n"


def test_cli_simulate_min_gpc_traces_replay(fixture_paths, tmp_path, resources):
    out = tmp_path / "report"
    code = run_cli(
        ["simulate", "--metric", "min-gpc", "--layout", LAYOUT,
         "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"],
         "--out", out, fixture_paths["passage"]]
    )
    assert code == 0
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert lines[0].startswith("passage,gestures")
    assert lines[-1].startswith("ALL,")

    from keybeam.decoder import KeyEvent, Session
    from keybeam.simulator import load_passage

    trace = json.loads((out / "traces.jsonl").read_text().splitlines()[0])
    passage = load_passage(fixture_paths["passage"])
    sess = Session(
        resources.layout(LAYOUT), resources.lexicon(LAYOUT), resources.lm,
        context=passage.context,
    )
    for ev in trace["events"]:
        sess.step(KeyEvent(ev["event"], ev["label"]))
    assert sess.close() == trace["text"] == trace["target"]


def test_cli_simulate_cer_report(fixture_paths, tmp_path):
    out = tmp_path / "report"
    code = run_cli(
        ["simulate", "--metric", "cer", "--layout", LAYOUT,
         "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"],
         "--out", out, "--no-figures", fixture_paths["passage"]]
    )
    assert code == 0
    rows = (out / "cer.csv").read_text().strip().splitlines()
    assert rows[0] == "passage,cer,wer,gestures"
    assert not (out / "cer.png").exists()


def test_cli_failure_writes_nothing(fixture_paths, tmp_path, capsys):
    out = tmp_path / "report"
    code = run_cli(
        ["simulate", "--metric", "rank-cdf", "--layout", LAYOUT,
         "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"],
         "--out", out, tmp_path / "no-such-passage.txt"]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err
    assert not out.exists()

    code = run_cli(
        ["simulate", "--metric", "rank-cdf", "--layout", "no-such-layout",
         "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"],
         "--out", out, fixture_paths["passage"]]
    )
    assert code == 2
    assert not out.exists()


def test_cli_optimize_layout(fixture_paths, tmp_path):
    out = tmp_path / "tiny.layout"
    args = ["optimize-layout", "--keys", 2, "--corpus", fixture_paths["dict"],
            "--out", out, "--seed", 3, "--iterations", 80, "--restarts", 2]
    assert run_cli(args) == 0
    layout = load_layout(str(out))
    assert layout.alpha_key_count == 2
    assert (tmp_path / "tiny.report.txt").read_text().startswith("layout optimization report")
    assert (tmp_path / "tiny.loss.png").exists()

    out2 = tmp_path / "tiny2.layout"
    args2 = ["optimize-layout", "--keys", 2, "--corpus", fixture_paths["dict"],
             "--out", out2, "--seed", 3, "--iterations", 80, "--restarts", 2]
    assert run_cli(args2) == 0
    text1 = out.read_text().splitlines()[1:]  # drop the name comment
    text2 = out2.read_text().splitlines()[1:]
    assert text1 == text2, "same seed must reproduce the same layout"


def test_cli_count_ngrams_and_arpa_check(fixture_paths, tmp_path, capsys):
    out = tmp_path / "models" / "tiny.arpa"
    assert run_cli(["count-ngrams", fixture_paths["corpus"], "--order", 3, "--out", out]) == 0
    assert load_arpa(str(out)).order == 3

    assert run_cli(["arpa-check", out, "--audit", 20]) == 0
    printed = capsys.readouterr().out
    assert "normalization OK" in printed

    broken = tmp_path / "broken.arpa"
    broken.write_text("this is not an arpa file\n")
    assert run_cli(["arpa-check", broken]) == 2


def test_cli_replay_roundtrip(fixture_paths, resources, tmp_path):
    core = make_core(resources, tmp_path)
    sid = core.handle({"kind": "create", "layout": LAYOUT})["session"]
    type_word_commit(core, sid, ["1", "2"])
    core.handle({"kind": "metrics", "session": sid})
    transcript = core.store.path(sid)

    code = run_cli(["replay", transcript,
                    "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"]])
    assert code == 0

    # corrupt the recorded committed text: replay must fail with exit 3
    lines = transcript.read_text().splitlines()
    closing = json.loads(lines[-1])
    closing["committed"] = "ant"
    lines[-1] = json.dumps(closing, sort_keys=True, separators=(",", ":"))
    forged = tmp_path / "data" / "forged.jsonl"
    forged.write_text("\n".join(lines) + "\n")
    code = run_cli(["replay", forged,
                    "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"]])
    assert code == 3


def test_cli_serve_subprocess_end_to_end(fixture_paths, tmp_path):
    config = tmp_path / "serve.json"
    config.write_text(json.dumps({
        "layouts": [LAYOUT],
        "dictionary": str(fixture_paths["dict"]),
        "arpa": str(fixture_paths["arpa"]),
        "host": "127.0.0.1",
        "port": 0,
    }))
    data_dir = tmp_path / "served-data"
    env = dict(os.environ, KEYBEAM_DATA_DIR=str(data_dir), PYTHONUNBUFFERED="1")
    proc = subprocess.Popen(
        [sys.executable, "-m", "keybeam.cli", "serve", "--config", str(config)],
        stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True, env=env,
    )
    try:
        line = proc.stdout.readline()
        assert line.startswith("listening on "), line
        port = int(line.strip().rsplit(":", 1)[1])
        with WireClient("127.0.0.1", port, timeout=30.0) as client:
            assert client.request({"kind": "state"})["status"] == "ok"
            sid = client.request(
                {"kind": "create", "layout": LAYOUT, "prompt": "an"}
            )["session"]
            r = client.request({"kind": "key", "session": sid, "event": "char", "label": "1"})
            assert r["echo"] == [True]
            client.request({"kind": "key", "session": sid, "event": "char", "label": "2"})
            client.request({"kind": "key", "session": sid, "event": "space"})
            client.request({"kind": "key", "session": sid, "event": "select"})
            r = client.request({"kind": "key", "session": sid, "event": "space"})
            assert r["committed"] == "an"
            done = client.request({"kind": "metrics", "session": sid})
            assert done["committed"] == "an"
    finally:
        proc.terminate()
        proc.wait(timeout=10)

    # the transcript landed under the env-var data dir and replays bit-exactly
    transcript = data_dir / f"{sid}.jsonl"
    assert transcript.exists()
    code = run_cli(["replay", transcript,
                    "--lm", fixture_paths["arpa"], "--dictionary", fixture_paths["dict"]])
    assert code == 0
    record = load_record_file(transcript)
    assert record.prompt == "an"
