"""Reference adapter process: serves an ARPA n-gram model over stdin/stdout.

One JSON object per line in, one per line out. With ``--chunk N`` every word
is split into N-character tokens so callers exercise their multi-token code
paths; the whole word's log10 probability is charged on the first token and
the remaining tokens cost nothing, which keeps word totals identical to the
unsplit model. Token ids are process-local interning ids, not ARPA vocab ids.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from keybeam.lm import DEFAULT_UNK_LOG10, NgramContext, load_arpa

PROTOCOL = 1


class StubServer:
    def __init__(self, lm, chunk: int = 0, name: str = "arpa-stub"):
        self.lm = lm
        self.chunk = chunk
        self.name = name
        self.states: dict[int, NgramContext] = {}
        self.next_id = 1
        # token id -> (word, position, n_positions, surface)
        self.tokens: dict[int, tuple[str, int, int, str]] = {}
        self.word_ids: dict[str, list[int]] = {}

    def _new_handle(self, state: NgramContext) -> int:
        h = self.next_id
        self.next_id += 1
        self.states[h] = state
        return h

    def _state(self, req, key="ctx") -> NgramContext:
        h = req.get(key)
        st = self.states.get(h)
        if st is None:
            raise KeyError(f"unknown handle {h!r}")
        return st

    def _intern(self, word: str) -> list[int]:
        ids = self.word_ids.get(word)
        if ids is not None:
            return ids
        if self.chunk > 0:
            parts = [word[i : i + self.chunk] for i in range(0, len(word), self.chunk)]
        else:
            parts = [word]
        ids = []
        for j, surf in enumerate(parts):
            tid = len(self.tokens) + 1
            self.tokens[tid] = (word, j, len(parts), surf)
            ids.append(tid)
        self.word_ids[word] = ids
        return ids

    def _score_token(self, state: NgramContext, tid: int) -> float:
        word, j, _n, _surf = self._token(tid)
        if j > 0:
            return 0.0
        wid = self.lm.token_id(word)
        return float(self.lm.score_batch(state, np.array([wid]))[0])

    def _token(self, tid) -> tuple[str, int, int, str]:
        tok = self.tokens.get(tid)
        if tok is None:
            raise KeyError(f"unknown token id {tid!r}")
        return tok

    def _advance(self, state: NgramContext, tid: int) -> tuple[NgramContext, float]:
        word, j, n, _surf = self._token(tid)
        added = self._score_token(state, tid)
        hist = state.ids
        if j == n - 1:
            # the word enters the n-gram history once its last token arrives
            wid = self.lm.token_id(word)
            if wid >= 0:
                hist = (hist + (wid,))[-(self.lm.order - 1):] if self.lm.order > 1 else ()
            else:
                hist = ()
        return NgramContext(hist, state.cum_log10 + added), added

    # -- ops --

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        if op == "hello":
            return {"ok": True, "protocol": PROTOCOL, "name": self.name, "word_level": False}
        if op == "tokenize":
            word = req["word"]
            ids = self._intern(word)
            return {"ok": True, "ids": ids, "surfaces": [self.tokens[i][3] for i in ids]}
        if op == "prime":
            ctx = self.lm.prime(req.get("text", ""))
            h = self._new_handle(ctx)
            return {"ok": True, "ctx": h, "cum_log10": ctx.cum_log10}
        if op == "score_batch":
            state = self._state(req)
            out = [self._score_token(state, tid) for tid in req["ids"]]
            return {"ok": True, "log10": out}
        if op == "extend":
            state = self._state(req)
            added = 0.0
            for tid in req["ids"]:
                state, a = self._advance(state, tid)
                added += a
            return {"ok": True, "ctx": self._new_handle(state), "added_log10": added}
        if op == "snapshot":
            return {"ok": True, "handle": self._new_handle(self._state(req))}
        if op == "restore":
            return {"ok": True, "ctx": self._new_handle(self._state(req, key="handle"))}
        if op == "drop":
            for h in req.get("handles", []):
                self.states.pop(h, None)  # dropping twice is fine
            return {"ok": True}
        if op == "stats":
            return {"ok": True, "contexts": len(self.states), "tokens": len(self.tokens)}
        return {"ok": False, "error": f"unknown op {op!r}"}


def serve(server: StubServer, fin=None, fout=None) -> None:
    fin = fin or sys.stdin
    fout = fout or sys.stdout
    for line in fin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            resp = {"ok": False, "error": "request is not valid JSON"}
        else:
            try:
                resp = server.handle(req)
            except KeyError as e:
                resp = {"ok": False, "error": str(e.args[0]) if e.args else "missing field"}
            except Exception as e:  # report, keep serving
                resp = {"ok": False, "error": f"{type(e).__name__}: {e}"}
        fout.write(json.dumps(resp) + "\n")
        fout.flush()


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="keybeam-lm-stub",
        description="Serve an ARPA n-gram model over the line-delimited adapter protocol.",
    )
    ap.add_argument("--arpa", required=True, help="ARPA model file")
    ap.add_argument(
        "--chunk",
        type=int,
        default=0,
        help="split words into N-character tokens (0 = one token per word)",
    )
    ap.add_argument("--unk-log10", type=float, default=DEFAULT_UNK_LOG10)
    ap.add_argument("--name", default="arpa-stub")
    args = ap.parse_args(argv)
    if args.chunk < 0:
        ap.error("--chunk must be >= 0")
    lm = load_arpa(args.arpa, unk_log10=args.unk_log10)
    serve(StubServer(lm, chunk=args.chunk, name=args.name))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
