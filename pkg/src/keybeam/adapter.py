"""Client for external language models served over a line-delimited pipe.

The model runs as a child process and owns all scoring state; this side holds
integer handles. Handles are freed automatically: when a context object is
garbage collected its handle is queued and the batch rides along with the
next request. The object satisfies the same scoring interface as the
in-process n-gram model, with ``word_level = False`` so the decoder walks
words token by token.
"""

from __future__ import annotations

import json
import os
import subprocess
import tempfile
import weakref
from dataclasses import dataclass

import numpy as np


class AdapterError(RuntimeError):
    pass


@dataclass(frozen=True)
class RemoteContext:
    """Server-side LM state, addressed by handle; log10 mass accumulated so far."""

    handle: int
    cum_log10: float


@dataclass(frozen=True)
class RemoteSnapshot:
    handle: int
    cum_log10: float


class ExternalLm:
    """Spawn ``argv`` and score through it. Use as a context manager."""

    word_level = False

    def __init__(self, argv: list[str], name: str | None = None):
        self._stderr = tempfile.NamedTemporaryFile(
            mode="w+", prefix="lm-adapter-", suffix=".err", delete=False
        )
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            self._cleanup_stderr()
            raise AdapterError(f"cannot start adapter {argv!r}: {e}") from e
        self._drops: list[int] = []
        self._tok_cache: dict[str, tuple[int, ...]] = {}
        self._surfaces: dict[int, str] = {}
        hello = self._request({"op": "hello"})
        self.name = name or hello.get("name", "external-lm")
        self.protocol = hello.get("protocol")

    # -- plumbing --

    def _cleanup_stderr(self):
        try:
            self._stderr.close()
            os.unlink(self._stderr.name)
        except OSError:
            pass

    def _stderr_tail(self) -> str:
        try:
            with open(self._stderr.name, encoding="utf-8", errors="replace") as fh:
                return fh.read()[-2000:].strip()
        except OSError:
            return ""

    def _send(self, obj: dict) -> dict:
        proc = self._proc
        if proc is None or proc.poll() is not None:
            raise AdapterError(f"adapter process is gone: {self._stderr_tail()}")
        try:
            proc.stdin.write(json.dumps(obj) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as e:
            raise AdapterError(f"adapter pipe failed: {e}; {self._stderr_tail()}") from e
        if not line:
            raise AdapterError(f"adapter exited mid-request: {self._stderr_tail()}")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as e:
            raise AdapterError(f"bad adapter response {line!r}") from e
        if not resp.get("ok"):
            raise AdapterError(str(resp.get("error", "adapter error")))
        return resp

    def _request(self, obj: dict) -> dict:
        if self._drops and obj.get("op") != "drop":
            # finalizers append to this exact list; clear in place
            batch = list(self._drops)
            del self._drops[:]
            self._send({"op": "drop", "handles": batch})
        return self._send(obj)

    def _track(self, ctx_obj, handle: int):
        # queue the handle for release once the context object is unreachable;
        # the finalizer holds only the queue, never this client
        weakref.finalize(ctx_obj, self._drops.append, handle)
        return ctx_obj

    # -- scoring interface --

    def prime(self, text: str) -> RemoteContext:
        r = self._request({"op": "prime", "text": text})
        return self._track(RemoteContext(r["ctx"], float(r["cum_log10"])), r["ctx"])

    def tokens_for_word(self, word: str) -> tuple[int, ...]:
        hit = self._tok_cache.get(word)
        if hit is not None:
            return hit
        r = self._request({"op": "tokenize", "word": word})
        ids = tuple(int(i) for i in r["ids"])
        for i, surf in zip(ids, r["surfaces"]):
            self._surfaces[i] = surf
        self._tok_cache[word] = ids
        return ids

    def detokenize(self, ids) -> str:
        try:
            return "".join(self._surfaces[int(i)] for i in ids)
        except KeyError as e:
            raise AdapterError(f"unknown token id {e.args[0]}") from e

    def score_batch(self, ctx: RemoteContext, ids) -> np.ndarray:
        r = self._request(
            {"op": "score_batch", "ctx": ctx.handle, "ids": [int(i) for i in np.asarray(ids)]}
        )
        return np.array(r["log10"], dtype=np.float64)

    def extend(self, ctx: RemoteContext, ids) -> RemoteContext:
        r = self._request({"op": "extend", "ctx": ctx.handle, "ids": [int(i) for i in ids]})
        new = RemoteContext(r["ctx"], ctx.cum_log10 + float(r["added_log10"]))
        return self._track(new, r["ctx"])

    def score_next(self, ctx: RemoteContext, word: str) -> tuple[float, RemoteContext]:
        ids = self.tokens_for_word(word)
        new = self.extend(ctx, ids)
        return new.cum_log10 - ctx.cum_log10, new

    def snapshot(self, ctx: RemoteContext) -> RemoteSnapshot:
        r = self._request({"op": "snapshot", "ctx": ctx.handle})
        return self._track(RemoteSnapshot(r["handle"], ctx.cum_log10), r["handle"])

    def restore(self, handle: RemoteSnapshot) -> RemoteContext:
        r = self._request({"op": "restore", "handle": handle.handle})
        return self._track(RemoteContext(r["ctx"], handle.cum_log10), r["ctx"])

    def drop(self, obj) -> None:
        """Release a context or snapshot handle right away."""
        self._request({"op": "drop", "handles": [obj.handle]})

    def stats(self) -> dict:
        return self._request({"op": "stats"})

    # -- lifecycle --

    def close(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.poll() is None:
                proc.stdin.close()
                try:
                    proc.wait(timeout=3)
                except subprocess.TimeoutExpired:
                    proc.kill()
                    proc.wait()
        except OSError:
            pass
        finally:
            self._cleanup_stderr()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
