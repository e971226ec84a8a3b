"""Beam-search decoding of ambiguous key presses into text.

A session holds a beam of multi-word hypotheses. Per key press the current
word's match set (exact, prefix-completion and distance-1 interpretations of
the keys typed since the last boundary) is rescored against every previous
candidate: candidate score = LM log10 of its words plus the per-word key-error
penalties. Select queues a candidate; the queued candidate commits on the next
gesture that is not Select or Undo. Undo restores the full previous state from
a snapshot stack. Space at a word boundary right after a commit shows
next-word predictions instead of matching an empty buffer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import log10

import numpy as np

from keybeam.keymap import KeyLayout
from keybeam.lexicon import Lexicon

PRED_NONE = -1  # sentinel parent/word id


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class KeyEvent:
    kind: str  # "char" | "space" | "select" | "undo"
    label: str | None = None

    @staticmethod
    def char(label: str) -> "KeyEvent":
        return KeyEvent("char", label)


SPACE = KeyEvent("space")
SELECT = KeyEvent("select")
UNDO = KeyEvent("undo")


def events_for_word(layout: KeyLayout, word: str) -> list[KeyEvent]:
    return [KeyEvent.char(lab) for lab in layout.map_word(word)]


@dataclass(frozen=True)
class SessionConfig:
    """Decoding knobs. Defaults mirror the live system."""

    beam_width: int = 30
    context_enabled: bool = True
    completion_enabled: bool = True
    d1_enabled: bool = True
    d1_penalty: float = log10(0.01)
    d1_start_multiplier: float = 1.0  # scales the penalty for the first word of a session
    undo_depth: int = 256
    prediction_words: int = 5000  # size of the next-word prediction pool
    prefix_limit: int = 2000  # cap on prefix completions fed to the beam
    substitution_only_d1: bool = False
    space_selects_top: bool = False  # Space queues the top candidate at a word boundary

    def __post_init__(self):
        if self.beam_width < 1:
            raise DecodeError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.undo_depth < 0:
            raise DecodeError("undo_depth must be >= 0")
        if self.d1_penalty > 0:
            raise DecodeError("d1_penalty is a log10 penalty and must be <= 0")


@dataclass(frozen=True)
class Candidate:
    """One hypothesis: all words so far plus its LM state and score parts."""

    words: tuple[str, ...]
    lm_log10: float
    cm_log10: float
    ctx: object
    pending: bool = False  # last word is an uncommitted completion (keys not all typed)
    last_freq: float = 0.0
    last_id: int = PRED_NONE

    @property
    def total(self) -> float:
        return self.lm_log10 + self.cm_log10

    @property
    def text(self) -> str:
        return " ".join(self.words)


@dataclass(frozen=True)
class DisplayCandidate:
    text: str
    rank: int
    queued: bool
    total: float
    pending: bool
    words: tuple[str, ...]


_Snapshot = tuple  # (C, C_prev, s, S, buffer, committed)


class Session:
    """Decoding session: the searcher state machine plus its undo stack."""

    def __init__(
        self,
        layout: KeyLayout,
        lexicon: Lexicon,
        lm,
        config: SessionConfig | None = None,
        context: str = "",
    ):
        self.layout = layout
        self.lexicon = lexicon
        self.lm = lm
        self.config = config or SessionConfig()
        self.context_text = context
        ctx = lm.prime(context if self.config.context_enabled else "")
        root = Candidate(words=(), lm_log10=0.0, cm_log10=0.0, ctx=ctx)
        self._C: tuple[Candidate, ...] = (root,)
        self._C_prev: tuple[Candidate, ...] = (root,)
        self._s = 0
        self._S = False
        self._buffer: tuple[str, ...] = ()
        self._committed: tuple[str, ...] = ()
        self._undo: list[_Snapshot] = []
        self._alpha = set(layout.alpha_labels)
        self.gestures_total = 0
        self.gestures_undo = 0

    # -- public views --

    @property
    def key_buffer(self) -> tuple[str, ...]:
        return self._buffer

    @property
    def selection_index(self) -> int:
        return self._s

    @property
    def selection_committed(self) -> bool:
        return self._S

    @property
    def committed_words(self) -> tuple[str, ...]:
        return self._committed

    @property
    def committed_text(self) -> str:
        return " ".join(self._committed)

    def _displayed(self) -> tuple[Candidate, ...]:
        # the empty root hypothesis is never shown or selectable
        cands = tuple(c for c in self._C if c.words)
        if self.config.completion_enabled:
            return cands
        return tuple(c for c in cands if not c.pending)

    def candidates(self) -> list[DisplayCandidate]:
        out = []
        for i, c in enumerate(self._displayed(), 1):
            out.append(
                DisplayCandidate(
                    text=c.text,
                    rank=i,
                    queued=(i == self._s),
                    total=c.total,
                    pending=c.pending,
                    words=c.words,
                )
            )
        return out

    # -- state snapshots --

    def _push_undo(self):
        if self.config.undo_depth == 0:
            return
        self._undo.append((self._C, self._C_prev, self._s, self._S, self._buffer, self._committed))
        if len(self._undo) > self.config.undo_depth:
            del self._undo[0]

    def _pop_undo(self):
        if not self._undo:
            return
        self._C, self._C_prev, self._s, self._S, self._buffer, self._committed = self._undo.pop()

    def fork(self) -> "Session":
        """Independent copy sharing the immutable resources."""
        twin = object.__new__(Session)
        twin.__dict__.update(self.__dict__)
        twin._undo = list(self._undo)
        return twin

    # -- events --

    def step(self, event: KeyEvent) -> list[DisplayCandidate]:
        self.gestures_total += 1
        if event.kind == "undo":
            self.gestures_undo += 1
            self._pop_undo()
            return self.candidates()
        self._push_undo()
        if event.kind == "select":
            disp = self._displayed()
            if disp:
                self._s = self._s + 1 if self._s < len(disp) else 1
            return self.candidates()
        if event.kind == "char":
            if event.label not in self._alpha:
                raise DecodeError(f"unknown key label {event.label!r} for layout {self.layout.name!r}")
            if self._s:
                self._commit(self._s)
            self._S = False
            self._buffer = self._buffer + (event.label,)
            self._C = self._expand(self._C_prev, *self._char_matches())
            return self.candidates()
        if event.kind == "space":
            if self._s:
                self._commit(self._s)
            if self._S:
                # word already complete: show next-word predictions, keep C_prev
                self._C = self._expand(self._C_prev, *self._prediction_matches())
            elif self._buffer:
                self._C = self._expand(self._C_prev, *self._boundary_matches())
                self._C_prev = self._C
                self._buffer = ()
                if self.config.space_selects_top and self._displayed():
                    self._s = 1
            # bare Space with nothing typed: no-op
            return self.candidates()
        raise DecodeError(f"unknown event kind {event.kind!r}")

    def close(self) -> str:
        """Commit whatever is outstanding and return the final text."""
        if self._s:
            self._commit(self._s)
        elif not self._S:
            disp = self._displayed()
            if disp and (self._buffer or len(disp[0].words) > len(self._committed)):
                self._commit(1)
        return self.committed_text

    def _commit(self, s_idx: int):
        disp = self._displayed()
        if not 1 <= s_idx <= len(disp):
            raise DecodeError(f"selection index {s_idx} out of range 1..{len(disp)}")
        chosen = disp[s_idx - 1]
        cand = next(c for c in self._C if c.words == chosen.words)
        cand = replace(cand, pending=False)
        self._C_prev = (cand,)
        self._C = (cand,)
        self._committed = cand.words
        self._s = 0
        self._S = True
        self._buffer = ()

    # -- match sets --

    def _char_matches(self):
        lx = self.lexicon
        pref = lx.prefix_ids(self._buffer, self.config.prefix_limit)
        n_keys = len(self._buffer)
        pending = lx.seq_lens[pref] > n_keys if len(pref) else np.zeros(0, dtype=bool)
        ids = [pref]
        cms = [np.zeros(len(pref))]
        pend = [pending]
        if self.config.d1_enabled:
            pset = set(pref.tolist())
            d1 = [i for i in lx.distance1_ids(self._buffer, substitution_only=self.config.substitution_only_d1) if i not in pset]
            ids.append(np.array(d1, dtype=np.int32))
            cms.append(np.full(len(d1), self.config.d1_penalty))
            pend.append(np.zeros(len(d1), dtype=bool))
        return np.concatenate(ids), np.concatenate(cms), np.concatenate(pend)

    def _boundary_matches(self):
        lx = self.lexicon
        exact = np.array(lx.exact_ids(self._buffer), dtype=np.int32)
        ids = [exact]
        cms = [np.zeros(len(exact))]
        if self.config.d1_enabled:
            d1 = lx.distance1_ids(self._buffer, substitution_only=self.config.substitution_only_d1)
            ids.append(np.array(d1, dtype=np.int32))
            cms.append(np.full(len(d1), self.config.d1_penalty))
        merged = np.concatenate(ids)
        return merged, np.concatenate(cms), np.zeros(len(merged), dtype=bool)

    def _prediction_matches(self):
        ids = self.lexicon.most_frequent_ids(self.config.prediction_words)
        return ids, np.zeros(len(ids)), np.zeros(len(ids), dtype=bool)

    # -- beam expansion --

    def _expand(self, parents, wids, cms, pending) -> tuple[Candidate, ...]:
        if len(wids) == 0 or not parents:
            return ()
        lx = self.lexicon
        lm = self.lm
        K = self.config.beam_width
        if getattr(lm, "word_level", False):
            return self._expand_word_level(parents, wids, cms, pending, K)
        return self._expand_tokenwise(parents, wids, cms, pending, K)

    def _expand_word_level(self, parents, wids, cms, pending, K):
        lx = self.lexicon
        lm = self.lm
        n_m = len(wids)
        n_p = len(parents)
        tok_ids = np.array([lm.token_id(lx.words[w]) for w in wids], dtype=np.int64)
        freqs = lx.freqs[wids]
        tot = np.empty(n_p * n_m)
        lm_tot = np.empty(n_p * n_m)
        cm_tot = np.empty(n_p * n_m)
        for pi, parent in enumerate(parents):
            lp = lm.score_batch(parent.ctx, tok_ids)
            cmv = cms if parent.words else cms * self.config.d1_start_multiplier
            sl = slice(pi * n_m, (pi + 1) * n_m)
            lm_tot[sl] = parent.lm_log10 + lp
            cm_tot[sl] = parent.cm_log10 + cmv
            tot[sl] = lm_tot[sl] + cm_tot[sl]
        wid_flat = np.tile(wids.astype(np.int64), n_p)
        freq_flat = np.tile(freqs, n_p)
        parent_flat = np.repeat(np.arange(n_p), n_m)
        order = np.lexsort((parent_flat, wid_flat, -freq_flat, -tot))
        top = order[:K]
        out = []
        for idx in top:
            pi = int(parent_flat[idx])
            wid = int(wid_flat[idx])
            parent = parents[pi]
            word = lx.words[wid]
            ctx = lm.extend(parent.ctx, [int(tok_ids[idx % n_m])])
            out.append(
                Candidate(
                    words=parent.words + (word,),
                    lm_log10=float(lm_tot[idx]),
                    cm_log10=float(cm_tot[idx]),
                    ctx=ctx,
                    pending=bool(pending[idx % n_m]),
                    last_freq=float(freq_flat[idx]),
                    last_id=wid,
                )
            )
        return tuple(out)

    def _expand_tokenwise(self, parents, wids, cms, pending, K):
        """Inner per-token loop for LMs whose words span several tokens."""
        lx = self.lexicon
        lm = self.lm
        pairs = []
        for pi, parent in enumerate(parents):
            cmv = cms if parent.words else cms * self.config.d1_start_multiplier
            for mi, wid in enumerate(wids):
                word = lx.words[int(wid)]
                pairs.append(
                    {
                        "pi": pi,
                        "wid": int(wid),
                        "word": word,
                        "tokens": lm.tokens_for_word(word),
                        "j": 0,
                        "ctx": parent.ctx,
                        "lm": parent.lm_log10,
                        "cm": parent.cm_log10 + float(cmv[mi]),
                        "pending": bool(pending[mi]),
                    }
                )
        max_len = max(len(p["tokens"]) for p in pairs)
        for j in range(max_len):
            for p in pairs:
                if j < len(p["tokens"]):
                    tid = p["tokens"][j]
                    lp = float(lm.score_batch(p["ctx"], np.array([tid]))[0])
                    p["lm"] = p["lm"] + lp
                    p["ctx"] = lm.extend(p["ctx"], [tid])
                    p["j"] = j + 1
            pairs.sort(
                key=lambda p: (
                    -(p["lm"] + p["cm"]),
                    -lx.freqs[p["wid"]],
                    p["wid"],
                    p["pi"],
                )
            )
            pairs = pairs[:K]
        out = []
        for p in pairs:
            parent = parents[p["pi"]]
            out.append(
                Candidate(
                    words=parent.words + (p["word"],),
                    lm_log10=p["lm"],
                    cm_log10=p["cm"],
                    ctx=p["ctx"],
                    pending=p["pending"],
                    last_freq=float(lx.freqs[p["wid"]]),
                    last_id=p["wid"],
                )
            )
        return tuple(out)

    # -- simulator support --

    def force_word(self, word: str):
        """Teacher forcing: lock the session onto the true path extended by ``word``.

        Used by metric simulations that must keep conditioning on the correct
        history regardless of where the target actually ranked.
        """
        w = word.lower()
        if w not in self.lexicon:
            raise DecodeError(f"cannot force unknown word {w!r}")
        parent = self._C_prev[0]
        base = next((c for c in self._C_prev if c.words == self._committed), parent)
        toks = self.lm.tokens_for_word(w)
        ctx = base.ctx
        lm_acc = base.lm_log10
        for t in toks:
            lp = float(self.lm.score_batch(ctx, np.array([t]))[0])
            lm_acc += lp
            ctx = self.lm.extend(ctx, [t])
        cand = Candidate(
            words=base.words + (w,),
            lm_log10=lm_acc,
            cm_log10=base.cm_log10,
            ctx=ctx,
            last_freq=self.lexicon.freq(w),
            last_id=self.lexicon.word_id(w),
        )
        self._C = (cand,)
        self._C_prev = (cand,)
        self._committed = cand.words
        self._s = 0
        self._S = False
        self._buffer = ()


def new_session(layout, lexicon, lm, config=None, context="") -> Session:
    return Session(layout, lexicon, lm, config, context)


# ---------------------------------------------------------------------------
# Open token mode: no dictionary, text is any token sequence


@dataclass(frozen=True)
class OpenCandidate:
    tokens: tuple[str, ...]
    consumed: int  # keys consumed of the last token
    lm_log10: float
    ctx: object

    @property
    def text(self) -> str:
        return "".join(self.tokens)


class OpenTokenSession:
    """Beam over raw token sequences: each key either continues the current
    token or starts a new one; every consistent token is a separate hypothesis."""

    def __init__(self, layout: KeyLayout, token_vocab: list[str], lm, beam_width: int = 30):
        if beam_width < 1:
            raise DecodeError("beam_width must be >= 1")
        self.layout = layout
        self.lm = lm
        self.beam_width = beam_width
        self.token_keys = {t: layout.map_word(t) for t in token_vocab}
        root = OpenCandidate((), 0, 0.0, lm.prime(""))
        self._C: tuple[OpenCandidate, ...] = (root,)
        self._undo: list[tuple] = []

    def candidates(self) -> list[OpenCandidate]:
        return list(self._C)

    def step_char(self, label: str) -> list[OpenCandidate]:
        self._undo.append(self._C)
        new: list[OpenCandidate] = []
        for cand in self._C:
            if cand.tokens and cand.consumed < len(self.token_keys[cand.tokens[-1]]):
                # partial token: the key must continue it
                seq = self.token_keys[cand.tokens[-1]]
                if seq[cand.consumed] == label:
                    new.append(replace(cand, consumed=cand.consumed + 1))
            else:
                # complete boundary: branch into every token starting with this key
                for tok, seq in self.token_keys.items():
                    if seq[0] == label:
                        tid = self.lm.token_id(tok)
                        lp = float(self.lm.score_batch(cand.ctx, np.array([tid]))[0])
                        ctx = self.lm.extend(cand.ctx, [tid])
                        new.append(OpenCandidate(cand.tokens + (tok,), 1, cand.lm_log10 + lp, ctx))
        new.sort(key=lambda c: (-c.lm_log10, c.tokens))
        self._C = tuple(new[: self.beam_width])
        return self.candidates()

    def undo(self) -> list[OpenCandidate]:
        if self._undo:
            self._C = self._undo.pop()
        return self.candidates()
