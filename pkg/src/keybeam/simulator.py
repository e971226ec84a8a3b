"""Simulated typists and offline metrics over passages.

Every simulation drives the real decoder session gesture by gesture, so any
trace it emits replays to the same text. Word ranks are measured on forked
sessions (probe, then act), and the rank-CDF run re-conditions on the true
word after each measurement so later ranks always see correct history.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from keybeam.decoder import SELECT, SPACE, KeyEvent, Session, SessionConfig, events_for_word
from keybeam.keymap import KeyLayout, LayoutError
from keybeam.lexicon import Lexicon
from keybeam.lm import tokenize


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Passage:
    """Text to type plus the sentences that precede it (LM conditioning)."""

    context: str
    target: str

    def __post_init__(self):
        if not self.target.strip():
            raise SimulationError("passage target is empty")


def load_passage(path: str) -> Passage:
    """Read a passage file: first paragraph is context, the rest is the target.

    A file with a single paragraph has no context.
    """
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    parts = text.split("\n\n", 1)
    if len(parts) == 2 and parts[1].strip():
        return Passage(context=parts[0].strip(), target=parts[1].strip())
    return Passage(context="", target=text.strip())


@dataclass(frozen=True)
class SimulatorConfig:
    session: SessionConfig = field(default_factory=SessionConfig)
    gestures_per_second: float | None = None  # enables modeled wpm

    def __post_init__(self):
        if self.gestures_per_second is not None and self.gestures_per_second <= 0:
            raise SimulationError("gestures_per_second must be > 0")


@dataclass
class TypingMetrics:
    gestures_total: int
    gestures_undo: int
    characters: int  # word letters plus one separator per word
    gpc: float
    gpc_error_corrected: float
    wpm_modeled: float | None
    rank_histogram: dict[int, int]
    cer: float | None = None
    wer: float | None = None


def build_metrics(
    gestures_total: int,
    gestures_undo: int,
    characters: int,
    rank_histogram: dict[int, int] | None = None,
    cer: float | None = None,
    wer: float | None = None,
    gestures_per_second: float | None = None,
) -> TypingMetrics:
    if characters <= 0:
        raise SimulationError("no characters typed")
    gpc = gestures_total / characters
    gpc_ec = (gestures_total - 2 * gestures_undo) / characters
    wpm = None
    if gestures_per_second is not None and gestures_total > 0:
        minutes = gestures_total / (gestures_per_second * 60.0)
        wpm = 0.2 * characters / minutes
    return TypingMetrics(
        gestures_total=gestures_total,
        gestures_undo=gestures_undo,
        characters=characters,
        gpc=gpc,
        gpc_error_corrected=gpc_ec,
        wpm_modeled=wpm,
        rank_histogram=dict(rank_histogram or {}),
        cer=cer,
        wer=wer,
    )


def edit_distance(a, b) -> int:
    m, n = len(a), len(b)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        ai = a[i - 1]
        for j in range(1, n + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ai != b[j - 1]))
        prev = cur
    return prev[n]


def _typeable_words(passage: Passage, layout: KeyLayout, lexicon: Lexicon):
    """(words to type, words skipped): a word must be in the dictionary and
    mappable under the layout to take part in a simulation."""
    words = tokenize(passage.target)
    typed, skipped = [], []
    for w in words:
        try:
            layout.map_word(w)
            ok = w in lexicon
        except LayoutError:
            ok = False
        (typed if ok else skipped).append(w)
    return typed, skipped


def _displayed_rank(cands, want_words):
    for c in cands:
        if c.words == want_words:
            return c.rank
    return None


def _presses_to_queue(rank: int, current: int, shown: int) -> int:
    """Select presses to move the queue marker from ``current`` to ``rank``."""
    if current == 0:
        return rank
    return (rank - current) % shown


# ---------------------------------------------------------------------------
# word-rank CDF (teacher-forced)


@dataclass
class RankCdfResult:
    histogram: dict[int, int]
    n_words: int
    dictionary_size: int
    skipped: list[str]

    def top_k(self, k: int) -> float:
        if self.n_words == 0:
            return 0.0
        return sum(c for r, c in self.histogram.items() if r <= k) / self.n_words

    def cdf_points(self):
        """(rank, cumulative fraction) for every observed rank, ascending."""
        out = []
        cum = 0
        for r in sorted(self.histogram):
            cum += self.histogram[r]
            out.append((r, cum / self.n_words))
        return out

    def csv_rows(self):
        rows = [("rank", "count", "cumulative_fraction")]
        cum = 0
        for r in sorted(self.histogram):
            cum += self.histogram[r]
            rows.append((r, self.histogram[r], cum / self.n_words))
        return rows


def rank_cdf(
    passage: Passage,
    layout: KeyLayout,
    lexicon: Lexicon,
    lm,
    config: SimulatorConfig | None = None,
) -> RankCdfResult:
    """Rank of each target word after its full key sequence plus Space.

    Each measurement runs on a fork; the live session is then re-anchored to
    the true word, so every word is scored under correct preceding text.
    Words missing from the candidate list count at rank = dictionary size.
    """
    cfg = config or SimulatorConfig()
    words, skipped = _typeable_words(passage, layout, lexicon)
    sess = Session(layout, lexicon, lm, cfg.session, context=passage.context)
    hist: dict[int, int] = {}
    for w in words:
        want = sess.committed_words + (w,)
        probe = sess.fork()
        for ev in events_for_word(layout, w):
            probe.step(ev)
        cands = probe.step(SPACE)
        r = _displayed_rank(cands, want)
        if r is None:
            r = len(lexicon)
        hist[r] = hist.get(r, 0) + 1
        sess.force_word(w)
    return RankCdfResult(hist, len(words), len(lexicon), skipped)


# ---------------------------------------------------------------------------
# gesture-minimizing typists


@dataclass
class TypistResult:
    ok: bool
    metrics: TypingMetrics | None
    trace: list[KeyEvent]
    text: str
    target: str
    selection_positions: dict[int, int]
    skipped: list[str]
    reason: str = ""

    def top_k_selections(self, k: int) -> float:
        total = sum(self.selection_positions.values())
        if total == 0:
            return 0.0
        hit = sum(c for p, c in self.selection_positions.items() if p <= k)
        return hit / total


def _plan_options(sess, keys, want, allow_no_select):
    """Cost every way to enter the word whose key labels are ``keys``.

    Returns (cost, preference, plan) tuples. Ties prefer the free rank-1
    carry, then the shortest prefix. Plans:
      {"p": k, "selects": n}                  type k keys, select, Space commits
      {"p": m, "boundary": True, "selects": n} type all keys, Space, then select;
                                               commit rides the next gesture
      {"p": m, "boundary": True, "selects": 0} rank-1 carry, nothing queued
    """
    m = len(keys)
    options = []
    probe = sess.fork()
    for p in range(1, m + 1):
        cands = probe.step(KeyEvent.char(keys[p - 1]))
        r = _displayed_rank(cands, want)
        if r is not None:
            options.append((p + r + 1, (1, p), {"p": p, "selects": r, "pos": r}))
    cands = probe.step(SPACE)
    r = _displayed_rank(cands, want)
    if r is not None:
        presses = _presses_to_queue(r, probe.selection_index, len(cands))
        if presses > 0:
            options.append(
                (m + 1 + presses, (2, m), {"p": m, "boundary": True, "selects": presses, "pos": r})
            )
        elif probe.selection_index > 0:
            # space already queued the top candidate (select-on-space variant)
            options.append((m + 1, (2, m), {"p": m, "boundary": True, "selects": 0, "pos": r}))
        if r == 1 and probe.selection_index == 0 and allow_no_select:
            options.append((m + 1, (0, m), {"p": m, "boundary": True, "selects": 0, "pos": None}))
    return options


def _execute_plan(sess, plan, keys, trace):
    def emit(ev):
        trace.append(ev)
        sess.step(ev)

    for lab in keys[: plan["p"]]:
        emit(KeyEvent.char(lab))
    if plan.get("boundary"):
        emit(SPACE)
        for _ in range(plan["selects"]):
            emit(SELECT)
    else:
        for _ in range(plan["selects"]):
            emit(SELECT)
        emit(SPACE)


def _typist(passage, layout, lexicon, lm, config, allow_no_select):
    cfg = config or SimulatorConfig()
    words, skipped = _typeable_words(passage, layout, lexicon)
    if skipped:
        return TypistResult(
            ok=False,
            metrics=None,
            trace=[],
            text="",
            target=" ".join(words),
            selection_positions={},
            skipped=skipped,
            reason=f"words not typeable: {', '.join(sorted(set(skipped)))}",
        )
    sess = Session(layout, lexicon, lm, cfg.session, context=passage.context)
    trace: list[KeyEvent] = []
    positions: dict[int, int] = {}
    # A free carry leaves the word uncommitted, so rival hypotheses stay in
    # the beam; a run of carries can crowd the true path out of the display
    # entirely a few words later. Keep a fork from the last committed state
    # so those carried words can be redone with explicit selections, which
    # collapse the beam back onto the target text.
    anchor = sess.fork()
    anchor_at = 0
    anchor_trace = 0
    anchor_positions: dict[int, int] = {}
    forced = -1
    i = 0
    while i < len(words):
        w = words[i]
        want = tuple(words[: i + 1])
        keys = [ev.label for ev in events_for_word(layout, w)]
        carry_ok = allow_no_select and i > forced
        options = _plan_options(sess, keys, want, carry_ok)
        if not options:
            if anchor_at < i:
                forced = i
                sess = anchor.fork()
                del trace[anchor_trace:]
                positions = dict(anchor_positions)
                i = anchor_at
                continue
            return TypistResult(
                ok=False,
                metrics=None,
                trace=trace,
                text="",
                target=" ".join(words),
                selection_positions=positions,
                skipped=[w],
                reason=f"no viable entry for {w!r} after {i} words",
            )
        options.sort(key=lambda o: (o[0], o[1]))
        _, _, plan = options[0]
        _execute_plan(sess, plan, keys, trace)
        if plan["pos"] is not None:
            positions[plan["pos"]] = positions.get(plan["pos"], 0) + 1
            anchor = sess.fork()
            anchor_at = i + 1
            anchor_trace = len(trace)
            anchor_positions = dict(positions)
        i += 1
    text = sess.close()
    target = " ".join(words)
    if text != target:
        raise SimulationError(f"typist produced {text!r} for target {target!r}")
    characters = sum(len(w) for w in words) + len(words)
    metrics = build_metrics(
        gestures_total=len(trace),
        gestures_undo=0,
        characters=characters,
        rank_histogram=positions,
        gestures_per_second=cfg.gestures_per_second,
    )
    return TypistResult(
        ok=True,
        metrics=metrics,
        trace=trace,
        text=text,
        target=target,
        selection_positions=positions,
        skipped=[],
    )


def min_gpc_typist(passage, layout, lexicon, lm, config: SimulatorConfig | None = None):
    """Per word, the cheapest of: selecting after p typed keys, selecting
    after the boundary Space, or carrying a rank-1 word with no selection
    at all."""
    return _typist(passage, layout, lexicon, lm, config, allow_no_select=True)


def always_select_typist(passage, layout, lexicon, lm, config: SimulatorConfig | None = None):
    """Same search, but every word must be explicitly queued and committed."""
    return _typist(passage, layout, lexicon, lm, config, allow_no_select=False)


def replay_events(
    events,
    layout,
    lexicon,
    lm,
    config: SimulatorConfig | None = None,
    context: str = "",
) -> str:
    """Run a gesture trace through a fresh session and return the final text."""
    cfg = config or SimulatorConfig()
    sess = Session(layout, lexicon, lm, cfg.session, context=context)
    for ev in events:
        sess.step(ev)
    return sess.close()


# ---------------------------------------------------------------------------
# no-selection decoding error


@dataclass
class CerResult:
    cer: float
    wer: float
    text: str
    target: str
    metrics: TypingMetrics
    skipped: list[str]


def no_selection_cer(passage, layout, lexicon, lm, config: SimulatorConfig | None = None):
    """Type every word's keys plus Space with no selections; score the final
    top candidate against the target (character and word edit distance)."""
    cfg = config or SimulatorConfig()
    words, skipped = _typeable_words(passage, layout, lexicon)
    if not words:
        raise SimulationError("no typeable words in passage")
    sess = Session(layout, lexicon, lm, cfg.session, context=passage.context)
    trace_len = 0
    for w in words:
        for ev in events_for_word(layout, w):
            sess.step(ev)
            trace_len += 1
        sess.step(SPACE)
        trace_len += 1
    text = sess.close()
    target = " ".join(words)
    cer = edit_distance(text, target) / len(target)
    hyp_words = text.split(" ") if text else []
    wer = edit_distance(hyp_words, words) / len(words)
    characters = sum(len(w) for w in words) + len(words)
    metrics = build_metrics(
        gestures_total=trace_len,
        gestures_undo=0,
        characters=characters,
        cer=cer,
        wer=wer,
        gestures_per_second=cfg.gestures_per_second,
    )
    return CerResult(cer=cer, wer=wer, text=text, target=target, metrics=metrics, skipped=skipped)


# ---------------------------------------------------------------------------
# aggregation


def aggregate_metrics(parts: list[TypingMetrics], gestures_per_second: float | None = None):
    """Pool per-passage counts and recompute the ratio metrics."""
    if not parts:
        raise SimulationError("nothing to aggregate")
    hist: dict[int, int] = {}
    for p in parts:
        for r, c in p.rank_histogram.items():
            hist[r] = hist.get(r, 0) + c
    return build_metrics(
        gestures_total=sum(p.gestures_total for p in parts),
        gestures_undo=sum(p.gestures_undo for p in parts),
        characters=sum(p.characters for p in parts),
        rank_histogram=hist,
        gestures_per_second=gestures_per_second,
    )
