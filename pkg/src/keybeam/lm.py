"""Backoff n-gram language model over word tokens, in ARPA file format.

Everything is log10. A model scores a next token given an immutable context
(the last order-1 token ids plus a running total), so contexts double as
snapshots: keeping one is enough to restore scoring later. Unknown tokens use
the model's ``<unk>`` entry when present, else a configurable floor.

Also here: the shared text tokenizer (lowercase words, standalone punctuation
tokens, possessive ``'s`` split off) and a counting estimator that produces
exactly normalized backoff models from raw text via absolute discounting.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"

DEFAULT_UNK_LOG10 = -7.0

_SENT_END = {".", "!", "?"}
_STANDALONE = ",.?!:;"

_QUOTE_MAP = {
    "‘": "'", "’": "'", "“": "'", "”": "'",
    "–": "-", "—": "-", "‐": "-",
}


class ArpaError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Split text into the token stream used everywhere in this package.

    Words are lowercased. The marks ``, . ? ! : ;`` become standalone tokens,
    as does a hyphen not joining two letters and the possessive ``'s``.
    Apostrophes inside words (contractions) stay put; quoting apostrophes at
    word edges are split off. Anything unsupported is dropped.
    """
    for k, v in _QUOTE_MAP.items():
        text = text.replace(k, v)
    text = text.lower()
    out: list[str] = []
    for raw in text.split():
        buf = ""
        chars = list(raw)
        i = 0
        while i < len(chars):
            c = chars[i]
            if c in _STANDALONE:
                if buf:
                    out.append(buf)
                    buf = ""
                out.append(c)
            elif c == "-":
                prev_ok = bool(buf) and buf[-1].isalpha()
                next_ok = i + 1 < len(chars) and chars[i + 1].isalpha()
                if prev_ok and next_ok:
                    buf += c
                else:
                    if buf:
                        out.append(buf)
                        buf = ""
                    out.append("-")
            elif c == "'" or c.isalpha():
                buf += c
            # anything else (digits, symbols) is dropped
            i += 1
        if buf:
            out.append(buf)
    # second pass: possessive split and edge-apostrophe cleanup
    final: list[str] = []
    for tok in out:
        if tok in _STANDALONE or tok == "-":
            final.append(tok)
            continue
        while tok.startswith("'") and len(tok) > 1:
            final.append("'")
            tok = tok[1:]
        tail: list[str] = []
        if tok.endswith("'s") and len(tok) > 2:
            tok = tok[:-2]
            tail.append("'s")
        elif tok.endswith("'") and len(tok) > 1:
            tok = tok[:-1]
            tail.append("'")
        if tok:
            final.append(tok)
        final.extend(tail)
    return final


def split_sentences(tokens: list[str]) -> list[list[str]]:
    """Group a token stream into sentences; end punctuation stays attached."""
    sents: list[list[str]] = []
    cur: list[str] = []
    for tok in tokens:
        cur.append(tok)
        if tok in _SENT_END:
            sents.append(cur)
            cur = []
    if cur:
        sents.append(cur)
    return sents


@dataclass(frozen=True)
class NgramContext:
    """Opaque incremental scoring state: last order-1 ids and the running log10."""

    ids: tuple[int, ...]
    cum_log10: float = 0.0


class ArpaNgramModel:
    """Scores next tokens with standard backoff arithmetic.

    Listed n-grams reproduce the file's log10 values exactly; unlisted ones
    add the history's backoff weight to the lower-order score, recursively
    down to unigrams.
    """

    word_level = True

    def __init__(self, order, vocab, uni_logp, tables, bows, unk_log10=DEFAULT_UNK_LOG10):
        self.order = order
        self.vocab: dict[str, int] = vocab
        self.id_to_token = [None] * len(vocab)
        for tok, i in vocab.items():
            self.id_to_token[i] = tok
        self.uni_logp = uni_logp  # np.float64 array indexed by id
        # tables[k]: history tuple (k-1 ids) -> (sorted token id array, logp array)
        self.tables = tables
        # bows[k]: history tuple (k ids) -> log10 backoff weight
        self.bows = bows
        self.unk_log10 = float(unk_log10)
        self.unk_id = vocab.get(UNK, -1)
        self.bos_id = vocab.get(BOS, -1)

    # -- token mapping --

    def token_id(self, token: str) -> int:
        i = self.vocab.get(token, -1)
        if i < 0:
            return self.unk_id  # -1 when the model has no <unk>
        return i

    def tokens_for_word(self, word: str) -> tuple[int, ...]:
        return (self.token_id(word),)

    @property
    def vocab_size(self) -> int:
        return len(self.uni_logp)

    # -- contexts --

    def start_context(self) -> NgramContext:
        if self.bos_id >= 0:
            return NgramContext((self.bos_id,), 0.0)
        return NgramContext((), 0.0)

    def prime(self, text: str) -> NgramContext:
        ctx = self.start_context()
        toks = tokenize(text)
        if toks:
            ctx = self.extend(ctx, [self.token_id(t) for t in toks])
        return ctx

    def snapshot(self, ctx: NgramContext) -> NgramContext:
        return ctx  # contexts are immutable values

    def restore(self, handle: NgramContext) -> NgramContext:
        return handle

    def drop(self, handle) -> None:
        pass

    # -- scoring --

    def score_batch(self, ctx: NgramContext, ids) -> np.ndarray:
        """log10 P(token | context) for each id; id -1 scores the unknown floor."""
        ids = np.asarray(ids, dtype=np.int64)
        known = ids >= 0
        safe = np.where(known, ids, 0)
        out = np.where(known, self.uni_logp[safe], self.unk_log10)
        hist = ctx.ids
        for k in range(2, self.order + 1):
            if len(hist) < k - 1:
                break
            h = tuple(hist[-(k - 1):])
            bow = self.bows.get(k - 1, {}).get(h, 0.0)
            bucket = self.tables.get(k, {}).get(h)
            if bucket is None:
                if bow != 0.0:
                    out = np.where(known, out + bow, out)
                continue
            bids, blogp = bucket
            pos = np.searchsorted(bids, ids)
            pos_c = np.minimum(pos, len(bids) - 1)
            found = known & (bids[pos_c] == ids)
            out = np.where(found, blogp[pos_c], np.where(known, out + bow, out))
        return out

    def extend(self, ctx: NgramContext, ids) -> NgramContext:
        """Advance the context through a token id sequence, accumulating scores."""
        cum = ctx.cum_log10
        hist = ctx.ids
        for i in ids:
            cum += float(self.score_batch(NgramContext(hist, 0.0), np.array([i]))[0])
            if i >= 0:
                hist = (hist + (i,))[-(self.order - 1):] if self.order > 1 else ()
            else:
                hist = ()  # unknown token without <unk>: history is unusable
        return NgramContext(hist, cum)

    def score_next(self, ctx: NgramContext, token: str) -> tuple[float, NgramContext]:
        i = self.token_id(token)
        new = self.extend(ctx, [i])
        return new.cum_log10 - ctx.cum_log10, new

    def next_distribution(self, ctx: NgramContext) -> np.ndarray:
        return self.score_batch(ctx, np.arange(self.vocab_size, dtype=np.int64))


# ---------------------------------------------------------------------------
# ARPA parsing


_NGRAM_DECL = re.compile(r"^ngram (\d+)\s*=\s*(\d+)$")


def load_arpa(path: str, *, unk_log10: float = DEFAULT_UNK_LOG10) -> ArpaNgramModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    counts: dict[int, int] = {}
    i = 0
    n = len(lines)
    while i < n and lines[i].strip() != "\\data\\":
        if lines[i].strip() and not lines[i].startswith("#"):
            raise ArpaError(f"{path} line {i+1}: expected \\data\\ header")
        i += 1
    if i == n:
        raise ArpaError(f"{path}: missing \\data\\ header")
    i += 1
    while i < n:
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        m = _NGRAM_DECL.match(line)
        if not m:
            break
        counts[int(m.group(1))] = int(m.group(2))
        i += 1
    if not counts:
        raise ArpaError(f"{path}: no 'ngram N=count' declarations")
    order = max(counts)

    raw: dict[int, list[tuple[float, tuple[str, ...], float | None]]] = {k: [] for k in counts}
    cur_n: int | None = None
    for lineno in range(i, n):
        line = lines[lineno].strip()
        if not line:
            continue
        if line == "\\end\\":
            cur_n = -1
            continue
        m = re.match(r"^\\(\d+)-grams:$", line)
        if m:
            cur_n = int(m.group(1))
            if cur_n not in counts:
                raise ArpaError(f"{path} line {lineno+1}: section \\{cur_n}-grams: not declared")
            continue
        if cur_n == -1:
            raise ArpaError(f"{path} line {lineno+1}: content after \\end\\")
        if cur_n is None:
            raise ArpaError(f"{path} line {lineno+1}: n-gram line outside any section")
        fields = line.split()
        if len(fields) == cur_n + 1:
            bow = None
        elif len(fields) == cur_n + 2:
            bow = fields[-1]
        else:
            raise ArpaError(
                f"{path} line {lineno+1}: expected {cur_n+1} or {cur_n+2} fields, got {len(fields)}"
            )
        try:
            logp = float(fields[0])
            bowf = float(bow) if bow is not None else None
        except ValueError:
            raise ArpaError(f"{path} line {lineno+1}: non-numeric probability") from None
        raw[cur_n].append((logp, tuple(fields[1 : cur_n + 1]), bowf))
    if cur_n != -1:
        raise ArpaError(f"{path}: missing \\end\\ marker")
    for k, declared in counts.items():
        if len(raw[k]) != declared:
            raise ArpaError(f"{path}: declared {declared} {k}-grams, found {len(raw[k])}")
    if 1 not in raw or not raw[1]:
        raise ArpaError(f"{path}: no unigrams")

    vocab: dict[str, int] = {}
    for _, toks, _ in raw[1]:
        if toks[0] in vocab:
            raise ArpaError(f"{path}: duplicate unigram {toks[0]!r}")
        vocab[toks[0]] = len(vocab)
    uni_logp = np.empty(len(vocab), dtype=np.float64)
    bows: dict[int, dict[tuple[int, ...], float]] = {k: {} for k in range(1, order)}
    for logp, toks, bow in raw[1]:
        wid = vocab[toks[0]]
        uni_logp[wid] = logp
        if bow is not None and order > 1:
            bows[1][(wid,)] = bow

    tables: dict[int, dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]]] = {}
    for k in range(2, order + 1):
        grouped: dict[tuple[int, ...], list[tuple[int, float]]] = {}
        for logp, toks, bow in raw.get(k, []):
            try:
                ids = tuple(vocab[t] for t in toks)
            except KeyError as exc:
                raise ArpaError(f"{path}: {k}-gram token {exc.args[0]!r} has no unigram") from None
            grouped.setdefault(ids[:-1], []).append((ids[-1], logp))
            if bow is not None and k < order:
                bows[k][ids] = bow
        tables[k] = {}
        for hist, pairs in grouped.items():
            pairs.sort()
            tables[k][hist] = (
                np.array([p[0] for p in pairs], dtype=np.int64),
                np.array([p[1] for p in pairs], dtype=np.float64),
            )
    return ArpaNgramModel(order, vocab, uni_logp, tables, bows, unk_log10=unk_log10)


# ---------------------------------------------------------------------------
# Estimation (absolute discounting, exactly normalized)


def count_ngrams(sentences: list[list[str]], order: int) -> dict[int, dict[tuple[str, ...], int]]:
    counts: dict[int, dict[tuple[str, ...], int]] = {k: {} for k in range(1, order + 1)}
    for sent in sentences:
        seq = [BOS] + list(sent) + [EOS]
        for k in range(1, order + 1):
            ck = counts[k]
            for j in range(len(seq) - k + 1):
                if k == 1 and seq[j] == BOS:
                    continue  # <s> is never predicted
                gram = tuple(seq[j : j + k])
                ck[gram] = ck.get(gram, 0) + 1
    return counts


def estimate_arpa(
    sentences: list[list[str]], order: int, *, discount: float = 0.5
) -> dict[int, dict[tuple[str, ...], tuple[float, float | None]]]:
    """Counts to backoff model. Returns {order: {ngram: (log10 p, log10 bow|None)}}.

    Absolute discounting: each seen continuation gives up ``discount`` counts,
    and the freed mass goes to the backoff distribution, which keeps every
    history's next-token probabilities summing to exactly 1. At the unigram
    level the freed mass becomes the <unk> probability.
    """
    if not 0 < discount < 1:
        raise ValueError("discount must be in (0, 1)")
    counts = count_ngrams(sentences, order)
    uni = counts[1]
    total = sum(uni.values())
    if total == 0:
        raise ValueError("empty corpus")

    probs: dict[int, dict[tuple[str, ...], float]] = {k: {} for k in range(1, order + 1)}
    bows: dict[int, dict[tuple[str, ...], float]] = {k: {} for k in range(1, order)}

    for gram, c in uni.items():
        probs[1][gram] = (c - discount) / total
    unk_mass = discount * len(uni) / total + probs[1].get((UNK,), 0.0)
    probs[1][(UNK,)] = unk_mass

    def lower_prob(gram: tuple[str, ...]) -> float:
        # fully backed-off probability at order len(gram), using what is built so far
        k = len(gram)
        p = probs[k].get(gram)
        if p is not None:
            return p
        if k == 1:
            return probs[1][(UNK,)] if gram != (BOS,) else 0.0
        b = bows[k - 1].get(gram[:-1], 1.0)
        return b * lower_prob(gram[1:])

    for k in range(2, order + 1):
        hists: dict[tuple[str, ...], list[tuple[str, int]]] = {}
        for gram, c in counts[k].items():
            if gram[-1] == BOS:
                continue
            hists.setdefault(gram[:-1], []).append((gram[-1], c))
        for hist, conts in hists.items():
            ctot = sum(c for _, c in conts)
            reserved = discount * len(conts) / ctot
            seen_lower = 0.0
            for w, c in conts:
                probs[k][hist + (w,)] = (c - discount) / ctot
                seen_lower += lower_prob(hist[1:] + (w,)) if k > 1 else 0.0
            denom = 1.0 - seen_lower
            if denom <= 1e-12:
                denom = 1e-12
            bows[k - 1][hist] = reserved / denom

    out: dict[int, dict[tuple[str, ...], tuple[float, float | None]]] = {}
    for k in range(1, order + 1):
        sec: dict[tuple[str, ...], tuple[float, float | None]] = {}
        for gram, p in probs[k].items():
            logp = math.log10(p) if p > 0 else -99.0
            bow = bows.get(k, {}).get(gram)
            logbow = math.log10(bow) if bow is not None and bow > 0 else (None if bow is None else -99.0)
            sec[gram] = (logp, logbow)
        out[k] = sec
    if order > 1:
        bos_bow = bows[1].get((BOS,))
        out[1][(BOS,)] = (-99.0, math.log10(bos_bow) if bos_bow else None)
    else:
        out[1][(BOS,)] = (-99.0, None)
    return out


def write_arpa(model_data: dict[int, dict[tuple[str, ...], tuple[float, float | None]]], path: str) -> None:
    order = max(model_data)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for k in range(1, order + 1):
            fh.write(f"ngram {k}={len(model_data.get(k, {}))}\n")
        for k in range(1, order + 1):
            fh.write(f"\n\\{k}-grams:\n")
            for gram in sorted(model_data.get(k, {})):
                logp, bow = model_data[k][gram]
                line = f"{logp!r}\t{' '.join(gram)}"
                if bow is not None:
                    line += f"\t{bow!r}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def train_arpa_file(corpus_paths: list[str], order: int, out_path: str, *, discount: float = 0.5) -> dict:
    """count-ngrams entry point: raw text files to an ARPA model file."""
    sentences: list[list[str]] = []
    for p in corpus_paths:
        with open(p, encoding="utf-8") as fh:
            sentences.extend(split_sentences(tokenize(fh.read())))
    data = estimate_arpa(sentences, order, discount=discount)
    write_arpa(data, out_path)
    return {
        "sentences": len(sentences),
        "order": order,
        "ngrams": {k: len(v) for k, v in data.items()},
    }


def word_counts(corpus_paths: list[str]) -> dict[str, int]:
    counts: dict[str, int] = {}
    for p in corpus_paths:
        with open(p, encoding="utf-8") as fh:
            for tok in tokenize(fh.read()):
                counts[tok] = counts.get(tok, 0) + 1
    return counts
