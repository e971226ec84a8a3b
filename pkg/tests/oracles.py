"""Independent reference implementations used to pin expected test values.

Everything here is deliberately written the slow, obvious way (pure Python,
full enumeration) and kept free of the package's decoding internals, so test
expectations come from a second route.
"""

import math

import numpy as np

from keybeam.lm import NgramContext


def lev(a, b):
    m, n = len(a), len(b)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        for j in range(1, n + 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1]))
        prev = cur
    return prev[n]


def match_set(lexicon, keys, *, event, d1_enabled, substitution_only=False):
    """(word, cm_kind) pairs for a buffer: kind in {exact, prefix, d1}."""
    out = []
    keys = tuple(keys)
    for w in lexicon.words:
        seq = lexicon.key_sequence(w)
        if event == "char":
            if seq[: len(keys)] == keys:
                out.append((w, "exact" if len(seq) == len(keys) else "prefix"))
                continue
        else:
            if seq == keys:
                out.append((w, "exact"))
                continue
        if d1_enabled and len(w) >= 4:
            if substitution_only:
                close = len(seq) == len(keys) and sum(x != y for x, y in zip(seq, keys)) == 1
            else:
                close = lev(seq, keys) == 1
            if close:
                out.append((w, "d1"))
    return out


def prediction_set(lexicon, n):
    """Top-n words by (frequency desc, word asc), the next-word prediction pool."""
    order = sorted(lexicon.words, key=lambda w: (-lexicon.freq(w), w))
    return [(w, "pred") for w in order[:n]]


def score_word(lm, ctx, word):
    """(log10 increment, new context) for one word, token by token."""
    inc = 0.0
    for t in lm.tokens_for_word(word):
        inc += float(lm.score_batch(ctx, np.array([t]))[0])
        ctx = lm.extend(ctx, [t])
    return inc, ctx


def expand_exhaustive(parents, matches, lm, lexicon, config):
    """All (parent x match) scored and ordered by the package's tie rules.

    parents: list of (words, lm_log10, cm_log10, ctx); matches from match_set.
    Returns the full ordered list of (words, lm, cm, total).
    """
    rows = []
    for pi, (pwords, plm, pcm, pctx) in enumerate(parents):
        for w, kind in matches:
            inc, new_ctx = score_word(lm, pctx, w)
            lm_t = plm + inc
            penalty = config.d1_penalty * (config.d1_start_multiplier if not pwords else 1.0)
            cm_t = pcm + (penalty if kind == "d1" else 0.0)
            tot = lm_t + cm_t
            rows.append(
                {
                    "words": pwords + (w,),
                    "lm": lm_t,
                    "cm": cm_t,
                    "total": tot,
                    "freq": lexicon.freq(w),
                    "word": w,
                    "pi": pi,
                    "kind": kind,
                    "ctx": new_ctx,
                }
            )
    rows.sort(key=lambda r: (-r["total"], -r["freq"], r["word"], r["pi"]))
    return rows


def open_segmentations(token_keys, typed):
    """All token sequences whose concatenated key sequence covers ``typed``,
    the last token possibly partially consumed."""
    results = []

    def rec(pos, seq):
        if pos == len(typed):
            if seq:
                results.append(tuple(seq))
            return
        for tok, keys in token_keys.items():
            take = min(len(keys), len(typed) - pos)
            if tuple(keys[:take]) == tuple(typed[pos : pos + take]):
                if take == len(keys):
                    rec(pos + take, seq + [tok])
                else:
                    # partial token must reach the end of the typed keys
                    results.append(tuple(seq + [tok]))

    rec(0, [])
    return results


def score_token_sequence(lm, tokens):
    ctx = lm.prime("")
    tot = 0.0
    for t in tokens:
        tid = lm.token_id(t)
        tot += float(lm.score_batch(ctx, np.array([tid]))[0])
        ctx = lm.extend(ctx, [tid])
    return tot
