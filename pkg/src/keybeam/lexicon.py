"""Dictionary indexed by key sequence for one layout.

Words are stored in a trie keyed by key labels. Three match queries against a
typed label sequence:

  exact     words whose full key sequence equals the typed one
  prefix    words whose key sequence starts with the typed one (exact included,
            marked as such)
  distance1 words of at least four letters whose key sequence is at Levenshtein
            distance exactly 1 from the typed one (one likely key error)

Exact and prefix matches carry a character-model log10 score of 0; distance-1
matches carry log10(0.01). Dictionary files are ``word<TAB>count`` per line
(count optional, default 1), ``#`` comments ignored; duplicate words sum their
counts.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from math import log10

import numpy as np

from keybeam.keymap import KeyLayout

D1_CM_LOG10 = log10(0.01)
D1_MIN_LETTERS = 4


class LexiconError(ValueError):
    pass


class MatchKind(enum.Enum):
    EXACT = "exact"
    PREFIX = "prefix"
    DISTANCE1 = "distance1"


@dataclass(frozen=True)
class Match:
    word: str
    kind: MatchKind
    cm_log10: float


class _Node:
    __slots__ = ("children", "terminal")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.terminal: list[int] = []


def load_dictionary(path: str) -> list[tuple[str, float]]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            word = parts[0].strip()
            if not word:
                raise LexiconError(f"{path} line {lineno}: empty word")
            if len(parts) == 1:
                count = 1.0
            else:
                try:
                    count = float(parts[1])
                except ValueError:
                    raise LexiconError(f"{path} line {lineno}: bad count {parts[1]!r}") from None
            entries.append((word, count))
    return entries


class Lexicon:
    """Frequency-annotated dictionary indexed for one key layout.

    Words that the layout cannot map (unsupported characters) are skipped and
    listed in ``skipped``. Duplicate words merge by summing counts, so
    frequency totals are preserved.
    """

    def __init__(self, entries: list[tuple[str, float]], layout: KeyLayout):
        self.layout = layout
        merged: dict[str, float] = {}
        skipped: list[str] = []
        for word, count in entries:
            w = word.lower()
            try:
                layout.map_word(w)
            except Exception:
                skipped.append(word)
                continue
            merged[w] = merged.get(w, 0.0) + float(count)
        self.skipped = skipped
        self.words: tuple[str, ...] = tuple(sorted(merged))  # id order == lexicographic
        self._id: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        self.freqs = np.array([merged[w] for w in self.words], dtype=np.float64)
        self.seq_lens = np.array([len(w) for w in self.words], dtype=np.int32)

        self._root = _Node()
        self._seqs: list[tuple[str, ...]] = []
        for i, w in enumerate(self.words):
            seq = layout.map_word(w)
            self._seqs.append(seq)
            node = self._root
            for label in seq:
                node = node.children.setdefault(label, _Node())
            node.terminal.append(i)

        # Per-node id arrays ordered by (freq desc, word asc) so capped prefix
        # retrieval is a slice.
        self._subtree: dict[int, np.ndarray] = {}
        self._order_key = {i: (-self.freqs[i], self.words[i]) for i in range(len(self.words))}
        self._build_subtrees(self._root)
        self._freq_order: np.ndarray | None = None  # built on first prediction request

    def _build_subtrees(self, node: _Node) -> np.ndarray:
        ids = list(node.terminal)
        for child in node.children.values():
            ids.extend(self._build_subtrees(child).tolist())
        ids.sort(key=self._order_key.__getitem__)
        arr = np.array(ids, dtype=np.int32)
        self._subtree[id(node)] = arr
        return arr

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self._id

    def word_id(self, word: str) -> int:
        return self._id[word.lower()]

    def freq(self, word: str) -> float:
        return float(self.freqs[self._id[word.lower()]])

    def key_sequence(self, word: str) -> tuple[str, ...]:
        return self._seqs[self._id[word.lower()]]

    def _walk(self, keys: tuple[str, ...]) -> _Node | None:
        node = self._root
        for label in keys:
            node = node.children.get(label)
            if node is None:
                return None
        return node

    def exact_ids(self, keys: tuple[str, ...]) -> list[int]:
        node = self._walk(keys)
        if node is None:
            return []
        return sorted(node.terminal, key=self._order_key.__getitem__)

    def prefix_ids(self, keys: tuple[str, ...], limit: int | None = None) -> np.ndarray:
        """Ids of all words whose key sequence extends ``keys``, frequency-ordered.

        Exact-length words are always included even when ``limit`` truncates.
        """
        node = self._walk(keys)
        if node is None:
            return np.empty(0, dtype=np.int32)
        arr = self._subtree[id(node)]
        if limit is None or len(arr) <= limit:
            return arr
        head = arr[:limit]
        # keep exact matches visible past the cap
        exact = [i for i in node.terminal if i not in set(head.tolist())]
        if exact:
            return np.concatenate([head, np.array(sorted(exact, key=self._order_key.__getitem__), dtype=np.int32)])
        return head

    def distance1_ids(self, keys: tuple[str, ...], *, substitution_only: bool = False) -> list[int]:
        """Ids of words (>= 4 letters) whose key sequence is at distance exactly 1."""
        labels = self.layout.alpha_labels
        seen: set[int] = set()
        variants: set[tuple[str, ...]] = set()
        k = list(keys)
        for i in range(len(k)):
            for lab in labels:
                if lab != k[i]:
                    variants.add(tuple(k[:i] + [lab] + k[i + 1 :]))
        if not substitution_only:
            for i in range(len(k)):
                variants.add(tuple(k[:i] + k[i + 1 :]))
            for i in range(len(k) + 1):
                for lab in labels:
                    variants.add(tuple(k[:i] + [lab] + k[i:]))
        variants.discard(tuple(keys))
        for var in variants:
            node = self._walk(var)
            if node is None:
                continue
            for wid in node.terminal:
                if len(self.words[wid]) >= D1_MIN_LETTERS:
                    seen.add(wid)
        return sorted(seen, key=self._order_key.__getitem__)

    # Match-set wrappers used by tests and small callers; the decoder works on ids.

    def exact_matches(self, keys: tuple[str, ...]) -> list[Match]:
        return [Match(self.words[i], MatchKind.EXACT, 0.0) for i in self.exact_ids(keys)]

    def prefix_matches(self, keys: tuple[str, ...], limit: int | None = None) -> list[Match]:
        out = []
        for i in self.prefix_ids(keys, limit):
            kind = MatchKind.EXACT if len(self._seqs[i]) == len(keys) else MatchKind.PREFIX
            out.append(Match(self.words[i], kind, 0.0))
        return out

    def distance1_matches(self, keys: tuple[str, ...], *, substitution_only: bool = False) -> list[Match]:
        ids = self.distance1_ids(keys, substitution_only=substitution_only)
        return [Match(self.words[i], MatchKind.DISTANCE1, D1_CM_LOG10) for i in ids]

    def most_frequent_ids(self, n: int) -> np.ndarray:
        if self._freq_order is None:
            order = sorted(range(len(self.words)), key=self._order_key.__getitem__)
            self._freq_order = np.array(order, dtype=np.int32)
        return self._freq_order[:n]


def build_lexicon(entries, layout: KeyLayout) -> Lexicon:
    return Lexicon(entries, layout)
