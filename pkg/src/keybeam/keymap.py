"""Key layouts: how the supported characters are grouped onto a small key set.

A layout assigns each supported character to exactly one alpha key. Three more
keys are always present and carry no characters: Space (word separator), Select
(cycle the candidate list) and Undo. Layout files hold one line per alpha key,
``<label><TAB><characters>``, with ``#`` comments and blank lines ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

LETTERS = "abcdefghijklmnopqrstuvwxyz"
PUNCTUATION = ",.?!:;-'"
SUPPORTED_CHARS = LETTERS + PUNCTUATION

# Characters excluded under the live-typing character subset.
REALTIME_EXCLUDED = ":;!-'"

ROLE_ALPHA = "alpha"
ROLE_SPACE = "space"
ROLE_SELECT = "select"
ROLE_UNDO = "undo"

_ROMAN = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII"]


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class KeyId:
    """One key: a short display label plus its role."""

    label: str
    role: str = ROLE_ALPHA


SPACE_KEY = KeyId("space", ROLE_SPACE)
SELECT_KEY = KeyId("select", ROLE_SELECT)
UNDO_KEY = KeyId("undo", ROLE_UNDO)


def labels_for_key_count(n: int) -> list[str]:
    """Default alpha-key labels for an n-key layout.

    Layouts with at most five keys use finger numbers (thumb 1, index 2,
    ring 4, little 5; the middle finger 3 only joins once five keys are
    needed). Larger layouts use Roman numerals.
    """
    if not 2 <= n <= 8:
        raise LayoutError(f"alpha key count must be 2..8, got {n}")
    if n <= 3:
        return ["1", "2", "4"][:n]
    if n == 4:
        return ["1", "2", "4", "5"]
    if n == 5:
        return ["1", "2", "3", "4", "5"]
    return _ROMAN[:n]


class KeyLayout:
    """Immutable character-to-key assignment over the supported character set."""

    def __init__(self, name: str, key_chars: dict[str, str], *, partial: bool = False):
        """Build a layout from ``label -> characters``.

        Labels keep the given order. ``partial`` permits a layout covering a
        subset of the supported characters (used by the restricted live set);
        bundled layouts always cover all of them.
        """
        if len(key_chars) < 2 or len(key_chars) > 8:
            raise LayoutError(f"layout {name!r}: alpha key count must be 2..8, got {len(key_chars)}")
        assignment: dict[str, str] = {}
        for label, chars in key_chars.items():
            if not label or any(c.isspace() for c in label):
                raise LayoutError(f"layout {name!r}: bad key label {label!r}")
            if not chars:
                raise LayoutError(f"layout {name!r}: key {label!r} has no characters")
            for ch in chars:
                if ch not in SUPPORTED_CHARS:
                    raise LayoutError(f"layout {name!r}: unsupported character {ch!r} on key {label!r}")
                if ch in assignment:
                    raise LayoutError(
                        f"layout {name!r}: character {ch!r} assigned to keys "
                        f"{assignment[ch]!r} and {label!r}"
                    )
                assignment[ch] = label
        if not partial:
            missing = [c for c in SUPPORTED_CHARS if c not in assignment]
            if missing:
                raise LayoutError(f"layout {name!r}: unassigned characters {''.join(missing)!r}")
        self.name = name
        self.key_chars = {k: v for k, v in key_chars.items()}
        self.alpha_keys = tuple(KeyId(label) for label in key_chars)
        self.keys = self.alpha_keys + (SPACE_KEY, SELECT_KEY, UNDO_KEY)
        self._char_to_label = assignment

    @property
    def alpha_key_count(self) -> int:
        return len(self.alpha_keys)

    @property
    def alpha_labels(self) -> tuple[str, ...]:
        return tuple(k.label for k in self.alpha_keys)

    @property
    def characters(self) -> str:
        return "".join(c for c in SUPPORTED_CHARS if c in self._char_to_label)

    def map_char(self, ch: str) -> str:
        """Key label for one character. Uppercase folds to lowercase."""
        c = ch.lower()
        try:
            return self._char_to_label[c]
        except KeyError:
            raise LayoutError(f"layout {self.name!r}: no key for character {ch!r}") from None

    def map_word(self, word: str) -> tuple[str, ...]:
        """Key-label sequence for a word; reports the offending position on failure."""
        out = []
        for i, ch in enumerate(word):
            c = ch.lower()
            label = self._char_to_label.get(c)
            if label is None:
                raise LayoutError(
                    f"layout {self.name!r}: no key for character {ch!r} at position {i} of {word!r}"
                )
            out.append(label)
        return tuple(out)

    def restricted(self, excluded: str = REALTIME_EXCLUDED) -> "KeyLayout":
        """Copy of this layout with the given characters removed from their keys.

        Every key must keep at least one character.
        """
        key_chars = {}
        for label, chars in self.key_chars.items():
            kept = "".join(c for c in chars if c not in excluded)
            if not kept:
                raise LayoutError(f"layout {self.name!r}: key {label!r} empty after restriction")
            key_chars[label] = kept
        return KeyLayout(f"{self.name}-restricted", key_chars, partial=True)

    def to_text(self) -> str:
        lines = [f"# {self.name}"]
        lines += [f"{label}\t{chars}" for label, chars in self.key_chars.items()]
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        return f"KeyLayout({self.name!r}, {self.alpha_key_count} keys)"

    def __eq__(self, other) -> bool:
        return isinstance(other, KeyLayout) and self.key_chars == other.key_chars

    def __hash__(self):
        return hash(tuple(self.key_chars.items()))


def parse_layout(text: str, name: str, *, partial: bool = False) -> KeyLayout:
    key_chars: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LayoutError(f"layout {name!r} line {lineno}: expected '<label><TAB><chars>'")
        label, chars = parts[0].strip(), parts[1].strip()
        if label in key_chars:
            raise LayoutError(f"layout {name!r} line {lineno}: duplicate key label {label!r}")
        key_chars[label] = chars
    if not key_chars:
        raise LayoutError(f"layout {name!r}: no key lines found")
    return KeyLayout(name, key_chars, partial=partial)


def bundled_layout_names() -> list[str]:
    root = resources.files("keybeam.data") / "layouts"
    names = [p.name[: -len(".layout")] for p in root.iterdir() if p.name.endswith(".layout")]
    return sorted(names)


def load_layout(name_or_path: str, *, partial: bool = False) -> KeyLayout:
    """Load a bundled layout by name, or any layout file by path."""
    root = resources.files("keybeam.data") / "layouts"
    bundled = root / f"{name_or_path}.layout"
    if bundled.is_file():
        return parse_layout(bundled.read_text(), name_or_path)
    try:
        with open(name_or_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise LayoutError(f"no bundled layout or readable file named {name_or_path!r}: {exc}") from None
    stem = name_or_path.rsplit("/", 1)[-1]
    if stem.endswith(".layout"):
        stem = stem[: -len(".layout")]
    return parse_layout(text, stem, partial=partial)
