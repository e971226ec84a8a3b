"""keybeam: predictive text entry from a reduced keyset.

Characters are grouped onto a handful of keys; key sequences are therefore
ambiguous, and a language-model-guided beam search over a dictionary decodes
them back into text. The package bundles the layouts, a backoff n-gram LM,
a layout optimizer, a typing simulator, and a line-delimited session service.
"""

from keybeam.keymap import KeyLayout, load_layout, bundled_layout_names

__version__ = "0.1.0"

__all__ = [
    "KeyLayout",
    "load_layout",
    "bundled_layout_names",
    "__version__",
]
