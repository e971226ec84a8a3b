"""Regenerate the bundled data files from the corpus and passage sources.

Derives word_counts.tsv (corpus frequencies for the layout optimizer),
dictionary.tsv (corpus plus passage vocabulary, add-one smoothed), the
bundled 4-gram model (via the count-ngrams subcommand, so the CLI path gets
exercised). Run from the repo root:

    python3 scripts/build_bundled_data.py [--with-layouts]

Layout regeneration is opt-in: the shipped N-optimized layouts are fixed
reference data that tests pin exact key sequences against, so rebuilding
them from a changed corpus would silently invalidate those expectations.
"""

import argparse
import subprocess
import sys
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
SRC = ROOT / "src"
sys.path.insert(0, str(SRC))

from keybeam.keymap import SUPPORTED_CHARS, load_layout  # noqa: E402
from keybeam.layout_opt import OptimizerConfig, hard_objective, optimize  # noqa: E402
from keybeam.lm import tokenize  # noqa: E402

DATA = SRC / "keybeam" / "data"
CORPUS = DATA / "corpus" / "general.txt"
PASSAGES = sorted((DATA / "passages").glob("*.txt"))


def validate_sources() -> tuple[Counter, Counter]:
    allowed = set(SUPPORTED_CHARS) | set(" \n")
    corpus_text = CORPUS.read_text()
    bad = set(corpus_text) - allowed
    if bad:
        raise SystemExit(f"corpus has unsupported characters: {sorted(bad)}")
    corpus_sentences = {ln.strip() for ln in corpus_text.splitlines() if ln.strip()}

    corpus_counts = Counter(tokenize(corpus_text))
    passage_counts: Counter = Counter()
    for p in PASSAGES:
        text = p.read_text()
        bad = set(text) - allowed
        if bad:
            raise SystemExit(f"{p.name} has unsupported characters: {sorted(bad)}")
        for sentence in text.replace("\n", " ").split("."):
            sentence = sentence.strip() + "."
            if len(sentence) > 20 and sentence in corpus_sentences:
                raise SystemExit(f"{p.name} shares a sentence with the corpus: {sentence!r}")
        passage_counts.update(tokenize(text))

    if "irony" not in corpus_counts:
        raise SystemExit("corpus must cover the word 'irony'")
    missing = [w for w in passage_counts if w not in corpus_counts]
    print(f"corpus: {sum(corpus_counts.values())} tokens, {len(corpus_counts)} types")
    print(f"passages: {sum(passage_counts.values())} tokens, {len(passage_counts)} types")
    print(f"passage words unseen in corpus: {len(missing)}")
    return corpus_counts, passage_counts


def write_tsv(path: Path, counts: dict) -> None:
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    path.write_text("".join(f"{w}\t{c}\n" for w, c in rows))
    print(f"wrote {path.relative_to(ROOT)} ({len(rows)} entries)")


def build_layouts(entries) -> None:
    for n in range(2, 9):
        cfg = OptimizerConfig(seed=7, iterations=2000, restarts=8)
        layout, report = optimize(entries, n, cfg, name=f"{n}-optimized")
        out = DATA / "layouts" / f"{n}-optimized.layout"
        out.write_text(layout.to_text())
        try:
            base = load_layout(f"{n}-alphabetical")
            base_cost = hard_objective(base, entries)
            rel = f"{report.final_cost / base_cost:.3f}x alphabetical" if base_cost else "n/a"
        except Exception:
            rel = "no alphabetical baseline"
        print(f"wrote {out.relative_to(ROOT)}: cost {report.final_cost:.1f} ({rel})")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument(
        "--with-layouts",
        action="store_true",
        help="also re-optimize the bundled N-optimized layouts (overwrites pinned reference data)",
    )
    args = ap.parse_args()

    corpus_counts, passage_counts = validate_sources()
    write_tsv(DATA / "word_counts.tsv", corpus_counts)
    dictionary = {w: corpus_counts.get(w, 0) + 1 for w in corpus_counts | passage_counts}
    write_tsv(DATA / "dictionary.tsv", dictionary)

    out = DATA / "lm" / "4gram.arpa"
    subprocess.run(
        [
            sys.executable,
            "-m",
            "keybeam.cli",
            "count-ngrams",
            str(CORPUS),
            "--order",
            "4",
            "--out",
            str(out),
        ],
        check=True,
        cwd=ROOT,
    )

    if args.with_layouts:
        entries = [(w, float(c)) for w, c in corpus_counts.items()]
        build_layouts(entries)


if __name__ == "__main__":
    main()
