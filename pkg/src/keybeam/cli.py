"""Command line front end.

Subcommands: `simulate` (offline typists over passage files), `optimize-layout`,
`serve` (the TCP session service), `replay` (verify a persisted transcript),
`arpa-check` (model audit), and `count-ngrams` (train a backoff model).

Every subcommand computes its full report before writing anything, so a
failing run never leaves partial output behind. Reports pair delimited text
(CSV, JSONL) with rendered PNG figures in the same directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import string
import sys
from pathlib import Path

from keybeam.decoder import SessionConfig
from keybeam.keymap import KeyLayout, LayoutError, labels_for_key_count, load_layout
from keybeam.layout_opt import OptimizerConfig, hard_objective, optimize
from keybeam.lexicon import LexiconError, build_lexicon, load_dictionary
from keybeam.lm import ArpaError, load_arpa, train_arpa_file
from keybeam.service import (
    ENV_DATA_DIR,
    Resources,
    ServeSettings,
    ServiceCore,
    ServiceError,
    TcpService,
    TranscriptStore,
    load_record_file,
    load_settings,
    replay_record,
)
from keybeam.simulator import (
    SimulationError,
    SimulatorConfig,
    aggregate_metrics,
    always_select_typist,
    load_passage,
    min_gpc_typist,
    no_selection_cer,
    rank_cdf,
)

_DATA = Path(__file__).parent / "data"
DEFAULT_DICTIONARY = _DATA / "dictionary.tsv"
DEFAULT_ARPA = _DATA / "lm" / "4gram.arpa"
DEFAULT_PASSAGES = _DATA / "passages"

_METRICS = ("rank-cdf", "min-gpc", "always-select", "cer")


class CliError(RuntimeError):
    """Raised for user-facing failures; main() turns it into exit code 2."""


# -- small shared helpers ------------------------------------------------------


def _write_artifacts(artifacts: dict[Path, bytes | str]) -> None:
    """Write every report file, each via a temp name so readers never see
    a half-written file. Called only after all content exists in memory."""
    for path, blob in artifacts.items():
        path.parent.mkdir(parents=True, exist_ok=True)
        data = blob.encode("utf-8") if isinstance(blob, str) else blob
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _collect_passages(specs: list[str]) -> list[Path]:
    paths: list[Path] = []
    for spec in specs or [str(DEFAULT_PASSAGES)]:
        p = Path(spec)
        if p.is_dir():
            found = sorted(p.glob("*.txt"))
            if not found:
                raise CliError(f"no .txt passages under {p}")
            paths.extend(found)
        elif p.is_file():
            paths.append(p)
        else:
            raise CliError(f"passage path does not exist: {p}")
    return paths


def _load_lm(arpa: str | None, adapter: list[str] | None):
    if adapter:
        from keybeam.adapter import ExternalLm

        return ExternalLm(adapter)
    path = arpa or str(DEFAULT_ARPA)
    if not Path(path).exists():
        raise CliError(f"language model not found: {path}")
    return load_arpa(path)


def _session_config(args) -> SessionConfig:
    return SessionConfig(
        beam_width=args.beam,
        context_enabled=not args.no_context,
        completion_enabled=not args.no_completion,
        d1_enabled=not args.no_d1,
        space_selects_top=args.space_selects_top,
    )


def _alphabetical_layout(n_keys: int) -> KeyLayout:
    """Letters a-z in order, split as evenly as possible; punctuation follows."""
    chars = string.ascii_lowercase + ",.?!:;-'"
    labels = labels_for_key_count(n_keys)
    per = len(chars) / n_keys
    groups = {
        labels[i]: chars[round(i * per): round((i + 1) * per)] for i in range(n_keys)
    }
    return KeyLayout(f"{n_keys}-alphabetical", groups)


def _resolve_alphabetical(n_keys: int) -> KeyLayout:
    try:
        return load_layout(f"{n_keys}-alphabetical")
    except LayoutError:
        return _alphabetical_layout(n_keys)


# -- simulate -------------------------------------------------------------------


def _metrics_row(name: str, m) -> list:
    return [
        name,
        m.gestures_total,
        m.gestures_undo,
        m.characters,
        f"{m.gpc:.6f}",
        f"{m.gpc_error_corrected:.6f}",
        f"{m.wpm_modeled:.3f}" if m.wpm_modeled is not None else "",
    ]


def cmd_simulate(args) -> int:
    lm = _load_lm(args.lm, args.adapter)
    layout = load_layout(args.layout)
    entries = load_dictionary(args.dictionary or str(DEFAULT_DICTIONARY))
    lexicon = build_lexicon(entries, layout)
    sim_cfg = SimulatorConfig(
        session=_session_config(args), gestures_per_second=args.gestures_per_second
    )
    passages = [(p, load_passage(p)) for p in _collect_passages(args.passages)]

    artifacts: dict[Path, bytes | str] = {}
    summary: list[str] = [
        f"metric: {args.metric}",
        f"layout: {layout.name}  dictionary: {len(lexicon)} words  beam: {args.beam}",
        f"passages: {len(passages)}",
    ]
    out = Path(args.out) if args.out else None

    if args.metric == "rank-cdf":
        pooled: dict[int, int] = {}
        n_words = 0
        for path, passage in passages:
            res = rank_cdf(passage, layout, lexicon, lm, sim_cfg)
            for r, c in res.histogram.items():
                pooled[r] = pooled.get(r, 0) + c
            n_words += res.n_words
            if res.skipped:
                summary.append(f"  {path.name}: skipped {len(res.skipped)} words")
        if not n_words:
            raise CliError("no typeable words in any passage")
        total = sum(pooled.values())
        cum = 0
        points = []
        rows = []
        for rank in sorted(pooled):
            cum += pooled[rank]
            rows.append((rank, pooled[rank], f"{cum / total:.6f}"))
            points.append((rank, cum / total))
        for k in (1, 3, 10):
            frac = sum(c for r, c in pooled.items() if r <= k) / total
            summary.append(f"top-{k}: {frac:.4f}")
        summary.append(f"words: {n_words}")
        if out:
            artifacts[out / "rank_cdf.csv"] = _csv_text(
                ("rank", "count", "cumulative_fraction"), rows
            )
            if not args.no_figures:
                from keybeam import figures

                artifacts[out / "rank_cdf.png"] = figures.rank_cdf_png({layout.name: points})

    elif args.metric in ("min-gpc", "always-select"):
        typist = min_gpc_typist if args.metric == "min-gpc" else always_select_typist
        rows, traces, parts, labels, gpcs = [], [], [], [], []
        for path, passage in passages:
            res = typist(passage, layout, lexicon, lm, sim_cfg)
            if not res.ok:
                summary.append(f"  {path.name}: skipped ({res.reason})")
                continue
            rows.append(_metrics_row(path.name, res.metrics))
            traces.append(
                json.dumps(
                    {
                        "passage": path.name,
                        "target": res.target,
                        "text": res.text,
                        "events": [{"event": e.kind, "label": e.label} for e in res.trace],
                    },
                    sort_keys=True,
                )
            )
            parts.append(res.metrics)
            labels.append(path.name)
            gpcs.append(res.metrics.gpc)
        if not parts:
            raise CliError("every passage was skipped; nothing to report")
        agg = aggregate_metrics(parts, gestures_per_second=args.gestures_per_second)
        rows.append(_metrics_row("ALL", agg))
        summary.append(f"aggregate GPC: {agg.gpc:.4f}")
        summary.append(f"aggregate GPC (error-corrected): {agg.gpc_error_corrected:.4f}")
        if agg.wpm_modeled is not None:
            summary.append(f"modeled wpm: {agg.wpm_modeled:.2f}")
        if out:
            artifacts[out / "metrics.csv"] = _csv_text(
                ("passage", "gestures", "undo", "characters", "gpc", "gpc_ec", "wpm"), rows
            )
            artifacts[out / "traces.jsonl"] = "\n".join(traces) + "\n"
            if not args.no_figures:
                from keybeam import figures

                artifacts[out / "gpc.png"] = figures.metric_bars_png(
                    labels, gpcs, "gestures per character", f"{args.metric} ({layout.name})"
                )

    else:  # cer
        rows, labels, cers = [], [], []
        worst = 0.0
        for path, passage in passages:
            res = no_selection_cer(passage, layout, lexicon, lm, sim_cfg)
            rows.append(
                [path.name, f"{res.cer:.6f}", f"{res.wer:.6f}", res.metrics.gestures_total]
            )
            labels.append(path.name)
            cers.append(res.cer)
            worst = max(worst, res.cer)
            if res.skipped:
                summary.append(f"  {path.name}: skipped {len(res.skipped)} words")
        mean_cer = sum(cers) / len(cers)
        summary.append(f"mean CER: {mean_cer:.4f}  worst: {worst:.4f}")
        if out:
            artifacts[out / "cer.csv"] = _csv_text(("passage", "cer", "wer", "gestures"), rows)
            if not args.no_figures:
                from keybeam import figures

                artifacts[out / "cer.png"] = figures.metric_bars_png(
                    labels, cers, "character error rate", f"no-selection CER ({layout.name})"
                )

    if out:
        artifacts[out / "summary.txt"] = "\n".join(summary) + "\n"
        _write_artifacts(artifacts)
        summary.append(f"report written to {out}")
    print("\n".join(summary))
    return 0


# -- optimize-layout --------------------------------------------------------------


def cmd_optimize_layout(args) -> int:
    entries = load_dictionary(args.corpus)
    cfg = OptimizerConfig(
        seed=args.seed,
        iterations=args.iterations,
        restarts=args.restarts,
    )
    name = args.name or f"{args.keys}-optimized"
    layout, report = optimize(entries, args.keys, cfg, name=name)
    baseline = _resolve_alphabetical(args.keys)
    base_cost = hard_objective(baseline, entries)

    out = Path(args.out)
    lines = [report.to_text(), ""]
    lines.append(f"alphabetical baseline ({baseline.name}) cost: {base_cost:.6g}")
    verdict = "beats" if report.final_cost < base_cost else "does not beat"
    lines.append(f"optimized layout {verdict} the alphabetical baseline")
    report_text = "\n".join(lines) + "\n"

    artifacts: dict[Path, bytes | str] = {
        out: layout.to_text(),
        out.with_suffix(".report.txt"): report_text,
    }
    if not args.no_figures:
        from keybeam import figures

        artifacts[out.with_suffix(".loss.png")] = figures.loss_curve_png(
            report.trajectory, title=f"{name} (seed {args.seed})"
        )
    _write_artifacts(artifacts)
    print(report_text)
    print(f"layout written to {out}")
    return 0


# -- serve -----------------------------------------------------------------------


def _build_core(settings: ServeSettings) -> ServiceCore:
    lm = _load_lm(settings.arpa, settings.adapter)
    layouts = {}
    for spec in settings.layouts:
        lay = load_layout(spec)
        layouts[lay.name] = lay
    entries = load_dictionary(settings.dictionary or str(DEFAULT_DICTIONARY))
    resources = Resources(layouts, entries, lm)
    store = TranscriptStore(
        settings.data_dir or "keybeam-data", max_bytes=settings.max_transcript_bytes
    )
    defaults = SessionConfig(beam_width=settings.beam_width)
    return ServiceCore(resources, store, defaults, session_ttl=settings.session_ttl)


def cmd_serve(args) -> int:
    overrides = {
        "layouts": args.layout or None,
        "dictionary": args.dictionary,
        "arpa": args.lm,
        "adapter": args.adapter,
        "beam_width": args.beam,
        "data_dir": args.data_dir,
        "session_ttl": args.session_ttl,
        "max_transcript_bytes": args.max_transcript_bytes,
        "host": args.host,
        "port": args.port,
    }
    settings = load_settings(args.config, overrides)
    core = _build_core(settings)
    server = TcpService((settings.host, settings.port), core)
    host, port = server.server_address[:2]
    print(f"listening on {host}:{port}", flush=True)
    print(f"transcripts under {core.store.root}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        core.close_all()
        server.server_close()
    return 0


# -- replay ----------------------------------------------------------------------


def cmd_replay(args) -> int:
    record = load_record_file(args.transcript)
    settings = load_settings(args.config, {"dictionary": args.dictionary, "arpa": args.lm,
                                           "adapter": args.adapter})
    lm = _load_lm(settings.arpa, settings.adapter)
    layout_spec = args.layout or record.layout
    layout = load_layout(layout_spec)
    if layout.name != record.layout:
        raise CliError(
            f"layout mismatch: transcript used {record.layout!r}, loaded {layout.name!r}"
        )
    entries = load_dictionary(settings.dictionary or str(DEFAULT_DICTIONARY))
    resources = Resources({layout.name: layout}, entries, lm)
    result = replay_record(record, resources)
    print(f"session {record.session_id}: {len(record.events)} events")
    print(f"committed: {result.committed!r}")
    if result.ok:
        print("REPLAY OK: committed text and all candidate payloads match")
        return 0
    if not result.text_ok:
        print(f"REPLAY FAILED: expected committed {result.expected_committed!r}")
    if not result.hash_ok:
        print("REPLAY FAILED: candidate payload stream differs")
    return 3


# -- arpa tooling -----------------------------------------------------------------


def cmd_arpa_check(args) -> int:
    try:
        model = load_arpa(args.model)
    except (ArpaError, OSError) as exc:
        raise CliError(f"cannot load {args.model}: {exc}") from exc
    print(f"order: {model.order}")
    print(f"vocabulary: {model.vocab_size} tokens")
    print(f"1-gram entries: {model.vocab_size}")
    for k in range(2, model.order + 1):
        table = model.tables.get(k, {})
        count = sum(len(ids) for ids, _ in table.values())
        print(f"{k}-gram entries: {count} over {len(table)} histories")
    if args.audit <= 0:
        return 0

    import numpy as np

    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for i in range(args.audit):
        hist_len = int(rng.integers(0, model.order))
        ids = tuple(int(rng.integers(0, model.vocab_size)) for _ in range(hist_len))
        from keybeam.lm import NgramContext

        mass = float(np.sum(10.0 ** model.next_distribution(NgramContext(ids))))
        worst = max(worst, abs(mass - 1.0))
    print(f"normalization audit: {args.audit} histories, max |mass - 1| = {worst:.3e}")
    if worst > args.tolerance:
        print(f"FAILED: exceeds tolerance {args.tolerance}")
        return 3
    print("normalization OK")
    return 0


def cmd_count_ngrams(args) -> int:
    for path in args.corpus:
        if not Path(path).exists():
            raise CliError(f"corpus file not found: {path}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_name(out.name + ".tmp")
    try:
        train_arpa_file(args.corpus, args.order, str(tmp), discount=args.discount)
        os.replace(tmp, out)
    finally:
        if tmp.exists():
            tmp.unlink()
    model = load_arpa(str(out))
    print(f"wrote {out}: order {model.order}, {model.vocab_size} tokens")
    return 0


# -- argument parsing ----------------------------------------------------------------


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beam", type=int, default=30, help="beam width (default 30)")
    p.add_argument("--no-context", action="store_true", help="ignore passage context")
    p.add_argument("--no-completion", action="store_true", help="disable word completion")
    p.add_argument("--no-d1", action="store_true", help="disable distance-1 matching")
    p.add_argument(
        "--space-selects-top", action="store_true", help="Space queues the top candidate"
    )


def _add_resource_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lm", help="ARPA model path (default: bundled 4-gram)")
    p.add_argument("--dictionary", help="word\\tcount TSV (default: bundled)")
    p.add_argument(
        "--adapter",
        type=lambda s: s.split(),
        help="external LM server command line (overrides --lm)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keybeam",
        description="Reduced-keyset predictive typing: simulation, layout "
        "optimization, live decoding service, and model tooling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run offline typists over passage files")
    p.add_argument("passages", nargs="*", help="passage files or directories (default: bundled)")
    p.add_argument("--metric", choices=_METRICS, required=True)
    p.add_argument("--layout", default="4-optimized", help="layout name or file")
    p.add_argument("--out", help="report directory (CSV, JSONL traces, PNG figures)")
    p.add_argument("--gestures-per-second", type=float, help="enables modeled wpm")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    _add_resource_flags(p)
    _add_decode_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize-layout", help="search for a low-collision key layout")
    p.add_argument("--keys", type=int, required=True, help="alpha key count (2..8)")
    p.add_argument("--corpus", required=True, help="word\\tcount TSV to optimize against")
    p.add_argument("--out", required=True, help="output layout file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--name", help="layout name (default <keys>-optimized)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_optimize_layout)

    p = sub.add_parser("serve", help="run the TCP session service")
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--host", help="bind host (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="bind port (default 8765; 0 picks one)")
    p.add_argument("--layout", action="append", help="layout name or file (repeatable)")
    p.add_argument("--beam", type=int, help="default beam width")
    p.add_argument("--data-dir", help=f"transcript directory (or ${ENV_DATA_DIR})")
    p.add_argument("--session-ttl", type=float, help="idle seconds before a session closes")
    p.add_argument("--max-transcript-bytes", type=int, help="rotation threshold")
    _add_resource_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="re-run a transcript and verify it bit for bit")
    p.add_argument("transcript", help="path to a session .jsonl file")
    p.add_argument("--config", help="JSON config file for resources")
    p.add_argument("--layout", help="layout file override (must match the recorded name)")
    _add_resource_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("arpa-check", help="parse a model and audit normalization")
    p.add_argument("model", help="ARPA file")
    p.add_argument("--audit", type=int, default=0, help="histories to spot-check")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_arpa_check)

    p = sub.add_parser("count-ngrams", help="train a backoff ARPA model from text")
    p.add_argument("corpus", nargs="+", help="training text files")
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--discount", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output ARPA path")
    p.set_defaults(func=cmd_count_ngrams)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LayoutError, LexiconError, ArpaError, ServiceError, SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
