"""Character-to-key assignment search.

Two independent routes to the same objective. The primary one relaxes the
discrete assignment into per-character key probabilities and follows the
gradient of the expected collision cost under Gumbel-softmax samples. A
simulated-annealing baseline over discrete assignments provides a cross-check.

The objective: for every unordered pair of distinct words whose key sequences
coincide, add the sum of the two word frequencies. Only equal-length words can
collide, so pairs are enumerated within length buckets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp

import numpy as np

from keybeam.keymap import SUPPORTED_CHARS, KeyLayout, labels_for_key_count


class OptimizeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# exact objective


def _merge_entries(corpus):
    if not corpus:
        raise OptimizeError("empty corpus")
    merged: dict[str, float] = {}
    for word, count in corpus:
        w = str(word).lower()
        if not w:
            continue
        merged[w] = merged.get(w, 0.0) + float(count)
    if not merged:
        raise OptimizeError("empty corpus")
    return merged


def collision_stats(layout: KeyLayout, corpus) -> tuple[float, int]:
    """(frequency-weighted pair cost, number of colliding pairs)."""
    merged = _merge_entries(corpus)
    groups: dict[tuple[str, ...], list[float]] = {}
    for w, f in merged.items():
        groups.setdefault(layout.map_word(w), []).append(f)
    cost = 0.0
    pairs = 0
    for freqs in groups.values():
        n = len(freqs)
        if n > 1:
            # sum over pairs of (f_i + f_j): each word joins n-1 pairs
            cost += (n - 1) * sum(freqs)
            pairs += n * (n - 1) // 2
    return cost, pairs


def hard_objective(layout: KeyLayout, corpus) -> float:
    return collision_stats(layout, corpus)[0]


# ---------------------------------------------------------------------------
# relaxed objective


class _Compiled:
    """Corpus preprocessed for repeated objective evaluations."""

    def __init__(self, corpus, charset: str):
        self.charset = charset
        self.char_idx = {c: i for i, c in enumerate(charset)}
        merged = _merge_entries(corpus)
        self.skipped = sorted(w for w in merged if any(c not in self.char_idx for c in w))
        kept = {w: f for w, f in merged.items() if w not in set(self.skipped)}
        if not kept:
            raise OptimizeError("no corpus word is coverable by the character set")
        self.words = sorted(kept)
        self.freqs = {w: kept[w] for w in self.words}
        self.buckets = []  # (W: (n,L) char ids, I, J, fsum) per word length
        by_len: dict[int, list[str]] = {}
        for w in self.words:
            by_len.setdefault(len(w), []).append(w)
        for length in sorted(by_len):
            ws = by_len[length]
            if len(ws) < 2:
                continue
            W = np.array([[self.char_idx[c] for c in w] for w in ws], dtype=np.int64)
            f = np.array([kept[w] for w in ws])
            I, J = np.triu_indices(len(ws), k=1)
            self.buckets.append((W, I, J, f[I] + f[J]))

    def hard_cost(self, assign: np.ndarray) -> float:
        cost = 0.0
        for W, I, J, fsum in self.buckets:
            seqs = assign[W]
            same = (seqs[I] == seqs[J]).all(axis=1)
            cost += float(fsum[same].sum())
        return cost


def _row_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _soft_cost_grad(compiled: _Compiled, logits, temperature, noise):
    z = logits if noise is None else logits + noise
    z = z / temperature
    P = _row_softmax(z)
    Q = P @ P.T
    C = len(compiled.charset)
    cost = 0.0
    G = np.zeros((C, C))
    ones_col = None
    for W, I, J, fsum in compiled.buckets:
        A = Q[W[I], W[J]]  # (pairs, L) per-position coincidence probability
        prob = A.prod(axis=1)
        cost += float(fsum @ prob)
        # leave-one-out products give dcost/dA without dividing by A
        n_pairs, L = A.shape
        if ones_col is None or len(ones_col) != n_pairs:
            ones_col = np.ones((n_pairs, 1))
        left = np.concatenate([ones_col, np.cumprod(A, axis=1)[:, :-1]], axis=1)
        right = np.concatenate([np.cumprod(A[:, ::-1], axis=1)[:, ::-1][:, 1:], ones_col], axis=1)
        dA = fsum[:, None] * left * right
        flat = (W[I] * C + W[J]).ravel()
        G += np.bincount(flat, weights=dA.ravel(), minlength=C * C).reshape(C, C)
    dP = (G + G.T) @ P
    # softmax backward per row, including the 1/temperature of the input scale
    dots = (dP * P).sum(axis=1, keepdims=True)
    grad = P * (dP - dots) / temperature
    return cost, grad


def soft_objective(logits, corpus, temperature, *, charset: str = SUPPORTED_CHARS, noise=None):
    """Expected collision cost of a relaxed assignment and its gradient.

    ``logits`` is (len(charset), n_keys). ``noise`` of the same shape is added
    before the temperature-scaled row softmax (pass a Gumbel draw to get one
    Gumbel-softmax sample; the gradient is then the pathwise gradient for that
    fixed draw).
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(logits).all():
        raise OptimizeError("non-finite logits")
    if not temperature > 0:
        raise OptimizeError(f"temperature must be > 0, got {temperature}")
    compiled = corpus if isinstance(corpus, _Compiled) else _Compiled(corpus, charset)
    if logits.shape[0] != len(compiled.charset):
        raise OptimizeError(
            f"logits rows ({logits.shape[0]}) != character count ({len(compiled.charset)})"
        )
    return _soft_cost_grad(compiled, logits, temperature, noise)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class OptimizerConfig:
    """Search hyperparameters shared by the gradient and annealing routes."""

    temp_start: float = 1.0
    temp_end: float = 0.1
    temp_decay: float | None = None  # per-iteration factor; None derives it from start/end
    iterations: int = 2000
    samples: int = 1  # Gumbel draws averaged per iteration
    learning_rate: float = 0.05
    seed: int = 0
    restarts: int = 8

    def __post_init__(self):
        if self.iterations < 1:
            raise OptimizeError("iterations must be >= 1")
        if self.samples < 1:
            raise OptimizeError("samples must be >= 1")
        if self.restarts < 1:
            raise OptimizeError("restarts must be >= 1")
        if self.learning_rate <= 0:
            raise OptimizeError("learning_rate must be > 0")
        if self.temp_start < self.temp_end or self.temp_end < 0:
            raise OptimizeError("need temp_start >= temp_end >= 0")

    def temperature(self, t: int) -> float:
        if self.temp_decay is not None:
            return max(self.temp_end, self.temp_start * self.temp_decay**t)
        if self.iterations == 1 or self.temp_start == 0:
            return self.temp_start
        frac = t / (self.iterations - 1)
        return self.temp_start * (self.temp_end / self.temp_start) ** frac


@dataclass
class OptimizeReport:
    n_keys: int
    charset: str
    word_count: int
    skipped_words: list[str]
    final_cost: float
    colliding_pairs: int
    best_restart: int
    restart_costs: list[float]
    trajectory: list[tuple[int, float, float]]  # (iteration, soft cost, hard cost)
    repaired: list[tuple[str, str]]  # (character, key it was moved to)
    config: OptimizerConfig

    def to_text(self) -> str:
        lines = [
            "layout optimization report",
            f"keys: {self.n_keys}",
            f"characters: {self.charset}",
            f"corpus words: {self.word_count}"
            + (f" (skipped {len(self.skipped_words)})" if self.skipped_words else ""),
            f"restarts: {self.config.restarts}  iterations: {self.config.iterations}"
            f"  lr: {self.config.learning_rate}  seed: {self.config.seed}",
            f"restart costs: {', '.join(f'{c:.6g}' for c in self.restart_costs)}",
            f"best restart: {self.best_restart}",
            f"final cost: {self.final_cost:.6g}",
            f"colliding pairs: {self.colliding_pairs}",
        ]
        if self.repaired:
            lines.append(
                "empty-key repairs: "
                + ", ".join(f"{ch!r}->key {k}" for ch, k in self.repaired)
            )
        lines.append("trajectory (iteration, relaxed cost, hard cost):")
        for it, soft, hard in self.trajectory:
            lines.append(f"  {it:6d}  {soft:12.6g}  {hard:12.6g}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# gradient search


def _assignment_layout(assign, charset, n_keys, name, partial):
    labels = labels_for_key_count(n_keys)
    key_chars = {lab: "" for lab in labels}
    for ci, ch in enumerate(charset):
        key_chars[labels[assign[ci]]] += ch
    return KeyLayout(name, key_chars, partial=partial)


def _repair_empty_keys(compiled, assign, n_keys):
    """Move the least harmful characters onto empty keys; every key ends up used."""
    repaired = []
    assign = assign.copy()
    while True:
        counts = np.bincount(assign, minlength=n_keys)
        empties = np.flatnonzero(counts == 0)
        if len(empties) == 0:
            return assign, repaired
        k = int(empties[0])
        best = None
        for ci in range(len(assign)):
            if counts[assign[ci]] < 2:
                continue
            trial = assign.copy()
            trial[ci] = k
            cost = compiled.hard_cost(trial)
            if best is None or cost < best[0]:
                best = (cost, ci)
        if best is None:
            raise OptimizeError("cannot repair empty key: fewer characters than keys")
        assign[best[1]] = k
        repaired.append((compiled.charset[best[1]], k))


def optimize(
    corpus,
    n_keys: int,
    config: OptimizerConfig | None = None,
    *,
    charset: str = SUPPORTED_CHARS,
    name: str | None = None,
) -> tuple[KeyLayout, OptimizeReport]:
    """Gradient search over relaxed assignments; returns the best hard layout."""
    if not 2 <= n_keys <= 8:
        raise OptimizeError(f"key count must be 2..8, got {n_keys}")
    for ch in charset:
        if ch not in SUPPORTED_CHARS:
            raise OptimizeError(f"unsupported character {ch!r} in charset")
    if len(set(charset)) != len(charset):
        raise OptimizeError("duplicate characters in charset")
    if len(charset) < n_keys:
        raise OptimizeError("fewer characters than keys")
    cfg = config or OptimizerConfig()
    if cfg.temp_decay is None and cfg.temp_end <= 0:
        raise OptimizeError("gradient search needs temp_end > 0")
    compiled = _Compiled(corpus, charset)
    C = len(charset)

    results = []  # (hard cost, restart idx, assign, trajectory)
    diverged_all = True
    for r in range(cfg.restarts):
        lr = cfg.learning_rate
        for attempt in range(4):
            rng = np.random.default_rng([cfg.seed, r, attempt])
            logits = rng.normal(0.0, 0.5, size=(C, n_keys))
            m = np.zeros_like(logits)
            v = np.zeros_like(logits)
            trajectory = []
            ok = True
            for t in range(cfg.iterations):
                tau = cfg.temperature(t)
                cost = 0.0
                grad = np.zeros_like(logits)
                for _ in range(cfg.samples):
                    noise = rng.gumbel(size=logits.shape)
                    c_s, g_s = _soft_cost_grad(compiled, logits, tau, noise)
                    cost += c_s
                    grad += g_s
                cost /= cfg.samples
                grad /= cfg.samples
                if not (np.isfinite(cost) and np.isfinite(grad).all()):
                    ok = False  # diverged: retry this restart with a smaller step
                    break
                # Adam step
                m = 0.9 * m + 0.1 * grad
                v = 0.999 * v + 0.001 * grad * grad
                mh = m / (1 - 0.9 ** (t + 1))
                vh = v / (1 - 0.999 ** (t + 1))
                logits = logits - lr * mh / (np.sqrt(vh) + 1e-8)
                if not np.isfinite(logits).all():
                    ok = False
                    break
                if t % 100 == 0 or t == cfg.iterations - 1:
                    hard = compiled.hard_cost(np.argmax(logits, axis=1))
                    trajectory.append((t, cost, hard))
            if ok:
                assign = np.argmax(logits, axis=1)
                assign, repaired = _repair_empty_keys(compiled, assign, n_keys)
                results.append((compiled.hard_cost(assign), r, assign, trajectory, repaired))
                diverged_all = False
                break
            lr /= 2
    if diverged_all:
        raise OptimizeError("optimization diverged in every restart")

    results.sort(key=lambda x: (x[0], x[1]))
    best_cost, best_r, assign, trajectory, repaired = results[0]
    partial = set(charset) != set(SUPPORTED_CHARS)
    layout = _assignment_layout(assign, charset, n_keys, name or f"{n_keys}-opt", partial)
    cost, pairs = collision_stats(layout, [(w, compiled.freqs[w]) for w in compiled.words])
    labels = labels_for_key_count(n_keys)
    report = OptimizeReport(
        n_keys=n_keys,
        charset=charset,
        word_count=len(compiled.words),
        skipped_words=compiled.skipped,
        final_cost=cost,
        colliding_pairs=pairs,
        best_restart=best_r,
        restart_costs=[c for c, *_ in sorted(results, key=lambda x: x[1])],
        trajectory=trajectory,
        repaired=[(ch, labels[k]) for ch, k in repaired],
        config=cfg,
    )
    return layout, report


# ---------------------------------------------------------------------------
# annealing baseline


def anneal_baseline(
    corpus,
    n_keys: int,
    config: OptimizerConfig | None = None,
    *,
    charset: str = SUPPORTED_CHARS,
    name: str | None = None,
) -> KeyLayout:
    """Simulated annealing over discrete assignments, used as an oracle.

    A zero-temperature schedule degenerates to greedy hill climbing.
    """
    if not 2 <= n_keys <= 8:
        raise OptimizeError(f"key count must be 2..8, got {n_keys}")
    if len(charset) < n_keys:
        raise OptimizeError("fewer characters than keys")
    cfg = config or OptimizerConfig()
    compiled = _Compiled(corpus, charset)
    C = len(charset)
    rng = np.random.default_rng(cfg.seed)

    # round-robin deal of a shuffled character order keeps every key non-empty
    perm = rng.permutation(C)
    assign = np.empty(C, dtype=np.int64)
    for pos, ci in enumerate(perm):
        assign[ci] = pos % n_keys
    cost = compiled.hard_cost(assign)
    best_assign, best_cost = assign.copy(), cost

    if cfg.temp_start == 0:
        schedule = lambda t: 0.0
    else:
        end = max(cfg.temp_end, 1e-12)
        schedule = lambda t: cfg.temp_start * (end / cfg.temp_start) ** (
            t / max(1, cfg.iterations - 1)
        )
    for t in range(cfg.iterations):
        T = schedule(t)
        ci = int(rng.integers(C))
        new_key = int(rng.integers(n_keys - 1))
        if new_key >= assign[ci]:
            new_key += 1
        counts = np.bincount(assign, minlength=n_keys)
        if counts[assign[ci]] == 1:
            continue  # never empty a key
        old = assign[ci]
        assign[ci] = new_key
        new_cost = compiled.hard_cost(assign)
        delta = new_cost - cost
        if delta < 0 or (T > 0 and rng.random() < exp(-delta / T)):
            cost = new_cost
            if cost < best_cost:
                best_cost, best_assign = cost, assign.copy()
        else:
            assign[ci] = old
    partial = set(charset) != set(SUPPORTED_CHARS)
    return _assignment_layout(best_assign, charset, n_keys, name or f"{n_keys}-annealed", partial)
