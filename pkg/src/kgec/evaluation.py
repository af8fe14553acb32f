"""Filtered link-prediction evaluation (MRR, HITS@N) and paired significance
testing between runs.

Ranks are "optimistic": only candidates scoring strictly higher than the
gold entity count, which makes the result independent of candidate
enumeration order. Corrupted candidates that are known true triples are
removed, except the gold triple itself.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .data import KnownIndex, Triple
from .model import ModelParams, score_all_heads, score_all_tails


@dataclass
class EvalResult:
    """Per-triple (head_rank, tail_rank) pairs and aggregate metrics."""

    per_triple: list[tuple[int, int]]
    mrr: float
    hits: dict[int, float]

    def reciprocal_ranks(self) -> np.ndarray:
        """All head-direction reciprocal ranks, then all tail-direction ones."""
        ranks = np.asarray(self.per_triple, dtype=float)
        return np.concatenate([1.0 / ranks[:, 0], 1.0 / ranks[:, 1]])

    def ranks(self) -> np.ndarray:
        ranks = np.asarray(self.per_triple, dtype=float)
        return np.concatenate([ranks[:, 0], ranks[:, 1]])


def rank_from_scores(
    scores: np.ndarray,
    gold: int,
    filtered: Sequence[int] = (),
) -> int:
    """Optimistic filtered rank of ``gold`` within a candidate score vector.

    Counts candidates with a strictly higher score than the gold one, after
    removing the ``filtered`` candidate ids. The gold entity itself never
    competes and is never filtered out.
    """
    gold_score = scores[gold]
    competing = scores > gold_score
    filtered = np.asarray(list(filtered), dtype=np.int64)
    if filtered.size:
        competing[filtered] = False
    competing[gold] = False
    return 1 + int(np.count_nonzero(competing))


def filtered_rank(
    params: ModelParams,
    triple: Triple,
    side: str,
    known: KnownIndex,
) -> int:
    """Filtered rank of the gold entity when corrupting one side of ``triple``.

    ``side`` is ``"head"`` or ``"tail"``. Candidates forming known true
    triples are excluded from the ranking.
    """
    head, rel, tail = triple
    if side == "head":
        scores = score_all_heads(params, rel, tail)
        return rank_from_scores(scores, head, known.heads(rel, tail))
    if side == "tail":
        scores = score_all_tails(params, head, rel)
        return rank_from_scores(scores, tail, known.tails(head, rel))
    raise ValueError(f"side must be 'head' or 'tail', got {side!r}")


def evaluate(
    params: ModelParams,
    test: Sequence[Triple],
    known: KnownIndex,
    hits_at: Sequence[int] = (1, 3, 10),
    workers: int = 1,
) -> EvalResult:
    """Rank both directions of every test triple and aggregate MRR/HITS.

    MRR and HITS@N are averaged over 2 * len(test) ranks (head and tail
    directions contribute separately). Scoring is read-only, so ``workers``
    threads may rank disjoint chunks; aggregation stays deterministic.
    """
    if len(test) == 0:
        raise ValueError("test set is empty")
    head_ranks = np.zeros(len(test), dtype=np.int64)
    tail_ranks = np.zeros(len(test), dtype=np.int64)

    def rank_range(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            head_ranks[i] = filtered_rank(params, test[i], "head", known)
            tail_ranks[i] = filtered_rank(params, test[i], "tail", known)

    if workers <= 1:
        rank_range(0, len(test))
    else:
        bounds = np.linspace(0, len(test), workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(rank_range, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
            ]
            for future in futures:
                future.result()

    all_ranks = np.concatenate([head_ranks, tail_ranks])
    mrr = float(np.mean(1.0 / all_ranks))
    hits = {int(k): float(np.mean(all_ranks <= k)) for k in hits_at}
    return EvalResult(
        per_triple=list(zip(head_ranks.tolist(), tail_ranks.tolist())),
        mrr=mrr,
        hits=hits,
    )


def paired_ttest(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided p-value of the paired t statistic on the differences a - b.

    Zero-variance differences are a degenerate case: p is 1.0 when the mean
    difference is zero, 0.0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired samples differ in length: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("need at least 2 paired observations")
    diff = a - b
    mean = diff.mean()
    sd = diff.std(ddof=1)
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / np.sqrt(diff.size))
    return float(2.0 * stats.t.sf(abs(t), df=diff.size - 1))


def write_metrics_csv(result: EvalResult, path: str | Path) -> None:
    """Write the aggregate metrics as ``metric,value`` rows."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["mrr", f"{result.mrr:.6f}"])
        for k in sorted(result.hits):
            writer.writerow([f"hits@{k}", f"{result.hits[k]:.6f}"])


def write_rank_dump(
    test: Sequence[Triple], result: EvalResult, path: str | Path
) -> None:
    """Per-triple rank dump for later significance testing between runs."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["head", "rel", "tail", "head_rank", "tail_rank"])
        for triple, (head_rank, tail_rank) in zip(test, result.per_triple):
            writer.writerow([triple.head, triple.rel, triple.tail, head_rank, tail_rank])


def load_rank_dump(path: str | Path) -> tuple[list[Triple], np.ndarray, np.ndarray]:
    """Read a rank dump back as (triples, head_ranks, tail_ranks)."""
    triples: list[Triple] = []
    head_ranks: list[int] = []
    tail_ranks: list[int] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["head", "rel", "tail", "head_rank", "tail_rank"]:
            raise ValueError(f"{path}: not a rank dump (bad header {header})")
        for row in reader:
            h, r, t, hr, tr = (int(x) for x in row)
            triples.append(Triple(h, r, t))
            head_ranks.append(hr)
            tail_ranks.append(tr)
    return triples, np.asarray(head_ranks), np.asarray(tail_ranks)


def significance_report(
    dump_a: str | Path, dump_b: str | Path, hits_at: Sequence[int] = (1, 3, 10)
) -> dict[str, float]:
    """Paired p-values between two rank dumps over the same test triples.

    Head- and tail-direction observations of each triple are paired
    separately. Reciprocal ranks pair for the MRR test; HITS@N pairs the 0/1
    top-N indicators.
    """
    triples_a, heads_a, tails_a = load_rank_dump(dump_a)
    triples_b, heads_b, tails_b = load_rank_dump(dump_b)
    if triples_a != triples_b:
        raise ValueError("rank dumps cover different test triples")
    ranks_a = np.concatenate([heads_a, tails_a]).astype(float)
    ranks_b = np.concatenate([heads_b, tails_b]).astype(float)
    report = {"mrr": paired_ttest(1.0 / ranks_a, 1.0 / ranks_b)}
    for k in hits_at:
        report[f"hits@{k}"] = paired_ttest(
            (ranks_a <= k).astype(float), (ranks_b <= k).astype(float)
        )
    return report
