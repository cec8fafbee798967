"""Corpus loading, quality filtering, stratified sampling and summary statistics."""

from __future__ import annotations

import json
import random
import re
import warnings
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .graph_core import ParseError, ProcessGraph, graph_stats, parse_dot, render_canonical
from .prompts import instruction_prefix
from .stats import EmptyInput

TokenCounter = Callable[[str], int]


@dataclass(frozen=True)
class EvalRecord:
    id: str
    domain: str
    description: str
    reference_dot: str
    candidate_dot: str | None = None

    def __post_init__(self) -> None:
        if not self.domain:
            raise ValueError(f"record {self.id!r} has an empty domain")

    def to_json(self) -> str:
        data = asdict(self)
        if data["candidate_dot"] is None:
            del data["candidate_dot"]
        return json.dumps(data, ensure_ascii=False)


def read_jsonl(path: str | Path) -> list[EvalRecord]:
    records = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                rec = EvalRecord(
                    id=str(row["id"]),
                    domain=row["domain"],
                    description=row["description"],
                    reference_dot=row["reference_dot"],
                    candidate_dot=row.get("candidate_dot"),
                )
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc}") from None
            if rec.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate record id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def write_jsonl(path: str | Path, records: Iterable[EvalRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def estimate_tokens(text: str, counter: TokenCounter | None = None) -> int:
    """Token estimate for ``text``; defaults to ceil(1.33 * whitespace words)."""
    if counter is not None:
        return counter(text)
    words = len(text.split())
    return -(-133 * words // 100)


@dataclass(frozen=True)
class FilterConfig:
    token_limit: int = 2048
    drop_duplicates: bool = True
    drop_disconnected: bool = True

    def __post_init__(self) -> None:
        if self.token_limit <= 0:
            raise ValueError("token_limit must be positive")


class RejectionReason(str, Enum):
    MALFORMED_DOT = "MalformedDot"
    DUPLICATE = "Duplicate"
    DISCONNECTED = "Disconnected"
    OVER_TOKEN_LIMIT = "OverTokenLimit"


def instruction_tokens(description: str, counter: TokenCounter | None = None) -> int:
    return estimate_tokens(instruction_prefix(), counter) + estimate_tokens(description, counter)


def filter_corpus(
    records: Iterable[EvalRecord],
    cfg: FilterConfig = FilterConfig(),
    counter: TokenCounter | None = None,
) -> tuple[list[EvalRecord], list[tuple[EvalRecord, RejectionReason]]]:
    """Split records into kept and rejected, preserving input order.

    Checks run in a fixed order and the first failing one names the
    rejection: parseable reference DOT, token budget of the full
    instruction, weak connectivity, then uniqueness of the canonical
    reference graph among records kept so far.
    """
    kept: list[EvalRecord] = []
    rejected: list[tuple[EvalRecord, RejectionReason]] = []
    seen: set[str] = set()
    for rec in records:
        try:
            graph = parse_dot(rec.reference_dot)
        except ParseError:
            rejected.append((rec, RejectionReason.MALFORMED_DOT))
            continue
        if instruction_tokens(rec.description, counter) > cfg.token_limit:
            rejected.append((rec, RejectionReason.OVER_TOKEN_LIMIT))
            continue
        if cfg.drop_disconnected and not graph.is_weakly_connected():
            rejected.append((rec, RejectionReason.DISCONNECTED))
            continue
        key = render_canonical(graph)
        if cfg.drop_duplicates and key in seen:
            rejected.append((rec, RejectionReason.DUPLICATE))
            continue
        seen.add(key)
        kept.append(rec)
    return kept, rejected


class InsufficientBucket(UserWarning):
    """A difficulty bucket held fewer records than requested."""


BUCKETS = ("easy", "medium", "hard")


def nearest_rank(sorted_values: list[int], percent: int) -> int:
    """Nearest-rank percentile of an ascending list."""
    rank = max(1, -(-percent * len(sorted_values) // 100))
    return sorted_values[rank - 1]


def difficulty_buckets(records: list[EvalRecord]) -> dict[str, dict[str, list[int]]]:
    """Record indices grouped by domain, then by node-count tercile.

    Boundaries are the 33rd and 67th nearest-rank percentiles within each
    domain; a count equal to a boundary falls in the lower bucket.
    """
    counts = [len(parse_dot(r.reference_dot).nodes) for r in records]
    by_domain: dict[str, list[int]] = {}
    for idx, rec in enumerate(records):
        by_domain.setdefault(rec.domain, []).append(idx)
    out: dict[str, dict[str, list[int]]] = {}
    for domain, idxs in by_domain.items():
        ordered = sorted(counts[i] for i in idxs)
        p33, p67 = nearest_rank(ordered, 33), nearest_rank(ordered, 67)
        buckets: dict[str, list[int]] = {b: [] for b in BUCKETS}
        for i in idxs:
            c = counts[i]
            name = "easy" if c <= p33 else "medium" if c <= p67 else "hard"
            buckets[name].append(i)
        out[domain] = buckets
    return out


def stratified_sample(records: list[EvalRecord], per_bucket: int = 4, seed: int = 0) -> list[EvalRecord]:
    """Draw ``per_bucket`` records per domain and difficulty tercile without replacement.

    Short buckets are taken whole with an :class:`InsufficientBucket`
    warning. The selection is returned in corpus order.
    """
    rng = random.Random(seed)
    chosen: list[int] = []
    for domain, buckets in difficulty_buckets(records).items():
        for name in BUCKETS:
            members = buckets[name]
            if len(members) < per_bucket:
                warnings.warn(
                    f"domain {domain!r}: {name} bucket has {len(members)} records, wanted {per_bucket}",
                    InsufficientBucket,
                    stacklevel=2,
                )
                chosen.extend(members)
            else:
                chosen.extend(rng.sample(members, per_bucket))
    return [records[i] for i in sorted(chosen)]


def split_corpus(
    records: list[EvalRecord], seed: int = 0, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> tuple[list[EvalRecord], list[EvalRecord], list[EvalRecord]]:
    """Seeded train/validation/test split."""
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    n_train = int(round(fractions[0] * len(records)))
    n_val = int(round(fractions[1] * len(records)))
    parts = (order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    train, val, test = ([records[i] for i in sorted(part)] for part in parts)
    return train, val, test


_SENTENCE = re.compile(r"[^.!?]*?\w[^.!?]*[.!?]+")


def count_sentences(text: str) -> int:
    return len(_SENTENCE.findall(text))


@dataclass(frozen=True)
class CorpusStats:
    records: int
    mean_nodes: float
    mean_edges: float
    mean_gateways: float
    mean_words: float
    mean_sentences: float


def corpus_stats(records: Iterable[EvalRecord]) -> CorpusStats:
    records = list(records)
    if not records:
        raise EmptyInput("corpus is empty")
    graphs: Iterator[ProcessGraph] = (parse_dot(r.reference_dot) for r in records)
    stats = [graph_stats(g) for g in graphs]
    n = len(records)
    return CorpusStats(
        records=n,
        mean_nodes=sum(s.node_count for s in stats) / n,
        mean_edges=sum(s.edge_count for s in stats) / n,
        mean_gateways=sum(s.gateway_count for s in stats) / n,
        mean_words=sum(len(r.description.split()) for r in records) / n,
        mean_sentences=sum(count_sentences(r.description) for r in records) / n,
    )
