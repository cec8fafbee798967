"""End-to-end evaluation: generation, diagram extraction, scoring and aggregation."""

from __future__ import annotations

import json
import logging
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import httpx

from .dataset import EvalRecord
from .graph_core import ParseError, ProcessGraph, parse_dot, sanitize_dot
from .graph_metrics import DEFAULT_BUDGET, SearchBudget, r_ged
from .guidelines import GuidelineReport, RuleAggregate, aggregate_reports, verify_model
from .prompts import PromptMode, build_prompt
from .stats import DEFAULT_RESAMPLES, FriedmanResult, Interval, bootstrap_ci, friedman_test
from .text_metrics import bleu, meteor, rouge_l, tokenize

logger = logging.getLogger(__name__)

API_KEY_ENV = "BPMNEVAL_API_KEY"
METRICS = ("bleu", "rouge_l", "meteor", "r_ged")
METRIC_TITLES = {"bleu": "BLEU", "rouge_l": "ROUGE-L", "meteor": "METEOR", "r_ged": "R-GED"}


class HarnessError(Exception):
    pass


class NoDiagramFound(HarnessError, ValueError):
    pass


class MissingCandidate(HarnessError, ValueError):
    pass


class IdMismatch(HarnessError, ValueError):
    pass


class NetworkError(HarnessError):
    pass


class EndpointError(HarnessError):
    def __init__(self, message: str, status: int | None = None, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class EndpointTimeout(HarnessError):
    pass


# ---------------------------------------------------------------------------
# Generation


@dataclass(frozen=True)
class DecodingConfig:
    temperature: float = 0.1
    top_p: float = 1.0
    max_new_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must lie in (0, 1]")
        if self.max_new_tokens <= 0:
            raise ValueError("max_new_tokens must be positive")


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str = "default"
    api_key: str | None = None
    timeout: float = 120.0
    max_attempts: int = 3
    backoff: float = 1.0

    def headers(self) -> dict[str, str]:
        key = self.api_key if self.api_key is not None else os.environ.get(API_KEY_ENV)
        return {"Authorization": f"Bearer {key}"} if key else {}


def request_body(endpoint: EndpointConfig, prompt: str, cfg: DecodingConfig) -> dict:
    return {
        "model": endpoint.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "max_tokens": cfg.max_new_tokens,
    }


def _completion_text(payload: object) -> str:
    if isinstance(payload, dict):
        choices = payload.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            message = first.get("message") if isinstance(first, dict) else None
            if isinstance(message, dict) and isinstance(message.get("content"), str):
                return message["content"]
            if isinstance(first, dict) and isinstance(first.get("text"), str):
                return first["text"]
        for key in ("text", "completion", "output"):
            if isinstance(payload.get(key), str):
                return payload[key]
    raise EndpointError("response carries no completion text", body=json.dumps(payload)[:500])


def generate_completion(
    endpoint: EndpointConfig,
    prompt: str,
    cfg: DecodingConfig = DecodingConfig(),
    client: httpx.Client | None = None,
) -> str:
    """POST one chat-completion request and return the raw completion text.

    Server errors (5xx, 429), connection failures and timeouts are retried
    with exponential backoff up to ``endpoint.max_attempts`` attempts in
    total; other 4xx responses fail immediately.
    """
    own_client = client is None
    if own_client:
        client = httpx.Client(timeout=endpoint.timeout)
    body = request_body(endpoint, prompt, cfg)
    last_exc: HarnessError | None = None
    try:
        for attempt in range(endpoint.max_attempts):
            if attempt:
                time.sleep(endpoint.backoff * 2 ** (attempt - 1))
            try:
                resp = client.post(endpoint.url, json=body, headers=endpoint.headers(), timeout=endpoint.timeout)
            except httpx.TimeoutException as exc:
                last_exc = EndpointTimeout(f"request timed out after {endpoint.timeout}s: {exc}")
                logger.warning("attempt %d/%d timed out", attempt + 1, endpoint.max_attempts)
                continue
            except httpx.TransportError as exc:
                last_exc = NetworkError(f"could not reach {endpoint.url}: {exc}")
                logger.warning("attempt %d/%d failed: %s", attempt + 1, endpoint.max_attempts, exc)
                continue
            if resp.status_code >= 500 or resp.status_code == 429:
                last_exc = EndpointError(f"endpoint returned {resp.status_code}", resp.status_code, resp.text)
                logger.warning("attempt %d/%d got HTTP %d", attempt + 1, endpoint.max_attempts, resp.status_code)
                continue
            if not resp.is_success:
                raise EndpointError(f"endpoint returned {resp.status_code}", resp.status_code, resp.text)
            try:
                payload = resp.json()
            except ValueError as exc:
                raise EndpointError("response is not JSON", resp.status_code, resp.text) from exc
            return _completion_text(payload)
    finally:
        if own_client:
            client.close()
    assert last_exc is not None
    raise last_exc


def generate_all(
    records: Sequence[EvalRecord],
    endpoint: EndpointConfig,
    mode: PromptMode,
    cfg: DecodingConfig = DecodingConfig(),
    max_in_flight: int = 4,
) -> list[str]:
    """Completions for every record, at most ``max_in_flight`` requests at a time."""
    with httpx.Client(timeout=endpoint.timeout) as client:
        def one(rec: EvalRecord) -> str:
            return generate_completion(endpoint, build_prompt(mode, rec.description), cfg, client)

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            return list(pool.map(one, records))


# ---------------------------------------------------------------------------
# Extraction

_FENCED = re.compile(r"```[^\n`]*\n?(.*?)```", re.DOTALL)
_DIGRAPH = re.compile(r"\b(?:strict\s+)?digraph\b", re.IGNORECASE)


def _balanced_block(text: str, start: int) -> str:
    """Text from ``start`` through the brace that closes the first ``{``."""
    depth = 0
    in_quote = False
    i = start
    while i < len(text):
        ch = text[i]
        if in_quote:
            if ch == "\\":
                i += 1
            elif ch == '"':
                in_quote = False
        elif ch == '"':
            in_quote = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
        i += 1
    return text[start:]


def _digraph_blocks(text: str) -> list[str]:
    blocks = []
    pos = 0
    while (m := _DIGRAPH.search(text, pos)) is not None:
        block = _balanced_block(text, m.start())
        blocks.append(block)
        pos = m.start() + max(len(block), 1)
    return blocks


def extract_dot(raw: str, last: bool = False) -> str:
    """Pull the diagram out of a model response and sanitize it.

    Fenced code blocks that mention ``digraph`` take precedence over bare
    text. ``last`` picks the final block instead of the first, which is
    where reasoning prompts put their answer.
    """
    fenced = [m.group(1) for m in _FENCED.finditer(raw) if _DIGRAPH.search(m.group(1))]
    blocks = [b for body in fenced for b in _digraph_blocks(body)] if fenced else _digraph_blocks(raw)
    if not blocks:
        raise NoDiagramFound("no digraph found in model output")
    return sanitize_dot(blocks[-1] if last else blocks[0])


# ---------------------------------------------------------------------------
# Scoring


@dataclass(frozen=True)
class MetricBundle:
    record_id: str
    domain: str
    bleu: float
    rouge_l: float
    meteor: float
    r_ged_percent: float
    parse_ok: bool
    ged_exact: bool

    def metric(self, name: str) -> float:
        return self.r_ged_percent if name == "r_ged" else getattr(self, name)


def _score(
    record: EvalRecord, last_block: bool = False, budget: SearchBudget = DEFAULT_BUDGET
) -> tuple[MetricBundle, ProcessGraph | None]:
    if record.candidate_dot is None:
        raise MissingCandidate(f"record {record.id!r} has no candidate")
    reference_text = sanitize_dot(record.reference_dot)
    reference = parse_dot(reference_text)
    candidate: ProcessGraph | None
    try:
        candidate_text = extract_dot(record.candidate_dot, last=last_block)
        candidate = parse_dot(candidate_text)
    except (NoDiagramFound, ParseError):
        candidate_text = record.candidate_dot
        candidate = None
    cand_tokens, ref_tokens = tokenize(candidate_text), tokenize(reference_text)
    if candidate is None:
        r_percent, exact = 0.0, False
    else:
        score = r_ged(reference, candidate, budget)
        r_percent, exact = score.percent, score.exact
    bundle = MetricBundle(
        record_id=record.id,
        domain=record.domain,
        bleu=bleu(cand_tokens, ref_tokens),
        rouge_l=rouge_l(cand_tokens, ref_tokens),
        meteor=meteor(cand_tokens, ref_tokens),
        r_ged_percent=r_percent,
        parse_ok=candidate is not None,
        ged_exact=exact,
    )
    return bundle, candidate


def evaluate_pair(
    record: EvalRecord, last_block: bool = False, budget: SearchBudget = DEFAULT_BUDGET
) -> MetricBundle:
    """Text and structure scores for one record.

    An unparseable candidate keeps its text scores, computed on the raw
    output, but its R-GED collapses to zero.
    """
    return _score(record, last_block, budget)[0]


def _score_with_guidelines(args: tuple[EvalRecord, bool, SearchBudget]) -> tuple[MetricBundle, GuidelineReport]:
    record, last_block, budget = args
    bundle, graph = _score(record, last_block, budget)
    return bundle, verify_model(graph, record.id)


# ---------------------------------------------------------------------------
# Aggregation


@dataclass(frozen=True)
class ModelRun:
    """Candidate outputs of one model keyed by record id."""

    name: str
    candidates: Mapping[str, str]
    last_block: bool = False


@dataclass(frozen=True)
class ModelReport:
    name: str
    bundles: tuple[MetricBundle, ...]
    macro: dict[str, Interval]
    per_domain: dict[str, dict[str, Interval]]
    guidelines: tuple[RuleAggregate, ...]
    guideline_reports: tuple[GuidelineReport, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class ReportSet:
    models: dict[str, ModelReport]
    ranking: dict[str, FriedmanResult] | None = None
    ranking_ids: tuple[str, ...] = ()


def _intervals(bundles: Sequence[MetricBundle], resamples: int, seed: int) -> dict[str, Interval]:
    return {
        m: bootstrap_ci([b.metric(m) for b in bundles], resamples=resamples, seed=seed)
        for m in METRICS
    }


def run_evaluation(
    corpus: Sequence[EvalRecord],
    runs: Iterable[ModelRun],
    seed: int = 0,
    resamples: int = DEFAULT_RESAMPLES,
    budget: SearchBudget = DEFAULT_BUDGET,
    workers: int = 1,
) -> ReportSet:
    """Score every run on the corpus and aggregate.

    Each run gets macro and per-domain bootstrap intervals and guideline
    aggregates. With two or more runs, a Friedman test per metric ranks
    the models over the records where every run produced a parseable
    diagram.
    """
    runs = list(runs)
    models: dict[str, ModelReport] = {}
    for run in runs:
        missing = [r.id for r in corpus if r.id not in run.candidates]
        if missing:
            raise IdMismatch(f"run {run.name!r} lacks candidates for {len(missing)} records, e.g. {missing[0]!r}")
        jobs = [
            (EvalRecord(r.id, r.domain, r.description, r.reference_dot, run.candidates[r.id]), run.last_block, budget)
            for r in corpus
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_score_with_guidelines, jobs, chunksize=8))
        else:
            results = [_score_with_guidelines(job) for job in jobs]
        bundles = tuple(b for b, _ in results)
        reports = tuple(g for _, g in results)
        domains: dict[str, list[MetricBundle]] = {}
        for b in bundles:
            domains.setdefault(b.domain, []).append(b)
        models[run.name] = ModelReport(
            name=run.name,
            bundles=bundles,
            macro=_intervals(bundles, resamples, seed),
            per_domain={d: _intervals(bs, resamples, seed) for d, bs in domains.items()},
            guidelines=tuple(aggregate_reports(reports)) if reports else (),
            guideline_reports=reports,
        )

    ranking = None
    ranking_ids: tuple[str, ...] = ()
    if len(models) >= 2:
        reports_list = list(models.values())
        valid = [
            i for i in range(len(corpus))
            if all(m.bundles[i].parse_ok for m in reports_list)
        ]
        ranking_ids = tuple(corpus[i].id for i in valid)
        if len(valid) >= 2:
            ranking = {
                metric: friedman_test([[m.bundles[i].metric(metric) for m in reports_list] for i in valid])
                for metric in METRICS
            }
    return ReportSet(models, ranking, ranking_ids)


def load_candidates(path: str | Path, name: str | None = None) -> ModelRun:
    """Read a candidates JSONL file (``id``, ``candidate_dot``, optional ``mode``/``model``)."""
    candidates: dict[str, str] = {}
    last_block = False
    model_name = name
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            candidates[str(row["id"])] = row.get("candidate_dot") or ""
            mode = row.get("mode")
            if mode is not None and PromptMode(mode).is_reasoning:
                last_block = True
            if model_name is None and row.get("model"):
                model_name = row["model"]
    return ModelRun(model_name or Path(path).stem, candidates, last_block)


def write_candidates(
    path: str | Path, records: Sequence[EvalRecord], completions: Sequence[str], mode: PromptMode, model: str
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec, text in zip(records, completions):
            row = {"id": rec.id, "candidate_dot": text, "mode": PromptMode(mode).value, "model": model}
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

