"""LLM-as-a-judge protocol for language consistency (LF+).

Every caption is sent to an OpenAI-compatible chat endpoint under three
sampling configurations. The structured replies are parsed field by
field (non-conforming fields become ``None``), then merged: scores are
averaged over the configurations that produced one, booleans are
majority-voted with ``False`` winning ties and ``False`` when nothing
parsed at all.
"""

from __future__ import annotations

import logging
import math
import os
import random
import re
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import httpx

from .corpus import AggregatedVerdict, EvaluationSample, LanguageTag, SampleResult
from .errors import StatusError, TransportError

log = logging.getLogger(__name__)

PLACEHOLDER = "<CAPTION GENERATED BY VISUAL SALAMANDRA>"

PROMPT_TEMPLATE = (
    "Analyze the following text and determine the language it is written in.\n"
    "- Identify the most likely language.\n"
    "- Ensure the probability score is a single value, not a range or estimate.\n"
    "- Determine a language consistency score between 0 and 1.0, where 1.0 means the text is "
    "entirely in one language, and 0.0 means it is completely incomprehensible.\n"
    "- Lower the score proportionally if foreign words are present, but do not assign 0.0 unless "
    "the text is nonsensical.\n"
    "- The language score must be a single number between 0 and 1.0.\n"
    "- Indicate whether the text is completely written in the identified language (True or False).\n"
    "- In both language consistency metrics, do not penalize for proper nouns, brand names, or "
    "commonly used foreign terms (e.g., 'software', 'email') that do not alter the overall "
    "language structure.\n"
    "- Avoid unnecessary explanations. Summarize the feedback (reason of the mark) in at most 30 words.\n"
    "\n"
    "Use the exact format below:\n"
    "\n"
    "- Language: [language_guess]\n"
    "- Language Score: [single value between 0 and 1.0]\n"
    "- Fully in Language: [True/False]\n"
    "- Summary: [Concise explanation (max 30 words)]\n"
    "\n"
    "Keep your answer short and concise. The sentence to analyze is the following:\n"
    f"{PLACEHOLDER}"
)

_PROMPT_HEAD, _PROMPT_TAIL = PROMPT_TEMPLATE.split(PLACEHOLDER)


@dataclass(frozen=True)
class GenerationConfig:
    name: str
    temperature: float
    top_p: float
    max_new_tokens: int = 50


CONFIGS: dict[str, GenerationConfig] = {
    "A": GenerationConfig("A", 0.6, 0.7, 50),
    "B": GenerationConfig("B", 0.8, 0.6, 50),
    "C": GenerationConfig("C", 1.0, 0.5, 50),
}


def parse_config_names(spec: str | Iterable[str]) -> list[GenerationConfig]:
    """``"A,B,C"`` or ``["B"]`` -> canonical configs (duplicates rejected)."""
    names = [n.strip().upper() for n in (spec.split(",") if isinstance(spec, str) else spec)]
    names = [n for n in names if n]
    if not names or len(set(names)) != len(names):
        raise ValueError(f"invalid config list {spec!r}")
    try:
        return [CONFIGS[n] for n in names]
    except KeyError as exc:
        raise ValueError(f"unknown generation config {exc.args[0]!r}; choose from A, B, C") from None


@dataclass(frozen=True)
class JudgeVerdict:
    config_name: str
    language_guess: str | None = None
    language_score: float | None = None
    fully_in_language: bool | None = None
    summary: str | None = None

    def __post_init__(self) -> None:
        s = self.language_score
        if s is not None and not 0.0 <= s <= 1.0:
            raise ValueError(f"language_score {s} outside [0, 1]")


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    parallelism: int = 4
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/v1/chat/completions"

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
            else:
                log.warning("environment variable %s is not set; sending no bearer token", self.api_key_env)
        return headers


# -------------------------------------------------------------- prompt

def build_prompt(caption: str) -> str:
    if not caption:
        raise ValueError("caption must be non-empty")
    # concatenation, so a caption that itself contains the placeholder is not re-expanded
    return _PROMPT_HEAD + caption + _PROMPT_TAIL


def caption_from_prompt(prompt: str) -> str:
    """Inverse of :func:`build_prompt` (used by mock endpoints)."""
    if not prompt.startswith(_PROMPT_HEAD):
        raise ValueError("not a judge prompt")
    body = prompt[len(_PROMPT_HEAD) :]
    return body[: len(body) - len(_PROMPT_TAIL)] if _PROMPT_TAIL else body


# -------------------------------------------------------------- transport

def _transient(status: int) -> bool:
    return status == 429 or status >= 500


def query_judge(
    prompt: str,
    gen: GenerationConfig,
    endpoint: EndpointConfig,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """One chat-completion round trip, retrying connection errors, 429 and 5xx."""
    body = {
        "model": endpoint.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": gen.temperature,
        "top_p": gen.top_p,
        "max_tokens": gen.max_new_tokens,
    }
    own_client = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    last: Exception | None = None
    try:
        for attempt in range(endpoint.max_retries + 1):
            if attempt:
                delay = endpoint.backoff_base * 2 ** (attempt - 1)
                sleep(delay * (1 + random.random() * 0.25))
            try:
                resp = client.post(endpoint.url, json=body, headers=endpoint.headers(), timeout=endpoint.timeout)
            except httpx.HTTPError as exc:
                last = exc
                log.debug("judge attempt %d failed: %s", attempt + 1, exc)
                continue
            if resp.status_code == 200:
                try:
                    return resp.json()["choices"][0]["message"]["content"] or ""
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise TransportError(f"malformed chat-completion response: {resp.text[:200]}") from exc
            err = StatusError(resp.status_code, resp.text)
            if not _transient(resp.status_code):
                raise err
            last = err
            log.debug("judge attempt %d: %s", attempt + 1, err)
    finally:
        if own_client:
            client.close()
    raise TransportError(f"judge endpoint failed after {endpoint.max_retries + 1} attempts: {last}") from last


# -------------------------------------------------------------- parsing

_FIELD_RE = re.compile(
    r"^\s*[-*•]?\s*\**\s*(language score|fully in language|language|summary)\s*\**\s*:\s*\**\s*(.*?)\s*$",
    re.IGNORECASE,
)
_KEYS = {
    "language": "language_guess",
    "language score": "language_score",
    "fully in language": "fully_in_language",
    "summary": "summary",
}


def _strip_value(value: str) -> str:
    value = value.strip().strip("*").strip()
    if value.startswith("[") and value.endswith("]"):
        value = value[1:-1].strip()
    return value


def _parse_score(value: str) -> float | None:
    v = _strip_value(value).rstrip(".")
    if not re.fullmatch(r"[+]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?", v):
        return None
    x = float(v)
    return x if 0.0 <= x <= 1.0 else None


def _parse_bool(value: str) -> bool | None:
    v = _strip_value(value).rstrip(".").lower()
    return {"true": True, "false": False}.get(v)


def parse_verdict(raw: str, config_name: str) -> JudgeVerdict:
    """Extract the four ``- Field: value`` lines; anything non-conforming is ``None``."""
    found: dict[str, list[str]] = {}
    for line in (raw or "").splitlines():
        m = _FIELD_RE.match(line)
        if m:
            found.setdefault(_KEYS[m.group(1).lower()], []).append(m.group(2))

    def single(key: str) -> str | None:
        values = found.get(key, [])
        # conflicting duplicates are ambiguous
        if not values or len(set(values)) != 1:
            return None
        return values[0]

    guess, score, fully, summary = (single(k) for k in _KEYS.values())
    guess = _strip_value(guess) if guess is not None else None
    summary = summary.strip() if summary is not None else None
    return JudgeVerdict(
        config_name=config_name,
        language_guess=guess or None,
        language_score=None if score is None else _parse_score(score),
        fully_in_language=None if fully is None else _parse_bool(fully),
        summary=summary or None,
    )


def format_verdict(v: JudgeVerdict) -> str:
    """Render a verdict in the four-line reply format the prompt asks for."""
    score = "" if v.language_score is None else repr(float(v.language_score))
    fully = "" if v.fully_in_language is None else str(v.fully_in_language)
    return (
        f"- Language: {v.language_guess or ''}\n"
        f"- Language Score: {score}\n"
        f"- Fully in Language: {fully}\n"
        f"- Summary: {v.summary or ''}"
    )


# -------------------------------------------------------------- aggregation

def aggregate_verdicts(
    verdicts: Sequence[JudgeVerdict], expected: Iterable[str] = ("A", "B", "C")
) -> AggregatedVerdict:
    names = Counter(v.config_name for v in verdicts)
    if names != Counter(expected):
        raise ValueError(f"expected one verdict per config {sorted(expected)}, got {sorted(names.elements())}")
    scores = [v.language_score for v in verdicts if v.language_score is not None]
    mean = math.fsum(scores) / len(scores) if scores else None
    if mean is not None:
        mean = min(1.0, max(0.0, mean))
    votes = [v.fully_in_language for v in verdicts if v.fully_in_language is not None]
    if not votes:
        return AggregatedVerdict(mean, fully_in_language=False, unparseable=True)
    yes = sum(votes)
    # a split vote resolves to False
    return AggregatedVerdict(mean, fully_in_language=yes > len(votes) - yes, unparseable=False)


UNPARSEABLE = AggregatedVerdict(None, fully_in_language=False, unparseable=True)


def lf_plus(results: Sequence[SampleResult]) -> float:
    """Percentage of samples that pass the identifier *and* the judge."""
    if not results:
        raise ValueError("lf_plus needs at least one result")
    hits = 0
    for r in results:
        if r.lf_correct is None:
            raise ValueError(f"result {r.sample_id!r} has no LF decision")
        if not r.lf_correct:
            continue
        if r.aggregated_verdict is None:
            raise ValueError(f"LF-correct result {r.sample_id!r} has no judge verdict")
        hits += r.aggregated_verdict.fully_in_language
    return 100.0 * hits / len(results)


# -------------------------------------------------------------- orchestration

@dataclass
class Judge:
    """Runs the protocol against one endpoint with bounded concurrency."""

    endpoint: EndpointConfig
    configs: Sequence[GenerationConfig] = field(default_factory=lambda: list(CONFIGS.values()))
    sleep: Callable[[float], None] = time.sleep

    def judge_caption(
        self, caption: str, client: httpx.Client, tolerate_errors: bool = False
    ) -> tuple[list[JudgeVerdict], AggregatedVerdict]:
        prompt = build_prompt(caption)
        verdicts = []
        for gen in self.configs:
            try:
                raw = query_judge(prompt, gen, self.endpoint, client, sleep=self.sleep)
            except TransportError as exc:
                if not tolerate_errors:
                    raise
                log.warning("judge transport error (config %s): %s", gen.name, exc)
                raw = ""
            verdicts.append(parse_verdict(raw, gen.name))
        agg = aggregate_verdicts(verdicts, [g.name for g in self.configs])
        return verdicts, agg

    def judge_many(self, captions: Sequence[str], tolerate_errors: bool = False) -> list[AggregatedVerdict]:
        """Aggregated verdicts in input order, at most ``parallelism`` requests in flight."""
        limits = httpx.Limits(max_connections=self.endpoint.parallelism)
        with httpx.Client(timeout=self.endpoint.timeout, limits=limits) as client:
            def one(caption: str) -> AggregatedVerdict:
                return self.judge_caption(caption, client, tolerate_errors)[1]

            if self.endpoint.parallelism == 1:
                return [one(c) for c in captions]
            with ThreadPoolExecutor(max_workers=self.endpoint.parallelism) as pool:
                return list(pool.map(one, captions))


def judge_results(
    samples: Sequence[EvaluationSample], results: Sequence[SampleResult], judge: Judge
) -> list[SampleResult]:
    """Attach verdicts to LF-correct results; others pass through unjudged."""
    by_id = {s.sample_id: s for s in samples}
    todo = []
    for r in results:
        if r.sample_id not in by_id:
            raise ValueError(f"result {r.sample_id!r} has no matching sample")
        if r.lf_correct is None:
            raise ValueError(f"result {r.sample_id!r} has no LF decision; run LF first")
        if r.lf_correct:
            todo.append(r)
    verdicts = judge.judge_many([by_id[r.sample_id].caption for r in todo])
    attached = {r.sample_id: v for r, v in zip(todo, verdicts)}
    return [
        SampleResult(r.sample_id, r.identified_language, r.lf_correct, attached.get(r.sample_id), r.chrf_score)
        for r in results
    ]


@dataclass(frozen=True)
class ValidationRow:
    language: LanguageTag
    n: int
    n_true: int
    n_unparseable: int
    pass_rate: float
    flagged: bool


def validate_judge(
    samples: Sequence[EvaluationSample],
    endpoint: EndpointConfig,
    config: str = "B",
    threshold: float = 0.90,
    sleep: Callable[[float], None] = time.sleep,
) -> list[ValidationRow]:
    """Score every human reference with one config; per-language pass rates.

    Transport failures count as unparseable (and therefore not passing).
    """
    judge = Judge(endpoint, parse_config_names([config]), sleep=sleep)
    refs: list[tuple[LanguageTag, str]] = [
        (s.target_language, r) for s in samples for r in s.references if r.strip()
    ]
    verdicts = judge.judge_many([r for _, r in refs], tolerate_errors=True)
    tally: dict[LanguageTag, list[AggregatedVerdict]] = {}
    for (lang, _), v in zip(refs, verdicts):
        tally.setdefault(lang, []).append(v)
    rows = []
    for lang in sorted(tally):
        vs = tally[lang]
        n_true = sum(v.fully_in_language for v in vs)
        rate = n_true / len(vs)
        rows.append(ValidationRow(lang, len(vs), n_true, sum(v.unparseable for v in vs), rate, rate < threshold))
    return rows
