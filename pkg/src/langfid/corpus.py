"""Evaluation records and their line-delimited / csv persistence.

A corpus is a jsonl file, one caption per line::

    {"sample_id": "img01-es", "target_language": "es", "prompt": "...",
     "caption": "Un perro.", "references": ["Un perro marrón."]}

Results mirror :class:`SampleResult` with ``null`` for absent optionals.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

MAX_REFERENCES = 3

_CODE_RE = re.compile(r"^[a-z]{2,3}$")
_SCRIPT_RE = re.compile(r"^[A-Za-z]{4}$")


class CorpusError(ValueError):
    """Malformed or inconsistent corpus / result data."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class LanguageTag:
    code: str
    script: str | None = None

    def __post_init__(self) -> None:
        code = self.code.strip().lower() if isinstance(self.code, str) else self.code
        if not isinstance(code, str) or not _CODE_RE.match(code):
            raise ValueError(f"invalid language code {self.code!r}")
        object.__setattr__(self, "code", code)
        if self.script is not None:
            if not _SCRIPT_RE.match(self.script):
                raise ValueError(f"invalid script code {self.script!r}")
            object.__setattr__(self, "script", self.script.title())

    @classmethod
    def parse(cls, tag: str | LanguageTag) -> LanguageTag:
        """Parse ``"es"``, ``"spa_Latn"`` or ``"sr-Cyrl"``."""
        if isinstance(tag, LanguageTag):
            return tag
        parts = re.split(r"[_-]", tag.strip())
        if len(parts) == 1:
            return cls(parts[0])
        if len(parts) == 2:
            return cls(parts[0], parts[1])
        raise ValueError(f"invalid language tag {tag!r}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LanguageTag):
            return NotImplemented
        if self.code != other.code:
            return False
        if self.script is None or other.script is None:
            return True
        return self.script == other.script

    # script is deliberately excluded so that equal tags hash equal
    def __hash__(self) -> int:
        return hash(self.code)

    def __lt__(self, other: LanguageTag) -> bool:
        return (self.code, self.script or "") < (other.code, other.script or "")

    def __str__(self) -> str:
        return self.code if self.script is None else f"{self.code}_{self.script}"


@dataclass(frozen=True)
class EvaluationSample:
    sample_id: str
    target_language: LanguageTag
    prompt: str
    caption: str
    references: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.sample_id:
            raise ValueError("sample_id must be non-empty")
        if not self.caption.strip():
            raise ValueError(f"sample {self.sample_id!r}: caption is empty")
        object.__setattr__(self, "references", tuple(self.references))
        if len(self.references) > MAX_REFERENCES:
            raise ValueError(
                f"sample {self.sample_id!r}: {len(self.references)} references (max {MAX_REFERENCES})"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "target_language": str(self.target_language),
            "prompt": self.prompt,
            "caption": self.caption,
            "references": list(self.references),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> EvaluationSample:
        refs = d.get("references") or []
        if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
            raise ValueError("references must be a list of strings")
        for key in ("sample_id", "target_language", "caption"):
            if not isinstance(d.get(key), str):
                raise ValueError(f"missing or non-string field {key!r}")
        return cls(
            sample_id=d["sample_id"],
            target_language=LanguageTag.parse(d["target_language"]),
            prompt=d.get("prompt") or "",
            caption=d["caption"],
            references=tuple(refs),
        )


@dataclass(frozen=True)
class AggregatedVerdict:
    """Three-configuration judge outcome for one caption."""

    mean_language_score: float | None
    fully_in_language: bool
    unparseable: bool

    def __post_init__(self) -> None:
        if self.unparseable and self.fully_in_language:
            raise ValueError("an unparseable verdict cannot be fully_in_language")
        s = self.mean_language_score
        if s is not None and not 0.0 <= s <= 1.0:
            raise ValueError(f"mean_language_score {s} outside [0, 1]")


@dataclass(frozen=True)
class SampleResult:
    sample_id: str
    identified_language: LanguageTag | None = None
    lf_correct: bool | None = None
    aggregated_verdict: AggregatedVerdict | None = None
    chrf_score: float | None = None

    def __post_init__(self) -> None:
        if (self.identified_language is None) != (self.lf_correct is None):
            raise ValueError(
                f"result {self.sample_id!r}: lf_correct must be present iff identified_language is"
            )
        if self.chrf_score is not None and not 0.0 <= self.chrf_score <= 100.0:
            raise ValueError(f"result {self.sample_id!r}: chrf_score outside [0, 100]")

    def to_dict(self) -> dict[str, Any]:
        v = self.aggregated_verdict
        return {
            "sample_id": self.sample_id,
            "identified_language": None if self.identified_language is None else str(self.identified_language),
            "lf_correct": self.lf_correct,
            "aggregated_verdict": None
            if v is None
            else {
                "mean_language_score": v.mean_language_score,
                "fully_in_language": v.fully_in_language,
                "unparseable": v.unparseable,
            },
            "chrf_score": self.chrf_score,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SampleResult:
        lang = d.get("identified_language")
        v = d.get("aggregated_verdict")
        return cls(
            sample_id=d["sample_id"],
            identified_language=None if lang is None else LanguageTag.parse(lang),
            lf_correct=d.get("lf_correct"),
            aggregated_verdict=None if v is None else AggregatedVerdict(**v),
            chrf_score=d.get("chrf_score"),
        )


def iter_samples(path: str | Path) -> Iterator[EvaluationSample]:
    """Stream samples from a jsonl file, rejecting duplicate ids."""
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not an object")
                sample = EvaluationSample.from_dict(record)
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusError(str(exc), line=lineno) from exc
            if sample.sample_id in seen:
                raise CorpusError(f"duplicate sample_id {sample.sample_id!r}", line=lineno)
            seen.add(sample.sample_id)
            yield sample


def load_samples(path: str | Path, format: str = "jsonl") -> list[EvaluationSample]:
    if format != "jsonl":
        raise ValueError(f"unsupported sample format {format!r}")
    return list(iter_samples(path))


def write_samples(samples: Iterable[EvaluationSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), ensure_ascii=False) + "\n")


CSV_COLUMNS = (
    "sample_id",
    "identified_language",
    "lf_correct",
    "mean_language_score",
    "fully_in_language",
    "unparseable",
    "chrf_score",
)


def _fmt_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_bool(cell: str) -> bool | None:
    if cell == "":
        return None
    if cell in ("true", "false"):
        return cell == "true"
    raise ValueError(f"bad boolean cell {cell!r}")


def _parse_float(cell: str) -> float | None:
    if cell == "":
        return None
    x = float(cell)
    if math.isnan(x):
        raise ValueError("NaN in result file")
    return x


def _result_to_row(r: SampleResult) -> list[str]:
    v = r.aggregated_verdict
    return [
        _fmt_cell(r.sample_id),
        _fmt_cell(None if r.identified_language is None else str(r.identified_language)),
        _fmt_cell(r.lf_correct),
        _fmt_cell(None if v is None else v.mean_language_score),
        _fmt_cell(None if v is None else v.fully_in_language),
        _fmt_cell(None if v is None else v.unparseable),
        _fmt_cell(r.chrf_score),
    ]


def _row_to_result(row: dict[str, str]) -> SampleResult:
    fully = _parse_bool(row["fully_in_language"])
    verdict = None
    if fully is not None:
        verdict = AggregatedVerdict(
            mean_language_score=_parse_float(row["mean_language_score"]),
            fully_in_language=fully,
            unparseable=bool(_parse_bool(row["unparseable"])),
        )
    lang = row["identified_language"]
    return SampleResult(
        sample_id=row["sample_id"],
        identified_language=LanguageTag.parse(lang) if lang else None,
        lf_correct=_parse_bool(row["lf_correct"]),
        aggregated_verdict=verdict,
        chrf_score=_parse_float(row["chrf_score"]),
    )


def write_results(results: Iterable[SampleResult], path: str | Path, format: str = "jsonl") -> None:
    if results is None:
        raise ValueError("results must not be None")
    path = Path(path)
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for r in results:
                fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in results:
                writer.writerow(_result_to_row(r))
    else:
        raise ValueError(f"unsupported result format {format!r}")


def load_results(path: str | Path, format: str | None = None) -> list[SampleResult]:
    """Read results written by :func:`write_results`; format defaults from the suffix."""
    path = Path(path)
    format = format or ("csv" if path.suffix == ".csv" else "jsonl")
    out: list[SampleResult] = []
    if format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    out.append(SampleResult.from_dict(json.loads(line)))
                except (ValueError, KeyError, TypeError) as exc:
                    raise CorpusError(str(exc), line=lineno) from exc
    elif format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
                raise CorpusError(f"unexpected csv header {reader.fieldnames}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    out.append(_row_to_result(row))
                except (ValueError, KeyError) as exc:
                    raise CorpusError(str(exc), line=lineno) from exc
    else:
        raise ValueError(f"unsupported result format {format!r}")
    return out
