"""Per-language LF / LF+ / chrF++ tables and LF-vs-LF+ interval series."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .chrf import ChrfParams, corpus_chrf
from .corpus import EvaluationSample, LanguageTag, SampleResult
from .judge import lf_plus
from .langid import language_fidelity

log = logging.getLogger(__name__)

COLUMNS = ("language", "n", "LF", "LF+", "chrF++")


class ReportError(ValueError):
    pass


@dataclass(frozen=True)
class ReportRow:
    language: LanguageTag
    n: int
    lf: float
    lf_plus: float | None = None
    chrf: float | None = None


@dataclass(frozen=True)
class FidelityReport:
    rows: tuple[ReportRow, ...]

    def validate(self) -> FidelityReport:
        for r in self.rows:
            if r.n <= 0:
                raise ReportError(f"{r.language}: row has no samples")
            if not 0.0 <= r.lf <= 100.0:
                raise ReportError(f"{r.language}: LF {r.lf} outside [0, 100]")
            if r.lf_plus is not None and not 0.0 <= r.lf_plus <= r.lf:
                raise ReportError(f"{r.language}: LF+ {r.lf_plus} exceeds LF {r.lf}")
        return self

    @property
    def languages(self) -> list[LanguageTag]:
        return [r.language for r in self.rows]

    def row(self, language: str | LanguageTag) -> ReportRow:
        tag = LanguageTag.parse(language)
        for r in self.rows:
            if r.language == tag:
                return r
        raise KeyError(str(tag))


def build_report(
    samples: Sequence[EvaluationSample],
    results: Sequence[SampleResult],
    params: ChrfParams | None = None,
) -> FidelityReport:
    """One row per target language, metrics computed over that language's subset.

    LF+ is reported only when judging ran (any result carries a verdict);
    chrF++ only for languages whose results carry chrF scores.
    """
    if not results:
        raise ReportError("no results to report")
    by_id = {s.sample_id: s for s in samples}
    groups: dict[LanguageTag, list[tuple[EvaluationSample, SampleResult]]] = {}
    for r in results:
        sample = by_id.get(r.sample_id)
        if sample is None:
            raise ReportError(f"result {r.sample_id!r} has no matching sample")
        if r.identified_language is None:
            raise ReportError(f"result {r.sample_id!r} has no language identification")
        groups.setdefault(sample.target_language, []).append((sample, r))

    judged = any(r.aggregated_verdict is not None for r in results)
    rows = []
    for lang in sorted(groups):
        pairs = groups[lang]
        subset = [s for s, _ in pairs]
        res = [r for _, r in pairs]
        lf = language_fidelity(subset, [r.identified_language for r in res])
        plus = lf_plus(res) if judged else None
        scored = [(s.caption, s.references) for s, r in pairs if r.chrf_score is not None and s.references]
        chrf = corpus_chrf(scored, params) if scored else None
        rows.append(ReportRow(lang, len(pairs), lf, plus, chrf))
    return FidelityReport(tuple(rows)).validate()


# ------------------------------------------------------------------ emitters

def _pct(x: float | None) -> str:
    return "" if x is None else f"{x:.1f}"


def _cells(r: ReportRow) -> list[str]:
    return [str(r.language), str(r.n), _pct(r.lf), _pct(r.lf_plus), _pct(r.chrf)]


def to_csv(report: FidelityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow(_cells(r))
    return buf.getvalue()


def to_markdown(report: FidelityReport) -> str:
    lines = [
        "| " + " | ".join(COLUMNS) + " |",
        "|:--|--:|--:|--:|--:|",
    ]
    for r in report.rows:
        lines.append("| " + " | ".join(c or "-" for c in _cells(r)) + " |")
    return "\n".join(lines) + "\n"


def to_json(report: FidelityReport) -> str:
    rows = []
    for r in report.rows:
        d = asdict(r)
        d["language"] = str(r.language)
        rows.append(d)
    return json.dumps({"rows": rows}, indent=2, ensure_ascii=False) + "\n"


def from_json(text: str) -> FidelityReport:
    data = json.loads(text)
    rows = tuple(
        ReportRow(LanguageTag.parse(d["language"]), d["n"], d["lf"], d.get("lf_plus"), d.get("chrf"))
        for d in data["rows"]
    )
    return FidelityReport(rows).validate()


_EMITTERS = {"csv": to_csv, "markdown": to_markdown, "md": to_markdown, "json": to_json}


def emit(report: FidelityReport, format: str, path: str | Path) -> None:
    try:
        render = _EMITTERS[format]
    except KeyError:
        raise ValueError(f"unknown report format {format!r}; choose from csv, markdown, json") from None
    Path(path).write_text(render(report.validate()), encoding="utf-8")


# ------------------------------------------------------------------ intervals

@dataclass(frozen=True)
class IntervalRow:
    model: str
    language: LanguageTag
    lf_upper: float
    lf_plus_lower: float


def interval_series(reports: Mapping[str, FidelityReport]) -> list[IntervalRow]:
    """LF (upper) and LF+ (lower) per model and language, model-major."""
    if not reports:
        raise ReportError("no reports given")
    expected: list[LanguageTag] | None = None
    out = []
    for model, report in reports.items():
        langs = sorted(report.languages)
        if expected is None:
            expected = langs
        elif [str(l) for l in langs] != [str(l) for l in expected]:
            raise ReportError(f"model {model!r} covers {langs}, expected {expected}")
        for r in sorted(report.rows, key=lambda r: r.language):
            if r.lf_plus is None:
                raise ReportError(f"model {model!r}, {r.language}: no LF+ value")
            if r.lf_plus > r.lf:
                raise ReportError(
                    f"model {model!r}, {r.language}: LF+ {r.lf_plus} above LF {r.lf} (corrupted input)"
                )
            out.append(IntervalRow(model, r.language, r.lf, r.lf_plus))
    return out


def interval_tsv(rows: Sequence[IntervalRow]) -> str:
    lines = ["model\tlanguage\tlf_upper\tlf_plus_lower"]
    lines += [f"{r.model}\t{r.language}\t{r.lf_upper!r}\t{r.lf_plus_lower!r}" for r in rows]
    return "\n".join(lines) + "\n"
