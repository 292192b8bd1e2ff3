"""``langfid`` command line.

Every subcommand writes its artifacts under ``--out`` and prints one
``SUMMARY`` line. Exit codes: 0 ok, 1 usage, 2 data error, 3 transport.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from . import __version__
from .checkpoint import CheckpointFormatError
from .chrf import ChrfParams, sentence_chrf
from .corpus import CorpusError, LanguageTag, SampleResult, load_results, load_samples, write_results
from .errors import MappingError, TransportError
from .judge import EndpointConfig, Judge, judge_results, lf_plus, parse_config_names, validate_judge
from .langid import IdentifierBackend, identify, read_label_map
from .merge import MergeError, MergeSpec, merge_files
from .mixer import STRATEGIES, StageVolume, interleave_manifest, plan_mix, read_volumes, scale_text_budget, write_lines
from .report import ReportError, build_report, emit, interval_series, interval_tsv

log = logging.getLogger("langfid")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3
UNDETERMINED = LanguageTag("und")
BACKENDS = {"builtin": "builtin_trigram", "external": "external_command", "http": "http_endpoint"}


class UsageError(Exception):
    pass


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log_config(args: argparse.Namespace, out: Path) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    text = json.dumps(config, indent=2, sort_keys=True, default=str)
    log.info("resolved configuration:\n%s", text)
    (out / "run_config.json").write_text(text + "\n", encoding="utf-8")


def _load_nonempty_samples(path: str):
    samples = load_samples(path)
    if not samples:
        raise UsageError(f"{path}: corpus is empty")
    return samples


def _endpoint(args: argparse.Namespace) -> EndpointConfig:
    return EndpointConfig(
        base_url=args.endpoint,
        model_name=args.model,
        api_key_env=args.api_key_env,
        timeout=args.timeout,
        max_retries=args.max_retries,
        parallelism=args.parallelism,
    )


def _summary(kind: str, **fields: object) -> None:
    parts = [f"{k}={v:.2f}" if isinstance(v, float) else f"{k}={v}" for k, v in fields.items()]
    print(f"SUMMARY {kind} " + " ".join(parts))


# ------------------------------------------------------------------ lf

def cmd_lf(args: argparse.Namespace) -> int:
    samples = _load_nonempty_samples(args.samples)
    out = _out_dir(args)
    _log_config(args, out)
    label_map = read_label_map(args.label_map) if args.label_map else {}
    backend = IdentifierBackend(BACKENDS[args.backend], args.location, label_map)

    failures: dict[LanguageTag, list[str]] = defaultdict(list)
    transport_failed = False

    def one(sample):
        nonlocal transport_failed
        try:
            return identify(sample.caption, backend).tag
        except (TransportError, MappingError) as exc:
            transport_failed |= isinstance(exc, TransportError)
            log.error("sample %s: identification failed: %s", sample.sample_id, exc)
            failures[sample.target_language].append(sample.sample_id)
            return UNDETERMINED

    with backend:
        if args.parallelism > 1 and backend.kind != "builtin_trigram":
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(args.parallelism) as pool:
                tags = list(pool.map(one, samples))
        else:
            tags = [one(s) for s in samples]

    results = [SampleResult(s.sample_id, t, t == s.target_language) for s, t in zip(samples, tags)]
    write_results(results, out / "lf_results.jsonl")
    report = build_report(samples, results)
    for row in report.rows:
        print(f"lf\t{row.language}\tn={row.n}\tLF={row.lf:.1f}")
    overall = 100.0 * sum(r.lf_correct for r in results) / len(results)
    _summary("lf", n=len(results), lf=overall, failed=sum(len(v) for v in failures.values()))

    sizes = {row.language: row.n for row in report.rows}
    dead = [str(lang) for lang, ids in failures.items() if len(ids) == sizes[lang]]
    if dead:
        log.error("identification failed for every sample of: %s", ", ".join(sorted(dead)))
        return EXIT_TRANSPORT if transport_failed else EXIT_DATA
    return EXIT_OK


# ------------------------------------------------------------------ judge

def cmd_judge(args: argparse.Namespace) -> int:
    samples = _load_nonempty_samples(args.samples)
    results = load_results(args.results)
    if not results:
        raise UsageError(f"{args.results}: no results")
    out = _out_dir(args)
    _log_config(args, out)
    configs = parse_config_names(args.configs)
    judged = judge_results(samples, results, Judge(_endpoint(args), configs))
    write_results(judged, out / "judge_results.jsonl")
    report = build_report(samples, judged)
    for row in report.rows:
        print(f"judge\t{row.language}\tn={row.n}\tLF={row.lf:.1f}\tLF+={row.lf_plus:.1f}")
    lf = 100.0 * sum(bool(r.lf_correct) for r in judged) / len(judged)
    _summary("judge", n=len(judged), configs="".join(c.name for c in configs), lf=lf, lf_plus=lf_plus(judged))
    return EXIT_OK


# ------------------------------------------------------------------ validate-judge

def cmd_validate_judge(args: argparse.Namespace) -> int:
    samples = _load_nonempty_samples(args.samples)
    out = _out_dir(args)
    _log_config(args, out)
    configs = parse_config_names(args.configs)
    if len(configs) != 1:
        raise UsageError("validate-judge uses exactly one generation config")
    rows = validate_judge(samples, _endpoint(args), configs[0].name, args.threshold)
    if not rows:
        raise UsageError("corpus has no reference captions")
    lines = ["language\tn\tn_true\tn_unparseable\tpass_rate\tflagged"]
    for r in rows:
        lines.append(f"{r.language}\t{r.n}\t{r.n_true}\t{r.n_unparseable}\t{r.pass_rate!r}\t{str(r.flagged).lower()}")
        print(f"validate\t{r.language}\tn={r.n}\tpass={100 * r.pass_rate:.1f}" + ("\tFLAGGED" if r.flagged else ""))
    write_lines(lines, out / "judge_validation.tsv")
    _summary(
        "validate-judge",
        references=sum(r.n for r in rows),
        flagged=",".join(str(r.language) for r in rows if r.flagged) or "none",
    )
    return EXIT_OK


# ------------------------------------------------------------------ chrf

def cmd_chrf(args: argparse.Namespace) -> int:
    samples = _load_nonempty_samples(args.samples)
    out = _out_dir(args)
    _log_config(args, out)
    params = ChrfParams(args.char_order, args.word_order, args.beta)
    base = {r.sample_id: r for r in load_results(args.results)} if args.results else {}

    results, per_lang = [], defaultdict(list)
    skipped = 0
    for s in samples:
        prev = base.get(s.sample_id, SampleResult(s.sample_id))
        score = None
        if s.references:
            score = sentence_chrf(s.caption, s.references, params).score
            per_lang[s.target_language].append(score)
        else:
            skipped += 1
        results.append(
            SampleResult(s.sample_id, prev.identified_language, prev.lf_correct, prev.aggregated_verdict, score)
        )
    if skipped:
        log.warning("%d sample(s) without references skipped for chrF++", skipped)
    if not per_lang:
        raise UsageError("no sample has reference captions")
    write_results(results, out / "chrf_results.jsonl")
    for lang in sorted(per_lang):
        scores = per_lang[lang]
        print(f"chrf\t{lang}\tn={len(scores)}\tchrF++={sum(scores) / len(scores):.1f}")
    every = [x for v in per_lang.values() for x in v]
    _summary("chrf", n=len(every), skipped=skipped, chrf=sum(every) / len(every))
    return EXIT_OK


# ------------------------------------------------------------------ merge

def cmd_merge(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    _log_config(args, out)
    preserve = tuple(p for p in args.preserve if p)
    spec = MergeSpec(args.method, args.alpha, preserve, args.epsilon)
    target = out / args.name
    summary = merge_files(args.instructed, args.backbone, target, spec)
    _summary(
        "merge",
        method=spec.method,
        alpha=spec.alpha,
        interpolated=len(summary.interpolated),
        preserved=len(summary.preserved),
        out=target,
    )
    return EXIT_OK


# ------------------------------------------------------------------ mix

def _parse_pairs(items: Sequence[str], what: str) -> list[tuple[str, str]]:
    pairs = []
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"{what} must look like STAGE=VALUE, got {item!r}")
        pairs.append((key, value))
    return pairs


def _read_ids(path: str) -> list[str]:
    return [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def cmd_mix(args: argparse.Namespace) -> int:
    volumes = read_volumes(args.volumes) if args.volumes else []
    volumes += [StageVolume(k, int(v)) for k, v in _parse_pairs(args.volume, "--volume")]
    if args.text_total is not None:
        total = args.text_total
    elif args.ratio is not None:
        visual_total = args.visual_total if args.visual_total is not None else sum(v.visual_count for v in volumes)
        total = scale_text_budget(args.ratio, visual_total)
    else:
        raise UsageError("give --text-total or --ratio")
    out = _out_dir(args)
    _log_config(args, out)
    plan = plan_mix(args.strategy, total, volumes)
    write_lines(plan.lines(), out / "plan.tsv")

    manifests = dict(_parse_pairs(args.visual_ids, "--visual-ids"))
    if manifests:
        if not args.text_ids:
            raise UsageError("--visual-ids needs --text-ids")
        text_ids = _read_ids(args.text_ids)
        offset = 0
        for i, stage in enumerate(STRATEGIES[args.strategy]):
            n = plan.allocations[stage]
            if stage in manifests:
                m = interleave_manifest(_read_ids(manifests[stage]), text_ids[offset:], n, args.seed + i)
                write_lines(m, out / f"manifest_{stage}.txt")
            offset += n
    for line in plan.lines():
        print("mix\t" + line)
    _summary("mix", strategy=plan.strategy, text_total=plan.text_total,
             allocations=",".join(f"{k}:{v}" for k, v in plan.allocations.items()))
    return EXIT_OK


# ------------------------------------------------------------------ report

RESULT_FILES = ("judge_results.jsonl", "chrf_results.jsonl", "lf_results.jsonl")


def _resolve_results(path: str) -> Path:
    p = Path(path)
    if p.is_dir():
        for name in RESULT_FILES:
            if (p / name).exists():
                return p / name
        raise UsageError(f"{p}: no result files found (looked for {', '.join(RESULT_FILES)})")
    if not p.exists():
        raise UsageError(f"{p}: no such results file")
    return p


def cmd_report(args: argparse.Namespace) -> int:
    samples = _load_nonempty_samples(args.samples)
    runs: dict[str, Path] = {}
    if args.results:
        runs["model"] = _resolve_results(args.results)
    for name, path in _parse_pairs(args.model_results, "--model-results"):
        runs[name] = _resolve_results(path)
    if not runs:
        raise UsageError("give --results or --model-results")
    out = _out_dir(args)
    _log_config(args, out)

    reports = {}
    for name, path in runs.items():
        results = load_results(path)
        if not results:
            raise UsageError(f"{path}: results file is empty")
        reports[name] = build_report(samples, results)

    formats = args.format or ["csv", "markdown", "json"]
    suffix = {"csv": "csv", "markdown": "md", "json": "json"}
    for name, rep in reports.items():
        stem = "report" if len(reports) == 1 and name == "model" else f"report_{name}"
        for fmt in formats:
            emit(rep, fmt, out / f"{stem}.{suffix[fmt]}")
    if all(r.lf_plus is not None for rep in reports.values() for r in rep.rows):
        (out / "interval.tsv").write_text(interval_tsv(interval_series(reports)), encoding="utf-8")
    _summary("report", models=len(reports), languages=len(next(iter(reports.values())).rows),
             formats=",".join(formats))
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _add_endpoint_flags(p: argparse.ArgumentParser, default_configs: str) -> None:
    p.add_argument("--endpoint", required=True, help="base URL of an OpenAI-compatible server")
    p.add_argument("--model", required=True, help="judge model name")
    p.add_argument("--api-key-env", default=None, help="environment variable holding the bearer token")
    p.add_argument("--configs", default=default_configs, help="generation configs, e.g. A,B,C")
    p.add_argument("--timeout", type=float, default=60.0)
    p.add_argument("--max-retries", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langfid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="directory for all artifacts")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--parallelism", type=int, default=1)
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lf", parents=[common], help="language fidelity via a language identifier")
    p.add_argument("--samples", required=True)
    p.add_argument("--backend", choices=sorted(BACKENDS), default="builtin")
    p.add_argument("--location", help="identifier command line or URL")
    p.add_argument("--label-map", help="two-column 'backend_label tag' file")
    p.set_defaults(func=cmd_lf)

    p = sub.add_parser("judge", parents=[common], help="LF+ via LLM-as-a-judge on LF-correct samples")
    p.add_argument("--samples", required=True)
    p.add_argument("--results", required=True, help="lf_results.jsonl from 'langfid lf'")
    _add_endpoint_flags(p, "A,B,C")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("validate-judge", parents=[common], help="score human references with the judge")
    p.add_argument("--samples", required=True)
    p.add_argument("--threshold", type=float, default=0.90)
    _add_endpoint_flags(p, "B")
    p.set_defaults(func=cmd_validate_judge)

    p = sub.add_parser("chrf", parents=[common], help="chrF++ against reference captions")
    p.add_argument("--samples", required=True)
    p.add_argument("--results", help="existing results to augment with chrF++ scores")
    p.add_argument("--char-order", type=int, default=6)
    p.add_argument("--word-order", type=int, default=2)
    p.add_argument("--beta", type=float, default=2.0)
    p.set_defaults(func=cmd_chrf)

    p = sub.add_parser("merge", parents=[common], help="interpolate two checkpoints")
    p.add_argument("--instructed", required=True, help="visually instructed checkpoint (w1)")
    p.add_argument("--backbone", required=True, help="backbone LLM checkpoint (w2)")
    p.add_argument("--method", choices=["lerp", "slerp"], default="slerp")
    p.add_argument("--alpha", type=float, default=0.5, help="weight on the backbone")
    p.add_argument("--preserve", nargs="+", required=True, metavar="GLOB",
                   help="tensor-name globs copied from the instructed model ('' for none)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--name", default="merged.safetensors")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("mix", parents=[common], help="plan text-only data per curriculum stage")
    p.add_argument("--strategy", choices=sorted(STRATEGIES), required=True)
    p.add_argument("--text-total", type=int)
    p.add_argument("--ratio", type=float, help="text budget as a fraction of the visual total")
    p.add_argument("--visual-total", type=int, help="defaults to the sum of --volume counts")
    p.add_argument("--volumes", help="file of 'stage count' lines")
    p.add_argument("--volume", action="append", default=[], metavar="STAGE=COUNT")
    p.add_argument("--visual-ids", action="append", default=[], metavar="STAGE=FILE")
    p.add_argument("--text-ids", help="file of text sample ids, consumed in stage order")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("report", parents=[common], help="per-language tables and interval series")
    p.add_argument("--samples", required=True)
    p.add_argument("--results", help="results file or run directory")
    p.add_argument("--model-results", action="append", default=[], metavar="NAME=PATH")
    p.add_argument("--format", action="append", choices=["csv", "markdown", "json"])
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.parallelism < 1:
        print("langfid: --parallelism must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"langfid {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"langfid {args.command}: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (CorpusError, CheckpointFormatError, MergeError, ReportError, MappingError, ValueError, OSError) as exc:
        print(f"langfid {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
