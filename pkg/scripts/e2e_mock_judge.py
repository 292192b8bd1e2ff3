"""End-to-end LF / LF+ / chrF++ run on a synthetic corpus with an in-process mock judge.

    python scripts/e2e_mock_judge.py --out runs/e2e --flag-rate 0.3
"""

from __future__ import annotations

import argparse
import random
import sys
from importlib import resources
from pathlib import Path

from langfid.cli import main as langfid
from langfid.corpus import EvaluationSample, LanguageTag, write_samples
from langfid.langid import BUILTIN_LANGUAGES
from langfid.mockserver import MockChatServer, verdict_responder


def synthetic_corpus(per_language: int, off_target: float, seed: int) -> list[EvaluationSample]:
    rng = random.Random(seed)
    lines = {
        code: (resources.files("langfid") / "data" / f"{code}.txt").read_text(encoding="utf-8").splitlines()
        for code in BUILTIN_LANGUAGES
    }
    samples = []
    for code in BUILTIN_LANGUAGES:
        for k in range(per_language):
            src = code if rng.random() >= off_target else rng.choice([c for c in BUILTIN_LANGUAGES if c != code])
            caption = " ".join(rng.sample(lines[src], 2))
            refs = tuple(rng.sample(lines[code], 3))
            samples.append(EvaluationSample(f"{code}-{k:04d}", LanguageTag(code), "Describe the image.", caption, refs))
    return samples


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/e2e")
    ap.add_argument("--per-language", type=int, default=100)
    ap.add_argument("--off-target", type=float, default=0.1, help="fraction of captions in the wrong language")
    ap.add_argument("--flag-rate", type=float, default=0.3, help="fraction of captions the mock judge rejects")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--parallelism", type=int, default=8)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = synthetic_corpus(args.per_language, args.off_target, args.seed)
    corpus = out / "samples.jsonl"
    write_samples(samples, corpus)
    rng = random.Random(args.seed + 1)
    flagged = {s.caption for s in samples if rng.random() < args.flag_rate}

    steps = [["lf", "--samples", corpus, "--out", out / "lf"]]
    with MockChatServer(verdict_responder(lambda c: c in flagged)) as srv:
        steps.append([
            "judge", "--samples", corpus, "--results", out / "lf" / "lf_results.jsonl", "--endpoint", srv.base_url,
            "--model", "mock", "--parallelism", args.parallelism, "--out", out / "judge",
        ])
        steps.append(["chrf", "--samples", corpus, "--results", out / "judge" / "judge_results.jsonl",
                      "--out", out / "chrf"])
        steps.append(["report", "--samples", corpus, "--results", out / "chrf", "--out", out / "report"])
        for argv in steps:
            code = langfid([str(a) for a in argv])
            if code:
                return code
    print((out / "report" / "report.md").read_text(encoding="utf-8"), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
