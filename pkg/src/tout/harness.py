"""Benchmark harness: episodes, aggregation, ablations and sweeps.

Every episode produces a RunRecord line in a JSONL file keyed by problem
id plus a digest of the effective configuration; rerunning the same
benchmark skips episodes whose records already exist, so interrupted runs
resume where they stopped. Aggregated metrics are means of the per-episode
verdict values, reported as rows with a fixed column order for the CSV and
markdown emitters.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import NormalDist
from typing import Callable, Optional, Sequence

from .backends import Backend, ResponseCache
from .model import (
    BackendUnavailableError,
    InvalidArgumentError,
    RunRecord,
    SearchConfig,
    SearchExhaustedError,
    TaskSpec,
    Transcript,
)
from .search import METHODS, run_method
from .tasks import TASK_NAMES, Problem
from .tasks.crosswords import SIZE, SLOTS, board_from_thoughts, score_board
from .tasks.synthetic import TrapBenchmark

RESULT_COLUMNS = ("method", "m", "b", "metric", "value", "episodes", "seconds")

BACKEND_KINDS = ("http", "scripted", "synthetic")


class RunAbortedError(RuntimeError):
    """Too many episodes failed; the partial records remain on disk."""


@dataclass(frozen=True)
class RunConfig:
    """One benchmark invocation: what to run, on what data, and where.

    The episode range is [start, start+episodes) over the dataset order;
    episodes=None means through the end.
    """

    task: str
    method: str
    backend: str = "http"
    search: SearchConfig = field(default_factory=SearchConfig)
    dataset: Optional[Path] = None
    out_dir: Optional[Path] = None
    start: int = 0
    episodes: Optional[int] = None
    jobs: int = 1
    run_id: str = ""

    def validate(self) -> None:
        if self.task not in TASK_NAMES:
            raise InvalidArgumentError(
                f"unknown task {self.task!r}, expected one of {', '.join(TASK_NAMES)}"
            )
        if self.method not in METHODS:
            raise InvalidArgumentError(
                f"unknown method {self.method!r}, expected one of {', '.join(METHODS)}"
            )
        if self.backend not in BACKEND_KINDS:
            raise InvalidArgumentError(
                f"unknown backend {self.backend!r}, "
                f"expected one of {', '.join(BACKEND_KINDS)}"
            )
        if self.backend == "synthetic" and self.task != "synthetic":
            raise InvalidArgumentError(
                "the synthetic backend only answers the synthetic task"
            )
        if self.task == "synthetic" and self.backend != "synthetic":
            raise InvalidArgumentError("the synthetic task needs backend=synthetic")
        if self.start < 0:
            raise InvalidArgumentError("start must be >= 0")
        if self.episodes is not None and self.episodes <= 0:
            raise InvalidArgumentError("episodes must be positive when given")
        if self.jobs < 1:
            raise InvalidArgumentError("jobs must be >= 1")
        self.search.validate()


@dataclass(frozen=True)
class ResultRow:
    method: str
    m: int
    b: int
    metric: str
    value: float
    episodes: int
    seconds: float
    digest: str = ""


@dataclass
class EpisodeResult:
    problem_id: str
    verdicts: dict[str, float]
    seconds: float
    record: RunRecord
    resumed: bool = False


@dataclass
class BenchmarkReport:
    task: str
    method: str
    config: SearchConfig
    metrics: dict[str, float]
    episodes: int
    seconds: float
    results: list[EpisodeResult]
    digest: str = ""

    def rows(self) -> list[ResultRow]:
        """One row per metric, values scaled to percentages in [0, 100]."""
        return [
            ResultRow(
                method=self.method,
                m=self.config.m,
                b=self.config.b,
                metric=metric,
                value=self.metrics[metric] * 100.0,
                episodes=self.episodes,
                seconds=self.seconds,
                digest=self.digest,
            )
            for metric in sorted(self.metrics)
        ]


def episode_seed(run_seed: int, index: int) -> int:
    return run_seed ^ index


def config_digest(task_name: str, method: str, config: SearchConfig) -> str:
    payload = json.dumps(
        {"task": task_name, "method": method, "config": config.snapshot()},
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def default_run_id(task_name: str, method: str, config: SearchConfig) -> str:
    """Stable, filename-safe identity for one benchmark invocation."""
    return f"{task_name}-{method}-{config_digest(task_name, method, config)}"


def load_existing_records(path: str | Path) -> dict[tuple[str, str], RunRecord]:
    """Index of completed episodes: (problem_id, config digest) -> record."""
    existing: dict[tuple[str, str], RunRecord] = {}
    path = Path(path)
    if not path.exists():
        return existing
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = RunRecord.from_json(line)
            digest = record.config.get("digest", "")
            existing[(record.problem_id, digest)] = record
    return existing


def best_path_from_events(events: Sequence[dict]) -> Optional[list[str]]:
    """Thought path of the highest-scoring evaluated state, earliest on ties."""
    best_path: Optional[list[str]] = None
    best_score: Optional[float] = None
    for event in events:
        if event.get("event") != "evaluate":
            continue
        score = event.get("score")
        if score is None or "path" not in event:
            continue
        if best_score is None or score > best_score:
            best_score = score
            best_path = list(event["path"])
    return best_path


def _crossword_best_metrics(
    events: Sequence[dict], truth: Sequence[str]
) -> dict[str, float]:
    path = best_path_from_events(events)
    if path is None:
        return {}
    board = board_from_thoughts(tuple(path))
    letters, words, game = score_board(board, tuple(str(w).upper() for w in truth))
    return {
        "letters_best": letters / (SIZE * SIZE),
        "words_best": words / len(SLOTS),
        "game_best": float(game),
    }


def _run_episode(
    task: TaskSpec,
    problem: Problem,
    method: str,
    backend: Backend,
    config: SearchConfig,
    cache: Optional[ResponseCache],
    digest: str,
) -> EpisodeResult:
    transcript = Transcript()
    started = time.perf_counter()
    exhausted = False
    backend_error = False
    output = ""
    try:
        result = run_method(
            method, task, problem.input, backend, config, transcript, cache
        )
        output = result.final_output
    except SearchExhaustedError as exc:
        exhausted = True
        if exc.best_state is not None:
            output = task.render_output(exc.best_state)
        transcript.emit("note", text="search exhausted", fallback_output=output)
    except BackendUnavailableError as exc:
        backend_error = True
        transcript.emit("note", text=f"backend unavailable: {exc}")
    seconds = time.perf_counter() - started

    verdicts = dict(task.check_success(output, problem.truth))
    if exhausted:
        verdicts["exhausted"] = 1.0
    if backend_error:
        verdicts["backend_error"] = 1.0
    events = transcript.record_events()
    if task.name == "crosswords" and problem.truth is not None:
        verdicts.update(_crossword_best_metrics(events, problem.truth))

    record = RunRecord(
        config={"method": method, "digest": digest, "search": config.snapshot()},
        task=task.name,
        problem_id=problem.problem_id,
        events=events,
        final_output=output,
        verdicts=verdicts,
    )
    return EpisodeResult(
        problem_id=problem.problem_id,
        verdicts=verdicts,
        seconds=seconds,
        record=record,
    )


def run_benchmark(
    task: TaskSpec,
    problems: Sequence[Problem],
    method: str,
    backend_factory: Callable[[int], Backend],
    config: SearchConfig,
    *,
    cache: Optional[ResponseCache] = None,
    record_path: Optional[str | Path] = None,
    run_seed: int = 0,
    jobs: int = 1,
    label: Optional[str] = None,
) -> BenchmarkReport:
    """Run one method over a problem list and aggregate verdicts.

    backend_factory receives each episode's seed (run_seed XOR episode
    index), so stochastic backends are reproducible per episode while a
    shared HTTP backend can simply ignore it. Episodes whose records are
    already present in record_path are not rerun. Backend failures mark
    their episode failed and the run continues, unless more than half of
    all episodes fail, which aborts the whole run.
    """
    config.validate()
    if not problems:
        raise InvalidArgumentError("no episodes selected: the problem list is empty")
    base = replace(config, seed=run_seed)
    digest = config_digest(task.name, method, base)
    existing = load_existing_records(record_path) if record_path else {}
    write_lock = threading.Lock()

    def append_record(record: RunRecord) -> None:
        if record_path is None:
            return
        with write_lock:
            with open(record_path, "a", encoding="utf-8") as handle:
                handle.write(record.to_json() + "\n")

    def run_one(index: int, problem: Problem) -> EpisodeResult:
        key = (problem.problem_id, digest)
        if key in existing:
            record = existing[key]
            return EpisodeResult(
                problem_id=problem.problem_id,
                verdicts=dict(record.verdicts),
                seconds=0.0,
                record=record,
                resumed=True,
            )
        seed = episode_seed(run_seed, index)
        episode_config = replace(config, seed=seed)
        result = _run_episode(
            task, problem, method, backend_factory(seed), episode_config, cache, digest
        )
        append_record(result.record)
        return result

    total = len(problems)

    def check_abort(failures: int) -> None:
        if failures * 2 > total:
            raise RunAbortedError(
                f"aborted: {failures} of {total} episodes failed on backend "
                "errors; completed episode records were kept"
            )

    failed = 0
    if jobs <= 1:
        results = []
        for i, p in enumerate(problems):
            result = run_one(i, p)
            results.append(result)
            failed += int(result.verdicts.get("backend_error", 0.0) == 1.0)
            check_abort(failed)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(run_one, i, p) for i, p in enumerate(problems)
            ]
            results = [f.result() for f in futures]
        failed = sum(
            int(r.verdicts.get("backend_error", 0.0) == 1.0) for r in results
        )
        check_abort(failed)

    keys: set[str] = set()
    for result in results:
        keys.update(result.verdicts)
    metrics = {
        key: math.fsum(r.verdicts.get(key, 0.0) for r in results) / len(results)
        for key in keys
    }
    return BenchmarkReport(
        task=task.name,
        method=label or method,
        config=base,
        metrics=metrics,
        episodes=len(results),
        seconds=math.fsum(r.seconds for r in results),
        results=results,
        digest=digest,
    )


# grid order: (luq, ugs) = (off, off), (on, off), (off, on), (on, on)
ABLATION_GRID = (
    (False, False),
    (True, False),
    (False, True),
    (True, True),
)


def ablation_label(method: str, luq: bool, ugs: bool) -> str:
    luq_tag = "on" if luq else "off"
    ugs_tag = "on" if ugs else "off"
    return f"{method}[luq={luq_tag},ugs={ugs_tag}]"


def run_ablation(
    task: TaskSpec,
    problems: Sequence[Problem],
    method: str,
    backend_factory: Callable[[int], Backend],
    config: SearchConfig,
    **kwargs,
) -> list[BenchmarkReport]:
    """The 2x2 grid over the uncertainty switches, one report per cell."""
    reports = []
    for luq, ugs in ABLATION_GRID:
        cell = replace(config, luq_enabled=luq, ugs_enabled=ugs)
        reports.append(
            run_benchmark(
                task,
                problems,
                method,
                backend_factory,
                cell,
                label=ablation_label(method, luq, ugs),
                **kwargs,
            )
        )
    return reports


def run_m_sweep(
    task: TaskSpec,
    problems: Sequence[Problem],
    method: str,
    backend_factory: Callable[[int], Backend],
    config: SearchConfig,
    m_values: Sequence[int],
    **kwargs,
) -> list[BenchmarkReport]:
    """One report per sample count m, all else held fixed."""
    if not m_values:
        raise InvalidArgumentError("m_values must not be empty")
    reports = []
    for m in m_values:
        reports.append(
            run_benchmark(
                task,
                problems,
                method,
                backend_factory,
                replace(config, m=m),
                **kwargs,
            )
        )
    return reports


def synthetic_setup(
    benchmark: TrapBenchmark, episodes: int
) -> tuple[TaskSpec, list[Problem], Callable[[int], Backend]]:
    """Task, problems and per-episode backend factory for a trap benchmark.

    Each episode replays the same tree with a freshly seeded value oracle,
    so the success rate estimates the method's probability of staying on
    the true path.
    """
    task = benchmark.task()
    problems = [
        Problem(problem_id=f"synthetic/{i}", input="root", truth=benchmark.truth)
        for i in range(episodes)
    ]
    return task, problems, benchmark.backend


def report_rows(reports: Sequence[BenchmarkReport]) -> list[ResultRow]:
    rows: list[ResultRow] = []
    for report in reports:
        rows.extend(report.rows())
    return rows


def emit_results(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    """Rows rendered as CSV or a markdown table, fixed column order."""
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    row.m,
                    row.b,
                    row.metric,
                    str(row.value),
                    row.episodes,
                    f"{row.seconds:.3f}",
                ]
            )
        return buffer.getvalue()
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(RESULT_COLUMNS) + " |",
            "| " + " | ".join("---" for _ in RESULT_COLUMNS) + " |",
        ]
        for row in rows:
            lines.append(
                "| "
                + " | ".join(
                    [
                        row.method,
                        str(row.m),
                        str(row.b),
                        row.metric,
                        str(row.value),
                        str(row.episodes),
                        f"{row.seconds:.3f}",
                    ]
                )
                + " |"
            )
        return "\n".join(lines) + "\n"
    raise InvalidArgumentError(f"unknown format {fmt!r}, expected csv or markdown")


def two_proportion_z(
    successes_a: int, n_a: int, successes_b: int, n_b: int
) -> tuple[float, float]:
    """z statistic and two-sided p-value for H0: the two rates are equal."""
    if min(n_a, n_b) <= 0:
        raise ValueError("both sample sizes must be positive")
    pooled = (successes_a + successes_b) / (n_a + n_b)
    if pooled <= 0.0 or pooled >= 1.0:
        return 0.0, 1.0
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b))
    z = (successes_a / n_a - successes_b / n_b) / se
    p = 2.0 * (1.0 - NormalDist().cdf(abs(z)))
    return z, p
