"""Command line front end.

Subcommands: run (one method over a dataset), ablate (the 2x2 uncertainty
switch grid), sweep-m (vary the sample count), check (exact answer
verification). Options can come from an INI config file via --config;
explicit command line flags win over the file, which wins over built-in
defaults. Exit codes: 0 success, 1 run or check failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Callable, Optional

from .backends import (
    Backend,
    HttpBackend,
    ResponseCache,
    ScriptedBackend,
)
from .harness import (
    RunAbortedError,
    RunConfig,
    default_run_id,
    emit_results,
    report_rows,
    run_ablation,
    run_benchmark,
    run_m_sweep,
    synthetic_setup,
)
from .model import BackendUnavailableError, InvalidArgumentError, SearchConfig
from .search import METHODS
from .tasks import (
    CrosswordsTask,
    TASK_NAMES,
    brute_force_solvable,
    build_trap_benchmark,
    check_solution,
    load_crosswords_json,
    load_game24_csv,
    load_problems,
    make_task,
    solution_verdicts,
)

TASK_DEFAULT_METHOD = {
    "game24": "tout_bfs",
    "crosswords": "tout_dfs",
    "synthetic": "tout_bfs",
}
TASK_DEFAULT_STEPS = {"game24": 3, "crosswords": 10}

SEARCH_BOOL = ("luq_enabled", "ugs_enabled", "two_pass")
SEARCH_FLOAT = ("t_min", "t_max", "v_th", "u_th", "epsilon")


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("search")
    group.add_argument("--k", type=int, default=None, help="thoughts per expansion")
    group.add_argument("--b", type=int, default=None, help="beam width")
    group.add_argument(
        "--steps", dest="T", type=int, default=None, help="search depth in steps"
    )
    group.add_argument("--m", type=int, default=None, help="value samples per state")
    group.add_argument("--t-min", type=float, default=None)
    group.add_argument("--t-max", type=float, default=None)
    group.add_argument("--v-th", type=float, default=None, help="value floor (dfs)")
    group.add_argument(
        "--u-th", type=float, default=None, help="uncertainty ceiling (dfs)"
    )
    group.add_argument("--epsilon", type=float, default=None)
    group.add_argument("--max-outputs", type=int, default=None)
    group.add_argument("--eval-workers", type=int, default=None)
    group.add_argument(
        "--no-luq",
        dest="luq_enabled",
        action="store_const",
        const=False,
        default=None,
        help="single sample per state, uncertainty pinned to zero",
    )
    group.add_argument(
        "--no-ugs",
        dest="ugs_enabled",
        action="store_const",
        const=False,
        default=None,
        help="select by value instead of value/(uncertainty+epsilon)",
    )
    group.add_argument(
        "--two-pass",
        dest="two_pass",
        action="store_const",
        const=True,
        default=None,
        help="separate sampling passes for value and uncertainty",
    )


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--task", choices=TASK_NAMES, default=None)
    parser.add_argument("--dataset", default=None, help="dataset file path")
    parser.add_argument("--method", choices=METHODS, default=None)
    parser.add_argument(
        "--backend", choices=("http", "scripted", "synthetic"), default=None
    )
    parser.add_argument("--episodes", type=int, default=None)
    parser.add_argument(
        "--start", type=int, default=None, help="dataset offset of the first problem"
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    parser.add_argument("--records", default=None, help="episode record JSONL path")
    parser.add_argument(
        "--out-dir",
        default=None,
        help="write transcripts/<run-id>.jsonl plus results/<run-id>.csv and .md here",
    )
    parser.add_argument("--run-id", default=None, help="override the derived run id")
    parser.add_argument("--cache-dir", default=None)
    parser.add_argument("--format", choices=("csv", "markdown"), default=None)
    parser.add_argument("--out", default=None, help="write the table here, not stdout")
    parser.add_argument("--depth", type=int, default=None, help="synthetic tree depth")
    parser.add_argument("--api-base", default=None)
    parser.add_argument("--api-key", default=None)
    parser.add_argument("--model", default=None)
    parser.add_argument("--script", default=None, help="scripted backend JSON file")
    _add_search_flags(parser)


def load_ini(path: Optional[str]) -> Optional[configparser.ConfigParser]:
    if path is None:
        return None
    ini = configparser.ConfigParser()
    read = ini.read(path)
    if not read:
        raise InvalidArgumentError(f"config file not found: {path}")
    return ini


def _opt(
    args: argparse.Namespace,
    ini: Optional[configparser.ConfigParser],
    key: str,
    parse: Callable[[str], Any],
    default: Any,
) -> Any:
    value = getattr(args, key, None)
    if value is not None:
        return value
    if ini is not None and ini.has_option("run", key):
        return parse(ini.get("run", key))
    return default


def build_search_values(
    args: argparse.Namespace, ini: Optional[configparser.ConfigParser]
) -> dict[str, Any]:
    """Explicit search settings from flags and the [search] INI section."""
    values: dict[str, Any] = {}
    for field in dataclasses.fields(SearchConfig):
        name = field.name
        ini_key = "steps" if name == "T" else name
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            values[name] = cli_value
        elif ini is not None and ini.has_option("search", ini_key):
            if name in SEARCH_BOOL:
                values[name] = ini.getboolean("search", ini_key)
            elif name in SEARCH_FLOAT:
                values[name] = ini.getfloat("search", ini_key)
            else:
                values[name] = ini.getint("search", ini_key)
    return values


def load_script(path: str | Path) -> tuple[dict[tuple[str, int, int], str], str]:
    """Scripted backend table from JSON: "digest:temp_millis:index" -> text."""
    with open(path, encoding="utf-8") as handle:
        data = json.load(handle)
    default = data.pop("__default__", "")
    script: dict[tuple[str, int, int], str] = {}
    for key, text in data.items():
        try:
            digest, tq, index = key.rsplit(":", 2)
            script[(digest, int(tq), int(index))] = text
        except ValueError:
            raise InvalidArgumentError(f"bad script key {key!r}")
    return script, default


@dataclasses.dataclass
class _Invocation:
    """Everything a run-style subcommand needs, resolved from flags + INI."""

    run: RunConfig
    task: Any
    problems: list
    factory: Callable[[int], Backend]
    run_kwargs: dict[str, Any]
    fmt: str
    out: Optional[str]
    run_id: str


def _setup(args: argparse.Namespace, id_suffix: str = "") -> _Invocation:
    ini = load_ini(args.config)
    task_name = _opt(args, ini, "task", str, None)
    if task_name is None:
        raise InvalidArgumentError("--task is required (or set task in the config)")
    if task_name not in TASK_NAMES:
        raise InvalidArgumentError(f"unknown task {task_name!r}")
    method = _opt(args, ini, "method", str, TASK_DEFAULT_METHOD[task_name])
    seed = _opt(args, ini, "seed", int, 0)
    episodes = _opt(args, ini, "episodes", int, None)
    start = _opt(args, ini, "start", int, 0)
    jobs = _opt(args, ini, "jobs", int, 1)
    fmt = _opt(args, ini, "format", str, "csv")
    records = _opt(args, ini, "records", str, None)
    cache_dir = _opt(args, ini, "cache_dir", str, None)
    out = _opt(args, ini, "out", str, None)
    out_dir = _opt(args, ini, "out_dir", str, None)
    dataset = _opt(args, ini, "dataset", str, None)

    values = build_search_values(args, ini)
    if task_name == "synthetic":
        depth = _opt(args, ini, "depth", int, 3)
        values.setdefault("T", depth)
        backend_kind = _opt(args, ini, "backend", str, "synthetic")
    else:
        values.setdefault("T", TASK_DEFAULT_STEPS[task_name])
        backend_kind = _opt(args, ini, "backend", str, "http")
    values["seed"] = seed
    config = dataclasses.replace(SearchConfig(), **values)

    run = RunConfig(
        task=task_name,
        method=method,
        backend=backend_kind,
        search=config,
        dataset=Path(dataset) if dataset else None,
        out_dir=Path(out_dir) if out_dir else None,
        start=start,
        episodes=episodes,
        jobs=jobs,
        run_id=_opt(args, ini, "run_id", str, "") or "",
    )
    run.validate()

    if task_name == "synthetic":
        benchmark = build_trap_benchmark(depth=_opt(args, ini, "depth", int, 3))
        task, problems, factory = synthetic_setup(benchmark, episodes or 100)
    else:
        if run.dataset is None:
            raise InvalidArgumentError(f"--dataset is required for task {task_name}")
        problems = load_problems(task_name, run.dataset)
        stop = start + episodes if episodes is not None else None
        problems = problems[start:stop]
        if not problems:
            raise InvalidArgumentError("no problems selected, check --start/--episodes")
        task = make_task(task_name)
        factory = _constant(_build_backend(backend_kind, args, ini))

    run_id = run.run_id or default_run_id(task_name, method, config) + id_suffix
    if run.out_dir is not None and records is None:
        transcripts = run.out_dir / "transcripts"
        transcripts.mkdir(parents=True, exist_ok=True)
        records = str(transcripts / f"{run_id}.jsonl")

    cache = ResponseCache(cache_dir) if cache_dir else None
    run_kwargs = dict(cache=cache, record_path=records, run_seed=seed, jobs=jobs)
    return _Invocation(
        run=run,
        task=task,
        problems=problems,
        factory=factory,
        run_kwargs=run_kwargs,
        fmt=fmt,
        out=out,
        run_id=run_id,
    )


def _deliver_rows(inv: _Invocation, rows) -> None:
    """stdout/--out in the chosen format, plus both files under --out-dir."""
    _deliver(emit_results(rows, fmt=inv.fmt), inv.out)
    if inv.run.out_dir is not None:
        results_dir = inv.run.out_dir / "results"
        results_dir.mkdir(parents=True, exist_ok=True)
        (results_dir / f"{inv.run_id}.csv").write_text(
            emit_results(rows, fmt="csv"), encoding="utf-8"
        )
        (results_dir / f"{inv.run_id}.md").write_text(
            emit_results(rows, fmt="markdown"), encoding="utf-8"
        )


def _constant(backend: Backend) -> Callable[[int], Backend]:
    def factory(seed: int) -> Backend:
        return backend

    return factory


def _build_backend(
    kind: str, args: argparse.Namespace, ini: Optional[configparser.ConfigParser]
) -> Backend:
    if kind == "http":
        return HttpBackend(
            base_url=_opt(args, ini, "api_base", str, None),
            api_key=_opt(args, ini, "api_key", str, None),
            model=_opt(args, ini, "model", str, None),
        )
    if kind == "scripted":
        script_path = _opt(args, ini, "script", str, None)
        if script_path is None:
            raise InvalidArgumentError("--script is required for the scripted backend")
        script, default = load_script(script_path)
        return ScriptedBackend(script, default=default)
    raise InvalidArgumentError(
        f"backend {kind!r} is only valid for the synthetic task"
        if kind == "synthetic"
        else f"unknown backend {kind!r}"
    )


def _deliver(table: str, out: Optional[str]) -> None:
    if out is None:
        print(table, end="" if table.endswith("\n") else "\n")
    else:
        Path(out).write_text(table, encoding="utf-8")


def cmd_run(args: argparse.Namespace) -> int:
    inv = _setup(args)
    report = run_benchmark(
        inv.task, inv.problems, inv.run.method, inv.factory, inv.run.search,
        **inv.run_kwargs,
    )
    _deliver_rows(inv, report.rows())
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    inv = _setup(args, id_suffix="-ablate")
    reports = run_ablation(
        inv.task, inv.problems, inv.run.method, inv.factory, inv.run.search,
        **inv.run_kwargs,
    )
    _deliver_rows(inv, report_rows(reports))
    return 0


def cmd_sweep_m(args: argparse.Namespace) -> int:
    inv = _setup(args, id_suffix="-sweepm")
    try:
        m_values = [int(tok) for tok in args.m_values.split(",") if tok.strip()]
    except ValueError:
        raise InvalidArgumentError(f"bad --m-values {args.m_values!r}")
    if not m_values:
        raise InvalidArgumentError("--m-values is empty")
    reports = run_m_sweep(
        inv.task, inv.problems, inv.run.method, inv.factory, inv.run.search,
        m_values, **inv.run_kwargs,
    )
    _deliver_rows(inv, report_rows(reports))
    return 0


def _check_dataset(path: str) -> int:
    """Oracle audit of a whole puzzle CSV: solve each, verify each witness.

    Exits clean only when every puzzle is solvable and every witness passes
    the exact checker; that makes the command a dataset sanity gate.
    """
    failures = 0
    puzzles = load_game24_csv(path)
    for puzzle in puzzles:
        witness = brute_force_solvable(list(puzzle.numbers))
        if witness is None:
            print(f"{puzzle.index},{puzzle.text},unsolvable")
            failures += 1
        elif not check_solution(witness, puzzle):
            print(f"{puzzle.index},{puzzle.text},witness_rejected,{witness}")
            failures += 1
        else:
            print(f"{puzzle.index},{puzzle.text},ok,{witness}")
    print(f"checked {len(puzzles)} puzzles, {failures} failures")
    return 0 if failures == 0 else 1


def cmd_check(args: argparse.Namespace) -> int:
    if args.task == "game24" and args.dataset is not None:
        return _check_dataset(args.dataset)
    if args.input is None:
        raise InvalidArgumentError("provide --input (or --dataset for game24)")
    if args.answer is None and args.answer_file is None and not args.solve:
        raise InvalidArgumentError("provide --answer, --answer-file or --solve")
    answer = args.answer
    if answer is None and args.answer_file is not None:
        answer = Path(args.answer_file).read_text(encoding="utf-8")

    if args.task == "game24":
        if args.solve and answer is None:
            witness = brute_force_solvable([int(t) for t in args.input.split()])
            if witness is None:
                print("unsolvable")
                return 1
            print(witness)
            return 0
        verdicts = solution_verdicts(answer, args.input)
    elif args.task == "crosswords":
        puzzles = load_crosswords_json(args.input)
        if not (0 <= args.index < len(puzzles)):
            raise InvalidArgumentError(
                f"--index {args.index} out of range for {len(puzzles)} puzzles"
            )
        if answer is None:
            raise InvalidArgumentError("--solve does not apply to crosswords")
        task = CrosswordsTask()
        verdicts = task.check_success(answer, list(puzzles[args.index].answers))
    else:
        raise InvalidArgumentError("check supports game24 and crosswords")

    print(json.dumps(verdicts, sort_keys=True))
    return 0 if verdicts.get("success") == 1.0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tout",
        description="Uncertainty-aware tree search over language-model reasoning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one method over a dataset")
    _add_run_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ablate = sub.add_parser("ablate", help="2x2 grid over the uncertainty switches")
    _add_run_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_sweep = sub.add_parser("sweep-m", help="vary the sample count m")
    _add_run_flags(p_sweep)
    p_sweep.add_argument(
        "--m-values", default="1,2,5,10,20", help="comma-separated m values"
    )
    p_sweep.set_defaults(func=cmd_sweep_m)

    p_check = sub.add_parser("check", help="verify an answer with the exact checker")
    p_check.add_argument("--task", choices=("game24", "crosswords"), required=True)
    p_check.add_argument(
        "--input", default=None, help="game24 puzzle text or crosswords JSON path"
    )
    p_check.add_argument(
        "--dataset", default=None, help="game24: oracle-audit every puzzle in this CSV"
    )
    p_check.add_argument("--answer", default=None)
    p_check.add_argument("--answer-file", default=None)
    p_check.add_argument("--index", type=int, default=0, help="puzzle index in the file")
    p_check.add_argument(
        "--solve", action="store_true", help="game24: search for a witness instead"
    )
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BackendUnavailableError, RunAbortedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
