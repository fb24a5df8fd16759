"""Command-line front end: validate / eval / optimize / compare.

Exit codes: 0 ok, 1 domain error (invalid model, infeasible sequence,
solver failure), 2 usage error (bad arguments, missing files).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .antipatterns import Thresholds, detect
from .model import Architecture, ModelFormatError, load, validate
from .moea import Evaluator, ParetoFront, SearchConfig, front_to_json_dict, run
from .pareto import hypervolume
from .perfqn import SolverError
from .refactoring import (
    DEFAULT_BRF,
    ActionKind,
    InfeasibleActionError,
    RefactoringSequence,
    sequence_from_records,
    sequence_to_text,
)

log = logging.getLogger("archopt.cli")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

SEED_ENV_VAR = "ARCHOPT_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str
    output_dir: str = "archopt-out"
    algorithm: str = "nsga2"
    seed: int = 0
    population: int = 32
    archive_size: int = 32
    sequence_length: int = 4
    crossover_prob: float = 0.8
    mutation_prob: float | None = None
    divisions: int = 8
    budget_seconds: float | None = None
    max_evaluations: int | None = None
    use_pas_objective: bool = True
    allow_new_nodes: bool = True
    workers: int = 1
    brf: dict[ActionKind, float] = field(default_factory=lambda: dict(DEFAULT_BRF))
    thresholds: Thresholds = field(default_factory=Thresholds)
    # compare-only grids; fall back to the scalar fields when absent
    algorithms: list[str] | None = None
    budgets_seconds: list[float] | None = None
    budgets_evaluations: list[int] | None = None
    seeds: list[int] | None = None

    def search_config(self, algorithm=None, seed=None, budget_seconds=None, max_evaluations=None, use_pas=None):
        return SearchConfig(
            algorithm=algorithm or self.algorithm,
            seed=self.seed if seed is None else seed,
            population=self.population,
            archive_size=self.archive_size,
            sequence_length=self.sequence_length,
            crossover_prob=self.crossover_prob,
            mutation_prob=self.mutation_prob,
            divisions=self.divisions,
            budget_seconds=self.budget_seconds if budget_seconds is None else budget_seconds,
            max_evaluations=self.max_evaluations if max_evaluations is None else max_evaluations,
            use_pas_objective=self.use_pas_objective if use_pas is None else use_pas,
            allow_new_nodes=self.allow_new_nodes,
            workers=self.workers,
            brf=self.brf,
            thresholds=self.thresholds,
        )


def _parse_brf(raw: dict) -> dict[ActionKind, float]:
    table = dict(DEFAULT_BRF)
    for key, value in raw.items():
        try:
            kind = ActionKind(key)
        except ValueError as exc:
            raise ConfigError(f"brf: unknown action kind '{key}'") from exc
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError(f"brf.{key}: factor must be a positive number")
        table[kind] = float(value)
    return table


def load_config(path: str) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be an object")
    if "model" not in raw:
        raise ConfigError(f"{path}: required key 'model' is missing")

    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")

    kwargs = dict(raw)
    if "brf" in kwargs:
        kwargs["brf"] = _parse_brf(kwargs["brf"])
    if "thresholds" in kwargs:
        kwargs["thresholds"] = Thresholds(**kwargs["thresholds"])
    config = RunConfig(**kwargs)

    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        config.seed = int(env_seed)
    if config.budget_seconds is None and config.max_evaluations is None \
            and config.budgets_seconds is None and config.budgets_evaluations is None:
        raise ConfigError(f"{path}: set budget_seconds and/or max_evaluations")
    return config


def _resolve_model_path(path: str) -> Path:
    """Accepts a file path or ``casestudy:small`` / ``casestudy:large``."""
    if path.startswith("casestudy:"):
        from . import casestudies

        return casestudies.path(path.split(":", 1)[1])
    return Path(path)


def _load_model(path: str) -> Architecture:
    return load(_resolve_model_path(path).read_text())


def _load_sequence(path: str) -> RefactoringSequence:
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise ConfigError(f"{path}: sequence file must be a JSON array of action records")
    return sequence_from_records(records)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    text = _resolve_model_path(args.model).read_text()
    try:
        arch = load(text, check=False)
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    violations = validate(arch)
    for violation in violations:
        print(violation)
    if violations:
        return EXIT_DOMAIN
    print(f"ok: {args.model} is a valid architecture")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _performance_report(perf) -> dict:
    return {
        "scenarios": {
            cid: {
                "throughput": float(perf.throughput[j]),
                "response_time": float(perf.response_time[j]),
            }
            for j, cid in enumerate(perf.class_ids)
        },
        "utilization": {sid: float(perf.utilization[k]) for k, sid in enumerate(perf.station_ids)},
        "delay_only": list(perf.delay_only),
    }


def cmd_eval(args) -> int:
    arch = _load_model(args.model)
    config = load_config(args.config) if args.config else None
    brf = config.brf if config else dict(DEFAULT_BRF)
    thresholds = config.thresholds if config else Thresholds()

    search = SearchConfig(max_evaluations=0, brf=brf, thresholds=thresholds)
    evaluator = Evaluator(arch, search)
    if args.sequence:
        seq = _load_sequence(args.sequence)
    else:
        seq = RefactoringSequence(())
    individual = evaluator.evaluate(seq)
    if not individual.valid:
        print("error: candidate architecture could not be evaluated", file=sys.stderr)
        return EXIT_DOMAIN

    folded_perf = evaluator.initial_perf if not args.sequence else None
    if folded_perf is None:
        from .perfqn import solve_amva, to_qn
        from .refactoring import apply_sequence

        folded_perf = solve_amva(to_qn(apply_sequence(arch, seq)))

    report = {
        "model": args.model,
        "sequence": sequence_to_text(seq),
        "perfQ": individual.metrics.perfq,
        "reliability": individual.metrics.reliability,
        "pas": individual.metrics.pas,
        "distance": individual.metrics.distance,
        "performance": _performance_report(folded_perf),
    }
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(f"model:       {args.model}")
        print(f"sequence:    {report['sequence'] or '(none)'}")
        print(f"perfQ:       {report['perfQ']:.6f}")
        print(f"reliability: {report['reliability']:.6f}")
        print(f"antipatterns: {report['pas']}")
        print(f"distance:    {report['distance']:.6f}")
        print("per-scenario performance:")
        for cid, row in report["performance"]["scenarios"].items():
            print(f"  {cid}: X={row['throughput']:.6f}/s R={row['response_time']:.6f}s")
        print("node utilization:")
        for sid, util in report["performance"]["utilization"].items():
            print(f"  {sid}: {util:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

FRONT_CSV_COLUMNS = [
    "run_id", "algorithm", "seed", "solution_id", "perfQ", "reliability", "pas", "distance", "actions",
]


def front_csv_text(front: ParetoFront) -> str:
    run_id = _run_id_from_meta(front.metadata)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(FRONT_CSV_COLUMNS)
    for idx, ind in enumerate(front.individuals):
        writer.writerow(
            [
                run_id,
                front.metadata["algorithm"],
                front.metadata["seed"],
                f"s{idx:04d}",
                repr(float(ind.metrics.perfq)),
                repr(float(ind.metrics.reliability)),
                ind.metrics.pas,
                repr(float(ind.metrics.distance)),
                sequence_to_text(ind.sequence),
            ]
        )
    return buffer.getvalue()


def _run_id_from_meta(meta: dict) -> str:
    budget = []
    if meta.get("budget_seconds") is not None:
        budget.append(f"{meta['budget_seconds']:g}s")
    if meta.get("max_evaluations") is not None:
        budget.append(f"{meta['max_evaluations']}ev")
    mode = "4obj" if meta.get("use_pas_objective", True) else "3obj"
    return f"{meta['algorithm']}-{'-'.join(budget)}-{mode}-seed{meta['seed']}"


def write_front(front: ParetoFront, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "front.csv"
    json_path = out_dir / "front.json"
    csv_path.write_text(front_csv_text(front))
    json_path.write_text(json.dumps(front_to_json_dict(front), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def cmd_optimize(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config.workers = args.workers
    arch = _load_model(config.model)
    front = run(arch, config.search_config())
    csv_path, json_path = write_front(front, Path(config.output_dir))
    meta = front.metadata
    print(
        f"{meta['algorithm']} seed={meta['seed']}: front size {len(front.individuals)}, "
        f"{meta['evaluations_used']} evaluations, {meta['generations']} generations, "
        f"{meta['wall_time_seconds']:.2f}s"
    )
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

COMPARE_COLUMNS = [
    "algorithm", "budget", "pas_objective", "seed",
    "hypervolume", "front_size", "best_perfQ", "best_reliability", "evaluations",
]


def _budget_cells(config: RunConfig) -> list[tuple[str, float | None, int | None]]:
    cells: list[tuple[str, float | None, int | None]] = []
    if config.budgets_seconds:
        cells.extend((f"{b:g}s", float(b), None) for b in config.budgets_seconds)
    if config.budgets_evaluations:
        cells.extend((f"{b}ev", None, int(b)) for b in config.budgets_evaluations)
    if not cells:
        cells.append((_budget_label(config), config.budget_seconds, config.max_evaluations))
    return cells


def _budget_label(config: RunConfig) -> str:
    parts = []
    if config.budget_seconds is not None:
        parts.append(f"{config.budget_seconds:g}s")
    if config.max_evaluations is not None:
        parts.append(f"{config.max_evaluations}ev")
    return "-".join(parts) or "none"


def _front_points(front: ParetoFront) -> np.ndarray:
    rows = [
        (-ind.metrics.perfq, -ind.metrics.reliability, float(ind.metrics.pas), ind.metrics.distance)
        for ind in front.individuals
        if ind.valid
    ]
    return np.array(rows) if rows else np.empty((0, 4))


def _reference_point(fronts: list[ParetoFront]) -> np.ndarray:
    nonempty = [p for p in (_front_points(f) for f in fronts) if p.size]
    if not nonempty:
        raise ConfigError("no run produced a valid individual; cannot build a reference point")
    stacked = np.vstack(nonempty)
    worst = stacked.max(axis=0)
    best = stacked.min(axis=0)
    span = worst - best
    margin = np.where(span > 0, 0.1 * span, 0.1 * np.maximum(1.0, np.abs(worst)))
    return worst + margin


def cmd_compare(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config.workers = args.workers
    arch = _load_model(config.model)
    algorithms = config.algorithms or [config.algorithm]
    seeds = config.seeds or [config.seed]
    cells = _budget_cells(config)
    out_dir = Path(config.output_dir)

    runs: list[tuple[dict, ParetoFront]] = []
    for algorithm in algorithms:
        for budget_label, budget_s, budget_ev in cells:
            for use_pas in (True, False):
                for seed in seeds:
                    search = config.search_config(
                        algorithm=algorithm, seed=seed,
                        budget_seconds=budget_s, max_evaluations=budget_ev, use_pas=use_pas,
                    )
                    front = run(arch, search)
                    tag = _run_id_from_meta(front.metadata)
                    write_front(front, out_dir / "runs" / tag)
                    key = {
                        "algorithm": algorithm,
                        "budget": budget_label,
                        "pas_objective": "with" if use_pas else "without",
                        "seed": seed,
                    }
                    runs.append((key, front))

    fronts = [front for _, front in runs]
    reference = _reference_point(fronts)
    rows = []
    for key, front in runs:
        points = _front_points(front)
        best_perfq = max((ind.metrics.perfq for ind in front.individuals if ind.valid), default=float("nan"))
        best_rel = max((ind.metrics.reliability for ind in front.individuals if ind.valid), default=float("nan"))
        rows.append(
            {
                **key,
                "hypervolume": hypervolume(points, reference) if points.size else 0.0,
                "front_size": len(front.individuals),
                "best_perfQ": best_perfq,
                "best_reliability": best_rel,
                "evaluations": front.metadata["evaluations_used"],
            }
        )

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "compare.csv", "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    summary = _summarize(rows)
    with open(out_dir / "summary.csv", "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(summary[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(summary)

    print(f"reference point: {[round(float(v), 6) for v in reference]}")
    header = f"{'algorithm':<10} {'budget':<8} {'pas':<8} {'median HV':>12} {'median evals':>13} {'best perfQ':>11}"
    print(header)
    print("-" * len(header))
    for row in summary:
        print(
            f"{row['algorithm']:<10} {row['budget']:<8} {row['pas_objective']:<8} "
            f"{row['median_hypervolume']:>12.6f} {row['median_evaluations']:>13.1f} {row['median_best_perfQ']:>11.6f}"
        )
    if args.gnuplot:
        _write_gnuplot(out_dir / "compare.dat", summary)
        print(f"wrote {out_dir / 'compare.dat'}")
    print(f"wrote {out_dir / 'compare.csv'} and {out_dir / 'summary.csv'}")
    return EXIT_OK


def _summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["algorithm"], row["budget"], row["pas_objective"]), []).append(row)
    summary = []
    for (algorithm, budget, pas_objective), members in groups.items():
        summary.append(
            {
                "algorithm": algorithm,
                "budget": budget,
                "pas_objective": pas_objective,
                "median_hypervolume": statistics.median(m["hypervolume"] for m in members),
                "median_front_size": statistics.median(m["front_size"] for m in members),
                "median_best_perfQ": statistics.median(m["best_perfQ"] for m in members),
                "median_best_reliability": statistics.median(m["best_reliability"] for m in members),
                "median_evaluations": statistics.median(m["evaluations"] for m in members),
                "seeds": len(members),
            }
        )
    return summary


def _write_gnuplot(path: Path, summary: list[dict]) -> None:
    lines = ["# algorithm budget pas_objective median_hv median_front_size median_best_perfq median_evaluations"]
    for row in summary:
        lines.append(
            f"{row['algorithm']} {row['budget']} {row['pas_objective']} "
            f"{row['median_hypervolume']} {row['median_front_size']} "
            f"{row['median_best_perfQ']} {row['median_evaluations']}"
        )
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="archopt",
        description="Search refactoring plans that trade off performance, reliability, antipatterns and change size.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="enable info logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check an architecture document")
    p_validate.add_argument("model", help="architecture JSON file")

    p_eval = sub.add_parser("eval", help="evaluate one architecture (optionally after a refactoring sequence)")
    p_eval.add_argument("model", help="architecture JSON file")
    p_eval.add_argument("sequence", nargs="?", help="refactoring sequence JSON file")
    p_eval.add_argument("--config", help="run config JSON (for brf table / thresholds)")
    p_eval.add_argument("--json", action="store_true", help="machine-readable output")

    p_opt = sub.add_parser("optimize", help="run one optimization and write front.csv / front.json")
    p_opt.add_argument("--config", required=True, help="run config JSON file")
    p_opt.add_argument("--workers", type=int, help="parallel candidate evaluation (default from config, 1)")

    p_cmp = sub.add_parser("compare", help="algorithm x budget x seed grid, with and without the antipattern objective")
    p_cmp.add_argument("--config", required=True, help="run config JSON file with algorithms/budgets/seeds lists")
    p_cmp.add_argument("--gnuplot", action="store_true", help="also write plain columnar compare.dat")
    p_cmp.add_argument("--workers", type=int, help="parallel candidate evaluation (default from config, 1)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"validate": cmd_validate, "eval": cmd_eval, "optimize": cmd_optimize, "compare": cmd_compare}
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ModelFormatError, InfeasibleActionError, SolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
