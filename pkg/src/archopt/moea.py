"""Evolutionary search over refactoring sequences.

Genotype: fixed-length action sequence.  Objectives, all minimized:
(-perfQ, -reliability, antipattern count, distance); the antipattern
objective can be dropped to run a 3-objective search.  Three algorithms
share the evaluation machinery: NSGA-II, SPEA2 and PESA-II.  The returned
front is the non-dominated subset of every individual evaluated during
the run, not just the final population.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .antipatterns import Thresholds, detect
from .model import Architecture, RoutingError, digest, validate
from .pareto import crowding_distance, fast_nondominated_sort, nondominated_indices
from .perfqn import PerformanceResult, SolverError, perfq, solve_amva, to_qn
from .refactoring import (
    DEFAULT_BRF,
    ActionKind,
    RefactoringSequence,
    _rebuild,
    apply_sequence,
    distance,
    random_sequence,
    repair,
    sequence_to_records,
)
from .reliability import reliability as compute_reliability

log = logging.getLogger("archopt.moea")

ALGORITHMS = ("nsga2", "spea2", "pesa2")
INVALID_SENTINEL = float("inf")


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str = "nsga2"
    seed: int = 0
    population: int = 32
    archive_size: int = 32
    sequence_length: int = 4
    crossover_prob: float = 0.8
    mutation_prob: float | None = None  # default 1 / sequence_length
    divisions: int = 8  # PESA-II hypergrid cells per objective
    budget_seconds: float | None = None
    max_evaluations: int | None = None
    use_pas_objective: bool = True
    allow_new_nodes: bool = True
    workers: int = 1
    brf: dict[ActionKind, float] = field(default_factory=lambda: dict(DEFAULT_BRF))
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm '{self.algorithm}', expected one of {ALGORITHMS}")
        if self.budget_seconds is None and self.max_evaluations is None:
            raise ValueError("at least one of budget_seconds / max_evaluations must be set")
        if self.population < 4 or self.population % 2:
            raise ValueError(f"population must be >= 4 and even, got {self.population}")

    @property
    def gene_mutation_prob(self) -> float:
        if self.mutation_prob is not None:
            return self.mutation_prob
        return 1.0 / max(1, self.sequence_length)


@dataclass(frozen=True)
class EvalMetrics:
    perfq: float
    reliability: float
    pas: int
    distance: float


@dataclass(frozen=True)
class Individual:
    sequence: RefactoringSequence
    phenotype_digest: str
    metrics: EvalMetrics
    objectives: tuple[float, ...]  # active objective vector, minimized
    valid: bool
    order: int  # evaluation order, used for deterministic tie-breaks


@dataclass(frozen=True)
class ParetoFront:
    individuals: tuple[Individual, ...]
    metadata: dict


def objective_vector(metrics: EvalMetrics, use_pas: bool) -> tuple[float, ...]:
    if use_pas:
        return (-metrics.perfq, -metrics.reliability, float(metrics.pas), metrics.distance)
    return (-metrics.perfq, -metrics.reliability, metrics.distance)


def _genotype_key(seq: RefactoringSequence) -> tuple:
    return tuple(seq.actions)


def _compute_metrics(
    initial: Architecture,
    initial_perf: PerformanceResult,
    seq: RefactoringSequence,
    brf: dict[ActionKind, float],
    thresholds: Thresholds,
) -> tuple[EvalMetrics | None, str, str]:
    """Returns (metrics or None, phenotype digest, failure reason)."""
    folded = apply_sequence(initial, seq)
    phenotype = digest(folded)
    try:
        perf = solve_amva(to_qn(folded))
        rel = compute_reliability(folded)
    except (SolverError, RoutingError, ValueError) as exc:
        return None, phenotype, str(exc)
    metrics = EvalMetrics(
        perfq=perfq(initial_perf, perf),
        reliability=rel.overall,
        pas=len(detect(folded, perf, thresholds)),
        distance=distance(seq, brf),
    )
    return metrics, phenotype, ""


def _evaluate_remote(args) -> tuple[EvalMetrics | None, str, str]:
    return _compute_metrics(*args)


class Evaluator:
    """Caches objective evaluations by genotype so identical sequences are
    solved once; keeps every evaluated individual for the cumulative front."""

    def __init__(self, initial: Architecture, config: SearchConfig):
        violations = validate(initial)
        if violations:
            raise ValueError("initial architecture is invalid:\n" + "\n".join(violations))
        self.initial = initial
        self.config = config
        self.initial_digest = digest(initial)
        self.initial_perf = solve_amva(to_qn(initial))
        self._cache: dict[tuple, Individual] = {}
        self.all_individuals: list[Individual] = []
        # running non-dominated archive over everything evaluated; kept
        # incrementally so the final front costs nothing extra
        self._front: list[Individual] = []
        self._front_points = np.empty((0, 4 if config.use_pas_objective else 3))
        self.solver_evaluations = 0
        self.cache_hits = 0
        self._pool: ProcessPoolExecutor | None = None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _record(self, seq: RefactoringSequence, result: tuple[EvalMetrics | None, str, str]) -> Individual:
        metrics, phenotype, reason = result
        self.solver_evaluations += 1
        if metrics is None:
            log.warning("invalid individual (%s): %s", phenotype[:12], reason)
            sentinel = float("nan")
            metrics = EvalMetrics(sentinel, sentinel, 0, sentinel)
            dim = 4 if self.config.use_pas_objective else 3
            objectives = (INVALID_SENTINEL,) * dim
            individual = Individual(seq, phenotype, metrics, objectives, False, len(self.all_individuals))
        else:
            objectives = objective_vector(metrics, self.config.use_pas_objective)
            individual = Individual(seq, phenotype, metrics, objectives, True, len(self.all_individuals))
        self._cache[_genotype_key(seq)] = individual
        self.all_individuals.append(individual)
        self._admit_to_front(individual)
        return individual

    def _admit_to_front(self, individual: Individual) -> None:
        candidate = np.array(individual.objectives)
        points = self._front_points
        if points.shape[0]:
            if bool(((points <= candidate).all(axis=1) & (points < candidate).any(axis=1)).any()):
                return
            doomed = (candidate <= points).all(axis=1) & (candidate < points).any(axis=1)
            if doomed.any():
                keep = ~doomed
                self._front = [ind for ind, k in zip(self._front, keep) if k]
                points = points[keep]
        self._front = self._front + [individual]
        self._front_points = np.vstack([points, candidate[None, :]])

    @property
    def front(self) -> list[Individual]:
        """Non-dominated subset of every individual evaluated so far."""
        return list(self._front)

    def evaluate(self, seq: RefactoringSequence) -> Individual:
        key = _genotype_key(seq)
        cached = self._cache.get(key)
        if cached is not None:
            self.cache_hits += 1
            return cached
        result = _compute_metrics(self.initial, self.initial_perf, seq, self.config.brf, self.config.thresholds)
        return self._record(seq, result)

    def evaluate_many(
        self,
        seqs: list[RefactoringSequence],
        deadline: float | None = None,
        max_evaluations: int | None = None,
    ) -> list[Individual]:
        """Evaluate in submission order; under a deadline or evaluation cap
        the remainder of the batch is skipped once the budget runs out."""
        if self.config.workers <= 1:
            out = []
            for seq in seqs:
                if out:
                    if deadline is not None and time.monotonic() >= deadline:
                        break
                    if max_evaluations is not None and self.solver_evaluations >= max_evaluations:
                        break
                out.append(self.evaluate(seq))
            return out

        if self._pool is None:
            self._pool = ProcessPoolExecutor(max_workers=self.config.workers)
        # admit batch items with the same rules as the serial path so an
        # evaluation budget yields an identical trajectory
        start = self.solver_evaluations
        admitted: list[int] = []
        pending: list[tuple[int, RefactoringSequence]] = []
        submitted: set[tuple] = set()
        for i, seq in enumerate(seqs):
            if admitted:
                if deadline is not None and time.monotonic() >= deadline:
                    break
                if max_evaluations is not None and start + len(pending) >= max_evaluations:
                    break
            key = _genotype_key(seq)
            if key not in self._cache and key not in submitted:
                submitted.add(key)
                pending.append((i, seq))
            admitted.append(i)
        args = [
            (self.initial, self.initial_perf, seq, self.config.brf, self.config.thresholds)
            for _, seq in pending
        ]
        recorded: dict[int, Individual] = {}
        for (i, seq), result in zip(pending, self._pool.map(_evaluate_remote, args)):
            # merged in submission order so trajectories stay reproducible
            recorded[i] = self._record(seq, result)
        out = []
        for i in admitted:
            if i in recorded:
                out.append(recorded[i])
            else:
                self.cache_hits += 1
                out.append(self._cache[_genotype_key(seqs[i])])
        return out


class _Budget:
    def __init__(self, config: SearchConfig):
        self.seconds = config.budget_seconds
        self.max_evaluations = config.max_evaluations
        self.started = time.monotonic()

    @property
    def deadline(self) -> float | None:
        return None if self.seconds is None else self.started + self.seconds

    def exhausted(self, evaluations: int) -> bool:
        if self.seconds is not None and time.monotonic() - self.started >= self.seconds:
            return True
        if self.max_evaluations is not None and evaluations >= self.max_evaluations:
            return True
        return False

    def elapsed(self) -> float:
        return time.monotonic() - self.started


def _tournament(rng: np.random.Generator, size: int) -> tuple[int, int]:
    return int(rng.integers(size)), int(rng.integers(size))


def crossover(
    initial: Architecture,
    a: RefactoringSequence,
    b: RefactoringSequence,
    rng: np.random.Generator,
    allow_new_nodes: bool = True,
) -> tuple[RefactoringSequence, RefactoringSequence]:
    """Single-point crossover at a uniform cut in [1, L-1], then repair."""
    if len(a) != len(b):
        raise ValueError(f"parent lengths differ: {len(a)} vs {len(b)}")
    length = len(a)
    if length < 2:
        return a, b
    cut = int(rng.integers(1, length))
    child_a = RefactoringSequence(a.actions[:cut] + b.actions[cut:])
    child_b = RefactoringSequence(b.actions[:cut] + a.actions[cut:])
    return (
        repair(initial, child_a, rng, allow_new_nodes=allow_new_nodes),
        repair(initial, child_b, rng, allow_new_nodes=allow_new_nodes),
    )


def mutate(
    initial: Architecture,
    seq: RefactoringSequence,
    rng: np.random.Generator,
    gene_prob: float,
    allow_new_nodes: bool = True,
) -> RefactoringSequence:
    """Replace each gene with probability ``gene_prob`` by a random feasible
    action at its prefix position; infeasible survivors are repaired."""
    mutated, _ = _rebuild(initial, seq.actions, rng, allow_new_nodes, resample_probability=gene_prob)
    return mutated


def _offspring_pair(
    evaluator: Evaluator,
    parents: tuple[RefactoringSequence, RefactoringSequence],
    rng: np.random.Generator,
) -> list[RefactoringSequence]:
    config = evaluator.config
    a, b = parents
    if rng.random() < config.crossover_prob:
        a, b = crossover(evaluator.initial, a, b, rng, config.allow_new_nodes)
    children = []
    for child in (a, b):
        children.append(mutate(evaluator.initial, child, rng, config.gene_mutation_prob, config.allow_new_nodes))
    return children


# ---------------------------------------------------------------------------
# NSGA-II
# ---------------------------------------------------------------------------


def _rank_and_crowding(population: list[Individual]) -> tuple[np.ndarray, np.ndarray]:
    points = np.array([ind.objectives for ind in population])
    fronts = fast_nondominated_sort(points)
    rank = np.zeros(len(population), dtype=int)
    crowding = np.zeros(len(population))
    for level, front in enumerate(fronts):
        rank[front] = level
        finite = points[front]
        finite = np.where(np.isfinite(finite), finite, 0.0)  # sentinel rows crowd together
        crowding[front] = crowding_distance(finite)
    return rank, crowding


def _nsga2_select_parent(population, rank, crowding, rng) -> Individual:
    i, j = _tournament(rng, len(population))
    if rank[i] != rank[j]:
        return population[i] if rank[i] < rank[j] else population[j]
    if crowding[i] != crowding[j]:
        return population[i] if crowding[i] > crowding[j] else population[j]
    return population[min(i, j)]


def _nsga2_survival(population: list[Individual], mu: int) -> list[Individual]:
    points = np.array([ind.objectives for ind in population])
    fronts = fast_nondominated_sort(points)
    survivors: list[Individual] = []
    for front in fronts:
        if len(survivors) + len(front) <= mu:
            survivors.extend(population[i] for i in front)
        else:
            finite = np.where(np.isfinite(points[front]), points[front], 0.0)
            crowd = crowding_distance(finite)
            # fill by descending crowding, ties by evaluation order
            order = sorted(range(len(front)), key=lambda i: (-crowd[i], population[front[i]].order))
            survivors.extend(population[front[i]] for i in order[: mu - len(survivors)])
            break
    return survivors


def _run_nsga2(evaluator: Evaluator, rng: np.random.Generator, budget: _Budget) -> int:
    config = evaluator.config
    population = _initial_population(evaluator, rng, budget)
    generations = 0
    while not budget.exhausted(evaluator.solver_evaluations) and population:
        rank, crowding = _rank_and_crowding(population)
        offspring: list[RefactoringSequence] = []
        while len(offspring) < config.population:
            pa = _nsga2_select_parent(population, rank, crowding, rng)
            pb = _nsga2_select_parent(population, rank, crowding, rng)
            offspring.extend(_offspring_pair(evaluator, (pa.sequence, pb.sequence), rng))
        evaluated = evaluator.evaluate_many(offspring[: config.population], budget.deadline, config.max_evaluations)
        population = _nsga2_survival(population + evaluated, config.population)
        generations += 1
    return generations


# ---------------------------------------------------------------------------
# SPEA2
# ---------------------------------------------------------------------------


def _spea2_fitness(union: list[Individual]) -> tuple[np.ndarray, np.ndarray]:
    points = np.array([ind.objectives for ind in union])
    points = np.where(np.isfinite(points), points, 1e30)  # keep sentinel rows distance-safe
    dom = kernels.dominance_matrix(points)
    strength = dom.sum(axis=1).astype(float)  # S(i): count i dominates
    raw = np.array([strength[dom[:, i]].sum() for i in range(len(union))])
    dists = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(dists, np.inf)
    k = int(np.floor(np.sqrt(len(union))))
    k = max(1, min(k, len(union) - 1)) if len(union) > 1 else 1
    sigma = np.sort(dists, axis=1)[:, k - 1] if len(union) > 1 else np.zeros(len(union))
    density = 1.0 / (sigma + 2.0)
    return raw + density, dists


def _spea2_truncate(archive_idx: list[int], dists: np.ndarray, target: int) -> list[int]:
    # iteratively drop the member with lexicographically smallest sorted
    # nearest-neighbor distances; on full ties the highest index goes,
    # so earlier individuals win as everywhere else
    keep = list(archive_idx)
    while len(keep) > target:
        sub = dists[np.ix_(keep, keep)]
        ranked = sorted(range(len(keep)), key=lambda i: (tuple(np.sort(sub[i])), -keep[i]))
        keep.pop(ranked[0])
    return keep


def _spea2_environmental(union: list[Individual], fitness: np.ndarray, dists: np.ndarray, size: int) -> list[Individual]:
    nondom = [i for i in range(len(union)) if fitness[i] < 1.0]
    if len(nondom) > size:
        nondom = _spea2_truncate(nondom, dists, size)
    elif len(nondom) < size:
        dominated = sorted(
            (i for i in range(len(union)) if fitness[i] >= 1.0),
            key=lambda i: (fitness[i], union[i].order),
        )
        nondom = nondom + dominated[: size - len(nondom)]
    return [union[i] for i in nondom]


def _run_spea2(evaluator: Evaluator, rng: np.random.Generator, budget: _Budget) -> int:
    config = evaluator.config
    population = _initial_population(evaluator, rng, budget)
    archive: list[Individual] = []
    generations = 0
    while population:
        union = population + archive
        fitness, dists = _spea2_fitness(union)
        archive = _spea2_environmental(union, fitness, dists, config.archive_size)
        if budget.exhausted(evaluator.solver_evaluations):
            break
        arch_fitness, _ = _spea2_fitness(archive)
        offspring: list[RefactoringSequence] = []
        while len(offspring) < config.population:
            ia, ib = _tournament(rng, len(archive))
            pa = archive[ia] if (arch_fitness[ia], ia) <= (arch_fitness[ib], ib) else archive[ib]
            ic, id_ = _tournament(rng, len(archive))
            pb = archive[ic] if (arch_fitness[ic], ic) <= (arch_fitness[id_], id_) else archive[id_]
            offspring.extend(_offspring_pair(evaluator, (pa.sequence, pb.sequence), rng))
        population = evaluator.evaluate_many(offspring[: config.population], budget.deadline, config.max_evaluations)
        generations += 1
    return generations


# ---------------------------------------------------------------------------
# PESA-II
# ---------------------------------------------------------------------------


class _HyperGrid:
    """Adaptive hypergrid over the archive's objective bounding box."""

    def __init__(self, divisions: int):
        self.divisions = divisions

    def cells(self, archive: list[Individual]) -> dict[tuple, list[int]]:
        points = np.array([ind.objectives for ind in archive])
        points = np.where(np.isfinite(points), points, 1e30)
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        width = np.where(hi > lo, (hi - lo) / self.divisions, 1.0)
        cells: dict[tuple, list[int]] = {}
        for i, p in enumerate(points):
            idx = np.clip(((p - lo) / width).astype(int), 0, self.divisions - 1)
            cells.setdefault(tuple(int(v) for v in idx), []).append(i)
        return cells


def _pesa2_insert(archive: list[Individual], candidate: Individual, capacity: int, grid: _HyperGrid) -> list[Individual]:
    points = [ind.objectives for ind in archive]
    for p in points:
        if _dominates_tuple(p, candidate.objectives):
            return archive
    archive = [ind for ind in archive if not _dominates_tuple(candidate.objectives, ind.objectives)]
    archive.append(candidate)
    if len(archive) > capacity:
        cells = grid.cells(archive)
        crowded_key = max(sorted(cells), key=lambda key: len(cells[key]))  # ties -> lowest cell
        evict = cells[crowded_key][0]  # oldest member of the most crowded cell
        archive = archive[:evict] + archive[evict + 1 :]
    return archive


def _dominates_tuple(a: tuple[float, ...], b: tuple[float, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def _pesa2_select(archive: list[Individual], cells: dict[tuple, list[int]], rng: np.random.Generator) -> Individual:
    keys = sorted(cells)
    first = keys[int(rng.integers(len(keys)))]
    second = keys[int(rng.integers(len(keys)))]
    if len(cells[first]) != len(cells[second]):
        chosen = first if len(cells[first]) < len(cells[second]) else second
    else:
        chosen = first if rng.random() < 0.5 else second
    members = cells[chosen]
    return archive[members[int(rng.integers(len(members)))]]


def _run_pesa2(evaluator: Evaluator, rng: np.random.Generator, budget: _Budget) -> int:
    config = evaluator.config
    grid = _HyperGrid(config.divisions)
    population = _initial_population(evaluator, rng, budget)
    archive: list[Individual] = []
    for ind in population:
        archive = _pesa2_insert(archive, ind, config.archive_size, grid)
    generations = 0
    while archive and not budget.exhausted(evaluator.solver_evaluations):
        cells = grid.cells(archive)
        offspring: list[RefactoringSequence] = []
        while len(offspring) < config.population:
            pa = _pesa2_select(archive, cells, rng)
            pb = _pesa2_select(archive, cells, rng)
            offspring.extend(_offspring_pair(evaluator, (pa.sequence, pb.sequence), rng))
        evaluated = evaluator.evaluate_many(offspring[: config.population], budget.deadline, config.max_evaluations)
        for ind in evaluated:
            archive = _pesa2_insert(archive, ind, config.archive_size, grid)
        generations += 1
    return generations


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def _initial_population(evaluator: Evaluator, rng: np.random.Generator, budget: _Budget) -> list[Individual]:
    config = evaluator.config
    seqs = [
        random_sequence(evaluator.initial, config.sequence_length, rng, config.allow_new_nodes)
        for _ in range(config.population)
    ]
    return evaluator.evaluate_many(seqs, budget.deadline)


_RUNNERS = {"nsga2": _run_nsga2, "spea2": _run_spea2, "pesa2": _run_pesa2}


def cumulative_front(evaluator: Evaluator) -> list[Individual]:
    """Non-dominated subset of every individual evaluated so far."""
    return evaluator.front


def run(initial: Architecture, config: SearchConfig, rng: np.random.Generator | None = None) -> ParetoFront:
    """Run one optimization and return the cumulative Pareto front."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    kernels.warmup()
    evaluator = Evaluator(initial, config)  # also warms the solver path
    budget = _Budget(config)
    try:
        generations = _RUNNERS[config.algorithm](evaluator, rng, budget)
    finally:
        evaluator.close()
    wall = budget.elapsed()

    front = cumulative_front(evaluator)
    front.sort(key=lambda ind: (ind.objectives, ind.order))
    metadata = {
        "algorithm": config.algorithm,
        "seed": config.seed,
        "population": config.population,
        "archive_size": config.archive_size,
        "sequence_length": config.sequence_length,
        "budget_seconds": config.budget_seconds,
        "max_evaluations": config.max_evaluations,
        "use_pas_objective": config.use_pas_objective,
        "evaluations_used": evaluator.solver_evaluations,
        "cache_hits": evaluator.cache_hits,
        "generations": generations,
        "budget_truncated": generations == 0,
        "wall_time_seconds": wall,
        "kernel_backend": kernels.backend(),
        "initial_digest": evaluator.initial_digest,
    }
    log.info(
        "%s seed=%s: %d evaluations, %d generations, front size %d, %.2fs",
        config.algorithm, config.seed, evaluator.solver_evaluations, generations, len(front), wall,
    )
    return ParetoFront(individuals=tuple(front), metadata=metadata)


def front_to_json_dict(front: ParetoFront) -> dict:
    return {
        "metadata": front.metadata,
        "solutions": [
            {
                "solution_id": f"s{idx:04d}",
                "actions": sequence_to_records(ind.sequence),
                "perfq": ind.metrics.perfq,
                "reliability": ind.metrics.reliability,
                "pas": ind.metrics.pas,
                "distance": ind.metrics.distance,
                "objectives": list(ind.objectives),
                "phenotype_digest": ind.phenotype_digest,
                "valid": ind.valid,
            }
            for idx, ind in enumerate(front.individuals)
        ],
    }
