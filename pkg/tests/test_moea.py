import numpy as np
import pytest

from archopt.moea import (
    EvalMetrics,
    Evaluator,
    Individual,
    SearchConfig,
    _HyperGrid,
    _pesa2_insert,
    _pesa2_select,
    _spea2_environmental,
    _spea2_fitness,
    crossover,
    cumulative_front,
    mutate,
    objective_vector,
    run,
)
from archopt.pareto import dominates
from archopt.refactoring import (
    CloneComponent,
    RedeployComponent,
    RefactoringSequence,
    random_sequence,
)


def fake_individual(objectives, order=0, valid=True):
    metrics = EvalMetrics(perfq=0.0, reliability=1.0, pas=0, distance=0.0)
    return Individual(RefactoringSequence(()), f"d{order}", metrics, tuple(objectives), valid, order)


# -- config ---------------------------------------------------------------------


def test_config_requires_budget():
    with pytest.raises(ValueError, match="budget"):
        SearchConfig()


def test_config_population_must_be_even():
    with pytest.raises(ValueError, match="even"):
        SearchConfig(max_evaluations=10, population=7)


def test_objective_vector_modes():
    metrics = EvalMetrics(perfq=0.25, reliability=0.9, pas=2, distance=5.0)
    assert objective_vector(metrics, True) == (-0.25, -0.9, 2.0, 5.0)
    assert objective_vector(metrics, False) == (-0.25, -0.9, 5.0)


# -- evaluation ------------------------------------------------------------------


def test_empty_sequence_evaluates_to_identity(small_arch):
    evaluator = Evaluator(small_arch, SearchConfig(max_evaluations=0))
    ind = evaluator.evaluate(RefactoringSequence(()))
    assert ind.metrics.perfq == 0.0
    assert ind.metrics.distance == 0.0
    assert ind.valid
    assert ind.phenotype_digest == evaluator.initial_digest


def test_redeploying_hot_component_improves_perfq(small_arch):
    # catalog saturates app1 while spare idles; moving it must help
    evaluator = Evaluator(small_arch, SearchConfig(max_evaluations=0))
    seq = RefactoringSequence((RedeployComponent("catalog", "spare"),))
    ind = evaluator.evaluate(seq)
    assert ind.metrics.perfq > 0.0
    assert ind.objectives[0] < 0.0


def test_evaluation_cache_skips_solver(small_arch):
    evaluator = Evaluator(small_arch, SearchConfig(max_evaluations=0))
    seq = RefactoringSequence((RedeployComponent("catalog", "spare"),))
    first = evaluator.evaluate(seq)
    solver_calls = evaluator.solver_evaluations
    second = evaluator.evaluate(RefactoringSequence((RedeployComponent("catalog", "spare"),)))
    assert evaluator.solver_evaluations == solver_calls
    assert evaluator.cache_hits == 1
    assert first is second


def test_solver_failure_marks_individual_invalid(small_arch, monkeypatch):
    from archopt import moea
    from archopt.perfqn import SolverError

    evaluator = Evaluator(small_arch, SearchConfig(max_evaluations=0))

    def explode(qn):
        raise SolverError("did not converge", residual=1.0)

    monkeypatch.setattr(moea, "solve_amva", explode)
    ind = evaluator.evaluate(RefactoringSequence((RedeployComponent("catalog", "spare"),)))
    assert not ind.valid
    assert all(v == float("inf") for v in ind.objectives)
    # any valid individual dominates the sentinel
    assert dominates((0.0, -1.0, 0.0, 1.0), ind.objectives)


# -- operators -------------------------------------------------------------------


class FixedCutRng:
    """rng stub: fixed crossover cut, never mutates."""

    def __init__(self, cut):
        self.cut = cut

    def integers(self, *args):
        return self.cut

    def random(self):
        return 1.0


def test_crossover_single_point_cut(small_arch):
    a = RefactoringSequence(
        (
            RedeployComponent("web", "spare"),
            RedeployComponent("auth", "spare"),
            CloneComponent("catalog", "app2"),
            CloneComponent("web", "app2"),
        )
    )
    b = RefactoringSequence(
        (
            CloneComponent("storage", "app1"),
            RedeployComponent("orders", "app1"),
            RedeployComponent("storage", "spare"),
            CloneComponent("auth", "app1"),
        )
    )
    child_a, child_b = crossover(small_arch, a, b, FixedCutRng(2))
    assert child_a.actions == a.actions[:2] + b.actions[2:]
    assert child_b.actions == b.actions[:2] + a.actions[2:]


def test_crossover_deterministic(small_arch):
    rng1, rng2 = np.random.default_rng(5), np.random.default_rng(5)
    a = random_sequence(small_arch, 4, np.random.default_rng(1))
    b = random_sequence(small_arch, 4, np.random.default_rng(2))
    assert crossover(small_arch, a, b, rng1) == crossover(small_arch, a, b, rng2)


def test_mutation_zero_probability_is_identity(small_arch):
    seq = random_sequence(small_arch, 4, np.random.default_rng(3))
    out = mutate(small_arch, seq, np.random.default_rng(0), gene_prob=0.0)
    assert out == seq


def test_mutation_deterministic(small_arch):
    seq = random_sequence(small_arch, 4, np.random.default_rng(3))
    out1 = mutate(small_arch, seq, np.random.default_rng(9), gene_prob=0.5)
    out2 = mutate(small_arch, seq, np.random.default_rng(9), gene_prob=0.5)
    assert out1 == out2


# -- SPEA2 internals --------------------------------------------------------------


def test_spea2_nondominated_pair_enters_archive():
    union = [fake_individual((0.0, 1.0), 0), fake_individual((1.0, 0.0), 1)]
    fitness, dists = _spea2_fitness(union)
    assert (fitness < 1.0).all()
    archive = _spea2_environmental(union, fitness, dists, size=2)
    assert len(archive) == 2


def test_spea2_dominated_point_raw_strength():
    union = [fake_individual((0.0, 0.0), 0), fake_individual((1.0, 1.0), 1)]
    fitness, _ = _spea2_fitness(union)
    # dominator strength S=1, so dominated point's raw fitness is 1 (+density)
    assert fitness[0] < 1.0
    assert 1.0 <= fitness[1] < 2.0


def test_spea2_truncation_is_deterministic():
    union = [fake_individual((0.0, 1.0), 0), fake_individual((1.0, 0.0), 1)]
    fitness, dists = _spea2_fitness(union)
    archive = _spea2_environmental(union, fitness, dists, size=1)
    assert len(archive) == 1
    assert archive[0].order == 0  # tie broken by index


def test_spea2_fills_with_best_dominated():
    union = [
        fake_individual((0.0, 0.0), 0),
        fake_individual((1.0, 1.0), 1),
        fake_individual((2.0, 2.0), 2),
    ]
    fitness, dists = _spea2_fitness(union)
    archive = _spea2_environmental(union, fitness, dists, size=2)
    assert [ind.order for ind in archive] == [0, 1]


# -- PESA-II internals -------------------------------------------------------------


def test_pesa2_single_member_always_selected():
    archive = [fake_individual((0.5, 0.5), 0)]
    grid = _HyperGrid(divisions=8)
    cells = grid.cells(archive)
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert _pesa2_select(archive, cells, rng) is archive[0]


def test_pesa2_insert_rejects_dominated_and_evicts_crowded():
    grid = _HyperGrid(divisions=2)
    a = fake_individual((0.1, 0.9), 0)
    b = fake_individual((0.15, 0.85), 1)  # same cell as a
    c = fake_individual((0.9, 0.1), 2)
    archive = [a]
    archive = _pesa2_insert(archive, b, capacity=2, grid=grid)
    archive = _pesa2_insert(archive, c, capacity=2, grid=grid)
    assert len(archive) == 2
    # a and b share a cell; the oldest of that cell was evicted
    assert c in archive
    assert a not in archive and b in archive


def test_pesa2_insert_drops_newly_dominated_members():
    grid = _HyperGrid(divisions=4)
    archive = [fake_individual((0.5, 0.5), 0)]
    better = fake_individual((0.1, 0.1), 1)
    archive = _pesa2_insert(archive, better, capacity=4, grid=grid)
    assert archive == [better]
    # dominated candidates never enter
    worse = fake_individual((0.2, 0.2), 2)
    assert _pesa2_insert(archive, worse, capacity=4, grid=grid) == [better]


# -- run() contract ----------------------------------------------------------------


@pytest.mark.parametrize("algorithm", ["nsga2", "spea2", "pesa2"])
def test_run_front_is_nondominated(small_arch, algorithm):
    config = SearchConfig(algorithm=algorithm, seed=1, max_evaluations=120, population=16, archive_size=16)
    front = run(small_arch, config)
    points = [ind.objectives for ind in front.individuals]
    for i in range(len(points)):
        assert not any(dominates(points[j], points[i]) for j in range(len(points)) if j != i)
    assert front.metadata["evaluations_used"] <= 120


def test_run_is_deterministic(small_arch):
    config = SearchConfig(seed=6, max_evaluations=100, population=8)
    one = run(small_arch, config)
    two = run(small_arch, config)
    assert [i.sequence for i in one.individuals] == [i.sequence for i in two.individuals]
    assert [i.objectives for i in one.individuals] == [i.objectives for i in two.individuals]


def test_run_zero_budget_front_of_initial_population(small_arch):
    config = SearchConfig(seed=2, max_evaluations=0, population=8)
    front = run(small_arch, config)
    assert front.metadata["evaluations_used"] == 8  # initial population only
    assert front.metadata["budget_truncated"]
    assert front.metadata["generations"] == 0
    assert len(front.individuals) >= 1


def test_run_elitism_best_objectives_present(small_arch):
    config = SearchConfig(seed=8, max_evaluations=200, population=16)
    front = run(small_arch, config)
    best_perfq = max(i.metrics.perfq for i in front.individuals)
    best_rel = max(i.metrics.reliability for i in front.individuals)
    best_pas = min(i.metrics.pas for i in front.individuals)
    best_dist = min(i.metrics.distance for i in front.individuals)
    # the front must contain the best value seen in each single objective;
    # re-running with the same seed rebuilds the full evaluated set
    evaluator = Evaluator(small_arch, config)
    from archopt.moea import _Budget, _RUNNERS

    rng = np.random.default_rng(config.seed)
    _RUNNERS[config.algorithm](evaluator, rng, _Budget(config))
    all_inds = [i for i in evaluator.all_individuals if i.valid]
    assert best_perfq == max(i.metrics.perfq for i in all_inds)
    assert best_rel == max(i.metrics.reliability for i in all_inds)
    assert best_pas == min(i.metrics.pas for i in all_inds)
    assert best_dist == min(i.metrics.distance for i in all_inds)


def test_run_three_objective_mode(small_arch):
    config = SearchConfig(seed=3, max_evaluations=60, population=8, use_pas_objective=False)
    front = run(small_arch, config)
    assert all(len(ind.objectives) == 3 for ind in front.individuals)


def test_run_parallel_workers_match_serial(small_arch):
    serial = run(small_arch, SearchConfig(seed=4, max_evaluations=60, population=8, workers=1))
    parallel = run(small_arch, SearchConfig(seed=4, max_evaluations=60, population=8, workers=2))
    assert [i.sequence for i in serial.individuals] == [i.sequence for i in parallel.individuals]
    assert [i.objectives for i in serial.individuals] == [i.objectives for i in parallel.individuals]


def test_cumulative_front_with_only_invalid_individuals(small_arch):
    evaluator = Evaluator(small_arch, SearchConfig(max_evaluations=0))
    evaluator._record(RefactoringSequence(()), (None, "digest", "solver blew up"))
    front = cumulative_front(evaluator)
    assert len(front) == 1
    assert not front[0].valid


def test_incremental_front_matches_batch_recompute(small_arch):
    from archopt.pareto import nondominated_indices

    config = SearchConfig(seed=12, max_evaluations=120, population=8)
    evaluator = Evaluator(small_arch, config)
    from archopt.moea import _Budget, _RUNNERS

    _RUNNERS[config.algorithm](evaluator, np.random.default_rng(config.seed), _Budget(config))
    points = [ind.objectives for ind in evaluator.all_individuals]
    expected = {id(evaluator.all_individuals[i]) for i in nondominated_indices(points)}
    assert {id(ind) for ind in evaluator.front} == expected
