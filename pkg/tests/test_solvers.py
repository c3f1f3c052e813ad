import pytest

from tspfcn.errors import ConfigError, SizeLimitError
from tspfcn.instance import TspInstance, generate_instance, tour_length, validate_tour
from tspfcn.solvers import (
    AcoConfig,
    GaConfig,
    exhaustive_permutation_count,
    solve_ant_colony,
    solve_branch_bound,
    solve_branch_bound_with_stats,
    solve_dp,
    solve_exhaustive,
    solve_genetic,
)

FAST_GA = GaConfig(population=60, generations=80, seed=0)
FAST_ACO = AcoConfig(iterations=60, seed=0)


@pytest.fixture
def collinear():
    return TspInstance(
        id="line", coords=((0.0, 0.0), (1.0, 0.0), (2.5, 0.0), (4.0, 0.0), (7.0, 0.0))
    )


class TestExhaustive:
    def test_unit_square(self, unit_square):
        tour = solve_exhaustive(unit_square)
        assert tour.length == pytest.approx(4.0)
        assert tour.order[0] == 0

    def test_triangle_matches_dp(self, triangle):
        assert solve_exhaustive(triangle).length == pytest.approx(solve_dp(triangle).length)

    def test_size_guard(self):
        inst = generate_instance(13, seed=0)
        with pytest.raises(SizeLimitError):
            solve_exhaustive(inst)


class TestDp:
    def test_unit_square(self, unit_square):
        assert solve_dp(unit_square).length == pytest.approx(4.0)

    def test_collinear_out_and_back(self, collinear):
        # the optimal closed walk on a line is twice its span
        assert solve_dp(collinear).length == pytest.approx(14.0)

    def test_matches_exhaustive_small(self):
        for seed in range(25):
            inst = generate_instance(4 + seed % 5, seed=seed)
            a = solve_dp(inst)
            b = solve_exhaustive(inst)
            assert a.length == pytest.approx(b.length, rel=1e-9)
            assert validate_tour(inst, a.order).valid

    def test_size_guard(self):
        with pytest.raises(SizeLimitError):
            solve_dp(generate_instance(21, seed=0))


class TestBranchBound:
    def test_unit_square(self, unit_square):
        assert solve_branch_bound(unit_square).length == pytest.approx(4.0)

    def test_matches_dp(self):
        for seed in range(20):
            inst = generate_instance(4 + seed % 7, seed=seed + 100)
            assert solve_branch_bound(inst).length == pytest.approx(
                solve_dp(inst).length, rel=1e-9
            )

    def test_expansions_bounded_by_permutations(self):
        # below n=7 the search tree's internal nodes outnumber its leaves, so
        # no admissible bound can push entered nodes under the permutation
        # count; the comparison is meaningful once the factorial blowup bites
        for seed in range(12):
            n = 7 + seed % 4
            inst = generate_instance(n, seed=seed + 300)
            _, stats = solve_branch_bound_with_stats(inst)
            assert stats.expansions <= exhaustive_permutation_count(n)
            assert stats.pruned > 0


class TestGenetic:
    def test_unit_square(self, unit_square):
        assert solve_genetic(unit_square, FAST_GA).length == pytest.approx(4.0)

    def test_deterministic_per_seed(self):
        inst = generate_instance(10, seed=5)
        a = solve_genetic(inst, FAST_GA)
        b = solve_genetic(inst, FAST_GA)
        assert a.order == b.order and a.length == b.length

    def test_returns_valid_tour(self):
        for seed in range(8):
            inst = generate_instance(9, seed=seed)
            tour = solve_genetic(inst, GaConfig(population=40, generations=30, seed=seed))
            assert validate_tour(inst, tour.order).valid

    def test_never_beats_exact(self):
        for seed in range(8):
            inst = generate_instance(8, seed=seed + 50)
            exact = solve_dp(inst).length
            assert solve_genetic(inst, FAST_GA).length >= exact - 1e-9

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            GaConfig(population=1)
        with pytest.raises(ConfigError):
            GaConfig(crossover_rate=1.5)


class TestAntColony:
    def test_unit_square(self, unit_square):
        assert solve_ant_colony(unit_square, FAST_ACO).length == pytest.approx(4.0)

    def test_deterministic_per_seed(self):
        inst = generate_instance(10, seed=6)
        a = solve_ant_colony(inst, FAST_ACO)
        b = solve_ant_colony(inst, FAST_ACO)
        assert a.order == b.order and a.length == b.length

    def test_returns_valid_tour_and_never_beats_exact(self):
        for seed in range(8):
            inst = generate_instance(9, seed=seed + 20)
            tour = solve_ant_colony(inst, AcoConfig(iterations=40, seed=seed))
            assert validate_tour(inst, tour.order).valid
            assert tour.length >= solve_dp(inst).length - 1e-9

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            AcoConfig(ant_num=0)
        with pytest.raises(ConfigError):
            AcoConfig(rho=1.0)


class TestCrossSolverAgreement:
    def test_all_exact_solvers_agree(self):
        for seed in range(10):
            inst = generate_instance(4 + seed % 6, seed=seed + 900)
            lengths = {
                solve_exhaustive(inst).length,
                solve_dp(inst).length,
                solve_branch_bound(inst).length,
            }
            assert max(lengths) - min(lengths) <= 1e-9 * max(lengths)

    def test_three_city_unique_cycle(self, triangle):
        expected = tour_length(triangle, [0, 1, 2])
        for solver in (solve_exhaustive, solve_dp, solve_branch_bound):
            assert solver(triangle).length == pytest.approx(expected)
        assert solve_genetic(triangle, FAST_GA).length == pytest.approx(expected)
        assert solve_ant_colony(triangle, FAST_ACO).length == pytest.approx(expected)
