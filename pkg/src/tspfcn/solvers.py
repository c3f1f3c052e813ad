"""Exact and heuristic TSP solvers.

Exact solvers (exhaustive, subset dynamic programming, branch and bound) back
the label generation and the correctness oracles; the genetic and ant-colony
heuristics serve as timing baselines. Every solver returns a Tour whose
length is recomputed from the instance so lengths are comparable across
solvers to float precision.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SizeLimitError
from .instance import Tour, TspInstance, tour_length

EXHAUSTIVE_MAX_N = 12
DP_MAX_N = 20
BB_MAX_N = 20

_PERM_CACHE: dict[int, np.ndarray] = {}
_PERM_CACHE_MAX_N = 11  # n=11 tail permutations are ~36 MB as int8
_CHUNK = 250_000


@dataclass(frozen=True)
class GaConfig:
    population: int = 300
    crossover_rate: float = 0.85
    mutation_rate: float = 0.02
    generations: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ConfigError(f"population must be >= 2, got {self.population}")
        for name in ("crossover_rate", "mutation_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.generations < 1:
            raise ConfigError("generations must be >= 1")


@dataclass(frozen=True)
class AcoConfig:
    ant_num: int = 8
    rho: float = 0.5
    alpha: float = 1.0
    beta: float = 2.0
    iterations: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ant_num < 1:
            raise ConfigError(f"ant_num must be >= 1, got {self.ant_num}")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must be in (0, 1), got {self.rho}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")


@dataclass
class BnbStats:
    expansions: int = 0
    pruned: int = 0


def _rotated_to_zero(order: list[int]) -> list[int]:
    k = order.index(0)
    return order[k:] + order[:k]


def _tail_permutations(n: int) -> np.ndarray:
    """All permutations of 1..n-1 as an (m, n-1) int8 array (city 0 is fixed first)."""
    if n in _PERM_CACHE:
        return _PERM_CACHE[n]
    m = 1
    for k in range(2, n):
        m *= k
    flat = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(1, n))),
        dtype=np.int8,
        count=m * (n - 1),
    )
    arr = flat.reshape(m, n - 1)
    if n <= _PERM_CACHE_MAX_N:
        _PERM_CACHE[n] = arr
    return arr


def _perm_chunks(n: int):
    """Yield (chunk,) permutation arrays; streams for n past the cache limit."""
    if n <= _PERM_CACHE_MAX_N:
        yield _tail_permutations(n)
        return
    it = itertools.permutations(range(1, n))
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.int8)


def _chunk_lengths(D: np.ndarray, perms: np.ndarray) -> np.ndarray:
    total = D[0, perms[:, 0]].copy()
    for k in range(perms.shape[1] - 1):
        total += D[perms[:, k], perms[:, k + 1]]
    total += D[perms[:, -1], 0]
    return total


def solve_exhaustive(instance: TspInstance) -> Tour:
    """Globally optimal tour by enumerating every permutation with city 0 fixed first."""
    n = instance.n
    if n > EXHAUSTIVE_MAX_N:
        raise SizeLimitError(f"exhaustive search guarded at n <= {EXHAUSTIVE_MAX_N}, got {n}")
    D = instance.distance_matrix()
    best_len = np.inf
    best_tail: np.ndarray | None = None
    for perms in _perm_chunks(n):
        lengths = _chunk_lengths(D, perms)
        k = int(np.argmin(lengths))
        if lengths[k] < best_len:
            best_len = float(lengths[k])
            best_tail = perms[k].copy()
    assert best_tail is not None
    order = [0] + [int(c) for c in best_tail]
    return Tour.from_order(instance, order)


def exhaustive_permutation_count(n: int) -> int:
    m = 1
    for k in range(2, n):
        m *= k
    return m


def solve_dp(instance: TspInstance) -> Tour:
    """Globally optimal tour via dynamic programming over visited-city subsets."""
    n = instance.n
    if n > DP_MAX_N:
        raise SizeLimitError(f"subset DP guarded at n <= {DP_MAX_N}, got {n}")
    D = instance.distance_matrix()
    size = 1 << n
    dp = np.full((size, n), np.inf)
    parent = np.full((size, n), -1, dtype=np.int8)
    dp[1, 0] = 0.0
    bits = 1 << np.arange(n)
    for mask in range(1, size):
        if not mask & 1:
            continue
        row = dp[mask]
        if not np.any(np.isfinite(row)):
            continue
        cand = row[:, None] + D
        best_from = np.argmin(cand, axis=0)
        best_cost = cand[best_from, np.arange(n)]
        free = np.nonzero((mask & bits) == 0)[0]
        if len(free) == 0:
            continue
        targets = mask | bits[free]
        better = best_cost[free] < dp[targets, free]
        if np.any(better):
            tgt = targets[better]
            js = free[better]
            dp[tgt, js] = best_cost[js]
            parent[tgt, js] = best_from[js]

    full = size - 1
    closing = dp[full] + D[:, 0]
    closing[0] = np.inf
    last = int(np.argmin(closing))
    order = []
    mask, city = full, last
    while city != -1:
        order.append(city)
        prev = int(parent[mask, city])
        mask ^= 1 << city
        city = prev
    order.reverse()
    return Tour.from_order(instance, order)


def _nearest_neighbor(D: np.ndarray, start: int = 0) -> list[int]:
    n = D.shape[0]
    order = [start]
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    cur = start
    for _ in range(n - 1):
        dist = D[cur].copy()
        dist[visited] = np.inf
        cur = int(np.argmin(dist))
        visited[cur] = True
        order.append(cur)
    return order


def _two_opt(D: np.ndarray, order: list[int]) -> list[int]:
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                a, b = order[i], order[i + 1]
                c, d = order[j], order[(j + 1) % n]
                delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
                if delta < -1e-12:
                    order[i + 1 : j + 1] = order[i + 1 : j + 1][::-1]
                    improved = True
    return order


def solve_branch_bound(instance: TspInstance) -> Tour:
    tour, _ = solve_branch_bound_with_stats(instance)
    return tour


def solve_branch_bound_with_stats(instance: TspInstance) -> tuple[Tour, BnbStats]:
    """Depth-first branch and bound over tour prefixes starting at city 0.

    Lower bound: accumulated prefix cost plus the sum of each unvisited city's
    cheapest outgoing edge. The incumbent starts from a 2-opt-improved nearest
    neighbor tour; successor cities are tried nearest first.
    """
    n = instance.n
    if n > BB_MAX_N:
        raise SizeLimitError(f"branch and bound guarded at n <= {BB_MAX_N}, got {n}")
    Dm = instance.distance_matrix()
    D = Dm.tolist()
    min_out = [float(np.min(Dm[i][np.arange(n) != i])) for i in range(n)]

    incumbent = _two_opt(Dm, _nearest_neighbor(Dm))
    incumbent = _rotated_to_zero(incumbent)
    best_len = tour_length(instance, incumbent)
    best_order = list(incumbent)
    stats = BnbStats()

    neighbors = [sorted((j for j in range(n) if j != i), key=lambda j: D[i][j]) for i in range(n)]
    visited = [False] * n
    visited[0] = True
    path = [0]

    def recurse(cost: float, rem_bound: float) -> None:
        # rem_bound = sum of min_out over cities not yet on the path
        nonlocal best_len, best_order
        stats.expansions += 1
        cur = path[-1]
        if len(path) == n:
            total = cost + D[cur][0]
            if total < best_len - 1e-12:
                best_len = total
                best_order = list(path)
            return
        for j in neighbors[cur]:
            if visited[j]:
                continue
            new_cost = cost + D[cur][j]
            if new_cost + rem_bound >= best_len:
                stats.pruned += 1
                continue
            visited[j] = True
            path.append(j)
            recurse(new_cost, rem_bound - min_out[j])
            path.pop()
            visited[j] = False

    recurse(0.0, sum(min_out[j] for j in range(1, n)))
    return Tour.from_order(instance, best_order), stats


def _population_lengths(D: np.ndarray, pop: np.ndarray) -> np.ndarray:
    return D[pop, np.roll(pop, -1, axis=1)].sum(axis=1)


def _order_crossover(parents_a: np.ndarray, parents_b: np.ndarray, i: int, j: int) -> np.ndarray:
    """Order crossover (OX) with a shared cut [i, j): keep a's segment, fill the
    rest with b's cities in b's order starting after the cut."""
    k, n = parents_a.shape
    seg = parents_a[:, i:j]
    rows = np.arange(k)[:, None]
    in_seg = np.zeros((k, n), dtype=bool)
    in_seg[rows, seg] = True
    rot = np.roll(parents_b, -j, axis=1)
    keep = ~in_seg[rows, rot]
    fill = rot[keep].reshape(k, n - (j - i))
    child = np.empty_like(parents_a)
    child[:, i:j] = seg
    positions = np.arange(j, j + n - (j - i)) % n
    child[:, positions] = fill
    return child


def solve_genetic(instance: TspInstance, cfg: GaConfig = GaConfig()) -> Tour:
    """Permutation GA: tournament selection, order crossover, swap mutation,
    elitism of one. Runs a fixed generation budget, deterministic per seed."""
    n = instance.n
    D = instance.distance_matrix()
    rng = np.random.default_rng(cfg.seed)
    pop_size = cfg.population - (cfg.population % 2)  # even for pairing
    pop = rng.permuted(np.tile(np.arange(n), (pop_size, 1)), axis=1)
    fit = _population_lengths(D, pop)
    best_idx = int(np.argmin(fit))
    best_order = pop[best_idx].copy()
    best_len = float(fit[best_idx])

    for _ in range(cfg.generations):
        trials = rng.integers(0, pop_size, size=(pop_size, 3))
        winners = trials[np.arange(pop_size), np.argmin(fit[trials], axis=1)]
        parents = pop[winners]
        pa, pb = parents[0::2], parents[1::2]
        i = int(rng.integers(0, n - 1))
        j = int(rng.integers(i + 1, n))
        cross = rng.random(pop_size // 2) < cfg.crossover_rate
        children = parents.copy()
        if np.any(cross):
            children[0::2][cross] = _order_crossover(pa[cross], pb[cross], i, j)
            children[1::2][cross] = _order_crossover(pb[cross], pa[cross], i, j)
        mutate = np.nonzero(rng.random(pop_size) < cfg.mutation_rate)[0]
        if len(mutate):
            a = rng.integers(0, n, len(mutate))
            b = rng.integers(0, n, len(mutate))
            tmp = children[mutate, a].copy()
            children[mutate, a] = children[mutate, b]
            children[mutate, b] = tmp
        fit = _population_lengths(D, children)
        worst = int(np.argmax(fit))
        children[worst] = best_order
        fit[worst] = best_len
        pop = children
        gen_best = int(np.argmin(fit))
        if fit[gen_best] < best_len:
            best_len = float(fit[gen_best])
            best_order = pop[gen_best].copy()

    order = _rotated_to_zero([int(c) for c in best_order])
    return Tour.from_order(instance, order)


def solve_ant_colony(instance: TspInstance, cfg: AcoConfig = AcoConfig()) -> Tour:
    """Ant system with an extra best-so-far deposit each iteration."""
    n = instance.n
    D = instance.distance_matrix()
    rng = np.random.default_rng(cfg.seed)
    eta = 1.0 / np.maximum(D, 1e-12)
    np.fill_diagonal(eta, 0.0)
    nn_len = tour_length(instance, _nearest_neighbor(D))
    tau = np.full((n, n), 1.0 / (n * nn_len))
    ants = cfg.ant_num

    best_order: np.ndarray | None = None
    best_len = np.inf
    rows = np.arange(ants)
    for _ in range(cfg.iterations):
        tours = np.empty((ants, n), dtype=np.int64)
        tours[:, 0] = rng.integers(0, n, ants)
        visited = np.zeros((ants, n), dtype=bool)
        visited[rows, tours[:, 0]] = True
        for step in range(1, n):
            cur = tours[:, step - 1]
            scores = (tau[cur] ** cfg.alpha) * (eta[cur] ** cfg.beta)
            scores[visited] = 0.0
            totals = scores.sum(axis=1, keepdims=True)
            uniform = (~visited).astype(np.float64)
            safe = np.where(totals > 0.0, scores, uniform)
            probs = safe / safe.sum(axis=1, keepdims=True)
            cum = np.cumsum(probs, axis=1)
            r = rng.random((ants, 1))
            choice = (cum >= r).argmax(axis=1)
            tours[:, step] = choice
            visited[rows, choice] = True
        lengths = _population_lengths(D, tours)
        k = int(np.argmin(lengths))
        if lengths[k] < best_len:
            best_len = float(lengths[k])
            best_order = tours[k].copy()
        tau *= 1.0 - cfg.rho
        for a in range(ants):
            t = tours[a]
            deposit = 1.0 / lengths[a]
            tau[t, np.roll(t, -1)] += deposit
            tau[np.roll(t, -1), t] += deposit
        bt = best_order
        elite = 1.0 / best_len
        tau[bt, np.roll(bt, -1)] += elite
        tau[np.roll(bt, -1), bt] += elite

    order = _rotated_to_zero([int(c) for c in best_order])
    return Tour.from_order(instance, order)
