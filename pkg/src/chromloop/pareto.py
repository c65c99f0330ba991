"""Constrained multi-objective maximization of fitted response models.

NSGA-II over the process-parameter box: seeded uniform initialization,
binary tournament under the feasibility-first dominance rule, simulated
binary crossover, polynomial mutation and elitist (mu + lambda)
survival by front rank then crowding distance.  All randomness comes
from one seeded generator used sequentially, so a given seed fully
determines the returned front.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .doe import MaterialAttributes, ProcessParams, format_real
from .errors import NoFeasibleSolution
from .rsm import RegressionModel, predict_batch


@dataclass(frozen=True)
class OptimizationSpec:
    """Objectives (all maximized), lower-bound constraints and box."""

    objectives: tuple[RegressionModel, ...]
    constraints: tuple[tuple[RegressionModel, float], ...]
    bounds: tuple[tuple[float, float], ...]
    attrs: MaterialAttributes

    def __post_init__(self):
        if not self.objectives:
            raise ValueError("need at least one objective")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError("bounds must satisfy low < high")


@dataclass(frozen=True)
class NsgaConfig:
    population: int = 2000
    generations: int = 100
    seed: int = 0
    sbx_eta: float = 15.0
    mutation_eta: float = 20.0
    mutation_prob: float | None = None  # default 1 / n_variables
    crossover_prob: float = 0.9

    def __post_init__(self):
        if self.population < 4 or self.population % 2 != 0:
            raise ValueError("population must be even and >= 4")


@dataclass(frozen=True)
class Evaluated:
    """Objective values plus total normalized constraint violation."""

    objectives: tuple[float, ...]
    violation: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.violation <= 0.0


@dataclass(frozen=True)
class ParetoSolution:
    params: ProcessParams
    objectives: tuple[float, ...]
    feasible: bool
    constraint_margins: tuple[float, ...]


@dataclass(frozen=True)
class ParetoFront:
    objective_names: tuple[str, ...]
    solutions: tuple[ParetoSolution, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.solutions)


def constrained_dominates(a: Evaluated, b: Evaluated) -> bool:
    """Feasibility-first dominance for maximization.

    A feasible solution dominates any infeasible one; two infeasible
    solutions compare by total violation; two feasible ones by Pareto
    dominance.
    """
    if a.feasible and not b.feasible:
        return True
    if not a.feasible and not b.feasible:
        return a.violation < b.violation
    if not a.feasible:
        return False
    ge = all(x >= y for x, y in zip(a.objectives, b.objectives))
    gt = any(x > y for x, y in zip(a.objectives, b.objectives))
    return ge and gt


def fast_nondominated_sort(pop) -> tuple[list[list[int]], list[int]]:
    """Peel non-dominated fronts; returns (fronts, rank per solution).

    Rank 0 is the non-dominated set of the whole population; rank k
    the non-dominated set once ranks below k are removed.
    """
    objs = np.array([p.objectives for p in pop], dtype=float)
    viol = np.array([p.violation for p in pop], dtype=float)
    D = _dominance_matrix(objs, viol)
    ranks = _ranks_from_matrix(D, need=len(pop))
    fronts: list[list[int]] = []
    for i, r in enumerate(ranks):
        while len(fronts) <= r:
            fronts.append([])
        fronts[r].append(i)
    return fronts, list(ranks)


def _dominance_matrix(objs: np.ndarray, viol: np.ndarray) -> np.ndarray:
    """D[i, j] = solution i constrained-dominates solution j."""
    n = objs.shape[0]
    ge = np.ones((n, n), dtype=bool)
    gt = np.zeros((n, n), dtype=bool)
    for m in range(objs.shape[1]):
        col = objs[:, m]
        ge &= col[:, None] >= col[None, :]
        gt |= col[:, None] > col[None, :]
    pareto = ge & gt
    feas = viol <= 0.0
    fi, fj = feas[:, None], feas[None, :]
    return ((fi & ~fj)
            | (~fi & ~fj & (viol[:, None] < viol[None, :]))
            | (fi & fj & pareto))

def _ranks_from_matrix(D: np.ndarray, need: int) -> np.ndarray:
    n = D.shape[0]
    counts = D.sum(axis=0).astype(np.int64)
    ranks = np.full(n, n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    r = 0
    filled = 0
    while filled < need and active.any():
        front = active & (counts == 0)
        if not front.any():
            break
        ranks[front] = r
        filled += int(front.sum())
        active &= ~front
        counts = counts - D[front].sum(axis=0)
        r += 1
    return ranks


def crowding_distance(objectives) -> list[float]:
    """Crowding distances for one front (maximization-agnostic).

    Boundary solutions of each objective get +inf; interior ones the
    sum of normalized neighbor gaps.  Fronts of size <= 2 are all
    +inf.
    """
    F = np.array([getattr(o, "objectives", o) for o in objectives],
                 dtype=float)
    n = F.shape[0]
    if n <= 2:
        return [float("inf")] * n
    d = np.zeros(n)
    for m in range(F.shape[1]):
        idx = np.argsort(F[:, m], kind="stable")
        col = F[idx, m]
        span = col[-1] - col[0]
        d[idx[0]] = d[idx[-1]] = float("inf")
        if span > 0:
            d[idx[1:-1]] += (col[2:] - col[:-2]) / span
    return d.tolist()


def sbx_crossover(p1: ProcessParams, p2: ProcessParams, eta: float,
                  rng: np.random.Generator, bounds) -> tuple[ProcessParams,
                                                             ProcessParams]:
    """Simulated binary crossover of two parameter vectors.

    Each coordinate is crossed with probability 0.5 using a shared
    spread factor, so child sums equal parent sums unless clipping to
    the bounds intervenes.
    """
    x1 = np.array(p1.values())
    x2 = np.array(p2.values())
    c1, c2 = _sbx_arrays(x1[None, :], x2[None, :], eta, rng,
                         np.array([b[0] for b in bounds]),
                         np.array([b[1] for b in bounds]),
                         crossover_prob=1.0)
    return (ProcessParams.from_values(c1[0]), ProcessParams.from_values(c2[0]))


def _sbx_arrays(p1, p2, eta, rng, lo, hi, crossover_prob):
    half, nv = p1.shape
    do_pair = rng.random(half) <= crossover_prob
    do_var = (rng.random((half, nv)) <= 0.5) & do_pair[:, None]
    u = rng.random((half, nv))
    beta = np.where(u <= 0.5,
                    (2.0 * u) ** (1.0 / (eta + 1.0)),
                    (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)))
    c1 = 0.5 * ((1 + beta) * p1 + (1 - beta) * p2)
    c2 = 0.5 * ((1 - beta) * p1 + (1 + beta) * p2)
    swap = rng.random((half, nv)) <= 0.5
    c1s = np.where(swap, c2, c1)
    c2s = np.where(swap, c1, c2)
    c1 = np.where(do_var, c1s, p1)
    c2 = np.where(do_var, c2s, p2)
    return np.clip(c1, lo, hi), np.clip(c2, lo, hi)


def polynomial_mutation(p: ProcessParams, eta: float, prob: float,
                        rng: np.random.Generator, bounds) -> ProcessParams:
    """Bounded polynomial mutation, each coordinate with given probability."""
    x = np.array(p.values())[None, :]
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    out = _mutate_arrays(x, eta, prob, rng, lo, hi)
    return ProcessParams.from_values(out[0])


def _mutate_arrays(x, eta, prob, rng, lo, hi):
    n, nv = x.shape
    do = rng.random((n, nv)) <= prob
    u = rng.random((n, nv))
    span = hi - lo
    d1 = (x - lo) / span
    d2 = (hi - x) / span
    mexp = 1.0 / (eta + 1.0)
    dq = np.where(
        u <= 0.5,
        (2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1) ** (eta + 1.0)) ** mexp - 1.0,
        1.0 - (2.0 * (1.0 - u)
               + 2.0 * (u - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** mexp)
    out = np.where(do, x + dq * span, x)
    return np.clip(out, lo, hi)


def evaluate_points(spec: OptimizationSpec, X: np.ndarray):
    """Objective matrix and normalized violations for parameter rows."""
    z = np.array(spec.attrs.values())
    F = np.column_stack([predict_batch(m, X, z) for m in spec.objectives])
    V = np.zeros(X.shape[0])
    margins = []
    for model, bound in spec.constraints:
        pred = predict_batch(model, X, z)
        margins.append(pred - bound)
        scale = abs(bound) if bound != 0 else 1.0
        V += np.maximum(0.0, (bound - pred) / scale)
    M = np.column_stack(margins) if margins else np.zeros((X.shape[0], 0))
    return F, V, M


def optimize(spec: OptimizationSpec, config: NsgaConfig) -> ParetoFront:
    """Run NSGA-II and return the final feasible non-dominated front.

    The front is deduplicated in decision space at 1e-6 relative
    tolerance.  If no feasible point exists in the final rank-0 set,
    NoFeasibleSolution is raised carrying the least-violating front.
    """
    rng = np.random.default_rng(config.seed)
    lo = np.array([b[0] for b in spec.bounds])
    hi = np.array([b[1] for b in spec.bounds])
    nv = len(spec.bounds)
    pop = config.population
    pm = config.mutation_prob if config.mutation_prob is not None else 1.0 / nv

    P = lo + rng.random((pop, nv)) * (hi - lo)
    F, V, _ = evaluate_points(spec, P)
    ranks = _ranks_from_matrix(_dominance_matrix(F, V), need=pop)
    crowd = _per_front_crowding(F, ranks)

    for _ in range(config.generations):
        parents = _tournament(rng, F, V, crowd, pop)
        PP = P[parents]
        c1, c2 = _sbx_arrays(PP[0::2], PP[1::2], config.sbx_eta, rng, lo, hi,
                             config.crossover_prob)
        C = np.empty_like(PP)
        C[0::2] = c1
        C[1::2] = c2
        C = _mutate_arrays(C, config.mutation_eta, pm, rng, lo, hi)
        FC, VC, _ = evaluate_points(spec, C)

        PA = np.vstack([P, C])
        FA = np.vstack([F, FC])
        VA = np.concatenate([V, VC])
        D = _dominance_matrix(FA, VA)
        rk = _ranks_from_matrix(D, need=pop)
        keep = _survival(FA, rk, pop)
        P, F, V = PA[keep], FA[keep], VA[keep]
        # Elitist truncation preserves front membership: dominators of
        # every survivor survive too, so combined ranks stay valid.
        ranks = rk[keep]
        crowd = _per_front_crowding(F, ranks)

    first = ranks == ranks.min()
    feasible = first & (V <= 0.0)
    if not feasible.any():
        least = _build_front(spec, P[first], F[first], V[first])
        raise NoFeasibleSolution(
            "no feasible solution in the final front", front=least)
    X = P[feasible]
    Fv = F[feasible]
    Vv = V[feasible]
    keep = _dedup_indices(X)
    return _build_front(spec, X[keep], Fv[keep], Vv[keep])


def _tournament(rng, F, V, crowd, pop):
    a = rng.permutation(pop)
    b = rng.permutation(pop)
    fa, fb = V[a] <= 0.0, V[b] <= 0.0
    pa = (F[a] >= F[b]).all(axis=1) & (F[a] > F[b]).any(axis=1)
    pb = (F[b] >= F[a]).all(axis=1) & (F[b] > F[a]).any(axis=1)
    adom = (fa & ~fb) | (~fa & ~fb & (V[a] < V[b])) | (fa & fb & pa)
    bdom = (fb & ~fa) | (~fa & ~fb & (V[b] < V[a])) | (fa & fb & pb)
    coin = rng.random(pop) < 0.5
    pick_a = adom | (~bdom & ((crowd[a] > crowd[b])
                              | ((crowd[a] == crowd[b]) & coin)))
    return np.where(pick_a, a, b)


def _survival(FA, rk, pop):
    order = np.argsort(rk, kind="stable")
    kept: list[int] = []
    i = 0
    while i < len(order):
        r = rk[order[i]]
        j = i
        while j < len(order) and rk[order[j]] == r:
            j += 1
        members = order[i:j]
        if len(kept) + len(members) <= pop:
            kept.extend(members.tolist())
        else:
            cd = np.array(crowding_distance(FA[members]))
            need = pop - len(kept)
            sel = members[np.argsort(-cd, kind="stable")[:need]]
            kept.extend(sel.tolist())
            break
        if len(kept) == pop:
            break
        i = j
    return np.array(kept[:pop])


def _per_front_crowding(F, ranks):
    crowd = np.zeros(len(F))
    for r in np.unique(ranks):
        sel = ranks == r
        crowd[sel] = crowding_distance(F[sel])
    return crowd


def _dedup_indices(X: np.ndarray, rtol: float = 1e-6) -> np.ndarray:
    order = np.lexsort(X.T[::-1])
    keep = []
    last = None
    for idx in order:
        x = X[idx]
        if last is None or not np.allclose(x, last, rtol=rtol, atol=0.0):
            keep.append(idx)
            last = x
    return np.array(sorted(keep))


def _build_front(spec, X, F, V) -> ParetoFront:
    _, _, M = evaluate_points(spec, X)
    sols = []
    for i in range(X.shape[0]):
        sols.append(ParetoSolution(
            params=ProcessParams.from_values(X[i]),
            objectives=tuple(float(v) for v in F[i]),
            feasible=bool(V[i] <= 0.0),
            constraint_margins=tuple(float(v) for v in M[i]),
        ))
    names = tuple(m.response_name for m in spec.objectives)
    return ParetoFront(objective_names=names, solutions=tuple(sols))


def select_representatives(front: ParetoFront, k: int) -> ParetoFront:
    """Down-select k spread-out solutions by greedy max crowding."""
    if len(front) <= k:
        return front
    cd = np.array(crowding_distance([s.objectives for s in front.solutions]))
    idx = np.argsort(-cd, kind="stable")[:k]
    picked = tuple(front.solutions[i] for i in sorted(idx))
    return ParetoFront(objective_names=front.objective_names,
                       solutions=picked)


def export_front_csv(front: ParetoFront) -> str:
    """Front CSV: X1..X6 columns, one column per objective, feasible."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"X{i + 1}" for i in range(6)]
                    + list(front.objective_names) + ["feasible"])
    for s in front.solutions:
        writer.writerow([format_real(v) for v in s.params.values()]
                        + [format_real(v) for v in s.objectives]
                        + [int(s.feasible)])
    return buf.getvalue()
