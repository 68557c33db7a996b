"""
Small dense log-barrier interior point solver for the two parametric programs of
the game:

* min |q - qt|^2 with q in region A and qt in region B (minimum distance), and
* min |q - p|^2 with q in a region (projection).

Zero-radius balls/cylinders and opposing halfspaces leave a region without
interior; such atoms are turned into linear equalities and eliminated by an
affine change of variables q = origin + basis @ z before the barrier runs.
"""
from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import numpy.typing as npt
from scipy.linalg import null_space
from scipy.optimize import nnls

from reachavoid.exceptions import InvalidInputError
from reachavoid.geometry import Affine, ConstraintAtom, ConvexRegion, Vec, as_vec
from reachavoid.run_config import DEFAULT_SOLVER_CONFIG, SolverConfig

logger = logging.getLogger(__name__)

# phase-1 stops as soon as every atom is this far below zero
_PHASE1_MARGIN = 1e-6
# a start point this far inside the region skips phase-1
_STRICT_START = 1e-8
# regions thinner than this get relaxed by a few ulps before the barrier runs
_THIN_REGION = 1e-10
_EQUALITY_TOL = 1e-12
_ARMIJO = 0.01
_MAX_BACKTRACK = 60


class SolveStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class CheckCounter:
    """
    Counts minimum distance solves, the efficiency measure of an allocation.
    """

    count: int = 0

    def increment(self, by: int = 1) -> None:
        self.count += by

    def merge(self, other: CheckCounter) -> None:
        self.count += other.count


@dataclass
class SolveResult:
    """
    Outcome of one convex program.

    `multipliers`, `atom_values` and `active_set` are aligned with `atoms`, the
    atoms of the first region followed by those of the second region (if any).
    `bases` holds the (origin, basis) pair of every variable block; None means the
    block was not reparametrised.
    """

    value: float
    primal_q: Vec
    primal_qtilde: t.Optional[Vec]
    multipliers: npt.NDArray[np.float64]
    active_set: t.List[int]
    status: SolveStatus
    iterations: int
    atoms: t.Tuple[ConstraintAtom, ...] = field(default=(), repr=False)
    n_atoms_q: int = 0
    anchor: t.Optional[Vec] = None
    bases: t.Optional[t.Tuple[t.Optional[npt.NDArray[np.float64]], ...]] = field(
        default=None, repr=False
    )
    atom_values: t.Optional[npt.NDArray[np.float64]] = field(default=None, repr=False)
    mu: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


class _Block:
    """
    One variable block q = origin + basis @ z constrained by region atoms.
    """

    def __init__(self, region: ConvexRegion, dim: int):
        self.atoms = region.atoms
        self.dim = dim
        self.consistent = True
        rows, rhs, equality = [], [], set()
        for i, atom in enumerate(self.atoms):
            pinned = atom.pinned_rows()
            if pinned is not None:
                rows.append(pinned[0])
                rhs.append(pinned[1])
                equality.add(i)
        affine = [
            (i, a.normal / np.linalg.norm(a.normal), a.offset / np.linalg.norm(a.normal))
            for i, a in enumerate(self.atoms)
            if isinstance(a, Affine)
        ]
        for x, (i, ni, oi) in enumerate(affine):
            for j, nj, oj in affine[x + 1 :]:
                opposite = np.linalg.norm(ni + nj) <= _EQUALITY_TOL
                if opposite and abs(oi + oj) <= _EQUALITY_TOL:
                    rows.append(ni[None, :])
                    rhs.append(np.array([-oi]))
                    equality.update((i, j))

        if rows:
            A = np.vstack(rows)
            b = np.concatenate(rhs)
            self.origin = np.linalg.lstsq(A, b, rcond=None)[0]
            self.consistent = bool(np.linalg.norm(A @ self.origin - b) <= 1e-9)
            self.basis = null_space(A)
            self.reparametrised = True
        else:
            self.origin = np.zeros(dim)
            self.basis = np.eye(dim)
            self.reparametrised = False
        self.barrier_idx = [i for i in range(len(self.atoms)) if i not in equality]
        self.delta = 0.0

    @property
    def size(self) -> int:
        return self.basis.shape[1]

    def point(self, z: Vec) -> Vec:
        return self.origin + self.basis @ z

    def coords(self, q: Vec) -> Vec:
        return self.basis.T @ (q - self.origin)

    def barrier_values(self, z: Vec) -> npt.NDArray[np.float64]:
        q = self.point(z)
        return np.array(
            [self.atoms[i].value(q) - self.delta for i in self.barrier_idx]
        )

    def barrier_derivatives(
        self, z: Vec, reg: float
    ) -> t.Tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        "values, reduced gradients (rows) and reduced Hessians of the barrier atoms"
        q = self.point(z)
        vals, grads, hessians = [], [], []
        for i in self.barrier_idx:
            atom = self.atoms[i]
            vals.append(atom.value(q) - self.delta)
            grads.append(self.basis.T @ atom.gradient(q))
            hessians.append(self.basis.T @ atom.hessian(q, reg=reg) @ self.basis)
        k = self.size
        return (
            np.array(vals),
            np.array(grads).reshape(len(vals), k),
            np.array(hessians).reshape(len(vals), k, k),
        )

    def base(self) -> t.Optional[npt.NDArray[np.float64]]:
        return self.basis if self.reparametrised else None


def _newton_direction(hess: npt.NDArray[np.float64], grad: Vec) -> Vec:
    n = grad.shape[0]
    scale = max(1.0, float(np.max(np.abs(np.diag(hess))))) if n else 1.0
    try:
        return np.linalg.solve(hess + 1e-14 * scale * np.eye(n), -grad)
    except np.linalg.LinAlgError:
        return -np.linalg.lstsq(hess, grad, rcond=None)[0]


def _phase1(block: _Block, z0: Vec, config: SolverConfig) -> t.Tuple[Vec, float]:
    """
    Find a point deep inside the block's barrier atoms by minimising s subject to
    g_i(z) <= s. Returns the point and max_i g_i there.

    A proximal term (mu / 2) |z - z0|^2 keeps the steps finite along directions
    in which every atom is affine; it vanishes with the barrier weight.
    """
    if not block.barrier_idx:
        return z0, -np.inf
    smax = float(np.max(block.barrier_values(z0)))
    if block.size == 0 or smax < -_STRICT_START:
        return z0, smax

    k = block.size
    y = np.concatenate([z0, [smax + 1.0]])
    mu = config.mu0
    mu_floor = config.mu_min * 1e-2

    def objective(y: Vec, mu: float) -> float:
        slack = y[-1] - block.barrier_values(y[:k])
        if np.any(slack <= 0):
            return np.inf
        prox = 0.5 * mu * float(np.sum((y[:k] - z0) ** 2))
        return float(y[-1] + prox - mu * np.sum(np.log(slack)))

    while True:
        for _ in range(config.max_newton_per_stage):
            vals, grads, hessians = block.barrier_derivatives(y[:k], config.hessian_reg)
            slack = y[-1] - vals
            inv = 1.0 / slack
            grad = np.concatenate(
                [
                    mu * (grads.T @ inv + (y[:k] - z0)),
                    [1.0 - mu * float(np.sum(inv))],
                ]
            )
            hess = np.zeros((k + 1, k + 1))
            hess[:k, :k] = mu * (
                np.einsum("i,ijk->jk", inv, hessians)
                + grads.T @ (grads * (inv**2)[:, None])
                + np.eye(k)
            )
            hess[:k, k] = hess[k, :k] = -mu * (grads.T @ inv**2)
            hess[k, k] = mu * float(np.sum(inv**2))
            dy = _newton_direction(hess, grad)
            decrement = -float(grad @ dy)
            if decrement / 2.0 <= config.newton_tol:
                break
            step = _line_search(lambda v: objective(v, mu), y, dy, float(grad @ dy))
            if step is None:
                break
            y = y + step * dy
            if y[-1] <= -_PHASE1_MARGIN:
                break
        if y[-1] <= -_PHASE1_MARGIN or mu <= mu_floor * (1 + 1e-9):
            break
        mu /= config.mu_factor

    z = y[:k]
    return z, float(np.max(block.barrier_values(z)))


def _line_search(
    objective: t.Callable[[Vec], float], x: Vec, dx: Vec, slope: float
) -> t.Optional[float]:
    f0 = objective(x)
    step = 1.0
    for _ in range(_MAX_BACKTRACK):
        f1 = objective(x + step * dx)
        if np.isfinite(f1) and f1 <= f0 + _ARMIJO * step * slope:
            return step
        step *= 0.5
    return None


class _Program:
    """
    min |c + M x|^2 over the stacked block coordinates x, solved with a
    log-barrier on the non-equality atoms.
    """

    def __init__(
        self,
        blocks: t.List[_Block],
        signs: t.List[float],
        anchor: t.Optional[Vec],
        config: SolverConfig,
    ):
        self.blocks = blocks
        self.config = config
        self.M = np.hstack([s * b.basis for b, s in zip(blocks, signs)])
        self.c = sum((s * b.origin for b, s in zip(blocks, signs)), np.zeros(blocks[0].dim))
        if anchor is not None:
            self.c = self.c - anchor
        self.offsets = np.cumsum([0] + [b.size for b in blocks])

    def split(self, x: Vec) -> t.List[Vec]:
        return [x[self.offsets[i] : self.offsets[i + 1]] for i in range(len(self.blocks))]

    def objective(self, x: Vec) -> float:
        r = self.c + self.M @ x
        return float(r @ r)

    def barrier(self, x: Vec, mu: float) -> float:
        total = self.objective(x)
        for block, z in zip(self.blocks, self.split(x)):
            if block.size == 0 or not block.barrier_idx:
                continue
            vals = block.barrier_values(z)
            if np.any(vals >= 0):
                return np.inf
            total -= mu * float(np.sum(np.log(-vals)))
        return total

    def derivatives(self, x: Vec, mu: float) -> t.Tuple[Vec, npt.NDArray[np.float64]]:
        r = self.c + self.M @ x
        grad = 2.0 * self.M.T @ r
        hess = 2.0 * self.M.T @ self.M
        for i, (block, z) in enumerate(zip(self.blocks, self.split(x))):
            if block.size == 0 or not block.barrier_idx:
                continue
            lo, hi = self.offsets[i], self.offsets[i + 1]
            vals, grads, hessians = block.barrier_derivatives(z, self.config.hessian_reg)
            inv = -1.0 / vals
            grad[lo:hi] += mu * (grads.T @ inv)
            hess[lo:hi, lo:hi] += mu * (
                np.einsum("i,ijk->jk", inv, hessians)
                + grads.T @ (grads * (inv**2)[:, None])
            )
        return grad, hess

    def run(self, x: Vec) -> t.Tuple[Vec, float, int, SolveStatus]:
        config = self.config
        mu = config.mu0
        iterations = 0
        if x.shape[0] == 0:
            return x, mu, iterations, SolveStatus.OPTIMAL
        while True:
            for _ in range(config.max_newton_per_stage):
                grad, hess = self.derivatives(x, mu)
                dx = _newton_direction(hess, grad)
                decrement = -float(grad @ dx)
                if decrement / 2.0 <= config.newton_tol:
                    break
                step = _line_search(
                    lambda v: self.barrier(v, mu), x, dx, float(grad @ dx)
                )
                if step is None:
                    break
                x = x + step * dx
                iterations += 1
                if iterations >= config.max_iterations:
                    logger.warning(
                        "barrier method hit the iteration cap (%d) at mu=%.1e",
                        config.max_iterations,
                        mu,
                    )
                    return x, mu, iterations, SolveStatus.MAX_ITERATIONS
            if mu <= config.mu_min * (1 + 1e-9):
                return x, mu, iterations, SolveStatus.OPTIMAL
            mu /= config.mu_factor


def _resolve_dim(*candidates: t.Optional[int]) -> int:
    dims = {d for d in candidates if d is not None}
    if len(dims) != 1:
        raise InvalidInputError(
            f"cannot infer a single problem dimension from {sorted(dims)}"
        )
    return dims.pop()


def _start(block: _Block, guess: t.Optional[npt.ArrayLike]) -> Vec:
    if guess is None:
        return np.zeros(block.size)
    return block.coords(as_vec(guess, block.dim, name="initial guess"))


def _prepare(
    blocks: t.List[_Block], starts: t.List[Vec], config: SolverConfig
) -> t.Tuple[t.Optional[t.List[Vec]], t.List[Vec]]:
    """
    Run phase-1 on each block; returns (feasible starts or None, phase-1 points).
    """
    points, feasible = [], True
    for block, z0 in zip(blocks, starts):
        if not block.consistent:
            logger.debug("equality constraints of a region are inconsistent")
            points.append(z0)
            feasible = False
            continue
        z, smax = _phase1(block, z0, config)
        points.append(z)
        if smax > config.infeasible_tol:
            logger.debug("phase-1 optimum %.3e declares a region empty", smax)
            feasible = False
        elif smax > -_THIN_REGION:
            block.delta = max(smax, 0.0) + _THIN_REGION
    return (points if feasible else None), points


def _finish(
    program: _Program,
    x: Vec,
    mu: float,
    iterations: int,
    status: SolveStatus,
    anchor: t.Optional[Vec],
    config: SolverConfig,
) -> SolveResult:
    blocks = program.blocks
    points = [b.point(z) for b, z in zip(blocks, program.split(x))]
    atoms: t.Tuple[ConstraintAtom, ...] = tuple(a for b in blocks for a in b.atoms)
    values = np.concatenate(
        [[a.value(p) for a in b.atoms] for b, p in zip(blocks, points)]
    ).astype(np.float64)
    multipliers = np.zeros(len(atoms))
    offset = 0
    for block in blocks:
        if block.size > 0:
            for i in block.barrier_idx:
                slack = block.delta - values[offset + i]
                multipliers[offset + i] = mu / slack if slack > 0 else 0.0
        offset += len(block.atoms)

    result = SolveResult(
        value=program.objective(x),
        primal_q=points[0],
        primal_qtilde=points[1] if len(points) > 1 else None,
        multipliers=multipliers,
        active_set=[],
        status=status,
        iterations=iterations,
        atoms=atoms,
        n_atoms_q=len(blocks[0].atoms),
        anchor=anchor,
        bases=tuple(b.base() for b in blocks),
        atom_values=values,
        mu=mu,
    )
    result.active_set = active_set(result, config.eps_active)
    if status is SolveStatus.OPTIMAL:
        _polish_multipliers(result, blocks)
    return result


def _polish_multipliers(result: SolveResult, blocks: t.List[_Block]) -> None:
    """
    Refit the multipliers of the active atoms by nonnegative least squares on the
    stationarity equations; the barrier estimates carry rounding noise of order
    eps / mu.
    """
    barrier = set()
    offset = 0
    for block in blocks:
        if block.size > 0:
            barrier.update(offset + i for i in block.barrier_idx)
        offset += len(block.atoms)
    active = [i for i in result.active_set if i in barrier]
    if not active:
        return
    before = kkt_residual(result)
    trial = result.multipliers.copy()
    trial[active] = 0.0
    base = _stationarity(result, trial)
    columns = []
    for i in active:
        unit = np.zeros(len(trial))
        unit[i] = 1.0
        columns.append(_stationarity(result, unit, include_objective=False))
    fitted, _ = nnls(np.column_stack(columns), -base)
    trial[active] = fitted
    if float(np.linalg.norm(_stationarity(result, trial))) < before:
        result.multipliers = trial


def _stationarity(
    result: SolveResult,
    multipliers: npt.NDArray[np.float64],
    include_objective: bool = True,
) -> Vec:
    q = result.primal_q
    points = [q] if result.primal_qtilde is None else [q, result.primal_qtilde]
    if result.primal_qtilde is None:
        diff = q - (result.anchor if result.anchor is not None else q)
        grads = [2.0 * diff]
    else:
        diff = q - result.primal_qtilde
        grads = [2.0 * diff, -2.0 * diff]
    if not include_objective:
        grads = [np.zeros_like(g) for g in grads]
    blocks = [range(0, result.n_atoms_q), range(result.n_atoms_q, len(result.atoms))]
    for k, point in enumerate(points):
        for i in blocks[k]:
            if multipliers[i] != 0.0:
                grads[k] = grads[k] + multipliers[i] * result.atoms[i].gradient(point)
    bases = result.bases or (None,) * len(points)
    reduced = [g if b is None else b.T @ g for g, b in zip(grads, bases)]
    return np.concatenate(reduced)


def solve_min_distance(
    region_a: ConvexRegion,
    region_b: ConvexRegion,
    counter: CheckCounter,
    q0: t.Optional[npt.ArrayLike] = None,
    qtilde0: t.Optional[npt.ArrayLike] = None,
    config: t.Optional[SolverConfig] = None,
) -> SolveResult:
    """
    Minimum squared distance between two convex regions.

    Parameters
    ----------
    region_a, region_b : ConvexRegion
        Constraints on q and on qtilde respectively.
    counter : CheckCounter
        Incremented by one for every call.
    q0, qtilde0 : array-like, optional
        Phase-1 starting points.
    config : SolverConfig, optional

    Returns
    -------
    SolveResult
        `value` is the minimum, `primal_q`/`primal_qtilde` the minimisers. An empty
        region yields status Infeasible with an infinite value.
    """
    config = config or DEFAULT_SOLVER_CONFIG
    counter.increment()
    dim = _resolve_dim(
        region_a.dim,
        region_b.dim,
        None if q0 is None else int(np.size(q0)),
    )
    blocks = [_Block(region_a, dim), _Block(region_b, dim)]
    starts = [_start(blocks[0], q0), _start(blocks[1], qtilde0)]
    program = _Program(blocks, [1.0, -1.0], None, config)
    feasible, points = _prepare(blocks, starts, config)
    if feasible is None:
        return _infeasible(program, points)
    x, mu, iterations, status = program.run(np.concatenate(feasible))
    return _finish(program, x, mu, iterations, status, None, config)


def solve_projection(
    point: npt.ArrayLike,
    region: ConvexRegion,
    counter: CheckCounter,
    q0: t.Optional[npt.ArrayLike] = None,
    config: t.Optional[SolverConfig] = None,
) -> SolveResult:
    """
    Euclidean projection of `point` onto `region` (squared distance as value).

    The counter is left untouched; only minimum distance solves count as checks.
    """
    config = config or DEFAULT_SOLVER_CONFIG
    p = as_vec(point, region.dim, name="point")
    dim = p.shape[0]
    block = _Block(region, dim)
    program = _Program([block], [1.0], p, config)
    feasible, points = _prepare(
        [block], [_start(block, p if q0 is None else q0)], config
    )
    if feasible is None:
        return _infeasible(program, points, anchor=p)
    x, mu, iterations, status = program.run(np.concatenate(feasible))
    return _finish(program, x, mu, iterations, status, p, config)


def _infeasible(
    program: _Program, points: t.List[Vec], anchor: t.Optional[Vec] = None
) -> SolveResult:
    blocks = program.blocks
    qs = [b.point(z) for b, z in zip(blocks, points)]
    atoms = tuple(a for b in blocks for a in b.atoms)
    return SolveResult(
        value=np.inf,
        primal_q=qs[0],
        primal_qtilde=qs[1] if len(qs) > 1 else None,
        multipliers=np.zeros(len(atoms)),
        active_set=[],
        status=SolveStatus.INFEASIBLE,
        iterations=0,
        atoms=atoms,
        n_atoms_q=len(blocks[0].atoms),
        anchor=anchor,
        bases=tuple(b.base() for b in blocks),
        atom_values=None,
    )


def active_set(result: SolveResult, eps_active: float = 1e-6) -> t.List[int]:
    "indices of atoms with |g| <= eps_active at the primal solution"
    if result.status is SolveStatus.INFEASIBLE:
        return []
    values = result.atom_values
    if values is None:
        values = _atom_values(result)
    return [i for i, v in enumerate(values) if abs(v) <= eps_active]


def _atom_values(result: SolveResult) -> npt.NDArray[np.float64]:
    out = []
    for i, atom in enumerate(result.atoms):
        point = result.primal_q if i < result.n_atoms_q else result.primal_qtilde
        out.append(atom.value(t.cast(Vec, point)))
    return np.array(out)


def _with_regions(result: SolveResult, regions) -> SolveResult:
    if regions is None:
        return result
    if isinstance(regions, ConvexRegion):
        regions = (regions,)
    regions = tuple(regions)
    atoms = tuple(a for r in regions for a in r.atoms)
    if len(atoms) != len(result.multipliers):
        raise InvalidInputError(
            f"regions hold {len(atoms)} atoms but the result has {len(result.multipliers)} multipliers"
        )
    return replace(result, atoms=atoms, n_atoms_q=len(regions[0].atoms))


def kkt_residual(
    result: SolveResult,
    regions: t.Optional[t.Union[ConvexRegion, t.Sequence[ConvexRegion]]] = None,
) -> float:
    """
    Norm of the Lagrangian gradient at the stored primal point and multipliers,
    restricted to the free directions of each block.
    """
    return float(np.linalg.norm(_stationarity(_with_regions(result, regions), result.multipliers)))


def complementary_slackness(
    result: SolveResult,
    regions: t.Optional[t.Union[ConvexRegion, t.Sequence[ConvexRegion]]] = None,
) -> float:
    "max_i |lambda_i g_i| at the primal solution"
    result = _with_regions(result, regions)
    if not len(result.multipliers):
        return 0.0
    return float(np.max(np.abs(result.multipliers * _atom_values(result))))
