"""
Vectors, convex constraint atoms and regions.

Every set in a game (the domain, the target and the safe-reachable set of an
attacker) is a `ConvexRegion`: the intersection of the zero sublevel sets of a
handful of smooth convex `ConstraintAtom` functions.
"""
from __future__ import annotations

import logging
import typing as t
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from reachavoid.exceptions import (
    DegeneratePointError,
    InvalidInputError,
    SolverError,
)
from reachavoid.run_config import EPS_MEMBERSHIP

if t.TYPE_CHECKING:
    from reachavoid.run_config import SolverConfig

logger = logging.getLogger(__name__)

Vec = npt.NDArray[np.float64]
SUPPORTED_DIMENSIONS = (2, 3)


def as_vec(v: npt.ArrayLike, dim: t.Optional[int] = None, name: str = "vector") -> Vec:
    """
    Convert `v` to a finite float vector, optionally checking its length.
    """
    arr = np.array(v, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite coordinates: {arr.tolist()}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(
            f"{name} has dimension {arr.shape[0]}, expected {dim}"
        )
    return arr


def _frozen(arr: npt.ArrayLike) -> Vec:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


class ConstraintAtom(ABC):
    """
    One smooth convex scalar constraint g(q) <= 0.
    """

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def value(self, q: Vec) -> float:
        ...

    @abstractmethod
    def gradient(self, q: Vec) -> Vec:
        ...

    @abstractmethod
    def hessian(self, q: Vec, reg: float = 1e-12) -> npt.NDArray[np.float64]:
        ...

    def pinned_rows(self) -> t.Optional[t.Tuple[npt.NDArray[np.float64], Vec]]:
        """
        Linear equations (A, b) with A q = b when the atom's sublevel set has no
        interior (a zero radius ball or cylinder), None otherwise.
        """
        return None

    def _check(self, q: npt.ArrayLike) -> Vec:
        return as_vec(q, self.dim, name="query point")


@dataclass(frozen=True, eq=False)
class Affine(ConstraintAtom):
    "g(q) = normal . q + offset"

    normal: Vec
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _frozen(as_vec(self.normal, name="normal")))
        object.__setattr__(self, "offset", float(self.offset))
        if self.normal.shape[0] not in SUPPORTED_DIMENSIONS:
            raise InvalidInputError(
                f"normal must have 2 or 3 coordinates, got {self.normal.shape[0]}"
            )
        if float(np.linalg.norm(self.normal)) == 0.0:
            raise InvalidInputError("Affine normal must be nonzero")

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def value(self, q: Vec) -> float:
        return float(self.normal @ q + self.offset)

    def gradient(self, q: Vec) -> Vec:
        return np.array(self.normal)

    def hessian(self, q: Vec, reg: float = 1e-12) -> npt.NDArray[np.float64]:
        return np.zeros((self.dim, self.dim))


@dataclass(frozen=True, eq=False)
class Ball(ConstraintAtom):
    "g(q) = |q - center|^2 - radius^2"

    center: Vec
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(as_vec(self.center, name="center")))
        object.__setattr__(self, "radius", float(self.radius))
        if self.center.shape[0] not in SUPPORTED_DIMENSIONS:
            raise InvalidInputError(
                f"center must have 2 or 3 coordinates, got {self.center.shape[0]}"
            )
        if not np.isfinite(self.radius) or self.radius < 0:
            raise InvalidInputError(f"Ball radius must be >= 0, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def value(self, q: Vec) -> float:
        diff = q - self.center
        return float(diff @ diff - self.radius**2)

    def gradient(self, q: Vec) -> Vec:
        return 2.0 * (q - self.center)

    def hessian(self, q: Vec, reg: float = 1e-12) -> npt.NDArray[np.float64]:
        return 2.0 * np.eye(self.dim)

    def pinned_rows(self):
        if self.radius > 0:
            return None
        return np.eye(self.dim), np.array(self.center)


@dataclass(frozen=True, eq=False)
class AxisCylinder(ConstraintAtom):
    """
    Infinite cylinder along coordinate `axis`:
    g(q) = |q_perp - center|^2 - radius^2, where q_perp drops the axis coordinate.
    """

    axis: int
    center: Vec
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(as_vec(self.center, name="center")))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "axis", int(self.axis))
        if self.dim not in SUPPORTED_DIMENSIONS:
            raise InvalidInputError(
                f"cylinder center must have 1 or 2 coordinates, got {self.center.shape[0]}"
            )
        if not 0 <= self.axis < self.dim:
            raise InvalidInputError(f"cylinder axis {self.axis} out of range")
        if not np.isfinite(self.radius) or self.radius < 0:
            raise InvalidInputError(
                f"AxisCylinder radius must be >= 0, got {self.radius}"
            )

    @property
    def dim(self) -> int:
        return self.center.shape[0] + 1

    @property
    def _perp(self) -> t.List[int]:
        return [k for k in range(self.dim) if k != self.axis]

    def value(self, q: Vec) -> float:
        diff = q[self._perp] - self.center
        return float(diff @ diff - self.radius**2)

    def gradient(self, q: Vec) -> Vec:
        grad = np.zeros(self.dim)
        grad[self._perp] = 2.0 * (q[self._perp] - self.center)
        return grad

    def hessian(self, q: Vec, reg: float = 1e-12) -> npt.NDArray[np.float64]:
        h = np.zeros((self.dim, self.dim))
        for k in self._perp:
            h[k, k] = 2.0
        return h

    def pinned_rows(self):
        if self.radius > 0:
            return None
        return np.eye(self.dim)[self._perp], np.array(self.center)


@dataclass(frozen=True, eq=False)
class CaptureFrontier(ConstraintAtom):
    """
    Capture frontier of one defender against one attacker:
    g(q) = (gamma |q - a| + r)^2 - |q - d|^2.

    Its zero sublevel set holds the points the attacker reaches no later than the
    defender can intercept it.
    """

    defender_pos: Vec
    attacker_pos: Vec
    gamma: float
    capture_radius: float

    def __post_init__(self):
        d = as_vec(self.defender_pos, name="defender position")
        a = as_vec(self.attacker_pos, d.shape[0], name="attacker position")
        object.__setattr__(self, "defender_pos", _frozen(d))
        object.__setattr__(self, "attacker_pos", _frozen(a))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "capture_radius", float(self.capture_radius))
        if d.shape[0] not in SUPPORTED_DIMENSIONS:
            raise InvalidInputError(
                f"positions must have 2 or 3 coordinates, got {d.shape[0]}"
            )
        if not np.isfinite(self.gamma) or self.gamma < 1.0:
            raise InvalidInputError(
                f"speed ratio gamma must be >= 1 (defenders at least as fast as the attacker), got {self.gamma}"
            )
        if not np.isfinite(self.capture_radius) or self.capture_radius < 0:
            raise InvalidInputError(
                f"capture radius must be >= 0, got {self.capture_radius}"
            )

    @property
    def dim(self) -> int:
        return self.defender_pos.shape[0]

    def value(self, q: Vec) -> float:
        da = float(np.linalg.norm(q - self.attacker_pos))
        dd = q - self.defender_pos
        return float((self.gamma * da + self.capture_radius) ** 2 - dd @ dd)

    def _unit(self, q: Vec) -> t.Tuple[Vec, float]:
        diff = q - self.attacker_pos
        norm = float(np.linalg.norm(diff))
        if norm == 0.0:
            return np.zeros(self.dim), 0.0
        return diff / norm, norm

    def gradient(self, q: Vec) -> Vec:
        g, r = self.gamma, self.capture_radius
        u, _ = self._unit(q)
        return (
            2.0 * (g * g - 1.0) * q
            + 2.0 * r * g * u
            + 2.0 * (self.defender_pos - g * g * self.attacker_pos)
        )

    def hessian(self, q: Vec, reg: float = 1e-12) -> npt.NDArray[np.float64]:
        g, r = self.gamma, self.capture_radius
        eye = np.eye(self.dim)
        h = 2.0 * (g * g - 1.0) * eye + reg * eye
        u, norm = self._unit(q)
        if norm > 0.0 and r > 0.0:
            h = h + 2.0 * r * g * (eye - np.outer(u, u)) / norm
        return h

    def param_gradients(self, q: Vec) -> t.Tuple[Vec, Vec]:
        diff = q - self.attacker_pos
        norm = float(np.linalg.norm(diff))
        if norm == 0.0:
            raise DegeneratePointError(q)
        zeta = self.gamma**2 + self.capture_radius * self.gamma / norm
        return 2.0 * (q - self.defender_pos), -2.0 * zeta * diff


@dataclass(frozen=True)
class ConvexRegion:
    """
    Intersection of constraint atoms; no atoms means the whole space.
    """

    atoms: t.Tuple[ConstraintAtom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        dims = {a.dim for a in atoms}
        if len(dims) > 1:
            raise InvalidInputError(
                f"region mixes atoms of dimensions {sorted(dims)}"
            )
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self) -> t.Optional[int]:
        return self.atoms[0].dim if self.atoms else None

    def __len__(self) -> int:
        return len(self.atoms)

    def intersect(self, other: ConvexRegion) -> ConvexRegion:
        return ConvexRegion(self.atoms + other.atoms)

    def values(self, q: npt.ArrayLike) -> npt.NDArray[np.float64]:
        q = as_vec(q, self.dim, name="query point")
        return np.array([a.value(q) for a in self.atoms], dtype=np.float64)

    def max_value(self, q: npt.ArrayLike) -> float:
        if not self.atoms:
            return -np.inf
        return float(np.max(self.values(q)))

    def contains(self, q: npt.ArrayLike, eps: float = EPS_MEMBERSHIP) -> bool:
        return region_contains(self, q, eps)


def atom_value(atom: ConstraintAtom, q: npt.ArrayLike) -> float:
    return atom.value(atom._check(q))


def atom_gradient(atom: ConstraintAtom, q: npt.ArrayLike) -> Vec:
    """
    Gradient of the atom at `q`.

    At the kink of a capture frontier (q equal to the attacker position) the norm
    term contributes no direction.
    """
    return atom.gradient(atom._check(q))


def atom_hessian(
    atom: ConstraintAtom, q: npt.ArrayLike, reg: float = 1e-12
) -> npt.NDArray[np.float64]:
    return atom.hessian(atom._check(q), reg=reg)


def capture_frontier_param_gradients(
    atom: CaptureFrontier, q: npt.ArrayLike
) -> t.Tuple[Vec, Vec]:
    """
    Partial derivatives of the capture frontier with respect to the defender and
    the attacker positions, evaluated at `q`.

    Returns
    -------
    (grad_wrt_defender, grad_wrt_attacker)

    Raises
    ------
    DegeneratePointError
        When `q` is the attacker position.
    """
    if not isinstance(atom, CaptureFrontier):
        raise InvalidInputError(
            f"expected a CaptureFrontier atom, got {type(atom).__name__}"
        )
    return atom.param_gradients(atom._check(q))


def build_srs(
    defender_positions: t.Sequence[npt.ArrayLike],
    attacker_position: npt.ArrayLike,
    gammas: t.Sequence[float],
    radii: t.Sequence[float],
    domain: ConvexRegion,
) -> ConvexRegion:
    """
    Safe-reachable set of one attacker against a coalition of defenders.

    The domain atoms come first, followed by one capture frontier per defender in
    the order given.
    """
    if not (len(defender_positions) == len(gammas) == len(radii)):
        raise InvalidInputError(
            "defender_positions, gammas and radii must have equal lengths, got "
            f"{len(defender_positions)}, {len(gammas)} and {len(radii)}"
        )
    a = as_vec(attacker_position, domain.dim, name="attacker position")
    frontiers = tuple(
        CaptureFrontier(as_vec(d, a.shape[0], "defender position"), a, g, r)
        for d, g, r in zip(defender_positions, gammas, radii)
    )
    return ConvexRegion(domain.atoms + frontiers)


def region_contains(
    region: ConvexRegion, q: npt.ArrayLike, eps: float = EPS_MEMBERSHIP
) -> bool:
    if eps < 0:
        raise InvalidInputError(f"eps must be >= 0, got {eps}")
    if not region.atoms:
        return True
    return region.max_value(q) <= eps


def capture_region_contains(
    defender_position: npt.ArrayLike,
    attacker_position: npt.ArrayLike,
    radius: float,
) -> bool:
    "strict membership |p_a - p_d| < r"
    d = as_vec(defender_position, name="defender position")
    a = as_vec(attacker_position, d.shape[0], name="attacker position")
    return float(np.linalg.norm(a - d)) < radius


def apollonius_ball(
    defender_position: npt.ArrayLike, attacker_position: npt.ArrayLike, gamma: float
) -> t.Tuple[Vec, float]:
    """
    Center and radius of the set gamma |q - a| <= |q - d| for a strictly faster
    defender without capture radius.
    """
    if not gamma > 1.0:
        raise InvalidInputError(f"an Apollonius ball needs gamma > 1, got {gamma}")
    d = as_vec(defender_position, name="defender position")
    a = as_vec(attacker_position, d.shape[0], name="attacker position")
    g2 = gamma**2
    center = (g2 * a - d) / (g2 - 1.0)
    radius = gamma * float(np.linalg.norm(a - d)) / (g2 - 1.0)
    return center, radius


def _is_axis_aligned(atom: ConstraintAtom) -> bool:
    return isinstance(atom, Affine) and int(np.count_nonzero(atom.normal)) == 1


def _box_bounds(region: ConvexRegion) -> t.Tuple[Vec, Vec]:
    dim = t.cast(int, region.dim)
    lower = np.full(dim, -np.inf)
    upper = np.full(dim, np.inf)
    for atom in region.atoms:
        atom = t.cast(Affine, atom)
        k = int(np.flatnonzero(atom.normal)[0])
        bound = -atom.offset / atom.normal[k]
        if atom.normal[k] > 0:
            upper[k] = min(upper[k], bound)
        else:
            lower[k] = max(lower[k], bound)
    return lower, upper


def project_to_domain(
    domain: ConvexRegion,
    q: npt.ArrayLike,
    solver_config: t.Optional[SolverConfig] = None,
) -> Vec:
    """
    Euclidean projection of `q` onto `domain`; points inside are returned as is.

    Axis-aligned boxes, single balls and single cylinders are projected in
    closed form; anything else goes through the projection program of the
    solver.
    """
    q = as_vec(q, domain.dim, name="point")
    if region_contains(domain, q, eps=0.0):
        return q.copy()
    if all(_is_axis_aligned(a) for a in domain.atoms):
        lower, upper = _box_bounds(domain)
        if np.all(lower <= upper):
            return np.clip(q, lower, upper)
    if len(domain.atoms) == 1 and isinstance(domain.atoms[0], Ball):
        ball = domain.atoms[0]
        diff = q - ball.center
        return ball.center + diff * (ball.radius / float(np.linalg.norm(diff)))
    if len(domain.atoms) == 1 and isinstance(domain.atoms[0], AxisCylinder):
        cyl = domain.atoms[0]
        out = q.copy()
        diff = q[cyl._perp] - cyl.center
        out[cyl._perp] = cyl.center + diff * (cyl.radius / float(np.linalg.norm(diff)))
        return out

    from reachavoid.solver import CheckCounter, SolveStatus, solve_projection

    result = solve_projection(q, domain, CheckCounter(), config=solver_config)
    if result.status is not SolveStatus.OPTIMAL:
        raise SolverError(result.status, what="domain projection")
    return result.primal_q


# region constructors used by scenarios and presets


def box(lower: npt.ArrayLike, upper: npt.ArrayLike) -> ConvexRegion:
    lo = as_vec(lower, name="lower corner")
    hi = as_vec(upper, lo.shape[0], name="upper corner")
    if np.any(lo > hi):
        raise InvalidInputError(f"box lower corner {lo.tolist()} exceeds {hi.tolist()}")
    atoms: t.List[ConstraintAtom] = []
    for k in range(lo.shape[0]):
        e = np.zeros(lo.shape[0])
        e[k] = 1.0
        atoms.append(Affine(e, -hi[k]))
        atoms.append(Affine(-e, lo[k]))
    return ConvexRegion(tuple(atoms))


def ball_region(center: npt.ArrayLike, radius: float) -> ConvexRegion:
    return ConvexRegion((Ball(center, radius),))


def point_region(p: npt.ArrayLike) -> ConvexRegion:
    return ConvexRegion((Ball(p, 0.0),))


def halfspace(normal: npt.ArrayLike, offset: float) -> ConvexRegion:
    "{q : normal . q + offset <= 0}"
    return ConvexRegion((Affine(normal, offset),))


def cylinder_region(axis: int, center: npt.ArrayLike, radius: float) -> ConvexRegion:
    return ConvexRegion((AxisCylinder(axis, center, radius),))


def region_bounds(region: ConvexRegion) -> t.Tuple[Vec, Vec]:
    """
    Axis-aligned bounding box of the region as far as its axis-aligned halfspaces
    and balls reveal it; unbounded sides come back as +-inf.
    """
    dim = region.dim
    if dim is None:
        raise InvalidInputError("the whole space has no bounding box")
    lower = np.full(dim, -np.inf)
    upper = np.full(dim, np.inf)
    for atom in region.atoms:
        if _is_axis_aligned(atom):
            lo, hi = _box_bounds(ConvexRegion((atom,)))
            lower, upper = np.maximum(lower, lo), np.minimum(upper, hi)
        elif isinstance(atom, Ball):
            lower = np.maximum(lower, atom.center - atom.radius)
            upper = np.minimum(upper, atom.center + atom.radius)
        elif isinstance(atom, AxisCylinder):
            perp = atom._perp
            lower[perp] = np.maximum(lower[perp], atom.center - atom.radius)
            upper[perp] = np.minimum(upper[perp], atom.center + atom.radius)
    return lower, upper
