"""Movement primitives as contracting discrete-time maps.

A primitive is a map with a unique fixed point, paired with a quadratic
Lyapunov function and a sampled basin-of-attraction estimate.  Libraries
collect several primitives over a shared state space so that a supervisor
can switch among them.
"""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np

FIXED_POINT_TOL = 1e-12
SYMMETRY_TOL = 1e-10
RATIO_TOL = 1e-12

_SAMPLE_BATCH = 512
_MAX_SAMPLE_BATCHES = 100_000


def _frozen_array(value, name: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PrimitiveMap:
    """Discrete-time update  x -> x* + A (x - x*) + q(x - x*) + B d.

    ``linear`` is A, ``fixed_point`` is x*, ``disturbance_gain`` is B and
    ``quadratic`` optionally stacks one symmetric coefficient matrix per
    output coordinate, q_i(y) = y^T Q[i] y.  The spectral radius of A must
    be below one so the undisturbed fixed point is locally attracting.
    """

    linear: np.ndarray
    fixed_point: np.ndarray
    disturbance_gain: np.ndarray
    quadratic: np.ndarray | None = None

    def __post_init__(self):
        fp = _frozen_array(self.fixed_point, "fixed_point")
        if fp.ndim != 1 or fp.size == 0:
            raise ValueError("fixed_point must be a nonempty vector")
        n = fp.size
        lin = _frozen_array(self.linear, "linear", (n, n))
        gain = np.array(self.disturbance_gain, dtype=float)
        if gain.ndim != 2 or gain.shape[0] != n:
            raise ValueError(f"disturbance_gain must be ({n}, m), got {gain.shape}")
        gain = _frozen_array(gain, "disturbance_gain")
        radius = float(np.max(np.abs(np.linalg.eigvals(lin))))
        if radius >= 1.0:
            raise ValueError(f"spectral radius of linear part is {radius:.6g}, must be < 1")
        quad = self.quadratic
        if quad is not None:
            quad = _frozen_array(quad, "quadratic", (n, n, n))
            skew = np.max(np.abs(quad - np.transpose(quad, (0, 2, 1))))
            if skew > SYMMETRY_TOL:
                raise ValueError(f"quadratic coefficient slices must be symmetric, asymmetry {skew:.3g}")
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "fixed_point", fp)
        object.__setattr__(self, "disturbance_gain", gain)
        object.__setattr__(self, "quadratic", quad)

    @property
    def state_dim(self) -> int:
        return self.fixed_point.size

    @property
    def dist_dim(self) -> int:
        return self.disturbance_gain.shape[1]

    def __call__(self, x: np.ndarray, d: np.ndarray | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.state_dim,):
            raise ValueError(f"state must have shape ({self.state_dim},), got {x.shape}")
        y = x - self.fixed_point
        out = self.fixed_point + self.linear @ y
        if self.quadratic is not None:
            out = out + np.einsum("i,kij,j->k", y, self.quadratic, y)
        if d is not None:
            d = np.asarray(d, dtype=float)
            if d.shape != (self.dist_dim,):
                raise ValueError(f"disturbance must have shape ({self.dist_dim},), got {d.shape}")
            out = out + self.disturbance_gain @ d
        return out

    def apply_batch(self, points: np.ndarray) -> np.ndarray:
        """Undisturbed update of a stack of states, shape (N, n)."""
        y = np.asarray(points, dtype=float) - self.fixed_point
        out = self.fixed_point + y @ self.linear.T
        if self.quadratic is not None:
            out = out + np.einsum("ni,kij,nj->nk", y, self.quadratic, y)
        return out


@dataclass(frozen=True)
class QuadraticLyapunov:
    """V(x) = (x - center)^T weight (x - center) with symmetric positive definite weight."""

    weight: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        center = _frozen_array(self.center, "center")
        if center.ndim != 1 or center.size == 0:
            raise ValueError("center must be a nonempty vector")
        n = center.size
        weight = np.array(self.weight, dtype=float)
        if weight.shape != (n, n):
            raise ValueError(f"weight must have shape ({n}, {n}), got {weight.shape}")
        if np.max(np.abs(weight - weight.T)) > SYMMETRY_TOL:
            raise ValueError("weight must be symmetric")
        eigs = np.linalg.eigvalsh(weight)
        if eigs[0] <= 0.0:
            raise ValueError(f"weight must be positive definite, smallest eigenvalue {eigs[0]:.6g}")
        weight = _frozen_array(weight, "weight")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "center", center)

    @property
    def state_dim(self) -> int:
        return self.center.size

    def value(self, x: np.ndarray) -> float:
        y = np.asarray(x, dtype=float) - self.center
        return float(y @ self.weight @ y)

    def values(self, points: np.ndarray) -> np.ndarray:
        y = np.asarray(points, dtype=float) - self.center
        return np.einsum("ni,ij,nj->n", y, self.weight, y)

    def eig_bounds(self) -> tuple[float, float]:
        eigs = np.linalg.eigvalsh(self.weight)
        return float(eigs[0]), float(eigs[-1])


def eval_map(primitive: "Primitive | PrimitiveMap", x: np.ndarray, d: np.ndarray | None = None) -> np.ndarray:
    """One step of a primitive's map from state ``x`` under disturbance ``d``."""
    m = primitive.map if isinstance(primitive, Primitive) else primitive
    return m(x, d)


def lyapunov_value(lyapunov: QuadraticLyapunov, x: np.ndarray) -> float:
    """Evaluate the quadratic Lyapunov function at a single state."""
    return lyapunov.value(x)


@dataclass(frozen=True)
class Primitive:
    """A certified primitive: map, Lyapunov function, basin level and contraction rate.

    ``basin_level`` is the sublevel value of the Lyapunov function whose set
    is the basin-of-attraction estimate; ``contraction_rate`` is the factor
    by which the Lyapunov value shrinks per undisturbed step inside that set.
    """

    id: int
    map: PrimitiveMap
    lyapunov: QuadraticLyapunov
    basin_level: float
    contraction_rate: float

    def __post_init__(self):
        if int(self.id) != self.id or self.id < 0:
            raise ValueError("id must be a nonnegative integer")
        object.__setattr__(self, "id", int(self.id))
        if self.map.state_dim != self.lyapunov.state_dim:
            raise ValueError("map and lyapunov dimensions differ")
        gap = float(np.max(np.abs(self.map.fixed_point - self.lyapunov.center)))
        if gap > FIXED_POINT_TOL:
            raise ValueError(f"map fixed point and lyapunov center differ by {gap:.3g}")
        level = float(self.basin_level)
        if not (level > 0.0 and np.isfinite(level)):
            raise ValueError("basin_level must be positive and finite")
        rate = float(self.contraction_rate)
        if not (0.0 < rate < 1.0):
            raise ValueError("contraction_rate must lie in (0, 1)")
        object.__setattr__(self, "basin_level", level)
        object.__setattr__(self, "contraction_rate", rate)

    @property
    def state_dim(self) -> int:
        return self.map.state_dim

    @property
    def dist_dim(self) -> int:
        return self.map.dist_dim


@dataclass(frozen=True)
class PrimitiveLibrary:
    """A family of primitives over one shared state and disturbance space.

    The library-level contraction rate is the worst (largest) rate of its
    members.  Safe switching additionally needs every fixed point to lie in
    every member's basin; that condition is reported by
    ``fixed_point_violations`` rather than enforced at construction so that
    a failing library can still be loaded and diagnosed.
    """

    primitives: tuple[Primitive, ...]

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not prims:
            raise ValueError("library must contain at least one primitive")
        ids = [p.id for p in prims]
        if len(set(ids)) != len(ids):
            raise ValueError("primitive ids must be distinct")
        n = prims[0].state_dim
        m = prims[0].dist_dim
        for p in prims:
            if p.state_dim != n or p.dist_dim != m:
                raise ValueError("all primitives must share state and disturbance dimensions")
        object.__setattr__(self, "primitives", prims)

    def __len__(self) -> int:
        return len(self.primitives)

    def __iter__(self):
        return iter(self.primitives)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(p.id for p in self.primitives)

    @property
    def state_dim(self) -> int:
        return self.primitives[0].state_dim

    @property
    def dist_dim(self) -> int:
        return self.primitives[0].dist_dim

    @property
    def contraction_rate(self) -> float:
        return max(p.contraction_rate for p in self.primitives)

    @property
    def min_basin_level(self) -> float:
        return min(p.basin_level for p in self.primitives)

    def by_id(self, id: int) -> Primitive:
        for p in self.primitives:
            if p.id == id:
                return p
        raise KeyError(f"no primitive with id {id}")

    def fixed_point_violations(self) -> list[tuple[int, int, float]]:
        """Pairs (q, p, value) where fixed point of q falls outside the basin of p."""
        out = []
        for q in self.primitives:
            for p in self.primitives:
                v = p.lyapunov.value(q.map.fixed_point)
                if v > p.basin_level:
                    out.append((q.id, p.id, v))
        return out

    def fixed_points_contained(self) -> bool:
        return not self.fixed_point_violations()


def sample_in_sublevel_set(
    lyapunov: QuadraticLyapunov, level: float, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform samples from {x : V(x) <= level} by rejection.

    Proposals are drawn in the eigenbasis bounding box of the ellipsoid; the
    accept test reduces to the unit ball there, so the accepted sequence for
    a fixed generator state scales exactly with sqrt(level).
    """
    if not (level > 0.0 and np.isfinite(level)):
        raise ValueError("level must be positive and finite")
    if count <= 0:
        return np.empty((0, lyapunov.state_dim))
    evals, evecs = np.linalg.eigh(lyapunov.weight)
    scale = evecs * np.sqrt(level / evals)
    out = np.empty((count, lyapunov.state_dim))
    have = 0
    for _ in range(_MAX_SAMPLE_BATCHES):
        u = rng.uniform(-1.0, 1.0, size=(_SAMPLE_BATCH, lyapunov.state_dim))
        keep = u[np.einsum("ni,ni->n", u, u) <= 1.0]
        take = min(count - have, keep.shape[0])
        out[have : have + take] = lyapunov.center + keep[:take] @ scale.T
        have += take
        if have == count:
            return out
    raise RuntimeError("rejection sampling failed to fill the request")


def _decrease_ratios(primitive: Primitive, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lyapunov ratios V(f(x))/V(x) and image values V(f(x)) for a batch."""
    values = primitive.lyapunov.values(points)
    images = primitive.map.apply_batch(points)
    image_values = primitive.lyapunov.values(images)
    good = values > 0.0
    ratios = np.full(points.shape[0], -np.inf)
    ratios[good] = image_values[good] / values[good]
    return ratios, image_values


@dataclass(frozen=True)
class ContractionReport:
    passed: bool
    worst_ratio: float
    witness: np.ndarray
    sample_count: int


@dataclass(frozen=True)
class BasinReport:
    certified: bool
    worst_ratio: float
    max_image_value: float
    witness: np.ndarray
    level: float
    sample_count: int


def verify_contraction(
    primitive: Primitive, sample_count: int, seed: int, tolerance: float = RATIO_TOL
) -> ContractionReport:
    """Falsification-style check of the per-step Lyapunov decrease on the basin.

    Samples the basin estimate and reports the worst observed ratio
    V(f(x))/V(x); passing means no sample exceeded the declared contraction
    rate (up to a relative tolerance).  A pass is evidence, not proof.
    """
    if sample_count <= 0:
        raise ValueError("sample_count must be positive")
    rng = np.random.default_rng(seed)
    points = sample_in_sublevel_set(primitive.lyapunov, primitive.basin_level, sample_count, rng)
    ratios, _ = _decrease_ratios(primitive, points)
    worst = int(np.argmax(ratios))
    worst_ratio = float(ratios[worst])
    passed = worst_ratio <= primitive.contraction_rate * (1.0 + tolerance)
    return ContractionReport(passed, worst_ratio, points[worst].copy(), sample_count)


def certify_basin(
    primitive: Primitive,
    candidate_level: float,
    sample_count: int,
    seed: int,
    tolerance: float = RATIO_TOL,
) -> BasinReport:
    """Check contraction and forward invariance on a candidate sublevel set.

    Certified means every sampled state both decreases the Lyapunov value by
    the declared rate and maps back into the candidate set.  The witness is
    the sample with the largest normalized violation.
    """
    if sample_count <= 0:
        raise ValueError("sample_count must be positive")
    if not (candidate_level > 0.0 and np.isfinite(candidate_level)):
        raise ValueError("candidate_level must be positive and finite")
    rng = np.random.default_rng(seed)
    points = sample_in_sublevel_set(primitive.lyapunov, candidate_level, sample_count, rng)
    ratios, image_values = _decrease_ratios(primitive, points)
    scores = np.maximum(ratios / primitive.contraction_rate, image_values / candidate_level)
    worst = int(np.argmax(scores))
    worst_ratio = float(np.max(ratios))
    max_image = float(np.max(image_values))
    certified = worst_ratio <= primitive.contraction_rate * (1.0 + tolerance) and max_image <= candidate_level * (
        1.0 + tolerance
    )
    return BasinReport(certified, worst_ratio, max_image, points[worst].copy(), candidate_level, sample_count)
