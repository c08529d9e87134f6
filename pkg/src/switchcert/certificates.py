"""Switching certificates: set constants, dwell-time bounds and synthesis.

For a library with basin estimates B_p (Lyapunov sublevel sets at level
kappa_bar_p) and a core level kappa, two constants govern safe switching:

* omega(kappa): the largest Lyapunov value any member assigns to a point of
  the union of the kappa-sublevel sets, and
* mu(kappa): the largest ratio V_q/V_p over any basin point outside the
  open kappa-core of member p.

Switching slower than the average dwell time ln(mu)/ln(epsilon/lambda)
keeps trajectories started in the intersection of the omega-sublevel sets
inside every basin, provided the mu^n0 * omega sublevel sets still sit
strictly inside every basin.  Both constants come in two flavors: a
closed-form ellipsoid bound (analytic) and a grid maximization (grid); the
analytic value is always an upper bound for the grid value.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .library_io import library_fingerprint
from .primitives import PrimitiveLibrary, QuadraticLyapunov
from . import simulation

GRID_REFUSAL_DIM = 4
_DEFAULT_RESOLUTION = {1: 4001, 2: 201, 3: 41, 4: 17}
KAPPA_GRID_SIZE = 32
KAPPA_GRID_SPAN = (1e-4, 0.9)
DEFAULT_N0_CANDIDATES = (1, 2)


def default_epsilon(contraction_rate: float) -> float:
    """Decay budget between the contraction rate and 1 (90% of the way up)."""
    if not (0.0 < contraction_rate < 1.0):
        raise ValueError("contraction rate must lie in (0, 1)")
    return contraction_rate + 0.9 * (1.0 - contraction_rate)


def default_kappa_grid(library: PrimitiveLibrary) -> np.ndarray:
    """Log-spaced candidate core levels below the smallest basin level."""
    floor = library.min_basin_level
    return np.geomspace(KAPPA_GRID_SPAN[0] * floor, KAPPA_GRID_SPAN[1] * floor, KAPPA_GRID_SIZE)


def ellipsoid_radii(weight: np.ndarray, level: float) -> tuple[float, float]:
    """Inscribed and circumscribed ball radii of {x : x^T weight x <= level}."""
    if not (level > 0.0 and np.isfinite(level)):
        raise ValueError("level must be positive and finite")
    lyap = QuadraticLyapunov(weight=np.asarray(weight, dtype=float), center=np.zeros(np.asarray(weight).shape[0]))
    lo, hi = lyap.eig_bounds()
    return float(np.sqrt(level / hi)), float(np.sqrt(level / lo))


def _eig_bounds(library: PrimitiveLibrary) -> list[tuple[float, float]]:
    return [p.lyapunov.eig_bounds() for p in library]


def _check_kappa_for_omega(library: PrimitiveLibrary, kappa: float) -> None:
    if not (kappa > 0.0 and np.isfinite(kappa)):
        raise ValueError("kappa must be positive and finite")
    if kappa > library.min_basin_level:
        raise ValueError(
            f"kappa={kappa:.6g} exceeds the smallest basin level {library.min_basin_level:.6g}"
        )


def omega_analytic(library: PrimitiveLibrary, kappa: float) -> float:
    """Closed-form upper bound on omega(kappa) from ellipsoid radii.

    A point of the kappa-set of member q sits within sqrt(kappa/lam_min_q)
    of q's center, so member p values it at most
    lam_max_p * (offset_pq + sqrt(kappa/lam_min_q))^2.
    """
    _check_kappa_for_omega(library, kappa)
    bounds = _eig_bounds(library)
    best = 0.0
    for ip, p in enumerate(library):
        lam_max_p = bounds[ip][1]
        for iq, q in enumerate(library):
            offset = float(np.linalg.norm(q.lyapunov.center - p.lyapunov.center))
            reach = offset + math.sqrt(kappa / bounds[iq][0])
            best = max(best, lam_max_p * reach * reach)
    return best


def _resolve_resolution(state_dim: int, resolution: int | None) -> int:
    if state_dim > GRID_REFUSAL_DIM:
        raise ValueError(
            f"grid evaluation refuses state_dim={state_dim} (> {GRID_REFUSAL_DIM}); use the analytic bounds"
        )
    if resolution is None:
        resolution = _DEFAULT_RESOLUTION[state_dim]
    if resolution < 2:
        raise ValueError("resolution must be at least 2 points per axis")
    return int(resolution)


def _box_of(lyapunov: QuadraticLyapunov, level: float) -> tuple[np.ndarray, np.ndarray]:
    half = np.sqrt(level * np.diag(np.linalg.inv(lyapunov.weight)))
    return lyapunov.center - half, lyapunov.center + half


def _grid_points(lo: np.ndarray, hi: np.ndarray, resolution: int) -> np.ndarray:
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(lo.size)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def omega_grid(library: PrimitiveLibrary, kappa: float, resolution: int | None = None) -> float:
    """Grid maximization of omega(kappa) over the union of kappa-sets.

    Maximizes every member's Lyapunov value over a uniform grid restricted
    to the union (member centers are always included so the result is
    defined at any resolution).  Underestimates the true value and never
    exceeds the analytic bound; it is clamped from below by kappa, which
    the true value always attains on the core boundary.
    """
    _check_kappa_for_omega(library, kappa)
    resolution = _resolve_resolution(library.state_dim, resolution)
    boxes = [_box_of(p.lyapunov, kappa) for p in library]
    lo = np.min([b[0] for b in boxes], axis=0)
    hi = np.max([b[1] for b in boxes], axis=0)
    pts = _grid_points(lo, hi, resolution)
    inside = np.zeros(pts.shape[0], dtype=bool)
    for p in library:
        inside |= p.lyapunov.values(pts) <= kappa
    pts = np.concatenate([pts[inside], [p.lyapunov.center for p in library]], axis=0)
    return max(float(kappa), float(max(np.max(p.lyapunov.values(pts)) for p in library)))


def _check_kappa_for_mu(library: PrimitiveLibrary, kappa: float) -> None:
    if not (kappa > 0.0 and np.isfinite(kappa)):
        raise ValueError("kappa must be positive and finite")
    if kappa >= library.min_basin_level:
        raise ValueError(
            f"kappa={kappa:.6g} must stay below the smallest basin level "
            f"{library.min_basin_level:.6g}"
        )


def mu_analytic(library: PrimitiveLibrary, kappa: float) -> float:
    """Closed-form upper bound on mu(kappa), clamped to at least 1.

    On the annulus of member p the denominator is at least kappa while any
    member q values the point at most
    lam_max_q * (sqrt(kappa_bar_p/lam_min_p) + offset_pq)^2.
    """
    _check_kappa_for_mu(library, kappa)
    bounds = _eig_bounds(library)
    best = 1.0
    for ip, p in enumerate(library):
        reach_p = math.sqrt(p.basin_level / bounds[ip][0])
        for iq, q in enumerate(library):
            offset = float(np.linalg.norm(q.lyapunov.center - p.lyapunov.center))
            numerator = bounds[iq][1] * (reach_p + offset) ** 2
            best = max(best, numerator / kappa)
    return best


def _annulus_seeds(lyapunov: QuadraticLyapunov, inner: float, outer: float) -> np.ndarray:
    """Axis points of the inner and outer level sets; used when a grid
    misses a thin annulus entirely."""
    evals, evecs = np.linalg.eigh(lyapunov.weight)
    seeds = []
    for level in (inner, outer):
        radii = np.sqrt(level / evals)
        for i in range(evals.size):
            step = radii[i] * evecs[:, i]
            seeds.append(lyapunov.center + step)
            seeds.append(lyapunov.center - step)
    return np.array(seeds)


def mu_grid(library: PrimitiveLibrary, kappa: float, resolution: int | None = None) -> float:
    """Grid maximization of mu(kappa) over each member's basin annulus.

    For each member p the grid covers its basin box and keeps points with
    kappa <= V_p <= kappa_bar_p; ratios V_q/V_p are maximized over all
    ordered pairs.  The result is at least 1 (the (p, p) ratio) and never
    exceeds the analytic bound.
    """
    _check_kappa_for_mu(library, kappa)
    resolution = _resolve_resolution(library.state_dim, resolution)
    best = 1.0
    for p in library:
        lo, hi = _box_of(p.lyapunov, p.basin_level)
        pts = _grid_points(lo, hi, resolution)
        vp = p.lyapunov.values(pts)
        mask = (vp >= kappa) & (vp <= p.basin_level)
        if not np.any(mask):
            pts = _annulus_seeds(p.lyapunov, kappa, p.basin_level)
            vp = p.lyapunov.values(pts)
            mask = vp > 0.0
        pts, vp = pts[mask], vp[mask]
        for q in library:
            if q.id == p.id:
                continue
            best = max(best, float(np.max(q.lyapunov.values(pts) / vp)))
    return best


def dwell_time_bound(mu: float, contraction_rate: float, epsilon: float) -> float:
    """Average dwell time keeping the switched decrease rate at epsilon.

    ln(mu) / ln(epsilon / contraction_rate); zero when mu == 1 because any
    switching is then admissible.
    """
    if not (mu >= 1.0 and np.isfinite(mu)):
        raise ValueError("mu must be at least 1")
    if not (0.0 < contraction_rate < 1.0):
        raise ValueError("contraction_rate must lie in (0, 1)")
    if not (contraction_rate < epsilon < 1.0):
        raise ValueError("epsilon must lie strictly between the contraction rate and 1")
    return math.log(mu) / math.log(epsilon / contraction_rate)


@dataclass(frozen=True)
class PairContainment:
    inner_id: int
    outer_id: int
    mode: str  # "nested" | "ball" | "grid"
    slack: float
    passed: bool


@dataclass(frozen=True)
class ContainmentReport:
    level: float
    pairs: tuple[PairContainment, ...]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "passed": self.passed,
            "pairs": [
                {
                    "inner_id": c.inner_id,
                    "outer_id": c.outer_id,
                    "mode": c.mode,
                    "slack": c.slack,
                    "passed": c.passed,
                }
                for c in self.pairs
            ],
        }


def feasibility_check(
    library: PrimitiveLibrary,
    kappa: float,
    n0_bar: int,
    omega: float,
    mu: float,
    resolution: int | None = None,
) -> ContainmentReport:
    """Check that the mu^n0 * omega sublevel sets sit strictly inside every basin.

    Same-member pairs are exact (nested sublevel sets of one function).
    Cross pairs first try the sufficient ball test (circumscribed radius of
    the inner set plus the center offset against the inscribed radius of the
    basin) and fall back to a grid containment check when that fails.
    """
    if n0_bar < 1 or int(n0_bar) != n0_bar:
        raise ValueError("n0_bar must be an integer >= 1")
    if not (omega > 0.0 and mu >= 1.0):
        raise ValueError("need omega > 0 and mu >= 1")
    level = (mu ** int(n0_bar)) * omega
    bounds = _eig_bounds(library)
    pairs = []
    for iq, q in enumerate(library):
        for ip, p in enumerate(library):
            if q.id == p.id:
                slack = p.basin_level - level
                pairs.append(PairContainment(q.id, p.id, "nested", float(slack), slack > 0.0))
                continue
            offset = float(np.linalg.norm(q.lyapunov.center - p.lyapunov.center))
            inner_reach = math.sqrt(level / bounds[iq][0])
            inscribed = math.sqrt(p.basin_level / bounds[ip][1])
            slack = inscribed - (offset + inner_reach)
            if slack > 0.0:
                pairs.append(PairContainment(q.id, p.id, "ball", float(slack), True))
                continue
            res = _resolve_resolution(library.state_dim, resolution)
            lo, hi = _box_of(q.lyapunov, level)
            pts = _grid_points(lo, hi, res)
            pts = pts[q.lyapunov.values(pts) <= level]
            pts = np.concatenate([pts, [q.lyapunov.center]], axis=0)
            slack = p.basin_level - float(np.max(p.lyapunov.values(pts)))
            pairs.append(PairContainment(q.id, p.id, "grid", float(slack), slack > 0.0))
    return ContainmentReport(level=float(level), pairs=tuple(pairs), passed=all(c.passed for c in pairs))


@dataclass(frozen=True)
class Certificate:
    """A feasible switching certificate for one specific library.

    ``n0_bar`` switches may arrive in a burst; on average one switch per
    ``na_bar`` steps is admissible.  ``delta_hat`` is the empirically
    estimated disturbance amplitude margin (None until estimated).
    """

    kappa: float
    omega: float
    mu: float
    epsilon: float
    contraction_rate: float
    n0_bar: int
    na_bar: float
    method: str
    containment: ContainmentReport
    library_fingerprint: str
    delta_hat: float | None = None

    def __post_init__(self):
        if self.method not in ("analytic", "grid"):
            raise ValueError("method must be 'analytic' or 'grid'")
        if self.mu < 1.0:
            raise ValueError("mu must be at least 1")
        if not (self.contraction_rate < self.epsilon < 1.0):
            raise ValueError("epsilon must lie strictly between the contraction rate and 1")
        if self.omega < self.kappa * (1.0 - 1e-12):
            raise ValueError("omega must be at least kappa")
        if self.na_bar < 0.0:
            raise ValueError("na_bar must be nonnegative")
        if self.n0_bar < 1:
            raise ValueError("n0_bar must be at least 1")

    def to_dict(self) -> dict:
        return {
            "format": "switchcert-certificate",
            "version": 1,
            "kappa": self.kappa,
            "omega": self.omega,
            "mu": self.mu,
            "epsilon": self.epsilon,
            "contraction_rate": self.contraction_rate,
            "n0_bar": self.n0_bar,
            "na_bar": self.na_bar,
            "method": self.method,
            "containment": self.containment.to_dict(),
            "library_fingerprint": self.library_fingerprint,
            "delta_hat": self.delta_hat,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Certificate":
        containment = ContainmentReport(
            level=data["containment"]["level"],
            pairs=tuple(
                PairContainment(c["inner_id"], c["outer_id"], c["mode"], c["slack"], c["passed"])
                for c in data["containment"]["pairs"]
            ),
            passed=data["containment"]["passed"],
        )
        return cls(
            kappa=data["kappa"],
            omega=data["omega"],
            mu=data["mu"],
            epsilon=data["epsilon"],
            contraction_rate=data["contraction_rate"],
            n0_bar=data["n0_bar"],
            na_bar=data["na_bar"],
            method=data["method"],
            containment=containment,
            library_fingerprint=data["library_fingerprint"],
            delta_hat=data.get("delta_hat"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Certificate":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path} is not valid JSON: {exc}") from exc
        if data.get("format") != "switchcert-certificate":
            raise ValueError(f"{path} is not a certificate document")
        return cls.from_dict(data)


@dataclass(frozen=True)
class KappaDiagnostic:
    kappa: float
    omega: float
    mu: float
    na_bar: float
    feasible_n0: tuple[int, ...]
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "omega": self.omega,
            "mu": self.mu,
            "na_bar": self.na_bar,
            "feasible_n0": list(self.feasible_n0),
            "note": self.note,
        }


@dataclass(frozen=True)
class SynthesisResult:
    feasible: bool
    certificate: Certificate | None
    diagnostics: tuple[KappaDiagnostic, ...]
    reason: str = ""


def synthesize_certificate(
    library: PrimitiveLibrary,
    kappa_grid: np.ndarray | None = None,
    epsilon: float | None = None,
    n0_candidates=DEFAULT_N0_CANDIDATES,
    method: str = "grid",
    resolution: int | None = None,
) -> SynthesisResult:
    """Sweep candidate core levels (ascending) and return the first feasible certificate.

    At the first feasible kappa the largest feasible burst allowance among
    ``n0_candidates`` wins (ties broken by the smaller dwell-time bound,
    which cannot differ at fixed kappa).  An infeasible sweep returns
    per-kappa diagnostics instead of a certificate.
    """
    if method not in ("analytic", "grid"):
        raise ValueError("method must be 'analytic' or 'grid'")
    n0_candidates = tuple(sorted(set(int(n) for n in n0_candidates)))
    if not n0_candidates or n0_candidates[0] < 1:
        raise ValueError("n0_candidates must contain integers >= 1")
    rate = library.contraction_rate
    if epsilon is None:
        epsilon = default_epsilon(rate)
    if not (rate < epsilon < 1.0):
        raise ValueError(f"epsilon must lie in ({rate:.6g}, 1)")
    violations = library.fixed_point_violations()
    if violations:
        worst = max(violations, key=lambda v: v[2])
        return SynthesisResult(
            feasible=False,
            certificate=None,
            diagnostics=(),
            reason=(
                "fixed points are not contained in every basin "
                f"(worst: member {worst[0]} in basin {worst[1]}, value {worst[2]:.6g})"
            ),
        )
    if kappa_grid is None:
        kappa_grid = default_kappa_grid(library)
    kappa_grid = np.asarray(kappa_grid, dtype=float)
    if kappa_grid.ndim != 1 or kappa_grid.size == 0:
        raise ValueError("kappa_grid must be a nonempty 1-D array")
    kappa_grid = np.sort(kappa_grid)

    omega_fn = omega_analytic if method == "analytic" else omega_grid
    mu_fn = mu_analytic if method == "analytic" else mu_grid
    diagnostics = []
    for kappa in kappa_grid:
        if not (0.0 < kappa < library.min_basin_level):
            diagnostics.append(KappaDiagnostic(float(kappa), np.nan, np.nan, np.nan, (), "kappa out of range"))
            continue
        kwargs = {} if method == "analytic" else {"resolution": resolution}
        omega = omega_fn(library, float(kappa), **kwargs)
        mu = mu_fn(library, float(kappa), **kwargs)
        na = dwell_time_bound(mu, rate, epsilon)
        feasible_n0 = []
        reports = {}
        for n0 in n0_candidates:
            report = feasibility_check(library, float(kappa), n0, omega, mu, resolution=resolution)
            reports[n0] = report
            if report.passed:
                feasible_n0.append(n0)
        diagnostics.append(KappaDiagnostic(float(kappa), omega, mu, na, tuple(feasible_n0)))
        if feasible_n0:
            n0 = max(feasible_n0)
            certificate = Certificate(
                kappa=float(kappa),
                omega=omega,
                mu=mu,
                epsilon=float(epsilon),
                contraction_rate=rate,
                n0_bar=n0,
                na_bar=na,
                method=method,
                containment=reports[n0],
                library_fingerprint=library_fingerprint(library),
            )
            return SynthesisResult(True, certificate, tuple(diagnostics))
    return SynthesisResult(
        feasible=False,
        certificate=None,
        diagnostics=tuple(diagnostics),
        reason="no kappa in the grid yielded contained trapping sets",
    )


@dataclass(frozen=True)
class MarginEstimate:
    """Empirical disturbance amplitude margin from bisection.

    ``delta_hat`` is the largest tested amplitude whose trial campaign saw
    zero basin escapes.  Purely falsification-based: larger budgets tighten
    it, and it is not a proof of robustness.
    """

    delta_hat: float
    upper: float
    trial_budget: int
    horizon: int
    seed: int
    evaluations: tuple[tuple[float, bool], ...]  # (amplitude, violated)


def estimate_disturbance_margin(
    library: PrimitiveLibrary,
    certificate: Certificate,
    trial_budget: int,
    seed: int,
    horizon: int = 200,
    upper: float = 1.0,
    iterations: int = 20,
    rel_tol: float = 1e-3,
) -> MarginEstimate:
    """Bisect the disturbance amplitude for the largest zero-violation level.

    Each candidate amplitude runs ``trial_budget`` episodes (random
    admissible signal at the dwell-time limit, random start in the
    omega-intersection, random disturbances rescaled to the candidate sup
    norm) and counts any basin escape as a violation.  With zero
    disturbance gains everywhere no amplitude can violate, so the estimate
    equals the upper search limit.
    """
    if trial_budget < 1:
        raise ValueError("trial_budget must be positive")
    if not (upper > 0.0 and np.isfinite(upper)):
        raise ValueError("upper must be positive and finite")
    if certificate.library_fingerprint != library_fingerprint(library):
        raise ValueError("certificate fingerprint does not match this library")
    evaluations: list[tuple[float, bool]] = []

    def violated(amplitude: float, trial_index: int) -> bool:
        bad = simulation.campaign_has_violation(
            library, certificate, trial_budget, horizon, amplitude,
            seed, stream=1 + trial_index, exact_sup=True,
        )
        evaluations.append((amplitude, bad))
        return bad

    trial = 0
    if not violated(upper, trial):
        return MarginEstimate(upper, upper, trial_budget, horizon, int(seed), tuple(evaluations))
    lo, hi = 0.0, upper
    for _ in range(iterations):
        trial += 1
        mid = 0.5 * (lo + hi)
        if violated(mid, trial):
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return MarginEstimate(lo, upper, trial_budget, horizon, int(seed), tuple(evaluations))
