"""Closed-loop rollouts of switched primitive libraries and Monte Carlo campaigns.

Rollouts never abort on a safety violation; they record per-step Lyapunov
values and basin membership so that monitors can locate the first escape.
All campaign randomness derives from one root seed through a counter-based
scheme: episode e uses ``default_rng(SeedSequence([seed, stream, e]))``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .library_io import library_fingerprint
from .primitives import PrimitiveLibrary
from .switching import DwellTimeBudget, Supervisor, SwitchingSignal

_NORM_TOL = 1e-12
_X0_BATCH = 128
_MAX_X0_BATCHES = 200_000


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Deterministic child generator for (seed, counters...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(p) for p in path]]))


@dataclass(frozen=True)
class DisturbanceSequence:
    """Per-step disturbance vectors with a cached sup norm."""

    values: np.ndarray
    sup_norm: float

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError("values must have shape (steps, dist_dim)")
        arr.setflags(write=False)
        actual = float(np.max(np.linalg.norm(arr, axis=1))) if arr.shape[0] else 0.0
        if abs(actual - float(self.sup_norm)) > _NORM_TOL * max(1.0, actual):
            raise ValueError(f"declared sup_norm {self.sup_norm} differs from recomputed {actual}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "sup_norm", actual)

    @classmethod
    def from_values(cls, values: np.ndarray) -> "DisturbanceSequence":
        arr = np.asarray(values, dtype=float)
        sup = float(np.max(np.linalg.norm(arr, axis=1))) if arr.shape[0] else 0.0
        return cls(arr, sup)

    @classmethod
    def zeros(cls, steps: int, dist_dim: int) -> "DisturbanceSequence":
        return cls(np.zeros((steps, dist_dim)), 0.0)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class Trace:
    """One rollout: states x_0..x_K, the driving signal and disturbances, and
    per-step Lyapunov values for every library member."""

    states: np.ndarray            # (K+1, n)
    signal: SwitchingSignal       # first K entries drive the steps
    disturbances: np.ndarray      # (K, m)
    lyapunov: np.ndarray          # (K+1, P), columns ordered as library ids
    member_ids: tuple[int, ...]
    basin_levels: np.ndarray      # (P,)
    in_all_basins: np.ndarray     # (K+1,) bool

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def first_violation(self) -> int | None:
        bad = np.flatnonzero(~self.in_all_basins)
        return int(bad[0]) if bad.size else None

    @property
    def max_min_level(self) -> float:
        """Largest over time of the smallest Lyapunov value over members.

        States with non-finite coordinates count as +inf.
        """
        per_step = np.min(self.lyapunov, axis=1)
        per_step = np.where(np.isfinite(per_step), per_step, np.inf)
        return float(np.max(per_step))

    @property
    def max_active_step_ratio(self) -> float:
        """Max over steps of V_active(x_{k+1}) / V_active(x_k).

        The active member is the one whose map produced the step.  Steps that
        start exactly at the active fixed point (zero denominator) are
        skipped; 0.0 if no step has a positive denominator.
        """
        horizon = self.horizon
        if horizon == 0:
            return 0.0
        lookup = {pid: j for j, pid in enumerate(self.member_ids)}
        cols = np.array([lookup[int(s)] for s in self.signal.assignments[:horizon]])
        rows = np.arange(horizon)
        den = self.lyapunov[rows, cols]
        num = self.lyapunov[rows + 1, cols]
        ok = den > 0.0
        if not np.any(ok):
            return 0.0
        return float(np.max(num[ok] / den[ok]))

    def to_csv(self, path: str | Path) -> None:
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["k", "sigma"] + [f"x{i}" for i in range(n)]
            header += [f"V_{pid}" for pid in self.member_ids] + ["in_all_basins"]
            writer.writerow(header)
            sigma = self.signal.assignments
            for k in range(self.states.shape[0]):
                sig = int(sigma[k]) if k < sigma.size else int(sigma[-1])
                row = [k, sig] + [repr(float(v)) for v in self.states[k]]
                row += [repr(float(v)) for v in self.lyapunov[k]]
                row.append(int(self.in_all_basins[k]))
                writer.writerow(row)


def run(
    library: PrimitiveLibrary,
    signal: SwitchingSignal,
    x0: np.ndarray,
    disturbances: DisturbanceSequence | None,
    horizon: int,
) -> Trace:
    """Roll the switched system forward for ``horizon`` steps.

    The rollout continues through basin escapes and non-finite states; the
    trace flags them instead of raising.
    """
    horizon = int(horizon)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if len(signal) < horizon:
        raise ValueError(f"signal covers {len(signal)} steps, horizon is {horizon}")
    if disturbances is None:
        disturbances = DisturbanceSequence.zeros(horizon, library.dist_dim)
    if len(disturbances) < horizon:
        raise ValueError(f"disturbance sequence covers {len(disturbances)} steps, horizon is {horizon}")
    if disturbances.values.shape[1] != library.dist_dim:
        raise ValueError("disturbance dimension does not match the library")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (library.state_dim,):
        raise ValueError(f"x0 must have shape ({library.state_dim},)")
    known = set(library.ids)
    used = set(int(v) for v in signal.assignments[:horizon])
    if not used <= known:
        raise ValueError(f"signal uses ids {sorted(used - known)} not present in the library")

    maps = {p.id: p.map for p in library}
    states = np.empty((horizon + 1, library.state_dim))
    states[0] = x0
    x = x0
    dvals = disturbances.values
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(horizon):
            x = maps[int(signal.assignments[k])](x, dvals[k])
            states[k + 1] = x
        lyap = np.column_stack([p.lyapunov.values(states) for p in library])
    levels = np.array([p.basin_level for p in library])
    with np.errstate(invalid="ignore"):
        in_all = np.all(lyap <= levels[None, :], axis=1)  # NaN compares false
    return Trace(
        states=states,
        signal=signal,
        disturbances=dvals[:horizon].copy(),
        lyapunov=lyap,
        member_ids=library.ids,
        basin_levels=levels,
        in_all_basins=in_all,
    )


@dataclass(frozen=True)
class SafetyReport:
    safe: bool
    violations: tuple[tuple[int, int], ...]  # (step, member id)
    fixed_points_contained: bool


def safety_monitor(trace: Trace, library: PrimitiveLibrary) -> SafetyReport:
    """Safe iff every state lies in every basin and every fixed point does too."""
    if trace.member_ids != library.ids:
        raise ValueError("trace and library member ids differ")
    with np.errstate(invalid="ignore"):
        outside = ~(trace.lyapunov <= trace.basin_levels[None, :])
    steps, cols = np.nonzero(outside)
    violations = tuple((int(k), int(trace.member_ids[c])) for k, c in zip(steps, cols))
    contained = library.fixed_points_contained()
    return SafetyReport(safe=not violations and contained, violations=violations, fixed_points_contained=contained)


def empirical_trapping_level(traces, library: PrimitiveLibrary) -> float:
    """Max over traces and steps of the min over members of the Lyapunov value."""
    level = 0.0
    for trace in traces:
        if trace.member_ids != library.ids:
            raise ValueError("trace and library member ids differ")
        level = max(level, trace.max_min_level)
    return level


def sample_initial_state(library: PrimitiveLibrary, level: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the intersection of all members' sublevel sets.

    Rejection sampling from the intersection of the per-member bounding
    boxes; the intersection is nonempty because it contains the fixed points
    whenever the library certifies (level at or above the cross values).
    """
    if not (level > 0.0 and np.isfinite(level)):
        raise ValueError("level must be positive and finite")
    los, his = [], []
    for p in library:
        half = np.sqrt(level * np.diag(np.linalg.inv(p.lyapunov.weight)))
        los.append(p.lyapunov.center - half)
        his.append(p.lyapunov.center + half)
    lo = np.max(los, axis=0)
    hi = np.min(his, axis=0)
    if np.any(lo > hi):
        raise ValueError("intersection of sublevel sets appears empty at this level")
    for _ in range(_MAX_X0_BATCHES):
        pts = rng.uniform(lo, hi, size=(_X0_BATCH, library.state_dim))
        ok = np.ones(_X0_BATCH, dtype=bool)
        for p in library:
            ok &= p.lyapunov.values(pts) <= level
        hits = np.flatnonzero(ok)
        if hits.size:
            return pts[hits[0]].copy()
    raise RuntimeError("failed to sample the sublevel intersection")


def sample_admissible_signal(
    library: PrimitiveLibrary,
    horizon: int,
    budget: DwellTimeBudget,
    rng: np.random.Generator,
    initial_id: int | None = None,
    switch_rate: float | None = None,
) -> SwitchingSignal:
    """Random signal at the budget limit: switch proposals arrive as a
    Bernoulli stream (rate 1/na, capped at 1) and pass through the
    supervisor, which defers any proposal that would break the budget."""
    ids = list(library.ids)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if switch_rate is None:
        switch_rate = min(1.0, 1.0 / budget.na)
    if initial_id is None:
        initial_id = int(ids[rng.integers(len(ids))])
    supervisor = Supervisor(initial_id, budget, known_ids=ids)
    for _ in range(horizon - 1):
        if len(ids) > 1 and rng.random() < switch_rate:
            others = [i for i in ids if i != supervisor.current]
            supervisor.request(others[rng.integers(len(others))])
        else:
            supervisor.request(supervisor.current)
    return supervisor.signal


def sample_disturbances(
    dist_dim: int,
    horizon: int,
    amplitude: float,
    rng: np.random.Generator,
    exact_sup: bool = False,
) -> DisturbanceSequence:
    """Per-step vectors uniform in the amplitude ball; with ``exact_sup`` the
    sequence is rescaled so its sup norm equals the amplitude exactly."""
    if amplitude < 0.0:
        raise ValueError("amplitude must be nonnegative")
    if amplitude == 0.0:
        return DisturbanceSequence.zeros(horizon, dist_dim)
    raw = rng.uniform(-1.0, 1.0, size=(horizon, dist_dim))
    norms = np.linalg.norm(raw, axis=1)
    keep = norms <= 1.0
    while not np.all(keep):
        redo = np.flatnonzero(~keep)
        raw[redo] = rng.uniform(-1.0, 1.0, size=(redo.size, dist_dim))
        norms[redo] = np.linalg.norm(raw[redo], axis=1)
        keep = norms <= 1.0
    values = raw * amplitude
    if exact_sup:
        peak = float(np.max(np.linalg.norm(values, axis=1)))
        if peak > 0.0:
            values = values * (amplitude / peak)
    return DisturbanceSequence.from_values(values)


def budget_from_certificate(certificate) -> DwellTimeBudget:
    """Supervisor budget at the certificate's dwell-time limit.

    A bound of zero admits arbitrary switching, which any na <= 1 also
    does, so the budget clamps na up to 1 to stay representable.
    """
    na = float(certificate.na_bar)
    return DwellTimeBudget(n0=float(certificate.n0_bar), na=na if na > 0.0 else 1.0)


@dataclass(frozen=True)
class CampaignReport:
    episodes: int
    horizon: int
    amplitude: float
    seed: int
    violation_count: int
    violation_rate: float
    trapping_level: float
    max_step_ratio: float
    first_violations: tuple[tuple[int, int], ...]  # (episode, step), capped

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "horizon": self.horizon,
            "amplitude": self.amplitude,
            "seed": self.seed,
            "violation_count": self.violation_count,
            "violation_rate": self.violation_rate,
            "trapping_level": self.trapping_level,
            "max_step_ratio": self.max_step_ratio,
            "first_violations": [list(v) for v in self.first_violations],
        }


_EPISODE_STREAM = 0
_MAX_RECORDED_VIOLATIONS = 64


def run_episode(
    library: PrimitiveLibrary,
    certificate,
    horizon: int,
    amplitude: float,
    rng: np.random.Generator,
    exact_sup: bool = False,
) -> Trace:
    """One campaign episode: random start in the intersection of the
    omega-sublevel sets, random budget-limit signal, random disturbances."""
    x0 = sample_initial_state(library, certificate.omega, rng)
    signal = sample_admissible_signal(library, horizon, budget_from_certificate(certificate), rng)
    dist = sample_disturbances(library.dist_dim, horizon, amplitude, rng, exact_sup=exact_sup)
    return run(library, signal, x0, dist, horizon)


def _draw_campaign_inputs(
    library: PrimitiveLibrary,
    certificate,
    episode_count: int,
    horizon: int,
    amplitude: float,
    seed: int,
    stream: int,
    exact_sup: bool = False,
) -> tuple[np.ndarray, list[SwitchingSignal], np.ndarray]:
    """Per-episode campaign inputs, episode ``e`` drawn from
    ``derive_rng(seed, stream, e)`` in the same order as ``run_episode``."""
    budget = budget_from_certificate(certificate)
    x0s = np.empty((episode_count, library.state_dim))
    signals: list[SwitchingSignal] = []
    dists = np.empty((episode_count, horizon, library.dist_dim))
    for episode in range(episode_count):
        rng = derive_rng(seed, stream, episode)
        x0s[episode] = sample_initial_state(library, certificate.omega, rng)
        signals.append(sample_admissible_signal(library, horizon, budget, rng))
        dists[episode] = sample_disturbances(
            library.dist_dim, horizon, amplitude, rng, exact_sup=exact_sup
        ).values
    return x0s, signals, dists


def _batch_stats(
    library: PrimitiveLibrary,
    x0s: np.ndarray,
    signals: list[SwitchingSignal],
    dists: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Step every episode jointly and stream per-episode statistics.

    Returns ``(first_violation, max_min_level, max_active_step_ratio)`` with
    first_violation = -1 for clean episodes.  Arithmetic matches ``run`` up
    to summation-order rounding.
    """
    count, state_dim = x0s.shape
    horizon = dists.shape[1]
    members = list(library)
    lut = {p.id: j for j, p in enumerate(members)}
    cols = np.empty((count, horizon), dtype=np.intp)
    for e, sig in enumerate(signals):
        arr = sig.assignments[:horizon]
        for pid, j in lut.items():
            cols[e][arr == pid] = j
    lin = np.stack([p.map.linear for p in members])
    fp = np.stack([p.map.fixed_point for p in members])
    gain = np.stack([
        p.map.disturbance_gain if p.map.disturbance_gain is not None
        else np.zeros((state_dim, library.dist_dim))
        for p in members
    ])
    quad = np.stack([
        p.map.quadratic if p.map.quadratic is not None
        else np.zeros((state_dim, state_dim, state_dim))
        for p in members
    ])
    weights = np.stack([p.lyapunov.weight for p in members])
    centers = np.stack([p.lyapunov.center for p in members])
    levels = np.array([p.basin_level for p in members])

    rows = np.arange(count)
    first = np.full(count, -1, dtype=np.int64)
    max_ratio = np.zeros(count)

    def all_values(states: np.ndarray) -> np.ndarray:
        diff = states[:, None, :] - centers[None, :, :]
        return np.einsum("epi,pij,epj->ep", diff, weights, diff)

    x = x0s.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        values = all_values(x)
        bad = ~np.all(values <= levels[None, :], axis=1)
        first[bad] = 0
        per_min = np.min(values, axis=1)
        max_min = np.where(np.isfinite(per_min), per_min, np.inf)
        for k in range(horizon):
            col = cols[:, k]
            dev = x - fp[col]
            x = (
                fp[col]
                + np.einsum("eij,ej->ei", lin[col], dev)
                + np.einsum("ei,ekij,ej->ek", dev, quad[col], dev)
                + np.einsum("eij,ej->ei", gain[col], dists[:, k, :])
            )
            prev_active = values[rows, col]
            values = all_values(x)
            next_active = values[rows, col]
            ok = prev_active > 0.0
            np.maximum(
                max_ratio,
                np.where(ok, next_active / np.where(ok, prev_active, 1.0), 0.0),
                out=max_ratio,
            )
            bad = ~np.all(values <= levels[None, :], axis=1)
            first = np.where((first < 0) & bad, k + 1, first)
            per_min = np.min(values, axis=1)
            per_min = np.where(np.isfinite(per_min), per_min, np.inf)
            np.maximum(max_min, per_min, out=max_min)
    return first, max_min, max_ratio


def campaign_has_violation(
    library: PrimitiveLibrary,
    certificate,
    episode_count: int,
    horizon: int,
    amplitude: float,
    seed: int,
    stream: int,
    exact_sup: bool = True,
) -> bool:
    """True if any of the episodes drawn from ``derive_rng(seed, stream, e)``
    leaves the basin intersection."""
    x0s, signals, dists = _draw_campaign_inputs(
        library, certificate, episode_count, horizon, amplitude, seed, stream, exact_sup
    )
    first, _, _ = _batch_stats(library, x0s, signals, dists)
    return bool(np.any(first >= 0))


def monte_carlo(
    library: PrimitiveLibrary,
    certificate,
    episode_count: int,
    horizon: int,
    disturbance_amplitude: float,
    seed: int,
    keep_traces: int = 0,
) -> tuple[CampaignReport, list[Trace]]:
    """Monte Carlo safety campaign under a certificate.

    Episodes are independent and reproducible: episode e draws from
    ``derive_rng(seed, 0, e)``.  The certificate must fingerprint-match the
    library it was synthesized for.  Episodes are stepped jointly for speed;
    kept traces are re-run individually from the same inputs.
    """
    if episode_count < 1:
        raise ValueError("episode_count must be positive")
    if certificate.library_fingerprint != library_fingerprint(library):
        raise ValueError("certificate fingerprint does not match this library")
    x0s, signals, dists = _draw_campaign_inputs(
        library, certificate, episode_count, horizon, disturbance_amplitude,
        seed, _EPISODE_STREAM,
    )
    first, max_min, max_ratio = _batch_stats(library, x0s, signals, dists)
    bad_episodes = np.flatnonzero(first >= 0)
    recorded = tuple(
        (int(e), int(first[e])) for e in bad_episodes[:_MAX_RECORDED_VIOLATIONS]
    )
    kept = [
        run(
            library,
            signals[e],
            x0s[e],
            DisturbanceSequence.from_values(dists[e]),
            horizon,
        )
        for e in range(min(keep_traces, episode_count))
    ]
    report = CampaignReport(
        episodes=episode_count,
        horizon=horizon,
        amplitude=float(disturbance_amplitude),
        seed=int(seed),
        violation_count=int(bad_episodes.size),
        violation_rate=float(bad_episodes.size) / episode_count,
        trapping_level=float(np.max(max_min)),
        max_step_ratio=float(np.max(max_ratio)),
        first_violations=recorded,
    )
    return report, kept
