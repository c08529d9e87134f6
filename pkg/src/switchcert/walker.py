"""Reduced leader-following walker scenario.

A planar walker advances stride by stride.  Each stride applies one of three
stride primitives (turn right, straight, turn left); the stride-to-stride
gait dynamics live in a 2-D reduced state driven by the integrated
leader-interaction force, and the world pose composes on top of the reduced
step because the stride dynamics do not depend on heading.  A supervisor
admits primitive switches against a certificate's dwell-time budget, closing
the loop: integrate force, estimate the leader's bearing, pick the next
primitive, step.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .certificates import Certificate
from .library_io import library_fingerprint, library_from_dict
from .primitives import Primitive, PrimitiveLibrary, eval_map
from .simulation import budget_from_certificate
from .switching import Supervisor, SwitchingSignal, heading_policy, validate_dwell_time

STRIDE_IDS = (0, 1, 2)
DEFAULT_SPEED = 0.65
DEFAULT_STRIDE_DURATION = 0.5
SIMPSON_PANELS = 64
_SPAN_SLACK = 1e-9
# Integrals this small are quadrature roundoff; snapping them to the exact
# zero vector keeps the zero-force bearing convention meaningful.
_FORCE_SNAP = 1e-9


def wrap_angle(angle: float) -> float:
    """Normalize an angle to (-pi, pi]; exact identity inside that range."""
    angle = float(angle)
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = angle % math.tau
    if wrapped > math.pi:
        wrapped -= math.tau
    return wrapped


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _vec2(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != (2,):
        raise ValueError(f"{name} must be a 2-vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


def _mat2(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Pose:
    """World-frame planar pose: position in meters, heading in radians.

    The heading is normalized to (-pi, pi] at construction.
    """

    position: np.ndarray
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "position", _vec2(self.position, "position"))
        if not np.isfinite(self.heading):
            raise ValueError("heading must be finite")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


@dataclass(frozen=True)
class StrideForce:
    """Stride integrals of the interaction force, in the stride-start body
    frame (x forward along the walker's heading)."""

    fx: float
    fy: float

    @property
    def phi(self) -> float:
        """Bearing of the integrated force; 0 for the zero vector."""
        if self.fx == 0.0 and self.fy == 0.0:
            return 0.0
        return math.atan2(self.fy, self.fx)

    @classmethod
    def zero(cls) -> "StrideForce":
        return cls(0.0, 0.0)


def heading_estimate(force: StrideForce) -> float:
    """Bearing of the stride's integrated force (radians, body frame).

    Uses the two-argument arctangent so a force pointing backwards reads as
    pi rather than 0; the zero force maps to 0 (treat as straight ahead).
    """
    return force.phi


@dataclass(frozen=True)
class StridePrimitive:
    """One stride behavior: reduced gait dynamics plus pose composition data.

    ``force_coupling`` maps the body-frame stride force integrals into the
    reduced map's disturbance channel.  ``heading_gain`` and
    ``displacement_gain`` are the affine sensitivities of the pose deltas to
    the post-stride deviation of the reduced state from its fixed point.
    """

    reduced: Primitive
    nominal_heading_change: float
    nominal_displacement: np.ndarray
    stride_duration: float
    force_coupling: np.ndarray
    heading_gain: np.ndarray
    displacement_gain: np.ndarray

    def __post_init__(self):
        if self.reduced.id not in STRIDE_IDS:
            raise ValueError(f"stride primitive id must be one of {STRIDE_IDS}")
        if not (np.isfinite(self.stride_duration) and self.stride_duration > 0.0):
            raise ValueError("stride_duration must be positive")
        if not np.isfinite(self.nominal_heading_change):
            raise ValueError("nominal_heading_change must be finite")
        object.__setattr__(
            self, "nominal_displacement",
            _vec2(self.nominal_displacement, "nominal_displacement"))
        object.__setattr__(
            self, "force_coupling", _mat2(self.force_coupling, "force_coupling"))
        object.__setattr__(
            self, "heading_gain", _vec2(self.heading_gain, "heading_gain"))
        object.__setattr__(
            self, "displacement_gain",
            _mat2(self.displacement_gain, "displacement_gain"))
        if self.reduced.map.dist_dim != 2:
            raise ValueError("reduced map must accept a 2-D disturbance")

    @property
    def id(self) -> int:
        return self.reduced.id


@dataclass(frozen=True)
class LeaderModel:
    """The leader's intended trajectory and the interaction impedance.

    The path is a natural cubic spline through timestamped waypoints; the
    interaction force is spring-damper: stiffness times position error plus
    damping times velocity error.
    """

    times: np.ndarray
    waypoints: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        points = np.array(self.waypoints, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("need at least two timestamps")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("timestamps must be strictly increasing")
        if points.shape != (times.size, 2):
            raise ValueError("waypoints must be (len(times), 2)")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(points))):
            raise ValueError("times and waypoints must be finite")
        stiffness = _mat2(self.stiffness, "stiffness")
        damping = _mat2(self.damping, "damping")
        for name, mat in (("stiffness", stiffness), ("damping", damping)):
            if not np.allclose(mat, mat.T, atol=1e-10):
                raise ValueError(f"{name} must be symmetric")
            if np.min(np.linalg.eigvalsh(0.5 * (mat + mat.T))) < -1e-10:
                raise ValueError(f"{name} must be positive semidefinite")
        times.flags.writeable = False
        points.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "waypoints", points)
        object.__setattr__(self, "stiffness", stiffness)
        object.__setattr__(self, "damping", damping)
        object.__setattr__(
            self, "_path", CubicSpline(times, points, axis=0, bc_type="natural"))

    @classmethod
    def from_waypoints(
        cls,
        waypoints,
        speed: float = DEFAULT_SPEED,
        stiffness=None,
        damping=None,
        start_time: float = 0.0,
    ) -> "LeaderModel":
        """Timestamp waypoints by cumulative chord length at constant speed."""
        points = np.array(waypoints, dtype=float)
        if points.ndim != 2 or points.shape[0] < 2 or points.shape[1] != 2:
            raise ValueError("waypoints must be (T, 2) with T >= 2")
        if not (np.isfinite(speed) and speed > 0.0):
            raise ValueError("speed must be positive")
        chords = np.linalg.norm(np.diff(points, axis=0), axis=1)
        if np.any(chords <= 0.0):
            raise ValueError("consecutive waypoints must be distinct")
        times = start_time + np.concatenate(([0.0], np.cumsum(chords))) / speed
        if stiffness is None:
            stiffness = 10.0 * np.eye(2)
        if damping is None:
            damping = 2.0 * np.eye(2)
        return cls(times=times, waypoints=points, stiffness=stiffness, damping=damping)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def _check_span(self, t) -> None:
        t0, t1 = self.span
        tmin = float(np.min(t))
        tmax = float(np.max(t))
        if tmin < t0 - _SPAN_SLACK or tmax > t1 + _SPAN_SLACK:
            raise ValueError(
                f"time {tmin if tmin < t0 else tmax} outside the leader span [{t0}, {t1}]")

    def position(self, t):
        self._check_span(t)
        return self._path(t)

    def velocity(self, t):
        self._check_span(t)
        return self._path(t, 1)


def impedance_force(leader: LeaderModel, p_e, v_e, t: float) -> np.ndarray:
    """World-frame spring-damper interaction force at time t.

    stiffness @ (leader position - application point) plus
    damping @ (leader velocity - application point velocity).
    """
    p_e = np.asarray(p_e, dtype=float)
    v_e = np.asarray(v_e, dtype=float)
    pos = leader.position(t)
    vel = leader.velocity(t)
    return leader.stiffness @ (pos - p_e) + leader.damping @ (vel - v_e)


def integrate_stride_force(
    leader: LeaderModel,
    start_pose: Pose,
    end_position,
    t_start: float,
    t_end: float,
    panels: int = SIMPSON_PANELS,
) -> StrideForce:
    """Integrals of the interaction force over one stride, body frame.

    The application point moves in a straight line from the stride-start
    position to ``end_position`` at constant speed; each world force
    component is integrated by composite Simpson quadrature and the result
    is rotated into the stride-start body frame.
    """
    if not t_end > t_start:
        raise ValueError("stride interval must have positive length")
    panels = int(panels)
    if panels < 2:
        raise ValueError("need at least two quadrature panels")
    if panels % 2:
        panels += 1
    end_position = _vec2(end_position, "end_position")
    duration = t_end - t_start
    nodes = t_start + duration * np.arange(panels + 1) / panels
    frac = (nodes - t_start) / duration
    p_e = start_pose.position[None, :] + frac[:, None] * (end_position - start_pose.position)[None, :]
    v_e = (end_position - start_pose.position) / duration
    leader._check_span(nodes)
    p_l = leader._path(nodes)
    v_l = leader._path(nodes, 1)
    force = (p_l - p_e) @ leader.stiffness.T + (v_l - v_e[None, :]) @ leader.damping.T
    weights = np.ones(panels + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= duration / panels / 3.0
    world = weights @ force
    body = rotation(-start_pose.heading) @ world
    if np.max(np.abs(body)) <= _FORCE_SNAP:
        return StrideForce.zero()
    return StrideForce(float(body[0]), float(body[1]))


def stride_update(
    pose: Pose,
    prim: StridePrimitive,
    z: np.ndarray,
    force: StrideForce,
) -> tuple[Pose, np.ndarray]:
    """Advance the reduced state one stride and compose the pose.

    The body-frame force integrals enter the reduced map through the
    primitive's coupling matrix.  The pose deltas are the primitive's
    nominals plus affine corrections in the post-stride deviation of the
    reduced state from its fixed point; the displacement is executed in the
    stride-start body frame.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise ValueError("reduced state must be a finite 2-vector")
    disturbance = prim.force_coupling @ np.array([force.fx, force.fy])
    z_next = eval_map(prim.reduced.map, z, disturbance)
    deviation = z_next - prim.reduced.map.fixed_point
    heading = wrap_angle(
        pose.heading + prim.nominal_heading_change + float(prim.heading_gain @ deviation))
    displacement = prim.nominal_displacement + prim.displacement_gain @ deviation
    position = pose.position + rotation(pose.heading) @ displacement
    return Pose(position, heading), z_next


@dataclass(frozen=True)
class WalkerScenario:
    """Closed-loop scenario configuration.

    ``mode`` is "adaptive" (policy plus supervisor) or "fixed:<id>"
    (ablation with a constant primitive).  The certificate must have been
    synthesized for exactly the reduced library of ``strides``.
    """

    strides: tuple[StridePrimitive, ...]
    certificate: Certificate
    leader: LeaderModel
    initial_pose: Pose
    stride_count: int
    mode: str = "adaptive"
    initial_primitive: int = 1
    dead_zone: float = 0.0
    start_time: float = 0.0

    def __post_init__(self):
        ids = tuple(sorted(p.id for p in self.strides))
        if ids != STRIDE_IDS:
            raise ValueError(f"scenario needs stride primitives with ids {STRIDE_IDS}")
        if self.stride_count < 1:
            raise ValueError("stride_count must be positive")
        if self.initial_primitive not in ids:
            raise ValueError("initial_primitive not in the stride library")
        if self.dead_zone < 0.0:
            raise ValueError("dead_zone must be nonnegative")
        self.fixed_id  # validates the mode string
        fp = library_fingerprint(self.reduced_library)
        if self.certificate.library_fingerprint != fp:
            raise ValueError("certificate was not synthesized for this stride library")
        t0, t1 = self.leader.span
        duration = sum(sorted(p.stride_duration for p in self.strides)[-1:]) * self.stride_count
        if self.start_time < t0 - _SPAN_SLACK or self.start_time + duration > t1 + _SPAN_SLACK:
            raise ValueError(
                "leader trajectory does not cover the scenario duration "
                f"[{self.start_time}, {self.start_time + duration}]")

    @property
    def reduced_library(self) -> PrimitiveLibrary:
        members = sorted(self.strides, key=lambda p: p.id)
        return PrimitiveLibrary(tuple(p.reduced for p in members))

    @property
    def fixed_id(self) -> int | None:
        if self.mode == "adaptive":
            return None
        if self.mode.startswith("fixed:"):
            try:
                fid = int(self.mode.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad mode {self.mode!r}") from None
            if fid not in STRIDE_IDS:
                raise ValueError(f"fixed primitive id {fid} unknown")
            return fid
        raise ValueError(f"mode must be 'adaptive' or 'fixed:<id>', got {self.mode!r}")


_FMT = repr


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


@dataclass(frozen=True)
class ScenarioTrace:
    """Everything one scenario run produced, at stride resolution."""

    times: np.ndarray             # (K+1,)
    positions: np.ndarray         # (K+1, 2)
    headings: np.ndarray          # (K+1,)
    reduced: np.ndarray           # (K+1, 2)
    forces: np.ndarray            # (K, 2) body frame integrals
    phis: np.ndarray              # (K,)
    signal: SwitchingSignal       # K entries, stride k's primitive
    lyapunov: np.ndarray          # (K+1, 3)
    member_ids: tuple[int, ...]
    basin_levels: np.ndarray
    in_all_basins: np.ndarray     # (K+1,) bool
    lateral: np.ndarray           # (K+1,) signed cross-track offset from the leader
    leader_positions: np.ndarray  # (K+1, 2) leader at stride boundaries
    mode: str

    @property
    def stride_count(self) -> int:
        return self.forces.shape[0]

    @property
    def max_lateral_deviation(self) -> float:
        return float(np.max(np.abs(self.lateral)))

    @property
    def final_lateral_deviation(self) -> float:
        return float(abs(self.lateral[-1]))

    @property
    def usage_counts(self) -> dict[int, int]:
        arr = self.signal.assignments
        return {pid: int(np.sum(arr == pid)) for pid in self.member_ids}

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "strides": self.stride_count,
            "switch_count": len(self.signal.switch_steps),
            "usage_counts": {str(k): v for k, v in sorted(self.usage_counts.items())},
            "final_lateral_deviation": self.final_lateral_deviation,
            "max_lateral_deviation": self.max_lateral_deviation,
            "reduced_in_all_basins": bool(np.all(self.in_all_basins)),
            "max_reduced_level": float(np.max(np.min(self.lyapunov, axis=1))),
            "final_position": [float(v) for v in self.positions[-1]],
            "final_heading": float(self.headings[-1]),
        }

    def write_outputs(self, out_dir: str | Path, leader: LeaderModel | None = None) -> None:
        """Write the CSV bundle: poses, forces, signal, reduced trace, and
        plot data (paths plus basin ellipse parameters)."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        k_all = range(self.times.size)
        _write_rows(
            out / "poses.csv",
            ["k", "t", "x", "y", "heading", "lateral_deviation"],
            ([k, _FMT(self.times[k]), _FMT(self.positions[k, 0]), _FMT(self.positions[k, 1]),
              _FMT(self.headings[k]), _FMT(self.lateral[k])] for k in k_all),
        )
        _write_rows(
            out / "forces.csv",
            ["k", "fx", "fy", "phi"],
            ([k, _FMT(self.forces[k, 0]), _FMT(self.forces[k, 1]), _FMT(self.phis[k])]
             for k in range(self.stride_count)),
        )
        self.signal.to_csv(out / "sigma.csv")
        _write_rows(
            out / "reduced.csv",
            ["k", "z0", "z1"] + [f"V_{pid}" for pid in self.member_ids] + ["in_all_basins"],
            ([k, _FMT(self.reduced[k, 0]), _FMT(self.reduced[k, 1])]
             + [_FMT(v) for v in self.lyapunov[k]] + [int(self.in_all_basins[k])]
             for k in k_all),
        )
        _write_rows(
            out / "plot_walker_path.csv",
            ["t", "x", "y"],
            ([_FMT(self.times[k]), _FMT(self.positions[k, 0]), _FMT(self.positions[k, 1])]
             for k in k_all),
        )
        if leader is not None:
            dense = np.linspace(self.times[0], self.times[-1], 10 * self.stride_count + 1)
            pts = leader.position(dense)
            _write_rows(
                out / "plot_leader_path.csv",
                ["t", "x", "y"],
                ([_FMT(t), _FMT(p[0]), _FMT(p[1])] for t, p in zip(dense, pts)),
            )

    def write_ellipses(self, out_dir: str | Path, library: PrimitiveLibrary,
                       certificate: Certificate) -> None:
        """Basin/core/trapping ellipse parameters for external plotting."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        trap = certificate.mu ** certificate.n0_bar * certificate.omega
        rows = []
        for p in library:
            w = p.lyapunov.weight
            c = p.lyapunov.center
            rows.append([
                p.id, _FMT(c[0]), _FMT(c[1]),
                _FMT(w[0, 0]), _FMT(w[0, 1]), _FMT(w[1, 1]),
                _FMT(p.basin_level), _FMT(certificate.kappa), _FMT(trap),
            ])
        _write_rows(
            out / "plot_basin_ellipses.csv",
            ["id", "center_x", "center_y", "w_xx", "w_xy", "w_yy",
             "basin_level", "core_level", "trapping_level"],
            rows,
        )


def run_scenario(scenario: WalkerScenario) -> ScenarioTrace:
    """Run the closed loop for the configured number of strides.

    Per stride: integrate the interaction force along the nominal stride
    path, estimate the leader bearing from the integrals, ask the policy for
    the next primitive (one-stride delay), pass the request through the
    dwell-time supervisor, and apply the stride update.  The ablation mode
    keeps the primitive constant and skips the policy.
    """
    strides = {p.id: p for p in scenario.strides}
    library = scenario.reduced_library
    fixed = scenario.fixed_id
    count = scenario.stride_count
    active = fixed if fixed is not None else scenario.initial_primitive
    supervisor = None
    if fixed is None:
        supervisor = Supervisor(
            active, budget_from_certificate(scenario.certificate), known_ids=STRIDE_IDS)

    times = np.empty(count + 1)
    positions = np.empty((count + 1, 2))
    headings = np.empty(count + 1)
    reduced = np.empty((count + 1, 2))
    forces = np.empty((count, 2))
    phis = np.empty(count)
    sigma = np.empty(count, dtype=np.int64)

    pose = scenario.initial_pose
    z = strides[active].reduced.map.fixed_point.copy()
    t = scenario.start_time
    times[0] = t
    positions[0] = pose.position
    headings[0] = pose.heading
    reduced[0] = z

    for k in range(count):
        prim = strides[active]
        sigma[k] = active
        nominal_end = pose.position + rotation(pose.heading) @ prim.nominal_displacement
        force = integrate_stride_force(
            scenario.leader, pose, nominal_end, t, t + prim.stride_duration)
        forces[k] = (force.fx, force.fy)
        phis[k] = heading_estimate(force)
        pose, z = stride_update(pose, prim, z, force)
        t += prim.stride_duration
        times[k + 1] = t
        positions[k + 1] = pose.position
        headings[k + 1] = pose.heading
        reduced[k + 1] = z
        if k + 1 < count:
            if fixed is None:
                wanted = heading_policy(phis[k], scenario.dead_zone)
                supervisor.request(wanted)
                active = supervisor.current
            # ablation keeps the primitive constant

    signal = SwitchingSignal(sigma)
    if fixed is None:
        report = validate_dwell_time(signal, budget_from_certificate(scenario.certificate))
        if not report.valid:
            raise RuntimeError("supervisor produced a budget-violating signal")

    members = list(library)
    lyap = np.column_stack([p.lyapunov.values(reduced) for p in members])
    levels = np.array([p.basin_level for p in members])
    in_all = np.all(lyap <= levels[None, :], axis=1)

    leader_pts = scenario.leader.position(times)
    leader_vel = scenario.leader.velocity(times)
    speed = np.linalg.norm(leader_vel, axis=1)
    if np.any(speed <= 0.0):
        raise ValueError("leader velocity vanishes at a stride boundary")
    tangent = leader_vel / speed[:, None]
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    lateral = np.sum((positions - leader_pts) * normal, axis=1)

    return ScenarioTrace(
        times=times,
        positions=positions,
        headings=headings,
        reduced=reduced,
        forces=forces,
        phis=phis,
        signal=signal,
        lyapunov=lyap,
        member_ids=library.ids,
        basin_levels=levels,
        in_all_basins=in_all,
        lateral=lateral,
        leader_positions=leader_pts,
        mode=scenario.mode,
    )


# ---------------------------------------------------------------------------
# shipped data and scenario configs

def _data_text(name: str) -> str:
    return resources.files("switchcert").joinpath("data", name).read_text()


def shipped_walker_library() -> PrimitiveLibrary:
    """The packaged 3-member reduced stride library."""
    return library_from_dict(json.loads(_data_text("walker_library.json")))


def shipped_certificate() -> Certificate:
    """The packaged certificate for the shipped stride library."""
    return Certificate.from_dict(json.loads(_data_text("walker_certificate.json")))


def shipped_stride_primitives() -> tuple[StridePrimitive, ...]:
    """The packaged stride primitives (reduced dynamics plus pose data)."""
    library = shipped_walker_library()
    meta = json.loads(_data_text("walker_strides.json"))
    by_id = {entry["id"]: entry for entry in meta["primitives"]}
    out = []
    for member in library:
        entry = by_id[member.id]
        out.append(StridePrimitive(
            reduced=member,
            nominal_heading_change=float(entry["heading_change"]),
            nominal_displacement=np.array(entry["displacement"], dtype=float),
            stride_duration=float(entry.get("duration", meta.get("stride_duration", DEFAULT_STRIDE_DURATION))),
            force_coupling=np.array(entry["force_coupling"], dtype=float),
            heading_gain=np.array(entry["heading_gain"], dtype=float),
            displacement_gain=np.array(entry["displacement_gain"], dtype=float),
        ))
    return tuple(out)


def load_scenario(
    config: dict | str | Path,
    base_dir: str | Path | None = None,
    mode_override: str | None = None,
    certificate_override: str | Path | None = None,
) -> WalkerScenario:
    """Build a scenario from a JSON config (path or already-parsed dict).

    Relative certificate paths resolve against ``base_dir`` (defaults to the
    config file's directory).  The special certificate value "shipped" loads
    the packaged certificate; the stride library is always the shipped one.
    """
    if not isinstance(config, dict):
        path = Path(config)
        base_dir = path.parent if base_dir is None else Path(base_dir)
        config = json.loads(path.read_text())
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    leader_cfg = config.get("leader")
    if not isinstance(leader_cfg, dict) or "waypoints" not in leader_cfg:
        raise ValueError("config needs leader.waypoints")
    waypoints = np.array(leader_cfg["waypoints"], dtype=float)
    stiffness = np.array(leader_cfg.get("stiffness", (10.0 * np.eye(2)).tolist()), dtype=float)
    damping = np.array(leader_cfg.get("damping", (2.0 * np.eye(2)).tolist()), dtype=float)
    if "timestamps" in leader_cfg:
        leader = LeaderModel(
            times=np.array(leader_cfg["timestamps"], dtype=float),
            waypoints=waypoints, stiffness=stiffness, damping=damping)
    else:
        leader = LeaderModel.from_waypoints(
            waypoints, speed=float(leader_cfg.get("speed", DEFAULT_SPEED)),
            stiffness=stiffness, damping=damping)

    cert_ref = certificate_override if certificate_override is not None \
        else config.get("certificate", "shipped")
    if str(cert_ref) == "shipped":
        certificate = shipped_certificate()
    else:
        cert_path = Path(cert_ref)
        if not cert_path.is_absolute():
            cert_path = base / cert_path
        certificate = Certificate.load(cert_path)

    pose_cfg = config.get("initial_pose", {})
    pose = Pose(
        position=np.array(pose_cfg.get("position", [0.0, 0.0]), dtype=float),
        heading=float(pose_cfg.get("heading", 0.0)))

    return WalkerScenario(
        strides=shipped_stride_primitives(),
        certificate=certificate,
        leader=leader,
        initial_pose=pose,
        stride_count=int(config.get("strides", 20)),
        mode=str(mode_override if mode_override is not None else config.get("mode", "adaptive")),
        initial_primitive=int(config.get("initial_primitive", 1)),
        dead_zone=float(config.get("dead_zone", 0.0)),
        start_time=float(config.get("start_time", 0.0)),
    )
