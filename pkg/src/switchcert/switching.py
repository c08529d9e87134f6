"""Switching signals, average dwell-time budgets and the online supervisor.

A switching signal assigns one primitive id per step.  A budget (N0, Na)
admits a signal when every interval [a, b) contains at most
N0 + (b - a)/Na switches, counted at their activation step.  The
supervisor enforces that bound causally: a requested switch is admitted
only if the extended signal still satisfies the bound for every interval
ending at the new step, otherwise the request is deferred.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SLACK_TOL = 1e-9
_CHUNK_ROWS = 2048


@dataclass(frozen=True)
class SwitchingSignal:
    """Per-step primitive assignments sigma(0), ..., sigma(K)."""

    assignments: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.assignments)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("assignments must be a nonempty 1-D sequence")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.floor(arr)):
                raise ValueError("assignments must be integers")
        arr = arr.astype(np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "assignments", arr)

    def __len__(self) -> int:
        return self.assignments.size

    @property
    def switch_steps(self) -> np.ndarray:
        """Steps k >= 1 with sigma(k) != sigma(k-1)."""
        return np.flatnonzero(np.diff(self.assignments) != 0) + 1

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "id"])
            for k, v in enumerate(self.assignments):
                writer.writerow([k, int(v)])

    @classmethod
    def from_csv(cls, path: str | Path) -> "SwitchingSignal":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["k", "id"]:
            raise ValueError(f"{path}: expected header 'k,id'")
        ids = []
        for i, row in enumerate(rows[1:]):
            if len(row) != 2:
                raise ValueError(f"{path}: row {i + 1} must have two columns")
            k, v = int(row[0]), int(row[1])
            if k != i:
                raise ValueError(f"{path}: step column must count 0,1,... (row {i + 1} has k={k})")
            ids.append(v)
        return cls(np.array(ids, dtype=np.int64))


@dataclass(frozen=True)
class DwellTimeBudget:
    """Average dwell-time budget: at most n0 + length/na switches per interval."""

    n0: float
    na: float

    def __post_init__(self):
        if not (self.n0 > 0.0 and np.isfinite(self.n0)):
            raise ValueError("n0 must be positive")
        if not (self.na > 0.0 and np.isfinite(self.na)):
            raise ValueError("na must be positive")
        object.__setattr__(self, "n0", float(self.n0))
        object.__setattr__(self, "na", float(self.na))


def count_switches(signal: SwitchingSignal, lower: int, upper: int) -> int:
    """Number of switch steps j with lower <= j < upper."""
    size = len(signal)
    lower, upper = int(lower), int(upper)
    if not (0 <= lower <= upper <= size):
        raise ValueError(f"need 0 <= lower <= upper <= {size}, got [{lower}, {upper})")
    steps = signal.switch_steps
    return int(np.count_nonzero((steps >= lower) & (steps < upper)))


def _switch_prefix(signal: SwitchingSignal) -> np.ndarray:
    """prefix[j] = number of switch steps < j, for j = 0..len."""
    ind = np.zeros(len(signal) + 1, dtype=np.int64)
    ind[signal.switch_steps] = 1
    return np.concatenate(([0], np.cumsum(ind[:-1])))


@dataclass(frozen=True)
class DwellTimeReport:
    valid: bool
    worst_interval: tuple[int, int]
    worst_slack: float
    switch_count: int


def validate_dwell_time(signal: SwitchingSignal, budget: DwellTimeBudget) -> DwellTimeReport:
    """Exhaustive check of the dwell-time bound over all interval pairs.

    Exhaustively evaluates slack = n0 + (b - a)/na - switches(a, b) over all
    0 <= a <= b <= K and reports the minimizing interval; valid means the
    worst slack is nonnegative (up to a tiny float tolerance).
    """
    size = len(signal)
    prefix = _switch_prefix(signal)
    per_step = 1.0 / budget.na
    best_slack = np.inf
    best = (0, 0)
    # row-chunked scan of the (a, b) triangle keeps memory bounded for long signals
    for a0 in range(0, size + 1, _CHUNK_ROWS):
        a1 = min(a0 + _CHUNK_ROWS, size + 1)
        a = np.arange(a0, a1)[:, None]
        b = np.arange(0, size + 1)[None, :]
        counts = prefix[None, :] - prefix[a]
        slack = budget.n0 + (b - a) * per_step - counts
        slack = np.where(b >= a, slack, np.inf)
        idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
        value = float(slack[idx])
        if value < best_slack:
            best_slack = value
            best = (int(a[idx[0], 0]), int(b[0, idx[1]]))
    return DwellTimeReport(
        valid=bool(best_slack >= -_SLACK_TOL),
        worst_interval=best,
        worst_slack=best_slack,
        switch_count=int(prefix[-1]),
    )


def _deficit_after(assignments: np.ndarray, na: float) -> float:
    """Max over a of switches(a, K) - (K - a)/na, maintained as a running deficit."""
    deficit = 0.0
    per_step = 1.0 / na
    prev = assignments[0]
    for value in assignments[1:]:
        deficit = max(0.0, deficit + (1.0 if value != prev else 0.0) - per_step)
        prev = value
    return deficit


def admit_switch(history: SwitchingSignal, step: int, requested: int, budget: DwellTimeBudget) -> bool:
    """Causal admission test for a switch activating at ``step``.

    ``history`` must cover steps 0..step-1.  Returns True when appending the
    requested id keeps the dwell-time bound satisfied for every interval
    ending at the new step (intervals ending earlier are unchanged).
    A request equal to the current id is no switch and always admitted.
    """
    if step != len(history):
        raise ValueError(f"step must equal len(history)={len(history)}, got {step}")
    current = int(history.assignments[-1])
    if int(requested) == current:
        return True
    deficit = _deficit_after(history.assignments, budget.na)
    candidate = max(0.0, deficit + 1.0 - 1.0 / budget.na)
    return candidate <= budget.n0 + _SLACK_TOL


class Supervisor:
    """Online gatekeeper that defers switches violating the dwell-time budget.

    ``request`` is called once per step with the id that should be active
    next; it either admits the switch or holds the current primitive.  The
    running deficit makes each call O(1) while agreeing exactly with the
    exhaustive validator (every interval was the frontier once).
    """

    def __init__(self, initial_id: int, budget: DwellTimeBudget, known_ids=None):
        self._known = None if known_ids is None else frozenset(int(i) for i in known_ids)
        self._check_known(initial_id)
        self._ids = [int(initial_id)]
        self._budget = budget
        self._deficit = 0.0
        self._decay = 1.0 / budget.na

    def _check_known(self, id: int) -> None:
        if self._known is not None and int(id) not in self._known:
            raise ValueError(f"unknown primitive id {id}")

    @property
    def current(self) -> int:
        return self._ids[-1]

    @property
    def budget(self) -> DwellTimeBudget:
        return self._budget

    def request(self, requested: int) -> bool:
        """Advance one step; returns True when the request was admitted."""
        self._check_known(requested)
        requested = int(requested)
        if requested == self.current:
            self._deficit = max(0.0, self._deficit - self._decay)
            self._ids.append(requested)
            return True
        candidate = max(0.0, self._deficit + 1.0 - self._decay)
        if candidate <= self._budget.n0 + _SLACK_TOL:
            self._deficit = candidate
            self._ids.append(requested)
            return True
        self._deficit = max(0.0, self._deficit - self._decay)
        self._ids.append(self.current)
        return False

    @property
    def signal(self) -> SwitchingSignal:
        return SwitchingSignal(np.array(self._ids, dtype=np.int64))


def heading_policy(phi: float, dead_zone: float = 0.0) -> int:
    """Map a heading estimate to a primitive id: 0 right of the dead zone,
    1 inside it, 2 left of it."""
    phi = float(phi)
    if not np.isfinite(phi):
        raise ValueError("heading estimate must be finite")
    if dead_zone < 0.0:
        raise ValueError("dead_zone must be nonnegative")
    if phi < -dead_zone:
        return 0
    if phi > dead_zone:
        return 2
    return 1
