"""Exact right/left time robustness of STL formulas over finite trajectories.

Predicate shifts are clipped at the ends of the signal: the right robustness
at ``t`` looks at most ``H - t`` steps ahead, the left one at most ``t`` steps
back. This is the convention that makes the backward counters anchored at
``c_{H+1} = 0`` agree with the monitor (see the counter table in the tests).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .stl import (Evaluator, Formula, HorizonError, LinearPredicate, Trajectory, evaluate,
                  formula_horizon, sign)

Side = Literal["right", "left"]
SIDES: tuple[Side, ...] = ("right", "left")


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def predicate_signs(p: LinearPredicate, traj: Trajectory) -> np.ndarray:
    """chi_p at every time step as an int array of +1/-1."""
    mu = p.mu_signal(traj.states)
    return np.where(mu >= 0, 1, -1)


def _run_lengths(chi: np.ndarray, side: Side) -> np.ndarray:
    """Signed clipped shift ``chi_t * tau_t`` for every ``t``."""
    n = len(chi)
    out = np.zeros(n, dtype=int)
    if side == "right":
        for t in range(n - 2, -1, -1):
            out[t] = out[t + 1] + 1 if chi[t + 1] == chi[t] else 0
    else:
        for t in range(1, n):
            out[t] = out[t - 1] + 1 if chi[t - 1] == chi[t] else 0
    return chi * out


def predicate_profile(p: LinearPredicate, traj: Trajectory, side: Side = "right") -> np.ndarray:
    _check_side(side)
    return _run_lengths(predicate_signs(p, traj), side)


def _check_t(traj: Trajectory, t: int) -> None:
    if not 0 <= t <= traj.horizon:
        raise HorizonError(f"time {t} outside [0, {traj.horizon}]")


def theta_plus_predicate(p: LinearPredicate, traj: Trajectory, t: int) -> int:
    _check_t(traj, t)
    return int(predicate_profile(p, traj, "right")[t])


def theta_minus_predicate(p: LinearPredicate, traj: Trajectory, t: int) -> int:
    _check_t(traj, t)
    return int(predicate_profile(p, traj, "left")[t])


class _Leaves:
    """Caches one clipped profile per predicate for a given trajectory and side."""

    def __init__(self, traj: Trajectory, side: Side):
        self.traj = traj
        self.side = side
        self.profiles: dict[LinearPredicate, np.ndarray] = {}

    def __call__(self, p: LinearPredicate, t: int) -> int:
        prof = self.profiles.get(p)
        if prof is None:
            prof = self.profiles[p] = predicate_profile(p, self.traj, self.side)
        return int(prof[t])


def time_robustness(phi: Formula, traj: Trajectory, t: int = 0, side: Side = "right") -> int:
    """theta^+ (``side="right"``) or theta^- of ``phi`` at time ``t``, in time steps."""
    _check_side(side)
    if t < 0 or t + formula_horizon(phi) > traj.horizon:
        raise HorizonError(
            f"t={t} plus formula horizon {formula_horizon(phi)} exceeds trajectory horizon {traj.horizon}")
    return evaluate(phi, t, _Leaves(traj, side))


@dataclass(frozen=True)
class RobustnessTable:
    node: Formula
    side: Side
    values: tuple[int, ...]

    @property
    def times(self) -> range:
        return range(len(self.values))

    def __getitem__(self, t: int) -> int:
        return self.values[t]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=int)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "theta"])
            for t, v in enumerate(self.values):
                w.writerow([t, v])


def robustness_profile(phi: Formula, traj: Trajectory, side: Side = "right") -> RobustnessTable:
    """theta at every ``t`` in ``[0, H - len(phi)]``."""
    _check_side(side)
    last = traj.horizon - formula_horizon(phi)
    if last < 0:
        raise HorizonError(
            f"formula horizon {formula_horizon(phi)} exceeds trajectory horizon {traj.horizon}")
    ev = Evaluator(_Leaves(traj, side))
    values = tuple(ev(phi, t) for t in range(last + 1))
    return RobustnessTable(phi, side, values)


def read_trajectory_csv(path: str | Path, var_names: Sequence[str] | None = None) -> Trajectory:
    """Header row of variable names, one row per time step.

    With ``var_names`` the columns are reordered to match and extra columns
    are ignored.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise ValueError(f"{path}: empty trace")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: trace has no samples")
    if var_names is None:
        return Trajectory(data, tuple(header))
    missing = [v for v in var_names if v not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    cols = [header.index(v) for v in var_names]
    return Trajectory(data[:, cols], tuple(var_names))


def write_trajectory_csv(traj: Trajectory, path: str | Path, names: Sequence[str] | None = None) -> None:
    names = list(names or traj.names or [f"x{i}" for i in range(traj.dim)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in traj.states:
            w.writerow([repr(float(v)) for v in row])


__all__ = [
    "RobustnessTable", "Side", "SIDES", "predicate_profile", "predicate_signs",
    "read_trajectory_csv", "robustness_profile", "sign", "theta_minus_predicate",
    "theta_plus_predicate", "time_robustness", "write_trajectory_csv",
]
