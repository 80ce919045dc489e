"""Repeat-until-success subtraction schedules over Fock distributions.

One round couples a ground-state probe to the oscillator for a chosen
angle and measures the probe.  Success removes one quantum (linear) or
two (nonlinear); failure replaces the oscillator according to the policy:

    replace-with-initial   (protocol I)  -- fresh copy of the starting state
    replace-with-previous  (protocol II) -- copy from the previous round's pool

so the ensemble update for a linear step reads

    p'_m = p_{m+1} sin^2(theta sqrt(m+1)) + (1 - P_e) r_m

with r the replacement distribution, and the two-quantum analogue shifts
by two levels.  Both branches are kept unnormalized, so each round
preserves probs + leak = 1 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (DemonSimError, DomainError, ProtocolError, ScheduleError,
                     TruncationError)
from .fock import FockDistribution, MomentSummary, moments, write_distribution
from .jc import (OptimumReport, SearchOptions,
                 first_local_optimal_theta_nonlinear, optimal_theta_linear)

LINEAR = "linear"
NONLINEAR = "nonlinear"
REPLACE_WITH_INITIAL = "initial"
REPLACE_WITH_PREVIOUS = "previous"

DEFAULT_LEAK_BUDGET = 1e-6


@dataclass(frozen=True)
class StepSpec:
    """One subtraction step: coupling kind, failure policy, optional fixed angle."""

    kind: str
    policy: str
    theta_override: float | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR, NONLINEAR):
            raise ScheduleError(f"unknown step kind {self.kind!r}")
        if self.policy not in (REPLACE_WITH_INITIAL, REPLACE_WITH_PREVIOUS):
            raise ScheduleError(f"unknown replacement policy {self.policy!r}")
        if self.theta_override is not None and not (
                math.isfinite(self.theta_override) and self.theta_override > 0):
            raise ScheduleError(f"theta_override must be finite and > 0, "
                                f"got {self.theta_override!r}")


@dataclass(frozen=True)
class Schedule:
    """Ordered subtraction steps, with the shorthand string form 'LL..N..'."""

    steps: tuple
    allow_ripple: bool = False

    def __post_init__(self):
        if not self.steps:
            raise ScheduleError("schedule must contain at least one step")
        object.__setattr__(self, "steps", tuple(self.steps))
        for i, step in enumerate(self.steps, start=1):
            if not isinstance(step, StepSpec):
                raise ScheduleError(f"step {i} is not a StepSpec")
            if (step.kind == NONLINEAR and step.policy == REPLACE_WITH_INITIAL
                    and not self.allow_ripple):
                raise ScheduleError(
                    f"step {i}: a nonlinear step cannot use the replace-with-initial "
                    f"policy (it ripples the tail); set allow_ripple to override")

    @classmethod
    def from_string(cls, text: str, protocol: str = "II",
                    allow_ripple: bool = False) -> "Schedule":
        if protocol not in ("I", "II"):
            raise ScheduleError(f"protocol must be 'I' or 'II', got {protocol!r}")
        policy = REPLACE_WITH_INITIAL if protocol == "I" else REPLACE_WITH_PREVIOUS
        steps = []
        for ch in text:
            if ch == "L":
                steps.append(StepSpec(LINEAR, policy))
            elif ch == "N":
                steps.append(StepSpec(NONLINEAR, policy))
            else:
                raise ScheduleError(f"schedule string may only contain 'L' and 'N', "
                                    f"got {ch!r} in {text!r}")
        return cls(tuple(steps), allow_ripple=allow_ripple)

    def to_string(self) -> str:
        return "".join("L" if s.kind == LINEAR else "N" for s in self.steps)


@dataclass(frozen=True)
class RoundRecord:
    index: int
    kind: str
    theta_used: float
    p_success: float
    dist_after: FockDistribution
    moments_after: MomentSummary


@dataclass(frozen=True)
class ProtocolTrajectory:
    initial_dist: FockDistribution
    rounds: tuple

    @property
    def final_dist(self) -> FockDistribution:
        return self.rounds[-1].dist_after if self.rounds else self.initial_dist


def _apply_step(current: FockDistribution, replacement: FockDistribution,
                theta: float, kind: str):
    """Shared success-shift + failure-replacement update; returns (dist, p)."""
    if not (math.isfinite(theta) and theta > 0):
        raise DomainError(f"theta must be finite and > 0, got {theta!r}")
    if len(current.probs) != len(replacement.probs):
        raise DomainError("current and replacement distributions must share n_max")
    p = current.probs
    m = np.arange(len(p))
    if kind == LINEAR:
        weights = np.sin(theta * np.sqrt(m)) ** 2
        shift = 1
    elif kind == NONLINEAR:
        weights = np.sin(theta * np.sqrt(m * (m - 1.0))) ** 2
        shift = 2
    else:
        raise DomainError(f"unknown step kind {kind!r}")
    p_succ = float(p @ weights)
    new = (1.0 - p_succ) * replacement.probs
    new[:len(p) - shift] += p[shift:] * weights[shift:]
    leak = (1.0 - p_succ) * replacement.leak
    tol = max(current.leak_tol, replacement.leak_tol)
    return FockDistribution(new, leak, tol), p_succ


def step_linear_I(current: FockDistribution, initial: FockDistribution,
                  theta: float):
    """One-quantum subtraction, failures replaced by the initial state."""
    return _apply_step(current, initial, theta, LINEAR)


def step_linear_II(current: FockDistribution, theta: float):
    """One-quantum subtraction, failures keep the previous round's pool."""
    return _apply_step(current, current, theta, LINEAR)


def step_nonlinear_II(current: FockDistribution, theta: float):
    """Two-quantum subtraction, failures keep the previous round's pool."""
    return _apply_step(current, current, theta, NONLINEAR)


def run_schedule(initial: FockDistribution, schedule: Schedule,
                 opts: SearchOptions = SearchOptions(),
                 leak_budget: float = DEFAULT_LEAK_BUDGET) -> ProtocolTrajectory:
    """Execute a schedule, searching the optimal angle for each step.

    Steps without theta_override get a fresh angle search on their input
    distribution.  Aborts with TruncationError when any round's leak
    exceeds leak_budget.
    """
    if initial.leak > leak_budget:
        raise TruncationError(
            f"initial leak {initial.leak:.3e} exceeds the run budget {leak_budget:.3e}; "
            f"increase n_max")
    current = initial
    rounds = []
    for index, step in enumerate(schedule.steps, start=1):
        try:
            if step.theta_override is not None:
                theta = step.theta_override
            elif step.kind == LINEAR:
                theta = optimal_theta_linear(current, opts).theta_star
            else:
                theta = first_local_optimal_theta_nonlinear(current, opts).theta_star
            replacement = initial if step.policy == REPLACE_WITH_INITIAL else current
            current, p_succ = _apply_step(current, replacement, theta, step.kind)
            if current.leak > leak_budget:
                raise TruncationError(
                    f"leak {current.leak:.3e} exceeds the run budget {leak_budget:.3e}")
        except DemonSimError as exc:
            raise ProtocolError(index, exc) from exc
        rounds.append(RoundRecord(index=index, kind=step.kind, theta_used=theta,
                                  p_success=p_succ, dist_after=current,
                                  moments_after=moments(current)))
    return ProtocolTrajectory(initial_dist=initial, rounds=tuple(rounds))


def charge_performance(dist: FockDistribution,
                       opts: SearchOptions = SearchOptions()) -> OptimumReport:
    """Best probability of exciting a fresh ground-state probe."""
    return optimal_theta_linear(dist, opts)


def mass_production(p: float, k: int) -> float:
    """Probability that k independent batteries all charge: p**k."""
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"p must be in [0, 1], got {p!r}")
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")
    return p**k


# ---------------------------------------------------------------------------
# Trajectory serialization: rounds.csv plus per-round dist_N.csv files.

ROUNDS_HEADER = "round,kind,theta,p_success,mean,variance,g2,fano,mdr,leak"


def write_trajectory(traj: ProtocolTrajectory, out_dir) -> list:
    """Write rounds.csv and dist_0..dist_N.csv; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    lines = [ROUNDS_HEADER]
    for r in traj.rounds:
        mo = r.moments_after
        lines.append(",".join([
            str(r.index), r.kind, repr(float(r.theta_used)),
            repr(float(r.p_success)), repr(mo.mean), repr(mo.variance),
            repr(mo.g2), repr(mo.fano), repr(mo.mdr),
            repr(float(r.dist_after.leak)),
        ]))
    rounds_path = out / "rounds.csv"
    rounds_path.write_text("\n".join(lines) + "\n", encoding="ascii")
    paths.append(rounds_path)
    dist0 = out / "dist_0.csv"
    write_distribution(traj.initial_dist, dist0)
    paths.append(dist0)
    for r in traj.rounds:
        path = out / f"dist_{r.index}.csv"
        write_distribution(r.dist_after, path)
        paths.append(path)
    return paths
