"""Brute-force validators for the ensemble recursions.

Two independent routes to the same physics: exact unitary evolution of
the joint probe-oscillator density matrix built from the closed-form
block rotations, and a Monte-Carlo sampler of individual
repeat-until-success trajectories.  Both exist to cross-check the
distribution recursions in :mod:`demon_sim.protocols`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ZeroProbabilityOutcome
from .fock import FockDistribution
from .jc import SearchOptions
from .protocols import (LINEAR, NONLINEAR, REPLACE_WITH_INITIAL, Schedule,
                        run_schedule)

ORACLE_N_MAX = 256
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12


@dataclass(frozen=True)
class JointState:
    """Density matrix on the probe x oscillator space, basis |g,m>,|e,m>."""

    rho: np.ndarray
    n_max: int

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        object.__setattr__(self, "rho", rho)
        dim = 2 * (self.n_max + 1)
        if rho.shape != (dim, dim):
            raise DomainError(f"rho must be {dim}x{dim} for n_max={self.n_max}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise DomainError("rho is not Hermitian within tolerance")
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"trace {tr!r} deviates from 1 beyond {TRACE_TOL}")

    @classmethod
    def from_ground(cls, dist: FockDistribution) -> "JointState":
        """Probe in its ground state, oscillator populations from dist.

        The ignored tail must be negligible for the joint state to be
        normalized, so dist.leak must not exceed the trace tolerance.
        """
        if dist.leak > TRACE_TOL:
            raise DomainError(
                f"leak {dist.leak:.3e} too large to embed as a unit-trace state")
        n = len(dist.probs)
        rho = np.zeros((2 * n, 2 * n), dtype=complex)
        rho[:n, :n] = np.diag(dist.probs)
        return cls(rho, dist.n_max)

    def smallest_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.rho)[0])


def _jc_unitary(n_max: int, theta: float, kind: str) -> np.ndarray:
    """Closed-form block unitary on the truncated space.

    Levels pair as {|g,m+shift>, |e,m>}; the uncoupled top probe-excited
    levels are left invariant so the truncated matrix stays exactly
    unitary.
    """
    if not (math.isfinite(theta) and theta >= 0):
        raise DomainError(f"theta must be finite and >= 0, got {theta!r}")
    n = n_max + 1
    m = np.arange(n, dtype=float)
    if kind == LINEAR:
        phi = theta * np.sqrt(m)          # rotation angle of block {g_m, e_{m-1}}
        shift = 1
    elif kind == NONLINEAR:
        phi = theta * np.sqrt(m * (m - 1.0))
        shift = 2
    else:
        raise DomainError(f"unknown coupling kind {kind!r}")
    u = np.zeros((2 * n, 2 * n), dtype=complex)
    g = np.arange(n)
    e = n + np.arange(n)
    u[g, g] = np.cos(phi)
    u[e, e] = 1.0
    u[e[:n - shift], e[:n - shift]] = np.cos(phi[shift:])
    u[e[:n - shift], g[shift:]] = -1j * np.sin(phi[shift:])
    u[g[shift:], e[:n - shift]] = -1j * np.sin(phi[shift:])
    return u


def jc_apply(state: JointState, theta: float, kind: str) -> JointState:
    """Evolve the joint state under the closed-form coupling unitary."""
    u = _jc_unitary(state.n_max, theta, kind)
    return JointState(u @ state.rho @ u.conj().T, state.n_max)


def measure_excited(state: JointState):
    """Project on the excited probe; returns (probability, conditional dist)."""
    n = state.n_max + 1
    block = state.rho[n:, n:]
    prob = float(np.trace(block).real)
    if prob < 1e-300:
        raise ZeroProbabilityOutcome("excited-outcome probability is numerically zero")
    probs = np.real(np.diag(block)) / prob
    if np.any(probs < -1e-12):
        raise DomainError("conditional populations went negative beyond rounding")
    probs = np.clip(probs, 0.0, None)
    leak = max(0.0, 1.0 - math.fsum(probs))
    return prob, FockDistribution(probs, leak)


def recursion_equivalence_check(initial: FockDistribution, schedule: Schedule,
                                opts: SearchOptions = SearchOptions(),
                                sup_tol: float = 1e-12) -> dict:
    """Replay a schedule through the joint-unitary route and compare.

    The ensemble recursion supplies the per-round angles; the oracle
    mixes the unnormalized success branch with the policy's replacement,
    exactly as the recursion does, and reports the per-round sup-norm
    distance between the two population vectors.
    """
    if initial.n_max > ORACLE_N_MAX:
        raise DomainError(f"oracle path capped at n_max={ORACLE_N_MAX}, "
                          f"got {initial.n_max}")
    traj = run_schedule(initial, schedule, opts, leak_budget=math.inf)
    n = initial.n_max + 1
    rho_osc = np.diag(initial.probs).astype(complex)
    rho_init = rho_osc.copy()
    rounds = []
    for step, rec in zip(schedule.steps, traj.rounds):
        u = _jc_unitary(initial.n_max, rec.theta_used, rec.kind)
        joint = np.zeros((2 * n, 2 * n), dtype=complex)
        joint[:n, :n] = rho_osc
        after = u @ joint @ u.conj().T
        excited = after[n:, n:]
        p_succ = float(np.trace(excited).real)
        repl = rho_init if step.policy == REPLACE_WITH_INITIAL else rho_osc
        rho_osc = excited + (1.0 - p_succ) * repl
        sup = float(np.max(np.abs(np.real(np.diag(rho_osc)) - rec.dist_after.probs)))
        rounds.append({"round": rec.index, "sup_norm": sup,
                       "p_success_diff": abs(p_succ - rec.p_success)})
    max_sup = max(r["sup_norm"] for r in rounds)
    return {
        "schedule": schedule.to_string(),
        "n_max": initial.n_max,
        "tolerance": sup_tol,
        "rounds": rounds,
        "max_sup_norm": max_sup,
        "pass": bool(max_sup <= sup_tol),
    }


def _sample_levels(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)


def montecarlo_protocol(initial: FockDistribution, schedule: Schedule,
                        n_traj: int, seed: int,
                        opts: SearchOptions = SearchOptions()) -> FockDistribution:
    """Empirical final distribution over individual trajectories.

    Each trajectory samples a definite level, flips a success coin with
    the sin^2 weight of its level each round, and on failure draws a
    replacement from the policy's pool (the initial state, or the
    ensemble entering that round).  Counter-based generator keyed by the
    seed; trajectory k consumes row k of the pre-drawn uniform block, so
    the merged histogram is independent of any parallel split.
    """
    if n_traj < 1:
        raise DomainError(f"n_traj must be >= 1, got {n_traj}")
    traj = run_schedule(initial, schedule, opts, leak_budget=math.inf)
    entering = [initial] + [r.dist_after for r in traj.rounds[:-1]]
    n_rounds = len(traj.rounds)
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random((n_traj, 1 + 2 * n_rounds))
    levels = _sample_levels(initial.probs, u[:, 0])
    for k, (step, rec) in enumerate(zip(schedule.steps, traj.rounds)):
        lv = levels.astype(float)
        if rec.kind == LINEAR:
            weight = np.sin(rec.theta_used * np.sqrt(lv)) ** 2
            shift = 1
        else:
            weight = np.sin(rec.theta_used * np.sqrt(lv * (lv - 1.0))) ** 2
            shift = 2
        success = u[:, 1 + 2 * k] < weight
        levels = levels.copy()
        levels[success] -= shift
        repl = initial if step.policy == REPLACE_WITH_INITIAL else entering[k]
        failed = ~success
        if np.any(failed):
            levels[failed] = _sample_levels(repl.probs, u[failed, 2 + 2 * k])
    counts = np.bincount(levels, minlength=len(initial.probs)).astype(float)
    probs = counts / n_traj
    return FockDistribution(probs, max(0.0, 1.0 - math.fsum(probs)))
