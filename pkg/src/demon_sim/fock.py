"""Diagonal oscillator states: probability distributions over Fock levels.

Distributions are plain probability vectors over levels 0..n_max together
with an explicitly tracked ``leak`` -- the mass that lives past the
truncation level.  Nothing is ever renormalized: probs + leak account for
the full unit of probability, so comparisons against exact references stay
honest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, TruncationError

# CODATA 2018 (SI exact values)
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23      # J / K

NORM_TOL = 1e-12
DEFAULT_LEAK_TOL = 1e-9

# Undefined-statistic sentinels
UNDEFINED = math.nan
DIVERGENT = math.inf


def default_n_max(nbar: float) -> int:
    """Truncation level that keeps the thermal tail mass below 1e-12.

    The thermal occupation tail is geometric, q^(n_max+1) with
    q = nbar/(nbar+1), so the level must scale like nbar*ln(1/tol);
    a mean-plus-sigmas rule is not enough.
    """
    if nbar <= 0:
        return 16
    return max(16, math.ceil(27.7 / math.log1p(1.0 / nbar)) + 8)


@dataclass(frozen=True)
class FockDistribution:
    """Probability vector over Fock levels 0..n_max plus tracked leak."""

    probs: np.ndarray
    leak: float = 0.0
    leak_tol: float = DEFAULT_LEAK_TOL

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        self.validate()

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    def validate(self) -> None:
        p = self.probs
        if p.ndim != 1 or len(p) < 2:
            raise DomainError("probs must be a vector over levels 0..n_max with n_max >= 1")
        if not np.all(np.isfinite(p)):
            raise DomainError("probs contain non-finite entries")
        if np.any(p < 0):
            worst = float(p.min())
            raise DomainError(f"negative probability {worst:g} at level {int(p.argmin())}")
        if not math.isfinite(self.leak) or self.leak < 0:
            raise DomainError(f"leak must be finite and >= 0, got {self.leak!r}")
        total = math.fsum(p) + self.leak
        if abs(1.0 - total) > NORM_TOL:
            raise DomainError(f"probs + leak = {total!r} deviates from 1 beyond {NORM_TOL}")
        if self.leak > self.leak_tol:
            raise TruncationError(
                f"leak {self.leak:.3e} exceeds tolerance {self.leak_tol:.3e}; "
                f"increase n_max (currently {self.n_max})"
            )

    def with_leak_tol(self, leak_tol: float) -> "FockDistribution":
        return FockDistribution(self.probs, self.leak, leak_tol)


@dataclass(frozen=True)
class MomentSummary:
    """Low-order statistics of a Fock distribution.

    g2 and fano are NaN when the mean vanishes; mdr is +inf when the
    variance vanishes (a definite excitation number).
    """

    mean: float
    variance: float
    g2: float
    fano: float
    mdr: float


@dataclass(frozen=True)
class ThermalEnvironment:
    """Oscillator frequency and bath temperature, SI units."""

    omega: float            # rad/s
    temperature: float      # K
    hbar: float = HBAR
    k_b: float = K_B

    def __post_init__(self):
        if not (self.temperature > 0):
            raise DomainError(f"temperature must be > 0, got {self.temperature!r}")
        if not (self.omega > 0):
            raise DomainError(f"omega must be > 0, got {self.omega!r}")


def thermal_distribution(nbar: float, n_max: int,
                         leak_tol: float = DEFAULT_LEAK_TOL) -> FockDistribution:
    """Thermal occupation with mean number nbar, truncated at n_max.

    probs[m] = nbar^m / (nbar+1)^(m+1); the tail past n_max is the
    geometric closed form (nbar/(nbar+1))^(n_max+1), kept as leak.
    """
    if not math.isfinite(nbar) or nbar < 0:
        raise DomainError(f"nbar must be finite and >= 0, got {nbar!r}")
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    if nbar == 0:
        probs = np.zeros(n_max + 1)
        probs[0] = 1.0
        return FockDistribution(probs, 0.0, leak_tol)
    m = np.arange(n_max + 1)
    log_q = math.log(nbar) - math.log(nbar + 1.0)
    probs = np.exp(m * log_q - math.log(nbar + 1.0))
    leak = math.exp((n_max + 1) * log_q)
    return FockDistribution(probs, leak, leak_tol)


def poisson_distribution(mean: float, n_max: int,
                         leak_tol: float = DEFAULT_LEAK_TOL) -> FockDistribution:
    """Poisson occupation e^-mean mean^m / m!, truncated at n_max."""
    if not math.isfinite(mean) or mean < 0:
        raise DomainError(f"mean must be finite and >= 0, got {mean!r}")
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    if mean == 0:
        probs = np.zeros(n_max + 1)
        probs[0] = 1.0
        return FockDistribution(probs, 0.0, leak_tol)
    m = np.arange(n_max + 1)
    log_fact = np.array([math.lgamma(k + 1.0) for k in range(n_max + 1)])
    probs = np.exp(m * math.log(mean) - mean - log_fact)
    leak = max(0.0, 1.0 - math.fsum(probs))
    return FockDistribution(probs, leak, leak_tol)


def fock_distribution(n: int, n_max: int) -> FockDistribution:
    """Definite excitation number: all mass on level n."""
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    if not (0 <= n <= n_max):
        raise DomainError(f"level n={n} outside 0..{n_max}")
    probs = np.zeros(n_max + 1)
    probs[n] = 1.0
    return FockDistribution(probs, 0.0)


def moments(dist: FockDistribution) -> MomentSummary:
    """Mean, variance, g2(0), Fano factor and mean-to-deviation ratio."""
    p = dist.probs
    m = np.arange(len(p), dtype=float)
    mean = float(p @ m)
    # shifted second moment keeps the variance nonnegative and exactly 0
    # for definite-number states
    variance = float(p @ (m - mean) ** 2)
    if mean > 0:
        g2 = float(p @ (m * (m - 1.0))) / mean**2
        fano = variance / mean
    else:
        g2 = UNDEFINED
        fano = UNDEFINED
    mdr = mean / math.sqrt(variance) if variance > 0 else DIVERGENT
    return MomentSummary(mean=mean, variance=variance, g2=g2, fano=fano, mdr=mdr)


def nbar_from_temperature(env: ThermalEnvironment) -> float:
    """Mean thermal occupation 1/(exp(hbar*omega/(k_B*T)) - 1)."""
    x = env.hbar * env.omega / (env.k_b * env.temperature)
    if not math.isfinite(x):
        raise DomainError(f"non-finite exponent hbar*omega/(k_B*T) = {x!r}")
    try:
        return 1.0 / math.expm1(x)
    except OverflowError:
        return 0.0


# ---------------------------------------------------------------------------
# CSV serialization: header ``m,p``, one row per level, trailing ``# leak=``.

def write_distribution(dist: FockDistribution, path) -> None:
    lines = ["m,p"]
    lines.extend(f"{m},{float(p)!r}" for m, p in enumerate(dist.probs))
    lines.append(f"# leak={float(dist.leak)!r}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_distribution(path, leak_tol: float = DEFAULT_LEAK_TOL) -> FockDistribution:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "m,p":
        raise DomainError(f"{path}: expected header 'm,p'")
    leak = None
    probs = []
    for ln in lines[1:]:
        if ln.startswith("#"):
            if not ln.startswith("# leak="):
                raise DomainError(f"{path}: unrecognized comment line {ln!r}")
            leak = float(ln.split("=", 1)[1])
            continue
        m_str, p_str = ln.split(",")
        if int(m_str) != len(probs):
            raise DomainError(f"{path}: levels must run contiguously from 0, got {m_str}")
        probs.append(float(p_str))
    if leak is None:
        raise DomainError(f"{path}: missing trailing '# leak=' line")
    return FockDistribution(np.array(probs), leak, leak_tol)
