"""Deterministic jet and phase-point sampling.

Rank arguments and residual checks need "generic" evaluation points:
coordinates in [-1, 1] kept away from zeros of the constraint coefficients,
velocities (or momenta) with magnitudes in [0.5, 2] and random signs.
All samplers take a seeded generator so reports are reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import EvaluationError
from .systems import Jet, SystemSpec
from .variational import PhaseState

__all__ = ["sample_r1", "generic_jets", "constraint_jets", "phase_points"]

MIN_COEFF = 0.15  # smallest tolerated |A_a(r1)| at sampled coordinates


def sample_r1(sys: SystemSpec, rng: np.random.Generator, min_coeff: float = MIN_COEFF) -> float:
    """Draw r1 uniform in [-1, 1], rejecting coefficient near-zeros."""
    for _ in range(1000):
        r1 = float(rng.uniform(-1.0, 1.0))
        try:
            if all(abs(fn(r1)) >= min_coeff for fn in sys.a_fns):
                sys.measure_fn(r1)
                return r1
        except EvaluationError:
            continue
    raise EvaluationError("could not sample a generic r1 in [-1, 1]")


def _signed_magnitudes(rng: np.random.Generator, count: int, lo: float, hi: float):
    mags = rng.uniform(lo, hi, size=count)
    signs = rng.choice((-1.0, 1.0), size=count)
    return mags * signs


def generic_jets(
    sys: SystemSpec,
    count: int,
    rng: np.random.Generator,
    vel_range: tuple[float, float] = (0.5, 2.0),
) -> list[Jet]:
    """Jets with independent velocities (not constraint-restricted)."""
    out = []
    for _ in range(count):
        q = (sample_r1(sys, rng),) + tuple(rng.uniform(-1.0, 1.0, size=sys.n - 1))
        u = tuple(_signed_magnitudes(rng, sys.n, *vel_range))
        out.append(Jet(q, u))
    return out


def constraint_jets(
    sys: SystemSpec,
    count: int,
    rng: np.random.Generator,
    vel_range: tuple[float, float] = (0.5, 2.0),
) -> list[Jet]:
    """Jets whose s velocities satisfy the constraints."""
    out = []
    for _ in range(count):
        q = (sample_r1(sys, rng),) + tuple(rng.uniform(-1.0, 1.0, size=sys.n - 1))
        u1, u2 = _signed_magnitudes(rng, 2, *vel_range)
        out.append(sys.on_constraint(q, float(u1), float(u2)))
    return out


def phase_points(
    sys: SystemSpec,
    count: int,
    rng: np.random.Generator,
    p_range: tuple[float, float] = (0.5, 2.0),
) -> list[PhaseState]:
    """Phase points over generic coordinates with momenta in +-[lo, hi]."""
    out = []
    for _ in range(count):
        q = (sample_r1(sys, rng),) + tuple(rng.uniform(-1.0, 1.0, size=sys.n - 1))
        p = tuple(_signed_magnitudes(rng, sys.n, *p_range))
        out.append(PhaseState(q, p))
    return out
