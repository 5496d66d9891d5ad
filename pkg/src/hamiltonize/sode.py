"""The three associated second-order systems.

A second-order system q'' = f(q, q') is *associated* to a constrained system
when its solutions, restricted to initial data satisfying the constraints,
reproduce the constrained motion.  Three constructions are provided.

first   -- differentiate the constraints in time and eliminate r2'':
           r1'' = 0,  r2'' = G2(r1) r1' r2',  s_a'' = G_a(r1) r1' r2',
           with G2 = (ln N)' and G_a = -(A_a' + A_a G2).

second  -- additionally use the constraints to trade r2' for s_a'/A_a, after
           which every equation decouples from the others except through r1:
           q_a'' = X_a(r1) q_a' r1' with X_2 = (ln N)' and X_a = (ln N*A_a)'.
           The weights exp(xi_a) = (N, N*A_a) are stored in signed product
           form; the rates X_a are their logarithmic slopes, which divide by
           A_a and are therefore singular where a coefficient vanishes.

third   -- the Euler-Lagrange equations, in normal form, of the Lagrangian
           obtained by subtracting the constraint-momentum pairing from L.
           This is an associated system only when N is constant; the
           ``n_constant`` flag records the numerical test.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import expr as ex
from .errors import CoefficientSingularityError, ExprDomainError
from .systems import Jet, SystemSpec

__all__ = [
    "SodeSystem",
    "GenericSode",
    "first_associated",
    "second_associated",
    "third_associated",
    "free_sode",
    "COEFF_EPS",
]

# |A_a(r1)| below this is treated as a vanishing coefficient.  Trigonometric
# coefficients never evaluate to an exact float zero at their roots
# (cos(pi/2) ~ 6e-17), so an absolute guard is needed; it is far below any
# value reached by generic sampling or by integration grids near a crossing.
COEFF_EPS = 1e-12


@dataclass(frozen=True)
class SodeSystem:
    """A second-order system q'' = f(q, q') in normal form.

    ``coeff_exprs`` holds the r1-dependent coefficient functions of the
    q_a equations (kind first: acceleration = coeff * r1' * r2'; kind
    second: acceleration = coeff * q_a' * r1', the coeff being the
    logarithmic slope of the weight).  ``xi`` and ``exp_xi`` are only
    populated for the second kind.
    """

    system: SystemSpec
    kind: str
    n: int
    _f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    coeff_exprs: tuple[ex.Expr, ...] = ()
    exp_xi_exprs: tuple[ex.Expr, ...] = ()
    n_constant: bool = False

    def f(self, q: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Accelerations at coordinates q, velocities u."""
        return self._f(q, u)

    def rhs(self, jet: Jet) -> np.ndarray:
        q, u = jet.arrays()
        return self.f(q, u)

    def ode(self):
        """First-order right-hand side on the stacked state (q, q')."""
        n = self.n
        f = self._f

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            return np.concatenate((y[n:], f(y[:n], y[n:])))

        return rhs

    @cached_property
    def exp_xi(self):
        """Compiled signed weights exp(xi_a), index 0 for r2, 1+a for s_a."""
        return tuple(e.compile() for e in self.exp_xi_exprs)

    @cached_property
    def xi(self):
        """Log-primitives xi_a = ln(exp_xi_a); domain error where the weight
        is non-positive (use ``exp_xi`` for sign-robust evaluation)."""
        return tuple(ex.Ln(e).compile() for e in self.exp_xi_exprs)

    def columns(self) -> tuple[str, ...]:
        names = self.system.names
        return names + tuple("d" + n for n in names)


@dataclass(frozen=True)
class GenericSode:
    """A bare second-order system for tensor evaluation and tests."""

    n: int
    _f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    kind: str = "generic"

    def f(self, q, u):
        return self._f(q, u)

    def rhs(self, jet: Jet) -> np.ndarray:
        q, u = jet.arrays()
        return self.f(q, u)

    def ode(self):
        n = self.n
        f = self._f

        def rhs(t, y):
            return np.concatenate((y[n:], f(y[:n], y[n:])))

        return rhs


def free_sode(n: int) -> GenericSode:
    """The trivial system q'' = 0 in dimension n."""
    return GenericSode(n, lambda q, u: np.zeros(n))


def first_associated(sys: SystemSpec) -> SodeSystem:
    """Associated system obtained by differentiating the constraints."""
    gamma2 = sys.log_measure_slope_expr
    gammas = (gamma2,) + tuple(
        -(ap + a * gamma2) for a, ap in zip(sys.a_alpha, sys.a_prime)
    )
    fns = tuple(g.compile() for g in gammas)
    n = sys.n

    def f(q: np.ndarray, u: np.ndarray) -> np.ndarray:
        r1 = q[0]
        w = u[0] * u[1]
        out = np.empty(n)
        out[0] = 0.0
        for a in range(n - 1):
            out[1 + a] = fns[a](r1) * w
        return out

    return SodeSystem(sys, "first", n, f, coeff_exprs=gammas)


def second_associated(sys: SystemSpec) -> SodeSystem:
    """Associated system with all q_a equations decoupled except through r1."""
    e_exprs = sys.exp_xi_exprs
    e_fns = tuple(e.compile() for e in e_exprs)
    ep_fns = tuple(e.diff().compile() for e in e_exprs)
    a_fns = sys.a_fns
    n = sys.n

    def rate(idx: int, r1: float) -> float:
        if idx >= 1 and abs(a_fns[idx - 1](r1)) < COEFF_EPS:
            raise CoefficientSingularityError(idx - 1, r1)
        e_val = e_fns[idx](r1)
        if e_val == 0.0:
            raise ExprDomainError(f"velocity weight {idx} vanishes at r1={r1!r}")
        return ep_fns[idx](r1) / e_val

    def f(q: np.ndarray, u: np.ndarray) -> np.ndarray:
        r1 = q[0]
        out = np.empty(n)
        out[0] = 0.0
        for a in range(n - 1):
            out[1 + a] = rate(a, r1) * u[1 + a] * u[0]
        return out

    return SodeSystem(
        sys,
        "second",
        n,
        f,
        coeff_exprs=tuple(e.diff() / e for e in e_exprs),
        exp_xi_exprs=e_exprs,
        n_constant=sys.measure_is_constant(),
    )


def third_associated(sys: SystemSpec) -> SodeSystem:
    """Normal form of the variational-coupling equations.

    Associated to the constrained dynamics only when the measure density N
    is constant; construction always succeeds and consumers must check the
    ``n_constant`` flag before treating it as an associated system.
    """
    k = sys.k
    n = sys.n
    i1 = sys.i1
    i_alpha = sys.i_alpha
    a_fns = sys.a_fns
    ap_fns = sys.a_prime_fns
    coupling = sys.coupling_sum_fn
    mass = sys.mass_sum_fn

    def f(q: np.ndarray, u: np.ndarray) -> np.ndarray:
        r1 = q[0]
        u1, u2 = u[0], u[1]
        a_vals = [a_fns[a](r1) for a in range(k)]
        ap_vals = [ap_fns[a](r1) for a in range(k)]
        drift = sum(i_alpha[a] * ap_vals[a] * u[2 + a] for a in range(k))
        n2 = 1.0 / mass(r1)
        out = np.empty(n)
        out[0] = -drift * u2 / i1
        out[1] = n2 * (-coupling(r1) * u1 * u2 + drift * u1)
        for a in range(k):
            out[2 + a] = -ap_vals[a] * u1 * u2 - a_vals[a] * out[1]
        return out

    return SodeSystem(sys, "third", n, f, n_constant=sys.measure_is_constant())
