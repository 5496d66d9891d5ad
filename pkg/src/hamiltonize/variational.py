"""Closed-form Lagrangians, the Legendre transform, and Hamiltonians.

Three Lagrangian families are provided for a system of the class.

first       L = (1/2) I1 r1'^2
                + (1/2) * sum_b C_b * q_b'^2 / (E_b(r1) * r1'),

            where b runs over (r2, s_1..s_k), E_2 = N and E_(s_a) = N*A_a
            are the signed weights of the decoupled associated system, and
            every C_b is a nonzero constant.  Regular wherever r1' != 0 and
            no weight vanishes; its Euler-Lagrange equations are the second
            associated system.

second      L = (1/2) I1 r1'^2 + (1/2) I2 r2'^2
                + (1/2) * sum_a a_a * s_a'^2 / (E_(s_a)(r1) * r1'),

            valid only when the measure density N is constant.

variational L = (1/2)(I1 r1'^2 + I2 r2'^2 - sum_a I_a s_a'^2)
                - sum_a I_a A_a(r1) s_a' r2',

            the plain Lagrangian minus the constraint-momentum pairing; its
            Euler-Lagrange equations are the third associated system.

The kinetic prefixes are fixed to the quadratic convention (rho = I1/2 r1'^2,
sigma = I2/2 r2'^2) so the Legendre transform stays in closed form.  Note the
weights E_b keep the sign of A_a: published per-example forms of the first
family sometimes absorb that sign into the constant C_b, which is immaterial
for regularity and for the induced dynamics.

The Legendre transform of the first family gives

    H = (1/(2 I1)) * (p_1 + (1/2) sum_b E_b(r1) p_b^2 / C_b)^2

with phase-space constraint set C_2 p_(s_a) = -C_(s_a) p_2; the second family
gives

    H = p_2^2/(2 I2) + (1/(2 I1)) * (p_1 + (1/2) sum_a E_a(r1) p_a^2 / a_a)^2

with constraints I2 * N * r1'(p) * p_(s_a) + a_a * p_2 = 0, where r1'(p) is
read off the p_1 partial.  Both Hamiltonians are globally smooth even though
the Lagrangians are not, and their canonical flows restricted to the
constraint set reproduce the nonholonomic motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    CoefficientSingularityError,
    ConfigError,
    SingularHessianError,
    SingularVelocityError,
)
from .systems import Jet, SystemSpec

__all__ = [
    "PhaseState",
    "LagrangianModel",
    "HamiltonianModel",
    "default_coefficients",
    "lagrangian_value",
    "hessian",
    "euler_lagrange_rhs",
    "legendre",
    "legendre_inverse",
    "hamiltonian_value",
    "hamilton_rhs",
    "phase_constraint_residual",
]

LAGRANGIAN_KINDS = ("first", "second", "variational")
HAMILTONIAN_KINDS = ("first", "second")


@dataclass(frozen=True)
class PhaseState:
    """A point (q, p) of phase space; momenta are indexed like coordinates."""

    q: tuple[float, ...]
    p: tuple[float, ...]

    def __post_init__(self):
        if len(self.q) != len(self.p):
            raise ConfigError("phase state q and p lengths differ")
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))

    @property
    def dim(self) -> int:
        return len(self.q)

    @property
    def r1(self) -> float:
        return self.q[0]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.q), np.array(self.p)


def default_coefficients(sys: SystemSpec, kind: str) -> tuple[float, ...]:
    """Free-parameter presets reproducing the classical per-example models.

    Kind first defaults to all ones, except the knife edge where
    C = 1/sqrt(m) makes the Hamiltonian's weight factors trigonometric.
    Kind second defaults to all ones, except the disk where
    a = -J * N gives the standard quantization-friendly form.
    """
    if kind == "first":
        if sys.label == "knife_edge":
            return (1.0 / math.sqrt(sys.i2),) * (sys.n - 1)
        return (1.0,) * (sys.n - 1)
    if kind == "second":
        if sys.label == "vertical_disk":
            return (-sys.i1 * sys.measure_fn(0.0),) * sys.k
        return (1.0,) * sys.k
    if kind == "variational":
        return ()
    raise ConfigError(f"unknown Lagrangian kind {kind!r}")


@dataclass(frozen=True)
class LagrangianModel:
    """A closed-form Lagrangian of one of the three families.

    ``coefficients`` holds C_b (kind first, one per q_a coordinate in order
    (r2, s_1..s_k)), a_a (kind second, one per s coordinate), or is empty
    (variational).
    """

    system: SystemSpec
    kind: str
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", tuple(float(c) for c in self.coefficients)
        )
        if self.kind not in LAGRANGIAN_KINDS:
            raise ConfigError(f"unknown Lagrangian kind {self.kind!r}")
        if self.kind == "first":
            if len(self.coefficients) != self.system.n - 1:
                raise ConfigError("kind first needs one C_b per q_a coordinate")
            if any(c == 0.0 for c in self.coefficients):
                raise ConfigError("kind first requires all C_b nonzero")
        elif self.kind == "second":
            if len(self.coefficients) != self.system.k:
                raise ConfigError("kind second needs one coefficient per s coordinate")
            if any(c == 0.0 for c in self.coefficients):
                raise ConfigError("kind second requires all coefficients nonzero")
            if not self.system.measure_is_constant():
                raise ConfigError(
                    "kind second is only defined for systems with constant "
                    "invariant measure"
                )
        elif self.coefficients:
            raise ConfigError("the variational Lagrangian has no free parameters")

    @cached_property
    def _weights(self):
        """Compiled (E, E') pairs for the coordinates this kind weights."""
        exprs = self.system.exp_xi_exprs
        if self.kind == "second":
            exprs = exprs[1:]
        return tuple((e.compile(), e.diff().compile()) for e in exprs)

    def _weight_values(self, r1: float, derivative: bool = False):
        from .sode import COEFF_EPS

        vals = []
        offset = 0 if self.kind == "first" else 1
        for idx, (e_fn, ep_fn) in enumerate(self._weights):
            value = e_fn(r1)
            if abs(value) < COEFF_EPS:
                raise CoefficientSingularityError(idx + offset - 1, r1)
            vals.append((value, ep_fn(r1) if derivative else 0.0))
        return vals


def lagrangian_model(sys: SystemSpec, kind: str, coefficients=None) -> LagrangianModel:
    """Build a model with preset coefficients when none are supplied."""
    if coefficients is None:
        coefficients = default_coefficients(sys, kind)
    return LagrangianModel(sys, kind, tuple(coefficients))


def _require_moving(jet: Jet):
    if jet.r1dot == 0.0:
        raise SingularVelocityError("model undefined on r1dot = 0")


def lagrangian_value(model: LagrangianModel, jet: Jet) -> float:
    sys = model.system
    u = jet.qdot
    if model.kind == "variational":
        value = 0.5 * (sys.i1 * u[0] ** 2 + sys.i2 * u[1] ** 2)
        for a in range(sys.k):
            value -= 0.5 * sys.i_alpha[a] * u[2 + a] ** 2
            value -= sys.i_alpha[a] * sys.a_fns[a](jet.r1) * u[2 + a] * u[1]
        return value
    _require_moving(jet)
    weights = model._weight_values(jet.r1)
    value = 0.5 * sys.i1 * u[0] ** 2
    if model.kind == "first":
        for b, (e_val, _) in enumerate(weights):
            value += 0.5 * model.coefficients[b] * u[1 + b] ** 2 / (e_val * u[0])
    else:
        value += 0.5 * sys.i2 * u[1] ** 2
        for a, (e_val, _) in enumerate(weights):
            value += 0.5 * model.coefficients[a] * u[2 + a] ** 2 / (e_val * u[0])
    return value


def hessian(model: LagrangianModel, jet: Jet) -> np.ndarray:
    """Velocity Hessian of the Lagrangian; a multiplier for its dynamics."""
    sys = model.system
    n = sys.n
    g = np.zeros((n, n))
    if model.kind == "variational":
        g[0, 0] = sys.i1
        g[1, 1] = sys.i2
        for a in range(sys.k):
            g[2 + a, 2 + a] = -sys.i_alpha[a]
            g[1, 2 + a] = g[2 + a, 1] = -sys.i_alpha[a] * sys.a_fns[a](jet.r1)
        return g
    _require_moving(jet)
    u = jet.qdot
    u1 = u[0]
    weights = model._weight_values(jet.r1)
    g[0, 0] = sys.i1
    if model.kind == "first":
        for b, (e_val, _) in enumerate(weights):
            c_over_e = model.coefficients[b] / e_val
            g[0, 0] += c_over_e * u[1 + b] ** 2 / u1**3
            g[0, 1 + b] = g[1 + b, 0] = -c_over_e * u[1 + b] / u1**2
            g[1 + b, 1 + b] = c_over_e / u1
    else:
        g[1, 1] = sys.i2
        for a, (e_val, _) in enumerate(weights):
            c_over_e = model.coefficients[a] / e_val
            g[0, 0] += c_over_e * u[2 + a] ** 2 / u1**3
            g[0, 2 + a] = g[2 + a, 0] = -c_over_e * u[2 + a] / u1**2
            g[2 + a, 2 + a] = c_over_e / u1
    return g


def hessian_velocity_jacobian(model: LagrangianModel, jet: Jet) -> np.ndarray:
    """Exact dg/dq' of the model Hessian; leading axis is the velocity index."""
    sys = model.system
    n = sys.n
    out = np.zeros((n, n, n))
    if model.kind == "variational":
        return out
    _require_moving(jet)
    u = jet.qdot
    u1 = u[0]
    weights = model._weight_values(jet.r1)
    offset = 1 if model.kind == "first" else 2
    for idx, (e_val, _) in enumerate(weights):
        w = model.coefficients[idx] / e_val
        b = offset + idx
        ub = u[b]
        out[0][0, 0] += -3.0 * w * ub**2 / u1**4
        out[0][0, b] = out[0][b, 0] = 2.0 * w * ub / u1**3
        out[0][b, b] = -w / u1**2
        out[b][0, 0] = 2.0 * w * ub / u1**3
        out[b][0, b] = out[b][b, 0] = -w / u1**2
    return out


def hessian_coordinate_jacobian(model: LagrangianModel, jet: Jet) -> np.ndarray:
    """Exact dg/dq of the model Hessian; only the r1 slot is nonzero."""
    sys = model.system
    n = sys.n
    out = np.zeros((n, n, n))
    if model.kind == "variational":
        for a in range(sys.k):
            slope = -sys.i_alpha[a] * sys.a_prime_fns[a](jet.r1)
            out[0][1, 2 + a] = out[0][2 + a, 1] = slope
        return out
    _require_moving(jet)
    u = jet.qdot
    u1 = u[0]
    weights = model._weight_values(jet.r1, derivative=True)
    offset = 1 if model.kind == "first" else 2
    for idx, (e_val, e_slope) in enumerate(weights):
        w_slope = -model.coefficients[idx] * e_slope / e_val**2
        b = offset + idx
        ub = u[b]
        out[0][0, 0] += w_slope * ub**2 / u1**3
        out[0][0, b] = out[0][b, 0] = -w_slope * ub / u1**2
        out[0][b, b] = w_slope / u1
    return out


def hessian_field(model: LagrangianModel):
    """The model Hessian packaged as a multiplier field with exact
    derivatives, suitable for tight-tolerance condition checks."""
    from .helmholtz import MultiplierField

    return MultiplierField(
        fn=lambda jet: hessian(model, jet),
        provenance="hessian-of-L",
        velocity_jacobian=lambda jet: hessian_velocity_jacobian(model, jet),
        coordinate_jacobian=lambda jet: hessian_coordinate_jacobian(model, jet),
    )


def euler_lagrange_rhs(model: LagrangianModel, jet: Jet) -> np.ndarray:
    """Accelerations solving the Euler-Lagrange equations at a jet.

    Solves g(q, q') qddot = dL/dq - (d^2 L / dq' dr1) r1' with the closed-form
    Hessian and partials of the model.
    """
    sys = model.system
    n = sys.n
    u = jet.qdot
    rhs = np.zeros(n)
    if model.kind == "variational":
        r1 = jet.r1
        drift = 0.0
        for a in range(sys.k):
            i_a = sys.i_alpha[a]
            ap = sys.a_prime_fns[a](r1)
            drift += i_a * ap * u[2 + a]
            rhs[2 + a] = i_a * ap * u[1] * u[0]
        rhs[0] = -drift * u[1]
        rhs[1] = drift * u[0]
    else:
        _require_moving(jet)
        weights = model._weight_values(jet.r1, derivative=True)
        offset = 1 if model.kind == "first" else 2
        u1 = u[0]
        total = 0.0
        for idx, (e_val, e_slope) in enumerate(weights):
            c = model.coefficients[idx]
            ub = u[offset + idx]
            rhs[offset + idx] = c * ub * e_slope / e_val**2
            total += c * ub**2 * e_slope / e_val**2
        rhs[0] = -total / u1
    g = hessian(model, jet)
    try:
        return np.linalg.solve(g, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError(f"Hessian singular at {jet}") from exc


def euler_lagrange_ode(model: LagrangianModel):
    """First-order right-hand side on (q, q') for trajectory runs."""
    n = model.system.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        jet = Jet(tuple(y[:n]), tuple(y[n:]))
        return np.concatenate((y[n:], euler_lagrange_rhs(model, jet)))

    return rhs


# --- Legendre transform -------------------------------------------------------


def legendre(model: LagrangianModel, jet: Jet) -> PhaseState:
    """Velocity-to-momentum map p_i = dL/dq'_i of the model at a jet."""
    sys = model.system
    u = jet.qdot
    p = np.zeros(sys.n)
    if model.kind == "variational":
        p[0] = sys.i1 * u[0]
        p[1] = sys.i2 * u[1]
        for a in range(sys.k):
            a_val = sys.a_fns[a](jet.r1)
            p[1] -= sys.i_alpha[a] * a_val * u[2 + a]
            p[2 + a] = -sys.i_alpha[a] * (u[2 + a] + a_val * u[1])
        return PhaseState(jet.q, tuple(p))
    _require_moving(jet)
    weights = model._weight_values(jet.r1)
    offset = 1 if model.kind == "first" else 2
    u1 = u[0]
    p[0] = sys.i1 * u1
    if model.kind == "second":
        p[1] = sys.i2 * u[1]
    for idx, (e_val, _) in enumerate(weights):
        c = model.coefficients[idx]
        ub = u[offset + idx]
        p[offset + idx] = c * ub / (e_val * u1)
        p[0] -= 0.5 * c * ub**2 / (e_val * u1**2)
    return PhaseState(jet.q, tuple(p))


def legendre_inverse(model: LagrangianModel, ps: PhaseState) -> Jet:
    """Recover the jet mapped to ``ps``; exact closed-form inversion.

    For kinds first/second the r1 velocity is read off the momentum
    combination that the Hamiltonian squares, so its sign is determined by
    the phase point; points with that combination zero have no preimage.
    """
    sys = model.system
    p = ps.p
    if model.kind == "variational":
        g = hessian(model, Jet(ps.q, (1.0,) * sys.n))
        try:
            u = np.linalg.solve(g, np.array(p))
        except np.linalg.LinAlgError as exc:
            raise SingularHessianError("variational kinetic matrix singular") from exc
        return Jet(ps.q, tuple(u))
    weights = model._weight_values(ps.r1)
    offset = 1 if model.kind == "first" else 2
    total = p[0]
    for idx, (e_val, _) in enumerate(weights):
        total += 0.5 * e_val * p[offset + idx] ** 2 / model.coefficients[idx]
    if total == 0.0:
        raise SingularVelocityError("phase point lies over r1dot = 0")
    u = np.zeros(sys.n)
    u[0] = total / sys.i1
    if model.kind == "second":
        u[1] = p[1] / sys.i2
    for idx, (e_val, _) in enumerate(weights):
        u[offset + idx] = e_val * p[offset + idx] * u[0] / model.coefficients[idx]
    return Jet(ps.q, tuple(u))


# --- Hamiltonian models ---------------------------------------------------------


@dataclass(frozen=True)
class HamiltonianModel:
    """Legendre image of a kind first/second Lagrangian model."""

    system: SystemSpec
    kind: str
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in HAMILTONIAN_KINDS:
            raise ConfigError(f"unknown Hamiltonian kind {self.kind!r}")
        # reuse the Lagrangian validations (nonzero coefficients, constant N)
        LagrangianModel(self.system, self.kind, self.coefficients)

    @cached_property
    def lagrangian(self) -> LagrangianModel:
        return LagrangianModel(self.system, self.kind, self.coefficients)

    @cached_property
    def _weights(self):
        exprs = self.system.exp_xi_exprs
        if self.kind == "second":
            exprs = exprs[1:]
        return tuple((e.compile(), e.diff().compile()) for e in exprs)

    def momentum_sum(self, r1: float, p, derivative: bool = False):
        """p_1 + (1/2) sum E_b p_b^2 / coeff_b and optionally its r1 slope."""
        offset = 1 if self.kind == "first" else 2
        total = p[0]
        slope = 0.0
        for idx, (e_fn, ep_fn) in enumerate(self._weights):
            c = self.coefficients[idx]
            total += 0.5 * e_fn(r1) * p[offset + idx] ** 2 / c
            if derivative:
                slope += 0.5 * ep_fn(r1) * p[offset + idx] ** 2 / c
        return (total, slope) if derivative else total


def hamiltonian_model(sys: SystemSpec, kind: str, coefficients=None) -> HamiltonianModel:
    if coefficients is None:
        coefficients = default_coefficients(sys, kind)
    return HamiltonianModel(sys, kind, tuple(coefficients))


def hamiltonian_value(model: HamiltonianModel, ps: PhaseState) -> float:
    sys = model.system
    total = model.momentum_sum(ps.r1, ps.p)
    value = total**2 / (2.0 * sys.i1)
    if model.kind == "second":
        value += ps.p[1] ** 2 / (2.0 * sys.i2)
    return value


def hamilton_rhs(model: HamiltonianModel, ps: PhaseState) -> tuple[np.ndarray, np.ndarray]:
    """Canonical vector field (dq/dt, dp/dt); closed-form partials."""
    sys = model.system
    n = sys.n
    p = ps.p
    total, slope = model.momentum_sum(ps.r1, p, derivative=True)
    u1 = total / sys.i1
    qdot = np.zeros(n)
    pdot = np.zeros(n)
    qdot[0] = u1
    offset = 1 if model.kind == "first" else 2
    if model.kind == "second":
        qdot[1] = p[1] / sys.i2
    for idx, (e_fn, _) in enumerate(model._weights):
        qdot[offset + idx] = u1 * e_fn(ps.r1) * p[offset + idx] / model.coefficients[idx]
    pdot[0] = -u1 * slope
    return qdot, pdot


def hamilton_ode(model: HamiltonianModel):
    """First-order right-hand side on the stacked phase state (q, p)."""
    n = model.system.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        ps = PhaseState(tuple(y[:n]), tuple(y[n:]))
        qdot, pdot = hamilton_rhs(model, ps)
        return np.concatenate((qdot, pdot))

    return rhs


def phase_columns(sys: SystemSpec) -> tuple[str, ...]:
    return sys.names + tuple("p" + n for n in sys.names)


def phase_constraint_residual(model: HamiltonianModel, ps: PhaseState) -> tuple[float, ...]:
    """One residual per constrained coordinate; zero exactly on the image of
    the constraint distribution under the Legendre transform."""
    sys = model.system
    p = ps.p
    if model.kind == "first":
        c2 = model.coefficients[0]
        return tuple(
            c2 * p[2 + a] + model.coefficients[1 + a] * p[1] for a in range(sys.k)
        )
    u1 = model.momentum_sum(ps.r1, p) / sys.i1
    n_val = sys.measure_fn(ps.r1)
    return tuple(
        sys.i2 * n_val * u1 * p[2 + a] + model.coefficients[a] * p[1]
        for a in range(sys.k)
    )
