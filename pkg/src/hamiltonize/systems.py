"""System class, built-in examples, invariant measure and raw dynamics.

The systems handled by this package live on a configuration space with
coordinates ``(r1, r2, s_1 .. s_k)``, kinetic-energy Lagrangian

    L = (1/2) * (I1*r1dot^2 + I2*r2dot^2 + sum_a I_a*sdot_a^2),

and one linear velocity constraint per ``s`` coordinate,

    sdot_a = -A_a(r1) * r2dot,

with every coefficient ``A_a`` a non-constant function of ``r1`` alone.
The classical nonholonomic free particle, the knife edge on a plane and the
vertically rolling disk all fit this form and ship as built-ins.

Eliminating the reaction forces gives equations of motion in which ``r1``
moves freely, ``r2`` feels a quadratic velocity coupling weighted by the
invariant-measure density

    N(r1) = 1 / sqrt(I2 + sum_a I_a*A_a(r1)^2),

and the ``s`` velocities stay slaved to the constraint.  Integrating that
first-order system on ``(r1, r2, s, r1dot, r2dot)`` keeps the constraint
satisfied exactly, by construction.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import expr as ex
from .errors import ConfigError, EvaluationError

__all__ = [
    "Jet",
    "SystemSpec",
    "builtin_system",
    "invariant_measure",
    "measure_pde_residual",
    "nonholonomic_rhs",
    "nonholonomic_ode",
    "nh_state_from_jet",
    "jet_from_nh_state",
    "disk_closed_form",
    "parse_system_file",
    "load_system_file",
]


@dataclass(frozen=True)
class Jet:
    """A point (q, qdot) of the velocity phase space.

    Coordinate order is ``(r1, r2, s_1 .. s_k)`` throughout the package.
    """

    q: tuple[float, ...]
    qdot: tuple[float, ...]

    def __post_init__(self):
        if len(self.q) != len(self.qdot):
            raise ConfigError("jet q and qdot lengths differ")
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "qdot", tuple(float(v) for v in self.qdot))

    @property
    def dim(self) -> int:
        return len(self.q)

    @property
    def r1(self) -> float:
        return self.q[0]

    @property
    def r1dot(self) -> float:
        return self.qdot[0]

    @property
    def r2dot(self) -> float:
        return self.qdot[1]

    @property
    def sdot(self) -> tuple[float, ...]:
        return self.qdot[2:]

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.q), np.array(self.qdot)


@dataclass(frozen=True)
class SystemSpec:
    """Inertias and constraint coefficients of one system of the class.

    ``i_alpha`` and ``a_alpha`` are aligned: entry ``a`` is the inertia and
    coefficient of the constrained coordinate ``s_a``.  ``names`` labels the
    coordinates ``(r1, r2, s_1 .. s_k)`` for reporting and CSV headers.
    """

    i1: float
    i2: float
    i_alpha: tuple[float, ...]
    a_alpha: tuple[ex.Expr, ...]
    names: tuple[str, ...]
    label: str = "custom"
    weight_exprs: tuple[ex.Expr, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "i_alpha", tuple(float(v) for v in self.i_alpha))
        object.__setattr__(self, "a_alpha", tuple(self.a_alpha))
        object.__setattr__(self, "names", tuple(self.names))
        if self.i1 <= 0 or self.i2 <= 0 or any(i <= 0 for i in self.i_alpha):
            raise ConfigError("all inertias must be strictly positive")
        if len(self.i_alpha) != len(self.a_alpha):
            raise ConfigError("I_alpha and A_alpha lengths differ")
        if not self.i_alpha:
            raise ConfigError("at least one constrained coordinate is required")
        if len(self.names) != 2 + len(self.i_alpha):
            raise ConfigError("names must label (r1, r2, s_1..s_k)")
        for a, coeff in enumerate(self.a_alpha):
            if coeff.is_constant():
                raise ConfigError(
                    f"A_alpha[{a}] is constant; the constraint would be holonomic"
                )
        if self.weight_exprs is not None:
            object.__setattr__(self, "weight_exprs", tuple(self.weight_exprs))
            if len(self.weight_exprs) != 1 + len(self.i_alpha):
                raise ConfigError("weight overrides must cover (r2, s_1..s_k)")
            self._validate_weight_overrides()

    # dimensions ---------------------------------------------------------

    @property
    def k(self) -> int:
        """Number of constrained coordinates."""
        return len(self.i_alpha)

    @property
    def n(self) -> int:
        """Configuration-space dimension."""
        return 2 + self.k

    @property
    def inertias(self) -> tuple[float, ...]:
        """(I1, I2, I_1..I_k) in coordinate order."""
        return (self.i1, self.i2) + self.i_alpha

    # derived coefficient expressions -------------------------------------

    @cached_property
    def a_prime(self) -> tuple[ex.Expr, ...]:
        return tuple(a.diff() for a in self.a_alpha)

    @cached_property
    def mass_sum_expr(self) -> ex.Expr:
        """I2 + sum_a I_a A_a^2, the quantity under the measure square root."""
        total = ex.const(self.i2)
        for i_a, a in zip(self.i_alpha, self.a_alpha):
            total = total + ex.const(i_a) * a**2
        return total

    @cached_property
    def measure_expr(self) -> ex.Expr:
        """Invariant-measure density N(r1)."""
        return ex.const(1.0) / ex.Sqrt(self.mass_sum_expr)

    @cached_property
    def coupling_sum_expr(self) -> ex.Expr:
        """sum_a I_a A_a A_a', the drift weight in the r2 equation."""
        total = ex.const(0.0)
        for i_a, a, ap in zip(self.i_alpha, self.a_alpha, self.a_prime):
            total = total + ex.const(i_a) * a * ap
        return total

    @cached_property
    def log_measure_slope_expr(self) -> ex.Expr:
        """(ln N)' = -sum I_a A_a A_a' / (I2 + sum I_a A_a^2)."""
        return -(self.coupling_sum_expr / self.mass_sum_expr)

    @cached_property
    def exp_xi_exprs(self) -> tuple[ex.Expr, ...]:
        """The velocity weights exp(xi_b) of the decoupled form, entry 0 for
        r2 and entry 1+a for s_a.

        By default these are (N, N*A_1, .., N*A_k): the exponentials of the
        log-primitives whose slopes drive the decoupled associated system,
        kept in signed product form so coordinates with negative A_a stay
        inside the domain.  ``weight_exprs`` may override them with any
        smooth functions sharing the same logarithmic slopes; that matters
        when a coefficient A_a has poles, where the positive-root measure
        density picks up absolute-value corners that the closed-form
        Hamiltonians must not inherit (the knife edge's cos(r1)/sqrt(m) in
        place of |cos(r1)|/sqrt(m)).
        """
        if self.weight_exprs is not None:
            return self.weight_exprs
        return (self.measure_expr,) + tuple(self.measure_expr * a for a in self.a_alpha)

    def _validate_weight_overrides(self):
        """Overridden weights must solve the same log-slope equations as the
        (N, N*A) construction, checked at sampled points."""
        defaults = (self.measure_expr,) + tuple(
            self.measure_expr * a for a in self.a_alpha
        )
        default_fns = [(e.compile(), e.diff().compile()) for e in defaults]
        override_fns = [(e.compile(), e.diff().compile()) for e in self.weight_exprs]
        checked = 0
        for r1 in np.linspace(-1.3, 1.3, 17):
            r1 = float(r1)
            try:
                for (d, dp), (o, op) in zip(default_fns, override_fns):
                    dv, ov = d(r1), o(r1)
                    if abs(dv) < 1e-9 or abs(ov) < 1e-9:
                        raise EvaluationError("near a coefficient zero")
                    if abs(dp(r1) / dv - op(r1) / ov) > 1e-9 * (1 + abs(dp(r1) / dv)):
                        raise ConfigError(
                            "weight override has a different logarithmic slope "
                            f"than the measure construction at r1={r1}"
                        )
            except EvaluationError:
                continue
            checked += 1
        if checked == 0:
            raise ConfigError("weight overrides could not be validated on [-1.3, 1.3]")

    # compiled fast paths --------------------------------------------------

    @cached_property
    def a_fns(self):
        return tuple(a.compile() for a in self.a_alpha)

    @cached_property
    def a_prime_fns(self):
        return tuple(a.compile() for a in self.a_prime)

    @cached_property
    def measure_fn(self):
        return self.measure_expr.compile()

    @cached_property
    def measure_slope_fn(self):
        return self.measure_expr.diff().compile()

    @cached_property
    def mass_sum_fn(self):
        return self.mass_sum_expr.compile()

    @cached_property
    def coupling_sum_fn(self):
        return self.coupling_sum_expr.compile()

    @cached_property
    def log_measure_slope_fn(self):
        return self.log_measure_slope_expr.compile()

    def measure_is_constant(self, threshold: float = 1e-12, samples: int = 32) -> bool:
        """Numerically decide whether N is constant.

        Checks |dN/dr1| (structural derivative) below ``threshold`` at
        ``samples`` points spread over [-1, 1]; points where the coefficients
        are undefined are skipped.
        """
        slope = self.measure_slope_fn
        checked = 0
        for r1 in np.linspace(-1.0, 1.0, samples):
            try:
                value = slope(float(r1))
            except EvaluationError:
                continue
            checked += 1
            if abs(value) >= threshold:
                return False
        if checked == 0:
            raise EvaluationError("measure slope could not be sampled on [-1, 1]")
        return True

    def constraint_residual(self, jet: Jet) -> tuple[float, ...]:
        """sdot_a + A_a(r1) * r2dot for each constrained coordinate."""
        r1 = jet.r1
        return tuple(
            jet.sdot[a] + self.a_fns[a](r1) * jet.r2dot for a in range(self.k)
        )

    def on_constraint(self, q: tuple[float, ...], r1dot: float, r2dot: float) -> Jet:
        """Build the jet over ``q`` with the s-velocities slaved to the constraint."""
        sdot = tuple(-self.a_fns[a](q[0]) * r2dot for a in range(self.k))
        return Jet(tuple(q), (r1dot, r2dot) + sdot)


# --- built-in example systems ----------------------------------------------


def builtin_system(name: str, **params: float) -> SystemSpec:
    """Construct one of the built-in example systems.

    free_particle            -- unit mass point in R^3, constraint zdot + x*ydot = 0
    knife_edge(m, J)         -- planar blade, xdot*sin(phi) - ydot*cos(phi) = 0
    vertical_disk(m, R, I, J) -- rolling disk, xdot = R*cos(phi)*thetadot,
                                 ydot = R*sin(phi)*thetadot
    """
    for key, value in params.items():
        if value <= 0:
            raise ConfigError(f"parameter {key} must be positive, got {value}")
    r1 = ex.var()
    if name == "free_particle":
        if params:
            raise ConfigError("free_particle takes no parameters")
        return SystemSpec(1.0, 1.0, (1.0,), (r1,), ("x", "y", "z"), label=name)
    if name == "knife_edge":
        m = params.pop("m", 1.0)
        j = params.pop("J", 1.0)
        if params:
            raise ConfigError(f"unknown knife_edge parameters {sorted(params)}")
        # smooth weights: the default 1/sqrt(m + m*tan^2) is |cos|/sqrt(m),
        # whose corners sit exactly at the tan poles; the signed forms below
        # share its log-slopes and continue analytically through them.
        root_m = math.sqrt(m)
        weights = (ex.Cos(r1) / root_m, -(ex.Sin(r1) / root_m))
        return SystemSpec(
            j, m, (m,), (-ex.Tan(r1),), ("phi", "x", "y"), label=name,
            weight_exprs=weights,
        )
    if name == "vertical_disk":
        m = params.pop("m", 1.0)
        radius = params.pop("R", 1.0)
        i = params.pop("I", 1.0)
        j = params.pop("J", 1.0)
        if params:
            raise ConfigError(f"unknown vertical_disk parameters {sorted(params)}")
        a1 = -(ex.const(radius) * ex.Cos(r1))
        a2 = -(ex.const(radius) * ex.Sin(r1))
        return SystemSpec(
            j, i, (m, m), (a1, a2), ("phi", "theta", "x", "y"), label=name
        )
    raise ConfigError(f"unknown built-in system {name!r}")


BUILTIN_NAMES = ("free_particle", "knife_edge", "vertical_disk")


# --- invariant measure ------------------------------------------------------


def invariant_measure(sys: SystemSpec, r1: float) -> float:
    """Invariant-measure density N(r1) = 1/sqrt(I2 + sum I_a A_a^2)."""
    return sys.measure_fn(r1)


def measure_pde_residual(
    sys: SystemSpec, r1: float, h: float = 1e-5
) -> tuple[float, float]:
    """Residuals of the two volume-preservation equations at ``r1``.

    The first is (1/N) dN/dr1 + sum I_a A_a A_a' / (I2 + sum I_a A_a^2),
    with dN/dr1 taken by central differences of step ``h`` so the check is
    independent of the closed form.  The second is (1/N) dN/dr2, which
    vanishes identically because N depends on r1 only.
    """
    n_mid = sys.measure_fn(r1)
    slope_fd = (sys.measure_fn(r1 + h) - sys.measure_fn(r1 - h)) / (2.0 * h)
    res1 = slope_fd / n_mid + sys.coupling_sum_fn(r1) / sys.mass_sum_fn(r1)
    return (res1, 0.0)


# --- nonholonomic equations of motion ---------------------------------------


class NonholonomicDerivative(NamedTuple):
    r1ddot: float
    r2ddot: float
    sdot: tuple[float, ...]


def nonholonomic_rhs(sys: SystemSpec, jet: Jet) -> NonholonomicDerivative:
    """Evaluate the constrained equations of motion at a jet.

    Returns r1ddot = 0, the r2 acceleration, and the constraint-slaved s
    velocities; the s components of the supplied jet are ignored.
    """
    r1 = jet.r1
    u1, u2 = jet.r1dot, jet.r2dot
    r2ddot = sys.log_measure_slope_fn(r1) * u1 * u2
    sdot = tuple(-sys.a_fns[a](r1) * u2 for a in range(sys.k))
    return NonholonomicDerivative(0.0, r2ddot, sdot)


def nonholonomic_ode(sys: SystemSpec):
    """First-order right-hand side on the state (r1, r2, s_1..s_k, r1dot, r2dot)."""
    k = sys.k
    slope = sys.log_measure_slope_fn
    a_fns = sys.a_fns

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        r1 = y[0]
        u1 = y[2 + k]
        u2 = y[3 + k]
        out = np.empty(4 + k)
        out[0] = u1
        out[1] = u2
        for a in range(k):
            out[2 + a] = -a_fns[a](r1) * u2
        out[2 + k] = 0.0
        out[3 + k] = slope(r1) * u1 * u2
        return out

    return rhs


def nh_state_from_jet(sys: SystemSpec, jet: Jet) -> np.ndarray:
    """Pack a jet into the reduced nonholonomic state (drops s velocities)."""
    return np.array(list(jet.q) + [jet.r1dot, jet.r2dot])


def jet_from_nh_state(sys: SystemSpec, y: np.ndarray) -> Jet:
    """Expand a reduced state to a full jet with constraint-slaved s velocities."""
    k = sys.k
    q = tuple(float(v) for v in y[: 2 + k])
    return sys.on_constraint(q, float(y[2 + k]), float(y[3 + k]))


def nh_columns(sys: SystemSpec) -> tuple[str, ...]:
    return sys.names + tuple("d" + n for n in (sys.names[0], sys.names[1]))


# --- closed-form disk solution ----------------------------------------------


def disk_closed_form(radius: float, ics: Jet, t: float) -> Jet:
    """Exact state of the rolling disk at time ``t``.

    ``ics`` holds (phi, theta, x, y) and their velocities at t = 0; the
    contact-point velocities are determined by (u_phi, u_theta) alone.  For
    u_phi != 0 the disk traces a circle; for u_phi = 0 it rolls along a
    straight line.
    """
    phi0, theta0, x0, y0 = ics.q
    u_phi, u_theta = ics.qdot[0], ics.qdot[1]
    phi = phi0 + u_phi * t
    theta = theta0 + u_theta * t
    if u_phi != 0.0:
        ratio = (u_theta / u_phi) * radius
        x = ratio * math.sin(phi) + (x0 - ratio * math.sin(phi0))
        y = -ratio * math.cos(phi) + (y0 + ratio * math.cos(phi0))
    else:
        x = radius * math.cos(phi0) * u_theta * t + x0
        y = radius * math.sin(phi0) * u_theta * t + y0
    xdot = radius * math.cos(phi) * u_theta
    ydot = radius * math.sin(phi) * u_theta
    return Jet((phi, theta, x, y), (u_phi, u_theta, xdot, ydot))


# --- declarative system files ------------------------------------------------


def parse_system_file(text: str, label: str = "custom") -> SystemSpec:
    """Parse the key/value system format.

    Recognised keys: I1, I2, I_alpha (comma-separated list), A_alpha
    (comma-separated expression strings), names (comma-separated labels),
    and optionally weights (comma-separated smooth replacements for the
    velocity weights (N, N*A_1, ..), validated against the construction).
    Lines starting with '#' are comments.
    """
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in fields:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        fields[key] = value.strip()

    required = {"I1", "I2", "I_alpha", "A_alpha", "names"}
    missing = required - set(fields)
    if missing:
        raise ConfigError(f"missing keys: {sorted(missing)}")
    extra = set(fields) - required - {"weights"}
    if extra:
        raise ConfigError(f"unknown keys: {sorted(extra)}")

    def scalar(key: str) -> float:
        try:
            return float(fields[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {fields[key]!r}") from None

    try:
        i_alpha = tuple(float(v) for v in fields["I_alpha"].split(","))
    except ValueError:
        raise ConfigError("I_alpha must be a comma-separated list of numbers") from None
    a_alpha = tuple(ex.parse_expr(part) for part in fields["A_alpha"].split(","))
    names = tuple(part.strip() for part in fields["names"].split(","))
    weights = None
    if "weights" in fields:
        weights = tuple(ex.parse_expr(part) for part in fields["weights"].split(","))
    return SystemSpec(scalar("I1"), scalar("I2"), i_alpha, a_alpha, names,
                      label=label, weight_exprs=weights)


def load_system_file(path: str) -> SystemSpec:
    label = os.path.splitext(os.path.basename(path))[0] or "custom"
    with open(path, "r", encoding="utf-8") as fh:
        return parse_system_file(fh.read(), label=label)
