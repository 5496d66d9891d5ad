import numpy as np
import pytest

from hamiltonize import (
    Jet,
    MultiplierField,
    algebraic_system,
    first_associated,
    free_sode,
    helmholtz_residuals,
    hessian,
    lagrangian_model,
    nabla,
    nabla_phi,
    nullspace,
    phi,
    r_tensor,
    second_associated,
    singularity_certificate,
)
from hamiltonize.helmholtz import r_condition_residual
from hamiltonize.sampling import generic_jets


# --- nabla ---------------------------------------------------------------------


def test_nabla_zero_for_free_system():
    sode = free_sode(3)
    jet = Jet((0.1, 0.2, 0.3), (1.0, 2.0, 3.0))
    assert np.all(nabla(sode, jet) == 0.0)


def test_nabla_first_kind_free_particle(free_particle):
    sode = first_associated(free_particle)
    m = nabla(sode, Jet((1.0, 0.0, 0.0), (1.0, 1.0, 1.0)))
    assert m[1, 1] == pytest.approx(0.25)  # -(1/2) Gamma_2 r1dot


def test_nabla_second_kind_structure(vertical_disk, rng):
    sode = second_associated(vertical_disk)
    for jet in generic_jets(vertical_disk, 5, rng):
        m = nabla(sode, jet)
        fd = -0.5 * _fd_jac_u(sode, jet)
        assert np.allclose(m, fd, rtol=1e-6, atol=1e-9)
        # only the first column and the diagonal of the q_a block are filled
        assert np.all(m[0] == 0.0)
        for a in range(1, 4):
            for b in range(1, 4):
                if a != b:
                    assert m[a, b] == 0.0


def _fd_jac_u(sode, jet, h=1e-6):
    q, u = jet.arrays()
    n = sode.n
    J = np.empty((n, n))
    for j in range(n):
        up, um = u.copy(), u.copy()
        up[j] += h
        um[j] -= h
        J[:, j] = (sode.f(q, up) - sode.f(q, um)) / (2 * h)
    return J


# --- phi ----------------------------------------------------------------------


def test_phi_zero_for_free_system():
    sode = free_sode(4)
    jet = Jet((0.0,) * 4, (1.0, 0.5, -0.3, 2.0))
    assert np.max(np.abs(phi(sode, jet, fd=True))) < 1e-9
    assert np.all(phi(sode, jet) == 0.0)


def test_phi_second_kind_closed_form(free_particle, rng):
    """Phi^a_1 = -(1/2) r1' q_a' (2 X_a' - X_a^2), Phi^a_a = +(1/2) r1'^2 (...)."""
    sode = second_associated(free_particle)
    for jet in generic_jets(free_particle, 10, rng):
        m = phi(sode, jet)
        r1, u1 = jet.r1, jet.r1dot
        for a in range(1, 3):
            x = sode.coeff_exprs[a - 1]
            bracket = 2 * x.diff().eval(r1) - x.eval(r1) ** 2
            assert m[a, 0] == pytest.approx(-0.5 * u1 * jet.qdot[a] * bracket, rel=1e-12)
            assert m[a, a] == pytest.approx(0.5 * u1 ** 2 * bracket, rel=1e-12)


def test_phi_first_kind_disk_measure_rows_vanish(vertical_disk, rng):
    sode = first_associated(vertical_disk)
    for jet in generic_jets(vertical_disk, 5, rng):
        m = phi(sode, jet)
        assert m[1, 0] == 0.0 and m[1, 1] == 0.0  # Gamma_2 == 0 identically


@pytest.mark.parametrize("kind", ["first", "second"])
def test_phi_closed_matches_finite_differences(any_system, kind, rng):
    build = first_associated if kind == "first" else second_associated
    sode = build(any_system)
    for jet in generic_jets(any_system, 100, rng):
        closed = phi(sode, jet)
        fd = phi(sode, jet, fd=True)
        scale = max(1e-12, np.max(np.abs(closed)))
        assert np.max(np.abs(closed - fd)) / scale < 1e-6


# --- nabla_phi -------------------------------------------------------------------


def test_nabla_phi_zero_for_free_system():
    sode = free_sode(3)
    jet = Jet((0.0, 0.0, 0.0), (1.0, 1.0, 0.5))
    for order in (1, 2, 3):
        assert np.all(nabla_phi(sode, jet, order) == 0.0)
        assert np.max(np.abs(nabla_phi(sode, jet, order, fd=True))) < 1e-6


def test_nabla_phi_first_order_closed_form(free_particle, rng):
    """(nabla Phi)^2_1 = (G2 G2' - G2'') r1'^2 r2'."""
    sode = first_associated(free_particle)
    g2 = sode.coeff_exprs[0]
    coeff = g2 * g2.diff() - g2.diff().diff()
    for jet in generic_jets(free_particle, 20, rng):
        m = nabla_phi(sode, jet, 1)
        expected = coeff.eval(jet.r1) * jet.r1dot**2 * jet.r2dot
        assert m[1, 0] == pytest.approx(expected, rel=1e-12)


def test_nabla_nabla_phi_constrained_row_closed_form(any_system, rng):
    """(nabla^2 Phi)^a_1 carries the third-derivative coefficient
    Ga' G2' + (3/2) Ga G2'' - (1/2) Ga'' G2 - Ga'''."""
    sode = first_associated(any_system)
    g2 = sode.coeff_exprs[0]
    for jet in generic_jets(any_system, 10, rng):
        m = nabla_phi(sode, jet, 2)
        r1 = jet.r1
        for a, ga in enumerate(sode.coeff_exprs[1:], start=2):
            coeff = (
                ga.diff().eval(r1) * g2.diff().eval(r1)
                + 1.5 * ga.eval(r1) * g2.diff().diff().eval(r1)
                - 0.5 * ga.diff().diff().eval(r1) * g2.eval(r1)
                - ga.diff().diff().diff().eval(r1)
            )
            expected = coeff * jet.r1dot**3 * jet.r2dot
            assert m[a, 0] == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_nabla_phi_closed_matches_finite_differences(free_particle, rng):
    sode = first_associated(free_particle)
    for jet in generic_jets(free_particle, 10, rng):
        closed = nabla_phi(sode, jet, 1)
        fd = nabla_phi(sode, jet, 1, fd=True)
        scale = max(1e-9, np.max(np.abs(closed)))
        assert np.max(np.abs(closed - fd)) / scale < 1e-4


def test_column_proportionality_identity(any_system, rng):
    """Psi^a_1 Psi^b_2 = Psi^b_1 Psi^a_2 for the whole first-kind tower."""
    sode = first_associated(any_system)
    for jet in generic_jets(any_system, 20, rng):
        mats = [phi(sode, jet), nabla_phi(sode, jet, 1), nabla_phi(sode, jet, 2)]
        n = sode.n
        for psi in mats:
            for a in range(1, n):
                for b in range(1, n):
                    assert abs(psi[a, 0] * psi[b, 1] - psi[b, 0] * psi[a, 1]) < 1e-10


# --- curvature condition -----------------------------------------------------------


def test_r_tensor_zero_for_free_system():
    sode = free_sode(3)
    assert np.max(np.abs(r_tensor(sode, Jet((0, 0, 0), (1, 1, 1))))) < 1e-9


def test_r_condition_automatic_for_second_kind(any_system, rng):
    """With the constructed multiplier the curvature condition adds nothing."""
    sode = second_associated(any_system)
    model = lagrangian_model(any_system, "first")
    for jet in generic_jets(any_system, 10, rng):
        g = hessian(model, jet)
        assert r_condition_residual(sode, g, jet) < 1e-8


def test_r_condition_disk_first_kind_with_partial_multiplier(vertical_disk, rng):
    """The bordered multiplier shape admitted by the algebraic conditions
    satisfies all curvature-condition equations."""
    sode = first_associated(vertical_disk)
    for jet in generic_jets(vertical_disk, 10, rng):
        lam = -jet.r2dot / jet.r1dot
        g11, g12, g22, g23, g24 = rng.uniform(-2, 2, size=5)
        g = np.array(
            [
                [g11, g12, lam * g23, lam * g24],
                [g12, g22, g23, g24],
                [lam * g23, g23, 0.0, 0.0],
                [lam * g24, g24, 0.0, 0.0],
            ]
        )
        assert r_condition_residual(sode, g, jet) < 1e-8


# --- multiplier conditions -----------------------------------------------------------


def test_identity_multiplier_for_free_system():
    sode = free_sode(3)
    jets = [Jet((0.1, 0.2, 0.3), (1.0, -0.5, 2.0)), Jet((0, 0, 0), (2.0, 1.0, 1.0))]
    report = helmholtz_residuals(sode, MultiplierField(lambda j: np.eye(3), "candidate"), jets)
    assert report.gdot_symmetry == 0.0
    assert report.nabla_condition == 0.0
    assert report.phi_condition == 0.0
    assert report.min_abs_det == 1.0
    assert report.passed


@pytest.mark.parametrize(
    "system_name,coeffs",
    [("free_particle", (1.0, 1.0)), ("vertical_disk", None)],
)
def test_hessian_multiplier_passes(system_name, coeffs, rng, request):
    sys = request.getfixturevalue(system_name)
    sode = second_associated(sys)
    kind = "first" if system_name == "free_particle" else "second"
    model = lagrangian_model(sys, kind, coeffs)
    field = MultiplierField(lambda jet: hessian(model, jet), "hessian-of-L")
    report = helmholtz_residuals(sode, field, generic_jets(sys, 100, rng))
    assert report.passed, report.to_dict()
    assert report.min_abs_det > 1e-6


# --- algebraic system and certificates -------------------------------------------------


def test_residuals_raise_on_singular_jets(free_particle):
    """Jets violating the preconditions (r1dot = 0, coefficient zero) are
    reported as evaluation errors, not silently skipped."""
    from hamiltonize import CoefficientSingularityError, SingularVelocityError, hessian_field

    sode = second_associated(free_particle)
    field = hessian_field(lagrangian_model(free_particle, "first"))
    with pytest.raises(SingularVelocityError):
        helmholtz_residuals(sode, field, [Jet((1.0, 0, 0), (0.0, 1.0, 1.0))])
    with pytest.raises(CoefficientSingularityError):
        helmholtz_residuals(sode, field, [Jet((0.0, 0, 0), (1.0, 1.0, 1.0))])


def test_algebraic_system_depth1_free_sode_unconstrained():
    sode = free_sode(3)
    matrix, idx = algebraic_system(sode, Jet((0, 0, 0), (1, 1, 1)), depth=1)
    assert np.all(matrix == 0.0)
    assert len(nullspace(matrix)) == len(idx)  # no constraints at all


def test_algebraic_system_free_particle_solution_space(free_particle):
    """At (x=1, x'=1, y'=1, z'=0), depth 2 forces g23 = g33 = g13 = 0 and
    x' g12 = -y' g22."""
    sode = first_associated(free_particle)
    jet = Jet((1.0, 0.0, 0.0), (1.0, 1.0, 0.0))
    matrix, idx = algebraic_system(sode, jet, depth=2)
    basis = nullspace(matrix)
    assert len(basis) == 2
    pos = {ij: c for c, ij in enumerate(idx)}
    rng = np.random.default_rng(3)
    for _ in range(10):
        vec = basis.T @ rng.standard_normal(2)
        assert abs(vec[pos[(1, 2)]]) < 1e-12  # g23
        assert abs(vec[pos[(2, 2)]]) < 1e-12  # g33
        assert abs(vec[pos[(0, 2)]]) < 1e-12  # g13
        assert abs(1.0 * vec[pos[(0, 1)]] + 1.0 * vec[pos[(1, 1)]]) < 1e-12


def test_algebraic_system_disk_solution_space(vertical_disk):
    """Depth 3 at a generic jet: the s-block vanishes and
    g13 = -(theta'/phi') g23, g14 = -(theta'/phi') g24."""
    sode = first_associated(vertical_disk)
    jet = Jet((0.7, 0.2, 0.1, -0.3), (1.1, 0.8, 0.5, 0.4))
    matrix, idx = algebraic_system(sode, jet, depth=3)
    basis = nullspace(matrix)
    assert len(basis) == 5
    pos = {ij: c for c, ij in enumerate(idx)}
    lam = -jet.r2dot / jet.r1dot
    rng = np.random.default_rng(4)
    for _ in range(10):
        vec = basis.T @ rng.standard_normal(5)
        for entry in ((2, 2), (2, 3), (3, 3)):
            assert abs(vec[pos[entry]]) < 1e-12
        assert vec[pos[(0, 2)]] == pytest.approx(lam * vec[pos[(1, 2)]], rel=1e-9, abs=1e-12)
        assert vec[pos[(0, 3)]] == pytest.approx(lam * vec[pos[(1, 3)]], rel=1e-9, abs=1e-12)


def test_singularity_certificate_first_kind(any_system, rng):
    sode = first_associated(any_system)
    jets = generic_jets(any_system, 50, rng)
    report = singularity_certificate(sode, jets, depth=3, seed=7)
    assert report.passed, report.to_dict()
    assert report.max_normalized_det < 1e-10
    expected_dim = 2 if any_system.n == 3 else 5
    assert set(report.nullspace_dims) == {expected_dim}


def test_certificate_refuted_for_variational_system(free_particle, rng):
    """The second kind is variational, so a regular multiplier must appear."""
    sode = second_associated(free_particle)
    jets = generic_jets(free_particle, 10, rng)
    report = singularity_certificate(sode, jets, depth=3, seed=7)
    assert not report.passed
    assert report.counterexample is not None
    assert report.counterexample["abs_det"] > 1e-10


def test_certificate_warns_on_degenerate_jets(free_particle):
    sode = first_associated(free_particle)
    jets = [Jet((1.0, 0, 0), (1.0, 0.01, 0.0))]  # r2dot ~ 0: non-generic
    report = singularity_certificate(sode, jets, depth=3)
    assert report.warnings
