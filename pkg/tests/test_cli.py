import json
import os

from hamiltonize.cli import main


def run_cli(args, tmp_path):
    return main(args + ["--out", str(tmp_path)])


def load_report(tmp_path, name):
    with open(os.path.join(str(tmp_path), name)) as fh:
        return json.load(fh)


# --- simulate ------------------------------------------------------------------


def test_simulate_writes_csv_and_sidecar(tmp_path):
    code = run_cli(
        ["simulate", "--system", "vertical_disk", "--formulation", "nonholonomic",
         "--t", "2.0"],
        tmp_path,
    )
    assert code == 0
    csv_path = tmp_path / "vertical_disk_nonholonomic.csv"
    header = csv_path.read_text().splitlines()[0]
    assert header == "t,phi,theta,x,y,dphi,dtheta"
    sidecar = load_report(tmp_path, "vertical_disk_nonholonomic.json")
    assert sidecar["constraint_drift"] == 0.0
    assert sidecar["version"]
    assert sidecar["seed"] == 0


def test_simulate_hamiltonian_reports_drift(tmp_path):
    code = run_cli(
        ["simulate", "--system", "free_particle", "--formulation", "hamiltonian",
         "--t", "5.0", "--ic-on-constraint"],
        tmp_path,
    )
    assert code == 0
    sidecar = load_report(tmp_path, "free_particle_hamiltonian.json")
    assert sidecar["energy_drift"] < 1e-8
    assert sidecar["constraint_drift"] < 1e-6


def test_simulate_rejects_bad_expression(tmp_path):
    spec = tmp_path / "bad.system"
    spec.write_text("I1 = 1\nI2 = 1\nI_alpha = 1\nA_alpha = r1 +\nnames = a,b,c\n")
    code = run_cli(["simulate", "--spec", str(spec)], tmp_path)
    assert code == 1


def test_simulate_custom_spec_file(tmp_path):
    spec = tmp_path / "disk.system"
    spec.write_text(
        "I1 = 1.0\nI2 = 1.0\nI_alpha = 1.0, 1.0\n"
        "A_alpha = -cos(r1), -sin(r1)\nnames = phi, theta, x, y\n"
    )
    code = run_cli(
        ["simulate", "--spec", str(spec), "--formulation", "nonholonomic", "--t", "1.0"],
        tmp_path,
    )
    assert code == 0


def test_simulate_ic_overrides(tmp_path):
    code = run_cli(
        ["simulate", "--system", "free_particle", "--formulation", "nonholonomic",
         "--t", "0.5", "--ic", "x=2.0,dx=0.5"],
        tmp_path,
    )
    assert code == 0
    first_row = (tmp_path / "free_particle_nonholonomic.csv").read_text().splitlines()[1]
    assert first_row.startswith("0,2,")


def test_simulate_model_coefficient_overrides(tmp_path):
    code = run_cli(
        ["simulate", "--system", "free_particle", "--formulation", "hamiltonian",
         "--t", "1.0", "--params", "C2=2.0,C3=-1.0"],
        tmp_path,
    )
    assert code == 0
    sidecar = load_report(tmp_path, "free_particle_hamiltonian.json")
    assert sidecar["constraint_drift"] < 1e-6


def test_simulate_unknown_system_exit_1(tmp_path):
    assert run_cli(["simulate", "--system", "tippe_top"], tmp_path) == 1


def test_simulate_closed_form_requires_disk(tmp_path):
    assert run_cli(
        ["simulate", "--system", "knife_edge", "--formulation", "closed-form"], tmp_path
    ) == 1


def test_simulate_sode_second_aborts_on_exact_pole(tmp_path):
    """A run that evaluates a decoupled coefficient at a vanishing A aborts
    with exit code 2 (runtime domain error)."""
    code = run_cli(
        ["simulate", "--system", "vertical_disk", "--formulation", "sode",
         "--sode", "second", "--t", "1.0", "--ic", "phi=0.0"],
        tmp_path,
    )
    assert code == 2


# --- compare --------------------------------------------------------------------


def test_compare_disk_all_formulations(tmp_path):
    code = run_cli(
        ["compare", "--system", "vertical_disk",
         "--formulation", "nonholonomic,hamiltonian,closed-form",
         "--t", "2.0", "--tol", "1e-5"],
        tmp_path,
    )
    assert code == 0
    report = load_report(tmp_path, "vertical_disk_compare.json")
    assert report["passed"]
    assert report["max_sup"] < 1e-5
    assert len(report["pairs"]) == 3


def test_compare_needs_two_formulations(tmp_path):
    assert run_cli(
        ["compare", "--system", "free_particle", "--formulation", "nonholonomic"],
        tmp_path,
    ) == 1


def test_compare_singular_velocity_exit_1(tmp_path):
    code = run_cli(
        ["compare", "--system", "free_particle",
         "--formulation", "nonholonomic,hamiltonian", "--ic", "dx=0.0"],
        tmp_path,
    )
    assert code == 1


def test_compare_knife_edge_nonholonomic_vs_hamiltonian(tmp_path):
    code = run_cli(
        ["compare", "--system", "knife_edge",
         "--formulation", "nonholonomic,hamiltonian",
         "--t", "1.0", "--tol", "1e-6"],
        tmp_path,
    )
    assert code == 0


# --- checks ------------------------------------------------------------------------


def test_certify_free_particle(tmp_path):
    assert run_cli(["certify", "--system", "free_particle"], tmp_path) == 0
    report = load_report(tmp_path, "free_particle_certify.json")
    by_name = {c["name"]: c["status"] for c in report["checks"]}
    assert by_name["first-kind-singularity-certificate"] == "pass"
    assert by_name["multiplier-conditions"] == "pass"
    assert by_name["optimal-control-g1"] == "pass"
    assert by_name["second-kind-suite"] == "skipped"


def test_certify_disk_includes_second_kind(tmp_path):
    assert run_cli(["certify", "--system", "vertical_disk"], tmp_path) == 0
    report = load_report(tmp_path, "vertical_disk_certify.json")
    by_name = {c["name"]: c["status"] for c in report["checks"]}
    assert by_name["second-kind-suite"] == "pass"


def test_certify_g2_skipped_for_knife_edge(tmp_path):
    assert run_cli(["certify", "--system", "knife_edge", "--check", "g2"], tmp_path) == 0
    report = load_report(tmp_path, "knife_edge_certify.json")
    (check,) = report["checks"]
    assert check["status"] == "skipped"
    assert check["reason"] == "non-constant invariant measure"


def test_helmholtz_check_report_shape(tmp_path):
    assert run_cli(
        ["helmholtz-check", "--system", "free_particle", "--samples", "20"], tmp_path
    ) == 0
    report = load_report(tmp_path, "free_particle_helmholtz.json")
    assert report["certificate"]["passed"]
    assert set(report["certificate"]["nullspace_dims"]) == {2}
    assert report["multiplier_conditions"]["phi_condition"] < 1e-8
    assert report["seed"] == 0


def test_pontryagin_check(tmp_path):
    assert run_cli(
        ["pontryagin-check", "--system", "vertical_disk", "--kind", "g2",
         "--samples", "100", "--seed", "3"],
        tmp_path,
    ) == 0
    report = load_report(tmp_path, "vertical_disk_pontryagin.json")
    assert report["max_hamiltonian_deviation"] < 1e-10
    assert report["max_stationarity_norm"] < 1e-8


def test_measure_check(tmp_path):
    assert run_cli(["measure-check", "--system", "knife_edge"], tmp_path) == 0
    report = load_report(tmp_path, "knife_edge_measure.json")
    assert report["passed"] and not report["constant"]


def test_certify_custom_constant_measure_system(tmp_path):
    """A non-builtin system with constant measure gets the full suite,
    including the second-kind checks with default coefficients."""
    spec_dir = tmp_path / "systems"
    spec_dir.mkdir()
    spec = spec_dir / "rotor.system"
    spec.write_text(
        "I1 = 1.0\nI2 = 2.0\nI_alpha = 3.0, 3.0\n"
        "A_alpha = 0.7*cos(r1), 0.7*sin(r1)\nnames = a, b, c, d\n"
    )
    assert run_cli(["certify", "--spec", str(spec), "--samples", "25"], tmp_path) == 0
    report = load_report(tmp_path, "rotor_certify.json")
    by_name = {c["name"]: c["status"] for c in report["checks"]}
    assert by_name["first-kind-singularity-certificate"] == "pass"
    assert by_name["second-kind-suite"] == "pass"


def test_determinism_same_seed_same_report(tmp_path):
    a_dir = tmp_path / "a"
    b_dir = tmp_path / "b"
    for d in (a_dir, b_dir):
        assert main(["helmholtz-check", "--system", "knife_edge", "--samples", "10",
                     "--seed", "11", "--out", str(d)]) == 0
    a = (a_dir / "knife_edge_helmholtz.json").read_text()
    b = (b_dir / "knife_edge_helmholtz.json").read_text()
    assert a == b
