import json

import numpy as np
import pytest
from conftest import CONFIGS_DIR

from prescribedricci.cli import main, parse_args
from prescribedricci.config import DEFAULT_SEED, RunConfig
from prescribedricci.errors import InvalidConfig
from prescribedricci.solver import DEFAULT_GRID_SIZE


def torus_config(sigma=0.05, **sections):
    data = {
        "name": "torus-test",
        "mode": "abelian",
        "structure": {"dims": [1, 1], "abelian": True},
        "problem": {
            "sigma": sigma,
            "a": [1.0, 1.0],
            "b": [1.0, 1.0],
            "phi": [{"constant": 1.0}, {"constant": 1.0}],
        },
        "sampling": {"seed": 0, "samples": 5000},
    }
    data.update(sections)
    return data


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def run_cli(monkeypatch, *args):
    monkeypatch.setattr("sys.argv", ["prescribedricci", *map(str, args)])
    with pytest.raises(SystemExit) as excinfo:
        main()
    return excinfo.value.code


def read_report(out):
    return json.loads((out / "report.json").read_text(encoding="utf-8"))


def test_parse_args_requires_config(monkeypatch):
    monkeypatch.setattr("sys.argv", ["prescribedricci", "check"])

    with pytest.raises(SystemExit):
        parse_args()


def test_parse_args_rejects_unknown_command():
    with pytest.raises(SystemExit):
        parse_args(["solve", "--config", "run.json"])


def test_parse_args_collects_overrides():
    args = parse_args(
        ["solve-global", "-c", "run.json", "--grid", "401", "--max-iter", "7", "--seed", "3"]
    )

    assert args.command == "solve-global"
    assert (args.grid, args.max_iter, args.seed) == (401, 7, 3)
    assert args.log_level == "WARNING"
    assert args.clear_logs is False


def test_shipped_torus_config_loads():
    config = RunConfig.from_file(CONFIGS_DIR / "torus.json")

    assert config.name == "torus"
    assert config.mode == "abelian"
    assert config.grid == 2001
    assert config.refine is True
    structure, _ = config.build_structure()
    assert structure.abelian
    assert structure.dims.tolist() == [1, 1]
    assert config.build_problem().sigma == 1e-9


def test_yaml_config_and_relative_output_dir(tmp_path):
    path = tmp_path / "sphere.yaml"
    path.write_text(
        "\n".join(
            [
                "structure:",
                "  dims: [2]",
                "  beta: [2.0]",
                "problem:",
                "  sigma: 0.1",
                "  a: [1.0]",
                "  b: [1.0]",
                "  phi:",
                "    - polynomial: [2.0, 0.5]",
                "output:",
                "  dir: results",
            ]
        )
        + "\n",
        encoding="utf-8",
    )

    config = RunConfig.from_file(path)

    assert config.name == "sphere"
    assert config.output_dir == tmp_path / "results"
    assert config.build_problem().phi_hat(np.array([1.0])).tolist() == [[2.5]]


def test_shared_env_fills_gaps_but_file_wins(tmp_path):
    (tmp_path / ".env").write_text(
        "PRESCRIBEDRICCI_GRID=101\nPRESCRIBEDRICCI_SEED=7\nPRESCRIBEDRICCI_OUTPUT_DIR=out\n",
        encoding="utf-8",
    )
    config = RunConfig.from_file(write_config(tmp_path / "run.json", torus_config()))

    assert config.grid == 101
    assert config.seed == 0
    assert str(config.output_dir) == "out/torus-test"

    overridden = config.with_overrides(grid=51, seed=4, output_dir=tmp_path)
    assert (overridden.grid, overridden.seed, overridden.output_dir) == (51, 4, tmp_path)


def test_invalid_solver_values_fall_back_to_defaults(tmp_path):
    data = torus_config(solver={"grid": 100, "max_iter": "many"}, sampling={"seed": -2})

    config = RunConfig.from_file(write_config(tmp_path / "run.json", data))

    assert config.grid == DEFAULT_GRID_SIZE
    assert config.seed == DEFAULT_SEED
    assert config.max_iter > 1


@pytest.mark.parametrize(
    "change",
    [
        {"mode": "hyperbolic"},
        {"structure": {"dims": [1, 1], "brackets": {"dim_g": 2, "modules": [[1], [2]]}}},
        {"problem": {"sigma": -1.0, "a": [1.0], "b": [1.0], "phi": [{"constant": 1.0}]}},
        {"local": {"tau": 2.0}},
        {"envelope": {"colour": "blue"}},
    ],
)
def test_schema_errors_raise_invalid_config(tmp_path, change):
    data = {**torus_config(), **change}

    with pytest.raises(InvalidConfig):
        RunConfig.from_file(write_config(tmp_path / "run.json", data))


def test_bracket_entries_get_antisymmetric_partners(tmp_path):
    data = torus_config(
        mode="standard",
        structure={
            "brackets": {
                "dim_g": 3,
                "entries": [[1, 2, 3, 1.0], [2, 3, 1, 1.0], [3, 1, 2, 1.0]],
                "k_indices": [3],
                "modules": [[1, 2]],
            }
        },
    )
    data["problem"] = {"sigma": 0.1, "a": [1.0], "b": [1.0], "phi": [{"constant": 2.0}]}
    config = RunConfig.from_file(write_config(tmp_path / "run.json", data))

    table = config.structure.brackets.to_table()
    structure, diagnostics = config.build_structure()

    assert table.brackets[1, 0, 2] == -1.0
    assert table.module_assignment == {0: 1, 1: 1}
    assert structure.beta.tolist() == pytest.approx([2.0])
    assert diagnostics.beta_spread == pytest.approx(0.0, abs=1e-12)


def test_with_overrides_validates_values(tmp_path):
    config = RunConfig.from_file(write_config(tmp_path / "run.json", torus_config()))

    with pytest.raises(InvalidConfig):
        config.with_overrides(grid=100)
    with pytest.raises(InvalidConfig):
        config.with_overrides(max_iter=0)


def test_build_orbit_defaults(tmp_path):
    data = torus_config(local={"tau": 0.5})
    data["problem"]["b"] = [3.0, 1.0]
    config = RunConfig.from_file(write_config(tmp_path / "run.json", data))

    orbit = config.build_orbit(config.build_problem())

    assert orbit.a_tau.tolist() == [2.0, 1.0]
    assert orbit.delta_tau.tolist() == [0.0, 0.0]


def test_cli_constants_on_sphere(monkeypatch, tmp_path):
    code = run_cli(monkeypatch, "constants", "-c", CONFIGS_DIR / "sphere-su2.json", "-o", tmp_path)

    report = read_report(tmp_path)
    assert code == 0
    assert report["command"] == "constants"
    assert report["structure"]["beta"] == pytest.approx([2.0])
    assert report["exit_code"] == 0
    assert (tmp_path / "logs" / "info.log").exists()


def test_cli_check_certifies_small_torus(monkeypatch, tmp_path):
    code = run_cli(monkeypatch, "check", "-c", CONFIGS_DIR / "torus.json", "-o", tmp_path)

    report = read_report(tmp_path)
    assert code == 0
    assert report["certificate"]["certified"] is True


def test_cli_check_fails_for_long_tube(monkeypatch, tmp_path):
    config = write_config(tmp_path / "run.json", torus_config(sigma=0.05))
    out = tmp_path / "out"

    code = run_cli(monkeypatch, "check", "-c", config, "-o", out)

    assert code == 3
    assert read_report(out)["exit_code"] == 3


def test_cli_solve_global_writes_solution_and_report(monkeypatch, tmp_path):
    code = run_cli(
        monkeypatch, "solve-global", "-c", CONFIGS_DIR / "torus.json", "-o", tmp_path,
        "--grid", "401",
    )

    report = read_report(tmp_path)
    lines = (tmp_path / "solution.csv").read_text(encoding="utf-8").splitlines()
    assert code == 0
    assert report["residuals"]["targets_met"] is True
    assert report["solution"]["nodes"] == 401
    assert lines[0] == "r,h,hp,f1,f2,fp1,fp2"
    assert len(lines) == 402

    residuals = report["residuals"]
    levels = [residuals["residual_level"], residuals["refined_residual_level"]]
    assert residuals["floor_limited"] == (max(levels) <= 1e-10)
    assert residuals["floor_limited"] or residuals["convergence_ratio"] >= 8.0


def test_cli_capped_iterations_exit_no_convergence(monkeypatch, tmp_path):
    config = write_config(tmp_path / "run.json", torus_config(sigma=0.05))
    out = tmp_path / "out"

    code = run_cli(
        monkeypatch, "solve-global", "-c", config, "-o", out, "--grid", "201", "--max-iter", "1"
    )

    report = read_report(out)
    assert code == 4
    assert report["error"] == "NoConvergence"
    assert report["exit_code"] == 4
    assert not (out / "solution.csv").exists()


def test_cli_solve_local_breakdown_keeps_partial_solution(monkeypatch, tmp_path):
    config = write_config(tmp_path / "run.json", torus_config(sigma=40.0))
    out = tmp_path / "out"

    code = run_cli(monkeypatch, "solve-local", "-c", config, "-o", out)

    report = read_report(out)
    assert code == 6
    assert report["error"] == "Breakdown"
    assert 0.2 < report["kappa"] < 0.3
    assert report["solution"]["provenance"] == "local-shoot"
    assert (out / "solution.csv").exists()


def test_cli_solve_local_short_tube(monkeypatch, tmp_path):
    config = write_config(tmp_path / "run.json", torus_config(sigma=0.05))
    out = tmp_path / "out"

    code = run_cli(monkeypatch, "solve-local", "-c", config, "-o", out)

    assert code == 0
    assert read_report(out)["residuals"]["targets_met"] is True


def test_cli_verify_shipped_sphere_solution(monkeypatch, tmp_path):
    code = run_cli(
        monkeypatch, "verify", "-c", CONFIGS_DIR / "sphere-su2.json", "-o", tmp_path,
        "--solution", CONFIGS_DIR / "sphere-su2-analytic.csv",
    )

    report = read_report(tmp_path)
    assert code == 0
    assert report["residuals"]["sigma_bar_defect"] <= 1e-6
    assert not (tmp_path / "solution.csv").exists()


def test_cli_verify_truncated_solution(monkeypatch, tmp_path):
    text = (CONFIGS_DIR / "sphere-su2-analytic.csv").read_text(encoding="utf-8")
    solution = tmp_path / "cut.csv"
    solution.write_text(text[: len(text) // 2].rsplit(",", 1)[0] + "\n", encoding="utf-8")
    out = tmp_path / "out"

    code = run_cli(
        monkeypatch, "verify", "-c", CONFIGS_DIR / "sphere-su2.json", "-o", out,
        "--solution", solution,
    )

    assert code == 2
    assert read_report(out)["error"] == "MalformedSolution"


def test_cli_verify_rejects_perturbed_solution(monkeypatch, tmp_path):
    lines = (CONFIGS_DIR / "sphere-su2-analytic.csv").read_text(encoding="utf-8").splitlines()
    rows = [lines[0]]
    for line in lines[1:]:
        r, h, hp, f, fp = line.split(",")
        rows.append(",".join([r, h, hp, repr(1.01 * float(f)), fp]))
    solution = tmp_path / "scaled.csv"
    solution.write_text("\n".join(rows) + "\n", encoding="utf-8")
    out = tmp_path / "out"

    code = run_cli(
        monkeypatch, "verify", "-c", CONFIGS_DIR / "sphere-su2.json", "-o", out,
        "--solution", solution,
    )

    report = read_report(out)
    assert code == 5
    assert report["residuals"]["targets_met"] is False
    assert report["exit_code"] == 5


def test_cli_invalid_config_exits_before_running(monkeypatch, tmp_path):
    config = write_config(tmp_path / "run.json", {"structure": {"dims": [1]}})

    code = run_cli(monkeypatch, "check", "-c", config, "-o", tmp_path / "out")

    assert code == 2
    assert not (tmp_path / "out").exists()


def test_cli_clear_logs_empties_previous_run_logs(monkeypatch, tmp_path):
    logs = tmp_path / "logs"
    logs.mkdir()
    (logs / "info.log").write_text("stale entry\n", encoding="utf-8")

    code = run_cli(
        monkeypatch, "constants", "-c", CONFIGS_DIR / "sphere-su2.json", "-o", tmp_path,
        "--clear-logs",
    )

    text = (logs / "info.log").read_text(encoding="utf-8")
    assert code == 0
    assert "stale entry" not in text
    assert "constants" in text


def test_cli_solve_local_fails_local_hypothesis(monkeypatch, tmp_path):
    data = torus_config(local={"delta": [1.0, -1.0]})
    data["problem"]["phi"] = [{"constant": 0.5}, {"constant": 0.5}]
    config = write_config(tmp_path / "run.json", data)
    out = tmp_path / "out"

    code = run_cli(monkeypatch, "solve-local", "-c", config, "-o", out)

    report = read_report(out)
    assert code == 3
    assert report["error"] == "LocalHypothesisFailed"
    assert report["lhs"] == pytest.approx(1.0)
    assert report["exit_code"] == 3
    assert not (out / "solution.csv").exists()


def test_cli_solve_local_runs_the_doubling_recipe(monkeypatch, tmp_path):
    config = write_config(
        tmp_path / "run.json", torus_config(local={"tau": 0.5, "beta_param": 1.0})
    )
    out = tmp_path / "out"

    code = run_cli(monkeypatch, "solve-local", "-c", config, "-o", out)

    report = read_report(out)
    diagnostics = report["solution"]["diagnostics"]
    assert code == 0
    assert report["residuals"]["targets_met"] is True
    assert diagnostics["beta"] == pytest.approx(1.0)
    assert diagnostics["recipe_trace"][0]["lhs"] < 0.0
    assert report["solution"]["tau"] == pytest.approx(0.5)


def test_cli_shipped_indefinite_torus(monkeypatch, tmp_path):
    config = CONFIGS_DIR / "torus-indefinite.json"

    check_code = run_cli(monkeypatch, "check", "-c", config, "-o", tmp_path / "check")
    solve_code = run_cli(
        monkeypatch, "solve-global", "-c", config, "-o", tmp_path / "solve", "--grid", "401"
    )

    certificate = read_report(tmp_path / "check")["certificate"]
    assert check_code == 0
    assert certificate["mode"] == "indefinite"
    assert certificate["passed"] is True
    assert certificate["certified"] is False
    assert solve_code == 0
    assert read_report(tmp_path / "solve")["residuals"]["targets_met"] is True


def test_cli_verify_reproduces_solve_global_residuals(monkeypatch, tmp_path):
    config = CONFIGS_DIR / "torus.json"
    solved = tmp_path / "solved"
    checked = tmp_path / "checked"

    solve_code = run_cli(monkeypatch, "solve-global", "-c", config, "-o", solved, "--grid", "401")
    verify_code = run_cli(
        monkeypatch, "verify", "-c", config, "-o", checked,
        "--solution", solved / "solution.csv",
    )

    original = read_report(solved)["residuals"]
    reloaded = read_report(checked)["residuals"]
    assert (solve_code, verify_code) == (0, 0)
    assert reloaded["sigma_bar_defect"] == original["sigma_bar_defect"]
    assert reloaded["orbit_defects"] == original["orbit_defects"]
    assert reloaded["bianchi_defect"] == original["bianchi_defect"]
    assert read_report(checked)["solution"]["provenance"] == "loaded"
