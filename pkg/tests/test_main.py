from pathlib import Path

import numpy as np
import orjson
import pytest

from helfrichflow.fileio.checkpoint import read_checkpoint
from helfrichflow.fileio.export import read_ledger
from helfrichflow.flow_config import FlowConfig
from helfrichflow.main import EXIT_CONFIG
from helfrichflow.main import EXIT_FAILURE
from helfrichflow.main import EXIT_OK
from helfrichflow.main import create_parser
from helfrichflow.main import main

CONFIG_DIR = Path(__file__).parents[1] / "docs" / "configs"
SMALL_SPHERE = ["--grid.n_u", "16", "--grid.n_v", "16", "--output.rich_progress", "false"]


def load(path):
    return orjson.loads(path.read_bytes())


class TestParser:
    def test_dotted_options(self):
        args = create_parser().parse_args(
            ["flow", "--surface.kind", "torus", "--verify.suites", "energy", "hessian"]
        )
        settings = vars(args)
        assert settings["surface.kind"] == "torus"
        assert settings["verify.suites"] == ["energy", "hessian"]
        assert settings["grid.n_u"] is None

    def test_version(self):
        assert main(["--version"]) == EXIT_OK

    def test_unknown_command(self):
        assert main(["relax"]) == EXIT_CONFIG

    def test_bad_boolean(self):
        assert main(["energy", "--output.obj", "maybe"]) == EXIT_CONFIG


class TestCommands:
    def test_energy_of_unit_sphere(self, tmp_path):
        assert main(["energy", *SMALL_SPHERE, "--output.dir", str(tmp_path)]) == EXIT_OK
        report = load(tmp_path / "energy.json")
        assert report["total_energy"] == pytest.approx(8 * np.pi, rel=1e-10)
        assert report["components"][0]["area"] == pytest.approx(4 * np.pi, rel=1e-10)

    @pytest.mark.parametrize(
        "name", ["sphere.toml", "torus.toml", "sphere-relaxation.toml", "torus-relaxation.toml"]
    )
    def test_shipped_configs_are_valid(self, name):
        args = create_parser().parse_args(["energy", "-c", str(CONFIG_DIR / name)])
        FlowConfig.from_flat(vars(args))

    def test_sphere_config(self, tmp_path):
        argv = ["energy", "-c", str(CONFIG_DIR / "sphere.toml"), "--output.dir", str(tmp_path)]
        assert main(argv) == EXIT_OK
        assert load(tmp_path / "energy.json")["total_energy"] == pytest.approx(8 * np.pi, rel=1e-10)

    def test_config_file(self, tmp_path):
        config = tmp_path / "torus.toml"
        config.write_text(
            "[surface]\n"
            'kind = "torus"\n'
            "major = 1.4142135623730951\n"
            "minor = 1.0\n"
            "[grid]\n"
            "n_u = 32\n"
            "n_v = 16\n"
            "[output]\n"
            "rich_progress = false\n"
        )
        assert main(["energy", "-c", str(config), "--output.dir", str(tmp_path)]) == EXIT_OK
        assert load(tmp_path / "energy.json")["total_energy"] == pytest.approx(4 * np.pi**2, rel=1e-9)

    def test_missing_config_file(self, tmp_path):
        assert main(["flow", "--config", str(tmp_path / "missing.toml")]) == EXIT_CONFIG

    def test_malformed_config_file(self, tmp_path):
        config = tmp_path / "broken.toml"
        config.write_text("[surface\nkind = ")
        assert main(["energy", "-c", str(config)]) == EXIT_CONFIG

    def test_invalid_configuration(self, tmp_path):
        argv = ["energy", "--surface.kind", "torus", "--surface.major", "0.5", "--surface.minor", "1.0"]
        assert main([*argv, "--output.dir", str(tmp_path)]) == EXIT_CONFIG

    def test_inadmissible_start_is_a_domain_error(self, tmp_path):
        argv = ["energy", *SMALL_SPHERE, "--perturbation.mode", "random", "--perturbation.amplitude", "0.9"]
        assert main([*argv, "--output.dir", str(tmp_path)]) == EXIT_FAILURE

    def test_verify_constraints(self, tmp_path):
        argv = [
            "verify",
            "--grid.n_u", "24",
            "--grid.n_v", "24",
            "--output.rich_progress", "false",
            "--verify.suites", "constraints",
            "--verify.samples", "1",
        ]
        assert main([*argv, "--output.dir", str(tmp_path)]) == EXIT_OK
        report = load(tmp_path / "verify.json")
        assert report["passed"]
        assert set(report["suites"]) == {"constraints"}

    def test_fit_decay_needs_ledger(self, tmp_path):
        assert main(["fit-decay", "--output.dir", str(tmp_path)]) == EXIT_CONFIG

    def test_flow_then_restart(self, tmp_path):
        argv = [
            "flow",
            "--grid.n_u", "16",
            "--grid.axisymmetric", "true",
            "--perturbation.mode", "harmonic",
            "--perturbation.amplitude", "0.05",
            "--flow.max_steps", "3",
            "--flow.checkpoint_every", "2",
            "--output.rich_progress", "false",
            "--output.obj", "true",
            "--output.dir", str(tmp_path),
        ]
        assert main(argv) == EXIT_OK
        report = load(tmp_path / "flow.json")
        assert report["stop_reason"] == "max_steps"
        assert report["steps"] == 3
        ledger = read_ledger(tmp_path / "ledger.csv")
        assert len(ledger["t"]) == 4
        assert np.all(np.diff(ledger["F"]) <= 1e-12 * ledger["F"][0])
        assert (tmp_path / "checkpoints" / "step-000002.hfc").exists()
        assert (tmp_path / "final-0.obj").exists()
        final = read_checkpoint(tmp_path / "final.hfc")
        assert final.state.step_index == 3
        assert final.metadata["config"]["flow"]["max_steps"] == 3

        restart = ["energy", "--input.checkpoint", str(tmp_path / "final.hfc"), "--output.dir", str(tmp_path)]
        assert main(restart) == EXIT_OK
        assert load(tmp_path / "energy.json")["total_energy"] == pytest.approx(ledger["F"][-1], rel=1e-12)

    def test_spectrum_of_unit_sphere(self, tmp_path):
        argv = ["spectrum", *SMALL_SPHERE, "--spectrum.max_degree", "2", "--output.dir", str(tmp_path)]
        assert main(argv) == EXIT_OK
        report = load(tmp_path / "spectrum.json")
        assert report["near_kernel_dimension"] == 3
        assert report["smallest_transverse_eigenvalue"] == pytest.approx(24.0, rel=1e-8)

    def test_fit_decay_from_ledger(self, tmp_path):
        t = np.linspace(0.0, 5.0, 200)
        gap = np.exp(-2.0 * t)
        lines = ["t,F,grad_l2,grad_proxy,area_0,vol_0,dissipation,dt"]
        lines += [
            f"{x:.17g},{1.0 + g:.17g},{np.sqrt(g):.17g},{np.sqrt(g):.17g},1,1,0,0"
            for x, g in zip(t, gap, strict=True)
        ]
        ledger = tmp_path / "ledger.csv"
        ledger.write_text("\n".join(lines) + "\n")
        argv = ["fit-decay", "--input.ledger", str(ledger), "--fit.f_inf", "1.0", "--output.dir", str(tmp_path)]
        assert main(argv) == EXIT_OK
        fit = load(tmp_path / "decay.json")
        assert fit["type"] == "exponential"
        assert fit["theta"] == pytest.approx(0.5, abs=1e-6)

    def test_identical_runs_write_identical_ledgers(self, tmp_path):
        argv = [
            "flow",
            *SMALL_SPHERE,
            "--perturbation.mode", "random",
            "--perturbation.amplitude", "0.05",
            "--perturbation.seed", "7",
            "--flow.max_steps", "3",
        ]
        first, second = tmp_path / "a", tmp_path / "b"
        assert main([*argv, "--output.dir", str(first)]) == EXIT_OK
        assert main([*argv, "--output.dir", str(second)]) == EXIT_OK
        ledger = (first / "ledger.csv").read_bytes()
        assert ledger == (second / "ledger.csv").read_bytes()
        assert len(ledger.splitlines()) == 5

    def test_unwritable_checkpoint_directory(self, tmp_path):
        (tmp_path / "checkpoints").write_text("")
        argv = [
            "flow",
            "--grid.n_u", "16",
            "--grid.axisymmetric", "true",
            "--perturbation.mode", "harmonic",
            "--perturbation.amplitude", "0.05",
            "--flow.max_steps", "2",
            "--flow.checkpoint_every", "1",
            "--output.rich_progress", "false",
            "--output.dir", str(tmp_path),
        ]
        assert main(argv) == EXIT_FAILURE
        assert not (tmp_path / "final.hfc").exists()
