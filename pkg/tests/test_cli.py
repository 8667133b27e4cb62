"""CLI tests: config parsing, exit codes, file outputs, determinism."""

import pytest

from elid_urllc.channel_model import SystemConfig
from elid_urllc.cli import build_parser, main, parse_config
from elid_urllc.exceptions import ConfigError
from elid_urllc.experiments import SweepSpec, cell_seed, run_sweep


def read_report(path):
    out = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition("=")
        out[key] = value
    return out


class TestParseConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        assert parse_config(path) == SystemConfig()

    def test_override_and_comments(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text(
            "# a comment\n"
            "symbol_budget=200\n"
            "\n"
            "energy_budget = 2.5   # trailing comment\n"
            "common_power=none\n"
        )
        config = parse_config(path)
        assert config.symbol_budget == 200
        assert config.energy_budget == 2.5
        assert config.common_power is None

    def test_out_of_range_probability(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("target_eps=1.5\n")
        with pytest.raises(ConfigError, match="target_eps"):
            parse_config(path)

    def test_errors_carry_line_numbers(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("symbol_budget=200\nsymbol_budget=abc\n")
        with pytest.raises(ConfigError, match=r":2:"):
            parse_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("blocklength=200\n")
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("alpha=1\nalpha=2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("just words\n")
        with pytest.raises(ConfigError, match=r":1:"):
            parse_config(path)


class TestExitCodes:
    def test_solve_success(self, tmp_path):
        out = tmp_path / "r.txt"
        assert main(["solve", "--n", "1", "--seed", "5", "--out", str(out)]) == 0
        assert out.exists()

    def test_infeasible_is_two(self, tmp_path, capsys):
        code = main(
            [
                "solve",
                "--n",
                "2",
                "--seed",
                "7",
                "--solver",
                "joint_minmax",
                "--set",
                "energy_budget=1e-4",
                "--out",
                str(tmp_path / "r.txt"),
            ]
        )
        assert code == 2
        assert "infeasible" in capsys.readouterr().err

    def test_usage_errors_are_one(self, capsys):
        assert main(["solve", "--no-such-flag"]) == 1
        assert main(["figure", "9"]) == 1
        assert main(["not-a-command"]) == 1
        assert main([]) == 1
        assert main(["solve", "--seed", "-1"]) == 1
        assert main(["solve", "--seed", str(2**64)]) == 1
        capsys.readouterr()

    def test_config_errors_are_one(self, tmp_path, capsys):
        assert main(["solve", "--set", "bogus=1", "--out", str(tmp_path / "r")]) == 1
        assert (
            main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 1
        )
        assert "error" in capsys.readouterr().err

    def test_help_is_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()


class TestSolveCommand:
    def test_single_vehicle_takes_whole_budget(self, tmp_path, capsys):
        out = tmp_path / "r.txt"
        code = main(
            ["solve", "--n", "1", "--seed", "3", "--set", "symbol_budget=128",
             "--out", str(out)]
        )
        assert code == 0
        report = read_report(out)
        assert report["blocklengths"] == "128"
        assert report["converged"] == "true"
        capsys.readouterr()

    def test_report_mirrors_solver_fields(self, tmp_path, capsys):
        out = tmp_path / "r.txt"
        main(["solve", "--n", "3", "--seed", "42", "--out", str(out)])
        report = read_report(out)
        for key in (
            "solver_name",
            "seed",
            "n_vehicles",
            "converged",
            "iterations",
            "total_energy",
            "worst_margin_g",
            "worst_margin_eps_log10",
            "blocklengths",
            "powers",
            "margins_g",
            "clamped",
        ):
            assert key in report
        assert report["n_vehicles"] == "3"
        blocklengths = [int(m) for m in report["blocklengths"].split(",")]
        assert sum(blocklengths) <= 200
        assert len(report["powers"].split(",")) == 3
        capsys.readouterr()

    def test_precedence_file_then_set(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("symbol_budget=100\nenergy_budget=2.5\n")
        out = tmp_path / "r.txt"
        main(
            ["solve", "--config", str(cfg), "--set", "symbol_budget=64",
             "--n", "1", "--seed", "0", "--out", str(out)]
        )
        report = read_report(out)
        assert report["blocklengths"] == "64"
        capsys.readouterr()

    def test_matches_sweep_cell(self, tmp_path, capsys):
        # the fig7 cell (n=3, seed index 0, M=1000) must reproduce through
        # the CLI with the published cell seed
        seed = cell_seed("fig7", 3, 0)
        out = tmp_path / "r.txt"
        code = main(
            ["solve", "--n", "3", "--seed", str(seed), "--solver",
             "symbol_sharing", "--set", "symbol_budget=1000", "--out", str(out)]
        )
        assert code == 0
        report = read_report(out)
        spec = SweepSpec(
            name="fig7",
            base_config=SystemConfig(),
            swept_variable="n_vehicles",
            values=(3,),
            solver="symbol_sharing",
            outputs=("total_energy[symbol_budget=1000]",),
            num_seeds=1,
        )
        (row,) = run_sweep(spec)
        assert float(report["total_energy"]) == row.metric_value
        capsys.readouterr()


class TestFigureCommand:
    def test_runs_twice_byte_identical(self, tmp_path, capsys):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(["figure", "7", "--seeds", "2", "--out", str(a)]) == 0
        assert main(["figure", "7", "--seeds", "2", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        capsys.readouterr()

    def test_default_output_name(self, tmp_path, monkeypatch, capsys):
        monkeypatch.chdir(tmp_path)
        assert main(["figure", "8", "--seeds", "1"]) == 0
        content = (tmp_path / "fig8.csv").read_text()
        assert content.startswith("sweep,swept_value,seed,metric,value,units\n")
        assert "energy_saved_pct" in content
        capsys.readouterr()


class TestSweepCommand:
    def test_custom_sweep(self, tmp_path, capsys):
        out = tmp_path / "s.csv"
        code = main(
            ["sweep", "--name", "mini", "--values", "1,2", "--seeds", "2",
             "--metrics", "total_energy,max_blocklength", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "sweep,swept_value,seed,metric,value,units"
        assert len(lines) == 1 + 2 * 2 * 2
        assert all(line.startswith("mini,") for line in lines[1:])
        capsys.readouterr()

    def test_unknown_metric_is_usage_error(self, tmp_path, capsys):
        code = main(
            ["sweep", "--metrics", "nonsense", "--out", str(tmp_path / "s.csv")]
        )
        assert code == 1
        capsys.readouterr()


class TestOracleCheckCommand:
    def test_small_run_passes(self, capsys):
        assert main(["oracle-check", "--instances", "6", "--n-values", "1,2",
                     "--seed", "11"]) == 0
        out = capsys.readouterr().out
        assert "energy oracle: 3/3 passed" in out
        assert "minmax oracle: 3/3 passed" in out

    def test_default_instance_count(self):
        args = build_parser().parse_args(["oracle-check"])
        assert args.instances == 200
        assert args.n_values == (1, 2, 3)

    def test_trivial_n_range(self, capsys):
        assert main(["oracle-check", "--instances", "4", "--n-values", "1",
                     "--seed", "2"]) == 0
        capsys.readouterr()

    def test_force_fail_dumps_and_exits_one(self, tmp_path, capsys):
        dump_dir = tmp_path / "dumps"
        code = main(
            ["oracle-check", "--instances", "2", "--n-values", "1",
             "--force-fail", "--out", str(dump_dir)]
        )
        assert code == 1
        dump = (dump_dir / "failure_0.txt").read_text()
        assert "suite=forced" in dump
        capsys.readouterr()

    def test_rejects_oversized_n(self, capsys):
        assert main(["oracle-check", "--n-values", "4", "--instances", "2"]) == 1
        capsys.readouterr()
