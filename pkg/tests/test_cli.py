import filecmp

import pytest

from fermigas.cli import EXIT_OK, EXIT_USAGE, main, parse_config


class TestConfig:
    def test_parse(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text(
            "# comment\n"
            "potential.V0 = 1.5\n"
            "scattering.R_factors = 10,20,40\n"
            "\n"
            "fourier.grid_n = 6  # trailing comment\n")
        cfg = parse_config(cfg_file)
        assert cfg["potential.V0"] == "1.5"
        assert cfg["scattering.R_factors"] == "10,20,40"
        assert cfg["fourier.grid_n"] == "6"

    def test_malformed_line(self, tmp_path):
        cfg_file = tmp_path / "bad.cfg"
        cfg_file.write_text("this is not a key value pair\n")
        with pytest.raises(ValueError):
            parse_config(cfg_file)


class TestExitCodes:
    def test_missing_config_is_usage_error(self, tmp_path):
        code = main(["scattering", "--config", str(tmp_path / "absent.cfg"),
                     "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_bad_config_value_is_usage_error(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("potential.type = no_such_kind\n")
        code = main(["scattering", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_USAGE

    def test_inadmissible_shell_lists_neighbors(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("hf.N_per_spin = 8\nhf.L_list = 10,12\n")
        code = main(["hf-sweep", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_USAGE
        err = capsys.readouterr().err
        assert "7" in err and "19" in err


class TestSubcommands:
    def test_scattering_outputs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("scattering.R_factors = 8,16\n"
                       "born.V0_list = 0.1,0.2\n"
                       "fourier.grid_n = 4\n")
        code = main(["scattering", "--config", str(cfg), "--out", str(tmp_path),
                     "--threads", "2"])
        assert code == EXIT_OK
        for name in ("neumann.csv", "born.csv", "fourier_residual.csv",
                     "neumann.gp", "born.gp"):
            assert (tmp_path / name).exists()
        header = (tmp_path / "neumann.csv").read_text().splitlines()[0]
        assert header == "R,E_R,a_R,ER_R3_over_3a"

    def test_zero_potential_scattering_columns(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("potential.type = square_well\npotential.V0 = 0\n"
                       "scattering.R_factors = 8,16\nborn.V0_list = 0.0\n"
                       "fourier.grid_n = 3\n")
        code = main(["scattering", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_OK
        rows = (tmp_path / "neumann.csv").read_text().splitlines()[1:]
        for row in rows:
            _, e_r, a_r, ratio = row.split(",")
            assert float(e_r) == 0.0
            assert float(a_r) == 0.0

    def test_hf_sweep_and_dedup(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("hf.N_per_spin = 7\nhf.L_list = 10,12,12,10\n")
        code = main(["hf-sweep", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_OK
        lines = (tmp_path / "hf_sweep.csv").read_text().splitlines()
        assert len(lines) == 3  # header + two deduplicated rows

    def test_ed_outputs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("ed.n2max_list = 1,2\n")
        code = main(["ed", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "spectrum.csv").exists()
        report = (tmp_path / "identity_report.txt").read_text()
        assert "identity" in report and "Q1 min eigenvalue" in report
        trial_rows = (tmp_path / "trial_state.csv").read_text().splitlines()[1:]
        for row in trial_rows:
            _, e0, et, ehf, _ = row.split(",")
            assert float(e0) <= float(et) + 1e-12  # variational row-by-row

    def test_kernels_outputs(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("kernels.rho_list = 1e-4,2.2e-4,4.6e-4,1e-3\n"
                       "cutoff.rho_list = 1e-5,1e-4\n")
        code = main(["kernels", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == EXIT_OK
        norms = (tmp_path / "kernel_norms.csv").read_text().splitlines()
        assert norms[0] == "rho,u_l2,v_l2,omega_l1,u_l1"
        assert len(norms) == 5
        dec = (tmp_path / "cutoff_decomposition.csv").read_text().splitlines()
        assert dec[0] == "rho,l1_low,l1_mid,l1_high"

    def test_determinism_across_thread_counts(self, tmp_path):
        outs = []
        for i, threads in enumerate((1, 3)):
            out = tmp_path / f"run{i}"
            cfg = tmp_path / "run.cfg"
            cfg.write_text("scattering.R_factors = 8,16\n"
                           "born.V0_list = 0.1\nfourier.grid_n = 3\n")
            code = main(["scattering", "--config", str(cfg), "--out", str(out),
                         "--threads", str(threads)])
            assert code == EXIT_OK
            outs.append(out)
        for name in ("neumann.csv", "born.csv", "fourier_residual.csv"):
            assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False)
