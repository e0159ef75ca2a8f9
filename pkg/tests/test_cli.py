import json
from importlib import resources

import numpy as np
import pytest

from stroblim.cli import (ScenarioError, load_scenario, main, read_csv,
                          render_chart, scenario_from_dict,
                          trajectory_columns, write_trajectory_csv)
from stroblim.experiments import run_method, swap_selective_scenario


def bundled(name):
    return resources.files("stroblim") / "scenarios" / f"{name}.json"


def bundled_doc(name):
    return json.loads(bundled(name).read_text())


class TestScenarioParsing:
    def test_bundled_files_load(self):
        for name in ("swap_selective", "heisenberg_local_fields",
                     "heisenberg_global_field", "swap_nonselective"):
            sc = scenario_from_dict(bundled_doc(name))
            assert sc.name == name

    def test_bundled_matches_programmatic_defaults(self):
        sc = scenario_from_dict(bundled_doc("swap_selective"))
        ref = swap_selective_scenario(0.2)
        assert abs(sc.tau - ref.tau) < 1e-15
        assert np.allclose(sc.hamiltonian.assemble(), ref.hamiltonian.assemble())
        assert np.allclose(sc.initial.rho_sys, ref.initial.rho_sys, atol=1e-12)

    def test_omega_inconsistency_rejected(self):
        doc = bundled_doc("swap_selective")
        doc["omega"] = 2.0  # gamma^2 tau = 1
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)

    def test_single_rate_rejected(self):
        doc = bundled_doc("swap_selective")
        del doc["tau"]
        with pytest.raises(ScenarioError):
            scenario_from_dict(doc)

    def test_omega_tau_pair_resolves_gamma(self):
        doc = bundled_doc("swap_nonselective")
        sc = scenario_from_dict(doc)
        assert abs(sc.hamiltonian.gamma - 5.0) < 1e-12

    def test_missing_key_reported(self):
        doc = bundled_doc("swap_selective")
        del doc["projectors"]
        with pytest.raises(ScenarioError, match="projectors"):
            scenario_from_dict(doc)

    def test_explicit_terms_hamiltonian(self):
        doc = bundled_doc("swap_selective")
        sz = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]
        doc["hamiltonian"] = {"terms": [{"a": sz, "b": sz}]}
        sc = scenario_from_dict(doc)
        want = 5.0 * np.kron(np.diag([1, -1]), np.diag([1, -1]))
        assert np.allclose(sc.hamiltonian.assemble(), want)

    def test_amplitude_ket_parses(self):
        doc = bundled_doc("swap_selective")
        doc["projectors"] = [[[[1.0, 0.0], [0.0, 0.0]]]]
        sc = scenario_from_dict(doc)
        assert sc.measurement.ranks == (1,)

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"name": "x",\n  "mode": }\n')
        with pytest.raises(ScenarioError, match="line 2"):
            load_scenario(str(path))


class TestCsv:
    def test_roundtrip_exact(self, tmp_path):
        sc = swap_selective_scenario(0.2, t_max=2.0)
        traj = run_method(sc, "exact")
        path = tmp_path / "traj.csv"
        write_trajectory_csv(str(path), traj, sc.outputs, "exact")
        header, rows = read_csv(str(path))
        names, want_rows = trajectory_columns(traj, sc.outputs)
        assert header == names + ["method"]
        assert len(rows) == len(want_rows)
        for row, want in zip(rows, want_rows):
            assert row["method"] == "exact"
            for name, value in zip(names, want):
                assert row[name] == value  # 17 significant digits round-trip

    def test_matrix_columns(self, tmp_path):
        from dataclasses import replace
        sc = replace(swap_selective_scenario(0.2, t_max=1.0),
                     outputs=("matrix",))
        traj = run_method(sc, "limit")
        names, rows = trajectory_columns(traj, sc.outputs)
        assert "re_0_0" in names and "im_1_0" in names
        assert rows[0][names.index("re_0_0")] == pytest.approx(0.2)


class TestCommands:
    def test_run_writes_files(self, tmp_path):
        rc = main(["run", str(bundled("swap_selective")), "--out-dir",
                   str(tmp_path), "--grid-points", "50"])
        assert rc == 0
        assert (tmp_path / "swap_selective_exact.csv").exists()
        assert (tmp_path / "swap_selective_limit.csv").exists()

    def test_run_nonselective_writes_three_methods(self, tmp_path):
        rc = main(["run", str(bundled("swap_nonselective")), "--out-dir",
                   str(tmp_path), "--grid-points", "25"])
        assert rc == 0
        for m in ("exact", "limit", "closed_form"):
            assert (tmp_path / f"swap_nonselective_{m}.csv").exists()

    def test_run_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            main(["run", str(bundled("swap_selective")), "--out-dir", str(out),
                  "--grid-points", "50"])
        fa = (a / "swap_selective_exact.csv").read_bytes()
        fb = (b / "swap_selective_exact.csv").read_bytes()
        assert fa == fb

    def test_malformed_scenario_exits_2(self, tmp_path):
        doc = bundled_doc("swap_selective")
        doc["omega"] = 3.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 2

    def test_vanishing_probability_exits_3(self, tmp_path):
        doc = bundled_doc("swap_selective")
        doc["initial_sys"] = {"ket": [[0.0, 0.0], [1.0, 0.0]]}
        doc["t_max"] = 40.0
        doc["grid_points"] = 1000
        path = tmp_path / "dying.json"
        path.write_text(json.dumps(doc))
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 3

    def test_compare_pass_and_fail(self, tmp_path, capsys):
        rc = main(["compare", str(bundled("swap_selective")), "--out-dir",
                   str(tmp_path)])
        assert rc == 0
        assert "PASS" in capsys.readouterr().out
        rc = main(["compare", str(bundled("swap_selective")), "--out-dir",
                   str(tmp_path), "--tolerance", "1e-6"])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out
        assert (tmp_path / "swap_selective_compare.csv").exists()

    def test_compare_rejects_single_method(self, tmp_path):
        doc = bundled_doc("swap_selective")
        doc["mode"] = "selective"
        path = tmp_path / "single.json"
        path.write_text(json.dumps(doc))
        assert main(["compare", str(path), "--out-dir", str(tmp_path)]) == 2

    def test_sweep(self, tmp_path, capsys):
        rc = main(["sweep", str(bundled("swap_selective")), "--out-dir",
                   str(tmp_path), "--tau", "0.04,0.02"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "strictly decreasing: yes" in out
        assert (tmp_path / "swap_selective_sweep.csv").exists()

    def test_sweep_single_tau_exits_2(self, tmp_path):
        rc = main(["sweep", str(bundled("swap_selective")), "--out-dir",
                   str(tmp_path), "--tau", "0.04"])
        assert rc == 2

    def test_sweep_increasing_tau_fails_verdict(self, tmp_path, capsys):
        rc = main(["sweep", str(bundled("swap_selective")), "--out-dir",
                   str(tmp_path), "--tau", "0.01,0.04"])
        assert rc == 1
        assert "strictly decreasing: no" in capsys.readouterr().out

    def test_limit_only_mode_allows_free_grid(self, tmp_path):
        doc = bundled_doc("swap_selective")
        doc["mode"] = "limit-only"
        doc["grid_points"] = 97  # not commensurate with tau; no exact method
        path = tmp_path / "limit.json"
        path.write_text(json.dumps(doc))
        assert main(["run", str(path), "--out-dir", str(tmp_path)]) == 0
        assert (tmp_path / "swap_selective_limit.csv").exists()
        assert not (tmp_path / "swap_selective_exact.csv").exists()

    def test_plot_p_up(self, tmp_path):
        main(["run", str(bundled("swap_selective")), "--out-dir", str(tmp_path),
              "--grid-points", "50"])
        csv = tmp_path / "swap_selective_exact.csv"
        svg = tmp_path / "chart.svg"
        assert main(["plot", str(csv), str(svg)]) == 0
        text = svg.read_text()
        assert text.startswith("<svg")
        assert "polyline" in text

    def test_plot_bloch(self, tmp_path):
        main(["run", str(bundled("heisenberg_local_fields")), "--out-dir",
              str(tmp_path), "--grid-points", "50"])
        csv = tmp_path / "heisenberg_local_fields_limit.csv"
        svg = tmp_path / "bloch.svg"
        assert main(["plot", str(csv), str(svg)]) == 0

    def test_plot_deterministic(self, tmp_path):
        main(["run", str(bundled("swap_selective")), "--out-dir", str(tmp_path),
              "--grid-points", "50"])
        csv = tmp_path / "swap_selective_limit.csv"
        s1, s2 = tmp_path / "one.svg", tmp_path / "two.svg"
        main(["plot", str(csv), str(s1)])
        main(["plot", str(csv), str(s2)])
        assert s1.read_bytes() == s2.read_bytes()

    def test_plot_rejects_unknown_columns(self, tmp_path):
        path = tmp_path / "odd.csv"
        path.write_text("a,b,method\n1,2,x\n")
        assert main(["plot", str(path), str(tmp_path / "out.svg")]) == 2

    def test_plot_rejects_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("t,p_up,method\n")
        assert main(["plot", str(path), str(tmp_path / "out.svg")]) == 2


class TestRenderChart:
    def test_basic_svg_structure(self):
        svg = render_chart([("m", [0, 1, 2], [0.0, 0.5, 1.0])], "t", "p")
        assert svg.count("<polyline") == 1
        assert svg.endswith("</svg>\n")
