import json
import os

import numpy as np

from swsgd import cli


def _write_measures(tmp_path):
    (tmp_path / "mx.csv").write_text("1\n2\n")
    (tmp_path / "my.csv").write_text("2\n4\n")


def toy_config(tmp_path, **kw):
    _write_measures(tmp_path)
    doc = {
        "network": {
            "layer_dims": [1, 1],
            "activation": "identity",
            "bias": False,
            "R_u": 4.0,
            "R_x": 4.0,
            "eps": 0.5,
        },
        "measures": {"mx": "mx.csv", "my": "my.csv"},
        "sgd": {"alpha": 0.1, "t_max": 20, "n": 2, "seed": 0, "scheme": "plain",
                "p": 2.0, "L": 1},
        "sweep": {"alphas": [0.2, 0.1], "seeds": [0, 1]},
        "diagnostics": {"k_max": 1, "grid_per_unit": 100, "alpha_threshold_check": False},
        "output_dir": str(tmp_path / "out"),
    }
    for key, val in kw.items():
        if isinstance(val, dict) and isinstance(doc.get(key), dict):
            doc[key].update(val)
        else:
            doc[key] = val
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(doc, indent=2))
    return path


def read_tree(root):
    out = {}
    for name in sorted(os.listdir(root)):
        with open(os.path.join(root, name), "rb") as fh:
            out[name] = fh.read()
    return out


class TestTrain:
    def test_writes_artifacts(self, tmp_path):
        cfg = toy_config(tmp_path)
        assert cli.main(["train", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        for alpha in ("0.2", "0.1"):
            for seed in ("0", "1"):
                csv = out / f"traj_alpha{alpha}_seed{seed}.csv"
                assert csv.exists()
                assert len(csv.read_text().strip().split("\n")) == 1 + 20 + 1
                doc = json.loads((out / f"traj_alpha{alpha}_seed{seed}.json").read_text())
                assert "experiment_config" in doc
                assert doc["summary"]["config"]["alpha"] == float(alpha)

    def test_missing_measure_file(self, tmp_path, capsys):
        cfg = toy_config(tmp_path)
        os.remove(tmp_path / "my.csv")
        assert cli.main(["train", "--config", str(cfg)]) == 2
        assert "my.csv" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path, capsys):
        assert cli.main(["train", "--config", str(tmp_path / "none.json")]) == 2
        assert "none.json" in capsys.readouterr().err

    def test_flag_overrides(self, tmp_path):
        cfg = toy_config(tmp_path)
        out2 = tmp_path / "other"
        assert cli.main([
            "train", "--config", str(cfg), "--out", str(out2),
            "--alpha-list", "0.3", "--seed", "5",
        ]) == 0
        assert sorted(os.listdir(out2)) == ["traj_alpha0.3_seed5.csv", "traj_alpha0.3_seed5.json"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg = toy_config(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert cli.main(["train", "--config", str(cfg), "--out", str(out1)]) == 0
        assert cli.main(["train", "--config", str(cfg), "--out", str(out2)]) == 0
        t1, t2 = read_tree(out1), read_tree(out2)
        assert list(t1) == list(t2)
        for name in t1:
            if name.endswith(".csv"):
                assert t1[name] == t2[name]
            else:  # reports embed output_dir, which differs by construction
                d1 = json.loads(t1[name])
                d2 = json.loads(t2[name])
                assert d1["summary"] == d2["summary"]

    def test_rerun_from_echo(self, tmp_path):
        cfg = toy_config(tmp_path)
        out1 = tmp_path / "o1"
        assert cli.main(["train", "--config", str(cfg), "--out", str(out1)]) == 0
        sidecar = out1 / "traj_alpha0.2_seed0.json"
        out2 = tmp_path / "o2"
        assert cli.main(["train", "--config", str(sidecar), "--out", str(out2)]) == 0
        a = (out1 / "traj_alpha0.2_seed0.csv").read_bytes()
        b = (out2 / "traj_alpha0.2_seed0.csv").read_bytes()
        assert a == b

    def test_workers_match_serial(self, tmp_path):
        cfg = toy_config(tmp_path)
        out1, out2 = tmp_path / "serial", tmp_path / "pool"
        assert cli.main(["train", "--config", str(cfg), "--out", str(out1)]) == 0
        assert cli.main(["train", "--config", str(cfg), "--out", str(out2),
                         "--workers", "2"]) == 0
        t1, t2 = read_tree(out1), read_tree(out2)
        for name in t1:
            if name.endswith(".csv"):
                assert t1[name] == t2[name]

    def test_divergence_exit_code(self, tmp_path):
        cfg = toy_config(
            tmp_path,
            sweep={"alphas": [1e308], "seeds": [0]},
            sgd={"alpha": 1e308, "t_max": 5, "n": 2, "seed": 0,
                 "init": {"kind": "point", "point": [1.0]}},
        )
        assert cli.main(["train", "--config", str(cfg)]) == 3


class TestCompareFlow:
    def test_requires_two_alphas(self, tmp_path, capsys):
        cfg = toy_config(tmp_path, sweep={"alphas": [0.1], "seeds": [0]})
        assert cli.main(["compare-flow", "--config", str(cfg)]) == 2
        assert "two alphas" in capsys.readouterr().err

    def test_table_shape(self, tmp_path):
        cfg = toy_config(tmp_path)
        assert cli.main(["compare-flow", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        lines = (out / "compare_flow.csv").read_text().strip().split("\n")
        assert lines[0] == "alpha,seed,d_c,tail_bound,grid_bound"
        assert len(lines) == 1 + 2 * 2  # one row per (alpha, seed)
        summary = (out / "dc_summary.csv").read_text().strip().split("\n")
        assert summary[0] == "alpha,median_d_c"
        assert len(summary) == 3
        for seed in (0, 1):
            assert (out / f"flow_seed{seed}.csv").exists()

    def test_k_max_tail_bound(self, tmp_path):
        meds = {}
        for k_max in (1, 8):
            cfg = toy_config(
                tmp_path,
                diagnostics={"k_max": k_max, "grid_per_unit": 100,
                             "alpha_threshold_check": False},
                sweep={"alphas": [0.4, 0.2], "seeds": [0]},
            )
            outdir = tmp_path / f"k{k_max}"
            assert cli.main(["compare-flow", "--config", str(cfg),
                             "--out", str(outdir)]) == 0
            doc = json.loads((outdir / "compare_flow.json").read_text())
            meds[k_max] = doc["median_d_c"]
        for alpha in ("0.4", "0.2"):
            assert abs(meds[1][alpha] - meds[8][alpha]) <= 0.5

    def test_byte_identical_reruns(self, tmp_path):
        cfg = toy_config(tmp_path, sweep={"alphas": [0.2, 0.1], "seeds": [0]})
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        assert cli.main(["compare-flow", "--config", str(cfg), "--out", str(out1)]) == 0
        assert cli.main(["compare-flow", "--config", str(cfg), "--out", str(out2)]) == 0
        t1, t2 = read_tree(out1), read_tree(out2)
        for name in t1:
            if name.endswith(".csv"):
                assert t1[name] == t2[name]


class TestVerify:
    def test_default_bundle_passes(self, tmp_path, capsys):
        assert cli.cmd_verify(None, out_dir=str(tmp_path / "v")) == 0
        report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
        assert report["passed"] is True
        for suite in ("gradient_fd", "sorting_oracle", "lipschitz", "projection"):
            assert report["suites"][suite]["passed"] is True
        assert "max_error" in report["suites"]["gradient_fd"]

    def test_injected_sign_flip_fails(self, tmp_path, monkeypatch, capsys):
        from swsgd import swloss

        true_grad = swloss.grad_phi
        monkeypatch.setattr(swloss, "grad_phi",
                            lambda *args, **kw: -true_grad(*args, **kw))
        assert cli.cmd_verify(None, out_dir=str(tmp_path / "v")) == 1
        report = json.loads((tmp_path / "v" / "verify_report.json").read_text())
        assert report["suites"]["gradient_fd"]["passed"] is False
        assert report["suites"]["sorting_oracle"]["passed"] is True


class TestCriticality:
    def projected_config(self, tmp_path, **kw):
        return toy_config(
            tmp_path,
            sgd={"alpha": 0.1, "t_max": 40, "n": 2, "seed": 0,
                 "scheme": "projected_noised", "beta": 0.2, "radius_r": 2.5},
            sweep={"alphas": [0.2, 0.1], "seeds": [0, 1]},
            diagnostics={"tail_fraction": 0.25, "alpha_threshold_check": False},
            **kw,
        )

    def test_requires_projected_scheme(self, tmp_path, capsys):
        cfg = toy_config(tmp_path)
        assert cli.main(["criticality", "--config", str(cfg)]) == 2
        assert "projected_noised" in capsys.readouterr().err

    def test_outputs_and_ball_invariant(self, tmp_path):
        cfg = self.projected_config(tmp_path)
        assert cli.main(["criticality", "--config", str(cfg)]) == 0
        out = tmp_path / "out"
        rows = (out / "criticality.csv").read_text().strip().split("\n")
        assert rows[0] == "alpha,seed,t,gap,u_norm"
        norms = [float(line.split(",")[4]) for line in rows[1:]]
        assert max(norms) <= 2.5
        summary = (out / "criticality_summary.csv").read_text().strip().split("\n")
        assert summary[0] == "alpha,median_tail_gap"
        doc = json.loads((out / "criticality.json").read_text())
        assert set(doc["median_tail_gap"]) == {"0.2", "0.1"}
        assert doc["p_conjecture_conditional"] is False
        for alpha in ("0.2", "0.1"):
            for seed in ("0", "1"):
                csv = out / f"traj_alpha{alpha}_seed{seed}.csv"
                data = np.genfromtxt(csv, delimiter=",", skip_header=1, ndmin=2)
                assert (np.linalg.norm(data[:, 1:2], axis=1) <= 2.5).all()

    def test_p_flag_marks_conjecture(self, tmp_path):
        cfg = self.projected_config(tmp_path)
        assert cli.main(["criticality", "--config", str(cfg), "--p", "1.5"]) == 0
        doc = json.loads((tmp_path / "out" / "criticality.json").read_text())
        assert doc["p_conjecture_conditional"] is True

    def test_perfect_fit_start_has_zero_gaps(self, tmp_path):
        cfg = toy_config(
            tmp_path,
            sgd={"alpha": 0.1, "t_max": 10, "n": 1, "seed": 0,
                 "scheme": "projected_noised", "beta": 0.0, "radius_r": 3.0,
                 "init": {"kind": "point", "point": [2.0]}},
            sweep={"alphas": [0.1], "seeds": [0]},
        )
        # single atoms fitted exactly by the starting point: T(2, 1) = 2
        (tmp_path / "mx.csv").write_text("1\n")
        (tmp_path / "my.csv").write_text("2\n")
        assert cli.main(["criticality", "--config", str(cfg)]) == 0
        rows = (tmp_path / "out" / "criticality.csv").read_text().strip().split("\n")
        gaps = [float(line.split(",")[3]) for line in rows[1:]]
        assert gaps and max(gaps) == 0.0


class TestConfigResolution:
    def test_network_init_seed_used_as_fallback(self, tmp_path):
        cfg_path = toy_config(tmp_path)
        doc = json.loads(cfg_path.read_text())
        doc["network"]["init_seed"] = 21
        del doc["sweep"]
        doc["sgd"].pop("seed")
        cfg_path.write_text(json.dumps(doc))
        exp = cli.load_experiment(cfg_path)
        assert exp.seeds == (21,)

    def test_network_spec_from_file(self, tmp_path):
        from swsgd import network as nw

        cfg_path = toy_config(tmp_path)
        doc = json.loads(cfg_path.read_text())
        net = nw.spec_from_dict(doc["network"])
        nw.save_spec(net, tmp_path / "net.json")
        doc["network"] = {"path": "net.json"}
        cfg_path.write_text(json.dumps(doc))
        exp = cli.load_experiment(cfg_path)
        assert exp.net == net
