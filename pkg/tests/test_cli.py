import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from ragc import cli
from ragc import metrics as M
from ragc.config import RunConfig, load_config, parse_config_text
from ragc.errors import ConfigError
from ragc.graphio import generate_sbm, load_dataset, save_dataset

FAST = ["--epochs", "3", "--embed-dim", "8"]


@pytest.fixture(scope="module")
def schema():
    text = resources.files("ragc").joinpath("schema/outputs.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@pytest.fixture
def sbm_dir(tmp_path):
    path = tmp_path / "sbm"
    save_dataset(generate_sbm(2, 10, 0.6, 0.05, 4, 2.0, seed=3), path)
    return path


def fake_scores(value):
    return {m: value for m in M.METRICS}


class TestParsing:
    @pytest.mark.parametrize(
        "text, expected",
        [("0..3", [0, 1, 2, 3]), ("0,2,5", [0, 2, 5]), ("4", [4])],
    )
    def test_seeds(self, text, expected):
        assert cli.parse_seeds(text) == expected

    @pytest.mark.parametrize("text", ["", "a", "3..1"])
    def test_bad_seeds(self, text):
        with pytest.raises(ConfigError):
            cli.parse_seeds(text)

    def test_sigmas(self):
        assert cli.parse_sigmas("0.1,0.2") == [0.1, 0.2]

    def test_worker_cap(self, monkeypatch):
        monkeypatch.setenv("RAGC_THREADS", "2")
        assert cli.worker_count(8) == 2
        monkeypatch.setenv("RAGC_THREADS", "many")
        with pytest.raises(ConfigError):
            cli.worker_count(1)

    def test_config_line_diagnostics(self):
        with pytest.raises(ConfigError, match="line 3: unknown key 'bogus'"):
            parse_config_text("k = 3\n# note\nbogus = 1\n", "x.cfg")
        with pytest.raises(ConfigError, match="line 1: cannot read epochs"):
            parse_config_text("epochs = ten\n", "x.cfg")
        with pytest.raises(ConfigError, match="line 2: expected 'key = value'"):
            parse_config_text("k = 2\nlr\n", "x.cfg")

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = 7\nbeta = 0.5\n", encoding="utf-8")
        cfg = load_config(path, {"epochs": 2, "beta": None})
        assert (cfg.epochs, cfg.beta) == (2, 0.5)

    def test_snapshot_round_trip(self):
        cfg = RunConfig(k=4, lr=5e-5, variant="no_hca", snapshot_embeddings=True)
        assert RunConfig(**parse_config_text(cfg.to_text())) == cfg

    @pytest.mark.parametrize("name, beta, gamma, dim", [("bat", 0.9, 1.0, 1500), ("amap", 0.1, 2.0, 1000)])
    def test_bundled(self, name, beta, gamma, dim):
        cfg = load_config(name)
        assert (cfg.beta, cfg.gamma, cfg.embed_dim) == (beta, gamma, dim)


class TestTrain:
    def test_outputs_and_schema(self, sbm_dir, tmp_path, schema, capsys):
        out = tmp_path / "run"
        code = cli.main(["train", "--data", str(sbm_dir), "--out", str(out), "--seeds", "0,1"] + FAST)
        assert code == 0
        assert "variant" in capsys.readouterr().out
        for name in ("metrics.json", "metrics.txt", "loss_history.csv", "embeddings.csv", "config_snapshot.txt"):
            assert (out / name).is_file()
        payload = json.loads((out / "metrics.json").read_text(encoding="utf-8"))
        jsonschema.validate(payload, schema)
        assert payload["seeds"] == [0, 1]
        assert np.loadtxt(out / "embeddings.csv", delimiter=",").shape == (20, 8)
        assert len((out / "loss_history.csv").read_text().splitlines()) == 4

    def test_single_seed_has_zero_std(self, sbm_dir, tmp_path):
        assert cli.main(["train", "--data", str(sbm_dir), "--out", str(tmp_path / "o")] + FAST) == 0
        payload = json.loads((tmp_path / "o" / "metrics.json").read_text(encoding="utf-8"))
        assert all(v["std"] == 0.0 for v in payload["metrics"].values())

    def test_deterministic(self, sbm_dir, tmp_path):
        for name in ("a", "b"):
            cli.main(["train", "--data", str(sbm_dir), "--out", str(tmp_path / name), "--seeds", "5"] + FAST)
        for f in ("loss_history.csv", "embeddings.csv", "predictions.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_snapshot_reproduces_run(self, sbm_dir, tmp_path):
        cli.main(["train", "--data", str(sbm_dir), "--out", str(tmp_path / "a"), "--seeds", "2"] + FAST)
        snap = tmp_path / "a" / "config_snapshot.txt"
        cli.main(["train", "--config", str(snap), "--data", str(sbm_dir), "--out", str(tmp_path / "b"), "--seeds", "2"])
        assert (tmp_path / "a" / "loss_history.csv").read_bytes() == (tmp_path / "b" / "loss_history.csv").read_bytes()

    def test_parallel_matches_serial(self, sbm_dir, tmp_path):
        base = ["train", "--data", str(sbm_dir), "--seeds", "0,1"] + FAST
        cli.main(base + ["--out", str(tmp_path / "s")])
        cli.main(base + ["--out", str(tmp_path / "p"), "--workers", "2"])
        assert (tmp_path / "s" / "predictions.csv").read_bytes() == (tmp_path / "p" / "predictions.csv").read_bytes()


class TestExitCodes:
    def test_missing_features(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert cli.main(["train", "--data", str(empty), "--out", str(tmp_path / "o")]) == 2
        assert "features.csv" in capsys.readouterr().err

    def test_bad_config_file(self, sbm_dir, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("epochs = 2\nwidth = 3\n", encoding="utf-8")
        assert cli.main(["train", "--config", str(cfg), "--data", str(sbm_dir), "--out", str(tmp_path / "o")]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_unknown_bundled_config(self, sbm_dir, tmp_path):
        assert cli.main(["train", "--config", "nowhere", "--data", str(sbm_dir), "--out", str(tmp_path / "o")]) == 2

    def test_bad_flag(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["train", "--epochs", "many"])
        assert info.value.code == 2

    def test_numeric_failure(self, sbm_dir, tmp_path, monkeypatch):
        def explode(g, cfg, on_epoch=None):
            raise FloatingPointError("loss diverged")

        monkeypatch.setattr(cli, "train", explode)
        assert cli.main(["train", "--data", str(sbm_dir), "--out", str(tmp_path / "o")]) == 1


class TestAblate:
    def test_four_variants_shared_seeds(self, sbm_dir, tmp_path, schema):
        out = tmp_path / "abl"
        assert cli.main(["ablate", "--data", str(sbm_dir), "--out", str(out), "--seeds", "0,1"] + FAST) == 0
        payload = json.loads((out / "ablation.json").read_text(encoding="utf-8"))
        jsonschema.validate(payload, schema)
        names = [v["variant"] for v in payload["variants"]]
        assert names == ["full", "no_dynamic_tau", "no_hca", "no_csada"]
        sums = {v["variant"]: v["x_aug_checksums"] for v in payload["variants"]}
        assert sums["full"] == sums["no_csada"] == sums["no_dynamic_tau"]
        assert all(v["ratio_to_full"]["acc"] > 0 for v in payload["variants"])
        assert payload["variants"][0]["ratio_to_full"] == {m: 1.0 for m in M.METRICS}
        text = (out / "ablation.txt").read_text(encoding="utf-8")
        assert "ratio" in text and all(n in text for n in names)
        for n in names:
            jsonschema.validate(json.loads((out / n / "metrics.json").read_text(encoding="utf-8")), schema)


class TestNoiseSweep:
    def test_degradation_formula(self):
        assert cli.degradation(0.8, 0.6) == pytest.approx(-25.0)
        assert cli.degradation(0.5, 0.55) == pytest.approx(10.0)
        assert cli.degradation(0.0, 0.0) == 0.0

    def test_missing_baseline(self):
        with pytest.raises(ValueError):
            cli.noise_sweep_rows({0.1: M.aggregate([fake_scores(0.5)])})

    def test_sigma_zero_only(self, sbm_dir, tmp_path):
        rows = cli.cmd_noise_sweep(RunConfig(), sbm_dir, tmp_path, [0, 1], [0.0], runner=lambda g, c: fake_scores(0.7))
        assert len(rows) == 1
        assert rows[0]["degradation_pct"] == {m: 0.0 for m in M.METRICS}

    def test_noise_reaches_runner(self, sbm_dir):
        g = load_dataset(sbm_dir)
        seen = {}

        def runner(graph, cfg):
            seen.setdefault(cfg.seed, []).append(graph.x.copy())
            return fake_scores(0.5)

        cli.sweep_reports(g, RunConfig(), [0, 1], [0.2], runner)
        clean, noisy = seen[0]
        assert np.array_equal(clean, g.x)
        assert np.std(noisy - clean) == pytest.approx(0.2, rel=0.3)
        assert not np.array_equal(seen[0][1], seen[1][1])

    def test_default_cli_run(self, sbm_dir, tmp_path, schema):
        out = tmp_path / "ns"
        assert cli.main(["noise-sweep", "--data", str(sbm_dir), "--out", str(out)] + FAST) == 0
        payload = json.loads((out / "noise_sweep.json").read_text(encoding="utf-8"))
        jsonschema.validate(payload, schema)
        assert [r["sigma"] for r in payload["rows"]] == [0.0, 0.1, 0.2, 0.3]
        assert len((out / "noise_sweep.txt").read_text(encoding="utf-8").splitlines()) == 5


class TestGenSbm:
    def test_layout_and_round_trip(self, tmp_path):
        out = tmp_path / "g"
        assert cli.main(["gen-sbm", "--out", str(out), "--seeds", "7"]) == 0
        labels = (out / "labels.csv").read_text(encoding="utf-8").splitlines()
        assert len(labels) == 150 and len(set(labels)) == 3
        loaded = load_dataset(out)
        direct = generate_sbm(**{**cli.SBM_DEFAULTS, "seed": 7})
        assert np.array_equal(loaded.x, direct.x)
        assert np.array_equal(loaded.a, direct.a)
        assert np.array_equal(loaded.labels, direct.labels)

    def test_byte_deterministic(self, tmp_path):
        for name in ("a", "b"):
            cli.main(["gen-sbm", "--out", str(tmp_path / name), "--blocks", "2", "--per-block", "6"])
        for f in ("features.csv", "edges.csv", "labels.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "sbm.cfg"
        cfg.write_text("blocks = 4\nper_block = 5  # small\n", encoding="utf-8")
        assert cli.main(["gen-sbm", "--config", str(cfg), "--out", str(tmp_path / "g")]) == 0
        assert load_dataset(tmp_path / "g").k == 4

    def test_invalid_params(self, tmp_path):
        assert cli.main(["gen-sbm", "--out", str(tmp_path / "g"), "--p-in", "1.5"]) == 2
        cfg = tmp_path / "sbm.cfg"
        cfg.write_text("blocks = three\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="line 1"):
            cli.parse_sbm_config(cfg.read_text(), str(cfg))
