"""Experiment runner, data ingestion, and CLI contract."""

import json
import os
import struct

import numpy as np
import pytest

from auxmc.cli import main as cli_main
from auxmc.core import RngStream
from auxmc.harness import (
    ConfigError,
    DataFormatError,
    ExperimentConfig,
    build_model,
    ingest_mnist,
    load_config,
    pca_top_k,
    read_idx,
    reference_moments,
    run_experiment,
    theory_check,
)


def tiny_gaussian_cfg(**kw):
    base = dict(
        experiment="gaussian",
        N=300,
        d=2,
        beta=1e-3,
        cube_K=3.0,
        samplers=["mh", "poissonmh"],
        target_rates=[0.4],
        T=400,
        replicates=1,
        seed=7,
        n_checkpoints=25,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def write_idx_images(path, arr):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, *arr.shape))
        fh.write(arr.astype(np.uint8).tobytes())


def write_idx_labels(path, arr):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, arr.shape[0]))
        fh.write(arr.astype(np.uint8).tobytes())


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "gaussian", "bogus": 1}))
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_override_applies(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "gaussian", "T": 10}))
        cfg = load_config(str(path), {"T": 99})
        assert cfg.T == 99

    def test_empty_sampler_list_rejected(self):
        with pytest.raises(ConfigError):
            tiny_gaussian_cfg(samplers=[]).validate()

    def test_promise_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            tiny_gaussian_cfg(samplers=["tunamh"]).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig(experiment="logistic", samplers=["poissonmh"]).validate()

    def test_rate_bounds(self):
        with pytest.raises(ConfigError):
            tiny_gaussian_cfg(target_rates=[1.0]).validate()


class TestReferenceMoments:
    def test_quadrature_cached(self, tmp_path):
        cfg = tiny_gaussian_cfg()
        model, _ = build_model(cfg)
        m1, v1 = reference_moments(cfg, model, str(tmp_path))
        files = os.listdir(tmp_path)
        assert len(files) == 1
        m2, v2 = reference_moments(cfg, model, str(tmp_path))
        assert np.array_equal(m1, m2) and np.array_equal(v1, v2)

    def test_exchange_reference_is_enumerated(self, tmp_path):
        cfg = ExperimentConfig(experiment="exchange_toy", samplers=["exchange"], T=10, seed=1)
        model, _ = build_model(cfg)
        mean, var = reference_moments(cfg, model, str(tmp_path))
        post = model.posterior()
        assert mean[0] == pytest.approx(float(np.sum(post * model.theta_grid)))


class TestRunExperiment:
    def test_outputs_and_schema(self, tmp_path):
        cfg = tiny_gaussian_cfg()
        result = run_experiment(cfg, str(tmp_path))
        with open(result["paths"]["steps"]) as fh:
            header = fh.readline().strip().split(",")
        assert header == [
            "experiment", "sampler", "target_rate", "replicate", "step", "seconds",
            "accepted", "batch_size", "mse_mean", "mse_var", "holdout_acc",
        ]
        meta = json.load(open(result["paths"]["meta"]))
        assert meta["config"]["N"] == 300
        assert "mh@0.4" in meta["tuning"]

    def test_zero_replicates_headers_only(self, tmp_path):
        cfg = tiny_gaussian_cfg(replicates=0)
        result = run_experiment(cfg, str(tmp_path))
        lines = open(result["paths"]["steps"]).read().strip().splitlines()
        assert len(lines) == 1

    def test_determinism_modulo_seconds(self, tmp_path):
        cfg = tiny_gaussian_cfg()
        r1 = run_experiment(cfg, str(tmp_path / "a"))
        r2 = run_experiment(cfg, str(tmp_path / "b"))

        def strip_seconds(path):
            rows = open(path).read().strip().splitlines()
            out = []
            for row in rows[1:]:
                cells = row.split(",")
                del cells[5]
                out.append(",".join(cells))
            return out

        assert strip_seconds(r1["paths"]["steps"]) == strip_seconds(r2["paths"]["steps"])

    def test_robust_with_hmc_and_gradient_samplers(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="robust", N=250, d=2, beta=0.01, v=4.0, R=6.0,
            lambda_coef=0.01, hmc_leapfrog=3,
            samplers=["hmc", "mala", "poisson-barker"], target_rates=[0.4],
            T=250, replicates=1, seed=5, n_checkpoints=8, reference_steps=3000,
        )
        result = run_experiment(cfg, str(tmp_path))
        rows = open(result["paths"]["steps"]).read().strip().splitlines()[1:]
        assert {r.split(",")[1] for r in rows} == {"hmc", "mala", "poisson-barker"}

    def test_exchange_toy_end_to_end(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="exchange_toy", samplers=["exchange"], target_rates=[0.4],
            T=500, replicates=2, seed=9, n_checkpoints=8,
        )
        result = run_experiment(cfg, str(tmp_path))
        rows = open(result["paths"]["ess"]).read().strip().splitlines()[1:]
        assert len(rows) == 2

    def test_logistic_tuna_sgld_path(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="logistic", N=300, d=3, chi=1e-3, K_sgld=5, grad_clip=2.0,
            samplers=["tuna-sgld"], target_rates=[0.4], T=250, replicates=1,
            seed=4, n_checkpoints=8, n_test=100, reference_steps=2000,
        )
        result = run_experiment(cfg, str(tmp_path))
        rows = open(result["paths"]["steps"]).read().strip().splitlines()[1:]
        assert all(int(r.split(",")[7]) >= 0 for r in rows)  # batch sizes recorded

    def test_logistic_records_holdout_accuracy(self, tmp_path):
        cfg = ExperimentConfig(
            experiment="logistic", N=400, d=3, chi=1e-3, K_sgld=10,
            samplers=["tunamh"], target_rates=[0.4], T=300, replicates=1,
            seed=3, n_checkpoints=10, n_test=200, reference_steps=2000,
        )
        result = run_experiment(cfg, str(tmp_path))
        rows = open(result["paths"]["steps"]).read().strip().splitlines()[1:]
        accs = [float(r.split(",")[-1]) for r in rows]
        assert all(0.0 <= a <= 1.0 for a in accs)


class TestIdxReader:
    def test_round_trip(self, tmp_path):
        rng = RngStream(5)
        imgs = rng.gen.integers(0, 256, size=(7, 4, 4)).astype(np.uint8)
        labels = rng.gen.integers(0, 10, size=7).astype(np.uint8)
        pi, pl = tmp_path / "i.idx", tmp_path / "l.idx"
        write_idx_images(pi, imgs)
        write_idx_labels(pl, labels)
        assert np.array_equal(read_idx(str(pi)), imgs)
        assert np.array_equal(read_idx(str(pl)), labels)

    def test_bad_magic_reports_offset(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">I", 0xDEADBEEF) + b"\x00" * 8)
        with pytest.raises(DataFormatError, match="byte 0"):
            read_idx(str(path))

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(struct.pack(">IIII", 0x803, 2, 4, 4) + b"\x00" * 10)
        with pytest.raises(DataFormatError, match="byte"):
            read_idx(str(path))

    def test_missing_file(self):
        with pytest.raises(DataFormatError):
            read_idx("/nonexistent/file.idx")


class TestMnistPipeline:
    def make_files(self, tmp_path, n_train=60, n_test=30, side=6):
        rng = RngStream(6)
        # Two visually distinct digit classes: 3 -> low pixels, 5 -> high.
        ytr = np.where(rng.gen.random(n_train) < 0.5, 3, 5).astype(np.uint8)
        yte = np.where(rng.gen.random(n_test) < 0.5, 3, 5).astype(np.uint8)
        noise = lambda n: rng.gen.integers(0, 60, size=(n, side, side))
        xtr = (noise(n_train) + 150 * (ytr == 5)[:, None, None]).astype(np.uint8)
        xte = (noise(n_test) + 150 * (yte == 5)[:, None, None]).astype(np.uint8)
        # Sprinkle some other digits to exercise filtering.
        ytr[:5] = 7
        paths = {}
        for name, writer, arr in (
            ("train_images", write_idx_images, xtr),
            ("train_labels", write_idx_labels, ytr),
            ("test_images", write_idx_images, xte),
            ("test_labels", write_idx_labels, yte),
        ):
            p = tmp_path / f"{name}.idx"
            writer(p, arr)
            paths[name] = str(p)
        return paths, ytr, yte

    def test_filter_center_project(self, tmp_path):
        paths, ytr, yte = self.make_files(tmp_path)
        data = ingest_mnist(**paths, digits=(3, 5), n_components=4)
        assert data.n_train == int(np.sum((ytr == 3) | (ytr == 5)))
        assert data.n_test == int(np.sum((yte == 3) | (yte == 5)))
        assert data.x_train.shape == (data.n_train, 4)
        # Centering: the projected training mean is the zero vector.
        assert np.max(np.abs(data.x_train.mean(axis=0))) < 1e-10
        assert set(np.unique(data.y_train)) <= {0.0, 1.0}
        # The two classes separate along the top component by construction.
        mean_gap = abs(
            data.x_train[data.y_train == 1, 0].mean()
            - data.x_train[data.y_train == 0, 0].mean()
        )
        assert mean_gap > 1.0


@pytest.mark.skipif(
    "AUXMC_MNIST_DIR" not in os.environ,
    reason="real MNIST IDX files not available (set AUXMC_MNIST_DIR)",
)
class TestRealMnistCounts:
    """Digit-pair sample counts on the actual dataset."""

    def paths(self):
        d = os.environ["AUXMC_MNIST_DIR"]
        return dict(
            train_images=os.path.join(d, "train-images-idx3-ubyte"),
            train_labels=os.path.join(d, "train-labels-idx1-ubyte"),
            test_images=os.path.join(d, "t10k-images-idx3-ubyte"),
            test_labels=os.path.join(d, "t10k-labels-idx1-ubyte"),
        )

    def test_three_vs_five_counts(self):
        data = ingest_mnist(**self.paths(), digits=(3, 5), n_components=50)
        assert (data.n_train, data.n_test) == (11_552, 1_902)

    def test_seven_vs_nine_counts(self):
        data = ingest_mnist(**self.paths(), digits=(7, 9), n_components=50)
        assert (data.n_train, data.n_test) == (12_214, 2_037)


class TestPcaTopK:
    def test_diagonal_case(self):
        V = pca_top_k(np.diag([3.0, 2.0, 1.0]), 2)
        assert abs(abs(V[0, 0]) - 1.0) < 1e-12 and abs(abs(V[1, 1]) - 1.0) < 1e-12

    def test_rank_one(self):
        u = np.array([1.0, 2.0, -1.0])
        u /= np.linalg.norm(u)
        V = pca_top_k(np.outer(u, u), 1)
        assert min(np.linalg.norm(V[:, 0] - u), np.linalg.norm(V[:, 0] + u)) < 1e-10

    def test_random_spd_eigen_residuals(self):
        rng = RngStream(8)
        A = rng.gen.standard_normal((10, 10))
        C = A @ A.T
        V = pca_top_k(C, 10)
        assert np.max(np.abs(V.T @ V - np.eye(10))) < 1e-8
        for k in range(10):
            v = V[:, k]
            lam = float(v @ C @ v)
            assert np.linalg.norm(C @ v - lam * v) < 1e-8

    def test_asymmetric_rejected(self):
        C = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(ValueError):
            pca_top_k(C, 1)


class TestTheoryCheckDriver:
    def test_default_suite_passes_and_writes_csv(self, tmp_path):
        records, ok = theory_check(str(tmp_path))
        assert ok and len(records) >= 20
        lines = open(tmp_path / "theory_report.csv").read().strip().splitlines()
        assert lines[0] == "check,value,bound,passed"
        assert len(lines) == len(records) + 1


class TestCli:
    def test_run_and_exit_codes(self, tmp_path):
        cfg = dict(
            experiment="gaussian", N=200, d=2, beta=1e-3, samplers=["mh"],
            target_rates=[0.4], T=200, replicates=1, seed=1, n_checkpoints=10,
        )
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert cli_main(["run", str(path), "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out" / "gaussian_steps.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"experiment": "nope"}))
        assert cli_main(["run", str(path)]) == 1

    def test_data_error_exit_code(self, tmp_path):
        assert (
            cli_main(
                [
                    "ingest-mnist",
                    "--train-images", "/missing.idx",
                    "--train-labels", "/missing.idx",
                    "--test-images", "/missing.idx",
                    "--test-labels", "/missing.idx",
                ]
            )
            == 2
        )

    def test_ess_subcommand(self, tmp_path, capsys):
        rng = RngStream(9)
        xs = rng.gen.standard_normal((2000, 2))
        path = tmp_path / "trace.csv"
        with open(path, "w") as fh:
            fh.write("a,b\n")
            for row in xs:
                fh.write(f"{row[0]},{row[1]}\n")
        assert cli_main(["ess", str(path)]) == 0
        out = capsys.readouterr().out
        assert "summary:" in out

    def test_theory_subcommand(self, capsys):
        assert cli_main(["theory"]) == 0
        assert "checks passed" in capsys.readouterr().out
