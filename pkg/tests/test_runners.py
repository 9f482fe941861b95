import os

import numpy as np
import pytest

from dataloaders.clouds import REAL, build_category_dataset, build_diagnostic_dataset, procedural_meshes, write_cloud_dir
from metrics.report import MetricReport
from models.networks import FeatureExtractor, init_network
from models.spec import NetworkSpec
from models.weights import init_weights, save_weights
from runners.adversarial import gan_experiment, no_generator_train, nogen_experiment, real_data, real_set, train_gan
from runners.classification import accuracy_table, majority, table1_experiment, train_classifier
from runners.evaluation import evaluate_run, load_samples, stability_experiment
from runners.pretrain import extractor_path, extractor_spec, load_extractors, pretrain_experiment
from runners.pretrain import pretrain_feature_extractor
from runners.report import ExperimentReport
from runners.spectrum import COPIES, metric_spectrum_experiment, spectrum_ratios, table2_experiment
from trainers.wgan import TrainConfig

NUM_POINTS = 20
LATENT = 5


def desk_config(**overrides):
    options = dict(n_critic=2, batch_size=2, latent_dim=LATENT, epochs=2, lr=1e-3, profile="desk")
    options.update(overrides)
    return TrainConfig(**options)


def disc(kind="pointnet-max"):
    return NetworkSpec(kind, width=0.0625, k=4)


def generator_spec():
    return NetworkSpec("fc-generator", width=0.03, latent_dim=LATENT, num_points=NUM_POINTS)


@pytest.fixture
def extractors(rng):
    return {key: init_network(NetworkSpec("feature-extractor", width=0.01, backbone=backbone, k=4), rng).eval()
            for key, backbone in (("max", "pointnet-max"), ("mix", "pointnet-mix"), ("dgcnn", "dgcnn"))}


@pytest.fixture
def real(rng):
    return real_set(rng.random((6, NUM_POINTS, 3)) - 0.5)


class TestClassification:
    def test_table1_reports_every_discriminator(self):
        report = table1_experiment([disc("pointnet-max"), disc("pointnet-avg")], "clustering", "box", count=3,
                                   num_points=32, epochs=1, batch_size=4, seed=3)
        assert report.results["dataset"]["train_size"] == 6
        table = accuracy_table(report)
        assert list(table) == ["pointnet-max", "pointnet-avg"]
        assert all(0.0 <= value <= 100.0 for row in table.values() for value in row)
        assert len(report.results["pointnet-max"]["history"]) == 1

    def test_table1_is_seeded(self):
        kwargs = dict(dataset="fps", shape_class="sphere", count=2, num_points=24, epochs=1, batch_size=2, seed=8)
        first = table1_experiment([disc()], **kwargs)
        second = table1_experiment([disc()], **kwargs)
        assert first.results == second.results

    def test_rejects_non_binary_labels(self, rng):
        train, test = build_diagnostic_dataset("clustering", "box", 2, 16, rng)
        train.labels[0] = 2
        with pytest.raises(ValueError, match="binary"):
            train_classifier(disc(), train, test, epochs=1)

    def test_rejects_generator(self, rng):
        train, test = build_diagnostic_dataset("clustering", "box", 2, 16, rng)
        with pytest.raises(ValueError, match="not a discriminator"):
            train_classifier(generator_spec(), train, test, epochs=1)

    def test_majority(self):
        assert majority([True, True, False])
        assert not majority([True, False])
        assert not majority([])


class TestPretrain:
    def test_extractor_is_headless(self, rng):
        data = build_category_dataset(["box", "sphere"], 10, 16, rng)
        blob, metrics = pretrain_feature_extractor("mix", data, epochs=1, width=0.03, k=4, batch_size=4)
        assert blob.spec.num_classes == 0
        assert blob.spec.backbone == "pointnet-mix"
        assert 0.0 <= metrics["accuracy"] <= 1.0

    def test_unknown_variant(self):
        with pytest.raises(ValueError, match="not supported"):
            extractor_spec("attention", 3)

    def test_needs_train_and_test(self, rng):
        data = build_category_dataset(["box", "sphere"], 10, 16, rng)
        with pytest.raises(ValueError, match="train and test"):
            pretrain_feature_extractor("max", {"train": data["train"]}, epochs=1)

    def test_missing_weights_name_the_command(self, tmp_path):
        pretrain_experiment(["max"], ["box", "cone"], per_class=6, num_points=16, epochs=1, width=0.03, k=4,
                            batch_size=4, output_dir=str(tmp_path))
        paths = {v: extractor_path(str(tmp_path), v) for v in ("max", "mix", "dgcnn")}
        with pytest.raises(FileNotFoundError, match="command=pretrain"):
            load_extractors(paths)

    def test_pretrain_and_load(self, tmp_path):
        report = pretrain_experiment(["max", "mix", "dgcnn"], ["box", "cone"], per_class=6, num_points=16,
                                     epochs=1, width=0.03, k=4, batch_size=4, output_dir=str(tmp_path))
        assert set(report.results) == {"max", "mix", "dgcnn"}
        loaded = load_extractors({v: extractor_path(str(tmp_path), v) for v in ("max", "mix", "dgcnn")})
        assert all(isinstance(e, FeatureExtractor) and not e.training for e in loaded.values())
        assert loaded["mix"].spec.feature_dim == report.results["mix"]["feature_dim"]


class TestSpectrum:
    def test_copies_against_ground_truth(self, rng, extractors):
        meshes = procedural_meshes("box", 3, rng)
        reports = metric_spectrum_experiment(meshes, extractors, 32, rng)
        assert list(reports) == list(COPIES)
        truth = reports["ground-truth"]
        assert truth.cov_cd == 100.0 and truth.mmd_cd == 0.0
        assert truth.fpd_max == pytest.approx(0.0, abs=1e-8)
        assert reports["biased"].mmd_cd > 0.0

    def test_needs_two_shapes(self, rng, extractors):
        with pytest.raises(ValueError):
            metric_spectrum_experiment(procedural_meshes("box", 1, rng), extractors, 16, rng)

    def test_ratios(self):
        base = MetricReport(1.0, 2.0, 0.5, 0.1, 0.01, 60.0, 55.0)
        reports = {
            "uniform-resample": base,
            "fps": MetricReport(3.0, 2.0, 2.0, 0.1, 0.01, 60.0, 55.0),
            "biased": MetricReport(10.0, 4.0, 0.5, 0.2, 0.02, 40.0, 45.0),
        }
        ratios = spectrum_ratios(reports)
        assert ratios["fpd_mix_biased"] == 10.0 and ratios["fpd_max_biased"] == 2.0
        assert ratios["fgd_fps"] == 4.0 and ratios["fpd_mix_fps"] == 3.0
        assert ratios["cov_emd_drop"] == 20.0 and ratios["cov_cd_drop"] == 10.0
        zero = dict(reports, **{"uniform-resample": MetricReport(0.0, 2.0, 0.5, 0.1, 0.01, 60.0, 55.0)})
        assert spectrum_ratios(zero)["fpd_mix_biased"] == float("inf")

    def test_table2_writes_table(self, tmp_path, extractors):
        report = table2_experiment(extractors, "cone", count=3, num_points=24, seed=2, output_dir=str(tmp_path))
        assert os.path.exists(tmp_path / "table2.csv")
        assert set(report.results) == set(COPIES) | {"ratios"}


class TestAdversarial:
    def test_train_gan_writes_outputs_and_resumes(self, tmp_path, real):
        report, runlog, _ = train_gan(generator_spec(), disc(), real, desk_config(), seed=4,
                                      output_dir=str(tmp_path), num_samples=3)
        summary = report.results["fc-generator+pointnet-max"]
        assert summary["iterations"] == len(runlog) == 3
        assert summary["critic_steps_per_update"] == [2]
        assert sorted(os.listdir(tmp_path / "samples")) == ["manifest.json"] + [f"sample-{i:05d}.xyz" for i in range(3)]
        assert os.path.isdir(tmp_path / "checkpoints" / "epoch-00002")

        _, longer, _ = train_gan(generator_spec(), disc(), real, desk_config(epochs=3), seed=4,
                                 output_dir=str(tmp_path), resume=True)
        assert longer.to_frame().iloc[:3].equals(runlog.to_frame())
        assert len(longer) > len(runlog)

    def test_train_gan_checks_shapes(self, real):
        wrong = NetworkSpec("fc-generator", width=0.03, latent_dim=LATENT, num_points=NUM_POINTS + 1)
        with pytest.raises(ValueError, match="points"):
            train_gan(wrong, disc(), real, desk_config(), seed=0)
        with pytest.raises(ValueError, match="latent"):
            train_gan(generator_spec(), disc(), real, desk_config(latent_dim=LATENT + 1), seed=0)

    def test_no_generator_snapshots(self, tmp_path, real):
        report, runlog, clouds = no_generator_train(disc("pointnet-avg"), real, 4, desk_config(snapshot_every=1),
                                                    seed=1, output_dir=str(tmp_path), snapshot_clouds=2)
        assert clouds.shape == (4, NUM_POINTS, 3)
        assert len(runlog) > 0
        assert sorted(os.listdir(tmp_path / "snapshots")) == ["epoch-00000", "epoch-00001", "epoch-00002"]
        assert sorted(os.listdir(tmp_path / "snapshots" / "epoch-00002")) == ["cloud-000.ply", "cloud-001.ply"]
        assert len(load_samples(report.artifacts["clouds"])) == 4

    def test_nogen_experiment(self, tmp_path):
        report = nogen_experiment([disc("pointnet-max"), disc("pointnet-mix")], desk_config(epochs=1), "box", count=4,
                                  num_points=NUM_POINTS, num_clouds=4, seed=2, output_dir=str(tmp_path))
        assert {"pointnet-max", "pointnet-mix"} <= set(report.results)
        assert report.results["pointnet-max"]["density_cv"] >= 0.0
        assert os.path.exists(report.artifacts["wasserstein_plot"])

    def test_gan_experiment_with_metrics(self, tmp_path, extractors):
        report = gan_experiment(generator_spec(), [disc()], desk_config(epochs=1), "box", count=4, num_samples=4,
                                seed=2, extractors=extractors, output_dir=str(tmp_path))
        metrics = report.results["fc-generator+pointnet-max"]["metrics"]
        assert 0.0 <= metrics["COV-C"] <= 100.0
        assert os.path.exists(tmp_path / "metrics.csv")

    def test_real_data_from_directory(self, tmp_path, rng):
        clouds = rng.random((3, NUM_POINTS, 3))
        write_cloud_dir(str(tmp_path), clouds, ["x", "y", "z"], labels=[4, 4, 4])
        data = real_data("chair", 10, NUM_POINTS, 0, str(tmp_path))
        assert np.array_equal(data.clouds, clouds)
        assert (data.labels == REAL).all() and data.mesh_ids == ["x", "y", "z"]
        with pytest.raises(ValueError, match="needs 16"):
            real_data("chair", 10, 16, 0, str(tmp_path))

    def test_real_data_is_seeded(self):
        assert np.array_equal(real_data("lamp", 2, 16, 9).clouds, real_data("lamp", 2, 16, 9).clouds)


class TestEvaluation:
    def test_evaluate_run_truncates_samples(self, tmp_path, rng, extractors):
        ref = rng.random((4, 16, 3)) - 0.5
        write_cloud_dir(str(tmp_path), np.concatenate([ref, ref + 1.0]), [f"s{i}" for i in range(8)])
        report = evaluate_run(str(tmp_path), ref, extractors, num_samples=4)
        assert report.cov_cd == 100.0 and report.mmd_cd == 0.0

    def test_stability_uses_the_same_streams_per_checkpoint(self, tmp_path, rng, extractors):
        blob = init_weights(generator_spec(), rng)
        checkpoints = []
        for name in ("epoch-00004", "epoch-00006"):
            os.makedirs(tmp_path / name)
            save_weights(blob, str(tmp_path / name / "generator.weights"))
            checkpoints.append(str(tmp_path / name))
        report = stability_experiment(checkpoints, rng.random((8, NUM_POINTS, 3)) - 0.5, extractors["max"],
                                      num_sets=2, num_samples=6, output_dir=str(tmp_path / "out"))
        values = report.results["fpd_max"]
        assert values["epoch-00004"] == values["epoch-00006"]
        assert values["epoch-00004"][0] != values["epoch-00004"][1]
        assert report.results["relative_mean_diff"] == 0.0
        assert os.path.exists(report.artifacts["stability"])

    def test_stability_needs_two_sets(self, extractors):
        with pytest.raises(ValueError, match="at least 2"):
            stability_experiment([], np.zeros((2, 4, 3)), extractors["max"], num_sets=1)


class TestReport:
    def test_write_and_read(self, tmp_path):
        report = ExperimentReport("table1", 7, {"epochs": 3}, {"pointnet-max": {"test_accuracy": np.float64(0.5)}})
        path = report.write(str(tmp_path / "out" / "report.json"))
        back = ExperimentReport.read(path)
        assert back.results == {"pointnet-max": {"test_accuracy": 0.5}}
        assert back.artifacts["report"] == path

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ExperimentReport("table3", 0)
