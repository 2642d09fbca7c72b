"""End-to-end command-line runs: simulate -> depth -> eval, plus the
manifest replay and failure exit codes."""

import json

import numpy as np
import pytest

from evdepth.cli import main
from evdepth.imgio import read_pfm
from evdepth.motion import CameraIntrinsics, VelocitySample, save_camera, save_track
from evdepth.synth import SceneSpec, save_scene

FAST = ["--dmin", "2", "--dmax", "50", "--num-hypotheses", "16",
        "--scales", "1", "--threads", "1",
        "--fcd-weights", "1,0,1,0,0,0"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    """A simulated plane scene with its input configs and event stream."""
    root = tmp_path_factory.mktemp("dataset")
    save_scene(root / "scene.json",
               SceneSpec(kind="plane", depths=(10.0,), edge_spacing=10))
    save_camera(root / "camera.json",
                CameraIntrinsics(f=200.0, cu=32.0, cv=32.0, width=64, height=64))
    save_track(root / "track.txt",
               (VelocitySample(t=0.0, linear=(1.0, 0.0, 0.0),
                               angular=(0.0, 0.0, 0.0)),))
    rc = main(["simulate", "--scene", str(root / "scene.json"),
               "--camera", str(root / "camera.json"),
               "--track", str(root / "track.txt"),
               "--out", str(root / "sim"),
               "--events-per-edge", "10", "--seed", "1"])
    assert rc == 0
    return root


def run_depth(dataset, out, extra=()):
    return main(["depth",
                 "--events", str(dataset / "sim" / "events.txt"),
                 "--camera", str(dataset / "camera.json"),
                 "--track", str(dataset / "track.txt"),
                 "--out", str(out), *FAST, *extra])


class TestSimulate:
    def test_outputs_written(self, dataset):
        sim = dataset / "sim"
        for name in ("events.txt", "camera.json", "track.txt", "scene.json",
                     "truth.pfm", "manifest.json"):
            assert (sim / name).is_file()
        truth = read_pfm(sim / "truth.pfm")
        assert truth.shape == (64, 64)
        assert (truth == 10.0).all()

    def test_missing_scene_file_is_config_error(self, dataset, tmp_path):
        rc = main(["simulate", "--scene", str(tmp_path / "absent.json"),
                   "--camera", str(dataset / "camera.json"),
                   "--track", str(dataset / "track.txt"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_missing_required_flag_is_config_error(self, dataset, tmp_path):
        rc = main(["simulate", "--scene", str(dataset / "scene.json"),
                   "--camera", str(dataset / "camera.json"),
                   "--track", str(dataset / "track.txt")])
        assert rc == 2

    def test_binary_format(self, dataset, tmp_path):
        rc = main(["simulate", "--scene", str(dataset / "scene.json"),
                   "--camera", str(dataset / "camera.json"),
                   "--track", str(dataset / "track.txt"),
                   "--out", str(tmp_path / "simbin"),
                   "--events-per-edge", "3", "--format", "binary"])
        assert rc == 0
        assert (tmp_path / "simbin" / "events.bin").is_file()


class TestDepth:
    def test_round_trip_and_eval(self, dataset, tmp_path):
        out = tmp_path / "depth"
        assert run_depth(dataset, out) == 0
        for name in ("depth_0000.pfm", "mask_0000.pgm",
                     "confidence_0000.pfm", "diag_0000.json", "manifest.json"):
            assert (out / name).is_file()

        depth = read_pfm(out / "depth_0000.pfm")
        valid = depth > 0
        assert valid.any()
        # grade only the collapse columns (the texture edges at 5, 15, ...);
        # pixels between edges carry no signal and arbitrary depth
        on_edge = np.zeros(64, dtype=bool)
        on_edge[5::10] = True
        sel = valid & on_edge[None, :]
        assert sel.any()
        assert np.median(np.abs(depth[sel] - 10.0)) < 2.0

        rc = main(["eval", "--pred", str(out),
                   "--truth", str(dataset / "sim" / "truth.pfm"),
                   "--out", str(tmp_path / "eval")])
        assert rc == 0
        with open(tmp_path / "eval" / "report_aggregate.json") as fh:
            report = json.load(fh)
        assert report["n_eval"] > 0
        assert np.isfinite(report["abs_rel"])

    def test_diagnostics_content(self, dataset, tmp_path):
        out = tmp_path / "depth"
        assert run_depth(dataset, out) == 0
        with open(out / "diag_0000.json") as fh:
            diag = json.load(fh)
        assert diag["n_events"] > 0
        assert len(diag["hypotheses"]) == 16
        assert len(diag["iwe_mass"]) == 16
        assert diag["score_curves"]

    def test_noise_runs_are_seed_deterministic(self, dataset, tmp_path):
        a = tmp_path / "noise_a"
        b = tmp_path / "noise_b"
        assert run_depth(dataset, a, ["--noise", "0.5", "--seed", "7"]) == 0
        assert run_depth(dataset, b, ["--noise", "0.5", "--seed", "7"]) == 0
        assert ((a / "depth_0000.pfm").read_bytes()
                == (b / "depth_0000.pfm").read_bytes())
        c = tmp_path / "noise_c"
        assert run_depth(dataset, c, ["--noise", "0.5", "--seed", "8"]) == 0
        assert ((a / "depth_0000.pfm").read_bytes()
                != (c / "depth_0000.pfm").read_bytes())

    def test_manifest_replays_bitwise(self, dataset, tmp_path):
        first = tmp_path / "first"
        assert run_depth(dataset, first, ["--window-radius", "3"]) == 0
        replay = tmp_path / "replay"
        rc = main(["depth", "--config", str(first / "manifest.json"),
                   "--out", str(replay)])
        assert rc == 0
        assert ((first / "depth_0000.pfm").read_bytes()
                == (replay / "depth_0000.pfm").read_bytes())

    def test_flags_override_config_file(self, dataset, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"num_hypotheses": 16, "scales": 1}))
        out = tmp_path / "override"
        rc = main(["depth", "--config", str(cfg),
                   "--events", str(dataset / "sim" / "events.txt"),
                   "--camera", str(dataset / "camera.json"),
                   "--track", str(dataset / "track.txt"),
                   "--out", str(out),
                   "--dmin", "2", "--dmax", "50", "--threads", "1",
                   "--num-hypotheses", "8"])
        assert rc == 0
        with open(out / "manifest.json") as fh:
            manifest = json.load(fh)
        assert manifest["config"]["num_hypotheses"] == 8   # flag wins
        assert manifest["config"]["scales"] == 1           # config applies

    def test_scalar_only_objective_is_config_error(self, dataset, tmp_path):
        rc = run_depth(dataset, tmp_path / "out", ["--objective", "sti"])
        assert rc == 2

    def test_bad_window_radius_is_config_error(self, dataset, tmp_path):
        rc = run_depth(dataset, tmp_path / "out", ["--window-radius", "4"])
        assert rc == 2

    def test_missing_events_is_config_error(self, dataset, tmp_path):
        rc = main(["depth", "--events", str(tmp_path / "no.txt"),
                   "--camera", str(dataset / "camera.json"),
                   "--track", str(dataset / "track.txt"),
                   "--out", str(tmp_path / "out"), *FAST])
        assert rc == 2


class TestEval:
    def test_unmatched_truth_directory_is_config_error(self, dataset, tmp_path):
        pred = tmp_path / "pred"
        pred.mkdir()
        (pred / "depth_0000.pfm").write_bytes(
            b"Pf\n2 2\n-1.0\n" + np.ones(4, dtype="<f4").tobytes())
        truth_dir = tmp_path / "truth"
        truth_dir.mkdir()
        rc = main(["eval", "--pred", str(pred), "--truth", str(truth_dir)])
        assert rc == 2

    def test_empty_prediction_dir_is_config_error(self, dataset, tmp_path):
        pred = tmp_path / "pred"
        pred.mkdir()
        rc = main(["eval", "--pred", str(pred),
                   "--truth", str(dataset / "sim" / "truth.pfm")])
        assert rc == 2


class TestAblate:
    def test_small_sweep(self, dataset, tmp_path):
        out = tmp_path / "ablate"
        rc = main(["ablate",
                   "--events", str(dataset / "sim" / "events.txt"),
                   "--camera", str(dataset / "camera.json"),
                   "--track", str(dataset / "track.txt"),
                   "--truth", str(dataset / "sim" / "truth.pfm"),
                   "--out", str(out), *FAST,
                   "--levels", "0.0,0.5", "--trials", "2", "--seed", "3"])
        assert rc == 0
        with open(out / "ablation.json") as fh:
            rows = json.load(fh)
        assert [row["level"] for row in rows] == [0.0, 0.5]
        assert rows[0]["trials"] == 1      # the clean level needs no repeats
        assert rows[1]["trials"] == 2
        assert (out / "ablation.txt").read_text().count("\n") == 3
