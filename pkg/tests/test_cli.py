import json

import pytest

from voxscore.cli import main
from voxscore.mesh import write_stl
from voxscore.shapes import box_mesh
from voxscore.voxel import read_binvox

CUBE_STL = write_stl(box_mesh((1, 1, 1)), "binary")


@pytest.fixture
def cube_file(tmp_path):
    path = tmp_path / "cube.stl"
    path.write_bytes(CUBE_STL)
    return path


class TestVoxelize:
    def test_roundtrip(self, tmp_path, cube_file):
        out = tmp_path / "cube.binvox"
        code = main(["voxelize", "--in", str(cube_file), "--res", "32", "--out", str(out)])
        assert code == 0
        grid = read_binvox(out.read_bytes())
        assert grid.dim == (32, 32, 32)
        assert grid.occupied_count() > 0

    def test_missing_file(self, tmp_path, capsys):
        code = main(["voxelize", "--in", str(tmp_path / "nope.stl"), "--res", "16",
                     "--out", str(tmp_path / "o.binvox")])
        assert code == 1
        assert "no such file" in capsys.readouterr().err

    def test_resolution_below_minimum(self, tmp_path, cube_file, capsys):
        code = main(["voxelize", "--in", str(cube_file), "--res", "2",
                     "--out", str(tmp_path / "o.binvox")])
        assert code == 1
        assert "resolution" in capsys.readouterr().err

    def test_no_partial_output_on_failure(self, tmp_path, cube_file):
        out = tmp_path / "o.binvox"
        main(["voxelize", "--in", str(cube_file), "--res", "2", "--out", str(out)])
        assert not out.exists()


class TestAugment:
    def test_default_plan_writes_120(self, tmp_path, cube_file):
        vox = tmp_path / "cube.binvox"
        assert main(["voxelize", "--in", str(cube_file), "--res", "16", "--out", str(vox)]) == 0
        out_dir = tmp_path / "aug"
        assert main(["augment", "--in", str(vox), "--out", str(out_dir)]) == 0
        files = sorted(out_dir.glob("*.binvox"))
        assert len(files) == 120
        assert files[0].name == "cube_o00_s0.binvox"

    def test_identity_plan_reproduces_input(self, tmp_path, cube_file):
        vox = tmp_path / "cube.binvox"
        main(["voxelize", "--in", str(cube_file), "--res", "16", "--out", str(vox)])
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"orientations": [0], "scale_factors": [1.0]}))
        out_dir = tmp_path / "aug"
        assert main(["augment", "--in", str(vox), "--plan", str(plan), "--out", str(out_dir)]) == 0
        files = list(out_dir.glob("*.binvox"))
        assert len(files) == 1
        assert read_binvox(files[0].read_bytes()) == read_binvox(vox.read_bytes())

    def test_empty_plan_exits_1(self, tmp_path, cube_file, capsys):
        vox = tmp_path / "cube.binvox"
        main(["voxelize", "--in", str(cube_file), "--res", "16", "--out", str(vox)])
        plan = tmp_path / "plan.json"
        plan.write_text(json.dumps({"orientations": [], "scale_factors": []}))
        code = main(["augment", "--in", str(vox), "--plan", str(plan), "--out", str(tmp_path / "aug")])
        assert code == 1
        assert "non-empty" in capsys.readouterr().err


class TestDatasetFlow:
    def test_end_to_end(self, tmp_path, capsys):
        data = str(tmp_path / "data")
        assert main(["gen-shapes", "--data", data, "--count", "8", "--res", "16",
                     "--seed", "3"]) == 0
        assert json.loads(capsys.readouterr().out)["models"] == 8

        assert main(["split", "--data", data, "--eval-count", "2", "--seed", "1"]) == 0
        counts = json.loads(capsys.readouterr().out)
        assert counts == {"train": 6, "eval": 2}

        assert main(["train", "--data", data, "--question", "separability",
                     "--lr", "1e-4", "--epochs", "2", "--batch-size", "6",
                     "--seed", "5", "--res", "16", "--json"]) == 0
        lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
        assert sum(1 for l in lines if l["record"] == "epoch") == 2
        ckpt = next(l["path"] for l in lines if l["record"] == "checkpoint")

        assert main(["evaluate", "--data", data, "--question", "separability",
                     "--json"]) == 0
        out = capsys.readouterr().out
        header = json.loads(out.splitlines()[0])
        assert header["record"] == "evaluation" and header["models"] == 2

        mesh_path = tmp_path / "probe.stl"
        mesh_path.write_bytes(CUBE_STL)
        assert main(["assess", "--data", data, "--question", "separability",
                     "--in", str(mesh_path), "--json"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert 0 <= result["score"] <= 10
        assert len(result["curve"]) == 11

        # rerun with identical seed: byte-identical checkpoint
        from pathlib import Path

        first = Path(ckpt).read_bytes()
        assert main(["train", "--data", data, "--question", "separability",
                     "--lr", "1e-4", "--epochs", "2", "--batch-size", "6",
                     "--seed", "5", "--res", "16"]) == 0
        capsys.readouterr()
        assert Path(ckpt).read_bytes() == first

    def test_train_without_annotations(self, tmp_path, capsys):
        data = str(tmp_path / "data")
        assert main(["gen-shapes", "--data", data, "--count", "4", "--res", "16",
                     "--seed", "1", "--questions", "separability"]) == 0
        capsys.readouterr()
        code = main(["train", "--data", data, "--question", "self_centering",
                     "--epochs", "1"])
        assert code == 1
        assert "no annotated" in capsys.readouterr().err

    def test_annotate_and_ingest(self, tmp_path, cube_file, capsys):
        data = str(tmp_path / "data")
        assert main(["ingest", "--data", data, "--res", "16", str(cube_file)]) == 0
        model_id = json.loads(capsys.readouterr().out)["model_id"]
        assert main(["annotate", "--data", data, "--model", model_id,
                     "--question", "separability", "--score", "4"]) == 0
        assert json.loads(capsys.readouterr().out)["annotation_id"] == 1
        code = main(["annotate", "--data", data, "--model", model_id,
                     "--question", "separability", "--score", "11"])
        assert code == 1

    def test_evaluate_without_checkpoint(self, tmp_path, capsys):
        data = str(tmp_path / "data")
        main(["gen-shapes", "--data", data, "--count", "4", "--res", "16", "--seed", "2"])
        capsys.readouterr()
        code = main(["evaluate", "--data", data, "--question", "separability"])
        assert code == 1
        assert "no checkpoint" in capsys.readouterr().err
