import numpy as np
import pytest
from fastapi.testclient import TestClient

from voxscore.dataset import DatasetManifest, atomic_write_bytes
from voxscore.mesh import write_stl
from voxscore.net import build_single_part_net, init_params, save_checkpoint
from voxscore.service import ServiceConfig, create_app, downsample_any
from voxscore.shapes import box_mesh, sphere_mesh

CUBE_STL = write_stl(box_mesh((1, 1, 1)), "binary")
AUTH = {"Authorization": "Bearer sesame"}


@pytest.fixture
def client(tmp_path):
    config = ServiceConfig(
        data_dir=tmp_path / "data",
        tokens={"sesame": "alice"},
        max_upload_bytes=100_000,
        default_resolution=16,
    )
    app = create_app(config)
    return TestClient(app)


def upload(client, payload=CUBE_STL, resolution=16):
    return client.post(
        "/api/models",
        files={"file": ("part.stl", payload)},
        data={"resolution": str(resolution)},
        headers=AUTH,
    )


class TestModels:
    def test_upload_idempotent(self, client):
        first = upload(client)
        assert first.status_code == 200
        again = upload(client)
        assert again.status_code == 200
        assert first.json()["model_id"] == again.json()["model_id"]
        listed = client.get("/api/models").json()["models"]
        assert len(listed) == 1
        assert listed[0]["resolution"] == 16

    def test_corrupt_file_400_with_position(self, client):
        resp = upload(client, b"solid nope\n facet broken")
        assert resp.status_code == 400
        assert "line" in resp.json()["detail"]

    def test_oversize_413(self, client):
        resp = upload(client, b"\0" * 200_000)
        assert resp.status_code == 413

    def test_unauthenticated_401(self, client):
        resp = client.post(
            "/api/models",
            files={"file": ("part.stl", CUBE_STL)},
            data={"resolution": "16"},
        )
        assert resp.status_code == 401
        resp = client.post(
            "/api/models",
            files={"file": ("part.stl", CUBE_STL)},
            data={"resolution": "16"},
            headers={"Authorization": "Bearer wrong"},
        )
        assert resp.status_code == 401

    def test_atomic_on_error(self, client, tmp_path):
        upload(client)
        manifest_file = tmp_path / "data" / "manifest.jsonl"
        before = manifest_file.read_bytes()
        assert upload(client, b"garbage not a mesh").status_code == 400
        assert manifest_file.read_bytes() == before


class TestVoxelPreview:
    def test_lod_pooling_covers_all_occupied(self, client, tmp_path):
        model_id = upload(client, write_stl(sphere_mesh(0.5, rings=10, segments=16), "binary")).json()["model_id"]
        native = client.get(f"/api/models/{model_id}/voxels", params={"lod": 16}).json()
        coarse = client.get(f"/api/models/{model_id}/voxels", params={"lod": 8}).json()
        assert native["dim"] == [16, 16, 16]
        assert coarse["dim"] == [8, 8, 8]
        assert coarse["occupied_count"] == len(coarse["cells"])
        parents = {tuple(c) for c in coarse["cells"]}
        for x, y, z in native["cells"]:
            assert (x // 2, y // 2, z // 2) in parents

    def test_lod_native_is_exact(self, client, tmp_path):
        model_id = upload(client).json()["model_id"]
        manifest = DatasetManifest.open(tmp_path / "data")
        grid = manifest.load_grid(model_id)
        payload = client.get(f"/api/models/{model_id}/voxels", params={"lod": 16}).json()
        got = {tuple(c) for c in payload["cells"]}
        want = {tuple(c) for c in np.argwhere(grid.occupancy).tolist()}
        assert got == want
        assert payload["occupied_count"] == grid.occupied_count()

    def test_unknown_model_404(self, client):
        assert client.get("/api/models/none/voxels").status_code == 404

    def test_downsample_any_unit(self):
        occ = np.zeros((4, 4, 4), dtype=bool)
        occ[3, 0, 1] = True
        out = downsample_any(occ, 2)
        assert out.shape == (2, 2, 2)
        assert out[1, 0, 0] and out.sum() == 1
        np.testing.assert_array_equal(downsample_any(occ, 4), occ)


class TestAnnotations:
    def test_post_annotation(self, client):
        model_id = upload(client).json()["model_id"]
        resp = client.post(
            "/api/annotations",
            json={"model_id": model_id, "question_id": "separability", "score": 7},
            headers=AUTH,
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["score"] == 7 and body["annotator"] == "alice"
        assert body["annotation_id"] == 1

    def test_out_of_range_422(self, client):
        model_id = upload(client).json()["model_id"]
        resp = client.post(
            "/api/annotations",
            json={"model_id": model_id, "question_id": "separability", "score": 12},
            headers=AUTH,
        )
        assert resp.status_code == 422

    def test_unknown_model_404(self, client):
        resp = client.post(
            "/api/annotations",
            json={"model_id": "nope", "question_id": "separability", "score": 3},
            headers=AUTH,
        )
        assert resp.status_code == 404


class TestAssess:
    def test_missing_checkpoint_409(self, client):
        model_id = upload(client).json()["model_id"]
        resp = client.post(
            "/api/assess", json={"model_id": model_id, "question_id": "separability"}
        )
        assert resp.status_code == 409

    def test_assess_deterministic_payload(self, client, tmp_path):
        model_id = upload(client).json()["model_id"]
        arch = build_single_part_net(16)
        params = init_params(arch, seed=2)
        atomic_write_bytes(
            tmp_path / "data" / "checkpoints" / "separability.ckpt",
            save_checkpoint(arch, params),
        )
        body = {"model_id": model_id, "question_id": "separability"}
        first = client.post("/api/assess", json=body)
        assert first.status_code == 200
        again = client.post("/api/assess", json=body)
        assert first.json() == again.json()
        payload = first.json()
        assert len(payload["curve"]) == 11
        assert all(0.0 < v < 1.0 for v in payload["curve"])
        assert payload["score"] == int(np.argmax(payload["curve"]))
        assert payload["peak_height"] == max(payload["curve"])

    def test_unknown_model_404(self, client):
        resp = client.post(
            "/api/assess", json={"model_id": "nope", "question_id": "separability"}
        )
        assert resp.status_code == 404


class TestQuestions:
    def test_default_catalog(self, client):
        body = client.get("/api/questions").json()
        ids = [q["id"] for q in body["questions"]]
        assert ids == ["separability", "gripping_surfaces", "self_centering"]
        assert client.get("/api/questions").json() == body  # stable

    def test_empty_catalog(self, tmp_path):
        config = ServiceConfig(data_dir=tmp_path / "d2", questions=[])
        app = create_app(config)
        assert TestClient(app).get("/api/questions").json() == {"questions": []}
