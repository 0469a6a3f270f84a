"""Tests for experiment API endpoints."""

import json

import pytest
from fastapi.testclient import TestClient

from couette3d.core import get_settings
from couette3d.main import app


@pytest.fixture
def client(tmp_path, monkeypatch):
    """Create test client with a temporary output root."""
    monkeypatch.setenv("COUETTE3D_OUTPUT_DIR", str(tmp_path))
    get_settings.cache_clear()

    with TestClient(app) as test_client:
        yield test_client

    get_settings.cache_clear()


@pytest.fixture
def toy_payload():
    """Small toy sweep that runs in well under a second."""
    return {"kind": "toy", "etas": [25.0], "t_end": 2.0, "dt_out": 0.2}


class TestHealthEndpoint:
    def test_health_check(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        data = response.json()
        assert data["status"] == "healthy"
        assert "version" in data
        assert "uptime_seconds" in data


class TestRunEndpoint:
    def test_run_toy(self, client, tmp_path, toy_payload):
        response = client.post("/api/v1/experiments/run", json=toy_payload)
        assert response.status_code == 200
        data = response.json()
        assert data["kind"] == "toy"
        assert data["run_id"].startswith("toy_") and data["run_id"].endswith("_001")
        assert data["regime"] == "below-threshold"
        assert data["fits"]["K"] > 0
        names = {a["filename"] for a in data["artifacts"]}
        assert {"toy_sweep.csv", "toy_sweep.gp", "toy_trajectory.csv", "manifest.json"} <= names
        assert (tmp_path / data["run_id"] / "manifest.json").is_file()

    def test_rerun_gets_next_increment(self, client, toy_payload):
        first = client.post("/api/v1/experiments/run", json=toy_payload).json()
        second = client.post("/api/v1/experiments/run", json=toy_payload).json()
        assert first["parameter_hash"] == second["parameter_hash"]
        assert second["run_id"].endswith("_002")

    def test_output_dir_in_body(self, client, tmp_path, toy_payload):
        target = tmp_path / "elsewhere"
        response = client.post("/api/v1/experiments/run", json={**toy_payload, "output_dir": str(target)})
        assert response.status_code == 200
        assert (target / response.json()["run_id"]).is_dir()

    def test_invalid_config(self, client):
        response = client.post("/api/v1/experiments/run", json={"kind": "sim3d", "Nx": 7})
        assert response.status_code == 422

    def test_unknown_kind(self, client):
        response = client.post("/api/v1/experiments/run", json={"kind": "dns"})
        assert response.status_code == 422

    def test_numerical_failure(self, client, tmp_path):
        payload = {"kind": "sim3d", "Nx": 8, "Ny": 16, "Nz": 8, "eps": 1e3, "nu": 0.01, "t_end": 1.0, "dt_out": 0.5, "dt": 0.5}
        response = client.post("/api/v1/experiments/run", json=payload)
        assert response.status_code == 422
        assert response.json()["error"]["code"] == "CFL_VIOLATION"
        assert list(tmp_path.iterdir()) == []


class TestDownloadEndpoint:
    def test_download_artifacts(self, client, toy_payload):
        data = client.post("/api/v1/experiments/run", json=toy_payload).json()
        urls = {a["filename"]: a["file_url"] for a in data["artifacts"]}

        response = client.get(urls["toy_sweep.csv"])
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/csv")
        assert response.text.splitlines()[0].startswith("eta,k,t_start,t_end,K,growth")

        manifest = client.get(urls["manifest.json"])
        assert manifest.status_code == 200
        assert json.loads(manifest.text)["run_id"] == data["run_id"]

    def test_download_nonexistent_file(self, client):
        response = client.get("/api/v1/experiments/download/toy_0123456789ab_001/missing.csv")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "ARTIFACT_NOT_FOUND"

    def test_download_invalid_segment(self, client):
        response = client.get("/api/v1/experiments/download/toy~1/manifest.json")
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "INVALID_FILENAME"

    def test_download_path_traversal(self, client):
        response = client.get("/api/v1/experiments/download/toy_0123456789ab_001/..%2F..%2Fsecret.txt")
        assert response.status_code == 400

    def test_download_nested_path(self, client):
        response = client.get("/api/v1/experiments/download/a/b/manifest.json")
        assert response.status_code == 400
