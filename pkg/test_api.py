import pytest
from fastapi.testclient import TestClient

from bridge_trunc import main as main_module
from bridge_trunc.core.log_manager import log_manager
from bridge_trunc.main import app

client = TestClient(app)

SMALL = {"seed": 42, "n": 40, "replicates": 400, "grid_m": 4, "z_threshold": 5.0}


def test_root():
    response = client.get("/")
    assert response.status_code == 200
    assert "running" in response.json()["message"]


def test_sample_dft():
    response = client.post("/sample", json={"ensemble": "dft", "n": 2, "seed": 0})
    assert response.status_code == 200
    body = response.json()
    assert body["success"] is True
    assert [(e["i"], e["j"]) for e in body["entries"]] == [(1, 1), (1, 2), (2, 1), (2, 2)]
    assert all(e["w"] == pytest.approx(0.5) for e in body["entries"])


def test_sample_permutation_lists_unit_entries():
    body = client.post("/sample", json={"ensemble": "permutation", "n": 6, "seed": 3}).json()
    assert len(body["entries"]) == 6
    assert sorted(e["j"] for e in body["entries"]) == [1, 2, 3, 4, 5, 6]


def test_sample_validation():
    assert client.post("/sample", json={"ensemble": "dft", "n": 0, "seed": 0}).status_code == 422
    assert client.post("/sample", json={"ensemble": "cauchy", "n": 3, "seed": 0}).status_code == 422


def test_presets_listing():
    presets = client.get("/presets").json()
    assert len(presets) == 12
    assert presets["thm-3.3-dft"]["ensemble"] == "dft"
    assert presets["sec-5.3-copula"]["mode"] == "QuenchedU"


def test_verify_unknown_preset():
    response = client.post("/verify", json={"preset": "nope", "overrides": {"seed": 1}})
    assert response.status_code == 404
    body = response.json()
    assert body["success"] is False
    assert body["error"] == "unknown preset"
    assert "thm-3.3-dft" in body["details"]


def test_verify_requires_seed():
    response = client.post("/verify", json={"preset": "thm-3.3-dft"})
    assert response.status_code == 422
    assert "seed" in response.json()["details"]


def test_verify_small_preset():
    response = client.post("/verify", json={"preset": "thm-3.3-dft", "overrides": SMALL})
    assert response.status_code == 200
    report = response.json()
    assert report["verdict"] is True
    assert report["kernel"] == "calWinf"


def test_probe():
    response = client.post("/probe", json={"probe": "conditional-variance", "n": [100], "seed": 6,
                                           "replicates": 2000})
    assert response.status_code == 200
    assert response.json()["rows"][0]["target"] == pytest.approx(12.5625)
    assert client.post("/probe", json={"probe": "fifth-moment", "seed": 1}).status_code == 422


def test_logs_roundtrip():
    client.post("/sample", json={"ensemble": "dft", "n": 3, "seed": 0})
    summary = client.get("/logs/summary").json()
    assert summary["detailed_logs_count"] >= 1
    assert client.get("/logs/export/json").status_code == 200
    assert "timestamp" in client.get("/logs/export/csv").text
    assert client.get("/logs/export/xml").status_code == 404
    assert client.delete("/logs").json() == {"success": True}
    assert log_manager.get_log_summary()["detailed_logs_count"] == 0


def test_verify_accepts_descriptive_alias():
    response = client.post("/verify", json={"preset": "dft-annealed", "overrides": SMALL})
    assert response.status_code == 200
    assert response.json()["config"]["statistic"] == "DftAnnealed"


def test_unexpected_failure_returns_error_body(monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("worker pool died")

    monkeypatch.setattr(main_module, "run_preset", broken)
    response = client.post("/verify", json={"preset": "thm-3.3-dft", "overrides": SMALL})
    assert response.status_code == 500
    assert response.json() == {"success": False, "error": "verification failed",
                               "details": "worker pool died"}
