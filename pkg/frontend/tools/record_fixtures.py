"""Record service responses into JSON fixtures for the UI tests.

Runs the real FastAPI app in-process against a small synthetic dataset and
captures one payload per endpoint, plus a replayed modify and a rejected one.
Regenerate with:  python3 tools/record_fixtures.py
"""
import json
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "src"))

from fastapi.testclient import TestClient

from dualproj.genomics import generate_synthetic_dataset, save_dataset
from dualproj.service import create_app

OUT = Path(__file__).resolve().parents[1] / "test" / "fixtures"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix="uifix-")
    ds = generate_synthetic_dataset(60, 24, 4, effect_size=1.5, seed=5, n_parents=6)
    manifest = save_dataset(ds, Path(tmp) / "dataset")
    app = create_app(data_dir=Path(tmp) / "state")
    client = TestClient(app)
    bundle = {}

    r = client.post("/datasets", json={"manifest_path": str(manifest)})
    r.raise_for_status()
    bundle["dataset"] = r.json()

    r = client.post(
        "/sessions",
        json={
            "dataset_id": bundle["dataset"]["id"],
            "rows": {"epochs": 12, "seed": 0},
            "cols": {"epochs": 12, "seed": 0},
            "predictor": {"pca_dims": 10, "seed": 0},
        },
    )
    r.raise_for_status()
    start = r.json()
    bundle["session_start"] = start
    sid = start["session_id"]

    for _ in range(600):
        job = client.get(f"/jobs/{start['job_id']}").json()
        if job["status"] in ("done", "failed"):
            break
        time.sleep(0.5)
    assert job["status"] == "done", job
    bundle["job"] = job

    bundle["embedding_rows"] = client.get(f"/sessions/{sid}/embedding", params={"side": "rows"}).json()
    bundle["embedding_cols"] = client.get(f"/sessions/{sid}/embedding", params={"side": "cols"}).json()

    # Pick three mutually close hybrids whose padded bounding box contains no
    # other point, so a rectangular lasso selects exactly these three. The
    # polygon is stored alongside the request the UI must reproduce.
    pts = bundle["embedding_rows"]["points"]
    xy = [(p["x"], p["y"]) for p in pts]
    chosen = polygon = None
    for i, (xi, yi) in enumerate(xy):
        near = sorted(range(len(xy)), key=lambda j: (xy[j][0] - xi) ** 2 + (xy[j][1] - yi) ** 2)
        trio = sorted(near[:3])
        xs = [xy[j][0] for j in trio]
        ys = [xy[j][1] for j in trio]
        pad = 0.02 * max(max(xs) - min(xs), max(ys) - min(ys), 1e-9) + 1e-4
        x0, x1, y0, y1 = min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad
        inside = [j for j, (x, y) in enumerate(xy) if x0 <= x <= x1 and y0 <= y <= y1]
        if sorted(inside) == trio:
            chosen = trio
            polygon = [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
            break
    assert chosen is not None, "no isolated 3-point cluster found"
    bundle["lasso_polygon"] = polygon

    move_req = {
        "event_id": "g-fixture-move-1",
        "side": "rows",
        "indices": chosen,
        "kind": "move",
        "delta": [0.35, -0.2],
    }
    r = client.post(f"/sessions/{sid}/modify", json=move_req)
    r.raise_for_status()
    bundle["modify_move_request"] = move_req
    bundle["modify_move_response"] = r.json()

    # Same event id again: the server must replay the stored response.
    r = client.post(f"/sessions/{sid}/modify", json=move_req)
    r.raise_for_status()
    bundle["modify_move_replay"] = r.json()

    scale_req = {
        "event_id": "g-fixture-scale-1",
        "side": "cols",
        "indices": [1, 4, 7],
        "kind": "scale",
        "factor": 1.6,
        "center": "centroid",
    }
    r = client.post(f"/sessions/{sid}/modify", json=scale_req)
    r.raise_for_status()
    bundle["modify_scale_request"] = scale_req
    bundle["modify_scale_response"] = r.json()

    # Drag out and drag back: the later view must restore to the pixel.
    out_req = {
        "event_id": "g-fixture-out-1",
        "side": "rows",
        "indices": chosen,
        "kind": "move",
        "delta": [0.8, 0.45],
    }
    back_req = {
        "event_id": "g-fixture-back-1",
        "side": "rows",
        "indices": chosen,
        "kind": "move",
        "delta": [-0.8, -0.45],
    }
    r = client.post(f"/sessions/{sid}/modify", json=out_req)
    r.raise_for_status()
    bundle["modify_out_request"] = out_req
    bundle["modify_out_response"] = r.json()
    r = client.post(f"/sessions/{sid}/modify", json=back_req)
    r.raise_for_status()
    bundle["modify_back_request"] = back_req
    bundle["modify_back_response"] = r.json()

    bad_req = {
        "event_id": "g-fixture-bad-1",
        "side": "rows",
        "indices": [0],
        "kind": "scale",
        "factor": 99.0,
    }
    r = client.post(f"/sessions/{sid}/modify", json=bad_req)
    assert r.status_code == 422, r.text
    bundle["modify_invalid"] = {"request": bad_req, "status": 422, "body": r.json()}

    gene = bundle["dataset_gene"] = bundle["embedding_cols"]["points"][0]["id"]
    trait = bundle["dataset"]["traits"][0]
    bundle["boxplot"] = client.get(
        f"/sessions/{sid}/gene/{gene}/boxplot", params={"trait": trait}
    ).json()

    # A gene where one genotype dose never occurs, for the count-0 label path.
    bundle["boxplot_empty_group"] = None
    for point in bundle["embedding_cols"]["points"]:
        bp = client.get(
            f"/sessions/{sid}/gene/{point['id']}/boxplot", params={"trait": trait}
        ).json()
        if any(g["count"] == 0 for g in bp["groups"].values()):
            bundle["boxplot_empty_group"] = bp
            break

    r = client.post(f"/sessions/{sid}/recommend", json={"K": 2, "beta": None, "iters": 150})
    r.raise_for_status()
    bundle["recommend"] = r.json()

    bundle["lines"] = client.get(f"/sessions/{sid}/lines").json()
    bundle["embedding_rows_with_recs"] = client.get(
        f"/sessions/{sid}/embedding", params={"side": "rows"}
    ).json()
    bundle["snapshot"] = client.get(f"/sessions/{sid}/snapshot").json()
    bundle["reset"] = client.post(f"/sessions/{sid}/reset").json()

    out = OUT / "service.json"
    out.write_text(json.dumps(bundle, indent=1, sort_keys=True))
    print(f"wrote {out} ({out.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
