"""HTTP session service: dataset registry, training jobs, live dual analysis.

The service owns persistence. Datasets are registered by manifest path and
keyed by a content fingerprint, so re-uploading identical files yields the
same id. Training runs as a background job; the finished session lives under
DATA_DIR/sessions/<id>/ as model checkpoints plus the dynamic session state,
all written atomically (write to a temp file, then rename). Reloading the
service from the same directory reproduces embeddings bit-identically.

Concurrency: requests across sessions are independent; within one session
modifications are single-writer (a busy writer gate returns 409, never
queues) and carry a client event id for at-most-once application. Replayed
event ids return the stored response verbatim.
"""

import hashlib
import json
import os
import pickle
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException

from .genomics import (
    genotype_boxplot_data,
    homozygous_alleles,
    load_dataset,
    train_trait_predictor,
)
from .metrics import continuity, trustworthiness
from .projection import ProjectionModel, TrainConfig, train_projection
from .recommend import DEFAULT_MAX_POOL, RecommendationConfig, recommend
from .session import (
    DualSession,
    ModificationEvent,
    dataset_fingerprint,
    display_weights,
)

JOB_STATES = ("queued", "running", "done", "failed")


def _now():
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _atomic_bytes(path, data):
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def _atomic_json(path, obj):
    _atomic_bytes(path, (json.dumps(obj, indent=2) + "\n").encode())


def _atomic_npz(path, **arrays):
    # np.savez on a path would append ".npz" to the temp name; write a buffer.
    import io

    buf = io.BytesIO()
    np.savez(buf, **arrays)
    _atomic_bytes(path, buf.getvalue())


def genomic_fingerprint(ds):
    """Content hash of a genomic dataset: genotypes, traits, lines, gene map."""
    h = hashlib.sha256()
    h.update(dataset_fingerprint(ds.genotypes.values.astype(np.float64)).encode())
    h.update(dataset_fingerprint(ds.traits.values).encode())
    h.update("|".join(ds.traits.names).encode())
    h.update("|".join(ds.genotypes.gene_labels).encode())
    for line in [ds.reference] + list(ds.parents):
        h.update(line.id.encode())
        h.update("".join(line.calls).encode())
    return h.hexdigest()


def model_checksum(model):
    """Deterministic hash of a model's parameters and stored tables.

    Hashes array contents rather than the checkpoint file: the npz container
    embeds write timestamps, so file bytes differ across runs even when the
    trained parameters are identical.
    """
    h = hashlib.sha256()
    state = model.state_dict()
    for key in sorted(state):
        arr = np.ascontiguousarray(state[key])
        h.update(key.encode())
        h.update(str(arr.dtype).encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


class SessionHandle:
    """One stored session: record metadata plus lazily loaded live objects."""

    def __init__(self, record, directory):
        self.record = record
        self.dir = Path(directory)
        self.session = None
        self.predictor = None
        self.gate = threading.Lock()  # single writer per session
        self.events = {}  # event id -> stored modify response
        self.recommended = []
        self.cultivated = []
        self.parent_points = None  # cached 1-D ordering of parent lines

    @property
    def loaded(self):
        return self.session is not None


class ServiceState:
    """Registries, job runner, and persistence root shared by all endpoints."""

    def __init__(self, data_dir=None, max_pool=None):
        self.data_dir = Path(data_dir or os.environ.get("DATA_DIR", "dualproj-data"))
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.max_pool = int(max_pool or os.environ.get("MAX_POOL", DEFAULT_MAX_POOL))
        self.registry_path = self.data_dir / "datasets.json"
        self.datasets = {}
        if self.registry_path.exists():
            self.datasets = json.loads(self.registry_path.read_text())
        self._dataset_cache = {}
        self.sessions = {}
        self.jobs = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=1)
        self._scan_sessions()

    # ---- datasets ------------------------------------------------------------------

    def register_dataset(self, manifest_path):
        try:
            ds = load_dataset(manifest_path)
        except (ValueError, KeyError, FileNotFoundError, OSError) as e:
            raise HTTPException(400, f"dataset rejected: {e}")
        fingerprint = genomic_fingerprint(ds)
        dataset_id = fingerprint[:12]
        with self.lock:
            self.datasets[dataset_id] = {
                "id": dataset_id,
                "fingerprint": fingerprint,
                "manifest_path": str(Path(manifest_path).resolve()),
                "name": ds.name,
                "n_hybrids": len(ds.genotypes.hybrids),
                "n_genes": len(ds.genotypes.genes),
                "traits": list(ds.traits.names),
            }
            _atomic_json(self.registry_path, self.datasets)
            self._dataset_cache[dataset_id] = ds
        return self.datasets[dataset_id]

    def dataset(self, dataset_id):
        if dataset_id not in self.datasets:
            raise HTTPException(404, f"unknown dataset {dataset_id!r}")
        if dataset_id not in self._dataset_cache:
            entry = self.datasets[dataset_id]
            try:
                ds = load_dataset(entry["manifest_path"])
            except (ValueError, KeyError, FileNotFoundError, OSError) as e:
                raise HTTPException(404, f"dataset files unavailable: {e}")
            if genomic_fingerprint(ds) != entry["fingerprint"]:
                raise HTTPException(409, "dataset content changed since registration")
            self._dataset_cache[dataset_id] = ds
        return self._dataset_cache[dataset_id]

    # ---- sessions ------------------------------------------------------------------

    def _scan_sessions(self):
        for record_path in sorted(self.data_dir.glob("sessions/*/record.json")):
            record = json.loads(record_path.read_text())
            handle = SessionHandle(record, record_path.parent)
            self.sessions[record["session_id"]] = handle

    def handle(self, session_id):
        handle = self.sessions.get(session_id)
        if handle is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        if not handle.loaded:
            self._load_session(handle)
        return handle

    def _load_session(self, handle):
        record = handle.record
        ds = self.dataset(record["dataset_id"])
        if genomic_fingerprint(ds) != record["fingerprint"]:
            raise HTTPException(409, "dataset no longer matches this session")
        rows = ProjectionModel.load(handle.dir / "rows.npz")
        cols = ProjectionModel.load(handle.dir / "cols.npz")
        with open(handle.dir / "predictor.pkl", "rb") as f:
            handle.predictor = pickle.load(f)
        X = ds.genotypes.values.astype(np.float64)
        session = DualSession(X, rows, cols)
        dynamic = json.loads((handle.dir / "session.json").read_text())
        with np.load(handle.dir / "state.npz") as st:
            session.restore_state(
                (
                    st["X_cur"],
                    st["s_base"],
                    st["s_off"],
                    st["g_base"],
                    st["g_off"],
                    st["w_genes"],
                    st["w_hybrids"],
                    [ModificationEvent.from_dict(d) for d in dynamic["history"]],
                )
            )
        handle.session = session
        handle.events = dynamic.get("events", {})
        handle.recommended = dynamic.get("recommended", [])
        handle.cultivated = dynamic.get("cultivated", [])

    def persist(self, handle):
        s = handle.session
        with s.lock:
            x, s_base, s_off, g_base, g_off, w_g, w_h, history = s.checkpoint_state()
        _atomic_npz(
            handle.dir / "state.npz",
            X_cur=x, s_base=s_base, s_off=s_off, g_base=g_base, g_off=g_off,
            w_genes=w_g, w_hybrids=w_h,
        )
        _atomic_json(
            handle.dir / "session.json",
            {
                "history": [e.to_dict() for e in history],
                "events": handle.events,
                "recommended": handle.recommended,
                "cultivated": handle.cultivated,
            },
        )
        handle.record["modified"] = _now()
        _atomic_json(handle.dir / "record.json", handle.record)

    # ---- training jobs ---------------------------------------------------------------

    def submit_training(self, dataset_id, rows_cfg, cols_cfg, predictor_kwargs):
        if dataset_id not in self.datasets:
            raise HTTPException(404, f"unknown dataset {dataset_id!r}")
        with self.lock:
            for job in self.jobs.values():
                if job["dataset_id"] == dataset_id and job["status"] in ("queued", "running"):
                    raise HTTPException(409, f"training already running for dataset {dataset_id!r}")
            job_id = uuid.uuid4().hex[:12]
            session_id = f"s{job_id}"
            self.jobs[job_id] = {
                "id": job_id,
                "dataset_id": dataset_id,
                "session_id": session_id,
                "status": "queued",
                "error": None,
                "result": None,
            }
        self.executor.submit(
            self._run_training, job_id, dataset_id, session_id,
            rows_cfg, cols_cfg, predictor_kwargs,
        )
        return self.jobs[job_id]

    def _run_training(self, job_id, dataset_id, session_id, rows_cfg, cols_cfg, predictor_kwargs):
        job = self.jobs[job_id]
        job["status"] = "running"
        try:
            ds = self.dataset(dataset_id)
            X = ds.genotypes.values.astype(np.float64)
            model_rows, _ = train_projection(X, rows_cfg)
            model_cols, _ = train_projection(X.T, cols_cfg)
            predictor = train_trait_predictor(ds.genotypes, ds.traits, **predictor_kwargs)
            session = DualSession(X, model_rows, model_cols)

            metrics = {}
            for side, data, emb in (("rows", X, session.S), ("cols", X.T, session.G)):
                # Rank metrics need k < n/2; report k=30 whenever the side allows it.
                k = max(1, min(30, data.shape[0] // 2 - 1))
                metrics[side] = {
                    "k": k,
                    "T": float(trustworthiness(data, emb, k)),
                    "C": float(continuity(data, emb, k)),
                }

            sdir = self.data_dir / "sessions" / session_id
            sdir.mkdir(parents=True, exist_ok=True)
            for model, name in ((model_rows, "rows.npz"), (model_cols, "cols.npz")):
                tmp = sdir / (name + ".tmp")
                model.save(tmp)
                os.replace(tmp, sdir / name)
            _atomic_bytes(sdir / "predictor.pkl", pickle.dumps(predictor))

            record = {
                "session_id": session_id,
                "dataset_id": dataset_id,
                "fingerprint": self.datasets[dataset_id]["fingerprint"],
                "matrix_fingerprint": dataset_fingerprint(X),
                "created": _now(),
                "modified": _now(),
                "checkpoints": {
                    "rows": "rows.npz",
                    "cols": "cols.npz",
                    "predictor": "predictor.pkl",
                    "state": "state.npz",
                },
                "checksums": {
                    "rows": model_checksum(model_rows),
                    "cols": model_checksum(model_cols),
                },
                "metrics": metrics,
                "train_config": {"rows": asdict(rows_cfg), "cols": asdict(cols_cfg)},
            }
            handle = SessionHandle(record, sdir)
            handle.session = session
            handle.predictor = predictor
            self.persist(handle)
            with self.lock:
                self.sessions[session_id] = handle
            job["result"] = {
                "session_id": session_id,
                "metrics": metrics,
                "checksums": record["checksums"],
            }
            job["status"] = "done"
        except Exception as e:  # surfaced to the poller, not the server log
            job["error"] = f"{type(e).__name__}: {e}"
            job["status"] = "failed"


# ---- response builders -----------------------------------------------------------


def _embedding_points(state, handle, side):
    ds = state.dataset(handle.record["dataset_id"])
    s = handle.session
    points = []
    if side == "rows":
        P, w = s.S, s.w_hybrids
        dw = display_weights(w)
        names = ds.traits.names
        for i, hid in enumerate(ds.genotypes.hybrids):
            points.append(
                {
                    "id": hid,
                    "x": float(P[i, 0]),
                    "y": float(P[i, 1]),
                    "weight": float(w[i]),
                    "display_weight": float(dw[i]),
                    "traits": {n: float(ds.traits.values[i, j]) for j, n in enumerate(names)},
                    "recommended": False,
                }
            )
        for rec in handle.recommended:
            points.append(
                {
                    "id": f"rec:{rec['paternal']}x{rec['maternal']}",
                    "x": rec["x"],
                    "y": rec["y"],
                    "weight": 1.0,
                    "display_weight": 1.0,
                    "traits": rec["predicted_traits"],
                    "recommended": True,
                }
            )
    else:
        P, w = s.G, s.w_genes
        dw = display_weights(w)
        for j, gene in enumerate(ds.genotypes.genes):
            points.append(
                {
                    "id": gene.label,
                    "x": float(P[j, 0]),
                    "y": float(P[j, 1]),
                    "weight": float(w[j]),
                    "display_weight": float(dw[j]),
                    "chromosome": gene.chromosome,
                    "position": gene.position,
                    "recommended": False,
                }
            )
    return points


def _parent_line_points(handle, ds):
    """1-D layout of the parent pool for the lines view, cached per session.

    Parents are embedded to one dimension from their encoded genotypes; the
    client orders each column by the served coordinate.
    """
    if handle.parent_points is not None:
        return handle.parent_points
    ref = homozygous_alleles(ds.reference)
    M = np.stack([
        (homozygous_alleles(line) != ref).astype(np.float64) * 2.0 for line in ds.parents
    ])
    n = M.shape[0]
    if n >= 5:
        from sklearn.manifold import TSNE

        perplexity = max(2.0, min(30.0, (n - 1) / 3.0))
        coords = TSNE(
            n_components=1, perplexity=perplexity, random_state=0, init="pca"
        ).fit_transform(M)[:, 0]
    else:
        # Too few points for a neighbor embedding; first principal coordinate.
        centered = M - M.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        coords = centered @ vt[0]
    order = np.argsort(np.argsort(coords))
    handle.parent_points = [
        {"id": line.id, "t1d": float(coords[i]), "order": int(order[i])}
        for i, line in enumerate(ds.parents)
    ]
    return handle.parent_points


# ---- app factory -------------------------------------------------------------------


def create_app(data_dir=None, max_pool=None):
    state = ServiceState(data_dir=data_dir, max_pool=max_pool)
    app = FastAPI(title="dualproj service")
    app.state.service = state

    @app.post("/datasets")
    def register_dataset(body: dict = Body(...)):
        manifest = body.get("manifest_path")
        if not manifest:
            raise HTTPException(422, "manifest_path is required")
        entry = state.register_dataset(manifest)
        return {
            "id": entry["id"],
            "fingerprint": entry["fingerprint"],
            "name": entry["name"],
            "n_hybrids": entry["n_hybrids"],
            "n_genes": entry["n_genes"],
            "traits": entry["traits"],
        }

    @app.post("/sessions")
    def start_session(body: dict = Body(...)):
        dataset_id = body.get("dataset_id")
        if not dataset_id:
            raise HTTPException(422, "dataset_id is required")
        try:
            rows_cfg = TrainConfig(**body.get("rows", {}))
            cols_cfg = TrainConfig(**body.get("cols", {}))
        except TypeError as e:
            raise HTTPException(422, f"bad train config: {e}")
        predictor_kwargs = dict(body.get("predictor", {}))
        if not set(predictor_kwargs) <= {"pca_dims", "seed"}:
            raise HTTPException(422, "predictor config accepts only pca_dims and seed")
        job = state.submit_training(dataset_id, rows_cfg, cols_cfg, predictor_kwargs)
        return {"job_id": job["id"], "session_id": job["session_id"]}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id!r}")
        return job

    @app.get("/sessions/{session_id}/embedding")
    def embedding(session_id: str, side: str = "rows"):
        if side not in ("rows", "cols"):
            raise HTTPException(422, "side must be 'rows' or 'cols'")
        handle = state.handle(session_id)
        return {"side": side, "points": _embedding_points(state, handle, side)}

    @app.post("/sessions/{session_id}/modify")
    def modify(session_id: str, body: dict = Body(...)):
        handle = state.handle(session_id)
        event_id = body.get("event_id")
        if not event_id or not isinstance(event_id, str):
            raise HTTPException(422, "event_id is required for at-most-once application")
        if not handle.gate.acquire(blocking=False):
            raise HTTPException(409, "another modification is in progress for this session")
        try:
            if event_id in handle.events:
                return handle.events[event_id]
            fields = {
                k: body[k]
                for k in ("side", "indices", "kind", "delta", "factor", "center")
                if k in body
            }
            try:
                event = ModificationEvent.from_dict(fields)
            except (KeyError, TypeError, ValueError) as e:
                raise HTTPException(422, f"bad modification event: {e}")
            t0 = time.perf_counter()
            try:
                handle.session.apply_modification(event)
            except IndexError as e:
                raise HTTPException(422, str(e))
            elapsed_ms = (time.perf_counter() - t0) * 1000.0
            response = {
                "event_id": event_id,
                "elapsed_ms": elapsed_ms,
                "rows": _embedding_points(state, handle, "rows"),
                "cols": _embedding_points(state, handle, "cols"),
            }
            handle.events[event_id] = response
            state.persist(handle)
            return response
        finally:
            handle.gate.release()

    @app.post("/sessions/{session_id}/recommend")
    def recommend_crosses(session_id: str, body: dict = Body(...)):
        handle = state.handle(session_id)
        ds = state.dataset(handle.record["dataset_id"])
        if "K" not in body:
            raise HTTPException(422, "K is required")
        by_id = {line.id: line for line in ds.parents}

        def lines_for(key):
            ids = body.get(key)
            if ids is None:
                return list(ds.parents)
            missing = [i for i in ids if i not in by_id]
            if missing:
                raise HTTPException(422, f"unknown parent lines: {missing}")
            return [by_id[i] for i in ids]

        R, T = lines_for("paternal"), lines_for("maternal")
        try:
            config = RecommendationConfig(
                K=body["K"],
                gamma=body.get("gamma"),
                epsilon=body.get("epsilon"),
                beta=body.get("beta"),
                score_spec=body.get("score_spec", "normalized_sum"),
                cultivated=[tuple(p) for p in body.get("cultivated", [])],
            )
        except (TypeError, ValueError) as e:
            raise HTTPException(422, f"bad recommendation config: {e}")
        pool, result = recommend(
            R, T, config, handle.predictor, ds.reference,
            iters=int(body.get("iters", 500)), max_pool=state.max_pool,
        )
        by_pair = {(c.paternal, c.maternal): c for c in pool.candidates}
        names = handle.predictor.trait_names
        recommended = []
        for entry in result["selected"]:
            cand = by_pair[(entry["paternal"], entry["maternal"])]
            xy = handle.session.model_rows.project(
                cand.genotype[None, :].astype(np.float64)
            )[0]
            recommended.append(
                {
                    **entry,
                    "predicted_traits": dict(zip(names, entry["predicted_traits"])),
                    "x": float(xy[0]),
                    "y": float(xy[1]),
                }
            )
        handle.recommended = recommended
        handle.cultivated = sorted(map(list, config.cultivated))
        state.persist(handle)
        return {**result, "selected": recommended, "pool_size": len(pool)}

    @app.get("/sessions/{session_id}/gene/{gene}/boxplot")
    def gene_boxplot(session_id: str, gene: str, trait: str):
        handle = state.handle(session_id)
        ds = state.dataset(handle.record["dataset_id"])
        try:
            stats = genotype_boxplot_data(ds.genotypes, ds.traits, gene, trait)
        except (KeyError, ValueError) as e:
            raise HTTPException(404, str(e))
        return {"gene": gene, "trait": trait, "groups": {str(k): v for k, v in stats.items()}}

    @app.get("/sessions/{session_id}/lines")
    def parent_lines(session_id: str):
        handle = state.handle(session_id)
        ds = state.dataset(handle.record["dataset_id"])
        links = [
            {"paternal": p, "maternal": m, "kind": "cultivated"}
            for p, m in handle.cultivated
        ]
        links += [
            {
                "paternal": rec["paternal"],
                "maternal": rec["maternal"],
                "kind": "recommended",
                "score": rec["score"],
                "predicted_traits": rec["predicted_traits"],
            }
            for rec in handle.recommended
        ]
        return {"parents": _parent_line_points(handle, ds), "links": links}

    @app.get("/sessions/{session_id}/snapshot")
    def snapshot(session_id: str):
        handle = state.handle(session_id)
        return {
            "session_id": session_id,
            "dataset_id": handle.record["dataset_id"],
            "created": handle.record["created"],
            "modified": handle.record["modified"],
            "metrics": handle.record["metrics"],
            "recommended": handle.recommended,
            **handle.session.snapshot(),
        }

    @app.post("/sessions/{session_id}/reset")
    def reset(session_id: str):
        handle = state.handle(session_id)
        if not handle.gate.acquire(blocking=False):
            raise HTTPException(409, "another modification is in progress for this session")
        try:
            handle.session.reset()
            handle.events = {}
            handle.recommended = []
            handle.cultivated = []
            state.persist(handle)
        finally:
            handle.gate.release()
        return {
            "session_id": session_id,
            "rows": _embedding_points(state, handle, "rows"),
            "cols": _embedding_points(state, handle, "cols"),
        }

    return app
