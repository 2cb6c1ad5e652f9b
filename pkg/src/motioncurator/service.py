"""HTTP service for the label -> retrain -> review annotation loop.

One session serves one dataset, one checkpoint, and one ranking. Annotators
pull the ranked queue, submit per-sequence label intervals, trigger an
asynchronous annotator retrain (seconds, since the encoder is frozen), and
read back refreshed predictions for everything still unlabeled. The class
list can be swapped at runtime: the annotator and predictions are dropped,
labels are re-projected by class name, and the ranking and checkpoint stay.
"""

from __future__ import annotations

import io
import json
import threading
import time
import uuid
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from .annotate import AnnotatorConfig, FrameAnnotator, evaluate, predict_all, train_annotator
from .augment import AugmentationConfig
from .data import LabelMatrix, MotionDataset, label_matrix_to_json, save_labels
from .encoder import MotionEncoder
from .features import extract_features, frame_feature_map
from .ranking import Ranking


class LabelInterval(BaseModel):
    model_config = ConfigDict(populate_by_name=True)
    start_frame: int = Field(alias="start")
    end_frame: int = Field(alias="end")
    class_name: str = Field(alias="class")


class LabelRequest(BaseModel):
    id: str
    intervals: list[LabelInterval]


class ClassesRequest(BaseModel):
    class_names: list[str]


@dataclass
class RetrainJob:
    job_id: str
    state: str = "queued"  # queued | running | done | failed
    duration: float | None = None
    eval_on_labeled: dict | None = None
    error: str | None = None


@dataclass
class RetrainRecord:
    started_at: float
    duration: float
    micro_f1: float


class SessionState:
    """All mutable state of one annotation session.

    Readers may run concurrently; label writes and prediction swaps happen
    under one lock, and at most one retrain job runs at a time. A retrain
    works on a snapshot of the label store taken at job start.
    """

    def __init__(
        self,
        dataset: MotionDataset,
        encoder: MotionEncoder,
        aug: AugmentationConfig,
        ranking: Ranking,
        annotator_cfg: AnnotatorConfig | None = None,
        session_dir: str | Path | None = None,
        seed: int = 0,
    ):
        known = set(dataset.ids)
        missing = [i for i in ranking.order if i not in known]
        if missing:
            raise ValueError(f"ranking refers to unknown sequences: {missing[:5]}")
        self.dataset = dataset
        self.ranking = ranking
        self.annotator_cfg = annotator_cfg or AnnotatorConfig()
        self.seed = seed
        self.class_names = list(dataset.class_names)
        self.frame_features = frame_feature_map(extract_features(encoder, dataset, aug))
        self.labels: dict[str, LabelMatrix] = {}
        self.predictions: dict[str, LabelMatrix] = {}
        self.annotator: FrameAnnotator | None = None
        self.jobs: dict[str, RetrainJob] = {}
        self.history: list[RetrainRecord] = []
        self.lock = threading.RLock()
        self._retraining = False
        self.session_dir = Path(session_dir) if session_dir else None
        if self.session_dir:
            self._load_session_labels()

    def _load_session_labels(self):
        label_dir = self.session_dir / "labels"
        if not label_dir.is_dir():
            return
        for path in sorted(label_dir.glob("*.json")):
            seq_id = path.stem
            if seq_id not in set(self.dataset.ids):
                continue
            doc = json.loads(path.read_text())
            mat = np.asarray(doc["labels"], dtype=np.uint8)
            if mat.shape == (self.dataset.by_id(seq_id).num_frames, len(self.class_names)):
                self.labels[seq_id] = LabelMatrix(sequence_id=seq_id, labels=mat)

    # -- label handling -----------------------------------------------------

    def put_labels(self, seq_id: str, intervals: list[LabelInterval]) -> LabelMatrix:
        seq = self.dataset.by_id(seq_id)
        m = len(self.class_names)
        index = {name: k for k, name in enumerate(self.class_names)}
        mat = np.zeros((seq.num_frames, m), dtype=np.uint8)
        for iv in intervals:
            if iv.class_name not in index:
                raise ValueError(f"unknown class {iv.class_name!r}")
            if not 1 <= iv.start_frame <= iv.end_frame <= seq.num_frames:
                raise ValueError(
                    f"interval ({iv.start_frame}, {iv.end_frame}) outside 1..{seq.num_frames}"
                )
            mat[iv.start_frame - 1 : iv.end_frame, index[iv.class_name]] = 1
        labeled = LabelMatrix(sequence_id=seq_id, labels=mat)
        with self.lock:
            self.labels[seq_id] = labeled
            self.predictions.pop(seq_id, None)
            if self.session_dir:
                save_labels({seq_id: labeled}, self.session_dir / "labels")
        return labeled

    def queue_rows(self) -> list[dict]:
        with self.lock:
            labeled = set(self.labels)
        rows = []
        for position, seq_id in enumerate(self.ranking.order):
            if seq_id in labeled:
                continue
            score = self.ranking.scores[position]
            rows.append(
                {
                    "id": seq_id,
                    "position": position + 1,
                    "score": score if np.isfinite(score) else None,
                }
            )
        return rows

    # -- retraining ---------------------------------------------------------

    def start_retrain(self) -> RetrainJob:
        with self.lock:
            if self._retraining:
                raise RuntimeError("a retrain is already in flight")
            if not self.labels:
                raise ValueError("no labeled sequences yet")
            job = RetrainJob(job_id=uuid.uuid4().hex[:12])
            self.jobs[job.job_id] = job
            self._retraining = True
            snapshot = {k: v for k, v in self.labels.items()}
        thread = threading.Thread(target=self._run_retrain, args=(job, snapshot), daemon=True)
        thread.start()
        return job

    def _run_retrain(self, job: RetrainJob, snapshot: dict[str, LabelMatrix]) -> None:
        job.state = "running"
        started = time.time()
        try:
            train_feats = {i: self.frame_features[i] for i in snapshot}
            annotator = train_annotator(
                train_feats, snapshot, self.annotator_cfg, seed=self.seed
            )
            unlabeled = [i for i in self.dataset.ids if i not in snapshot]
            fresh = predict_all(annotator, {i: self.frame_features[i] for i in unlabeled})
            self_eval = evaluate(predict_all(annotator, train_feats), snapshot)
            duration = time.time() - started
            with self.lock:
                self.annotator = annotator
                self.predictions = fresh
                self.history.append(RetrainRecord(started, duration, self_eval.micro_f1))
            job.duration = duration
            job.eval_on_labeled = {
                "micro_f1": self_eval.micro_f1,
                "macro_f1": self_eval.macro_f1,
                "sequences": len(snapshot),
            }
            job.state = "done"
        except Exception as exc:  # surfaced through /status
            job.error = str(exc)
            job.state = "failed"
        finally:
            with self.lock:
                self._retraining = False

    # -- class-list reload ----------------------------------------------------

    def reload_classes(self, class_names: list[str]) -> None:
        """Swap the class list; labels survive per name, annotator does not."""
        if not class_names:
            raise ValueError("need at least one class")
        if len(set(class_names)) != len(class_names):
            raise ValueError("duplicate class names")
        with self.lock:
            old = {name: k for k, name in enumerate(self.class_names)}
            projected = {}
            for seq_id, mat in self.labels.items():
                rows = np.zeros((mat.num_frames, len(class_names)), dtype=np.uint8)
                for k, name in enumerate(class_names):
                    if name in old:
                        rows[:, k] = mat.labels[:, old[name]]
                projected[seq_id] = LabelMatrix(sequence_id=seq_id, labels=rows)
            self.class_names = list(class_names)
            self.labels = projected
            self.annotator = None
            self.predictions = {}
            if self.session_dir:
                save_labels(projected, self.session_dir / "labels")

    # -- export ---------------------------------------------------------------

    def export_archive(self) -> bytes:
        with self.lock:
            labels = dict(self.labels)
            predictions = dict(self.predictions)
            class_names = list(self.class_names)
        stamp = (1980, 1, 1, 0, 0, 0)  # fixed so identical state gives identical bytes
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w", zipfile.ZIP_STORED) as zf:
            manifest = {
                "class_names": class_names,
                "labeled": sorted(labels),
                "predicted": sorted(predictions),
            }
            zf.writestr(
                zipfile.ZipInfo("manifest.json", stamp),
                json.dumps(manifest, sort_keys=True, indent=1),
            )
            for seq_id in sorted(labels):
                zf.writestr(
                    zipfile.ZipInfo(f"labels/{seq_id}.json", stamp),
                    label_matrix_to_json(labels[seq_id]),
                )
            for seq_id in sorted(predictions):
                zf.writestr(
                    zipfile.ZipInfo(f"predictions/{seq_id}.json", stamp),
                    label_matrix_to_json(predictions[seq_id]),
                )
        return buffer.getvalue()


def create_app(state: SessionState) -> FastAPI:
    app = FastAPI(title="motioncurator annotation service")

    @app.get("/meta")
    def meta():
        return {
            "class_names": state.class_names,
            "joint_names": state.dataset.joint_names,
            "bones": state.dataset.bones or [],
            "fps": state.dataset.fps,
            "num_sequences": state.dataset.num_sequences,
        }

    @app.get("/queue")
    def queue():
        return state.queue_rows()

    @app.get("/sequence/{seq_id}")
    def sequence(seq_id: str):
        try:
            seq = state.dataset.by_id(seq_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown sequence {seq_id!r}")
        with state.lock:
            labels = state.labels.get(seq_id)
            preds = state.predictions.get(seq_id)
        return {
            "id": seq_id,
            "fps": seq.fps,
            "frames": seq.frames.tolist(),
            "labels": labels.labels.astype(int).tolist() if labels is not None else None,
            "predictions": preds.labels.astype(int).tolist() if preds is not None else None,
        }

    @app.post("/labels")
    def post_labels(req: LabelRequest):
        try:
            state.dataset.by_id(req.id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown sequence {req.id!r}")
        try:
            mat = state.put_labels(req.id, req.intervals)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"id": req.id, "labels": mat.labels.astype(int).tolist()}

    @app.post("/retrain")
    def retrain():
        try:
            job = state.start_retrain()
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"job_id": job.job_id}

    @app.get("/status/{job_id}")
    def status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return {
            "state": job.state,
            "duration": job.duration,
            "eval_on_labeled": job.eval_on_labeled,
            "error": job.error,
        }

    @app.get("/export")
    def export():
        from fastapi.responses import Response

        return Response(
            content=state.export_archive(),
            media_type="application/zip",
            headers={"Content-Disposition": "attachment; filename=annotations.zip"},
        )

    @app.post("/classes")
    def classes(req: ClassesRequest):
        try:
            state.reload_classes(req.class_names)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"class_names": state.class_names}

    return app
