"""Persistent occupancy service: rooms, frame ingestion, live seat state.

Storage is a single sqlite file in WAL mode, so a restart (or crash) loses
nothing that was committed. Each ingestion is one transaction: the frame's
observations, the per-seat current state and the stored last frame all land
together or not at all. Alerts are live-only server-sent events, emitted
exactly once per transition into suspected occupancy; history covers the
past.

Frame processing is serialized per room (one in-flight ingestion; concurrent
posts for the same room queue in arrival order); requests for different
rooms do not block each other beyond sqlite's write lock.
"""

from __future__ import annotations

import json
import queue
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .detect import (
    ClassifierNoise,
    DetectorNoise,
    load_model_backend,
    oracle_classifier,
    oracle_detector,
)
from .errors import (
    ConflictError,
    NotFoundError,
    SeatwatchError,
    ValidationError,
)
from .imaging import decode_image, encode_png
from .pipeline import (
    FrameReport,
    PipelineConfig,
    SeatObservation,
    SeatState,
    annotate_frame,
    process_frame,
    state_to_display,
)
from .scenegen import SceneSpec
from .seatgrid import SeatLayout, layout_from_json_dict

__all__ = ["AlertEvent", "SeatService", "create_app", "scan_watch_directory"]


@dataclass(frozen=True)
class AlertEvent:
    room_id: str
    seat_id: int
    from_state: SeatState | None
    to_state: SeatState
    frame_id: str
    timestamp: float

    def to_json_dict(self) -> dict:
        return {
            "room_id": self.room_id,
            "seat_id": self.seat_id,
            "from": self.from_state.value if self.from_state else None,
            "to": self.to_state.value,
            "frame_id": self.frame_id,
            "timestamp": self.timestamp,
        }


_SCHEMA = """
CREATE TABLE IF NOT EXISTS rooms (
    room_id TEXT PRIMARY KEY,
    doc TEXT NOT NULL,
    last_frame BLOB,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS observations (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    room_id TEXT NOT NULL,
    seat_id INTEGER NOT NULL,
    frame_id TEXT NOT NULL,
    ts REAL NOT NULL,
    state TEXT NOT NULL,
    person_conf REAL,
    object_conf REAL
);
CREATE INDEX IF NOT EXISTS obs_by_seat ON observations (room_id, seat_id, ts);
CREATE TABLE IF NOT EXISTS seat_current (
    room_id TEXT NOT NULL,
    seat_id INTEGER NOT NULL,
    frame_id TEXT NOT NULL,
    ts REAL NOT NULL,
    state TEXT NOT NULL,
    person_conf REAL,
    object_conf REAL,
    PRIMARY KEY (room_id, seat_id)
);
CREATE TABLE IF NOT EXISTS announcements (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    title TEXT NOT NULL,
    body TEXT NOT NULL,
    created_at REAL NOT NULL
);
"""


def _build_detector(doc: dict):
    kind = doc.get("kind")
    if kind == "oracle":
        spec = SceneSpec.from_json_dict(doc["scene"])
        w, h = doc["frame_size"]
        noise_doc = doc.get("noise") or {}
        noise = DetectorNoise(
            confidence_jitter=float(noise_doc.get("confidence_jitter", 0.0)),
            p_miss=float(noise_doc.get("p_miss", 0.0)),
            false_positive_rate=float(noise_doc.get("false_positive_rate", 0.0)),
            seed=int(noise_doc.get("seed", 0)),
        )
        return oracle_detector(spec, (int(w), int(h)), noise)
    if kind == "onnx":
        return load_model_backend(
            doc["model_path"],
            conf_thresh=float(doc.get("conf_thresh", 0.5)),
            sidecar_path=doc.get("sidecar_path"),
        )
    raise ValidationError(f"unknown detector kind {kind!r}")


def _build_classifier(doc: dict):
    kind = doc.get("kind")
    if kind == "oracle":
        spec = SceneSpec.from_json_dict(doc["scene"])
        w, h = doc["frame_size"]
        noise_doc = doc.get("noise") or {}
        noise = ClassifierNoise(
            confidence_jitter=float(noise_doc.get("confidence_jitter", 0.0)),
            p_flip=float(noise_doc.get("p_flip", 0.0)),
            seed=int(noise_doc.get("seed", 0)),
        )
        return oracle_classifier(spec, (int(w), int(h)), noise)
    raise ValidationError(f"unknown classifier kind {kind!r}")


class _Room:
    def __init__(self, doc: dict):
        self.doc = doc
        self.room_id: str = doc["room_id"]
        self.layout: SeatLayout = layout_from_json_dict(doc["layout"])
        self.config = PipelineConfig.from_json_dict(doc.get("config", {}))
        self.detector = _build_detector(doc["detector"])
        self.classifier = _build_classifier(doc["classifier"])
        self.lock = threading.Lock()
        self.status = "idle"
        self.active_frame: str | None = None
        self.last_ts = 0.0


class Subscription:
    """Live alert feed for one room; queue-backed, no replay."""

    def __init__(self, unsubscribe):
        self._queue: queue.Queue[AlertEvent] = queue.Queue()
        self._unsubscribe = unsubscribe
        self.closed = False

    def get(self, timeout: float | None = None) -> AlertEvent | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def push(self, event: AlertEvent) -> None:
        self._queue.put(event)

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._unsubscribe(self)


class SeatService:
    """Application core; the HTTP layer in create_app is a thin shell."""

    def __init__(self, db_path: str | Path):
        self._db_path = str(db_path)
        self._db = sqlite3.connect(self._db_path, check_same_thread=False)
        self._db.execute("PRAGMA journal_mode=WAL")
        self._db.execute("PRAGMA synchronous=FULL")
        self._db.executescript(_SCHEMA)
        self._db.commit()
        self._db_lock = threading.RLock()
        self._rooms: dict[str, _Room] = {}
        self._rooms_lock = threading.Lock()
        self._subscribers: dict[str, list[Subscription]] = {}
        self._load_rooms()

    def close(self) -> None:
        with self._db_lock:
            self._db.close()

    def _load_rooms(self) -> None:
        with self._db_lock:
            rows = self._db.execute("SELECT doc FROM rooms").fetchall()
        for (doc_text,) in rows:
            room = _Room(json.loads(doc_text))
            with self._db_lock:
                row = self._db.execute(
                    "SELECT MAX(ts) FROM observations WHERE room_id = ?", (room.room_id,)
                ).fetchone()
            room.last_ts = row[0] or 0.0
            self._rooms[room.room_id] = room

    def _room(self, room_id: str) -> _Room:
        room = self._rooms.get(room_id)
        if room is None:
            raise NotFoundError(f"unknown room {room_id!r}")
        return room

    # -- rooms ---------------------------------------------------------------

    def create_room(self, doc: dict) -> dict:
        room_id = doc.get("room_id")
        if not isinstance(room_id, str) or not room_id:
            raise ValidationError("room_id must be a non-empty string")
        if "layout" not in doc:
            raise ValidationError("room needs a layout")
        if "detector" not in doc or "classifier" not in doc:
            raise ValidationError("room needs detector and classifier descriptors")
        with self._rooms_lock:
            if room_id in self._rooms:
                raise ConflictError(f"room {room_id!r} already exists")
            room = _Room(doc)  # validates layout, config and backends
            with self._db_lock:
                self._db.execute(
                    "INSERT INTO rooms (room_id, doc, created_at) VALUES (?, ?, ?)",
                    (room_id, json.dumps(doc, sort_keys=True), time.time()),
                )
                self._db.commit()
            self._rooms[room_id] = room
        return self.room_info(room_id)

    def room_info(self, room_id: str) -> dict:
        room = self._room(room_id)
        return {
            "room_id": room.room_id,
            "layout": room.layout.to_json_dict(),
            "config": room.config.to_json_dict(),
            "detector": room.detector.descriptor,
            "classifier": room.classifier.descriptor,
        }

    def list_rooms(self) -> list[dict]:
        return [self.room_info(room_id) for room_id in sorted(self._rooms)]

    # -- ingestion -------------------------------------------------------------

    def ingest_frame(self, room_id: str, data: bytes) -> tuple[FrameReport, list[AlertEvent]]:
        room = self._room(room_id)
        with room.lock:  # one in-flight ingestion per room, arrival order
            try:
                frame = decode_image(data)
            except Exception as exc:
                raise ValidationError(f"image bytes undecodable: {exc}") from exc
            room.status = "in_progress"
            try:
                ts = max(time.time(), room.last_ts + 1e-6)
                report = process_frame(
                    frame,
                    room.layout,
                    room.detector,
                    room.classifier,
                    room.config,
                    timestamp=ts,
                )
                room.active_frame = report.frame_id
                previous = self._current_states(room_id)
                alerts = []
                for obs in report.observations:
                    prior = previous.get(obs.seat_id)
                    if (
                        obs.state == SeatState.SUSPECTED_OCCUPANCY
                        and prior != SeatState.SUSPECTED_OCCUPANCY
                    ):
                        alerts.append(
                            AlertEvent(
                                room_id=room_id,
                                seat_id=obs.seat_id,
                                from_state=prior,
                                to_state=obs.state,
                                frame_id=report.frame_id,
                                timestamp=ts,
                            )
                        )
                self._persist_report(room_id, report, data)
                room.last_ts = ts
            except Exception:
                room.status = "failed"
                raise
            room.status = "completed"
        for event in alerts:
            self._publish(room_id, event)
        return report, alerts

    def _persist_report(self, room_id: str, report: FrameReport, frame_bytes: bytes) -> None:
        rows = [
            (
                room_id,
                o.seat_id,
                report.frame_id,
                o.timestamp,
                o.state.value,
                o.person_confidence,
                o.object_confidence,
            )
            for o in report.observations
        ]
        with self._db_lock:
            try:
                self._db.execute("BEGIN")
                self._db.executemany(
                    "INSERT INTO observations (room_id, seat_id, frame_id, ts, state,"
                    " person_conf, object_conf) VALUES (?, ?, ?, ?, ?, ?, ?)",
                    rows,
                )
                self._db.executemany(
                    "INSERT INTO seat_current (room_id, seat_id, frame_id, ts, state,"
                    " person_conf, object_conf) VALUES (?, ?, ?, ?, ?, ?, ?)"
                    " ON CONFLICT(room_id, seat_id) DO UPDATE SET frame_id=excluded.frame_id,"
                    " ts=excluded.ts, state=excluded.state, person_conf=excluded.person_conf,"
                    " object_conf=excluded.object_conf",
                    rows,
                )
                self._db.execute(
                    "UPDATE rooms SET last_frame = ? WHERE room_id = ?",
                    (sqlite3.Binary(frame_bytes), room_id),
                )
                self._db.commit()
            except Exception:
                self._db.rollback()
                raise

    def rerun_last(
        self,
        room_id: str,
        person_conf: float | None = None,
        objects_conf: float | None = None,
    ) -> FrameReport:
        """Re-process the stored last frame with threshold overrides.

        A what-if tool for operators: nothing is persisted and no alerts
        fire, the report is just returned.
        """
        room = self._room(room_id)
        data = self._last_frame_bytes(room_id)
        cfg = room.config
        if person_conf is not None or objects_conf is not None:
            cfg = PipelineConfig(
                person_conf=person_conf if person_conf is not None else cfg.person_conf,
                objects_conf=objects_conf if objects_conf is not None else cfg.objects_conf,
                nms_iou=cfg.nms_iou,
                out_of_service=cfg.out_of_service,
            )
        frame = decode_image(data)
        with room.lock:
            return process_frame(
                frame, room.layout, room.detector, room.classifier, cfg, timestamp=room.last_ts
            )

    def _last_frame_bytes(self, room_id: str) -> bytes:
        with self._db_lock:
            row = self._db.execute(
                "SELECT last_frame FROM rooms WHERE room_id = ?", (room_id,)
            ).fetchone()
        if row is None or row[0] is None:
            raise NotFoundError(f"room {room_id!r} has no ingested frame yet")
        return bytes(row[0])

    def last_frame_png(self, room_id: str) -> bytes:
        self._room(room_id)
        return encode_png(decode_image(self._last_frame_bytes(room_id)))

    def last_frame_annotated(self, room_id: str) -> bytes:
        room = self._room(room_id)
        frame = decode_image(self._last_frame_bytes(room_id))
        states = self._current_states(room_id)
        observations = tuple(
            SeatObservation(seat_id=s, state=states.get(s, SeatState.FREE))
            for s in room.layout.seat_ids
        )
        report = FrameReport(
            frame_id="current",
            room_id=room_id,
            observations=observations,
            classifier_invocations=0,
            detector_runtime_ms=0.0,
            classifier_runtime_ms=0.0,
        )
        return encode_png(annotate_frame(frame, room.layout, report))

    # -- seat state --------------------------------------------------------------

    def _current_states(self, room_id: str) -> dict[int, SeatState]:
        with self._db_lock:
            rows = self._db.execute(
                "SELECT seat_id, state FROM seat_current WHERE room_id = ?", (room_id,)
            ).fetchall()
        return {seat_id: SeatState(state) for seat_id, state in rows}

    def get_seats(self, room_id: str) -> list[dict]:
        room = self._room(room_id)
        with self._db_lock:
            rows = self._db.execute(
                "SELECT seat_id, frame_id, ts, state, person_conf, object_conf"
                " FROM seat_current WHERE room_id = ?",
                (room_id,),
            ).fetchall()
        current = {r[0]: r for r in rows}
        seats = []
        for seat_id in room.layout.seat_ids:
            row = current.get(seat_id)
            if row is None:
                state, ts, person_conf, object_conf = SeatState.FREE, None, None, None
            else:
                state = SeatState(row[3])
                ts, person_conf, object_conf = row[2], row[4], row[5]
            color, glyph = state_to_display(state)
            seats.append(
                {
                    "seat_id": seat_id,
                    "state": state.value,
                    "color": color,
                    "glyph": glyph,
                    "last_updated": ts,
                    "person_confidence": person_conf,
                    "object_confidence": object_conf,
                }
            )
        return seats

    def get_history(self, room_id: str, seat_id: int, since: float = 0.0) -> list[dict]:
        room = self._room(room_id)
        if seat_id not in room.layout.seat_ids:
            raise NotFoundError(f"room {room_id!r} has no seat {seat_id}")
        with self._db_lock:
            rows = self._db.execute(
                "SELECT frame_id, ts, state, person_conf, object_conf FROM observations"
                " WHERE room_id = ? AND seat_id = ? AND ts >= ? ORDER BY ts, id",
                (room_id, seat_id, since),
            ).fetchall()
        return [
            {
                "frame_id": frame_id,
                "timestamp": ts,
                "state": state,
                "person_confidence": person_conf,
                "object_confidence": object_conf,
            }
            for frame_id, ts, state, person_conf, object_conf in rows
        ]

    def status(self, room_id: str) -> dict:
        room = self._room(room_id)
        return {"status": room.status, "frame_id": room.active_frame}

    # -- announcements --------------------------------------------------------------

    def create_announcement(self, title: str, body: str = "") -> dict:
        if not isinstance(title, str) or not title.strip():
            raise ValidationError("announcement needs a non-empty title")
        with self._db_lock:
            cur = self._db.execute(
                "INSERT INTO announcements (title, body, created_at) VALUES (?, ?, ?)",
                (title, body or "", time.time()),
            )
            self._db.commit()
            ann_id = cur.lastrowid
        return self._announcement(ann_id)

    def _announcement(self, ann_id: int) -> dict:
        with self._db_lock:
            row = self._db.execute(
                "SELECT id, title, body, created_at FROM announcements WHERE id = ?",
                (ann_id,),
            ).fetchone()
        if row is None:
            raise NotFoundError(f"no announcement {ann_id}")
        return {"id": row[0], "title": row[1], "body": row[2], "created_at": row[3]}

    def list_announcements(self) -> list[dict]:
        with self._db_lock:
            rows = self._db.execute(
                "SELECT id, title, body, created_at FROM announcements ORDER BY id DESC"
            ).fetchall()
        return [
            {"id": i, "title": t, "body": b, "created_at": c} for i, t, b, c in rows
        ]

    # -- alerts ------------------------------------------------------------------------

    def subscribe(self, room_id: str) -> Subscription:
        self._room(room_id)
        sub = Subscription(unsubscribe=lambda s: self._drop_subscriber(room_id, s))
        self._subscribers.setdefault(room_id, []).append(sub)
        return sub

    def _drop_subscriber(self, room_id: str, sub: Subscription) -> None:
        subs = self._subscribers.get(room_id, [])
        if sub in subs:
            subs.remove(sub)

    def _publish(self, room_id: str, event: AlertEvent) -> None:
        for sub in list(self._subscribers.get(room_id, [])):
            sub.push(event)


def scan_watch_directory(service: SeatService, room_id: str, watch_dir: str | Path) -> list[str]:
    """One poll of a drop folder: ingest every image, then move it aside.

    Returns the file names ingested. Files that fail to decode move to
    rejected/ so the poller does not spin on them.
    """
    root = Path(watch_dir)
    processed = root / "processed"
    rejected = root / "rejected"
    ingested = []
    for path in sorted(root.glob("*")):
        if path.suffix.lower() not in (".png", ".jpg", ".jpeg") or not path.is_file():
            continue
        data = path.read_bytes()
        try:
            service.ingest_frame(room_id, data)
        except ValidationError:
            rejected.mkdir(exist_ok=True)
            path.rename(rejected / path.name)
            continue
        processed.mkdir(exist_ok=True)
        path.rename(processed / path.name)
        ingested.append(path.name)
    return ingested


# --- HTTP layer -------------------------------------------------------------------------

_HTTP_STATUS = {
    NotFoundError: 404,
    ConflictError: 409,
    ValidationError: 422,
}


def _error_payload(exc: SeatwatchError) -> dict:
    return {
        "code": type(exc).__name__.removesuffix("Error").lower(),
        "message": str(exc),
        "detail": getattr(exc, "seat_id", None) or getattr(exc, "frame_id", None),
    }


def create_app(service: SeatService, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="seatwatch", version="0.1.0")

    @app.exception_handler(SeatwatchError)
    async def seatwatch_error_handler(request: Request, exc: SeatwatchError):
        status = 500
        for klass, code in _HTTP_STATUS.items():
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(status_code=status, content=_error_payload(exc))

    @app.get("/rooms")
    def list_rooms():
        return service.list_rooms()

    @app.post("/rooms", status_code=201)
    async def create_room(request: Request):
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body is not JSON: {exc}")
        return service.create_room(doc)

    @app.get("/rooms/{room_id}")
    def get_room(room_id: str):
        return service.room_info(room_id)

    @app.post("/rooms/{room_id}/frames")
    async def ingest(room_id: str, request: Request):
        data = await request.body()
        if not data:
            raise ValidationError("empty request body; send PNG or JPEG bytes")
        report, alerts = service.ingest_frame(room_id, data)
        doc = report.to_json_dict()
        doc["alerts"] = [a.to_json_dict() for a in alerts]
        return doc

    @app.post("/rooms/{room_id}/rerun")
    def rerun(room_id: str, person_conf: float | None = None, objects_conf: float | None = None):
        return service.rerun_last(room_id, person_conf, objects_conf).to_json_dict()

    @app.get("/rooms/{room_id}/seats")
    def seats(room_id: str):
        return service.get_seats(room_id)

    @app.get("/rooms/{room_id}/seats/{seat_id}/history")
    def history(room_id: str, seat_id: int, since: float = 0.0):
        return service.get_history(room_id, seat_id, since)

    @app.get("/rooms/{room_id}/status")
    def status(room_id: str):
        return service.status(room_id)

    @app.get("/rooms/{room_id}/frames/last")
    def last_frame(room_id: str):
        return Response(content=service.last_frame_png(room_id), media_type="image/png")

    @app.get("/rooms/{room_id}/frames/last/annotated")
    def last_frame_annotated(room_id: str):
        return Response(content=service.last_frame_annotated(room_id), media_type="image/png")

    @app.get("/announcements")
    def announcements():
        return service.list_announcements()

    @app.post("/announcements", status_code=201)
    async def create_announcement(request: Request):
        try:
            doc = json.loads(await request.body())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body is not JSON: {exc}")
        return service.create_announcement(doc.get("title", ""), doc.get("body", ""))

    @app.get("/rooms/{room_id}/alerts")
    def alerts(room_id: str):
        subscription = service.subscribe(room_id)

        def stream():
            try:
                yield ": connected\n\n"
                while True:
                    event = subscription.get(timeout=15.0)
                    if event is None:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {json.dumps(event.to_json_dict(), sort_keys=True)}\n\n"
            finally:
                subscription.close()

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def demo_room_doc(room_id: str = "demo", width: int = 192, height: int = 192) -> dict:
    """Room descriptor for the 16-seat demo scene (items at 6 and 12)."""
    from .scenegen import ItemKind, SeatContent
    from .seatgrid import grid_layout

    layout = grid_layout(4, 4, room_id=room_id)
    seats = {s: SeatContent(person=True) for s in range(1, 17) if s not in (6, 12)}
    seats[6] = SeatContent(items=(ItemKind.BOOK,))
    seats[12] = SeatContent(items=(ItemKind.BAG, ItemKind.BOX))
    spec = SceneSpec(layout=layout, seats=seats, seed=42)
    oracle = {
        "kind": "oracle",
        "scene": spec.to_json_dict(),
        "frame_size": [width, height],
    }
    return {
        "room_id": room_id,
        "layout": layout.to_json_dict(),
        "config": {"person_conf": 0.5, "objects_conf": 0.5},
        "detector": oracle,
        "classifier": oracle,
    }


def seed_demo_room(service: SeatService, room_id: str = "demo") -> FrameReport:
    """Create the demo room and ingest its rendered frame once."""
    from .scenegen import render

    doc = demo_room_doc(room_id)
    service.create_room(doc)
    spec = SceneSpec.from_json_dict(doc["detector"]["scene"])
    frame, _ = render(spec, *doc["detector"]["frame_size"])
    report, _ = service.ingest_frame(room_id, encode_png(frame))
    return report
