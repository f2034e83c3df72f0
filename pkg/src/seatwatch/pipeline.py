"""The serial dual-channel decision procedure.

One frame flows: exposure repair -> person detection on the whole frame ->
NMS -> assignment of qualifying person boxes to seats -> for the remaining
in-service, person-free seats only, crop classification into objects /
no-objects. A seat with a person is occupied; a person-free seat classified
"objects" is a suspected occupancy; everything else is free. Running the
classifier only where channel 1 saw nobody is the entire point: the second
channel's cost scales with empty seats, not with the room.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .detect import (
    ClassificationResult,
    ClassifierBackend,
    CropLabel,
    Detection,
    DetectionLabel,
    DetectorBackend,
    nms,
)
from .errors import ConfigurationError, ProcessingError, SeatwatchError
from .imaging import RasterImage, preprocess
from .seatgrid import SeatLayout, SubImage, assign_detections, pixel_bounds, segment

__all__ = [
    "SeatState",
    "SeatObservation",
    "PipelineConfig",
    "FrameReport",
    "process_frame",
    "compare_serial_vs_full",
    "state_to_display",
    "derive_seat_states",
    "annotate_frame",
    "DEFAULT_DISPLAY",
]


class SeatState(str, Enum):
    OCCUPIED_BY_PERSON = "occupied_by_person"
    SUSPECTED_OCCUPANCY = "suspected_occupancy"
    FREE = "free"
    OUT_OF_SERVICE = "out_of_service"


@dataclass(frozen=True)
class SeatObservation:
    seat_id: int
    state: SeatState
    person_detections: tuple[Detection, ...] = ()
    classification: ClassificationResult | None = None
    frame_id: str = ""
    timestamp: float = 0.0

    @property
    def person_confidence(self) -> float | None:
        if not self.person_detections:
            return None
        return max(d.confidence for d in self.person_detections)

    @property
    def object_confidence(self) -> float | None:
        return self.classification.confidence if self.classification else None


@dataclass(frozen=True)
class PipelineConfig:
    """Thresholds the decision rule hinges on; all default to 0.5."""

    person_conf: float = 0.5  # min confidence for a person box to occupy a seat
    objects_conf: float = 0.5  # min confidence for an "objects" verdict to flag a seat
    nms_iou: float = 0.5
    out_of_service: frozenset[int] = frozenset()

    def __post_init__(self):
        for name in ("person_conf", "objects_conf", "nms_iou"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigurationError(f"{name} out of [0, 1]: {v}")
        object.__setattr__(self, "out_of_service", frozenset(self.out_of_service))

    def to_json_dict(self) -> dict:
        return {
            "person_conf": self.person_conf,
            "objects_conf": self.objects_conf,
            "nms_iou": self.nms_iou,
            "out_of_service": sorted(self.out_of_service),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PipelineConfig":
        return cls(
            person_conf=float(doc.get("person_conf", 0.5)),
            objects_conf=float(doc.get("objects_conf", 0.5)),
            nms_iou=float(doc.get("nms_iou", 0.5)),
            out_of_service=frozenset(int(s) for s in doc.get("out_of_service", [])),
        )


@dataclass(frozen=True)
class FrameReport:
    frame_id: str
    room_id: str
    observations: tuple[SeatObservation, ...]
    classifier_invocations: int
    detector_runtime_ms: float
    classifier_runtime_ms: float

    def observation(self, seat_id: int) -> SeatObservation:
        for obs in self.observations:
            if obs.seat_id == seat_id:
                return obs
        raise KeyError(seat_id)

    def seats_in_state(self, state: SeatState) -> list[int]:
        return [o.seat_id for o in self.observations if o.state == state]

    def to_json_dict(self) -> dict:
        seats = []
        for o in self.observations:
            color, glyph = state_to_display(o.state)
            seats.append(
                {
                    "seat_id": o.seat_id,
                    "state": o.state.value,
                    "color": color,
                    "glyph": glyph,
                    "person_confidence": o.person_confidence,
                    "object_confidence": o.object_confidence,
                    "timestamp": o.timestamp,
                }
            )
        return {
            "frame_id": self.frame_id,
            "room_id": self.room_id,
            "seats": seats,
            "classifier_invocations": self.classifier_invocations,
            "timings": {
                "detector_ms": self.detector_runtime_ms,
                "classifier_ms": self.classifier_runtime_ms,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


# Color legend: red flags suspected occupancy, blue a seat occupied by a
# present person, gray a free seat, dark-gray one taken out of service. The
# librarian glyph is x only for suspected occupancy. The blue/gray reading
# is configurable because the two "unoccupied" wordings are ambiguous.
DEFAULT_DISPLAY: dict[SeatState, tuple[str, str]] = {
    SeatState.SUSPECTED_OCCUPANCY: ("red", "×"),
    SeatState.OCCUPIED_BY_PERSON: ("blue", "✓"),
    SeatState.FREE: ("gray", "✓"),
    SeatState.OUT_OF_SERVICE: ("dark-gray", "✓"),
}


def state_to_display(
    state: SeatState, mapping: dict[SeatState, tuple[str, str]] | None = None
) -> tuple[str, str]:
    """(color, glyph) pair for a seat state."""
    return (mapping or DEFAULT_DISPLAY)[state]


def derive_seat_states(
    seat_ids: list[int],
    person_seats: set[int],
    item_seats: set[int],
    out_of_service: set[int] = frozenset(),
) -> dict[int, SeatState]:
    """The decision rule, shared with the scene generator's ground truth:
    person wins, then items flag suspicion, else free."""
    states = {}
    for seat in seat_ids:
        if seat in out_of_service:
            states[seat] = SeatState.OUT_OF_SERVICE
        elif seat in person_seats:
            states[seat] = SeatState.OCCUPIED_BY_PERSON
        elif seat in item_seats:
            states[seat] = SeatState.SUSPECTED_OCCUPANCY
        else:
            states[seat] = SeatState.FREE
    return states


def frame_digest(frame: RasterImage) -> str:
    digest = hashlib.blake2b(frame.pixels.tobytes(), digest_size=6)
    digest.update(frame.width.to_bytes(4, "little"))
    return digest.hexdigest()


def _classify_crop(
    classifier: ClassifierBackend, sub: SubImage, frame_id: str
) -> ClassificationResult:
    try:
        return classifier.classify(sub.crop, origin=sub.origin)
    except SeatwatchError:
        raise
    except Exception as exc:
        raise ProcessingError(
            f"frame {frame_id}: classifier failed on seat {sub.seat_id}: {exc}", frame_id
        ) from exc


def process_frame(
    frame: RasterImage,
    layout: SeatLayout,
    detector: DetectorBackend,
    classifier: ClassifierBackend,
    cfg: PipelineConfig | None = None,
    frame_id: str | None = None,
    timestamp: float | None = None,
    classify_all: bool = False,
) -> FrameReport:
    """Run the serial pipeline on one frame and report per-seat verdicts.

    classify_all switches to the reference variant that classifies every
    in-service seat regardless of channel 1; verdicts are unaffected, only
    the invocation count (the cost) changes.
    """
    cfg = cfg or PipelineConfig()
    if frame_id is None:
        frame_id = frame_digest(frame)
    if timestamp is None:
        timestamp = time.time()

    repaired = preprocess(frame)

    t0 = time.perf_counter()
    try:
        raw = detector.detect(repaired)
    except SeatwatchError:
        raise
    except Exception as exc:
        raise ProcessingError(f"frame {frame_id}: detector failed: {exc}", frame_id) from exc
    detector_ms = (time.perf_counter() - t0) * 1000.0

    dets = nms(raw, cfg.nms_iou)
    persons = [
        d for d in dets if d.label == DetectionLabel.PERSON and d.confidence >= cfg.person_conf
    ]
    by_seat, _unassigned = assign_detections(persons, layout)

    crops = {sub.seat_id: sub for sub in segment(repaired, layout)}

    observations = []
    invocations = 0
    classifier_ms = 0.0
    for region in layout.regions:
        seat = region.seat_id
        if seat in cfg.out_of_service:
            observations.append(
                SeatObservation(seat, SeatState.OUT_OF_SERVICE, frame_id=frame_id, timestamp=timestamp)
            )
            continue
        seat_persons = tuple(by_seat.get(seat, ()))
        if seat_persons:
            observations.append(
                SeatObservation(
                    seat,
                    SeatState.OCCUPIED_BY_PERSON,
                    person_detections=seat_persons,
                    frame_id=frame_id,
                    timestamp=timestamp,
                )
            )
            if classify_all:
                t0 = time.perf_counter()
                _classify_crop(classifier, crops[seat], frame_id)  # cost only; result unused
                classifier_ms += (time.perf_counter() - t0) * 1000.0
                invocations += 1
            continue
        t0 = time.perf_counter()
        result = _classify_crop(classifier, crops[seat], frame_id)
        classifier_ms += (time.perf_counter() - t0) * 1000.0
        invocations += 1
        if result.label == CropLabel.OBJECTS and result.confidence >= cfg.objects_conf:
            state = SeatState.SUSPECTED_OCCUPANCY
        else:
            state = SeatState.FREE
        observations.append(
            SeatObservation(
                seat, state, classification=result, frame_id=frame_id, timestamp=timestamp
            )
        )

    return FrameReport(
        frame_id=frame_id,
        room_id=layout.room_id,
        observations=tuple(observations),
        classifier_invocations=invocations,
        detector_runtime_ms=detector_ms,
        classifier_runtime_ms=classifier_ms,
    )


def compare_serial_vs_full(
    frame: RasterImage,
    layout: SeatLayout,
    detector: DetectorBackend,
    classifier: ClassifierBackend,
    cfg: PipelineConfig | None = None,
) -> tuple[FrameReport, FrameReport, int]:
    """Serial pipeline vs the classify-everything reference.

    Returns (serial, full, saved classifier invocations). Person-free seats
    must agree between the two runs; a mismatch means a backend broke its
    determinism contract.
    """
    serial = process_frame(frame, layout, detector, classifier, cfg, timestamp=0.0)
    full = process_frame(
        frame, layout, detector, classifier, cfg, timestamp=0.0, classify_all=True
    )
    for s_obs, f_obs in zip(serial.observations, full.observations):
        if s_obs.state != SeatState.OCCUPIED_BY_PERSON and s_obs.state != f_obs.state:
            raise AssertionError(
                f"seat {s_obs.seat_id}: serial={s_obs.state} full={f_obs.state}"
            )
    saved = full.classifier_invocations - serial.classifier_invocations
    return serial, full, saved


_TINT_RGB = {
    "red": (220, 60, 50),
    "blue": (60, 100, 220),
    "gray": (150, 150, 150),
    "dark-gray": (70, 70, 70),
}


def annotate_frame(frame: RasterImage, layout: SeatLayout, report: FrameReport) -> RasterImage:
    """Tint each seat region with its state color and draw region borders."""
    out = frame.pixels.astype(np.float64).copy()
    for obs in report.observations:
        region = layout.region(obs.seat_id)
        color, _ = state_to_display(obs.state)
        tint = np.asarray(_TINT_RGB[color], dtype=np.float64)
        x0, y0, x1, y1 = pixel_bounds(region, frame.width, frame.height)
        out[y0:y1, x0:x1] = 0.55 * out[y0:y1, x0:x1] + 0.45 * tint
        out[y0, x0:x1] = tint
        out[y1 - 1, x0:x1] = tint
        out[y0:y1, x0] = tint
        out[y0:y1, x1 - 1] = tint
    return RasterImage(np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8))
