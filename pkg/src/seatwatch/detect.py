"""Detection channel primitives and pluggable backends.

The trained networks themselves are out of scope; detection and crop
classification are interfaces. Two backend families ship here:

* oracle backends answering from a synthetic scene's ground truth, optionally
  degraded by a seeded noise model -- the test stand-in for a trained network;
* an ONNX model backend for real inference (requires the optional
  ``onnxruntime`` dependency).

Geometry helpers (IoU, greedy NMS) are shared by every backend and by the
evaluation code.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import (
    BackendError,
    ModelFormatError,
    ModelNotFoundError,
    OracleMisuseError,
    UnmappedClassError,
)
from .imaging import RasterImage

__all__ = [
    "BoundingBox",
    "DetectionLabel",
    "Detection",
    "CropLabel",
    "ClassificationResult",
    "DetectorBackend",
    "ClassifierBackend",
    "iou",
    "nms",
    "DetectorNoise",
    "ClassifierNoise",
    "oracle_detector",
    "oracle_classifier",
    "load_model_backend",
]

DEFAULT_NMS_IOU = 0.5


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in normalized frame coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive extent, got w={self.w} h={self.h}")
        if self.x < 0 or self.y < 0 or self.x + self.w > 1 + 1e-9 or self.y + self.h > 1 + 1e-9:
            raise ValueError(f"box exceeds the unit square: {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h


class DetectionLabel(str, Enum):
    PERSON = "person"
    BOOK = "book"
    OTHER_OBJECT = "other_object"


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    label: DetectionLabel
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")


class CropLabel(str, Enum):
    OBJECTS = "objects"
    NO_OBJECTS = "no_objects"


@dataclass(frozen=True)
class ClassificationResult:
    label: CropLabel
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")


@runtime_checkable
class DetectorBackend(Protocol):
    descriptor: str

    def detect(self, frame: RasterImage) -> list[Detection]: ...


@runtime_checkable
class ClassifierBackend(Protocol):
    descriptor: str

    def classify(
        self, crop: RasterImage, origin: tuple[int, int] | None = None
    ) -> ClassificationResult: ...


# --- geometry --------------------------------------------------------------------

def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes, 1 for identical ones."""
    ax2, ay2 = a.x + a.w, a.y + a.h
    bx2, by2 = b.x + b.w, b.y + b.h
    ix = max(0.0, min(ax2, bx2) - max(a.x, b.x))
    iy = max(0.0, min(ay2, by2) - max(a.y, b.y))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    # areas through the same subtractions as ix/iy so identical boxes hit 1.0
    union = (ax2 - a.x) * (ay2 - a.y) + (bx2 - b.x) * (by2 - b.y) - inter
    return min(inter / union, 1.0)


def nms(dets: list[Detection], iou_thresh: float = DEFAULT_NMS_IOU) -> list[Detection]:
    """Greedy per-label non-maximum suppression.

    Candidates are visited by descending confidence (ties broken by box.x
    then box.y) and kept iff they overlap every kept same-label detection
    strictly below iou_thresh.
    """
    kept: list[Detection] = []
    by_conf = sorted(dets, key=lambda d: (-d.confidence, d.box.x, d.box.y))
    for det in by_conf:
        if all(
            iou(det.box, k.box) < iou_thresh
            for k in kept
            if k.label == det.label
        ):
            kept.append(det)
    return kept


# --- oracle backends -------------------------------------------------------------

@dataclass(frozen=True)
class DetectorNoise:
    """Degradation model for the oracle detector.

    confidence_jitter: sigma of gaussian noise added to each confidence;
    p_miss: probability of dropping a ground-truth detection;
    false_positive_rate: expected number of spurious person boxes per frame.
    """

    confidence_jitter: float = 0.0
    p_miss: float = 0.0
    false_positive_rate: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class ClassifierNoise:
    confidence_jitter: float = 0.0
    p_flip: float = 0.0
    seed: int = 0


def _frame_rng(seed: int, frame: RasterImage) -> np.random.Generator:
    # Noise is a pure function of (backend seed, frame content) so repeated
    # calls with the same input are byte-identical while distinct frames in a
    # dataset draw distinct noise.
    digest = hashlib.blake2b(frame.pixels.tobytes(), digest_size=8, key=seed.to_bytes(8, "little", signed=True)).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


class OracleDetector:
    """Emits a scene's ground-truth person boxes, optionally degraded.

    Built from the same SceneSpec used to render the frame; feeding a frame
    of a different size raises OracleMisuseError.
    """

    def __init__(self, spec, frame_size: tuple[int, int], noise: DetectorNoise | None = None):
        from .scenegen import ground_truth  # deferred: scenegen imports this module

        self._spec = spec
        self._frame_size = (int(frame_size[0]), int(frame_size[1]))
        self._noise = noise or DetectorNoise()
        self._truth = ground_truth(spec)
        self.descriptor = f"oracle-detector(seed={spec.seed}, noise={self._noise})"

    def detect(self, frame: RasterImage) -> list[Detection]:
        if (frame.width, frame.height) != self._frame_size:
            raise OracleMisuseError(
                f"oracle built for {self._frame_size[0]}x{self._frame_size[1]} frames, "
                f"got {frame.width}x{frame.height}"
            )
        noise = self._noise
        out = []
        exact = [
            Detection(box=box, label=DetectionLabel.PERSON, confidence=1.0)
            for _, box in sorted(self._truth.person_boxes.items())
        ]
        if noise == DetectorNoise(seed=noise.seed):
            return exact

        rng = _frame_rng(noise.seed, frame)
        for det in exact:
            if noise.p_miss > 0 and rng.random() < noise.p_miss:
                continue
            conf = det.confidence
            if noise.confidence_jitter > 0:
                conf = float(np.clip(conf + rng.normal(0, noise.confidence_jitter), 0.0, 1.0))
            out.append(Detection(box=det.box, label=det.label, confidence=conf))
        if noise.false_positive_rate > 0:
            for _ in range(rng.poisson(noise.false_positive_rate)):
                w = float(rng.uniform(0.05, 0.15))
                h = float(rng.uniform(0.05, 0.15))
                x = float(rng.uniform(0, 1 - w))
                y = float(rng.uniform(0, 1 - h))
                conf = float(rng.uniform(0.05, 0.95))
                out.append(
                    Detection(box=BoundingBox(x, y, w, h), label=DetectionLabel.PERSON, confidence=conf)
                )
        return out


class OracleClassifier:
    """Answers Objects/NoObjects from the scene's per-seat item flags.

    The seat is recovered from the crop's pixel origin via the layout's own
    segmentation cuts, so in-pipeline crops always resolve exactly; arbitrary
    crops fall back to center-point containment.
    """

    def __init__(self, spec, frame_size: tuple[int, int], noise: ClassifierNoise | None = None):
        from .scenegen import ground_truth
        from .seatgrid import pixel_bounds

        self._spec = spec
        self._frame_size = (int(frame_size[0]), int(frame_size[1]))
        self._noise = noise or ClassifierNoise()
        self._truth = ground_truth(spec)
        w, h = self._frame_size
        self._origin_to_seat = {
            (pixel_bounds(r, w, h)[0], pixel_bounds(r, w, h)[1]): r.seat_id
            for r in spec.layout.regions
        }
        self.descriptor = f"oracle-classifier(seed={spec.seed}, noise={self._noise})"

    def _seat_for(self, crop: RasterImage, origin: tuple[int, int] | None) -> int:
        if origin is None:
            raise OracleMisuseError("oracle classifier needs the crop origin")
        ox, oy = origin
        w, h = self._frame_size
        if not (0 <= ox < w and 0 <= oy < h):
            raise OracleMisuseError(f"crop origin {origin} outside the {w}x{h} frame")
        seat = self._origin_to_seat.get((ox, oy))
        if seat is not None:
            return seat
        cx = (ox + crop.width / 2.0) / w
        cy = (oy + crop.height / 2.0) / h
        candidates = [r.seat_id for r in self._spec.layout.regions if r.contains(cx, cy)]
        if not candidates:
            raise OracleMisuseError(f"crop at origin {origin} covers no seat region")
        return min(candidates)

    def classify(
        self, crop: RasterImage, origin: tuple[int, int] | None = None
    ) -> ClassificationResult:
        seat = self._seat_for(crop, origin)
        has_items = self._truth.item_flags.get(seat, False)
        label = CropLabel.OBJECTS if has_items else CropLabel.NO_OBJECTS
        conf = 1.0
        noise = self._noise
        if noise != ClassifierNoise(seed=noise.seed):
            rng = _frame_rng(noise.seed + seat, crop)
            if noise.p_flip > 0 and rng.random() < noise.p_flip:
                label = CropLabel.NO_OBJECTS if label == CropLabel.OBJECTS else CropLabel.OBJECTS
            if noise.confidence_jitter > 0:
                conf = float(np.clip(conf + rng.normal(0, noise.confidence_jitter), 0.0, 1.0))
        return ClassificationResult(label=label, confidence=conf)


def oracle_detector(spec, frame_size: tuple[int, int], noise: DetectorNoise | None = None) -> OracleDetector:
    return OracleDetector(spec, frame_size, noise)


def oracle_classifier(spec, frame_size: tuple[int, int], noise: ClassifierNoise | None = None) -> OracleClassifier:
    return OracleClassifier(spec, frame_size, noise)


# --- ONNX model backend ----------------------------------------------------------

_LABEL_NAMES = {label.value: label for label in DetectionLabel}


@dataclass(frozen=True)
class ModelSidecar:
    """Preprocessing recipe and class declarations shipped next to a model."""

    input_width: int
    input_height: int
    mean: tuple[float, float, float]
    std: tuple[float, float, float]
    classes: tuple[int, ...]
    class_map: dict[int, DetectionLabel]

    @classmethod
    def load(cls, path: Path) -> "ModelSidecar":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: sidecar is not valid JSON: {exc}") from exc
        try:
            iw, ih = int(doc["input_size"][0]), int(doc["input_size"][1])
            mean = tuple(float(x) for x in doc.get("mean", [0.0, 0.0, 0.0]))
            std = tuple(float(x) for x in doc.get("std", [1.0, 1.0, 1.0]))
            classes = tuple(int(c) for c in doc["classes"])
            raw_map = {int(k): str(v) for k, v in doc["class_map"].items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{path}: sidecar missing/invalid field: {exc}") from exc
        class_map = {}
        for idx, name in raw_map.items():
            if name not in _LABEL_NAMES:
                raise ModelFormatError(f"{path}: unknown label {name!r} for class {idx}")
            class_map[idx] = _LABEL_NAMES[name]
        return cls(iw, ih, mean, std, classes, class_map)


class OnnxDetector:
    """Detector backed by an ONNX model plus its sidecar config."""

    def __init__(self, session, sidecar: ModelSidecar, conf_thresh: float, nms_iou: float, descriptor: str):
        self._session = session
        self._sidecar = sidecar
        self._conf_thresh = conf_thresh
        self._nms_iou = nms_iou
        self.descriptor = descriptor

    def detect(self, frame: RasterImage) -> list[Detection]:
        try:
            return self._detect(frame)
        except Exception as exc:  # inference must never escape as a crash
            raise BackendError(f"onnx inference failed: {exc}") from exc

    def _detect(self, frame: RasterImage) -> list[Detection]:
        from PIL import Image

        sc = self._sidecar
        im = Image.fromarray(frame.pixels, mode="RGB").resize(
            (sc.input_width, sc.input_height), Image.BILINEAR
        )
        arr = np.asarray(im, dtype=np.float32) / 255.0
        arr = (arr - np.asarray(sc.mean, dtype=np.float32)) / np.asarray(sc.std, dtype=np.float32)
        batch = arr.transpose(2, 0, 1)[None, ...]
        input_name = self._session.get_inputs()[0].name
        outputs = self._session.run(None, {input_name: batch})
        rows = self._rows_from_outputs(outputs)
        dets = []
        for x0, y0, x1, y1, score, cls in rows:
            if score < self._conf_thresh:
                continue
            label = sc.class_map.get(int(cls), DetectionLabel.OTHER_OBJECT)
            x0n = min(max(x0 / sc.input_width, 0.0), 1.0)
            y0n = min(max(y0 / sc.input_height, 0.0), 1.0)
            x1n = min(max(x1 / sc.input_width, 0.0), 1.0)
            y1n = min(max(y1 / sc.input_height, 0.0), 1.0)
            if x1n <= x0n or y1n <= y0n:
                continue
            dets.append(
                Detection(
                    box=BoundingBox(x0n, y0n, x1n - x0n, y1n - y0n),
                    label=label,
                    confidence=float(min(max(score, 0.0), 1.0)),
                )
            )
        return nms(dets, self._nms_iou)

    @staticmethod
    def _rows_from_outputs(outputs) -> list[tuple[float, float, float, float, float, int]]:
        # Accepts (boxes, scores, labels) triples or a single (N, 6) tensor of
        # [x0, y0, x1, y1, score, class] rows, both common export layouts.
        if len(outputs) >= 3:
            boxes, scores, labels = outputs[0], outputs[1], outputs[2]
            boxes = np.asarray(boxes).reshape(-1, 4)
            scores = np.asarray(scores).reshape(-1)
            labels = np.asarray(labels).reshape(-1)
            return [
                (float(b[0]), float(b[1]), float(b[2]), float(b[3]), float(s), int(c))
                for b, s, c in zip(boxes, scores, labels)
            ]
        flat = np.asarray(outputs[0])
        flat = flat.reshape(-1, flat.shape[-1])
        if flat.shape[-1] != 6:
            raise ModelFormatError(
                f"unsupported output layout: expected (N, 6) rows, got {flat.shape}"
            )
        return [tuple(map(float, row[:5])) + (int(row[5]),) for row in flat]


def load_model_backend(
    path: str | Path,
    class_map: dict[int, DetectionLabel] | None = None,
    conf_thresh: float = 0.5,
    nms_iou: float = DEFAULT_NMS_IOU,
    sidecar_path: str | Path | None = None,
) -> OnnxDetector:
    """Load an ONNX detector and validate its sidecar config.

    The sidecar (``<model>.json`` by default) declares input size,
    normalization constants, the class list and a class_map; a class_map
    argument overrides the sidecar's. Every declared class index must be
    mapped, otherwise UnmappedClassError is raised here rather than at
    inference time.
    """
    model_path = Path(path)
    if not model_path.exists():
        raise ModelNotFoundError(f"model file not found: {model_path}")
    sidecar_file = Path(sidecar_path) if sidecar_path else model_path.with_suffix(".json")
    if not sidecar_file.exists():
        raise ModelNotFoundError(f"sidecar config not found: {sidecar_file}")
    sidecar = ModelSidecar.load(sidecar_file)
    if class_map is not None:
        sidecar = ModelSidecar(
            sidecar.input_width,
            sidecar.input_height,
            sidecar.mean,
            sidecar.std,
            sidecar.classes,
            dict(class_map),
        )
    missing = [c for c in sidecar.classes if c not in sidecar.class_map]
    if missing:
        raise UnmappedClassError(
            f"{sidecar_file}: declared classes {missing} have no class_map entry"
        )
    try:
        import onnxruntime
    except ImportError as exc:
        raise ModelFormatError(
            "onnxruntime is required for model backends; install seatwatch[onnx]"
        ) from exc
    try:
        session = onnxruntime.InferenceSession(str(model_path), providers=["CPUExecutionProvider"])
    except Exception as exc:
        raise ModelFormatError(f"{model_path}: not a loadable ONNX model: {exc}") from exc
    if len(session.get_inputs()) != 1:
        raise ModelFormatError(f"{model_path}: expected exactly one input tensor")
    return OnnxDetector(
        session,
        sidecar,
        conf_thresh,
        nms_iou,
        descriptor=f"onnx:{model_path.name}(conf>={conf_thresh})",
    )
