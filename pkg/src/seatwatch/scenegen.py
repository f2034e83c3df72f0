"""Procedural top-view study-room scenes with exact ground truth.

Stands in for the photorealistic virtual dataset: only geometry and labels
matter for verifying the pipeline, so each seat is a flat-shaded desk
rectangle, a person is an ellipse with seed-jittered position, and items are
small colored rectangles. Every scene is a pure function of its spec, and the
ground truth is derived from the spec by the same decision rule the pipeline
uses, which is what lets zero-noise oracle backends close the loop exactly.

The palette is chosen so that a scene keeps at least two distinct V levels
under any exposure gain in [0.1, 10]: the background is dark enough to stay
unsaturated at gain 10 and every surface stays above black at gain 0.1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .detect import BoundingBox
from .errors import ConfigurationError, RenderError
from .imaging import RasterImage, decode_image, encode_png, hsv_to_rgb, rgb_to_hsv
from .pipeline import SeatState, derive_seat_states
from .seatgrid import SeatLayout, SeatRegion, layout_from_json_dict

__all__ = [
    "ItemKind",
    "Viewpoint",
    "SeatContent",
    "SceneSpec",
    "GroundTruth",
    "GeneratedScene",
    "Dataset",
    "ground_truth",
    "render",
    "apply_exposure",
    "generate_dataset",
    "split",
    "save_dataset",
    "load_dataset",
    "PRESETS",
]

MIN_RENDER_SIZE = 64
MAX_SHEAR = 0.4

# RGB palette; V levels spread so exposure gains never collapse the scene
# to a single luminance level (see module docstring).
BACKGROUND_RGB = (13, 14, 16)     # v ~ 0.063
DESK_RGB = (89, 66, 44)           # v ~ 0.349
PERSON_RGB = (47, 112, 140)       # v ~ 0.549
ITEM_RGB = {
    "book": (196, 60, 60),        # v ~ 0.769
    "bag": (64, 140, 84),         # v ~ 0.549
    "box": (203, 203, 208),       # v ~ 0.816
}

DESK_FRACTION = 0.75              # desk side length as a fraction of the region
PERSON_RX, PERSON_RY = 0.225, 0.275  # ellipse radii in region fractions
PERSON_JITTER = 0.10              # max |offset| of the person center, region fractions
ITEM_SLOTS = ((-0.18, -0.14), (0.10, 0.04), (-0.04, 0.18))
ITEM_JITTER = 0.03
ITEM_SIZE = {"book": (0.16, 0.10), "bag": (0.18, 0.14), "box": (0.14, 0.14)}


class ItemKind(str, Enum):
    BOOK = "book"
    BAG = "bag"
    BOX = "box"


@dataclass(frozen=True)
class Viewpoint:
    """Camera model: top view, or a side view approximated by a horizontal
    shear of all shapes about the frame center."""

    kind: str = "top"
    shear: float = 0.0

    def __post_init__(self):
        if self.kind not in ("top", "side_skew"):
            raise ConfigurationError(f"unknown viewpoint kind {self.kind!r}")
        if self.kind == "top" and self.shear != 0.0:
            raise ConfigurationError("top viewpoint takes no shear")
        if abs(self.shear) > MAX_SHEAR:
            raise ConfigurationError(f"|shear| must be <= {MAX_SHEAR}, got {self.shear}")

    @classmethod
    def top(cls) -> "Viewpoint":
        return cls("top", 0.0)

    @classmethod
    def side_skew(cls, shear: float) -> "Viewpoint":
        return cls("side_skew", shear)


@dataclass(frozen=True)
class SeatContent:
    person: bool = False
    items: tuple[ItemKind, ...] = ()


@dataclass(frozen=True)
class SceneSpec:
    layout: SeatLayout
    seats: dict[int, SeatContent]
    lighting: float = 1.0
    viewpoint: Viewpoint = field(default_factory=Viewpoint.top)
    seed: int = 0

    def __post_init__(self):
        if self.lighting <= 0:
            raise ConfigurationError(f"lighting gain must be > 0, got {self.lighting}")
        known = set(self.layout.seat_ids)
        for seat_id in self.seats:
            if seat_id not in known:
                raise ConfigurationError(f"spec references unknown seat_id {seat_id}")

    def content(self, seat_id: int) -> SeatContent:
        return self.seats.get(seat_id, SeatContent())

    @property
    def person_seats(self) -> set[int]:
        return {s for s, c in self.seats.items() if c.person}

    @property
    def item_seats(self) -> set[int]:
        return {s for s, c in self.seats.items() if c.items}

    def to_json_dict(self) -> dict:
        return {
            "layout": self.layout.to_json_dict(),
            "seats": {
                str(s): {"person": c.person, "items": [i.value for i in c.items]}
                for s, c in sorted(self.seats.items())
            },
            "lighting": self.lighting,
            "viewpoint": {"kind": self.viewpoint.kind, "shear": self.viewpoint.shear},
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SceneSpec":
        seats = {
            int(s): SeatContent(
                person=bool(c.get("person", False)),
                items=tuple(ItemKind(i) for i in c.get("items", [])),
            )
            for s, c in doc.get("seats", {}).items()
        }
        vp = doc.get("viewpoint", {"kind": "top", "shear": 0.0})
        return cls(
            layout=layout_from_json_dict(doc["layout"]),
            seats=seats,
            lighting=float(doc.get("lighting", 1.0)),
            viewpoint=Viewpoint(vp.get("kind", "top"), float(vp.get("shear", 0.0))),
            seed=int(doc.get("seed", 0)),
        )


@dataclass(frozen=True)
class GroundTruth:
    person_boxes: dict[int, BoundingBox]
    item_flags: dict[int, bool]
    seat_states: dict[int, SeatState]


def _seat_rng(seed: int, seat_id: int, stream: int) -> np.random.Generator:
    # One independent stream per (scene, seat, shape) so adding a person at
    # one seat never moves the shapes at another.
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, seat_id, stream]))


def _person_geometry(spec: SceneSpec, region: SeatRegion) -> tuple[float, float, float, float]:
    """(cx, cy, rx, ry) of the person ellipse in normalized frame coordinates."""
    rng = _seat_rng(spec.seed, region.seat_id, 0)
    jx = float(rng.uniform(-PERSON_JITTER, PERSON_JITTER)) * region.w
    jy = float(rng.uniform(-PERSON_JITTER, PERSON_JITTER)) * region.h
    cx = region.x + region.w / 2.0 + jx
    cy = region.y + region.h / 2.0 + jy
    return cx, cy, PERSON_RX * region.w, PERSON_RY * region.h


def _item_geometry(
    spec: SceneSpec, region: SeatRegion, index: int, kind: ItemKind
) -> tuple[float, float, float, float]:
    """(x, y, w, h) of one item rectangle in normalized frame coordinates."""
    rng = _seat_rng(spec.seed, region.seat_id, 1 + index)
    sx, sy = ITEM_SLOTS[index % len(ITEM_SLOTS)]
    jx = float(rng.uniform(-ITEM_JITTER, ITEM_JITTER))
    jy = float(rng.uniform(-ITEM_JITTER, ITEM_JITTER))
    iw, ih = ITEM_SIZE[kind.value]
    cx = region.x + region.w * (0.5 + sx + jx)
    cy = region.y + region.h * (0.5 + sy + jy)
    return cx - iw * region.w / 2.0, cy - ih * region.h / 2.0, iw * region.w, ih * region.h


def _shear_of(spec: SceneSpec) -> float:
    return spec.viewpoint.shear if spec.viewpoint.kind == "side_skew" else 0.0


def _sheared_hull(x0: float, y0: float, x1: float, y1: float, k: float) -> tuple[float, float, float, float]:
    """Axis-aligned hull of a rectangle sheared by x' = x + k*(y - 0.5)."""
    xs = [x0 + k * (y0 - 0.5), x0 + k * (y1 - 0.5), x1 + k * (y0 - 0.5), x1 + k * (y1 - 0.5)]
    return min(xs), y0, max(xs), y1


def _clamped_box(x0: float, y0: float, x1: float, y1: float) -> BoundingBox:
    x0c, y0c = max(0.0, x0), max(0.0, y0)
    x1c, y1c = min(1.0, x1), min(1.0, y1)
    return BoundingBox(x0c, y0c, x1c - x0c, y1c - y0c)


def ground_truth(spec: SceneSpec) -> GroundTruth:
    """Labels implied by a spec; pure function, no rendering required."""
    k = _shear_of(spec)
    person_boxes = {}
    for region in spec.layout.regions:
        if not spec.content(region.seat_id).person:
            continue
        cx, cy, rx, ry = _person_geometry(spec, region)
        half_w = math.sqrt(rx * rx + (k * ry) ** 2)  # hull of the sheared ellipse
        cx_sheared = cx + k * (cy - 0.5)
        person_boxes[region.seat_id] = _clamped_box(
            cx_sheared - half_w, cy - ry, cx_sheared + half_w, cy + ry
        )
    item_flags = {r.seat_id: bool(spec.content(r.seat_id).items) for r in spec.layout.regions}
    states = derive_seat_states(
        spec.layout.seat_ids,
        person_seats=spec.person_seats,
        item_seats={s for s, flag in item_flags.items() if flag},
    )
    return GroundTruth(person_boxes=person_boxes, item_flags=item_flags, seat_states=states)


class _Painter:
    """Row-wise rasterizer; shear is a per-row horizontal shift."""

    def __init__(self, width: int, height: int, shear: float):
        self.width = width
        self.height = height
        self.shear = shear
        self.buf = np.empty((height, width, 3), dtype=np.uint8)
        self.buf[:] = BACKGROUND_RGB
        self.rows_y = (np.arange(height) + 0.5) / height  # row center, normalized
        self.cols = np.arange(width)

    def _fill(self, active: np.ndarray, left: np.ndarray, right: np.ndarray, rgb) -> None:
        left_px = np.floor(left * self.width + 1e-9).astype(np.int64)
        right_px = np.floor(right * self.width + 1e-9).astype(np.int64)
        mask = (
            active[:, None]
            & (self.cols[None, :] >= left_px[:, None])
            & (self.cols[None, :] < right_px[:, None])
        )
        self.buf[mask] = rgb

    def rect(self, x0: float, y0: float, x1: float, y1: float, rgb) -> None:
        y = self.rows_y
        active = (y >= y0) & (y < y1)
        shift = self.shear * (y - 0.5)
        self._fill(active, x0 + shift, x1 + shift, rgb)

    def ellipse(self, cx: float, cy: float, rx: float, ry: float, rgb) -> None:
        y = self.rows_y
        t = (y - cy) / ry
        active = np.abs(t) <= 1.0
        half = rx * np.sqrt(np.clip(1.0 - t * t, 0.0, None))
        shift = self.shear * (y - 0.5)
        self._fill(active, cx - half + shift, cx + half + shift, rgb)


def render(spec: SceneSpec, width: int, height: int) -> tuple[RasterImage, GroundTruth]:
    """Deterministic flat-shaded render of a scene plus its ground truth."""
    if width < MIN_RENDER_SIZE or height < MIN_RENDER_SIZE:
        raise RenderError(f"render size must be >= {MIN_RENDER_SIZE}px, got {width}x{height}")
    k = _shear_of(spec)
    painter = _Painter(width, height, k)

    for region in spec.layout.regions:
        pad_x = region.w * (1 - DESK_FRACTION) / 2.0
        pad_y = region.h * (1 - DESK_FRACTION) / 2.0
        painter.rect(
            region.x + pad_x, region.y + pad_y,
            region.x + region.w - pad_x, region.y + region.h - pad_y,
            DESK_RGB,
        )
    for region in spec.layout.regions:
        content = spec.content(region.seat_id)
        if content.person:
            cx, cy, rx, ry = _person_geometry(spec, region)
            painter.ellipse(cx, cy, rx, ry, PERSON_RGB)
        for i, kind in enumerate(content.items):
            x, y, w, h = _item_geometry(spec, region, i, kind)
            painter.rect(x, y, x + w, y + h, ITEM_RGB[kind.value])

    img = RasterImage(painter.buf)
    if spec.lighting != 1.0:
        img = apply_exposure(img, spec.lighting)
    return img, ground_truth(spec)


def apply_exposure(img: RasterImage, gain: float) -> RasterImage:
    """Scale the V channel by gain (clamped to [0, 1]); hue/sat preserved."""
    if gain <= 0:
        raise ConfigurationError(f"gain must be > 0, got {gain}")
    hsv = rgb_to_hsv(img)
    out = hsv.pixels.copy()
    out[..., 2] = np.clip(out[..., 2] * gain, 0.0, 1.0)
    from .imaging import HsvImage

    return hsv_to_rgb(HsvImage(out))


# --- dataset generation ------------------------------------------------------------

@dataclass(frozen=True)
class GeneratedScene:
    spec: SceneSpec
    image: RasterImage
    truth: GroundTruth


@dataclass(frozen=True)
class Dataset:
    scenes: tuple[GeneratedScene, ...]
    seed: int
    params: dict

    def __len__(self) -> int:
        return len(self.scenes)

    def __iter__(self):
        return iter(self.scenes)


def generate_dataset(
    n: int,
    layout: SeatLayout,
    person_prob: float,
    item_prob: float,
    gain_range: tuple[float, float],
    seed: int,
    width: int = 192,
    height: int = 192,
    allow_items_with_person: bool = False,
) -> Dataset:
    """Sample n independent scenes from the seeded generator.

    Per seat: a person with probability person_prob; items only at
    person-free seats with probability item_prob (the two staged phenomena),
    unless allow_items_with_person. Exposure gains are uniform in gain_range.
    """
    if n < 1:
        raise ConfigurationError(f"dataset size must be >= 1, got {n}")
    if not (0.0 <= person_prob <= 1.0 and 0.0 <= item_prob <= 1.0):
        raise ConfigurationError("probabilities must lie in [0, 1]")
    lo, hi = gain_range
    if not (0 < lo <= hi):
        raise ConfigurationError(f"need 0 < lo <= hi in gain_range, got {gain_range}")

    scenes = []
    kinds = list(ItemKind)
    for index in range(n):
        ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, index])
        rng = np.random.default_rng(ss)
        scene_seed = int(rng.integers(0, 2**63 - 1))
        seats = {}
        for seat_id in layout.seat_ids:
            person = bool(rng.random() < person_prob)
            items: tuple[ItemKind, ...] = ()
            may_have_items = (not person) or allow_items_with_person
            if may_have_items and rng.random() < item_prob:
                count = int(rng.integers(1, len(ITEM_SLOTS) + 1))
                items = tuple(kinds[int(i)] for i in rng.integers(0, len(kinds), size=count))
            if person or items:
                seats[seat_id] = SeatContent(person=person, items=items)
        gain = float(rng.uniform(lo, hi))
        spec = SceneSpec(layout=layout, seats=seats, lighting=gain, seed=scene_seed)
        image, truth = render(spec, width, height)
        scenes.append(GeneratedScene(spec=spec, image=image, truth=truth))
    params = {
        "n": n,
        "person_prob": person_prob,
        "item_prob": item_prob,
        "gain_lo": lo,
        "gain_hi": hi,
        "width": width,
        "height": height,
        "allow_items_with_person": allow_items_with_person,
    }
    return Dataset(scenes=tuple(scenes), seed=seed, params=params)


def split_indices(dataset: Dataset, train_ratio: float) -> tuple[list[int], list[int]]:
    """Scene indices of a deterministic shuffled split; train size =
    round(n * train_ratio), remainder to test."""
    n = len(dataset)
    if not (0.0 < train_ratio < 1.0):
        raise ConfigurationError(f"train_ratio must lie in (0, 1), got {train_ratio}")
    train_n = int(math.floor(n * train_ratio + 0.5))
    if n >= 2 and (train_n == 0 or train_n == n):
        raise ConfigurationError(
            f"ratio {train_ratio} leaves one side empty for n={n}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([dataset.seed & 0xFFFFFFFFFFFFFFFF, 0x5B117]))
    order = rng.permutation(n)
    return [int(i) for i in order[:train_n]], [int(i) for i in order[train_n:]]


def split(dataset: Dataset, train_ratio: float) -> tuple[list[GeneratedScene], list[GeneratedScene]]:
    """Deterministic shuffled split into (train, test) scene lists."""
    train_idx, test_idx = split_indices(dataset, train_ratio)
    return [dataset.scenes[i] for i in train_idx], [dataset.scenes[i] for i in test_idx]


# Documentation-parity presets mirroring the reported dataset sizes; the
# counts are reproduced, the photos obviously are not.
PRESETS: dict[str, dict] = {
    "paper-a": {"n": 103, "person_prob": 0.5, "item_prob": 0.4, "gain_range": (0.5, 2.0)},
    "paper-b": {"n": 206, "person_prob": 0.5, "item_prob": 0.4, "gain_range": (0.5, 2.0)},
    "paper-366": {"n": 366, "person_prob": 0.5, "item_prob": 0.4, "gain_range": (0.5, 2.0)},
}


# --- on-disk format ----------------------------------------------------------------

def _truth_json_dict(truth: GroundTruth) -> dict:
    return {
        "person_boxes": {
            str(s): [b.x, b.y, b.w, b.h] for s, b in sorted(truth.person_boxes.items())
        },
        "item_flags": {str(s): v for s, v in sorted(truth.item_flags.items())},
        "seat_states": {str(s): st.value for s, st in sorted(truth.seat_states.items())},
    }


def _truth_from_json_dict(doc: dict) -> GroundTruth:
    return GroundTruth(
        person_boxes={
            int(s): BoundingBox(*[float(v) for v in b]) for s, b in doc["person_boxes"].items()
        },
        item_flags={int(s): bool(v) for s, v in doc["item_flags"].items()},
        seat_states={int(s): SeatState(v) for s, v in doc["seat_states"].items()},
    )


def _dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_dataset(dataset: Dataset, out_dir: str | Path) -> Path:
    """One PNG + one ground-truth JSON per scene, plus a manifest that is
    sufficient to regenerate the directory bit-exactly."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, scene in enumerate(dataset.scenes):
        image_name = f"scene_{i:05d}.png"
        truth_name = f"scene_{i:05d}.json"
        (out / image_name).write_bytes(encode_png(scene.image))
        _dump_json(
            {"spec": scene.spec.to_json_dict(), "truth": _truth_json_dict(scene.truth)},
            out / truth_name,
        )
        entries.append({"index": i, "image": image_name, "truth": truth_name, "seed": scene.spec.seed})
    manifest = {
        "format": "seatwatch-dataset/1",
        "seed": dataset.seed,
        "params": dataset.params,
        "scenes": entries,
    }
    _dump_json(manifest, out / "manifest.json")
    return out / "manifest.json"


def load_dataset(in_dir: str | Path) -> Dataset:
    """Load a saved dataset, verifying the manifest against the sidecars."""
    root = Path(in_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise ConfigurationError(f"no manifest.json in {root}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != "seatwatch-dataset/1":
        raise ConfigurationError(f"{manifest_path}: unknown dataset format")
    scenes = []
    for entry in manifest["scenes"]:
        image_path = root / entry["image"]
        truth_path = root / entry["truth"]
        if not image_path.exists() or not truth_path.exists():
            raise ConfigurationError(f"manifest mismatch: missing {entry['image']}/{entry['truth']}")
        doc = json.loads(truth_path.read_text(encoding="utf-8"))
        spec = SceneSpec.from_json_dict(doc["spec"])
        if spec.seed != entry["seed"]:
            raise ConfigurationError(f"manifest mismatch: seed differs for {entry['truth']}")
        truth = _truth_from_json_dict(doc["truth"])
        image = decode_image(image_path.read_bytes())
        scenes.append(GeneratedScene(spec=spec, image=image, truth=truth))
    return Dataset(scenes=tuple(scenes), seed=int(manifest["seed"]), params=dict(manifest["params"]))
