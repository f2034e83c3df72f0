"""Seat layouts and frame segmentation.

A layout maps normalized rectangles to seat ids. Frames are cut along pixel
boundaries floor(t * size) so that the crops of a full grid partition the
frame with no gap or overlap; a tiny epsilon guards against coordinates that
drifted a few ulps below their decimal value on the way through JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import ConfigurationError, LayoutError, SegmentationError
from .imaging import RasterImage

if TYPE_CHECKING:  # pragma: no cover
    from .detect import Detection

_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class SeatRegion:
    """One seat's rectangle in normalized [0, 1] frame coordinates."""

    seat_id: int
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.seat_id < 1:
            raise LayoutError(f"seat_id must be positive, got {self.seat_id}", self.seat_id)
        if self.w <= 0 or self.h <= 0:
            raise LayoutError(f"seat {self.seat_id}: region must have positive extent", self.seat_id)
        if self.x < 0 or self.y < 0 or self.x + self.w > 1 + _EDGE_EPS or self.y + self.h > 1 + _EDGE_EPS:
            raise LayoutError(f"seat {self.seat_id}: region exceeds the unit square", self.seat_id)

    def contains(self, px: float, py: float) -> bool:
        """Closed-rectangle point containment (boundaries included)."""
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h


@dataclass(frozen=True)
class SeatLayout:
    room_id: str
    regions: tuple[SeatRegion, ...]

    def __post_init__(self):
        if not self.regions:
            raise LayoutError("layout has no seat regions")
        seen = set()
        for r in self.regions:
            if r.seat_id in seen:
                raise LayoutError(f"duplicate seat_id {r.seat_id}", r.seat_id)
            seen.add(r.seat_id)

    @property
    def seat_ids(self) -> list[int]:
        return [r.seat_id for r in self.regions]

    def region(self, seat_id: int) -> SeatRegion:
        for r in self.regions:
            if r.seat_id == seat_id:
                return r
        raise LayoutError(f"unknown seat_id {seat_id}", seat_id)

    def to_json_dict(self) -> dict:
        return {
            "room_id": self.room_id,
            "regions": [
                {"seat_id": r.seat_id, "x": r.x, "y": r.y, "w": r.w, "h": r.h}
                for r in self.regions
            ],
        }


@dataclass(frozen=True, eq=False)
class SubImage:
    """Crop of one seat region plus its pixel offset in the parent frame."""

    seat_id: int
    crop: RasterImage
    origin: tuple[int, int]  # (x_px, y_px)


def grid_layout(rows: int, cols: int, room_id: str = "room") -> SeatLayout:
    """Uniform rows x cols grid; seat ids are row-major starting at 1."""
    if rows < 1 or cols < 1:
        raise ConfigurationError(f"grid needs rows, cols >= 1, got {rows}x{cols}")
    xs = [c / cols for c in range(cols + 1)]
    ys = [r / rows for r in range(rows + 1)]
    regions = []
    for r in range(rows):
        for c in range(cols):
            regions.append(
                SeatRegion(
                    seat_id=r * cols + c + 1,
                    x=xs[c],
                    y=ys[r],
                    w=xs[c + 1] - xs[c],
                    h=ys[r + 1] - ys[r],
                )
            )
    return SeatLayout(room_id=room_id, regions=tuple(regions))


def _cut(t: float, size: int) -> int:
    # epsilon pulls values a few ulps under an integer (0.57*100 == 56.999...)
    # back onto it; exact boundaries are unaffected.
    return min(int(math.floor(t * size + _EDGE_EPS)), size)


def pixel_bounds(region: SeatRegion, width: int, height: int) -> tuple[int, int, int, int]:
    """(x0, y0, x1, y1) pixel bounds of a region in a width x height frame."""
    x0, x1 = _cut(region.x, width), _cut(region.x + region.w, width)
    y0, y1 = _cut(region.y, height), _cut(region.y + region.h, height)
    return x0, y0, x1, y1


def segment(frame: RasterImage, layout: SeatLayout) -> list[SubImage]:
    """Cut the frame into one SubImage per seat region.

    Raises SegmentationError when a region rounds to zero pixels, naming the
    seat.
    """
    out = []
    for region in layout.regions:
        x0, y0, x1, y1 = pixel_bounds(region, frame.width, frame.height)
        if x1 <= x0 or y1 <= y0:
            raise SegmentationError(
                f"seat {region.seat_id}: region collapses to zero pixels "
                f"at {frame.width}x{frame.height}; layout too fine",
                region.seat_id,
            )
        crop = RasterImage(frame.pixels[y0:y1, x0:x1].copy())
        out.append(SubImage(seat_id=region.seat_id, crop=crop, origin=(x0, y0)))
    return out


def assign_detections(
    detections: "list[Detection]", layout: SeatLayout
) -> tuple[dict[int, "list[Detection]"], "list[Detection]"]:
    """Assign each detection to the seat region containing its box center.

    Returns (seat_id -> detections, unassigned). A center on a shared
    boundary goes to the smallest containing seat_id.
    """
    assigned: dict[int, list] = {}
    unassigned = []
    for det in detections:
        cx, cy = det.box.center
        seat = None
        for region in layout.regions:
            if region.contains(cx, cy) and (seat is None or region.seat_id < seat):
                seat = region.seat_id
        if seat is None:
            unassigned.append(det)
        else:
            assigned.setdefault(seat, []).append(det)
    return assigned, unassigned


# --- layout config file ----------------------------------------------------------

def parse_layout(text: str, source: str = "<layout>") -> SeatLayout:
    """Parse and validate a layout JSON document.

    Syntax errors surface with their line/column; semantic errors name the
    region index and seat_id.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LayoutError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise LayoutError(f"{source}: top level must be an object")
    room_id = doc.get("room_id")
    if not isinstance(room_id, str) or not room_id:
        raise LayoutError(f"{source}: 'room_id' must be a non-empty string")
    raw_regions = doc.get("regions")
    if not isinstance(raw_regions, list) or not raw_regions:
        raise LayoutError(f"{source}: 'regions' must be a non-empty list")
    regions = []
    for i, raw in enumerate(raw_regions):
        if not isinstance(raw, dict):
            raise LayoutError(f"{source}: regions[{i}] must be an object")
        try:
            seat_id = int(raw["seat_id"])
            rect = {k: float(raw[k]) for k in ("x", "y", "w", "h")}
        except (KeyError, TypeError, ValueError) as exc:
            raise LayoutError(
                f"{source}: regions[{i}]: needs numeric seat_id, x, y, w, h ({exc})"
            ) from exc
        try:
            regions.append(SeatRegion(seat_id=seat_id, **rect))
        except LayoutError as exc:
            raise LayoutError(f"{source}: regions[{i}]: {exc}", exc.seat_id) from exc
    try:
        return SeatLayout(room_id=room_id, regions=tuple(regions))
    except LayoutError as exc:
        raise LayoutError(f"{source}: {exc}", exc.seat_id) from exc


def load_layout(path: str | Path) -> SeatLayout:
    with open(path, "r", encoding="utf-8") as f:
        return parse_layout(f.read(), source=str(path))


def layout_from_json_dict(doc: dict) -> SeatLayout:
    return parse_layout(json.dumps(doc), source="<payload>")
