"""Re-run the three 16-seat field scenarios end to end and print the verdict
grids; optionally save annotated frames.

    python scripts/field_demo.py --out-dir /tmp/field_demo
"""

import argparse
from pathlib import Path

from seatwatch import imaging, scenegen
from seatwatch.detect import oracle_classifier, oracle_detector
from seatwatch.pipeline import process_frame, state_to_display
from seatwatch.scenegen import ItemKind, SceneSpec, SeatContent
from seatwatch.seatgrid import grid_layout

SIZE = (384, 384)
SCENARIOS = {
    "morning-strong-light": (6, 12),
    "evening-weak-light": (7, 14, 16),
    "sparse-room": (1, 3, 5, 8, 9, 11, 12, 14),
}
LIGHTING = {"morning-strong-light": 1.6, "evening-weak-light": 0.45, "sparse-room": 1.0}


def run(out_dir):
    layout = grid_layout(4, 4)
    for name, occupied in SCENARIOS.items():
        seats = {s: SeatContent(person=True) for s in range(1, 17) if s not in occupied}
        for s in occupied:
            seats[s] = SeatContent(items=(ItemKind.BOOK,))
        spec = SceneSpec(layout=layout, seats=seats, lighting=LIGHTING[name], seed=17)
        frame, _ = scenegen.render(spec, *SIZE)
        report = process_frame(
            frame, layout, oracle_detector(spec, SIZE), oracle_classifier(spec, SIZE)
        )
        print(f"\n=== {name} (items left at {sorted(occupied)}) ===")
        for row in range(4):
            cells = []
            for col in range(4):
                obs = report.observation(row * 4 + col + 1)
                _, glyph = state_to_display(obs.state)
                cells.append(f"{obs.seat_id:>2}{glyph}")
            print("  " + "  ".join(cells))
        flagged = report.seats_in_state
        from seatwatch.pipeline import SeatState

        print(f"  suspected: {flagged(SeatState.SUSPECTED_OCCUPANCY)}")
        print(f"  classifier ran on {report.classifier_invocations} of 16 seats")
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            from seatwatch.pipeline import annotate_frame

            imaging.save_image(annotate_frame(frame, layout, report), out / f"{name}.png")
            print(f"  annotated frame -> {out / (name + '.png')}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=None, help="save annotated frames here")
    run(parser.parse_args().out_dir)
