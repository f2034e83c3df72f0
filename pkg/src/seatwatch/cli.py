"""Command-line entry points for batch use and operations.

Every subcommand exits 0 on success and nonzero with a single-line
``error: ...`` message on failure; randomized subcommands take --seed and are
bit-reproducible under it.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__, imaging, metrics, scenegen
from .detect import (
    ClassifierNoise,
    DetectionLabel,
    DetectorNoise,
    load_model_backend,
    nms,
    oracle_classifier,
    oracle_detector,
)
from .errors import ConfigurationError, SeatwatchError
from .pipeline import PipelineConfig, SeatState, annotate_frame, process_frame, state_to_display
from .seatgrid import load_layout
from .scenegen import PRESETS, SceneSpec, generate_dataset, load_dataset, save_dataset


@click.group(name="seatwatch")
@click.version_option(__version__)
def cli():
    """Library seat-occupancy detection toolkit."""


def _fail(message: str) -> "SystemExit":
    click.echo(f"error: {message}", err=True)
    return SystemExit(1)


def _cleanup(paths: list[Path]) -> None:
    for path in paths:
        try:
            path.unlink(missing_ok=True)
        except OSError:
            pass


# --- preprocess -----------------------------------------------------------------

@cli.command()
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path(dir_okay=False))
def preprocess(input_path, output_path):
    """Equalize the V channel of INPUT_PATH and write OUTPUT_PATH."""
    img = imaging.load_image(input_path)
    imaging.save_image(imaging.preprocess(img), output_path)
    click.echo(f"wrote {output_path}")


# --- detect ----------------------------------------------------------------------

def _load_scene_spec(path: str) -> SceneSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "spec" in doc:  # dataset sidecar file
        doc = doc["spec"]
    return SceneSpec.from_json_dict(doc)


def _build_backends(backend, scene, model, frame, noise_args):
    if backend == "oracle":
        if scene is None:
            raise ConfigurationError("--backend oracle needs --scene")
        spec = _load_scene_spec(scene)
        size = (frame.width, frame.height)
        det_noise = DetectorNoise(
            confidence_jitter=noise_args["conf_jitter"],
            p_miss=noise_args["p_miss"],
            false_positive_rate=noise_args["fp_rate"],
            seed=noise_args["seed"],
        )
        cls_noise = ClassifierNoise(
            confidence_jitter=noise_args["conf_jitter"],
            p_flip=noise_args["flip_prob"],
            seed=noise_args["seed"],
        )
        return spec, oracle_detector(spec, size, det_noise), oracle_classifier(spec, size, cls_noise)
    if backend == "onnx":
        if model is None:
            raise ConfigurationError("--backend onnx needs --model")
        if scene is None:
            raise ConfigurationError(
                "--backend onnx still needs --scene for the crop classifier oracle"
            )
        spec = _load_scene_spec(scene)
        detector = load_model_backend(model)
        classifier = oracle_classifier(spec, (frame.width, frame.height))
        return spec, detector, classifier
    raise ConfigurationError(f"unknown backend {backend!r}")


def _report_table(report) -> str:
    lines = [f"frame {report.frame_id}  room {report.room_id}"]
    for obs in report.observations:
        color, glyph = state_to_display(obs.state)
        lines.append(f"  seat {obs.seat_id:>3}  {glyph}  {obs.state.value:<20} {color}")
    lines.append(f"classifier invocations: {report.classifier_invocations}")
    return "\n".join(lines)


noise_options = [
    click.option("--conf-jitter", type=float, default=0.0, show_default=True,
                 help="sigma of confidence noise on the oracle backends"),
    click.option("--p-miss", type=float, default=0.0, show_default=True,
                 help="oracle probability of dropping a true person"),
    click.option("--fp-rate", type=float, default=0.0, show_default=True,
                 help="expected spurious person boxes per frame"),
    click.option("--flip-prob", type=float, default=0.0, show_default=True,
                 help="oracle probability of flipping a crop verdict"),
    click.option("--seed", type=int, default=0, show_default=True),
]


def with_options(options):
    def wrap(f):
        for option in reversed(options):
            f = option(f)
        return f
    return wrap


@cli.command()
@click.option("--frame", "frame_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--layout", "layout_path", type=click.Path(exists=True, dir_okay=False),
              help="layout JSON; defaults to the scene's layout")
@click.option("--scene", type=click.Path(exists=True, dir_okay=False),
              help="scene spec JSON (or dataset sidecar) for oracle backends")
@click.option("--backend", type=click.Choice(["oracle", "onnx"]), default="oracle", show_default=True)
@click.option("--model", type=click.Path(), help="ONNX model path for --backend onnx")
@click.option("--person-conf", type=float, default=0.5, show_default=True)
@click.option("--objects-conf", type=float, default=0.5, show_default=True)
@click.option("--nms-iou", type=float, default=0.5, show_default=True)
@click.option("--out-of-service", type=str, default="", help="comma-separated seat ids")
@click.option("--out-report", type=click.Path(dir_okay=False))
@click.option("--out-annotated", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json", show_default=True)
@with_options(noise_options)
def detect(frame_path, layout_path, scene, backend, model, person_conf, objects_conf,
           nms_iou, out_of_service, out_report, out_annotated, fmt,
           conf_jitter, p_miss, fp_rate, flip_prob, seed):
    """Run the serial pipeline on one frame and report per-seat verdicts."""
    written: list[Path] = []
    try:
        frame = imaging.load_image(frame_path)
        noise_args = dict(conf_jitter=conf_jitter, p_miss=p_miss, fp_rate=fp_rate,
                          flip_prob=flip_prob, seed=seed)
        spec, detector, classifier = _build_backends(backend, scene, model, frame, noise_args)
        layout = load_layout(layout_path) if layout_path else spec.layout
        oos = frozenset(int(s) for s in out_of_service.split(",") if s.strip())
        cfg = PipelineConfig(person_conf=person_conf, objects_conf=objects_conf,
                             nms_iou=nms_iou, out_of_service=oos)
        report = process_frame(frame, layout, detector, classifier, cfg)
        if out_report:
            path = Path(out_report)
            written.append(path)
            path.write_text(report.to_json() + "\n", encoding="utf-8")
        if out_annotated:
            path = Path(out_annotated)
            written.append(path)
            imaging.save_image(annotate_frame(frame, layout, report), path)
        click.echo(report.to_json() if fmt == "json" else _report_table(report))
    except Exception:
        _cleanup(written)
        raise


# --- evaluate ---------------------------------------------------------------------

def _evaluate_dataset(dataset, noise_args, iou_thresh):
    from .metrics import (
        ConfusionCounts,
        EvaluationReport,
        LossSample,
        MatchResult,
        accuracy,
        average_precision,
        confusion_from_classifications,
        mae,
        match_detections,
        pr_curve,
        recognition_rate,
    )
    from .detect import CropLabel, iou

    det_noise = DetectorNoise(confidence_jitter=noise_args["conf_jitter"],
                              p_miss=noise_args["p_miss"],
                              false_positive_rate=noise_args["fp_rate"],
                              seed=noise_args["seed"])
    cls_noise = ClassifierNoise(confidence_jitter=noise_args["conf_jitter"],
                                p_flip=noise_args["flip_prob"],
                                seed=noise_args["seed"])

    state_counts = ConfusionCounts()
    crop_results = []
    all_flags = []
    total_truth = 0
    abs_errors = []

    for scene in dataset:
        spec, img, truth = scene.spec, scene.image, scene.truth
        size = (img.width, img.height)
        detector = oracle_detector(spec, size, det_noise)
        classifier = oracle_classifier(spec, size, cls_noise)
        report = process_frame(img, spec.layout, detector, classifier, timestamp=0.0)

        for obs in report.observations:
            actual = truth.seat_states[obs.seat_id]
            predicted_flag = obs.state == SeatState.SUSPECTED_OCCUPANCY
            actual_flag = actual == SeatState.SUSPECTED_OCCUPANCY
            state_counts = state_counts + ConfusionCounts(
                tp=predicted_flag and actual_flag,
                fp=predicted_flag and not actual_flag,
                fn=actual_flag and not predicted_flag,
                tn=not predicted_flag and not actual_flag,
            )
            if obs.classification is not None:
                actual_crop = (
                    CropLabel.OBJECTS if truth.item_flags[obs.seat_id] else CropLabel.NO_OBJECTS
                )
                crop_results.append((obs.classification.label, actual_crop))

        # detector PR over the same deterministic detections the pipeline saw
        repaired = imaging.preprocess(img)
        dets = [
            d for d in nms(detector.detect(repaired), 0.5)
            if d.label == DetectionLabel.PERSON
        ]
        truth_boxes = list(truth.person_boxes.values())
        match = match_detections(dets, truth_boxes, iou_thresh)
        all_flags.extend(match.flags)
        total_truth += len(truth_boxes)
        for det_obj, is_tp in match.flags:
            if is_tp:
                best = max(truth_boxes, key=lambda t: iou(det_obj.box, t))
                abs_errors.extend(
                    [abs(det_obj.box.x - best.x), abs(det_obj.box.y - best.y),
                     abs(det_obj.box.w - best.w), abs(det_obj.box.h - best.h)]
                )

    pooled = MatchResult(
        flags=tuple(sorted(all_flags, key=lambda f: (-f[0].confidence, f[0].box.x, f[0].box.y))),
        fn=total_truth - sum(1 for _, t in all_flags if t),
    )
    pr = pr_curve(pooled, total_truth)
    box_mae = None
    if abs_errors:
        box_mae = mae(LossSample(tuple(abs_errors), tuple(0.0 for _ in abs_errors)))
    crop_confusion = confusion_from_classifications(crop_results)
    rate = None
    if total_truth > 0:
        rate = recognition_rate(sum(1 for _, t in all_flags if t), total_truth)
    return EvaluationReport(
        counts=state_counts,
        accuracy=accuracy(state_counts),
        mae=box_mae,
        pr=tuple(pr),
        ap=average_precision(pr),
        recognition_rate=rate,
    ), crop_confusion


@cli.command()
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--iou-thresh", type=float, default=0.5, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--pr-csv", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["json", "table"]), default="json", show_default=True)
@with_options(noise_options)
def evaluate(dataset_dir, iou_thresh, out, pr_csv, fmt,
             conf_jitter, p_miss, fp_rate, flip_prob, seed):
    """Evaluate oracle backends (optionally degraded) against a dataset."""
    dataset = load_dataset(dataset_dir)
    noise_args = dict(conf_jitter=conf_jitter, p_miss=p_miss, fp_rate=fp_rate,
                      flip_prob=flip_prob, seed=seed)
    report, crop_confusion = _evaluate_dataset(dataset, noise_args, iou_thresh)
    doc = report.to_json_dict()
    doc["classifier_confusion"] = {
        "tp": crop_confusion.tp, "fp": crop_confusion.fp,
        "fn": crop_confusion.fn, "tn": crop_confusion.tn,
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if fmt == "table":
        lines = [
            "seat states (positive = suspected occupancy)",
            metrics.confusion_table(report.counts),
            f"accuracy: {report.accuracy:.6f}",
            f"recognition rate: {report.recognition_rate}",
            f"AP: {report.ap}",
            f"box MAE: {report.mae}",
            "",
            "classifier crops (positive = objects)",
            metrics.confusion_table(crop_confusion),
        ]
        text = "\n".join(lines)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    if pr_csv:
        Path(pr_csv).write_text(metrics.pr_to_csv(list(report.pr)), encoding="utf-8")
    click.echo(text)


# --- gen-dataset ------------------------------------------------------------------

@cli.command("gen-dataset")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--preset", type=click.Choice(sorted(PRESETS)), help="named parameter preset")
@click.option("--n", type=int, default=None, help="number of scenes")
@click.option("--rows", type=int, default=4, show_default=True)
@click.option("--cols", type=int, default=4, show_default=True)
@click.option("--person-prob", type=float, default=None)
@click.option("--item-prob", type=float, default=None)
@click.option("--gain-lo", type=float, default=None)
@click.option("--gain-hi", type=float, default=None)
@click.option("--width", type=int, default=192, show_default=True)
@click.option("--height", type=int, default=192, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--train-ratio", type=float, default=None,
              help="also write split.json with train/test scene indices")
def gen_dataset(out_dir, preset, n, rows, cols, person_prob, item_prob,
                gain_lo, gain_hi, width, height, seed, train_ratio):
    """Generate a labeled synthetic dataset on disk."""
    from .seatgrid import grid_layout

    params = dict(PRESETS[preset]) if preset else {}
    n = n if n is not None else params.get("n", 16)
    person_prob = person_prob if person_prob is not None else params.get("person_prob", 0.5)
    item_prob = item_prob if item_prob is not None else params.get("item_prob", 0.4)
    preset_range = params.get("gain_range", (1.0, 1.0))
    gain_lo = gain_lo if gain_lo is not None else preset_range[0]
    gain_hi = gain_hi if gain_hi is not None else preset_range[1]

    layout = grid_layout(rows, cols)
    dataset = generate_dataset(
        n, layout, person_prob, item_prob, (gain_lo, gain_hi), seed,
        width=width, height=height,
    )
    manifest = save_dataset(dataset, out_dir)
    if train_ratio is not None:
        train_idx, test_idx = scenegen.split_indices(dataset, train_ratio)
        split_doc = {"train": train_idx, "test": test_idx, "train_ratio": train_ratio}
        (Path(out_dir) / "split.json").write_text(
            json.dumps(split_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    click.echo(f"wrote {n} scenes to {manifest.parent}")


# --- serve -------------------------------------------------------------------------

@cli.command()
@click.option("--db", "db_path", default="seatwatch.db", show_default=True, type=click.Path(dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--demo", is_flag=True, help="seed a 16-seat demo room on startup")
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), help="serve a built dashboard at /ui")
@click.option("--watch-dir", type=click.Path(file_okay=False), help="poll a drop folder of frames")
@click.option("--watch-room", type=str, help="room receiving watched frames")
@click.option("--watch-interval", type=float, default=2.0, show_default=True)
def serve(db_path, host, port, demo, ui_dir, watch_dir, watch_room, watch_interval):
    """Run the HTTP service until interrupted."""
    import threading

    import uvicorn

    from .service import SeatService, create_app, scan_watch_directory, seed_demo_room

    service = SeatService(db_path)
    try:
        if demo and not any(r["room_id"] == "demo" for r in service.list_rooms()):
            seed_demo_room(service, "demo")
            click.echo("seeded demo room 'demo'")
        app = create_app(service, ui_dir=ui_dir)
        if watch_dir:
            if not watch_room:
                raise ConfigurationError("--watch-dir needs --watch-room")
            stop = threading.Event()

            def poll():
                while not stop.is_set():
                    try:
                        scan_watch_directory(service, watch_room, watch_dir)
                    except SeatwatchError as exc:
                        click.echo(f"watch: {exc}", err=True)
                    stop.wait(watch_interval)

            threading.Thread(target=poll, daemon=True).start()
        try:
            uvicorn.run(app, host=host, port=port, log_level="info")
        except OSError as exc:
            raise ConfigurationError(f"cannot bind {host}:{port}: {exc}") from exc
        finally:
            if watch_dir:
                stop.set()
    finally:
        service.close()


def main() -> None:
    try:
        cli(standalone_mode=True)
    except SeatwatchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
